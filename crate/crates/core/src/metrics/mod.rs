mod fields;
mod report;
mod section;
mod stats;

pub use fields::{compare_fields, wss_map, FieldComparison, WssMap};
pub use report::{
    bytes_hash, file_hash, write_vtk_structured, EvaluationReport, Provenance, Record, RecordValue, ReportFormat, ReportMetadata,
    VtkField, REPORT_SCHEMA_VERSION,
};
pub use section::{
    flow_rate, mass_imbalance, pressure_drop_direct, section_mean_pressure, CrossSection, SectionShape, SECTION_POINTS,
};
pub use stats::{mean_shift, r_squared, relative_error_l2};
