use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordValue {
    Scalar {
        #[serde(deserialize_with = "nan_from_null")]
        value: f64,
    },
    Series {
        times: Vec<f64>,
        #[serde(deserialize_with = "nans_from_null")]
        values: Vec<f64>,
    },
}

// JSON has no NaN; serde_json writes it as null.
fn nan_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn nans_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    Ok(Vec::<Option<f64>>::deserialize(d)?.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub name: String,
    pub unit: String,
    #[serde(flatten)]
    pub value: RecordValue,
}

impl Record {
    pub fn scalar(name: impl Into<String>, unit: impl Into<String>, value: f64) -> Self {
        Record {
            name: name.into(),
            unit: unit.into(),
            value: RecordValue::Scalar { value },
        }
    }

    pub fn series(name: impl Into<String>, unit: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Self {
        Record {
            name: name.into(),
            unit: unit.into(),
            value: RecordValue::Series { times, values },
        }
    }
}

/// Content hashes of the inputs a report was computed from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset: Option<String>,
    pub checkpoint: Option<String>,
    pub config: Option<String>,
}

/// Run-specific values kept apart so the rest of the report is reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub created_unix_s: Option<u64>,
    pub elapsed_s: Option<f64>,
}

impl ReportMetadata {
    pub fn now() -> Self {
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .ok();
        ReportMetadata {
            created_unix_s: created,
            elapsed_s: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub records: Vec<Record>,
    #[serde(default)]
    pub metadata: ReportMetadata,
}

impl Default for EvaluationReport {
    fn default() -> Self {
        EvaluationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            provenance: Provenance::default(),
            records: Vec::new(),
            metadata: ReportMetadata::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        }
    }
}

impl EvaluationReport {
    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn extend(&mut self, other: EvaluationReport) {
        self.records.extend(other.records);
        let p = other.provenance;
        self.provenance.dataset = self.provenance.dataset.take().or(p.dataset);
        self.provenance.checkpoint = self.provenance.checkpoint.take().or(p.checkpoint);
        self.provenance.config = self.provenance.config.take().or(p.config);
    }

    pub fn get(&self, name: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        match self.get(name)?.value {
            RecordValue::Scalar { value } => Some(value),
            RecordValue::Series { .. } => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with the metadata block cleared; identical inputs give identical bytes.
    pub fn canonical_json(&self) -> Result<String> {
        let mut r = self.clone();
        r.metadata = ReportMetadata::default();
        r.to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: EvaluationReport = serde_json::from_str(text)?;
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::UnsupportedVersion {
                found: r.schema_version,
                expected: REPORT_SCHEMA_VERSION,
            });
        }
        Ok(r)
    }

    /// Long format, one row per value: record, unit, t_s, value.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
        w.write_record(["record", "unit", "t_s", "value"]).map_err(csv_err)?;
        for r in &self.records {
            match &r.value {
                RecordValue::Scalar { value } => {
                    w.write_record([r.name.as_str(), r.unit.as_str(), "", &fmt_f64(*value)]).map_err(csv_err)?;
                }
                RecordValue::Series { times, values } => {
                    for (t, v) in times.iter().zip(values) {
                        w.write_record([r.name.as_str(), r.unit.as_str(), &fmt_f64(*t), &fmt_f64(*v)])
                            .map_err(csv_err)?;
                    }
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
        let path = path.as_ref();
        let text = match format {
            ReportFormat::Json => self.to_json()?,
            ReportFormat::Csv => self.to_csv()?,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn fmt_f64(v: f64) -> String {
    // shortest round-trip representation
    format!("{v:?}")
}

/// Hex SHA-256 of a file's contents.
pub fn file_hash(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(bytes_hash(&bytes))
}

pub fn bytes_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// A point-data array for [`write_vtk_structured`].
pub struct VtkField<'a> {
    pub name: &'a str,
    pub components: usize,
    pub values: &'a [f64],
}

/// Legacy ASCII VTK structured grid with point coordinates and point data.
pub fn write_vtk_structured(path: impl AsRef<Path>, dims: [usize; 3], points: &[[f64; 3]], fields: &[VtkField]) -> Result<()> {
    let path = path.as_ref();
    let n = dims[0] * dims[1] * dims[2];
    if points.len() != n {
        return Err(Error::invalid(format!("{} points for a {dims:?} grid", points.len())));
    }
    for f in fields {
        if f.components == 0 || f.values.len() != n * f.components {
            return Err(Error::invalid(format!("field {} has {} values", f.name, f.values.len())));
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "# vtk DataFile Version 3.0\nhemopinn field dump\nASCII\nDATASET STRUCTURED_GRID").map_err(io)?;
    writeln!(out, "DIMENSIONS {} {} {}\nPOINTS {n} double", dims[0], dims[1], dims[2]).map_err(io)?;
    for p in points {
        writeln!(out, "{} {} {}", p[0], p[1], p[2]).map_err(io)?;
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {n}").map_err(io)?;
    }
    for f in fields {
        match f.components {
            1 => writeln!(out, "SCALARS {} double 1\nLOOKUP_TABLE default", f.name),
            3 => writeln!(out, "VECTORS {} double", f.name),
            c => writeln!(out, "FIELD {0} 1\n{0} {c} {n} double", f.name),
        }
        .map_err(io)?;
        for row in f.values.chunks(f.components) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" ")).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EvaluationReport {
        let mut r = EvaluationReport::default();
        r.provenance.dataset = Some(bytes_hash(b"abc"));
        r.push(Record::scalar("r2_velocity", "1", 0.987654321));
        r.push(Record::series("delta_p/PINN", "Ba", vec![0.0, 0.1], vec![30.5, -1.0 / 3.0]));
        r
    }

    #[test]
    fn empty_report_is_valid() {
        let r = EvaluationReport::default();
        let back = EvaluationReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.to_csv().unwrap(), "record,unit,t_s,value\n");
    }

    #[test]
    fn json_round_trip_is_identical() {
        let mut r = sample();
        r.metadata = ReportMetadata::now();
        let back = EvaluationReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.canonical_json().unwrap(), sample().canonical_json().unwrap());
    }

    #[test]
    fn undefined_values_survive_json() {
        let mut r = EvaluationReport::default();
        r.push(Record::scalar("mass_imbalance", "%", f64::NAN));
        r.push(Record::series("e", "1", vec![0.0, 1.0], vec![f64::NAN, 2.0]));
        let back = EvaluationReport::from_json(&r.to_json().unwrap()).unwrap();
        assert!(back.scalar("mass_imbalance").unwrap().is_nan());
        assert_eq!(back.canonical_json().unwrap(), r.canonical_json().unwrap());
    }

    #[test]
    fn csv_rows_carry_units() {
        let csv = sample().to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "r2_velocity,1,,0.987654321");
        assert_eq!(lines[3], "delta_p/PINN,Ba,0.1,-0.3333333333333333");
    }

    #[test]
    fn version_and_unknown_keys_are_rejected() {
        let text = sample().to_json().unwrap().replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(matches!(EvaluationReport::from_json(&text), Err(Error::UnsupportedVersion { found: 9, .. })));
        let text = sample().to_json().unwrap().replacen('{', "{\"extra\": 1,", 1);
        assert!(EvaluationReport::from_json(&text).is_err());
    }

    #[test]
    fn sha256_of_abc() {
        assert_eq!(bytes_hash(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn io_errors_name_the_path() {
        let e = EvaluationReport::read("/nonexistent/report.json").unwrap_err();
        assert!(e.to_string().contains("/nonexistent/report.json"), "{e}");
    }

    #[test]
    fn vtk_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.vtk");
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let u = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let p = [7.0, 8.0];
        write_vtk_structured(
            &path,
            [2, 1, 1],
            &pts,
            &[
                VtkField { name: "u", components: 3, values: &u },
                VtkField { name: "p", components: 1, values: &p },
            ],
        )
        .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("DIMENSIONS 2 1 1\nPOINTS 2 double\n0 0 0\n1 0 0\nPOINT_DATA 2\nVECTORS u double\n1 2 3\n4 5 6\n"));
        assert!(text.ends_with("SCALARS p double 1\nLOOKUP_TABLE default\n7\n8\n"));
        assert!(write_vtk_structured(&path, [3, 1, 1], &pts, &[]).is_err());
    }
}
