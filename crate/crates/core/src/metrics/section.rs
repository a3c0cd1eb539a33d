use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::DifferentiableField;
use crate::error::{Error, Result};
use crate::qmc::{Domain, HaltonSampler};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SectionShape {
    Disc { radius: f64 },
    /// Half extents along the two in-plane axes.
    Rectangle { half_u: f64, half_v: f64 },
}

/// Planar section for surface means and fluxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossSection {
    pub origin: [f64; 3],
    /// Unit normal; fluxes count positive along it.
    pub normal: [f64; 3],
    pub shape: SectionShape,
    pub points: usize,
    pub seed: u64,
    pub label: String,
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|c| c / n)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Default QMC points per section.
pub const SECTION_POINTS: usize = 4096;

impl CrossSection {
    pub fn new(origin: [f64; 3], normal: [f64; 3], shape: SectionShape, label: impl Into<String>) -> Result<Self> {
        let len = (normal[0] * normal[0] + normal[1] * normal[1] + normal[2] * normal[2]).sqrt();
        if !(len > 0.0) {
            return Err(Error::invalid("section normal must be nonzero"));
        }
        let ok = match shape {
            SectionShape::Disc { radius } => radius > 0.0,
            SectionShape::Rectangle { half_u, half_v } => half_u > 0.0 && half_v > 0.0,
        };
        if !ok {
            return Err(Error::invalid("section extents must be positive"));
        }
        Ok(CrossSection {
            origin,
            normal: normal.map(|c| c / len),
            shape,
            points: SECTION_POINTS,
            seed: 0,
            label: label.into(),
        })
    }

    /// Section through the inlet (`at_outlet = false`) or outlet end of a
    /// domain, moved `inset` cm inward along the flow direction. The normal
    /// points downstream.
    pub fn for_domain(domain: &Domain, at_outlet: bool, inset: f64) -> Result<Self> {
        let label = if at_outlet { "outlet" } else { "inlet" };
        match *domain {
            Domain::Slab {
                length,
                half_height,
                depth,
            } => {
                let x = if at_outlet { length - inset } else { inset };
                Self::new(
                    [x, 0.0, 0.0],
                    [1.0, 0.0, 0.0],
                    SectionShape::Rectangle {
                        half_u: half_height,
                        half_v: 0.5 * depth,
                    },
                    label,
                )
            }
            Domain::Cylinder { radius, length } => {
                let z = if at_outlet { length - inset } else { inset };
                Self::new([0.0, 0.0, z], [0.0, 0.0, 1.0], SectionShape::Disc { radius }, label)
            }
            Domain::Torus {
                major_radius,
                minor_radius,
                sweep,
            } => {
                let a = if at_outlet { sweep - inset / major_radius } else { inset / major_radius };
                Self::new(
                    [major_radius * a.cos(), major_radius * a.sin(), 0.0],
                    [-a.sin(), a.cos(), 0.0],
                    SectionShape::Disc { radius: minor_radius },
                    label,
                )
            }
        }
    }

    pub fn with_points(mut self, points: usize, seed: u64) -> Self {
        self.points = points;
        self.seed = seed;
        self
    }

    pub fn area(&self) -> f64 {
        match self.shape {
            SectionShape::Disc { radius } => PI * radius * radius,
            SectionShape::Rectangle { half_u, half_v } => 4.0 * half_u * half_v,
        }
    }

    /// Orthonormal in-plane axes; u is the coordinate axis least aligned
    /// with the normal (lowest index on ties), projected into the plane.
    pub fn axes(&self) -> ([f64; 3], [f64; 3]) {
        let n = self.normal;
        let mut k = 0;
        for i in 1..3 {
            if n[i].abs() < n[k].abs() {
                k = i;
            }
        }
        let u = normalize(std::array::from_fn(|i| if i == k { 1.0 } else { 0.0 } - n[k] * n[i]));
        (u, cross(n, u))
    }

    /// Equal-weight QMC points covering the section.
    pub fn quadrature(&self) -> Result<Vec<[f64; 3]>> {
        if self.points == 0 {
            return Err(Error::invalid("section needs at least one point"));
        }
        let sampler = HaltonSampler::owen(2, self.seed)?;
        let (u, v) = self.axes();
        Ok((0..self.points as u64)
            .map(|k| {
                let (s, t) = (sampler.component(k, 0), sampler.component(k, 1));
                let (a, b) = match self.shape {
                    SectionShape::Disc { radius } => {
                        let r = radius * s.sqrt();
                        let phi = 2.0 * PI * t;
                        (r * phi.cos(), r * phi.sin())
                    }
                    SectionShape::Rectangle { half_u, half_v } => ((2.0 * s - 1.0) * half_u, (2.0 * t - 1.0) * half_v),
                };
                std::array::from_fn(|i| self.origin[i] + a * u[i] + b * v[i])
            })
            .collect())
    }
}

/// Q(t) = integral of u . n over the section [cm^3/s].
pub fn flow_rate<F: DifferentiableField + ?Sized>(field: &F, section: &CrossSection, times: &[f64]) -> Result<Vec<f64>> {
    let pts = section.quadrature()?;
    let n = section.normal;
    Ok(times
        .iter()
        .map(|&t| {
            let s: f64 = pts
                .iter()
                .map(|x| {
                    let o = field.eval([x[0], x[1], x[2], t]);
                    o[0] * n[0] + o[1] * n[1] + o[2] * n[2]
                })
                .sum();
            section.area() * s / pts.len() as f64
        })
        .collect())
}

/// Mean pressure over the section per time.
pub fn section_mean_pressure<F: DifferentiableField + ?Sized>(field: &F, section: &CrossSection, times: &[f64]) -> Result<Vec<f64>> {
    let pts = section.quadrature()?;
    Ok(times
        .iter()
        .map(|&t| pts.iter().map(|x| field.eval([x[0], x[1], x[2], t])[3]).sum::<f64>() / pts.len() as f64)
        .collect())
}

/// Inlet minus outlet mean pressure per time [Ba].
pub fn pressure_drop_direct<F: DifferentiableField + ?Sized>(
    field: &F,
    inlet: &CrossSection,
    outlet: &CrossSection,
    times: &[f64],
) -> Result<Vec<f64>> {
    let a = section_mean_pressure(field, inlet, times)?;
    let b = section_mean_pressure(field, outlet, times)?;
    Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
}

/// max_t |Q_in - sum Q_out| / max_t Q_in, in percent.
pub fn mass_imbalance<F: DifferentiableField + ?Sized>(
    field: &F,
    inlet: &CrossSection,
    outlets: &[CrossSection],
    times: &[f64],
) -> Result<f64> {
    let q_in = flow_rate(field, inlet, times)?;
    let mut q_out = vec![0.0; times.len()];
    for s in outlets {
        for (acc, q) in q_out.iter_mut().zip(flow_rate(field, s, times)?) {
            *acc += q;
        }
    }
    let max_in = q_in.iter().fold(0.0f64, |m, q| m.max(*q));
    if !(max_in > 0.0) {
        return Err(Error::Undefined("no inflow through the inlet section".into()));
    }
    let worst = q_in.iter().zip(&q_out).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(100.0 * worst / max_in)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Jet;
    use crate::physics::{pipe_flow_rate, ReferenceFlow, RheologyModel};

    struct Sink {
        base: ReferenceFlow,
        length: f64,
    }

    impl DifferentiableField for Sink {
        fn eval(&self, p: [f64; 4]) -> [f64; 4] {
            let mut o = self.base.eval(p);
            o[2] *= 1.0 - 0.1 * p[2] / self.length;
            o
        }
        fn eval_jets(&self, _: [f64; 4]) -> [Jet; 4] {
            unimplemented!("values only")
        }
    }

    fn pipe() -> (RheologyModel, ReferenceFlow, Domain) {
        let model = RheologyModel::from_hematocrit(32.5).unwrap();
        let f = ReferenceFlow::pipe_poiseuille_with_peak(&model, 0.6, 25.0);
        (model, f, Domain::Cylinder { radius: 0.6, length: 5.0 })
    }

    #[test]
    fn uniform_flux_through_disc() {
        let s = CrossSection::new([0.0; 3], [0.0, 0.0, 2.0], SectionShape::Disc { radius: 0.5 }, "d").unwrap();
        let f = ReferenceFlow::Uniform {
            velocity: [1.0, -4.0, 3.0],
            pressure: 0.0,
        };
        let q = flow_rate(&f, &s, &[0.0]).unwrap()[0];
        assert!((q - 3.0 * s.area()).abs() < 5e-3 * 3.0 * s.area());
    }

    #[test]
    fn pipe_flow_rate_matches_closed_form() {
        let (model, f, d) = pipe();
        let s = CrossSection::for_domain(&d, false, 0.5).unwrap();
        let q = flow_rate(&f, &s, &[0.0]).unwrap()[0];
        let g = match f {
            ReferenceFlow::PipePoiseuille { g, .. } => g,
            _ => unreachable!(),
        };
        let exact = pipe_flow_rate(0.6, g, model.m, model.n);
        assert!((q - exact).abs() < 0.01 * exact, "{q} {exact}");
        let out = CrossSection::for_domain(&d, true, 0.5).unwrap();
        let q_out = flow_rate(&f, &out, &[0.0]).unwrap()[0];
        assert!((q - q_out).abs() < 5e-3 * q);
        assert!(mass_imbalance(&f, &s, &[out], &[0.0, 0.5]).unwrap() < 0.5);
    }

    #[test]
    fn synthetic_sink_shows_up_as_imbalance() {
        let (_, f, _) = pipe();
        let sink = Sink { base: f, length: 5.0 };
        let a = CrossSection::new([0.0; 3], [0.0, 0.0, 1.0], SectionShape::Disc { radius: 0.6 }, "in").unwrap();
        let b = CrossSection::new([0.0, 0.0, 5.0], [0.0, 0.0, 1.0], SectionShape::Disc { radius: 0.6 }, "out").unwrap();
        let m = mass_imbalance(&sink, &a, &[b], &[0.0]).unwrap();
        assert!((m - 10.0).abs() < 0.5, "{m}");
        assert!(matches!(
            mass_imbalance(&ReferenceFlow::Zero, &a, &[], &[0.0]),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn direct_pressure_drops() {
        let (_, f, d) = pipe();
        let (a, b) = (CrossSection::for_domain(&d, false, 0.0).unwrap(), CrossSection::for_domain(&d, true, 0.0).unwrap());
        let uniform = ReferenceFlow::Uniform {
            velocity: [0.0; 3],
            pressure: 12.0,
        };
        assert_eq!(pressure_drop_direct(&uniform, &a, &b, &[0.0]).unwrap(), vec![0.0]);
        let g = 3.0;
        let linear = ReferenceFlow::Linear {
            u0: [0.0; 3],
            gradient: [[0.0; 3]; 3],
            rate: [0.0; 3],
            p0: 1.0,
            p_gradient: [0.0, 0.0, -g, 0.0],
        };
        let dp = pressure_drop_direct(&linear, &a, &b, &[0.0]).unwrap()[0];
        assert!((dp - g * 5.0).abs() < 1e-12);
        let dp = pressure_drop_direct(&f, &a, &b, &[0.0]).unwrap()[0];
        let exact = f.pressure_drop(5.0, 0.0).unwrap();
        assert!((dp - exact).abs() < 5e-3 * exact);
    }

    #[test]
    fn section_axes_are_orthonormal() {
        for n in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.3, -0.4, 0.5], [0.0, 1.0, 0.0]] {
            let s = CrossSection::new([0.0; 3], n, SectionShape::Rectangle { half_u: 1.0, half_v: 2.0 }, "r").unwrap();
            let (u, v) = s.axes();
            let d = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            assert!(d(u, s.normal).abs() < 1e-12 && d(v, s.normal).abs() < 1e-12 && d(u, v).abs() < 1e-12);
            assert!((d(u, u) - 1.0).abs() < 1e-12 && (d(v, v) - 1.0).abs() < 1e-12);
        }
        let slab = Domain::Slab {
            length: 2.0,
            half_height: 0.5,
            depth: 0.4,
        };
        let s = CrossSection::for_domain(&slab, true, 0.1).unwrap();
        assert_eq!(s.axes().0, [0.0, 1.0, 0.0]);
        assert!((s.area() - 0.4).abs() < 1e-15);
        assert!(s.quadrature().unwrap().iter().all(|p| (p[0] - 1.9).abs() < 1e-15 && p[1].abs() <= 0.5 && p[2].abs() <= 0.2));
    }

    #[test]
    fn torus_sections_are_normal_to_the_arc() {
        let d = Domain::Torus {
            major_radius: 2.0,
            minor_radius: 0.5,
            sweep: PI,
        };
        let a = CrossSection::for_domain(&d, false, 0.0).unwrap();
        assert_eq!(a.normal, [0.0, 1.0, 0.0]);
        let b = CrossSection::for_domain(&d, true, 0.0).unwrap();
        assert!((b.normal[1] + 1.0).abs() < 1e-12 && (b.origin[0] + 2.0).abs() < 1e-12);
    }
}
