use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Patch {
    Inlet,
    Outlet(usize),
    Wall,
}

/// Result of mapping a unit-cube point through a wall chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChartSample {
    Point { x: [f64; 3], normal: [f64; 3] },
    /// The chart uses rejection to reach uniform area density.
    Rejected,
}

/// A lumen described by a signed distance function, negative inside.
pub trait ImplicitDomain {
    fn sdf(&self, x: [f64; 3]) -> f64;

    fn bounding_box(&self) -> ([f64; 3], [f64; 3]);

    /// Outward unit normal of the nearest surface piece.
    fn normal(&self, x: [f64; 3]) -> [f64; 3] {
        let h = 1e-6;
        let mut g = [0.0; 3];
        for d in 0..3 {
            let (mut a, mut b) = (x, x);
            a[d] += h;
            b[d] -= h;
            g[d] = (self.sdf(a) - self.sdf(b)) / (2.0 * h);
        }
        let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        [g[0] / n, g[1] / n, g[2] / n]
    }

    /// Boundary patch containing a surface point, if it is within `tol` of
    /// the boundary.
    fn patch(&self, x: [f64; 3], tol: f64) -> Option<Patch>;

    /// Whether a point outside the lumen lies beside the wall rather than
    /// beyond an inlet or outlet.
    fn in_wall_zone(&self, x: [f64; 3]) -> bool;

    /// Box containing the wall band of the given thickness.
    fn band_box(&self, thickness: f64) -> ([f64; 3], [f64; 3]);

    /// Area-uniform wall parametrization over the unit cube, when available.
    fn wall_chart(&self, _u: [f64; 3]) -> Option<ChartSample> {
        None
    }

    fn volume(&self) -> Option<f64> {
        None
    }

    fn wall_area(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    /// Channel between walls y = ±half_height, inlet x = 0, outlet x = length,
    /// unbounded in z; `depth` sets the sampled z extent, centered on 0.
    Slab {
        length: f64,
        half_height: f64,
        depth: f64,
    },
    /// Pipe of the given radius along z from 0 to `length`, inlet at z = 0.
    Cylinder { radius: f64, length: f64 },
    /// Tube of radius `minor_radius` around an arc of radius `major_radius`
    /// in the xy plane, from angle 0 (inlet) to `sweep` (outlet), sweep <= pi.
    Torus {
        major_radius: f64,
        minor_radius: f64,
        sweep: f64,
    },
}

fn norm2(x: f64, y: f64) -> f64 {
    (x * x + y * y).sqrt()
}

impl Domain {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = match *self {
            Domain::Slab {
                length,
                half_height,
                depth,
            } => length > 0.0 && half_height > 0.0 && depth > 0.0,
            Domain::Cylinder { radius, length } => radius > 0.0 && length > 0.0,
            Domain::Torus {
                major_radius,
                minor_radius,
                sweep,
            } => minor_radius > 0.0 && major_radius > minor_radius && sweep > 0.0 && sweep <= PI,
        };
        if ok {
            Ok(())
        } else {
            Err(crate::Error::invalid(format!("invalid domain dimensions {self:?}")))
        }
    }

    /// Outward normal of the torus outlet plane.
    fn torus_outlet_normal(sweep: f64) -> [f64; 3] {
        [-sweep.sin(), sweep.cos(), 0.0]
    }
}

impl ImplicitDomain for Domain {
    fn sdf(&self, x: [f64; 3]) -> f64 {
        match *self {
            Domain::Slab {
                length, half_height, ..
            } => (x[1].abs() - half_height).max(-x[0]).max(x[0] - length),
            Domain::Cylinder { radius, length } => (norm2(x[0], x[1]) - radius).max(-x[2]).max(x[2] - length),
            Domain::Torus {
                major_radius,
                minor_radius,
                sweep,
            } => {
                let rho = norm2(x[0], x[1]);
                let tube = norm2(rho - major_radius, x[2]) - minor_radius;
                let t = Domain::torus_outlet_normal(sweep);
                tube.max(-x[1]).max(t[0] * x[0] + t[1] * x[1])
            }
        }
    }

    fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        match *self {
            Domain::Slab {
                length,
                half_height,
                depth,
            } => ([0.0, -half_height, -0.5 * depth], [length, half_height, 0.5 * depth]),
            Domain::Cylinder { radius, length } => ([-radius, -radius, 0.0], [radius, radius, length]),
            Domain::Torus {
                major_radius,
                minor_radius,
                sweep,
            } => {
                let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
                let steps = 2048;
                for k in 0..=steps {
                    let th = sweep * k as f64 / steps as f64;
                    let p = [major_radius * th.cos(), major_radius * th.sin()];
                    for d in 0..2 {
                        lo[d] = lo[d].min(p[d]);
                        hi[d] = hi[d].max(p[d]);
                    }
                }
                let a = minor_radius * 1.001;
                (
                    [lo[0] - a, (lo[1] - a).max(0.0), -minor_radius],
                    [hi[0] + a, hi[1] + a, minor_radius],
                )
            }
        }
    }

    fn normal(&self, x: [f64; 3]) -> [f64; 3] {
        match *self {
            Domain::Slab {
                length, half_height, ..
            } => {
                let wall = x[1].abs() - half_height;
                if wall >= -x[0] && wall >= x[0] - length {
                    [0.0, x[1].signum(), 0.0]
                } else if -x[0] > x[0] - length {
                    [-1.0, 0.0, 0.0]
                } else {
                    [1.0, 0.0, 0.0]
                }
            }
            Domain::Cylinder { radius, length } => {
                let r = norm2(x[0], x[1]);
                let wall = r - radius;
                if wall >= -x[2] && wall >= x[2] - length && r > 0.0 {
                    [x[0] / r, x[1] / r, 0.0]
                } else if -x[2] > x[2] - length {
                    [0.0, 0.0, -1.0]
                } else {
                    [0.0, 0.0, 1.0]
                }
            }
            Domain::Torus {
                major_radius,
                minor_radius,
                sweep,
            } => {
                let rho = norm2(x[0], x[1]);
                let (dr, dz) = (rho - major_radius, x[2]);
                let d = norm2(dr, dz);
                let tube = d - minor_radius;
                let t = Domain::torus_outlet_normal(sweep);
                let out = t[0] * x[0] + t[1] * x[1];
                if tube >= -x[1] && tube >= out && d > 0.0 && rho > 0.0 {
                    [dr / d * x[0] / rho, dr / d * x[1] / rho, dz / d]
                } else if -x[1] > out {
                    [0.0, -1.0, 0.0]
                } else {
                    t
                }
            }
        }
    }

    fn patch(&self, x: [f64; 3], tol: f64) -> Option<Patch> {
        if self.sdf(x).abs() > tol {
            return None;
        }
        match *self {
            Domain::Slab {
                length, half_height, ..
            } => {
                if (x[1].abs() - half_height).abs() <= tol && x[0] > tol && x[0] < length - tol {
                    Some(Patch::Wall)
                } else if x[0].abs() <= tol {
                    Some(Patch::Inlet)
                } else if (x[0] - length).abs() <= tol {
                    Some(Patch::Outlet(0))
                } else {
                    Some(Patch::Wall)
                }
            }
            Domain::Cylinder { radius, length } => {
                let r = norm2(x[0], x[1]);
                if (r - radius).abs() <= tol && x[2] > tol && x[2] < length - tol {
                    Some(Patch::Wall)
                } else if x[2].abs() <= tol {
                    Some(Patch::Inlet)
                } else if (x[2] - length).abs() <= tol {
                    Some(Patch::Outlet(0))
                } else {
                    Some(Patch::Wall)
                }
            }
            Domain::Torus {
                major_radius,
                minor_radius,
                sweep,
            } => {
                let rho = norm2(x[0], x[1]);
                let tube = norm2(rho - major_radius, x[2]) - minor_radius;
                let t = Domain::torus_outlet_normal(sweep);
                let out = t[0] * x[0] + t[1] * x[1];
                if tube.abs() <= tol && x[1] > tol && out < -tol {
                    Some(Patch::Wall)
                } else if x[1].abs() <= tol && x[0] > 0.0 {
                    Some(Patch::Inlet)
                } else if out.abs() <= tol {
                    Some(Patch::Outlet(0))
                } else {
                    Some(Patch::Wall)
                }
            }
        }
    }

    fn in_wall_zone(&self, x: [f64; 3]) -> bool {
        match *self {
            Domain::Slab { length, .. } => (0.0..=length).contains(&x[0]),
            Domain::Cylinder { length, .. } => (0.0..=length).contains(&x[2]),
            Domain::Torus { sweep, .. } => {
                let t = Domain::torus_outlet_normal(sweep);
                x[1] >= 0.0 && t[0] * x[0] + t[1] * x[1] <= 0.0
            }
        }
    }

    fn band_box(&self, thickness: f64) -> ([f64; 3], [f64; 3]) {
        let (lo, hi) = self.bounding_box();
        match *self {
            Domain::Slab { .. } => ([lo[0], lo[1] - thickness, lo[2]], [hi[0], hi[1] + thickness, hi[2]]),
            Domain::Cylinder { .. } => (
                [lo[0] - thickness, lo[1] - thickness, lo[2]],
                [hi[0] + thickness, hi[1] + thickness, hi[2]],
            ),
            Domain::Torus { .. } => (
                [lo[0] - thickness, (lo[1] - thickness).max(0.0), lo[2] - thickness],
                [hi[0] + thickness, hi[1] + thickness, hi[2] + thickness],
            ),
        }
    }

    fn wall_chart(&self, u: [f64; 3]) -> Option<ChartSample> {
        Some(match *self {
            Domain::Slab {
                length,
                half_height,
                depth,
            } => {
                let side = if u[0] < 0.5 { 1.0 } else { -1.0 };
                ChartSample::Point {
                    x: [u[1] * length, side * half_height, (u[2] - 0.5) * depth],
                    normal: [0.0, side, 0.0],
                }
            }
            Domain::Cylinder { radius, length } => {
                let th = 2.0 * PI * u[0];
                let (s, c) = th.sin_cos();
                ChartSample::Point {
                    x: [radius * c, radius * s, u[1] * length],
                    normal: [c, s, 0.0],
                }
            }
            Domain::Torus {
                major_radius,
                minor_radius,
                sweep,
            } => {
                let th = sweep * u[0];
                let psi = 2.0 * PI * u[1];
                let density = (major_radius + minor_radius * psi.cos()) / (major_radius + minor_radius);
                if u[2] >= density {
                    ChartSample::Rejected
                } else {
                    let (st, ct) = th.sin_cos();
                    let (sp, cp) = psi.sin_cos();
                    let normal = [cp * ct, cp * st, sp];
                    let x = [
                        major_radius * ct + minor_radius * normal[0],
                        major_radius * st + minor_radius * normal[1],
                        minor_radius * normal[2],
                    ];
                    ChartSample::Point { x, normal }
                }
            }
        })
    }

    fn volume(&self) -> Option<f64> {
        Some(match *self {
            Domain::Slab {
                length,
                half_height,
                depth,
            } => 2.0 * half_height * length * depth,
            Domain::Cylinder { radius, length } => PI * radius * radius * length,
            Domain::Torus {
                major_radius,
                minor_radius,
                sweep,
            } => PI * minor_radius * minor_radius * major_radius * sweep,
        })
    }

    fn wall_area(&self) -> Option<f64> {
        Some(match *self {
            Domain::Slab { length, depth, .. } => 2.0 * length * depth,
            Domain::Cylinder { radius, length } => 2.0 * PI * radius * length,
            Domain::Torus {
                major_radius,
                minor_radius,
                sweep,
            } => 2.0 * PI * minor_radius * major_radius * sweep,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shapes() -> Vec<Domain> {
        vec![
            Domain::Slab {
                length: 4.0,
                half_height: 1.0,
                depth: 0.4,
            },
            Domain::Cylinder {
                radius: 1.0,
                length: 5.0,
            },
            Domain::Torus {
                major_radius: 3.0,
                minor_radius: 0.8,
                sweep: 2.0,
            },
        ]
    }

    #[test]
    fn slab_normals_are_unit_y() {
        let d = shapes()[0];
        assert_eq!(d.normal([2.0, 1.0, 0.0]), [0.0, 1.0, 0.0]);
        assert_eq!(d.normal([2.0, -1.0, 0.1]), [0.0, -1.0, 0.0]);
    }

    #[test]
    fn patches_on_cylinder() {
        let d = shapes()[1];
        assert_eq!(d.patch([1.0, 0.0, 2.0], 1e-9), Some(Patch::Wall));
        assert_eq!(d.patch([0.2, 0.1, 0.0], 1e-9), Some(Patch::Inlet));
        assert_eq!(d.patch([0.2, 0.1, 5.0], 1e-9), Some(Patch::Outlet(0)));
        assert_eq!(d.patch([0.2, 0.1, 2.0], 1e-9), None);
    }

    #[test]
    fn torus_patches_and_inside() {
        let d = shapes()[2];
        let mid = 1.0f64;
        assert!(d.sdf([3.0 * mid.cos(), 3.0 * mid.sin(), 0.0]) < 0.0);
        assert_eq!(d.patch([3.0, 0.0, 0.1], 1e-9), Some(Patch::Inlet));
        let p = [3.0 * 2f64.cos(), 3.0 * 2f64.sin(), 0.1];
        assert_eq!(d.patch(p, 1e-9), Some(Patch::Outlet(0)));
        let w = [3.8 * mid.cos(), 3.8 * mid.sin(), 0.0];
        assert_eq!(d.patch(w, 1e-9), Some(Patch::Wall));
    }

    #[test]
    fn analytic_normals_match_sdf_gradient() {
        for d in shapes() {
            let (lo, hi) = d.bounding_box();
            let mut checked = 0;
            for k in 0..400 {
                let u = [
                    ((k as f64) * 0.618_034).fract(),
                    ((k as f64) * 0.414_214).fract(),
                    ((k as f64) * 0.732_051).fract(),
                ];
                let x = [
                    lo[0] + u[0] * (hi[0] - lo[0]),
                    lo[1] + u[1] * (hi[1] - lo[1]),
                    lo[2] + u[2] * (hi[2] - lo[2]),
                ];
                let h = 1e-7;
                let mut g = [0.0; 3];
                for a in 0..3 {
                    let (mut p, mut m) = (x, x);
                    p[a] += h;
                    m[a] -= h;
                    g[a] = (d.sdf(p) - d.sdf(m)) / (2.0 * h);
                }
                let gn = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                // Skip the measure-zero kinks where two pieces meet.
                if (gn - 1.0).abs() > 1e-3 {
                    continue;
                }
                checked += 1;
                assert!((gn - 1.0).abs() < 1e-6, "{d:?} at {x:?}: |grad| = {gn}");
                let n = d.normal(x);
                for a in 0..3 {
                    assert!((n[a] - g[a]).abs() < 1e-5, "{d:?} at {x:?}");
                }
            }
            assert!(checked > 300);
        }
    }

    #[test]
    fn serde_round_trip() {
        for d in shapes() {
            let s = serde_json::to_string(&d).unwrap();
            let back: Domain = serde_json::from_str(&s).unwrap();
            assert_eq!(back, d);
        }
        assert!(serde_json::from_str::<Domain>(r#"{"shape":"cylinder","radius":1,"length":2,"extra":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn wall_chart_points_lie_on_the_wall(u0 in 0.0..1.0f64, u1 in 0.0..1.0f64, u2 in 0.0..1.0f64) {
            for d in shapes() {
                if let Some(ChartSample::Point { x, normal }) = d.wall_chart([u0, u1, u2]) {
                    prop_assert!(d.sdf(x).abs() < 1e-12);
                    let n = (normal[0].powi(2) + normal[1].powi(2) + normal[2].powi(2)).sqrt();
                    prop_assert!((n - 1.0).abs() < 1e-12);
                    let dn = d.normal(x);
                    let dot = dn[0] * normal[0] + dn[1] * normal[1] + dn[2] * normal[2];
                    prop_assert!(dot > 0.999 || d.patch(x, 1e-9) != Some(Patch::Wall));
                }
            }
        }
    }
}
