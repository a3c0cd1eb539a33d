use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mesh::{dot, SimplexMesh, TetGeometry};
use super::stokes::StokesTestField;
use crate::error::{Error, Result};
use crate::physics::{strain_rate, RheologyModel};

/// Velocity at every mesh vertex for a list of sample times.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityHistory {
    pub times: Vec<f64>,
    pub velocities: Vec<Vec<[f64; 3]>>,
}

impl VelocityHistory {
    pub fn new(times: Vec<f64>, velocities: Vec<Vec<[f64; 3]>>) -> Result<Self> {
        if times.len() != velocities.len() {
            return Err(Error::invalid("one velocity snapshot per sample time is required"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("sample times must be strictly increasing"));
        }
        if let Some(first) = velocities.first() {
            if velocities.iter().any(|v| v.len() != first.len()) {
                return Err(Error::invalid("snapshots differ in vertex count"));
            }
        }
        Ok(VelocityHistory { times, velocities })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn vertex_count(&self) -> usize {
        self.velocities.first().map_or(0, Vec::len)
    }
}

/// Backward-difference order of the time derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    First,
    Second,
}

impl Scheme {
    pub fn min_samples(self) -> usize {
        match self {
            Scheme::First => 2,
            Scheme::Second => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scheme::First => "1st",
            Scheme::Second => "2nd",
        }
    }
}

/// Virtual powers and the pressure drop, one entry per evaluated time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VwerpSeries {
    pub times: Vec<f64>,
    /// Inlet minus outlet mean pressure [Ba].
    pub delta_p: Vec<f64>,
    pub kinetic: Vec<f64>,
    pub convective: Vec<f64>,
    pub viscous: Vec<f64>,
    /// Virtual power of the body force; zero for unforced flow.
    #[serde(default)]
    pub body: Vec<f64>,
}

impl VwerpSeries {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(["t_s", "delta_p_Ba", "kinetic_erg_per_s", "convective_erg_per_s", "viscous_erg_per_s", "body_erg_per_s"])
            .map_err(io)?;
        for i in 0..self.times.len() {
            let row = [self.times[i], self.delta_p[i], self.kinetic[i], self.convective[i], self.viscous[i], self.body[i]];
            w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Derivative weights at t_n for the samples n, n-1 (and n-2).
fn backward_weights(scheme: Scheme, t: &[f64], n: usize) -> Vec<(usize, f64)> {
    let h1 = t[n] - t[n - 1];
    match scheme {
        Scheme::First => vec![(n, 1.0 / h1), (n - 1, -1.0 / h1)],
        Scheme::Second => {
            let h0 = t[n - 1] - t[n - 2];
            vec![
                (n, (2.0 * h1 + h0) / (h1 * (h1 + h0))),
                (n - 1, -(h1 + h0) / (h1 * h0)),
                (n - 2, h1 / (h0 * (h1 + h0))),
            ]
        }
    }
}

fn element_gradient(g: &TetGeometry, t: [usize; 4], u: &[[f64; 3]]) -> [[f64; 3]; 3] {
    let mut grad = [[0.0; 3]; 3];
    for (a, &v) in t.iter().enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                grad[i][j] += u[v][i] * g.grads[a][j];
            }
        }
    }
    grad
}

/// P1 mass-matrix pairing sum_ab M_ab f_a . g_b over one element.
fn mass_pair(volume: f64, f: &[[f64; 3]; 4], g: &[[f64; 3]; 4]) -> f64 {
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            let w = if a == b { 2.0 } else { 1.0 };
            s += w * dot(f[a], g[b]);
        }
    }
    volume * s / 20.0
}

/// Kinetic, convective and viscous virtual powers at t_n for each sample n
/// from the scheme's first admissible index on. The time derivative is the
/// backward difference at t_n; convective and viscous terms use the average
/// of the fields at t_{n-1} and t_n.
pub fn vwerp_pressure_drop(
    history: &VelocityHistory,
    mesh: &SimplexMesh,
    test: &StokesTestField,
    model: &RheologyModel,
    scheme: Scheme,
) -> Result<VwerpSeries> {
    vwerp_pressure_drop_forced(history, mesh, test, model, scheme, None)
}

/// As [`vwerp_pressure_drop`] for a flow driven by a known body force
/// [dyn/cm^3], whose virtual power is removed from the balance. The force
/// is averaged over t_{n-1} and t_n like the convective and viscous terms.
pub fn vwerp_pressure_drop_forced(
    history: &VelocityHistory,
    mesh: &SimplexMesh,
    test: &StokesTestField,
    model: &RheologyModel,
    scheme: Scheme,
    force: Option<&dyn Fn([f64; 4]) -> [f64; 3]>,
) -> Result<VwerpSeries> {
    if test.xi.len() != mesh.vertices.len() || history.vertex_count() != mesh.vertices.len() {
        return Err(Error::invalid(format!(
            "mesh has {} vertices, test field {}, history {}",
            mesh.vertices.len(),
            test.xi.len(),
            history.vertex_count()
        )));
    }
    if history.len() < scheme.min_samples() {
        return Err(Error::invalid(format!(
            "{} scheme needs at least {} samples, got {}",
            scheme.label(),
            scheme.min_samples(),
            history.len()
        )));
    }
    let geoms: Vec<TetGeometry> = (0..mesh.tets.len()).map(|k| mesh.geometry(k)).collect();
    // the viscous boundary integral vanishes where xi does
    let active_facets: Vec<usize> = (0..mesh.facets.len())
        .filter(|&f| mesh.facets[f].vertices.iter().any(|&v| test.xi[v] != [0.0; 3]))
        .collect();
    let rho = model.density;
    let mut out = VwerpSeries::default();
    let nv = mesh.vertices.len();
    for n in scheme.min_samples() - 1..history.len() {
        let mut dudt = vec![[0.0; 3]; nv];
        for (s, w) in backward_weights(scheme, &history.times, n) {
            for (d, u) in dudt.iter_mut().zip(&history.velocities[s]) {
                for c in 0..3 {
                    d[c] += w * u[c];
                }
            }
        }
        let mid: Vec<[f64; 3]> = history.velocities[n]
            .iter()
            .zip(&history.velocities[n - 1])
            .map(|(a, b)| std::array::from_fn(|c| 0.5 * (a[c] + b[c])))
            .collect();
        let f_mid: Option<Vec<[f64; 3]>> = force.map(|f| {
            let (t0, t1) = (history.times[n - 1], history.times[n]);
            mesh.vertices
                .iter()
                .map(|x| {
                    let (a, b) = (f([x[0], x[1], x[2], t0]), f([x[0], x[1], x[2], t1]));
                    std::array::from_fn(|c| 0.5 * (a[c] + b[c]))
                })
                .collect()
        });
        let (mut kinetic, mut convective, mut viscous, mut body) = (0.0, 0.0, 0.0, 0.0);
        let mut stress = vec![[[0.0; 3]; 3]; mesh.tets.len()];
        for (k, t) in mesh.tets.iter().enumerate() {
            let g = &geoms[k];
            let xi = t.map(|v| test.xi[v]);
            kinetic += rho * mass_pair(g.volume, &t.map(|v| dudt[v]), &xi);
            let grad = element_gradient(g, *t, &mid);
            let conv: [[f64; 3]; 4] = t.map(|v| {
                let u = mid[v];
                std::array::from_fn(|i| grad[i][0] * u[0] + grad[i][1] * u[1] + grad[i][2] * u[2])
            });
            convective += rho * mass_pair(g.volume, &conv, &xi);
            if let Some(fm) = &f_mid {
                body += mass_pair(g.volume, &t.map(|v| fm[v]), &xi);
            }
            let (e, gamma) = strain_rate(grad);
            let mu = model.viscosity(gamma);
            let (ex, _) = strain_rate(element_gradient(g, *t, &test.xi));
            let mut contraction = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    stress[k][i][j] = 2.0 * mu * e[i][j];
                    contraction += e[i][j] * ex[i][j];
                }
            }
            viscous += g.volume * 2.0 * mu * contraction;
        }
        for &fi in &active_facets {
            let f = &mesh.facets[fi];
            let s = &stress[f.element];
            let traction: [f64; 3] = std::array::from_fn(|i| dot(s[i], f.normal));
            let xi_mean: [f64; 3] = std::array::from_fn(|c| f.vertices.iter().map(|&v| test.xi[v][c]).sum::<f64>() / 3.0);
            viscous -= f.area * dot(traction, xi_mean);
        }
        let total = kinetic + convective + viscous - body;
        out.times.push(history.times[n]);
        out.delta_p.push(total / test.inlet_area);
        out.kinetic.push(kinetic);
        out.convective.push(convective);
        out.viscous.push(viscous);
        out.body.push(body);
    }
    Ok(out)
}

/// |max|est| - max|ref|| / max|ref|.
pub fn pressure_drop_error(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    if estimate.is_empty() || reference.is_empty() {
        return Err(Error::invalid("pressure drop series must be non-empty"));
    }
    let peak = |s: &[f64]| s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let r = peak(reference);
    if r == 0.0 {
        return Err(Error::Undefined("reference pressure drop is identically zero".into()));
    }
    Ok(((peak(estimate) - r) / r).abs())
}

#[cfg(test)]
mod tests {
    use super::super::mesh::{build_pipe_mesh, PipeMeshSpec};
    use super::super::stokes::{solve_auxiliary_stokes, StokesConfig};
    use super::*;

    fn setup() -> (SimplexMesh, StokesTestField) {
        let m = build_pipe_mesh(&PipeMeshSpec {
            radius: 1.0,
            length: 3.0,
            rings: 3,
            sectors: 6,
            layers: 9,
        })
        .unwrap();
        let f = solve_auxiliary_stokes(&m, 0, &StokesConfig::default()).unwrap();
        (m, f)
    }

    fn history(m: &SimplexMesh, times: &[f64], u: impl Fn([f64; 3], f64) -> [f64; 3]) -> VelocityHistory {
        let v = times.iter().map(|&t| m.vertices.iter().map(|&x| u(x, t)).collect()).collect();
        VelocityHistory::new(times.to_vec(), v).unwrap()
    }

    #[test]
    fn zero_velocity_gives_zero_drop() {
        let (m, f) = setup();
        let model = RheologyModel::from_hematocrit(45.0).unwrap();
        let h = history(&m, &[0.0, 0.1, 0.2], |_, _| [0.0; 3]);
        for s in [Scheme::First, Scheme::Second] {
            let out = vwerp_pressure_drop(&h, &m, &f, &model, s).unwrap();
            assert!(out.delta_p.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn kinetic_power_is_exact_for_linear_time() {
        let (m, f) = setup();
        let model = RheologyModel::from_hematocrit(45.0).unwrap();
        let w = |x: [f64; 3]| [0.1 * x[1], 0.0, 1.0 - x[0] * x[0] - x[1] * x[1]];
        let h = history(&m, &[0.0, 0.05, 0.15, 0.2], |x, t| w(x).map(|c| c * (1.0 + 3.0 * t)));
        // exact: rho * 3 * int w . xi, via the P1 mass matrix
        let mut exact = 0.0;
        for (k, t) in m.tets.iter().enumerate() {
            exact += model.density * 3.0 * mass_pair(m.geometry(k).volume, &t.map(|v| w(m.vertices[v])), &t.map(|v| f.xi[v]));
        }
        for s in [Scheme::First, Scheme::Second] {
            let out = vwerp_pressure_drop(&h, &m, &f, &model, s).unwrap();
            for k in &out.kinetic {
                assert!((k - exact).abs() < 1e-12 * exact.abs(), "{k} {exact}");
            }
        }
    }

    #[test]
    fn rigid_translation_leaves_viscous_volume_term() {
        let (m, f) = setup();
        let model = RheologyModel::from_hematocrit(32.5).unwrap();
        let base = |x: [f64; 3], _| [0.0, 0.0, 10.0 * (1.0 - x[0] * x[0] - x[1] * x[1])];
        let shifted = |x: [f64; 3], t| {
            let u = base(x, t);
            [u[0] + 3.0, u[1] - 1.0, u[2] + 2.0]
        };
        let a = vwerp_pressure_drop(&history(&m, &[0.0, 1.0], base), &m, &f, &model, Scheme::First).unwrap();
        let b = vwerp_pressure_drop(&history(&m, &[0.0, 1.0], shifted), &m, &f, &model, Scheme::First).unwrap();
        assert!((a.viscous[0] - b.viscous[0]).abs() < 1e-10 * a.viscous[0].abs());
    }

    #[test]
    fn test_field_reuse_matches_recomputation() {
        let (m, f) = setup();
        let model = RheologyModel::from_hematocrit(20.0).unwrap();
        let h1 = history(&m, &[0.0, 0.1, 0.2], |x, t| [0.0, 0.0, (1.0 + t) * (1.0 - x[0] * x[0])]);
        let h2 = history(&m, &[0.0, 0.1, 0.2], |x, t| [t * x[1], 0.0, 2.0 - x[1] * x[1]]);
        let a1 = vwerp_pressure_drop(&h1, &m, &f, &model, Scheme::Second).unwrap();
        let _ = vwerp_pressure_drop(&h2, &m, &f, &model, Scheme::Second).unwrap();
        let fresh = solve_auxiliary_stokes(&m, 0, &StokesConfig::default()).unwrap();
        assert_eq!(vwerp_pressure_drop(&h1, &m, &fresh, &model, Scheme::Second).unwrap(), a1);
    }

    #[test]
    fn sample_count_and_mismatch_errors() {
        let (m, f) = setup();
        let model = RheologyModel::from_hematocrit(20.0).unwrap();
        let h = history(&m, &[0.0, 0.1], |_, _| [0.0; 3]);
        assert!(vwerp_pressure_drop(&h, &m, &f, &model, Scheme::Second).is_err());
        assert_eq!(vwerp_pressure_drop(&h, &m, &f, &model, Scheme::First).unwrap().times, vec![0.1]);
        let short = VelocityHistory::new(vec![0.0, 1.0], vec![vec![[0.0; 3]; 3]; 2]).unwrap();
        assert!(vwerp_pressure_drop(&short, &m, &f, &model, Scheme::First).is_err());
        assert!(VelocityHistory::new(vec![0.0, 0.0], vec![vec![], vec![]]).is_err());
    }

    #[test]
    fn mass_pair_matches_closed_form() {
        // int over the reference tet of x * y = 1/120, volume 1/6
        let f = [[0.0; 3], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let g = [[0.0; 3], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        assert!((mass_pair(1.0 / 6.0, &f, &g) - 1.0 / 120.0).abs() < 1e-15);
        let ones = [[1.0, 0.0, 0.0]; 4];
        assert!((mass_pair(0.5, &ones, &ones) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn drop_error_cases() {
        assert_eq!(pressure_drop_error(&[1.0, -3.0], &[1.0, -3.0]).unwrap(), 0.0);
        assert!((pressure_drop_error(&[0.8, 2.4], &[1.0, 3.0]).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(pressure_drop_error(&[1.0], &[0.0]), Err(Error::Undefined(_))));
        assert!(pressure_drop_error(&[], &[1.0]).is_err());
    }

    #[test]
    fn uniform_force_at_rest_balances_the_drop() {
        let (m, f) = setup();
        let model = RheologyModel::from_hematocrit(45.0).unwrap();
        let h = history(&m, &[0.0, 0.1], |_, _| [0.0; 3]);
        let force = |_: [f64; 4]| [0.0, 0.0, 2.0];
        let out = vwerp_pressure_drop_forced(&h, &m, &f, &model, Scheme::First, Some(&force)).unwrap();
        let dp = out.delta_p[0];
        assert!((dp + 6.0).abs() < 0.15 * 6.0, "{dp}");
        assert_eq!(out.kinetic[0], 0.0);
    }

    #[test]
    fn forced_pulsatile_pipe_tracks_the_drop() {
        use crate::physics::ReferenceFlow;
        use crate::vwerp::sample::sample_field;
        let (m, f) = setup();
        let model = RheologyModel::from_hematocrit(45.0).unwrap();
        let flow = ReferenceFlow::pulsatile_pipe(&model, 1.0, 2.0, 1.0, 0.3);
        let times: Vec<f64> = (0..40).map(|k| k as f64 / 40.0).collect();
        let h = sample_field(&flow, &m, &times).unwrap();
        let force = |p: [f64; 4]| flow.source(p, &model);
        let forced = vwerp_pressure_drop_forced(&h, &m, &f, &model, Scheme::Second, Some(&force)).unwrap();
        let plain = vwerp_pressure_drop(&h, &m, &f, &model, Scheme::Second).unwrap();
        let reference: Vec<f64> = forced.times.iter().map(|&t| flow.pressure_drop(3.0, t).unwrap()).collect();
        let e_forced = pressure_drop_error(&forced.delta_p, &reference).unwrap();
        let e_plain = pressure_drop_error(&plain.delta_p, &reference).unwrap();
        assert!(e_forced < 0.15, "{e_forced}");
        assert!(e_plain > 1.0, "{e_plain}");
        assert!(forced.body.iter().zip(&plain.body).all(|(a, b)| a.is_finite() && *b == 0.0));
    }
}
