use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use serde::{Deserialize, Serialize};

use super::mesh::{dot, FacetTag, SimplexMesh};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StokesConfig {
    /// Pressure stabilization coefficient, scaled by the squared element
    /// diameter.
    pub stabilization: f64,
    /// Relative residual the linear solve must reach.
    pub tolerance: f64,
    /// Iterative refinement sweeps after the direct solve.
    pub refinement_sweeps: usize,
    /// Which condition wins on vertices shared by the inlet and the wall.
    pub inlet_rim: RimAssignment,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RimAssignment {
    Inlet,
    Wall,
}

impl Default for StokesConfig {
    fn default() -> Self {
        StokesConfig {
            stabilization: 0.05,
            tolerance: 1e-10,
            refinement_sweeps: 5,
            inlet_rim: RimAssignment::Wall,
        }
    }
}

/// Solenoidal virtual field for one outlet.
#[derive(Clone, Debug, PartialEq)]
pub struct StokesTestField {
    pub outlet: u32,
    pub xi: Vec<[f64; 3]>,
    pub pressure: Vec<f64>,
    /// Inflow of the discrete field through the inlet [cm^2].
    pub inlet_area: f64,
    pub relative_residual: f64,
}

/// Merged sparse matrix in row-major triplet form.
struct Assembled {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Assembled {
    fn from_triplets(n: usize, mut raw: Vec<(usize, usize, f64)>) -> Self {
        raw.sort_unstable_by_key(|e| (e.0, e.1));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(raw.len());
        for (i, j, v) in raw {
            match entries.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => entries.push((i, j, v)),
            }
        }
        Assembled { n, entries }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Prescribed vertex values: the inlet takes -n, wall and other outlets are
/// zero, outlet `k` stays free.
fn dirichlet_values(mesh: &SimplexMesh, outlet: u32, rim: RimAssignment) -> Vec<Option<[f64; 3]>> {
    let inlet = mesh.vertex_normals(FacetTag::Inlet);
    let mut fixed: Vec<Option<[f64; 3]>> = vec![None; mesh.vertices.len()];
    for (v, n) in inlet.iter().enumerate() {
        if let Some(n) = n {
            fixed[v] = Some(n.map(|c| -c));
        }
    }
    for f in &mesh.facets {
        if f.tag == FacetTag::Outlet(outlet) || f.tag == FacetTag::Inlet {
            continue;
        }
        for &v in &f.vertices {
            if rim == RimAssignment::Wall || inlet[v].is_none() {
                fixed[v] = Some([0.0; 3]);
            }
        }
    }
    fixed
}

/// Solves -div(2 e(xi)) + grad p = 0, div xi = 0 with P1-P1 elements and
/// Brezzi-Pitkaranta stabilization.
pub fn solve_auxiliary_stokes(mesh: &SimplexMesh, outlet: u32, config: &StokesConfig) -> Result<StokesTestField> {
    if mesh.tag_area(FacetTag::Inlet) == 0.0 {
        return Err(Error::invalid("mesh has no inlet facets"));
    }
    if mesh.tag_area(FacetTag::Outlet(outlet)) == 0.0 {
        return Err(Error::invalid(format!("mesh has no facets tagged outlet:{outlet}")));
    }
    let fixed = dirichlet_values(mesh, outlet, config.inlet_rim);
    let (xi, pressure, residual) = solve_dirichlet(mesh, &fixed, config)?;
    let inlet_area = -boundary_flux(mesh, &xi, FacetTag::Inlet);
    if !(inlet_area > 0.0) {
        return Err(Error::SolverFailure(format!("inlet area {inlet_area:e} is not positive")));
    }
    log::debug!("auxiliary Stokes, outlet {outlet}: residual {residual:.2e}");
    Ok(StokesTestField {
        outlet,
        xi,
        pressure,
        inlet_area,
        relative_residual: residual,
    })
}

type StokesSolution = (Vec<[f64; 3]>, Vec<f64>, f64);

/// Stabilized Stokes solve with prescribed vertex velocities and natural
/// conditions elsewhere.
pub(crate) fn solve_dirichlet(mesh: &SimplexMesh, fixed: &[Option<[f64; 3]>], config: &StokesConfig) -> Result<StokesSolution> {
    let nv = mesh.vertices.len();
    let n = 4 * nv;
    let dof_value = |d: usize| -> Option<f64> { if d % 4 == 3 { None } else { fixed[d / 4].map(|g| g[d % 4]) } };

    let mut raw = Vec::with_capacity(mesh.tets.len() * 16 * 16);
    let mut rhs = vec![0.0; n];
    for (k, t) in mesh.tets.iter().enumerate() {
        let g = mesh.geometry(k);
        let v = g.volume;
        let stab = config.stabilization * g.diameter * g.diameter * v;
        let mut local = [[0.0; 16]; 16];
        for a in 0..4 {
            for b in 0..4 {
                let gg = dot(g.grads[a], g.grads[b]);
                for i in 0..3 {
                    for j in 0..3 {
                        let delta = if i == j { gg } else { 0.0 };
                        local[4 * a + i][4 * b + j] = v * (delta + g.grads[a][j] * g.grads[b][i]);
                    }
                    // -(p, div v) and -(q, div xi), P1 basis integrates to V/4
                    local[4 * a + i][4 * b + 3] = -0.25 * v * g.grads[a][i];
                    local[4 * b + 3][4 * a + i] = -0.25 * v * g.grads[a][i];
                }
                local[4 * a + 3][4 * b + 3] = -stab * gg;
            }
        }
        for (la, &va) in t.iter().enumerate() {
            for ca in 0..4 {
                let row = 4 * va + ca;
                if dof_value(row).is_some() {
                    continue;
                }
                for (lb, &vb) in t.iter().enumerate() {
                    for cb in 0..4 {
                        let col = 4 * vb + cb;
                        let val = local[4 * la + ca][4 * lb + cb];
                        match dof_value(col) {
                            Some(gv) => rhs[row] -= val * gv,
                            None => raw.push((row, col, val)),
                        }
                    }
                }
            }
        }
    }
    for (d, r) in rhs.iter_mut().enumerate() {
        if let Some(gv) = dof_value(d) {
            raw.push((d, d, 1.0));
            *r = gv;
        }
    }
    let a = Assembled::from_triplets(n, raw);
    let triplets: Vec<Triplet<usize, usize, f64>> = a.entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
    let sparse = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::SolverFailure(format!("sparse assembly: {e:?}")))?;
    let lu = sparse
        .sp_lu()
        .map_err(|e| Error::SolverFailure(format!("LU factorization of the {n}-unknown system failed: {e:?}")))?;
    let solve = |b: &[f64]| -> Vec<f64> {
        let m = Mat::from_fn(n, 1, |i, _| b[i]);
        let x = lu.solve(&m);
        (0..n).map(|i| x[(i, 0)]).collect()
    };
    let b_norm = norm(&rhs);
    let mut x = solve(&rhs);
    let mut residual = f64::INFINITY;
    for sweep in 0..=config.refinement_sweeps {
        let ax = a.apply(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
        residual = norm(&r) / b_norm;
        if !residual.is_finite() {
            return Err(Error::SolverFailure("non-finite solution; the system is singular".into()));
        }
        if residual <= config.tolerance || sweep == config.refinement_sweeps {
            break;
        }
        let dx = solve(&r);
        x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
    }
    if residual > config.tolerance {
        return Err(Error::SolverFailure(format!(
            "relative residual {residual:.3e} above {:.1e} after {} refinement sweeps",
            config.tolerance, config.refinement_sweeps
        )));
    }
    let xi: Vec<[f64; 3]> = (0..nv).map(|v| [x[4 * v], x[4 * v + 1], x[4 * v + 2]]).collect();
    let pressure = (0..nv).map(|v| x[4 * v + 3]).collect();
    Ok((xi, pressure, residual))
}

/// Integral of v . n over facets with the given tag; exact for P1 fields.
pub fn boundary_flux(mesh: &SimplexMesh, v: &[[f64; 3]], tag: FacetTag) -> f64 {
    mesh.facets
        .iter()
        .filter(|f| f.tag == tag)
        .map(|f| f.area * f.vertices.iter().map(|&i| dot(v[i], f.normal)).sum::<f64>() / 3.0)
        .sum()
}

/// ||div xi||_L2 / ||grad xi||_L2 for a P1 vector field.
pub fn divergence_ratio(mesh: &SimplexMesh, xi: &[[f64; 3]]) -> f64 {
    let (mut div2, mut grad2) = (0.0, 0.0);
    for (k, t) in mesh.tets.iter().enumerate() {
        let g = mesh.geometry(k);
        let mut grad = [[0.0; 3]; 3];
        for (a, &v) in t.iter().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    grad[i][j] += xi[v][i] * g.grads[a][j];
                }
            }
        }
        let div = grad[0][0] + grad[1][1] + grad[2][2];
        div2 += g.volume * div * div;
        grad2 += g.volume * grad.iter().flatten().map(|x| x * x).sum::<f64>();
    }
    (div2 / grad2).sqrt()
}
