use serde::{Deserialize, Serialize};

use super::stats::{mean_shift, r_squared, relative_error_l2};
use crate::autodiff::DifferentiableField;
use crate::error::Result;
use crate::physics::{wall_shear_stress, RheologyModel};
use crate::qmc::{sample_interior, ImplicitDomain};

/// Wall shear stress at fixed wall points over a list of times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WssMap {
    pub times: Vec<f64>,
    pub points: Vec<[f64; 3]>,
    /// [time][point] in Ba.
    pub values: Vec<Vec<f64>>,
    /// Time with the largest spatial mean WSS.
    pub peak_time: f64,
}

impl WssMap {
    pub fn mean_at(&self, k: usize) -> f64 {
        self.values[k].iter().sum::<f64>() / self.values[k].len().max(1) as f64
    }
}

pub fn wss_map<F: DifferentiableField + ?Sized>(
    field: &F,
    model: &RheologyModel,
    points: &[[f64; 3]],
    normals: &[[f64; 3]],
    times: &[f64],
) -> Result<WssMap> {
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let row = points
            .iter()
            .zip(normals)
            .map(|(x, n)| wall_shear_stress(field, model, [x[0], x[1], x[2], t], *n))
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    let mut map = WssMap {
        times: times.to_vec(),
        points: points.to_vec(),
        values,
        peak_time: f64::NAN,
    };
    let mut best = f64::NEG_INFINITY;
    for k in 0..times.len() {
        let m = map.mean_at(k);
        if m > best {
            best = m;
            map.peak_time = times[k];
        }
    }
    Ok(map)
}

/// Agreement between an estimated and a reference field on shared samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldComparison {
    pub samples: usize,
    pub r2_velocity: [f64; 3],
    /// R^2 over all velocity components stacked.
    pub r2_velocity_all: f64,
    /// R^2 of the pressure after the per-time mean shift.
    pub r2_pressure: f64,
    /// Relative L2 pressure error without and with the per-time mean shift.
    pub pressure_error_raw: f64,
    pub pressure_error: f64,
    /// Mean-shifted relative pressure error at each time.
    pub pressure_error_per_time: Vec<f64>,
    pub velocity_error: f64,
}

/// Compares fields at `points` interior QMC points at each of `times`.
pub fn compare_fields<D, E, R>(
    domain: &D,
    estimate: &E,
    reference: &R,
    times: &[f64],
    points: usize,
    seed: u64,
) -> Result<FieldComparison>
where
    D: ImplicitDomain + ?Sized,
    E: DifferentiableField + ?Sized,
    R: DifferentiableField + ?Sized,
{
    let xs = sample_interior(domain, points, seed)?;
    let mut u_ref: [Vec<f64>; 3] = Default::default();
    let mut u_est: [Vec<f64>; 3] = Default::default();
    let (mut p_ref, mut p_est, mut p_shift) = (Vec::new(), Vec::new(), Vec::new());
    let mut per_time = Vec::with_capacity(times.len());
    for &t in times {
        let mut pr = Vec::with_capacity(xs.len());
        let mut pe = Vec::with_capacity(xs.len());
        for x in &xs {
            let q = [x[0], x[1], x[2], t];
            let (a, b) = (reference.eval(q), estimate.eval(q));
            for c in 0..3 {
                u_ref[c].push(a[c]);
                u_est[c].push(b[c]);
            }
            pr.push(a[3]);
            pe.push(b[3]);
        }
        let mean = pr.iter().sum::<f64>() / pr.len() as f64;
        let shifted = mean_shift(&pe, mean);
        per_time.push(relative_error_l2(&pr, &shifted).unwrap_or(f64::NAN));
        p_shift.extend(shifted);
        p_ref.extend(pr);
        p_est.extend(pe);
    }
    let r2 = |c: usize| r_squared(&u_ref[c], &u_est[c]).unwrap_or(f64::NAN);
    let all_ref: Vec<f64> = u_ref.concat();
    let all_est: Vec<f64> = u_est.concat();
    Ok(FieldComparison {
        samples: p_ref.len(),
        r2_velocity: [r2(0), r2(1), r2(2)],
        r2_velocity_all: r_squared(&all_ref, &all_est)?,
        r2_pressure: r_squared(&p_ref, &p_shift).unwrap_or(f64::NAN),
        pressure_error_raw: relative_error_l2(&p_ref, &p_est)?,
        pressure_error: relative_error_l2(&p_ref, &p_shift)?,
        pressure_error_per_time: per_time,
        velocity_error: relative_error_l2(&all_ref, &all_est)?,
    })
}
