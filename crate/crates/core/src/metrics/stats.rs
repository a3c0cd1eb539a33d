use crate::error::{Error, Result};

fn check_pair(reference: &[f64], estimate: &[f64], min: usize) -> Result<()> {
    if reference.len() != estimate.len() {
        return Err(Error::invalid(format!(
            "sample layouts differ: {} reference vs {} estimate",
            reference.len(),
            estimate.len()
        )));
    }
    if reference.len() < min {
        return Err(Error::invalid(format!("need at least {min} samples")));
    }
    Ok(())
}

/// Coefficient of determination 1 - SS_res / SS_tot.
pub fn r_squared(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    check_pair(reference, estimate, 2)?;
    let mean = reference.iter().sum::<f64>() / reference.len() as f64;
    let ss_tot: f64 = reference.iter().map(|r| (r - mean) * (r - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Undefined("reference has zero variance".into()));
    }
    let ss_res: f64 = reference.iter().zip(estimate).map(|(r, e)| (r - e) * (r - e)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// ||ref - est||_2 / ||ref||_2.
pub fn relative_error_l2(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    check_pair(reference, estimate, 1)?;
    let norm: f64 = reference.iter().map(|r| r * r).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Undefined("reference has zero norm".into()));
    }
    let diff: f64 = reference.iter().zip(estimate).map(|(r, e)| (r - e) * (r - e)).sum::<f64>().sqrt();
    Ok(diff / norm)
}

/// Adds the constant that moves the sample mean onto `reference_mean`.
pub fn mean_shift(estimate: &[f64], reference_mean: f64) -> Vec<f64> {
    if estimate.is_empty() {
        return Vec::new();
    }
    let shift = reference_mean - estimate.iter().sum::<f64>() / estimate.len() as f64;
    estimate.iter().map(|e| e + shift).collect()
}
