use super::rheology::RheologyModel;
use crate::autodiff::{evaluate_with_derivatives, DifferentiableField, Jet, Real, JET_LEN};
use crate::error::{Error, Result};

/// The derivatives of a flow at one space-time point that enter the
/// momentum and continuity residuals.
#[derive(Clone, Copy, Debug)]
pub struct FlowJet<R> {
    pub u: [R; 3],
    pub p: R,
    /// du[i][j] = du_i/dx_j, with j = 3 the time derivative.
    pub du: [[R; 4]; 3],
    pub dp: [R; 4],
    /// d2u[i][j][k] = d2u_i/dx_j dx_k over space.
    pub d2u: [[[R; 3]; 3]; 3],
}

impl FlowJet<f64> {
    pub fn from_jets(jets: &[Jet; 4]) -> Self {
        FlowJet {
            u: [jets[0].val, jets[1].val, jets[2].val],
            p: jets[3].val,
            du: std::array::from_fn(|i| jets[i].grad),
            dp: jets[3].grad,
            d2u: std::array::from_fn(|i| std::array::from_fn(|j| std::array::from_fn(|k| jets[i].second(j, k)))),
        }
    }
}

impl<R: Real> FlowJet<R> {
    /// Builds a flow jet whose entries are produced by `f(output, coefficient)`
    /// with coefficients laid out as in [`Jet::to_array`].
    pub fn from_coefficients<F: FnMut(usize, usize) -> R>(mut f: F) -> Self {
        use crate::autodiff::HESS_INDEX;
        FlowJet {
            u: std::array::from_fn(|i| f(i, 0)),
            p: f(3, 0),
            du: std::array::from_fn(|i| std::array::from_fn(|j| f(i, 1 + j))),
            dp: std::array::from_fn(|j| f(3, 1 + j)),
            d2u: std::array::from_fn(|i| std::array::from_fn(|j| std::array::from_fn(|k| f(i, 5 + HESS_INDEX[j][k])))),
        }
    }

    /// Strain-rate tensor and squared magnitude 2 e:e.
    pub fn strain(&self) -> ([[R; 3]; 3], R) {
        let e: [[R; 3]; 3] =
            std::array::from_fn(|i| std::array::from_fn(|j| (self.du[i][j] + self.du[j][i]) * 0.5));
        let mut sq = e[0][0] * e[0][0];
        for i in 0..3 {
            for j in 0..3 {
                if i + j > 0 {
                    sq = sq + e[i][j] * e[i][j];
                }
            }
        }
        (e, sq * 2.0)
    }
}

/// Momentum residual [Ba/cm] and continuity residual [1/s] at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualSample {
    pub momentum: [f64; 3],
    pub continuity: f64,
    pub point: [f64; 4],
}

impl ResidualSample {
    /// Score used for adaptive refinement.
    pub fn magnitude(&self) -> f64 {
        let m = self.momentum;
        (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt() + self.continuity.abs()
    }
}

/// rho (du/dt + u.grad u) + grad p - div tau - source, and div u.
///
/// div tau is expanded exactly: 2 mu div e + 2 e grad mu, where
/// grad mu = (mu'/gamma) * 2 e_ab grad e_ab.
pub fn residual_terms<R: Real>(fj: &FlowJet<R>, model: &RheologyModel, source: [f64; 3]) -> ([R; 3], R) {
    let (e, gamma_sq) = fj.strain();
    let (mu, slope) = model.viscosity_from_squared(gamma_sq);
    let de = |a: usize, b: usize, j: usize| (fj.d2u[a][j][b] + fj.d2u[b][j][a]) * 0.5;
    let cross = slope.value() != 0.0;
    let grad_mu: [R; 3] = std::array::from_fn(|j| {
        if !cross {
            return slope.zero_like();
        }
        let mut acc = e[0][0] * de(0, 0, j);
        for a in 0..3 {
            for b in 0..3 {
                if a + b > 0 {
                    acc = acc + e[a][b] * de(a, b, j);
                }
            }
        }
        slope * acc * 2.0
    });
    let momentum = std::array::from_fn(|i| {
        let mut inertia = fj.du[i][3];
        for j in 0..3 {
            inertia = inertia + fj.u[j] * fj.du[i][j];
        }
        let mut div_e = fj.d2u[i][0][0] + fj.d2u[0][i][0];
        for j in 1..3 {
            div_e = div_e + fj.d2u[i][j][j] + fj.d2u[j][i][j];
        }
        div_e = div_e * 0.5;
        let mut div_tau = mu * div_e * 2.0;
        if cross {
            for j in 0..3 {
                div_tau = div_tau + e[i][j] * grad_mu[j] * 2.0;
            }
        }
        inertia * model.density + fj.dp[i] - div_tau - source[i]
    });
    let continuity = fj.du[0][0] + fj.du[1][1] + fj.du[2][2];
    (momentum, continuity)
}

pub fn momentum_residual<F: DifferentiableField + ?Sized>(
    field: &F,
    model: &RheologyModel,
    point: [f64; 4],
    source: Option<[f64; 3]>,
) -> Result<ResidualSample> {
    let jets = field.eval_jets(point);
    if !jets.iter().all(Jet::is_finite) {
        return Err(Error::Diverged { point });
    }
    let fj = FlowJet::from_jets(&jets);
    let (momentum, continuity) = residual_terms(&fj, model, source.unwrap_or([0.0; 3]));
    if !momentum.iter().all(|v| v.is_finite()) || !continuity.is_finite() {
        return Err(Error::Diverged { point });
    }
    Ok(ResidualSample {
        momentum,
        continuity,
        point,
    })
}

/// |2 mu (I - n n^T)(e n)| at a wall point.
pub fn wall_shear_stress<F: DifferentiableField + ?Sized>(
    field: &F,
    model: &RheologyModel,
    point: [f64; 4],
    normal: [f64; 3],
) -> Result<f64> {
    let b = evaluate_with_derivatives(field, point)?;
    let g: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| b.jacobian[i][j]));
    Ok(wall_shear_from_gradient(model, g, normal))
}

pub fn wall_shear_from_gradient(model: &RheologyModel, g: [[f64; 3]; 3], normal: [f64; 3]) -> f64 {
    let (e, gamma) = super::rheology::strain_rate(g);
    let mu = model.viscosity(gamma);
    let en: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| e[i][j] * normal[j]).sum());
    let nen: f64 = (0..3).map(|i| en[i] * normal[i]).sum();
    let t: [f64; 3] = std::array::from_fn(|i| 2.0 * mu * (en[i] - nen * normal[i]));
    (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt()
}

/// The momentum left-hand side of a field, so that the field satisfies the
/// forced equations exactly when this is used as the source.
pub struct ManufacturedSource<'a, F: ?Sized> {
    field: &'a F,
    model: RheologyModel,
}

pub fn manufactured_source<F: DifferentiableField + ?Sized>(field: &F, model: RheologyModel) -> ManufacturedSource<'_, F> {
    ManufacturedSource { field, model }
}

impl<F: DifferentiableField + ?Sized> ManufacturedSource<'_, F> {
    pub fn at(&self, point: [f64; 4]) -> Result<[f64; 3]> {
        Ok(momentum_residual(self.field, &self.model, point, None)?.momentum)
    }
}

/// Residual of a flow jet together with d(weighted squared residual) with
/// respect to every jet coefficient of the four outputs.
pub struct ResidualAdjoint {
    pub momentum: [f64; 3],
    pub continuity: f64,
    /// Sum over channels of weight * residual^2.
    pub value: f64,
    pub adjoint: [[f64; JET_LEN]; 4],
}

/// Squared-residual adjoints through a small reverse tape. `weights` are
/// the per-channel factors (x, y, z momentum, continuity).
pub fn residual_adjoint(jets: &[Jet; 4], model: &RheologyModel, source: [f64; 3], weights: [f64; 4]) -> ResidualAdjoint {
    use crate::autodiff::Tape;
    let tape = Tape::new();
    let coeffs: Vec<[f64; JET_LEN]> = jets.iter().map(Jet::to_array).collect();
    let vars: Vec<Vec<_>> = coeffs.iter().map(|c| tape.vars(c)).collect();
    let fj = FlowJet::from_coefficients(|o, c| vars[o][c]);
    let (mom, cont) = residual_terms(&fj, model, source);
    let mut total = cont.square() * weights[3];
    for i in 0..3 {
        total = total + mom[i].square() * weights[i];
    }
    let adj = tape.adjoints(total);
    let adjoint = std::array::from_fn(|o| std::array::from_fn(|c| adj[vars[o][c].index()]));
    ResidualAdjoint {
        momentum: std::array::from_fn(|i| mom[i].value()),
        continuity: cont.value(),
        value: total.value(),
        adjoint,
    }
}

/// Residual channels (x, y, z momentum, continuity) of a flow jet with the
/// derivative of each channel with respect to every jet coefficient.
pub struct ChannelJacobian {
    pub residual: [f64; 4],
    /// jacobian[channel][output][coefficient].
    pub jacobian: [[[f64; JET_LEN]; 4]; 4],
}

pub fn residual_channel_jacobian(jets: &[Jet; 4], model: &RheologyModel, source: [f64; 3]) -> ChannelJacobian {
    use crate::autodiff::Tape;
    let tape = Tape::new();
    let coeffs: Vec<[f64; JET_LEN]> = jets.iter().map(Jet::to_array).collect();
    let vars: Vec<Vec<_>> = coeffs.iter().map(|c| tape.vars(c)).collect();
    let fj = FlowJet::from_coefficients(|o, c| vars[o][c]);
    let (mom, cont) = residual_terms(&fj, model, source);
    let channels = [mom[0], mom[1], mom[2], cont];
    let mut jacobian = [[[0.0; JET_LEN]; 4]; 4];
    for (ch, r) in channels.iter().enumerate() {
        let adj = tape.adjoints(*r);
        for o in 0..4 {
            for c in 0..JET_LEN {
                jacobian[ch][o][c] = adj[vars[o][c].index()];
            }
        }
    }
    ChannelJacobian {
        residual: channels.map(|r| r.value()),
        jacobian,
    }
}
