//! Navier-Stokes residuals of closed-form power-law flows for every
//! hematocrit level, and of a manufactured unsteady field with its source.

use hemopinn::physics::{manufactured_source, momentum_residual, ReferenceFlow, RheologyModel, HEMATOCRIT_TABLE};
use hemopinn::qmc::{sample_interior, Domain};

fn worst<F: Fn([f64; 4]) -> hemopinn::Result<([f64; 3], f64)>>(points: &[[f64; 3]], f: F) -> hemopinn::Result<(f64, f64)> {
    let (mut m, mut c) = (0.0f64, 0.0f64);
    for x in points {
        let (mom, cont) = f([x[0], x[1], x[2], 0.3])?;
        m = m.max(mom.iter().fold(0.0, |a, v| a.max(v.abs())));
        c = c.max(cont.abs());
    }
    Ok((m, c))
}

fn steady(flow: &ReferenceFlow, model: &RheologyModel, p: [f64; 4]) -> hemopinn::Result<([f64; 3], f64)> {
    momentum_residual(flow, model, p, None).map(|s| (s.momentum, s.continuity))
}

fn main() -> hemopinn::Result<()> {
    let slab = Domain::Slab { length: 2.0, half_height: 0.5, depth: 0.4 };
    let pipe = Domain::Cylinder { radius: 0.5, length: 2.0 };
    let off_axis = |pts: Vec<[f64; 3]>, r: fn(&[f64; 3]) -> f64| pts.into_iter().filter(|x| r(x) > 0.05).collect::<Vec<_>>();
    let slab_pts = off_axis(sample_interior(&slab, 1000, 1)?, |x| x[1].abs());
    let pipe_pts = off_axis(sample_interior(&pipe, 1000, 1)?, |x| x[0].hypot(x[1]));

    println!("{:>6} {:>10} {:>7} {:>14} {:>14}", "Hct", "m [P s^n]", "n", "plane max|r|", "pipe max|r|");
    for (hct, _, _) in HEMATOCRIT_TABLE {
        let model = RheologyModel::from_hematocrit(hct)?;
        let plane = ReferenceFlow::plane_poiseuille_with_peak(&model, 0.5, 30.0);
        let tube = ReferenceFlow::pipe_poiseuille_with_peak(&model, 0.5, 30.0);
        let (plane_m, _) = worst(&slab_pts, |p| steady(&plane, &model, p))?;
        let (tube_m, tube_c) = worst(&pipe_pts, |p| steady(&tube, &model, p))?;
        println!("{hct:>6.1} {:>10.4e} {:>7.4} {plane_m:>14.2e} {tube_m:>14.2e}  (continuity {tube_c:.1e})", model.m, model.n);
    }

    let model = RheologyModel::from_hematocrit(45.0)?;
    let field = ReferenceFlow::Manufactured;
    let source = manufactured_source(&field, model);
    let box_domain = Domain::Cylinder { radius: 1.0, length: 2.0 };
    let pts = sample_interior(&box_domain, 1000, 9)?;
    let (without, _) = worst(&pts, |p| steady(&field, &model, p))?;
    let (with, _) = worst(&pts, |p| momentum_residual(&field, &model, p, Some(source.at(p)?)).map(|s| (s.momentum, s.continuity)))?;
    println!("manufactured field: max|r| {without:.3e} without source, {with:.2e} with source");
    Ok(())
}
