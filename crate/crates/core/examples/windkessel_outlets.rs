//! Three-element Windkessel outlets driven by a pulsatile inflow.

use std::f64::consts::PI;

use hemopinn::windkessel::{simulate, FlowSeries, WindkesselParams, OUTLET_TABLE};

fn main() -> hemopinn::Result<()> {
    let period = 1.0;
    let q = |t: f64| 50.0 + 40.0 * (2.0 * PI * t / period).sin().max(0.0);
    let flow = FlowSeries::sampled(0.0, 5.0 * period, 5001, q)?;

    let synthetic = WindkesselParams::new(1.0, 10.0, 0.05, 0.0)?;
    let out = simulate(&synthetic, &flow, 1e-3)?;
    let last = out.times.len() - 1;
    let per = 1000;
    for beat in 0..5 {
        let k = (beat + 1) * per;
        println!("beat {beat}: p_d(end) = {:.4}, p_wk(end) = {:.4}", out.p_d[k.min(last)], out.p_wk[k.min(last)]);
    }

    for (i, params) in OUTLET_TABLE.iter().enumerate() {
        let out = simulate(params, &flow, 1e-3)?;
        let (lo, hi) = out.p_wk.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        println!(
            "outlet {i}: tau = {:.3e}, p_wk range [{lo:.1}, {hi:.1}] over {} steps",
            params.time_constant(),
            out.times.len() - 1
        );
    }
    Ok(())
}
