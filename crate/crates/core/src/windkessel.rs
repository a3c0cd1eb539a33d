//! Three-element Windkessel outlet model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Proximal resistance, distal resistance, capacitance and the initial
/// distal pressure of one outlet, in one consistent unit system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindkesselParams {
    pub r_p: f64,
    pub r_d: f64,
    pub c: f64,
    pub p_d0: f64,
}

/// Reference outlet parameters, in table units.
pub const OUTLET_TABLE: [WindkesselParams; 4] = [
    WindkesselParams { r_p: 274.0, r_d: 5675.0, c: 5.08, p_d0: 107325.0 },
    WindkesselParams { r_p: 1300.0, r_d: 19663.0, c: 1.4416, p_d0: 107325.0 },
    WindkesselParams { r_p: 791.0, r_d: 10048.0, c: 2.788, p_d0: 107325.0 },
    WindkesselParams { r_p: 141.0, r_d: 2066.0, c: 13.6904, p_d0: 107325.0 },
];

impl WindkesselParams {
    pub fn new(r_p: f64, r_d: f64, c: f64, p_d0: f64) -> Result<Self> {
        let p = WindkesselParams { r_p, r_d, c, p_d0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_p > 0.0 && self.r_d > 0.0 && self.c > 0.0 && self.p_d0.is_finite()) {
            return Err(Error::invalid(format!("windkessel needs R_p, R_d, C > 0: {self:?}")));
        }
        Ok(())
    }

    /// Distal relaxation time R_d C.
    pub fn time_constant(&self) -> f64 {
        self.r_d * self.c
    }

    /// dp_d/dt for flow `q`.
    pub fn rate(&self, p_d: f64, q: f64) -> f64 {
        (q - p_d / self.r_d) / self.c
    }
}

pub fn outlet_pressure(params: &WindkesselParams, q: f64, p_d: f64) -> f64 {
    params.r_p * q + p_d
}

/// One classical RK4 step from time `t`, with the flow rate evaluated at
/// the stage times.
pub fn wk_step<Q: Fn(f64) -> f64>(params: &WindkesselParams, p_d: f64, q: Q, t: f64, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    let q0 = q(t);
    let qh = q(t + 0.5 * dt);
    let q1 = q(t + dt);
    let k1 = params.rate(p_d, q0);
    let k2 = params.rate(p_d + 0.5 * dt * k1, qh);
    let k3 = params.rate(p_d + 0.5 * dt * k2, qh);
    let k4 = params.rate(p_d + dt * k3, q1);
    Ok(p_d + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Flow-rate samples, linearly interpolated and held constant outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSeries {
    times: Vec<f64>,
    flow: Vec<f64>,
}

impl FlowSeries {
    pub fn new(times: Vec<f64>, flow: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != flow.len() {
            return Err(Error::invalid("flow series needs at least two (t, Q) pairs of equal length"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("flow series times must increase strictly"));
        }
        if !flow.iter().chain(&times).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("flow series".into()));
        }
        Ok(FlowSeries { times, flow })
    }

    pub fn sampled<F: Fn(f64) -> f64>(t0: f64, t1: f64, samples: usize, f: F) -> Result<Self> {
        let n = samples.max(2);
        let times: Vec<f64> = (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect();
        let flow = times.iter().map(|&t| f(t)).collect();
        Self::new(times, flow)
    }

    /// Reads `t,Q` rows; a non-numeric first row is treated as a header.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let (mut times, mut flow) = (Vec::new(), Vec::new());
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let parse = |k: usize| record.get(k).and_then(|s| s.parse::<f64>().ok());
            match (parse(0), parse(1)) {
                (Some(t), Some(q)) => {
                    times.push(t);
                    flow.push(q);
                }
                _ if row == 0 => continue,
                _ => return Err(Error::Config(format!("{}: bad row {}", path.display(), row + 1))),
            }
        }
        Self::new(times, flow)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn flow(&self) -> &[f64] {
        &self.flow
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    pub fn min_spacing(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.flow[0];
        }
        if t >= self.times[n - 1] {
            return self.flow[n - 1];
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.flow[k] + w * (self.flow[k + 1] - self.flow[k])
    }
}

/// Distal and outlet pressure histories on the integration grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureSeries {
    pub times: Vec<f64>,
    pub flow: Vec<f64>,
    pub p_d: Vec<f64>,
    pub p_wk: Vec<f64>,
}

impl PressureSeries {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let err = |e: csv::Error| Error::Config(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(["t", "Q", "p_d", "p_wk"]).map_err(err)?;
        for k in 0..self.times.len() {
            w.serialize((self.times[k], self.flow[k], self.p_d[k], self.p_wk[k])).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Integrates the series from its first to its last time with steps of
/// `dt` (the last step is shortened to land on the end).
pub fn simulate(params: &WindkesselParams, series: &FlowSeries, dt: f64) -> Result<PressureSeries> {
    params.validate()?;
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    if dt > series.min_spacing() * (1.0 + 1e-12) {
        return Err(Error::invalid("time step exceeds the flow sample spacing"));
    }
    let (t0, t1) = series.span();
    let steps = (((t1 - t0) / dt) - 1e-9).ceil() as usize;
    let q = |t: f64| series.at(t);
    let mut out = PressureSeries {
        times: Vec::with_capacity(steps + 1),
        flow: Vec::with_capacity(steps + 1),
        p_d: Vec::with_capacity(steps + 1),
        p_wk: Vec::with_capacity(steps + 1),
    };
    let mut p_d = params.p_d0;
    let mut push = |t: f64, p_d: f64| {
        out.times.push(t);
        out.flow.push(q(t));
        out.p_d.push(p_d);
        out.p_wk.push(outlet_pressure(params, q(t), p_d));
    };
    push(t0, p_d);
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let h = dt.min(t1 - t);
        p_d = wk_step(params, p_d, q, t, h)?;
        push(if k + 1 == steps { t1 } else { t + h }, p_d);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exact(p: &WindkesselParams, q: f64, t: f64) -> f64 {
        q * p.r_d + (p.p_d0 - q * p.r_d) * (-t / p.time_constant()).exp()
    }

    fn fast() -> WindkesselParams {
        WindkesselParams::new(1.0, 10.0, 0.05, 3.0).unwrap()
    }

    fn integrate(p: &WindkesselParams, q: f64, t_end: f64, dt: f64) -> f64 {
        let steps = (t_end / dt).round() as usize;
        let mut x = p.p_d0;
        for k in 0..steps {
            x = wk_step(p, x, |_| q, k as f64 * dt, dt).unwrap();
        }
        x
    }

    #[test]
    fn equilibrium_is_fixed() {
        for p in OUTLET_TABLE {
            let q = p.p_d0 / p.r_d;
            assert_eq!(wk_step(&p, p.p_d0, |_| q, 0.0, 1e-3).unwrap(), p.p_d0);
        }
    }

    #[test]
    fn constant_flow_matches_exponential() {
        for p in OUTLET_TABLE.iter().copied().chain([fast()]) {
            let got = integrate(&p, 100.0, 1.0, 1e-3);
            let want = exact(&p, 100.0, 1.0);
            assert!((got / want - 1.0).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let p = fast();
        let dts = [0.1, 0.05, 0.025, 0.0125];
        let errs: Vec<f64> = dts.iter().map(|&dt| (integrate(&p, 7.0, 1.0, dt) - exact(&p, 7.0, 1.0)).abs()).collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 4.0).abs() < 0.2, "{errs:?}");
        }
    }

    #[test]
    fn outlet_pressure_formula() {
        let p = OUTLET_TABLE[3];
        assert_eq!(outlet_pressure(&p, 0.0, 5.0), 5.0);
        // steady state: p_d -> Q R_d, p_wk -> Q (R_p + R_d)
        assert_eq!(outlet_pressure(&p, 100.0, 100.0 * p.r_d), 220700.0);
        let f = fast();
        let series = FlowSeries::new(vec![0.0, 20.0], vec![2.0, 2.0]).unwrap();
        let out = simulate(&f, &series, 1e-2).unwrap();
        let last = *out.p_wk.last().unwrap();
        assert!((last - 2.0 * (f.r_p + f.r_d)).abs() < 1e-9);
    }

    #[test]
    fn zero_flow_decays() {
        let p = fast();
        let series = FlowSeries::new(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let out = simulate(&p, &series, 1e-3).unwrap();
        for (t, pd) in out.times.iter().zip(&out.p_d) {
            assert!((pd - p.p_d0 * (-t / p.time_constant()).exp()).abs() < 1e-9);
        }
        assert_eq!(out.times.len(), 1001);
        assert_eq!(*out.times.last().unwrap(), 1.0);
    }

    fn pulse(t: f64) -> f64 {
        let s = (std::f64::consts::PI * (t % 1.0)).sin();
        20.0 + 80.0 * s * s * s * s
    }

    #[test]
    fn periodic_flow_reaches_periodic_pressure() {
        let p = fast();
        let cycles = 10 * p.time_constant().ceil() as usize + 2;
        let series = FlowSeries::sampled(0.0, cycles as f64, cycles * 100 + 1, pulse).unwrap();
        let out = simulate(&p, &series, 1e-3).unwrap();
        let per = 1000;
        let n = out.p_wk.len();
        let last = &out.p_wk[n - 1 - per..n - 1];
        let prev = &out.p_wk[n - 1 - 2 * per..n - 1 - per];
        let scale = last.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dev = last.iter().zip(prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-3 * scale, "{dev} vs {scale}");
    }

    #[test]
    fn pulse_golden_values() {
        let p = OUTLET_TABLE[3];
        let series = FlowSeries::sampled(0.0, 1.0, 101, pulse).unwrap();
        let out = simulate(&p, &series, 1e-3).unwrap();
        let probe = [out.p_d[250], out.p_d[500], out.p_wk[1000]];
        assert_eq!(probe, [107324.49956743584, 107324.9288534798, 110144.85769775453]);
        // over a quarter cycle p_d moves by (int Q - p_d0 t / R_d) / C
        let moved = (5.0 + 80.0 * (3.0 / 32.0 - 1.0 / (4.0 * std::f64::consts::PI)) - p.p_d0 * 0.25 / p.r_d) / p.c;
        assert!((probe[0] - p.p_d0 - moved).abs() < 1e-3);
    }

    #[test]
    fn bad_inputs() {
        assert!(WindkesselParams::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(FlowSeries::new(vec![0.0], vec![1.0]).is_err());
        assert!(FlowSeries::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        let s = FlowSeries::new(vec![0.0, 0.1], vec![1.0, 1.0]).unwrap();
        assert!(simulate(&fast(), &s, 0.0).is_err());
        assert!(simulate(&fast(), &s, 0.2).is_err());
        assert!(wk_step(&fast(), 1.0, |_| 0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        std::fs::write(&path, "t,Q\n0.0, 1.5\n0.5,2.5\n1.0,0.5\n").unwrap();
        let s = FlowSeries::read_csv(&path).unwrap();
        assert_eq!(s.times(), &[0.0, 0.5, 1.0]);
        assert_eq!(s.at(0.25), 2.0);
        let out = simulate(&fast(), &s, 0.1).unwrap();
        let target = dir.path().join("p.csv");
        out.write_csv(&target).unwrap();
        let text = std::fs::read_to_string(&target).unwrap();
        assert!(text.starts_with("t,Q,p_d,p_wk\n"));
        assert_eq!(text.lines().count(), 12);
    }

    proptest! {
        #[test]
        fn superposition(a in -3.0..3.0f64, b in -3.0..3.0f64, w in 0.5..5.0f64) {
            let mut p = fast();
            p.p_d0 = 0.0;
            let q1 = |t: f64| (w * t).sin();
            let q2 = |t: f64| 1.0 + t * t;
            let s = |f: &dyn Fn(f64) -> f64| FlowSeries::sampled(0.0, 1.0, 201, f).unwrap();
            let r1 = simulate(&p, &s(&q1), 5e-3).unwrap();
            let r2 = simulate(&p, &s(&q2), 5e-3).unwrap();
            let r = simulate(&p, &s(&|t| a * q1(t) + b * q2(t)), 5e-3).unwrap();
            for k in 0..r.p_wk.len() {
                let lin = a * r1.p_wk[k] + b * r2.p_wk[k];
                prop_assert!((r.p_wk[k] - lin).abs() <= 1e-9 * (1.0 + lin.abs()));
            }
        }

        #[test]
        fn positivity(p_d0 in 0.0..1e3f64, amp in 0.0..50.0f64) {
            let mut p = fast();
            p.p_d0 = p_d0;
            let s = FlowSeries::sampled(0.0, 2.0, 201, |t| amp * (1.0 + (7.0 * t).sin())).unwrap();
            let out = simulate(&p, &s, 1e-2).unwrap();
            prop_assert!(out.p_d.iter().all(|v| *v >= 0.0));
        }
    }
}
