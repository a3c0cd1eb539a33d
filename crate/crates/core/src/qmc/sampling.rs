use super::domain::{ChartSample, ImplicitDomain};
use super::halton::{hash_words, HaltonSampler};
use crate::error::{Error, Result};

const GUARD_PROPOSALS: u64 = 100_000;
const MIN_ACCEPTANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RejectionStats {
    pub accepted: usize,
    pub proposals: u64,
}

impl RejectionStats {
    pub fn acceptance(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    fn check(&self) -> Result<()> {
        if self.proposals >= GUARD_PROPOSALS && self.acceptance() < MIN_ACCEPTANCE {
            return Err(Error::PathologicalDomain {
                rate: self.acceptance(),
                proposals: self.proposals,
            });
        }
        Ok(())
    }
}

/// Space-time point in physical units.
pub type Point4 = [f64; 4];

fn lerp(lo: f64, hi: f64, u: f64) -> f64 {
    lo + u * (hi - lo)
}

/// Rejection sampling of 4D points whose space part lies in `bbox` and
/// satisfies `accept`; time is drawn from `times`.
pub(crate) fn rejection<F: Fn([f64; 3]) -> bool>(
    bbox: ([f64; 3], [f64; 3]),
    times: (f64, f64),
    n: usize,
    seed: u64,
    accept: F,
) -> Result<(Vec<Point4>, RejectionStats)> {
    let sampler = HaltonSampler::owen(4, seed)?;
    let (lo, hi) = bbox;
    let mut out = Vec::with_capacity(n);
    let mut stats = RejectionStats::default();
    let mut index = 0u64;
    while out.len() < n {
        let u = sampler.point4(index);
        index += 1;
        stats.proposals += 1;
        let x = [lerp(lo[0], hi[0], u[0]), lerp(lo[1], hi[1], u[1]), lerp(lo[2], hi[2], u[2])];
        if accept(x) {
            out.push([x[0], x[1], x[2], lerp(times.0, times.1, u[3])]);
            stats.accepted += 1;
        }
        stats.check()?;
    }
    Ok((out, stats))
}

/// Interior space-time points with phi < 0 and time uniform in `times`.
pub fn sample_interior_spacetime<D: ImplicitDomain + ?Sized>(
    domain: &D,
    times: (f64, f64),
    n: usize,
    seed: u64,
) -> Result<(Vec<Point4>, RejectionStats)> {
    rejection(domain.bounding_box(), times, n, seed, |x| domain.sdf(x) < 0.0)
}

/// Interior points with phi < 0.
pub fn sample_interior<D: ImplicitDomain + ?Sized>(domain: &D, n: usize, seed: u64) -> Result<Vec<[f64; 3]>> {
    let (pts, _) = sample_interior_spacetime(domain, (0.0, 0.0), n, seed)?;
    Ok(pts.into_iter().map(|p| [p[0], p[1], p[2]]).collect())
}

pub fn sample_boundary_band_spacetime<D: ImplicitDomain + ?Sized>(
    domain: &D,
    thickness: f64,
    times: (f64, f64),
    n: usize,
    seed: u64,
) -> Result<(Vec<Point4>, RejectionStats)> {
    if !(thickness > 0.0) {
        return Err(Error::invalid(format!("band thickness {thickness} must be positive")));
    }
    rejection(domain.band_box(thickness), times, n, seed, |x| {
        let phi = domain.sdf(x);
        phi > 0.0 && phi <= thickness && domain.in_wall_zone(x)
    })
}

/// Points just outside the wall: 0 < phi <= thickness.
pub fn sample_boundary_band<D: ImplicitDomain + ?Sized>(
    domain: &D,
    thickness: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<[f64; 3]>> {
    let (pts, _) = sample_boundary_band_spacetime(domain, thickness, (0.0, 0.0), n, seed)?;
    Ok(pts.into_iter().map(|p| [p[0], p[1], p[2]]).collect())
}

/// Wall points with outward unit normals and times uniform in `times`.
pub fn sample_wall_spacetime<D: ImplicitDomain + ?Sized>(
    domain: &D,
    times: (f64, f64),
    n: usize,
    seed: u64,
) -> Result<(Vec<Point4>, Vec<[f64; 3]>)> {
    let sampler = HaltonSampler::owen(4, seed)?;
    let mut pts = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut stats = RejectionStats::default();
    let mut index = 0u64;
    while pts.len() < n {
        let u = sampler.point4(index);
        index += 1;
        stats.proposals += 1;
        match domain.wall_chart([u[0], u[1], u[2]]) {
            None => return Err(Error::UnsupportedDomain("domain has no wall chart".into())),
            Some(ChartSample::Rejected) => {}
            Some(ChartSample::Point { x, normal }) => {
                pts.push([x[0], x[1], x[2], lerp(times.0, times.1, u[3])]);
                normals.push(normal);
                stats.accepted += 1;
            }
        }
        stats.check()?;
    }
    Ok((pts, normals))
}

pub fn sample_wall<D: ImplicitDomain + ?Sized>(domain: &D, n: usize, seed: u64) -> Result<(Vec<[f64; 3]>, Vec<[f64; 3]>)> {
    let (pts, normals) = sample_wall_spacetime(domain, (0.0, 0.0), n, seed)?;
    Ok((pts.into_iter().map(|p| [p[0], p[1], p[2]]).collect(), normals))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PoolKind {
    Interior,
    Band { thickness: f64 },
    Wall,
}

/// A precomputed set of space-time collocation points handed out in
/// batches. When exhausted it is regenerated under a fresh scrambling seed.
#[derive(Clone, Debug)]
pub struct CollocationPool {
    kind: PoolKind,
    times: (f64, f64),
    size: usize,
    seed: u64,
    generation: u64,
    points: Vec<Point4>,
    cursor: usize,
}

impl CollocationPool {
    pub fn new<D: ImplicitDomain + ?Sized>(
        domain: &D,
        kind: PoolKind,
        times: (f64, f64),
        size: usize,
        seed: u64,
    ) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("collocation pool size must be positive"));
        }
        let mut pool = CollocationPool {
            kind,
            times,
            size,
            seed,
            generation: 0,
            points: Vec::new(),
            cursor: 0,
        };
        pool.regenerate(domain)?;
        Ok(pool)
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn points(&self) -> &[Point4] {
        &self.points
    }

    fn regenerate<D: ImplicitDomain + ?Sized>(&mut self, domain: &D) -> Result<()> {
        let seed = hash_words(&[self.seed, self.generation]);
        self.points = match self.kind {
            PoolKind::Interior => sample_interior_spacetime(domain, self.times, self.size, seed)?.0,
            PoolKind::Band { thickness } => {
                sample_boundary_band_spacetime(domain, thickness, self.times, self.size, seed)?.0
            }
            PoolKind::Wall => sample_wall_spacetime(domain, self.times, self.size, seed)?.0,
        };
        self.cursor = 0;
        Ok(())
    }

    /// The next `n` points; a batch never straddles two generations.
    pub fn next_batch<D: ImplicitDomain + ?Sized>(&mut self, domain: &D, n: usize) -> Result<Vec<Point4>> {
        let n = n.min(self.size);
        if self.cursor + n > self.points.len() {
            self.generation += 1;
            self.regenerate(domain)?;
        }
        let batch = self.points[self.cursor..self.cursor + n].to_vec();
        self.cursor += n;
        Ok(batch)
    }
}
