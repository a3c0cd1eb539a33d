//! Scrambled Halton integration against pseudo-random sampling, and
//! rejection sampling inside a cylinder.

use std::f64::consts::PI;

use hemopinn::qmc::{qmc_integrate, sample_interior, sample_wall, Domain, ImplicitDomain, Region};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> hemopinn::Result<()> {
    let f = |x: &[f64]| x.iter().map(|v| (PI * v).sin()).product::<f64>();
    let exact = (2.0 / PI).powi(3);
    let region = Region::unit(3)?;
    let n = 4096;
    let mut qmc = Vec::new();
    let mut mc = Vec::new();
    for seed in 0..20 {
        qmc.push((qmc_integrate(f, &region, n, seed)? - exact).abs());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sum: f64 = (0..n).map(|_| f(&[rng.random(), rng.random(), rng.random()])).sum();
        mc.push((sum / n as f64 - exact).abs());
    }
    qmc.sort_by(f64::total_cmp);
    mc.sort_by(f64::total_cmp);
    println!("n = {n}, exact {exact:.6}");
    println!("median error: scrambled Halton {:.2e}, pseudo-random {:.2e}", qmc[10], mc[10]);

    let cylinder = Domain::Cylinder { radius: 1.0, length: 2.0 };
    let inside = sample_interior(&cylinder, 2000, 5)?;
    let worst = inside.iter().map(|x| cylinder.sdf(*x)).fold(f64::NEG_INFINITY, f64::max);
    println!("2000 interior points, largest signed distance {worst:.3e}");
    let (wall, normals) = sample_wall(&cylinder, 500, 5)?;
    let off = wall.iter().map(|x| cylinder.sdf(*x).abs()).fold(0.0, f64::max);
    println!("500 wall points, largest |phi| {off:.1e}, first normal {:?}", normals[0]);
    Ok(())
}
