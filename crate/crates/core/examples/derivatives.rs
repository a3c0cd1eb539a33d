//! Exact first and second input derivatives of a Swish network, checked
//! against central differences.

use hemopinn::autodiff::{evaluate_with_derivatives, finite_difference_probe};
use hemopinn::network::{init_network, NetworkArchitecture, ScaleSet};
use hemopinn::qmc::{HaltonSampler, Region};

fn main() -> hemopinn::Result<()> {
    let arch = NetworkArchitecture::new(6, 64, 11);
    let scales = ScaleSet::for_box([0.0, -1.0, -1.0], [4.0, 1.0, 1.0], 1.0, 0.0, 30.0, 100.0);
    let net = init_network(arch, scales)?;
    println!("6x64 network, {} parameters", net.parameter_count());

    let sampler = HaltonSampler::owen(4, 3)?;
    let region = Region::new(vec![0.0, -1.0, -1.0, 0.0], vec![4.0, 1.0, 1.0, 1.0])?;
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let u: Vec<f64> = (0..4).map(|d| sampler.component(k, d)).collect();
        let p = region.map(&u);
        let exact = evaluate_with_derivatives(&net, p)?;
        let fd = finite_difference_probe(&net, p, 1e-3)?;
        worst = worst.max(exact.max_relative_difference(&fd, 1e-2));
        if k < 3 {
            println!(
                "x = ({:.3}, {:.3}, {:.3}, {:.3}): u = {:.5}, du/dx = {:.5} (fd {:.5}), d2p/dy2 = {:.5} (fd {:.5})",
                p[0], p[1], p[2], p[3], exact.value[0], exact.jacobian[0][0], fd.jacobian[0][0], exact.second[3][1][1], fd.second[3][1][1]
            );
        }
    }
    println!("largest relative difference over 100 points: {worst:.2e}");
    Ok(())
}
