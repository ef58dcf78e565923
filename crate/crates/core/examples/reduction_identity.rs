//! Builds incidence reductions of random clustered networks and checks
//! `B^T = R B_hat^T` together with the Laplacian identity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vibrokit::network::{build_reduction, laplacian_consistency_check};
use vibrokit::reduction::compute_r;
use vibrokit::synthetic::{random_clustered_network, RandomNetworkSpec};

fn main() -> vibrokit::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    for i in 0..10 {
        let (net, part) = random_clustered_network(&mut rng, &RandomNetworkSpec::default())?;
        let red = build_reduction(&net, &part)?;
        let r = compute_r(&red)?;
        let residual = r.residual(&red);
        worst = worst.max(residual);
        println!(
            "instance {i}: n = {:2}, r = {}, intra tree {:2}, inter tree {}, residual {residual:.2e}, laplacian ok {}",
            net.len(),
            part.len(),
            red.intra_dim(),
            red.inter_dim(),
            laplacian_consistency_check(&red, &net)
        );
    }
    println!("worst residual {worst:.2e}");
    Ok(())
}
