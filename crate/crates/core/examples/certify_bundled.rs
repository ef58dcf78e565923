//! Stability certificate of the bundled network with its designed schedule.

use vibrokit::bundled::bundled_config;
use vibrokit::certify::{certify, CertifyOptions, GammaMethod};

fn main() -> vibrokit::Result<()> {
    let exp = bundled_config().build()?;
    for method in [GammaMethod::Analytic, GammaMethod::Sampled] {
        let opts = CertifyOptions { gamma_method: method, ..CertifyOptions::default() };
        let cert = certify(&exp.network, &exp.partition, &exp.schedule, &opts)?;
        println!("gamma from {method:?}:");
        for c in &cert.clusters {
            println!(
                "  cluster {}: {:.4?} -> {:.4?}",
                c.cluster, c.robustness_uncontrolled, c.robustness_controlled
            );
        }
        println!("  gamma analytic {:.3?}", cert.gamma_analytic);
        println!("  gamma sampled  {:.3?}", cert.gamma_sampled);
        println!("  M-matrix {:?}, conditions satisfied {}", cert.m_matrix.map(|m| m.is_m_matrix), cert.theorem1_satisfied);
    }
    Ok(())
}
