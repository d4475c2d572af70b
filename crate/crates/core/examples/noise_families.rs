//! Non-Gaussian noise: the decoders still assume Gaussian noise, and the
//! dispersion picks up the true fourth moment. Heavier tails widen the
//! backoff from capacity, lighter tails shrink it.
//!
//! Run: `cargo run --example noise_families`

use bcdisp::analysis::{normal_approx_log_m, ApproxCriterion, OperatingPoint};
use bcdisp::model::{noise_moments, ChannelConfig, NoiseSpec};

fn main() -> bcdisp::Result<()> {
    let beta = 0.6;
    let families = [
        ("gaussian", NoiseSpec::gaussian(beta)?),
        ("laplace", NoiseSpec::laplace(beta)?),
        ("uniform", NoiseSpec::uniform(beta)?),
        ("two-point mixture", NoiseSpec::mixture(beta, beta * beta)?),
    ];
    println!("{:<18} {:>9} {:>9} {:>9} {:>10}", "strong-user noise", "kurtosis", "V1", "V2", "ln M1@500");
    for (name, noise1) in families {
        let (_, m4, _) = noise_moments(&noise1)?;
        let cfg = ChannelConfig { noise1, ..ChannelConfig::gaussian(5.0, 0.3, beta)? }.validate()?;
        let op = OperatingPoint::of(&cfg);
        let (l1, _) = normal_approx_log_m(&cfg, 500, 0.1, 0.1, ApproxCriterion::Sep)?;
        println!("{name:<18} {:>9.3} {:>9.5} {:>9.5} {:>10.3}", m4 / (beta * beta), op.v1, op.v2, l1);
    }
    Ok(())
}
