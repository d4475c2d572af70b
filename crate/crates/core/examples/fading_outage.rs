//! Quasi-static Rayleigh and Rician fading: outage probabilities, the outage
//! capacity corner, and finite-blocklength error estimates approaching the
//! outage probability as n grows.
//!
//! Run: `cargo run --release --example fading_outage`

use bcdisp::fading::{outage_prob, outage_region, theorem3_bound, OutageMethod, StrongDispersionGain, User};
use bcdisp::model::{ChannelConfig, FadingSpec};

fn main() -> bcdisp::Result<()> {
    let cfg = ChannelConfig::gaussian(5.0, 0.3, 0.6)?.validate()?;
    let h1 = FadingSpec::Rayleigh { mean_square: 1.0 };
    let h2 = FadingSpec::Rayleigh { mean_square: 1.0 };

    let corner = outage_region(&cfg, &h1, &h2, 0.1, 0.1)?.points[0];
    println!("Rayleigh outage corner at 0.1/0.1: R1 = {:.6}, R2 = {:.6}", corner.x, corner.y);

    let rate = 0.8 * corner.x;
    let closed = outage_prob(&cfg, &h1, User::Strong, rate, OutageMethod::ClosedForm)?;
    let mc = outage_prob(&cfg, &h1, User::Strong, rate, OutageMethod::MonteCarlo { samples: 200_000, seed: 5 })?;
    println!(
        "strong-user outage at R1 = {rate:.4}: closed form {:.5}, Monte Carlo {:.5}",
        closed.outage_prob, mc.outage_prob
    );

    println!("\nfinite-n error estimate for the strong user at the corner rate:");
    for n in [100, 400, 1600] {
        let t = theorem3_bound(
            &cfg,
            &h1,
            &h2,
            User::Strong,
            n,
            n as f64 * corner.x,
            100_000,
            5,
            StrongDispersionGain::AsPrinted,
        )?;
        println!("  n = {n:>5}: {:.5} +/- {:.5}", t.value, t.std_error);
    }

    let rice = FadingSpec::Rice { k_factor: 4.0, mean_square: 1.0 };
    let c = outage_region(&cfg, &rice, &rice, 0.1, 0.1)?.points[0];
    println!("\nRician (K = 4) outage corner at 0.1/0.1: R1 = {:.6}, R2 = {:.6}", c.x, c.y);
    Ok(())
}
