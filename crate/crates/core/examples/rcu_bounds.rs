//! Random-coding union bounds for every decoding and error criterion,
//! compared with a direct simulation at the same codebook sizes. A low-SNR
//! channel keeps the error rates large enough to see at n = 64.
//!
//! Run: `cargo run --release --example rcu_bounds`

use bcdisp::model::ChannelConfig;
use bcdisp::montecarlo::{rcu_bound, run_simulation, BoundKind, Decoder, SimulationRequest};

fn main() -> bcdisp::Result<()> {
    let cfg = ChannelConfig::gaussian(0.5, 0.4, 0.8)?.validate()?;
    let (n, l1, l2) = (64, 64f64.ln(), 64f64.ln());
    println!("P = 0.5, alpha = 0.4, beta = 0.8, n = {n}, M1 = M2 = 64");
    for kind in
        [BoundKind::User2Sep, BoundKind::User1SepSic, BoundKind::User1SepJnn, BoundKind::JepSic, BoundKind::JepJnn]
    {
        let b = rcu_bound(&cfg, n, l1, l2, kind, 20_000, 11)?;
        println!("  {kind:<12?} bound = {:.5} +/- {:.5}", b.value, b.std_error);
    }
    for decoder in [Decoder::Sic, Decoder::Jnn] {
        let r = run_simulation(&cfg, &SimulationRequest::new(n, l1, l2, decoder, 10_000, 11))?;
        println!(
            "  simulated {decoder:?}: P_e1 = {:.5}, P_e2 = {:.5}, joint = {:.5}",
            r.err1.estimate, r.err2.estimate, r.err_joint.estimate
        );
    }
    Ok(())
}
