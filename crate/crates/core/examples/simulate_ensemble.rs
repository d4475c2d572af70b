//! Monte Carlo error rates of the spherical superposition ensemble under
//! successive cancellation and joint nearest-neighbour decoding.
//!
//! The first run is small enough to materialize both codebooks. The second
//! uses codebook sizes from the normal approximation at n = 128, which only
//! the virtual-codebook engine can handle.
//!
//! Run: `cargo run --release --example simulate_ensemble`

use bcdisp::analysis::{normal_approx_log_m, ApproxCriterion};
use bcdisp::model::ChannelConfig;
use bcdisp::montecarlo::{run_simulation, Decoder, Engine, SimReport, SimulationRequest};

fn show(label: &str, r: &SimReport) {
    println!(
        "{label:<28} P_e1 = {:.4} [{:.4}, {:.4}]  P_e2 = {:.4} [{:.4}, {:.4}]  ({:?})",
        r.err1.estimate, r.err1.ci95.0, r.err1.ci95.1, r.err2.estimate, r.err2.ci95.0, r.err2.ci95.1, r.engine
    );
}

fn main() -> bcdisp::Result<()> {
    let cfg = ChannelConfig::gaussian(5.0, 0.3, 0.6)?.validate()?;

    let (l1, l2) = (64f64.ln(), 32f64.ln());
    for decoder in [Decoder::Sic, Decoder::Jnn] {
        let req = SimulationRequest::new(16, l1, l2, decoder, 20_000, 7);
        show(&format!("n=16, M=64x32, {decoder:?}"), &run_simulation(&cfg, &req)?);
    }

    let n = 128;
    let (l1, l2) = normal_approx_log_m(&cfg, n, 0.1, 0.1, ApproxCriterion::Sep)?;
    println!("\nn = {n}: ln M1 = {l1:.2}, ln M2 = {l2:.2} (targets 0.1/0.1)");
    let mut req = SimulationRequest::new(n, l1, l2, Decoder::Sic, 20_000, 7);
    show("n=128, SIC", &run_simulation(&cfg, &req)?);
    // Joint decoding at this size needs the virtual engine explicitly.
    req.decoder = Decoder::Jnn;
    req.engine = Engine::Implicit;
    req.trials = 5_000;
    show("n=128, JNN", &run_simulation(&cfg, &req)?);
    Ok(())
}
