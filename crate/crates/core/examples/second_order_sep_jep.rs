//! Second-order rate regions: separate error targets per user versus a
//! single joint error target, plus the normal approximation of the codebook
//! sizes they imply at finite blocklength.
//!
//! Run: `cargo run --example second_order_sep_jep`

use bcdisp::analysis::{
    jep_default_l1_grid, jep_second_order_boundary, joint_success_probability, normal_approx_log_m,
    sep_second_order_point, ApproxCriterion, OperatingPoint,
};
use bcdisp::model::ChannelConfig;
use bcdisp::numerics::qfunc_inv;

fn main() -> bcdisp::Result<()> {
    let cfg = ChannelConfig::gaussian(5.0, 0.3, 0.6)?.validate()?;
    let op = OperatingPoint::of(&cfg);
    println!("C1 = {:.6}, C2 = {:.6}, V1 = {:.6}, V2 = {:.6}", op.c1, op.c2, op.v1, op.v2);

    let eps = 0.2;
    let sep = sep_second_order_point(&cfg, eps / 2.0, eps / 2.0)?;
    println!("\nseparate targets {:.2}/{:.2}: L1 = {:.5}, L2 = {:.5}", eps / 2.0, eps / 2.0, sep.l1, sep.l2);
    println!("joint success of that corner = {:.6} (>= {:.2})", joint_success_probability(&cfg, sep), 1.0 - eps);

    let grid = jep_default_l1_grid(&cfg, eps, 9)?;
    let jep = jep_second_order_boundary(&cfg, eps, &grid)?;
    let q = qfunc_inv(eps)?;
    println!("\njoint target {eps}: asymptotes L1 -> {:.5}, L2 -> {:.5}", op.v1.sqrt() * q, op.v2.sqrt() * q);
    for p in &jep.points {
        println!("  L1 = {:>9.5}  L2 = {:>9.5}", p.x, p.y);
    }

    println!("\nnormal approximation of ln M (targets 0.1/0.1):");
    for n in [128, 500, 2000] {
        let (a, b) = normal_approx_log_m(&cfg, n, 0.1, 0.1, ApproxCriterion::Sep)?;
        let (c, d) = normal_approx_log_m(&cfg, n, 0.1, 0.1, ApproxCriterion::JepCorner)?;
        println!("  n = {n:>5}: separate ({a:>8.2}, {b:>8.2})   joint-corner ({c:>8.2}, {d:>8.2})");
    }
    Ok(())
}
