//! Traces the capacity region of the Gaussian degraded broadcast channel by
//! sweeping the power split, and prints a handful of frontier points.
//!
//! Run: `cargo run --example first_order_region`

use bcdisp::analysis::{default_alpha_grid, first_order_corner, first_order_region};
use bcdisp::model::ChannelConfig;

fn main() -> bcdisp::Result<()> {
    let cfg = ChannelConfig::gaussian(5.0, 0.3, 0.6)?.validate()?;
    let corner = first_order_corner(&cfg);
    println!("P = {}, beta = {}, alpha = {}", cfg.total_power, cfg.beta, cfg.alpha);
    println!("operating corner: R1 = {:.6} nats, R2 = {:.6} nats", corner.r1, corner.r2);

    let region = first_order_region(&cfg, &default_alpha_grid(19))?;
    println!("\n{:>10} {:>10}", "R1", "R2");
    for p in &region.points {
        println!("{:>10.5} {:>10.5}", p.x, p.y);
    }
    // The CSV is what the `region` command writes to disk.
    let csv = region.to_csv();
    println!("\nCSV header: {}", csv.lines().next().unwrap_or_default());
    Ok(())
}
