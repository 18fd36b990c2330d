//! Grid-search prediction sets from a bimodal aggregated p-value.
//!
//! `cargo run --example regression_sets`

use mdcp::regsets::{grid_search_set, YGrid};

fn main() -> mdcp::Result<()> {
    let labels: Vec<f64> = (0..200).map(|i| -5.0 + 10.0 * i as f64 / 199.0).collect();
    let grid = YGrid::build(&labels, 100)?;
    // Two sources centred at -2 and +2; the max-p curve has two humps.
    let p = |y: f64| {
        let hump = |c: f64| (-(y - c) * (y - c) / 2.0).exp();
        Ok(hump(-2.0).max(hump(2.0)))
    };
    for alpha in [0.1, 0.5, 0.9] {
        let set = grid_search_set(&grid, p, alpha)?;
        let parts: Vec<String> = set
            .intervals()
            .iter()
            .map(|iv| format!("[{:.2}, {:.2}]", iv.lo, iv.hi))
            .collect();
        println!("alpha {alpha}: {} (length {:.2})", parts.join(" u "), set.total_length());
    }
    Ok(())
}
