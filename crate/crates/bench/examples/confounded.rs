//! Compares every estimator on the confounded heterogeneous-effect data.
//!
//! Usage: `cargo run --release -p ocdeepiv-bench --example confounded [seed] [epochs] [lr]`

use ocdeepiv_bench::{compare, EstimatorKind, FitOptions};
use ocdeepiv_core::{gen_confounded, DgpSpec, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let lr: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.001);

    let data = gen_confounded(&DgpSpec::confounded(10_000, seed))?;
    let opts = FitOptions {
        train: TrainConfig { seed, epochs, switch_epoch: epochs / 2, lr, ..Default::default() },
        threads: 4,
        ..Default::default()
    };
    let table = compare(&data, &EstimatorKind::ALL, &opts)?;
    for row in table.ranked() {
        match (row.mse_raw, row.mse_smoothed) {
            (Some(raw), Some(smooth)) => println!(
                "{:<24} rank {:?}  mse_raw {:.4}  mse_smoothed {:.4}  {:.1?}",
                row.kind.name(),
                row.rank,
                raw.mean,
                smooth.mean,
                row.wall_time
            ),
            _ => println!("{:<24} {:?}", row.kind.name(), row.status),
        }
    }
    Ok(())
}
