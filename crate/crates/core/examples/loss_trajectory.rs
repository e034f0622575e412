//! Trains the treatment network on the coin-flip data with default settings
//! and prints the loss trajectory every ten epochs.

use ocdeepiv_core::model::INIT_STREAM;
use ocdeepiv_core::{build_features, gen_code_faithful, staged_train, DualPathNet, RngStream, TrainConfig};

fn main() -> ocdeepiv_core::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let data = gen_code_faithful(10_000, seed)?;
    let features = build_features(&data.x, &data.t)?;
    let cfg = TrainConfig { seed, ..Default::default() };
    let net = DualPathNet::treatment(cfg.dropout_p, &mut RngStream::new(seed, INIT_STREAM))?;
    let start = std::time::Instant::now();
    let out = staged_train(net, &data.z, &features, &data.t, &cfg)?;
    println!("{:>5} {:>10} {:>10} {:>10}", "epoch", "total", "mse", "ortho");
    for r in out.history.iter().filter(|r| r.epoch == 1 || r.epoch % 10 == 0) {
        println!("{:>5} {:>10.6} {:>10.6} {:>10.6}", r.epoch, r.total, r.mse, r.ortho);
    }
    eprintln!("trained in {:.1?}", start.elapsed());
    Ok(())
}
