//! Fits a one-hidden-layer ReLU network to secure dispatches and saves it
//! if a path is given.

use gridverify::gridopf::{builtin_case_4bus, generate_dataset};
use gridverify::trainer::{train, TrainConfig};

fn main() -> gridverify::Result<()> {
    let net = builtin_case_4bus();
    let data = generate_dataset(&net, 1000, 0.0, 2.0, 0)?;
    let (xs, ys) = data.pairs();
    let report = train(&xs, &ys, &TrainConfig::new(vec![2, 4, 2]))?;
    for (epoch, mse) in report.mse_history.iter().enumerate().step_by(1000) {
        println!("epoch {epoch:>5}: mse {mse:.3e}");
    }
    println!("final mse {:.3e}", report.final_mse);
    for p_d in [[0.1, 0.1], [1.0, 0.5]] {
        println!("loads {p_d:?} -> dispatch {:?}", report.nn.forward(&p_d)?);
    }
    if let Some(path) = std::env::args().nth(1) {
        report.nn.save(&path)?;
        println!("saved to {path}");
    }
    Ok(())
}
