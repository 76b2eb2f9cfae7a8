//! Dual ascent on the root of the N-1 flow problem at several margins,
//! against the simplex root relaxation and the exact optimum.
//!
//! Pass a model file to use it; otherwise a small net is trained first.

use gridverify::dualopt::{ascend, root_lp_value, AscentConfig, DualState};
use gridverify::gridopf::{build_problem2, builtin_case_4bus, generate_dataset, LoadBox};
use gridverify::netmodel::DenseNN;
use gridverify::trainer::{train, TrainConfig};
use gridverify::verifier::{oracle_exact, OracleConfig};

fn model() -> gridverify::Result<DenseNN> {
    if let Some(path) = std::env::args().nth(1) {
        return DenseNN::load(path);
    }
    let data = generate_dataset(&builtin_case_4bus(), 1000, 0.0, 2.0, 0)?;
    let (xs, ys) = data.pairs();
    Ok(train(&xs, &ys, &TrainConfig::new(vec![2, 4, 2]))?.nn)
}

fn main() -> gridverify::Result<()> {
    let nn = model()?;
    let net = builtin_case_4bus();
    let load_box = "abs:0:0.1".parse::<LoadBox>()?.to_box(&net)?;
    let cfg = AscentConfig { iters: 5000, early_stop: f64::INFINITY, ..AscentConfig::default() };
    println!("{:>6} {:>10} {:>10} {:>10} {:>8}", "margin", "dual", "root LP", "exact", "cross");
    for scale in [0.05, 0.1, 0.3, 0.5, 1.0, 1.5] {
        let p = build_problem2(&nn, &net, &load_box, scale)?;
        let c = &p.constrained;
        let out = ascend(c, &DualState::initial(c, &c.root()?), &cfg)?;
        let lp = root_lp_value(c)?;
        let gamma = oracle_exact(&p, &OracleConfig::default())?.gamma;
        let cross = out.trace.crossed_at.map_or("-".to_string(), |i| i.to_string());
        println!("{scale:>6} {:>10.5} {lp:>10.5} {gamma:>10.5} {cross:>8}", out.best);
    }
    Ok(())
}
