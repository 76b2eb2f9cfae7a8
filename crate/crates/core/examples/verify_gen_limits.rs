//! Generator-limit sweep: at which fraction of the rated output does the
//! trained dispatch net provably stay within limits over the load box?

use gridverify::gridopf::{build_problem1, builtin_case_4bus, generate_dataset, LoadBox};
use gridverify::trainer::{train, TrainConfig};
use gridverify::verifier::{verify, Status, VerifyConfig};

fn main() -> gridverify::Result<()> {
    let net = builtin_case_4bus();
    let data = generate_dataset(&net, 1000, 0.0, 2.0, 0)?;
    let (xs, ys) = data.pairs();
    let nn = train(&xs, &ys, &TrainConfig::new(vec![2, 4, 2]))?.nn;
    let load_box = "abs:0:0.1".parse::<LoadBox>()?.to_box(&net)?;

    for scale in [0.01, 0.03, 0.05, 0.1, 0.2, 0.5, 1.0] {
        let v = verify(&build_problem1(&nn, &net, &load_box, scale)?, &VerifyConfig::default())?;
        let detail = match (&v.status, &v.witness) {
            (Status::Refuted, Some(w)) => format!("loads {:?} give slack {:.4}", w.x, w.value),
            _ => format!("bound {:.4}", v.lower_bound),
        };
        println!("scale {scale:>5}: {:?}, {detail} ({} nodes)", v.status, v.nodes);
    }
    Ok(())
}
