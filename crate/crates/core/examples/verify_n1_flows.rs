//! End to end: secure dispatch data, a trained net, then complete
//! verification of line flows under every single-line outage.

use gridverify::gridopf::{build_problem2, builtin_case_4bus, generate_dataset, LoadBox};
use gridverify::trainer::{train, TrainConfig};
use gridverify::verifier::{verify, Status, VerifyConfig};

fn main() -> gridverify::Result<()> {
    let net = builtin_case_4bus();
    let data = generate_dataset(&net, 1000, 0.0, 2.0, 0)?;
    let (xs, ys) = data.pairs();
    let nn = train(&xs, &ys, &TrainConfig::new(vec![2, 4, 2]))?.nn;
    let load_box = "abs:0:0.1".parse::<LoadBox>()?.to_box(&net)?;
    let m = net.num_lines();

    for scale in [0.05, 0.1, 0.3, 0.5, 1.0, 1.5] {
        let p = build_problem2(&nn, &net, &load_box, scale)?;
        let v = verify(&p, &VerifyConfig::default())?;
        print!("margin {scale:>4}: {:?} in {:.2?}, {} nodes", v.status, v.wall_time, v.nodes);
        if let (Status::Refuted, Some(w)) = (v.status, &v.witness) {
            let on = &w.z[net.buses..net.buses + m];
            let out = on.iter().position(|&b| b < 0.5);
            print!("; loads {:?}, outage {out:?}, worst slack {:.4}", &w.x[..2], w.value);
        }
        println!();
    }
    Ok(())
}
