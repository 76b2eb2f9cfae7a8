//! N-1 secure dispatch on the 4-bus ring: one solve by hand, then a small
//! dataset with every sample re-checked outage by outage.

use gridverify::gridopf::{builtin_case_4bus, check_dispatch, generate_dataset, solve_scopf};

fn main() -> gridverify::Result<()> {
    let net = builtin_case_4bus();
    println!("{}: {} buses, {} lines, bridges {:?}", net.name, net.buses, net.num_lines(), net.bridges());
    for p_d in [[0.4, 0.4], [1.0, 0.2], [2.0, 2.0]] {
        match solve_scopf(&net, &p_d)? {
            Some(s) => println!("loads {p_d:?}: dispatch {:?}", s.p_g),
            None => println!("loads {p_d:?}: no secure dispatch"),
        }
    }

    let data = generate_dataset(&net, 200, 0.0, 2.0, 0)?;
    let ok = data.samples.iter().filter(|s| check_dispatch(&net, s).unwrap_or(false)).count();
    println!(
        "{} samples from {} draws ({} rejected); {ok} pass the re-check",
        data.samples.len(),
        data.header.attempts,
        data.header.rejected
    );
    if let Some(path) = std::env::args().nth(1) {
        data.save(&path)?;
        println!("saved to {path}");
    }
    Ok(())
}
