//! Branch and bound against exhaustive enumeration on random instances,
//! and the encoded flow problem against its explicit-binary form.

use gridverify::gridopf::{build_problem2, build_problem2_milp, builtin_case_4bus, LoadBox};
use gridverify::verifier::random::{random_instance, random_network, InstanceShape};
use gridverify::verifier::{oracle_exact, verify, Mode, OracleConfig, VerifyConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gridverify::Result<()> {
    let optimize = VerifyConfig { mode: Mode::Optimize, ..VerifyConfig::default() };
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = InstanceShape::sample(&mut rng);
        let p = random_instance(&mut rng, &shape)?;
        let exact = oracle_exact(&p, &OracleConfig::default())?.gamma;
        let v = verify(&p, &optimize)?;
        worst = worst.max((v.upper_bound - exact).abs());
    }
    println!("50 random instances: max |bab - exact| = {worst:.2e}");

    let net = builtin_case_4bus();
    let load_box = "pm25".parse::<LoadBox>()?.to_box(&net)?;
    let nn = random_network(&mut ChaCha8Rng::seed_from_u64(1), 2, &[4], 2);
    for scale in [0.2, 1.0] {
        let enc = oracle_exact(&build_problem2(&nn, &net, &load_box, scale)?, &OracleConfig::default())?.gamma;
        let milp = oracle_exact(&build_problem2_milp(&nn, &net, &load_box, scale)?, &OracleConfig::default())?.gamma;
        println!("flow margin {scale}: encoded {enc:.6}, explicit binaries {milp:.6}");
    }
    Ok(())
}
