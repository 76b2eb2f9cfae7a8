//! Appends the worst-violation encoding to a random network and checks it
//! against the direct minimum over the limit slacks.

use gridverify::minenc::{append_min_encoding, relu_count, ViolationSpec};
use gridverify::verifier::random::random_network;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> gridverify::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let nn = random_network(&mut rng, 3, &[8, 8], 5);
    let spec = ViolationSpec::two_sided(vec![-1.0; 5], vec![1.0; 5]);
    let enc = append_min_encoding(&nn, &spec)?;
    println!(
        "{} terms: {} ReLUs added (expected {})",
        spec.num_terms(),
        enc.relu_count() - nn.relu_count(),
        relu_count(spec.num_terms())
    );

    let mut worst = 0.0f64;
    let mut violated = 0;
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..=2.0)).collect();
        let direct = spec.worst_violation(&nn.forward(&x)?);
        let encoded = enc.forward(&x)?[0];
        worst = worst.max((direct - encoded).abs());
        violated += usize::from(encoded < 0.0);
    }
    println!("10000 inputs, max |encoded - direct| = {worst:.2e}, {violated} violate a limit");
    Ok(())
}
