use gridverify::minenc::{append_min_encoding, append_min_encoding_with, relu_count, Pairing, ViolationSpec};
use gridverify::netmodel::{DenseNN, Layer};
use gridverify::verifier::random::random_network;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn net_from_seed(seed: u64) -> (DenseNN, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.gen_range(1..=3);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=16)).collect();
    let inputs = rng.gen_range(1..=4);
    let outputs = rng.gen_range(2..=9);
    (random_network(&mut rng, inputs, &hidden, outputs), rng)
}

/// A net whose hidden layers mix passthrough and ReLU outputs.
fn mixed_net(seed: u64) -> (DenseNN, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = rng.gen_range(1..=4);
    let mut prev = inputs;
    let mut layers = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        let w = rng.gen_range(1..=8);
        let weight = Array2::from_shape_fn((w, prev), |_| rng.gen_range(-1.0..=1.0));
        let bias = Array1::from_shape_fn(w, |_| rng.gen_range(-0.5..=0.5));
        let mask = (0..w).map(|_| rng.gen_bool(0.5)).collect();
        layers.push(Layer::new(weight, bias, mask).unwrap());
        prev = w;
    }
    let out = rng.gen_range(1..=3);
    layers.push(
        Layer::affine(
            Array2::from_shape_fn((out, prev), |_| rng.gen_range(-1.0..=1.0)),
            Array1::from_shape_fn(out, |_| rng.gen_range(-0.5..=0.5)),
        )
        .unwrap(),
    );
    (DenseNN::new(layers).unwrap(), rng)
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-r..=r)).collect()
}

fn spec_for(rng: &mut ChaCha8Rng, dim: usize) -> ViolationSpec {
    let upper: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=2.0)).collect();
    if rng.gen_bool(0.5) {
        let lower = upper.iter().map(|u| u - rng.gen_range(0.0..=3.0)).collect();
        ViolationSpec::two_sided(lower, upper)
    } else {
        ViolationSpec::upper(upper)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_has_no_jumps_beyond_lipschitz_bound(seed in any::<u64>()) {
        let (nn, mut rng) = net_from_seed(seed);
        let a = random_point(&mut rng, nn.input_dim, 2.0);
        let b = random_point(&mut rng, nn.input_dim, 2.0);
        let lip = nn.lipschitz_bound_inf();
        let steps = 200;
        let mut prev = nn.forward(&a).unwrap();
        let mut prev_x = a.clone();
        for s in 1..=steps {
            let t = s as f64 / steps as f64;
            let x: Vec<f64> = a.iter().zip(&b).map(|(p, q)| (1.0 - t) * p + t * q).collect();
            let y = nn.forward(&x).unwrap();
            let dx = x.iter().zip(&prev_x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            let dy = y.iter().zip(&prev).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            prop_assert!(dy <= lip * dx * (1.0 + 1e-9) + 1e-12, "jump {dy} over step {dx}, bound {lip}");
            prev = y;
            prev_x = x;
        }
    }

    #[test]
    fn masked_layers_match_standard_relu_form(seed in any::<u64>()) {
        let (nn, mut rng) = mixed_net(seed);
        let wide = nn.to_standard_relu();
        for l in &wide.layers {
            prop_assert!(l.relu_count() == 0 || l.relu_count() == l.out_dim());
        }
        for _ in 0..1000 {
            let x = random_point(&mut rng, nn.input_dim, 3.0);
            let (p, q) = (nn.forward(&x).unwrap(), wide.forward(&x).unwrap());
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn min_encoding_is_exact_and_pairing_free(seed in any::<u64>()) {
        let (nn, mut rng) = net_from_seed(seed);
        let spec = spec_for(&mut rng, nn.output_dim);
        let halves = append_min_encoding(&nn, &spec).unwrap();
        let adjacent = append_min_encoding_with(&nn, &spec, Pairing::Adjacent).unwrap();
        prop_assert_eq!(halves.relu_count() - nn.relu_count(), relu_count(spec.num_terms()));
        prop_assert_eq!(adjacent.relu_count() - nn.relu_count(), relu_count(spec.num_terms()));
        for _ in 0..1000 {
            let x = random_point(&mut rng, nn.input_dim, 2.0);
            let direct = spec.worst_violation(&nn.forward(&x).unwrap());
            let h = halves.forward(&x).unwrap()[0];
            let a = adjacent.forward(&x).unwrap()[0];
            prop_assert!((h - direct).abs() <= 1e-12 * (1.0 + direct.abs()), "{h} vs {direct}");
            prop_assert!((a - direct).abs() <= 1e-12 * (1.0 + direct.abs()), "{a} vs {direct}");
            // non-negative exactly when every limit holds
            let y = nn.forward(&x).unwrap();
            let holds = spec.upper.as_ref().is_none_or(|u| y.iter().zip(u).all(|(v, u)| v <= u))
                && spec.lower.as_ref().is_none_or(|l| y.iter().zip(l).all(|(v, l)| v >= l));
            prop_assert_eq!(direct >= 0.0, holds);
        }
    }

    #[test]
    fn model_text_round_trips(seed in any::<u64>()) {
        let (nn, _) = mixed_net(seed);
        let back = DenseNN::from_text(&nn.to_text().unwrap()).unwrap();
        prop_assert_eq!(back, nn);
    }
}

#[test]
fn power_of_two_terms_cost_one_less_relu() {
    for k in 1..=6 {
        assert_eq!(relu_count(1 << k), (1 << k) - 1);
    }
    for n in 1..=40 {
        assert_eq!(relu_count(n), n - 1);
    }
}
