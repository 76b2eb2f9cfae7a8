use gridverify::dualopt::{
    ascend, dual_gradient, dual_value, root_lp_value, AscentConfig, ConstrainedProblem, DualState,
};
use gridverify::relax::{interval_propagate, Splits};
use gridverify::verifier::random::{random_instance, InstanceShape};
use gridverify::verifier::{oracle_exact, OracleConfig};
use ndarray::Array1;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64) -> (gridverify::verifier::VerificationProblem, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = InstanceShape::sample(&mut rng);
    (random_instance(&mut rng, &shape).unwrap(), rng)
}

fn random_state(p: &ConstrainedProblem, rng: &mut ChaCha8Rng) -> DualState {
    let root = p.root().unwrap();
    let mut s = DualState::initial(p, &root);
    for a in s.alpha.iter_mut().flat_map(|a| a.iter_mut()) {
        *a = rng.gen_range(0.0..=1.0);
    }
    for b in s.beta.iter_mut().flat_map(|b| b.iter_mut()) {
        *b = rng.gen_range(0.0..=2.0);
    }
    s.lambda = Array1::from_shape_fn(s.lambda.len(), |_| rng.gen_range(-3.0..=3.0));
    s.mu = Array1::from_shape_fn(s.mu.len(), |_| rng.gen_range(0.0..=3.0));
    s
}

fn is_projected(s: &DualState) -> bool {
    s.alpha.iter().flatten().all(|a| (0.0..=1.0).contains(a))
        && s.beta.iter().flatten().all(|b| *b >= 0.0)
        && s.mu.iter().all(|m| *m >= 0.0)
}

/// Central difference of `dual_value` along one coordinate of the state.
fn fd(p: &ConstrainedProblem, s: &DualState, bump: &dyn Fn(&mut DualState, f64)) -> f64 {
    let h = 1e-6;
    let (mut up, mut down) = (s.clone(), s.clone());
    bump(&mut up, h);
    bump(&mut down, -h);
    (dual_value(p, &up).unwrap() - dual_value(p, &down).unwrap()) / (2.0 * h)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-5 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn every_dual_state_bounds_the_relaxation(seed in any::<u64>()) {
        let (vp, mut rng) = instance(seed);
        let p = &vp.constrained;
        let lp = root_lp_value(p).unwrap();
        for _ in 0..10 {
            let s = random_state(p, &mut rng);
            let d = dual_value(p, &s).unwrap();
            prop_assert!(d <= lp + 1e-7 * (1.0 + lp.abs()), "dual {d} above LP {lp}");
        }
        // and along an ascent run
        let root = p.root().unwrap();
        let cfg = AscentConfig { iters: 200, early_stop: f64::INFINITY, ..AscentConfig::default() };
        let out = ascend(p, &DualState::initial(p, &root), &cfg).unwrap();
        prop_assert!(is_projected(&out.state) && is_projected(&out.best_state));
        let top = out.trace.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(out.best, top);
        prop_assert_eq!(out.trace.crossed_at, out.trace.values.iter().position(|v| *v >= 0.0));
        for v in &out.trace.values {
            prop_assert!(*v <= lp + 1e-7 * (1.0 + lp.abs()), "trace value {v} above LP {lp}");
        }
        // a positive bound is never a false verification
        if out.best >= 0.0 {
            let exact = oracle_exact(&vp, &OracleConfig::default()).unwrap().gamma;
            prop_assert!(exact >= -1e-9, "bound {} but oracle {exact}", out.best);
        }
    }

    #[test]
    fn dual_gradient_matches_finite_differences(seed in any::<u64>()) {
        let (vp, mut rng) = instance(seed);
        let p = &vp.constrained;
        let s = random_state(p, &mut rng);
        let g = dual_gradient(p, &s).unwrap();
        for i in 0..s.lambda.len() {
            let n = fd(p, &s, &|t, h| t.lambda[i] += h);
            prop_assert!(close(g.lambda[i], n), "lambda {i}: {} vs {n}", g.lambda[i]);
        }
        for i in 0..s.mu.len() {
            let n = fd(p, &s, &|t, h| t.mu[i] += h);
            prop_assert!(close(g.mu[i], n), "mu {i}: {} vs {n}", g.mu[i]);
        }
        let root = p.root().unwrap();
        for (k, j) in root.bounds.unstable(&p.nn, &Splits::none(&p.nn)) {
            let n = fd(p, &s, &|t, h| t.alpha[k][j] += h);
            prop_assert!(close(g.alpha[k][j], n), "alpha {k},{j}: {} vs {n}", g.alpha[k][j]);
        }
    }

    #[test]
    fn projection_is_idempotent(seed in any::<u64>()) {
        let (vp, mut rng) = instance(seed);
        let mut s = random_state(&vp.constrained, &mut rng);
        for a in s.alpha.iter_mut().flat_map(|a| a.iter_mut()) {
            *a = rng.gen_range(-1.0..=2.0);
        }
        s.mu.mapv_inplace(|m| m - 1.5);
        let once = s.projected();
        prop_assert!(is_projected(&once));
        prop_assert_eq!(once.projected(), once);
    }
}

#[test]
fn ascent_closes_on_the_lp_when_nothing_is_relaxed() {
    // with every neuron stable the only relaxation left is the dualized
    // constraints, which the LP solves exactly
    let mut checked = 0;
    for seed in 0..200u64 {
        let (vp, _) = instance(seed);
        let p = &vp.constrained;
        if !vp.binaries.is_empty() {
            continue;
        }
        let b = interval_propagate(&p.nn, &p.ball).unwrap();
        if !b.unstable(&p.nn, &Splits::none(&p.nn)).is_empty() || p.eq.rows() + p.ineq.rows() == 0 {
            continue;
        }
        let lp = root_lp_value(p).unwrap();
        let root = p.root().unwrap();
        let cfg = AscentConfig { iters: 5000, early_stop: f64::INFINITY, ..AscentConfig::default() };
        let best = ascend(p, &DualState::initial(p, &root), &cfg).unwrap().best;
        assert!((best - lp).abs() <= 1e-3 * (1.0 + lp.abs()), "seed {seed}: ascent {best} vs LP {lp}");
        checked += 1;
    }
    assert!(checked >= 3, "only {checked} stable constrained instances");
}
