//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Tolerances and time limits are pinned below.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use gridverify::dualopt::{
    ascend, dual_gradient, dual_value, root_lp_value, AscentConfig, ConstrainedProblem, DualState,
};
use gridverify::gridopf::{build_problem2, builtin_case_4bus, check_dispatch, Dataset, LoadBox};
use gridverify::minenc::{append_min_encoding, relu_count, ViolationSpec};
use gridverify::netmodel::DenseNN;
use gridverify::relax::{
    crown_lower_bound, dual_norm_min, interval_propagate, normalize, BoxDomain, NormBall, NormOrder, Splits,
};
use gridverify::trainer::{init_network, loss_and_gradient};
use gridverify::verifier::random::{random_instance, random_network, InstanceShape};
use gridverify::verifier::{
    attack, oracle_exact, unstable_count, verify, AttackConfig, Metric, Mode, OracleConfig, Status,
    VerificationProblem, VerifyConfig,
};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const ENCODING_TOL: f64 = 1e-12;
const ENCODING_LIMIT: Duration = Duration::from_secs(10);
const DUAL_NORM_LIMIT: Duration = Duration::from_secs(1);
const ROUND_TRIP_TOL: f64 = 1e-12;
/// Slack on "bound ≤ sampled/exact minimum"; both sides are computed in floating point.
const SOUNDNESS_TOL: f64 = 1e-9;
const STABLE_EQUALITY_TOL: f64 = 1e-9;
/// Relative slack on weak duality against the simplex optimum.
const WEAK_DUALITY_TOL: f64 = 1e-9;
const ASCENT_GAP_TOL: f64 = 1e-3;
const ASCENT_ITERS: usize = 5000;
const DUAL_LIMIT: Duration = Duration::from_secs(120);
const VERIFY_TOL: f64 = 1e-9;
const OPTIMUM_TOL: f64 = 1e-6;
const VERIFIER_LIMIT: Duration = Duration::from_secs(300);
const PIPELINE_LIMIT: Duration = Duration::from_secs(300);
const GRADIENT_TOL: f64 = 1e-5;
const FD_STEP: f64 = 1e-6;

/// Flow margins for the 4-bus runs; kept clear of the scale where the
/// trained net sits on its limit.
const MARGINS: [f64; 6] = [0.05, 0.1, 0.3, 0.5, 1.0, 1.5];
const SWEEP_FLOWS: [f64; 9] = [0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0];
const SWEEP_GENS: [f64; 7] = [0.01, 0.03, 0.05, 0.1, 0.2, 0.5, 1.0];
const VERIFY_BOX: &str = "abs:0:0.1";

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn instance(seed: u64) -> VerificationProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = InstanceShape::sample(&mut rng);
    random_instance(&mut rng, &shape).expect("generator produces valid instances")
}

fn gamma(p: &VerificationProblem) -> f64 {
    oracle_exact(p, &OracleConfig::default()).expect("oracle runs").gamma
}

fn random_state(p: &ConstrainedProblem, rng: &mut ChaCha8Rng) -> DualState {
    let root = p.root().expect("root domain");
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

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn min_encoding() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for net in 0..50 {
        let layers = rng.gen_range(2..=4);
        let hidden: Vec<usize> = (1..layers).map(|_| rng.gen_range(1..=16)).collect();
        let inputs = rng.gen_range(1..=4);
        let outputs = rng.gen_range(2..=9);
        let nn = random_network(&mut rng, inputs, &hidden, outputs);
        let upper: Vec<f64> = (0..outputs).map(|_| rng.gen_range(-1.0..=2.0)).collect();
        let spec = if net % 2 == 0 {
            let lower = upper.iter().map(|u| u - rng.gen_range(0.0..=3.0)).collect();
            ViolationSpec::two_sided(lower, upper)
        } else {
            ViolationSpec::upper(upper)
        };
        let enc = append_min_encoding(&nn, &spec).map_err(|e| e.to_string())?;
        let added = enc.relu_count() - nn.relu_count();
        ensure(added == spec.num_terms() - 1, || format!("net {net}: {added} ReLUs for {} terms", spec.num_terms()))?;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..inputs).map(|_| rng.gen_range(-2.0..=2.0)).collect();
            let y = nn.forward(&x).unwrap();
            let terms: Vec<f64> = spec
                .upper
                .iter()
                .flat_map(|u| u.iter().zip(&y).map(|(u, v)| u - v))
                .chain(spec.lower.iter().flat_map(|l| l.iter().zip(&y).map(|(l, v)| v - l)))
                .collect();
            let brute = terms.iter().copied().fold(f64::INFINITY, f64::min);
            let got = enc.forward(&x).unwrap()[0];
            worst = worst.max((got - brute).abs());
        }
    }
    ensure(worst <= ENCODING_TOL, || format!("max deviation {worst:e}"))?;
    for k in 1..=8 {
        ensure(relu_count(1 << k) == (1 << k) - 1, || format!("2^{k} terms"))?;
    }
    let t = start.elapsed();
    ensure(t <= ENCODING_LIMIT, || format!("took {t:?}"))?;
    Ok(format!("50 nets x 1000 inputs, max deviation {worst:.1e}, {t:.2?}"))
}

fn dual_norm() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for case in 0..200 {
        let dim = rng.gen_range(1..=12);
        let a: Vec<f64> = (0..dim).map(|_| rng.gen_range(-5.0..=5.0)).collect();
        let eps = rng.gen_range(0.0..=3.0);
        let closed = dual_norm_min(&a, eps, NormOrder::Inf).map_err(|e| e.to_string())?;
        let corners = (0u32..1 << dim)
            .map(|mask| {
                let s: f64 = a.iter().enumerate().map(|(i, v)| if mask >> i & 1 == 1 { *v } else { -v }).sum();
                eps * s
            })
            .fold(f64::INFINITY, f64::min);
        ensure(closed == corners, || format!("case {case}: {closed} vs {corners}"))?;
    }
    let t = start.elapsed();
    ensure(t <= DUAL_NORM_LIMIT, || format!("took {t:?}"))?;
    Ok(format!("200 cases exact, {t:.2?}"))
}

fn round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let dim = rng.gen_range(1..=8);
        let lower: Vec<f64> = (0..dim).map(|_| rng.gen_range(-10.0..=10.0)).collect();
        let upper: Vec<f64> = lower
            .iter()
            .map(|l| if rng.gen_bool(0.15) { *l } else { l + rng.gen_range(0.01..=5.0) })
            .collect();
        let b = BoxDomain::new(lower.clone(), upper.clone()).map_err(|e| e.to_string())?;
        let (ball, map) = normalize(&b).map_err(|e| e.to_string())?;
        let n = ball.dim();
        let lo = map.denormalize(&vec![-1.0; n]);
        let hi = map.denormalize(&vec![1.0; n]);
        for i in 0..dim {
            worst = worst.max(rel_err(lo[i], lower[i])).max(rel_err(hi[i], upper[i]));
        }
        for _ in 0..100 {
            let probe: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let x = map.denormalize(&probe);
            ensure(b.contains(&x, 0.0), || format!("case {case}: {x:?} outside the box"))?;
        }
    }
    ensure(worst <= ROUND_TRIP_TOL, || format!("bound error {worst:e}"))?;
    Ok(format!("100 boxes, max bound error {worst:.1e}, all counterexamples inside"))
}

fn crown_soundness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut stable, mut oracle_checked) = (0, 0);
    for net in 0..100 {
        let inputs = rng.gen_range(1..=3);
        let hidden: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(1..=6)).collect();
        let outputs = rng.gen_range(1..=3);
        let nn = random_network(&mut rng, inputs, &hidden, outputs);
        let lower: Vec<f64> = (0..inputs).map(|_| rng.gen_range(-1.0..=0.5)).collect();
        let upper = lower.iter().map(|l| l + rng.gen_range(0.1..=1.5)).collect();
        let ball = NormBall::from_box(&BoxDomain::new(lower, upper).unwrap()).unwrap();
        let c: Vec<f64> = (0..outputs).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let bounds = interval_propagate(&nn, &ball).map_err(|e| e.to_string())?;
        let bound = crown_lower_bound(&nn, &bounds, &c, &bounds.default_alpha())
            .and_then(|b| b.concretize(&ball))
            .map_err(|e| e.to_string())?;

        let p = VerificationProblem::new(
            ConstrainedProblem::unconstrained(nn.clone(), ball.clone(), c.clone()).unwrap(),
            vec![],
            Metric::NetworkOutput,
        )
        .unwrap();
        let pgd = attack(&p, &AttackConfig { seed: net, ..AttackConfig::default() })
            .map_err(|e| e.to_string())?
            .map_or(f64::INFINITY, |w| w.value);
        let b = ball.bounding_box().unwrap();
        let sampled = (0..1000)
            .map(|_| {
                let x: Vec<f64> = (0..inputs).map(|i| rng.gen_range(b.lower[i]..=b.upper[i])).collect();
                nn.forward(&x).unwrap().iter().zip(&c).map(|(y, c)| y * c).sum::<f64>()
            })
            .fold(pgd, f64::min);
        ensure(bound <= sampled + SOUNDNESS_TOL, || format!("net {net}: {bound} above sampled {sampled}"))?;

        let unstable = bounds.unstable(&nn, &Splits::none(&nn)).len();
        if unstable <= 8 {
            let exact = gamma(&p);
            oracle_checked += 1;
            ensure(bound <= exact + SOUNDNESS_TOL, || format!("net {net}: {bound} above exact {exact}"))?;
            if unstable == 0 {
                stable += 1;
                ensure((bound - exact).abs() <= STABLE_EQUALITY_TOL, || {
                    format!("net {net}: stable but {bound} vs {exact}")
                })?;
            }
        }
    }
    Ok(format!("100 nets, {oracle_checked} against the oracle, {stable} fully stable"))
}

/// Trained 4-bus model and dataset shared by the grid criteria.
struct Pipeline {
    _dir: tempfile::TempDir,
    data: PathBuf,
    model: PathBuf,
    nn: DenseNN,
    elapsed: Duration,
}

fn cli(args: &[&str]) -> std::result::Result<i32, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gridverify"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    out.status.code().ok_or_else(|| "killed by signal".to_string())
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn pipeline() -> std::result::Result<Pipeline, String> {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("data.json");
    let model = dir.path().join("model.json");
    let code = cli(&["gen-data", "--case", "builtin", "--samples", "1000", "--low", "0", "--high", "2", "--out", s(&data)])?;
    ensure(code == 0, || format!("gen-data exited {code}"))?;
    let code = cli(&["train", "--data", s(&data), "--widths", "4", "--out", s(&model)])?;
    ensure(code == 0, || format!("train exited {code}"))?;
    let nn = DenseNN::load(&model).map_err(|e| e.to_string())?;
    Ok(Pipeline { _dir: dir, data, model, nn, elapsed: start.elapsed() })
}

fn constrained_dual(pipe: &Pipeline) -> Check {
    let start = Instant::now();
    let net = builtin_case_4bus();
    let load_box = VERIFY_BOX.parse::<LoadBox>().unwrap().to_box(&net).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let cfg = AscentConfig { iters: ASCENT_ITERS, early_stop: f64::INFINITY, ..AscentConfig::default() };
    let mut rows = Vec::new();
    let mut worst_gap = 0.0f64;
    for scale in MARGINS {
        let p = build_problem2(&pipe.nn, &net, &load_box, scale).map_err(|e| e.to_string())?;
        let c = &p.constrained;
        let lp = root_lp_value(c).map_err(|e| e.to_string())?;
        let slack = WEAK_DUALITY_TOL * (1.0 + lp.abs());
        for k in 0..20 {
            let d = dual_value(c, &random_state(c, &mut rng)).map_err(|e| e.to_string())?;
            ensure(d <= lp + slack, || format!("margin {scale}, state {k}: dual {d} above LP {lp}"))?;
        }
        let root = c.root().map_err(|e| e.to_string())?;
        let out = ascend(c, &DualState::initial(c, &root), &cfg).map_err(|e| e.to_string())?;
        let gap = (lp - out.best).abs() / (1.0 + lp.abs());
        worst_gap = worst_gap.max(gap);
        ensure(gap <= ASCENT_GAP_TOL, || format!("margin {scale}: ascent {} vs LP {lp}", out.best))?;
        let g = gamma(&p);
        let top = out.trace.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ensure(top <= lp + slack && lp <= g + slack, || {
            format!("margin {scale}: ordering broken, dual {top}, LP {lp}, oracle {g}")
        })?;
        rows.push(format!("{scale}: {:.4}/{lp:.4}/{g:.4}", out.best));
    }
    let t = start.elapsed();
    ensure(t <= DUAL_LIMIT, || format!("took {t:?}"))?;
    Ok(format!("dual/LP/oracle {}; max gap {worst_gap:.1e}, {t:.1?}", rows.join(", ")))
}

fn zero_crossing() -> Check {
    let cfg = AscentConfig { iters: 300, early_stop: f64::INFINITY, ..AscentConfig::default() };
    let mut crossed = 0;
    for seed in 0..200u64 {
        let p = instance(6000 + seed);
        let c = &p.constrained;
        let root = c.root().map_err(|e| e.to_string())?;
        let out = ascend(c, &DualState::initial(c, &root), &cfg).map_err(|e| e.to_string())?;
        if out.best >= 0.0 {
            crossed += 1;
            let g = gamma(&p);
            ensure(g >= -VERIFY_TOL, || format!("instance {seed}: bound {} but oracle {g}", out.best))?;
        }
    }
    ensure(crossed > 0, || "no instance crossed zero".into())?;
    Ok(format!("200 instances, {crossed} crossed zero, none falsely"))
}

fn verifier_equivalence() -> Check {
    let start = Instant::now();
    let (mut refuted, mut optima, mut worst) = (0, 0, 0.0f64);
    for seed in 0..100u64 {
        let p = instance(7000 + seed);
        let unstable = unstable_count(&p).map_err(|e| e.to_string())?;
        let bins = p.binary_vars().count();
        ensure(unstable <= 8 && bins <= 6, || format!("instance {seed}: {unstable} unstable, {bins} binaries"))?;
        let g = gamma(&p);
        let v = verify(&p, &VerifyConfig::default()).map_err(|e| e.to_string())?;
        let expected = if g >= -VERIFY_TOL { Status::Verified } else { Status::Refuted };
        ensure(v.status == expected, || format!("instance {seed}: {:?} but oracle {g}", v.status))?;
        if v.status == Status::Refuted {
            refuted += 1;
        }
        let o = verify(&p, &VerifyConfig { mode: Mode::Optimize, ..VerifyConfig::default() }).map_err(|e| e.to_string())?;
        if o.lower_bound == o.upper_bound {
            optima += 1;
            let d = (o.upper_bound - g).abs();
            worst = worst.max(d);
            ensure(d <= OPTIMUM_TOL, || format!("instance {seed}: optimum {} vs oracle {g}", o.upper_bound))?;
        }
    }
    let t = start.elapsed();
    ensure(optima > 0, || "optimize mode never closed".into())?;
    ensure(t <= VERIFIER_LIMIT, || format!("took {t:?}"))?;
    Ok(format!("100 instances ({refuted} refuted), {optima} optima, max |dγ| {worst:.1e}, {t:.1?}"))
}

fn end_to_end(pipe: &Pipeline) -> Check {
    let start = Instant::now();
    let mut verdicts = Vec::new();
    for scale in MARGINS {
        let report = pipe.data.with_file_name(format!("verify-{scale}.json"));
        let scale_arg = scale.to_string();
        let code = cli(&[
            "verify", "--problem", "n1-flows", "--case", "builtin", "--model", s(&pipe.model), "--box", VERIFY_BOX,
            "--scale", &scale_arg, "--workers", "1", "--report", s(&report),
        ])?;
        let text = std::fs::read_to_string(&report).map_err(|e| e.to_string())?;
        let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let status = v["result"]["status"].as_str().unwrap_or("?").to_string();
        ensure(code <= 1, || format!("margin {scale}: exit {code} ({status})"))?;
        ensure(status == if code == 0 { "verified" } else { "refuted" }, || {
            format!("margin {scale}: exit {code} but report says {status}")
        })?;
        verdicts.push(format!("{scale}:{status}"));
    }
    let net = builtin_case_4bus();
    let data = Dataset::load(&pipe.data).map_err(|e| e.to_string())?;
    ensure(data.samples.len() == 1000, || format!("{} samples", data.samples.len()))?;
    for (i, sample) in data.samples.iter().enumerate() {
        ensure(check_dispatch(&net, sample).map_err(|e| e.to_string())?, || format!("sample {i} not N-1 secure"))?;
    }
    let t = pipe.elapsed + start.elapsed();
    ensure(t <= PIPELINE_LIMIT, || format!("took {t:?}"))?;
    Ok(format!("{}; 1000 samples re-checked, {t:.1?}", verdicts.join(" ")))
}

fn sweep(pipe: &Pipeline) -> Check {
    let mut summary = Vec::new();
    for (problem, scales) in [("n1-flows", &SWEEP_FLOWS[..]), ("gen-limits", &SWEEP_GENS[..])] {
        let report = pipe.data.with_file_name(format!("sweep-{problem}.json"));
        let list = scales.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let code = cli(&[
            "sweep", "--problem", problem, "--case", "builtin", "--model", s(&pipe.model), "--box", VERIFY_BOX,
            "--scales", &list, "--oracle", "--report", s(&report),
        ])?;
        ensure(code == 0, || format!("{problem}: sweep exited {code}"))?;
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let rows = v["result"].as_array().ok_or("report has no rows")?;
        let mut seen_verified = None;
        for row in rows {
            let scale = row["scale"].as_f64().unwrap_or(f64::NAN);
            let status = row["verdict"]["status"].as_str().unwrap_or("?");
            let g = row["oracle_gamma"].as_f64().ok_or("missing oracle value")?;
            let agrees = match status {
                "verified" => g >= -VERIFY_TOL,
                "refuted" => g < -VERIFY_TOL,
                _ => false,
            };
            ensure(agrees, || format!("{problem} at {scale}: {status} but oracle {g}"))?;
            if status == "verified" {
                seen_verified.get_or_insert(scale);
            } else if let Some(first) = seen_verified {
                return Err(format!("{problem}: verified at {first} but refuted at {scale}"));
            }
        }
        summary.push(format!("{problem} verified from {}", seen_verified.map_or("never".into(), |v| v.to_string())));
    }
    Ok(summary.join(", "))
}

fn gradients() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let (mut worst_dual, mut worst_train, mut skipped) = (0.0f64, 0.0f64, 0);
    for seed in 0..100u64 {
        let p = instance(10_000 + seed);
        let c = &p.constrained;
        let s = random_state(c, &mut rng);
        let g = dual_gradient(c, &s).map_err(|e| e.to_string())?;
        let fd = |bump: &dyn Fn(&mut DualState, f64)| {
            let (mut up, mut down) = (s.clone(), s.clone());
            bump(&mut up, FD_STEP);
            bump(&mut down, -FD_STEP);
            (dual_value(c, &up).unwrap() - dual_value(c, &down).unwrap()) / (2.0 * FD_STEP)
        };
        for i in 0..s.lambda.len() {
            worst_dual = worst_dual.max(rel_err(g.lambda[i], fd(&|t, h| t.lambda[i] += h)));
        }
        for i in 0..s.mu.len() {
            worst_dual = worst_dual.max(rel_err(g.mu[i], fd(&|t, h| t.mu[i] += h)));
        }
        let root = c.root().map_err(|e| e.to_string())?;
        for (k, j) in root.bounds.unstable(&c.nn, &Splits::none(&c.nn)) {
            worst_dual = worst_dual.max(rel_err(g.alpha[k][j], fd(&|t, h| t.alpha[k][j] += h)));
        }
    }
    for seed in 0..100u64 {
        let widths = vec![rng.gen_range(1..=3), rng.gen_range(1..=5), rng.gen_range(1..=4), rng.gen_range(1..=3)];
        let mut nn = init_network(&widths, seed).map_err(|e| e.to_string())?;
        // zero initial biases put dead units exactly on the kink
        for l in &mut nn.layers {
            l.bias.mapv_inplace(|_| rng.gen_range(-0.5..=0.5));
        }
        let x = Array2::from_shape_fn((8, widths[0]), |_| rng.gen_range(-1.0..=1.0));
        let y = Array2::from_shape_fn((8, widths[3]), |_| rng.gen_range(-1.0..=1.0));
        if near_kink(&nn, &x, 10.0 * FD_STEP) {
            skipped += 1;
            continue;
        }
        let (_, grads) = loss_and_gradient(&nn, &x, &y);
        for (k, (gw, gb)) in grads.iter().enumerate() {
            for (idx, g) in gw.indexed_iter() {
                let (mut up, mut down) = (nn.clone(), nn.clone());
                up.layers[k].weight[idx] += FD_STEP;
                down.layers[k].weight[idx] -= FD_STEP;
                let fd = (loss_and_gradient(&up, &x, &y).0 - loss_and_gradient(&down, &x, &y).0) / (2.0 * FD_STEP);
                worst_train = worst_train.max(rel_err(*g, fd));
            }
            for (j, g) in gb.iter().enumerate() {
                let (mut up, mut down) = (nn.clone(), nn.clone());
                up.layers[k].bias[j] += FD_STEP;
                down.layers[k].bias[j] -= FD_STEP;
                let fd = (loss_and_gradient(&up, &x, &y).0 - loss_and_gradient(&down, &x, &y).0) / (2.0 * FD_STEP);
                worst_train = worst_train.max(rel_err(*g, fd));
            }
        }
    }
    ensure(worst_dual <= GRADIENT_TOL, || format!("dual gradient error {worst_dual:e}"))?;
    ensure(worst_train <= GRADIENT_TOL, || format!("backprop error {worst_train:e}"))?;
    ensure(skipped < 10, || format!("{skipped} training points near a kink"))?;
    Ok(format!("dual {worst_dual:.1e}, backprop {worst_train:.1e} ({skipped} kinked points skipped)"))
}

/// Whether any ReLU pre-activation on the batch lies within `tol` of zero.
fn near_kink(nn: &DenseNN, x: &Array2<f64>, tol: f64) -> bool {
    x.rows().into_iter().any(|row| {
        let mut h = row.to_vec();
        nn.layers.iter().any(|l| {
            let pre: Vec<f64> = (0..l.weight.nrows())
                .map(|i| l.bias[i] + l.weight.row(i).iter().zip(&h).map(|(w, v)| w * v).sum::<f64>())
                .collect();
            let kink = pre.iter().zip(&l.mask).any(|(p, &m)| m && p.abs() < tol);
            h = pre.iter().zip(&l.mask).map(|(p, &m)| if m { p.max(0.0) } else { *p }).collect();
            kink
        })
    })
}

fn main() -> ExitCode {
    let pipe = pipeline();
    let pipe = &pipe;
    let grid = |f: fn(&Pipeline) -> Check| {
        move || match pipe {
            Ok(p) => f(p),
            Err(e) => Err(format!("pipeline failed: {e}")),
        }
    };
    type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("min-encoding exactness", Box::new(min_encoding)),
        ("dual-norm identity", Box::new(dual_norm)),
        ("normalization round trip", Box::new(round_trip)),
        ("CROWN soundness", Box::new(crown_soundness)),
        ("constrained dual validity", Box::new(grid(constrained_dual))),
        ("zero-crossing soundness", Box::new(zero_crossing)),
        ("complete-verifier equivalence", Box::new(verifier_equivalence)),
        ("end-to-end pipeline", Box::new(grid(end_to_end))),
        ("sweep protocol", Box::new(grid(sweep))),
        ("gradient checks", Box::new(gradients)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
