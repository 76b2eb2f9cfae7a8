//! Interval, CROWN and optimized-alpha bounds on a random network, next to
//! the exact minimum from pattern enumeration.

use gridverify::dualopt::{ascend, AscentConfig, ConstrainedProblem, DualState};
use gridverify::relax::{crown_lower_bound, interval_propagate, BoxDomain, NormBall, Splits};
use gridverify::verifier::random::random_network;
use gridverify::verifier::{oracle_exact, Metric, OracleConfig, VerificationProblem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gridverify::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let nn = random_network(&mut rng, 2, &[6, 4], 1);
    let ball = NormBall::from_box(&BoxDomain::new(vec![-1.0, -0.5], vec![0.5, 1.0])?)?;
    let c = vec![1.0];

    let bounds = interval_propagate(&nn, &ball)?;
    let unstable = bounds.unstable(&nn, &Splits::none(&nn)).len();
    let (lo, _) = bounds.output_interval(&nn);
    let crown = crown_lower_bound(&nn, &bounds, &c, &bounds.default_alpha())?.concretize(&ball)?;

    let p = ConstrainedProblem::unconstrained(nn, ball, c)?;
    let root = p.root()?;
    let tuned = ascend(&p, &DualState::initial(&p, &root), &AscentConfig::default())?.best;
    let exact = oracle_exact(&VerificationProblem::new(p, vec![], Metric::NetworkOutput)?, &OracleConfig::default())?;

    println!("{unstable} unstable neurons");
    println!("interval     {:.6}", lo[0]);
    println!("CROWN        {crown:.6}");
    println!("alpha-tuned  {tuned:.6}");
    println!("exact        {:.6} ({} patterns)", exact.gamma, exact.patterns);
    Ok(())
}
