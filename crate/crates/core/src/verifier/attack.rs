//! Counterexample search.
//!
//! Candidate inputs come from the box center, random points, sign-gradient
//! descent (when nothing couples inputs and auxiliaries) and the root
//! relaxation's solution. Each candidate's activation pattern is turned into
//! an exact LP whose optimum is a feasible point; neurons sitting on a kink
//! at that optimum are flipped greedily while that keeps improving.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dualopt::{solve_relaxed, NodeDomain};
use crate::error::Result;
use crate::lpcore::{solve_lp, LpStatus};
use crate::relax::{BoxDomain, Splits};

use super::pattern::{binary_assignments, pattern_lp, phases_at, Phases};
use super::{VerificationProblem, Witness};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    pub restarts: usize,
    pub pgd_steps: usize,
    pub seed: u64,
    /// Binary assignments tried, in enumeration order.
    pub max_assignments: usize,
    pub flip_rounds: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            pgd_steps: 40,
            seed: 0,
            max_assignments: 64,
            flip_rounds: 6,
        }
    }
}

/// Best checked witness found, if any. Its value bounds `γ` from above.
pub fn attack(problem: &VerificationProblem, config: &AttackConfig) -> Result<Option<Witness>> {
    let c = &problem.constrained;
    let input = c.ball.bounding_box()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let coupled = c.eq.rows() > 0 || c.ineq.rows() > 0;

    let mut starts: Vec<Vec<f64>> = vec![c.ball.center.clone()];
    for _ in 0..config.restarts {
        starts.push(
            input
                .lower
                .iter()
                .zip(&input.upper)
                .map(|(&l, &u)| if l < u { rng.gen_range(l..=u) } else { l })
                .collect(),
        );
    }
    if !coupled {
        starts = starts
            .into_iter()
            .map(|x| descend(problem, &input, x, config.pgd_steps))
            .collect::<Result<_>>()?;
    }

    let mut best: Option<Witness> = None;
    let mut assignments = binary_assignments(problem);
    assignments.truncate(config.max_assignments.max(1));
    for z_box in &assignments {
        let mut candidates = starts.clone();
        if let Some(domain) = NodeDomain::new(c, Splits::none(&c.nn), z_box.clone()) {
            if z_box.is_finite() {
                let (res, layout) = solve_relaxed(c, &domain)?;
                if res.status == LpStatus::Optimal {
                    candidates.insert(0, layout.x(&res.x, c.nn.input_dim));
                }
            }
        }
        let mut seen: HashSet<Phases> = HashSet::new();
        for x in candidates {
            let phases = phases_at(&c.nn, &x);
            if !seen.insert(phases.clone()) {
                continue;
            }
            if let Some(w) = refine(problem, &input, z_box, phases, config.flip_rounds)? {
                if best.as_ref().is_none_or(|b| w.value < b.value) {
                    best = Some(w);
                }
            }
        }
    }
    Ok(best)
}

/// Sign-gradient descent on `o_yᵀ NN(x)` within the box.
fn descend(problem: &VerificationProblem, input: &BoxDomain, mut x: Vec<f64>, steps: usize) -> Result<Vec<f64>> {
    let c = &problem.constrained;
    let w = c.objective_y.to_vec();
    let value = |x: &[f64]| -> Result<f64> {
        Ok(c.nn.forward(x)?.iter().zip(&w).map(|(a, b)| a * b).sum())
    };
    let mut best = x.clone();
    let mut best_v = value(&x)?;
    for t in 0..steps {
        let g = c.nn.input_gradient(&x, &w)?;
        let frac = 0.5 * (1.0 - t as f64 / steps as f64) + 0.01;
        for i in 0..x.len() {
            let width = input.upper[i] - input.lower[i];
            x[i] -= frac * width * crate::relax::sign(g[i]);
        }
        input.clamp(&mut x);
        let v = value(&x)?;
        if v < best_v {
            best_v = v;
            best = x.clone();
        }
    }
    Ok(best)
}

/// Exact optimum over `phases`' region, then greedy flips of kink neurons.
fn refine(
    problem: &VerificationProblem,
    input: &BoxDomain,
    z_box: &BoxDomain,
    mut phases: Phases,
    rounds: usize,
) -> Result<Option<Witness>> {
    let mut current = match solve_region(problem, input, z_box, &phases)? {
        Some(r) => r,
        None => return Ok(None),
    };
    for _ in 0..rounds {
        let mut improved = false;
        for (k, j) in kinks(problem, &current.pre) {
            let mut trial = phases.clone();
            trial[k][j] = trial[k][j].map(|p| !p);
            if let Some(r) = solve_region(problem, input, z_box, &trial)? {
                if r.witness.value < current.witness.value - 1e-12 {
                    phases = trial;
                    current = r;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }
    let w = current.witness;
    Ok(problem
        .check_witness(&w.x, &w.z)?
        .map(|value| Witness { value, ..w }))
}

struct Region {
    witness: Witness,
    pre: Vec<Vec<f64>>,
}

fn solve_region(
    problem: &VerificationProblem,
    input: &BoxDomain,
    z_box: &BoxDomain,
    phases: &Phases,
) -> Result<Option<Region>> {
    let c = &problem.constrained;
    let (lp, layout) = pattern_lp(c, phases, input, z_box, None);
    let res = solve_lp(&lp)?;
    if res.status != LpStatus::Optimal {
        return Ok(None);
    }
    let x = res.x[layout.x..layout.x + c.nn.input_dim].to_vec();
    let z = res.x[layout.z..layout.z + c.num_z()].to_vec();
    let pre = c
        .nn
        .layers
        .iter()
        .zip(&layout.pre)
        .map(|(l, &p)| res.x[p..p + l.out_dim()].to_vec())
        .collect();
    Ok(Some(Region {
        witness: Witness {
            x,
            z,
            value: res.objective + c.offset,
        },
        pre,
    }))
}

/// Masked neurons whose pre-activation sits on zero.
fn kinks(problem: &VerificationProblem, pre: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let nn = &problem.constrained.nn;
    let mut out = Vec::new();
    for (k, layer) in nn.layers.iter().enumerate() {
        for j in 0..layer.out_dim() {
            if layer.mask[j] && pre[k][j].abs() <= 1e-9 {
                out.push((k, j));
            }
        }
    }
    out
}
