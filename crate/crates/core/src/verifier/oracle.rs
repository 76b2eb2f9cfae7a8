//! Exhaustive ground truth for small instances.
//!
//! Activation patterns are enumerated depth-first in layer order; a branch
//! is dropped as soon as the region it describes is empty. Every surviving
//! full pattern is solved as an exact LP for every admissible binary
//! assignment. No relaxation is involved anywhere.

use crate::error::{Error, Result};
use crate::lpcore::{solve_lp, LpStatus};
use crate::relax::{interval_propagate_box, BoxDomain, Phase, Splits};

use super::pattern::{binary_assignments, pattern_lp, phases_from_bounds, Phases};
use super::{VerificationProblem, Witness};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    /// Refuse instances with more than `2^cap` candidate leaves.
    pub cap: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { cap: 24 }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// `+∞` when no feasible point exists.
    pub gamma: f64,
    pub witness: Option<Witness>,
    pub patterns: usize,
    pub lps: usize,
}

/// Global minimum of `problem` by enumeration.
pub fn oracle_exact(problem: &VerificationProblem, config: &OracleConfig) -> Result<OracleResult> {
    problem.validate()?;
    let c = &problem.constrained;
    let input = c.ball.bounding_box()?;
    let Some(root) = interval_propagate_box(&c.nn, &input, &Splits::none(&c.nn)) else {
        return Ok(OracleResult {
            gamma: f64::INFINITY,
            witness: None,
            patterns: 0,
            lps: 0,
        });
    };
    let unstable = root.unstable(&c.nn, &Splits::none(&c.nn)).len();
    let nb = problem.binary_vars().count();
    if unstable + nb > config.cap {
        return Err(Error::EnumerationCap {
            needed: unstable + nb,
            cap: config.cap,
        });
    }
    if let Some(i) = (0..c.num_z()).find(|&i| !(c.z_box.lower[i].is_finite() && c.z_box.upper[i].is_finite())) {
        return Err(Error::UnboundedAuxiliary { index: i });
    }

    let mut lps = 0usize;
    let mut patterns = Vec::new();
    enumerate_patterns(problem, &input, Splits::none(&c.nn), &mut patterns, &mut lps)?;

    let assignments = binary_assignments(problem);
    let mut best: Option<Witness> = None;
    for phases in &patterns {
        for z_box in &assignments {
            let (lp, layout) = pattern_lp(c, phases, &input, z_box, None);
            let res = solve_lp(&lp)?;
            lps += 1;
            match res.status {
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => return Err(Error::Infeasible("pattern program is unbounded".into())),
                LpStatus::Optimal => {}
            }
            let value = res.objective + c.offset;
            if best.as_ref().is_none_or(|b| value < b.value) {
                let x = res.x[layout.x..layout.x + c.nn.input_dim].to_vec();
                let z = res.x[layout.z..layout.z + c.num_z()].to_vec();
                best = Some(Witness { x, z, value });
            }
        }
    }
    Ok(OracleResult {
        gamma: best.as_ref().map_or(f64::INFINITY, |w| w.value),
        witness: best,
        patterns: patterns.len(),
        lps,
    })
}

/// Collects every full activation pattern whose region is non-empty.
fn enumerate_patterns(
    problem: &VerificationProblem,
    input: &BoxDomain,
    splits: Splits,
    out: &mut Vec<Phases>,
    lps: &mut usize,
) -> Result<()> {
    let c = &problem.constrained;
    let Some(bounds) = interval_propagate_box(&c.nn, input, &splits) else {
        return Ok(());
    };
    let phases = phases_from_bounds(&c.nn, &bounds, &splits);
    let next = phases
        .iter()
        .enumerate()
        .find_map(|(k, layer)| layer.iter().position(Option::is_none).map(|j| (k, j)));
    let Some((k, j)) = next else {
        out.push(phases);
        return Ok(());
    };
    for phase in [Phase::Active, Phase::Inactive] {
        let child = splits.with(k, j, phase);
        let mut p = phases.clone();
        p[k][j] = Some(phase == Phase::Active);
        // earlier layers are fully decided, so this checks the exact region
        let (lp, _) = pattern_lp(c, &p, input, &c.z_box, Some(k + 1));
        *lps += 1;
        if solve_lp(&lp)?.status == LpStatus::Infeasible {
            continue;
        }
        enumerate_patterns(problem, input, child, out, lps)?;
    }
    Ok(())
}
