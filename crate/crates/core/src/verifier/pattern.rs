//! Linear programs over a fixed activation pattern.
//!
//! Inside one pattern every masked neuron is either `h = v, v ≥ 0` or
//! `h = 0, v ≤ 0`, so the network is affine and the whole problem is an LP.
//! These programs are built without any relaxation and serve the exact
//! oracle and the counterexample search.

use crate::dualopt::ConstrainedProblem;
use crate::lpcore::LpProblem;
use crate::netmodel::DenseNN;
use crate::relax::{BoxDomain, NeuronBounds, Phase, Splits};

use super::VerificationProblem;

/// Phase of every neuron; `None` for undecided masked neurons. Unmasked
/// neurons are always `Some(true)`.
pub type Phases = Vec<Vec<Option<bool>>>;

/// Phases of `nn` at input `x` (`v ≥ 0` counts as active).
pub fn phases_at(nn: &DenseNN, x: &[f64]) -> Phases {
    let pre = nn.pre_activations(x).expect("input length checked by caller");
    nn.layers
        .iter()
        .zip(&pre)
        .map(|(l, v)| {
            (0..l.out_dim())
                .map(|j| Some(!l.mask[j] || v[j] >= 0.0))
                .collect()
        })
        .collect()
}

/// Phases decided by splits or by sign-stable intervals.
pub fn phases_from_bounds(nn: &DenseNN, bounds: &NeuronBounds, splits: &Splits) -> Phases {
    nn.layers
        .iter()
        .enumerate()
        .map(|(k, l)| {
            (0..l.out_dim())
                .map(|j| {
                    if !l.mask[j] {
                        return Some(true);
                    }
                    match splits.get(k, j) {
                        Phase::Active => Some(true),
                        Phase::Inactive => Some(false),
                        Phase::Free if bounds.lower[k][j] >= 0.0 => Some(true),
                        Phase::Free if bounds.upper[k][j] <= 0.0 => Some(false),
                        Phase::Free => None,
                    }
                })
                .collect()
        })
        .collect()
}

/// Variable offsets of a pattern LP.
#[derive(Debug, Clone)]
pub struct PatternLayout {
    pub x: usize,
    pub z: usize,
    pub pre: Vec<usize>,
    pub output: Option<usize>,
}

/// LP over the given phases.
///
/// With `prefix = None` the whole network, the objective and all rows are
/// included and every neuron must be decided. With `Some(depth)` only the
/// first `depth` layers are present and the program just checks that the
/// region is non-empty; undecided neurons are allowed in its last layer.
pub fn pattern_lp(
    problem: &ConstrainedProblem,
    phases: &Phases,
    input: &BoxDomain,
    z_box: &BoxDomain,
    prefix: Option<usize>,
) -> (LpProblem, PatternLayout) {
    let nn = &problem.nn;
    let full = prefix.is_none();
    let depth = prefix.unwrap_or(nn.layers.len());
    let mut lp = LpProblem::new(0);
    let x0 = lp.num_vars();
    for i in 0..nn.input_dim {
        lp.add_var(input.lower[i], input.upper[i], 0.0);
    }
    let z0 = lp.num_vars();
    if full {
        for i in 0..problem.num_z() {
            lp.add_var(z_box.lower[i], z_box.upper[i], problem.objective_z[i]);
        }
    }
    let mut pre = Vec::with_capacity(depth);
    let mut prev = x0;
    for (k, layer) in nn.layers.iter().enumerate().take(depth) {
        let v0 = lp.num_vars();
        for _ in 0..layer.out_dim() {
            lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
        }
        let h0 = lp.num_vars();
        for _ in 0..layer.out_dim() {
            lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
        }
        for j in 0..layer.out_dim() {
            let mut row: Vec<(usize, f64)> = layer
                .weight
                .row(j)
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, &w)| (prev + i, w))
                .collect();
            row.push((v0 + j, -1.0));
            lp.add_eq(row, -layer.bias[j]);
            let (v, h) = (v0 + j, h0 + j);
            match phases[k][j] {
                _ if !layer.mask[j] => lp.add_eq([(h, 1.0), (v, -1.0)], 0.0),
                Some(true) => {
                    lp.add_eq([(h, 1.0), (v, -1.0)], 0.0);
                    lp.add_ge([(v, 1.0)], 0.0);
                }
                Some(false) => {
                    lp.set_bounds(h, 0.0, 0.0);
                    lp.add_le([(v, 1.0)], 0.0);
                }
                None => assert!(
                    k + 1 == depth && !full,
                    "undecided neuron ({k}, {j}) inside a pattern program"
                ),
            }
        }
        pre.push(v0);
        prev = h0;
    }
    if !full {
        return (
            lp,
            PatternLayout {
                x: x0,
                z: z0,
                pre,
                output: None,
            },
        );
    }
    let y0 = prev;
    for (j, &c) in problem.objective_y.iter().enumerate() {
        lp.objective[y0 + j] += c;
    }
    for (sys, eq) in [(&problem.eq, true), (&problem.ineq, false)] {
        for i in 0..sys.rows() {
            let mut row = Vec::new();
            for (blk, base) in [(&sys.y, y0), (&sys.x, x0), (&sys.z, z0)] {
                for (j, &c) in blk.row(i).iter().enumerate() {
                    if c != 0.0 {
                        row.push((base + j, c));
                    }
                }
            }
            if eq {
                lp.add_eq(row, sys.rhs[i]);
            } else {
                lp.add_le(row, sys.rhs[i]);
            }
        }
    }
    (
        lp,
        PatternLayout {
            x: x0,
            z: z0,
            pre,
            output: Some(y0),
        },
    )
}

/// Every `z_box` with binaries fixed to an assignment meeting all
/// cardinality ranges.
pub(super) fn binary_assignments(problem: &VerificationProblem) -> Vec<BoxDomain> {
    let base = problem.constrained.z_box.clone();
    let mut out = vec![base];
    for g in &problem.binaries {
        let mut next = Vec::new();
        for z_box in &out {
            let n = g.vars.len();
            for mask in 0u64..(1u64 << n) {
                let on = mask.count_ones() as usize;
                if on < g.min_on || on > g.max_on {
                    continue;
                }
                let mut zb = z_box.clone();
                let ok = g.vars.iter().enumerate().all(|(i, &v)| {
                    let val = if mask >> i & 1 == 1 { 1.0 } else { 0.0 };
                    let fits = zb.lower[v] <= val && val <= zb.upper[v];
                    zb.lower[v] = val;
                    zb.upper[v] = val;
                    fits
                });
                if ok {
                    next.push(zb);
                }
            }
        }
        out = next;
    }
    out
}
