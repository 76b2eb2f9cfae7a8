//! Complete verification by branch and bound.
//!
//! A property holds when the optimum `γ` of a [`VerificationProblem`] is
//! non-negative. Nodes are bounded by dual ascent, split on ReLU phases or
//! binary values, and solved exactly by LP once nothing is left to split.
//! Refutations always carry a witness that has been re-evaluated with a
//! forward pass and checked against every constraint.

mod attack;
mod oracle;
mod pattern;
pub mod random;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use ndarray::Array1;
use serde::Serialize;
use tracing::{debug, info};

use crate::dualopt::{ascend_at, solve_relaxed, AscentConfig, ConstrainedProblem, DualState, NodeDomain};
use crate::error::{Error, Result};
use crate::lpcore::LpStatus;
use crate::relax::{BoxDomain, NeuronState, Phase};

pub use attack::{attack, AttackConfig};
pub use oracle::{oracle_exact, OracleConfig, OracleResult};
pub use pattern::{pattern_lp, phases_at, Phases};

/// `γ ≥ −VERIFY_TOL` counts as verified.
pub const VERIFY_TOL: f64 = 1e-9;
/// Largest constraint violation accepted in a witness.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Largest distance of a binary value from {0, 1} in a witness.
pub const INTEGRALITY_TOL: f64 = 1e-9;

/// A set of `{0,1}` auxiliary variables with a cardinality range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryGroup {
    pub name: String,
    /// Indices into `z`.
    pub vars: Vec<usize>,
    pub min_on: usize,
    pub max_on: usize,
    /// Branch on this group before any neuron.
    pub branch_first: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// The network's scalar output (after any appended encoding).
    NetworkOutput,
    /// A linear function of auxiliary variables.
    Auxiliary,
}

#[derive(Debug, Clone)]
pub struct VerificationProblem {
    pub constrained: ConstrainedProblem,
    pub binaries: Vec<BinaryGroup>,
    pub metric: Metric,
}

impl VerificationProblem {
    pub fn new(constrained: ConstrainedProblem, binaries: Vec<BinaryGroup>, metric: Metric) -> Result<Self> {
        let p = Self {
            constrained,
            binaries,
            metric,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.constrained.validate()?;
        let nz = self.constrained.num_z();
        let mut seen = vec![false; nz];
        for g in &self.binaries {
            if g.min_on > g.max_on || g.max_on > g.vars.len() {
                return Err(Error::InvalidArgument(format!(
                    "group {} has cardinality range [{}, {}] over {} variables",
                    g.name,
                    g.min_on,
                    g.max_on,
                    g.vars.len()
                )));
            }
            for &v in &g.vars {
                if v >= nz {
                    return Err(Error::Shape(format!("binary index {v} out of range")));
                }
                if std::mem::replace(&mut seen[v], true) {
                    return Err(Error::InvalidArgument(format!("variable {v} is in two binary groups")));
                }
                let (l, u) = (self.constrained.z_box.lower[v], self.constrained.z_box.upper[v]);
                if l < 0.0 || u > 1.0 {
                    return Err(Error::InvalidArgument(format!(
                        "binary {v} has box [{l}, {u}] outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn binary_vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.binaries.iter().flat_map(|g| g.vars.iter().copied())
    }

    /// Copy with binary `var` fixed to `value`.
    pub fn with_fixed(&self, var: usize, value: bool) -> Self {
        let mut p = self.clone();
        let v = if value { 1.0 } else { 0.0 };
        p.constrained.z_box.lower[var] = v;
        p.constrained.z_box.upper[var] = v;
        p
    }

    /// Objective at `(x, z)` recomputed from a forward pass, if every
    /// constraint and integrality condition holds.
    pub fn check_witness(&self, x: &[f64], z: &[f64]) -> Result<Option<f64>> {
        let c = &self.constrained;
        let input = c.ball.bounding_box()?;
        if !input.contains(x, FEASIBILITY_TOL) || z.len() != c.num_z() {
            return Ok(None);
        }
        if c.max_violation(x, z)? > FEASIBILITY_TOL {
            return Ok(None);
        }
        if self
            .binary_vars()
            .any(|v| (z[v] - z[v].round()).abs() > INTEGRALITY_TOL)
        {
            return Ok(None);
        }
        for g in &self.binaries {
            let on = g.vars.iter().filter(|&&v| z[v].round() == 1.0).count();
            if on < g.min_on || on > g.max_on {
                return Ok(None);
            }
        }
        let y = Array1::from(c.nn.forward(x)?);
        Ok(Some(c.objective(&y, &Array1::from(z.to_vec()))))
    }
}

/// A feasible point and its objective value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Verified,
    Refuted,
    Unknown,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub status: Status,
    /// Proven lower bound on `γ`.
    pub lower_bound: f64,
    /// Best objective value among checked witnesses.
    pub upper_bound: f64,
    pub witness: Option<Witness>,
    pub nodes: usize,
    pub ascent_iterations: usize,
    pub leaf_lps: usize,
    #[serde(serialize_with = "as_secs")]
    pub wall_time: Duration,
}

fn as_secs<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Stop as soon as the sign of `γ` is settled.
    Decide,
    /// Close the gap to `γ` itself.
    Optimize,
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub mode: Mode,
    pub timeout: Duration,
    pub node_budget: usize,
    pub root_ascent: AscentConfig,
    pub node_ascent: AscentConfig,
    pub workers: usize,
    pub attack: AttackConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Decide,
            timeout: Duration::from_secs(300),
            node_budget: 200_000,
            root_ascent: AscentConfig {
                iters: 1000,
                ..AscentConfig::default()
            },
            node_ascent: AscentConfig {
                iters: 150,
                ..AscentConfig::default()
            },
            workers: 1,
            attack: AttackConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    domain: NodeDomain,
    state: DualState,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap pops the maximum: lowest bound first, then deepest, then
    // oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

enum Outcome {
    /// Bound settled for this subtree.
    Closed { bound: f64, witness: Option<Witness>, leaf: bool },
    Branched { bound: f64, children: Vec<Node>, witness: Option<Witness> },
}

struct Search<'a> {
    problem: &'a VerificationProblem,
    config: &'a VerifyConfig,
}

impl Search<'_> {
    fn threshold(&self, incumbent: f64) -> f64 {
        match self.config.mode {
            Mode::Decide => -VERIFY_TOL,
            Mode::Optimize => incumbent - VERIFY_TOL,
        }
    }

    fn is_leaf(&self, domain: &NodeDomain) -> bool {
        let nn = &self.problem.constrained.nn;
        domain.bounds.unstable(nn, &domain.splits).is_empty()
            && self
                .problem
                .binary_vars()
                .all(|v| domain.z_box.lower[v] == domain.z_box.upper[v])
    }

    fn process(&self, node: Node, incumbent: f64) -> Result<(Outcome, usize)> {
        let c = &self.problem.constrained;
        if self.is_leaf(&node.domain) {
            let (res, layout) = solve_relaxed(c, &node.domain)?;
            return Ok(match res.status {
                LpStatus::Infeasible => (
                    Outcome::Closed {
                        bound: f64::INFINITY,
                        witness: None,
                        leaf: true,
                    },
                    0,
                ),
                LpStatus::Unbounded => return Err(Error::Infeasible("leaf program is unbounded".into())),
                LpStatus::Optimal => {
                    let x = layout.x(&res.x, c.nn.input_dim);
                    let z = layout.z(&res.x, c.num_z());
                    let witness = self
                        .problem
                        .check_witness(&x, &z)?
                        .map(|value| Witness { x, z, value });
                    (
                        Outcome::Closed {
                            bound: res.objective.max(node.bound),
                            witness,
                            leaf: true,
                        },
                        0,
                    )
                }
            });
        }
        let threshold = self.threshold(incumbent);
        let cfg = AscentConfig {
            early_stop: threshold,
            ..self.config.node_ascent
        };
        let cfg = if node.depth == 0 {
            AscentConfig {
                early_stop: threshold,
                ..self.config.root_ascent
            }
        } else {
            cfg
        };
        let out = ascend_at(c, &node.domain, &node.state, &cfg)?;
        let iters = out.trace.values.len();
        let bound = out.best.max(node.bound);
        let witness = self.inner_witness(&out.x, &out.z)?;
        if bound >= threshold {
            return Ok((
                Outcome::Closed {
                    bound,
                    witness,
                    leaf: false,
                },
                iters,
            ));
        }
        let children = self.branch(&node, bound, &out.best_state);
        Ok((
            Outcome::Branched {
                bound,
                children,
                witness,
            },
            iters,
        ))
    }

    /// The dual's inner minimizer is itself feasible when nothing couples
    /// `x` and `z`.
    fn inner_witness(&self, x: &[f64], z: &[f64]) -> Result<Option<Witness>> {
        let c = &self.problem.constrained;
        if c.eq.rows() > 0 || c.ineq.rows() > 0 || self.problem.binary_vars().next().is_some() || x.is_empty() {
            return Ok(None);
        }
        Ok(self.problem.check_witness(x, z)?.map(|value| Witness {
            x: x.to_vec(),
            z: z.to_vec(),
            value,
        }))
    }

    fn branch(&self, node: &Node, bound: f64, state: &DualState) -> Vec<Node> {
        let c = &self.problem.constrained;
        let first = self
            .problem
            .binaries
            .iter()
            .filter(|g| g.branch_first)
            .flat_map(|g| g.vars.iter().copied())
            .find(|&v| node.domain.z_box.lower[v] != node.domain.z_box.upper[v]);
        if let Some(v) = first {
            return self.branch_binary(node, bound, state, v);
        }
        if let Some((k, j)) = self.pick_neuron(node, state) {
            let mut children = Vec::with_capacity(2);
            for phase in [Phase::Active, Phase::Inactive] {
                let splits = node.domain.splits.with(k, j, phase);
                if let Some(domain) = NodeDomain::new(c, splits, node.domain.z_box.clone()) {
                    let mut st = state.clone();
                    st.beta[k][j] = 0.0;
                    children.push(self.child(node, bound, domain, st));
                }
            }
            return children;
        }
        let v = self
            .problem
            .binary_vars()
            .find(|&v| node.domain.z_box.lower[v] != node.domain.z_box.upper[v])
            .expect("non-leaf node has something to branch on");
        self.branch_binary(node, bound, state, v)
    }

    fn child(&self, parent: &Node, bound: f64, domain: NodeDomain, mut state: DualState) -> Node {
        // slopes of neurons that became stable are irrelevant; keep the rest
        for (a, d) in state.alpha.iter_mut().zip(domain.bounds.default_alpha()) {
            if a.len() != d.len() {
                *a = d;
            }
        }
        Node {
            bound,
            depth: parent.depth + 1,
            seq: 0,
            domain,
            state,
        }
    }

    fn branch_binary(&self, node: &Node, bound: f64, state: &DualState, var: usize) -> Vec<Node> {
        let mut children = Vec::with_capacity(2);
        for value in [1.0, 0.0] {
            let mut z_box = node.domain.z_box.clone();
            z_box.lower[var] = value;
            z_box.upper[var] = value;
            if !self.propagate_cardinality(&mut z_box) {
                continue;
            }
            let domain = NodeDomain {
                splits: node.domain.splits.clone(),
                bounds: node.domain.bounds.clone(),
                z_box,
            };
            children.push(self.child(node, bound, domain, state.clone()));
        }
        children
    }

    /// Fixes binaries forced by group cardinalities; `false` when a group
    /// can no longer be satisfied.
    fn propagate_cardinality(&self, z_box: &mut BoxDomain) -> bool {
        for g in &self.problem.binaries {
            let on = g.vars.iter().filter(|&&v| z_box.lower[v] == 1.0).count();
            let free: Vec<usize> = g
                .vars
                .iter()
                .copied()
                .filter(|&v| z_box.lower[v] != z_box.upper[v])
                .collect();
            if on > g.max_on || on + free.len() < g.min_on {
                return false;
            }
            if on == g.max_on {
                for &v in &free {
                    z_box.upper[v] = 0.0;
                }
            } else if on + free.len() == g.min_on {
                for &v in &free {
                    z_box.lower[v] = 1.0;
                }
            }
        }
        true
    }

    /// Unstable neuron with the largest `|Λ|·u·(−l)/(u−l)`.
    fn pick_neuron(&self, node: &Node, state: &DualState) -> Option<(usize, usize)> {
        let c = &self.problem.constrained;
        let unstable = node.domain.bounds.unstable(&c.nn, &node.domain.splits);
        if unstable.is_empty() {
            return None;
        }
        let w = &c.objective_y + &c.eq.y.t().dot(&state.lambda) + c.ineq.y.t().dot(&state.mu);
        let pass = node.domain.relaxation(&c.nn).backward(&w, &state.alpha, &state.beta);
        let b = &node.domain.bounds;
        unstable
            .into_iter()
            .map(|(k, j)| {
                let (l, u) = (b.lower[k][j], b.upper[k][j]);
                let score = pass.lambda[k][j].abs() * u * (-l) / (u - l);
                (score, u - l, k, j)
            })
            .max_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(b.2.cmp(&a.2)).then(b.3.cmp(&a.3)))
            .map(|(_, _, k, j)| (k, j))
    }
}

/// Branch-and-bound verification of `γ ≥ 0`.
pub fn verify(problem: &VerificationProblem, config: &VerifyConfig) -> Result<Verdict> {
    let start = Instant::now();
    problem.validate()?;
    let c = &problem.constrained;
    let search = Search { problem, config };
    let mut verdict = Verdict {
        status: Status::Unknown,
        lower_bound: f64::NEG_INFINITY,
        upper_bound: f64::INFINITY,
        witness: None,
        nodes: 0,
        ascent_iterations: 0,
        leaf_lps: 0,
        wall_time: Duration::ZERO,
    };
    let mut z_box = c.z_box.clone();
    let root = if search.propagate_cardinality(&mut z_box) {
        NodeDomain::new(c, crate::relax::Splits::none(&c.nn), z_box)
    } else {
        None
    };
    let Some(root) = root else {
        verdict.status = Status::Verified;
        verdict.lower_bound = f64::INFINITY;
        verdict.wall_time = start.elapsed();
        return Ok(verdict);
    };
    c.root()?;

    let mut incumbent: Option<Witness> = attack(problem, &config.attack)?;
    if let Some(w) = &incumbent {
        verdict.upper_bound = w.value;
        if config.mode == Mode::Decide && w.value < -VERIFY_TOL {
            info!(value = w.value, "refuted by counterexample search");
            verdict.status = Status::Refuted;
            verdict.witness = incumbent;
            verdict.wall_time = start.elapsed();
            return Ok(verdict);
        }
    }

    let state = DualState::initial(c, &root);
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        depth: 0,
        seq,
        domain: root,
        state,
    });
    // smallest bound among closed subtrees
    let mut closed_min = f64::INFINITY;
    let workers = config.workers.max(1);
    let mut budget_hit = false;

    while !heap.is_empty() {
        if start.elapsed() >= config.timeout || verdict.nodes >= config.node_budget {
            budget_hit = true;
            break;
        }
        let inc_value = incumbent.as_ref().map_or(f64::INFINITY, |w| w.value);
        let threshold = search.threshold(inc_value);
        let mut batch = Vec::with_capacity(workers);
        while batch.len() < workers {
            match heap.pop() {
                Some(n) if n.bound >= threshold => closed_min = closed_min.min(n.bound),
                Some(n) => batch.push(n),
                None => break,
            }
        }
        if batch.is_empty() {
            continue;
        }
        verdict.nodes += batch.len();
        let results: Vec<Result<(Outcome, usize)>> = if batch.len() == 1 {
            batch.into_iter().map(|n| search.process(n, inc_value)).collect()
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = batch
                    .into_iter()
                    .map(|n| {
                        let search = &search;
                        s.spawn(move || search.process(n, inc_value))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            })
        };
        for r in results {
            let (outcome, iters) = r?;
            verdict.ascent_iterations += iters;
            let (witness, children, bound) = match outcome {
                Outcome::Closed { bound, witness, leaf } => {
                    if leaf {
                        verdict.leaf_lps += 1;
                    }
                    closed_min = closed_min.min(bound);
                    (witness, Vec::new(), bound)
                }
                Outcome::Branched {
                    bound,
                    children,
                    witness,
                } => (witness, children, bound),
            };
            if let Some(w) = witness {
                if w.value < incumbent.as_ref().map_or(f64::INFINITY, |i| i.value) {
                    verdict.upper_bound = w.value;
                    incumbent = Some(w);
                }
            }
            debug!(bound, children = children.len(), "node processed");
            for mut ch in children {
                seq += 1;
                ch.seq = seq;
                heap.push(ch);
            }
        }
        if config.mode == Mode::Decide {
            if let Some(w) = &incumbent {
                if w.value < -VERIFY_TOL {
                    break;
                }
            }
        }
    }

    let open_min = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let inc_value = incumbent.as_ref().map_or(f64::INFINITY, |w| w.value);
    verdict.lower_bound = match config.mode {
        Mode::Decide => closed_min.min(open_min),
        // closed subtrees pruned against the incumbent cannot beat it
        Mode::Optimize => closed_min.min(open_min).min(inc_value),
    };
    verdict.status = if inc_value < -VERIFY_TOL {
        Status::Refuted
    } else if verdict.lower_bound >= -VERIFY_TOL {
        Status::Verified
    } else {
        Status::Unknown
    };
    if budget_hit {
        debug!(open = heap.len(), "search budget exhausted");
    }
    if config.mode == Mode::Optimize && !budget_hit && heap.is_empty() {
        verdict.lower_bound = inc_value;
    }
    verdict.witness = incumbent;
    verdict.wall_time = start.elapsed();
    info!(
        status = ?verdict.status,
        lower = verdict.lower_bound,
        upper = verdict.upper_bound,
        nodes = verdict.nodes,
        "verification finished"
    );
    Ok(verdict)
}

/// Number of unstable neurons at the root.
pub fn unstable_count(problem: &VerificationProblem) -> Result<usize> {
    let c = &problem.constrained;
    let root = c.root()?;
    Ok((0..c.nn.layers.len())
        .flat_map(|k| (0..c.nn.layers[k].out_dim()).map(move |j| (k, j)))
        .filter(|&(k, j)| root.bounds.state(&c.nn, &root.splits, k, j) == NeuronState::Unstable)
        .count())
}

#[cfg(test)]
mod tests {
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::minenc::{append_min_encoding, ViolationSpec};
    use crate::netmodel::{DenseNN, Layer};
    use crate::relax::NormBall;

    fn problem(nn: DenseNN, lower: Vec<f64>, upper: Vec<f64>) -> VerificationProblem {
        let ball = NormBall::from_box(&BoxDomain::new(lower, upper).unwrap()).unwrap();
        let c = ConstrainedProblem::unconstrained(nn, ball, vec![1.0]).unwrap();
        VerificationProblem::new(c, vec![], Metric::NetworkOutput).unwrap()
    }

    /// relu(x) - relu(-x) - x, identically zero.
    fn zero_gadget() -> DenseNN {
        DenseNN::new(vec![
            Layer::new(array![[1.0], [-1.0], [1.0]], array![0.0, 0.0, 0.0], vec![true, true, false]).unwrap(),
            Layer::affine(array![[1.0, -1.0, -1.0]], array![0.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn zero_gadget_is_verified_exactly() {
        let p = problem(zero_gadget(), vec![-1.0], vec![1.0]);
        let v = verify(&p, &VerifyConfig::default()).unwrap();
        assert_eq!(v.status, Status::Verified);
        assert!(v.lower_bound >= -VERIFY_TOL);
        let o = oracle_exact(&p, &OracleConfig::default()).unwrap();
        assert!(o.gamma.abs() < 1e-9, "{}", o.gamma);
    }

    #[test]
    fn min_encoded_identity_is_refuted() {
        let nn = append_min_encoding(&DenseNN::identity(4), &ViolationSpec::upper(vec![1.0; 4])).unwrap();
        let p = problem(nn, vec![0.0; 4], vec![2.0; 4]);
        let o = oracle_exact(&p, &OracleConfig::default()).unwrap();
        assert!((o.gamma + 1.0).abs() < 1e-9, "{}", o.gamma);
        let v = verify(&p, &VerifyConfig::default()).unwrap();
        assert_eq!(v.status, Status::Refuted);
        let w = v.witness.unwrap();
        assert!(w.value < 0.0);
        assert_eq!(p.check_witness(&w.x, &w.z).unwrap(), Some(w.value));
    }

    #[test]
    fn stable_network_closes_at_root() {
        let nn = DenseNN::new(vec![
            Layer::relu(array![[1.0]], array![2.0]).unwrap(),
            Layer::affine(array![[1.0]], array![-0.5]).unwrap(),
        ])
        .unwrap();
        let p = problem(nn, vec![-1.0], vec![1.0]);
        assert_eq!(unstable_count(&p).unwrap(), 0);
        let v = verify(&p, &VerifyConfig::default()).unwrap();
        assert_eq!(v.status, Status::Verified);
        assert_eq!(v.nodes, 1);
    }

    #[test]
    fn attack_finds_negative_point() {
        let nn = append_min_encoding(&DenseNN::identity(2), &ViolationSpec::upper(vec![1.0, 1.0])).unwrap();
        let p = problem(nn, vec![0.0; 2], vec![1.5; 2]);
        let w = attack(&p, &AttackConfig::default()).unwrap().unwrap();
        assert!((w.value + 0.5).abs() < 1e-9, "{}", w.value);
    }

    #[test]
    fn cardinality_propagation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = random::InstanceShape {
            inputs: 1,
            hidden: vec![2],
            outputs: 1,
            continuous: 0,
            binaries: 3,
            eq_rows: 0,
            ineq_rows: 0,
        };
        let mut p = random::random_instance(&mut rng, &shape).unwrap();
        p.binaries[0].min_on = 2;
        p.binaries[0].max_on = 2;
        let config = VerifyConfig::default();
        let search = Search { problem: &p, config: &config };
        let mut z = p.constrained.z_box.clone();
        z.upper[0] = 0.0;
        assert!(search.propagate_cardinality(&mut z));
        assert_eq!((z.lower[1], z.lower[2]), (1.0, 1.0));
        let mut z = p.constrained.z_box.clone();
        z.upper[0] = 0.0;
        z.upper[1] = 0.0;
        assert!(!search.propagate_cardinality(&mut z));
    }

    #[test]
    fn optimize_matches_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let config = VerifyConfig {
            mode: Mode::Optimize,
            ..VerifyConfig::default()
        };
        for _ in 0..15 {
            let shape = random::InstanceShape::sample(&mut rng);
            let p = random::random_instance(&mut rng, &shape).unwrap();
            let o = oracle_exact(&p, &OracleConfig::default()).unwrap();
            let v = verify(&p, &config).unwrap();
            assert!((v.lower_bound - o.gamma).abs() <= 1e-6, "{shape:?}: {} vs {}", v.lower_bound, o.gamma);
        }
    }

    #[test]
    fn node_order_prefers_low_bound_then_depth() {
        let p = problem(zero_gadget(), vec![-1.0], vec![1.0]);
        let root = p.constrained.root().unwrap();
        let state = DualState::initial(&p.constrained, &root);
        let node = |bound, depth, seq| Node {
            bound,
            depth,
            seq,
            domain: root.clone(),
            state: state.clone(),
        };
        let mut heap = BinaryHeap::from(vec![node(0.0, 0, 0), node(-1.0, 1, 1), node(-1.0, 2, 2), node(-1.0, 2, 3)]);
        let order: Vec<usize> = std::iter::from_fn(|| heap.pop().map(|n| n.seq)).collect();
        assert_eq!(order, vec![2, 3, 1, 0]);
    }
}
