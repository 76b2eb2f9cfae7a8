//! Lagrangian bounds for networks coupled to linear constraints.
//!
//! A [`ConstrainedProblem`] asks for
//!
//! ```text
//! γ = min  o_yᵀ y + cᵀ z + offset
//!     s.t. y = NN(x),  x ∈ ball,  z ∈ z_box
//!          A_y y + A_x x + D z  = e      (λ free)
//!          B_y y + B_x x + B z <= h      (μ >= 0)
//! ```
//!
//! Dualizing the rows leaves `wᵀNN(x)` with `w = o_y + A_yᵀλ + B_yᵀμ`, which
//! the backward relaxation turns into a linear function of `x`; the
//! remaining linear terms in `x` and `z` are minimized in closed form over
//! their boxes. Every dual state gives a lower bound on `γ`.

use ndarray::{Array1, Array2};
use tracing::debug;

use crate::error::{Error, Result};
use crate::lpcore::{solve_lp, LpProblem, LpResult};
use crate::netmodel::DenseNN;
use crate::relax::{interval_propagate_box, BoxDomain, NeuronBounds, NeuronState, NormBall, Relaxation, Splits};

/// Rows `Y y + X x + Z z (op) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub y: Array2<f64>,
    pub x: Array2<f64>,
    pub z: Array2<f64>,
    pub rhs: Array1<f64>,
}

impl LinearSystem {
    pub fn empty(ny: usize, nx: usize, nz: usize) -> Self {
        Self {
            y: Array2::zeros((0, ny)),
            x: Array2::zeros((0, nx)),
            z: Array2::zeros((0, nz)),
            rhs: Array1::zeros(0),
        }
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }

    /// `Y y + X x + Z z − rhs`.
    pub fn residual(&self, y: &Array1<f64>, x: &Array1<f64>, z: &Array1<f64>) -> Array1<f64> {
        self.y.dot(y) + self.x.dot(x) + self.z.dot(z) - &self.rhs
    }

    fn check(&self, name: &str, ny: usize, nx: usize, nz: usize) -> Result<()> {
        let r = self.rows();
        let dims = [
            (self.y.dim(), (r, ny), "y"),
            (self.x.dim(), (r, nx), "x"),
            (self.z.dim(), (r, nz), "z"),
        ];
        for (got, want, part) in dims {
            if got != want {
                return Err(Error::Shape(format!(
                    "{name} {part}-block is {got:?}, expected {want:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Row-by-row construction of a [`LinearSystem`] from sparse coefficients.
/// Sparse `(index, coefficient)` terms.
type Terms = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub struct SystemBuilder {
    ny: usize,
    nx: usize,
    nz: usize,
    rows: Vec<(Terms, Terms, Terms, f64)>,
}

impl SystemBuilder {
    pub fn new(ny: usize, nx: usize, nz: usize) -> Self {
        Self {
            ny,
            nx,
            nz,
            rows: Vec::new(),
        }
    }

    pub fn row(
        &mut self,
        y: Vec<(usize, f64)>,
        x: Vec<(usize, f64)>,
        z: Vec<(usize, f64)>,
        rhs: f64,
    ) -> &mut Self {
        self.rows.push((y, x, z, rhs));
        self
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn build(&self) -> LinearSystem {
        let r = self.rows.len();
        let mut s = LinearSystem {
            y: Array2::zeros((r, self.ny)),
            x: Array2::zeros((r, self.nx)),
            z: Array2::zeros((r, self.nz)),
            rhs: Array1::zeros(r),
        };
        for (i, (y, x, z, rhs)) in self.rows.iter().enumerate() {
            for &(j, v) in y {
                s.y[[i, j]] += v;
            }
            for &(j, v) in x {
                s.x[[i, j]] += v;
            }
            for &(j, v) in z {
                s.z[[i, j]] += v;
            }
            s.rhs[i] = *rhs;
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct ConstrainedProblem {
    pub nn: DenseNN,
    /// Domain of every network input.
    pub ball: NormBall,
    /// Trailing network inputs that are modelling variables rather than
    /// physical inputs; counterexample search completes them by LP.
    pub aux_inputs: usize,
    pub objective_y: Array1<f64>,
    pub objective_z: Array1<f64>,
    pub offset: f64,
    pub eq: LinearSystem,
    pub ineq: LinearSystem,
    pub z_box: BoxDomain,
}

impl ConstrainedProblem {
    /// Minimize `o_yᵀ NN(x)` over the ball alone.
    pub fn unconstrained(nn: DenseNN, ball: NormBall, objective_y: Vec<f64>) -> Result<Self> {
        let (ny, nx) = (nn.output_dim, nn.input_dim);
        let p = Self {
            nn,
            ball,
            aux_inputs: 0,
            objective_y: Array1::from(objective_y),
            objective_z: Array1::zeros(0),
            offset: 0.0,
            eq: LinearSystem::empty(ny, nx, 0),
            ineq: LinearSystem::empty(ny, nx, 0),
            z_box: BoxDomain {
                lower: vec![],
                upper: vec![],
            },
        };
        p.validate()?;
        Ok(p)
    }

    /// `min cᵀz` s.t. `A·NN(x) = z`, `B z <= h`.
    #[allow(clippy::too_many_arguments)]
    pub fn with_output_map(
        nn: DenseNN,
        ball: NormBall,
        a: Array2<f64>,
        b: Array2<f64>,
        h: Array1<f64>,
        c: Array1<f64>,
        z_box: BoxDomain,
    ) -> Result<Self> {
        let (ny, nx, nz) = (nn.output_dim, nn.input_dim, a.nrows());
        let eq = LinearSystem {
            y: a,
            x: Array2::zeros((nz, nx)),
            z: -Array2::eye(nz),
            rhs: Array1::zeros(nz),
        };
        let ineq = LinearSystem {
            y: Array2::zeros((b.nrows(), ny)),
            x: Array2::zeros((b.nrows(), nx)),
            z: b,
            rhs: h,
        };
        let p = Self {
            nn,
            ball,
            aux_inputs: 0,
            objective_y: Array1::zeros(ny),
            objective_z: c,
            offset: 0.0,
            eq,
            ineq,
            z_box,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn num_z(&self) -> usize {
        self.objective_z.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.nn.ensure_valid()?;
        let (ny, nx, nz) = (self.nn.output_dim, self.nn.input_dim, self.num_z());
        if self.ball.dim() != nx || self.ball.scale.len() != nx {
            return Err(Error::Shape(format!(
                "ball has dimension {}, network has {nx} inputs",
                self.ball.dim()
            )));
        }
        if self.ball.scale.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidArgument("ball scales must be finite and non-negative".into()));
        }
        if self.aux_inputs > nx {
            return Err(Error::Shape("more auxiliary inputs than inputs".into()));
        }
        if self.objective_y.len() != ny {
            return Err(Error::Shape(format!(
                "output objective has length {}, network has {ny} outputs",
                self.objective_y.len()
            )));
        }
        if self.z_box.dim() != nz {
            return Err(Error::Shape(format!(
                "z box has dimension {}, objective has {nz} entries",
                self.z_box.dim()
            )));
        }
        self.z_box.validate()?;
        self.eq.check("equality system", ny, nx, nz)?;
        self.ineq.check("inequality system", ny, nx, nz)?;
        Ok(())
    }

    pub fn objective(&self, y: &Array1<f64>, z: &Array1<f64>) -> f64 {
        self.objective_y.dot(y) + self.objective_z.dot(z) + self.offset
    }

    /// Domain of the root node; fails when `z_box` is unbounded.
    pub fn root(&self) -> Result<NodeDomain> {
        self.validate()?;
        if let Some(i) = (0..self.num_z()).find(|&i| !(self.z_box.lower[i].is_finite() && self.z_box.upper[i].is_finite())) {
            return Err(Error::UnboundedAuxiliary { index: i });
        }
        NodeDomain::new(self, Splits::none(&self.nn), self.z_box.clone())
            .ok_or_else(|| Error::Infeasible("input domain is empty".into()))
    }

    /// Largest violation of any row at `(x, z)`, with `z` checked against
    /// its box too.
    pub fn max_violation(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        let y = Array1::from(self.nn.forward(x)?);
        let xa = Array1::from(x.to_vec());
        let za = Array1::from(z.to_vec());
        let mut worst: f64 = 0.0;
        for r in self.eq.residual(&y, &xa, &za) {
            worst = worst.max(r.abs());
        }
        for r in self.ineq.residual(&y, &xa, &za) {
            worst = worst.max(r);
        }
        for (i, &v) in z.iter().enumerate() {
            worst = worst.max(self.z_box.lower[i] - v).max(v - self.z_box.upper[i]);
        }
        Ok(worst)
    }
}

/// Branching state a bound is computed under.
#[derive(Debug, Clone)]
pub struct NodeDomain {
    pub splits: Splits,
    pub bounds: NeuronBounds,
    pub z_box: BoxDomain,
}

impl NodeDomain {
    /// `None` when the splits are incompatible with the input box.
    pub fn new(problem: &ConstrainedProblem, splits: Splits, z_box: BoxDomain) -> Option<Self> {
        let input = problem.ball.bounding_box().ok()?;
        let bounds = interval_propagate_box(&problem.nn, &input, &splits)?;
        Some(Self { splits, bounds, z_box })
    }

    pub fn relaxation<'a>(&'a self, nn: &'a DenseNN) -> Relaxation<'a> {
        Relaxation::new(nn, &self.bounds, &self.splits)
    }

    pub fn z_ball(&self) -> NormBall {
        NormBall::from_box(&self.z_box).expect("node z box is finite and ordered")
    }
}

/// Dual variables of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    /// Lower-line slopes, one entry per neuron (only unstable ones matter).
    pub alpha: Vec<Array1<f64>>,
    /// Split multipliers, one entry per neuron (only split ones matter).
    pub beta: Vec<Array1<f64>>,
    pub lambda: Array1<f64>,
    pub mu: Array1<f64>,
}

impl DualState {
    /// Zero multipliers and the default slopes of `domain`.
    pub fn initial(problem: &ConstrainedProblem, domain: &NodeDomain) -> Self {
        Self {
            alpha: domain.bounds.default_alpha(),
            beta: problem.nn.layers.iter().map(|l| Array1::zeros(l.out_dim())).collect(),
            lambda: Array1::zeros(problem.eq.rows()),
            mu: Array1::zeros(problem.ineq.rows()),
        }
    }

    pub fn project(&mut self) {
        for a in self.alpha.iter_mut().flat_map(|a| a.iter_mut()) {
            *a = a.clamp(0.0, 1.0);
        }
        for b in self.beta.iter_mut().flat_map(|b| b.iter_mut()) {
            *b = b.max(0.0);
        }
        self.mu.mapv_inplace(|m| m.max(0.0));
    }

    pub fn projected(&self) -> Self {
        let mut s = self.clone();
        s.project();
        s
    }

    fn check(&self, problem: &ConstrainedProblem) -> Result<()> {
        let widths_ok = |v: &Vec<Array1<f64>>| {
            v.len() == problem.nn.layers.len()
                && v.iter().zip(&problem.nn.layers).all(|(a, l)| a.len() == l.out_dim())
        };
        if !widths_ok(&self.alpha) || !widths_ok(&self.beta) {
            return Err(Error::Shape("slope or split multipliers do not match the layers".into()));
        }
        if self.lambda.len() != problem.eq.rows() || self.mu.len() != problem.ineq.rows() {
            return Err(Error::Shape(format!(
                "state has {} equality and {} inequality multipliers, problem has {} and {}",
                self.lambda.len(),
                self.mu.len(),
                problem.eq.rows(),
                problem.ineq.rows()
            )));
        }
        Ok(())
    }

    fn flatten(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.alpha.iter().flatten().copied().collect();
        v.extend(self.beta.iter().flatten());
        v.extend(&self.lambda);
        v.extend(&self.mu);
        v
    }

    fn unflatten(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for a in self.alpha.iter_mut().chain(self.beta.iter_mut()) {
            for v in a.iter_mut() {
                *v = it.next().expect("layout");
            }
        }
        for v in self.lambda.iter_mut().chain(self.mu.iter_mut()) {
            *v = it.next().expect("layout");
        }
    }
}

/// Partial derivatives of the dual value, laid out like [`DualState`].
#[derive(Debug, Clone, PartialEq)]
pub struct DualGradient {
    pub alpha: Vec<Array1<f64>>,
    pub beta: Vec<Array1<f64>>,
    pub lambda: Array1<f64>,
    pub mu: Array1<f64>,
}

/// Value of the dual and the primal points that attain its inner minimum.
#[derive(Debug, Clone)]
pub struct DualEvaluation {
    pub value: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub gradient: Option<DualGradient>,
}

/// Lower bound on the problem optimum at the root for any `state`.
pub fn dual_value(problem: &ConstrainedProblem, state: &DualState) -> Result<f64> {
    let root = problem.root()?;
    Ok(evaluate(problem, &root, state, false)?.value)
}

/// Supergradient of [`dual_value`]; `sign(0) = 0` at kinks.
pub fn dual_gradient(problem: &ConstrainedProblem, state: &DualState) -> Result<DualGradient> {
    let root = problem.root()?;
    Ok(evaluate(problem, &root, state, true)?
        .gradient
        .expect("requested"))
}

/// Dual value at `domain`, optionally with its gradient.
pub fn evaluate(
    problem: &ConstrainedProblem,
    domain: &NodeDomain,
    state: &DualState,
    with_gradient: bool,
) -> Result<DualEvaluation> {
    state.check(problem)?;
    let w = &problem.objective_y + &problem.eq.y.t().dot(&state.lambda) + problem.ineq.y.t().dot(&state.mu);
    let relax = domain.relaxation(&problem.nn);
    let pass = relax.backward(&w, &state.alpha, &state.beta);
    let xi = &pass.bound.a + &problem.eq.x.t().dot(&state.lambda) + problem.ineq.x.t().dot(&state.mu);
    let zeta = &problem.objective_z + &problem.eq.z.t().dot(&state.lambda) + problem.ineq.z.t().dot(&state.mu);
    let z_ball = domain.z_ball();
    let xs = xi.as_slice().expect("contiguous");
    let zs = zeta.as_slice().expect("contiguous");
    let value = problem.ball.min_linear(xs)? + z_ball.min_linear(zs)? + pass.bound.b + problem.offset
        - state.lambda.dot(&problem.eq.rhs)
        - state.mu.dot(&problem.ineq.rhs);
    let x_star = problem.ball.argmin_linear(xs);
    let z_star = z_ball.argmin_linear(zs);
    let gradient = with_gradient.then(|| {
        let xa = Array1::from(x_star.clone());
        let za = Array1::from(z_star.clone());
        let (w_bar, d_alpha, d_beta) = relax.adjoint(&pass, &xa, &state.alpha);
        DualGradient {
            alpha: d_alpha,
            beta: d_beta,
            lambda: problem.eq.residual(&w_bar, &xa, &za),
            mu: problem.ineq.residual(&w_bar, &xa, &za),
        }
    });
    Ok(DualEvaluation {
        value,
        x: x_star,
        z: z_star,
        gradient,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentConfig {
    pub lr: f64,
    /// Multiplies `lr` every `decay_every` iterations.
    pub decay: f64,
    pub decay_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub iters: usize,
    /// Stop once the bound reaches this value.
    pub early_stop: f64,
    /// Cap on the norm of one equality-multiplier step.
    pub lambda_step_cap: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            decay: 0.98,
            decay_every: 50,
            beta1: 0.9,
            beta2: 0.999,
            iters: 5000,
            early_stop: 0.0,
            lambda_step_cap: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentTrace {
    /// Dual value before each update.
    pub values: Vec<f64>,
    pub best: f64,
    /// First iteration whose value was non-negative.
    pub crossed_at: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct AscentOutcome {
    pub best: f64,
    pub best_state: DualState,
    pub state: DualState,
    pub trace: AscentTrace,
    /// Inner minimizers at the best state.
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

/// Projected Adam ascent on the dual at the root.
pub fn ascend(problem: &ConstrainedProblem, state0: &DualState, config: &AscentConfig) -> Result<AscentOutcome> {
    let root = problem.root()?;
    ascend_at(problem, &root, state0, config)
}

pub fn ascend_at(
    problem: &ConstrainedProblem,
    domain: &NodeDomain,
    state0: &DualState,
    config: &AscentConfig,
) -> Result<AscentOutcome> {
    if config.iters == 0 {
        return Err(Error::InvalidArgument("ascent needs at least one iteration".into()));
    }
    let mut state = state0.projected();
    let n = state.flatten().len();
    let lambda_range = {
        let a: usize = state.alpha.iter().chain(&state.beta).map(|v| v.len()).sum();
        a..a + state.lambda.len()
    };
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut trace = AscentTrace {
        values: Vec::with_capacity(config.iters.min(10_000)),
        best: f64::NEG_INFINITY,
        crossed_at: None,
    };
    let mut best_state = state.clone();
    let (mut best_x, mut best_z) = (Vec::new(), Vec::new());
    let mut lr = config.lr;
    for it in 0..config.iters {
        let eval = evaluate(problem, domain, &state, true)?;
        if !eval.value.is_finite() {
            return Err(Error::NonFinite {
                iteration: it,
                diagnostic: format!("{state:?}"),
            });
        }
        trace.values.push(eval.value);
        if eval.value > trace.best {
            trace.best = eval.value;
            best_state = state.clone();
            best_x = eval.x.clone();
            best_z = eval.z.clone();
        }
        if eval.value >= 0.0 && trace.crossed_at.is_none() {
            trace.crossed_at = Some(it);
        }
        if eval.value >= config.early_stop {
            break;
        }
        if it + 1 == config.iters {
            break;
        }
        if it > 0 && it % config.decay_every == 0 {
            lr *= config.decay;
        }
        let g = eval.gradient.expect("requested");
        let grad = DualState {
            alpha: g.alpha,
            beta: g.beta,
            lambda: g.lambda,
            mu: g.mu,
        }
        .flatten();
        let t = (it + 1) as i32;
        let (c1, c2) = (1.0 - config.beta1.powi(t), 1.0 - config.beta2.powi(t));
        let mut step = vec![0.0; n];
        for i in 0..n {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
            step[i] = lr * (m[i] / c1) / ((v[i] / c2).sqrt() + 1e-12);
        }
        let lam_norm = step[lambda_range.clone()].iter().map(|s| s * s).sum::<f64>().sqrt();
        if lam_norm > config.lambda_step_cap {
            let f = config.lambda_step_cap / lam_norm;
            step[lambda_range.clone()].iter_mut().for_each(|s| *s *= f);
        }
        let mut flat = state.flatten();
        for i in 0..n {
            flat[i] += step[i];
        }
        state.unflatten(&flat);
        state.project();
    }
    debug!(best = trace.best, iters = trace.values.len(), "dual ascent finished");
    Ok(AscentOutcome {
        best: trace.best,
        best_state,
        state,
        trace,
        x: best_x,
        z: best_z,
    })
}

/// Bounds on `z` implied by the rows, the input box and interval bounds on
/// the network output, intersected with the current `z_box`.
///
/// Entries of `z_box` may start infinite; any that stay infinite are
/// reported as unbounded.
/// Coefficients on `(y, x, z)` and the right-hand side.
type DenseRow = (Array1<f64>, Array1<f64>, Array1<f64>, f64);

pub fn tighten_z_box(problem: &ConstrainedProblem) -> Result<BoxDomain> {
    let input = problem.ball.bounding_box()?;
    let bounds = interval_propagate_box(&problem.nn, &input, &Splits::none(&problem.nn))
        .ok_or_else(|| Error::Infeasible("input domain is empty".into()))?;
    let (ylo, yhi) = bounds.output_interval(&problem.nn);
    let mut zlo = problem.z_box.lower.clone();
    let mut zhi = problem.z_box.upper.clone();

    // every row as `Σ coef·var <= rhs` over (y, x, z)
    let mut rows: Vec<DenseRow> = Vec::new();
    for i in 0..problem.eq.rows() {
        let (y, x, z, r) = (
            problem.eq.y.row(i).to_owned(),
            problem.eq.x.row(i).to_owned(),
            problem.eq.z.row(i).to_owned(),
            problem.eq.rhs[i],
        );
        rows.push((-&y, -&x, -&z, -r));
        rows.push((y, x, z, r));
    }
    for i in 0..problem.ineq.rows() {
        rows.push((
            problem.ineq.y.row(i).to_owned(),
            problem.ineq.x.row(i).to_owned(),
            problem.ineq.z.row(i).to_owned(),
            problem.ineq.rhs[i],
        ));
    }
    let min_term = |c: f64, lo: f64, hi: f64| -> f64 {
        if c > 0.0 {
            c * lo
        } else if c < 0.0 {
            c * hi
        } else {
            0.0
        }
    };
    for _round in 0..20 {
        let mut changed = false;
        for (y, x, z, rhs) in &rows {
            let fixed: f64 = y.iter().enumerate().map(|(j, &c)| min_term(c, ylo[j], yhi[j])).sum::<f64>()
                + x.iter()
                    .enumerate()
                    .map(|(j, &c)| min_term(c, input.lower[j], input.upper[j]))
                    .sum::<f64>();
            if !fixed.is_finite() {
                continue;
            }
            let terms: Vec<f64> = z.iter().enumerate().map(|(j, &c)| min_term(c, zlo[j], zhi[j])).collect();
            let infinite = terms.iter().filter(|t| !t.is_finite()).count();
            let total: f64 = terms.iter().filter(|t| t.is_finite()).sum();
            for (j, &c) in z.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                // c·z_j <= rhs − fixed − Σ_{k≠j} min(c_k z_k)
                let rest = if terms[j].is_finite() {
                    if infinite > 0 {
                        continue;
                    }
                    total - terms[j]
                } else {
                    if infinite > 1 {
                        continue;
                    }
                    total
                };
                let slack = rhs - fixed - rest;
                let bound = slack / c;
                let tol = 1e-12 * (1.0 + bound.abs());
                if c > 0.0 && bound < zhi[j] - tol {
                    zhi[j] = bound;
                    changed = true;
                } else if c < 0.0 && bound > zlo[j] + tol {
                    zlo[j] = bound;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    for j in 0..zlo.len() {
        if zlo[j] > zhi[j] + 1e-9 {
            return Err(Error::Infeasible(format!(
                "auxiliary variable {j} has empty range [{}, {}]",
                zlo[j], zhi[j]
            )));
        }
        if zlo[j] > zhi[j] {
            let mid = 0.5 * (zlo[j] + zhi[j]);
            zlo[j] = mid;
            zhi[j] = mid;
        }
        if !(zlo[j].is_finite() && zhi[j].is_finite()) {
            return Err(Error::UnboundedAuxiliary { index: j });
        }
    }
    Ok(BoxDomain { lower: zlo, upper: zhi })
}

/// Variable indices of the LP built by [`relaxed_lp`].
#[derive(Debug, Clone, PartialEq)]
pub struct LpLayout {
    pub x: usize,
    pub z: usize,
    /// Start of each layer's pre-activation block.
    pub pre: Vec<usize>,
    /// Start of each layer's output block.
    pub post: Vec<usize>,
    pub output: usize,
}

impl LpLayout {
    pub fn x(&self, v: &[f64], n: usize) -> Vec<f64> {
        v[self.x..self.x + n].to_vec()
    }

    pub fn z(&self, v: &[f64], n: usize) -> Vec<f64> {
        v[self.z..self.z + n].to_vec()
    }
}

/// The problem with every free unstable neuron replaced by its triangle
/// relaxation over the node's intervals and binaries relaxed to their box.
/// Exact when the node has no unstable neurons and a degenerate `z_box` on
/// every binary.
pub fn relaxed_lp(problem: &ConstrainedProblem, domain: &NodeDomain) -> Result<(LpProblem, LpLayout)> {
    let nn = &problem.nn;
    let nx = nn.input_dim;
    let nz = problem.num_z();
    let input = problem.ball.bounding_box()?;
    let mut lp = LpProblem::new(0);
    let x0 = lp.num_vars();
    for i in 0..nx {
        lp.add_var(input.lower[i], input.upper[i], 0.0);
    }
    let z0 = lp.num_vars();
    for i in 0..nz {
        lp.add_var(domain.z_box.lower[i], domain.z_box.upper[i], problem.objective_z[i]);
    }
    let mut pre = Vec::new();
    let mut post = Vec::new();
    let mut prev = x0;
    for (k, layer) in nn.layers.iter().enumerate() {
        let width = layer.out_dim();
        let v0 = lp.num_vars();
        for _ in 0..width {
            lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
        }
        let h0 = lp.num_vars();
        for _ in 0..width {
            lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
        }
        for j in 0..width {
            // v = W h_prev + b
            let mut row: Vec<(usize, f64)> = layer
                .weight
                .row(j)
                .iter()
                .enumerate()
                .filter(|(_, &w)| w != 0.0)
                .map(|(i, &w)| (prev + i, w))
                .collect();
            row.push((v0 + j, -1.0));
            lp.add_eq(row, -layer.bias[j]);
            let (v, h) = (v0 + j, h0 + j);
            match domain.bounds.state(nn, &domain.splits, k, j) {
                NeuronState::Linear | NeuronState::Active => lp.add_eq([(h, 1.0), (v, -1.0)], 0.0),
                NeuronState::Inactive => lp.set_bounds(h, 0.0, 0.0),
                NeuronState::SplitActive => {
                    lp.add_eq([(h, 1.0), (v, -1.0)], 0.0);
                    lp.add_ge([(v, 1.0)], 0.0);
                }
                NeuronState::SplitInactive => {
                    lp.set_bounds(h, 0.0, 0.0);
                    lp.add_le([(v, 1.0)], 0.0);
                }
                NeuronState::Unstable => {
                    let (l, u) = (domain.bounds.lower[k][j], domain.bounds.upper[k][j]);
                    let s = u / (u - l);
                    lp.set_bounds(h, 0.0, f64::INFINITY);
                    lp.add_ge([(h, 1.0), (v, -1.0)], 0.0);
                    // h <= s (v − l)
                    lp.add_le([(h, 1.0), (v, -s)], -s * l);
                }
            }
        }
        pre.push(v0);
        post.push(h0);
        prev = h0;
    }
    let y0 = prev;
    for (j, &c) in problem.objective_y.iter().enumerate() {
        lp.objective[y0 + j] += c;
    }
    let add_rows = |lp: &mut LpProblem, sys: &LinearSystem, eq: bool| {
        for i in 0..sys.rows() {
            let mut row = Vec::new();
            for (j, &c) in sys.y.row(i).iter().enumerate() {
                if c != 0.0 {
                    row.push((y0 + j, c));
                }
            }
            for (j, &c) in sys.x.row(i).iter().enumerate() {
                if c != 0.0 {
                    row.push((x0 + j, c));
                }
            }
            for (j, &c) in sys.z.row(i).iter().enumerate() {
                if c != 0.0 {
                    row.push((z0 + j, c));
                }
            }
            if eq {
                lp.add_eq(row, sys.rhs[i]);
            } else {
                lp.add_le(row, sys.rhs[i]);
            }
        }
    };
    add_rows(&mut lp, &problem.eq, true);
    add_rows(&mut lp, &problem.ineq, false);
    Ok((
        lp,
        LpLayout {
            x: x0,
            z: z0,
            pre,
            post,
            output: y0,
        },
    ))
}

/// Solves [`relaxed_lp`] and adds the objective offset.
pub fn solve_relaxed(problem: &ConstrainedProblem, domain: &NodeDomain) -> Result<(LpResult, LpLayout)> {
    let (lp, layout) = relaxed_lp(problem, domain)?;
    let mut res = solve_lp(&lp)?;
    res.objective += problem.offset;
    Ok((res, layout))
}

/// Optimum of the root relaxation.
pub fn root_lp_value(problem: &ConstrainedProblem) -> Result<f64> {
    let root = problem.root()?;
    Ok(solve_relaxed(problem, &root)?.0.objective)
}
