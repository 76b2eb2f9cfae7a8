//! Input domains, interval bounds and backward linear relaxation.
//!
//! Networks are kept in their original input coordinates. A [`NormBall`]
//! describes the domain as `x = center + scale ∘ x̂` with `‖x̂‖_∞ ≤ radius`,
//! so a linear function `aᵀx` is minimized in closed form as
//! `aᵀcenter − radius·‖a ∘ scale‖₁`. Zero-scale coordinates are fixed inputs.
//!
//! The backward pass works on pre-activations `v_k = W_k h_{k−1} + b_k`.
//! With coefficient `Λ` on a masked neuron's output, its coefficient on `v`
//! becomes:
//!
//! | neuron state            | coefficient on `v`  | constant      |
//! |-------------------------|---------------------|---------------|
//! | unmasked                | `Λ`                 |               |
//! | split active (`v ≥ 0`)  | `Λ − β`             |               |
//! | split inactive (`v ≤ 0`)| `β`                 |               |
//! | stable active           | `Λ`                 |               |
//! | stable inactive         | `0`                 |               |
//! | unstable, `Λ ≥ 0`       | `αΛ`                |               |
//! | unstable, `Λ < 0`       | `sΛ`, `s = u/(u−l)` | `−sΛl`        |

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::netmodel::{DenseNN, Layer};

/// Elementwise interval domain.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::Shape(format!(
                "box lower has {} entries, upper has {}",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (i, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u {
                return Err(Error::InconsistentBounds(format!(
                    "coordinate {i}: lower {l} > upper {u}"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (&l, &u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(l, u);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }
}

/// Norm order of the input ball. Only `∞` has a closed-form dual here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormOrder {
    Inf,
    P(f64),
}

impl NormOrder {
    pub fn from_p(p: f64) -> Self {
        if p.is_infinite() && p > 0.0 {
            NormOrder::Inf
        } else {
            NormOrder::P(p)
        }
    }
}

/// `{center + scale ∘ x̂ : ‖x̂‖_p ≤ radius}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormBall {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    pub radius: f64,
    pub p: NormOrder,
}

impl NormBall {
    /// The ball covering `b` exactly, with zero scale on fixed coordinates.
    pub fn from_box(b: &BoxDomain) -> Result<Self> {
        b.validate()?;
        if !b.is_finite() {
            return Err(Error::InconsistentBounds("box has infinite bounds".into()));
        }
        let center = b.lower.iter().zip(&b.upper).map(|(l, u)| 0.5 * (l + u)).collect();
        let scale = b.lower.iter().zip(&b.upper).map(|(l, u)| 0.5 * (u - l)).collect();
        Ok(Self {
            center,
            scale,
            radius: 1.0,
            p: NormOrder::Inf,
        })
    }

    /// Unit ∞-ball around the origin.
    pub fn unit(n: usize) -> Self {
        Self {
            center: vec![0.0; n],
            scale: vec![1.0; n],
            radius: 1.0,
            p: NormOrder::Inf,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Coordinatewise interval hull; exact for the ∞-ball.
    pub fn bounding_box(&self) -> Result<BoxDomain> {
        self.require_inf()?;
        let r = self.radius;
        Ok(BoxDomain {
            lower: self.center.iter().zip(&self.scale).map(|(c, s)| c - r * s).collect(),
            upper: self.center.iter().zip(&self.scale).map(|(c, s)| c + r * s).collect(),
        })
    }

    pub fn point(&self, xhat: &[f64]) -> Vec<f64> {
        self.center
            .iter()
            .zip(&self.scale)
            .zip(xhat)
            .map(|((c, s), x)| c + s * x)
            .collect()
    }

    /// `min aᵀx` over the ball.
    pub fn min_linear(&self, a: &[f64]) -> Result<f64> {
        let scaled: Vec<f64> = a.iter().zip(&self.scale).map(|(ai, si)| ai * si).collect();
        let shift: f64 = a.iter().zip(&self.center).map(|(ai, ci)| ai * ci).sum();
        Ok(shift + dual_norm_min(&scaled, self.radius, self.p)?)
    }

    /// A point of the ball attaining [`Self::min_linear`].
    pub fn argmin_linear(&self, a: &[f64]) -> Vec<f64> {
        let xhat: Vec<f64> = a.iter().map(|&ai| -self.radius * sign(ai)).collect();
        self.point(&xhat)
    }

    fn require_inf(&self) -> Result<()> {
        match self.p {
            NormOrder::Inf => Ok(()),
            NormOrder::P(p) => Err(Error::UnsupportedNorm(p.to_string())),
        }
    }
}

/// `sign` with `sign(0) = 0`.
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Affine change of variables between a box and the unit ball.
///
/// Fixed coordinates (`lower == upper`) are dropped from the ball and
/// re-inserted on the way back.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMap {
    pub dim: usize,
    /// Original indices of the ball coordinates.
    pub free: Vec<usize>,
    pub fixed: Vec<(usize, f64)>,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputMap {
    pub fn denormalize(&self, xhat: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for &(i, v) in &self.fixed {
            x[i] = v;
        }
        for (k, &i) in self.free.iter().enumerate() {
            x[i] = self.center[k] + self.scale[k] * xhat[k];
        }
        x
    }

    pub fn normalize_point(&self, x: &[f64]) -> Vec<f64> {
        self.free
            .iter()
            .enumerate()
            .map(|(k, &i)| (x[i] - self.center[k]) / self.scale[k])
            .collect()
    }

    /// Affine layer from normalized to original coordinates.
    pub fn layer(&self) -> Layer {
        let mut w = ndarray::Array2::zeros((self.dim, self.free.len()));
        let mut b = Array1::zeros(self.dim);
        for &(i, v) in &self.fixed {
            b[i] = v;
        }
        for (k, &i) in self.free.iter().enumerate() {
            w[[i, k]] = self.scale[k];
            b[i] = self.center[k];
        }
        Layer {
            weight: w,
            bias: b,
            mask: vec![false; self.dim],
        }
    }

    /// `nn` rewritten over the normalized coordinates, with the map folded
    /// into its first layer.
    pub fn compose(&self, nn: &DenseNN) -> Result<DenseNN> {
        if nn.input_dim != self.dim {
            return Err(Error::Shape(format!(
                "map has {} outputs, network has {} inputs",
                self.dim, nn.input_dim
            )));
        }
        if self.free.is_empty() {
            return Err(Error::InvalidArgument("every input is fixed".into()));
        }
        let map = self.layer();
        let mut layers = nn.layers.clone();
        let first = &mut layers[0];
        first.bias = first.weight.dot(&map.bias) + &first.bias;
        first.weight = first.weight.dot(&map.weight);
        DenseNN::new(layers)
    }
}

/// Splits `b` into a unit ∞-ball over its non-degenerate coordinates and the
/// map back to original coordinates.
pub fn normalize(b: &BoxDomain) -> Result<(NormBall, InputMap)> {
    b.validate()?;
    if !b.is_finite() {
        return Err(Error::InconsistentBounds("box has infinite bounds".into()));
    }
    let mut map = InputMap {
        dim: b.dim(),
        free: Vec::new(),
        fixed: Vec::new(),
        center: Vec::new(),
        scale: Vec::new(),
    };
    for i in 0..b.dim() {
        let (l, u) = (b.lower[i], b.upper[i]);
        let s = 0.5 * (u - l);
        if s > 0.0 {
            map.free.push(i);
            map.center.push(0.5 * (l + u));
            map.scale.push(s);
        } else {
            map.fixed.push((i, l));
        }
    }
    Ok((NormBall::unit(map.free.len()), map))
}

/// `min_{‖x‖_p ≤ ε} aᵀx = −ε‖a‖_q`.
pub fn dual_norm_min(a: &[f64], eps: f64, p: NormOrder) -> Result<f64> {
    match p {
        NormOrder::Inf => {}
        NormOrder::P(p) => return Err(Error::UnsupportedNorm(p.to_string())),
    }
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::InvalidArgument(format!("radius must be non-negative, got {eps}")));
    }
    Ok(-eps * a.iter().map(|v| v.abs()).sum::<f64>())
}

/// Sign constraint imposed on one neuron by branching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Free,
    Active,
    Inactive,
}

/// Per-layer, per-neuron branching state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Splits {
    pub phases: Vec<Vec<Phase>>,
}

impl Splits {
    pub fn none(nn: &DenseNN) -> Self {
        Self {
            phases: nn.layers.iter().map(|l| vec![Phase::Free; l.out_dim()]).collect(),
        }
    }

    pub fn get(&self, layer: usize, neuron: usize) -> Phase {
        self.phases[layer][neuron]
    }

    pub fn with(&self, layer: usize, neuron: usize, phase: Phase) -> Self {
        let mut s = self.clone();
        s.phases[layer][neuron] = phase;
        s
    }

    pub fn count(&self) -> usize {
        self.phases.iter().flatten().filter(|p| **p != Phase::Free).count()
    }
}

/// Pre-activation intervals of every neuron, layer by layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronBounds {
    pub lower: Vec<Array1<f64>>,
    pub upper: Vec<Array1<f64>>,
}

/// How the backward pass treats one masked neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeuronState {
    Linear,
    Active,
    Inactive,
    SplitActive,
    SplitInactive,
    Unstable,
}

impl NeuronBounds {
    pub fn validate(&self) -> Result<()> {
        for (k, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if let Some(j) = (0..l.len()).find(|&j| l[j].is_nan() || u[j].is_nan() || l[j] > u[j]) {
                return Err(Error::InconsistentBounds(format!(
                    "layer {k} neuron {j}: [{}, {}]",
                    l[j], u[j]
                )));
            }
        }
        Ok(())
    }

    pub fn state(&self, nn: &DenseNN, splits: &Splits, k: usize, j: usize) -> NeuronState {
        if !nn.layers[k].mask[j] {
            return NeuronState::Linear;
        }
        match splits.get(k, j) {
            Phase::Active => NeuronState::SplitActive,
            Phase::Inactive => NeuronState::SplitInactive,
            Phase::Free => {
                let (l, u) = (self.lower[k][j], self.upper[k][j]);
                if l >= 0.0 {
                    NeuronState::Active
                } else if u <= 0.0 {
                    NeuronState::Inactive
                } else {
                    NeuronState::Unstable
                }
            }
        }
    }

    /// `(layer, neuron)` of every free neuron straddling zero.
    pub fn unstable(&self, nn: &DenseNN, splits: &Splits) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, layer) in nn.layers.iter().enumerate() {
            for j in 0..layer.out_dim() {
                if self.state(nn, splits, k, j) == NeuronState::Unstable {
                    out.push((k, j));
                }
            }
        }
        out
    }

    /// Interval of the network output.
    pub fn output_interval(&self, nn: &DenseNN) -> (Array1<f64>, Array1<f64>) {
        let k = nn.layers.len() - 1;
        activate_interval(&nn.layers[k], &self.lower[k], &self.upper[k])
    }

    /// Default lower-line slopes: 1 where `u ≥ −l`, else 0.
    pub fn default_alpha(&self) -> Vec<Array1<f64>> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| {
                l.iter()
                    .zip(u)
                    .map(|(&l, &u)| if u >= -l { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()
    }
}

fn activate_interval(layer: &Layer, l: &Array1<f64>, u: &Array1<f64>) -> (Array1<f64>, Array1<f64>) {
    let mut lo = l.clone();
    let mut hi = u.clone();
    for j in 0..layer.out_dim() {
        if layer.mask[j] {
            lo[j] = lo[j].max(0.0);
            hi[j] = hi[j].max(0.0);
        }
    }
    (lo, hi)
}

/// Interval arithmetic through `nn` from the ball's bounding box.
pub fn interval_propagate(nn: &DenseNN, ball: &NormBall) -> Result<NeuronBounds> {
    let b = ball.bounding_box()?;
    interval_propagate_box(nn, &b, &Splits::none(nn))
        .ok_or_else(|| Error::Infeasible("empty input box".into()))
}

/// Interval arithmetic with split neurons clamped to their phase. `None`
/// when a split contradicts its interval.
pub fn interval_propagate_box(nn: &DenseNN, input: &BoxDomain, splits: &Splits) -> Option<NeuronBounds> {
    let mut lo = Array1::from(input.lower.clone());
    let mut hi = Array1::from(input.upper.clone());
    let mut lower = Vec::with_capacity(nn.layers.len());
    let mut upper = Vec::with_capacity(nn.layers.len());
    for (k, layer) in nn.layers.iter().enumerate() {
        let center = (&lo + &hi) * 0.5;
        let radius = (&hi - &lo) * 0.5;
        let mid = layer.weight.dot(&center) + &layer.bias;
        let spread = layer.weight.mapv(f64::abs).dot(&radius);
        let mut l = &mid - &spread;
        let mut u = &mid + &spread;
        for j in 0..layer.out_dim() {
            if !layer.mask[j] {
                continue;
            }
            match splits.get(k, j) {
                Phase::Free => {}
                Phase::Active => l[j] = l[j].max(0.0),
                Phase::Inactive => u[j] = u[j].min(0.0),
            }
            if l[j] > u[j] {
                return None;
            }
        }
        let (nl, nh) = activate_interval(layer, &l, &u);
        lower.push(l);
        upper.push(u);
        lo = nl;
        hi = nh;
    }
    Some(NeuronBounds { lower, upper })
}

/// `aᵀx + b`, a lower bound on the objective over the input domain.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBound {
    pub a: Array1<f64>,
    pub b: f64,
}

impl LinearBound {
    pub fn concretize(&self, ball: &NormBall) -> Result<f64> {
        Ok(ball.min_linear(self.a.as_slice().expect("contiguous"))? + self.b)
    }
}

/// Coefficients of one backward pass, kept for the adjoint.
#[derive(Debug, Clone)]
pub struct BackwardPass {
    /// `lambda[k]`: coefficient on the output of layer `k`.
    pub lambda: Vec<Array1<f64>>,
    pub bound: LinearBound,
}

/// Everything fixed at a branch-and-bound node.
#[derive(Debug, Clone, Copy)]
pub struct Relaxation<'a> {
    pub nn: &'a DenseNN,
    pub bounds: &'a NeuronBounds,
    pub splits: &'a Splits,
}

impl<'a> Relaxation<'a> {
    pub fn new(nn: &'a DenseNN, bounds: &'a NeuronBounds, splits: &'a Splits) -> Self {
        Self { nn, bounds, splits }
    }

    /// Backward substitution of `wᵀ NN(x)` to a linear lower bound in `x`.
    pub fn backward(
        &self,
        w: &Array1<f64>,
        alpha: &[Array1<f64>],
        beta: &[Array1<f64>],
    ) -> BackwardPass {
        let nl = self.nn.layers.len();
        let mut lambda = vec![Array1::zeros(0); nl];
        let mut coef = w.clone();
        let mut constant = 0.0;
        for k in (0..nl).rev() {
            let layer = &self.nn.layers[k];
            let mut g = Array1::zeros(layer.out_dim());
            for j in 0..layer.out_dim() {
                let c = coef[j];
                g[j] = match self.bounds.state(self.nn, self.splits, k, j) {
                    NeuronState::Linear | NeuronState::Active => c,
                    NeuronState::Inactive => 0.0,
                    NeuronState::SplitActive => c - beta[k][j],
                    NeuronState::SplitInactive => beta[k][j],
                    NeuronState::Unstable => {
                        let (l, u) = (self.bounds.lower[k][j], self.bounds.upper[k][j]);
                        if c >= 0.0 {
                            alpha[k][j] * c
                        } else {
                            let s = u / (u - l);
                            constant -= c * s * l;
                            c * s
                        }
                    }
                };
            }
            constant += g.dot(&layer.bias);
            lambda[k] = coef;
            coef = layer.weight.t().dot(&g);
        }
        BackwardPass {
            lambda,
            bound: LinearBound { a: coef, b: constant },
        }
    }

    /// Reverse-mode derivative of `bound.b + ā·bound.a` given `ā`.
    ///
    /// Returns `(∂/∂w, ∂/∂α, ∂/∂β)`. Kinks use the branch taken in
    /// [`Self::backward`].
    pub fn adjoint(
        &self,
        pass: &BackwardPass,
        a_bar: &Array1<f64>,
        alpha: &[Array1<f64>],
    ) -> (Array1<f64>, Vec<Array1<f64>>, Vec<Array1<f64>>) {
        let nl = self.nn.layers.len();
        let mut d_alpha: Vec<Array1<f64>> =
            self.nn.layers.iter().map(|l| Array1::zeros(l.out_dim())).collect();
        let mut d_beta = d_alpha.clone();
        let mut up = a_bar.clone();
        for k in 0..nl {
            let layer = &self.nn.layers[k];
            let g_bar = layer.weight.dot(&up) + &layer.bias;
            let coef = &pass.lambda[k];
            let mut c_bar = Array1::zeros(layer.out_dim());
            for j in 0..layer.out_dim() {
                let gb = g_bar[j];
                match self.bounds.state(self.nn, self.splits, k, j) {
                    NeuronState::Linear | NeuronState::Active => c_bar[j] = gb,
                    NeuronState::Inactive => {}
                    NeuronState::SplitActive => {
                        c_bar[j] = gb;
                        d_beta[k][j] = -gb;
                    }
                    NeuronState::SplitInactive => d_beta[k][j] = gb,
                    NeuronState::Unstable => {
                        let (l, u) = (self.bounds.lower[k][j], self.bounds.upper[k][j]);
                        if coef[j] >= 0.0 {
                            c_bar[j] = gb * alpha[k][j];
                            d_alpha[k][j] = gb * coef[j];
                        } else {
                            let s = u / (u - l);
                            c_bar[j] = gb * s - s * l;
                        }
                    }
                }
            }
            up = c_bar;
        }
        (up, d_alpha, d_beta)
    }
}

/// CROWN lower bound of `cᵀ NN(x)` with lower-line slopes `alpha`.
pub fn crown_lower_bound(
    nn: &DenseNN,
    bounds: &NeuronBounds,
    c: &[f64],
    alpha: &[Array1<f64>],
) -> Result<LinearBound> {
    bounds.validate()?;
    if c.len() != nn.output_dim {
        return Err(Error::Shape(format!(
            "objective has length {}, network has {} outputs",
            c.len(),
            nn.output_dim
        )));
    }
    if alpha.len() != nn.layers.len()
        || alpha.iter().zip(&nn.layers).any(|(a, l)| a.len() != l.out_dim())
    {
        return Err(Error::Shape("slopes do not match the layer widths".into()));
    }
    if alpha.iter().flatten().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::InvalidArgument("slopes must lie in [0, 1]".into()));
    }
    let splits = Splits::none(nn);
    let zero_beta: Vec<Array1<f64>> = nn.layers.iter().map(|l| Array1::zeros(l.out_dim())).collect();
    let pass = Relaxation::new(nn, bounds, &splits).backward(&Array1::from(c.to_vec()), alpha, &zero_beta);
    Ok(pass.bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn gadget() -> DenseNN {
        let l1 = Layer::new(array![[1.0, 0.0], [1.0, -1.0]], array![0.0, 0.0], vec![false, true]).unwrap();
        let l2 = Layer::affine(array![[1.0, -1.0]], array![0.0]).unwrap();
        DenseNN::new(vec![l1, l2]).unwrap()
    }

    #[test]
    fn normalize_scalar_box() {
        let (ball, map) = normalize(&BoxDomain::new(vec![2.0], vec![6.0]).unwrap()).unwrap();
        assert_eq!(ball.radius, 1.0);
        assert_eq!(map.center, vec![4.0]);
        assert_eq!(map.scale, vec![2.0]);
        assert_eq!(map.denormalize(&[-1.0]), vec![2.0]);
        assert_eq!(map.denormalize(&[1.0]), vec![6.0]);
    }

    #[test]
    fn normalize_unit_box_is_identity() {
        let (_, map) = normalize(&BoxDomain::new(vec![-1.0; 3], vec![1.0; 3]).unwrap()).unwrap();
        assert_eq!(map.center, vec![0.0; 3]);
        assert_eq!(map.scale, vec![1.0; 3]);
    }

    #[test]
    fn normalize_load_box() {
        let (_, map) = normalize(&BoxDomain::new(vec![0.0; 2], vec![0.1; 2]).unwrap()).unwrap();
        assert_eq!(map.center, vec![0.05; 2]);
        assert_eq!(map.scale, vec![0.05; 2]);
    }

    #[test]
    fn degenerate_coordinate_is_folded() {
        let b = BoxDomain::new(vec![0.0, 3.0], vec![2.0, 3.0]).unwrap();
        let (ball, map) = normalize(&b).unwrap();
        assert_eq!(ball.dim(), 1);
        assert_eq!(map.fixed, vec![(1, 3.0)]);
        let nn = gadget();
        let folded = map.compose(&nn).unwrap();
        for t in [-1.0, -0.3, 0.4, 1.0] {
            let x = map.denormalize(&[t]);
            assert_eq!(folded.forward(&[t]).unwrap(), nn.forward(&x).unwrap());
        }
    }

    #[test]
    fn dual_norm_examples() {
        assert_eq!(dual_norm_min(&[3.0, -4.0], 1.0, NormOrder::Inf).unwrap(), -7.0);
        assert_eq!(dual_norm_min(&[0.0, 0.0], 2.0, NormOrder::Inf).unwrap(), 0.0);
        assert!(matches!(
            dual_norm_min(&[1.0], 1.0, NormOrder::P(2.0)),
            Err(Error::UnsupportedNorm(_))
        ));
    }

    #[test]
    fn single_affine_layer_interval_is_exact() {
        let l = Layer::affine(array![[1.0, -2.0], [0.5, 0.5]], array![1.0, -1.0]).unwrap();
        let nn = DenseNN::new(vec![l]).unwrap();
        let nb = interval_propagate(&nn, &NormBall::unit(2)).unwrap();
        assert_eq!(nb.lower[0].to_vec(), vec![-2.0, -2.0]);
        assert_eq!(nb.upper[0].to_vec(), vec![4.0, 0.0]);
    }

    #[test]
    fn gadget_relu_interval() {
        let ball = NormBall::from_box(&BoxDomain::new(vec![0.0; 2], vec![1.0; 2]).unwrap()).unwrap();
        let nb = interval_propagate(&gadget(), &ball).unwrap();
        assert_eq!((nb.lower[0][1], nb.upper[0][1]), (-1.0, 1.0));
    }

    #[test]
    fn stable_inactive_contributes_zero() {
        let l1 = Layer::relu(array![[1.0]], array![-5.0]).unwrap();
        let l2 = Layer::affine(array![[3.0]], array![0.0]).unwrap();
        let nn = DenseNN::new(vec![l1, l2]).unwrap();
        let nb = interval_propagate(&nn, &NormBall::unit(1)).unwrap();
        assert_eq!((nb.lower[1][0], nb.upper[1][0]), (0.0, 0.0));
    }

    #[test]
    fn stable_net_bound_is_exact() {
        let l1 = Layer::relu(array![[1.0, 1.0], [1.0, -1.0]], array![3.0, 3.0]).unwrap();
        let l2 = Layer::affine(array![[1.0, 2.0]], array![0.0]).unwrap();
        let nn = DenseNN::new(vec![l1, l2]).unwrap();
        let ball = NormBall::unit(2);
        let nb = interval_propagate(&nn, &ball).unwrap();
        let lb = crown_lower_bound(&nn, &nb, &[1.0], &nb.default_alpha()).unwrap();
        // 3x + (−1)y + 9 over the unit box
        assert!((lb.concretize(&ball).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn crossed_bounds_rejected() {
        let nn = gadget();
        let mut nb = interval_propagate(&nn, &NormBall::unit(2)).unwrap();
        nb.lower[0][1] = 3.0;
        assert!(matches!(
            crown_lower_bound(&nn, &nb, &[1.0], &nb.default_alpha()),
            Err(Error::InconsistentBounds(_))
        ));
    }

    #[test]
    fn split_contradiction_is_empty() {
        let l1 = Layer::relu(array![[1.0]], array![5.0]).unwrap();
        let nn = DenseNN::new(vec![l1]).unwrap();
        let b = BoxDomain::new(vec![-1.0], vec![1.0]).unwrap();
        let s = Splits::none(&nn).with(0, 0, Phase::Inactive);
        assert!(interval_propagate_box(&nn, &b, &s).is_none());
    }
}
