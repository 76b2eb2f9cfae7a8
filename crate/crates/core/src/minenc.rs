//! Worst-violation metric as appended ReLU layers.
//!
//! For limit terms `t_1..t_n` (each `ȳ_i − y_i` or `y_i − y̲_i`) the encoded
//! network outputs `δ = min_i t_i` exactly. Pairs are reduced with
//! `min(a, b) = a − σ(a − b)`, halving the count every layer, so `n` terms
//! cost `n − 1` ReLUs and `⌈log2 n⌉` extra layers.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::lpcore::LpProblem;
use crate::netmodel::{DenseNN, Layer};

/// Limits on network outputs. Upper terms come first, then lower terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationSpec {
    pub upper: Option<Vec<f64>>,
    pub lower: Option<Vec<f64>>,
}

impl ViolationSpec {
    pub fn upper(upper: Vec<f64>) -> Self {
        Self {
            upper: Some(upper),
            lower: None,
        }
    }

    pub fn two_sided(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self {
            upper: Some(upper),
            lower: Some(lower),
        }
    }

    /// Checks lengths against `dim` and the ordering of the two sides.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.upper.is_none() && self.lower.is_none() {
            return Err(Error::InvalidArgument("violation spec has no limits".into()));
        }
        for side in [&self.upper, &self.lower].into_iter().flatten() {
            if side.len() != dim {
                return Err(Error::Shape(format!(
                    "limit vector has length {}, network has {dim} outputs",
                    side.len()
                )));
            }
            if side.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite limit".into()));
            }
        }
        if let (Some(u), Some(l)) = (&self.upper, &self.lower) {
            if let Some(i) = (0..u.len()).find(|&i| l[i] > u[i]) {
                return Err(Error::InconsistentBounds(format!(
                    "lower limit {} exceeds upper limit {} at output {i}",
                    l[i], u[i]
                )));
            }
        }
        if self.num_terms() == 0 {
            return Err(Error::InvalidArgument("violation spec has no terms".into()));
        }
        Ok(())
    }

    pub fn num_terms(&self) -> usize {
        self.upper.as_ref().map_or(0, Vec::len) + self.lower.as_ref().map_or(0, Vec::len)
    }

    /// Slack of every limit at `y`, in encoding order.
    pub fn terms(&self, y: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_terms());
        if let Some(u) = &self.upper {
            out.extend(u.iter().zip(y).map(|(ui, yi)| ui - yi));
        }
        if let Some(l) = &self.lower {
            out.extend(l.iter().zip(y).map(|(li, yi)| yi - li));
        }
        out
    }

    pub fn worst_violation(&self, y: &[f64]) -> f64 {
        self.terms(y).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// The affine map `y ↦ terms(y)` as `(W, b)`.
    fn term_map(&self, dim: usize) -> (Array2<f64>, Array1<f64>) {
        let n = self.num_terms();
        let mut w = Array2::zeros((n, dim));
        let mut b = Array1::zeros(n);
        let mut row = 0;
        if let Some(u) = &self.upper {
            for (i, &ui) in u.iter().enumerate() {
                w[[row, i]] = -1.0;
                b[row] = ui;
                row += 1;
            }
        }
        if let Some(l) = &self.lower {
            for (i, &li) in l.iter().enumerate() {
                w[[row, i]] = 1.0;
                b[row] = -li;
                row += 1;
            }
        }
        (w, b)
    }
}

/// How terms are paired at each halving step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pairing {
    /// `z_i` with `z_{i+h}`: first half against second half.
    #[default]
    Halves,
    /// `z_{2i}` with `z_{2i+1}`.
    Adjacent,
}

/// Appends the term layer and the pairwise-min reduction to `nn`.
pub fn append_min_encoding(nn: &DenseNN, spec: &ViolationSpec) -> Result<DenseNN> {
    append_min_encoding_with(nn, spec, Pairing::Halves)
}

pub fn append_min_encoding_with(
    nn: &DenseNN,
    spec: &ViolationSpec,
    pairing: Pairing,
) -> Result<DenseNN> {
    nn.ensure_valid()?;
    spec.validate(nn.output_dim)?;
    let (w, b) = spec.term_map(nn.output_dim);
    let mut layers = nn.layers.clone();
    layers.push(Layer::affine(w, b)?);
    layers.extend(min_reduction_layers(spec.num_terms(), pairing));
    DenseNN::new(layers)
}

/// Layers computing `min` of an `n`-vector. Empty when `n == 1`.
pub fn min_reduction_layers(n: usize, pairing: Pairing) -> Vec<Layer> {
    let mut layers = Vec::new();
    if n <= 1 {
        return layers;
    }
    // current values are `pending · (previous layer output)`
    let mut pending: Array2<f64> = Array2::eye(n);
    let mut cur = n;
    while cur > 1 {
        let carry = cur % 2;
        let h = (cur - carry) / 2;
        let (first, second): (Vec<usize>, Vec<usize>) = match pairing {
            Pairing::Halves => ((carry..carry + h).collect(), (carry + h..cur).collect()),
            Pairing::Adjacent => (
                (0..h).map(|i| carry + 2 * i).collect(),
                (0..h).map(|i| carry + 2 * i + 1).collect(),
            ),
        };
        // outputs: [carry?, a_0..a_{h-1}, σ(a_0 − b_0)..σ(a_{h-1} − b_{h-1})]
        let width = carry + 2 * h;
        let mut select = Array2::zeros((width, cur));
        let mut mask = vec![false; width];
        if carry == 1 {
            select[[0, 0]] = 1.0;
        }
        for k in 0..h {
            select[[carry + k, first[k]]] = 1.0;
            select[[carry + h + k, first[k]]] = 1.0;
            select[[carry + h + k, second[k]]] = -1.0;
            mask[carry + h + k] = true;
        }
        layers.push(Layer {
            weight: select.dot(&pending),
            bias: Array1::zeros(width),
            mask,
        });
        let next = carry + h;
        let mut recombine = Array2::zeros((next, width));
        if carry == 1 {
            recombine[[0, 0]] = 1.0;
        }
        for k in 0..h {
            recombine[[carry + k, carry + k]] = 1.0;
            recombine[[carry + k, carry + h + k]] = -1.0;
        }
        pending = recombine;
        cur = next;
    }
    let width = pending.ncols();
    layers.push(Layer {
        weight: pending,
        bias: Array1::zeros(1),
        mask: vec![false; 1],
    });
    debug_assert_eq!(layers.last().map(Layer::in_dim), Some(width));
    layers
}

/// ReLUs introduced when reducing `num_terms` values to their minimum.
pub fn relu_count(num_terms: usize) -> usize {
    let mut n = num_terms;
    let mut count = 0;
    while n > 1 {
        let h = n / 2;
        count += h;
        n -= h;
    }
    count
}

/// `coeffs · v + constant` over LP variables.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn new(coeffs: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { coeffs, constant }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|&(j, c)| c * v[j]).sum::<f64>()
    }

    /// Interval of the expression when each variable lies in `[lo_j, hi_j]`.
    pub fn range(&self, lo: &[f64], hi: &[f64]) -> (f64, f64) {
        let mut a = self.constant;
        let mut b = self.constant;
        for &(j, c) in &self.coeffs {
            if c >= 0.0 {
                a += c * lo[j];
                b += c * hi[j];
            } else {
                a += c * hi[j];
                b += c * lo[j];
            }
        }
        (a, b)
    }
}

/// Variables added by [`milp_min_reformulation`].
#[derive(Debug, Clone, PartialEq)]
pub struct MinReformulation {
    pub t: usize,
    pub binaries: Vec<usize>,
}

/// Adds `t` and binaries `b_i` with `term_i ≤ t + M b_i`, `Σ b_i = n − 1`.
/// Binaries are added with bounds `[0, 1]`; integrality is the caller's job.
pub fn milp_min_reformulation(
    lp: &mut LpProblem,
    terms: &[AffineExpr],
    big_m: f64,
) -> Result<MinReformulation> {
    if !(big_m > 0.0 && big_m.is_finite()) {
        return Err(Error::InvalidArgument(format!("big-M must be positive, got {big_m}")));
    }
    if terms.is_empty() {
        return Err(Error::InvalidArgument("no terms to minimize".into()));
    }
    let t = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
    let mut binaries = Vec::new();
    for term in terms {
        // term − t − M b ≤ 0
        let mut coeffs = term.coeffs.clone();
        coeffs.push((t, -1.0));
        if terms.len() > 1 {
            let b = lp.add_var(0.0, 1.0, 0.0);
            coeffs.push((b, -big_m));
            binaries.push(b);
        }
        lp.add_le(coeffs, -term.constant);
    }
    if !binaries.is_empty() {
        let ones: Vec<_> = binaries.iter().map(|&b| (b, 1.0)).collect();
        lp.add_eq(ones, (terms.len() - 1) as f64);
    }
    Ok(MinReformulation { t, binaries })
}

/// `2 · spread + 1`, where spread is the widest gap between any two term
/// values over the box.
pub fn big_m(terms: &[AffineExpr], lo: &[f64], hi: &[f64]) -> f64 {
    let (mut min_lo, mut max_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in terms {
        let (a, b) = t.range(lo, hi);
        min_lo = min_lo.min(a);
        max_hi = max_hi.max(b);
    }
    2.0 * (max_hi - min_lo).max(0.0) + 1.0
}
