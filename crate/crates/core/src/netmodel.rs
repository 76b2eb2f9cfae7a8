//! Dense feed-forward networks with per-neuron activation masks.
//!
//! A [`Layer`] computes `v = W x + b` and then applies `max(v, 0)` to the
//! entries whose mask bit is set; the remaining entries pass through
//! unchanged. An all-false mask is a plain affine layer, an all-true mask a
//! standard ReLU layer. Mixed masks let appended layers carry some of their
//! input forward next to freshly rectified values.

use std::fmt;
use std::path::Path;

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textfmt;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    /// `true` entries pass through the ReLU.
    pub mask: Vec<bool>,
}

impl Layer {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>, mask: Vec<bool>) -> Result<Self> {
        let layer = Self { weight, bias, mask };
        let mut issues = Vec::new();
        layer.check(None, &mut issues);
        if issues.is_empty() {
            Ok(layer)
        } else {
            Err(Error::InvalidNetwork(issues.iter().map(ToString::to_string).collect()))
        }
    }

    pub fn affine(weight: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        let mask = vec![false; weight.nrows()];
        Self::new(weight, bias, mask)
    }

    pub fn relu(weight: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        let mask = vec![true; weight.nrows()];
        Self::new(weight, bias, mask)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            weight: Array2::eye(n),
            bias: Array1::zeros(n),
            mask: vec![false; n],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn relu_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn pre_activation(&self, x: &Array1<f64>) -> Array1<f64> {
        self.weight.dot(x) + &self.bias
    }

    pub fn activate(&self, mut v: Array1<f64>) -> Array1<f64> {
        for (vi, &m) in v.iter_mut().zip(&self.mask) {
            if m && *vi < 0.0 {
                *vi = 0.0;
            }
        }
        v
    }

    fn check(&self, index: Option<usize>, out: &mut Vec<Violation>) {
        let rows = self.weight.nrows();
        if self.bias.len() != rows {
            out.push(Violation::new(
                index,
                format!("bias length {} != weight rows {rows}", self.bias.len()),
            ));
        }
        if self.mask.len() != rows {
            out.push(Violation::new(
                index,
                format!("mask length {} != weight rows {rows}", self.mask.len()),
            ));
        }
        if rows == 0 || self.weight.ncols() == 0 {
            out.push(Violation::new(index, "empty weight matrix".to_string()));
        }
        if self.weight.iter().chain(self.bias.iter()).any(|v| !v.is_finite()) {
            out.push(Violation::new(index, "non-finite weight or bias".to_string()));
        }
    }
}

/// One failed structural check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub layer: Option<usize>,
    pub message: String,
}

impl Violation {
    fn new(layer: Option<usize>, message: String) -> Self {
        Self { layer, message }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.layer {
            Some(i) => write!(f, "layer {i}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNN {
    pub input_dim: usize,
    pub output_dim: usize,
    pub layers: Vec<Layer>,
}

impl DenseNN {
    /// Builds a network and checks every structural invariant.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let input_dim = layers.first().map_or(0, Layer::in_dim);
        let output_dim = layers.last().map_or(0, Layer::out_dim);
        let nn = Self {
            input_dim,
            output_dim,
            layers,
        };
        nn.ensure_valid()?;
        Ok(nn)
    }

    /// A single unmasked identity layer.
    pub fn identity(n: usize) -> Self {
        Self {
            input_dim: n,
            output_dim: n,
            layers: vec![Layer::identity(n)],
        }
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        if self.layers.is_empty() {
            out.push(Violation::new(None, "network has no layers".to_string()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.check(Some(i), &mut out);
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            if a.out_dim() != b.in_dim() {
                out.push(Violation::new(
                    Some(i + 1),
                    format!(
                        "input width {} does not chain with previous output width {}",
                        b.in_dim(),
                        a.out_dim()
                    ),
                ));
            }
        }
        if let Some(first) = self.layers.first() {
            if first.in_dim() != self.input_dim {
                out.push(Violation::new(
                    None,
                    format!(
                        "input_dim {} != first layer input width {}",
                        self.input_dim,
                        first.in_dim()
                    ),
                ));
            }
        }
        if let Some(last) = self.layers.last() {
            if last.out_dim() != self.output_dim {
                out.push(Violation::new(
                    None,
                    format!(
                        "output_dim {} != last layer output width {}",
                        self.output_dim,
                        last.out_dim()
                    ),
                ));
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        self.validate()
            .map_err(|v| Error::InvalidNetwork(v.iter().map(ToString::to_string).collect()))
    }

    pub fn relu_count(&self) -> usize {
        self.layers.iter().map(Layer::relu_count).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim
            )));
        }
        let mut h = Array1::from(x.to_vec());
        for layer in &self.layers {
            h = layer.activate(layer.pre_activation(&h));
        }
        Ok(h.to_vec())
    }

    /// Pre-activations of every layer at `x`.
    pub fn pre_activations(&self, x: &[f64]) -> Result<Vec<Array1<f64>>> {
        if x.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim
            )));
        }
        let mut h = Array1::from(x.to_vec());
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let z = layer.pre_activation(&h);
            h = layer.activate(z.clone());
            out.push(z);
        }
        Ok(out)
    }

    /// `∇_x wᵀ NN(x)`, taking the zero branch at kinks.
    pub fn input_gradient(&self, x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.output_dim {
            return Err(Error::Shape(format!(
                "output weights have length {}, network has {} outputs",
                w.len(),
                self.output_dim
            )));
        }
        let pre = self.pre_activations(x)?;
        let mut g = Array1::from(w.to_vec());
        for (layer, v) in self.layers.iter().zip(&pre).rev() {
            for j in 0..layer.out_dim() {
                if layer.mask[j] && v[j] <= 0.0 {
                    g[j] = 0.0;
                }
            }
            g = layer.weight.t().dot(&g);
        }
        Ok(g.to_vec())
    }

    /// Sequential composition: `other(self(x))`.
    pub fn then(&self, other: &DenseNN) -> Result<DenseNN> {
        if self.output_dim != other.input_dim {
            return Err(Error::Shape(format!(
                "cannot feed {} outputs into a network with {} inputs",
                self.output_dim, other.input_dim
            )));
        }
        let mut layers = self.layers.clone();
        layers.extend(other.layers.iter().cloned());
        DenseNN::new(layers)
    }

    /// Side-by-side network over concatenated inputs producing concatenated
    /// outputs. The shallower network is padded with identity layers.
    pub fn parallel(&self, other: &DenseNN) -> DenseNN {
        let depth = self.layers.len().max(other.layers.len());
        let mut layers = Vec::with_capacity(depth);
        for k in 0..depth {
            let a = self
                .layers
                .get(k)
                .cloned()
                .unwrap_or_else(|| Layer::identity(self.output_dim));
            let b = other
                .layers
                .get(k)
                .cloned()
                .unwrap_or_else(|| Layer::identity(other.output_dim));
            let (ra, ca) = a.weight.dim();
            let (rb, cb) = b.weight.dim();
            let mut w = Array2::zeros((ra + rb, ca + cb));
            w.slice_mut(s![..ra, ..ca]).assign(&a.weight);
            w.slice_mut(s![ra.., ca..]).assign(&b.weight);
            let bias = ndarray::concatenate![ndarray::Axis(0), a.bias, b.bias];
            let mut mask = a.mask.clone();
            mask.extend(&b.mask);
            layers.push(Layer {
                weight: w,
                bias,
                mask,
            });
        }
        DenseNN {
            input_dim: self.input_dim + other.input_dim,
            output_dim: self.output_dim + other.output_dim,
            layers,
        }
    }

    /// Rewrites every mixed-mask layer into fully masked and fully unmasked
    /// layers using `v = σ(v) − σ(−v)` for the pass-through entries.
    pub fn to_standard_relu(&self) -> DenseNN {
        let mut layers: Vec<Layer> = Vec::new();
        let mut pending: Option<(Array2<f64>, Array1<f64>)> = None;
        for layer in &self.layers {
            // fold a pending affine recombination into this layer
            let (w, b) = match pending.take() {
                Some((pw, pb)) => (layer.weight.dot(&pw), layer.weight.dot(&pb) + &layer.bias),
                None => (layer.weight.clone(), layer.bias.clone()),
            };
            let relu = layer.relu_count();
            if relu == 0 || relu == layer.out_dim() {
                layers.push(Layer {
                    weight: w,
                    bias: b,
                    mask: layer.mask.clone(),
                });
                continue;
            }
            // rows: masked entries once, pass-through entries as +v and −v
            let out = layer.out_dim();
            let pass: Vec<usize> = (0..out).filter(|&i| !layer.mask[i]).collect();
            let width = relu + 2 * pass.len();
            let mut wide_w = Array2::zeros((width, w.ncols()));
            let mut wide_b = Array1::zeros(width);
            let mut recombine = Array2::zeros((out, width));
            let mut row = 0;
            for i in 0..out {
                if layer.mask[i] {
                    wide_w.row_mut(row).assign(&w.row(i));
                    wide_b[row] = b[i];
                    recombine[[i, row]] = 1.0;
                    row += 1;
                } else {
                    wide_w.row_mut(row).assign(&w.row(i));
                    wide_b[row] = b[i];
                    wide_w.row_mut(row + 1).assign(&(-&w.row(i)));
                    wide_b[row + 1] = -b[i];
                    recombine[[i, row]] = 1.0;
                    recombine[[i, row + 1]] = -1.0;
                    row += 2;
                }
            }
            layers.push(Layer {
                weight: wide_w,
                bias: wide_b,
                mask: vec![true; width],
            });
            pending = Some((recombine, Array1::zeros(out)));
        }
        if let Some((w, b)) = pending {
            layers.push(Layer {
                mask: vec![false; w.nrows()],
                weight: w,
                bias: b,
            });
        }
        DenseNN {
            input_dim: self.input_dim,
            output_dim: self.output_dim,
            layers,
        }
    }

    /// Upper bound on the ∞-norm Lipschitz constant (product of max row sums).
    pub fn lipschitz_bound_inf(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| {
                l.weight
                    .rows()
                    .into_iter()
                    .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .product()
    }

    pub fn to_text(&self) -> Result<String> {
        self.ensure_valid()?;
        Ok(textfmt::to_text(&ModelFile::from(self)))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| textfmt::parse_error(&e))?;
        file.into_network()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()?).map_err(|e| Error::write(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    input_dim: usize,
    output_dim: usize,
    layers: Vec<LayerRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    rows: usize,
    cols: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
    mask: Vec<u8>,
}

impl From<&DenseNN> for ModelFile {
    fn from(nn: &DenseNN) -> Self {
        Self {
            version: MODEL_FORMAT_VERSION,
            input_dim: nn.input_dim,
            output_dim: nn.output_dim,
            layers: nn
                .layers
                .iter()
                .map(|l| LayerRecord {
                    rows: l.out_dim(),
                    cols: l.in_dim(),
                    weight: l.weight.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                    mask: l.mask.iter().map(|&m| u8::from(m)).collect(),
                })
                .collect(),
        }
    }
}

impl ModelFile {
    fn into_network(self) -> Result<DenseNN> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, rec) in self.layers.into_iter().enumerate() {
            let field_err = |field: &str, message: String| Error::Parse {
                location: format!("layers[{i}].{field}"),
                message,
            };
            if rec.weight.len() != rec.rows * rec.cols {
                return Err(field_err(
                    "weight",
                    format!("expected {}×{} entries, found {}", rec.rows, rec.cols, rec.weight.len()),
                ));
            }
            if let Some(bad) = rec.mask.iter().find(|&&m| m > 1) {
                return Err(field_err("mask", format!("entries must be 0 or 1, found {bad}")));
            }
            let weight = Array2::from_shape_vec((rec.rows, rec.cols), rec.weight)
                .map_err(|e| field_err("weight", e.to_string()))?;
            layers.push(Layer {
                weight,
                bias: Array1::from(rec.bias),
                mask: rec.mask.into_iter().map(|m| m == 1).collect(),
            });
        }
        let nn = DenseNN {
            input_dim: self.input_dim,
            output_dim: self.output_dim,
            layers,
        };
        nn.ensure_valid()?;
        Ok(nn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// min(x, y) = x − σ(x − y)
    fn min_gadget() -> DenseNN {
        let l1 = Layer::new(
            array![[1.0, 0.0], [1.0, -1.0]],
            array![0.0, 0.0],
            vec![false, true],
        )
        .unwrap();
        let l2 = Layer::affine(array![[1.0, -1.0]], array![0.0]).unwrap();
        DenseNN::new(vec![l1, l2]).unwrap()
    }

    #[test]
    fn identity_forward() {
        let nn = DenseNN::identity(2);
        assert_eq!(nn.forward(&[-2.0, 3.0]).unwrap(), vec![-2.0, 3.0]);
    }

    #[test]
    fn relu_clips_negative() {
        let nn = DenseNN::new(vec![Layer::relu(array![[1.0]], array![0.0]).unwrap()]).unwrap();
        assert_eq!(nn.forward(&[-5.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn min_gadget_computes_min() {
        let nn = min_gadget();
        assert_eq!(nn.forward(&[2.0, 5.0]).unwrap(), vec![2.0]);
        assert_eq!(nn.forward(&[7.0, 4.0]).unwrap(), vec![4.0]);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        assert!(matches!(min_gadget().forward(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn validate_accepts_well_formed() {
        assert!(min_gadget().validate().is_ok());
    }

    #[test]
    fn validate_reports_chaining() {
        let l1 = Layer::affine(Array2::ones((3, 2)), Array1::zeros(3)).unwrap();
        let l2 = Layer::affine(Array2::ones((4, 4)), Array1::zeros(4)).unwrap();
        let nn = DenseNN {
            input_dim: 2,
            output_dim: 4,
            layers: vec![l1, l2],
        };
        let v = nn.validate().unwrap_err();
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].layer, Some(1));
    }

    #[test]
    fn validate_reports_bias_length() {
        let bad = Layer {
            weight: Array2::ones((2, 2)),
            bias: Array1::zeros(3),
            mask: vec![false; 2],
        };
        let nn = DenseNN {
            input_dim: 2,
            output_dim: 2,
            layers: vec![bad],
        };
        let v = nn.validate().unwrap_err();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].message.contains("bias"));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut nn = min_gadget();
        nn.layers[0].weight[[0, 1]] = 0.1 + 0.2;
        nn.layers[1].bias[0] = -1.0 / 3.0;
        let back = DenseNN::from_text(&nn.to_text().unwrap()).unwrap();
        assert_eq!(back, nn);
    }

    #[test]
    fn unknown_field_is_named() {
        let text = min_gadget().to_text().unwrap().replacen("\"rows\"", "\"depth\": 1,\n\"rows\"", 1);
        match DenseNN::from_text(&text) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("depth"), "{message}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_fails() {
        let text = min_gadget().to_text().unwrap();
        let cut = &text[..text.len() / 2];
        assert!(matches!(DenseNN::from_text(cut), Err(Error::Parse { .. })));
    }

    #[test]
    fn version_mismatch() {
        let text = min_gadget().to_text().unwrap().replacen("\"version\": 1", "\"version\": 7", 1);
        assert!(matches!(
            DenseNN::from_text(&text),
            Err(Error::Version { found: 7, .. })
        ));
    }

    #[test]
    fn standard_relu_form_matches() {
        let nn = min_gadget();
        let std = nn.to_standard_relu();
        for layer in &std.layers {
            let r = layer.relu_count();
            assert!(r == 0 || r == layer.out_dim());
        }
        for &(x, y) in &[(2.0, 5.0), (7.0, 4.0), (-1.0, -3.0)] {
            assert_eq!(nn.forward(&[x, y]).unwrap(), std.forward(&[x, y]).unwrap());
        }
    }
}
