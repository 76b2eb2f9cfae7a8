//! Random small verification instances for cross-checking against the
//! exact oracle.
//!
//! Every instance is feasible by construction: all rows are generated to
//! hold at a reference point, with binary-linked rows switched off by a
//! big-M term when their binary is zero there.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::dualopt::{ConstrainedProblem, SystemBuilder};
use crate::error::Result;
use crate::minenc::{big_m, AffineExpr};
use crate::netmodel::{DenseNN, Layer};
use crate::relax::{interval_propagate_box, BoxDomain, NormBall, Splits};

use super::{BinaryGroup, Metric, VerificationProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceShape {
    pub inputs: usize,
    /// Widths of the ReLU layers.
    pub hidden: Vec<usize>,
    pub outputs: usize,
    pub continuous: usize,
    pub binaries: usize,
    pub eq_rows: usize,
    pub ineq_rows: usize,
}

impl InstanceShape {
    /// At most 8 ReLUs and 6 binaries.
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        let hidden = match rng.gen_range(0..3) {
            0 => vec![rng.gen_range(2..=8)],
            1 => vec![rng.gen_range(2..=4), rng.gen_range(2..=4)],
            _ => vec![rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=2)],
        };
        let constrained = rng.gen_bool(0.75);
        let continuous = if constrained { rng.gen_range(0..=2) } else { 0 };
        Self {
            inputs: rng.gen_range(1..=3),
            hidden,
            outputs: rng.gen_range(1..=3),
            continuous,
            binaries: if constrained { rng.gen_range(0..=6) } else { 0 },
            eq_rows: if constrained && continuous > 0 { rng.gen_range(0..=continuous) } else { 0 },
            ineq_rows: if constrained { rng.gen_range(0..=2) } else { 0 },
        }
    }
}

fn uniform_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-scale..=scale))
}

/// A random network with the shape's ReLU layers and an affine output.
pub fn random_network<R: Rng>(rng: &mut R, inputs: usize, hidden: &[usize], outputs: usize) -> DenseNN {
    let mut layers = Vec::new();
    let mut prev = inputs;
    for &w in hidden {
        layers.push(Layer {
            weight: uniform_matrix(rng, w, prev, 1.0),
            bias: Array1::from_shape_fn(w, |_| rng.gen_range(-0.5..=0.5)),
            mask: vec![true; w],
        });
        prev = w;
    }
    layers.push(Layer {
        weight: uniform_matrix(rng, outputs, prev, 1.0),
        bias: Array1::from_shape_fn(outputs, |_| rng.gen_range(-0.5..=0.5)),
        mask: vec![false; outputs],
    });
    DenseNN::new(layers).expect("shapes chain by construction")
}

/// A feasible instance of the given shape.
pub fn random_instance<R: Rng>(rng: &mut R, shape: &InstanceShape) -> Result<VerificationProblem> {
    let nn = random_network(rng, shape.inputs, &shape.hidden, shape.outputs);
    let (nx, ny, nc, nb) = (shape.inputs, shape.outputs, shape.continuous, shape.binaries);
    let nz = nc + nb;

    let lower: Vec<f64> = (0..nx).map(|_| rng.gen_range(-1.0..=0.0)).collect();
    let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.2..=2.0)).collect();
    let input = BoxDomain::new(lower, upper)?;
    let x0: Vec<f64> = (0..nx).map(|i| rng.gen_range(input.lower[i]..=input.upper[i])).collect();
    let y0 = nn.forward(&x0)?;

    let mut z0 = vec![0.0; nz];
    let mut zlo = vec![0.0; nz];
    let mut zhi = vec![1.0; nz];
    for i in 0..nc {
        z0[i] = rng.gen_range(-1.0..=1.0);
        zlo[i] = z0[i] - rng.gen_range(0.5..=1.5);
        zhi[i] = z0[i] + rng.gen_range(0.5..=1.5);
    }
    // either "at most one off" or "at most k on"
    let at_least = rng.gen_bool(0.5);
    let (min_on, max_on) = if at_least {
        (nb.saturating_sub(1), nb)
    } else {
        (0, rng.gen_range(0..=nb))
    };
    let on: Vec<bool> = if at_least {
        vec![true; nb]
    } else {
        let mut v = vec![false; nb];
        for flag in v.iter_mut().take(max_on) {
            *flag = rng.gen_bool(0.5);
        }
        v
    };
    for (k, &b) in on.iter().enumerate() {
        z0[nc + k] = if b { 1.0 } else { 0.0 };
    }
    let z_box = BoxDomain::new(zlo, zhi)?;

    let ybox = {
        let nb_ = interval_propagate_box(&nn, &input, &Splits::none(&nn)).expect("non-empty box");
        let (l, u) = nb_.output_interval(&nn);
        (l.to_vec(), u.to_vec())
    };
    // variables of an affine row in (y, x, z) order, for interval bounds
    let var_lo: Vec<f64> = ybox.0.iter().chain(&input.lower).chain(&z_box.lower).copied().collect();
    let var_hi: Vec<f64> = ybox.1.iter().chain(&input.upper).chain(&z_box.upper).copied().collect();
    let point: Vec<f64> = y0.iter().chain(&x0).chain(&z0).copied().collect();

    let random_row = |rng: &mut R, z_cols: usize| -> Vec<(usize, f64)> {
        let mut row = Vec::new();
        for j in 0..ny + nx + z_cols {
            if rng.gen_bool(0.6) {
                row.push((j, rng.gen_range(-1.0..=1.0)));
            }
        }
        row
    };
    let split = |row: &[(usize, f64)]| {
        let (mut y, mut x, mut z) = (Vec::new(), Vec::new(), Vec::new());
        for &(j, c) in row {
            if j < ny {
                y.push((j, c));
            } else if j < ny + nx {
                x.push((j - ny, c));
            } else {
                z.push((j - ny - nx, c));
            }
        }
        (y, x, z)
    };

    let mut eq = SystemBuilder::new(ny, nx, nz);
    for r in 0..shape.eq_rows {
        let mut row = random_row(rng, nc);
        // each equality pins down a distinct continuous variable
        row.retain(|&(j, _)| j != ny + nx + r);
        row.push((ny + nx + r, if rng.gen_bool(0.5) { 1.0 } else { -1.0 }));
        let rhs = AffineExpr::new(row.clone(), 0.0).eval(&point);
        let (y, x, z) = split(&row);
        eq.row(y, x, z, rhs);
    }
    let mut ineq = SystemBuilder::new(ny, nx, nz);
    for _ in 0..shape.ineq_rows {
        let row = random_row(rng, nc);
        let rhs = AffineExpr::new(row.clone(), 0.0).eval(&point) + rng.gen_range(0.0..=0.5);
        let (y, x, z) = split(&row);
        ineq.row(y, x, z, rhs);
    }
    for k in 0..nb {
        // g ≤ h + M (1 − b)
        let row = random_row(rng, nc);
        let expr = AffineExpr::new(row.clone(), 0.0);
        let g0 = expr.eval(&point);
        let h = if on[k] {
            g0 + rng.gen_range(0.0..=0.3)
        } else {
            g0 - rng.gen_range(0.0..=0.3)
        };
        let shifted = AffineExpr::new(row.clone(), -h);
        let m = big_m(&[shifted, AffineExpr::new(vec![], 0.0)], &var_lo, &var_hi);
        let (y, x, mut z) = split(&row);
        z.push((nc + k, m));
        ineq.row(y, x, z, h + m);
    }
    let groups = if nb > 0 {
        let vars: Vec<usize> = (nc..nz).collect();
        let ones: Vec<(usize, f64)> = vars.iter().map(|&v| (v, 1.0)).collect();
        ineq.row(vec![], vec![], ones.iter().map(|&(v, c)| (v, -c)).collect(), -(min_on as f64));
        ineq.row(vec![], vec![], ones, max_on as f64);
        vec![BinaryGroup {
            name: "b".into(),
            vars,
            min_on,
            max_on,
            branch_first: at_least,
        }]
    } else {
        Vec::new()
    };

    let objective_y = Array1::from_shape_fn(ny, |_| rng.gen_range(-1.0..=1.0));
    let objective_z = Array1::from_shape_fn(nz, |_| rng.gen_range(-0.5..=0.5));
    let v0 = objective_y.dot(&Array1::from(y0.clone())) + objective_z.dot(&Array1::from(z0.clone()));
    let offset = -v0 + rng.gen_range(-0.3..=0.6);

    let constrained = ConstrainedProblem {
        ball: NormBall::from_box(&input)?,
        nn,
        aux_inputs: 0,
        objective_y,
        objective_z,
        offset,
        eq: eq.build(),
        ineq: ineq.build(),
        z_box,
    };
    VerificationProblem::new(constrained, groups, Metric::Auxiliary)
}
