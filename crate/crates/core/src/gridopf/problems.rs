//! Verification problems for dispatch networks.
//!
//! Generator limits: `t = min_g (s·p̄_g − p_g)` is appended to the network and
//! minimized over the load box, with no binaries.
//!
//! N-1 flow limits: flows are extra network inputs passed straight through
//! to a two-sided min-encoding, so the network computes the worst flow
//! slack. Angles and line-status binaries are auxiliaries. Power balance is
//! imposed at the non-reference buses; the reference bus absorbs whatever
//! mismatch the network leaves, as a slack bus would. Big-M rows switch the
//! flow law off for an outaged line and pin its flow to zero.
//!
//! The `_milp` builders keep the explicit worst-case binaries instead of the
//! encoding. They describe the same optimum and exist to cross-check it.

use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::Array1;
use tracing::warn;

use crate::dualopt::{tighten_z_box, ConstrainedProblem, SystemBuilder};
use crate::error::{Error, Result};
use crate::minenc::{append_min_encoding, ViolationSpec};
use crate::netmodel::DenseNN;
use crate::relax::{interval_propagate_box, BoxDomain, NormBall, Splits};
use crate::verifier::{BinaryGroup, Metric, VerificationProblem};

use super::GridNetwork;

/// Load domain: `pm25` is ±25% of nominal, `abs:0:0.1` an absolute range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadBox {
    Relative(f64),
    Absolute { low: f64, high: f64 },
}

impl FromStr for LoadBox {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("box spec {s:?}; expected pmNN or abs:LOW:HIGH"));
        if let Some(pct) = s.strip_prefix("pm") {
            let p: f64 = pct.parse().map_err(|_| bad())?;
            if !(p >= 0.0) {
                return Err(bad());
            }
            return Ok(LoadBox::Relative(p / 100.0));
        }
        if let Some(rest) = s.strip_prefix("abs:") {
            let (lo, hi) = rest.split_once(':').ok_or_else(bad)?;
            let low: f64 = lo.parse().map_err(|_| bad())?;
            let high: f64 = hi.parse().map_err(|_| bad())?;
            if !(low <= high) {
                return Err(bad());
            }
            return Ok(LoadBox::Absolute { low, high });
        }
        Err(bad())
    }
}

impl LoadBox {
    pub fn to_box(&self, net: &GridNetwork) -> Result<BoxDomain> {
        let (lower, upper) = match *self {
            LoadBox::Relative(f) => net
                .loads
                .iter()
                .map(|d| {
                    let (a, b) = (d.nominal * (1.0 - f), d.nominal * (1.0 + f));
                    (a.min(b), a.max(b))
                })
                .unzip(),
            LoadBox::Absolute { low, high } => (vec![low; net.num_loads()], vec![high; net.num_loads()]),
        };
        BoxDomain::new(lower, upper)
    }
}

fn check_dims(nn: &DenseNN, net: &GridNetwork, load_box: &BoxDomain) -> Result<()> {
    net.validate()?;
    nn.ensure_valid()?;
    if nn.input_dim != net.num_loads() || load_box.dim() != net.num_loads() {
        return Err(Error::Shape(format!(
            "network takes {} inputs, box has {}, case has {} loads",
            nn.input_dim,
            load_box.dim(),
            net.num_loads()
        )));
    }
    if nn.output_dim != net.num_generators() {
        return Err(Error::Shape(format!(
            "network has {} outputs, case has {} generators",
            nn.output_dim,
            net.num_generators()
        )));
    }
    Ok(())
}

fn pad(v: f64, up: bool) -> f64 {
    let d = 1e-9 * (1.0 + v.abs());
    if up {
        v + d
    } else {
        v - d
    }
}

/// Boxes on angles and flows valid in every scenario, from interval bounds
/// on the injections at the non-reference buses.
pub fn flow_box(nn: &DenseNN, net: &GridNetwork, load_box: &BoxDomain) -> Result<(BoxDomain, BoxDomain)> {
    check_dims(nn, net, load_box)?;
    let bounds = interval_propagate_box(nn, load_box, &Splits::none(nn))
        .ok_or_else(|| Error::Infeasible("empty load box".into()))?;
    let (glo, ghi) = bounds.output_interval(nn);
    let keep = net.non_reference_buses();
    let (mut slo, mut shi) = (vec![0.0; keep.len()], vec![0.0; keep.len()]);
    for (r, &i) in keep.iter().enumerate() {
        for (g, gen) in net.generators.iter().enumerate() {
            if gen.bus == i {
                slo[r] += glo[g];
                shi[r] += ghi[g];
            }
        }
        for (d, load) in net.loads.iter().enumerate() {
            if load.bus == i {
                slo[r] -= load_box.upper[d];
                shi[r] -= load_box.lower[d];
            }
        }
    }
    let (n, m) = (net.buses, net.num_lines());
    let mut th = BoxDomain {
        lower: vec![0.0; n],
        upper: vec![0.0; n],
    };
    let mut pf = BoxDomain {
        lower: vec![0.0; m],
        upper: vec![0.0; m],
    };
    let widen = |b: &mut BoxDomain, mat: &DMatrix<f64>| {
        for i in 0..mat.nrows() {
            let terms: Vec<(f64, f64, f64)> = (0..slo.len()).map(|j| (mat[(i, j)], slo[j], shi[j])).collect();
            let (a, c) = range(&terms);
            b.lower[i] = b.lower[i].min(pad(a, false));
            b.upper[i] = b.upper[i].max(pad(c, true));
        }
    };
    for out in std::iter::once(None).chain((0..m).map(Some)) {
        if let Some((theta, flows)) = net.sensitivities(out) {
            widen(&mut th, &theta);
            widen(&mut pf, &flows);
        }
    }
    th.lower[net.reference_bus] = 0.0;
    th.upper[net.reference_bus] = 0.0;
    Ok((th, pf))
}

/// Generator-limit problem on the min-encoded network.
pub fn build_problem1(
    nn: &DenseNN,
    net: &GridNetwork,
    load_box: &BoxDomain,
    gen_limit_scale: f64,
) -> Result<VerificationProblem> {
    check_dims(nn, net, load_box)?;
    let upper: Vec<f64> = net.generators.iter().map(|g| gen_limit_scale * g.p_max).collect();
    let encoded = append_min_encoding(nn, &ViolationSpec::upper(upper))?;
    let c = ConstrainedProblem::unconstrained(encoded, NormBall::from_box(load_box)?, vec![1.0])?;
    VerificationProblem::new(c, vec![], Metric::NetworkOutput)
}

/// Range of a sum of `(coef, lo, hi)` terms.
fn range(terms: &[(f64, f64, f64)]) -> (f64, f64) {
    terms.iter().fold((0.0, 0.0), |(a, b), &(c, lo, hi)| {
        if c >= 0.0 {
            (a + c * lo, b + c * hi)
        } else {
            (a + c * hi, b + c * lo)
        }
    })
}

/// `2 · spread + 1` over the expression's range and zero.
fn big_m_of(lo: f64, hi: f64) -> f64 {
    2.0 * (hi.max(0.0) - lo.min(0.0)) + 1.0
}

/// Generator-limit problem with explicit worst-case binaries.
pub fn build_problem1_milp(
    nn: &DenseNN,
    net: &GridNetwork,
    load_box: &BoxDomain,
    gen_limit_scale: f64,
) -> Result<VerificationProblem> {
    check_dims(nn, net, load_box)?;
    let ng = net.num_generators();
    let bounds = interval_propagate_box(nn, load_box, &Splits::none(nn))
        .ok_or_else(|| Error::Infeasible("empty load box".into()))?;
    let (ylo, yhi) = bounds.output_interval(nn);
    let limits: Vec<f64> = net.generators.iter().map(|g| gen_limit_scale * g.p_max).collect();
    let tlo = (0..ng).map(|g| limits[g] - yhi[g]).fold(f64::INFINITY, f64::min);
    let thi = (0..ng).map(|g| limits[g] - ylo[g]).fold(f64::NEG_INFINITY, f64::max);
    let big_m = 2.0 * (thi - tlo) + 1.0;
    let with_binaries = ng > 1;
    let nz = 1 + if with_binaries { ng } else { 0 };

    let mut ineq = SystemBuilder::new(ng, nn.input_dim, nz);
    for g in 0..ng {
        // s·p̄_g − y_g − t − M b_g ≤ 0
        let mut z = vec![(0, -1.0)];
        if with_binaries {
            z.push((1 + g, -big_m));
        }
        ineq.row(vec![(g, -1.0)], vec![], z, -limits[g]);
    }
    let mut eq = SystemBuilder::new(ng, nn.input_dim, nz);
    let mut groups = Vec::new();
    let mut zlo = vec![tlo];
    let mut zhi = vec![thi];
    if with_binaries {
        eq.row(vec![], vec![], (1..=ng).map(|v| (v, 1.0)).collect(), (ng - 1) as f64);
        groups.push(BinaryGroup {
            name: "worst".into(),
            vars: (1..=ng).collect(),
            min_on: ng - 1,
            max_on: ng - 1,
            branch_first: false,
        });
        zlo.extend(vec![0.0; ng]);
        zhi.extend(vec![1.0; ng]);
    }
    let mut objective_z = Array1::zeros(nz);
    objective_z[0] = 1.0;
    let c = ConstrainedProblem {
        nn: nn.clone(),
        ball: NormBall::from_box(load_box)?,
        aux_inputs: 0,
        objective_y: Array1::zeros(ng),
        objective_z,
        offset: 0.0,
        eq: eq.build(),
        ineq: ineq.build(),
        z_box: BoxDomain::new(zlo, zhi)?,
    };
    VerificationProblem::new(c, groups, Metric::Auxiliary)
}

/// Shared N-1 structure: balance rows, flow links and the line-status
/// group. `z` starts with `θ` then `b^on`; `y_gen` maps generator `g` to its
/// output index and `x` holds loads then flows.
struct N1Rows {
    eq: SystemBuilder,
    ineq: SystemBuilder,
    zlo: Vec<f64>,
    zhi: Vec<f64>,
    group: BinaryGroup,
}

fn n1_rows(net: &GridNetwork, ny: usize, nz: usize, th: &BoxDomain, pf: &BoxDomain) -> N1Rows {
    let (n, m, nl) = (net.buses, net.num_lines(), net.num_loads());
    let nx = nl + m;
    let bvar = |l: usize| n + l;
    let mut eq = SystemBuilder::new(ny, nx, nz);
    for i in net.non_reference_buses() {
        let y: Vec<(usize, f64)> = net
            .generators
            .iter()
            .enumerate()
            .filter(|(_, g)| g.bus == i)
            .map(|(g, _)| (g, 1.0))
            .collect();
        let mut x: Vec<(usize, f64)> = net
            .loads
            .iter()
            .enumerate()
            .filter(|(_, d)| d.bus == i)
            .map(|(d, _)| (d, -1.0))
            .collect();
        for (l, line) in net.lines.iter().enumerate() {
            if line.from == i {
                x.push((nl + l, -1.0));
            } else if line.to == i {
                x.push((nl + l, 1.0));
            }
        }
        eq.row(y, x, vec![], 0.0);
    }

    let mut ineq = SystemBuilder::new(ny, nx, nz);
    let mut zlo = th.lower.clone();
    let mut zhi = th.upper.clone();
    let bridges = net.bridges();
    for (l, line) in net.lines.iter().enumerate() {
        let y = line.susceptance;
        let (f, t) = (line.from, line.to);
        // p_f − Y(θ_f − θ_t)
        let (lo, hi) = range(&[
            (1.0, pf.lower[l], pf.upper[l]),
            (-y, th.lower[f], th.upper[f]),
            (y, th.lower[t], th.upper[t]),
        ]);
        let m_link = big_m_of(lo, hi);
        let m_flow = big_m_of(pf.lower[l], pf.upper[l]);
        for sgn in [1.0, -1.0] {
            ineq.row(
                vec![],
                vec![(nl + l, sgn)],
                vec![(f, -sgn * y), (t, sgn * y), (bvar(l), m_link)],
                m_link,
            );
            ineq.row(vec![], vec![(nl + l, sgn)], vec![(bvar(l), -m_flow)], 0.0);
        }
        if bridges.contains(&l) {
            warn!(line = l, "outage disconnects the network; line kept in service");
            zlo.push(1.0);
        } else {
            zlo.push(0.0);
        }
        zhi.push(1.0);
    }
    ineq.row(vec![], vec![], (0..m).map(|l| (bvar(l), -1.0)).collect(), -((m - 1) as f64));
    N1Rows {
        eq,
        ineq,
        zlo,
        zhi,
        group: BinaryGroup {
            name: "line_on".into(),
            vars: (0..m).map(bvar).collect(),
            min_on: m.saturating_sub(1),
            max_on: m,
            branch_first: true,
        },
    }
}

/// Tightens `z_box` and snaps binary bounds to `{0, 1}`.
fn finish(mut c: ConstrainedProblem, groups: Vec<BinaryGroup>, metric: Metric) -> Result<VerificationProblem> {
    c.z_box = tighten_z_box(&c)?;
    for g in &groups {
        for &v in &g.vars {
            c.z_box.lower[v] = if c.z_box.lower[v] > 1e-9 { 1.0 } else { 0.0 };
            c.z_box.upper[v] = if c.z_box.upper[v] < 1.0 - 1e-9 { 0.0 } else { 1.0 };
        }
    }
    VerificationProblem::new(c, groups, metric)
}

/// N-1 flow-limit problem on the min-encoded network.
pub fn build_problem2(
    nn: &DenseNN,
    net: &GridNetwork,
    load_box: &BoxDomain,
    flow_scale: f64,
) -> Result<VerificationProblem> {
    let (th, pf) = flow_box(nn, net, load_box)?;
    let (n, m, ng) = (net.buses, net.num_lines(), net.num_generators());
    let lim: Vec<f64> = net.lines.iter().map(|l| flow_scale * l.flow_limit).collect();
    let neg: Vec<f64> = lim.iter().map(|v| -v).collect();
    let head = DenseNN::identity(ng).parallel(&append_min_encoding(
        &DenseNN::identity(m),
        &ViolationSpec::two_sided(neg, lim),
    )?);
    let full = nn.parallel(&DenseNN::identity(m)).then(&head)?;
    let ny = ng + 1;
    let rows = n1_rows(net, ny, n + m, &th, &pf);

    let mut input = load_box.clone();
    input.lower.extend(&pf.lower);
    input.upper.extend(&pf.upper);
    let mut objective_y = Array1::zeros(ny);
    objective_y[ng] = 1.0;
    let c = ConstrainedProblem {
        nn: full,
        ball: NormBall::from_box(&input)?,
        aux_inputs: m,
        objective_y,
        objective_z: Array1::zeros(n + m),
        offset: 0.0,
        eq: rows.eq.build(),
        ineq: rows.ineq.build(),
        z_box: BoxDomain::new(rows.zlo, rows.zhi)?,
    };
    finish(c, vec![rows.group], Metric::NetworkOutput)
}

/// N-1 flow-limit problem with explicit worst-case binaries `b^u`, `b^l`.
pub fn build_problem2_milp(
    nn: &DenseNN,
    net: &GridNetwork,
    load_box: &BoxDomain,
    flow_scale: f64,
) -> Result<VerificationProblem> {
    let (th, pf) = flow_box(nn, net, load_box)?;
    let (n, m, ng, nl) = (net.buses, net.num_lines(), net.num_generators(), net.num_loads());
    let lim: Vec<f64> = net.lines.iter().map(|l| flow_scale * l.flow_limit).collect();
    // z = (θ, b^on, t, b^u, b^l)
    let t = n + m;
    let bu = |l: usize| t + 1 + l;
    let bl = |l: usize| t + 1 + m + l;
    let nz = t + 1 + 2 * m;
    let ny = ng + m;
    let mut rows = n1_rows(net, ny, nz, &th, &pf);

    let tlo = (0..m).map(|l| lim[l] - pf.upper[l].max(-pf.lower[l])).fold(f64::INFINITY, f64::min);
    let thi = (0..m).map(|l| lim[l] + pf.upper[l].max(-pf.lower[l])).fold(f64::NEG_INFINITY, f64::max);
    let big_m = 2.0 * (thi - tlo) + 1.0;
    for l in 0..m {
        // p̄ − p_f ≤ t + M b^u and p_f − p̲ ≤ t + M b^l
        rows.ineq.row(vec![], vec![(nl + l, -1.0)], vec![(t, -1.0), (bu(l), -big_m)], -lim[l]);
        rows.ineq.row(vec![], vec![(nl + l, 1.0)], vec![(t, -1.0), (bl(l), -big_m)], -lim[l]);
    }
    let worst: Vec<usize> = (0..m).map(bu).chain((0..m).map(bl)).collect();
    rows.eq.row(
        vec![],
        vec![],
        worst.iter().map(|&v| (v, 1.0)).collect(),
        (2 * m - 1) as f64,
    );
    rows.zlo.push(tlo);
    rows.zhi.push(thi);
    rows.zlo.extend(vec![0.0; 2 * m]);
    rows.zhi.extend(vec![1.0; 2 * m]);

    let mut input = load_box.clone();
    input.lower.extend(&pf.lower);
    input.upper.extend(&pf.upper);
    let mut objective_z = Array1::zeros(nz);
    objective_z[t] = 1.0;
    let c = ConstrainedProblem {
        nn: nn.parallel(&DenseNN::identity(m)),
        ball: NormBall::from_box(&input)?,
        aux_inputs: m,
        objective_y: Array1::zeros(ny),
        objective_z,
        offset: 0.0,
        eq: rows.eq.build(),
        ineq: rows.ineq.build(),
        z_box: BoxDomain::new(rows.zlo, rows.zhi)?,
    };
    let groups = vec![
        rows.group,
        BinaryGroup {
            name: "worst".into(),
            vars: worst,
            min_on: 2 * m - 1,
            max_on: 2 * m - 1,
            branch_first: false,
        },
    ];
    finish(c, groups, Metric::Auxiliary)
}
