//! DC power-system model, N-1 secure dispatch data and the two
//! verification problems built on top of a dispatch network.
//!
//! Buses are numbered from 0. Line `l` runs from `from` to `to`; its flow is
//! `Y_l (θ_from − θ_to)` and counts as leaving `from`. Injections are
//! generation minus load, so balance reads `p_g − p_d = Eᵀ p_f`.

mod problems;
mod scopf;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use petgraph::graph::UnGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textfmt;

pub use problems::{
    build_problem1, build_problem1_milp, build_problem2, build_problem2_milp, flow_box, LoadBox,
};
pub use scopf::{check_dispatch, generate_dataset, solve_scopf, Dataset, DatasetHeader, OpfSample};

pub const CASE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Per-unit; must be positive.
    pub susceptance: f64,
    /// Symmetric limit, `|p_f| ≤ flow_limit`.
    pub flow_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Load {
    pub bus: usize,
    pub nominal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridNetwork {
    pub version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
    pub buses: usize,
    pub reference_bus: usize,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
}

/// Ring 0–1–2–3–0 with generators at buses 0 and 1 and loads at 2 and 3.
pub fn builtin_case_4bus() -> GridNetwork {
    let line = |from, to| Line {
        from,
        to,
        susceptance: 10.0,
        flow_limit: 1.0,
    };
    GridNetwork {
        version: CASE_VERSION,
        name: "case4_ring".into(),
        note: "parameters chosen for this crate; not taken from any published system".into(),
        buses: 4,
        reference_bus: 0,
        lines: vec![line(0, 1), line(1, 2), line(2, 3), line(3, 0)],
        generators: vec![
            Generator {
                bus: 0,
                p_min: 0.0,
                p_max: 2.5,
                cost: 1.0,
            },
            Generator {
                bus: 1,
                p_min: 0.0,
                p_max: 2.5,
                cost: 2.0,
            },
        ],
        loads: vec![Load { bus: 2, nominal: 0.4 }, Load { bus: 3, nominal: 0.4 }],
    }
}

impl GridNetwork {
    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn num_loads(&self) -> usize {
        self.loads.len()
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.version != CASE_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: CASE_VERSION,
            });
        }
        if self.buses == 0 || self.reference_bus >= self.buses {
            problems.push(format!("reference bus {} of {} buses", self.reference_bus, self.buses));
        }
        for (l, line) in self.lines.iter().enumerate() {
            if line.from >= self.buses || line.to >= self.buses || line.from == line.to {
                problems.push(format!("line {l} joins buses {} and {}", line.from, line.to));
            }
            if !(line.susceptance > 0.0 && line.susceptance.is_finite()) {
                problems.push(format!("line {l} has susceptance {}", line.susceptance));
            }
            if !(line.flow_limit >= 0.0) {
                problems.push(format!("line {l} has flow limit {}", line.flow_limit));
            }
        }
        for (g, gen) in self.generators.iter().enumerate() {
            if gen.bus >= self.buses || !(gen.p_min <= gen.p_max) || !gen.p_max.is_finite() || !gen.cost.is_finite() {
                problems.push(format!("generator {g} is malformed"));
            }
        }
        for (d, load) in self.loads.iter().enumerate() {
            if load.bus >= self.buses || !load.nominal.is_finite() {
                problems.push(format!("load {d} is malformed"));
            }
        }
        if problems.is_empty() && !self.connected(None) {
            problems.push("network is not connected".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid case {}: {}", self.name, problems.join("; "))))
        }
    }

    /// Whether the graph stays connected with line `out` removed.
    pub fn connected(&self, out: Option<usize>) -> bool {
        let mut g: UnGraph<(), ()> = UnGraph::default();
        let nodes: Vec<_> = (0..self.buses).map(|_| g.add_node(())).collect();
        for (l, line) in self.lines.iter().enumerate() {
            if Some(l) != out {
                g.add_edge(nodes[line.from], nodes[line.to], ());
            }
        }
        petgraph::algo::connected_components(&g) == 1
    }

    /// Lines whose outage splits the network.
    pub fn bridges(&self) -> Vec<usize> {
        (0..self.num_lines()).filter(|&l| !self.connected(Some(l))).collect()
    }

    /// `m × n` incidence matrix.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut e = DMatrix::zeros(self.num_lines(), self.buses);
        for (l, line) in self.lines.iter().enumerate() {
            e[(l, line.from)] = 1.0;
            e[(l, line.to)] = -1.0;
        }
        e
    }

    pub fn non_reference_buses(&self) -> Vec<usize> {
        (0..self.buses).filter(|&i| i != self.reference_bus).collect()
    }

    /// Sensitivities of `(θ, p_f)` to injections at the non-reference buses
    /// with line `out` removed: `θ = Θ s`, `p_f = F s`, both with one column
    /// per non-reference bus. `None` if the outage disconnects the network.
    pub fn sensitivities(&self, out: Option<usize>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        if !self.connected(out) {
            return None;
        }
        let (n, m) = (self.buses, self.num_lines());
        let keep = self.non_reference_buses();
        let mut b = DMatrix::zeros(n, n);
        for (l, line) in self.lines.iter().enumerate() {
            if Some(l) == out {
                continue;
            }
            let y = line.susceptance;
            b[(line.from, line.from)] += y;
            b[(line.to, line.to)] += y;
            b[(line.from, line.to)] -= y;
            b[(line.to, line.from)] -= y;
        }
        let reduced = b.select_rows(&keep).select_columns(&keep);
        let inv = reduced.lu().try_inverse()?;
        let mut theta = DMatrix::zeros(n, keep.len());
        for (r, &i) in keep.iter().enumerate() {
            theta.set_row(i, &inv.row(r));
        }
        let mut flows = DMatrix::zeros(m, keep.len());
        for (l, line) in self.lines.iter().enumerate() {
            if Some(l) == out {
                continue;
            }
            let row = (theta.row(line.from) - theta.row(line.to)) * line.susceptance;
            flows.set_row(l, &row);
        }
        Some((theta, flows))
    }

    /// Net injection `Σ p_g − Σ p_d` at each bus.
    pub fn injections(&self, p_d: &[f64], p_g: &[f64]) -> DVector<f64> {
        let mut s = DVector::zeros(self.buses);
        for (g, &p) in self.generators.iter().zip(p_g) {
            s[g.bus] += p;
        }
        for (d, &p) in self.loads.iter().zip(p_d) {
            s[d.bus] -= p;
        }
        s
    }

    pub fn nominal_loads(&self) -> Vec<f64> {
        self.loads.iter().map(|d| d.nominal).collect()
    }

    pub fn to_text(&self) -> Result<String> {
        self.validate()?;
        Ok(textfmt::to_text(self))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(text).map_err(|e| textfmt::parse_error(&e))?;
        net.validate()?;
        Ok(net)
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

    /// SHA-256 of the canonical text form.
    pub fn hash(&self) -> Result<String> {
        Ok(textfmt::sha256_hex(self.to_text()?.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_case_is_a_ring() {
        let net = builtin_case_4bus();
        net.validate().unwrap();
        let e = net.incidence();
        for l in 0..net.num_lines() {
            assert_eq!(e.row(l).sum(), 0.0);
            assert_eq!(e.row(l).iter().filter(|v| v.abs() == 1.0).count(), 2);
        }
        assert!(net.bridges().is_empty());
    }

    #[test]
    fn text_round_trip() {
        let net = builtin_case_4bus();
        let back = GridNetwork::from_text(&net.to_text().unwrap()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn sensitivities_balance_flows() {
        let net = builtin_case_4bus();
        let e = net.incidence();
        let s = DVector::from_vec(vec![0.3, -0.7, -0.2]);
        for out in [None, Some(0), Some(2)] {
            let (theta, flows) = net.sensitivities(out).unwrap();
            let th = &theta * &s;
            let f = &flows * &s;
            assert_eq!(th[0], 0.0);
            // Eᵀ p_f reproduces the injections at the non-reference buses
            let bal = e.transpose() * &f;
            for (r, &i) in net.non_reference_buses().iter().enumerate() {
                assert!((bal[i] - s[r]).abs() < 1e-12);
            }
            if let Some(l) = out {
                assert_eq!(f[l], 0.0);
            }
        }
    }

    #[test]
    fn radial_line_is_a_bridge() {
        let mut net = builtin_case_4bus();
        net.lines.remove(3);
        assert_eq!(net.bridges(), vec![0, 1, 2]);
        assert!(net.sensitivities(Some(1)).is_none());
    }

    #[test]
    fn rejects_bad_case() {
        let mut net = builtin_case_4bus();
        net.lines[0].susceptance = -1.0;
        assert!(net.validate().is_err());
        let mut net = builtin_case_4bus();
        net.lines.truncate(2);
        assert!(net.validate().is_err());
    }
}
