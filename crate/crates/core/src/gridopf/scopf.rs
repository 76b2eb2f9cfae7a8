//! N-1 secure economic dispatch and training-data generation.
//!
//! Security is enforced by scenario replication: one set of angles and
//! flows per scenario (intact network plus every single-line outage), all
//! sharing one dispatch. Outages that would split the network are skipped
//! with a warning.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};
use crate::lpcore::{solve_lp, LpProblem, LpStatus};
use crate::textfmt;

use super::GridNetwork;

pub const DATASET_VERSION: u32 = 1;

/// Slack allowed on flow limits and balance when re-checking a dispatch.
const CHECK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpfSample {
    /// One entry per load.
    pub p_d: Vec<f64>,
    /// One entry per generator.
    pub p_g: Vec<f64>,
}

/// Scenarios of `net`: `None` for the intact network, then each outage
/// that keeps it connected.
fn scenarios(net: &GridNetwork) -> Vec<Option<usize>> {
    let mut out = vec![None];
    for l in 0..net.num_lines() {
        if net.connected(Some(l)) {
            out.push(Some(l));
        } else {
            warn!(line = l, "outage disconnects the network; contingency skipped");
        }
    }
    out
}

/// Adds angle and flow variables for one scenario and returns the flow
/// variable indices. Balance rows get `inj[i]` on the left-hand side.
fn add_scenario(
    lp: &mut LpProblem,
    net: &GridNetwork,
    out: Option<usize>,
    limit_slack: f64,
    all_buses: bool,
    inj: &dyn Fn(usize) -> (Vec<(usize, f64)>, f64),
) -> Vec<usize> {
    let theta: Vec<usize> = (0..net.buses)
        .map(|i| {
            if i == net.reference_bus {
                lp.add_var(0.0, 0.0, 0.0)
            } else {
                lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0)
            }
        })
        .collect();
    let flows: Vec<usize> = net
        .lines
        .iter()
        .enumerate()
        .map(|(l, line)| {
            if Some(l) == out {
                lp.add_var(0.0, 0.0, 0.0)
            } else {
                let lim = line.flow_limit + limit_slack;
                lp.add_var(-lim, lim, 0.0)
            }
        })
        .collect();
    for (l, line) in net.lines.iter().enumerate() {
        if Some(l) == out {
            continue;
        }
        let y = line.susceptance;
        lp.add_eq([(flows[l], 1.0), (theta[line.from], -y), (theta[line.to], y)], 0.0);
    }
    for i in 0..net.buses {
        if !all_buses && i == net.reference_bus {
            continue;
        }
        // injection − Σ_l E_li p_f,l = 0
        let (mut row, rhs) = inj(i);
        for (l, line) in net.lines.iter().enumerate() {
            if line.from == i {
                row.push((flows[l], -1.0));
            } else if line.to == i {
                row.push((flows[l], 1.0));
            }
        }
        lp.add_eq(row, rhs);
    }
    flows
}

/// Cheapest dispatch feasible under every scenario, or `None` if there is
/// none.
pub fn solve_scopf(net: &GridNetwork, p_d: &[f64]) -> Result<Option<OpfSample>> {
    if p_d.len() != net.num_loads() {
        return Err(Error::Shape(format!("{} loads given, case has {}", p_d.len(), net.num_loads())));
    }
    if p_d.iter().any(|&d| !(d >= 0.0)) {
        return Err(Error::InvalidArgument("loads must be non-negative".into()));
    }
    let mut lp = LpProblem::new(0);
    let gens: Vec<usize> = net
        .generators
        .iter()
        .map(|g| lp.add_var(g.p_min, g.p_max, g.cost))
        .collect();
    let inj = |i: usize| {
        let row: Vec<(usize, f64)> = net
            .generators
            .iter()
            .zip(&gens)
            .filter(|(g, _)| g.bus == i)
            .map(|(_, &v)| (v, 1.0))
            .collect();
        let load: f64 = net.loads.iter().zip(p_d).filter(|(d, _)| d.bus == i).map(|(_, &p)| p).sum();
        (row, load)
    };
    for out in scenarios(net) {
        add_scenario(&mut lp, net, out, 0.0, true, &inj);
    }
    let res = solve_lp(&lp)?;
    Ok(match res.status {
        LpStatus::Optimal => Some(OpfSample {
            p_d: p_d.to_vec(),
            p_g: gens.iter().map(|&v| res.x[v]).collect(),
        }),
        _ => None,
    })
}

/// Re-checks a dispatch scenario by scenario, one LP each.
pub fn check_dispatch(net: &GridNetwork, sample: &OpfSample) -> Result<bool> {
    let gen_ok = net
        .generators
        .iter()
        .zip(&sample.p_g)
        .all(|(g, &p)| p >= g.p_min - CHECK_TOL && p <= g.p_max + CHECK_TOL);
    let total = net.injections(&sample.p_d, &sample.p_g).sum();
    if !gen_ok || total.abs() > CHECK_TOL {
        return Ok(false);
    }
    let s = net.injections(&sample.p_d, &sample.p_g);
    for out in scenarios(net) {
        let mut lp = LpProblem::new(0);
        add_scenario(&mut lp, net, out, CHECK_TOL, false, &|i| (Vec::new(), -s[i]));
        if solve_lp(&lp)?.status != LpStatus::Optimal {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub version: u32,
    pub case_sha256: String,
    pub seed: u64,
    pub load_low: f64,
    pub load_high: f64,
    pub requested: usize,
    pub attempts: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<OpfSample>,
}

impl Dataset {
    pub fn is_complete(&self) -> bool {
        self.samples.len() == self.header.requested
    }

    pub fn to_text(&self) -> String {
        textfmt::to_text(self)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let d: Self = serde_json::from_str(text).map_err(|e| textfmt::parse_error(&e))?;
        if d.header.version != DATASET_VERSION {
            return Err(Error::Version {
                found: d.header.version,
                expected: DATASET_VERSION,
            });
        }
        Ok(d)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::write(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Inputs and targets as row vectors.
    pub fn pairs(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        self.samples.iter().map(|s| (s.p_d.clone(), s.p_g.clone())).unzip()
    }
}

/// Loads of attempt `k`, drawn from its own stream so the result does not
/// depend on how attempts are scheduled.
fn attempt_loads(net: &GridNetwork, seed: u64, k: usize, low: f64, high: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    (0..net.num_loads()).map(|_| rng.gen_range(low..=high)).collect()
}

/// Accepted N-1 secure samples with uniformly drawn loads. Stops after
/// `50 · n_samples` attempts and returns what it has.
pub fn generate_dataset(net: &GridNetwork, n_samples: usize, low: f64, high: f64, seed: u64) -> Result<Dataset> {
    if !(low <= high) || low < 0.0 || !high.is_finite() {
        return Err(Error::InvalidArgument(format!("load range [{low}, {high}]")));
    }
    net.validate()?;
    let cap = 50 * n_samples;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let batch = (threads * 16).max(64);
    let mut samples = Vec::with_capacity(n_samples);
    let mut attempts = 0usize;
    while samples.len() < n_samples && attempts < cap {
        let end = (attempts + batch).min(cap);
        let ks: Vec<usize> = (attempts..end).collect();
        let chunk = ks.len().div_ceil(threads);
        let results: Vec<Result<Option<OpfSample>>> = std::thread::scope(|s| {
            let handles: Vec<_> = ks
                .chunks(chunk)
                .map(|part| {
                    s.spawn(move || {
                        part.iter()
                            .map(|&k| solve_scopf(net, &attempt_loads(net, seed, k, low, high)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("dataset worker panicked"))
                .collect()
        });
        for r in results {
            attempts += 1;
            if let Some(s) = r? {
                samples.push(s);
                if samples.len() == n_samples {
                    break;
                }
            }
        }
    }
    if samples.len() < n_samples {
        warn!(accepted = samples.len(), requested = n_samples, attempts, "attempt cap reached");
    }
    Ok(Dataset {
        header: DatasetHeader {
            version: DATASET_VERSION,
            case_sha256: net.hash()?,
            seed,
            load_low: low,
            load_high: high,
            requested: n_samples,
            attempts,
            rejected: attempts - samples.len(),
        },
        samples,
    })
}
