//! CSV tables and TOML chain dumps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::chain::AllocationChain;
use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::model::LinkStateModel;
use crate::sim::{IntervalRecord, TraceRecord};

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Simulation(format!("write failed: {e}"))
}

fn join(xs: impl IntoIterator<Item = impl ToString>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// One row per state: `state, vector, probability`, plus `sigma` (the
/// per-link candidate labels) when `labels` is given. Vectors are
/// `;`-separated.
pub fn write_distribution_csv<W: Write>(
    out: W,
    chain: &AllocationChain,
    dist: &Distribution,
    labels: Option<&dyn LinkStateModel>,
) -> Result<()> {
    if dist.len() != chain.len() {
        return Err(Error::DimensionMismatch {
            expected: chain.len(),
            got: dist.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["state", "vector", "probability"];
    if labels.is_some() {
        header.push("sigma");
    }
    w.write_record(&header).map_err(csv_err)?;
    for (id, (r, p)) in chain.rate_vectors().iter().zip(dist.probs()).enumerate() {
        let mut row = vec![id.to_string(), join(r), p.to_string()];
        if let Some(m) = labels {
            let s = &chain.states()[id];
            row.push(join(s.iter().enumerate().map(|(i, &c)| m.candidate_label(i, c))));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// Long format: one row per record and link with columns
/// `t, link, Q, r, v, event_kind`, plus `sigma` when `labels` is given.
pub fn write_trace_csv<W: Write>(
    out: W,
    trace: &[TraceRecord],
    labels: Option<&dyn LinkStateModel>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t", "link", "Q", "r", "v", "event_kind"];
    if labels.is_some() {
        header.push("sigma");
    }
    w.write_record(&header).map_err(csv_err)?;
    for rec in trace {
        for i in 0..rec.queues.len() {
            let mut row = vec![
                rec.t.to_string(),
                i.to_string(),
                rec.queues[i].to_string(),
                rec.rates[i].to_string(),
                rec.v[i].to_string(),
                rec.kind.as_str().to_string(),
            ];
            if let Some(m) = labels {
                row.push(m.candidate_label(i, rec.state[i]).to_string());
            }
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(csv_err)
}

/// `start, end, link, lambda_hat, s_hat, v` per interval and link.
pub fn write_intervals_csv<W: Write>(out: W, intervals: &[IntervalRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["start", "end", "link", "lambda_hat", "s_hat", "v"])
        .map_err(csv_err)?;
    for r in intervals {
        for i in 0..r.v.len() {
            w.write_record([
                r.start.to_string(),
                r.end.to_string(),
                i.to_string(),
                r.lambda_hat[i].to_string(),
                r.s_hat[i].to_string(),
                r.v[i].to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(csv_err)
}

/// A chain in plain data form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDump {
    pub v: Vec<f64>,
    /// Candidate rates per link.
    pub local_rates: Vec<Vec<f64>>,
    pub states: Vec<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_matrix: Option<Vec<Vec<f64>>>,
}

impl ChainDump {
    pub fn new<M: LinkStateModel + ?Sized>(
        model: &M,
        chain: &AllocationChain,
        with_matrix: bool,
    ) -> Result<Self> {
        let rate_matrix = if with_matrix {
            let q = chain.rate_matrix()?;
            Some(
                (0..q.nrows())
                    .map(|i| q.row(i).iter().copied().collect())
                    .collect(),
            )
        } else {
            None
        };
        Ok(ChainDump {
            v: chain.v().to_vec(),
            local_rates: (0..model.num_links())
                .map(|i| model.local_rates(i).to_vec())
                .collect(),
            states: chain.states().to_vec(),
            rate_matrix,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Rebuilds the chain. A stored rate matrix must agree with the one
    /// implied by the states and `v` to 1e-9 relative.
    pub fn to_chain(&self) -> Result<AllocationChain> {
        let chain = AllocationChain::from_states(self.states.clone(), self.local_rates.clone(), &self.v)?;
        if let Some(stored) = &self.rate_matrix {
            let q = chain.rate_matrix()?;
            if stored.len() != q.nrows() || stored.iter().any(|r| r.len() != q.ncols()) {
                return Err(Error::Config("rate_matrix has the wrong shape".into()));
            }
            for (i, row) in stored.iter().enumerate() {
                for (j, &x) in row.iter().enumerate() {
                    let y = q[(i, j)];
                    if (x - y).abs() > 1e-9 * y.abs().max(1.0) {
                        return Err(Error::Config(format!(
                            "rate_matrix[{i}][{j}] = {x} disagrees with {y}"
                        )));
                    }
                }
            }
        }
        Ok(chain)
    }
}
