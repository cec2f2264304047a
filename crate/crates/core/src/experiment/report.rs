use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::EstimatorKind;
use crate::error::{Error, Result};

/// Arithmetic mean and sample standard deviation (`n - 1` denominator; zero
/// for a single value).
pub fn summarize(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("values to summarize"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

/// One row of the per-replicate CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub estimator: EstimatorKind,
    pub value: f64,
    pub mcse: f64,
    /// Largest split R-hat of the sampling run(s) behind the value; empty for
    /// estimators that do not use MCMC.
    pub rhat_max: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub mean: f64,
    pub sd: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub model: String,
    pub n_obs: usize,
    pub replicates: usize,
    pub config_hash: String,
    pub version: String,
    pub wall_time_secs: f64,
    pub summaries: Vec<EstimatorSummary>,
    /// Ordered by replicate, then estimator.
    pub records: Vec<ReplicateRecord>,
    pub notes: Vec<String>,
}

impl Report {
    pub(crate) fn assemble(
        model: String,
        n_obs: usize,
        replicates: usize,
        config_hash: String,
        estimators: &[EstimatorKind],
        records: Vec<ReplicateRecord>,
        notes: Vec<String>,
    ) -> Result<Self> {
        let summaries = estimators
            .iter()
            .map(|&e| {
                let values: Vec<f64> = records.iter().filter(|r| r.estimator == e).map(|r| r.value).collect();
                let (mean, sd) = summarize(&values)?;
                Ok(EstimatorSummary { estimator: e, mean, sd, values })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            model,
            n_obs,
            replicates,
            config_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_secs: 0.0,
            summaries,
            records,
            notes,
        })
    }

    pub fn summary(&self, estimator: EstimatorKind) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == estimator)
    }

    /// Equality of everything except wall time.
    pub fn same_results(&self, other: &Report) -> bool {
        let mut a = self.clone();
        a.wall_time_secs = other.wall_time_secs;
        a == *other
    }

    /// Per-replicate values as CSV: `replicate,estimator,value,mcse,rhat_max,seed`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    /// Plain-text table of replicate means with standard deviations in parentheses.
    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model: {}  n = {}  replicates = {}", self.model, self.n_obs, self.replicates);
        let _ = writeln!(s, "config: {}  version: {}  wall time: {:.1} s", self.config_hash, self.version, self.wall_time_secs);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<16}{:>14}  (sd)", "estimator", "mean");
        for e in &self.summaries {
            let _ = writeln!(s, "{:<16}{:>14.3}  ({:.3})", e.estimator.as_str(), e.mean, e.sd);
        }
        if !self.notes.is_empty() {
            let _ = writeln!(s);
            for n in &self.notes {
                let _ = writeln!(s, "note: {n}");
            }
        }
        s
    }

    /// Writes `replicates.csv`, `summary.txt` and `report.json` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Io { path: dir.to_path_buf(), source: e };
        std::fs::create_dir_all(dir).map_err(io)?;
        let create = |name: &str| {
            let path = dir.join(name);
            std::fs::File::create(&path).map_err(|e| Error::Io { path, source: e })
        };
        self.write_csv(std::io::BufWriter::new(create("replicates.csv")?))?;
        create("summary.txt")?.write_all(self.summary_table().as_bytes()).map_err(io)?;
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        create("report.json")?.write_all(json.as_bytes()).map_err(io)?;
        Ok(())
    }
}
