//! Deterministic output files.
//!
//! Every file starts with a header block carrying the config fingerprint and
//! the master seed; no timestamps or other run-varying content ever reach
//! the output, so identical (config, seed) pairs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::bounds::BoundCheck;
use crate::error::Result;
use crate::fed::FedHistory;
use crate::sweep::SweepRecord;

pub struct OutputWriter {
    dir: PathBuf,
    config_hash: String,
    seed: u64,
}

impl OutputWriter {
    pub fn new(dir: &Path, config_hash: &str, seed: u64) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), config_hash: config_hash.to_string(), seed })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn header(&self) -> String {
        format!("# config_hash={}\n# seed={}\n", self.config_hash, self.seed)
    }

    pub fn write_csv(&self, name: &str, columns: &str, rows: &[String]) -> Result<PathBuf> {
        let mut text = self.header();
        text.push_str(columns);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        let path = self.dir.join(name);
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn write_json(&self, name: &str, payload: serde_json::Value) -> Result<PathBuf> {
        let doc = serde_json::json!({
            "config_hash": self.config_hash,
            "seed": self.seed,
            "payload": payload,
        });
        let path = self.dir.join(name);
        fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
        Ok(path)
    }

    /// Raw file without the header block (schema-pure documents).
    pub fn write_raw(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, text)?;
        Ok(path)
    }

    /// One JSON record per line, one line per check.
    pub fn write_bound_records(&self, name: &str, records: &[SweepRecord]) -> Result<PathBuf> {
        let mut text = self.header();
        for record in records {
            text.push_str(&bound_record_line(record.seed, &record.check));
            text.push('\n');
        }
        let path = self.dir.join(name);
        fs::write(&path, text)?;
        Ok(path)
    }
}

fn json_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        "null".to_string()
    }
}

pub fn bound_record_line(seed: u64, check: &BoundCheck) -> String {
    let mut coeffs = String::from("{");
    for (i, (k, v)) in check.coefficients.iter().enumerate() {
        if i > 0 {
            coeffs.push(',');
        }
        let _ = write!(coeffs, "\"{k}\":{}", json_f64(*v));
    }
    coeffs.push('}');
    format!(
        "{{\"check\":\"{}\",\"seed\":{},\"lhs\":{},\"rhs\":{},\"slack\":{},\"holds\":{},\"flagged_infinite\":{},\"coefficients\":{}}}",
        check.name,
        seed,
        json_f64(check.lhs),
        json_f64(check.rhs),
        json_f64(check.slack),
        check.holds,
        check.flagged_infinite,
        coeffs
    )
}

fn opt_f64(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v}"),
        None => String::new(),
    }
}

/// Federation history rows: round,eta_global,agent,eta_local,h_value,b_norm,g_scaled.
/// The final evaluation round carries no agent records and writes one row
/// with the agent columns empty.
pub fn history_csv_rows(history: &FedHistory) -> Vec<String> {
    let mut rows = Vec::new();
    for round in &history.rounds {
        if round.agents.is_empty() {
            rows.push(format!("{},{},,,,,", round.round, round.eta_global));
            continue;
        }
        for agent in &round.agents {
            rows.push(format!(
                "{},{},{},{},{},{},{}",
                round.round,
                round.eta_global,
                agent.agent,
                agent.eta_local,
                opt_f64(agent.h_value),
                opt_f64(agent.b_norm),
                opt_f64(agent.g_scaled),
            ));
        }
    }
    rows
}

pub const HISTORY_CSV_COLUMNS: &str = "round,eta_global,agent,eta_local,h_value,b_norm,g_scaled";

/// Per-iteration trainer statistics.
pub fn iteration_csv_rows(history: &FedHistory) -> Vec<String> {
    let mut rows = Vec::new();
    for round in &history.rounds {
        for agent in &round.agents {
            for it in &agent.iterations {
                rows.push(format!(
                    "{},{},{},{},{},{},{},{},{},{}",
                    round.round,
                    agent.agent,
                    it.iteration,
                    it.mean_local_kl,
                    it.mean_global_sqrtkl,
                    it.c1,
                    it.c2,
                    it.surrogate,
                    it.mean_advantage,
                    it.value_loss,
                ));
            }
        }
    }
    rows
}

pub const ITERATION_CSV_COLUMNS: &str =
    "round,agent,iteration,mean_local_kl,mean_global_sqrtkl,c1,c2,surrogate,mean_advantage,value_loss";

/// History summary document for the JSON sidecar.
pub fn history_json(history: &FedHistory) -> serde_json::Value {
    // f64 NaN/inf cannot enter serde_json values; everything recorded in the
    // history is finite by construction (aborted iterations store zeros).
    serde_json::to_value(history).expect("history is finite and serializable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn bound_record_lines_are_valid_json() {
        let mut coefficients = BTreeMap::new();
        coefficients.insert("alpha".to_string(), 0.5);
        let check = BoundCheck {
            name: "federation_advantage",
            lhs: 1.0,
            rhs: 0.5,
            slack: 0.5,
            holds: true,
            flagged_infinite: false,
            coefficients,
        };
        let line = bound_record_line(7, &check);
        let value: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(value["check"], "federation_advantage");
        assert_eq!(value["seed"], 7);
        assert_eq!(value["coefficients"]["alpha"], 0.5);
    }

    #[test]
    fn non_finite_values_become_null() {
        let check = BoundCheck {
            name: "pinsker",
            lhs: f64::INFINITY,
            rhs: 0.5,
            slack: f64::INFINITY,
            holds: true,
            flagged_infinite: true,
            coefficients: BTreeMap::new(),
        };
        let line = bound_record_line(0, &check);
        let value: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert!(value["lhs"].is_null());
        assert_eq!(value["flagged_infinite"], true);
    }
}
