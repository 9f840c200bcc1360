use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Updating,
    Subset,
}

/// Diagnostics of one level. `beta` is the tempering exponent for updating
/// levels and the failure threshold for subset levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub stage: Stage,
    pub level: usize,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_cov: Option<f64>,
    /// `log mean(w)` of the incremental weights, before resampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_mean_weight: Option<f64>,
    /// Conditional probability of reaching this threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub ess: f64,
    pub sigma: f64,
    pub stage2_rate: f64,
    pub min_component_rate: f64,
    pub chain_length: usize,
    pub correlation: f64,
    pub correlation_fallback: bool,
    pub cap_hit: bool,
    /// Model evaluations spent on this level.
    pub evaluations: u64,
    /// Kept out of the serialised record so result files are reproducible.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LevelSchedule {
    pub records: Vec<LevelRecord>,
}

impl LevelSchedule {
    pub fn push(&mut self, r: LevelRecord) {
        self.records.push(r);
    }

    pub fn extend(&mut self, other: &LevelSchedule) {
        self.records.extend(other.records.iter().cloned());
    }

    pub fn stage(&self, stage: Stage) -> impl Iterator<Item = &LevelRecord> {
        self.records.iter().filter(move |r| r.stage == stage)
    }

    pub fn evaluations(&self) -> u64 {
        self.records.iter().map(|r| r.evaluations).sum()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::InvalidConfig(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: LevelRecord = serde_json::from_str(&line)
                .map_err(|e| Error::InvalidConfig(format!("schedule line {}: {e}", i + 1)))?;
            records.push(rec);
        }
        Ok(Self { records })
    }
}

/// Log evidence from the updating levels of a schedule.
///
/// Levels must run 1, 2, ... without gaps and each must carry its weight
/// average.
pub fn estimate_evidence(schedule: &LevelSchedule) -> Result<f64> {
    let mut total = 0.0;
    let mut expected = 1;
    for r in schedule.stage(Stage::Updating) {
        if r.level != expected {
            return Err(Error::MissingLevels(format!("expected level {expected}, found {}", r.level)));
        }
        total += r
            .log_mean_weight
            .ok_or_else(|| Error::MissingLevels(format!("level {} has no weight average", r.level)))?;
        expected += 1;
    }
    if expected == 1 {
        return Err(Error::MissingLevels("no updating levels".into()));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(level: usize, lmw: Option<f64>) -> LevelRecord {
        LevelRecord {
            stage: Stage::Updating,
            level,
            beta: 0.5,
            delta_beta: Some(0.5),
            weight_cov: Some(1.0),
            log_mean_weight: lmw,
            level_fraction: None,
            gamma: None,
            ess: 500.0,
            sigma: 0.3,
            stage2_rate: 0.25,
            min_component_rate: 0.25,
            chain_length: 10,
            correlation: 0.55,
            correlation_fallback: false,
            cap_hit: false,
            evaluations: 1000,
            wall_time_s: 1.5,
        }
    }

    #[test]
    fn evidence_sums_levels() {
        let s = LevelSchedule { records: vec![rec(1, Some(-1.0)), rec(2, Some(-0.5))] };
        assert_eq!(estimate_evidence(&s).unwrap(), -1.5);
    }

    #[test]
    fn evidence_requires_complete_records() {
        let s = LevelSchedule { records: vec![rec(1, Some(-1.0)), rec(3, Some(-0.5))] };
        assert!(matches!(estimate_evidence(&s), Err(Error::MissingLevels(_))));
        let s = LevelSchedule { records: vec![rec(1, None)] };
        assert!(estimate_evidence(&s).is_err());
        assert!(estimate_evidence(&LevelSchedule::default()).is_err());
    }

    #[test]
    fn jsonl_round_trip_drops_wall_time() {
        let s = LevelSchedule { records: vec![rec(1, Some(-1.0)), rec(2, Some(-0.5))] };
        let mut buf = Vec::new();
        s.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(!text.contains("wall_time"));
        let back = LevelSchedule::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.records[1].log_mean_weight, Some(-0.5));
        assert_eq!(back.records[1].wall_time_s, 0.0);
    }
}
