//! Experiment campaigns over generated instance grids, with CSV output and
//! per-group summaries.
//!
//! Every `(requests, access points, replication)` cell gets one instance
//! seed, swept over all multipliers. Rows run in parallel and are written in
//! sorted key order, so the CSV is reproducible apart from the runtime
//! column.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::ExactConfig;
use crate::greedy::{GreedyOptions, Policy, SplitMode};
use crate::instgen::{default_multipliers, sweep, GeneratorConfig};
use crate::model::ProblemInstance;
use crate::solve::{solve, Algorithm};
use crate::vns::VnsConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CampaignAlgorithm {
    #[serde(rename = "greedy-bestfit")]
    GreedyBestFit,
    #[serde(rename = "greedy-firstfit")]
    GreedyFirstFit,
    #[serde(rename = "greedy-bestavail")]
    GreedyBestAvailability,
    #[serde(rename = "nextfit")]
    NextFit,
    #[serde(rename = "vns")]
    Vns,
    /// VNS with the campaign's per-start time limit.
    #[serde(rename = "vns-budget")]
    VnsBudget,
    #[serde(rename = "exact")]
    Exact,
}

impl CampaignAlgorithm {
    pub fn label(self) -> &'static str {
        match self {
            CampaignAlgorithm::GreedyBestFit => "greedy-bestfit",
            CampaignAlgorithm::GreedyFirstFit => "greedy-firstfit",
            CampaignAlgorithm::GreedyBestAvailability => "greedy-bestavail",
            CampaignAlgorithm::NextFit => "nextfit",
            CampaignAlgorithm::Vns => "vns",
            CampaignAlgorithm::VnsBudget => "vns-budget",
            CampaignAlgorithm::Exact => "exact",
        }
    }

    pub fn is_greedy(self) -> bool {
        matches!(
            self,
            CampaignAlgorithm::GreedyBestFit
                | CampaignAlgorithm::GreedyFirstFit
                | CampaignAlgorithm::GreedyBestAvailability
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignSpec {
    pub request_counts: Vec<usize>,
    pub ap_counts: Vec<usize>,
    pub multipliers: Vec<f64>,
    pub replications: usize,
    pub algorithms: Vec<CampaignAlgorithm>,
    pub base_seed: u64,
    /// Seconds, for `vns-budget`.
    pub per_start_time_limit: f64,
    /// Explore VNS starts on separate threads inside a row.
    pub parallel_starts: bool,
}

impl Default for CampaignSpec {
    fn default() -> Self {
        CampaignSpec {
            request_counts: vec![50, 100, 200, 300, 400, 500],
            ap_counts: vec![1, 2, 3],
            multipliers: default_multipliers(),
            replications: 30,
            algorithms: vec![
                CampaignAlgorithm::GreedyBestFit,
                CampaignAlgorithm::GreedyFirstFit,
                CampaignAlgorithm::GreedyBestAvailability,
                CampaignAlgorithm::Vns,
                CampaignAlgorithm::VnsBudget,
            ],
            base_seed: 0,
            per_start_time_limit: 10.0,
            parallel_starts: false,
        }
    }
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<()> {
        if self.request_counts.is_empty()
            || self.ap_counts.is_empty()
            || self.multipliers.is_empty()
            || self.algorithms.is_empty()
            || self.replications == 0
        {
            return Err(Error::input("campaign: every list must be non-empty and replications positive"));
        }
        if !(self.per_start_time_limit > 0.0 && self.per_start_time_limit.is_finite()) {
            return Err(Error::input("campaign: per-start time limit must be positive"));
        }
        Ok(())
    }

    fn algorithm(&self, a: CampaignAlgorithm, seed: u64) -> Algorithm {
        let greedy = |p| Algorithm::Greedy(GreedyOptions::new(p).split(SplitMode::Fallback));
        let vns = |limit: Option<Duration>| {
            Algorithm::Vns(VnsConfig {
                per_start_time_limit: limit,
                seed,
                parallel: self.parallel_starts,
                ..VnsConfig::default()
            })
        };
        match a {
            CampaignAlgorithm::GreedyBestFit => greedy(Policy::BestFit),
            CampaignAlgorithm::GreedyFirstFit => greedy(Policy::FirstFit),
            CampaignAlgorithm::GreedyBestAvailability => greedy(Policy::BestAvailability),
            CampaignAlgorithm::NextFit => Algorithm::NextFit,
            CampaignAlgorithm::Vns => vns(None),
            CampaignAlgorithm::VnsBudget => vns(Some(Duration::from_secs_f64(self.per_start_time_limit))),
            CampaignAlgorithm::Exact => Algorithm::Exact(ExactConfig::default()),
        }
    }
}

/// Mixes values into a seed with the SplitMix64 finalizer, so seeds do not
/// depend on iteration order or thread count.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = base;
    for &p in parts {
        h ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub seed: u64,
    pub requests: usize,
    pub aps: usize,
    pub multiplier: f64,
    pub replication: usize,
    pub algorithm: CampaignAlgorithm,
    pub feasible: bool,
    pub fallback: bool,
    pub a_min: Option<f64>,
    pub worst_count: Option<usize>,
    pub splits: Option<usize>,
    pub runtime_s: f64,
    pub error: String,
}

/// Instance seed of a `(requests, aps, replication)` cell.
pub fn instance_seed(spec: &CampaignSpec, requests: usize, aps: usize, replication: usize) -> u64 {
    derive_seed(spec.base_seed, &[requests as u64, aps as u64, replication as u64])
}

pub fn run_campaign(spec: &CampaignSpec) -> Result<Vec<CampaignRow>> {
    spec.validate()?;
    let mut cells = Vec::new();
    for &requests in &spec.request_counts {
        for &aps in &spec.ap_counts {
            for replication in 0..spec.replications {
                cells.push((requests, aps, replication));
            }
        }
    }
    let instances: Vec<((usize, usize, usize), u64, Vec<Arc<ProblemInstance>>)> = cells
        .into_par_iter()
        .map(|(requests, aps, replication)| {
            let seed = instance_seed(spec, requests, aps, replication);
            let config = GeneratorConfig::new(requests, aps, 1.0, seed);
            let insts = sweep(&config, &spec.multipliers)?;
            Ok(((requests, aps, replication), seed, insts.into_iter().map(Arc::new).collect()))
        })
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for ((requests, aps, replication), seed, insts) in &instances {
        for (mi, inst) in insts.iter().enumerate() {
            for &algorithm in &spec.algorithms {
                jobs.push((*requests, *aps, *replication, mi, *seed, inst.clone(), algorithm));
            }
        }
    }
    let mut rows: Vec<(usize, CampaignRow)> = jobs
        .into_par_iter()
        .map(|(requests, aps, replication, mi, seed, inst, algorithm)| {
            let run_seed = derive_seed(seed, &[mi as u64, algorithm as u64]);
            let algo = spec.algorithm(algorithm, run_seed);
            let clock = Instant::now();
            let outcome = solve(inst, &algo);
            let runtime_s = clock.elapsed().as_secs_f64();
            let mut row = CampaignRow {
                seed,
                requests,
                aps,
                multiplier: spec.multipliers[mi],
                replication,
                algorithm,
                feasible: false,
                fallback: false,
                a_min: None,
                worst_count: None,
                splits: None,
                runtime_s,
                error: String::new(),
            };
            match outcome {
                Ok(sol) => {
                    row.feasible = true;
                    row.fallback = sol.used_split;
                    row.a_min = Some(sol.report.objective);
                    row.worst_count = Some(sol.report.worst_requests.len());
                    row.splits = Some(sol.report.splits);
                }
                Err(e) => row.error = e.to_string(),
            }
            (mi, row)
        })
        .collect();
    rows.sort_by(|(ma, a), (mb, b)| {
        (a.requests, a.aps, a.replication, ma, a.algorithm).cmp(&(b.requests, b.aps, b.replication, mb, b.algorithm))
    });
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn rows_to_csv(rows: &[CampaignRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "seed", "requests", "aps", "multiplier", "replication", "algorithm", "feasible", "fallback", "a_min",
            "worst_count", "splits", "runtime_s", "error",
        ])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<CampaignRow>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Drops the runtime column, for comparing runs.
pub fn without_runtime(csv_text: &str) -> String {
    let mut out = String::new();
    let mut runtime_col = None;
    for (i, line) in csv_text.lines().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if i == 0 {
            runtime_col = cells.iter().position(|c| *c == "runtime_s");
        }
        let kept: Vec<&str> = cells
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != runtime_col)
            .map(|(_, c)| *c)
            .collect();
        out.push_str(&kept.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub requests: usize,
    pub aps: usize,
    pub multiplier: f64,
    pub algorithm: CampaignAlgorithm,
    pub runs: usize,
    pub feasible: usize,
    /// Over feasible runs.
    pub mean_a_min: Option<f64>,
    pub mean_runtime_s: f64,
    pub mean_splits: Option<f64>,
}

pub fn summarize(rows: &[CampaignRow]) -> Vec<SummaryRow> {
    type Key = (usize, usize, u64, CampaignAlgorithm);
    let mut groups: BTreeMap<Key, Vec<&CampaignRow>> = BTreeMap::new();
    for row in rows {
        let key = (row.requests, row.aps, row.multiplier.to_bits(), row.algorithm);
        groups.entry(key).or_default().push(row);
    }
    let mut out: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((requests, aps, m, algorithm), group)| {
            let feasible: Vec<&&CampaignRow> = group.iter().filter(|r| r.feasible).collect();
            let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
            SummaryRow {
                requests,
                aps,
                multiplier: f64::from_bits(m),
                algorithm,
                runs: group.len(),
                feasible: feasible.len(),
                mean_a_min: mean(feasible.iter().filter_map(|r| r.a_min).collect()),
                mean_runtime_s: group.iter().map(|r| r.runtime_s).sum::<f64>() / group.len() as f64,
                mean_splits: mean(feasible.iter().filter_map(|r| r.splits).map(|s| s as f64).collect()),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (a.requests, a.aps, a.algorithm)
            .cmp(&(b.requests, b.aps, b.algorithm))
            .then(a.multiplier.total_cmp(&b.multiplier))
    });
    out
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "requests", "aps", "multiplier", "algorithm", "runs", "feasible", "mean_a_min", "mean_runtime_s",
            "mean_splits",
        ])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Instances where a VNS row falls below a greedy row of the same instance.
pub fn dominance_violations(rows: &[CampaignRow]) -> Vec<(u64, f64, CampaignAlgorithm)> {
    let mut by_instance: BTreeMap<(u64, u64), Vec<&CampaignRow>> = BTreeMap::new();
    for row in rows {
        by_instance.entry((row.seed, row.multiplier.to_bits())).or_default().push(row);
    }
    let mut out = Vec::new();
    for ((seed, m), group) in by_instance {
        let Some(vns) = group.iter().find(|r| r.algorithm == CampaignAlgorithm::Vns).and_then(|r| r.a_min) else {
            continue;
        };
        for r in group.iter().filter(|r| r.algorithm.is_greedy()) {
            if r.a_min.is_some_and(|g| vns < g) {
                out.push((seed, f64::from_bits(m), r.algorithm));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> CampaignSpec {
        CampaignSpec {
            request_counts: vec![12],
            ap_counts: vec![1, 2],
            multipliers: vec![1.0, 2.0],
            replications: 2,
            algorithms: vec![CampaignAlgorithm::GreedyBestFit, CampaignAlgorithm::Vns],
            base_seed: 11,
            ..CampaignSpec::default()
        }
    }

    #[test]
    fn row_count_and_order() {
        let rows = run_campaign(&small_spec()).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 2 * 2);
        assert!(rows.iter().all(|r| r.feasible && r.error.is_empty()));
        assert!(dominance_violations(&rows).is_empty());
        let csv = rows_to_csv(&rows).unwrap();
        assert_eq!(rows_from_csv(&csv).unwrap(), rows);
    }

    #[test]
    fn reproducible_without_runtime() {
        let a = rows_to_csv(&run_campaign(&small_spec()).unwrap()).unwrap();
        let b = rows_to_csv(&run_campaign(&small_spec()).unwrap()).unwrap();
        assert_eq!(without_runtime(&a), without_runtime(&b));
        assert!(!without_runtime(&a).contains("runtime_s"));
    }

    #[test]
    fn summary_means() {
        let rows = run_campaign(&small_spec()).unwrap();
        let summary = summarize(&rows);
        assert_eq!(summary.len(), 2 * 2 * 2);
        for s in &summary {
            assert_eq!(s.runs, 2);
            let matching: Vec<f64> = rows
                .iter()
                .filter(|r| r.aps == s.aps && r.multiplier == s.multiplier && r.algorithm == s.algorithm)
                .filter_map(|r| r.a_min)
                .collect();
            assert_eq!(s.mean_a_min, Some(matching.iter().sum::<f64>() / 2.0));
        }
    }

    #[test]
    fn empty_input_summarizes_to_nothing() {
        assert!(rows_from_csv("").unwrap().is_empty());
        assert!(summarize(&[]).is_empty());
        let header_only = rows_to_csv(&[]).unwrap();
        assert!(rows_from_csv(&header_only).unwrap().is_empty());
        assert!(summary_to_csv(&[]).unwrap().starts_with("requests,"));
    }

    #[test]
    fn spec_json_defaults() {
        let spec: CampaignSpec = serde_json::from_str(r#"{"request_counts":[50],"algorithms":["vns","greedy-bestfit"]}"#).unwrap();
        assert_eq!(spec.replications, 30);
        assert_eq!(spec.multipliers.len(), 9);
        assert!(serde_json::from_str::<CampaignSpec>(r#"{"bogus":1}"#).is_err());
        let bad = CampaignSpec {
            algorithms: vec![],
            ..CampaignSpec::default()
        };
        assert!(run_campaign(&bad).is_err());
    }

    #[test]
    fn seeds_depend_on_every_part() {
        let a = derive_seed(1, &[50, 1, 0]);
        assert_ne!(a, derive_seed(1, &[50, 1, 1]));
        assert_ne!(a, derive_seed(1, &[50, 2, 0]));
        assert_ne!(a, derive_seed(2, &[50, 1, 0]));
        assert_eq!(a, derive_seed(1, &[50, 1, 0]));
    }
}
