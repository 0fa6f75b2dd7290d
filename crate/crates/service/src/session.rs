//! Session state, solver dispatch and snapshots.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use havnfp::exact::ExactConfig;
use havnfp::greedy::{complete, GreedyOptions, Policy, SplitMode};
use havnfp::model::{validation_errors, InstanceDoc};
use havnfp::placement::{check_constraints, PlacementExport};
use havnfp::solve::{solve, Algorithm};
use havnfp::vns::{vns_warm, VnsConfig};
use havnfp::{Error, Placement, ProblemInstance, SolveReport};
use serde::{Deserialize, Serialize};

use crate::delta::Delta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Greedy,
    #[serde(rename = "nextfit")]
    NextFit,
    #[default]
    Vns,
    Exact,
}

/// How a session solves. Sent as the body of a solve call and remembered
/// for later what-if runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SolveSettings {
    #[serde(default)]
    pub algorithm: AlgorithmKind,
    #[serde(default = "default_policy")]
    pub policy: Policy,
    #[serde(default)]
    pub split: SplitMode,
    /// Seconds. Per start for VNS, total for the exact solver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_budget: Option<u64>,
}

fn default_policy() -> Policy {
    Policy::BestAvailability
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            algorithm: AlgorithmKind::default(),
            policy: default_policy(),
            split: SplitMode::default(),
            time_limit: None,
            seed: 0,
            max_iterations: None,
            node_budget: None,
        }
    }
}

impl SolveSettings {
    pub fn check(&self) -> Result<(), String> {
        match self.time_limit {
            Some(t) if !(t.is_finite() && t >= 0.0) => Err(format!("timeLimit must be a non-negative number, got {t}")),
            _ => Ok(()),
        }
    }

    fn algorithm(&self, fallback_limit: Option<Duration>, split_grid: Option<u32>) -> Algorithm {
        let limit = self.time_limit.map(Duration::from_secs_f64).or(fallback_limit);
        match self.algorithm {
            AlgorithmKind::Greedy => Algorithm::Greedy(GreedyOptions::new(self.policy).split(self.split)),
            AlgorithmKind::NextFit => Algorithm::NextFit,
            AlgorithmKind::Vns => Algorithm::Vns(self.vns_config(limit)),
            AlgorithmKind::Exact => Algorithm::Exact(ExactConfig {
                split_grid,
                time_limit: limit,
                node_budget: self.node_budget,
                ..ExactConfig::default()
            }),
        }
    }

    fn vns_config(&self, limit: Option<Duration>) -> VnsConfig {
        VnsConfig {
            per_start_time_limit: limit,
            max_iterations: self.max_iterations,
            seed: self.seed,
            split: self.split,
            ..VnsConfig::default()
        }
    }
}

/// A report keyed by request name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportView {
    pub algorithm: String,
    pub objective: f64,
    pub per_request: BTreeMap<String, f64>,
    pub worst_requests: Vec<String>,
    pub splits: usize,
    pub runtime: f64,
    pub vacuous: bool,
}

impl ReportView {
    pub fn new(instance: &ProblemInstance, report: &SolveReport) -> Self {
        let name = |i: usize| instance.requests()[i].name.clone();
        ReportView {
            algorithm: report.algorithm.clone(),
            objective: report.objective,
            per_request: report.per_request.iter().enumerate().map(|(i, &a)| (name(i), a)).collect(),
            worst_requests: report.worst_requests.iter().map(|r| name(r.0)).collect(),
            splits: report.splits,
            runtime: report.runtime_secs,
            vacuous: report.vacuous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub delta: Delta,
    /// `None` when the re-solve failed.
    pub report: Option<ReportView>,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub initial: InstanceDoc,
    pub doc: InstanceDoc,
    pub instance: Arc<ProblemInstance>,
    pub settings: SolveSettings,
    /// Always feasible for `instance` when present.
    pub placement: Option<Placement>,
    pub report: Option<SolveReport>,
    pub history: Vec<HistoryEntry>,
    pub busy: bool,
}

/// Turns a document into a validated instance, listing every problem.
pub fn build_instance(doc: &InstanceDoc) -> Result<Arc<ProblemInstance>, Vec<String>> {
    let instance = doc.to_instance().map_err(|e| vec![e.to_string()])?;
    let errors = validation_errors(&instance);
    if !errors.is_empty() {
        return Err(errors.iter().map(|v| v.to_string()).collect());
    }
    Ok(Arc::new(instance))
}

impl Session {
    pub fn new(id: String, doc: InstanceDoc) -> Result<Self, Vec<String>> {
        let instance = build_instance(&doc)?;
        Ok(Session {
            id,
            initial: doc.clone(),
            doc,
            instance,
            settings: SolveSettings::default(),
            placement: None,
            report: None,
            history: Vec::new(),
            busy: false,
        })
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            id: self.id.clone(),
            initial: self.initial.clone(),
            instance: self.doc.clone(),
            settings: self.settings.clone(),
            placement: self.placement.as_ref().map(Placement::export),
            report: self.report.clone(),
            history: self.history.clone(),
        }
    }

    pub fn restore(snapshot: Snapshot) -> havnfp::Result<Self> {
        let instance = build_instance(&snapshot.instance).map_err(|e| Error::Input(e.join("; ")))?;
        let placement = snapshot
            .placement
            .as_ref()
            .map(|p| Placement::import(instance.clone(), p))
            .transpose()?;
        Ok(Session {
            id: snapshot.id,
            initial: snapshot.initial,
            doc: snapshot.instance,
            instance,
            settings: snapshot.settings,
            placement,
            report: snapshot.report,
            history: snapshot.history,
            busy: false,
        })
    }
}

/// On-disk form of a session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub id: String,
    pub initial: InstanceDoc,
    pub instance: InstanceDoc,
    pub settings: SolveSettings,
    pub placement: Option<PlacementExport>,
    pub report: Option<SolveReport>,
    pub history: Vec<HistoryEntry>,
}

pub fn save_snapshot(dir: &Path, session: &Session) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(&session.snapshot())?;
    let tmp = dir.join(format!("{}.json.tmp", session.id));
    std::fs::write(&tmp, text)?;
    std::fs::rename(tmp, dir.join(format!("{}.json", session.id)))
}

/// Reads every `*.json` snapshot in `dir`.
pub fn load_snapshots(dir: &Path) -> havnfp::Result<Vec<Session>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let snapshot: Snapshot = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
            out.push(Session::restore(snapshot)?);
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub placement: Placement,
    pub report: SolveReport,
    pub used_split: bool,
    pub optimal: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Infeasible(String),
    /// The request cannot be served as asked, e.g. an instance too large
    /// for the exact solver.
    Rejected(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible(m) => Failure::Infeasible(m),
            Error::OverBudget(_) | Error::Input(_) | Error::Parse { .. } => Failure::Rejected(e.to_string()),
            other => Failure::Internal(other.to_string()),
        }
    }
}

/// Solves `instance` with `settings`. A `warm` placement from an earlier
/// version of the instance seeds VNS when it can be carried over. The
/// result is checked against every placement constraint.
pub fn run(
    instance: Arc<ProblemInstance>,
    settings: &SolveSettings,
    warm: Option<&Placement>,
    fallback_limit: Option<Duration>,
) -> Result<Outcome, Failure> {
    let outcome = match settings.algorithm {
        AlgorithmKind::Vns => {
            let limit = settings.time_limit.map(Duration::from_secs_f64).or(fallback_limit);
            let seed = warm.and_then(|p| p.transplant(instance.clone()).ok()).and_then(|mut p| {
                complete(&mut p, Policy::BestAvailability, settings.split).ok().map(|_| p)
            });
            let out = vns_warm(instance, &settings.vns_config(limit), seed)?;
            Outcome {
                placement: out.placement,
                report: out.report.with_algorithm("vns"),
                used_split: out.used_split,
                optimal: None,
            }
        }
        AlgorithmKind::Exact => {
            let grid = (settings.split == SplitMode::On).then_some(2);
            let first = solve(instance.clone(), &settings.algorithm(fallback_limit, grid));
            let solution = match first {
                Err(Error::Infeasible(_)) if settings.split == SplitMode::Fallback => {
                    solve(instance, &settings.algorithm(fallback_limit, Some(2)))
                }
                other => other,
            }?;
            Outcome {
                placement: solution.placement,
                report: solution.report,
                used_split: solution.used_split,
                optimal: solution.optimal,
            }
        }
        _ => {
            let solution = solve(instance, &settings.algorithm(fallback_limit, None))?;
            Outcome {
                placement: solution.placement,
                report: solution.report,
                used_split: solution.used_split,
                optimal: None,
            }
        }
    };
    let violations = check_constraints(&outcome.placement);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Failure::Internal(format!("solver returned an invalid placement: {}", list.join("; "))));
    }
    Ok(outcome)
}
