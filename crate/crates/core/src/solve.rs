//! One entry point for every algorithm.

use std::sync::Arc;
use std::time::Instant;

use crate::error::Result;
use crate::exact::{exact_solve, ExactConfig};
use crate::greedy::{construct, next_fit_split, GreedyOptions};
use crate::model::ProblemInstance;
use crate::placement::{Placement, SolveReport};
use crate::vns::{vns, TraceRecord, VnsConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum Algorithm {
    Greedy(GreedyOptions),
    NextFit,
    Vns(VnsConfig),
    Exact(ExactConfig),
}

impl Algorithm {
    pub fn label(&self) -> String {
        match self {
            Algorithm::Greedy(o) => format!("greedy-{}", o.policy),
            Algorithm::NextFit => "nextfit".into(),
            Algorithm::Vns(_) => "vns".into(),
            Algorithm::Exact(_) => "exact".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub placement: Placement,
    pub report: SolveReport,
    /// Whether requests were allowed to split to reach feasibility.
    pub used_split: bool,
    /// Set by the exact solver only.
    pub optimal: Option<bool>,
    pub trace: Vec<TraceRecord>,
}

pub fn solve(instance: Arc<ProblemInstance>, algorithm: &Algorithm) -> Result<Solution> {
    let clock = Instant::now();
    let label = algorithm.label();
    let mut solution = match algorithm {
        Algorithm::Greedy(options) => {
            let c = construct(instance, options)?;
            let report = c.placement.evaluate()?;
            Solution {
                placement: c.placement,
                report,
                used_split: c.used_split,
                optimal: None,
                trace: Vec::new(),
            }
        }
        Algorithm::NextFit => {
            let placement = next_fit_split(instance)?;
            let report = placement.evaluate()?;
            Solution {
                placement,
                report,
                used_split: true,
                optimal: None,
                trace: Vec::new(),
            }
        }
        Algorithm::Vns(config) => {
            let out = vns(instance, config)?;
            Solution {
                placement: out.placement,
                report: out.report,
                used_split: out.used_split,
                optimal: None,
                trace: out.trace,
            }
        }
        Algorithm::Exact(config) => {
            let out = exact_solve(instance, config)?;
            Solution {
                placement: out.placement,
                report: out.report,
                used_split: config.split_grid.is_some_and(|g| g > 1),
                optimal: Some(out.optimal),
                trace: Vec::new(),
            }
        }
    };
    solution.report.algorithm = label;
    solution.report.runtime_secs = clock.elapsed().as_secs_f64();
    Ok(solution)
}
