//! Variable neighborhood search seeded by the greedy constructions.
//!
//! Each start is improved by first-improvement local search over four
//! neighborhoods restricted to the worst requests. A candidate move is
//! followed by a slave-addition pass before it is evaluated. The best start
//! wins.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greedy::{add_slaves, construct, GreedyOptions, Policy, RequestOrder, SplitMode};
use crate::model::{ProblemInstance, RequestId, ServerId};
use crate::placement::{InstanceRef, MasterKey, Placement, Rejection, Role, SolveReport};
use crate::EPS_AVAIL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Neighborhood {
    #[serde(rename = "vnfSwap")]
    VnfSwap,
    #[serde(rename = "slaveSwap")]
    SlaveSwap,
    #[serde(rename = "requestSwap")]
    RequestSwap,
    #[serde(rename = "requestMove")]
    RequestMove,
}

impl Neighborhood {
    pub const DEFAULT_ORDER: [Neighborhood; 4] = [
        Neighborhood::VnfSwap,
        Neighborhood::SlaveSwap,
        Neighborhood::RequestSwap,
        Neighborhood::RequestMove,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Neighborhood::VnfSwap => "vnfSwap",
            Neighborhood::SlaveSwap => "slaveSwap",
            Neighborhood::RequestSwap => "requestSwap",
            Neighborhood::RequestMove => "requestMove",
        }
    }
}

impl fmt::Display for Neighborhood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Neighborhood {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Neighborhood::DEFAULT_ORDER
            .into_iter()
            .find(|n| n.label() == s)
            .ok_or_else(|| Error::input(format!("unknown neighborhood {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VnsConfig {
    /// Exploration budget of each start; `None` runs to a local optimum.
    pub per_start_time_limit: Option<Duration>,
    /// Accepted moves per start.
    pub max_iterations: Option<usize>,
    pub order: Vec<Neighborhood>,
    /// Shuffles the order in which worst requests are scanned.
    pub seed: u64,
    pub split: SplitMode,
    pub request_order: RequestOrder,
    /// Greedy policies used as starting points, in order.
    pub starts: Vec<Policy>,
    /// Explore the starts on separate threads.
    pub parallel: bool,
}

impl Default for VnsConfig {
    fn default() -> Self {
        VnsConfig {
            per_start_time_limit: None,
            max_iterations: None,
            order: Neighborhood::DEFAULT_ORDER.to_vec(),
            seed: 0,
            split: SplitMode::Fallback,
            request_order: RequestOrder::Input,
            starts: vec![Policy::BestAvailability, Policy::BestFit, Policy::FirstFit],
            parallel: true,
        }
    }
}

/// True when `candidate` has a higher objective, or the same objective and
/// fewer worst requests.
pub fn is_improving(candidate: &SolveReport, incumbent: &SolveReport) -> bool {
    let delta = candidate.objective - incumbent.objective;
    if delta > EPS_AVAIL {
        return true;
    }
    delta.abs() <= EPS_AVAIL && candidate.worst_requests.len() < incumbent.worst_requests.len()
}

/// One accepted move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub start: String,
    pub iteration: usize,
    pub operator: Neighborhood,
    pub delta: f64,
    pub objective: f64,
    pub worst_count: usize,
    /// Seconds since the start's exploration began.
    pub elapsed: f64,
}

/// Renders a trace as JSON lines.
pub fn trace_to_json_lines(trace: &[TraceRecord]) -> String {
    let mut out = String::new();
    for record in trace {
        out.push_str(&serde_json::to_string(record).expect("trace records serialize"));
        out.push('\n');
    }
    out
}

/// A starting placement and the policy its slave passes use.
#[derive(Debug, Clone)]
pub struct Start {
    pub label: String,
    pub placement: Placement,
    pub policy: Policy,
    pub used_split: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartSummary {
    pub label: String,
    pub initial: SolveReport,
    pub last: SolveReport,
    pub accepted: usize,
    pub evaluations: u64,
    pub timed_out: bool,
    pub used_split: bool,
}

#[derive(Debug, Clone)]
pub struct VnsOutcome {
    pub placement: Placement,
    pub report: SolveReport,
    pub trace: Vec<TraceRecord>,
    pub starts: Vec<StartSummary>,
    pub used_split: bool,
}

/// Builds the greedy starting points and explores each of them.
pub fn vns(instance: Arc<ProblemInstance>, config: &VnsConfig) -> Result<VnsOutcome> {
    vns_warm(instance, config, None)
}

/// Like [`vns`], with an extra starting point explored after the greedy
/// ones. Its slave passes use the best availability policy.
pub fn vns_warm(instance: Arc<ProblemInstance>, config: &VnsConfig, warm: Option<Placement>) -> Result<VnsOutcome> {
    let clock = Instant::now();
    let mut starts = Vec::new();
    let mut last_err = None;
    for &policy in &config.starts {
        let options = GreedyOptions::new(policy).split(config.split).order(config.request_order);
        match construct(instance.clone(), &options) {
            Ok(c) => starts.push(Start {
                label: policy.label().to_string(),
                placement: c.placement,
                policy,
                used_split: c.used_split,
            }),
            Err(e @ Error::Infeasible(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    if let Some(placement) = warm {
        if !Arc::ptr_eq(placement.instance(), &instance) && **placement.instance() != *instance {
            return Err(Error::input("warm start belongs to another instance"));
        }
        if let Some(r) = placement.unassigned_requests().next() {
            return Err(Error::Unassigned(r));
        }
        starts.push(Start {
            label: "warm".to_string(),
            used_split: placement.split_count() > 0,
            placement,
            policy: Policy::BestAvailability,
        });
    }
    if starts.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::Infeasible("no starting point".into())));
    }
    let mut outcome = explore_starts(starts, config)?;
    outcome.report.runtime_secs = clock.elapsed().as_secs_f64();
    Ok(outcome)
}

/// Explores the given starting points. The result is the placement with the
/// highest objective ever reached, ties going to fewer worst requests and
/// then to the earlier start, so it never falls below any start.
pub fn explore_starts(starts: Vec<Start>, config: &VnsConfig) -> Result<VnsOutcome> {
    if starts.is_empty() {
        return Err(Error::input("no starting point"));
    }
    let run = |(i, start): (usize, Start)| explore(i, start, config);
    let results: Vec<Result<Explored>> = if config.parallel {
        starts.into_par_iter().enumerate().map(run).collect()
    } else {
        starts.into_iter().enumerate().map(run).collect()
    };
    let mut best: Option<(Placement, SolveReport, bool)> = None;
    let mut trace = Vec::new();
    let mut summaries = Vec::new();
    for result in results {
        let ex = result?;
        trace.extend(ex.trace);
        summaries.push(ex.summary);
        let better = match &best {
            None => true,
            Some((_, b, _)) => {
                ex.best_report.objective > b.objective
                    || (ex.best_report.objective == b.objective
                        && ex.best_report.worst_requests.len() < b.worst_requests.len())
            }
        };
        if better {
            best = Some((ex.best, ex.best_report, ex.used_split));
        }
    }
    let (placement, report, used_split) = best.expect("at least one start");
    Ok(VnsOutcome {
        placement,
        report: report.with_algorithm("vns"),
        trace,
        starts: summaries,
        used_split,
    })
}

struct Explored {
    best: Placement,
    best_report: SolveReport,
    used_split: bool,
    trace: Vec<TraceRecord>,
    summary: StartSummary,
}

struct Budget {
    deadline: Option<Instant>,
    evaluations: u64,
    timed_out: bool,
}

impl Budget {
    fn exhausted(&mut self) -> bool {
        if let Some(d) = self.deadline {
            if Instant::now() >= d {
                self.timed_out = true;
            }
        }
        self.timed_out
    }
}

enum Step {
    Found(Placement, SolveReport),
    Exhausted,
    Stop,
}

struct Ctx<'a> {
    current: &'a Placement,
    incumbent: &'a SolveReport,
    policy: Policy,
    budget: &'a mut Budget,
}

impl Ctx<'_> {
    /// Applies `f` to a copy of the incumbent, adds slaves and evaluates.
    fn probe(&mut self, f: impl FnOnce(&mut Placement) -> Result<(), Rejection>) -> Option<Step> {
        if self.budget.exhausted() {
            return Some(Step::Stop);
        }
        let mut cand = self.current.clone();
        f(&mut cand).ok()?;
        add_slaves(&mut cand, self.policy);
        self.budget.evaluations += 1;
        let report = cand.evaluate().ok()?;
        is_improving(&report, self.incumbent).then_some(Step::Found(cand, report))
    }
}

macro_rules! probe {
    ($ctx:expr, $f:expr) => {
        if let Some(step) = $ctx.probe($f) {
            return step;
        }
    };
}

fn explore(index: usize, start: Start, config: &VnsConfig) -> Result<Explored> {
    let clock = Instant::now();
    let mut budget = Budget {
        deadline: config.per_start_time_limit.map(|d| clock + d),
        evaluations: 0,
        timed_out: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);

    let mut current = start.placement;
    let mut report = current.evaluate()?;
    let initial = report.clone();
    let mut best = (current.clone(), report.clone());
    let mut trace = Vec::new();
    let mut accepted = 0;

    'search: while config.max_iterations.is_none_or(|k| accepted < k) {
        let mut worst = report.worst_requests.clone();
        worst.shuffle(&mut rng);
        for &nb in &config.order {
            let mut ctx = Ctx {
                current: &current,
                incumbent: &report,
                policy: start.policy,
                budget: &mut budget,
            };
            match search(nb, &mut ctx, &worst) {
                Step::Found(p, r) => {
                    accepted += 1;
                    trace.push(TraceRecord {
                        start: start.label.clone(),
                        iteration: accepted,
                        operator: nb,
                        delta: r.objective - report.objective,
                        objective: r.objective,
                        worst_count: r.worst_requests.len(),
                        elapsed: clock.elapsed().as_secs_f64(),
                    });
                    current = p;
                    report = r;
                    if report.objective >= best.1.objective {
                        best = (current.clone(), report.clone());
                    }
                    continue 'search;
                }
                Step::Exhausted => {}
                Step::Stop => break 'search,
            }
        }
        break;
    }

    let summary = StartSummary {
        label: start.label,
        initial,
        last: report,
        accepted,
        evaluations: budget.evaluations,
        timed_out: budget.timed_out,
        used_split: start.used_split,
    };
    Ok(Explored {
        best: best.0,
        best_report: best.1,
        used_split: start.used_split,
        trace,
        summary,
    })
}

fn search(nb: Neighborhood, ctx: &mut Ctx<'_>, worst: &[RequestId]) -> Step {
    match nb {
        Neighborhood::VnfSwap => vnf_swap(ctx, worst),
        Neighborhood::SlaveSwap => slave_swap(ctx, worst),
        Neighborhood::RequestSwap => request_swap(ctx, worst),
        Neighborhood::RequestMove => request_move(ctx, worst),
    }
}

/// Masters serving the worst requests, in scan order without repeats.
fn worst_masters(p: &Placement, worst: &[RequestId]) -> Vec<MasterKey> {
    let mut out = Vec::new();
    for &r in worst {
        let vnf = p.instance().request(r).vnf;
        for &(s, _) in p.fragments(r) {
            let key = MasterKey::new(s, vnf);
            if !out.contains(&key) {
                out.push(key);
            }
        }
    }
    out
}

fn all_instances(p: &Placement) -> Vec<InstanceRef> {
    p.vnf_instances()
        .into_iter()
        .map(|i| match i.role {
            Role::Master => InstanceRef::Master(MasterKey::new(i.server, i.vnf)),
            Role::Slave => InstanceRef::Slave {
                master: MasterKey::new(i.protects.expect("slave protects a master"), i.vnf),
                server: i.server,
            },
        })
        .collect()
}

/// Swaps an instance serving or protecting a worst request with an instance
/// on another server, or moves it to another server.
fn vnf_swap(ctx: &mut Ctx<'_>, worst: &[RequestId]) -> Step {
    let current = ctx.current;
    let mut sources = Vec::new();
    for key in worst_masters(current, worst) {
        sources.push(InstanceRef::Master(key));
        for &(s, _) in current.slaves(key) {
            sources.push(InstanceRef::Slave { master: key, server: s });
        }
    }
    let targets = all_instances(current);
    let servers: Vec<ServerId> = current.instance().server_ids().collect();
    for a in sources {
        for &b in &targets {
            if b.server() == a.server() || b == a {
                continue;
            }
            probe!(ctx, |p: &mut Placement| p.swap_instances_in_place(a, Some(b), b.server()));
        }
        for &t in &servers {
            if t == a.server() {
                continue;
            }
            probe!(ctx, |p: &mut Placement| p.swap_instances_in_place(a, None, t));
        }
    }
    Step::Exhausted
}

/// Frees a slave slot and spends it on a slave of a worst request's master.
fn slave_swap(ctx: &mut Ctx<'_>, worst: &[RequestId]) -> Step {
    let current = ctx.current;
    let masters = worst_masters(current, worst);
    let slaves: Vec<(MasterKey, ServerId)> = current
        .masters()
        .flat_map(|k| current.slaves(k).iter().map(move |&(s, _)| (k, s)))
        .collect();
    for (victim, server) in slaves {
        for &m in &masters {
            if m == victim || m.server == server || current.has_slave(m, server) {
                continue;
            }
            probe!(ctx, |p: &mut Placement| {
                p.remove_slave(victim, server)?;
                p.add_slave(m, server)
            });
        }
    }
    Step::Exhausted
}

/// Exchanges the servers of a worst request's fragment and another
/// request's fragment.
fn request_swap(ctx: &mut Ctx<'_>, worst: &[RequestId]) -> Step {
    let current = ctx.current;
    let requests: Vec<RequestId> = current.instance().request_ids().collect();
    for &r in worst {
        let own: Vec<ServerId> = current.fragments(r).iter().map(|&(s, _)| s).collect();
        for &s in &own {
            for &other in &requests {
                if other == r {
                    continue;
                }
                for &(t, _) in current.fragments(other) {
                    if t == s {
                        continue;
                    }
                    probe!(ctx, |p: &mut Placement| p.swap_fragments_in_place(r, s, other, t));
                }
            }
        }
    }
    Step::Exhausted
}

/// Moves a worst request's fragment to another server.
fn request_move(ctx: &mut Ctx<'_>, worst: &[RequestId]) -> Step {
    let current = ctx.current;
    let servers: Vec<ServerId> = current.instance().server_ids().collect();
    for &r in worst {
        let demand = current.instance().request(r).demand;
        for &(s, x) in current.fragments(r) {
            for &t in &servers {
                if t == s || current.residual(t) + crate::EPS_CAP < x * demand {
                    continue;
                }
                probe!(ctx, |p: &mut Placement| p.move_fragment_in_place(r, s, t));
            }
        }
    }
    Step::Exhausted
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::greedy;
    use crate::model::InstanceBuilder;
    use crate::placement::check_constraints;

    fn report(objective: f64, worst: usize) -> SolveReport {
        SolveReport {
            worst_requests: (0..worst).map(RequestId).collect(),
            ..SolveReport::from_availabilities(vec![objective], 0)
        }
    }

    #[test]
    fn improvement_rule() {
        assert!(is_improving(&report(0.9991, 3), &report(0.9990, 1)));
        assert!(is_improving(&report(0.9990, 2), &report(0.9990, 5)));
        assert!(!is_improving(&report(0.9990, 2), &report(0.9990, 2)));
        assert!(!is_improving(&report(0.9989, 1), &report(0.9990, 5)));
    }

    fn sequential() -> VnsConfig {
        VnsConfig {
            parallel: false,
            ..VnsConfig::default()
        }
    }

    #[test]
    fn single_server_is_left_alone() {
        let mut b = InstanceBuilder::new();
        let c = b.cluster("A", 0.9999);
        b.server("S1", c, 100.0, 0.9999);
        let f = b.vnf("f", 0.9999);
        let p = b.access_point("p");
        b.access_link(c, p, 0.9999);
        b.request("r1", f, &[p], 5.0);
        b.request("r2", f, &[p], 5.0);
        let inst = Arc::new(b.build().unwrap());
        let g = greedy(inst.clone(), Policy::BestAvailability, false).unwrap();
        let out = vns(inst, &sequential()).unwrap();
        assert_eq!(out.placement, g);
        assert!(out.trace.is_empty());
    }

    /// Two clusters; the greedy start packs the request onto the weak one.
    fn weak_start() -> Arc<ProblemInstance> {
        let mut b = InstanceBuilder::new();
        let weak = b.cluster("weak", 0.99);
        let strong = b.cluster("strong", 0.99999);
        b.server("S1", weak, 10.0, 0.99);
        b.server("S2", strong, 6.0, 0.99999);
        let f = b.vnf("f", 0.9999);
        let p = b.access_point("p");
        b.access_link(weak, p, 0.99);
        b.access_link(strong, p, 0.99999);
        b.sync_link(weak, strong, 0.9999);
        b.request("r1", f, &[p], 5.0);
        Arc::new(b.build().unwrap())
    }

    #[test]
    fn moves_off_the_weak_cluster() {
        let inst = weak_start();
        let g = greedy(inst.clone(), Policy::FirstFit, false).unwrap();
        let config = VnsConfig {
            starts: vec![Policy::FirstFit],
            ..sequential()
        };
        let out = vns(inst, &config).unwrap();
        assert!(out.report.objective > g.evaluate().unwrap().objective);
        assert_eq!(out.placement.fragments(RequestId(0))[0].0, ServerId(1));
        assert!(check_constraints(&out.placement).is_empty());
        let mut last = f64::NEG_INFINITY;
        for t in &out.trace {
            assert!(t.objective > last - EPS_AVAIL);
            last = t.objective;
        }
    }

    #[test]
    fn iteration_cap_is_respected() {
        let inst = weak_start();
        let config = VnsConfig {
            max_iterations: Some(0),
            starts: vec![Policy::FirstFit],
            ..sequential()
        };
        let out = vns(inst.clone(), &config).unwrap();
        assert!(out.trace.is_empty());
        assert_eq!(out.placement, greedy(inst, Policy::FirstFit, false).unwrap());
    }

    #[test]
    fn infeasible_everywhere() {
        let mut b = InstanceBuilder::new();
        let c = b.cluster("A", 0.9999);
        b.server("S1", c, 10.0, 0.9999);
        let f = b.vnf("f", 0.9999);
        let p = b.access_point("p");
        b.access_link(c, p, 0.9999);
        b.request("r1", f, &[p], 6.0);
        b.request("r2", f, &[p], 6.0);
        let inst = Arc::new(b.build().unwrap());
        let config = VnsConfig {
            split: SplitMode::Off,
            ..sequential()
        };
        assert!(matches!(vns(inst, &config), Err(Error::Infeasible(_))));
    }

    #[test]
    fn neighborhood_labels() {
        for n in Neighborhood::DEFAULT_ORDER {
            assert_eq!(n.label().parse::<Neighborhood>().unwrap(), n);
            assert_eq!(serde_json::to_string(&n).unwrap(), format!("\"{}\"", n.label()));
        }
    }
}
