//! Exact max-min placement for tiny instances by branch and bound.
//!
//! Requests are branched one at a time over their assignment configurations:
//! a set of master servers with fractions on a grid, and for every master
//! opened by the request, its set of slave servers. A master's slave set is
//! fixed when it opens and protects every later request it serves; slaves
//! reserve as much as their master. Giving every request of a master the
//! master's full slave set never lowers availability, so this loses nothing
//! against per-request protection sets.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::availability::fragment_value;
use crate::error::{Error, Result};
use crate::model::{ProblemInstance, RequestId, ServerId, VnfTypeId};
use crate::placement::{MasterKey, Placement, SolveReport};
use crate::EPS_CAP;

/// Largest server count a bitmask search accepts.
const MASK_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactConfig {
    pub max_servers: usize,
    pub max_requests: usize,
    /// Fractions are multiples of `1 / grid`; `None` forbids splitting.
    pub split_grid: Option<u32>,
    pub time_limit: Option<Duration>,
    pub node_budget: Option<u64>,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            max_servers: 4,
            max_requests: 8,
            split_grid: None,
            time_limit: None,
            node_budget: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExactOutcome {
    pub placement: Placement,
    pub report: SolveReport,
    /// False when the node budget or time limit cut the search short.
    pub optimal: bool,
    pub nodes: u64,
}

pub fn exact_solve(instance: Arc<ProblemInstance>, config: &ExactConfig) -> Result<ExactOutcome> {
    let clock = Instant::now();
    let n_servers = instance.servers().len();
    let n_requests = instance.requests().len();
    if n_servers > config.max_servers.min(MASK_LIMIT) || n_requests > config.max_requests {
        return Err(Error::OverBudget(format!(
            "{n_servers} servers and {n_requests} requests exceed the limits of {} servers and {} requests",
            config.max_servers.min(MASK_LIMIT),
            config.max_requests
        )));
    }
    let grid = config.split_grid.unwrap_or(1).max(1);
    let mut search = Search::new(&instance, grid, config, clock);
    search.visit(0, 1.0);
    let optimal = !search.stopped;
    let nodes = search.nodes;
    let Some(best) = search.best else {
        return Err(if optimal {
            Error::Infeasible("no placement satisfies the capacities".into())
        } else {
            Error::OverBudget(format!("no feasible placement found within {nodes} nodes"))
        });
    };

    let mut placement = Placement::new(instance.clone());
    for r in instance.request_ids() {
        for &(s, k) in &best.choice[r.0] {
            placement
                .assign_fraction(r, ServerId(s), f64::from(k) / f64::from(grid))
                .map_err(|e| Error::Infeasible(format!("rebuilding optimum: {e}")))?;
        }
    }
    for &(key, mask) in &best.slaves {
        for t in bits(mask) {
            placement
                .add_slave(key, ServerId(t))
                .map_err(|e| Error::Infeasible(format!("rebuilding optimum: {e}")))?;
        }
    }
    let mut report = placement.evaluate()?.with_algorithm("exact");
    debug_assert_eq!(report.objective, best.value);
    report.runtime_secs = clock.elapsed().as_secs_f64();
    Ok(ExactOutcome {
        placement,
        report,
        optimal,
        nodes,
    })
}

fn bits(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |i| mask & (1 << i) != 0)
}

#[derive(Debug, Clone, Copy)]
struct MasterState {
    slaves: u32,
}

struct Best {
    value: f64,
    choice: Vec<Vec<(usize, u32)>>,
    slaves: Vec<(MasterKey, u32)>,
}

struct Search<'a> {
    inst: &'a ProblemInstance,
    grid: u32,
    n_vnfs: usize,
    order: Vec<RequestId>,
    /// `suffix_bound[i]`: smallest availability bound over `order[i..]`.
    suffix_bound: Vec<f64>,
    /// Per request, its fragment layouts as `(server, grid units)`.
    layouts: Vec<Vec<Vec<(usize, u32)>>>,
    /// Per master server, candidate slave masks with most slaves first.
    slave_masks: Vec<Vec<u32>>,
    used: Vec<f64>,
    masters: Vec<Option<MasterState>>,
    choice: Vec<Vec<(usize, u32)>>,
    memo: HashMap<(VnfTypeId, usize, usize, u32), f64>,
    best: Option<Best>,
    nodes: u64,
    node_budget: Option<u64>,
    deadline: Option<Instant>,
    stopped: bool,
}

impl<'a> Search<'a> {
    fn new(inst: &'a ProblemInstance, grid: u32, config: &ExactConfig, clock: Instant) -> Self {
        let n = inst.servers().len();
        let all: u32 = if n == 0 { 0 } else { (1u32 << n) - 1 };
        let slave_masks = (0..n)
            .map(|s| {
                let mut masks: Vec<u32> = (0..=all).filter(|m| m & (1 << s) == 0).collect();
                masks.sort_by_key(|m| (std::cmp::Reverse(m.count_ones()), *m));
                masks
            })
            .collect();
        let mut layouts = Vec::new();
        for _ in inst.request_ids() {
            let mut out = Vec::new();
            compositions(n, grid, 0, &mut Vec::new(), &mut out);
            layouts.push(out);
        }
        let mut search = Search {
            inst,
            grid,
            n_vnfs: inst.vnf_types().len(),
            order: Vec::new(),
            suffix_bound: Vec::new(),
            layouts,
            slave_masks,
            used: vec![0.0; n],
            masters: vec![None; n * inst.vnf_types().len()],
            choice: vec![Vec::new(); inst.requests().len()],
            memo: HashMap::new(),
            best: None,
            nodes: 0,
            node_budget: config.node_budget,
            deadline: config.time_limit.map(|d| clock + d),
            stopped: false,
        };
        let bounds: Vec<f64> = inst
            .request_ids()
            .map(|r| {
                (0..n)
                    .map(|s| search.value(r, s, all))
                    .fold(0.0, f64::max)
            })
            .collect();
        let mut order: Vec<RequestId> = inst.request_ids().collect();
        order.sort_by(|a, b| bounds[a.0].total_cmp(&bounds[b.0]).then(a.cmp(b)));
        let mut suffix = vec![1.0_f64; order.len() + 1];
        for i in (0..order.len()).rev() {
            // slack against rounding in the monotonicity argument
            suffix[i] = suffix[i + 1].min(bounds[order[i].0] * (1.0 + 1e-12));
        }
        search.order = order;
        search.suffix_bound = suffix;
        search
    }

    fn value(&mut self, r: RequestId, master: usize, protection: u32) -> f64 {
        let inst = self.inst;
        let vnf = inst.request(r).vnf;
        let class = inst.ap_class(r);
        *self.memo.entry((vnf, class, master, protection)).or_insert_with(|| {
            let servers: Vec<ServerId> = bits(protection).map(ServerId).collect();
            fragment_value(inst, vnf, inst.class_access(class), ServerId(master), &servers)
        })
    }

    fn best_value(&self) -> f64 {
        self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.value)
    }

    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.node_budget.is_some_and(|b| self.nodes > b) {
            self.stopped = true;
        }
        if self.nodes % 256 == 0 && self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.stopped = true;
        }
        !self.stopped
    }

    fn visit(&mut self, depth: usize, partial: f64) {
        if !self.tick() {
            return;
        }
        if depth == self.order.len() {
            if partial > self.best_value() {
                self.best = Some(Best {
                    value: partial,
                    choice: self.choice.clone(),
                    slaves: self
                        .masters
                        .iter()
                        .enumerate()
                        .filter_map(|(i, m)| {
                            m.map(|m| {
                                let key = MasterKey::new(ServerId(i / self.n_vnfs), VnfTypeId(i % self.n_vnfs));
                                (key, m.slaves)
                            })
                        })
                        .collect(),
                });
            }
            return;
        }
        if partial.min(self.suffix_bound[depth]) <= self.best_value() {
            return;
        }
        let r = self.order[depth];
        for layout in 0..self.layouts[r.0].len() {
            self.place(depth, r, layout, 0, 1.0, partial);
            if self.stopped {
                return;
            }
        }
    }

    fn fits(&self, server: usize, delta: f64) -> bool {
        self.used[server] + delta <= self.inst.server(ServerId(server)).capacity + EPS_CAP
    }

    fn reserve(&mut self, server: usize, slaves: u32, delta: f64) {
        self.used[server] += delta;
        for t in bits(slaves) {
            self.used[t] += delta;
        }
    }

    fn place(&mut self, depth: usize, r: RequestId, layout: usize, i: usize, value: f64, partial: f64) {
        if i == self.layouts[r.0][layout].len() {
            self.visit(depth + 1, partial.min(value));
            return;
        }
        if partial.min(value) <= self.best_value() {
            return;
        }
        let (s, k) = self.layouts[r.0][layout][i];
        let request = self.inst.request(r);
        let delta = request.demand * f64::from(k) / f64::from(self.grid);
        let idx = s * self.n_vnfs + request.vnf.0;
        self.choice[r.0].push((s, k));
        match self.masters[idx] {
            Some(m) => {
                if self.fits(s, delta) && bits(m.slaves).all(|t| self.fits(t, delta)) {
                    let v = self.value(r, s, m.slaves | (1 << s));
                    let saved_used = self.used.clone();
                    self.reserve(s, m.slaves, delta);
                    self.place(depth, r, layout, i + 1, value * v, partial);
                    self.used = saved_used;
                }
            }
            None if self.fits(s, delta) => {
                for mi in 0..self.slave_masks[s].len() {
                    let mask = self.slave_masks[s][mi];
                    if !bits(mask).all(|t| self.fits(t, delta)) {
                        continue;
                    }
                    let v = self.value(r, s, mask | (1 << s));
                    let saved_used = self.used.clone();
                    self.reserve(s, mask, delta);
                    self.masters[idx] = Some(MasterState { slaves: mask });
                    self.place(depth, r, layout, i + 1, value * v, partial);
                    self.masters[idx] = None;
                    self.used = saved_used;
                    if self.stopped {
                        break;
                    }
                }
            }
            None => {}
        }
        self.choice[r.0].pop();
    }
}

/// All ways to write `units` as positive parts over distinct servers taken
/// in increasing order, starting at `from`.
fn compositions(n: usize, units: u32, from: usize, prefix: &mut Vec<(usize, u32)>, out: &mut Vec<Vec<(usize, u32)>>) {
    if units == 0 {
        out.push(prefix.clone());
        return;
    }
    for s in from..n {
        for k in (1..=units).rev() {
            prefix.push((s, k));
            compositions(n, units - k, s + 1, prefix, out);
            prefix.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::availability::{fragment_availability, Fragment};
    use crate::model::InstanceBuilder;
    use crate::placement::check_constraints;

    #[test]
    fn single_server_is_forced() {
        let mut b = InstanceBuilder::new();
        let c = b.cluster("A", 0.9999);
        b.server("S1", c, 10.0, 0.9995);
        let f = b.vnf("f", 0.99995);
        let p = b.access_point("p");
        b.access_link(c, p, 0.9999);
        b.request("r", f, &[p], 4.0);
        let inst = Arc::new(b.build().unwrap());
        let out = exact_solve(inst.clone(), &ExactConfig::default()).unwrap();
        let expected = fragment_availability(&inst, RequestId(0), &Fragment::new(ServerId(0), [])).unwrap();
        assert_eq!(out.report.objective, expected);
        assert!(out.optimal);
    }

    #[test]
    fn master_goes_to_the_strong_cluster() {
        let mut b = InstanceBuilder::new();
        let strong = b.cluster("strong", 0.99999);
        let weak = b.cluster("weak", 0.9995);
        b.server("S1", weak, 10.0, 0.9995);
        b.server("S2", strong, 10.0, 0.99999);
        let f = b.vnf("f", 0.9999);
        let p = b.access_point("p");
        b.access_link(strong, p, 0.99999);
        b.access_link(weak, p, 0.9995);
        b.sync_link(strong, weak, 0.9999);
        b.request("r", f, &[p], 5.0);
        let inst = Arc::new(b.build().unwrap());
        let out = exact_solve(inst.clone(), &ExactConfig::default()).unwrap();
        let s1 = ServerId(0);
        let s2 = ServerId(1);
        let mut candidates = Vec::new();
        for master in [s1, s2] {
            let other = if master == s1 { s2 } else { s1 };
            for slaves in [vec![], vec![other]] {
                let frag = Fragment::new(master, slaves);
                candidates.push(fragment_availability(&inst, RequestId(0), &frag).unwrap());
            }
        }
        let hand = candidates.iter().copied().fold(0.0, f64::max);
        assert_eq!(out.report.objective, hand);
        assert_eq!(out.placement.fragments(RequestId(0))[0].0, s2);
        assert_eq!(out.placement.slave_count(), 1);
        assert!(check_constraints(&out.placement).is_empty());
    }

    fn three_by_four() -> Arc<ProblemInstance> {
        let mut b = InstanceBuilder::new();
        let c = b.cluster("A", 0.9999);
        for i in 0..3 {
            b.server(format!("S{i}"), c, 10.0, 0.9999);
        }
        let f = b.vnf("f", 0.9999);
        let p = b.access_point("p");
        b.access_link(c, p, 0.9999);
        for i in 0..4 {
            b.request(format!("r{i}"), f, &[p], 6.0);
        }
        Arc::new(b.build().unwrap())
    }

    #[test]
    fn unsplit_packing_is_infeasible() {
        assert!(matches!(
            exact_solve(three_by_four(), &ExactConfig::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn split_grid_rescues_packing() {
        let config = ExactConfig {
            split_grid: Some(3),
            ..ExactConfig::default()
        };
        let out = exact_solve(three_by_four(), &config).unwrap();
        assert!(out.optimal);
        assert!(out.placement.split_count() > 0);
        assert!(check_constraints(&out.placement).is_empty());
    }

    #[test]
    fn limits_are_enforced() {
        let config = ExactConfig {
            max_servers: 2,
            ..ExactConfig::default()
        };
        assert!(matches!(exact_solve(three_by_four(), &config), Err(Error::OverBudget(_))));
    }

    #[test]
    fn node_budget_clears_optimality() {
        let mut b = InstanceBuilder::new();
        let c = b.cluster("A", 0.9999);
        let d = b.cluster("B", 0.9995);
        for i in 0..4 {
            b.server(format!("S{i}"), if i % 2 == 0 { c } else { d }, 40.0, 0.9999);
        }
        let f = b.vnf("f", 0.9999);
        let p = b.access_point("p");
        b.access_link(c, p, 0.9999);
        b.access_link(d, p, 0.99995);
        b.sync_link(c, d, 0.9999);
        for i in 0..6 {
            b.request(format!("r{i}"), f, &[p], 3.0 + i as f64);
        }
        let inst = Arc::new(b.build().unwrap());
        let full = exact_solve(inst.clone(), &ExactConfig::default()).unwrap();
        assert!(full.optimal);
        let cut = exact_solve(
            inst,
            &ExactConfig {
                node_budget: Some(20),
                ..ExactConfig::default()
            },
        )
        .unwrap();
        assert!(!cut.optimal);
        assert!(cut.report.objective <= full.report.objective);
    }

    #[test]
    fn compositions_of_halves() {
        let mut out = Vec::new();
        compositions(3, 2, 0, &mut Vec::new(), &mut out);
        // three whole placements and three half/half pairs
        assert_eq!(out.len(), 6);
    }
}
