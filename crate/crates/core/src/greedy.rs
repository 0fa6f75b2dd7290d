//! Greedy construction: assign requests one by one to a server chosen by a
//! bin-packing policy, then add slaves until no master can get another one.
//!
//! With splitting allowed, a request that fits no server is packed piece by
//! piece into servers with spare room, so construction never fails while the
//! total capacity covers the total demand.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ProblemInstance, RequestId, ServerId};
use crate::placement::{MasterKey, Placement};
use crate::EPS_CAP;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Policy {
    /// Smallest leftover after placing the demand.
    #[serde(rename = "bestfit")]
    BestFit,
    /// Lowest server id.
    #[serde(rename = "firstfit")]
    FirstFit,
    /// Highest product of server and cluster availability.
    #[serde(rename = "bestavail")]
    BestAvailability,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::BestAvailability, Policy::BestFit, Policy::FirstFit];

    pub fn label(self) -> &'static str {
        match self {
            Policy::BestFit => "bestfit",
            Policy::FirstFit => "firstfit",
            Policy::BestAvailability => "bestavail",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bestfit" => Ok(Policy::BestFit),
            "firstfit" => Ok(Policy::FirstFit),
            "bestavail" => Ok(Policy::BestAvailability),
            other => Err(Error::input(format!("unknown policy {other:?}"))),
        }
    }
}

/// Whether requests may be split across servers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Off,
    On,
    /// Try without splitting first; split only if that fails.
    #[default]
    Fallback,
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(SplitMode::Off),
            "on" => Ok(SplitMode::On),
            "fallback" => Ok(SplitMode::Fallback),
            other => Err(Error::input(format!("unknown split mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestOrder {
    /// Request id order.
    #[default]
    Input,
    /// Largest demand first, ties by id.
    DemandDesc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreedyOptions {
    pub policy: Policy,
    pub split: SplitMode,
    pub order: RequestOrder,
}

impl GreedyOptions {
    pub fn new(policy: Policy) -> Self {
        GreedyOptions {
            policy,
            split: SplitMode::default(),
            order: RequestOrder::default(),
        }
    }

    pub fn split(mut self, split: SplitMode) -> Self {
        self.split = split;
        self
    }

    pub fn order(mut self, order: RequestOrder) -> Self {
        self.order = order;
        self
    }
}

/// A constructed placement and whether splitting was needed to get it.
#[derive(Debug, Clone)]
pub struct Construction {
    pub placement: Placement,
    pub used_split: bool,
}

fn server_score(instance: &ProblemInstance, s: ServerId) -> f64 {
    let server = instance.server(s);
    server.availability * instance.cluster(server.cluster).availability
}

/// Picks a server for `demand` among `candidates`. Servers that cannot hold
/// the whole demand are discarded; when `split` is set and none can, the
/// servers with any spare room are considered instead. Ties go to the lowest
/// server id. Best fit minimizes the distance between spare room and demand.
pub fn select_server(
    placement: &Placement,
    demand: f64,
    candidates: &[ServerId],
    policy: Policy,
    split: bool,
) -> Option<ServerId> {
    let instance = placement.instance();
    let residuals: Vec<(ServerId, f64)> = candidates.iter().map(|&s| (s, placement.residual(s))).collect();
    let mut pool: Vec<(ServerId, f64)> = residuals
        .iter()
        .copied()
        .filter(|&(_, r)| r + EPS_CAP >= demand)
        .collect();
    if pool.is_empty() && split {
        pool = residuals.into_iter().filter(|&(_, r)| r > EPS_CAP).collect();
    }
    pool.sort_by_key(|&(s, _)| s);
    let mut best: Option<(ServerId, f64)> = None;
    for (s, residual) in pool {
        let key = match policy {
            Policy::FirstFit => return Some(s),
            Policy::BestFit => (residual - demand).abs(),
            Policy::BestAvailability => -server_score(instance, s),
        };
        if best.is_none_or(|(_, k)| key < k) {
            best = Some((s, key));
        }
    }
    best.map(|(s, _)| s)
}

/// Greedy construction with a fixed split setting, requests in id order.
pub fn greedy(instance: Arc<ProblemInstance>, policy: Policy, split: bool) -> Result<Placement> {
    let mode = if split { SplitMode::On } else { SplitMode::Off };
    construct(instance, &GreedyOptions::new(policy).split(mode)).map(|c| c.placement)
}

/// Greedy construction with full options, including the split fallback.
pub fn construct(instance: Arc<ProblemInstance>, options: &GreedyOptions) -> Result<Construction> {
    let order = request_order(&instance, options.order);
    match options.split {
        SplitMode::Off => build(instance, &order, options.policy, false).map(|p| Construction {
            placement: p,
            used_split: false,
        }),
        SplitMode::On => build(instance, &order, options.policy, true).map(|p| Construction {
            placement: p,
            used_split: true,
        }),
        SplitMode::Fallback => match build(instance.clone(), &order, options.policy, false) {
            Ok(p) => Ok(Construction {
                placement: p,
                used_split: false,
            }),
            Err(Error::Infeasible(_)) => build(instance, &order, options.policy, true).map(|p| Construction {
                placement: p,
                used_split: true,
            }),
            Err(e) => Err(e),
        },
    }
}

fn request_order(instance: &ProblemInstance, order: RequestOrder) -> Vec<RequestId> {
    let mut ids: Vec<RequestId> = instance.request_ids().collect();
    if order == RequestOrder::DemandDesc {
        ids.sort_by(|a, b| {
            instance
                .request(*b)
                .demand
                .total_cmp(&instance.request(*a).demand)
                .then(a.cmp(b))
        });
    }
    ids
}

fn build(instance: Arc<ProblemInstance>, order: &[RequestId], policy: Policy, split: bool) -> Result<Placement> {
    let servers: Vec<ServerId> = instance.server_ids().collect();
    let mut placement = Placement::new(instance.clone());
    for &r in order {
        assign_request(&mut placement, r, &servers, policy, split)?;
    }
    add_slaves(&mut placement, policy);
    Ok(placement)
}

/// Assigns whatever is left unassigned in `placement`, in request id order,
/// then runs a slave pass. Used to repair a warm start after the instance
/// changed under it.
pub fn complete(placement: &mut Placement, policy: Policy, split: SplitMode) -> Result<()> {
    let servers: Vec<ServerId> = placement.instance().server_ids().collect();
    let pending: Vec<RequestId> = placement.unassigned_requests().collect();
    let attempt = |p: &mut Placement, split: bool| -> Result<()> {
        for &r in &pending {
            assign_request(p, r, &servers, policy, split)?;
        }
        Ok(())
    };
    let mut work = placement.clone();
    let result = match split {
        SplitMode::Off => attempt(&mut work, false),
        SplitMode::On => attempt(&mut work, true),
        SplitMode::Fallback => attempt(&mut work, false).or_else(|_| {
            work = placement.clone();
            attempt(&mut work, true)
        }),
    };
    result?;
    add_slaves(&mut work, policy);
    *placement = work;
    Ok(())
}

/// Assigns the unassigned part of a request, splitting it if allowed.
fn assign_request(
    placement: &mut Placement,
    request: RequestId,
    servers: &[ServerId],
    policy: Policy,
    split: bool,
) -> Result<()> {
    let demand = placement.instance().request(request).demand;
    let mut remaining = 1.0 - placement.assigned_fraction(request);
    while remaining > crate::EPS_FRACTION {
        let need = remaining * demand;
        let Some(s) = select_server(placement, need, servers, policy, split) else {
            return Err(Error::Infeasible(format!(
                "{request} (demand {demand}) fits no server"
            )));
        };
        let residual = placement.residual(s);
        let fraction = if residual + EPS_CAP >= need {
            remaining
        } else {
            residual / demand
        };
        placement
            .assign_fraction(request, s, fraction)
            .map_err(|e| Error::Infeasible(format!("{request}: {e}")))?;
        remaining -= fraction;
    }
    Ok(())
}

/// Repeatedly offers every master, in `(server, vnf)` order, one more slave
/// on a server chosen by `policy` among those not yet hosting the master or
/// one of its slaves. Stops after a pass that adds nothing. Returns the
/// number of slaves added.
pub fn add_slaves(placement: &mut Placement, policy: Policy) -> usize {
    let servers: Vec<ServerId> = placement.instance().server_ids().collect();
    let mut added = 0;
    loop {
        let mut found = false;
        let masters: Vec<MasterKey> = placement.masters().collect();
        for key in masters {
            let Some(reserved) = placement.master_reserved(key) else { continue };
            let candidates: Vec<ServerId> = servers
                .iter()
                .copied()
                .filter(|&s| s != key.server && !placement.has_slave(key, s))
                .collect();
            if let Some(s) = select_server(placement, reserved, &candidates, policy, false) {
                if placement.add_slave(key, s).is_ok() {
                    added += 1;
                    found = true;
                }
            }
        }
        if !found {
            return added;
        }
    }
}

/// Next-Fit packing with item fragmentation: servers are filled in id
/// order, a request that overflows the open server is split and the next
/// server opened. No slaves are added.
pub fn next_fit_split(instance: Arc<ProblemInstance>) -> Result<Placement> {
    let demand = instance.total_demand();
    let capacity = instance.total_capacity();
    if demand > capacity + EPS_CAP {
        return Err(Error::Infeasible(format!(
            "total demand {demand} exceeds total capacity {capacity}"
        )));
    }
    let n = instance.servers().len();
    let mut placement = Placement::new(instance.clone());
    let mut open = 0;
    for r in instance.request_ids() {
        let d = instance.request(r).demand;
        let mut remaining = 1.0;
        loop {
            if open >= n {
                return Err(Error::Infeasible(format!("{r} overflows the last server")));
            }
            let s = ServerId(open);
            let residual = placement.residual(s);
            if residual + EPS_CAP >= remaining * d {
                placement
                    .assign_fraction(r, s, remaining)
                    .map_err(|e| Error::Infeasible(e.to_string()))?;
                break;
            }
            if residual > EPS_CAP {
                let fraction = residual / d;
                placement
                    .assign_fraction(r, s, fraction)
                    .map_err(|e| Error::Infeasible(e.to_string()))?;
                remaining -= fraction;
            }
            open += 1;
        }
    }
    Ok(placement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InstanceBuilder;
    use crate::placement::check_constraints;

    fn instance(capacities: &[f64], avail: &[f64], demands: &[f64]) -> Arc<ProblemInstance> {
        let mut b = InstanceBuilder::new();
        let c = b.cluster("A", 0.9999);
        for (i, (&q, &a)) in capacities.iter().zip(avail).enumerate() {
            b.server(format!("S{}", i + 1), c, q, a);
        }
        let f = b.vnf("f", 0.9999);
        let p = b.access_point("p");
        b.access_link(c, p, 0.9999);
        for (i, &d) in demands.iter().enumerate() {
            b.request(format!("r{}", i + 1), f, &[p], d);
        }
        Arc::new(b.build().unwrap())
    }

    const S1: ServerId = ServerId(0);
    const S2: ServerId = ServerId(1);

    #[test]
    fn select_policies() {
        let inst = instance(&[10.0, 7.0], &[0.9995, 0.99999], &[]);
        let p = Placement::new(inst);
        let all = [S1, S2];
        assert_eq!(select_server(&p, 7.0, &all, Policy::BestFit, false), Some(S2));
        assert_eq!(select_server(&p, 7.0, &all, Policy::FirstFit, false), Some(S1));
        assert_eq!(select_server(&p, 7.0, &all, Policy::BestAvailability, false), Some(S2));
        assert_eq!(select_server(&p, 11.0, &all, Policy::FirstFit, false), None);
        // with split, the best fit is the server closest to holding it all
        assert_eq!(select_server(&p, 11.0, &all, Policy::BestFit, true), Some(S1));
        assert_eq!(select_server(&p, 11.0, &all, Policy::FirstFit, true), Some(S1));
    }

    #[test]
    fn best_availability_ties_go_to_lowest_id() {
        let inst = instance(&[10.0, 10.0, 10.0], &[0.9999, 0.99999, 0.99999], &[]);
        let p = Placement::new(inst);
        let all = [ServerId(2), ServerId(1), ServerId(0)];
        assert_eq!(select_server(&p, 1.0, &all, Policy::BestAvailability, false), Some(ServerId(1)));
    }

    #[test]
    fn forced_assignment() {
        let inst = instance(&[10.0, 10.0], &[0.9999, 0.9999], &[6.0, 6.0]);
        let p = greedy(inst, Policy::FirstFit, false).unwrap();
        assert_eq!(p.fragments(RequestId(0)), &[(S1, 1.0)]);
        assert_eq!(p.fragments(RequestId(1)), &[(S2, 1.0)]);
        assert!(check_constraints(&p).is_empty());
    }

    #[test]
    fn unsplit_overflow_is_infeasible() {
        let inst = instance(&[10.0], &[0.9999], &[6.0, 6.0]);
        for policy in Policy::ALL {
            assert!(matches!(greedy(inst.clone(), policy, false), Err(Error::Infeasible(_))));
        }
    }

    #[test]
    fn split_packs_the_overflow() {
        let inst = instance(&[10.0, 2.0], &[0.9999, 0.9999], &[6.0, 6.0]);
        let built = greedy(inst, Policy::FirstFit, true).unwrap();
        // r2 takes the 4 left on S1 and 2 on S2
        let frags = built.fragments(RequestId(1));
        assert_eq!(frags.len(), 2);
        assert_eq!(frags[0].0, S1);
        assert!((frags[0].1 * 6.0 - 4.0).abs() < 1e-12);
        assert!((frags[1].1 * 6.0 - 2.0).abs() < 1e-12);
        assert!(check_constraints(&built).is_empty());
    }

    #[test]
    fn fallback_reports_split_use() {
        let tight = instance(&[10.0, 10.0], &[0.9999, 0.9999], &[6.0, 6.0, 6.0]);
        let c = construct(tight, &GreedyOptions::new(Policy::BestFit)).unwrap();
        assert!(c.used_split);
        let loose = instance(&[10.0, 10.0], &[0.9999, 0.9999], &[6.0, 6.0]);
        let c = construct(loose, &GreedyOptions::new(Policy::BestFit)).unwrap();
        assert!(!c.used_split);
    }

    #[test]
    fn demand_desc_order_packs_better() {
        // input order: 3 then 7 on q=7,3 fails with first fit; sorted succeeds
        let inst = instance(&[7.0, 3.0], &[0.9999, 0.9999], &[3.0, 7.0]);
        assert!(greedy(inst.clone(), Policy::FirstFit, false).is_err());
        let opts = GreedyOptions::new(Policy::FirstFit)
            .split(SplitMode::Off)
            .order(RequestOrder::DemandDesc);
        assert!(construct(inst, &opts).is_ok());
    }

    #[test]
    fn slaves_fill_spare_capacity() {
        let inst = instance(&[10.0, 10.0, 10.0], &[0.9999, 0.9999, 0.9999], &[4.0]);
        let p = greedy(inst, Policy::FirstFit, false).unwrap();
        let key = MasterKey::new(S1, crate::VnfTypeId(0));
        assert_eq!(p.slaves(key), &[(S2, 4.0), (ServerId(2), 4.0)]);
        assert!(check_constraints(&p).is_empty());
    }

    #[test]
    fn next_fit_trace() {
        let inst = instance(&[10.0, 10.0], &[0.9999, 0.9999], &[6.0, 6.0]);
        let p = next_fit_split(inst).unwrap();
        assert_eq!(p.fragments(RequestId(0)), &[(S1, 1.0)]);
        let f = p.fragments(RequestId(1));
        assert_eq!(f.len(), 2);
        assert!((f[0].1 * 6.0 - 4.0).abs() < 1e-12 && (f[1].1 * 6.0 - 2.0).abs() < 1e-12);
        assert_eq!(p.slave_count(), 0);
    }

    #[test]
    fn next_fit_tight_and_oversized() {
        let tight = instance(&[10.0, 10.0], &[0.9999, 0.9999], &[5.0, 7.0, 8.0]);
        let p = next_fit_split(tight).unwrap();
        assert!(check_constraints(&p).is_empty());
        assert!(p.residual(S1).abs() < 1e-9 && p.residual(S2).abs() < 1e-9);

        let big = instance(&[10.0, 10.0], &[0.9999, 0.9999], &[20.0]);
        let p = next_fit_split(big).unwrap();
        assert_eq!(p.fragments(RequestId(0)), &[(S1, 0.5), (S2, 0.5)]);

        let over = instance(&[10.0], &[0.9999], &[11.0]);
        assert!(matches!(next_fit_split(over), Err(Error::Infeasible(_))));
    }

    #[test]
    fn complete_fills_the_gaps() {
        let inst = instance(&[10.0, 10.0], &[0.9999, 0.9999], &[6.0, 6.0, 6.0]);
        let mut p = Placement::new(inst);
        p.assign_fraction(RequestId(1), S2, 1.0).unwrap();
        assert!(complete(&mut p.clone(), Policy::FirstFit, SplitMode::Off).is_err());
        complete(&mut p, Policy::FirstFit, SplitMode::Fallback).unwrap();
        assert_eq!(p.fragments(RequestId(1)), &[(S2, 1.0)]);
        assert!(p.unassigned_requests().next().is_none());
        assert!(check_constraints(&p).is_empty());
    }

    #[test]
    fn policy_labels_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.label().parse::<Policy>().unwrap(), p);
        }
        assert!("worstfit".parse::<Policy>().is_err());
        assert_eq!("fallback".parse::<SplitMode>().unwrap(), SplitMode::Fallback);
    }
}
