//! From-scratch verification of a placement against the model constraints.
//!
//! Works only from the externally visible instances and fragments, so it does
//! not share bookkeeping with the incremental ledgers it verifies.

use std::collections::BTreeMap;
use std::fmt;

use crate::model::{ServerId, VnfTypeId};
use crate::{EPS_CAP, EPS_FRACTION};

use super::{Placement, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// Each request's fractions sum to one.
    Assignment,
    /// A positive fraction on a server needs a master of the request's type there.
    FractionLink,
    /// Demand served by a master does not exceed its reservation.
    MasterReservation,
    /// A slave reserves at least its master's reservation, on another server.
    SlaveReservation,
    /// Reservations on a server do not exceed its capacity.
    Capacity,
    /// A request has at most one fragment per master server.
    SingleConfiguration,
    /// At most one master per (server, type) and one slave per (master, server).
    UniqueInstances,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintViolation {
    pub constraint: Constraint,
    pub detail: String,
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.constraint, self.detail)
    }
}

pub fn check_constraints(placement: &Placement) -> Vec<ConstraintViolation> {
    let inst = placement.instance();
    let mut out = Vec::new();
    let mut fail = |constraint, detail: String| out.push(ConstraintViolation { constraint, detail });

    let mut u: BTreeMap<(ServerId, VnfTypeId), f64> = BTreeMap::new();
    let mut v: BTreeMap<(VnfTypeId, ServerId, ServerId), f64> = BTreeMap::new();
    for i in placement.vnf_instances() {
        match i.role {
            Role::Master => {
                if u.insert((i.server, i.vnf), i.reserved).is_some() {
                    fail(Constraint::UniqueInstances, format!("two masters of {} on {}", i.vnf, i.server));
                }
            }
            Role::Slave => {
                let master = i.protects.expect("slave without master");
                if v.insert((i.vnf, master, i.server), i.reserved).is_some() {
                    fail(
                        Constraint::UniqueInstances,
                        format!("two slaves of ({master}, {}) on {}", i.vnf, i.server),
                    );
                }
            }
        }
    }

    let mut served: BTreeMap<(ServerId, VnfTypeId), f64> = BTreeMap::new();
    for r in inst.request_ids() {
        let req = inst.request(r);
        let frags = placement.fragments(r);
        let total: f64 = frags.iter().map(|&(_, x)| x).sum();
        if (total - 1.0).abs() > EPS_FRACTION {
            fail(Constraint::Assignment, format!("{r} assigned fraction {total}"));
        }
        let mut servers: Vec<ServerId> = frags.iter().map(|&(s, _)| s).collect();
        servers.sort();
        servers.dedup();
        if servers.len() != frags.len() {
            fail(Constraint::SingleConfiguration, format!("{r} has two fragments on one server"));
        }
        for &(s, x) in frags {
            if x > 0.0 && !u.contains_key(&(s, req.vnf)) {
                fail(Constraint::FractionLink, format!("{r} on {s} without a master of {}", req.vnf));
            }
            *served.entry((s, req.vnf)).or_default() += req.demand * x;
        }
    }
    for (&(s, f), &load) in &served {
        let reserved = u.get(&(s, f)).copied().unwrap_or(0.0);
        if load > reserved + EPS_CAP {
            fail(
                Constraint::MasterReservation,
                format!("master ({s}, {f}) serves {load} but reserves {reserved}"),
            );
        }
    }
    for (&(f, master, slave), &reserved) in &v {
        if master == slave {
            fail(Constraint::SlaveReservation, format!("slave of ({master}, {f}) on its master's server"));
        }
        match u.get(&(master, f)) {
            None => fail(Constraint::SlaveReservation, format!("slave on {slave} of missing master ({master}, {f})")),
            Some(&m) if reserved + EPS_CAP < m => fail(
                Constraint::SlaveReservation,
                format!("slave on {slave} reserves {reserved} < master ({master}, {f}) {m}"),
            ),
            _ => {}
        }
    }
    let mut used = vec![0.0; inst.servers().len()];
    for (&(s, _), &r) in &u {
        used[s.0] += r;
    }
    for (&(_, _, s), &r) in &v {
        used[s.0] += r;
    }
    for (i, &load) in used.iter().enumerate() {
        let q = inst.servers()[i].capacity;
        if load > q + EPS_CAP {
            fail(Constraint::Capacity, format!("server {i} uses {load} of {q}"));
        }
    }
    out
}
