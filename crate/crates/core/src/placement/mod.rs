//! Solution state: master and slave VNF instances, request fragments, and the
//! resource reservations they imply.
//!
//! A master instance is identified by its `(server, vnf)` pair; there is at
//! most one per pair. Its reservation is the demand assigned to it. Each
//! slave lives on a different server than its master and reserves at least
//! as much as the master. A fragment of a request is served by a master and
//! protected by all of that master's slaves.
//!
//! Primitive operations either succeed or leave the placement unchanged.

mod check;
mod export;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use check::{check_constraints, Constraint, ConstraintViolation};
pub use export::{AssignmentExport, FragmentExport, InstanceExport, PlacementExport};

use crate::availability::{fragment_value, AssignmentConfiguration, Fragment};
use crate::error::{Error, Result};
use crate::model::{ProblemInstance, RequestId, ServerId, VnfTypeId};
use crate::{EPS_AVAIL, EPS_CAP, EPS_FRACTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MasterKey {
    pub server: ServerId,
    pub vnf: VnfTypeId,
}

impl MasterKey {
    pub fn new(server: ServerId, vnf: VnfTypeId) -> Self {
        MasterKey { server, vnf }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Master,
    Slave,
}

/// A VNF instance as seen from outside.
#[derive(Debug, Clone, PartialEq)]
pub struct VnfInstance {
    pub server: ServerId,
    pub vnf: VnfTypeId,
    pub role: Role,
    pub reserved: f64,
    /// Server of the protected master, for slaves.
    pub protects: Option<ServerId>,
}

/// Reference to a master or to one of its slaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InstanceRef {
    Master(MasterKey),
    Slave { master: MasterKey, server: ServerId },
}

impl InstanceRef {
    pub fn server(&self) -> ServerId {
        match *self {
            InstanceRef::Master(k) => k.server,
            InstanceRef::Slave { server, .. } => server,
        }
    }

    pub fn master(&self) -> MasterKey {
        match *self {
            InstanceRef::Master(k) => k,
            InstanceRef::Slave { master, .. } => master,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Rejection {
    #[error("{server} lacks capacity: needs {needed}, residual {residual}")]
    Capacity {
        server: ServerId,
        needed: f64,
        residual: f64,
    },
    #[error("a slave cannot share its master's server")]
    SlaveOnMasterServer,
    #[error("{server} already hosts a slave of this master")]
    DuplicateSlave { server: ServerId },
    #[error("no master {0:?}")]
    NoSuchMaster(MasterKey),
    #[error("no slave of {master:?} on {server}")]
    NoSuchSlave { master: MasterKey, server: ServerId },
    #[error("no fragment of {request} on {server}")]
    NoSuchFragment { request: RequestId, server: ServerId },
    #[error("invalid fraction {0}")]
    InvalidFraction(f64),
    #[error("unknown {0}")]
    Unknown(String),
    #[error("move does not change the placement")]
    NoOp,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Master {
    /// Sum of `demand * fraction` over `load`, in load order.
    reserved: f64,
    /// Requests served, sorted by id, with their fractions.
    load: Vec<(RequestId, f64)>,
    /// Slave servers, sorted, with their reservations.
    slaves: Vec<(ServerId, f64)>,
}

#[derive(Debug, Clone)]
pub struct Placement {
    instance: Arc<ProblemInstance>,
    /// Indexed by `server * |F| + vnf`.
    masters: Vec<Option<Master>>,
    /// Per request, sorted by master server.
    fragments: Vec<Vec<(ServerId, f64)>>,
    /// Per server, the masters whose slaves it hosts, sorted.
    hosted_slaves: Vec<Vec<MasterKey>>,
}

impl PartialEq for Placement {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.instance, &other.instance) || self.instance == other.instance)
            && self.masters == other.masters
            && self.fragments == other.fragments
            && self.hosted_slaves == other.hosted_slaves
    }
}

impl Placement {
    pub fn new(instance: Arc<ProblemInstance>) -> Self {
        let n_servers = instance.servers().len();
        let n_vnfs = instance.vnf_types().len();
        let n_requests = instance.requests().len();
        Placement {
            masters: vec![None; n_servers * n_vnfs],
            fragments: vec![Vec::new(); n_requests],
            hosted_slaves: vec![Vec::new(); n_servers],
            instance,
        }
    }

    pub fn instance(&self) -> &Arc<ProblemInstance> {
        &self.instance
    }

    #[inline]
    fn index(&self, key: MasterKey) -> usize {
        key.server.0 * self.instance.vnf_types().len() + key.vnf.0
    }

    fn key_of(&self, index: usize) -> MasterKey {
        let n = self.instance.vnf_types().len();
        MasterKey::new(ServerId(index / n), VnfTypeId(index % n))
    }

    fn master(&self, key: MasterKey) -> Option<&Master> {
        self.masters.get(self.index(key)).and_then(Option::as_ref)
    }

    fn master_mut(&mut self, key: MasterKey) -> Option<&mut Master> {
        let i = self.index(key);
        self.masters.get_mut(i).and_then(Option::as_mut)
    }

    /// Masters in `(server, vnf)` order.
    pub fn masters(&self) -> impl Iterator<Item = MasterKey> + '_ {
        self.masters
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_some())
            .map(|(i, _)| self.key_of(i))
    }

    pub fn has_master(&self, key: MasterKey) -> bool {
        self.instance.contains_server(key.server)
            && self.instance.contains_vnf(key.vnf)
            && self.master(key).is_some()
    }

    pub fn master_reserved(&self, key: MasterKey) -> Option<f64> {
        self.master(key).map(|m| m.reserved)
    }

    /// Requests served by a master, with fractions.
    pub fn master_load(&self, key: MasterKey) -> &[(RequestId, f64)] {
        self.master(key).map_or(&[], |m| &m.load)
    }

    /// Slaves of a master with their reservations, by server.
    pub fn slaves(&self, key: MasterKey) -> &[(ServerId, f64)] {
        self.master(key).map_or(&[], |m| &m.slaves)
    }

    /// The master's server and its slave servers, sorted.
    pub fn protection(&self, key: MasterKey) -> Vec<ServerId> {
        let mut out: Vec<ServerId> = self.slaves(key).iter().map(|&(s, _)| s).collect();
        let at = out.partition_point(|&s| s < key.server);
        out.insert(at, key.server);
        out
    }

    /// Masters whose slaves live on `server`.
    pub fn hosted_slaves(&self, server: ServerId) -> &[MasterKey] {
        &self.hosted_slaves[server.0]
    }

    pub fn slave_count(&self) -> usize {
        self.hosted_slaves.iter().map(Vec::len).sum()
    }

    /// Fragments of a request as `(master server, fraction)`, by server.
    pub fn fragments(&self, request: RequestId) -> &[(ServerId, f64)] {
        &self.fragments[request.0]
    }

    pub fn assigned_fraction(&self, request: RequestId) -> f64 {
        self.fragments[request.0].iter().map(|&(_, x)| x).sum()
    }

    pub fn is_fully_assigned(&self, request: RequestId) -> bool {
        (self.assigned_fraction(request) - 1.0).abs() <= EPS_FRACTION
    }

    pub fn unassigned_requests(&self) -> impl Iterator<Item = RequestId> + '_ {
        self.instance.request_ids().filter(|&r| !self.is_fully_assigned(r))
    }

    /// Number of requests with more than one fragment.
    pub fn split_count(&self) -> usize {
        self.fragments.iter().filter(|f| f.len() > 1).count()
    }

    /// Resources reserved on a server by masters and slaves.
    pub fn used(&self, server: ServerId) -> f64 {
        let n_vnfs = self.instance.vnf_types().len();
        let base = server.0 * n_vnfs;
        let mut used = 0.0;
        for m in self.masters[base..base + n_vnfs].iter().flatten() {
            used += m.reserved;
        }
        for &key in &self.hosted_slaves[server.0] {
            used += self.slave_reserved(key, server).unwrap_or(0.0);
        }
        used
    }

    pub fn residual(&self, server: ServerId) -> f64 {
        self.instance.server(server).capacity - self.used(server)
    }

    fn slave_reserved(&self, key: MasterKey, server: ServerId) -> Option<f64> {
        let m = self.master(key)?;
        m.slaves
            .binary_search_by_key(&server, |&(s, _)| s)
            .ok()
            .map(|i| m.slaves[i].1)
    }

    pub fn has_slave(&self, key: MasterKey, server: ServerId) -> bool {
        self.slave_reserved(key, server).is_some()
    }

    /// All instances, masters first in `(server, vnf)` order, then slaves in
    /// `(master, server)` order.
    pub fn vnf_instances(&self) -> Vec<VnfInstance> {
        let mut out: Vec<VnfInstance> = self
            .masters()
            .map(|k| VnfInstance {
                server: k.server,
                vnf: k.vnf,
                role: Role::Master,
                reserved: self.master(k).unwrap().reserved,
                protects: None,
            })
            .collect();
        for k in self.masters().collect::<Vec<_>>() {
            for &(s, reserved) in self.slaves(k) {
                out.push(VnfInstance {
                    server: s,
                    vnf: k.vnf,
                    role: Role::Slave,
                    reserved,
                    protects: Some(k.server),
                });
            }
        }
        out
    }

    /// The assignment configuration of a request, if it has fragments.
    pub fn configuration(&self, request: RequestId) -> Option<AssignmentConfiguration> {
        let vnf = self.instance.request(request).vnf;
        let fragments: Vec<(Fragment, f64)> = self.fragments[request.0]
            .iter()
            .map(|&(s, x)| {
                let key = MasterKey::new(s, vnf);
                (Fragment::new(s, self.slaves(key).iter().map(|&(t, _)| t)), x)
            })
            .collect();
        if fragments.is_empty() {
            return None;
        }
        AssignmentConfiguration::new(fragments).ok()
    }

    fn check_request(&self, request: RequestId) -> Result<(), Rejection> {
        if self.instance.contains_request(request) {
            Ok(())
        } else {
            Err(Rejection::Unknown(request.to_string()))
        }
    }

    fn check_server(&self, server: ServerId) -> Result<(), Rejection> {
        if self.instance.contains_server(server) {
            Ok(())
        } else {
            Err(Rejection::Unknown(server.to_string()))
        }
    }

    fn check_capacity(&self, server: ServerId, needed: f64) -> Result<(), Rejection> {
        let residual = self.residual(server);
        if residual + EPS_CAP < needed {
            Err(Rejection::Capacity {
                server,
                needed,
                residual,
            })
        } else {
            Ok(())
        }
    }

    /// Assigns `fraction` of a request to the master of its VNF type on
    /// `server`, creating the master if needed. A fragment already on that
    /// server absorbs the new fraction. Slaves of the grown master are grown
    /// to match; a slave whose server cannot absorb the growth is dropped.
    pub fn assign_fraction(
        &mut self,
        request: RequestId,
        server: ServerId,
        fraction: f64,
    ) -> Result<(), Rejection> {
        self.check_request(request)?;
        self.check_server(server)?;
        if !(fraction > 0.0 && fraction.is_finite()) {
            return Err(Rejection::InvalidFraction(fraction));
        }
        if self.assigned_fraction(request) + fraction > 1.0 + EPS_FRACTION {
            return Err(Rejection::InvalidFraction(fraction));
        }
        self.check_capacity(server, fraction * self.instance.request(request).demand)?;
        self.assign_unchecked(request, server, fraction);
        Ok(())
    }

    fn assign_unchecked(&mut self, request: RequestId, server: ServerId, fraction: f64) {
        let vnf = self.instance.request(request).vnf;
        let key = MasterKey::new(server, vnf);
        let idx = self.index(key);
        let master = self.masters[idx].get_or_insert_with(Master::default);
        match master.load.binary_search_by_key(&request, |&(r, _)| r) {
            Ok(i) => master.load[i].1 += fraction,
            Err(i) => master.load.insert(i, (request, fraction)),
        }
        master.reserved = reservation(&self.instance, &master.load);
        let frags = &mut self.fragments[request.0];
        match frags.binary_search_by_key(&server, |&(s, _)| s) {
            Ok(i) => frags[i].1 += fraction,
            Err(i) => frags.insert(i, (server, fraction)),
        }
        self.grow_slaves(key);
    }

    fn grow_slaves(&mut self, key: MasterKey) {
        let Some(master) = self.master(key) else { return };
        let reserved = master.reserved;
        let slaves = master.slaves.clone();
        for (server, current) in slaves {
            if current >= reserved {
                continue;
            }
            if self.residual(server) + EPS_CAP >= reserved - current {
                let m = self.master_mut(key).unwrap();
                let i = m.slaves.binary_search_by_key(&server, |&(s, _)| s).unwrap();
                m.slaves[i].1 = reserved;
            } else {
                self.drop_slave(key, server);
            }
        }
    }

    /// Adds a slave of the master `key` on `server`, reserving as much as the
    /// master currently does.
    pub fn add_slave(&mut self, key: MasterKey, server: ServerId) -> Result<(), Rejection> {
        let reserved = self.master_reserved(key).ok_or(Rejection::NoSuchMaster(key))?;
        self.add_slave_reserving(key, server, reserved)
    }

    pub(crate) fn add_slave_reserving(
        &mut self,
        key: MasterKey,
        server: ServerId,
        reserved: f64,
    ) -> Result<(), Rejection> {
        self.check_server(server)?;
        let master_reserved = self.master_reserved(key).ok_or(Rejection::NoSuchMaster(key))?;
        if server == key.server {
            return Err(Rejection::SlaveOnMasterServer);
        }
        if self.has_slave(key, server) {
            return Err(Rejection::DuplicateSlave { server });
        }
        let reserved = reserved.max(master_reserved);
        self.check_capacity(server, reserved)?;
        let m = self.master_mut(key).unwrap();
        let i = m.slaves.partition_point(|&(s, _)| s < server);
        m.slaves.insert(i, (server, reserved));
        let hosted = &mut self.hosted_slaves[server.0];
        let j = hosted.partition_point(|&k| k < key);
        hosted.insert(j, key);
        Ok(())
    }

    pub fn remove_slave(&mut self, key: MasterKey, server: ServerId) -> Result<(), Rejection> {
        self.check_server(server)?;
        if !self.has_master(key) {
            return Err(Rejection::NoSuchMaster(key));
        }
        if !self.has_slave(key, server) {
            return Err(Rejection::NoSuchSlave { master: key, server });
        }
        self.drop_slave(key, server);
        Ok(())
    }

    fn drop_slave(&mut self, key: MasterKey, server: ServerId) {
        let m = self.master_mut(key).unwrap();
        let i = m.slaves.binary_search_by_key(&server, |&(s, _)| s).unwrap();
        m.slaves.remove(i);
        let hosted = &mut self.hosted_slaves[server.0];
        let j = hosted.binary_search(&key).unwrap();
        hosted.remove(j);
    }

    /// Removes a request's fragment on `server` and returns its fraction. A
    /// master left without requests disappears together with its slaves;
    /// otherwise it shrinks while its slaves keep their reservations.
    pub fn remove_fragment(&mut self, request: RequestId, server: ServerId) -> Result<f64, Rejection> {
        self.check_request(request)?;
        self.check_server(server)?;
        self.remove_fragment_unchecked(request, server)
    }

    fn remove_fragment_unchecked(&mut self, request: RequestId, server: ServerId) -> Result<f64, Rejection> {
        let frags = &mut self.fragments[request.0];
        let i = frags
            .binary_search_by_key(&server, |&(s, _)| s)
            .map_err(|_| Rejection::NoSuchFragment { request, server })?;
        let (_, fraction) = frags.remove(i);
        let key = MasterKey::new(server, self.instance.request(request).vnf);
        let idx = self.index(key);
        let master = self.masters[idx].as_mut().expect("fragment without master");
        let j = master
            .load
            .binary_search_by_key(&request, |&(r, _)| r)
            .expect("fragment missing from master load");
        master.load.remove(j);
        if master.load.is_empty() {
            let slaves: Vec<ServerId> = master.slaves.iter().map(|&(s, _)| s).collect();
            for s in slaves {
                self.drop_slave(key, s);
            }
            self.masters[idx] = None;
        } else {
            master.reserved = reservation(&self.instance, &master.load);
        }
        Ok(fraction)
    }

    /// Runs `f` and restores the previous state if it fails.
    fn transaction<T>(
        &mut self,
        f: impl FnOnce(&mut Self) -> Result<T, Rejection>,
    ) -> Result<T, Rejection> {
        let backup = self.clone();
        let out = f(self);
        if out.is_err() {
            *self = backup;
        }
        out
    }

    /// Moves a request's fragment from one master server to another.
    pub fn move_fragment(&mut self, request: RequestId, from: ServerId, to: ServerId) -> Result<(), Rejection> {
        self.check_request(request)?;
        self.check_server(from)?;
        self.check_server(to)?;
        self.transaction(|p| p.move_fragment_in_place(request, from, to))
    }

    /// Like [`Placement::move_fragment`] but may leave a partial move behind
    /// on failure; for callers that work on a scratch copy.
    pub(crate) fn move_fragment_in_place(
        &mut self,
        request: RequestId,
        from: ServerId,
        to: ServerId,
    ) -> Result<(), Rejection> {
        if from == to {
            return Err(Rejection::NoOp);
        }
        let fraction = self.remove_fragment_unchecked(request, from)?;
        self.assign_fraction(request, to, fraction)
    }

    /// Exchanges the servers of two fragments: the fragment of `a` on
    /// `server_a` goes to `server_b` and vice versa.
    pub fn swap_fragments(
        &mut self,
        a: RequestId,
        server_a: ServerId,
        b: RequestId,
        server_b: ServerId,
    ) -> Result<(), Rejection> {
        self.check_request(a)?;
        self.check_request(b)?;
        self.check_server(server_a)?;
        self.check_server(server_b)?;
        self.transaction(|p| p.swap_fragments_in_place(a, server_a, b, server_b))
    }

    pub(crate) fn swap_fragments_in_place(
        &mut self,
        a: RequestId,
        server_a: ServerId,
        b: RequestId,
        server_b: ServerId,
    ) -> Result<(), Rejection> {
        if server_a == server_b || a == b {
            return Err(Rejection::NoOp);
        }
        let xa = self.remove_fragment_unchecked(a, server_a)?;
        let xb = self.remove_fragment_unchecked(b, server_b)?;
        self.assign_fraction(a, server_b, xa)?;
        self.assign_fraction(b, server_a, xb)
    }

    /// Exchanges the servers of two VNF instances, or moves `a` to an empty
    /// slot on `target`'s server when `target` is `None`. A moved master takes
    /// all its requests along. Slaves that would end up on their master's
    /// server, or duplicated, or without room, are dropped.
    pub fn swap_instances(
        &mut self,
        a: InstanceRef,
        target: Option<InstanceRef>,
        empty_server: ServerId,
    ) -> Result<(), Rejection> {
        self.transaction(|p| p.swap_instances_in_place(a, target, empty_server))
    }

    pub(crate) fn swap_instances_in_place(
        &mut self,
        a: InstanceRef,
        target: Option<InstanceRef>,
        empty_server: ServerId,
    ) -> Result<(), Rejection> {
        self.check_server(empty_server)?;
        self.check_instance(a)?;
        let server_a = a.server();
        let server_b = match target {
            Some(b) => {
                self.check_instance(b)?;
                b.server()
            }
            None => empty_server,
        };
        if server_a == server_b {
            return Err(Rejection::NoOp);
        }

        // Master exchanging places with one of its own slaves.
        if let Some(b) = target {
            match (a, b) {
                (InstanceRef::Master(m), InstanceRef::Slave { master, server })
                | (InstanceRef::Slave { master, server }, InstanceRef::Master(m))
                    if master == m =>
                {
                    let lifted = self.lift_master(m);
                    self.place_master(&lifted, server, Some(m.server))?;
                    return Ok(());
                }
                (InstanceRef::Slave { master: ma, .. }, InstanceRef::Slave { master: mb, .. }) if ma == mb => {
                    return Err(Rejection::NoOp);
                }
                _ => {}
            }
        }

        let lifted_a = self.lift(a);
        let lifted_b = target.map(|b| self.lift(b));
        self.place(&lifted_a, server_b)?;
        if let Some(lb) = &lifted_b {
            self.place(lb, server_a)?;
        }
        Ok(())
    }

    fn check_instance(&self, r: InstanceRef) -> Result<(), Rejection> {
        match r {
            InstanceRef::Master(k) if self.has_master(k) => Ok(()),
            InstanceRef::Master(k) => Err(Rejection::NoSuchMaster(k)),
            InstanceRef::Slave { master, server } => {
                if !self.has_master(master) {
                    Err(Rejection::NoSuchMaster(master))
                } else if !self.has_slave(master, server) {
                    Err(Rejection::NoSuchSlave { master, server })
                } else {
                    Ok(())
                }
            }
        }
    }

    fn lift(&mut self, r: InstanceRef) -> Lifted {
        match r {
            InstanceRef::Master(k) => Lifted::Master(self.lift_master(k)),
            InstanceRef::Slave { master, server } => {
                // The master may have vanished if it was lifted first.
                if self.has_slave(master, server) {
                    self.drop_slave(master, server);
                }
                Lifted::Slave(master)
            }
        }
    }

    fn lift_master(&mut self, key: MasterKey) -> LiftedMaster {
        let m = self.master(key).expect("lifted master exists").clone();
        let slaves = m.slaves.iter().map(|&(s, _)| s).collect();
        for &(r, _) in &m.load {
            self.remove_fragment_unchecked(r, key.server)
                .expect("master load mirrors fragments");
        }
        LiftedMaster {
            vnf: key.vnf,
            load: m.load,
            slaves,
        }
    }

    fn place(&mut self, lifted: &Lifted, server: ServerId) -> Result<(), Rejection> {
        match lifted {
            Lifted::Master(m) => self.place_master(m, server, None),
            Lifted::Slave(master) => {
                if !self.has_master(*master) {
                    return Ok(());
                }
                match self.add_slave(*master, server) {
                    Ok(()) => Ok(()),
                    Err(Rejection::SlaveOnMasterServer | Rejection::DuplicateSlave { .. }) => Ok(()),
                    Err(e) => Err(e),
                }
            }
        }
    }

    fn place_master(
        &mut self,
        lifted: &LiftedMaster,
        server: ServerId,
        extra_slave: Option<ServerId>,
    ) -> Result<(), Rejection> {
        for &(r, x) in &lifted.load {
            self.assign_fraction(r, server, x)?;
        }
        let key = MasterKey::new(server, lifted.vnf);
        for &s in lifted.slaves.iter().chain(extra_slave.iter()) {
            if s == server || self.has_slave(key, s) {
                continue;
            }
            // best effort: protection may be rebuilt later
            let _ = self.add_slave(key, s);
        }
        Ok(())
    }

    /// Per-request availability, in request order.
    pub fn request_availabilities(&self) -> Result<Vec<f64>> {
        let inst = &*self.instance;
        let n_classes = inst.ap_class_count();
        let mut memo = vec![f64::NAN; self.masters.len() * n_classes];
        let mut out = Vec::with_capacity(inst.requests().len());
        for r in inst.request_ids() {
            if !self.is_fully_assigned(r) {
                return Err(Error::Unassigned(r));
            }
            let class = inst.ap_class(r);
            let vnf = inst.request(r).vnf;
            let mut product = 1.0;
            for &(s, _) in &self.fragments[r.0] {
                let key = MasterKey::new(s, vnf);
                let slot = self.index(key) * n_classes + class;
                if memo[slot].is_nan() {
                    memo[slot] = fragment_value(inst, vnf, inst.class_access(class), s, &self.protection(key));
                }
                product *= memo[slot];
            }
            out.push(product);
        }
        Ok(out)
    }

    /// Computes the objective: the minimum request availability, the requests
    /// attaining it and the split count. Requires every request to be fully
    /// assigned.
    pub fn evaluate(&self) -> Result<SolveReport> {
        let values = self.request_availabilities()?;
        Ok(SolveReport::from_availabilities(values, self.split_count()))
    }

    /// Master reservations, in `(server, vnf)` order.
    pub fn master_ledger(&self) -> Vec<(MasterKey, f64)> {
        self.masters().map(|k| (k, self.master(k).unwrap().reserved)).collect()
    }

    /// Slave reservations as `(master, slave server, reserved)`.
    pub fn slave_ledger(&self) -> Vec<(MasterKey, ServerId, f64)> {
        self.masters()
            .flat_map(|k| self.slaves(k).iter().map(move |&(s, v)| (k, s, v)))
            .collect()
    }
}

fn reservation(instance: &ProblemInstance, load: &[(RequestId, f64)]) -> f64 {
    let mut total = 0.0;
    for &(r, x) in load {
        total += instance.request(r).demand * x;
    }
    total
}

struct LiftedMaster {
    vnf: VnfTypeId,
    load: Vec<(RequestId, f64)>,
    slaves: Vec<ServerId>,
}

enum Lifted {
    Master(LiftedMaster),
    Slave(MasterKey),
}

/// Outcome of evaluating a complete placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub algorithm: String,
    /// Minimum availability over all requests; 1 for an empty request set.
    pub objective: f64,
    pub per_request: Vec<f64>,
    /// Requests within tolerance of the objective, by id.
    pub worst_requests: Vec<RequestId>,
    pub splits: usize,
    pub runtime_secs: f64,
    /// True when there are no requests and the objective is 1 by convention.
    pub vacuous: bool,
}

impl SolveReport {
    pub fn from_availabilities(per_request: Vec<f64>, splits: usize) -> Self {
        let vacuous = per_request.is_empty();
        let objective = per_request.iter().copied().fold(1.0, f64::min);
        let worst_requests = per_request
            .iter()
            .enumerate()
            .filter(|&(_, &a)| a <= objective + EPS_AVAIL)
            .map(|(i, _)| RequestId(i))
            .collect();
        SolveReport {
            algorithm: String::new(),
            objective,
            per_request,
            worst_requests,
            splits,
            runtime_secs: 0.0,
            vacuous,
        }
    }

    pub fn with_algorithm(mut self, algorithm: impl Into<String>) -> Self {
        self.algorithm = algorithm.into();
        self
    }
}
