//! Closed-form availability of request assignments.
//!
//! A request reaches a VNF instance of its type through a cluster: one of its
//! access links to that cluster must be up, the cluster must be up, and for
//! clusters other than the master's the synchronization link to the master's
//! cluster must be up too. Inside the cluster at least one protecting server
//! must be up with its VNF software running. All components fail
//! independently, so the closed form is a product of complements.
//!
//! [`monte_carlo_availability`] estimates the same quantity by sampling
//! component states, and is used as an oracle for the closed form.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AccessPointId, ClusterId, ProblemInstance, RequestId, ServerId, VnfTypeId};

/// One piece of a request: the server hosting the serving master and the
/// servers of all instances able to serve it (the master and its slaves).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fragment {
    master: ServerId,
    protection: BTreeSet<ServerId>,
}

impl Fragment {
    /// Builds a fragment; the master is always part of the protection set.
    pub fn new(master: ServerId, slaves: impl IntoIterator<Item = ServerId>) -> Self {
        let mut protection: BTreeSet<ServerId> = slaves.into_iter().collect();
        protection.insert(master);
        Fragment { master, protection }
    }

    pub fn master(&self) -> ServerId {
        self.master
    }

    pub fn protection(&self) -> &BTreeSet<ServerId> {
        &self.protection
    }

    pub fn slaves(&self) -> impl Iterator<Item = ServerId> + '_ {
        self.protection.iter().copied().filter(move |&s| s != self.master)
    }
}

/// All fragments of one request with the fraction of demand each carries.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentConfiguration {
    fragments: Vec<(Fragment, f64)>,
}

impl AssignmentConfiguration {
    /// Fragments are stored in master-server order. Fractions must lie in
    /// `(0, 1]` and sum to one; masters must be pairwise distinct.
    pub fn new(mut fragments: Vec<(Fragment, f64)>) -> Result<Self> {
        if fragments.is_empty() {
            return Err(Error::input("assignment configuration without fragments"));
        }
        fragments.sort_by_key(|(f, _)| f.master);
        if fragments.windows(2).any(|w| w[0].0.master == w[1].0.master) {
            return Err(Error::input("two fragments share a master server"));
        }
        if let Some((_, x)) = fragments.iter().find(|(_, x)| !(*x > 0.0 && *x <= 1.0)) {
            return Err(Error::input(format!("fraction {x} outside (0, 1]")));
        }
        let total: f64 = fragments.iter().map(|(_, x)| x).sum();
        if (total - 1.0).abs() > crate::EPS_FRACTION {
            return Err(Error::input(format!("fractions sum to {total}, not 1")));
        }
        Ok(AssignmentConfiguration { fragments })
    }

    /// A configuration with a single fragment carrying the whole demand.
    pub fn single(fragment: Fragment) -> Self {
        AssignmentConfiguration {
            fragments: vec![(fragment, 1.0)],
        }
    }

    pub fn fragments(&self) -> &[(Fragment, f64)] {
        &self.fragments
    }
}

/// Probability that at least one of the access links from `points` to
/// `cluster` works. Absent links count as down.
pub fn access_availability(
    instance: &ProblemInstance,
    cluster: ClusterId,
    points: &[AccessPointId],
) -> Result<f64> {
    if !instance.contains_cluster(cluster) {
        return Err(Error::input(format!("unknown {cluster}")));
    }
    if points.is_empty() {
        return Err(Error::input("empty access point set"));
    }
    if let Some(p) = points.iter().find(|p| !instance.contains_access_point(**p)) {
        return Err(Error::input(format!("unknown {p}")));
    }
    Ok(instance.access_availability_unchecked(cluster, points))
}

/// Probability that at least one instance of `vnf` on `servers` works. The
/// empty set has availability 0.
pub fn server_set_availability(
    instance: &ProblemInstance,
    vnf: VnfTypeId,
    servers: &[ServerId],
) -> Result<f64> {
    if !instance.contains_vnf(vnf) {
        return Err(Error::input(format!("unknown {vnf}")));
    }
    if let Some(s) = servers.iter().find(|s| !instance.contains_server(**s)) {
        return Err(Error::input(format!("unknown {s}")));
    }
    let vnf_avail = instance.vnf_type(vnf).availability;
    Ok(server_set_value(instance, vnf_avail, servers.iter().copied()))
}

#[inline]
fn server_set_value(
    instance: &ProblemInstance,
    vnf_avail: f64,
    servers: impl Iterator<Item = ServerId>,
) -> f64 {
    let mut down = 1.0;
    for s in servers {
        down *= 1.0 - vnf_avail * instance.server(s).availability;
    }
    1.0 - down
}

/// The term of one cluster in a fragment's availability: the probability that
/// the request is served through that cluster.
#[inline]
fn cluster_term(
    instance: &ProblemInstance,
    access: f64,
    cluster: ClusterId,
    master_cluster: ClusterId,
    server_set: f64,
) -> f64 {
    let cluster_avail = instance.cluster(cluster).availability;
    if cluster == master_cluster {
        access * cluster_avail * server_set
    } else {
        access * cluster_avail * instance.sync_link(master_cluster, cluster) * server_set
    }
}

/// Shared kernel of every fragment evaluation. `access[c]` is the access
/// availability of cluster `c` for the request's access points and
/// `protection` is sorted by server id.
pub(crate) fn fragment_value(
    instance: &ProblemInstance,
    vnf: VnfTypeId,
    access: &[f64],
    master: ServerId,
    protection: &[ServerId],
) -> f64 {
    let vnf_avail = instance.vnf_type(vnf).availability;
    let master_cluster = instance.server(master).cluster;
    let mut fail = 1.0;
    for (c, &acc) in access.iter().enumerate() {
        let cluster = ClusterId(c);
        let mut members = protection
            .iter()
            .copied()
            .filter(|&s| instance.server(s).cluster == cluster)
            .peekable();
        if members.peek().is_none() {
            continue;
        }
        let set = server_set_value(instance, vnf_avail, members);
        fail *= 1.0 - cluster_term(instance, acc, cluster, master_cluster, set);
    }
    1.0 - fail
}

fn check_fragment(instance: &ProblemInstance, request: RequestId, fragment: &Fragment) -> Result<()> {
    if !instance.contains_request(request) {
        return Err(Error::input(format!("unknown {request}")));
    }
    if let Some(s) = fragment.protection.iter().find(|s| !instance.contains_server(**s)) {
        return Err(Error::input(format!("unknown {s}")));
    }
    Ok(())
}

/// Availability of one fragment of `request`.
pub fn fragment_availability(
    instance: &ProblemInstance,
    request: RequestId,
    fragment: &Fragment,
) -> Result<f64> {
    check_fragment(instance, request, fragment)?;
    let protection: Vec<ServerId> = fragment.protection.iter().copied().collect();
    Ok(fragment_value(
        instance,
        instance.request(request).vnf,
        instance.class_access(instance.ap_class(request)),
        fragment.master,
        &protection,
    ))
}

/// Availability of a whole request: every fragment must be served, so the
/// fragment availabilities multiply. Fractions play no role.
pub fn configuration_availability(
    instance: &ProblemInstance,
    request: RequestId,
    config: &AssignmentConfiguration,
) -> Result<f64> {
    let mut product = 1.0;
    for (fragment, _) in &config.fragments {
        product *= fragment_availability(instance, request, fragment)?;
    }
    Ok(product)
}

/// Per-cluster decomposition of a fragment's availability, for display.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ClusterTerm {
    pub cluster: ClusterId,
    pub servers: Vec<ServerId>,
    pub access: f64,
    pub cluster_availability: f64,
    /// `None` for the master's own cluster.
    pub sync: Option<f64>,
    pub server_set: f64,
    pub term: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FragmentBreakdown {
    pub master: ServerId,
    pub protection: Vec<ServerId>,
    pub clusters: Vec<ClusterTerm>,
    pub availability: f64,
}

pub fn fragment_breakdown(
    instance: &ProblemInstance,
    request: RequestId,
    fragment: &Fragment,
) -> Result<FragmentBreakdown> {
    check_fragment(instance, request, fragment)?;
    let req = instance.request(request);
    let access = instance.class_access(instance.ap_class(request));
    let vnf_avail = instance.vnf_type(req.vnf).availability;
    let master_cluster = instance.server(fragment.master).cluster;
    let mut clusters = Vec::new();
    for (c, &acc) in access.iter().enumerate() {
        let cluster = ClusterId(c);
        let servers: Vec<ServerId> = fragment
            .protection
            .iter()
            .copied()
            .filter(|&s| instance.server(s).cluster == cluster)
            .collect();
        if servers.is_empty() {
            continue;
        }
        let set = server_set_value(instance, vnf_avail, servers.iter().copied());
        clusters.push(ClusterTerm {
            cluster,
            access: acc,
            cluster_availability: instance.cluster(cluster).availability,
            sync: (cluster != master_cluster).then(|| instance.sync_link(master_cluster, cluster)),
            server_set: set,
            term: cluster_term(instance, acc, cluster, master_cluster, set),
            servers,
        });
    }
    let protection: Vec<ServerId> = fragment.protection.iter().copied().collect();
    Ok(FragmentBreakdown {
        master: fragment.master,
        availability: fragment_value(instance, req.vnf, access, fragment.master, &protection),
        protection,
        clusters,
    })
}

// ---------------------------------------------------------------------------
// Monte Carlo

/// How component states are shared between the fragments of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WorldSharing {
    /// Every fragment sees its own independent draw of all components. This
    /// is the independence the closed-form product assumes.
    #[default]
    PerFragment,
    /// All fragments of a sample see one common world, so fragments sharing
    /// a component fail together.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    /// Binomial standard error of the estimate.
    pub stderr: f64,
    pub samples: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Component {
    AccessLink(ClusterId, AccessPointId),
    Cluster(ClusterId),
    SyncLink(ClusterId, ClusterId),
    Server(ServerId),
    Software(ServerId, VnfTypeId),
}

struct ClusterPath {
    access: Vec<usize>,
    cluster: usize,
    sync: Option<usize>,
    replicas: Vec<(usize, usize)>,
}

/// Component list plus, per fragment, the ways it can be served.
struct Circuit {
    availability: Vec<f64>,
    fragments: Vec<Vec<ClusterPath>>,
}

impl Circuit {
    fn build(
        instance: &ProblemInstance,
        request: RequestId,
        config: &AssignmentConfiguration,
        sharing: WorldSharing,
    ) -> Self {
        let req = instance.request(request);
        let mut index: HashMap<(usize, Component), usize> = HashMap::new();
        let mut availability = Vec::new();
        let mut component = |scope: usize, c: Component| -> usize {
            *index.entry((scope, c)).or_insert_with(|| {
                availability.push(match c {
                    Component::AccessLink(c, p) => instance.access_link(c, p),
                    Component::Cluster(c) => instance.cluster(c).availability,
                    Component::SyncLink(a, b) => instance.sync_link(a, b),
                    Component::Server(s) => instance.server(s).availability,
                    Component::Software(_, f) => instance.vnf_type(f).availability,
                });
                availability.len() - 1
            })
        };
        let mut fragments = Vec::new();
        for (i, (fragment, _)) in config.fragments.iter().enumerate() {
            let scope = match sharing {
                WorldSharing::PerFragment => i,
                WorldSharing::Shared => 0,
            };
            let master_cluster = instance.server(fragment.master).cluster;
            let mut by_cluster: Vec<(ClusterId, Vec<ServerId>)> = Vec::new();
            for &s in &fragment.protection {
                let c = instance.server(s).cluster;
                match by_cluster.iter_mut().find(|(k, _)| *k == c) {
                    Some((_, v)) => v.push(s),
                    None => by_cluster.push((c, vec![s])),
                }
            }
            let paths = by_cluster
                .into_iter()
                .map(|(c, servers)| {
                    let (lo, hi) = if master_cluster <= c {
                        (master_cluster, c)
                    } else {
                        (c, master_cluster)
                    };
                    ClusterPath {
                        access: req
                            .access_points
                            .iter()
                            .map(|&p| component(scope, Component::AccessLink(c, p)))
                            .collect(),
                        cluster: component(scope, Component::Cluster(c)),
                        sync: (c != master_cluster)
                            .then(|| component(scope, Component::SyncLink(lo, hi))),
                        replicas: servers
                            .into_iter()
                            .map(|s| {
                                (
                                    component(scope, Component::Server(s)),
                                    component(scope, Component::Software(s, req.vnf)),
                                )
                            })
                            .collect(),
                    }
                })
                .collect();
            fragments.push(paths);
        }
        Circuit {
            availability,
            fragments,
        }
    }

    fn request_up(&self, up: &[bool]) -> bool {
        self.fragments.iter().all(|paths| {
            paths.iter().any(|path| {
                up[path.cluster]
                    && path.sync.is_none_or(|k| up[k])
                    && path.access.iter().any(|&k| up[k])
                    && path.replicas.iter().any(|&(s, f)| up[s] && up[f])
            })
        })
    }
}

const CHUNK: u64 = 1 << 14;

/// Estimates the availability of `request` under `config` by sampling
/// independent component states, with fragments drawn independently.
pub fn monte_carlo_availability(
    instance: &ProblemInstance,
    request: RequestId,
    config: &AssignmentConfiguration,
    samples: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    monte_carlo_availability_with(instance, request, config, samples, seed, WorldSharing::PerFragment)
}

/// As [`monte_carlo_availability`] with explicit world sharing. Samples are
/// drawn in fixed-size chunks, each from its own stream of the seeded
/// generator, so the estimate does not depend on the number of threads.
pub fn monte_carlo_availability_with(
    instance: &ProblemInstance,
    request: RequestId,
    config: &AssignmentConfiguration,
    samples: u64,
    seed: u64,
    sharing: WorldSharing,
) -> Result<MonteCarloEstimate> {
    if samples == 0 {
        return Err(Error::input("at least one sample is required"));
    }
    for (fragment, _) in &config.fragments {
        check_fragment(instance, request, fragment)?;
    }
    let circuit = Circuit::build(instance, request, config, sharing);
    let chunks = samples.div_ceil(CHUNK);
    let successes: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let n = CHUNK.min(samples - chunk * CHUNK);
            let mut up = vec![false; circuit.availability.len()];
            let mut hits = 0u64;
            for _ in 0..n {
                for (state, &a) in up.iter_mut().zip(&circuit.availability) {
                    *state = rng.random::<f64>() < a;
                }
                hits += circuit.request_up(&up) as u64;
            }
            hits
        })
        .sum();
    let estimate = successes as f64 / samples as f64;
    Ok(MonteCarloEstimate {
        estimate,
        stderr: (estimate * (1.0 - estimate) / samples as f64).sqrt(),
        samples,
    })
}
