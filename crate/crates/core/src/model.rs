//! Instance data: clusters, servers, VNF types, the access network and
//! client requests.
//!
//! Entities are addressed by dense integer identifiers assigned in document
//! order when an instance is loaded. Names from the source document are kept
//! so that saving produces the same document again.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $label:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub usize);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($label, " {}"), self.0)
            }
        }
    };
}

id_type!(ClusterId, "cluster");
id_type!(ServerId, "server");
id_type!(VnfTypeId, "vnf");
id_type!(AccessPointId, "access point");
id_type!(RequestId, "request");

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub name: String,
    pub availability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Server {
    pub name: String,
    pub cluster: ClusterId,
    pub capacity: f64,
    pub availability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VnfType {
    pub name: String,
    pub availability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessPoint {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub name: String,
    pub vnf: VnfTypeId,
    /// Sorted, without duplicates.
    pub access_points: Vec<AccessPointId>,
    pub demand: f64,
}

/// Availabilities of the logical links. An absent link has availability 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkTable {
    access: BTreeMap<(ClusterId, AccessPointId), f64>,
    sync: BTreeMap<(ClusterId, ClusterId), f64>,
}

impl LinkTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_access(&mut self, cluster: ClusterId, point: AccessPointId, availability: f64) {
        self.access.insert((cluster, point), availability);
    }

    /// Sync links are undirected; `(a, b)` and `(b, a)` name the same link.
    pub fn set_sync(&mut self, a: ClusterId, b: ClusterId, availability: f64) {
        self.sync.insert(sync_key(a, b), availability);
    }

    pub fn access(&self, cluster: ClusterId, point: AccessPointId) -> f64 {
        self.access.get(&(cluster, point)).copied().unwrap_or(0.0)
    }

    pub fn sync(&self, a: ClusterId, b: ClusterId) -> f64 {
        self.sync.get(&sync_key(a, b)).copied().unwrap_or(0.0)
    }

    pub fn access_links(&self) -> impl Iterator<Item = (ClusterId, AccessPointId, f64)> + '_ {
        self.access.iter().map(|(&(c, p), &a)| (c, p, a))
    }

    pub fn sync_links(&self) -> impl Iterator<Item = (ClusterId, ClusterId, f64)> + '_ {
        self.sync.iter().map(|(&(a, b), &v)| (a, b, v))
    }

    pub fn access_links_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.access.values_mut()
    }

    pub fn sync_links_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.sync.values_mut()
    }

    pub fn has_access(&self, cluster: ClusterId, point: AccessPointId) -> bool {
        self.access.contains_key(&(cluster, point))
    }

    pub fn has_sync(&self, a: ClusterId, b: ClusterId) -> bool {
        self.sync.contains_key(&sync_key(a, b))
    }
}

fn sync_key(a: ClusterId, b: ClusterId) -> (ClusterId, ClusterId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// The plain data of an instance, without derived indexes. Used to build
/// modified copies of an instance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InstanceParts {
    pub clusters: Vec<Cluster>,
    pub servers: Vec<Server>,
    pub vnf_types: Vec<VnfType>,
    pub access_points: Vec<AccessPoint>,
    pub links: LinkTable,
    pub requests: Vec<Request>,
}

/// An immutable, validated-by-construction (referentially) problem instance.
///
/// Value-range invariants (probabilities, positive demands) are not enforced
/// here; see [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    parts: InstanceParts,
    servers_by_cluster: Vec<Vec<ServerId>>,
    access_matrix: Vec<f64>,
    sync_matrix: Vec<f64>,
    ap_classes: Vec<Vec<AccessPointId>>,
    request_ap_class: Vec<usize>,
    // class-major: class * |C| + cluster
    class_access: Vec<f64>,
}

impl ProblemInstance {
    pub fn from_parts(mut parts: InstanceParts) -> Result<Self> {
        let n_clusters = parts.clusters.len();
        let n_points = parts.access_points.len();
        let n_vnfs = parts.vnf_types.len();

        check_unique("cluster", parts.clusters.iter().map(|c| c.name.as_str()))?;
        check_unique("server", parts.servers.iter().map(|s| s.name.as_str()))?;
        check_unique("vnf type", parts.vnf_types.iter().map(|v| v.name.as_str()))?;
        check_unique("access point", parts.access_points.iter().map(|p| p.name.as_str()))?;
        check_unique("request", parts.requests.iter().map(|r| r.name.as_str()))?;

        for server in &parts.servers {
            if server.cluster.0 >= n_clusters {
                return Err(Error::input(format!(
                    "server {}: unknown {}",
                    server.name, server.cluster
                )));
            }
        }
        for request in &mut parts.requests {
            if request.vnf.0 >= n_vnfs {
                return Err(Error::input(format!(
                    "request {}: unknown {}",
                    request.name, request.vnf
                )));
            }
            if let Some(p) = request.access_points.iter().find(|p| p.0 >= n_points) {
                return Err(Error::input(format!("request {}: unknown {p}", request.name)));
            }
            request.access_points.sort_unstable();
            request.access_points.dedup();
        }
        for (c, p, _) in parts.links.access_links() {
            if c.0 >= n_clusters || p.0 >= n_points {
                return Err(Error::input(format!("access link ({c}, {p}) is dangling")));
            }
        }
        for (a, b, _) in parts.links.sync_links() {
            if a.0 >= n_clusters || b.0 >= n_clusters {
                return Err(Error::input(format!("sync link ({a}, {b}) is dangling")));
            }
        }

        let mut servers_by_cluster = vec![Vec::new(); n_clusters];
        for (i, server) in parts.servers.iter().enumerate() {
            servers_by_cluster[server.cluster.0].push(ServerId(i));
        }

        let mut access_matrix = vec![0.0; n_clusters * n_points];
        for (c, p, a) in parts.links.access_links() {
            access_matrix[c.0 * n_points + p.0] = a;
        }
        let mut sync_matrix = vec![0.0; n_clusters * n_clusters];
        for (a, b, v) in parts.links.sync_links() {
            sync_matrix[a.0 * n_clusters + b.0] = v;
            sync_matrix[b.0 * n_clusters + a.0] = v;
        }

        let mut class_of: HashMap<Vec<AccessPointId>, usize> = HashMap::new();
        let mut ap_classes = Vec::new();
        let request_ap_class = parts
            .requests
            .iter()
            .map(|r| {
                *class_of.entry(r.access_points.clone()).or_insert_with(|| {
                    ap_classes.push(r.access_points.clone());
                    ap_classes.len() - 1
                })
            })
            .collect();

        let mut instance = ProblemInstance {
            parts,
            servers_by_cluster,
            access_matrix,
            sync_matrix,
            ap_classes,
            request_ap_class,
            class_access: Vec::new(),
        };
        instance.class_access = instance
            .ap_classes
            .iter()
            .flat_map(|points| {
                let inst = &instance;
                (0..n_clusters).map(move |c| inst.access_availability_unchecked(ClusterId(c), points))
            })
            .collect();
        Ok(instance)
    }

    pub fn parts(&self) -> &InstanceParts {
        &self.parts
    }

    pub fn into_parts(self) -> InstanceParts {
        self.parts
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.parts.clusters
    }

    pub fn servers(&self) -> &[Server] {
        &self.parts.servers
    }

    pub fn vnf_types(&self) -> &[VnfType] {
        &self.parts.vnf_types
    }

    pub fn access_points(&self) -> &[AccessPoint] {
        &self.parts.access_points
    }

    pub fn requests(&self) -> &[Request] {
        &self.parts.requests
    }

    pub fn links(&self) -> &LinkTable {
        &self.parts.links
    }

    pub fn cluster(&self, id: ClusterId) -> &Cluster {
        &self.parts.clusters[id.0]
    }

    pub fn server(&self, id: ServerId) -> &Server {
        &self.parts.servers[id.0]
    }

    pub fn vnf_type(&self, id: VnfTypeId) -> &VnfType {
        &self.parts.vnf_types[id.0]
    }

    pub fn request(&self, id: RequestId) -> &Request {
        &self.parts.requests[id.0]
    }

    pub fn server_ids(&self) -> impl DoubleEndedIterator<Item = ServerId> + ExactSizeIterator {
        (0..self.parts.servers.len()).map(ServerId)
    }

    pub fn request_ids(&self) -> impl DoubleEndedIterator<Item = RequestId> + ExactSizeIterator {
        (0..self.parts.requests.len()).map(RequestId)
    }

    /// Servers of one cluster, in id order.
    pub fn servers_in(&self, cluster: ClusterId) -> &[ServerId] {
        &self.servers_by_cluster[cluster.0]
    }

    #[inline]
    pub fn access_link(&self, cluster: ClusterId, point: AccessPointId) -> f64 {
        self.access_matrix[cluster.0 * self.parts.access_points.len() + point.0]
    }

    #[inline]
    pub fn sync_link(&self, a: ClusterId, b: ClusterId) -> f64 {
        self.sync_matrix[a.0 * self.parts.clusters.len() + b.0]
    }

    pub fn total_demand(&self) -> f64 {
        self.parts.requests.iter().map(|r| r.demand).sum()
    }

    pub fn total_capacity(&self) -> f64 {
        self.parts.servers.iter().map(|s| s.capacity).sum()
    }

    pub fn contains_server(&self, id: ServerId) -> bool {
        id.0 < self.parts.servers.len()
    }

    pub fn contains_request(&self, id: RequestId) -> bool {
        id.0 < self.parts.requests.len()
    }

    pub fn contains_cluster(&self, id: ClusterId) -> bool {
        id.0 < self.parts.clusters.len()
    }

    pub fn contains_vnf(&self, id: VnfTypeId) -> bool {
        id.0 < self.parts.vnf_types.len()
    }

    pub fn contains_access_point(&self, id: AccessPointId) -> bool {
        id.0 < self.parts.access_points.len()
    }

    pub fn server_by_name(&self, name: &str) -> Option<ServerId> {
        self.parts.servers.iter().position(|s| s.name == name).map(ServerId)
    }

    pub fn request_by_name(&self, name: &str) -> Option<RequestId> {
        self.parts.requests.iter().position(|r| r.name == name).map(RequestId)
    }

    pub fn vnf_by_name(&self, name: &str) -> Option<VnfTypeId> {
        self.parts.vnf_types.iter().position(|v| v.name == name).map(VnfTypeId)
    }

    pub fn cluster_by_name(&self, name: &str) -> Option<ClusterId> {
        self.parts.clusters.iter().position(|c| c.name == name).map(ClusterId)
    }

    pub fn access_point_by_name(&self, name: &str) -> Option<AccessPointId> {
        self.parts.access_points.iter().position(|p| p.name == name).map(AccessPointId)
    }

    /// Index of the request's access point set among the distinct sets of the
    /// instance.
    pub(crate) fn ap_class(&self, request: RequestId) -> usize {
        self.request_ap_class[request.0]
    }

    pub(crate) fn ap_class_count(&self) -> usize {
        self.ap_classes.len()
    }

    /// Per-cluster access availability for an access point class.
    pub(crate) fn class_access(&self, class: usize) -> &[f64] {
        let n = self.parts.clusters.len();
        &self.class_access[class * n..(class + 1) * n]
    }

    pub(crate) fn access_availability_unchecked(
        &self,
        cluster: ClusterId,
        points: &[AccessPointId],
    ) -> f64 {
        let mut down = 1.0;
        for &p in points {
            down *= 1.0 - self.access_link(cluster, p);
        }
        1.0 - down
    }
}

/// Incremental construction of an instance in code.
///
/// ```
/// use havnfp::model::InstanceBuilder;
///
/// let mut b = InstanceBuilder::new();
/// let c = b.cluster("A", 0.9999);
/// b.server("s1", c, 100.0, 0.9995);
/// let f = b.vnf("fw", 0.9999);
/// let p = b.access_point("p1");
/// b.access_link(c, p, 0.99995);
/// b.request("r1", f, &[p], 6.0);
/// let instance = b.build().unwrap();
/// assert_eq!(instance.servers().len(), 1);
/// ```
#[derive(Debug, Clone, Default)]
pub struct InstanceBuilder {
    parts: InstanceParts,
}

impl InstanceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cluster(&mut self, name: impl Into<String>, availability: f64) -> ClusterId {
        self.parts.clusters.push(Cluster {
            name: name.into(),
            availability,
        });
        ClusterId(self.parts.clusters.len() - 1)
    }

    pub fn server(
        &mut self,
        name: impl Into<String>,
        cluster: ClusterId,
        capacity: f64,
        availability: f64,
    ) -> ServerId {
        self.parts.servers.push(Server {
            name: name.into(),
            cluster,
            capacity,
            availability,
        });
        ServerId(self.parts.servers.len() - 1)
    }

    pub fn vnf(&mut self, name: impl Into<String>, availability: f64) -> VnfTypeId {
        self.parts.vnf_types.push(VnfType {
            name: name.into(),
            availability,
        });
        VnfTypeId(self.parts.vnf_types.len() - 1)
    }

    pub fn access_point(&mut self, name: impl Into<String>) -> AccessPointId {
        self.parts.access_points.push(AccessPoint { name: name.into() });
        AccessPointId(self.parts.access_points.len() - 1)
    }

    pub fn access_link(&mut self, cluster: ClusterId, point: AccessPointId, availability: f64) -> &mut Self {
        self.parts.links.set_access(cluster, point, availability);
        self
    }

    pub fn sync_link(&mut self, a: ClusterId, b: ClusterId, availability: f64) -> &mut Self {
        self.parts.links.set_sync(a, b, availability);
        self
    }

    pub fn request(
        &mut self,
        name: impl Into<String>,
        vnf: VnfTypeId,
        points: &[AccessPointId],
        demand: f64,
    ) -> RequestId {
        self.parts.requests.push(Request {
            name: name.into(),
            vnf,
            access_points: points.to_vec(),
            demand,
        });
        RequestId(self.parts.requests.len() - 1)
    }

    pub fn build(self) -> Result<ProblemInstance> {
        ProblemInstance::from_parts(self.parts)
    }
}

fn check_unique<'a>(kind: &str, names: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for name in names {
        if !seen.insert(name) {
            return Err(Error::input(format!("duplicate {kind} name {name:?}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A broken invariant, named by entity and rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub severity: Severity,
    pub entity: String,
    pub rule: String,
}

impl Violation {
    fn error(entity: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation {
            severity: Severity::Error,
            entity: entity.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entity.is_empty() {
            write!(f, "{}", self.rule)
        } else {
            write!(f, "{}: {}", self.entity, self.rule)
        }
    }
}

fn is_probability(p: f64) -> bool {
    p > 0.0 && p <= 1.0
}

fn is_link_probability(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

/// Checks every value-range invariant of the instance. An empty result means
/// the instance is well formed. A total demand above the total capacity is
/// reported as a warning, not an error.
pub fn validate(instance: &ProblemInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, c) in instance.clusters().iter().enumerate() {
        if !is_probability(c.availability) {
            out.push(Violation::error(
                format!("cluster {i}"),
                format!("availability {} outside (0, 1]", c.availability),
            ));
        }
    }
    for (i, s) in instance.servers().iter().enumerate() {
        if !is_probability(s.availability) {
            out.push(Violation::error(
                format!("server {i}"),
                format!("availability {} outside (0, 1]", s.availability),
            ));
        }
        if !(s.capacity > 0.0 && s.capacity.is_finite()) {
            out.push(Violation::error(
                format!("server {i}"),
                format!("capacity {} is not positive", s.capacity),
            ));
        }
    }
    for (i, v) in instance.vnf_types().iter().enumerate() {
        if !is_probability(v.availability) {
            out.push(Violation::error(
                format!("vnf {i}"),
                format!("availability {} outside (0, 1]", v.availability),
            ));
        }
    }
    for (c, p, a) in instance.links().access_links() {
        if !is_link_probability(a) {
            out.push(Violation::error(
                format!("access link ({}, {})", c.0, p.0),
                format!("availability {a} outside [0, 1]"),
            ));
        }
    }
    for (a, b, v) in instance.links().sync_links() {
        if !is_link_probability(v) {
            out.push(Violation::error(
                format!("sync link ({}, {})", a.0, b.0),
                format!("availability {v} outside [0, 1]"),
            ));
        }
    }
    for (i, r) in instance.requests().iter().enumerate() {
        if r.access_points.is_empty() {
            out.push(Violation::error(format!("request {i}"), "empty access point set"));
        }
        if !(r.demand > 0.0 && r.demand.is_finite()) {
            out.push(Violation::error(
                format!("request {i}"),
                format!("demand {} is not positive", r.demand),
            ));
        }
    }
    let demand = instance.total_demand();
    let capacity = instance.total_capacity();
    if demand > capacity + crate::EPS_CAP {
        out.push(Violation {
            severity: Severity::Warning,
            entity: String::new(),
            rule: format!("capacity deficit: total demand {demand} exceeds total capacity {capacity}"),
        });
    }
    out
}

/// Returns only the violations with error severity.
pub fn validation_errors(instance: &ProblemInstance) -> Vec<Violation> {
    validate(instance)
        .into_iter()
        .filter(|v| v.severity == Severity::Error)
        .collect()
}

// ---------------------------------------------------------------------------
// JSON documents

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub clusters: Vec<ClusterDoc>,
    pub servers: Vec<ServerDoc>,
    pub vnf_types: Vec<VnfTypeDoc>,
    pub access_points: Vec<AccessPointDoc>,
    pub access_links: Vec<AccessLinkDoc>,
    pub sync_links: Vec<SyncLinkDoc>,
    pub requests: Vec<RequestDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClusterDoc {
    pub name: String,
    #[serde(serialize_with = "probability")]
    pub availability: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ServerDoc {
    pub name: String,
    pub cluster: String,
    pub capacity: f64,
    #[serde(serialize_with = "probability")]
    pub availability: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VnfTypeDoc {
    pub name: String,
    #[serde(serialize_with = "probability")]
    pub availability: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AccessPointDoc {
    pub name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AccessLinkDoc {
    pub cluster: String,
    pub access_point: String,
    #[serde(serialize_with = "probability")]
    pub availability: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SyncLinkDoc {
    pub cluster_a: String,
    pub cluster_b: String,
    #[serde(serialize_with = "probability")]
    pub availability: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RequestDoc {
    pub name: String,
    pub vnf: String,
    pub access_points: Vec<String>,
    pub demand: f64,
}

fn probability<S: Serializer>(value: &f64, serializer: S) -> std::result::Result<S::Ok, S::Error> {
    let raw = serde_json::value::RawValue::from_string(format_sig17(*value))
        .map_err(serde::ser::Error::custom)?;
    raw.serialize(serializer)
}

/// Formats a finite number in positional notation with 17 significant digits,
/// which is enough to round-trip any `f64`.
pub fn format_sig17(value: f64) -> String {
    let sci = format!("{:.16e}", value.abs());
    let (mantissa, exponent) = sci.split_once('e').expect("scientific notation");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let sign = if value.is_sign_negative() && value != 0.0 { "-" } else { "" };
    let body = if exponent < 0 {
        format!("0.{}{}", "0".repeat((-exponent - 1) as usize), digits)
    } else {
        let point = exponent as usize + 1;
        if point >= digits.len() {
            format!("{}{}.0", digits, "0".repeat(point - digits.len()))
        } else {
            format!("{}.{}", &digits[..point], &digits[point..])
        }
    };
    format!("{sign}{body}")
}

impl InstanceDoc {
    /// Sorts every array by name (links by their endpoint names) so that
    /// equal instances produce equal documents.
    pub fn canonicalize(&mut self) {
        self.clusters.sort_by(|a, b| a.name.cmp(&b.name));
        self.servers.sort_by(|a, b| a.name.cmp(&b.name));
        self.vnf_types.sort_by(|a, b| a.name.cmp(&b.name));
        self.access_points.sort_by(|a, b| a.name.cmp(&b.name));
        self.access_links.sort_by(|a, b| {
            (&a.cluster, &a.access_point).cmp(&(&b.cluster, &b.access_point))
        });
        for link in &mut self.sync_links {
            if link.cluster_b < link.cluster_a {
                std::mem::swap(&mut link.cluster_a, &mut link.cluster_b);
            }
        }
        self.sync_links
            .sort_by(|a, b| (&a.cluster_a, &a.cluster_b).cmp(&(&b.cluster_a, &b.cluster_b)));
        for request in &mut self.requests {
            request.access_points.sort();
            request.access_points.dedup();
        }
        self.requests.sort_by(|a, b| a.name.cmp(&b.name));
    }

    pub fn to_instance(&self) -> Result<ProblemInstance> {
        fn index<'a>(names: impl Iterator<Item = &'a str>) -> HashMap<&'a str, usize> {
            names.enumerate().map(|(i, n)| (n, i)).collect()
        }
        fn lookup(map: &HashMap<&str, usize>, kind: &str, name: &str, owner: &str) -> Result<usize> {
            map.get(name)
                .copied()
                .ok_or_else(|| Error::input(format!("{owner}: unknown {kind} {name:?}")))
        }

        let clusters = index(self.clusters.iter().map(|c| c.name.as_str()));
        let vnfs = index(self.vnf_types.iter().map(|v| v.name.as_str()));
        let points = index(self.access_points.iter().map(|p| p.name.as_str()));

        let mut parts = InstanceParts {
            clusters: self
                .clusters
                .iter()
                .map(|c| Cluster {
                    name: c.name.clone(),
                    availability: c.availability,
                })
                .collect(),
            vnf_types: self
                .vnf_types
                .iter()
                .map(|v| VnfType {
                    name: v.name.clone(),
                    availability: v.availability,
                })
                .collect(),
            access_points: self
                .access_points
                .iter()
                .map(|p| AccessPoint { name: p.name.clone() })
                .collect(),
            ..Default::default()
        };
        for s in &self.servers {
            let owner = format!("server {:?}", s.name);
            parts.servers.push(Server {
                name: s.name.clone(),
                cluster: ClusterId(lookup(&clusters, "cluster", &s.cluster, &owner)?),
                capacity: s.capacity,
                availability: s.availability,
            });
        }
        for l in &self.access_links {
            let owner = "access link";
            let c = ClusterId(lookup(&clusters, "cluster", &l.cluster, owner)?);
            let p = AccessPointId(lookup(&points, "access point", &l.access_point, owner)?);
            if parts.links.has_access(c, p) {
                return Err(Error::input(format!(
                    "duplicate access link ({:?}, {:?})",
                    l.cluster, l.access_point
                )));
            }
            parts.links.set_access(c, p, l.availability);
        }
        for l in &self.sync_links {
            let owner = "sync link";
            let a = ClusterId(lookup(&clusters, "cluster", &l.cluster_a, owner)?);
            let b = ClusterId(lookup(&clusters, "cluster", &l.cluster_b, owner)?);
            if parts.links.has_sync(a, b) {
                return Err(Error::input(format!(
                    "duplicate sync link ({:?}, {:?})",
                    l.cluster_a, l.cluster_b
                )));
            }
            parts.links.set_sync(a, b, l.availability);
        }
        for r in &self.requests {
            let owner = format!("request {:?}", r.name);
            let access_points = r
                .access_points
                .iter()
                .map(|p| lookup(&points, "access point", p, &owner).map(AccessPointId))
                .collect::<Result<Vec<_>>>()?;
            parts.requests.push(Request {
                name: r.name.clone(),
                vnf: VnfTypeId(lookup(&vnfs, "vnf type", &r.vnf, &owner)?),
                access_points,
                demand: r.demand,
            });
        }
        ProblemInstance::from_parts(parts)
    }

    pub fn from_instance(instance: &ProblemInstance) -> Self {
        let cluster_name = |c: ClusterId| instance.cluster(c).name.clone();
        let point_name = |p: AccessPointId| instance.access_points()[p.0].name.clone();
        InstanceDoc {
            clusters: instance
                .clusters()
                .iter()
                .map(|c| ClusterDoc {
                    name: c.name.clone(),
                    availability: c.availability,
                })
                .collect(),
            servers: instance
                .servers()
                .iter()
                .map(|s| ServerDoc {
                    name: s.name.clone(),
                    cluster: cluster_name(s.cluster),
                    capacity: s.capacity,
                    availability: s.availability,
                })
                .collect(),
            vnf_types: instance
                .vnf_types()
                .iter()
                .map(|v| VnfTypeDoc {
                    name: v.name.clone(),
                    availability: v.availability,
                })
                .collect(),
            access_points: instance
                .access_points()
                .iter()
                .map(|p| AccessPointDoc { name: p.name.clone() })
                .collect(),
            access_links: instance
                .links()
                .access_links()
                .map(|(c, p, a)| AccessLinkDoc {
                    cluster: cluster_name(c),
                    access_point: point_name(p),
                    availability: a,
                })
                .collect(),
            sync_links: instance
                .links()
                .sync_links()
                .map(|(a, b, v)| SyncLinkDoc {
                    cluster_a: cluster_name(a),
                    cluster_b: cluster_name(b),
                    availability: v,
                })
                .collect(),
            requests: instance
                .requests()
                .iter()
                .map(|r| RequestDoc {
                    name: r.name.clone(),
                    vnf: instance.vnf_type(r.vnf).name.clone(),
                    access_points: r.access_points.iter().map(|&p| point_name(p)).collect(),
                    demand: r.demand,
                })
                .collect(),
        }
    }
}

/// Parses an instance document. Identifiers are assigned in document order.
pub fn load_instance(text: &str) -> Result<ProblemInstance> {
    let doc: InstanceDoc = serde_json::from_str(text)?;
    doc.to_instance()
}

/// Writes the canonical document of an instance: arrays sorted by name,
/// probabilities with 17 significant digits, two-space indentation and a
/// trailing newline.
pub fn save_instance(instance: &ProblemInstance) -> String {
    let mut doc = InstanceDoc::from_instance(instance);
    doc.canonicalize();
    let mut text = serde_json::to_string_pretty(&doc).expect("instance documents always serialize");
    text.push('\n');
    text
}

/// Re-emits any valid instance document in canonical form.
pub fn canonicalize(text: &str) -> Result<String> {
    Ok(save_instance(&load_instance(text)?))
}
