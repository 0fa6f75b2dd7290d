//! Edits applied to an instance document during what-if planning.
//!
//! Deltas work on names, so a list of committed deltas replays exactly on
//! the document it started from.

use havnfp::greedy::SplitMode;
use havnfp::model::{InstanceDoc, RequestDoc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", rename_all_fields = "camelCase", deny_unknown_fields)]
pub enum Delta {
    AddRequest { request: RequestDoc },
    RemoveRequest { name: String },
    /// Multiplies the capacity of the named servers, or of every server.
    ScaleCapacity {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        servers: Option<Vec<String>>,
        factor: f64,
    },
    SetAvailability { target: Target, value: f64 },
    /// Changes the session's split mode; the instance is untouched.
    SetSplit { split: SplitMode },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase", deny_unknown_fields)]
pub enum Target {
    Server { name: String },
    Cluster { name: String },
    Vnf { name: String },
    AccessLink { cluster: String, access_point: String },
    SyncLink { cluster_a: String, cluster_b: String },
    /// Every cluster, server, VNF type and link.
    All,
}

/// Applies `delta` to `doc` and `split` in place. On error neither is
/// changed. The result may still fail instance validation.
pub fn apply(doc: &mut InstanceDoc, split: &mut SplitMode, delta: &Delta) -> Result<(), String> {
    let mut next = doc.clone();
    let mut next_split = *split;
    apply_to(&mut next, &mut next_split, delta)?;
    *doc = next;
    *split = next_split;
    Ok(())
}

fn apply_to(doc: &mut InstanceDoc, split: &mut SplitMode, delta: &Delta) -> Result<(), String> {
    match delta {
        Delta::AddRequest { request } => {
            if doc.requests.iter().any(|r| r.name == request.name) {
                return Err(format!("request {:?} already exists", request.name));
            }
            doc.requests.push(request.clone());
        }
        Delta::RemoveRequest { name } => {
            let before = doc.requests.len();
            doc.requests.retain(|r| &r.name != name);
            if doc.requests.len() == before {
                return Err(format!("unknown request {name:?}"));
            }
        }
        Delta::ScaleCapacity { servers, factor } => {
            if !(factor.is_finite() && *factor > 0.0) {
                return Err(format!("capacity factor must be positive, got {factor}"));
            }
            match servers {
                None => doc.servers.iter_mut().for_each(|s| s.capacity *= factor),
                Some(names) => {
                    for name in names {
                        let server = doc
                            .servers
                            .iter_mut()
                            .find(|s| &s.name == name)
                            .ok_or_else(|| format!("unknown server {name:?}"))?;
                        server.capacity *= factor;
                    }
                }
            }
        }
        Delta::SetAvailability { target, value } => set_availability(doc, target, *value)?,
        Delta::SetSplit { split: mode } => *split = *mode,
    }
    Ok(())
}

fn set_availability(doc: &mut InstanceDoc, target: &Target, value: f64) -> Result<(), String> {
    let missing = |what: &str, name: &str| format!("unknown {what} {name:?}");
    match target {
        Target::Server { name } => {
            let s = doc.servers.iter_mut().find(|s| &s.name == name).ok_or_else(|| missing("server", name))?;
            s.availability = value;
        }
        Target::Cluster { name } => {
            let c = doc.clusters.iter_mut().find(|c| &c.name == name).ok_or_else(|| missing("cluster", name))?;
            c.availability = value;
        }
        Target::Vnf { name } => {
            let f = doc.vnf_types.iter_mut().find(|f| &f.name == name).ok_or_else(|| missing("vnf", name))?;
            f.availability = value;
        }
        Target::AccessLink { cluster, access_point } => {
            let link = doc
                .access_links
                .iter_mut()
                .find(|l| &l.cluster == cluster && &l.access_point == access_point)
                .ok_or_else(|| format!("no access link between {cluster:?} and {access_point:?}"))?;
            link.availability = value;
        }
        Target::SyncLink { cluster_a, cluster_b } => {
            let link = doc
                .sync_links
                .iter_mut()
                .find(|l| {
                    (&l.cluster_a == cluster_a && &l.cluster_b == cluster_b)
                        || (&l.cluster_a == cluster_b && &l.cluster_b == cluster_a)
                })
                .ok_or_else(|| format!("no sync link between {cluster_a:?} and {cluster_b:?}"))?;
            link.availability = value;
        }
        Target::All => {
            doc.clusters.iter_mut().for_each(|c| c.availability = value);
            doc.servers.iter_mut().for_each(|s| s.availability = value);
            doc.vnf_types.iter_mut().for_each(|f| f.availability = value);
            doc.access_links.iter_mut().for_each(|l| l.availability = value);
            doc.sync_links.iter_mut().for_each(|l| l.availability = value);
        }
    }
    Ok(())
}
