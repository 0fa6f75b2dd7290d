//! Name-based JSON form of a placement.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemInstance;

use super::{MasterKey, Placement, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementExport {
    pub instances: Vec<InstanceExport>,
    pub assignments: Vec<AssignmentExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceExport {
    pub server: String,
    pub vnf: String,
    pub role: Role,
    pub reserved: f64,
    /// Server of the protected master; slaves only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentExport {
    pub request: String,
    pub fragments: Vec<FragmentExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentExport {
    pub master: String,
    pub protection: Vec<String>,
    pub fraction: f64,
}

impl Placement {
    pub fn export(&self) -> PlacementExport {
        let inst = &*self.instance;
        let server = |s: crate::ServerId| inst.server(s).name.clone();
        let instances = self
            .vnf_instances()
            .into_iter()
            .map(|i| InstanceExport {
                server: server(i.server),
                vnf: inst.vnf_type(i.vnf).name.clone(),
                role: i.role,
                reserved: i.reserved,
                master: i.protects.map(server),
            })
            .collect();
        let assignments = inst
            .request_ids()
            .filter(|&r| !self.fragments(r).is_empty())
            .map(|r| {
                let vnf = inst.request(r).vnf;
                AssignmentExport {
                    request: inst.request(r).name.clone(),
                    fragments: self
                        .fragments(r)
                        .iter()
                        .map(|&(s, x)| FragmentExport {
                            master: server(s),
                            protection: self
                                .protection(MasterKey::new(s, vnf))
                                .into_iter()
                                .map(server)
                                .collect(),
                            fraction: x,
                        })
                        .collect(),
                }
            })
            .collect();
        PlacementExport {
            instances,
            assignments,
        }
    }

    /// Rebuilds a placement from its export. Every fragment and slave must fit
    /// and the exported protection sets must match the slaves.
    pub fn import(instance: Arc<ProblemInstance>, export: &PlacementExport) -> Result<Self> {
        let p = Self::replay(instance, export, false)?;
        for a in &export.assignments {
            let r = p.instance.request_by_name(&a.request).unwrap();
            let vnf = p.instance.request(r).vnf;
            for f in &a.fragments {
                let s = p.instance.server_by_name(&f.master).unwrap();
                let mut expected: Vec<&str> = p
                    .protection(MasterKey::new(s, vnf))
                    .into_iter()
                    .map(|t| p.instance.server(t).name.as_str())
                    .collect();
                let mut given: Vec<&str> = f.protection.iter().map(String::as_str).collect();
                expected.sort_unstable();
                given.sort_unstable();
                if expected != given {
                    return Err(Error::input(format!(
                        "request {:?}: protection set of fragment on {:?} does not match its slaves",
                        a.request, f.master
                    )));
                }
            }
        }
        Ok(p)
    }

    /// Carries a placement over to a modified instance by name, skipping
    /// requests and servers that no longer exist and slaves that no longer
    /// fit. Fails if a surviving fragment does not fit.
    pub fn transplant(&self, instance: Arc<ProblemInstance>) -> Result<Self> {
        Self::replay(instance, &self.export(), true)
    }

    fn replay(instance: Arc<ProblemInstance>, export: &PlacementExport, lenient: bool) -> Result<Self> {
        let mut p = Placement::new(instance.clone());
        for a in &export.assignments {
            let Some(r) = instance.request_by_name(&a.request) else {
                if lenient {
                    continue;
                }
                return Err(Error::input(format!("unknown request {:?}", a.request)));
            };
            for f in &a.fragments {
                let s = instance
                    .server_by_name(&f.master)
                    .ok_or_else(|| Error::input(format!("unknown server {:?}", f.master)))?;
                p.assign_fraction(r, s, f.fraction)
                    .map_err(|e| Error::input(format!("request {:?}: {e}", a.request)))?;
            }
        }
        for i in export.instances.iter().filter(|i| i.role == Role::Slave) {
            let lookup = |name: &str| {
                instance
                    .server_by_name(name)
                    .ok_or_else(|| Error::input(format!("unknown server {name:?}")))
            };
            let server = lookup(&i.server)?;
            let master = lookup(i.master.as_deref().ok_or_else(|| Error::input("slave without master"))?)?;
            let vnf = instance
                .vnf_by_name(&i.vnf)
                .ok_or_else(|| Error::input(format!("unknown vnf {:?}", i.vnf)))?;
            let added = p.add_slave_reserving(MasterKey::new(master, vnf), server, i.reserved);
            if let Err(e) = added {
                if !lenient {
                    return Err(Error::input(format!("slave on {:?}: {e}", i.server)));
                }
            }
        }
        for i in export.instances.iter().filter(|i| i.role == Role::Master) {
            let (Some(s), Some(f)) = (instance.server_by_name(&i.server), instance.vnf_by_name(&i.vnf)) else {
                continue;
            };
            if !lenient && !p.has_master(MasterKey::new(s, f)) {
                return Err(Error::input(format!("master on {:?} serves no request", i.server)));
            }
        }
        Ok(p)
    }
}
