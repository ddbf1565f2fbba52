use std::collections::BTreeSet;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{EdgeError, ServiceId, ServiceKind, ServiceStatus};
use crate::netsim::{EdgeNodeId, SimTime};

/// Normal startup delay truncated at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartupDelay {
    pub mean_s: f64,
    pub std_s: f64,
}

impl StartupDelay {
    pub fn new(mean_s: f64, std_s: f64) -> Result<Self, EdgeError> {
        let d = Self { mean_s, std_s };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), EdgeError> {
        if !(self.mean_s >= 0.0
            && self.mean_s.is_finite()
            && self.std_s >= 0.0
            && self.std_s.is_finite())
        {
            return Err(EdgeError::Profile(format!(
                "startup mean {} / std {} must be finite and non-negative",
                self.mean_s, self.std_s
            )));
        }
        Ok(())
    }

    /// Rejection-samples the truncated normal.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> SimTime {
        if self.std_s == 0.0 {
            return SimTime::from_secs_f64(self.mean_s);
        }
        let normal = Normal::new(self.mean_s, self.std_s).expect("validated std");
        loop {
            let v = normal.sample(rng);
            if v >= 0.0 {
                return SimTime::from_secs_f64(v);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyProfile {
    pub inference: StartupDelay,
    pub mediator: StartupDelay,
    pub teardown: SimTime,
}

impl Default for LatencyProfile {
    fn default() -> Self {
        Self {
            inference: StartupDelay {
                mean_s: 24.57,
                std_s: 3.39,
            },
            mediator: StartupDelay {
                mean_s: 42.18,
                std_s: 10.39,
            },
            teardown: SimTime::ZERO,
        }
    }
}

impl LatencyProfile {
    pub fn startup(&self, kind: ServiceKind) -> &StartupDelay {
        match kind {
            ServiceKind::Inference => &self.inference,
            ServiceKind::Mediator => &self.mediator,
        }
    }

    pub fn validate(&self) -> Result<(), EdgeError> {
        self.inference.validate()?;
        self.mediator.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeploymentId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceInstance {
    pub id: InstanceId,
    pub service_id: ServiceId,
    pub kind: ServiceKind,
    pub node: EdgeNodeId,
    pub deploy_requested_at: SimTime,
    /// None when the instance never reaches InSync.
    pub in_sync_at: Option<SimTime>,
    history: Vec<(SimTime, ServiceStatus)>,
}

impl ServiceInstance {
    /// Transition history, ordered by time. Entries after the current clock
    /// are scheduled transitions.
    pub fn history(&self) -> &[(SimTime, ServiceStatus)] {
        &self.history
    }

    /// None before the deployment request.
    pub fn status_at(&self, t: SimTime) -> Option<ServiceStatus> {
        let idx = self.history.partition_point(|(at, _)| *at <= t);
        idx.checked_sub(1).map(|i| self.history[i].1)
    }

    pub fn final_status(&self) -> ServiceStatus {
        self.history
            .last()
            .expect("history starts with Deploying")
            .1
    }
}

/// A service placed on one node as a unit; components start one after the
/// other in list order.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub service_id: ServiceId,
    pub node: EdgeNodeId,
    pub requested_at: SimTime,
    pub instances: Vec<InstanceId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementEntry {
    pub time: SimTime,
    pub service_id: ServiceId,
    pub instance: InstanceId,
    pub kind: ServiceKind,
    pub node: EdgeNodeId,
    pub status: ServiceStatus,
}

/// Resource orchestration platform spanning all edge nodes.
#[derive(Debug, Clone)]
pub struct EdgeRuntime {
    nodes: BTreeSet<EdgeNodeId>,
    profile: LatencyProfile,
    rng: ChaCha8Rng,
    instances: Vec<ServiceInstance>,
    deployments: Vec<Deployment>,
    stalled: BTreeSet<EdgeNodeId>,
}

impl EdgeRuntime {
    pub fn new(
        nodes: impl IntoIterator<Item = EdgeNodeId>,
        profile: LatencyProfile,
        seed: u64,
    ) -> Result<Self, EdgeError> {
        profile.validate()?;
        Ok(Self {
            nodes: nodes.into_iter().collect(),
            profile,
            rng: ChaCha8Rng::seed_from_u64(seed),
            instances: Vec::new(),
            deployments: Vec::new(),
            stalled: BTreeSet::new(),
        })
    }

    pub fn profile(&self) -> &LatencyProfile {
        &self.profile
    }

    pub fn nodes(&self) -> impl Iterator<Item = &EdgeNodeId> {
        self.nodes.iter()
    }

    /// Fault injection: instances deployed on `node` from now on never reach
    /// InSync.
    pub fn set_stalled(&mut self, node: &EdgeNodeId, stalled: bool) {
        if stalled {
            self.stalled.insert(node.clone());
        } else {
            self.stalled.remove(node);
        }
    }

    pub fn instances(&self) -> &[ServiceInstance] {
        &self.instances
    }

    pub fn instance(&self, id: InstanceId) -> Result<&ServiceInstance, EdgeError> {
        self.instances
            .get(id.0 as usize)
            .ok_or(EdgeError::UnknownInstance(id.0))
    }

    pub fn deployments(&self) -> &[Deployment] {
        &self.deployments
    }

    fn check_node(&self, node: &EdgeNodeId) -> Result<(), EdgeError> {
        if self.nodes.contains(node) {
            Ok(())
        } else {
            Err(EdgeError::UnknownNode(node.clone()))
        }
    }

    fn push_instance(
        &mut self,
        service_id: &ServiceId,
        kind: ServiceKind,
        node: &EdgeNodeId,
        at: SimTime,
        delay: Option<SimTime>,
    ) -> InstanceId {
        let id = InstanceId(self.instances.len() as u64);
        let in_sync_at = delay.map(|d| at + d);
        let mut history = vec![(at, ServiceStatus::Deploying)];
        if let Some(t) = in_sync_at {
            history.push((t, ServiceStatus::InSync));
        }
        self.instances.push(ServiceInstance {
            id,
            service_id: service_id.clone(),
            kind,
            node: node.clone(),
            deploy_requested_at: at,
            in_sync_at,
            history,
        });
        id
    }

    fn conflicts(
        &self,
        service_id: &ServiceId,
        kind: ServiceKind,
        node: &EdgeNodeId,
        at: SimTime,
    ) -> bool {
        self.instances.iter().any(|i| {
            &i.service_id == service_id
                && i.kind == kind
                && &i.node == node
                && (i.deploy_requested_at > at
                    || i.status_at(at).is_some_and(ServiceStatus::is_live))
        })
    }

    /// Deploys a single component at `at` with a sampled startup delay.
    pub fn deploy(
        &mut self,
        service_id: &ServiceId,
        kind: ServiceKind,
        node: &EdgeNodeId,
        at: SimTime,
    ) -> Result<InstanceId, EdgeError> {
        Ok(self
            .deploy_service(service_id, node, at, &[kind])?
            .instances[0])
    }

    /// Deploys every component of a service on `node`. Each component is
    /// requested once its predecessor is InSync, so startup delays add up.
    pub fn deploy_service(
        &mut self,
        service_id: &ServiceId,
        node: &EdgeNodeId,
        at: SimTime,
        components: &[ServiceKind],
    ) -> Result<&Deployment, EdgeError> {
        self.check_node(node)?;
        if components.is_empty() {
            return Err(EdgeError::Profile(
                "a deployment needs at least one component".into(),
            ));
        }
        for &kind in components {
            if self.conflicts(service_id, kind, node, at) {
                return Err(EdgeError::Conflict {
                    service: service_id.clone(),
                    kind,
                    node: node.clone(),
                });
            }
        }
        let stalled = self.stalled.contains(node);
        let mut t = at;
        let mut ids = Vec::with_capacity(components.len());
        for &kind in components {
            let delay = self.profile.startup(kind).sample(&mut self.rng);
            let delay = (!stalled).then_some(delay);
            ids.push(self.push_instance(service_id, kind, node, t, delay));
            if let Some(d) = delay {
                t += d;
            }
        }
        self.deployments.push(Deployment {
            service_id: service_id.clone(),
            node: node.clone(),
            requested_at: at,
            instances: ids,
        });
        Ok(self.deployments.last().expect("just pushed"))
    }

    /// Places a service that is already InSync at `at` (scenario start).
    pub fn bootstrap(
        &mut self,
        service_id: &ServiceId,
        node: &EdgeNodeId,
        at: SimTime,
        components: &[ServiceKind],
    ) -> Result<DeploymentId, EdgeError> {
        self.check_node(node)?;
        let ids = components
            .iter()
            .map(|&k| self.push_instance(service_id, k, node, at, Some(SimTime::ZERO)))
            .collect();
        self.deployments.push(Deployment {
            service_id: service_id.clone(),
            node: node.clone(),
            requested_at: at,
            instances: ids,
        });
        Ok(DeploymentId(self.deployments.len() - 1))
    }

    /// Moves a live instance to Terminating at `at`, then Terminated after the
    /// teardown delay. Pending transitions after `at` are cancelled.
    pub fn terminate(&mut self, id: InstanceId, at: SimTime) -> Result<(), EdgeError> {
        let teardown = self.profile.teardown;
        let inst = self
            .instances
            .get_mut(id.0 as usize)
            .ok_or(EdgeError::UnknownInstance(id.0))?;
        let status = inst.status_at(at);
        if !status.is_some_and(|s| s.can_transition_to(ServiceStatus::Terminating)) {
            return Err(EdgeError::State {
                instance: id.0,
                status,
                op: "terminate",
            });
        }
        inst.history.retain(|(t, _)| *t <= at);
        if inst.in_sync_at.is_some_and(|t| t > at) {
            inst.in_sync_at = None;
        }
        inst.history.push((at, ServiceStatus::Terminating));
        inst.history
            .push((at + teardown, ServiceStatus::Terminated));
        Ok(())
    }

    /// Terminates every live component of a deployment; components not yet
    /// requested are cancelled with it.
    pub fn terminate_deployment(
        &mut self,
        dep: DeploymentId,
        at: SimTime,
    ) -> Result<(), EdgeError> {
        let ids = self
            .deployments
            .get(dep.0)
            .ok_or(EdgeError::UnknownInstance(dep.0 as u64))?
            .instances
            .clone();
        let mut terminated = 0;
        for id in ids {
            let inst = self.instance(id)?;
            if inst.deploy_requested_at > at {
                let inst = &mut self.instances[id.0 as usize];
                inst.history = vec![
                    (at, ServiceStatus::Deploying),
                    (at, ServiceStatus::Terminating),
                ];
                inst.history
                    .push((at + self.profile.teardown, ServiceStatus::Terminated));
                inst.deploy_requested_at = at;
                inst.in_sync_at = None;
                terminated += 1;
            } else if inst.status_at(at).is_some_and(ServiceStatus::is_live) {
                self.terminate(id, at)?;
                terminated += 1;
            }
        }
        if terminated == 0 {
            return Err(EdgeError::State {
                instance: dep.0 as u64,
                status: Some(ServiceStatus::Terminated),
                op: "terminate deployment",
            });
        }
        Ok(())
    }

    /// Aggregate status: Terminating/Terminated if any component is, InSync
    /// only when every component is, otherwise Deploying.
    pub fn deployment_status(&self, dep: DeploymentId, t: SimTime) -> Option<ServiceStatus> {
        let d = self.deployments.get(dep.0)?;
        if t < d.requested_at {
            return None;
        }
        let mut agg = ServiceStatus::InSync;
        for &id in &d.instances {
            let s = self.instances[id.0 as usize]
                .status_at(t)
                .unwrap_or(ServiceStatus::Deploying);
            agg = match (agg, s) {
                (_, ServiceStatus::Terminated) | (ServiceStatus::Terminated, _) => {
                    ServiceStatus::Terminated
                }
                (_, ServiceStatus::Terminating) | (ServiceStatus::Terminating, _) => {
                    ServiceStatus::Terminating
                }
                (_, ServiceStatus::Deploying) | (ServiceStatus::Deploying, _) => {
                    ServiceStatus::Deploying
                }
                _ => ServiceStatus::InSync,
            };
        }
        Some(agg)
    }

    /// Earliest time every component is InSync, if ever.
    pub fn deployment_ready_at(&self, dep: DeploymentId) -> Option<SimTime> {
        let d = self.deployments.get(dep.0)?;
        d.instances
            .iter()
            .map(|id| self.instances[id.0 as usize].in_sync_at)
            .try_fold(d.requested_at, |acc, t| t.map(|t| acc.max(t)))
    }

    /// Most recent live deployment of `service_id` at `t`.
    pub fn placement_of(
        &self,
        service_id: &ServiceId,
        t: SimTime,
    ) -> Option<(DeploymentId, &EdgeNodeId, ServiceStatus)> {
        self.deployments
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, d)| &d.service_id == service_id)
            .find_map(|(i, d)| {
                let s = self.deployment_status(DeploymentId(i), t)?;
                s.is_live().then_some((DeploymentId(i), &d.node, s))
            })
    }

    /// Status of `service_id` on `node` at `t`, considering the newest
    /// deployment there.
    pub fn service_status_on(
        &self,
        service_id: &ServiceId,
        node: &EdgeNodeId,
        t: SimTime,
    ) -> Option<ServiceStatus> {
        self.deployments
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, d)| &d.service_id == service_id && &d.node == node)
            .find_map(|(i, _)| self.deployment_status(DeploymentId(i), t))
    }

    /// All realized transitions, ordered by time then instance.
    pub fn placement_log(&self) -> Vec<PlacementEntry> {
        let mut out: Vec<PlacementEntry> = self
            .instances
            .iter()
            .flat_map(|i| {
                i.history.iter().map(move |&(time, status)| PlacementEntry {
                    time,
                    service_id: i.service_id.clone(),
                    instance: i.id,
                    kind: i.kind,
                    node: i.node.clone(),
                    status,
                })
            })
            .collect();
        out.sort_by(|a, b| a.time.cmp(&b.time).then(a.instance.cmp(&b.instance)));
        out
    }
}

pub fn write_placement_log<W: Write>(entries: &[PlacementEntry], mut w: W) -> std::io::Result<()> {
    writeln!(w, "time_s,service_id,node,status,kind,instance")?;
    for e in entries {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            e.time,
            e.service_id,
            e.node,
            e.status.name(),
            e.kind.name(),
            e.instance.0
        )?;
    }
    Ok(())
}
