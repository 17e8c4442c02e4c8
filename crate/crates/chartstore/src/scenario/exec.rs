//! Deterministic single-threaded scenario executor.
//!
//! Agents run in a fixed round-robin order on a logical clock. Each turn an
//! agent first handles its pending event deliveries (deduplicated against
//! its own cursor), then runs its scheduled cycle. Agents interact with the
//! world only through [`AgentCtx`]: path-scoped reads, manifest-guided
//! retrieval, and lease-guarded skill appends. There is no inter-agent call
//! surface.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::coordination::{Broker, Delivery, Lease, LeaseError, LeaseManager, SubscriptionId};
use crate::manifest::{apply_mutation, DeterministicDescriber};
use crate::retrieval::{progressive_disclosure, LexicalSelector, Query, RetrievedSet};
use crate::store::{
    DocStore, DocType, LogicalClock, MutationEvent, NodePath, Page, ProvenanceHeader, WriteAccess,
    WriterRole,
};

use super::config::{FaultPlan, ScenarioConfig};
use super::skills::{Skill, SkillName};
use super::ScenarioError;

/// Audit trail of one agent's interactions.
#[derive(Debug, Default, Clone)]
pub struct AgentAudit {
    pub reads: Vec<NodePath>,
    /// Versions of events this agent appended.
    pub writes: Vec<u64>,
    /// Versions in delivery order, as consumed (post-dedup).
    pub received: Vec<(u64, bool)>,
    /// Writes rejected by the lease authority.
    pub rejected_writes: usize,
    /// Duplicate deliveries suppressed by the cursor.
    pub deduped: usize,
}

/// World handle passed to agents. All effects flow through here.
pub struct AgentCtx<'a> {
    store: &'a DocStore,
    pub clock: Arc<LogicalClock>,
    lease_manager: LeaseManager,
    agent: String,
    role: WriterRole,
    skills: Vec<Skill>,
    read_scopes: Vec<NodePath>,
    ttl_seconds: u64,
    pub tick: u64,
    pub audit: AgentAudit,
    seen_versions: BTreeSet<u64>,
    crash_flag: bool,
}

impl<'a> AgentCtx<'a> {
    pub fn agent(&self) -> &str {
        &self.agent
    }

    fn in_read_scope(&self, path: &NodePath) -> bool {
        self.read_scopes.iter().any(|s| s.contains(path))
    }

    /// Scope-checked page read.
    pub fn read_page(&mut self, path: &NodePath) -> Result<Page, ScenarioError> {
        if !self.in_read_scope(path) {
            return Err(ScenarioError::ScopeViolation {
                agent: self.agent.clone(),
                path: path.clone(),
            });
        }
        let page = self.store.read_page(path)?;
        self.audit.reads.push(path.clone());
        Ok(page)
    }

    pub fn leaf_exists(&self, path: &NodePath) -> bool {
        self.store.leaf_exists(path)
    }

    pub fn list_children(&self, node: &NodePath) -> Result<Vec<NodePath>, ScenarioError> {
        Ok(self.store.list_children(node)?)
    }

    /// Manifest-guided retrieval within this agent's read scope.
    pub fn navigate(&mut self, query_text: &str, patient: &str) -> Result<RetrievedSet, ScenarioError> {
        let patient_path = NodePath::patient(patient).map_err(crate::store::StoreError::from)?;
        if !self.in_read_scope(&patient_path) {
            return Err(ScenarioError::ScopeViolation {
                agent: self.agent.clone(),
                path: patient_path,
            });
        }
        let query = Query::new("nav", query_text).with_target_patient(patient);
        let result = progressive_disclosure(self.store, &query, &LexicalSelector, 3)?;
        self.audit.reads.extend(result.trace.retrieved.iter().cloned());
        Ok(result)
    }

    /// Acquire the patient lease, reclaiming an expired one if necessary.
    /// `Ok(None)` means the lease is legitimately held elsewhere — retry on
    /// a later cycle.
    pub fn try_lease(&mut self, patient: &str) -> Result<Option<Lease>, ScenarioError> {
        match self.lease_manager.acquire(patient, self.ttl_seconds) {
            Ok(lease) => Ok(Some(lease)),
            Err(LeaseError::LeaseHeld { .. }) => {
                match self.lease_manager.reclaim_expired(patient, self.ttl_seconds) {
                    Ok(lease) => Ok(Some(lease)),
                    Err(LeaseError::NotExpired { .. }) | Err(LeaseError::LeaseHeld { .. }) | Err(LeaseError::NotHeld { .. }) => Ok(None),
                    Err(e) => Err(e.into()),
                }
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Append a page through a skill grant, inside a held lease. Manifest
    /// maintenance runs in the same lease window.
    pub fn skill_append(
        &mut self,
        lease: &Lease,
        skill: SkillName,
        path: &NodePath,
        body: &str,
        priority: bool,
    ) -> Result<Option<MutationEvent>, ScenarioError> {
        if !self.skills.iter().any(|s| s.name == skill) {
            return Err(ScenarioError::SkillNotGranted { agent: self.agent.clone(), skill });
        }
        if !self.skills.iter().any(|s| s.name == skill && s.write_scope.contains(path)) {
            return Err(ScenarioError::ScopeViolation { agent: self.agent.clone(), path: path.clone() });
        }
        let doc_kind = path
            .doc_name()
            .and_then(|d| d.strip_suffix(".md"))
            .unwrap_or("note");
        let header = ProvenanceHeader::new("agent_notes", DocType::Note(doc_kind.to_string()), self.role)
            .with_identifier("agent", &self.agent);
        match self.store.append_page(path, header, body, priority, WriteAccess::Leased(lease)) {
            Ok(event) => {
                apply_mutation(self.store, &event, &DeterministicDescriber)?;
                self.audit.writes.push(event.version);
                Ok(Some(event))
            }
            Err(crate::store::StoreError::LeaseRequired(_)) => {
                // Expired or superseded holder: the write is rejected and
                // recorded, never retried blindly.
                self.audit.rejected_writes += 1;
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Release a lease, tolerating the crashed-holder case.
    pub fn release(&mut self, lease: Lease) -> Result<(), ScenarioError> {
        match lease.release() {
            Ok(()) | Err(LeaseError::NotHolder { .. }) | Err(LeaseError::NotHeld { .. }) => Ok(()),
            Err(e) => Err(e.into()),
        }
    }

    /// Simulate a crash: the executor stops scheduling this agent and any
    /// lease it holds is left to expire.
    pub fn simulate_crash(&mut self) {
        self.crash_flag = true;
    }

    /// True if this agent authored the event — scripts use it to skip their
    /// own writes when reacting to deliveries.
    pub fn wrote(&self, version: u64) -> bool {
        self.audit.writes.contains(&version)
    }

    /// Filter a delivery batch against this agent's own seen-version cursor.
    fn dedup(&mut self, events: Vec<MutationEvent>) -> Vec<MutationEvent> {
        let mut out = Vec::new();
        for e in events {
            if self.seen_versions.insert(e.version) {
                self.audit.received.push((e.version, e.priority));
                out.push(e);
            } else {
                self.audit.deduped += 1;
            }
        }
        out
    }
}

/// A scripted agent: state machine driven by deliveries and cycle ticks.
pub trait AgentScript: Send {
    fn id(&self) -> String;
    fn role(&self) -> WriterRole;
    /// Path scopes this agent subscribes to (and may read).
    fn subscriptions(&self) -> Vec<NodePath>;
    /// Skill grants (write scopes).
    fn skills(&self) -> Vec<Skill>;
    fn on_events(&mut self, events: &[MutationEvent], ctx: &mut AgentCtx) -> Result<(), ScenarioError>;
    fn on_tick(&mut self, ctx: &mut AgentCtx) -> Result<(), ScenarioError>;
    /// False while the agent still has scheduled or blocked work; the
    /// executor only declares quiescence when every live agent is idle.
    fn idle(&self) -> bool {
        true
    }
}

struct Slot {
    script: Box<dyn AgentScript>,
    subs: Vec<SubscriptionId>,
    ctx_state: CtxState,
    crashed: bool,
}

struct CtxState {
    audit: AgentAudit,
    seen: BTreeSet<u64>,
}

/// Executor outcome: per-agent audits plus the broker delivery log.
pub struct ExecutionResult {
    pub ticks: u64,
    pub audits: Vec<(String, AgentAudit)>,
    pub deliveries: Vec<Delivery>,
}

/// Run the agents to quiescence (or `max_ticks`).
pub fn run_agents(
    store: &DocStore,
    clock: Arc<LogicalClock>,
    config: &ScenarioConfig,
    agents: Vec<Box<dyn AgentScript>>,
) -> Result<ExecutionResult, ScenarioError> {
    let broker = Broker::new();
    let mut slots: Vec<Slot> = agents
        .into_iter()
        .map(|script| {
            let subs = script
                .subscriptions()
                .into_iter()
                .map(|scope| broker.subscribe(&script.id(), scope, 0))
                .collect();
            Slot {
                script,
                subs,
                ctx_state: CtxState { audit: AgentAudit::default(), seen: BTreeSet::new() },
                crashed: false,
            }
        })
        .collect();

    let mut ticks = 0u64;
    let mut duplicate_injected = false;

    for tick in 1..=config.max_ticks {
        ticks = tick;
        clock.advance(config.tick_millis);
        broker.drain_log(store)?;
        let version_before = store.max_version();

        for slot in &mut slots {
            if slot.crashed {
                continue;
            }
            let mut ctx = AgentCtx {
                store,
                clock: clock.clone(),
                lease_manager: LeaseManager::new(store.root(), &slot.script.id(), clock.clone()),
                agent: slot.script.id(),
                role: slot.script.role(),
                skills: slot.script.skills(),
                read_scopes: slot.script.subscriptions(),
                ttl_seconds: config.ttl_seconds,
                tick,
                audit: std::mem::take(&mut slot.ctx_state.audit),
                seen_versions: std::mem::take(&mut slot.ctx_state.seen),
                crash_flag: false,
            };

            // Gather this agent's deliveries across all its subscriptions,
            // preserving priority-first order within each subscription.
            let mut raw: Vec<MutationEvent> = Vec::new();
            for sub in &slot.subs {
                for e in broker.poll(*sub) {
                    if !raw.iter().any(|x| x.version == e.version) {
                        raw.push(e);
                    }
                }
            }
            raw.sort_by_key(|e| (!e.priority, e.version));
            let has_priority = raw.iter().any(|e| e.priority);
            if config.fault == Some(FaultPlan::DuplicateDelivery) && has_priority && !duplicate_injected {
                // Deliver the whole batch twice; the cursor must absorb it.
                let copy = raw.clone();
                raw.extend(copy);
                duplicate_injected = true;
            }
            let max_version = raw.iter().map(|e| e.version).max();
            let events = ctx.dedup(raw);

            let result = slot.script.on_events(&events, &mut ctx);
            if let Some(v) = max_version {
                for sub in &slot.subs {
                    broker.ack(*sub, v);
                }
            }
            result?;
            slot.script.on_tick(&mut ctx)?;

            slot.ctx_state.audit = ctx.audit;
            slot.ctx_state.seen = ctx.seen_versions;
            slot.crashed = ctx.crash_flag;
            broker.drain_log(store)?;
        }

        let all_idle = slots.iter().all(|s| s.crashed || s.script.idle());
        if store.max_version() == version_before && all_idle {
            break;
        }
    }

    Ok(ExecutionResult {
        ticks,
        audits: slots
            .iter()
            .map(|s| (s.script.id(), s.ctx_state.audit.clone()))
            .collect(),
        deliveries: broker.deliveries(),
    })
}
