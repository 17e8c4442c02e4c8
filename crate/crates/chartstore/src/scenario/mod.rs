//! Scripted multi-agent workflow scenarios over the coordination layer:
//! monitoring/follow-up, triage, emergency escalation, medication
//! adherence, longitudinal risk, and cross-specialty conflict.
//!
//! Each scenario seeds a fresh store, runs its agents on the deterministic
//! executor until quiescence, then checks scenario-specific assertions and
//! replays the mutation log to verify the timeline reconstructs the tree.

mod agents;
mod config;
mod exec;
mod skills;

pub use agents::{COORD_ADM, COORD_PATIENT, CURRENT_ADM, PRIOR_ADM, SUBJECT};
pub use config::{FaultPlan, ScenarioConfig, Thresholds};
pub use exec::{AgentAudit, AgentCtx, AgentScript, ExecutionResult};
pub use skills::{Skill, SkillName};

use std::path::Path;

use thiserror::Error;

use crate::coordination::{Delivery, LeaseError};
use crate::manifest::{rebuild_all, DeterministicDescriber, ManifestError};
use crate::retrieval::RetrievalError;
use crate::store::{
    logical_clock, replay_log, tree_hash, DocStore, DocType, MutationEvent, NodePath,
    ProvenanceHeader, StoreError, TreeScope, WriteAccess, WriterRole,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("agent {agent} acted outside its scope: {path}")]
    ScopeViolation { agent: String, path: NodePath },
    #[error("agent {agent} invoked ungranted skill {skill:?}")]
    SkillNotGranted { agent: String, skill: SkillName },
    #[error("bad scenario config: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Lease(#[from] LeaseError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// One checked property of a finished run.
#[derive(Debug, Clone)]
pub struct AssertionResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> AssertionResult {
    AssertionResult { name: name.to_string(), passed, detail }
}

/// Full record of a scenario run.
#[derive(Debug)]
pub struct ScenarioReport {
    pub name: String,
    pub fault: Option<FaultPlan>,
    pub ticks: u64,
    pub timeline: Vec<MutationEvent>,
    pub deliveries: Vec<Delivery>,
    pub audits: Vec<(String, AgentAudit)>,
    pub assertions: Vec<AssertionResult>,
    pub replay_consistent: bool,
    pub passed: bool,
}

impl ScenarioReport {
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "scenario {} (fault: {:?}) — {} ticks, {} events, replay {}\n",
            self.name,
            self.fault,
            self.ticks,
            self.timeline.len(),
            if self.replay_consistent { "consistent" } else { "INCONSISTENT" },
        );
        for a in &self.assertions {
            out.push_str(&format!(
                "  [{}] {} — {}\n",
                if a.passed { "pass" } else { "FAIL" },
                a.name,
                a.detail
            ));
        }
        out.push_str(&format!("result: {}\n", if self.passed { "PASS" } else { "FAIL" }));
        out
    }
}

pub const SCENARIO_NAMES: [&str; 6] = [
    "monitoring",
    "triage",
    "escalation",
    "adherence",
    "longitudinal",
    "cross_specialty",
];

/// Read-only view handed to assertion checks.
struct World<'a> {
    store: &'a DocStore,
    config: &'a ScenarioConfig,
    timeline: &'a [MutationEvent],
    deliveries: &'a [Delivery],
    audits: &'a [(String, AgentAudit)],
}

impl World<'_> {
    fn events_named(&self, doc: &str) -> Vec<&MutationEvent> {
        self.timeline.iter().filter(|e| e.doc_id.doc_name() == Some(doc)).collect()
    }

    fn first_version(&self, doc: &str) -> Option<u64> {
        self.events_named(doc).first().map(|e| e.version)
    }

    fn audit(&self, agent: &str) -> Option<&AgentAudit> {
        self.audits.iter().find(|(id, _)| id == agent).map(|(_, a)| a)
    }
}

/// Run a named scenario into a fresh store at `root`.
pub fn run_scenario(name: &str, root: &Path, config: &ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
    let clock = logical_clock(1_700_000_000_000);
    let store = DocStore::open_with_clock(root, clock.clone())?;

    let agents: Vec<Box<dyn AgentScript>> = match name {
        "monitoring" => {
            seed_monitoring(&store)?;
            vec![
                Box::new(agents::MonitoringPatient::new(config)),
                Box::new(agents::MonitoringClinician::new(config)),
                Box::new(agents::SchedulingAgent::new()),
            ]
        }
        "triage" => {
            seed_triage(&store)?;
            vec![
                Box::new(agents::TriageAgent::new()),
                Box::new(agents::TriageClinician::new(config)),
                Box::new(agents::TriageSpecialist::new()),
            ]
        }
        "escalation" => {
            seed_escalation(&store)?;
            vec![
                Box::new(agents::EscalationPatient::new(config)),
                Box::new(agents::EscalationClinician::new()),
            ]
        }
        "adherence" => {
            seed_adherence(&store)?;
            vec![
                Box::new(agents::AdherencePatient::new(config)),
                Box::new(agents::AdherenceClinician::new()),
            ]
        }
        "longitudinal" => {
            seed_longitudinal(&store)?;
            vec![
                Box::new(agents::LongitudinalClinician::new(config)),
                Box::new(agents::CareManager::new()),
                Box::new(agents::LongitudinalPatient::new()),
            ]
        }
        "cross_specialty" => {
            seed_cross_specialty(&store)?;
            vec![
                Box::new(agents::CardiologyAgent::new()),
                Box::new(agents::OncologyAgent::new()),
                Box::new(agents::CoordinatorAgent::new()),
            ]
        }
        other => return Err(ScenarioError::UnknownScenario(other.to_string())),
    };

    rebuild_all(&store, &DeterministicDescriber)?;
    let baseline_version = store.max_version();
    let result = exec::run_agents(&store, clock, config, agents)?;

    let timeline = store.mutation_log(0)?;
    let replay_dir = replay_scratch_dir(root);
    replay_log(&store, &replay_dir)?;
    let replay_consistent = tree_hash(store.root(), TreeScope::Documents)?
        == tree_hash(&replay_dir, TreeScope::Documents)?;
    let _ = std::fs::remove_dir_all(&replay_dir);

    let world = World {
        store: &store,
        config,
        timeline: &timeline,
        deliveries: &result.deliveries,
        audits: &result.audits,
    };
    let mut assertions = match name {
        "monitoring" => assert_monitoring(&world),
        "triage" => assert_triage(&world),
        "escalation" => assert_escalation(&world),
        "adherence" => assert_adherence(&world),
        "longitudinal" => assert_longitudinal(&world),
        "cross_specialty" => assert_cross_specialty(&world),
        _ => unreachable!("scenario list checked above"),
    };
    assertions.extend(common_assertions(&world, &result, baseline_version, replay_consistent, config));

    let passed = assertions.iter().all(|a| a.passed);
    Ok(ScenarioReport {
        name: name.to_string(),
        fault: config.fault,
        ticks: result.ticks,
        timeline,
        deliveries: result.deliveries,
        audits: result.audits,
        assertions,
        replay_consistent,
        passed,
    })
}

fn replay_scratch_dir(root: &Path) -> std::path::PathBuf {
    let dir = root
        .parent()
        .unwrap_or(root)
        .join(format!(".replay-{}", std::process::id()));
    if dir.exists() {
        let _ = std::fs::remove_dir_all(&dir);
    }
    dir
}

// ------------------------------------------------------------------- seeding

fn seed_page(
    store: &DocStore,
    admission: &str,
    doc: &str,
    doc_type: DocType,
    date: &str,
    body: &str,
) -> Result<(), ScenarioError> {
    let path = NodePath::leaf(SUBJECT, admission, doc).map_err(StoreError::from)?;
    let header = ProvenanceHeader::new("seed", doc_type, WriterRole::System).with_chart_time(date);
    store.append_page(&path, header, body, false, WriteAccess::Build)?;
    Ok(())
}

fn seed_monitoring(store: &DocStore) -> Result<(), ScenarioError> {
    seed_page(
        store,
        CURRENT_ADM,
        "diagnoses.md",
        DocType::Diagnoses,
        "2110-01-02",
        "Coded diagnoses: essential hypertension; type two diabetes mellitus.\n\n\
         - essential hypertension\n- type two diabetes mellitus\n",
    )
}

fn seed_triage(store: &DocStore) -> Result<(), ScenarioError> {
    seed_page(
        store,
        PRIOR_ADM,
        "diagnoses.md",
        DocType::Diagnoses,
        "2109-08-01",
        "Coded diagnoses: type two diabetes mellitus with hyperglycemia; essential hypertension.\n\n\
         - type two diabetes mellitus with hyperglycemia\n- essential hypertension\n",
    )?;
    seed_page(
        store,
        PRIOR_ADM,
        "prescriptions.md",
        DocType::Prescriptions,
        "2109-08-02",
        "Medications ordered: metformin; lisinopril.\n\n- metformin 500 mg twice daily\n- lisinopril 10 mg once daily\n",
    )?;
    seed_page(
        store,
        PRIOR_ADM,
        "lab_chemistry.md",
        DocType::Lab("chemistry".into()),
        "2109-08-02",
        "Glucose peaked at 240 mg/dL during this stay.\n\nSerial glucose values: 180, 240, 150 (mg/dL).\n",
    )
}

fn seed_escalation(store: &DocStore) -> Result<(), ScenarioError> {
    seed_page(
        store,
        CURRENT_ADM,
        "diagnoses.md",
        DocType::Diagnoses,
        "2110-01-02",
        "Coded diagnoses: community acquired pneumonia.\n\n- community acquired pneumonia\n",
    )
}

fn seed_adherence(store: &DocStore) -> Result<(), ScenarioError> {
    seed_page(
        store,
        CURRENT_ADM,
        "prescriptions.md",
        DocType::Prescriptions,
        "2110-01-02",
        "Medications ordered: apixaban.\n\n- apixaban 5 mg twice daily\n",
    )
}

fn seed_longitudinal(store: &DocStore) -> Result<(), ScenarioError> {
    let series = [
        ("hadm_90000001", "2108-03-10", 1.1),
        ("hadm_90000002", "2109-01-20", 1.8),
        ("hadm_90000003", "2109-11-05", 2.6),
    ];
    for (adm, date, creat) in series {
        seed_page(
            store,
            adm,
            "diagnoses.md",
            DocType::Diagnoses,
            date,
            "Coded diagnoses: chronic kidney disease stage three; essential hypertension.\n\n\
             - chronic kidney disease stage three\n- essential hypertension\n",
        )?;
        seed_page(
            store,
            adm,
            "lab_chemistry.md",
            DocType::Lab("chemistry".into()),
            date,
            &format!(
                "Creatinine peaked at {creat} mg/dL during this stay.\n\n\
                 Serial creatinine values trending with renal function.\n"
            ),
        )?;
    }
    Ok(())
}

fn seed_cross_specialty(store: &DocStore) -> Result<(), ScenarioError> {
    seed_page(
        store,
        CURRENT_ADM,
        "diagnoses.md",
        DocType::Diagnoses,
        "2110-01-02",
        "Coded diagnoses: malignant neoplasm under active chemotherapy; essential hypertension.\n\n\
         - malignant neoplasm under active chemotherapy\n- essential hypertension\n",
    )?;
    seed_page(
        store,
        CURRENT_ADM,
        "oncology_note.md",
        DocType::Note("oncology_note".into()),
        "2110-01-03",
        "Current chemotherapy protocol: cisplatin every twenty one days.\n\n\
         Renal function monitored before each cycle.\n",
    )
}

// ---------------------------------------------------------------- assertions

fn common_assertions(
    world: &World,
    result: &ExecutionResult,
    baseline_version: u64,
    replay_consistent: bool,
    config: &ScenarioConfig,
) -> Vec<AssertionResult> {
    let mut out = Vec::new();
    out.push(check(
        "timeline-replays-to-identical-tree",
        replay_consistent,
        format!("{} events", world.timeline.len()),
    ));
    out.push(check(
        "scenario-reached-quiescence",
        result.ticks < config.max_ticks,
        format!("{} of {} ticks used", result.ticks, config.max_ticks),
    ));
    // Log completeness: everything any agent consumed exists in the shared
    // timeline — cross-agent information flows only through logged writes.
    let versions: std::collections::BTreeSet<u64> = world.timeline.iter().map(|e| e.version).collect();
    let all_received_logged = world
        .audits
        .iter()
        .flat_map(|(_, a)| a.received.iter())
        .all(|(v, _)| versions.contains(v));
    out.push(check(
        "every-consumed-event-is-logged",
        all_received_logged,
        "delivery audit against mutation log".into(),
    ));
    let agent_writes_after_baseline = world
        .audits
        .iter()
        .flat_map(|(_, a)| a.writes.iter())
        .all(|v| *v > baseline_version);
    out.push(check(
        "agent-writes-postdate-seed",
        agent_writes_after_baseline,
        format!("baseline version {baseline_version}"),
    ));
    // Priority classes never invert within one poll of one subscription.
    let mut by_poll: std::collections::BTreeMap<(u64, u64), Vec<&Delivery>> = std::collections::BTreeMap::new();
    for d in world.deliveries {
        by_poll.entry((d.subscription, d.poll)).or_default().push(d);
    }
    let priority_order_ok = by_poll.values().all(|batch| {
        match batch.iter().position(|d| !d.priority) {
            Some(i) => !batch[i..].iter().any(|d| d.priority),
            None => true,
        }
    });
    out.push(check(
        "priority-precedes-standard-in-every-poll",
        priority_order_ok,
        format!("{} deliveries", world.deliveries.len()),
    ));
    out
}

fn assert_monitoring(world: &World) -> Vec<AssertionResult> {
    let mut out = Vec::new();
    let vitals = world.events_named("vitals_summary.md");
    match world.config.fault {
        None => {
            out.push(check(
                "all-vitals-cycles-ran",
                vitals.len() == world.config.bp_series.len(),
                format!("{} of {}", vitals.len(), world.config.bp_series.len()),
            ));
            let follow_up = world.events_named("care_plan.md");
            out.push(check("follow-up-request-written", !follow_up.is_empty(), "care_plan.md".into()));
            let appointment = world.events_named("appointment.md");
            out.push(check("appointment-booked", !appointment.is_empty(), "appointment.md".into()));
            let order_ok = match (follow_up.first(), appointment.first()) {
                (Some(f), Some(a)) => f.version < a.version,
                _ => false,
            };
            out.push(check("booking-follows-request", order_ok, "version order".into()));
        }
        Some(FaultPlan::CrashMidLease) => {
            out.push(check(
                "crashed-holder-stopped",
                vitals.len() < world.config.bp_series.len(),
                format!("{} vitals before crash", vitals.len()),
            ));
            let clinician_after = world
                .events_named("follow_up_note.md")
                .iter()
                .any(|e| vitals.last().is_some_and(|v| e.version > v.version));
            out.push(check("work-continued-after-crash", clinician_after, "follow_up_note.md".into()));
        }
        Some(FaultPlan::DelayedHeartbeat) => {
            let rejected = world.audit("patient-agent").map(|a| a.rejected_writes).unwrap_or(0);
            out.push(check(
                "stalled-holder-late-write-rejected",
                rejected >= 1,
                format!("{rejected} rejected writes"),
            ));
            let late_landed = world.events_named("vitals_summary.md").iter().any(|e| {
                world
                    .store
                    .read_page_ref(&e.page_ref)
                    .map(|p| p.body.contains("Late vitals write"))
                    .unwrap_or(false)
            });
            out.push(check("late-write-never-persisted", !late_landed, "no stalled page in tree".into()));
        }
        Some(FaultPlan::DuplicateDelivery) => {}
    }
    out
}

fn assert_triage(world: &World) -> Vec<AssertionResult> {
    let mut out = Vec::new();
    let queue = world.events_named("triage_queue.md");
    out.push(check(
        "queue-carries-assessment-and-routing",
        queue.len() >= 2,
        format!("{} queue entries", queue.len()),
    ));
    let assessment = world.first_version("triage_assessment.md");
    out.push(check("assessment-written", assessment.is_some(), "triage_assessment.md".into()));
    let note = world.first_version("specialist_note.md");
    out.push(check("specialist-responded", note.is_some(), "specialist_note.md".into()));
    let order_ok = match (queue.first(), note) {
        (Some(q), Some(n)) => q.version < n,
        _ => false,
    };
    out.push(check("routing-precedes-consultation", order_ok, "version order".into()));
    let history_ok = world
        .store
        .read_page(&agents::subject_leaf(CURRENT_ADM, "triage_assessment.md"))
        .map(|p| p.body.contains("Relevant history") && !p.body.contains("Relevant history: ."))
        .unwrap_or(false);
    out.push(check("assessment-cites-prior-history", history_ok, "retrieved prior records".into()));
    out
}

fn assert_escalation(world: &World) -> Vec<AssertionResult> {
    let mut out = Vec::new();
    let alerts = world.events_named("escalation_alert.md");
    out.push(check(
        "escalation-carries-priority-flag",
        alerts.len() == 1 && alerts[0].priority,
        format!("{} alerts", alerts.len()),
    ));
    // The clinician consumed the priority alert before the standard vitals
    // event written earlier in the same cycle.
    let ordered = match (world.audit("clinician-agent"), alerts.first()) {
        (Some(audit), Some(alert)) => {
            let sibling_vitals = alert.version - 1;
            let pos = |v: u64| audit.received.iter().position(|(rv, _)| *rv == v);
            match (pos(alert.version), pos(sibling_vitals)) {
                (Some(a), Some(s)) => a < s,
                _ => false,
            }
        }
        _ => false,
    };
    out.push(check(
        "priority-delivered-before-queued-standard",
        ordered,
        "clinician delivery order".into(),
    ));
    let response = world.events_named("response_plan.md");
    out.push(check(
        "exactly-one-response-plan",
        response.len() == 1,
        format!("{} response plans", response.len()),
    ));
    let code = world.events_named("emergency_queue.md").iter().any(|e| {
        world
            .store
            .read_page_ref(&e.page_ref)
            .map(|p| p.body.starts_with("Code notification"))
            .unwrap_or(false)
    });
    out.push(check("code-notification-follows", code, "emergency_queue.md".into()));
    if world.config.fault == Some(FaultPlan::DuplicateDelivery) {
        let deduped: usize = world.audits.iter().map(|(_, a)| a.deduped).sum();
        out.push(check(
            "duplicate-delivery-absorbed-by-cursor",
            deduped >= 1,
            format!("{deduped} duplicates suppressed"),
        ));
    }
    out
}

fn assert_adherence(world: &World) -> Vec<AssertionResult> {
    let mut out = Vec::new();
    let flags = world.events_named("medication_log.md");
    let expected_misses = world.config.doses_taken.iter().filter(|t| !**t).count();
    out.push(check(
        "each-missed-dose-flagged",
        flags.len() == expected_misses,
        format!("{} flags for {} misses", flags.len(), expected_misses),
    ));
    let alerts = world.events_named("non_adherence_alert.md");
    let streak_reached =
        longest_miss_streak(&world.config.doses_taken) >= world.config.thresholds.adherence_misses;
    if streak_reached {
        out.push(check("alert-at-threshold", alerts.len() == 1, format!("{} alerts", alerts.len())));
        let plan = world.events_named("care_plan.md");
        out.push(check("clinician-adjusted-plan", !plan.is_empty(), "care_plan.md".into()));
        let ingested = world
            .audit("patient-agent")
            .map(|a| plan.iter().any(|e| a.received.iter().any(|(v, _)| *v == e.version)))
            .unwrap_or(false);
        out.push(check("patient-ingested-plan-change", ingested, "delivery audit".into()));
    } else {
        out.push(check(
            "no-alert-below-threshold",
            alerts.is_empty(),
            format!("{} alerts", alerts.len()),
        ));
    }
    out
}

fn longest_miss_streak(doses: &[bool]) -> usize {
    let mut best = 0;
    let mut run = 0;
    for taken in doses {
        if *taken {
            run = 0;
        } else {
            run += 1;
            best = best.max(run);
        }
    }
    best
}

fn assert_longitudinal(world: &World) -> Vec<AssertionResult> {
    let mut out = Vec::new();
    let risk = world.first_version("risk_assessment.md");
    out.push(check("risk-assessment-written", risk.is_some(), "risk_assessment.md".into()));
    let alert = world.first_version("population_health.md");
    out.push(check("preventive-alert-published", alert.is_some(), "population_health.md".into()));
    let plan = world.first_version("care_plan.md");
    out.push(check("intervention-plan-written", plan.is_some(), "care_plan.md".into()));
    let ack = world.first_version("monitoring_plan.md");
    out.push(check("patient-adjusted-monitoring", ack.is_some(), "monitoring_plan.md".into()));
    let order_ok = matches!(
        (risk, alert, plan, ack),
        (Some(r), Some(a), Some(p), Some(k)) if r < a && a < p && p < k
    );
    out.push(check("closed-loop-causal-order", order_ok, "risk < alert < plan < ack".into()));
    out
}

fn assert_cross_specialty(world: &World) -> Vec<AssertionResult> {
    let mut out = Vec::new();
    let order = world.first_version("medication_order.md");
    let conflict = world.first_version("conflict_alert.md");
    let reconciled = world.first_version("reconciled_plan.md");
    out.push(check("order-written", order.is_some(), "medication_order.md".into()));
    out.push(check("conflict-detected", conflict.is_some(), "conflict_alert.md".into()));
    out.push(check("plan-reconciled", reconciled.is_some(), "reconciled_plan.md".into()));
    let order_ok = matches!(
        (order, conflict, reconciled),
        (Some(o), Some(c), Some(r)) if o < c && c < r
    );
    out.push(check("causal-order-intact", order_ok, "order < conflict < reconciliation".into()));
    let conflict_names_both = world
        .store
        .read_page(&agents::subject_leaf(CURRENT_ADM, "conflict_alert.md"))
        .map(|p| p.body.contains("lisinopril") && p.body.contains("cisplatin"))
        .unwrap_or(false);
    out.push(check("conflict-names-both-drugs", conflict_names_both, "conflict_alert.md body".into()));
    out
}
