//! The scripted agents behind the six workflow scenarios.
//!
//! Reasoning is rule-based threshold logic over read pages; every write
//! happens inside a held lease through a skill grant, and every cross-agent
//! interaction is a document the other side observes through the broker.

use regex::Regex;

use crate::coordination::Lease;
use crate::store::{MutationEvent, NodePath, WriterRole};

use super::config::{FaultPlan, ScenarioConfig};
use super::exec::{AgentCtx, AgentScript};
use super::skills::{self, Skill, SkillName};
use super::ScenarioError;

/// Subject patient shared by all scenarios.
pub const SUBJECT: &str = "S90000001";
pub const CURRENT_ADM: &str = "hadm_90000001";
pub const PRIOR_ADM: &str = "hadm_90000000";

/// Reserved namespace for shared coordination documents (queues, population
/// health). A system-owned "patient" keeps the tree shape uniform.
pub const COORD_PATIENT: &str = "S00000000";
pub const COORD_ADM: &str = "hadm_00000001";

pub fn subject_path() -> NodePath {
    NodePath::patient(SUBJECT).expect("static path")
}

pub fn coord_path() -> NodePath {
    NodePath::patient(COORD_PATIENT).expect("static path")
}

pub fn subject_leaf(admission: &str, doc: &str) -> NodePath {
    NodePath::leaf(SUBJECT, admission, doc).expect("static path")
}

pub fn coord_leaf(doc: &str) -> NodePath {
    NodePath::leaf(COORD_PATIENT, COORD_ADM, doc).expect("static path")
}

fn capture_u32(text: &str, pattern: &str) -> Option<u32> {
    let re = Regex::new(pattern).expect("static regex");
    re.captures(text)?.get(1)?.as_str().parse().ok()
}

fn capture_f64(text: &str, pattern: &str) -> Option<f64> {
    let re = Regex::new(pattern).expect("static regex");
    re.captures(text)?.get(1)?.as_str().parse().ok()
}

// ---------------------------------------------------------------- monitoring

/// Post-discharge patient agent: aggregates scripted vitals into a daily
/// summary page. Carries the crash and delayed-heartbeat fault hooks.
pub struct MonitoringPatient {
    pub day: usize,
    pub bp_series: Vec<u32>,
    pub fault: Option<FaultPlan>,
    stalled: Option<(Lease, u64)>,
}

impl MonitoringPatient {
    pub fn new(config: &ScenarioConfig) -> Self {
        MonitoringPatient {
            day: 0,
            bp_series: config.bp_series.clone(),
            fault: config.fault,
            stalled: None,
        }
    }
}

impl AgentScript for MonitoringPatient {
    fn id(&self) -> String {
        "patient-agent".into()
    }

    fn role(&self) -> WriterRole {
        WriterRole::Patient
    }

    fn subscriptions(&self) -> Vec<NodePath> {
        vec![subject_path()]
    }

    fn skills(&self) -> Vec<Skill> {
        vec![Skill::new(SkillName::MonitorVitals, subject_path())]
    }

    fn on_events(&mut self, _events: &[MutationEvent], _ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        Ok(())
    }

    fn on_tick(&mut self, ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        // Delayed-heartbeat fault: once the held lease has expired, attempt
        // the late write (it must be rejected), then let go.
        if let Some((lease, since_tick)) = self.stalled.take() {
            if ctx.tick > since_tick + 2 {
                ctx.skill_append(
                    &lease,
                    SkillName::MonitorVitals,
                    &subject_leaf(CURRENT_ADM, "vitals_summary.md"),
                    "Late vitals write after a stalled reasoning cycle.\n",
                    false,
                )?;
                ctx.release(lease)?;
            } else {
                self.stalled = Some((lease, since_tick));
            }
            return Ok(());
        }
        if self.day >= self.bp_series.len() {
            return Ok(());
        }
        let Some(lease) = ctx.try_lease(SUBJECT)? else {
            return Ok(());
        };
        let bp = self.bp_series[self.day];
        self.day += 1;
        ctx.skill_append(
            &lease,
            SkillName::MonitorVitals,
            &subject_leaf(CURRENT_ADM, "vitals_summary.md"),
            &skills::vitals_summary(self.day, bp, 72, 97),
            false,
        )?;
        match self.fault {
            Some(FaultPlan::CrashMidLease) if self.day == 2 => {
                // Crash mid-lease: never release; the executor stops
                // scheduling this agent and the lease is left to expire.
                ctx.simulate_crash();
                Ok(())
            }
            Some(FaultPlan::DelayedHeartbeat) if self.day == 2 => {
                self.stalled = Some((lease, ctx.tick));
                Ok(())
            }
            _ => ctx.release(lease),
        }
    }

    fn idle(&self) -> bool {
        self.day >= self.bp_series.len() && self.stalled.is_none()
    }
}

/// Clinician agent: assesses each vitals summary, writes progress notes,
/// and requests an in-person follow-up on a sustained blood-pressure rise.
pub struct MonitoringClinician {
    bp_window: Vec<u32>,
    trend_days: usize,
    pending_assessments: usize,
    follow_up_written: bool,
}

impl MonitoringClinician {
    pub fn new(config: &ScenarioConfig) -> Self {
        MonitoringClinician {
            bp_window: Vec::new(),
            trend_days: config.thresholds.bp_trend_days,
            pending_assessments: 0,
            follow_up_written: false,
        }
    }

    fn trend_detected(&self) -> bool {
        if self.bp_window.len() < self.trend_days + 1 {
            return false;
        }
        let tail = &self.bp_window[self.bp_window.len() - self.trend_days - 1..];
        tail.windows(2).all(|w| w[1] > w[0])
    }
}

impl AgentScript for MonitoringClinician {
    fn id(&self) -> String {
        "clinician-agent".into()
    }

    fn role(&self) -> WriterRole {
        WriterRole::Clinician
    }

    fn subscriptions(&self) -> Vec<NodePath> {
        vec![subject_path()]
    }

    fn skills(&self) -> Vec<Skill> {
        vec![Skill::new(SkillName::FollowUpRequest, subject_path())]
    }

    fn on_events(&mut self, events: &[MutationEvent], ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        for event in events {
            if ctx.wrote(event.version) || event.doc_id.doc_name() != Some("vitals_summary.md") {
                continue;
            }
            let page = ctx.read_page(&event.doc_id)?;
            if let Some(bp) = capture_u32(&page.body, r"blood pressure (\d+) mmHg") {
                self.bp_window.push(bp);
                self.pending_assessments += 1;
            }
        }
        Ok(())
    }

    fn on_tick(&mut self, ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        if self.pending_assessments == 0 {
            return Ok(());
        }
        let Some(lease) = ctx.try_lease(SUBJECT)? else {
            return Ok(());
        };
        let latest = *self.bp_window.last().expect("assessments imply readings");
        ctx.skill_append(
            &lease,
            SkillName::FollowUpRequest,
            &subject_leaf(CURRENT_ADM, "follow_up_note.md"),
            &format!(
                "Progress assessment: latest systolic blood pressure {latest} mmHg over \
                 {n} recorded days.\n",
                n = self.bp_window.len()
            ),
            false,
        )?;
        self.pending_assessments = 0;
        if self.trend_detected() && !self.follow_up_written {
            ctx.skill_append(
                &lease,
                SkillName::FollowUpRequest,
                &subject_leaf(CURRENT_ADM, "care_plan.md"),
                &skills::follow_up_request(
                    SUBJECT,
                    &format!("systolic pressure rose for {} consecutive days", self.trend_days),
                ),
                false,
            )?;
            self.follow_up_written = true;
        }
        ctx.release(lease)
    }

    fn idle(&self) -> bool {
        self.pending_assessments == 0
    }
}

/// Scheduling agent: books the in-person review when a follow-up request
/// lands in the care plan.
pub struct SchedulingAgent {
    booked: bool,
}

impl SchedulingAgent {
    pub fn new() -> Self {
        SchedulingAgent { booked: false }
    }
}

impl AgentScript for SchedulingAgent {
    fn id(&self) -> String {
        "scheduler-agent".into()
    }

    fn role(&self) -> WriterRole {
        WriterRole::System
    }

    fn subscriptions(&self) -> Vec<NodePath> {
        vec![subject_path()]
    }

    fn skills(&self) -> Vec<Skill> {
        vec![Skill::new(SkillName::FollowUpRequest, subject_path())]
    }

    fn on_events(&mut self, events: &[MutationEvent], ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        for event in events {
            if self.booked || event.doc_id.doc_name() != Some("care_plan.md") {
                continue;
            }
            let page = ctx.read_page(&event.doc_id)?;
            if !page.body.contains("Follow-up requested") {
                continue;
            }
            let Some(lease) = ctx.try_lease(SUBJECT)? else {
                return Ok(());
            };
            ctx.skill_append(
                &lease,
                SkillName::FollowUpRequest,
                &subject_leaf(CURRENT_ADM, "appointment.md"),
                &format!("In-person review booked for {SUBJECT} following the care plan request.\n"),
                false,
            )?;
            ctx.release(lease)?;
            self.booked = true;
        }
        Ok(())
    }

    fn on_tick(&mut self, _ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        Ok(())
    }
}

// -------------------------------------------------------------------- triage

pub struct TriageAgent {
    complaint: &'static str,
    acuity: u32,
    done: bool,
}

impl TriageAgent {
    pub fn new() -> Self {
        TriageAgent { complaint: "crushing chest pain radiating to the left arm", acuity: 4, done: false }
    }
}

impl AgentScript for TriageAgent {
    fn id(&self) -> String {
        "triage-agent".into()
    }

    fn role(&self) -> WriterRole {
        WriterRole::Triage
    }

    fn subscriptions(&self) -> Vec<NodePath> {
        vec![subject_path(), coord_path()]
    }

    fn skills(&self) -> Vec<Skill> {
        vec![
            Skill::new(SkillName::CollectPresentingSymptoms, subject_path()),
            Skill::new(SkillName::CollectPresentingSymptoms, coord_path()),
        ]
    }

    fn on_events(&mut self, _events: &[MutationEvent], _ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        Ok(())
    }

    fn on_tick(&mut self, ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        if self.done {
            return Ok(());
        }
        // Intake page for the new encounter.
        let Some(lease) = ctx.try_lease(SUBJECT)? else {
            return Ok(());
        };
        ctx.skill_append(
            &lease,
            SkillName::CollectPresentingSymptoms,
            &subject_leaf(CURRENT_ADM, "triage.md"),
            &skills::presenting_symptoms(self.complaint, self.acuity),
            false,
        )?;
        // Manifest-guided review of prior records, then the assessment.
        let prior = ctx.navigate(
            &format!(
                "Prior chronic conditions, medications ordered, and lab chemistry results \
                 for {SUBJECT} with diabetes mellitus"
            ),
            SUBJECT,
        )?;
        let history: Vec<String> = prior
            .pages
            .iter()
            .filter(|p| p.path.admission_id() == Some(PRIOR_ADM))
            .map(|p| crate::text::first_sentence(&p.content).to_string())
            .collect();
        ctx.skill_append(
            &lease,
            SkillName::CollectPresentingSymptoms,
            &subject_leaf(CURRENT_ADM, "triage_assessment.md"),
            &skills::triage_assessment(SUBJECT, self.complaint, self.acuity, &history.join(" ")),
            false,
        )?;
        ctx.release(lease)?;

        // Publish to the shared triage queue.
        let Some(lease) = ctx.try_lease(COORD_PATIENT)? else {
            return Ok(());
        };
        ctx.skill_append(
            &lease,
            SkillName::CollectPresentingSymptoms,
            &coord_leaf("triage_queue.md"),
            &format!(
                "Triage queue entry for {SUBJECT}: {complaint}, acuity {acuity}.\n",
                complaint = self.complaint,
                acuity = self.acuity
            ),
            false,
        )?;
        ctx.release(lease)?;
        self.done = true;
        Ok(())
    }

    fn idle(&self) -> bool {
        self.done
    }
}

pub struct TriageClinician {
    acuity_referral: u32,
    handled: bool,
}

impl TriageClinician {
    pub fn new(config: &ScenarioConfig) -> Self {
        TriageClinician { acuity_referral: config.thresholds.acuity_referral, handled: false }
    }
}

impl AgentScript for TriageClinician {
    fn id(&self) -> String {
        "triage-clinician".into()
    }

    fn role(&self) -> WriterRole {
        WriterRole::Clinician
    }

    fn subscriptions(&self) -> Vec<NodePath> {
        vec![coord_path()]
    }

    fn skills(&self) -> Vec<Skill> {
        vec![Skill::new(SkillName::FollowUpRequest, coord_path())]
    }

    fn on_events(&mut self, events: &[MutationEvent], ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        for event in events {
            if self.handled
                || ctx.wrote(event.version)
                || event.doc_id.doc_name() != Some("triage_queue.md")
            {
                continue;
            }
            let page = ctx.read_page(&event.doc_id)?;
            if !page.body.starts_with("Triage queue entry") {
                continue;
            }
            let acuity = capture_u32(&page.body, r"acuity (\d+)").unwrap_or(1);
            let Some(lease) = ctx.try_lease(COORD_PATIENT)? else {
                return Ok(());
            };
            let body = if acuity >= self.acuity_referral {
                format!("Referral to specialist-agent for {SUBJECT}: acuity {acuity} case re-routed.\n")
            } else {
                format!("Accepted for {SUBJECT}: acuity {acuity} case taken by the on-duty clinician.\n")
            };
            ctx.skill_append(&lease, SkillName::FollowUpRequest, &coord_leaf("triage_queue.md"), &body, false)?;
            ctx.release(lease)?;
            self.handled = true;
        }
        Ok(())
    }

    fn on_tick(&mut self, _ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        Ok(())
    }
}

pub struct TriageSpecialist {
    responded: bool,
}

impl TriageSpecialist {
    pub fn new() -> Self {
        TriageSpecialist { responded: false }
    }
}

impl AgentScript for TriageSpecialist {
    fn id(&self) -> String {
        "specialist-agent".into()
    }

    fn role(&self) -> WriterRole {
        WriterRole::Specialist
    }

    fn subscriptions(&self) -> Vec<NodePath> {
        vec![coord_path(), subject_path()]
    }

    fn skills(&self) -> Vec<Skill> {
        vec![Skill::new(SkillName::FollowUpRequest, subject_path())]
    }

    fn on_events(&mut self, events: &[MutationEvent], ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        for event in events {
            if self.responded || event.doc_id.doc_name() != Some("triage_queue.md") {
                continue;
            }
            let page = ctx.read_page(&event.doc_id)?;
            if !page.body.contains("Referral to specialist-agent") {
                continue;
            }
            let Some(lease) = ctx.try_lease(SUBJECT)? else {
                return Ok(());
            };
            ctx.skill_append(
                &lease,
                SkillName::FollowUpRequest,
                &subject_leaf(CURRENT_ADM, "specialist_note.md"),
                &format!("Specialist consultation note for {SUBJECT}: accepted re-routed triage case.\n"),
                false,
            )?;
            ctx.release(lease)?;
            self.responded = true;
        }
        Ok(())
    }

    fn on_tick(&mut self, _ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        Ok(())
    }
}

// ---------------------------------------------------------------- escalation

pub struct EscalationPatient {
    idx: usize,
    spo2_series: Vec<u32>,
    floor: u32,
    escalated: bool,
}

impl EscalationPatient {
    pub fn new(config: &ScenarioConfig) -> Self {
        EscalationPatient {
            idx: 0,
            spo2_series: config.spo2_series.clone(),
            floor: config.thresholds.spo2_floor,
            escalated: false,
        }
    }
}

impl AgentScript for EscalationPatient {
    fn id(&self) -> String {
        "patient-agent".into()
    }

    fn role(&self) -> WriterRole {
        WriterRole::Patient
    }

    fn subscriptions(&self) -> Vec<NodePath> {
        vec![subject_path()]
    }

    fn skills(&self) -> Vec<Skill> {
        vec![
            Skill::new(SkillName::MonitorVitals, subject_path()),
            Skill::new(SkillName::EscalateEmergency, subject_path()),
            Skill::new(SkillName::EscalateEmergency, coord_path()),
        ]
    }

    fn on_events(&mut self, _events: &[MutationEvent], _ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        Ok(())
    }

    fn on_tick(&mut self, ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        if self.idx >= self.spo2_series.len() {
            return Ok(());
        }
        let spo2 = self.spo2_series[self.idx];
        self.idx += 1;
        let Some(lease) = ctx.try_lease(SUBJECT)? else {
            self.idx -= 1;
            return Ok(());
        };
        ctx.skill_append(
            &lease,
            SkillName::MonitorVitals,
            &subject_leaf(CURRENT_ADM, "vitals_summary.md"),
            &skills::vitals_summary(self.idx, 120, 88, spo2),
            false,
        )?;
        if spo2 < self.floor && !self.escalated {
            // Immediate escalation, not deferred to the next cycle: a
            // priority alert in the patient record plus a priority entry in
            // the shared emergency queue.
            ctx.skill_append(
                &lease,
                SkillName::EscalateEmergency,
                &subject_leaf(CURRENT_ADM, "escalation_alert.md"),
                &skills::escalation_entry(SUBJECT, "oxygen saturation", spo2, self.floor),
                true,
            )?;
            ctx.release(lease)?;
            let Some(coord_lease) = ctx.try_lease(COORD_PATIENT)? else {
                return Ok(());
            };
            ctx.skill_append(
                &coord_lease,
                SkillName::EscalateEmergency,
                &coord_leaf("emergency_queue.md"),
                &skills::escalation_entry(SUBJECT, "oxygen saturation", spo2, self.floor),
                true,
            )?;
            ctx.release(coord_lease)?;
            self.escalated = true;
            return Ok(());
        }
        ctx.release(lease)
    }

    fn idle(&self) -> bool {
        self.idx >= self.spo2_series.len()
    }
}

pub struct EscalationClinician {
    pub responses: usize,
}

impl EscalationClinician {
    pub fn new() -> Self {
        EscalationClinician { responses: 0 }
    }
}

impl AgentScript for EscalationClinician {
    fn id(&self) -> String {
        "clinician-agent".into()
    }

    fn role(&self) -> WriterRole {
        WriterRole::Clinician
    }

    fn subscriptions(&self) -> Vec<NodePath> {
        vec![subject_path(), coord_path()]
    }

    fn skills(&self) -> Vec<Skill> {
        vec![
            Skill::new(SkillName::FollowUpRequest, subject_path()),
            Skill::new(SkillName::NotifyCode, coord_path()),
        ]
    }

    fn on_events(&mut self, events: &[MutationEvent], ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        for event in events {
            if !event.priority
                || ctx.wrote(event.version)
                || event.doc_id.doc_name() != Some("escalation_alert.md")
            {
                continue;
            }
            // Interrupt the cycle: read the most recent vitals via manifest
            // navigation, document a response, then notify the code chain.
            let _context = ctx.navigate(
                &format!("latest vitals summary oxygen saturation for {SUBJECT}"),
                SUBJECT,
            )?;
            let Some(lease) = ctx.try_lease(SUBJECT)? else {
                return Ok(());
            };
            ctx.skill_append(
                &lease,
                SkillName::FollowUpRequest,
                &subject_leaf(CURRENT_ADM, "response_plan.md"),
                &format!("Initial response plan for {SUBJECT}: supplemental oxygen and immediate review.\n"),
                false,
            )?;
            ctx.release(lease)?;
            let Some(coord_lease) = ctx.try_lease(COORD_PATIENT)? else {
                return Ok(());
            };
            ctx.skill_append(
                &coord_lease,
                SkillName::NotifyCode,
                &coord_leaf("emergency_queue.md"),
                &skills::code_notification(SUBJECT, "rapid response"),
                false,
            )?;
            ctx.release(coord_lease)?;
            self.responses += 1;
        }
        Ok(())
    }

    fn on_tick(&mut self, _ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        Ok(())
    }
}

// ----------------------------------------------------------------- adherence

pub struct AdherencePatient {
    day: usize,
    doses: Vec<bool>,
    misses_in_row: usize,
    threshold: usize,
    pub alerted: bool,
    pub care_plan_updates: usize,
}

impl AdherencePatient {
    pub fn new(config: &ScenarioConfig) -> Self {
        AdherencePatient {
            day: 0,
            doses: config.doses_taken.clone(),
            misses_in_row: 0,
            threshold: config.thresholds.adherence_misses,
            alerted: false,
            care_plan_updates: 0,
        }
    }
}

impl AgentScript for AdherencePatient {
    fn id(&self) -> String {
        "patient-agent".into()
    }

    fn role(&self) -> WriterRole {
        WriterRole::Patient
    }

    fn subscriptions(&self) -> Vec<NodePath> {
        vec![subject_path()]
    }

    fn skills(&self) -> Vec<Skill> {
        vec![Skill::new(SkillName::CheckMedicationAdherence, subject_path())]
    }

    fn on_events(&mut self, events: &[MutationEvent], _ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        for event in events {
            if event.doc_id.doc_name() == Some("care_plan.md") && event.writer_role == WriterRole::Clinician {
                self.care_plan_updates += 1;
            }
        }
        Ok(())
    }

    fn on_tick(&mut self, ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        if self.day >= self.doses.len() {
            return Ok(());
        }
        let taken = self.doses[self.day];
        self.day += 1;
        if taken {
            self.misses_in_row = 0;
            return Ok(());
        }
        self.misses_in_row += 1;
        let Some(lease) = ctx.try_lease(SUBJECT)? else {
            self.day -= 1;
            self.misses_in_row -= 1;
            return Ok(());
        };
        ctx.skill_append(
            &lease,
            SkillName::CheckMedicationAdherence,
            &subject_leaf(CURRENT_ADM, "medication_log.md"),
            &skills::adherence_flag(self.day, self.misses_in_row),
            false,
        )?;
        if self.misses_in_row >= self.threshold && !self.alerted {
            ctx.skill_append(
                &lease,
                SkillName::CheckMedicationAdherence,
                &subject_leaf(CURRENT_ADM, "non_adherence_alert.md"),
                &skills::non_adherence_alert(self.misses_in_row, self.threshold),
                false,
            )?;
            self.alerted = true;
        }
        ctx.release(lease)
    }

    fn idle(&self) -> bool {
        self.day >= self.doses.len()
    }
}

pub struct AdherenceClinician {
    adjusted: bool,
}

impl AdherenceClinician {
    pub fn new() -> Self {
        AdherenceClinician { adjusted: false }
    }
}

impl AgentScript for AdherenceClinician {
    fn id(&self) -> String {
        "clinician-agent".into()
    }

    fn role(&self) -> WriterRole {
        WriterRole::Clinician
    }

    fn subscriptions(&self) -> Vec<NodePath> {
        vec![subject_path()]
    }

    fn skills(&self) -> Vec<Skill> {
        vec![Skill::new(SkillName::FollowUpRequest, subject_path())]
    }

    fn on_events(&mut self, events: &[MutationEvent], ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        for event in events {
            if self.adjusted || event.doc_id.doc_name() != Some("non_adherence_alert.md") {
                continue;
            }
            // Review the medication history via manifest navigation before
            // adjusting anything.
            let _history = ctx.navigate(
                &format!("medication log missed doses adherence for {SUBJECT}"),
                SUBJECT,
            )?;
            let Some(lease) = ctx.try_lease(SUBJECT)? else {
                return Ok(());
            };
            ctx.skill_append(
                &lease,
                SkillName::FollowUpRequest,
                &subject_leaf(CURRENT_ADM, "care_plan.md"),
                &format!(
                    "Dosing schedule adjusted for {SUBJECT} after non-adherence review; \
                     patient education session scheduled.\n"
                ),
                false,
            )?;
            ctx.release(lease)?;
            self.adjusted = true;
        }
        Ok(())
    }

    fn on_tick(&mut self, _ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        Ok(())
    }
}

// -------------------------------------------------------------- longitudinal

pub struct LongitudinalClinician {
    risk_threshold: f64,
    assessed: bool,
}

impl LongitudinalClinician {
    pub fn new(config: &ScenarioConfig) -> Self {
        LongitudinalClinician { risk_threshold: config.thresholds.risk_threshold, assessed: false }
    }
}

impl AgentScript for LongitudinalClinician {
    fn id(&self) -> String {
        "clinician-agent".into()
    }

    fn role(&self) -> WriterRole {
        WriterRole::Clinician
    }

    fn subscriptions(&self) -> Vec<NodePath> {
        vec![subject_path(), coord_path()]
    }

    fn skills(&self) -> Vec<Skill> {
        vec![
            Skill::new(SkillName::AnalyzeLongitudinalTrend, subject_path()),
            Skill::new(SkillName::AnalyzeLongitudinalTrend, coord_path()),
        ]
    }

    fn on_events(&mut self, _events: &[MutationEvent], _ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        Ok(())
    }

    fn on_tick(&mut self, ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        if self.assessed {
            return Ok(());
        }
        // Broad retrieval across every prior care episode.
        let retrieved = ctx.navigate(
            &format!("chronic kidney disease creatinine chemistry lab trend for {SUBJECT}"),
            SUBJECT,
        )?;
        let mut series: Vec<(String, f64)> = retrieved
            .pages
            .iter()
            .filter_map(|p| {
                let page = p.page.as_ref()?;
                let date = page.provenance.chart_time.clone()?;
                let peak = capture_f64(&page.body, r"[Cc]reatinine peaked at ([0-9.]+)")?;
                Some((date, peak))
            })
            .collect();
        series.sort_by(|a, b| a.0.cmp(&b.0));
        if series.len() < 2 {
            return Ok(());
        }
        let rises = series.windows(2).filter(|w| w[1].1 > w[0].1).count();
        let risk = rises as f64 / (series.len() - 1) as f64;

        let Some(lease) = ctx.try_lease(SUBJECT)? else {
            return Ok(());
        };
        ctx.skill_append(
            &lease,
            SkillName::AnalyzeLongitudinalTrend,
            &subject_leaf(CURRENT_ADM, "risk_assessment.md"),
            &skills::risk_assessment(
                SUBJECT,
                &format!("creatinine rose across {} of {} admission intervals", rises, series.len() - 1),
                risk,
            ),
            false,
        )?;
        ctx.release(lease)?;

        if risk > self.risk_threshold {
            let Some(lease) = ctx.try_lease(COORD_PATIENT)? else {
                return Ok(());
            };
            ctx.skill_append(
                &lease,
                SkillName::AnalyzeLongitudinalTrend,
                &coord_leaf("population_health.md"),
                &format!(
                    "Preventive alert for {SUBJECT}: longitudinal renal decline, risk score {risk:.2}.\n"
                ),
                false,
            )?;
            ctx.release(lease)?;
        }
        self.assessed = true;
        Ok(())
    }

    fn idle(&self) -> bool {
        self.assessed
    }
}

pub struct CareManager {
    planned: bool,
}

impl CareManager {
    pub fn new() -> Self {
        CareManager { planned: false }
    }
}

impl AgentScript for CareManager {
    fn id(&self) -> String {
        "care-manager-agent".into()
    }

    fn role(&self) -> WriterRole {
        WriterRole::Clinician
    }

    fn subscriptions(&self) -> Vec<NodePath> {
        vec![coord_path()]
    }

    fn skills(&self) -> Vec<Skill> {
        vec![Skill::new(SkillName::FollowUpRequest, subject_path())]
    }

    fn on_events(&mut self, events: &[MutationEvent], ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        for event in events {
            if self.planned || event.doc_id.doc_name() != Some("population_health.md") {
                continue;
            }
            let page = ctx.read_page(&event.doc_id)?;
            if !page.body.starts_with("Preventive alert") {
                continue;
            }
            let Some(lease) = ctx.try_lease(SUBJECT)? else {
                return Ok(());
            };
            ctx.skill_append(
                &lease,
                SkillName::FollowUpRequest,
                &subject_leaf(CURRENT_ADM, "care_plan.md"),
                &format!(
                    "Recommended intervention for {SUBJECT}: nephrology referral and a structured \
                     self-management programme.\n"
                ),
                false,
            )?;
            ctx.release(lease)?;
            self.planned = true;
        }
        Ok(())
    }

    fn on_tick(&mut self, _ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        Ok(())
    }
}

pub struct LongitudinalPatient {
    acked: bool,
}

impl LongitudinalPatient {
    pub fn new() -> Self {
        LongitudinalPatient { acked: false }
    }
}

impl AgentScript for LongitudinalPatient {
    fn id(&self) -> String {
        "patient-agent".into()
    }

    fn role(&self) -> WriterRole {
        WriterRole::Patient
    }

    fn subscriptions(&self) -> Vec<NodePath> {
        vec![subject_path()]
    }

    fn skills(&self) -> Vec<Skill> {
        vec![Skill::new(SkillName::MonitorVitals, subject_path())]
    }

    fn on_events(&mut self, events: &[MutationEvent], ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        for event in events {
            if self.acked
                || event.doc_id.doc_name() != Some("care_plan.md")
                || event.writer_role != WriterRole::Clinician
            {
                continue;
            }
            let Some(lease) = ctx.try_lease(SUBJECT)? else {
                return Ok(());
            };
            ctx.skill_append(
                &lease,
                SkillName::MonitorVitals,
                &subject_leaf(CURRENT_ADM, "monitoring_plan.md"),
                &format!("Monitoring focus increased for renal indicators of {SUBJECT}.\n"),
                false,
            )?;
            ctx.release(lease)?;
            self.acked = true;
        }
        Ok(())
    }

    fn on_tick(&mut self, _ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        Ok(())
    }
}

// ----------------------------------------------------------- cross-specialty

pub struct CardiologyAgent {
    ordered: bool,
}

impl CardiologyAgent {
    pub fn new() -> Self {
        CardiologyAgent { ordered: false }
    }
}

impl AgentScript for CardiologyAgent {
    fn id(&self) -> String {
        "cardiology-agent".into()
    }

    fn role(&self) -> WriterRole {
        WriterRole::Specialist
    }

    fn subscriptions(&self) -> Vec<NodePath> {
        vec![subject_path()]
    }

    fn skills(&self) -> Vec<Skill> {
        vec![Skill::new(SkillName::FollowUpRequest, subject_path())]
    }

    fn on_events(&mut self, _events: &[MutationEvent], _ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        Ok(())
    }

    fn on_tick(&mut self, ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        if self.ordered {
            return Ok(());
        }
        let Some(lease) = ctx.try_lease(SUBJECT)? else {
            return Ok(());
        };
        ctx.skill_append(
            &lease,
            SkillName::FollowUpRequest,
            &subject_leaf(CURRENT_ADM, "medication_order.md"),
            &format!(
                "Medication order: lisinopril 10 mg once daily for {SUBJECT} to control blood pressure.\n"
            ),
            false,
        )?;
        ctx.skill_append(
            &lease,
            SkillName::FollowUpRequest,
            &subject_leaf(CURRENT_ADM, "care_plan.md"),
            &format!("Care plan update: antihypertensive regimen changed, lisinopril started for {SUBJECT}.\n"),
            false,
        )?;
        ctx.release(lease)?;
        self.ordered = true;
        Ok(())
    }

    fn idle(&self) -> bool {
        self.ordered
    }
}

pub struct OncologyAgent {
    /// Scripted contraindicated pairs (ordered drug, protocol drug).
    contraindications: Vec<(String, String)>,
    conflict_written: bool,
}

impl OncologyAgent {
    pub fn new() -> Self {
        OncologyAgent {
            contraindications: vec![("lisinopril".into(), "cisplatin".into())],
            conflict_written: false,
        }
    }
}

impl AgentScript for OncologyAgent {
    fn id(&self) -> String {
        "oncology-agent".into()
    }

    fn role(&self) -> WriterRole {
        WriterRole::Specialist
    }

    fn subscriptions(&self) -> Vec<NodePath> {
        vec![subject_path()]
    }

    fn skills(&self) -> Vec<Skill> {
        vec![Skill::new(SkillName::FollowUpRequest, subject_path())]
    }

    fn on_events(&mut self, events: &[MutationEvent], ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        for event in events {
            if self.conflict_written
                || ctx.wrote(event.version)
                || event.doc_id.doc_name() != Some("medication_order.md")
            {
                continue;
            }
            let order = ctx.read_page(&event.doc_id)?;
            let ordered_drug = order
                .body
                .split_whitespace()
                .skip_while(|w| *w != "order:")
                .nth(1)
                .unwrap_or("")
                .to_lowercase();
            // Check the new order against the current chemotherapy protocol,
            // retrieved through this agent's own manifest navigation.
            let protocol = ctx.navigate(
                &format!("current chemotherapy protocol oncology note for {SUBJECT}"),
                SUBJECT,
            )?;
            let protocol_text: String = protocol.pages.iter().map(|p| p.content.clone()).collect();
            let conflict = self.contraindications.iter().find(|(drug, proto)| {
                ordered_drug == *drug && protocol_text.to_lowercase().contains(proto.as_str())
            });
            if let Some((drug, proto)) = conflict {
                let Some(lease) = ctx.try_lease(SUBJECT)? else {
                    return Ok(());
                };
                ctx.skill_append(
                    &lease,
                    SkillName::FollowUpRequest,
                    &subject_leaf(CURRENT_ADM, "conflict_alert.md"),
                    &format!(
                        "Conflict alert for {SUBJECT}: newly ordered {drug} is contraindicated with \
                         the current {proto} chemotherapy protocol; nephrotoxicity risk.\n"
                    ),
                    false,
                )?;
                ctx.release(lease)?;
                self.conflict_written = true;
            }
        }
        Ok(())
    }

    fn on_tick(&mut self, _ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        Ok(())
    }
}

pub struct CoordinatorAgent {
    reconciled: bool,
}

impl CoordinatorAgent {
    pub fn new() -> Self {
        CoordinatorAgent { reconciled: false }
    }
}

impl AgentScript for CoordinatorAgent {
    fn id(&self) -> String {
        "coordinator-agent".into()
    }

    fn role(&self) -> WriterRole {
        WriterRole::Clinician
    }

    fn subscriptions(&self) -> Vec<NodePath> {
        vec![subject_path()]
    }

    fn skills(&self) -> Vec<Skill> {
        vec![Skill::new(SkillName::FollowUpRequest, subject_path())]
    }

    fn on_events(&mut self, events: &[MutationEvent], ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        for event in events {
            if self.reconciled
                || ctx.wrote(event.version)
                || event.doc_id.doc_name() != Some("conflict_alert.md")
            {
                continue;
            }
            let conflict = ctx.read_page(&event.doc_id)?;
            let Some(lease) = ctx.try_lease(SUBJECT)? else {
                return Ok(());
            };
            ctx.skill_append(
                &lease,
                SkillName::FollowUpRequest,
                &subject_leaf(CURRENT_ADM, "reconciled_plan.md"),
                &format!(
                    "Reconciled care plan for {SUBJECT}: hold lisinopril, substitute amlodipine, \
                     re-evaluate after chemotherapy completion. Supersedes the conflicting order \
                     and the conflict alert ({}).\n",
                    crate::text::first_sentence(&conflict.body)
                ),
                false,
            )?;
            ctx.release(lease)?;
            self.reconciled = true;
        }
        Ok(())
    }

    fn on_tick(&mut self, _ctx: &mut AgentCtx) -> Result<(), ScenarioError> {
        Ok(())
    }
}
