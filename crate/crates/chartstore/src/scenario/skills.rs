//! The curated skill library: statically defined workflow modules whose
//! only effect is appending pages within a declared path scope.

use serde::{Deserialize, Serialize};

use crate::store::NodePath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SkillName {
    MonitorVitals,
    CheckMedicationAdherence,
    EscalateEmergency,
    CollectPresentingSymptoms,
    AnalyzeLongitudinalTrend,
    NotifyCode,
    FollowUpRequest,
}

/// A skill grant: the named module may append pages under `write_scope`
/// and nowhere else.
#[derive(Debug, Clone)]
pub struct Skill {
    pub name: SkillName,
    pub write_scope: NodePath,
}

impl Skill {
    pub fn new(name: SkillName, write_scope: NodePath) -> Self {
        Skill { name, write_scope }
    }
}

// Output page templates. Bodies are plain prose so manifest scopes and
// retrieval have normal text to work with.

pub fn vitals_summary(day: usize, bp: u32, hr: u32, spo2: u32) -> String {
    format!(
        "Daily vitals summary for day {day}: systolic blood pressure {bp} mmHg, \
         heart rate {hr} bpm, oxygen saturation {spo2} percent.\n\n\
         Aggregated from wearable sensor readings and patient reported symptoms.\n"
    )
}

pub fn adherence_flag(day: usize, consecutive_missed: usize) -> String {
    format!(
        "Missed dose recorded on day {day}; {consecutive_missed} consecutive doses missed.\n\n\
         Scheduled medication events compared against confirmed administrations.\n"
    )
}

pub fn non_adherence_alert(consecutive_missed: usize, threshold: usize) -> String {
    format!(
        "Non-adherence alert: {consecutive_missed} consecutive missed doses reached the \
         configured threshold of {threshold}.\n\nClinician review requested.\n"
    )
}

pub fn escalation_entry(patient: &str, metric: &str, value: u32, bound: u32) -> String {
    format!(
        "Emergency escalation for {patient}: {metric} {value} breached the safe bound {bound}.\n\n\
         Immediate clinician attention requested; monitoring continues.\n"
    )
}

pub fn code_notification(patient: &str, protocol: &str) -> String {
    format!(
        "Code notification issued for {patient}: {protocol} protocol activated.\n\n\
         Hospital alert chain invoked by the responding clinician.\n"
    )
}

pub fn presenting_symptoms(complaint: &str, acuity: u32) -> String {
    format!(
        "Presenting complaint: {complaint}. Preliminary acuity {acuity}.\n\n\
         Structured intake collected at registration.\n"
    )
}

pub fn triage_assessment(patient: &str, complaint: &str, acuity: u32, history: &str) -> String {
    format!(
        "Triage assessment for {patient}: {complaint}, acuity {acuity}.\n\n\
         Relevant history: {history}.\n"
    )
}

pub fn follow_up_request(patient: &str, reason: &str) -> String {
    format!(
        "Follow-up requested for {patient}: {reason}.\n\nIn-person review should be booked.\n"
    )
}

pub fn risk_assessment(patient: &str, indicator: &str, score: f64) -> String {
    format!(
        "Longitudinal risk assessment for {patient}: {indicator}. Computed risk score {score:.2}.\n\n\
         Derived from manifest-guided review of prior admissions.\n"
    )
}
