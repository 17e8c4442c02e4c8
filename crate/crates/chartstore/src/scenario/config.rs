//! Declarative scenario configuration: thresholds, scripted inputs, and
//! fault plans. Loadable from TOML; every field has a sensible default so a
//! bare `[thresholds]` table works.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScenarioError;

/// Threshold predicates the scripted agents reason with. These are
/// scenario-config values, not library constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Oxygen saturation (%) below which an emergency is escalated.
    pub spo2_floor: u32,
    /// Heart rate (bpm) above which an emergency is escalated.
    pub hr_ceiling: u32,
    /// Consecutive missed doses that trigger a non-adherence alert.
    pub adherence_misses: usize,
    /// Consecutive days of rising blood pressure that trigger a follow-up.
    pub bp_trend_days: usize,
    /// Acuity at or above which triage re-routes to a specialist.
    pub acuity_referral: u32,
    /// Longitudinal risk score above which a preventive alert is written.
    pub risk_threshold: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            spo2_floor: 90,
            hr_ceiling: 130,
            adherence_misses: 3,
            bp_trend_days: 5,
            acuity_referral: 3,
            risk_threshold: 0.5,
        }
    }
}

/// Injectable faults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultPlan {
    /// The patient agent crashes mid-lease; the lease must be reclaimed.
    CrashMidLease,
    /// The holder stalls past the ttl without heartbeating; its late write
    /// must be rejected.
    DelayedHeartbeat,
    /// One event batch is delivered twice; cursor dedup must keep the
    /// response singular.
    DuplicateDelivery,
}

impl FaultPlan {
    pub fn parse(s: &str) -> Option<FaultPlan> {
        match s {
            "crash_mid_lease" | "crash-mid-lease" => Some(FaultPlan::CrashMidLease),
            "delayed_heartbeat" | "delayed-heartbeat" => Some(FaultPlan::DelayedHeartbeat),
            "duplicate_delivery" | "duplicate-delivery" => Some(FaultPlan::DuplicateDelivery),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub thresholds: Thresholds,
    /// Lease ttl in (logical) seconds.
    pub ttl_seconds: u64,
    /// Milliseconds the logical clock advances per tick.
    pub tick_millis: u64,
    pub max_ticks: u64,
    pub fault: Option<FaultPlan>,
    /// Scripted oxygen-saturation readings, one per monitoring cycle.
    pub spo2_series: Vec<u32>,
    /// Scripted systolic blood pressures, one per day.
    pub bp_series: Vec<u32>,
    /// Scripted medication confirmations, one per day; false = missed dose.
    pub doses_taken: Vec<bool>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            thresholds: Thresholds::default(),
            ttl_seconds: 2,
            tick_millis: 1000,
            max_ticks: 40,
            fault: None,
            spo2_series: vec![97, 96, 95, 88],
            bp_series: vec![118, 120, 123, 126, 129, 133, 137],
            doses_taken: vec![true, true, false, false, false, true],
        }
    }
}

impl ScenarioConfig {
    pub fn with_fault(mut self, fault: FaultPlan) -> Self {
        self.fault = Some(fault);
        self
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ScenarioError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let cfg: ScenarioConfig = toml::from_str(
            "ttl_seconds = 5\n[thresholds]\nspo2_floor = 92\n",
        )
        .unwrap();
        assert_eq!(cfg.ttl_seconds, 5);
        assert_eq!(cfg.thresholds.spo2_floor, 92);
        assert_eq!(cfg.thresholds.adherence_misses, 3);
        assert!(!cfg.bp_series.is_empty());
    }

    #[test]
    fn fault_plan_parses() {
        assert_eq!(FaultPlan::parse("crash_mid_lease"), Some(FaultPlan::CrashMidLease));
        assert_eq!(FaultPlan::parse("duplicate-delivery"), Some(FaultPlan::DuplicateDelivery));
        assert_eq!(FaultPlan::parse("nonsense"), None);
    }
}
