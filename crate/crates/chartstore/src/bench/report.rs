//! Benchmark report: machine-readable JSON plus an aligned text table.

use serde::{Deserialize, Serialize};

use super::metrics::{Metrics, SystemReport};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemSummary {
    pub system: String,
    pub overall: Metrics,
    pub tier1: Metrics,
    pub tier2: Metrics,
    pub tier3: Metrics,
    pub failed_queries: usize,
}

impl From<&SystemReport> for SystemSummary {
    fn from(r: &SystemReport) -> Self {
        let tier = |t: u8| r.tiers.get(&t).cloned().unwrap_or_default();
        SystemSummary {
            system: r.system.clone(),
            overall: r.overall.clone(),
            tier1: tier(1),
            tier2: tier(2),
            tier3: tier(3),
            failed_queries: r.failed_queries,
        }
    }
}

/// Full benchmark run result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub k: usize,
    pub patients: usize,
    pub queries: usize,
    pub systems: Vec<SystemSummary>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text table, one block per scope (overall, tiers 1-3).
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "seed {}  k {}  patients {}  queries {}\n\n",
            self.seed, self.k, self.patients, self.queries
        ));
        let scopes: [(&str, fn(&SystemSummary) -> &Metrics); 4] = [
            ("Overall", |s| &s.overall),
            ("Tier 1", |s| &s.tier1),
            ("Tier 2", |s| &s.tier2),
            ("Tier 3", |s| &s.tier3),
        ];
        for (label, pick) in scopes {
            out.push_str(&format!("{label}\n"));
            out.push_str(&format!(
                "  {:<14} {:>9} {:>9} {:>15} {:>15}\n",
                "System", "Precision", "Recall", "Perfect Recall", "Docs Retrieved"
            ));
            for s in &self.systems {
                let m = pick(s);
                out.push_str(&format!(
                    "  {:<14} {:>9.3} {:>9.3} {:>15} {:>15.1}\n",
                    s.system,
                    m.precision,
                    m.recall,
                    format!("{}/{}", m.perfect_recall_count, m.queries),
                    m.mean_docs_retrieved,
                ));
            }
            out.push('\n');
        }
        out
    }
}
