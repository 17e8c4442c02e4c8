//! Synthetic longitudinal-record corpus generator.
//!
//! Produces the standard on-disk layout (patient / admission / six document
//! categories) with template clinical content and a registry of planted
//! facts, each recording its exact gold leaf paths. Every fact is the
//! answer to one benchmark query; entity vocabulary (analytes, medications,
//! complaints) deliberately repeats across admissions so that flat dense
//! retrieval faces the same cross-episode disambiguation problem real
//! records pose, while manifests disambiguate structurally.
//!
//! Generation is a pure function of the spec: a fixed seed yields a
//! byte-identical tree.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::{rebuild_all, DeterministicDescriber};
use crate::store::{
    logical_clock, DocStore, DocType, NodePath, ProvenanceHeader, StoreError, WriteAccess,
    WriterRole,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Manifest(#[from] crate::manifest::ManifestError),
    #[error("registry io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("registry serialization failure: {0}")]
    Json(#[from] serde_json::Error),
}

/// Probabilities for the optional document types.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocMix {
    pub hematology: f64,
    pub blood_gas: f64,
    pub radiology: f64,
    pub second_radiology: f64,
    /// Chance a discharge summary gets a superseding revision.
    pub discharge_revision: f64,
}

impl Default for DocMix {
    fn default() -> Self {
        DocMix {
            hematology: 0.6,
            blood_gas: 0.35,
            radiology: 0.6,
            second_radiology: 0.3,
            discharge_revision: 0.15,
        }
    }
}

/// Generator parameters. Generation is deterministic in all fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    pub n_patients: usize,
    /// Sampling weights for the admission-count brackets 3–5 / 6–9 / ≥10.
    pub bracket_weights: [f64; 3],
    pub doc_mix: DocMix,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            seed: 42,
            n_patients: 100,
            bracket_weights: [0.4, 0.35, 0.25],
            doc_mix: DocMix::default(),
        }
    }
}

impl CorpusSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_patients(mut self, n: usize) -> Self {
        self.n_patients = n;
        self
    }
}

/// A planted fact: one benchmark query's answer location.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedFact {
    pub id: String,
    pub patient: String,
    pub tier: u8,
    pub gold: Vec<NodePath>,
    pub query_text: String,
}

/// Registry of planted facts for one generated corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactRegistry {
    pub seed: u64,
    pub facts: Vec<PlantedFact>,
}

impl FactRegistry {
    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn facts_for_tier(&self, tier: u8) -> impl Iterator<Item = &PlantedFact> {
        self.facts.iter().filter(move |f| f.tier == tier)
    }
}

const CONDITIONS: &[(&str, &str)] = &[
    ("congestive heart failure with volume overload", "heart failure"),
    ("chronic kidney disease stage three", "kidney disease"),
    ("community acquired pneumonia", "pneumonia"),
    ("atrial fibrillation with rapid ventricular response", "atrial fibrillation"),
    ("type two diabetes mellitus with hyperglycemia", "diabetes"),
    ("acute pancreatitis of biliary origin", "pancreatitis"),
    ("pulmonary embolism of the right lower lobe", "pulmonary embolism"),
    ("cellulitis of the left lower extremity", "cellulitis"),
    ("upper gastrointestinal bleeding from gastric ulcer", "gastrointestinal bleeding"),
    ("exacerbation of obstructive lung syndrome", "obstructive lung"),
];

const SECONDARY_DX: &[&str] = &[
    "essential hypertension",
    "hyperlipidemia",
    "anemia of inflammation",
    "hypothyroidism",
    "osteoarthritis of the knee",
    "gastroesophageal reflux",
    "chronic insomnia",
    "vitamin d deficiency",
];

const COMPLAINTS: &[&str] = &[
    "chest pain",
    "shortness of breath",
    "abdominal pain",
    "fever and chills",
    "dizziness",
    "generalized weakness",
    "productive cough",
    "leg swelling",
];

const MEDICATIONS: &[&str] = &[
    "metoprolol",
    "lisinopril",
    "furosemide",
    "insulin glargine",
    "warfarin",
    "apixaban",
    "vancomycin",
    "ceftriaxone",
    "prednisone",
    "amiodarone",
    "heparin",
    "pantoprazole",
];

const FREQUENCIES: &[&str] = &["once daily", "twice daily", "every eight hours", "at bedtime", "as needed"];

const FINDINGS: &[&str] = &[
    "bilateral pleural effusions",
    "right lower lobe consolidation",
    "no acute intracranial abnormality",
    "small bowel obstruction pattern",
    "degenerative changes of the lumbar spine",
    "clear lungs without focal consolidation",
    "mild cardiomegaly with vascular congestion",
    "trace free fluid in the pelvis",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LabCategory {
    Chemistry,
    Hematology,
    BloodGas,
}

impl LabCategory {
    fn id(self) -> &'static str {
        match self {
            LabCategory::Chemistry => "chemistry",
            LabCategory::Hematology => "hematology",
            LabCategory::BloodGas => "blood_gas",
        }
    }

    fn label(self) -> &'static str {
        match self {
            LabCategory::Chemistry => "chemistry",
            LabCategory::Hematology => "hematology",
            LabCategory::BloodGas => "blood gas",
        }
    }

    fn analytes(self) -> &'static [(&'static str, f64, f64, &'static str)] {
        match self {
            LabCategory::Chemistry => &[
                ("creatinine", 0.8, 4.5, "mg/dL"),
                ("sodium", 128.0, 148.0, "mEq/L"),
                ("potassium", 3.0, 5.8, "mEq/L"),
                ("glucose", 70.0, 320.0, "mg/dL"),
            ],
            LabCategory::Hematology => &[
                ("hemoglobin", 7.5, 16.5, "g/dL"),
                ("platelet count", 90.0, 450.0, "K/uL"),
                ("leukocyte count", 3.5, 18.0, "K/uL"),
            ],
            LabCategory::BloodGas => &[
                ("lactate", 0.6, 5.5, "mmol/L"),
                ("ph", 7.22, 7.48, ""),
                ("pco2", 30.0, 55.0, "mmHg"),
            ],
        }
    }
}

/// Synthetic calendar: 12 months of 28 days keeps arithmetic trivial while
/// dates stay plausible and lexicographically ordered.
fn render_date(day_number: u32) -> String {
    let year = 2110 + day_number / 336;
    let month = (day_number % 336) / 28 + 1;
    let day = (day_number % 28) + 1;
    format!("{year}-{month:02}-{day:02}")
}

fn fmt_value(v: f64) -> String {
    if v >= 25.0 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.1}")
    }
}

struct PatientPlan {
    id: String,
    admissions: Vec<AdmissionPlan>,
    primary_condition: usize,
    linked: Vec<usize>,
    t3_category: LabCategory,
}

struct AdmissionPlan {
    id: String,
    date_day: u32,
    condition: usize,
    complaint: usize,
    meds: Vec<usize>,
    labs: Vec<LabCategory>,
    findings: Vec<usize>,
    revision: bool,
}

fn plan_patient(
    rng: &mut ChaCha8Rng,
    spec: &CorpusSpec,
    used_patients: &mut BTreeSet<u32>,
    used_admissions: &mut BTreeSet<u32>,
) -> PatientPlan {
    let pid = loop {
        let id = rng.gen_range(10_000_000..=99_999_999);
        if used_patients.insert(id) {
            break id;
        }
    };
    let bracket = {
        let total: f64 = spec.bracket_weights.iter().sum();
        let roll = rng.gen_range(0.0..total.max(f64::MIN_POSITIVE));
        if roll < spec.bracket_weights[0] {
            0
        } else if roll < spec.bracket_weights[0] + spec.bracket_weights[1] {
            1
        } else {
            2
        }
    };
    let n_adm = match bracket {
        0 => rng.gen_range(3..=5),
        1 => rng.gen_range(6..=9),
        _ => rng.gen_range(10..=12),
    };

    let primary_condition = rng.gen_range(0..CONDITIONS.len());
    let mut linked = vec![0usize];
    linked.push(rng.gen_range(1..n_adm));
    if n_adm > 3 && rng.gen_bool(0.4) {
        linked.push(rng.gen_range(1..n_adm));
    }
    linked.sort_unstable();
    linked.dedup();
    if linked.len() < 2 {
        linked = vec![0, n_adm - 1];
    }
    let t3_category = if rng.gen_bool(0.4) { LabCategory::BloodGas } else { LabCategory::Chemistry };

    let mut day = rng.gen_range(0..200u32);
    let mut admissions = Vec::with_capacity(n_adm);
    for i in 0..n_adm {
        let aid = loop {
            let id = rng.gen_range(20_000_000..=29_999_999);
            if used_admissions.insert(id) {
                break id;
            }
        };
        let is_linked = linked.contains(&i);
        let condition = if is_linked {
            primary_condition
        } else {
            // Distinct from the recurring condition so episode selection has
            // something to discriminate on.
            let mut c = rng.gen_range(0..CONDITIONS.len());
            if c == primary_condition {
                c = (c + 1) % CONDITIONS.len();
            }
            c
        };
        let mut labs = vec![LabCategory::Chemistry];
        if rng.gen_bool(spec.doc_mix.hematology) {
            labs.push(LabCategory::Hematology);
        }
        if rng.gen_bool(spec.doc_mix.blood_gas) {
            labs.push(LabCategory::BloodGas);
        }
        // Linked admissions must carry the longitudinal lab category.
        if is_linked && !labs.contains(&t3_category) {
            labs.push(t3_category);
        }
        let mut findings = Vec::new();
        if rng.gen_bool(spec.doc_mix.radiology) {
            findings.push(rng.gen_range(0..FINDINGS.len()));
            if rng.gen_bool(spec.doc_mix.second_radiology) {
                let mut f = rng.gen_range(0..FINDINGS.len());
                if f == findings[0] {
                    f = (f + 1) % FINDINGS.len();
                }
                findings.push(f);
            }
        }
        let mut meds: Vec<usize> = Vec::new();
        while meds.len() < 3 {
            let m = rng.gen_range(0..MEDICATIONS.len());
            if !meds.contains(&m) {
                meds.push(m);
            }
        }
        admissions.push(AdmissionPlan {
            id: format!("hadm_{aid}"),
            date_day: day,
            condition,
            complaint: rng.gen_range(0..COMPLAINTS.len()),
            meds,
            labs,
            findings,
            revision: rng.gen_bool(spec.doc_mix.discharge_revision),
        });
        day += rng.gen_range(15..90);
    }

    PatientPlan {
        id: format!("S{pid}"),
        admissions,
        primary_condition,
        linked,
        t3_category,
    }
}

struct LabValues {
    /// Analyte index within the category's table.
    analyte: usize,
    peak: f64,
    serial: [f64; 3],
}

fn gen_lab_values(rng: &mut ChaCha8Rng, cat: LabCategory) -> LabValues {
    let analyte = rng.gen_range(0..cat.analytes().len());
    let (_, lo, hi, _) = cat.analytes()[analyte];
    let peak = lo + (hi - lo) * rng.gen_range(0.3..1.0);
    let serial = [
        lo + (hi - lo) * rng.gen_range(0.0..0.6),
        peak,
        lo + (hi - lo) * rng.gen_range(0.0..0.7),
    ];
    LabValues { analyte, peak, serial }
}

struct Writer<'a> {
    store: &'a DocStore,
    patient: String,
    admission: String,
    date: String,
}

impl Writer<'_> {
    fn append(&self, doc: &str, doc_type: DocType, body: &str) -> Result<NodePath, CorpusError> {
        let path = NodePath::leaf(&self.patient, &self.admission, doc).map_err(StoreError::from)?;
        let header = ProvenanceHeader::new(source_table(&doc_type), doc_type, WriterRole::System)
            .with_chart_time(&self.date)
            .with_identifier("subject_id", self.patient.trim_start_matches('S'))
            .with_identifier("hadm_id", self.admission.trim_start_matches("hadm_"));
        self.store.append_page(&path, header, body, false, WriteAccess::Build)?;
        Ok(path)
    }
}

fn source_table(doc_type: &DocType) -> &'static str {
    match doc_type {
        DocType::DischargeSummary | DocType::Radiology => "notes",
        DocType::Diagnoses => "diagnoses_icd",
        DocType::Triage => "ed_triage",
        DocType::Prescriptions => "prescriptions",
        DocType::Lab(_) => "labevents",
        DocType::Note(_) => "agent_notes",
    }
}

/// Generate a corpus into `root`. Returns the opened store and the fact
/// registry (also written to `<root>/registry.json`).
pub fn generate_corpus(spec: &CorpusSpec, root: &Path) -> Result<(DocStore, FactRegistry), CorpusError> {
    let clock = logical_clock(1_700_000_000_000);
    let store = DocStore::open_with_clock(root, clock)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut used_patients = BTreeSet::new();
    let mut used_admissions = BTreeSet::new();
    let mut facts: Vec<PlantedFact> = Vec::new();
    let mut fact_seq = 0usize;

    for _ in 0..spec.n_patients {
        let plan = plan_patient(&mut rng, spec, &mut used_patients, &mut used_admissions);
        let mut t3_values: Vec<(String, f64)> = Vec::new(); // (admission, peak) for the trend fact
        let mut tier1_rotation = rng.gen_range(0..4usize);

        for (adm_idx, adm) in plan.admissions.iter().enumerate() {
            let date = render_date(adm.date_day);
            let writer = Writer {
                store: &store,
                patient: plan.id.clone(),
                admission: adm.id.clone(),
                date: date.clone(),
            };
            let (cond_long, _) = CONDITIONS[adm.condition];
            let complaint = COMPLAINTS[adm.complaint];
            let med_names: Vec<&str> = adm.meds.iter().map(|m| MEDICATIONS[*m]).collect();
            let doses: Vec<u32> = adm.meds.iter().map(|_| rng.gen_range(1..40) * 5).collect();

            // Triage.
            writer.append(
                "triage.md",
                DocType::Triage,
                &format!(
                    "Chief complaint of {complaint}. Arrived for evaluation on {date}.\n\n\
                     Vital signs at triage: heart rate {hr} bpm, blood pressure {sys}/{dia} mmHg, \
                     oxygen saturation {spo2} percent, temperature {temp:.1} C.\n\
                     Acuity level {acuity} assigned after the initial assessment.\n",
                    hr = rng.gen_range(58..135),
                    sys = rng.gen_range(95..185),
                    dia = rng.gen_range(55..105),
                    spo2 = rng.gen_range(88..100),
                    temp = 36.0 + rng.gen_range(0.0..3.2),
                    acuity = rng.gen_range(1..5),
                ),
            )?;

            // Diagnoses: first line carries the coded titles so the manifest
            // scope and the admission summary both see them.
            let dx2 = SECONDARY_DX[rng.gen_range(0..SECONDARY_DX.len())];
            let dx3 = SECONDARY_DX[rng.gen_range(0..SECONDARY_DX.len())];
            writer.append(
                "diagnoses.md",
                DocType::Diagnoses,
                &format!(
                    "Coded diagnoses: {cond_long}; {dx2}; {dx3}.\n\n- {cond_long}\n- {dx2}\n- {dx3}\n"
                ),
            )?;

            // Labs. Values repeat analyte vocabulary across every admission.
            let mut lab_paths = Vec::new();
            let mut lab_values = Vec::new();
            for cat in &adm.labs {
                let values = gen_lab_values(&mut rng, *cat);
                let (name, _, _, unit) = cat.analytes()[values.analyte];
                let others: Vec<String> = cat
                    .analytes()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != values.analyte)
                    .map(|(_, (n, lo, hi, u))| {
                        format!("{n} {}{}", fmt_value(lo + (hi - lo) * rng.gen::<f64>() * 0.5), fmt_unit(u))
                    })
                    .collect();
                let body = format!(
                    "{cap_name} peaked at {peak}{unit_sp} during this stay.\n\n\
                     Serial {name} values: {v0}, {v1}, {v2}{unit_paren}.\n\
                     Additional panel results: {others}.\n",
                    cap_name = capitalize(name),
                    peak = fmt_value(values.peak),
                    unit_sp = fmt_unit(unit),
                    v0 = fmt_value(values.serial[0]),
                    v1 = fmt_value(values.serial[1]),
                    v2 = fmt_value(values.serial[2]),
                    unit_paren = if unit.is_empty() { String::new() } else { format!(" ({unit})") },
                    others = others.join("; "),
                );
                let path = writer.append(&format!("lab_{}.md", cat.id()), DocType::Lab(cat.id().into()), &body)?;
                if *cat == plan.t3_category && plan.linked.contains(&adm_idx) {
                    t3_values.push((adm.id.clone(), values.peak));
                }
                lab_paths.push(path);
                lab_values.push((*cat, values));
            }

            // Radiology, numbered by chart order.
            let mut radiology_paths = Vec::new();
            for (ri, f) in adm.findings.iter().enumerate() {
                let finding = FINDINGS[*f];
                let path = writer.append(
                    &format!("radiology_{}.md", ri + 1),
                    DocType::Radiology,
                    &format!(
                        "FINDINGS: {finding_cap}. Study performed on {date}.\n\n\
                         IMPRESSION: {finding_cap}; clinical correlation recommended.\n",
                        finding_cap = capitalize(finding),
                    ),
                )?;
                radiology_paths.push((path, *f));
            }

            // Prescriptions: the ordered list names every medication so the
            // manifest scope carries them.
            let rx_body = format!(
                "Medications ordered: {list}.\n\n{lines}",
                list = med_names.join("; "),
                lines = med_names
                    .iter()
                    .zip(&doses)
                    .map(|(m, d)| format!("- {m} {d} mg {}\n", FREQUENCIES[(*d as usize / 5) % FREQUENCIES.len()]))
                    .collect::<String>(),
            );
            writer.append("prescriptions.md", DocType::Prescriptions, &rx_body)?;

            // Discharge summary: leaks analyte and medication vocabulary on
            // purpose — the cross-document noise flat retrieval must cope
            // with. Revised admissions get a draft first.
            let (lab_cat, lab_vals) = &lab_values[0];
            let (an_name, _, _, an_unit) = lab_cat.analytes()[lab_vals.analyte];
            let discharge_body = format!(
                "Admitted with {complaint} and treated for {cond_long}.\n\n\
                 # Hospital Course\n\
                 The patient presented with {complaint} and was found to have {cond_long}. \
                 Serum {an_name} measured {v0}{unit_sp} on admission and peaked at {peak}{unit_sp}. \
                 Treatment included {med0} and {med1}. Vital signs remained stable through the stay.\n\n\
                 # Discharge Plan\n\
                 Discharged on {med0} with follow-up in {weeks} weeks. Return precautions reviewed.\n",
                v0 = fmt_value(lab_vals.serial[0]),
                peak = fmt_value(lab_vals.peak),
                unit_sp = fmt_unit(an_unit),
                med0 = med_names[0],
                med1 = med_names[1],
                weeks = rng.gen_range(1..9),
            );
            if adm.revision {
                writer.append(
                    "discharge_summary.md",
                    DocType::DischargeSummary,
                    &format!("Preliminary dictation pending attending review.\n\nAdmitted with {complaint}.\n"),
                )?;
            }
            writer.append("discharge_summary.md", DocType::DischargeSummary, &discharge_body)?;

            // ---- Tier-1 fact for this admission (template rotated).
            tier1_rotation = (tier1_rotation + 1) % 4;
            let fact = match tier1_rotation {
                0 => {
                    let (cat, vals) = &lab_values[0];
                    let (name, ..) = cat.analytes()[vals.analyte];
                    PlantedFact {
                        id: format!("f{fact_seq:05}"),
                        patient: plan.id.clone(),
                        tier: 1,
                        gold: vec![lab_paths[0].clone()],
                        query_text: format!(
                            "What was the peak {name} value recorded in the {cat_label} labs during \
                             admission {adm} of patient {pat}?",
                            cat_label = cat.label(),
                            adm = adm.id,
                            pat = plan.id,
                        ),
                    }
                }
                1 => PlantedFact {
                    id: format!("f{fact_seq:05}"),
                    patient: plan.id.clone(),
                    tier: 1,
                    gold: vec![NodePath::leaf(&plan.id, &adm.id, "prescriptions.md").map_err(StoreError::from)?],
                    query_text: format!(
                        "What dose of {med} appears in the prescriptions ordered during admission \
                         {adm} for patient {pat}?",
                        med = med_names[0],
                        adm = adm.id,
                        pat = plan.id,
                    ),
                },
                2 => PlantedFact {
                    id: format!("f{fact_seq:05}"),
                    patient: plan.id.clone(),
                    tier: 1,
                    gold: vec![NodePath::leaf(&plan.id, &adm.id, "triage.md").map_err(StoreError::from)?],
                    query_text: format!(
                        "What was the chief complaint documented at triage for admission {adm} of \
                         patient {pat}?",
                        adm = adm.id,
                        pat = plan.id,
                    ),
                },
                _ => match radiology_paths.first() {
                    Some((path, f)) => PlantedFact {
                        id: format!("f{fact_seq:05}"),
                        patient: plan.id.clone(),
                        tier: 1,
                        gold: vec![path.clone()],
                        query_text: format!(
                            "What did the radiology report describe about {finding} during admission \
                             {adm} of patient {pat}?",
                            finding = FINDINGS[*f],
                            adm = adm.id,
                            pat = plan.id,
                        ),
                    },
                    None => PlantedFact {
                        id: format!("f{fact_seq:05}"),
                        patient: plan.id.clone(),
                        tier: 1,
                        gold: vec![NodePath::leaf(&plan.id, &adm.id, "triage.md").map_err(StoreError::from)?],
                        query_text: format!(
                            "What was the chief complaint documented at triage for admission {adm} of \
                             patient {pat}?",
                            adm = adm.id,
                            pat = plan.id,
                        ),
                    },
                },
            };
            facts.push(fact);
            fact_seq += 1;

            // ---- Tier-2 facts for the first and middle admissions.
            if adm_idx == 0 || adm_idx == plan.admissions.len() / 2 {
                let fact = if adm_idx == 0 {
                    PlantedFact {
                        id: format!("f{fact_seq:05}"),
                        patient: plan.id.clone(),
                        tier: 2,
                        gold: vec![
                            NodePath::leaf(&plan.id, &adm.id, "triage.md").map_err(StoreError::from)?,
                            NodePath::leaf(&plan.id, &adm.id, "discharge_summary.md").map_err(StoreError::from)?,
                            NodePath::leaf(&plan.id, &adm.id, "prescriptions.md").map_err(StoreError::from)?,
                        ],
                        query_text: format!(
                            "For admission {adm} of patient {pat}, relate the chief complaint of \
                             {complaint} at triage to the discharge summary course and the \
                             prescriptions ordered.",
                            adm = adm.id,
                            pat = plan.id,
                        ),
                    }
                } else {
                    let (cat, vals) = &lab_values[0];
                    let (name, ..) = cat.analytes()[vals.analyte];
                    PlantedFact {
                        id: format!("f{fact_seq:05}"),
                        patient: plan.id.clone(),
                        tier: 2,
                        gold: vec![lab_paths[0].clone(),
                            NodePath::leaf(&plan.id, &adm.id, "diagnoses.md").map_err(StoreError::from)?],
                        query_text: format!(
                            "Within admission {adm} of patient {pat}, connect the peak {name} \
                             {cat_label} result to the coded diagnoses.",
                            cat_label = cat.label(),
                            adm = adm.id,
                            pat = plan.id,
                        ),
                    }
                };
                facts.push(fact);
                fact_seq += 1;
            }
        }

        // ---- Tier-3 facts across the linked admissions.
        if t3_values.len() >= 2 {
            let cat = plan.t3_category;
            let gold: Vec<NodePath> = t3_values
                .iter()
                .map(|(adm, _)| NodePath::leaf(&plan.id, adm, &format!("lab_{}.md", cat.id())))
                .collect::<Result<_, _>>()
                .map_err(StoreError::from)?;
            // All linked lab docs plant the same analyte family; the query
            // names the recurring condition, never an admission id.
            let analyte = cat.analytes()[0].0;
            let (_, phrase) = CONDITIONS[plan.primary_condition];
            facts.push(PlantedFact {
                id: format!("f{fact_seq:05}"),
                patient: plan.id.clone(),
                tier: 3,
                gold,
                query_text: format!(
                    "How did the {cat_label} lab values such as {analyte} change for patient {pat} \
                     across the admissions for {phrase}? Describe the trend from the earliest \
                     admission to the most recent one.",
                    cat_label = cat.label(),
                    pat = plan.id,
                ),
            });
            fact_seq += 1;

            let gold: Vec<NodePath> = plan
                .linked
                .iter()
                .map(|i| {
                    NodePath::leaf(&plan.id, &plan.admissions[*i].id, "discharge_summary.md")
                })
                .collect::<Result<_, _>>()
                .map_err(StoreError::from)?;
            let (_, phrase) = CONDITIONS[plan.primary_condition];
            facts.push(PlantedFact {
                id: format!("f{fact_seq:05}"),
                patient: plan.id.clone(),
                tier: 3,
                gold,
                query_text: format!(
                    "Across the admissions for {phrase}, how did the discharge summary course \
                     sections describe the treatment of patient {pat} over time?",
                    pat = plan.id,
                ),
            });
            fact_seq += 1;
        }
    }

    rebuild_all(&store, &DeterministicDescriber)?;

    let registry = FactRegistry { seed: spec.seed, facts };
    registry.save(&root.join("registry.json"))?;
    Ok((store, registry))
}

fn fmt_unit(unit: &str) -> String {
    if unit.is_empty() {
        String::new()
    } else {
        format!(" {unit}")
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{tree_hash, TreeScope};

    fn small_spec(seed: u64) -> CorpusSpec {
        CorpusSpec { seed, n_patients: 6, ..CorpusSpec::default() }
    }

    #[test]
    fn generation_is_deterministic() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        generate_corpus(&small_spec(7), d1.path()).unwrap();
        generate_corpus(&small_spec(7), d2.path()).unwrap();
        assert_eq!(
            tree_hash(d1.path(), TreeScope::WithManifests).unwrap(),
            tree_hash(d2.path(), TreeScope::WithManifests).unwrap()
        );
        let log1 = std::fs::read(d1.path().join("mutations.jsonl")).unwrap();
        let log2 = std::fs::read(d2.path().join("mutations.jsonl")).unwrap();
        assert_eq!(log1, log2);
    }

    #[test]
    fn admission_counts_respect_brackets() {
        let dir = tempfile::tempdir().unwrap();
        let (store, _) = generate_corpus(&small_spec(11), dir.path()).unwrap();
        for patient in store.list_children(&NodePath::root()).unwrap() {
            let n = store.list_children(&patient).unwrap().len();
            assert!((3..=12).contains(&n), "{patient} has {n} admissions");
        }
    }

    #[test]
    fn every_gold_path_exists() {
        let dir = tempfile::tempdir().unwrap();
        let (store, registry) = generate_corpus(&small_spec(13), dir.path()).unwrap();
        assert!(!registry.facts.is_empty());
        for fact in &registry.facts {
            for gold in &fact.gold {
                assert!(store.leaf_exists(gold), "{} missing for {}", gold, fact.id);
            }
        }
    }

    #[test]
    fn tier_cardinalities_hold() {
        let dir = tempfile::tempdir().unwrap();
        let (_, registry) = generate_corpus(&small_spec(17), dir.path()).unwrap();
        for fact in &registry.facts {
            let admissions: BTreeSet<&str> =
                fact.gold.iter().filter_map(|g| g.admission_id()).collect();
            match fact.tier {
                1 => assert_eq!(fact.gold.len(), 1),
                2 => {
                    assert!((2..=3).contains(&fact.gold.len()));
                    assert_eq!(admissions.len(), 1);
                }
                3 => assert!(admissions.len() >= 2),
                t => panic!("unexpected tier {t}"),
            }
        }
    }

    #[test]
    fn tier3_queries_omit_admission_ids() {
        let dir = tempfile::tempdir().unwrap();
        let (_, registry) = generate_corpus(&small_spec(19), dir.path()).unwrap();
        for fact in registry.facts_for_tier(3) {
            assert!(!fact.query_text.contains("hadm_"), "{}", fact.query_text);
        }
        for fact in registry.facts_for_tier(1) {
            assert!(fact.query_text.contains("hadm_"), "{}", fact.query_text);
        }
    }

    #[test]
    fn registry_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let (_, registry) = generate_corpus(&small_spec(23), dir.path()).unwrap();
        let loaded = FactRegistry::load(&dir.path().join("registry.json")).unwrap();
        assert_eq!(loaded.facts.len(), registry.facts.len());
        assert_eq!(loaded.seed, registry.seed);
    }
}
