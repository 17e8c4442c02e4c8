//! Hand-built two-admission trace fixture: a patient whose longitudinal
//! lactate question resolves to exactly one blood-gas document per
//! admission, for golden trace tests and CLI demos.

use std::path::Path;

use crate::bench::queries::BenchmarkQuery;
use crate::manifest::{rebuild_all, DeterministicDescriber};
use crate::retrieval::Query;
use crate::store::{
    logical_clock, DocStore, DocType, NodePath, ProvenanceHeader, WriteAccess, WriterRole,
};

use super::corpus::CorpusError;

pub const FIXTURE_PATIENT: &str = "S19768128";
pub const FIXTURE_ADMISSION_1: &str = "hadm_20298053";
pub const FIXTURE_ADMISSION_2: &str = "hadm_20946200";
pub const FIXTURE_QUERY_TEXT: &str = "How did S19768128's lactate levels change from the initial \
                                      craniotomy admission to the later readmission for surgical \
                                      site infection?";

/// Build the fixture into `root` and return the store plus the benchmark
/// query whose gold set is the two blood-gas documents.
pub fn build_trace_fixture(root: &Path) -> Result<(DocStore, BenchmarkQuery), CorpusError> {
    let store = DocStore::open_with_clock(root, logical_clock(1_700_000_000_000))?;

    let append = |adm: &str, doc: &str, doc_type: DocType, date: &str, body: &str| -> Result<NodePath, CorpusError> {
        let path = NodePath::leaf(FIXTURE_PATIENT, adm, doc).map_err(crate::store::StoreError::from)?;
        let header = ProvenanceHeader::new("fixture", doc_type, WriterRole::System).with_chart_time(date);
        store.append_page(&path, header, body, false, WriteAccess::Build)?;
        Ok(path)
    };

    // First admission: elective craniotomy.
    append(
        FIXTURE_ADMISSION_1,
        "triage.md",
        DocType::Triage,
        "2110-03-01",
        "Chief complaint of severe headache. Arrived for scheduled preoperative evaluation.\n",
    )?;
    append(
        FIXTURE_ADMISSION_1,
        "diagnoses.md",
        DocType::Diagnoses,
        "2110-03-01",
        "Coded diagnoses: intracranial mass status post craniotomy resection; essential hypertension.\n\n\
         - intracranial mass status post craniotomy resection\n- essential hypertension\n",
    )?;
    let gold_1 = append(
        FIXTURE_ADMISSION_1,
        "lab_blood_gas.md",
        DocType::Lab("blood_gas".into()),
        "2110-03-04",
        "Serial lactate levels during the initial postoperative period.\n\n\
         Lactate 2.2 mmol/L on arrival, rising to 3.0 mmol/L before normalizing.\n",
    )?;
    append(
        FIXTURE_ADMISSION_1,
        "discharge_summary.md",
        DocType::DischargeSummary,
        "2110-03-12",
        "Admitted for elective resection of an intracranial mass.\n\n\
         # Hospital Course\nUneventful recovery on the neurosurgical ward.\n\n\
         # Discharge Plan\nStaples removed at follow-up; wound care instructions provided.\n",
    )?;

    // Second admission: wound infection readmission.
    append(
        FIXTURE_ADMISSION_2,
        "triage.md",
        DocType::Triage,
        "2110-04-02",
        "Chief complaint of purulent drainage from the scalp wound. Febrile on arrival.\n",
    )?;
    append(
        FIXTURE_ADMISSION_2,
        "diagnoses.md",
        DocType::Diagnoses,
        "2110-04-02",
        "Coded diagnoses: deep wound infection after intracranial surgery; essential hypertension.\n\n\
         - deep wound infection after intracranial surgery\n- essential hypertension\n",
    )?;
    let gold_2 = append(
        FIXTURE_ADMISSION_2,
        "lab_blood_gas.md",
        DocType::Lab("blood_gas".into()),
        "2110-04-03",
        "Lactate levels at readmission remained lower than the initial postoperative values.\n\n\
         Lactate 0.9 mmol/L, stable on repeat sampling.\n",
    )?;
    append(
        FIXTURE_ADMISSION_2,
        "discharge_summary.md",
        DocType::DischargeSummary,
        "2110-04-09",
        "Readmitted for management of a postoperative wound issue.\n\n\
         # Hospital Course\nOperative washout followed by intravenous antibiotics.\n\n\
         # Discharge Plan\nOral antibiotics to complete a fourteen day course.\n",
    )?;

    rebuild_all(&store, &DeterministicDescriber)?;

    let query = Query::new("q289", FIXTURE_QUERY_TEXT).with_tier(3);
    let bench_query = BenchmarkQuery {
        query,
        tier: 3,
        gold: [gold_1, gold_2].into_iter().collect(),
    };
    Ok((store, bench_query))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::{progressive_disclosure, LexicalSelector, TraceReport};

    #[test]
    fn lexical_navigation_reproduces_the_reference_trace() {
        let dir = tempfile::tempdir().unwrap();
        let (store, bq) = build_trace_fixture(dir.path()).unwrap();
        let result = progressive_disclosure(&store, &bq.query, &LexicalSelector, 3).unwrap();
        let report = TraceReport::new(&bq.query, &result, Some(&bq.gold));

        assert_eq!(report.selected_patient, FIXTURE_PATIENT);
        assert_eq!(
            report.selected_admissions,
            vec![FIXTURE_ADMISSION_1.to_string(), FIXTURE_ADMISSION_2.to_string()]
        );
        assert_eq!(report.selected_documents, vec!["lab_blood_gas".to_string()]);
        assert_eq!(
            report.retrieved_files,
            vec![
                format!("{FIXTURE_PATIENT}/{FIXTURE_ADMISSION_1}/lab_blood_gas.md"),
                format!("{FIXTURE_PATIENT}/{FIXTURE_ADMISSION_2}/lab_blood_gas.md"),
            ]
        );
        assert_eq!(report.precision, Some(1.0));
        assert_eq!(report.recall, Some(1.0));
    }
}
