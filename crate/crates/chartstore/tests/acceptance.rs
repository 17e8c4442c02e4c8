//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`). Tolerances are pinned in
//! the assertions themselves.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Barrier, Mutex};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use chartstore::bench::{
    build_trace_fixture, evaluate, generate_corpus, generate_queries, BenchmarkQuery, CorpusSpec,
    ManifestL1System, ManifestSystem, OracleManifestSystem, RagSystem,
};
use chartstore::coordination::{LeaseError, LeaseManager};
use chartstore::manifest::{apply_mutation, internal_nodes, DeterministicDescriber};
use chartstore::rag::{build_index, chunk_document, HashingEmbedder, CHUNK_OVERLAP, CHUNK_TOKENS};
use chartstore::retrieval::{
    progressive_disclosure, verify_pruning, LexicalSelector, OracleSelector, Query, TraceReport,
};
use chartstore::scenario::{run_scenario, FaultPlan, ScenarioConfig, SCENARIO_NAMES};
use chartstore::store::{
    logical_clock, replay_log, tree_hash, DocStore, DocType, NodePath, Page, ProvenanceHeader,
    TreeScope, WriteAccess, WriterRole,
};
use chartstore::text::tokenize_spans;

const STANDARD_PATIENTS: usize = 100;
const PER_TIER: usize = 100;

fn standard_corpus(seed: u64, dir: &std::path::Path) -> (DocStore, Vec<BenchmarkQuery>) {
    let spec = CorpusSpec::default().with_seed(seed).with_patients(STANDARD_PATIENTS);
    let (store, registry) = generate_corpus(&spec, dir).expect("corpus generates");
    let queries = generate_queries(&registry, PER_TIER).expect("queries generate");
    assert_eq!(queries.len(), 3 * PER_TIER);
    (store, queries)
}

fn pass(criterion: &str, detail: String) {
    println!("ACCEPTANCE {criterion}: PASS — {detail}");
}

#[test]
fn c01_oracle_recall_is_total_within_time_budget() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (store, queries) = standard_corpus(42, dir.path());
    let report = evaluate(&OracleManifestSystem { store: &store, depth_limit: 3 }, &queries, false);
    let elapsed = started.elapsed();

    assert_eq!(report.overall.recall, 1.0, "oracle recall must be exactly 1.0");
    assert_eq!(
        report.overall.perfect_recall_count,
        3 * PER_TIER,
        "perfect recall on all {} queries",
        3 * PER_TIER
    );
    assert!(
        elapsed.as_secs() < 60,
        "oracle benchmark took {elapsed:?}, budget is 60 s"
    );
    pass(
        "1 (oracle recall)",
        format!("recall 1.0, perfect {}/{}, {elapsed:?}", report.overall.perfect_recall_count, 3 * PER_TIER),
    );
}

#[test]
fn c02_oracle_docs_retrieved_equals_gold_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (store, queries) = standard_corpus(43, dir.path());
    let report = evaluate(&OracleManifestSystem { store: &store, depth_limit: 3 }, &queries, false);

    for outcome in &report.outcomes {
        assert_eq!(
            outcome.retrieved.len(),
            outcome.gold.len(),
            "query {} retrieved {} docs for |gold| = {}",
            outcome.query_id,
            outcome.retrieved.len(),
            outcome.gold.len()
        );
    }
    let mut detail = String::new();
    for tier in 1..=3u8 {
        let tier_outcomes: Vec<_> = report.outcomes.iter().filter(|o| o.tier == tier).collect();
        let mean_docs: f64 =
            tier_outcomes.iter().map(|o| o.retrieved.len() as f64).sum::<f64>() / tier_outcomes.len() as f64;
        let mean_gold: f64 =
            tier_outcomes.iter().map(|o| o.gold.len() as f64).sum::<f64>() / tier_outcomes.len() as f64;
        assert_eq!(mean_docs, mean_gold, "tier {tier} mean docs != mean gold");
        if tier == 1 {
            assert_eq!(mean_docs, 1.0, "tier-1 retrieves exactly one document");
        }
        detail.push_str(&format!("tier{tier} {mean_docs:.2} "));
    }
    pass("2 (oracle adaptivity)", format!("mean docs per tier = mean gold per tier: {detail}"));
}

#[test]
fn c03_direction_consistency_across_ten_seeds() {
    let embedder = HashingEmbedder::default();
    let selector = LexicalSelector;
    let mut holds = [0usize; 4]; // (a) precision (b) tier-1 AF>flat (c) tier-3 manifest>AF (d) L1 ordering

    for seed in 1..=10u64 {
        let dir = tempfile::tempdir().unwrap();
        let (store, queries) = standard_corpus(seed, dir.path());
        let index = build_index(&store, &embedder).unwrap();

        let manifest = evaluate(&ManifestSystem { store: &store, selector: &selector, depth_limit: 3 }, &queries, false);
        let l1 = evaluate(&ManifestL1System { store: &store, selector: &selector }, &queries, false);
        let flat = evaluate(&RagSystem { index: &index, embedder: &embedder, k: 10, filtered: false }, &queries, false);
        let af = evaluate(&RagSystem { index: &index, embedder: &embedder, k: 10, filtered: true }, &queries, false);

        if manifest.overall.precision > flat.overall.precision {
            holds[0] += 1;
        }
        if af.tiers[&1].recall > flat.tiers[&1].recall {
            holds[1] += 1;
        }
        if manifest.tiers[&3].recall > af.tiers[&3].recall {
            holds[2] += 1;
        }
        if l1.overall.recall >= manifest.overall.recall
            && l1.overall.mean_docs_retrieved > manifest.overall.mean_docs_retrieved
        {
            holds[3] += 1;
        }
    }

    let labels = [
        "manifest precision > flat precision",
        "rag-af tier-1 recall > flat tier-1 recall",
        "manifest tier-3 recall > rag-af tier-3 recall",
        "l1-only recall >= l1+l2 and docs >",
    ];
    for (count, label) in holds.iter().zip(labels) {
        assert!(*count >= 8, "`{label}` held on only {count}/10 seeds");
    }
    pass(
        "3 (direction consistency)",
        format!("inequalities held on {:?} of 10 seeds", holds),
    );
}

#[test]
fn c04_pruning_soundness_across_full_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let (store, queries) = standard_corpus(44, dir.path());
    let selector = LexicalSelector;
    let mut checked = 0usize;

    for bq in &queries {
        let probe = store.attach_read_probe();
        let result = progressive_disclosure(&store, &bq.query, &selector, 3).expect("retrieval runs");
        let reads = probe.paths();
        store.detach_read_probe();
        let violations = verify_pruning(&result.trace, &reads);
        assert!(violations.is_empty(), "query {}: {violations:?}", bq.query.id);

        // The oracle path must be prune-sound as well.
        let oracle = OracleSelector::new(bq.gold.iter().cloned());
        let probe = store.attach_read_probe();
        let result = progressive_disclosure(&store, &bq.query, &oracle, 3).expect("retrieval runs");
        let reads = probe.paths();
        store.detach_read_probe();
        let violations = verify_pruning(&result.trace, &reads);
        assert!(violations.is_empty(), "oracle on {}: {violations:?}", bq.query.id);
        checked += 2;
    }
    pass("4 (pruning soundness)", format!("{checked} traced runs, zero reads under pruned subtrees"));
}

#[test]
fn c05_manifest_locality_over_random_mutations() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec::default().with_seed(45).with_patients(20);
    let (store, _) = generate_corpus(&spec, dir.path()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4545);

    let patients: Vec<NodePath> = store.list_children(&NodePath::root()).unwrap();
    let docs = ["triage.md", "diagnoses.md", "lab_chemistry.md", "radiology_1.md", "prescriptions.md", "progress_note.md"];

    // Expected manifest bytes, updated only through reported touches; the
    // periodic full sweep catches any unreported modification.
    let snapshot = |store: &DocStore| -> BTreeMap<String, String> {
        internal_nodes(store)
            .unwrap()
            .into_iter()
            .map(|n| (n.to_string(), store.read_manifest_text(&n).unwrap().unwrap_or_default()))
            .collect()
    };
    let mut expected = snapshot(&store);
    let mut max_touched = 0usize;

    for round in 0..1000 {
        let patient = &patients[rng.gen_range(0..patients.len())];
        let admissions = store.list_children(patient).unwrap();
        // One in ten mutations starts a new admission.
        let admission = if rng.gen_bool(0.1) {
            patient.child(&format!("hadm_9{:07}", rng.gen_range(0..10_000_000))).unwrap()
        } else {
            admissions[rng.gen_range(0..admissions.len())].clone()
        };
        let doc = docs[rng.gen_range(0..docs.len())];
        let path = admission.child(doc).unwrap();
        let header = ProvenanceHeader::new("mut", DocType::parse(doc.trim_end_matches(".md")), WriterRole::Clinician)
            .with_chart_time("2111-01-01");
        let event = store
            .append_page(&path, header, &format!("Mutation {round} narrative {}.", rng.gen_range(0..1000)), false, WriteAccess::Build)
            .unwrap();
        let touched = apply_mutation(&store, &event, &DeterministicDescriber).unwrap();
        assert!(touched.len() <= 3, "round {round}: {} manifests touched", touched.len());
        max_touched = max_touched.max(touched.len());
        for node in &touched {
            let text = store.read_manifest_text(node).unwrap().unwrap_or_default();
            expected.insert(node.to_string(), text);
        }
        if round % 100 == 99 {
            let actual = snapshot(&store);
            assert_eq!(actual, expected, "an untouched manifest changed by round {round}");
        }
    }
    let actual = snapshot(&store);
    assert_eq!(actual, expected, "an untouched manifest changed");
    pass(
        "5 (manifest locality)",
        format!("1000 mutations, max {max_touched} manifests touched, untouched byte-identical"),
    );
}

#[test]
fn c06_lease_mutual_exclusion_and_reclaim() {
    // 16 contending workers x 100 rounds on one patient.
    let dir = tempfile::tempdir().unwrap();
    let clock = logical_clock(1_000);
    const WORKERS: usize = 16;
    const ROUNDS: usize = 100;
    let barrier = Arc::new(Barrier::new(WORKERS));
    let seq = Arc::new(AtomicU64::new(0));
    let intervals: Arc<Mutex<Vec<(u64, u64)>>> = Arc::new(Mutex::new(Vec::new()));
    let successes = Arc::new(AtomicU64::new(0));

    let handles: Vec<_> = (0..WORKERS)
        .map(|w| {
            let dir = dir.path().to_path_buf();
            let clock = clock.clone();
            let barrier = Arc::clone(&barrier);
            let seq = Arc::clone(&seq);
            let intervals = Arc::clone(&intervals);
            let successes = Arc::clone(&successes);
            std::thread::spawn(move || {
                let mgr = LeaseManager::new(&dir, &format!("worker-{w}"), clock);
                for _ in 0..ROUNDS {
                    barrier.wait();
                    let held = match mgr.acquire("S10000001", 30) {
                        Ok(lease) => {
                            let enter = seq.fetch_add(1, Ordering::SeqCst);
                            successes.fetch_add(1, Ordering::SeqCst);
                            Some((lease, enter))
                        }
                        Err(LeaseError::LeaseHeld { .. }) => None,
                        Err(e) => panic!("unexpected lease error: {e}"),
                    };
                    // The winner keeps holding until every contender has
                    // attempted, so one round has exactly one winner.
                    barrier.wait();
                    if let Some((lease, enter)) = held {
                        let exit = seq.fetch_add(1, Ordering::SeqCst);
                        intervals.lock().unwrap().push((enter, exit));
                        lease.release().unwrap();
                    }
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert_eq!(successes.load(Ordering::SeqCst), ROUNDS as u64, "exactly one winner per round");
    let mut sorted = intervals.lock().unwrap().clone();
    sorted.sort();
    for w in sorted.windows(2) {
        assert!(w[0].1 < w[1].0, "overlapping (acquire, release) intervals: {w:?}");
    }

    // Crash injection: reclaim succeeds within ttl + 1 attempt, repeatedly.
    let dir2 = tempfile::tempdir().unwrap();
    let clock2 = logical_clock(1_000);
    for round in 0..10 {
        let crasher = LeaseManager::new(dir2.path(), &format!("crasher-{round}"), clock2.clone());
        let rescuer = LeaseManager::new(dir2.path(), &format!("rescuer-{round}"), clock2.clone());
        let _abandoned = crasher.acquire("S10000002", 30).unwrap();
        clock2.advance(30_000);
        assert!(matches!(
            rescuer.reclaim_expired("S10000002", 30),
            Err(LeaseError::NotExpired { .. })
        ));
        clock2.advance(1_001);
        let lease = rescuer.reclaim_expired("S10000002", 30).expect("one attempt after expiry");
        lease.release().unwrap();
    }
    pass(
        "6 (lease mutual exclusion)",
        format!("{ROUNDS} exclusive holds, zero overlaps; 10 crash rounds reclaimed in one attempt"),
    );
}

#[test]
fn c07_priority_dispatch_in_escalation_runs() {
    let mut runs = 0;
    for fault in [None, Some(FaultPlan::DuplicateDelivery)] {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ScenarioConfig::default();
        config.fault = fault;
        let report = run_scenario("escalation", &dir.path().join("store"), &config).unwrap();
        assert!(report.passed, "escalation run failed:\n{}", report.render_text());

        // Exact ordering check on the delivery log: within every poll of
        // every subscription, no priority delivery follows a standard one.
        let mut by_poll: BTreeMap<(u64, u64), Vec<bool>> = BTreeMap::new();
        for d in &report.deliveries {
            by_poll.entry((d.subscription, d.poll)).or_default().push(d.priority);
        }
        for ((sub, poll), batch) in &by_poll {
            if let Some(first_std) = batch.iter().position(|p| !p) {
                assert!(
                    !batch[first_std..].iter().any(|p| *p),
                    "subscription {sub} poll {poll} delivered priority after standard"
                );
            }
        }
        // And the escalation itself was consumed before the queued standard
        // event by every subscribed clinician.
        let alert = report
            .timeline
            .iter()
            .find(|e| e.doc_id.doc_name() == Some("escalation_alert.md"))
            .expect("alert event");
        for (agent, audit) in &report.audits {
            if !agent.contains("clinician") {
                continue;
            }
            let pos = |v: u64| audit.received.iter().position(|(rv, _)| *rv == v);
            let (alert_pos, vitals_pos) = (pos(alert.version), pos(alert.version - 1));
            assert!(
                alert_pos.unwrap() < vitals_pos.unwrap(),
                "{agent} consumed the standard event first"
            );
        }
        runs += 1;
    }
    pass("7 (priority dispatch)", format!("{runs} escalation runs, priority always delivered first"));
}

#[test]
fn c08_log_replay_reconstructs_every_tree() {
    let mut checked = 0;
    // Every scenario, with and without its faults.
    let fault_matrix: Vec<(&str, Option<FaultPlan>)> = SCENARIO_NAMES
        .iter()
        .map(|n| (*n, None))
        .chain([
            ("monitoring", Some(FaultPlan::CrashMidLease)),
            ("monitoring", Some(FaultPlan::DelayedHeartbeat)),
            ("escalation", Some(FaultPlan::DuplicateDelivery)),
        ])
        .collect();
    for (name, fault) in fault_matrix {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ScenarioConfig::default();
        config.fault = fault;
        let report = run_scenario(name, &dir.path().join("store"), &config).unwrap();
        assert!(report.replay_consistent, "replay diverged for scenario {name} (fault {fault:?})");
        checked += 1;
    }
    // And the benchmark corpus itself.
    let dir = tempfile::tempdir().unwrap();
    let (store, _) = standard_corpus(46, dir.path());
    let replica = tempfile::tempdir().unwrap();
    replay_log(&store, replica.path()).unwrap();
    assert_eq!(
        tree_hash(store.root(), TreeScope::Documents).unwrap(),
        tree_hash(replica.path(), TreeScope::Documents).unwrap(),
        "benchmark corpus replay diverged"
    );
    checked += 1;
    pass("8 (log replay)", format!("{checked} trees reconstructed byte-identically"));
}

#[test]
fn c09_metrics_match_independent_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let (store, queries) = standard_corpus(47, dir.path());
    let selector = LexicalSelector;
    let report = evaluate(&ManifestSystem { store: &store, selector: &selector, depth_limit: 3 }, &queries, false);

    // Independent recomputation: plain set arithmetic, no shared code with
    // the metrics engine.
    let mut sum_p = 0.0f64;
    let mut sum_r = 0.0f64;
    let mut perfect = 0usize;
    for outcome in &report.outcomes {
        let retrieved: BTreeSet<&NodePath> = outcome.retrieved.iter().collect();
        let gold: BTreeSet<&NodePath> = outcome.gold.iter().collect();
        let hits = retrieved.intersection(&gold).count() as f64;
        let p = if retrieved.is_empty() { 0.0 } else { hits / retrieved.len() as f64 };
        let r = if gold.is_empty() { 0.0 } else { hits / gold.len() as f64 };
        assert!((outcome.precision() - p).abs() < 1e-12, "query {} precision", outcome.query_id);
        assert!((outcome.recall() - r).abs() < 1e-12, "query {} recall", outcome.query_id);
        assert_eq!(outcome.perfect_recall(), gold.is_subset(&retrieved), "query {}", outcome.query_id);
        sum_p += p;
        sum_r += r;
        if gold.is_subset(&retrieved) {
            perfect += 1;
        }
    }
    let n = report.outcomes.len() as f64;
    assert!((report.overall.precision - sum_p / n).abs() < 1e-12);
    assert!((report.overall.recall - sum_r / n).abs() < 1e-12);
    assert_eq!(report.overall.perfect_recall_count, perfect);
    pass(
        "9 (metrics oracle)",
        format!("{} queries cross-checked to 1e-12", report.outcomes.len()),
    );
}

#[test]
fn c10_chunking_contract_over_random_documents() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut checked = 0;
    for case in 0..200 {
        let headed = rng.gen_bool(0.5);
        let n_sections = rng.gen_range(1..6);
        let mut body = String::new();
        for s in 0..n_sections {
            if headed {
                body.push_str(&format!("# Section {s}\n"));
            }
            let words = rng.gen_range(1..1400);
            for w in 0..words {
                body.push_str(&format!("w{case}s{s}n{w} "));
            }
            body.push_str("\n\n");
        }
        let page = Page {
            path: NodePath::leaf("S10000001", "hadm_20000001", "discharge_summary.md").unwrap(),
            provenance: ProvenanceHeader::new("t", DocType::DischargeSummary, WriterRole::System),
            body,
            version_at_write: 1,
        };
        let tokens = tokenize_spans(&page.body);
        let mut chunks = chunk_document(&page);
        chunks.sort_by_key(|c| c.span.0);

        for c in &chunks {
            assert!(c.span.1 - c.span.0 <= CHUNK_TOKENS, "oversized chunk in case {case}");
        }
        for w in chunks.windows(2) {
            if w[1].span.0 < w[0].span.1 {
                assert_eq!(w[0].span.1 - w[1].span.0, CHUNK_OVERLAP, "wrong overlap in case {case}");
            }
        }
        let mut rebuilt: Vec<&str> = Vec::new();
        let mut cursor = 0usize;
        for c in &chunks {
            for t in &tokens[c.span.0.max(cursor)..c.span.1] {
                rebuilt.push(&t.text);
            }
            cursor = c.span.1;
        }
        let original: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(rebuilt, original, "reconstruction failed in case {case}");
        checked += 1;
    }
    pass("10 (chunking contract)", format!("{checked} random documents verified"));
}

#[test]
fn c11_reference_trace_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (store, bq) = build_trace_fixture(dir.path()).unwrap();
    let result = progressive_disclosure(&store, &bq.query, &LexicalSelector, 3).unwrap();
    let report = TraceReport::new(&bq.query, &result, Some(&bq.gold));

    assert_eq!(report.selected_patient, "S19768128");
    assert_eq!(report.selected_admissions, vec!["hadm_20298053".to_string(), "hadm_20946200".to_string()]);
    assert_eq!(report.selected_documents, vec!["lab_blood_gas".to_string()]);
    assert_eq!(
        report.retrieved_files,
        vec![
            "S19768128/hadm_20298053/lab_blood_gas.md".to_string(),
            "S19768128/hadm_20946200/lab_blood_gas.md".to_string(),
        ]
    );
    assert_eq!(report.precision, Some(1.0));
    assert_eq!(report.recall, Some(1.0));
    pass(
        "11 (reference trace fixture)",
        "two admissions, two blood-gas files, precision = recall = 1.0".to_string(),
    );
}
