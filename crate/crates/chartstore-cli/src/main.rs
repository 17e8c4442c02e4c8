//! Operator entry point binding the library's subsystems: corpus
//! generation, page ingestion, manifest-guided querying, the retrieval
//! benchmark, workflow scenarios, and audit inspection.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use chartstore::bench::{
    build_trace_fixture, evaluate, generate_corpus, generate_queries, BenchmarkQuery, CorpusSpec,
    EvalReport, FactRegistry, ManifestL1System, ManifestSystem, OracleManifestSystem, RagSystem,
    RetrievalSystem, SystemSummary,
};
use chartstore::coordination::LeaseManager;
use chartstore::manifest::{apply_mutation, DeterministicDescriber};
use chartstore::rag::{build_index, HashingEmbedder};
use chartstore::retrieval::{
    l1_only_mode, progressive_disclosure, LexicalSelector, OracleSelector, Query, Selector,
    TraceReport, DEFAULT_DEPTH_LIMIT,
};
use chartstore::scenario::{run_scenario, FaultPlan, ScenarioConfig, SCENARIO_NAMES};
use chartstore::store::{
    DocStore, DocType, NodePath, ProvenanceHeader, WriteAccess, WriterRole,
};

#[derive(Parser)]
#[command(name = "chartstore", version, about = "Manifest-indexed hierarchical document store with progressive-disclosure retrieval")]
struct Cli {
    /// Store root (also via CHARTSTORE_ROOT; defaults to ./corpus).
    #[arg(long, global = true, env = "CHARTSTORE_ROOT", default_value = "./corpus")]
    root: PathBuf,
    /// Machine-readable output where applicable.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build synthetic corpora and fixtures.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
    /// Append one page into the store.
    Ingest(IngestArgs),
    /// Manifest-guided retrieval for one query; prints the trace as JSON.
    Query(QueryArgs),
    /// Tiered retrieval benchmark.
    Bench {
        #[command(subcommand)]
        action: BenchAction,
    },
    /// Scripted multi-agent workflow scenarios.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Print the mutation log.
    Audit {
        /// Only events with version greater than this.
        #[arg(long, default_value_t = 0)]
        since: u64,
        /// Restrict to one patient subtree.
        #[arg(long)]
        patient: Option<String>,
    },
    /// Lease inspection.
    Lease {
        #[command(subcommand)]
        action: LeaseAction,
    },
}

#[derive(Subcommand)]
enum CorpusAction {
    /// Generate a seeded synthetic corpus with manifests and fact registry.
    Generate {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        patients: usize,
    },
    /// Build the hand-crafted two-admission trace fixture.
    Fixture,
}

#[derive(Args)]
struct IngestArgs {
    /// Leaf path, e.g. S12345678/hadm_23456789/triage.md.
    #[arg(long)]
    path: String,
    /// Body file to read, or `-` for stdin.
    #[arg(long)]
    file: String,
    #[arg(long, default_value = "cli_import")]
    source_table: String,
    /// Document type id (discharge_summary, radiology, diagnoses, triage,
    /// prescriptions, lab_<category>, or a note kind).
    #[arg(long)]
    doc_type: Option<String>,
    #[arg(long)]
    chart_time: Option<String>,
    #[arg(long, value_enum, default_value_t = RoleArg::System)]
    writer_role: RoleArg,
    /// Mark the mutation event as priority.
    #[arg(long)]
    priority: bool,
    /// Corpus-construction write: bypasses lease acquisition.
    #[arg(long)]
    build: bool,
    /// Agent identity for the lease when not in build mode.
    #[arg(long, default_value = "cli-operator")]
    agent: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Patient,
    Clinician,
    Triage,
    Specialist,
    System,
}

impl From<RoleArg> for WriterRole {
    fn from(r: RoleArg) -> Self {
        match r {
            RoleArg::Patient => WriterRole::Patient,
            RoleArg::Clinician => WriterRole::Clinician,
            RoleArg::Triage => WriterRole::Triage,
            RoleArg::Specialist => WriterRole::Specialist,
            RoleArg::System => WriterRole::System,
        }
    }
}

#[derive(Args)]
struct QueryArgs {
    /// Natural-language question.
    #[arg(long)]
    text: String,
    /// Structured patient field; wins over ids found in the text.
    #[arg(long)]
    target_patient: Option<String>,
    /// Depth bound L.
    #[arg(long, default_value_t = DEFAULT_DEPTH_LIMIT)]
    depth: usize,
    /// Episode selection only: load every document of selected admissions.
    #[arg(long)]
    l1_only: bool,
    /// Gold leaf paths (comma separated) to score the trace against.
    #[arg(long, value_delimiter = ',')]
    gold: Vec<String>,
    /// Selector: `lexical`, or `oracle` (requires --gold).
    #[arg(long, default_value = "lexical")]
    selector: String,
}

#[derive(Subcommand)]
enum BenchAction {
    /// Generate (or reuse) a corpus and compare retrieval systems.
    Run {
        /// Systems to evaluate.
        #[arg(long, value_delimiter = ',', default_values_t = [SystemArg::Manifest, SystemArg::Rag, SystemArg::RagAf])]
        systems: Vec<SystemArg>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        patients: usize,
        /// Queries per tier.
        #[arg(long, default_value_t = 100)]
        per_tier: usize,
        /// Report JSON output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run benchmark queries on parallel workers.
        #[arg(long)]
        parallel: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SystemArg {
    Manifest,
    #[value(name = "manifest-l1")]
    ManifestL1,
    #[value(name = "manifest-oracle")]
    ManifestOracle,
    Rag,
    #[value(name = "rag-af")]
    RagAf,
}

impl std::fmt::Display for SystemArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SystemArg::Manifest => "manifest",
            SystemArg::ManifestL1 => "manifest-l1",
            SystemArg::ManifestOracle => "manifest-oracle",
            SystemArg::Rag => "rag",
            SystemArg::RagAf => "rag-af",
        };
        write!(f, "{s}")
    }
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// Run one scenario to quiescence and print its report.
    Run {
        /// One of: monitoring, triage, escalation, adherence, longitudinal,
        /// cross_specialty.
        name: String,
        /// Fault plan: crash_mid_lease, delayed_heartbeat, duplicate_delivery.
        #[arg(long)]
        fault: Option<String>,
        /// TOML configuration overriding thresholds and scripts.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// List available scenarios.
    List,
}

#[derive(Subcommand)]
enum LeaseAction {
    /// Print live lease records.
    Status,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Corpus { action } => match action {
            CorpusAction::Generate { seed, patients } => {
                let spec = CorpusSpec::default().with_seed(seed).with_patients(patients);
                let (store, registry) = generate_corpus(&spec, &cli.root)?;
                let summary = serde_json::json!({
                    "root": cli.root,
                    "seed": seed,
                    "patients": patients,
                    "events": store.max_version(),
                    "facts": registry.facts.len(),
                    "registry": cli.root.join("registry.json"),
                });
                println!("{}", serde_json::to_string_pretty(&summary)?);
            }
            CorpusAction::Fixture => {
                let (store, bq) = build_trace_fixture(&cli.root)?;
                let summary = serde_json::json!({
                    "root": cli.root,
                    "patient": bq.query.target_patient.clone().unwrap_or_else(|| "S19768128".into()),
                    "events": store.max_version(),
                    "gold": bq.gold.iter().map(|g| g.to_string()).collect::<Vec<_>>(),
                    "query": bq.query.text,
                });
                println!("{}", serde_json::to_string_pretty(&summary)?);
            }
        },
        Command::Ingest(args) => ingest(&cli.root, args)?,
        Command::Query(args) => query(&cli.root, args)?,
        Command::Bench { action } => bench(&cli.root, action, cli.json)?,
        Command::Scenario { action } => scenario(&cli.root, action)?,
        Command::Audit { since, patient } => audit(&cli.root, since, patient)?,
        Command::Lease { action } => match action {
            LeaseAction::Status => lease_status(&cli.root, cli.json)?,
        },
    }
    Ok(())
}

fn ingest(root: &std::path::Path, args: IngestArgs) -> Result<()> {
    let store = DocStore::open(root)?;
    let path = NodePath::parse(&args.path).context("bad --path")?;
    if !path.is_leaf() {
        bail!("--path must name a leaf document (patient/admission/doc.md)");
    }
    let body = if args.file == "-" {
        std::io::read_to_string(std::io::stdin())?
    } else {
        std::fs::read_to_string(&args.file).with_context(|| format!("reading {}", args.file))?
    };
    let doc_type = match &args.doc_type {
        Some(t) => DocType::parse(t),
        None => DocType::parse(path.doc_name().unwrap_or("note").trim_end_matches(".md")),
    };
    let mut header = ProvenanceHeader::new(&args.source_table, doc_type, args.writer_role.into());
    if let Some(t) = &args.chart_time {
        header = header.with_chart_time(t);
    }

    let event = if args.build {
        store.append_page(&path, header, &body, args.priority, WriteAccess::Build)?
    } else {
        let manager = LeaseManager::new(root, &args.agent, chartstore::store::system_clock());
        let patient = path.patient_id().expect("leaf has patient");
        let lease = manager.acquire(patient, chartstore::coordination::DEFAULT_TTL_SECONDS)?;
        let event = store.append_page(&path, header, &body, args.priority, WriteAccess::Leased(&lease))?;
        apply_mutation(&store, &event, &DeterministicDescriber)?;
        lease.release()?;
        event
    };
    if args.build {
        apply_mutation(&store, &event, &DeterministicDescriber)?;
    }
    println!("{}", serde_json::to_string(&event)?);
    Ok(())
}

fn query(root: &std::path::Path, args: QueryArgs) -> Result<()> {
    let store = DocStore::open(root)?;
    let mut query = Query::new("cli", &args.text).with_depth_limit(args.depth);
    if let Some(p) = &args.target_patient {
        query = query.with_target_patient(p);
    }
    let gold: BTreeSet<NodePath> = args
        .gold
        .iter()
        .map(|g| NodePath::parse(g))
        .collect::<Result<_, _>>()
        .context("bad --gold path")?;

    let selector: Box<dyn Selector> = match args.selector.as_str() {
        "lexical" => Box::new(LexicalSelector),
        "oracle" => {
            if gold.is_empty() {
                bail!("--selector oracle requires --gold");
            }
            Box::new(OracleSelector::new(gold.iter().cloned()))
        }
        other => bail!("unknown selector `{other}` (expected lexical or oracle)"),
    };

    let result = if args.l1_only {
        l1_only_mode(&store, &query, selector.as_ref())?
    } else {
        progressive_disclosure(&store, &query, selector.as_ref(), args.depth)?
    };
    let report = TraceReport::new(&query, &result, (!gold.is_empty()).then_some(&gold));
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn bench(root: &std::path::Path, action: BenchAction, json: bool) -> Result<()> {
    let BenchAction::Run { systems, k, seed, patients, per_tier, out, parallel } = action;
    if k == 0 {
        bail!("--k must be at least 1");
    }

    // Reuse an existing corpus at the root when its registry matches the
    // requested seed; otherwise generate one.
    let registry_path = root.join("registry.json");
    let (store, registry) = if registry_path.exists() {
        let registry = FactRegistry::load(&registry_path)?;
        if registry.seed == seed {
            (DocStore::open(root)?, registry)
        } else {
            bail!(
                "store at {} was generated with seed {}, not {seed}; point --root elsewhere",
                root.display(),
                registry.seed
            );
        }
    } else {
        let spec = CorpusSpec::default().with_seed(seed).with_patients(patients);
        generate_corpus(&spec, root)?
    };
    let queries: Vec<BenchmarkQuery> = generate_queries(&registry, per_tier)?;

    let needs_index = systems.iter().any(|s| matches!(s, SystemArg::Rag | SystemArg::RagAf));
    let embedder = HashingEmbedder::default();
    let index = if needs_index { Some(build_index(&store, &embedder)?) } else { None };
    let selector = LexicalSelector;

    let mut summaries = Vec::new();
    for system in &systems {
        let report = match system {
            SystemArg::Manifest => evaluate(
                &ManifestSystem { store: &store, selector: &selector, depth_limit: DEFAULT_DEPTH_LIMIT },
                &queries,
                parallel,
            ),
            SystemArg::ManifestL1 => evaluate(
                &ManifestL1System { store: &store, selector: &selector },
                &queries,
                parallel,
            ),
            SystemArg::ManifestOracle => evaluate(
                &OracleManifestSystem { store: &store, depth_limit: DEFAULT_DEPTH_LIMIT },
                &queries,
                parallel,
            ),
            SystemArg::Rag => {
                let system = RagSystem { index: index.as_ref().expect("index built"), embedder: &embedder, k, filtered: false };
                evaluate(&system as &dyn RetrievalSystem, &queries, parallel)
            }
            SystemArg::RagAf => {
                let system = RagSystem { index: index.as_ref().expect("index built"), embedder: &embedder, k, filtered: true };
                evaluate(&system as &dyn RetrievalSystem, &queries, parallel)
            }
        };
        summaries.push(SystemSummary::from(&report));
    }

    let report = EvalReport {
        seed,
        k,
        patients: store.list_children(&NodePath::root())?.len(),
        queries: queries.len(),
        systems: summaries,
    };
    if let Some(out) = out {
        std::fs::write(&out, report.to_json())?;
        eprintln!("report written to {}", out.display());
    }
    if json {
        println!("{}", report.to_json());
    } else {
        println!("{}", report.render_table());
    }
    Ok(())
}

fn scenario(root: &std::path::Path, action: ScenarioAction) -> Result<()> {
    match action {
        ScenarioAction::List => {
            for name in SCENARIO_NAMES {
                println!("{name}");
            }
        }
        ScenarioAction::Run { name, fault, config } => {
            let mut cfg = match config {
                Some(path) => ScenarioConfig::load(&path)?,
                None => ScenarioConfig::default(),
            };
            if let Some(f) = fault {
                cfg.fault = Some(
                    FaultPlan::parse(&f)
                        .with_context(|| format!("unknown fault plan `{f}`"))?,
                );
            }
            let report = run_scenario(&name, root, &cfg)?;
            print!("{}", report.render_text());
            if !report.passed {
                bail!("scenario {name} failed its assertions");
            }
        }
    }
    Ok(())
}

fn audit(root: &std::path::Path, since: u64, patient: Option<String>) -> Result<()> {
    let store = DocStore::open(root)?;
    let scope = match &patient {
        Some(p) => Some(NodePath::patient(p).context("bad --patient")?),
        None => None,
    };
    for event in store.mutation_log(since)? {
        if let Some(scope) = &scope {
            if !scope.contains(&event.doc_id) {
                continue;
            }
        }
        println!("{}", serde_json::to_string(&event)?);
    }
    Ok(())
}

fn lease_status(root: &std::path::Path, json: bool) -> Result<()> {
    let records = LeaseManager::status(root)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&records)?);
        return Ok(());
    }
    if records.is_empty() {
        println!("no live leases");
        return Ok(());
    }
    for r in records {
        println!(
            "{:<12} holder={:<20} acquired_at={} last_heartbeat={} ttl={}s",
            r.patient, r.holder, r.acquired_at, r.last_heartbeat, r.ttl_seconds
        );
    }
    Ok(())
}
