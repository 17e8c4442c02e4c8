//! Benchmark harness: synthetic corpus generation, tiered query generation,
//! the metrics engine, and the systems under comparison.

mod corpus;
mod fixture;
mod metrics;
mod queries;
mod report;
mod systems;

pub use corpus::{generate_corpus, CorpusError, CorpusSpec, DocMix, FactRegistry, PlantedFact};
pub use fixture::{
    build_trace_fixture, FIXTURE_ADMISSION_1, FIXTURE_ADMISSION_2, FIXTURE_PATIENT,
    FIXTURE_QUERY_TEXT,
};
pub use metrics::{aggregate, evaluate, Metrics, RetrievalOutcome, SystemReport};
pub use queries::{generate_queries, BenchmarkQuery, QueryGenError};
pub use report::{EvalReport, SystemSummary};
pub use systems::{
    ManifestL1System, ManifestSystem, OracleManifestSystem, RagSystem, RetrievalSystem,
};
