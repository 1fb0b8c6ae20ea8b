//! Synthetic benchmarks, the five-system runner, and latency/accuracy
//! metrology over event logs.
//!
//! Latencies are measured against the hypothesis's own word times and are
//! pooled over all words of all streams.

mod bench;
mod metrics;
mod run;
mod sweep;

pub use bench::{generate_benchmark, BenchStream, Benchmark, BenchmarkSpec, LEXICON_FILE, LM_FILE, SPEC_FILE};
pub use metrics::{
    build_report, commitment_latencies, replay, score_log, stream_hypotheses, word_latencies, Histogram, LatencyReport,
    RunLog, StreamSummary, VariantReport, HISTOGRAM_BIN, HISTOGRAM_RANGE, VERSION,
};
pub use run::{run_variant, ChunkRecord, RunConfig, RunOutput, StreamRun, Variant, VariantConfig};
pub use sweep::{
    calibrate_cost_model, flush_sweep, max_chunk_cost, max_emission_gap, overall_rtf, references, run_suite,
    suite_report, sweep_table, Calibration, SweepRow,
};
