//! `streamlat`: generate benchmarks, run decoder variants, score logs.
//!
//! Exit codes: 0 success, 2 usage error, 3 input or I/O error.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use streamlat::harness::{
    build_report, calibrate_cost_model, flush_sweep, generate_benchmark, run_variant, sweep_table, BenchStream,
    Benchmark, BenchmarkSpec, RunConfig, RunLog, Variant, VariantConfig,
};
use streamlat::ingest::{
    frames_from_wav, read_stream, read_wav_energies, ClockMode, StreamMeta, DEFAULT_CHUNK_FRAMES, DEFAULT_ENERGY_FLOOR,
};
use streamlat::{CostModel, Transcript};

#[derive(Debug, Parser)]
#[command(name = "streamlat", version, about = "Streaming recognition latency experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic benchmark directory.
    Synth(SynthArgs),
    /// Decode a benchmark with one system variant and write its event log.
    Run(RunArgs),
    /// Score event logs against reference transcripts.
    Report(ReportArgs),
    /// Run Portion with a list of flush thresholds.
    Sweep(SweepArgs),
    /// Fit the per-token cost so fixed-beam decoding runs at a target RTF.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
struct SpecArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    streams: usize,
    /// words per stream
    #[arg(long, default_value_t = 600)]
    words: usize,
    #[arg(long, default_value_t = 200)]
    vocab: usize,
    /// acoustic score noise
    #[arg(long, default_value_t = 1.0)]
    sigma: f32,
    /// share of frames inside hard regions
    #[arg(long, default_value_t = 0.10)]
    hard_fraction: f64,
}

impl SpecArgs {
    fn spec(&self) -> BenchmarkSpec {
        BenchmarkSpec {
            seed: self.seed,
            n_streams: self.streams,
            words_per_stream: self.words,
            vocab_size: self.vocab,
            sigma: self.sigma,
            hard_fraction: self.hard_fraction,
            ..BenchmarkSpec::default()
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Baseline1,
    Baseline2,
    Portion,
    Update,
    UpdateNa,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Baseline1 => Variant::Baseline1,
            VariantArg::Baseline2 => Variant::Baseline2,
            VariantArg::Portion => Variant::Portion,
            VariantArg::Update => Variant::Update,
            VariantArg::UpdateNa => Variant::UpdateNa,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClockArg {
    Virtual,
    Wall,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[arg(long)]
    bench: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CHUNK_FRAMES)]
    chunk_frames: usize,
    /// nominal beam width; defaults to the library setting
    #[arg(long)]
    beam: Option<f64>,
    #[arg(long, value_enum, default_value_t = ClockArg::Virtual)]
    clock: ClockArg,
}

impl DecodeArgs {
    fn config(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig {
            chunk_frames: self.chunk_frames,
            clock: match self.clock {
                ClockArg::Virtual => ClockMode::Virtual,
                ClockArg::Wall => ClockMode::Wall,
            },
            ..RunConfig::default()
        };
        if let Some(beam) = self.beam {
            cfg.search.beam = beam;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    variant: VariantArg,
    #[command(flatten)]
    decode: DecodeArgs,
    /// seconds of silence-free speech before partial output is forced
    #[arg(long)]
    flush_threshold: Option<f64>,
    /// decode a single score stream instead of the whole benchmark
    #[arg(long)]
    scores: Option<PathBuf>,
    /// take frame energies from this recording; needs `--scores`
    #[arg(long, requires = "scores")]
    wav: Option<PathBuf>,
    /// event log destination; standard output when absent
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// glob matching the event logs
    #[arg(long)]
    logs: String,
    /// directory of `<stream>.ref.tsv` transcripts
    #[arg(long)]
    refs: PathBuf,
    /// write the word-latency histogram of `--hist-variant`
    #[arg(long)]
    hist: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = VariantArg::Update, requires = "hist")]
    hist_variant: VariantArg,
    /// machine-readable report destination
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// comma-separated seconds; `inf` disables the flush
    #[arg(long, value_delimiter = ',', value_parser = parse_threshold, default_value = "1,2,3,4,5,inf")]
    thresholds: Vec<f64>,
    #[command(flatten)]
    decode: DecodeArgs,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// fixed chunk overhead in seconds
    #[arg(long, default_value_t = 0.01)]
    c0: f64,
    #[arg(long, default_value_t = 1.0)]
    target_rtf: f64,
}

fn parse_threshold(s: &str) -> Result<f64, String> {
    let t: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    if t > 0.0 {
        Ok(t)
    } else {
        Err(format!("threshold must be positive, got {s}"))
    }
}

enum Failure {
    Usage(anyhow::Error),
    Input(anyhow::Error),
}

type Outcome = Result<(), Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Run(a) => run(&a),
        Command::Report(a) => report(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Calibrate(a) => calibrate(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("streamlat: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Input(e)) => {
            eprintln!("streamlat: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn synth(a: &SynthArgs) -> Outcome {
    let spec = a.spec.spec();
    spec.validate().map_err(usage)?;
    let bench = generate_benchmark(&spec).map_err(usage)?;
    bench
        .write_dir(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))
        .map_err(input)?;
    eprintln!(
        "wrote {} streams (seed {}) to {}",
        bench.streams.len(),
        spec.seed,
        a.out.display()
    );
    Ok(())
}

fn load_bench(dir: &Path) -> Result<Benchmark, Failure> {
    Benchmark::load_dir(dir)
        .with_context(|| format!("loading benchmark {}", dir.display()))
        .map_err(input)
}

/// The benchmark reduced to one stream read from `scores`, with energies
/// optionally measured from `wav`.
fn single_stream(mut bench: Benchmark, scores: &Path, wav: Option<&Path>) -> anyhow::Result<Benchmark> {
    let file = File::open(scores).with_context(|| format!("opening {}", scores.display()))?;
    let mut data = read_stream(BufReader::new(file)).with_context(|| format!("reading {}", scores.display()))?;
    if let Some(wav) = wav {
        let energies = read_wav_energies(wav, data.frame_ms, DEFAULT_ENERGY_FLOOR)
            .with_context(|| format!("reading {}", wav.display()))?;
        data = frames_from_wav(&energies, data)?;
    }
    let meta_path = StreamMeta::path_for(scores);
    let (meta, reference) = if meta_path.exists() {
        let meta = StreamMeta::read(&meta_path)?;
        let ref_path = scores.parent().unwrap_or(Path::new(".")).join(&meta.reference);
        let reference = match File::open(&ref_path) {
            Ok(f) => Transcript::read(BufReader::new(f))?,
            Err(_) => Transcript::default(),
        };
        (meta, reference)
    } else {
        let name = scores
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "stream".into());
        let meta = StreamMeta {
            reference: format!("{name}.ref.tsv"),
            name,
            seed: bench.spec.seed,
            frame_count: data.frames.len() as u64,
        };
        (meta, Transcript::default())
    };
    bench.streams = vec![BenchStream {
        meta,
        data,
        reference,
        truth_segments: Vec::new(),
        hard_regions: Vec::new(),
        alignment: Vec::new(),
    }];
    Ok(bench)
}

fn run(a: &RunArgs) -> Outcome {
    let cfg = a.decode.config().map_err(usage)?;
    let mut variant = VariantConfig::of(a.variant.into());
    if let Some(t) = a.flush_threshold {
        variant = variant.with_flush(t).map_err(usage)?;
    }
    let mut bench = load_bench(&a.decode.bench)?;
    if let Some(scores) = &a.scores {
        bench = single_stream(bench, scores, a.wav.as_deref()).map_err(input)?;
    }
    let out = run_variant(&variant, &bench, &cfg).map_err(input)?;
    let log = RunLog::from_run(&out);
    match &a.log {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("creating {}", path.display()))
                .map_err(input)?;
            log.write(BufWriter::new(file)).map_err(input)?;
            eprintln!("{}: {} events to {}", variant.variant, log.events.len(), path.display());
        }
        None => log.write(std::io::stdout().lock()).map_err(input)?,
    }
    Ok(())
}

fn read_refs(dir: &Path) -> anyhow::Result<BTreeMap<String, Transcript>> {
    let mut refs = BTreeMap::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        if let Some(stem) = name.strip_suffix(".ref.tsv") {
            let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
            let t = Transcript::read(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
            refs.insert(stem.to_string(), t);
        }
    }
    if refs.is_empty() {
        return Err(anyhow!("no .ref.tsv files in {}", dir.display()));
    }
    Ok(refs)
}

fn report(a: &ReportArgs) -> Outcome {
    let paths = glob::glob(&a.logs).map_err(usage)?;
    let mut logs = Vec::new();
    for p in paths {
        let p = p.map_err(input)?;
        let file = File::open(&p)
            .with_context(|| format!("opening {}", p.display()))
            .map_err(input)?;
        let log = RunLog::read(BufReader::new(file))
            .with_context(|| format!("reading {}", p.display()))
            .map_err(input)?;
        logs.push(log);
    }
    if logs.is_empty() {
        return Err(input(anyhow!("no logs match {}", a.logs)));
    }
    let refs = read_refs(&a.refs).map_err(input)?;
    let rep = build_report(&logs, &refs).map_err(input)?;
    print!("{}", rep.to_text());
    if let Some(path) = &a.json {
        fs::write(path, rep.to_json())
            .with_context(|| format!("writing {}", path.display()))
            .map_err(input)?;
    }
    if let Some(path) = &a.hist {
        let name = Variant::from(a.hist_variant).name();
        let v = rep
            .variant(name)
            .ok_or_else(|| input(anyhow!("no {name} log among the inputs")))?;
        fs::write(path, v.histogram.to_text())
            .with_context(|| format!("writing {}", path.display()))
            .map_err(input)?;
    }
    Ok(())
}

fn sweep(a: &SweepArgs) -> Outcome {
    let cfg = a.decode.config().map_err(usage)?;
    let bench = load_bench(&a.decode.bench)?;
    let rows = flush_sweep(&bench, &cfg, &a.thresholds).map_err(input)?;
    let mut out = std::io::stdout().lock();
    write!(out, "{}", sweep_table(&rows)).map_err(input)?;
    Ok(())
}

fn calibrate(a: &CalibrateArgs) -> Outcome {
    let spec = a.spec.spec();
    spec.validate().map_err(usage)?;
    CostModel::new(a.c0, 1.0).map_err(usage)?;
    let bench = generate_benchmark(&spec).map_err(usage)?;
    let cal = calibrate_cost_model(&bench, &RunConfig::default(), a.c0, a.target_rtf).map_err(usage)?;
    println!("c0\t{}", cal.model.c0);
    println!("c1\t{:e}", cal.model.c1);
    println!("nominal_rtf\t{:.4}", cal.nominal_rtf);
    println!("hard_rtf\t{:.4}", cal.hard_rtf);
    Ok(())
}
