//! Command-line orchestration: every subcommand is a pure function of its
//! inputs, flags and seed, and records a run manifest next to its outputs.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::io::{read_cohort_dir, read_monthly_table_file, write_cohort_dir, write_daily, write_monthly};
use crate::data::Cohort;
use crate::datagen::{generate_cohort, CohortConfig};
use crate::error::{Error, Result};
use crate::explain::{explain_cohort, read_bundles, write_bundles, Generator};
use crate::forecast::{builtin_pipeline, run_pipeline, ForecastSet, PipelineSpec, BUILTIN_PIPELINES};
use crate::preprocess::prepare;
use crate::review::{
    aggregate, pack_review, select_review_meters, AggregateTable, AppState, BlindingKey, FinalistInput, PackOptions,
    ResponseStore, ReviewPacket, REVIEW_METERS,
};
use crate::scoring::{final_score, leaderboard, render_final_scores, render_leaderboard, total_rae, FinalScoreConfig, LeaderboardRow, MeanReference, ScoreReport};

/// Environment variable holding the log filter.
pub const LOG_ENV: &str = "METERBENCH_LOG";
pub const DEFAULT_SEED: u64 = 42;
/// Finalists explained and reviewed when no pipeline is named.
pub const DEFAULT_FINALISTS: [&str; 3] = ["kb", "dr", "yc"];

pub const SCORES_FILE: &str = "report.json";
pub const PACKET_FILE: &str = "packet.json";
pub const KEY_FILE: &str = "blinding_key.json";
pub const RESPONSES_FILE: &str = "responses.jsonl";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_MD: &str = "summary.md";

pub fn predictions_file(pipeline: &str) -> String {
    format!("predictions_{pipeline}.csv")
}

pub fn explanations_file(pipeline: &str) -> String {
    format!("explanations_{pipeline}.jsonl")
}

#[derive(Debug, Parser)]
#[command(name = "meterbench", version, about = "Smart-meter forecasting benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort with forecast-year truth.
    Gen(GenArgs),
    /// Write the daily and monthly views a pipeline's preprocessing produces.
    Prep(PrepArgs),
    /// Run pipelines and write forecast-year predictions.
    Predict(PredictArgs),
    /// Score predictions against the truth file.
    Score(ScoreArgs),
    /// Generate explanation bundles for pipeline predictions.
    Explain(ExplainArgs),
    /// Assemble a blinded review packet and its key.
    Pack(PackArgs),
    /// Serve a review packet over HTTP.
    Serve(ServeArgs),
    /// Combine scores and review aggregates into the final tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Output cohort directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cohort configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the meter count (the availability profile is rescaled).
    #[arg(long)]
    pub meters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "naive")]
    pub pipeline: String,
    /// Pipeline spec (JSON) used instead of a built-in.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Built-in pipeline ids (repeatable); `all` runs every built-in.
    #[arg(long = "pipeline", default_value = "naive")]
    pub pipelines: Vec<String>,
    /// Pipeline spec (JSON) run instead of the built-ins.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Run directory holding the prediction files; the report is written here.
    #[arg(long)]
    pub out: PathBuf,
    /// Pipelines to score; defaults to every prediction file in the run directory.
    #[arg(long = "pipeline")]
    pub pipelines: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Pipelines to explain; defaults to the three finalists.
    #[arg(long = "pipeline")]
    pub pipelines: Vec<String>,
    /// Generator for every pipeline; by default each finalist has its own.
    #[arg(long)]
    pub generator: Option<Generator>,
    /// Explain only the seeded review sample of this many meters.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PackArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "pipeline")]
    pub pipelines: Vec<String>,
    #[arg(long, default_value_t = REVIEW_METERS)]
    pub meters: usize,
    #[arg(long, default_value = "review")]
    pub packet_id: String,
    /// Leave the forecast-year truth out of the chart series.
    #[arg(long)]
    pub hide_truth: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Packet to serve; defaults to the run directory's packet.
    #[arg(long)]
    pub packet: Option<PathBuf>,
    /// Run directory holding the response log.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory with the review UI bundle.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Final-score weights (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub pipeline_ids: Vec<String>,
    pub config_sha256: Option<String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn file_name(command: &str) -> String {
        format!("manifest.{command}.json")
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(open(path)?))?)
    }

    /// Re-hashes the recorded outputs; returns the paths that differ.
    pub fn changed_outputs(&self) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for f in &self.outputs {
            if sha256_file(&f.path)? != f.sha256 {
                out.push(f.path.clone());
            }
        }
        Ok(out)
    }
}

/// Scores of every pipeline, as written by `score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreFile {
    pub leaderboard: Vec<LeaderboardRow>,
    pub reports: Vec<ScoreReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRow {
    pub pipeline_id: String,
    pub total_rae: f64,
    pub criterion_means: [f64; 10],
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub leaderboard: Vec<LeaderboardRow>,
    pub interpretability: Option<AggregateTable>,
    pub final_scores: Vec<FinalRow>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|_| Error::MissingInput(path.to_path_buf()))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = open(path)?;
    let mut h = Sha256::new();
    std::io::copy(&mut file, &mut h)?;
    Ok(hex::encode(h.finalize()))
}

fn digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.clone(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(open(path)?))?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

struct Run<'a> {
    command: &'static str,
    args: &'a [String],
    seed: Option<u64>,
    pipelines: Vec<String>,
    config: Option<&'a Path>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run<'_> {
    fn finish(self, dir: &Path) -> Result<()> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command.to_string(),
            args: self.args.to_vec(),
            seed: self.seed,
            pipeline_ids: self.pipelines,
            config_sha256: self.config.map(sha256_file).transpose()?,
            inputs: digests(&self.inputs)?,
            outputs: digests(&self.outputs)?,
        };
        write_json(&dir.join(RunManifest::file_name(self.command)), &manifest)
    }
}

fn cohort_inputs(data: &Path) -> Vec<PathBuf> {
    use crate::data::io::{READINGS_FILE, SURVEY_FILE, TRUTH_FILE, WEATHER_FILE};
    [READINGS_FILE, WEATHER_FILE, SURVEY_FILE, TRUTH_FILE]
        .iter()
        .map(|f| data.join(f))
        .filter(|p| p.exists())
        .collect()
}

fn load_cohort(data: &Path) -> Result<Cohort> {
    for f in [crate::data::io::READINGS_FILE, crate::data::io::WEATHER_FILE, crate::data::io::SURVEY_FILE] {
        if !data.join(f).exists() {
            return Err(Error::MissingInput(data.join(f)));
        }
    }
    read_cohort_dir(data)
}

fn resolve_pipelines(names: &[String]) -> Result<Vec<PipelineSpec>> {
    let mut out = Vec::new();
    for n in names {
        if n == "all" {
            for b in BUILTIN_PIPELINES {
                out.push(builtin_pipeline(b)?);
            }
        } else {
            out.push(builtin_pipeline(n)?);
        }
    }
    Ok(out)
}

fn or_finalists(names: &[String]) -> Vec<String> {
    if names.is_empty() {
        DEFAULT_FINALISTS.iter().map(|s| s.to_string()).collect()
    } else {
        names.to_vec()
    }
}

/// Generator paired with a finalist when none is requested.
pub fn default_generator(pipeline: &str) -> Generator {
    match pipeline {
        "dr" => Generator::Rules,
        "yc" => Generator::Fuzzy,
        _ => Generator::Shap,
    }
}

fn read_forecast(out: &Path, pipeline: &str) -> Result<ForecastSet> {
    let (_, table) = read_monthly_table_file(&out.join(predictions_file(pipeline)))?;
    ForecastSet::new(pipeline, table)
}

fn gen(a: &GenArgs, args: &[String]) -> Result<()> {
    let mut config: CohortConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => CohortConfig::default(),
    };
    if let Some(n) = a.meters {
        config = CohortConfig {
            seed: config.seed,
            ..CohortConfig::small(n, config.seed)
        };
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    let cohort = generate_cohort(&config)?;
    write_cohort_dir(&a.out, &cohort)?;
    Run {
        command: "gen",
        args,
        seed: Some(config.seed),
        pipelines: vec![],
        config: a.config.as_deref(),
        inputs: a.config.iter().cloned().collect(),
        outputs: cohort_inputs(&a.out),
    }
    .finish(&a.out)
}

fn prep(a: &PrepArgs, args: &[String]) -> Result<()> {
    let spec: PipelineSpec = match &a.config {
        Some(p) => read_json(p)?,
        None => builtin_pipeline(&a.pipeline)?,
    };
    let cohort = load_cohort(&a.data)?;
    let prepared = prepare(&cohort, &spec.steps)?;
    fs::create_dir_all(&a.out)?;
    let daily = a.out.join(format!("daily_{}.csv", spec.id));
    let monthly = a.out.join(format!("monthly_{}.csv", spec.id));
    write_daily(File::create(&daily)?, &prepared.daily)?;
    write_monthly(File::create(&monthly)?, &prepared.monthly)?;
    Run {
        command: "prep",
        args,
        seed: None,
        pipelines: vec![spec.id],
        config: a.config.as_deref(),
        inputs: cohort_inputs(&a.data),
        outputs: vec![daily, monthly],
    }
    .finish(&a.out)
}

fn predict(a: &PredictArgs, args: &[String]) -> Result<()> {
    let specs = match &a.config {
        Some(p) => vec![read_json::<PipelineSpec>(p)?],
        None => resolve_pipelines(&a.pipelines)?,
    };
    let cohort = load_cohort(&a.data)?;
    fs::create_dir_all(&a.out)?;
    let mut outputs = Vec::new();
    for spec in &specs {
        log::info!("running pipeline {}", spec.id);
        let forecast = run_pipeline(&cohort, spec, a.seed)?;
        let path = a.out.join(predictions_file(&spec.id));
        forecast.write_csv(File::create(&path)?)?;
        outputs.push(path);
    }
    Run {
        command: "predict",
        args,
        seed: Some(a.seed),
        pipelines: specs.iter().map(|s| s.id.clone()).collect(),
        config: a.config.as_deref(),
        inputs: cohort_inputs(&a.data),
        outputs,
    }
    .finish(&a.out)
}

fn discovered_pipelines(out: &Path) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(out).map_err(|_| Error::MissingInput(out.to_path_buf()))? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_prefix("predictions_").and_then(|s| s.strip_suffix(".csv")) {
            ids.push(id.to_string());
        }
    }
    ids.sort();
    Ok(ids)
}

fn score(a: &ScoreArgs, args: &[String]) -> Result<()> {
    let truth_path = a.data.join(crate::data::io::TRUTH_FILE);
    let (_, truth) = read_monthly_table_file(&truth_path)?;
    let ids = if a.pipelines.is_empty() {
        discovered_pipelines(&a.out)?
    } else {
        a.pipelines.clone()
    };
    if ids.is_empty() {
        return Err(Error::MissingInput(a.out.join(predictions_file("*"))));
    }
    let mut entries = Vec::new();
    let mut inputs = vec![truth_path];
    for id in &ids {
        let forecast = read_forecast(&a.out, id)?;
        let mut report = total_rae(&forecast.predictions, &truth, MeanReference::default())?;
        report.pipeline_id = Some(id.clone());
        entries.push((id.clone(), report));
        inputs.push(a.out.join(predictions_file(id)));
    }
    let file = ScoreFile {
        leaderboard: leaderboard(&entries),
        reports: entries.into_iter().map(|(_, r)| r).collect(),
    };
    let path = a.out.join(SCORES_FILE);
    write_json(&path, &file)?;
    Run {
        command: "score",
        args,
        seed: None,
        pipelines: ids,
        config: None,
        inputs,
        outputs: vec![path],
    }
    .finish(&a.out)
}

fn explain(a: &ExplainArgs, args: &[String]) -> Result<()> {
    let cohort = load_cohort(&a.data)?;
    let pipelines = or_finalists(&a.pipelines);
    let meters = a.sample.map(|n| select_review_meters(&cohort, n, a.seed)).transpose()?;
    let mut inputs = cohort_inputs(&a.data);
    let mut outputs = Vec::new();
    for id in &pipelines {
        let forecast = read_forecast(&a.out, id)?;
        inputs.push(a.out.join(predictions_file(id)));
        let generator = a.generator.unwrap_or_else(|| default_generator(id));
        log::info!("explaining {id} with the {generator} generator");
        let bundles = explain_cohort(&cohort, generator, Some(&forecast.predictions), meters.as_deref(), a.seed)?;
        let path = a.out.join(explanations_file(id));
        let mut w = BufWriter::new(File::create(&path)?);
        write_bundles(&mut w, &bundles)?;
        w.flush()?;
        outputs.push(path);
    }
    Run {
        command: "explain",
        args,
        seed: Some(a.seed),
        pipelines,
        config: None,
        inputs,
        outputs,
    }
    .finish(&a.out)
}

fn pack(a: &PackArgs, args: &[String]) -> Result<()> {
    let cohort = load_cohort(&a.data)?;
    let pipelines = or_finalists(&a.pipelines);
    let mut inputs = cohort_inputs(&a.data);
    let mut finalists = Vec::new();
    for id in &pipelines {
        let path = a.out.join(explanations_file(id));
        let bundles = read_bundles(BufReader::new(open(&path)?))?;
        inputs.push(a.out.join(predictions_file(id)));
        inputs.push(path);
        finalists.push(FinalistInput {
            forecast: read_forecast(&a.out, id)?,
            bundles,
        });
    }
    let meters = select_review_meters(&cohort, a.meters, a.seed)?;
    let (packet, key) = pack_review(
        &a.packet_id,
        &cohort,
        &finalists,
        &meters,
        PackOptions {
            seed: a.seed,
            reveal_truth: !a.hide_truth,
        },
    )?;
    let packet_path = a.out.join(PACKET_FILE);
    let key_path = a.out.join(KEY_FILE);
    write_json(&packet_path, &packet)?;
    write_json(&key_path, &key)?;
    Run {
        command: "pack",
        args,
        seed: Some(a.seed),
        pipelines,
        config: None,
        inputs,
        outputs: vec![packet_path, key_path],
    }
    .finish(&a.out)
}

fn serve_cmd(a: &ServeArgs, args: &[String]) -> Result<()> {
    let packet_path = a.packet.clone().unwrap_or_else(|| a.out.join(PACKET_FILE));
    let packet = ReviewPacket::read(&packet_path)?;
    fs::create_dir_all(&a.out)?;
    let store = ResponseStore::open(&a.out.join(RESPONSES_FILE))?;
    Run {
        command: "serve",
        args,
        seed: None,
        pipelines: vec![],
        config: None,
        inputs: vec![packet_path],
        outputs: vec![],
    }
    .finish(&a.out)?;
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| Error::InvalidParameter(format!("bad address: {e}")))?;
    let state = AppState {
        packet: Arc::new(packet),
        store: Arc::new(store),
    };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(crate::review::serve(addr, state, a.static_dir.clone()))?;
    Ok(())
}

fn report(a: &ReportArgs, args: &[String]) -> Result<()> {
    let scores_path = a.out.join(SCORES_FILE);
    let scores: ScoreFile = read_json(&scores_path)?;
    let config: FinalScoreConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => FinalScoreConfig::default(),
    };
    let mut inputs = vec![scores_path];
    let (packet_path, key_path, responses_path) =
        (a.out.join(PACKET_FILE), a.out.join(KEY_FILE), a.out.join(RESPONSES_FILE));
    let mut interpretability = None;
    let mut final_scores = Vec::new();
    if packet_path.exists() && key_path.exists() && responses_path.exists() {
        let packet = ReviewPacket::read(&packet_path)?;
        let key = BlindingKey::read(&key_path)?;
        let responses = ResponseStore::open(&responses_path)?.snapshot();
        inputs.extend([packet_path, key_path, responses_path]);
        match aggregate(&packet, &responses) {
            Ok(table) => {
                let table = table.unblind(&key)?;
                for row in &table.rows {
                    let Some(entry) = scores.leaderboard.iter().find(|r| r.pipeline_id == row.finalist) else {
                        continue;
                    };
                    final_scores.push(FinalRow {
                        pipeline_id: row.finalist.clone(),
                        total_rae: entry.total_rae,
                        criterion_means: row.means,
                        score: final_score(entry.total_rae, &row.means, config)?,
                    });
                }
                final_scores.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.pipeline_id.cmp(&b.pipeline_id)));
                interpretability = Some(table);
            }
            Err(Error::NoResponses(_)) => log::warn!("no review responses yet; final scores omitted"),
            Err(e) => return Err(e),
        }
    }
    let mut md = String::from("## Prediction scores\n\n");
    md.push_str(&render_leaderboard(&scores.leaderboard));
    if let Some(t) = &interpretability {
        md.push_str("\n## Interpretability scores\n\n");
        md.push_str(&t.render());
        md.push_str("\n## Final scores\n\n");
        let rows: Vec<(String, f64)> = final_scores.iter().map(|r| (r.pipeline_id.clone(), r.score)).collect();
        md.push_str(&render_final_scores(&rows));
    }
    let md_path = a.out.join(SUMMARY_MD);
    let json_path = a.out.join(SUMMARY_JSON);
    fs::write(&md_path, md)?;
    write_json(
        &json_path,
        &Summary {
            leaderboard: scores.leaderboard,
            interpretability,
            final_scores,
        },
    )?;
    Run {
        command: "report",
        args,
        seed: None,
        pipelines: vec![],
        config: a.config.as_deref(),
        inputs,
        outputs: vec![md_path, json_path],
    }
    .finish(&a.out)
}

/// Runs one command line (`args[0]` is the program name).
pub fn run(args: &[String]) -> Result<()> {
    let cli = Cli::try_parse_from(args).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    execute(&cli, args)
}

pub fn execute(cli: &Cli, args: &[String]) -> Result<()> {
    let args = args.get(1..).unwrap_or_default();
    match &cli.command {
        Command::Gen(a) => gen(a, args),
        Command::Prep(a) => prep(a, args),
        Command::Predict(a) => predict(a, args),
        Command::Score(a) => score(a, args),
        Command::Explain(a) => explain(a, args),
        Command::Pack(a) => pack(a, args),
        Command::Serve(a) => serve_cmd(a, args),
        Command::Report(a) => report(a, args),
    }
}

pub fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info")).try_init();
}
