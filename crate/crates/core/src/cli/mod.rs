//! Command-line orchestration: harvest, extract, evaluate, or all three.
//!
//! Every stage reads and writes plain files in the output directory, so a
//! later stage can be rerun on its own.

mod config;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::chains::{Pipeline, PipelineOutput, PromptSet};
use crate::evalkit::{emit_report, evaluate_all, load_gold, Dataset, EvalError, EvalReport, GoldSet};
use crate::harvest::{harvest_sites, load_site_config, Article, HarvestRun, SiteConfig};
use crate::llmgate::{ChatProvider, HostedKind, HostedProvider, LlmError, LlmSettings, ScriptedProvider};
use crate::netfetch::{Clock, Fetcher, FixtureTransport, HttpTransport, ManualClock, SystemClock, Transport};
use crate::records::{from_csv, from_jsonl, to_csv, to_jsonl};

pub use config::{FetchOverrides, ProviderName, RunConfig};

pub const INDEX_FILE: &str = "index.jsonl";
pub const ARTICLES_FILE: &str = "articles.jsonl";
pub const HARVEST_WARNINGS_FILE: &str = "harvest_warnings.jsonl";
pub const DATASET_FILE: &str = "dataset.csv";
pub const EXCLUDED_FILE: &str = "excluded.jsonl";
pub const EXTRACT_WARNINGS_FILE: &str = "extract_warnings.jsonl";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const REPORT_CSV_FILE: &str = "report.csv";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("harvest failed: {0}")]
    Harvest(String),
    #[error("provider failure: {0}")]
    Provider(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Harvest(_) => 2,
            CliError::Provider(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::InvalidSettings(_) => CliError::Validation(e.to_string()),
            other => CliError::Provider(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "roadwatch", version, about = "Road-accident news to structured dataset")]
pub struct Cli {
    /// Run config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub provider: Option<ProviderName>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Output directory for all artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Gold-standard annotations (JSON).
    #[arg(long, global = true)]
    pub gold: Option<PathBuf>,
    /// Script file for the scripted provider.
    #[arg(long, global = true)]
    pub script: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crawl listing pages and fetch article bodies.
    Harvest,
    /// Triage and extract records from harvested articles.
    Extract {
        /// Articles JSONL; defaults to the one in the output directory.
        #[arg(long)]
        articles: Option<PathBuf>,
    },
    /// Score one or more datasets against the gold standard.
    Evaluate {
        /// Dataset CSV, once per model; defaults to the one in the output
        /// directory.
        #[arg(long = "dataset")]
        datasets: Vec<PathBuf>,
    },
    /// Harvest, extract, and evaluate when a gold file is configured.
    Run,
}

impl Cli {
    /// The config file, if any, with command-line flags layered on top.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = self.provider {
            cfg.provider = Some(p);
        }
        if let Some(m) = &self.model {
            match &mut cfg.settings {
                Some(s) => s.model = m.clone(),
                None => cfg.settings = Some(LlmSettings::new(m)),
            }
        }
        if let Some(o) = &self.out {
            cfg.output_dir = Some(o.clone());
        }
        if let Some(g) = &self.gold {
            cfg.gold_path = Some(g.clone());
        }
        if let Some(s) = &self.script {
            cfg.script = Some(s.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Write via a temporary file in the same directory and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn load_sites(cfg: &RunConfig) -> Result<Vec<SiteConfig>, CliError> {
    if cfg.sites.is_empty() {
        return Err(CliError::Validation("no site configs given".into()));
    }
    cfg.sites
        .iter()
        .map(|p| {
            load_site_config(&read_input(p)?)
                .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))
        })
        .collect()
}

/// Transport and clock implied by the config.
pub fn build_fetcher(cfg: &RunConfig) -> Result<Fetcher, CliError> {
    let transport: Arc<dyn Transport> = match &cfg.fixtures_dir {
        Some(dir) => Arc::new(FixtureTransport::new(dir)),
        None => Arc::new(HttpTransport::new().map_err(|e| CliError::Io(e.to_string()))?),
    };
    let clock: Arc<dyn Clock> = match cfg.frozen_clock {
        Some(at) => Arc::new(ManualClock::frozen_wall(at)),
        None => Arc::new(SystemClock::new()),
    };
    Fetcher::new(transport, clock, cfg.fetch.apply()).map_err(|e| CliError::Validation(e.to_string()))
}

pub fn build_provider(cfg: &RunConfig) -> Result<Box<dyn ChatProvider>, CliError> {
    let kind = match cfg.provider {
        None => return Err(CliError::Validation("no provider configured".into())),
        Some(ProviderName::Scripted) => {
            let path = cfg
                .script
                .as_ref()
                .ok_or_else(|| CliError::Validation("the scripted provider needs a script path".into()))?;
            let provider = ScriptedProvider::from_json(&read_input(path)?)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            return Ok(Box::new(provider));
        }
        Some(ProviderName::Openai) => HostedKind::OpenAi,
        Some(ProviderName::Groq) => HostedKind::Groq,
    };
    Ok(Box::new(HostedProvider::from_env(kind, cfg.base_url.as_deref())?))
}

pub fn load_prompts(cfg: &RunConfig) -> Result<PromptSet, CliError> {
    match &cfg.prompts_dir {
        Some(dir) => PromptSet::load_dir(dir).map_err(|e| CliError::Validation(format!("{}: {e}", dir.display()))),
        None => Ok(PromptSet::builtin()),
    }
}

fn settings(cfg: &RunConfig) -> Result<LlmSettings, CliError> {
    let s = cfg
        .settings
        .clone()
        .ok_or_else(|| CliError::Validation("no model configured; pass --model or settings.model".into()))?;
    s.validate()?;
    Ok(s)
}

/// Harvest all configured sites and write the index, articles and warnings.
/// Fails when no article body could be fetched.
pub fn cmd_harvest(cfg: &RunConfig, fetcher: &Fetcher) -> Result<HarvestRun, CliError> {
    let sites = load_sites(cfg)?;
    let run = harvest_sites(&sites, fetcher, cfg.concurrency_bound);
    let out = cfg.output_dir();
    write_atomic(&out.join(INDEX_FILE), &to_jsonl(&run.index))?;
    write_atomic(&out.join(ARTICLES_FILE), &to_jsonl(&run.articles))?;
    write_atomic(&out.join(HARVEST_WARNINGS_FILE), &to_jsonl(&run.warnings))?;
    log::info!(
        "harvested {} articles from {} index entries, {} warnings",
        run.articles.len(),
        run.index.len(),
        run.warnings.len()
    );
    if run.articles.is_empty() {
        let kinds: std::collections::BTreeSet<&str> = run.warnings.iter().map(|w| w.kind.as_str()).collect();
        return Err(CliError::Harvest(format!(
            "no articles harvested (warnings: {})",
            kinds.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(run)
}

/// Triage and extract, then write the dataset, exclusions and field notes.
pub fn cmd_extract(
    cfg: &RunConfig,
    articles: &[Article],
    provider: &dyn ChatProvider,
) -> Result<PipelineOutput, CliError> {
    let settings = settings(cfg)?;
    let prompts = load_prompts(cfg)?;
    let output = Pipeline {
        provider,
        settings: &settings,
        prompts: &prompts,
        normalizer: &cfg.normalizer,
        bound: cfg.concurrency_bound,
    }
    .run(articles)?;
    let out = cfg.output_dir();
    write_atomic(&out.join(DATASET_FILE), &to_csv(&output.records))?;
    write_atomic(&out.join(EXCLUDED_FILE), &to_jsonl(&output.excluded))?;
    write_atomic(&out.join(EXTRACT_WARNINGS_FILE), &to_jsonl(&output.notes))?;
    log::info!(
        "extracted {} records, excluded {} articles, {} field notes",
        output.records.len(),
        output.excluded.len(),
        output.notes.len()
    );
    Ok(output)
}

/// Score the datasets and write the text report and plot data.
pub fn cmd_evaluate(cfg: &RunConfig, datasets: &[Dataset], gold: &GoldSet) -> Result<EvalReport, CliError> {
    let report = evaluate_all(datasets, gold);
    if report.cells.is_empty() {
        log::warn!("no dataset row matches a gold entry; every gold article is a coverage gap");
    }
    let (text, csv) = emit_report(&report);
    let out = cfg.output_dir();
    write_atomic(&out.join(REPORT_TEXT_FILE), text.as_bytes())?;
    write_atomic(&out.join(REPORT_CSV_FILE), &csv)?;
    Ok(report)
}

pub fn read_gold(path: &Path) -> Result<GoldSet, CliError> {
    Ok(load_gold(&read_input(path)?)?)
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let records = from_csv(&read_input(path)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let fallback = path.file_stem().and_then(|s| s.to_str()).unwrap_or("unknown");
    Ok(Dataset::from_records(records, fallback))
}

pub fn read_articles(path: &Path) -> Result<Vec<Article>, CliError> {
    from_jsonl(&read_input(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn gold_path(cfg: &RunConfig) -> Result<&Path, CliError> {
    cfg.gold_path
        .as_deref()
        .ok_or_else(|| CliError::Validation("no gold file given; pass --gold".into()))
}

/// Execute a parsed command line. Summaries go to `stdout`.
pub fn execute(cli: &Cli, stdout: &mut dyn std::io::Write) -> Result<(), CliError> {
    let cfg = cli.run_config()?;
    let mut say = |line: String| {
        let _ = writeln!(stdout, "{line}");
    };
    match &cli.command {
        Command::Harvest => {
            let run = cmd_harvest(&cfg, &build_fetcher(&cfg)?)?;
            say(format!("{} articles harvested, {} warnings", run.articles.len(), run.warnings.len()));
        }
        Command::Extract { articles } => {
            let path = articles.clone().unwrap_or_else(|| cfg.output_dir().join(ARTICLES_FILE));
            let articles = read_articles(&path)?;
            let provider = build_provider(&cfg)?;
            let out = cmd_extract(&cfg, &articles, provider.as_ref())?;
            say(format!("{} records, {} excluded", out.records.len(), out.excluded.len()));
        }
        Command::Evaluate { datasets } => {
            let gold = read_gold(gold_path(&cfg)?)?;
            let paths = if datasets.is_empty() {
                vec![cfg.output_dir().join(DATASET_FILE)]
            } else {
                datasets.clone()
            };
            let datasets = paths.iter().map(|p| read_dataset(p)).collect::<Result<Vec<_>, _>>()?;
            let report = cmd_evaluate(&cfg, &datasets, &gold)?;
            say(emit_report(&report).0);
        }
        Command::Run => {
            let gold = cfg.gold_path.as_deref().map(read_gold).transpose()?;
            let provider = build_provider(&cfg)?;
            settings(&cfg)?;
            let run = cmd_harvest(&cfg, &build_fetcher(&cfg)?)?;
            say(format!("{} articles harvested, {} warnings", run.articles.len(), run.warnings.len()));
            let out = cmd_extract(&cfg, &run.articles, provider.as_ref())?;
            say(format!("{} records, {} excluded", out.records.len(), out.excluded.len()));
            if let Some(gold) = gold {
                let model = settings(&cfg)?.model;
                let dataset = Dataset {
                    model,
                    records: out.records,
                };
                let report = cmd_evaluate(&cfg, &[dataset], &gold)?;
                say(emit_report(&report).0);
            }
        }
    }
    Ok(())
}

/// Log records as one JSON object per line.
pub fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| {
            let line = serde_json::json!({
                "ts": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
                "level": record.level().as_str(),
                "target": record.target(),
                "msg": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        })
        .target(env_logger::Target::Stderr)
        .try_init();
}
