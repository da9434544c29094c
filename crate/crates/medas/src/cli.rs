//! Command-line surface: `serve`, `ask`, `eval`, `weights` and `record`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use chrono::Utc;
use clap::{Args, Parser, Subcommand, ValueEnum};
use medas_core::eval::{emit_report, ReportFormat};
use medas_core::meta::{aggregate, Strategy, WeightVector};
use medas_core::{CaseInquiry, InquiryId, InquirySource};

use crate::config::Config;
use crate::dispatch::{dispatch_inquiry, DispatchError};
use crate::gateway::Gateway;
use crate::harness::{self, HarnessError, WeightSource};
use crate::journal::replay_journal;
use crate::service::{self, AdvisoryService, AdvisoryState, InquiryRecord, InquiryState, InquiryView, SubmitOptions};
use crate::snapshot::WeightSnapshot;

pub const EXIT_DATA: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "medas", version, about = "Weighted ensemble of diagnostic agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the REST API until interrupted.
    Serve(ServeArgs),
    /// Dispatch one case and print the consolidated differential.
    Ask(AskArgs),
    /// Score agents and the ensemble on a labeled dataset.
    Eval(EvalArgs),
    /// Show current weights from a journal, or learn them from a dataset.
    Weights(WeightsArgs),
    /// Capture raw agent outputs for a dataset into a replay log.
    Record(RecordArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "MEDAS_CONFIG")]
    pub config: PathBuf,
    #[arg(long, env = "MEDAS_JOURNAL")]
    pub journal: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AskFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct AskArgs {
    #[arg(long, env = "MEDAS_CONFIG")]
    pub config: PathBuf,
    #[arg(long, conflicts_with = "file", required_unless_present = "file")]
    pub text: Option<String>,
    #[arg(long)]
    pub file: Option<PathBuf>,
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Option<Strategy>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: AskFormat,
    /// Persist the inquiry and use the journal's learned weights.
    #[arg(long)]
    pub journal: Option<PathBuf>,
    /// Weight snapshot to use instead of uniform weights (without --journal).
    #[arg(long, conflicts_with = "journal")]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub deadline_ms: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Agent configuration.
    #[arg(long, alias = "config", env = "MEDAS_CONFIG")]
    pub agents: PathBuf,
    /// `uniform`, `learned`, or the path of a weight snapshot.
    #[arg(long, default_value = "uniform")]
    pub weights: String,
    /// Strategies to report; both when omitted.
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Vec<Strategy>,
    /// `table`, `csv` or `json-lines`.
    #[arg(long, default_value = "table", value_parser = parse_report_format)]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Append published single-model and panel accuracies to the table.
    #[arg(long)]
    pub reference_lines: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightsFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[arg(long, env = "MEDAS_CONFIG")]
    pub config: PathBuf,
    #[arg(long, env = "MEDAS_JOURNAL", conflicts_with = "dataset", required_unless_present = "dataset")]
    pub journal: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Also write the weights as a snapshot file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: WeightsFormat,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    #[arg(long, env = "MEDAS_CONFIG")]
    pub config: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = Strategy::ALL.iter().map(|st| st.as_str()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn parse_report_format(s: &str) -> Result<ReportFormat, String> {
    s.parse().map_err(|_| "expected table, csv or json-lines".to_string())
}

/// A failed command, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn data(message: impl std::fmt::Display) -> Self {
        Self { code: EXIT_DATA, message: message.to_string() }
    }

    fn runtime(message: impl std::fmt::Display) -> Self {
        Self { code: EXIT_RUNTIME, message: message.to_string() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Dispatch(DispatchError::AllAgentsFailed(_)) => CliError::runtime(e),
            e => CliError::data(e),
        }
    }
}

fn load_config(path: &Path) -> Result<Arc<Config>, CliError> {
    Config::load(path).map(Arc::new).map_err(CliError::data)
}

pub async fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Serve(args) => serve(args).await,
        Command::Ask(args) => ask(args).await,
        Command::Eval(args) => eval(args).await,
        Command::Weights(args) => weights(args).await,
        Command::Record(args) => record(args).await,
    }
}

fn write_stdout(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(CliError::runtime)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutting down");
}

async fn serve(args: ServeArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    for (agent, var) in config.missing_credentials() {
        tracing::warn!(%agent, var, "credential variable unset; agent will report transport errors");
    }
    let service = AdvisoryService::open(config, &args.journal).map_err(CliError::data)?;
    let listener = tokio::net::TcpListener::bind(args.listen).await.map_err(CliError::data)?;
    let addr = listener.local_addr().map_err(CliError::runtime)?;
    tracing::info!(%addr, "listening");
    eprintln!("listening on {addr}");
    service::serve(service, listener, shutdown_signal()).await.map_err(CliError::runtime)
}

fn render_view(view: &InquiryView, format: AskFormat) -> String {
    match format {
        AskFormat::Json => {
            let mut s = serde_json::to_string_pretty(view).expect("view serializes");
            s.push('\n');
            s
        }
        AskFormat::Table => {
            let mut s = String::new();
            if let Some(diff) = &view.differential {
                let _ = writeln!(s, "Differential ({}):", view.strategy);
                for (i, row) in diff.iter().enumerate() {
                    let _ = writeln!(s, "{:>2}. {:<40} {:>7.4}  {}", i + 1, row.label, row.score, row.urgency);
                }
            }
            if let Some(failure) = &view.failure {
                let _ = writeln!(s, "Failed: {failure}");
            }
            if let Some(agents) = &view.per_agent {
                let _ = writeln!(s, "\nAgents:");
                for a in agents {
                    let status = serde_json::to_value(a.status).ok().and_then(|v| v.as_str().map(String::from));
                    let _ = writeln!(
                        s,
                        "  {:<16} {:<16} {:>6} ms  {}",
                        a.agent_id,
                        status.unwrap_or_default(),
                        a.latency_ms,
                        a.top1.as_deref().unwrap_or("-")
                    );
                }
            }
            let _ = writeln!(s, "\n{}", view.disclaimer);
            s
        }
    }
}

async fn ask(args: AskArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let text = match (&args.text, &args.file) {
        (Some(t), None) => t.clone(),
        (None, Some(f)) => std::fs::read_to_string(f).map_err(|e| CliError::data(format!("{}: {e}", f.display())))?,
        _ => return Err(CliError::data("exactly one of --text or --file is required")),
    };
    let view = match &args.journal {
        Some(journal) => {
            let service = AdvisoryService::open(config, journal).map_err(CliError::data)?;
            let options = SubmitOptions { deadline_ms: args.deadline_ms, strategy: args.strategy };
            let id = service.submit(&text, options).await.map_err(CliError::data)?;
            service.process(&id).await.map_err(CliError::runtime)?;
            service.view(&id).await.map_err(CliError::runtime)?
        }
        None => ask_once(config, &text, &args).await?,
    };
    write_stdout(&render_view(&view, args.format))?;
    if view.state == InquiryState::Failed {
        return Err(CliError::runtime(view.failure.unwrap_or_else(|| "dispatch failed".into())));
    }
    Ok(())
}

async fn ask_once(config: Arc<Config>, text: &str, args: &AskArgs) -> Result<InquiryView, CliError> {
    let weights = match &args.weights {
        Some(path) => WeightSnapshot::read(path).map_err(CliError::data)?.weight_vector(),
        None => WeightVector::uniform(&config.agent_ids()),
    };
    let deadline_ms = args.deadline_ms.unwrap_or(config.deadline_ms);
    let strategy = args.strategy.unwrap_or(config.default_strategy);
    let case = CaseInquiry::new(InquiryId::from(uuid::Uuid::new_v4().to_string()), text, Utc::now(), InquirySource::Cli)
        .map_err(CliError::data)?;
    let gateway = Gateway::new(config);
    let mut record = InquiryRecord {
        case: case.clone(),
        deadline_ms,
        strategy,
        dispatch: None,
        consolidated: None,
        confirmation: None,
        failure: None,
        state: InquiryState::Pending,
    };
    match dispatch_inquiry(&gateway, &case, None, deadline_ms).await {
        Ok(dispatch) => {
            let consolidated = aggregate(&dispatch, &weights, strategy).map_err(CliError::data)?;
            record.dispatch = Some(dispatch);
            record.consolidated = Some(consolidated);
            record.state = InquiryState::Completed;
        }
        Err(DispatchError::AllAgentsFailed(dispatch)) => {
            record.failure = Some(DispatchError::AllAgentsFailed(dispatch.clone()).to_string());
            record.dispatch = Some(*dispatch);
            record.state = InquiryState::Failed;
        }
        Err(e) => return Err(CliError::data(e)),
    }
    Ok(InquiryView::from_record(&record))
}

fn parse_weight_source(s: &str) -> WeightSource {
    match s {
        "uniform" => WeightSource::Uniform,
        "learned" => WeightSource::Learned,
        path => WeightSource::File(PathBuf::from(path)),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display()))),
        None => write_stdout(text),
    }
}

async fn eval(args: EvalArgs) -> Result<(), CliError> {
    let config = load_config(&args.agents)?;
    let cases = harness::load_dataset(&args.dataset, &config.synonyms)?;
    let strategies = if args.strategy.is_empty() {
        vec![Strategy::Top1WeightedVote, Strategy::WeightedProbSum]
    } else {
        args.strategy.clone()
    };
    let gateway = Gateway::new(config);
    let report = harness::run_eval(
        &gateway,
        &cases,
        &parse_weight_source(&args.weights),
        &strategies,
        &harness::dataset_id(&args.dataset),
    )
    .await?;
    write_output(args.out.as_deref(), &emit_report(&report, args.format, args.reference_lines))
}

fn render_weights(snapshot: &WeightSnapshot, format: WeightsFormat) -> String {
    match format {
        WeightsFormat::Json => {
            let mut s = serde_json::to_string_pretty(&service::WeightsView::from(snapshot.clone()))
                .expect("weights serialize");
            s.push('\n');
            s
        }
        WeightsFormat::Table => {
            let mut s = format!("{:<16} {:>6} {:>6} {:>8}\n", "agent", "c", "n", "weight");
            for r in &snapshot.records {
                let _ = writeln!(s, "{:<16} {:>6} {:>6} {:>8.4}", r.agent_id, r.c, r.n, r.weight);
            }
            s
        }
    }
}

async fn weights(args: WeightsArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let snapshot = match (&args.journal, &args.dataset) {
        (Some(journal), None) => {
            let replayed = replay_journal(journal).map_err(CliError::data)?;
            let state = AdvisoryState::from_events(
                config.agent_ids(),
                config.smoothing,
                replayed.entries.iter().map(|e| &e.event),
            )
            .map_err(CliError::data)?;
            state.weight_snapshot()
        }
        (None, Some(dataset)) => {
            let cases = harness::load_dataset(dataset, &config.synonyms)?;
            if cases.is_empty() {
                return Err(HarnessError::EmptyDataset.into());
            }
            let alpha = config.smoothing;
            let gateway = Gateway::new(config);
            let dispatches = harness::gather(&gateway, &cases, gateway.config().deadline_ms).await?;
            let ledger = harness::learn_stats(&gateway, &cases, &dispatches)?;
            let stats: Vec<_> = gateway.config().agent_ids().iter().filter_map(|a| ledger.get(a).cloned()).collect();
            WeightSnapshot::from_stats(&stats, alpha).map_err(CliError::data)?
        }
        _ => return Err(CliError::data("exactly one of --journal or --dataset is required")),
    };
    if let Some(out) = &args.out {
        snapshot.write_atomic(out).map_err(CliError::data)?;
    }
    write_stdout(&render_weights(&snapshot, args.format))
}

async fn record(args: RecordArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let missing = config.missing_credentials();
    if !missing.is_empty() {
        let names: Vec<String> = missing.iter().map(|(a, v)| format!("{a} ({v})")).collect();
        return Err(CliError::data(format!("missing credentials for {}", names.join(", "))));
    }
    let cases = harness::load_dataset(&args.dataset, &config.synonyms)?;
    if cases.is_empty() {
        return Err(HarnessError::EmptyDataset.into());
    }
    // Fail before spending agent calls if the log cannot be written.
    std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&args.out)
        .map_err(|e| CliError::data(format!("{}: {e}", args.out.display())))?;
    let gateway = Gateway::new(config);
    let records = harness::record(&gateway, &cases).await?;
    harness::write_replay_log(&args.out, &records)?;
    eprintln!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}
