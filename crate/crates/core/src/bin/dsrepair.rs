//! `dsrepair`: build and query the API knowledge graph, repair one task, or
//! evaluate a corpus.
//!
//! Exit codes: 0 success, 1 tests failed, 2 configuration error,
//! 3 model provider error, 4 runner error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde_json::json;

use dsrepair::bug::{ProcessRunner, ReplayRunner, Runner, RunnerError};
use dsrepair::config::{Layers, Source};
use dsrepair::eval::{
    evaluate, metrics_from_ledger, overlap, read_ledger, Aggregate, EvalError, Evaluation, FixedSet, KnowledgeSource,
    LedgerWriter, OutcomeStatus, RepairSettings, TaskRecord,
};
use dsrepair::ingest::ingest_corpus;
use dsrepair::kg::{load_dump, parse_select, save_dump, KgError, KnowledgeGraph};
use dsrepair::llm::{
    exchanges_to_jsonl, known_cost_model, CostModel, LlmClient, LlmError, MockBackend, ProviderConfig, ReplayBackend,
};
use dsrepair::prompt::PromptMode;
use dsrepair::retrieval::{PlainTextCorpus, RetrievalScope, RichnessLevel};

const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

#[derive(Parser, Debug)]
#[command(name = "dsrepair", version, about = "Knowledge-guided repair of data-science code")]
struct Cli {
    /// Config file with `key = value` lines (keys are long flag names).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build or query an API knowledge graph.
    #[command(subcommand)]
    Kg(KgCommand),
    /// Repair a single task and test the patch.
    Repair(RepairArgs),
    /// Evaluate one or all modes over a task corpus.
    Eval(EvalArgs),
    /// Recompute metrics and overlap from an outcome ledger.
    Report(ReportArgs),
}

#[derive(Subcommand, Debug)]
enum KgCommand {
    /// Ingest a line-delimited API documentation corpus into a graph dump.
    Build {
        #[arg(long, value_name = "FILE")]
        docs: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Write the dump even if some records were rejected.
        #[arg(long)]
        allow_errors: bool,
    },
    /// Run a SELECT query; prints one solution per line, values tab-separated.
    Query {
        #[arg(long, value_name = "FILE")]
        kg: Option<PathBuf>,
        #[arg(long, value_name = "QUERY")]
        select: String,
    },
}

fn mode_names() -> Vec<&'static str> {
    PromptMode::ALL.iter().map(|m| m.as_str()).collect()
}

fn mode_names_or_all() -> Vec<&'static str> {
    let mut v = mode_names();
    v.push("all");
    v
}

fn richness_names() -> Vec<&'static str> {
    RichnessLevel::ALL.iter().map(|r| r.as_str()).collect()
}

/// Settings shared by `repair` and `eval`.
#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Knowledge graph dump.
    #[arg(long, value_name = "FILE")]
    kg: Option<PathBuf>,
    /// Directory of plain-text docs; replaces the graph with 50-token windows.
    #[arg(long, value_name = "DIR")]
    docs_text: Option<PathBuf>,
    #[arg(long, value_parser = PossibleValuesParser::new(richness_names()))]
    richness: Option<String>,
    #[arg(long, value_parser = PossibleValuesParser::new(["all", "failing_first", "failing_only"]))]
    scope: Option<String>,
    /// Per-request runner timeout in seconds.
    #[arg(long, value_name = "SECS")]
    timeout: Option<String>,
    /// Command that starts a sandbox runner speaking the stdio protocol.
    #[arg(long, value_name = "CMD")]
    runner_cmd: Option<String>,
    /// Recorded runner transcript to answer from instead.
    #[arg(long, value_name = "FILE")]
    runner_replay: Option<PathBuf>,
    /// Rule file for the scripted model.
    #[arg(long, value_name = "FILE")]
    mock_rules: Option<PathBuf>,
    /// Recorded model transcript to replay.
    #[arg(long, value_name = "FILE")]
    llm_replay: Option<PathBuf>,
    /// Chat-completions endpoint of a live provider.
    #[arg(long, value_name = "URL")]
    endpoint: Option<String>,
    /// Model name; also selects the price table row.
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, value_name = "VAR")]
    api_key_env: Option<String>,
    /// Input price in USD per million tokens (overrides the table).
    #[arg(long, value_name = "USD")]
    price_in: Option<String>,
    /// Output price in USD per million tokens (overrides the table).
    #[arg(long, value_name = "USD")]
    price_out: Option<String>,
    #[arg(long, value_name = "N")]
    requests_per_minute: Option<String>,
    #[arg(long, value_name = "N")]
    retries: Option<String>,
}

#[derive(Args, Debug)]
struct RepairArgs {
    /// Task file (line-delimited JSON task records).
    #[arg(long, value_name = "FILE")]
    task: PathBuf,
    /// Task id, when the file holds more than one record.
    #[arg(long)]
    id: Option<String>,
    #[arg(long, value_parser = PossibleValuesParser::new(mode_names()))]
    mode: Option<String>,
    /// Append the outcome to this ledger.
    #[arg(long, value_name = "FILE")]
    ledger: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Corpus file (line-delimited JSON task records).
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    #[arg(long, value_parser = PossibleValuesParser::new(mode_names_or_all()))]
    mode: Option<String>,
    /// Runs over the whole corpus; the median run is reported [default: 10]
    #[arg(long, value_name = "N")]
    repetitions: Option<String>,
    #[arg(long, value_name = "N")]
    workers: Option<String>,
    /// Output directory for ledger, metrics, transcripts and overlap.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long, value_name = "FILE")]
    ledger: PathBuf,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, value_name = "USD")]
    price_in: Option<String>,
    #[arg(long, value_name = "USD")]
    price_out: Option<String>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

const DEFAULT_REPETITIONS: usize = 10;

const TESTS_FAILED: u8 = 1;
const CONFIG: u8 = 2;
const PROVIDER: u8 = 3;
const RUNNER: u8 = 4;

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

impl From<dsrepair::config::ConfigError> for Failure {
    fn from(e: dsrepair::config::ConfigError) -> Self {
        fail(CONFIG, e.to_string())
    }
}

impl From<LlmError> for Failure {
    fn from(e: LlmError) -> Self {
        let code = if matches!(e, LlmError::Config(_)) { CONFIG } else { PROVIDER };
        fail(code, format!("model provider: {e}"))
    }
}

impl From<RunnerError> for Failure {
    fn from(e: RunnerError) -> Self {
        fail(RUNNER, e.to_string())
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Runner(r) => r.into(),
            EvalError::MissingKnowledge(_) | EvalError::Invalid(_) | EvalError::MismatchedCorpora { .. } => {
                fail(CONFIG, e.to_string())
            }
            EvalError::Io(m) => fail(CONFIG, m),
        }
    }
}

fn after_help() -> String {
    format!(
        "Modes: {}\nRichness levels: {}\n\n\
         Settings resolve from command-line flags first, then DSREPAIR_<KEY> environment variables \
         (e.g. DSREPAIR_RUNNER_CMD), then the key = value config file given by --config or DSREPAIR_CONFIG. \
         The API key is read from the variable named by --api-key-env (default DSREPAIR_API_KEY).\n\n\
         Exit codes: 0 success, 1 tests failed, 2 configuration error, 3 model provider error, 4 runner error.",
        mode_names().join(", "),
        richness_names().join(", "),
    )
}

fn main() -> ExitCode {
    let matches = Cli::command().after_help(after_help()).get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let config = cli.config.or_else(|| std::env::var_os("DSREPAIR_CONFIG").map(PathBuf::from));
    if let Some(p) = &config {
        require_file(p, "--config")?;
    }
    let layers = Layers::from_process(config.as_deref())?;
    match cli.command {
        Command::Kg(KgCommand::Build { docs, out, allow_errors }) => kg_build(&docs, &out, allow_errors),
        Command::Kg(KgCommand::Query { kg, select }) => kg_query(&layers, kg, &select),
        Command::Repair(args) => repair(&layers, args),
        Command::Eval(args) => eval(&layers, args),
        Command::Report(args) => report(&layers, args),
    }
}

fn require_file(path: &Path, flag: &str) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(fail(CONFIG, format!("{flag}: {} does not exist", path.display())))
    }
}

fn path_setting(layers: &Layers, key: &str, flag: Option<&Path>) -> Result<Option<PathBuf>, Failure> {
    let flag = flag.map(|p| p.to_string_lossy().into_owned());
    match layers.get(key, flag.as_deref()) {
        None => Ok(None),
        Some((v, source)) => {
            let p = PathBuf::from(v);
            let origin = if source == Source::Flag { format!("--{key}") } else { format!("{key} (from {source})") };
            require_file(&p, &origin)?;
            Ok(Some(p))
        }
    }
}

fn read_graph(path: &Path) -> Result<KnowledgeGraph, Failure> {
    let text = fs::read_to_string(path).map_err(|e| fail(CONFIG, format!("{}: {e}", path.display())))?;
    load_dump(&text).map_err(|e| fail(CONFIG, format!("{}: {e}", path.display())))
}

fn kg_build(docs: &Path, out: &Path, allow_errors: bool) -> Result<u8, Failure> {
    require_file(docs, "--docs")?;
    let (graph, report) = ingest_corpus(docs).map_err(|e| fail(CONFIG, e.to_string()))?;
    if !report.is_clean() {
        eprintln!("{report}");
        if !allow_errors {
            return Err(fail(CONFIG, "rejected records; nothing written (use --allow-errors to keep the rest)"));
        }
    }
    fs::write(out, save_dump(&graph)).map_err(|e| fail(CONFIG, format!("{}: {e}", out.display())))?;
    println!("{} records, {} triples -> {}", report.records, graph.len(), out.display());
    Ok(0)
}

fn kg_query(layers: &Layers, kg: Option<PathBuf>, select: &str) -> Result<u8, Failure> {
    let query = match parse_select(select) {
        Ok(q) => q,
        Err(e) => {
            if let KgError::Syntax { line, column, .. } | KgError::QueryPredicate { line, column, .. } = &e {
                if let Some(text) = select.lines().nth(line - 1) {
                    eprintln!("  {text}\n  {}^", " ".repeat(column.saturating_sub(1)));
                }
            }
            return Err(fail(CONFIG, e.to_string()));
        }
    };
    let path = path_setting(layers, "kg", kg.as_deref())?.ok_or_else(|| fail(CONFIG, "missing --kg"))?;
    let graph = read_graph(&path)?;
    let vars = query.projection();
    let mut out = std::io::stdout().lock();
    for solution in query.execute(&graph) {
        let row: Vec<&str> = vars.iter().map(|v| solution.get(v).map(|t| t.value()).unwrap_or("")).collect();
        let _ = writeln!(out, "{}", row.join("\t"));
    }
    Ok(0)
}

/// Everything a repair or evaluation run needs, validated up front.
struct RunSetup {
    richness: RichnessLevel,
    scope: RetrievalScope,
    timeout_s: f64,
    graph: Option<KnowledgeGraph>,
    plain: Option<PlainTextCorpus>,
    client: LlmClient,
    runner: RunnerSpec,
    prices: CostModel,
}

enum RunnerSpec {
    Command(String),
    Replay(PathBuf),
}

impl RunSetup {
    fn knowledge(&self) -> KnowledgeSource<'_> {
        match (&self.graph, &self.plain) {
            (_, Some(p)) => KnowledgeSource::PlainText(p),
            (Some(g), None) => KnowledgeSource::Graph(g),
            (None, None) => KnowledgeSource::None,
        }
    }

    fn make_runner(&self) -> Result<Box<dyn Runner>, RunnerError> {
        match &self.runner {
            RunnerSpec::Command(c) => Ok(Box::new(ProcessRunner::new(c.clone()))),
            RunnerSpec::Replay(p) => Ok(Box::new(ReplayRunner::load(p)?)),
        }
    }

    fn settings(&self, mode: PromptMode) -> RepairSettings {
        RepairSettings { mode, richness: self.richness, scope: self.scope, timeout_s: self.timeout_s }
    }
}

fn prices(layers: &Layers, model: &str, price_in: Option<&str>, price_out: Option<&str>) -> Result<CostModel, Failure> {
    let pin: Option<f64> = layers.parse("price-in", price_in)?;
    let pout: Option<f64> = layers.parse("price-out", price_out)?;
    match (pin, pout, known_cost_model(model)) {
        (Some(i), Some(o), _) => Ok(CostModel::per_million(i, o)),
        (None, None, Some(m)) => Ok(m),
        (Some(_), None, _) | (None, Some(_), _) => Err(fail(CONFIG, "--price-in and --price-out must be given together")),
        (None, None, None) => {
            Err(fail(CONFIG, format!("no price table entry for model `{model}`; pass --price-in and --price-out")))
        }
    }
}

fn setup(layers: &Layers, a: &RunArgs, modes: &[PromptMode]) -> Result<RunSetup, Failure> {
    // every path first: no subprocess or network activity before this passes
    let kg = path_setting(layers, "kg", a.kg.as_deref())?;
    let docs_text = path_setting(layers, "docs-text", a.docs_text.as_deref())?;
    let runner_replay = path_setting(layers, "runner-replay", a.runner_replay.as_deref())?;
    let mock_rules = path_setting(layers, "mock-rules", a.mock_rules.as_deref())?;
    let llm_replay = path_setting(layers, "llm-replay", a.llm_replay.as_deref())?;

    let richness: RichnessLevel = layers.parse("richness", a.richness.as_deref())?.unwrap_or_default();
    let scope: RetrievalScope = layers.parse("scope", a.scope.as_deref())?.unwrap_or_default();
    let timeout_s: f64 = layers.parse("timeout", a.timeout.as_deref())?.unwrap_or(10.0);
    if !(timeout_s > 0.0 && timeout_s <= dsrepair::bug::MAX_TIMEOUT_S) {
        return Err(fail(CONFIG, format!("--timeout must be in (0, {}]", dsrepair::bug::MAX_TIMEOUT_S)));
    }

    if kg.is_some() && docs_text.is_some() {
        return Err(fail(CONFIG, "--kg and --docs-text are mutually exclusive"));
    }
    if let Some(m) = modes.iter().find(|m| m.uses_api_knowledge()) {
        if kg.is_none() && docs_text.is_none() {
            return Err(fail(CONFIG, format!("missing --kg (mode {m} needs API knowledge; or pass --docs-text)")));
        }
    }

    let runner_cmd = layers.get("runner-cmd", a.runner_cmd.as_deref()).map(|(v, _)| v);
    let runner = match (runner_cmd, runner_replay) {
        (Some(c), None) => RunnerSpec::Command(c),
        (None, Some(p)) => RunnerSpec::Replay(p),
        (None, None) => return Err(fail(CONFIG, "no runner configured: pass --runner-cmd or --runner-replay")),
        (Some(_), Some(_)) => return Err(fail(CONFIG, "--runner-cmd and --runner-replay are mutually exclusive")),
    };

    let model = layers.get("model", a.model.as_deref()).map(|(v, _)| v).unwrap_or_else(|| DEFAULT_MODEL.to_string());
    let prices = prices(layers, &model, a.price_in.as_deref(), a.price_out.as_deref())?;
    let endpoint = layers.get("endpoint", a.endpoint.as_deref()).map(|(v, _)| v);
    let chosen = [mock_rules.is_some(), llm_replay.is_some(), endpoint.is_some()].iter().filter(|b| **b).count();
    if chosen != 1 {
        return Err(fail(CONFIG, "configure exactly one model provider: --mock-rules, --llm-replay or --endpoint"));
    }

    let graph = kg.as_deref().map(read_graph).transpose()?;
    let plain = match &docs_text {
        Some(d) => Some(PlainTextCorpus::load_dir(d).map_err(|e| fail(CONFIG, format!("{}: {e}", d.display())))?),
        None => None,
    };
    let client = if let Some(p) = mock_rules {
        LlmClient::new(Box::new(MockBackend::load(p).map_err(|e| fail(CONFIG, e.to_string()))?))
    } else if let Some(p) = llm_replay {
        LlmClient::new(Box::new(ReplayBackend::load(p).map_err(|e| fail(CONFIG, e.to_string()))?))
    } else {
        let mut cfg = ProviderConfig::new(endpoint.unwrap_or_default(), model);
        if let Some((v, _)) = layers.get("api-key-env", a.api_key_env.as_deref()) {
            cfg.api_key_env = v;
        }
        if let Some(r) = layers.parse("retries", a.retries.as_deref())? {
            cfg.retries = r;
        }
        cfg.requests_per_minute = layers.parse("requests-per-minute", a.requests_per_minute.as_deref())?;
        let cfg = cfg.with_key_from_env();
        if cfg.api_key.is_none() {
            return Err(fail(CONFIG, format!("no API key: set {}", cfg.api_key_env)));
        }
        LlmClient::http(cfg)?
    };
    Ok(RunSetup { richness, scope, timeout_s, graph, plain, client, runner, prices })
}

fn parse_mode(layers: &Layers, flag: Option<&str>) -> Result<Option<String>, Failure> {
    Ok(layers.get("mode", flag).map(|(v, _)| v))
}

fn repair(layers: &Layers, args: RepairArgs) -> Result<u8, Failure> {
    require_file(&args.task, "--task")?;
    let mode: PromptMode = layers.parse("mode", args.mode.as_deref())?.unwrap_or(PromptMode::Dsrepair);
    let tasks = load_tasks(&args.task)?;
    let task = match (&args.id, tasks.len()) {
        (Some(id), _) => tasks.iter().find(|t| &t.id == id).ok_or_else(|| fail(CONFIG, format!("no task `{id}`")))?,
        (None, 1) => &tasks[0],
        (None, n) => return Err(fail(CONFIG, format!("--task holds {n} records; pick one with --id"))),
    };
    let ledger_path = layers.get("ledger", args.ledger.as_deref().map(|p| p.to_str().unwrap_or_default())).map(|(v, _)| v);
    let s = setup(layers, &args.run, &[mode])?;
    let mut runner = s.make_runner()?;
    let (outcome, _) = dsrepair::eval::repair_task(task, &s.settings(mode), s.knowledge(), &mut *runner, &s.client, 0)?;
    if let Some(p) = ledger_path {
        LedgerWriter::append_to(p)?.append(&outcome)?;
    }
    if !outcome.patched_code.is_empty() {
        println!("{}", outcome.patched_code);
    }
    println!("{}", serde_json::to_string(&outcome).expect("serializable outcome"));
    Ok(match outcome.status {
        OutcomeStatus::Fixed | OutcomeStatus::NotBuggy => 0,
        OutcomeStatus::Failed | OutcomeStatus::NoCode => TESTS_FAILED,
        OutcomeStatus::LlmError => PROVIDER,
        OutcomeStatus::RunnerError => RUNNER,
        OutcomeStatus::PromptError => CONFIG,
    })
}

fn load_tasks(path: &Path) -> Result<Vec<TaskRecord>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| fail(CONFIG, format!("{}: {e}", path.display())))?;
    let (tasks, errors) = dsrepair::eval::parse_corpus(&text);
    if let Some(e) = errors.first() {
        return Err(fail(CONFIG, format!("{} line {}: {}", path.display(), e.line, e.message)));
    }
    if tasks.is_empty() {
        return Err(fail(CONFIG, format!("{} holds no tasks", path.display())));
    }
    Ok(tasks)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| fail(CONFIG, format!("{}: {e}", path.display())))
}

fn eval(layers: &Layers, args: EvalArgs) -> Result<u8, Failure> {
    require_file(&args.corpus, "--corpus")?;
    let modes = match parse_mode(layers, args.mode.as_deref())?.as_deref() {
        None | Some("all") => PromptMode::ALL.to_vec(),
        Some(m) => vec![m.parse::<PromptMode>().map_err(|e| fail(CONFIG, e))?],
    };
    let repetitions: usize = layers.parse("repetitions", args.repetitions.as_deref())?.unwrap_or(DEFAULT_REPETITIONS);
    let workers: usize = layers.parse("workers", args.workers.as_deref())?.unwrap_or(1);
    let out = layers
        .get("out", args.out.as_deref().map(|p| p.to_str().unwrap_or_default()))
        .map(|(v, _)| PathBuf::from(v))
        .unwrap_or_else(|| PathBuf::from("dsrepair-out"));
    let tasks = load_tasks(&args.corpus)?;
    let s = setup(layers, &args.run, &modes)?;
    fs::create_dir_all(&out).map_err(|e| fail(CONFIG, format!("{}: {e}", out.display())))?;
    let ledger = LedgerWriter::append_to(out.join("ledger.jsonl"))?;

    let factory = || s.make_runner();
    let mut summary = String::new();
    let mut sets: BTreeMap<String, FixedSet> = BTreeMap::new();
    let mut worst = 0u8;
    for &mode in &modes {
        let ev = evaluate(&tasks, &s.settings(mode), repetitions, workers, s.knowledge(), &factory, &s.client, &s.prices, Some(&ledger))?;
        let stem = format!("{}_{}", mode.as_str(), s.richness.as_str());
        let metrics = json!({
            "mode": mode.as_str(),
            "richness": s.richness.as_str(),
            "repetitions": repetitions,
            "aggregate": ev.aggregate,
            "metrics": ev.metrics,
        });
        write_file(&out.join(format!("metrics_{stem}.json")), &format!("{metrics:#}\n"))?;
        write_file(&out.join(format!("transcript_{stem}.jsonl")), &exchanges_to_jsonl(&ev.exchanges))?;
        summary.push_str(&summarize(&format!("{mode} ({})", s.richness.as_str()), &ev.aggregate, ev.median_metrics()));
        worst = worst.max(status_code(&ev));
        sets.insert(mode.as_str().to_string(), ev.fixed_set());
    }
    if sets.len() > 1 {
        let report = overlap(&sets)?;
        write_file(&out.join("overlap.json"), &format!("{:#}\n", json!(report)))?;
        summary.push_str(&overlap_table(&report));
    }
    write_file(&out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(worst)
}

fn status_code(ev: &Evaluation) -> u8 {
    let mut code = 0;
    for o in &ev.outcomes {
        match o.status {
            OutcomeStatus::RunnerError => code = code.max(RUNNER),
            OutcomeStatus::LlmError => code = code.max(PROVIDER),
            _ => {}
        }
    }
    code
}

fn summarize(title: &str, agg: &Aggregate, median: &dsrepair::eval::RunMetrics) -> String {
    format!(
        "== {title}\n{median}\nANF over {} repetitions: {} (median {}, repetition {})\n\n",
        agg.anf_per_repetition.len(),
        agg.spread_display(),
        agg.median_anf,
        agg.median_repetition,
    )
}

fn overlap_table(report: &dsrepair::eval::OverlapReport) -> String {
    let mut s = String::from("== overlap of fixed tasks\n");
    for row in &report.rows {
        s.push_str(&format!("{:>5} only {:<50} ({} fixed by all of them)\n", row.exclusive, row.modes.join(" + "), row.intersection));
    }
    s.push_str(&format!("{:>5} fixed by none\n", report.unfixed));
    s
}

fn report(layers: &Layers, args: ReportArgs) -> Result<u8, Failure> {
    require_file(&args.ledger, "--ledger")?;
    let model = layers.get("model", args.model.as_deref()).map(|(v, _)| v).unwrap_or_else(|| DEFAULT_MODEL.to_string());
    let prices = prices(layers, &model, args.price_in.as_deref(), args.price_out.as_deref())?;
    let outcomes = read_ledger(&args.ledger)?;
    let grouped = metrics_from_ledger(&outcomes, &prices);
    let mut summary = String::new();
    let mut sets: BTreeMap<String, FixedSet> = BTreeMap::new();
    for ((mode, richness), reps) in &grouped {
        let anf: Vec<u64> = reps.iter().map(|m| m.anf).collect();
        let Some(agg) = Aggregate::from_anf(&anf) else { continue };
        summary.push_str(&summarize(&format!("{mode} ({richness})"), &agg, &reps[agg.median_repetition]));
        // repetition indices in the ledger are sorted, so the median index maps back
        let mut rep_ids: Vec<usize> = outcomes
            .iter()
            .filter(|o| o.mode.as_str() == mode && o.richness.as_str() == richness)
            .map(|o| o.repetition)
            .collect();
        rep_ids.sort_unstable();
        rep_ids.dedup();
        let rep = rep_ids[agg.median_repetition];
        let mut set = FixedSet::default();
        for o in outcomes.iter().filter(|o| o.mode.as_str() == mode && o.richness.as_str() == richness && o.repetition == rep) {
            if o.counts() {
                set.corpus.insert(o.task_id.clone());
                if o.passed {
                    set.fixed.insert(o.task_id.clone());
                }
            }
        }
        sets.insert(format!("{mode}/{richness}"), set);
    }
    if sets.len() > 1 {
        match overlap(&sets) {
            Ok(r) => summary.push_str(&overlap_table(&r)),
            Err(e) => log::warn!("no overlap table: {e}"),
        }
    }
    print!("{summary}");
    Ok(0)
}
