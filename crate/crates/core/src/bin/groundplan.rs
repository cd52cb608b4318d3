use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use groundplan::eval::{load_predictions, PredictionRow};
use groundplan::manifest::ManifestBuilder;
use groundplan::scorer::mock::{FaultInjection, FaultMode, MockScorerServer};
use groundplan::scorer::{build_prompt, select_in_context_examples, InContextExample, RetryPolicy};
use groundplan::{
    candidate_plans, evaluate, execute, load_dataset, parse_plan, search, type_check, Constraints,
    DatasetExample, Function, KnowledgeBase, LexicalScorer, LinearScorer, Plan, RankingModel, RemoteScorer, Scorer,
    SearchConfig, TrainConfig,
};

#[derive(Parser)]
#[command(name = "groundplan", version, about = "Grounded semantic parsing over an in-memory knowledge base")]
struct Cli {
    /// Where to write the run manifest. Defaults to `<output>.manifest.json`
    /// for commands with an output file, stderr otherwise.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a plan and print its denotation.
    Exec {
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long)]
        plan: String,
    },
    /// Print every one-step extension of the given plans.
    Enumerate {
        #[command(flatten)]
        kb: KbArgs,
        /// Beam plan (repeatable).
        #[arg(long = "plan", required = true)]
        plans: Vec<String>,
        #[command(flatten)]
        constraints: ConstraintArgs,
        #[arg(long)]
        max_candidates: Option<usize>,
    },
    /// Run beam search over every dataset question and write predictions.
    Search(SearchArgs),
    /// Train a linear ranking model from gold plans.
    Train(TrainArgs),
    /// Score predictions against gold plans.
    Eval {
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// JSON report path; the text table goes to `<out>.txt`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a few-shot prompt built from the most similar pool examples.
    Prompt {
        /// JSONL of `{"utterance", "plan"}` or dataset rows with `gold_plan`.
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Serve lexical scores over HTTP until killed.
    MockScorer {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Fail every n-th request (0-based index divisible by n).
        #[arg(long)]
        fail_every: Option<usize>,
        #[arg(long, value_enum, default_value = "unavailable")]
        fault: Fault,
    },
}

#[derive(Args, Clone)]
struct KbArgs {
    /// Path prefix: loads `<kb>.schema` and `<kb>.triples`.
    #[arg(long)]
    kb: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    triples: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct ConstraintArgs {
    /// Relation the enumerator must not use (repeatable).
    #[arg(long = "deny-relation")]
    deny_relation: Vec<String>,
    /// Function the enumerator must not use (repeatable).
    #[arg(long = "deny-function")]
    deny_function: Vec<String>,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    kb: KbArgs,
    #[arg(long)]
    dataset: PathBuf,
    /// `lexical`, `linear:<model path>`, `remote:<URL>` or `remote`.
    #[arg(long, default_value = "lexical")]
    scorer: String,
    /// Predictions JSONL.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    beam: usize,
    #[arg(long, default_value_t = 10)]
    max_steps: usize,
    #[command(flatten)]
    constraints: ConstraintArgs,
    /// Directory receiving one `<qid>.json` search trace per question.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Remote scorer endpoint; takes precedence over the URL in `--scorer`.
    #[arg(long, env = "GROUNDPLAN_SCORER_URL")]
    scorer_url: Option<String>,
    /// Remote scorer request timeout in seconds.
    #[arg(long, env = "GROUNDPLAN_SCORER_TIMEOUT", default_value_t = 30.0)]
    scorer_timeout: f64,
    /// Demonstration pool sent with every remote request.
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    k: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    kb: KbArgs,
    #[arg(long)]
    dataset: PathBuf,
    /// Model JSON path; losses go to `<out>.losses.csv`, skipped examples to
    /// `<out>.skipped.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    beam: Option<usize>,
    /// Mini-batch size; omit for full-batch descent.
    #[arg(long)]
    batch_size: Option<usize>,
    #[command(flatten)]
    constraints: ConstraintArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    Unavailable,
    Broken,
}

/// A failed command and its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait Classify<T> {
    fn user(self) -> Result<T, Failure>;
    fn internal(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn user(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 1, error: e.into() })
    }

    fn internal(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 2, error: e.into() })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let manifest_path = cli.manifest;
    let (manifest, primary) = match cli.command {
        Command::Exec { kb, plan } => cmd_exec(&kb, &plan)?,
        Command::Enumerate { kb, plans, constraints, max_candidates } => {
            cmd_enumerate(&kb, &plans, &constraints, max_candidates)?
        }
        Command::Search(args) => cmd_search(args)?,
        Command::Train(args) => cmd_train(args)?,
        Command::Eval { kb, dataset, predictions, out } => cmd_eval(&kb, &dataset, &predictions, &out)?,
        Command::Prompt { pool, query, k } => cmd_prompt(&pool, &query, k)?,
        Command::MockScorer { addr, fail_every, fault } => cmd_mock(&addr, fail_every, fault)?,
    };
    let manifest = manifest.finish();
    match (manifest_path, primary) {
        (Some(p), _) => fs::write(&p, manifest.to_json()).with_context(|| format!("writing {}", p.display())).internal(),
        (None, Some(out)) => manifest.write_beside(&out).map(|_| ()).internal(),
        (None, None) => {
            eprintln!("{}", serde_json::to_string(&manifest).expect("manifest serializes"));
            Ok(())
        }
    }
}

type Outcome = (ManifestBuilder, Option<PathBuf>);

impl KbArgs {
    fn paths(&self) -> anyhow::Result<(PathBuf, PathBuf)> {
        let with_ext = |ext: &str| {
            self.kb.as_ref().map(|p| {
                let mut s = p.as_os_str().to_owned();
                s.push(format!(".{ext}"));
                PathBuf::from(s)
            })
        };
        let schema = self.schema.clone().or_else(|| with_ext("schema"));
        let triples = self.triples.clone().or_else(|| with_ext("triples"));
        match (schema, triples) {
            (Some(s), Some(t)) => Ok((s, t)),
            _ => bail!("a knowledge base is required: pass --kb <prefix> or both --schema and --triples"),
        }
    }

    fn load(&self, manifest: &mut ManifestBuilder) -> Result<KnowledgeBase, Failure> {
        let (schema, triples) = self.paths().user()?;
        manifest.input(&schema).with_context(|| format!("reading {}", schema.display())).user()?;
        manifest.input(&triples).with_context(|| format!("reading {}", triples.display())).user()?;
        manifest.time("load_kb", || KnowledgeBase::load(&triples, &schema)).user()
    }
}

impl ConstraintArgs {
    fn build(&self) -> anyhow::Result<Constraints> {
        let mut c = Constraints::default();
        for r in &self.deny_relation {
            c = c.deny_relation(r.clone());
        }
        for f in &self.deny_function {
            c = c.deny_function(f.parse::<Function>()?);
        }
        Ok(c)
    }
}

fn parse_checked(kb: &KnowledgeBase, text: &str) -> anyhow::Result<Plan> {
    let plan = parse_plan(text)?;
    type_check(&plan, kb)?;
    Ok(plan)
}

fn write_output(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).internal()?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display())).internal()
}

fn cmd_exec(kb_args: &KbArgs, plan: &str) -> Result<Outcome, Failure> {
    let mut m = ManifestBuilder::new("exec", json!({ "plan": plan }));
    let kb = kb_args.load(&mut m)?;
    let plan = parse_checked(&kb, plan).user()?;
    let denotation = m.time("execute", || execute(&kb, &plan)).user()?;
    println!("{}", denotation.to_json());
    Ok((m, None))
}

fn cmd_enumerate(
    kb_args: &KbArgs,
    plans: &[String],
    constraints: &ConstraintArgs,
    max_candidates: Option<usize>,
) -> Result<Outcome, Failure> {
    let mut c = constraints.build().user()?;
    c.max_candidates = max_candidates;
    let mut m = ManifestBuilder::new("enumerate", json!({ "plans": plans, "constraints": c }));
    let kb = kb_args.load(&mut m)?;
    let beam: Vec<Plan> = plans.iter().map(|p| parse_checked(&kb, p)).collect::<anyhow::Result<_>>().user()?;
    let candidates = m.time("enumerate", || candidate_plans(&kb, &beam, &c)).user()?;
    let mut stdout = std::io::stdout().lock();
    for p in candidates {
        writeln!(stdout, "{p}").internal()?;
    }
    Ok((m, None))
}

fn load_pool(path: &Path) -> anyhow::Result<Vec<InContextExample>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut pool = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: serde_json::Value =
            serde_json::from_str(line).with_context(|| format!("{}:{}: invalid JSON", path.display(), i + 1))?;
        let field = |k: &str| v.get(k).and_then(|x| x.as_str());
        let (Some(utterance), Some(plan)) = (field("utterance"), field("plan").or_else(|| field("gold_plan"))) else {
            bail!("{}:{}: expected `utterance` and `plan` (or `gold_plan`)", path.display(), i + 1);
        };
        let plan = parse_plan(plan).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        pool.push(InContextExample::new(utterance, plan.render()));
    }
    Ok(pool)
}

fn build_scorer(args: &SearchArgs, m: &mut ManifestBuilder) -> anyhow::Result<Box<dyn Scorer>> {
    let (kind, rest) = match args.scorer.split_once(':') {
        Some((k, r)) => (k, Some(r)),
        None => (args.scorer.as_str(), None),
    };
    match (kind, rest) {
        ("lexical", None) => Ok(Box::new(LexicalScorer)),
        ("linear", Some(path)) => {
            m.input(path).with_context(|| format!("reading {path}"))?;
            Ok(Box::new(LinearScorer::new(RankingModel::load(path)?)?))
        }
        ("remote", url) => {
            let url = args
                .scorer_url
                .as_deref()
                .or(url)
                .ok_or_else(|| anyhow!("remote scorer needs a URL: remote:<URL> or GROUNDPLAN_SCORER_URL"))?;
            if !(args.scorer_timeout.is_finite() && args.scorer_timeout > 0.0) {
                bail!("scorer timeout must be a positive number of seconds");
            }
            let policy = RetryPolicy { timeout: Duration::from_secs_f64(args.scorer_timeout), ..Default::default() };
            let mut scorer = RemoteScorer::new(url, policy)?;
            if let Some(pool) = &args.pool {
                m.input(pool)?;
                scorer = scorer.with_example_pool(load_pool(pool)?, args.k)?;
            }
            Ok(Box::new(scorer))
        }
        _ => bail!("unknown scorer `{}`: expected lexical, linear:<path> or remote:<URL>", args.scorer),
    }
}

fn search_one(
    kb: &KnowledgeBase,
    ex: &DatasetExample,
    scorer: &dyn Scorer,
    config: &SearchConfig,
    trace_dir: Option<&Path>,
) -> Result<PredictionRow, Failure> {
    let failed = |e: String| PredictionRow { qid: ex.qid.clone(), plan: None, score: None, steps: None, error: Some(e) };
    let trace = match search(kb, &ex.utterance, &ex.initial_plans(), scorer, config) {
        Ok(t) => t,
        Err(e) => return Ok(failed(e.to_string())),
    };
    if let Some(dir) = trace_dir {
        write_output(&dir.join(format!("{}.json", ex.qid)), &trace.to_json())?;
    }
    Ok(match &trace.best {
        Some(b) => PredictionRow {
            qid: ex.qid.clone(),
            plan: Some(b.plan.render()),
            score: Some(b.score),
            steps: Some(trace.termination_step),
            error: None,
        },
        None => PredictionRow { steps: Some(trace.termination_step), ..failed("no candidates".into()) },
    })
}

fn cmd_search(args: SearchArgs) -> Result<Outcome, Failure> {
    let constraints = args.constraints.build().user()?;
    let config = SearchConfig { beam_size: args.beam, max_steps: args.max_steps, constraints };
    config.validate().user()?;
    let snapshot = json!({ "scorer": args.scorer, "config": config, "jobs": args.jobs, "k": args.k });
    let mut m = ManifestBuilder::new("search", snapshot);
    let kb = args.kb.load(&mut m)?;
    m.input(&args.dataset).with_context(|| format!("reading {}", args.dataset.display())).user()?;
    let dataset = load_dataset(&args.dataset).user()?;
    let scorer = build_scorer(&args, &mut m).user()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build().internal()?;
    let trace_dir = args.trace.as_deref();
    let rows: Vec<PredictionRow> = m.time("search", || {
        pool.install(|| {
            dataset
                .par_iter()
                .map(|ex| search_one(&kb, ex, scorer.as_ref(), &config, trace_dir))
                .collect::<Result<_, _>>()
        })
    })?;
    let failures = rows.iter().filter(|r| r.plan.is_none()).count();
    let body: String = rows.iter().map(|r| serde_json::to_string(r).expect("row serializes") + "\n").collect();
    write_output(&args.out, &body)?;
    eprintln!("{} questions, {} without a plan", rows.len(), failures);
    Ok((m, Some(args.out)))
}

fn cmd_train(args: TrainArgs) -> Result<Outcome, Failure> {
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        learning_rate: args.lr.unwrap_or(defaults.learning_rate),
        epochs: args.epochs.unwrap_or(defaults.epochs),
        l2_penalty: args.l2.unwrap_or(defaults.l2_penalty),
        rng_seed: args.seed.unwrap_or(defaults.rng_seed),
        beam_size: args.beam.unwrap_or(defaults.beam_size),
        batch_size: args.batch_size,
        constraints: args.constraints.build().user()?,
    };
    config.validate().user()?;
    let mut m = ManifestBuilder::new("train", serde_json::to_value(&config).expect("config serializes"));
    m.seed(config.rng_seed);
    let kb = args.kb.load(&mut m)?;
    m.input(&args.dataset).with_context(|| format!("reading {}", args.dataset.display())).user()?;
    let dataset = load_dataset(&args.dataset).user()?;
    if let Some(ex) = dataset.iter().find(|e| e.gold_plan.is_none()) {
        return Err(anyhow!("example `{}` has no gold plan", ex.qid)).user();
    }
    let report = m
        .time("train", || {
            groundplan::train::train_with_progress(&kb, &dataset, &config, |epoch, loss| {
                eprintln!("epoch {epoch}: loss {loss:.6}")
            })
        })
        .user()?;
    let with_suffix = |suffix: &str| {
        let mut s = args.out.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    if !report.skipped.is_empty() {
        let skipped = serde_json::to_string_pretty(&report.skipped).expect("report serializes");
        write_output(&with_suffix(".skipped.json"), &skipped)?;
        eprintln!("{} of {} examples skipped", report.skipped.len(), dataset.len());
    }
    if report.skipped.len() * 2 > dataset.len() {
        return Err(anyhow!(
            "{} of {} examples have unreproducible gold plans; see {}",
            report.skipped.len(),
            dataset.len(),
            with_suffix(".skipped.json").display()
        ))
        .user();
    }
    write_output(&args.out, &report.model.to_json())?;
    write_output(&with_suffix(".losses.csv"), &report.loss_csv())?;
    Ok((m, Some(args.out)))
}

fn cmd_eval(kb_args: &KbArgs, dataset: &Path, predictions: &Path, out: &Path) -> Result<Outcome, Failure> {
    let mut m = ManifestBuilder::new("eval", json!({}));
    let kb = kb_args.load(&mut m)?;
    m.input(dataset).with_context(|| format!("reading {}", dataset.display())).user()?;
    m.input(predictions).with_context(|| format!("reading {}", predictions.display())).user()?;
    let dataset = load_dataset(dataset).user()?;
    let predictions = load_predictions(predictions).user()?;
    let report = m.time("evaluate", || evaluate(&kb, &dataset, &predictions)).user()?;
    let table = report.summary_table();
    write_output(out, &report.to_json())?;
    let mut txt = out.as_os_str().to_owned();
    txt.push(".txt");
    write_output(Path::new(&txt), &table)?;
    print!("{table}");
    Ok((m, Some(out.to_path_buf())))
}

fn cmd_prompt(pool_path: &Path, query: &str, k: usize) -> Result<Outcome, Failure> {
    let mut m = ManifestBuilder::new("prompt", json!({ "query": query, "k": k }));
    if k == 0 {
        return Err(anyhow!("--k must be at least 1")).user();
    }
    m.input(pool_path).with_context(|| format!("reading {}", pool_path.display())).user()?;
    let pool = load_pool(pool_path).user()?;
    let examples = select_in_context_examples(&pool, query, k).user()?;
    println!("{}", build_prompt(&examples, query));
    Ok((m, None))
}

fn cmd_mock(addr: &str, fail_every: Option<usize>, fault: Fault) -> Result<Outcome, Failure> {
    let mode = match fault {
        Fault::Unavailable => FaultMode::Unavailable,
        Fault::Broken => FaultMode::BrokenResponse,
    };
    let faults = fail_every.map(|every| FaultInjection { every, mode });
    let server = MockScorerServer::start(addr, faults).with_context(|| format!("binding {addr}")).user()?;
    eprintln!("mock scorer listening on {}", server.url());
    server.join();
    Ok((ManifestBuilder::new("mock-scorer", json!({ "addr": addr, "fail_every": fail_every })), None))
}
