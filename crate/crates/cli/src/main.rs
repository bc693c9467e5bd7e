use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use ssv_core::dsl::{parse_program, CheckType, Expr, Scope, SegmentedProgram};
use ssv_core::harness::{write_report, AblationGrid, EvalOptions, Evaluator, ReportFormat};
use ssv_core::llm::{Gateway, HttpLlm, HttpSettings, Llm, PromptSet, ProviderMode, TranscriptStore};
use ssv_core::oracle::{count_models, oracle_check};
use ssv_core::pipeline::{RepairPolicy, SsvConfig};
use ssv_core::smt::{ProcessSolver, SatStatus, Smt, SmtCache};
use ssv_core::task::{load_dataset, parse_dataset, parse_single_task, OptionLabel};
use ssv_core::verify::{is_well_formed, load_instantiations, verify_instantiations};

/// Answers multiple-choice reasoning tasks with solver-checked programs.
#[derive(Parser, Debug)]
#[command(name = "ssv", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// JSON configuration file; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for tasks and temperatures (default: logical cores).
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    /// Solver command reading SMT-LIB 2 on stdin.
    #[arg(long, global = true, default_value = "z3 -in")]
    solver_cmd: String,
    #[arg(long, global = true)]
    check_timeout_ms: Option<u64>,
    /// JSON file of solver results, loaded before and saved after the command.
    #[arg(long, global = true)]
    solver_cache: Option<PathBuf>,
    #[arg(long, global = true)]
    provider: Option<ProviderMode>,
    /// Transcript store for record and replay modes.
    #[arg(long, global = true)]
    transcripts: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<String>,
    /// Chat completions URL for live and record modes.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    /// Comma-separated sampling temperatures, tried in order.
    #[arg(long, global = true, value_delimiter = ',')]
    temperatures: Option<Vec<f64>>,
    #[arg(long, global = true)]
    max_repairs: Option<usize>,
    #[arg(long, global = true)]
    max_error_refines: Option<usize>,
    #[arg(long, global = true)]
    grounding_bound: Option<u64>,
    #[arg(long, global = true)]
    max_tokens: Option<u32>,
    /// on_verification_failure or on_missing_answer.
    #[arg(long, global = true)]
    repair_policy: Option<String>,
    #[arg(long, global = true)]
    parallel_temperatures: Option<bool>,
    #[arg(long, global = true)]
    compositional: Option<bool>,
    #[arg(long, global = true)]
    max_in_flight: Option<usize>,
    #[arg(long, global = true)]
    per_minute: Option<usize>,
    #[arg(long, global = true)]
    request_timeout_s: Option<u64>,
    /// Directory of prompt templates replacing the built-in ones.
    #[arg(long, global = true)]
    prompts: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one task and print the result as JSON.
    Run {
        /// A task as a JSON object, or a dataset file holding it.
        #[arg(long)]
        task: PathBuf,
        /// Task id; required when the file holds more than one task.
        #[arg(long)]
        id: Option<String>,
    },
    /// Evaluate a dataset and write reports.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory for report.json, report.csv and ablation.json.
        #[arg(long)]
        out: PathBuf,
        /// Ablation grid JSON with max_repairs and temperature_prefixes axes.
        #[arg(long)]
        ablate: Option<PathBuf>,
        #[arg(long)]
        limit: Option<usize>,
        /// Leave wall-clock timings out of the reports.
        #[arg(long)]
        no_timing: bool,
    },
    /// Check a program against instantiations without any model calls.
    Verify {
        #[arg(long)]
        program: PathBuf,
        /// JSON list of {constraint, polarity, code} objects.
        #[arg(long)]
        instantiations: PathBuf,
        /// Also report the well-formedness checks.
        #[arg(long)]
        well_formed: bool,
    },
    /// Decide a finite program by exhaustive enumeration.
    Oracle {
        #[arg(long)]
        program: PathBuf,
        /// Print model counts instead of the option verdicts.
        #[arg(long)]
        count: bool,
    },
}

/// Errors from bad input exit with 2, everything else with 1.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.global.log_level).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(g: &Global) -> Result<SsvConfig, Failure> {
    let mut c = match &g.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))
                .map_err(usage)?;
            serde_json::from_str(&text)
                .with_context(|| format!("invalid configuration {}", path.display()))
                .map_err(usage)?
        }
        None => SsvConfig::default(),
    };
    macro_rules! set {
        ($flag:expr => $field:expr) => {
            if let Some(v) = $flag.clone() {
                $field = v;
            }
        };
    }
    set!(g.check_timeout_ms => c.check_timeout_ms);
    set!(g.model => c.model);
    set!(g.temperatures => c.temperatures);
    set!(g.max_repairs => c.max_repairs);
    set!(g.max_error_refines => c.max_error_refines);
    set!(g.grounding_bound => c.grounding_bound);
    set!(g.max_tokens => c.max_tokens);
    set!(g.parallel_temperatures => c.parallel_temperatures);
    set!(g.compositional => c.compositional);
    set!(g.provider => c.provider.mode);
    set!(g.max_in_flight => c.provider.max_in_flight);
    set!(g.per_minute => c.provider.per_minute);
    set!(g.request_timeout_s => c.provider.request_timeout_s);
    if let Some(p) = &g.repair_policy {
        c.repair_policy = serde_json::from_value::<RepairPolicy>(serde_json::Value::String(p.clone()))
            .map_err(|_| usage(anyhow!("unknown repair policy `{p}`")))?;
    }
    if let Some(t) = &g.transcripts {
        c.provider.transcripts = Some(t.display().to_string());
    }
    if let Some(e) = &g.endpoint {
        c.provider.endpoint = Some(e.clone());
    }
    c.validate().map_err(usage)?;
    Ok(c)
}

fn solver(g: &Global, config: Option<&SsvConfig>) -> Result<Smt, Failure> {
    let backend = ProcessSolver::new(&g.solver_cmd).map_err(usage)?;
    let mut smt = Smt::new(Arc::new(backend));
    if let Some(path) = &g.solver_cache {
        smt = smt.with_cache(Arc::new(SmtCache::load(path).map_err(usage)?));
    }
    let timeout = config.map(|c| c.check_timeout_ms).or(g.check_timeout_ms);
    if let Some(ms) = timeout {
        smt = smt.with_budget_ms(ms);
    }
    Ok(smt)
}

fn save_cache(g: &Global, smt: &Smt) -> Result<(), Failure> {
    if let Some(path) = &g.solver_cache {
        smt.cache().save(path).context("saving solver cache")?;
    }
    Ok(())
}

/// A transcript store to save when the command finishes.
type Recording = Option<(Arc<TranscriptStore>, PathBuf)>;

/// The provider chain for the configured mode, plus the store to save afterwards.
fn provider(c: &SsvConfig) -> Result<(Arc<dyn Llm>, Recording), Failure> {
    let http = || -> Result<Arc<dyn Llm>, Failure> {
        let mut settings = HttpSettings {
            timeout: Duration::from_secs(c.provider.request_timeout_s),
            max_in_flight: c.provider.max_in_flight,
            per_minute: c.provider.per_minute,
            ..HttpSettings::default()
        };
        if let Some(e) = &c.provider.endpoint {
            settings.endpoint = e.clone();
        }
        Ok(Arc::new(HttpLlm::from_env(settings).map_err(usage)?))
    };
    let transcripts = || {
        c.provider
            .transcripts
            .as_ref()
            .map(PathBuf::from)
            .ok_or_else(|| usage(anyhow!("{} mode needs --transcripts", mode_name(c.provider.mode))))
    };
    Ok(match c.provider.mode {
        ProviderMode::Live => (Arc::new(Gateway::live(http()?)), None),
        ProviderMode::Replay => {
            let path = transcripts()?;
            if !path.exists() {
                return Err(usage(anyhow!("transcript store {} does not exist", path.display())));
            }
            let store = Arc::new(TranscriptStore::load(&path).map_err(usage)?);
            (Arc::new(Gateway::replay(store)), None)
        }
        ProviderMode::Record => {
            let path = transcripts()?;
            let store = Arc::new(TranscriptStore::load(&path).map_err(usage)?);
            (Arc::new(Gateway::record(store.clone(), http()?)), Some((store, path)))
        }
    })
}

fn mode_name(m: ProviderMode) -> &'static str {
    match m {
        ProviderMode::Live => "live",
        ProviderMode::Record => "record",
        ProviderMode::Replay => "replay",
    }
}

fn prompts(g: &Global) -> Result<PromptSet, Failure> {
    match &g.prompts {
        Some(dir) => PromptSet::from_dir(dir).map_err(usage),
        None => Ok(PromptSet::builtin()),
    }
}

fn read_program(path: &Path) -> Result<SegmentedProgram, Failure> {
    let src = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(usage)?;
    parse_program(&src)
        .with_context(|| format!("{}", path.display()))
        .map_err(usage)
}

/// Prints to stdout; a closed pipe (as with `| head`) is not an error.
fn print_json<T: serde::Serialize>(value: &T) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    if let Some(n) = g.parallelism {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    match &cli.command {
        Command::Run { task, id } => {
            let config = load_config(g)?;
            let text = std::fs::read_to_string(task)
                .with_context(|| format!("cannot read {}", task.display()))
                .map_err(usage)?;
            if id.is_none() {
                if let Ok((_, tasks)) = parse_dataset(&text, None) {
                    if tasks.len() > 1 {
                        let n = tasks.len();
                        return Err(usage(anyhow!("{} holds {n} tasks; pick one with --id", task.display())));
                    }
                }
            }
            let task = parse_single_task(&text, id.as_deref())
                .with_context(|| format!("{}", task.display()))
                .map_err(usage)?;
            let (llm, record) = provider(&config)?;
            let smt = solver(g, Some(&config))?;
            let eval = Evaluator {
                llm,
                smt: smt.clone(),
                prompts: prompts(g)?,
            };
            let result = eval.ssv(config).run(&task);
            print_json(&result);
            finish(g, &smt, record)
        }
        Command::Eval {
            dataset,
            out,
            ablate,
            limit,
            no_timing,
        } => {
            let config = load_config(g)?;
            let tasks = load_dataset(dataset, *limit).map_err(usage)?;
            let grid: Option<AblationGrid> = match ablate {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("cannot read {}", path.display()))
                        .map_err(usage)?;
                    Some(serde_json::from_str(&text).context("invalid ablation grid").map_err(usage)?)
                }
                None => None,
            };
            log::info!("{} tasks, provider {}", tasks.len(), mode_name(config.provider.mode));
            let (llm, record) = provider(&config)?;
            let smt = solver(g, Some(&config))?;
            let eval = Evaluator {
                llm,
                smt: smt.clone(),
                prompts: prompts(g)?,
            };
            let opts = EvalOptions {
                parallelism: g.parallelism.unwrap_or(0),
                timing: !no_timing,
            };
            std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
            let (records, metrics) = eval.evaluate(&config, &tasks, opts).context("evaluation")?;
            write_report(&records, &metrics, &out.join("report.json"), ReportFormat::Json).context("writing report.json")?;
            write_report(&records, &metrics, &out.join("report.csv"), ReportFormat::Csv).context("writing report.csv")?;
            println!("{}", metrics.summary());
            if let Some(grid) = grid {
                let cells = eval.ablate(&config, &tasks, &grid, opts).context("ablation")?;
                let text = serde_json::to_string_pretty(&cells).expect("serializable") + "\n";
                std::fs::write(out.join("ablation.json"), text).context("writing ablation.json")?;
                for c in &cells {
                    println!("max_repairs={} temperatures={:?}: {}", c.max_repairs, c.temperatures, c.metrics.summary());
                }
            }
            finish(g, &smt, record)
        }
        Command::Verify {
            program,
            instantiations,
            well_formed,
        } => {
            let p = read_program(program)?;
            let insts = load_instantiations(instantiations).map_err(usage)?;
            let smt = solver(g, None)?;
            let outcome = verify_instantiations(&smt, &p, &insts).context("verification")?;
            if *well_formed {
                let answer = smt.execute_program(&p).context("executing program")?;
                let report = is_well_formed(&smt, &p, &answer).context("well-formedness")?;
                print_json(&serde_json::json!({ "outcome": outcome, "wellFormed": report, "answer": answer.answer }));
            } else {
                print_json(&outcome);
            }
            save_cache(g, &smt)
        }
        Command::Oracle { program, count } => {
            let p = read_program(program)?;
            let scope = Scope::for_program(&p).map_err(usage)?;
            let mut base = p.init.preconditions.clone();
            base.extend(p.constraint_exprs());
            if *count {
                let with = |e: &Expr| [base.clone(), vec![e.clone()]].concat();
                let models = count_models(&scope, &base).map_err(usage)?;
                let mut per_option = serde_json::Map::new();
                for o in &p.options {
                    let n = count_models(&scope, &with(&o.check)).map_err(usage)?;
                    per_option.insert(o.label.to_string(), n.into());
                }
                print_json(&serde_json::json!({ "models": models, "perOption": per_option }));
            } else {
                let mut passing: Vec<OptionLabel> = Vec::new();
                for o in &p.options {
                    if oracle_option(&scope, &base, &o.check_type, &o.check).map_err(usage)? {
                        passing.push(o.label);
                    }
                }
                let answer = (passing.len() == 1).then(|| passing[0]);
                print_json(&serde_json::json!({ "passing": passing, "answer": answer }));
            }
            Ok(())
        }
    }
}

/// An option verdict from enumeration alone, mirroring the solver's check types.
fn oracle_option(
    scope: &Scope,
    base: &[Expr],
    check: &CheckType,
    prop: &Expr,
) -> Result<bool, ssv_core::oracle::OracleError> {
    let with = |e: Expr| -> Vec<Expr> { base.iter().cloned().chain([e]).collect() };
    Ok(match check {
        CheckType::Sat => oracle_check(scope, &with(prop.clone()))? == SatStatus::Sat,
        CheckType::Unsat => oracle_check(scope, &with(prop.clone()))? == SatStatus::Unsat,
        CheckType::Valid => {
            oracle_check(scope, base)? == SatStatus::Sat
                && oracle_check(scope, &with(Expr::not(prop.clone())))? == SatStatus::Unsat
        }
    })
}

fn finish(g: &Global, smt: &Smt, record: Recording) -> Result<(), Failure> {
    if let Some((store, path)) = record {
        store.save(&path).context("saving transcripts")?;
    }
    save_cache(g, smt)
}
