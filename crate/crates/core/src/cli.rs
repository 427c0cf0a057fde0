//! Command-line front end: `describe`, `compress`, `simulate` and `compare`.
//!
//! Exit codes: 0 on success, 2 when an input fails validation, 3 when a
//! one-shot compression finds no feasible plan, 4 on I/O errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::arch::{count_network, validate, NetworkSpec};
use crate::context::{simulate, weights_from_battery, write_event_log, AppConfig, ContextState, ContextTrace, Deployment, SimulationConfig, TriggerPolicy, WeightRule, DEFAULT_A_THRESHOLD};
use crate::costmodel::{DeviceProfile, MIB};
use crate::error::{Error, Result};
use crate::operators::{default_catalog, OperatorCatalog};
use crate::oracle::{synthetic_profile, AccuracyProfile};
use crate::search::{exhaustive_search, greedy_search, runtime3c, MutationConfig, SearchBudget, SearchInputs, SearchOutcome, SearchResultRecord, DEFAULT_EXHAUSTIVE_CAP};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ctxcompress", version, about = "Context-adaptive CNN compression search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print per-layer and total cost counts of a network file.
    Describe {
        backbone: PathBuf,
    },
    /// Run one search under a static context and write the result as JSON.
    Compress(CompressArgs),
    /// Replay a context trace and write one JSON line per adaptation event.
    Simulate(SimulateArgs),
    /// Run every optimizer on the same instance and write a CSV table.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Optimizer {
    Runtime3c,
    Greedy,
    Exhaustive,
}

impl Optimizer {
    fn name(self) -> &'static str {
        match self {
            Optimizer::Runtime3c => "runtime3c",
            Optimizer::Greedy => "greedy",
            Optimizer::Exhaustive => "exhaustive",
        }
    }
}

/// Inputs shared by every searching command.
#[derive(Debug, Args)]
pub struct EngineArgs {
    #[arg(long)]
    pub backbone: PathBuf,
    #[arg(long)]
    pub device: PathBuf,
    /// Accuracy profile file.
    #[arg(long, conflicts_with = "synthetic_seed", required_unless_present = "synthetic_seed")]
    pub profile: Option<PathBuf>,
    /// Generate a synthetic accuracy profile with this seed instead.
    #[arg(long)]
    pub synthetic_seed: Option<u64>,
    /// Operator catalog file; the nine default groups when omitted.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Maximum accuracy loss, as a fraction.
    #[arg(long, default_value_t = DEFAULT_A_THRESHOLD)]
    pub a_threshold: f64,
    /// Latency budget: seconds, or with an `ms`/`us`/`s` suffix.
    #[arg(long, value_parser = parse_seconds)]
    pub t_budget: f64,
    /// Mutation seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report zero wall times so outputs are byte-identical across runs.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Memory budget: bytes, or with a `KiB`/`MiB`/`KB`/`MB` suffix.
    #[arg(long, value_parser = parse_bytes)]
    pub s_budget: f64,
    /// Remaining battery fraction that sets the objective weights.
    #[arg(long, default_value_t = 1.0)]
    pub battery: f64,
    #[arg(long, value_enum, default_value_t = WeightRuleArg::OneMinusBattery)]
    pub weight_rule: WeightRuleArg,
    #[arg(long, value_enum, default_value_t = Optimizer::Runtime3c)]
    pub optimizer: Optimizer,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Context trace CSV.
    #[arg(long)]
    pub trace: PathBuf,
    /// `periodic:<seconds>`, `on_change:<eps>` or `both:<seconds>:<eps>`.
    #[arg(long, default_value = "periodic:3600")]
    pub trigger: String,
    #[arg(long, value_enum, default_value_t = WeightRuleArg::OneMinusBattery)]
    pub weight_rule: WeightRuleArg,
    /// Joules; drains the battery when the trace leaves it blank.
    #[arg(long, default_value_t = 36_000.0)]
    pub battery_capacity: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, value_parser = parse_bytes)]
    pub s_budget: f64,
    #[arg(long, default_value_t = 1.0)]
    pub battery: f64,
    #[arg(long, value_enum, default_value_t = WeightRuleArg::OneMinusBattery)]
    pub weight_rule: WeightRuleArg,
    /// Largest classic search space the exhaustive baseline may enumerate.
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP)]
    pub exhaustive_cap: u128,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WeightRuleArg {
    OneMinusBattery,
    Battery,
}

impl From<WeightRuleArg> for WeightRule {
    fn from(w: WeightRuleArg) -> Self {
        match w {
            WeightRuleArg::OneMinusBattery => WeightRule::OneMinusBattery,
            WeightRuleArg::Battery => WeightRule::Battery,
        }
    }
}

/// Parses `0.03`, `30ms`, `30000us` or `0.03s` into seconds.
pub fn parse_seconds(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let (num, scale) = if let Some(v) = s.strip_suffix("ms") {
        (v, 1e-3)
    } else if let Some(v) = s.strip_suffix("us") {
        (v, 1e-6)
    } else if let Some(v) = s.strip_suffix('s') {
        (v, 1.0)
    } else {
        (s, 1.0)
    };
    positive(num, scale).ok_or_else(|| format!("bad duration {s:?}"))
}

/// Parses `4096`, `1.5MiB`, `512KiB`, `2MB` or `2KB` into bytes.
pub fn parse_bytes(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let units = [("MiB", MIB), ("KiB", 1024.0), ("MB", 1e6), ("KB", 1e3), ("B", 1.0)];
    let (num, scale) = units
        .iter()
        .find_map(|&(u, k)| s.strip_suffix(u).map(|v| (v, k)))
        .unwrap_or((s, 1.0));
    positive(num, scale).ok_or_else(|| format!("bad size {s:?}"))
}

fn positive(num: &str, scale: f64) -> Option<f64> {
    let v: f64 = num.trim().parse().ok()?;
    (v > 0.0 && v.is_finite()).then_some(v * scale)
}

/// Parses the arguments and runs the command, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(&cli.command, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

/// Runs one command, writing human-readable output to `out`.
pub fn execute(command: &Command, out: &mut dyn std::io::Write) -> Result<i32> {
    match command {
        Command::Describe { backbone } => cmd_describe(backbone, out),
        Command::Compress(args) => cmd_compress(args, out),
        Command::Simulate(args) => cmd_simulate(args, out),
        Command::Compare(args) => cmd_compare(args, out),
    }
}

pub fn cmd_describe(path: &Path, out: &mut dyn std::io::Write) -> Result<i32> {
    let net = NetworkSpec::load(path)?;
    let violations = validate(&net);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("invalid network: {v}");
        }
        return Ok(EXIT_VALIDATION);
    }
    out.write_all(describe_table(&net)?.as_bytes())?;
    Ok(EXIT_OK)
}

/// The table printed by `describe`.
pub fn describe_table(net: &NetworkSpec) -> Result<String> {
    let cost = count_network(net)?;
    let mut s = String::new();
    let ratio = |a: u64, b: u64| if b == 0 { "-".to_string() } else { format!("{:.2}", a as f64 / b as f64) };
    writeln!(s, "network {} (base accuracy {})", net.name, net.base_accuracy).unwrap();
    writeln!(
        s,
        "{:>5}  {:<20} {:>6} {:>6} {:>3} {:>4} {:>14} {:>12} {:>10} {:>10} {:>10}",
        "layer", "kind", "M", "N", "k", "S_A", "C", "S_p", "S_a", "C/S_p", "C/S_a"
    )
    .unwrap();
    for (layer, c) in net.layers.iter().zip(&cost.per_layer) {
        let kind = format!("{:?}{}", layer.kind, if layer.compressible { "*" } else { "" });
        writeln!(
            s,
            "{:>5}  {:<20} {:>6} {:>6} {:>3} {:>4} {:>14} {:>12} {:>10} {:>10} {:>10}",
            layer.index,
            kind,
            layer.in_channels,
            layer.out_channels,
            layer.kernel,
            layer.out_spatial,
            c.macs,
            c.params,
            c.activations,
            ratio(c.macs, c.params),
            ratio(c.macs, c.activations)
        )
        .unwrap();
    }
    writeln!(
        s,
        "{:>5}  {:<20} {:>6} {:>6} {:>3} {:>4} {:>14} {:>12} {:>10} {:>10} {:>10}",
        "total",
        "",
        "",
        "",
        "",
        "",
        cost.macs,
        cost.params,
        cost.activations,
        ratio(cost.macs, cost.params),
        ratio(cost.macs, cost.activations)
    )
    .unwrap();
    writeln!(s, "(* compressible)").unwrap();
    Ok(s)
}

/// Files loaded for a search, validated against each other.
pub struct Loaded {
    pub backbone: NetworkSpec,
    pub catalog: OperatorCatalog,
    pub profile: AccuracyProfile,
    pub device: DeviceProfile,
}

impl Loaded {
    pub fn from_args(args: &EngineArgs) -> Result<Self> {
        let backbone = NetworkSpec::load(&args.backbone)?;
        crate::arch::ensure_valid(&backbone)?;
        let catalog = match &args.catalog {
            Some(p) => OperatorCatalog::load(p)?,
            None => default_catalog(),
        };
        let device = DeviceProfile::load(&args.device)?;
        let profile = match (&args.profile, args.synthetic_seed) {
            (Some(p), _) => AccuracyProfile::load(p)?,
            (None, Some(seed)) => synthetic_profile(&backbone, &catalog, seed)?,
            (None, None) => return Err(Error::InvalidValue("either --profile or --synthetic-seed is required".into())),
        };
        profile.validate_for(&backbone, &catalog)?;
        Ok(Loaded {
            backbone,
            catalog,
            profile,
            device,
        })
    }

    pub fn deployment(&self) -> Deployment<'_> {
        Deployment {
            backbone: &self.backbone,
            catalog: &self.catalog,
            profile: &self.profile,
            device: &self.device,
        }
    }

    fn inputs<'a>(&'a self, context: &'a ContextState) -> SearchInputs<'a> {
        SearchInputs::new(&self.backbone, &self.catalog, &self.profile, &self.device, context)
    }
}

fn static_context(engine: &EngineArgs, s_budget: f64, battery: f64, rule: WeightRuleArg) -> Result<ContextState> {
    let (l1, l2) = weights_from_battery(battery, rule.into())?;
    let mut ctx = ContextState::fixed(engine.a_threshold, engine.t_budget, s_budget, l1, l2);
    ctx.battery_remaining = battery;
    ctx.validate()?;
    Ok(ctx)
}

fn run_optimizer(opt: Optimizer, inputs: &SearchInputs, seed: u64, cap: u128) -> Result<SearchOutcome> {
    match opt {
        Optimizer::Runtime3c => runtime3c(inputs, &SearchBudget::default(), &MutationConfig::with_seed(seed)),
        Optimizer::Greedy => greedy_search(inputs, None),
        Optimizer::Exhaustive => exhaustive_search(inputs, cap),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

pub fn cmd_compress(args: &CompressArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let loaded = Loaded::from_args(&args.engine)?;
    let ctx = static_context(&args.engine, args.s_budget, args.battery, args.weight_rule)?;
    let inputs = loaded.inputs(&ctx);
    let outcome = run_optimizer(args.optimizer, &inputs, args.engine.seed, DEFAULT_EXHAUSTIVE_CAP)?;
    let mut record = outcome.to_record(args.optimizer.name(), &loaded.catalog);
    if args.engine.no_timestamp {
        record.wall_time_seconds = 0.0;
    }
    write_file(&args.out, &(record.to_json() + "\n"))?;
    writeln!(out, "{}", summary_line(&record))?;
    Ok(if record.feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn summary_line(r: &SearchResultRecord) -> String {
    let status = if r.feasible {
        "feasible".to_string()
    } else {
        let v: Vec<String> = r.violated.iter().map(|c| c.to_string()).collect();
        format!("infeasible ({})", v.join(", "))
    };
    format!(
        "{}: encoding {} A {:.4} T {:.3} ms E {:.2} evaluations {} wall {:.3} ms, {status}",
        r.optimizer,
        r.encoding,
        r.report.accuracy,
        r.report.latency * 1e3,
        r.report.energy_proxy,
        r.evaluations,
        r.wall_time_seconds * 1e3
    )
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let loaded = Loaded::from_args(&args.engine)?;
    let trace = ContextTrace::load(&args.trace)?;
    let policy: TriggerPolicy = args.trigger.parse()?;
    let app = AppConfig {
        a_threshold: args.engine.a_threshold,
        t_budget: args.engine.t_budget,
        weight_rule: args.weight_rule.into(),
    };
    let mut config = SimulationConfig::new(app, policy);
    config.mutation = MutationConfig::with_seed(args.engine.seed);
    config.battery_capacity = args.battery_capacity;
    let mut events = simulate(&loaded.deployment(), &trace, &config)?;
    if args.engine.no_timestamp {
        events.iter_mut().for_each(|e| e.search_wall_time = 0.0);
    }
    let mut log = Vec::new();
    write_event_log(&events, &mut log)?;
    write_file(&args.out, std::str::from_utf8(&log).expect("event log is UTF-8"))?;
    for e in &events {
        writeln!(
            out,
            "t={} battery {:.2} S_bgt {:.0} B -> {} S {:.0} B T {:.3} ms {}",
            e.t,
            e.context.battery_remaining,
            e.context.s_budget,
            e.encoding,
            e.report.memory_bytes,
            e.report.latency * 1e3,
            if e.feasible { "feasible" } else { "infeasible" }
        )?;
    }
    writeln!(out, "{} events", events.len())?;
    Ok(EXIT_OK)
}

pub const COMPARE_COLUMNS: [&str; 9] = ["optimizer", "A", "A_loss", "T", "C/S_p", "C/S_a", "E", "evaluations", "wall_time"];

pub fn cmd_compare(args: &CompareArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let loaded = Loaded::from_args(&args.engine)?;
    let ctx = static_context(&args.engine, args.s_budget, args.battery, args.weight_rule)?;
    let inputs = loaded.inputs(&ctx);
    let mut csv_out = csv::Writer::from_writer(Vec::new());
    csv_out.write_record(COMPARE_COLUMNS)?;
    for opt in [Optimizer::Runtime3c, Optimizer::Greedy, Optimizer::Exhaustive] {
        match run_optimizer(opt, &inputs, args.engine.seed, args.exhaustive_cap) {
            Ok(outcome) => {
                let r = outcome.report();
                let wall = if args.engine.no_timestamp { 0.0 } else { outcome.wall_time_seconds };
                csv_out.write_record([
                    opt.name().to_string(),
                    r.accuracy.to_string(),
                    r.accuracy_loss.to_string(),
                    r.latency.to_string(),
                    r.param_intensity.to_string(),
                    r.activation_intensity.to_string(),
                    r.energy_proxy.to_string(),
                    outcome.evaluations.to_string(),
                    wall.to_string(),
                ])?;
                writeln!(out, "{}", summary_line(&outcome.to_record(opt.name(), &loaded.catalog)))?;
            }
            Err(Error::CapExceeded { count, cap }) => {
                let mut row = vec![opt.name().to_string()];
                row.extend(std::iter::repeat_n("skipped".to_string(), COMPARE_COLUMNS.len() - 1));
                csv_out.write_record(&row)?;
                writeln!(out, "{}: skipped ({count} combinations above cap {cap})", opt.name())?;
            }
            Err(e) => return Err(e),
        }
    }
    let bytes = csv_out.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_file(&args.out, std::str::from_utf8(&bytes).expect("csv is UTF-8"))?;
    Ok(EXIT_OK)
}
