//! Command-line front end.
//!
//! ```text
//! enrich-ci ci --config trial.json [--methods naive,umau,tost] [--co-primary] [--out FILE]
//! enrich-ci simulate --config scenario.json [--seed N] [--replicates N] [--out FILE]
//! enrich-ci example
//! ```
//!
//! Exit status is 0 on success, 1 on a numerical failure and 2 on a
//! configuration error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::designs::{self, DecisionRule, RuleKind, Stage1Summary, Stage2Summary, TrialDesign};
use crate::error::{Error, Result};
use crate::intervals::{IntervalEstimate, Method, Target};
use crate::sim::{self, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "enrich-ci", version, about = "Conditional confidence intervals for two-stage enrichment trials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Intervals from stage summaries in a JSON config.
    Ci(RunArgs),
    /// Monte Carlo coverage study from a JSON scenario.
    Simulate(RunArgs),
    /// Recompute the worked example and check it against the reference table.
    Example(ExampleArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Comma-separated subset of naive, umau, tost.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    co_primary: bool,
}

#[derive(Debug, Args)]
struct ExampleArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RuleConfig {
    #[serde(rename = "type")]
    pub kind: String,
    pub threshold: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Stage2Config {
    #[serde(default)]
    pub means: Vec<Option<f64>>,
    #[serde(default)]
    pub pooled: Option<f64>,
}

/// The JSON run configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub k: Option<usize>,
    pub p: Vec<f64>,
    pub n1: u64,
    pub n2: u64,
    pub sigma: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub rule: RuleConfig,
    #[serde(default)]
    pub methods: Option<Vec<String>>,
    #[serde(default)]
    pub co_primary: bool,
    /// True effects, simulate only.
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    #[serde(default)]
    pub replicates: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Stage 1 means, ci only.
    #[serde(default)]
    pub stage1: Option<Vec<f64>>,
    #[serde(default)]
    pub stage2: Option<Stage2Config>,
}

fn default_alpha() -> f64 {
    0.05
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| e.context(path.display()))
    }

    pub fn design(&self) -> Result<TrialDesign> {
        if let Some(k) = self.k {
            if k != self.p.len() {
                return Err(Error::Config(format!("k = {k} but p has {} entries", self.p.len())));
            }
        }
        TrialDesign::new(self.p.clone(), self.n1, self.n2, self.sigma, self.alpha)
    }

    pub fn rule(&self) -> Result<DecisionRule> {
        Ok(DecisionRule::new(RuleKind::from_name(&self.rule.kind, self.rule.threshold)?, self.co_primary))
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        match &self.methods {
            Some(names) => parse_methods(names),
            None => Ok(Method::ALL.to_vec()),
        }
    }
}

pub fn parse_methods<S: AsRef<str>>(names: &[S]) -> Result<Vec<Method>> {
    if names.is_empty() {
        return Err(Error::Config("methods list is empty".into()));
    }
    let mut out = names.iter().map(|s| s.as_ref().parse::<Method>()).collect::<Result<Vec<_>>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

fn apply_overrides(config: &mut RunConfig, args: &RunArgs) {
    if let Some(s) = args.seed {
        config.seed = Some(s);
    }
    if let Some(r) = args.replicates {
        config.replicates = Some(r);
    }
    if let Some(m) = &args.methods {
        config.methods = Some(m.clone());
    }
    if args.co_primary {
        config.co_primary = true;
    }
}

fn require<T: Clone>(value: &Option<T>, field: &str, command: &str) -> Result<T> {
    value.clone().ok_or_else(|| Error::Config(format!("missing field `{field}` (required by `{command}`)")))
}

fn format_rows(rows: &[IntervalEstimate]) -> String {
    let mut s = String::from("target,method,lower,upper\n");
    for ci in rows {
        let _ = writeln!(s, "{},{},{:.6},{:.6}", ci.target.label(), ci.method, ci.lower, ci.upper);
    }
    s
}

/// The `ci` table: a `decision,<label>` line, then interval rows unless the trial stopped.
pub fn cmd_ci(config: &RunConfig) -> Result<String> {
    let design = config.design()?;
    let rule = config.rule()?;
    let methods = config.methods()?;
    let s1 = Stage1Summary::new(&design, require(&config.stage1, "stage1", "ci")?)?;
    let decision = rule.apply(&design, &s1)?;
    let mut out = format!("decision,{}\n", decision.label(design.k()));
    if decision.is_stop() {
        return Ok(out);
    }
    let s2 = require(&config.stage2, "stage2", "ci")?;
    let s2 = Stage2Summary { means: s2.means, pooled: s2.pooled };
    let rows = designs::confidence_intervals(&design, &decision, &s1, &s2, &methods)?;
    out.push_str(&format_rows(&rows));
    Ok(out)
}

pub fn scenario_from_config(config: &RunConfig) -> Result<Scenario> {
    Scenario::new(
        config.design()?,
        config.rule()?,
        require(&config.deltas, "deltas", "simulate")?,
        require(&config.replicates, "replicates", "simulate")?,
        require(&config.seed, "seed", "simulate")?,
        config.methods()?,
    )
}

/// The `simulate` CSV.
pub fn cmd_simulate(config: &RunConfig) -> Result<String> {
    let scenario = scenario_from_config(config)?;
    Ok(sim::run_scenario(&scenario)?.to_csv())
}

/// One reference interval of the worked example.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCell {
    pub target: Target,
    pub method: Method,
    pub lower: f64,
    pub upper: f64,
}

const TABLE: [(usize, Method, f64, f64); 9] = [
    (0, Method::Naive, -0.024, 0.138),
    (1, Method::Naive, 0.012, 0.242),
    (2, Method::Naive, -0.128, 0.102),
    (0, Method::Umau, -0.079, 0.131),
    (1, Method::Umau, -0.028, 0.240),
    (2, Method::Umau, -0.200, 0.093),
    (0, Method::Tost, -0.078, 0.132),
    (1, Method::Tost, -0.025, 0.240),
    (2, Method::Tost, -0.198, 0.094),
];

/// Tolerance of the worked-example check; the reference is given to three decimals.
pub const EXAMPLE_TOLERANCE: f64 = 1e-3;

fn example_target(ix: usize) -> Target {
    match ix {
        0 => Target::Full,
        m => Target::CoPrimary(m - 1),
    }
}

/// The nine reference intervals of the worked example.
pub fn reference_example() -> Vec<ReferenceCell> {
    TABLE
        .iter()
        .map(|&(t, method, lower, upper)| ReferenceCell { target: example_target(t), method, lower, upper })
        .collect()
}

/// Worked-example inputs: two equally prevalent subpopulations, σ = 0.36,
/// 200 then 100 patients, rule D2 with threshold 0.025 and co-primary
/// estimation.
pub fn example_config() -> RunConfig {
    RunConfig {
        k: Some(2),
        p: vec![0.5, 0.5],
        n1: 200,
        n2: 100,
        sigma: 0.36,
        alpha: 0.05,
        rule: RuleConfig { kind: "d2".into(), threshold: 0.025 },
        methods: None,
        co_primary: true,
        deltas: None,
        replicates: None,
        seed: None,
        stage1: Some(vec![0.113, 0.013]),
        stage2: Some(Stage2Config { means: vec![Some(0.155), Some(-0.064)], pooled: Some(0.045) }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleRow {
    pub computed: IntervalEstimate,
    pub reference: ReferenceCell,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleReport {
    pub estimates: Vec<(Target, f64)>,
    pub rows: Vec<ExampleRow>,
}

impl ExampleReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ExampleRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn render(&self) -> String {
        let mut s = String::from("target,estimate\n");
        for (t, x) in &self.estimates {
            let _ = writeln!(s, "{},{:.6}", t.label(), x);
        }
        s.push_str("\ntarget,method,lower,upper,reference_lower,reference_upper,check\n");
        for r in &self.rows {
            let c = &r.computed;
            let _ = writeln!(
                s,
                "{},{},{:.6},{:.6},{:.3},{:.3},{}",
                c.target.label(),
                c.method,
                c.lower,
                c.upper,
                r.reference.lower,
                r.reference.upper,
                if r.pass { "pass" } else { "FAIL" }
            );
        }
        s
    }
}

/// Recomputes the worked example and compares each interval with `reference` to within `tol`.
pub fn check_example(reference: &[ReferenceCell], tol: f64) -> Result<ExampleReport> {
    let config = example_config();
    let design = config.design()?;
    let s1 = Stage1Summary::new(&design, config.stage1.clone().unwrap_or_default())?;
    let s2cfg = config.stage2.clone().unwrap_or(Stage2Config { means: Vec::new(), pooled: None });
    let s2 = Stage2Summary { means: s2cfg.means, pooled: s2cfg.pooled };
    let decision = config.rule()?.apply(&design, &s1)?;
    let mut estimates = Vec::new();
    for spec in &decision.targets {
        estimates.push((spec.target.clone(), designs::pooled_estimate(&design, &decision, &s1, &s2, &spec.target)?));
    }
    let computed = designs::confidence_intervals(&design, &decision, &s1, &s2, &Method::ALL)?;
    let mut rows = Vec::with_capacity(reference.len());
    for r in reference {
        let c = computed
            .iter()
            .find(|c| c.target == r.target && c.method == r.method)
            .ok_or_else(|| Error::Contract(format!("no {} interval for `{}`", r.method, r.target)))?;
        let pass = (c.lower - r.lower).abs() <= tol && (c.upper - r.upper).abs() <= tol;
        rows.push(ExampleRow { computed: c.clone(), reference: r.clone(), pass });
    }
    Ok(ExampleReport { estimates, rows })
}

fn emit(text: &str, out_path: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match out_path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Error::Config(format!("cannot write output: {e}"))),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Ci(args) => {
            let mut config = RunConfig::load(&args.config)?;
            apply_overrides(&mut config, &args);
            emit(&cmd_ci(&config)?, args.out.as_deref(), stdout)?;
        }
        Command::Simulate(args) => {
            let mut config = RunConfig::load(&args.config)?;
            apply_overrides(&mut config, &args);
            emit(&cmd_simulate(&config)?, args.out.as_deref(), stdout)?;
        }
        Command::Example(args) => {
            let report = check_example(&reference_example(), EXAMPLE_TOLERANCE)?;
            emit(&report.render(), args.out.as_deref(), stdout)?;
            if !report.passed() {
                for r in report.failures() {
                    let _ = writeln!(
                        stderr,
                        "mismatch: {} {} computed ({:.6}, {:.6}), reference ({:.3}, {:.3})",
                        r.computed.target,
                        r.computed.method,
                        r.computed.lower,
                        r.computed.upper,
                        r.reference.lower,
                        r.reference.upper
                    );
                }
                return Ok(EXIT_NUMERICAL);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point for the binary.
pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
