//! Seeded Monte Carlo engine over stage-wise sufficient statistics.
//!
//! Replicate `i` draws from a ChaCha8 stream keyed by `(seed, i)`, so any
//! replicate can be reproduced on its own and results do not depend on the
//! number of worker threads.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::designs::{self, DecisionRule, InterimDecision, Stage1Summary, Stage2Summary, TrialDesign};
use crate::error::{Error, Result};
use crate::intervals::{Method, Target};

/// Environment variable capping the number of simulation threads.
pub const THREADS_ENV: &str = "ENRICH_CI_THREADS";

const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub design: TrialDesign,
    pub rule: DecisionRule,
    pub true_deltas: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
}

impl Scenario {
    pub fn new(
        design: TrialDesign,
        rule: DecisionRule,
        true_deltas: Vec<f64>,
        replicates: usize,
        seed: u64,
        methods: Vec<Method>,
    ) -> Result<Self> {
        if true_deltas.len() != design.k() {
            return Err(Error::Config(format!(
                "expected {} true effects, got {}",
                design.k(),
                true_deltas.len()
            )));
        }
        if true_deltas.iter().any(|d| !d.is_finite()) {
            return Err(Error::Config(format!("true effects must be finite, got {true_deltas:?}")));
        }
        if replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if methods.is_empty() {
            return Err(Error::Config("at least one interval method is required".into()));
        }
        let mut methods = methods;
        methods.sort();
        methods.dedup();
        Ok(Self { design, rule, true_deltas, replicates, seed, methods })
    }
}

/// The random stream of replicate `index`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Independent stage 1 mean differences `N(Δ_m, (2σ/√(p_m·n1))²)`.
pub fn draw_stage1<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Stage1Summary {
    let d = &scenario.design;
    let means = (0..d.k())
        .map(|m| {
            let z: f64 = rng.sample(StandardNormal);
            scenario.true_deltas[m] + d.stage1_se(d.p[m]) * z
        })
        .collect();
    Stage1Summary { means }
}

/// Stage 2 mean differences of the enrolled subpopulations. Each gets
/// `n2·p_m/p_sel` patients; the cohort mean is their prevalence-weighted
/// combination.
pub fn draw_stage2<R: Rng + ?Sized>(
    scenario: &Scenario,
    decision: &InterimDecision,
    rng: &mut R,
) -> Result<Stage2Summary> {
    if decision.is_stop() {
        return Err(Error::Contract("no stage 2 after a futility stop".into()));
    }
    let d = &scenario.design;
    let p_sel = d.prevalence(&decision.selected);
    let mut means = vec![None; d.k()];
    for &m in &decision.selected {
        let share = d.p[m] / p_sel;
        let se = 2.0 * d.sigma / (d.n2 as f64 * share).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        means[m] = Some(scenario.true_deltas[m] + se * z);
    }
    Ok(Stage2Summary::from_components(means))
}

/// `coverage ± 1.96·√(c(1 − c)/n)`.
///
/// # Panics
/// If `n` is zero.
pub fn mc_error_band(coverage: f64, n: usize) -> (f64, f64) {
    assert!(n >= 1, "Monte Carlo band needs at least one replicate");
    let half = mc_halfwidth(coverage, n);
    (coverage - half, coverage + half)
}

pub fn mc_halfwidth(coverage: f64, n: usize) -> f64 {
    Z_975 * (coverage * (1.0 - coverage) / n as f64).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub coverage: f64,
    pub mean_width: f64,
    /// Mean width over the mean naive width in the same rows.
    pub width_ratio: f64,
    pub mc_halfwidth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchSummary {
    pub label: String,
    pub proportion: f64,
    /// Empty for branches without an estimand (futility stop).
    pub methods: Vec<MethodSummary>,
}

impl BranchSummary {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// One entry per interim decision observed, in the order full, nested
    /// subsets by decreasing size, stop.
    pub branches: Vec<BranchSummary>,
    /// Subpopulation effects estimated alongside full continuation, labelled `coprimary_sM`.
    pub co_primary: Vec<BranchSummary>,
    /// All continuing replicates, labelled `overall`; its proportion is the continuation rate.
    pub overall: BranchSummary,
}

pub const CSV_HEADER: [&str; 7] = ["branch", "proportion", "method", "coverage", "mean_width", "width_ratio", "mc_halfwidth"];

impl SimResult {
    pub fn branch(&self, label: &str) -> Option<&BranchSummary> {
        self.branches.iter().find(|b| b.label == label)
    }

    pub fn co_primary(&self, m: usize) -> Option<&BranchSummary> {
        let label = co_primary_label(m);
        self.co_primary.iter().find(|b| b.label == label)
    }

    fn rows(&self) -> impl Iterator<Item = &BranchSummary> {
        self.branches.iter().chain(&self.co_primary).chain(std::iter::once(&self.overall))
    }

    /// CSV with fixed six-decimal numbers.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        let f = |x: f64| format!("{x:.6}");
        for b in self.rows() {
            if b.methods.is_empty() {
                w.write_record([b.label.as_str(), &f(b.proportion), "", "", "", "", ""]).expect("in-memory write");
            }
            for m in &b.methods {
                w.write_record([
                    b.label.as_str(),
                    &f(b.proportion),
                    m.method.as_str(),
                    &f(m.coverage),
                    &f(m.mean_width),
                    &f(m.width_ratio),
                    &f(m.mc_halfwidth),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |e: csv::Error| Error::Config(format!("malformed simulation CSV: {e}"));
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(bad)?.clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(Error::Config(format!("unexpected CSV header {:?}", header.iter().collect::<Vec<_>>())));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Config(format!("malformed number `{s}` in simulation CSV")))
        };
        let mut rows: Vec<BranchSummary> = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(bad)?;
            let label = &rec[0];
            let proportion = num(&rec[1])?;
            if rows.last().is_none_or(|b| b.label != label) {
                rows.push(BranchSummary { label: label.to_string(), proportion, methods: Vec::new() });
            }
            if !rec[2].is_empty() {
                let summary = MethodSummary {
                    method: rec[2].parse()?,
                    coverage: num(&rec[3])?,
                    mean_width: num(&rec[4])?,
                    width_ratio: num(&rec[5])?,
                    mc_halfwidth: num(&rec[6])?,
                };
                rows.last_mut().expect("pushed above").methods.push(summary);
            }
        }
        let overall = rows
            .pop()
            .filter(|b| b.label == "overall")
            .ok_or_else(|| Error::Config("simulation CSV must end with the overall rows".into()))?;
        let (co_primary, branches) = rows.into_iter().partition(|b| b.label.starts_with("coprimary_"));
        Ok(Self { branches, co_primary, overall })
    }
}

fn co_primary_label(m: usize) -> String {
    format!("coprimary_s{}", m + 1)
}

/// Per-method tallies for one group of rows.
#[derive(Debug, Clone, Default)]
struct Tally {
    count: usize,
    covered: Vec<usize>,
    width: Vec<f64>,
    naive_width: f64,
}

impl Tally {
    fn new(n_methods: usize) -> Self {
        Self { count: 0, covered: vec![0; n_methods], width: vec![0.0; n_methods], naive_width: 0.0 }
    }

    fn summarize(&self, label: String, proportion: f64, methods: &[Method]) -> BranchSummary {
        let summaries = if self.count == 0 {
            Vec::new()
        } else {
            let n = self.count as f64;
            let naive_mean = self.naive_width / n;
            methods
                .iter()
                .enumerate()
                .map(|(i, &method)| {
                    let coverage = self.covered[i] as f64 / n;
                    let mean_width = self.width[i] / n;
                    MethodSummary {
                        method,
                        coverage,
                        mean_width,
                        width_ratio: mean_width / naive_mean,
                        mc_halfwidth: mc_halfwidth(coverage, self.count),
                    }
                })
                .collect()
        };
        BranchSummary { label, proportion, methods: summaries }
    }
}

/// What one estimated target contributes: coverage and width per method.
#[derive(Debug, Clone)]
struct Cell {
    covered: Vec<bool>,
    width: Vec<f64>,
    naive_width: f64,
}

#[derive(Debug, Clone)]
struct Replicate {
    selected: Vec<usize>,
    primary: Option<Cell>,
    co_primary: Vec<(usize, Cell)>,
}

fn evaluate_target(
    scenario: &Scenario,
    spec: &designs::TargetSpec,
    observed: f64,
) -> Result<Cell> {
    let truth = designs::true_effect(&scenario.design, &spec.target, &scenario.true_deltas)?;
    let alpha = scenario.design.alpha;
    let naive = designs::target_interval(spec, observed, alpha, Method::Naive)?;
    let mut covered = Vec::with_capacity(scenario.methods.len());
    let mut width = Vec::with_capacity(scenario.methods.len());
    for &method in &scenario.methods {
        let ci = if method == Method::Naive { naive.clone() } else { designs::target_interval(spec, observed, alpha, method)? };
        covered.push(ci.contains(truth));
        width.push(ci.width());
    }
    Ok(Cell { covered, width, naive_width: naive.width() })
}

/// Runs replicate `index` from its own stream.
fn run_replicate(scenario: &Scenario, index: u64) -> Result<Replicate> {
    let mut rng = replicate_rng(scenario.seed, index);
    let s1 = draw_stage1(scenario, &mut rng);
    let decision = scenario.rule.apply(&scenario.design, &s1)?;
    if decision.is_stop() {
        return Ok(Replicate { selected: Vec::new(), primary: None, co_primary: Vec::new() });
    }
    let s2 = draw_stage2(scenario, &decision, &mut rng)?;
    let mut primary = None;
    let mut co_primary = Vec::new();
    for spec in &decision.targets {
        let observed = designs::pooled_estimate(&scenario.design, &decision, &s1, &s2, &spec.target)?;
        let cell = evaluate_target(scenario, spec, observed)?;
        match spec.target {
            Target::CoPrimary(m) => co_primary.push((m, cell)),
            _ => primary = Some(cell),
        }
    }
    Ok(Replicate { selected: decision.selected, primary, co_primary })
}

/// Branch order: larger selections first, then lexicographic, stop last.
fn branch_order(a: &[usize], b: &[usize]) -> Ordering {
    b.len().cmp(&a.len()).then_with(|| a.cmp(b))
}

/// Worker count from `ENRICH_CI_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok().filter(|&n| n > 0)
}

/// Runs all replicates, honouring `ENRICH_CI_THREADS`.
pub fn run_scenario(scenario: &Scenario) -> Result<SimResult> {
    run_scenario_with_threads(scenario, threads_from_env())
}

/// Runs all replicates on `threads` workers (the global pool when `None`).
pub fn run_scenario_with_threads(scenario: &Scenario, threads: Option<usize>) -> Result<SimResult> {
    let work = || -> Vec<Result<Replicate>> {
        (0..scenario.replicates as u64)
            .into_par_iter()
            .map(|i| {
                run_replicate(scenario, i).map_err(|e| e.context(format!("replicate {i} (seed {})", scenario.seed)))
            })
            .collect()
    };
    let outcomes = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?
            .install(work),
        None => work(),
    };
    let mut replicates = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        replicates.push(o?);
    }
    Ok(aggregate(scenario, &replicates))
}

fn aggregate(scenario: &Scenario, replicates: &[Replicate]) -> SimResult {
    let n_methods = scenario.methods.len();
    let k = scenario.design.k();
    let mut branches: BTreeMap<Vec<usize>, Tally> = BTreeMap::new();
    let mut co: BTreeMap<usize, Tally> = BTreeMap::new();
    let mut overall = Tally::new(n_methods);
    let add = |t: &mut Tally, cell: &Cell| {
        t.naive_width += cell.naive_width;
        for i in 0..cell.covered.len() {
            t.covered[i] += cell.covered[i] as usize;
            t.width[i] += cell.width[i];
        }
    };
    for r in replicates {
        let t = branches.entry(r.selected.clone()).or_insert_with(|| Tally::new(n_methods));
        t.count += 1;
        if let Some(cell) = &r.primary {
            add(t, cell);
            overall.count += 1;
            add(&mut overall, cell);
        }
        for (m, cell) in &r.co_primary {
            let t = co.entry(*m).or_insert_with(|| Tally::new(n_methods));
            t.count += 1;
            add(t, cell);
        }
    }
    let total = replicates.len() as f64;
    let mut keys: Vec<&Vec<usize>> = branches.keys().collect();
    keys.sort_by(|a, b| branch_order(a, b));
    let label = |sel: &[usize]| -> String {
        match sel.len() {
            0 => "stop".into(),
            n if n == k => "full".into(),
            _ => Target::Subset(sel.to_vec()).label(),
        }
    };
    let branch_rows = keys
        .into_iter()
        .map(|sel| {
            let t = &branches[sel];
            let mut row = t.summarize(label(sel), t.count as f64 / total, &scenario.methods);
            if sel.is_empty() {
                row.methods.clear();
            }
            row
        })
        .collect();
    let co_rows = co
        .iter()
        .map(|(&m, t)| t.summarize(co_primary_label(m), t.count as f64 / total, &scenario.methods))
        .collect();
    SimResult {
        branches: branch_rows,
        co_primary: co_rows,
        overall: overall.summarize("overall".into(), overall.count as f64 / total, &scenario.methods),
    }
}
