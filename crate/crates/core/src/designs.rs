//! Two-stage enrichment designs: interim decision rules, the truncation
//! bounds each decision imposes on the stage 1 estimator, pooling of the
//! stage summaries, and interval construction per target.
//!
//! Subpopulations are indexed from 0 in code and labelled `s1`, `s2`, ... in
//! output.

use crate::condnorm::ConditionalNormal;
use crate::error::{Error, Result};
use crate::intervals::{self, IntervalEstimate, Method, Target};

const INF: f64 = f64::INFINITY;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialDesign {
    pub p: Vec<f64>,
    pub n1: u64,
    pub n2: u64,
    pub sigma: f64,
    pub alpha: f64,
}

impl TrialDesign {
    pub fn new(p: Vec<f64>, n1: u64, n2: u64, sigma: f64, alpha: f64) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Config("at least one subpopulation is required".into()));
        }
        if p.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Config(format!("proportions must be positive, got {p:?}")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("proportions must sum to 1, got {total}")));
        }
        if n1 == 0 || n2 == 0 {
            return Err(Error::Config("stage sizes n1 and n2 must be positive".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::Config(format!("alpha must lie in (0, 0.5), got {alpha}")));
        }
        Ok(Self { p, n1, n2, sigma, alpha })
    }

    pub fn k(&self) -> usize {
        self.p.len()
    }

    /// Prevalence of a set of subpopulations.
    pub fn prevalence(&self, set: &[usize]) -> f64 {
        set.iter().map(|&m| self.p[m]).sum()
    }

    /// Standard error of a stage 1 mean difference over a population of prevalence `p`.
    pub fn stage1_se(&self, p: f64) -> f64 {
        2.0 * self.sigma / (p * self.n1 as f64).sqrt()
    }

    fn require_k(&self, k: usize, rule: &str) -> Result<()> {
        if self.k() == k {
            Ok(())
        } else {
            Err(Error::Config(format!("{rule} needs k = {k} subpopulations, design has {}", self.k())))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Summary {
    pub means: Vec<f64>,
}

impl Stage1Summary {
    pub fn new(design: &TrialDesign, means: Vec<f64>) -> Result<Self> {
        if means.len() != design.k() {
            return Err(Error::Config(format!("expected {} stage 1 means, got {}", design.k(), means.len())));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config(format!("stage 1 means must be finite, got {means:?}")));
        }
        Ok(Self { means })
    }

    pub fn full_mean(&self, design: &TrialDesign) -> f64 {
        self.means.iter().zip(&design.p).map(|(d, p)| p * d).sum()
    }

    pub fn subset_mean(&self, design: &TrialDesign, set: &[usize]) -> f64 {
        let ps = design.prevalence(set);
        set.iter().map(|&m| design.p[m] * self.means[m]).sum::<f64>() / ps
    }

    /// Z-statistic of subpopulation `m`.
    pub fn z(&self, design: &TrialDesign, m: usize) -> f64 {
        self.means[m] / design.stage1_se(design.p[m])
    }

    pub fn z_full(&self, design: &TrialDesign) -> f64 {
        self.full_mean(design) / design.stage1_se(1.0)
    }
}

/// Stage 2 mean differences. Either the pooled mean over the enrolled
/// cohort, per-subpopulation means, or both; the pooled value is derived from
/// the components when absent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Stage2Summary {
    pub means: Vec<Option<f64>>,
    pub pooled: Option<f64>,
}

impl Stage2Summary {
    pub fn pooled_only(pooled: f64) -> Self {
        Self { means: Vec::new(), pooled: Some(pooled) }
    }

    pub fn from_components(means: Vec<Option<f64>>) -> Self {
        Self { means, pooled: None }
    }

    /// Mean difference over the stage 2 cohort enrolled from `selected`.
    pub fn selected_mean(&self, design: &TrialDesign, selected: &[usize]) -> Result<f64> {
        if let Some(x) = self.pooled {
            return Ok(x);
        }
        let ps = design.prevalence(selected);
        let mut acc = 0.0;
        for &m in selected {
            acc += design.p[m] / ps * self.subpopulation_mean(m)?;
        }
        Ok(acc)
    }

    pub fn subpopulation_mean(&self, m: usize) -> Result<f64> {
        self.means
            .get(m)
            .copied()
            .flatten()
            .ok_or_else(|| Error::Contract(format!("stage 2 mean for subpopulation s{} is missing", m + 1)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleKind {
    /// Continue with everyone if the full-population Z exceeds `z_star`,
    /// otherwise enrich to the subpopulation with the larger Z.
    D1 { z_star: f64 },
    /// Like D1 on mean differences with threshold `delta_star`, plus a futility stop.
    D2 { delta_star: f64 },
    /// Enrich to s1 when its mean exceeds the full-population mean by more than `delta_star`.
    Kimani2015 { delta_star: f64 },
    /// Select the largest nested group s1..sm whose mean exceeds `delta_star`.
    Kimani2018 { delta_star: f64 },
}

impl RuleKind {
    pub fn name(&self) -> &'static str {
        match self {
            RuleKind::D1 { .. } => "d1",
            RuleKind::D2 { .. } => "d2",
            RuleKind::Kimani2015 { .. } => "kimani2015",
            RuleKind::Kimani2018 { .. } => "kimani2018",
        }
    }

    pub fn threshold(&self) -> f64 {
        match *self {
            RuleKind::D1 { z_star } => z_star,
            RuleKind::D2 { delta_star } | RuleKind::Kimani2015 { delta_star } | RuleKind::Kimani2018 { delta_star } => {
                delta_star
            }
        }
    }

    pub fn from_name(name: &str, threshold: f64) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::Config(format!("rule threshold must be finite, got {threshold}")));
        }
        match name.to_ascii_lowercase().as_str() {
            "d1" => Ok(RuleKind::D1 { z_star: threshold }),
            "d2" => Ok(RuleKind::D2 { delta_star: threshold }),
            "kimani2015" => Ok(RuleKind::Kimani2015 { delta_star: threshold }),
            "kimani2018" => Ok(RuleKind::Kimani2018 { delta_star: threshold }),
            other => Err(Error::Config(format!(
                "unknown rule type `{other}` (expected d1, d2, kimani2015 or kimani2018)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRule {
    pub kind: RuleKind,
    /// Also estimate each subpopulation effect when the full population continues.
    pub co_primary: bool,
}

impl DecisionRule {
    pub fn new(kind: RuleKind, co_primary: bool) -> Self {
        Self { kind, co_primary }
    }

    pub fn apply(&self, design: &TrialDesign, s1: &Stage1Summary) -> Result<InterimDecision> {
        match self.kind {
            RuleKind::D1 { z_star } => apply_d1(design, s1, z_star, self.co_primary),
            RuleKind::D2 { delta_star } => apply_d2(design, s1, delta_star, self.co_primary),
            RuleKind::Kimani2015 { delta_star } => apply_kimani2015(design, s1, delta_star, self.co_primary),
            RuleKind::Kimani2018 { delta_star } => apply_kimani2018(design, s1, delta_star, self.co_primary),
        }
    }
}

/// A target parameter with the interval its stage 1 estimator was confined
/// to by the decision, and the stage standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub target: Target,
    pub lower: f64,
    pub upper: f64,
    pub se1: f64,
    pub se2: f64,
    /// The decision leaves the law of this target's estimator untouched.
    pub unaltered: bool,
}

impl TargetSpec {
    pub fn model(&self, delta: f64) -> Result<ConditionalNormal> {
        ConditionalNormal::new(delta, self.se1, self.se2, self.lower, self.upper)
    }

    pub fn pooled_se(&self) -> f64 {
        self.se1 * self.se2 / self.se1.hypot(self.se2)
    }
}

/// Constraint on a statistic independent of the target estimator, recorded
/// for rules whose selection event is not an interval on that estimator alone.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryConstraint {
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterimDecision {
    /// Subpopulations enrolled in stage 2, sorted; empty for a futility stop.
    pub selected: Vec<usize>,
    pub targets: Vec<TargetSpec>,
    pub auxiliary: Option<AuxiliaryConstraint>,
}

impl InterimDecision {
    fn stop() -> Self {
        Self { selected: Vec::new(), targets: Vec::new(), auxiliary: None }
    }

    pub fn is_stop(&self) -> bool {
        self.selected.is_empty()
    }

    /// `full`, `stop`, or the selected subpopulations such as `s1` or `s1+s2`.
    pub fn label(&self, k: usize) -> String {
        if self.is_stop() {
            "stop".into()
        } else {
            selection_target(&self.selected, k).label()
        }
    }

    pub fn target(&self, target: &Target) -> Option<&TargetSpec> {
        self.targets.iter().find(|t| &t.target == target)
    }
}

fn selection_target(selected: &[usize], k: usize) -> Target {
    if selected.len() == k {
        Target::Full
    } else {
        Target::Subset(selected.to_vec())
    }
}

fn selected_spec(design: &TrialDesign, selected: &[usize], lower: f64, upper: f64) -> TargetSpec {
    TargetSpec {
        target: selection_target(selected, design.k()),
        lower,
        upper,
        se1: design.stage1_se(design.prevalence(selected)),
        se2: 2.0 * design.sigma / (design.n2 as f64).sqrt(),
        unaltered: false,
    }
}

fn co_primary_spec(design: &TrialDesign, m: usize, lower: f64, upper: f64) -> TargetSpec {
    let pm = design.p[m];
    TargetSpec {
        target: Target::CoPrimary(m),
        lower,
        upper,
        se1: design.stage1_se(pm),
        se2: 2.0 * design.sigma / (pm * design.n2 as f64).sqrt(),
        unaltered: false,
    }
}

/// Subpopulation bounds when the full population continues because its mean
/// exceeds `threshold`: Σ p_j·Δ̂_j > c ⇔ Δ̂_m > (c − Σ_{j≠m} p_j·Δ̂_j)/p_m.
fn co_primary_above(design: &TrialDesign, s1: &Stage1Summary, threshold: f64) -> Vec<TargetSpec> {
    (0..design.k())
        .map(|m| {
            let rest: f64 = (0..design.k()).filter(|&j| j != m).map(|j| design.p[j] * s1.means[j]).sum();
            co_primary_spec(design, m, (threshold - rest) / design.p[m], INF)
        })
        .collect()
}

fn full_continuation(design: &TrialDesign, s1: &Stage1Summary, threshold: f64, co_primary: bool) -> InterimDecision {
    let all: Vec<usize> = (0..design.k()).collect();
    let mut targets = vec![selected_spec(design, &all, threshold, INF)];
    if co_primary {
        targets.extend(co_primary_above(design, s1, threshold));
    }
    InterimDecision { selected: all, targets, auxiliary: None }
}

fn single(design: &TrialDesign, m: usize, lower: f64, upper: f64) -> InterimDecision {
    InterimDecision { selected: vec![m], targets: vec![selected_spec(design, &[m], lower, upper)], auxiliary: None }
}

/// Full population if `Z_full > z_star`, else the subpopulation with the
/// larger Z (ties go to s1).
pub fn apply_d1(design: &TrialDesign, s1: &Stage1Summary, z_star: f64, co_primary: bool) -> Result<InterimDecision> {
    design.require_k(2, "D1")?;
    let c = design.stage1_se(1.0) * z_star;
    if s1.z_full(design) > z_star {
        return Ok(full_continuation(design, s1, c, co_primary));
    }
    let (p1, p2) = (design.p[0], design.p[1]);
    let (d1, d2) = (s1.means[0], s1.means[1]);
    if s1.z(design, 0) >= s1.z(design, 1) {
        Ok(single(design, 0, (p2 / p1).sqrt() * d2, c / p1 - p2 / p1 * d2))
    } else {
        Ok(single(design, 1, (p1 / p2).sqrt() * d1, c / p2 - p1 / p2 * d1))
    }
}

/// Full population if its mean exceeds `delta_star`; otherwise the
/// subpopulation with the larger mean if that exceeds `delta_star`; otherwise stop.
pub fn apply_d2(design: &TrialDesign, s1: &Stage1Summary, delta_star: f64, co_primary: bool) -> Result<InterimDecision> {
    design.require_k(2, "D2")?;
    if s1.full_mean(design) > delta_star {
        return Ok(full_continuation(design, s1, delta_star, co_primary));
    }
    let best = if s1.means[0] >= s1.means[1] { 0 } else { 1 };
    let other = 1 - best;
    if s1.means[best] > delta_star {
        let upper = (delta_star - design.p[other] * s1.means[other]) / design.p[best];
        Ok(single(design, best, delta_star, upper))
    } else {
        Ok(InterimDecision::stop())
    }
}

/// Enrich to s1 if `Δ̂1 − Δ̂_full > delta_star`, else continue with everyone.
/// The continuation constrains only the difference, which is independent of
/// the full-population estimator, so that target's law is unaltered.
pub fn apply_kimani2015(
    design: &TrialDesign,
    s1: &Stage1Summary,
    delta_star: f64,
    co_primary: bool,
) -> Result<InterimDecision> {
    design.require_k(2, "Kimani2015")?;
    let p2 = design.p[1];
    let (d1, d2) = (s1.means[0], s1.means[1]);
    let diff = d1 - s1.full_mean(design);
    let name = "s1 minus full stage 1 mean".to_string();
    if diff > delta_star {
        let mut decision = single(design, 0, d2 + delta_star / p2, INF);
        decision.auxiliary = Some(AuxiliaryConstraint { name, value: diff, lower: delta_star, upper: INF });
        return Ok(decision);
    }
    let mut full = selected_spec(design, &[0, 1], -INF, INF);
    full.unaltered = true;
    let mut targets = vec![full];
    if co_primary {
        // p2·(Δ̂1 − Δ̂2) ≤ Δ*.
        targets.push(co_primary_spec(design, 0, -INF, d2 + delta_star / p2));
        targets.push(co_primary_spec(design, 1, d1 - delta_star / p2, INF));
    }
    Ok(InterimDecision {
        selected: vec![0, 1],
        targets,
        auxiliary: Some(AuxiliaryConstraint { name, value: diff, lower: -INF, upper: delta_star }),
    })
}

/// Select s1..sm for the largest m whose cumulative mean exceeds `delta_star`.
///
/// The event "no larger nested group qualifies" is
/// `Δ̂_[m] ≤ min_j (P_j·Δ* − Σ_{i=m+1..j} p_i·Δ̂_i) / P_m` over `j = m+1..k`,
/// with `P_j` the cumulative prevalence.
pub fn apply_kimani2018(
    design: &TrialDesign,
    s1: &Stage1Summary,
    delta_star: f64,
    co_primary: bool,
) -> Result<InterimDecision> {
    let k = design.k();
    if k < 2 {
        return Err(Error::Config(format!("Kimani2018 needs at least 2 subpopulations, design has {k}")));
    }
    let mut cum_p = Vec::with_capacity(k);
    let mut cum_pd = Vec::with_capacity(k);
    let (mut acc_p, mut acc_pd) = (0.0, 0.0);
    for m in 0..k {
        acc_p += design.p[m];
        acc_pd += design.p[m] * s1.means[m];
        cum_p.push(acc_p);
        cum_pd.push(acc_pd);
    }
    let Some(m) = (0..k).rev().find(|&m| cum_pd[m] / cum_p[m] > delta_star) else {
        return Ok(InterimDecision::stop());
    };
    let selected: Vec<usize> = (0..=m).collect();
    if m + 1 == k {
        return Ok(full_continuation(design, s1, delta_star, co_primary));
    }
    let upper = (m + 1..k)
        .map(|j| (cum_p[j] * delta_star - (cum_pd[j] - cum_pd[m])) / cum_p[m])
        .fold(INF, f64::min);
    let spec = selected_spec(design, &selected, delta_star, upper);
    Ok(InterimDecision { selected, targets: vec![spec], auxiliary: None })
}

/// The stage 1 estimator of a target.
pub fn stage1_estimate(design: &TrialDesign, s1: &Stage1Summary, target: &Target) -> Result<f64> {
    match target {
        Target::Full => Ok(s1.full_mean(design)),
        Target::Subset(set) => Ok(s1.subset_mean(design, set)),
        Target::CoPrimary(m) => Ok(s1.means[*m]),
        Target::Unlabelled => Err(Error::Contract("an unlabelled target has no stage 1 estimator".into())),
    }
}

/// The true value of a target given per-subpopulation effects.
pub fn true_effect(design: &TrialDesign, target: &Target, deltas: &[f64]) -> Result<f64> {
    let weighted = |set: &[usize]| set.iter().map(|&m| design.p[m] * deltas[m]).sum::<f64>() / design.prevalence(set);
    match target {
        Target::Full => Ok(weighted(&(0..design.k()).collect::<Vec<_>>())),
        Target::Subset(set) => Ok(weighted(set)),
        Target::CoPrimary(m) => Ok(deltas[*m]),
        Target::Unlabelled => Err(Error::Contract("an unlabelled target has no true effect".into())),
    }
}

/// Precision-weighted combination of the stage 1 and stage 2 estimators of `target`.
pub fn pooled_estimate(
    design: &TrialDesign,
    decision: &InterimDecision,
    s1: &Stage1Summary,
    s2: &Stage2Summary,
    target: &Target,
) -> Result<f64> {
    let spec = decision
        .target(target)
        .ok_or_else(|| Error::Contract(format!("target `{target}` is not part of the decision")))?;
    let x1 = stage1_estimate(design, s1, target)?;
    let x2 = match target {
        Target::CoPrimary(m) => s2.subpopulation_mean(*m)?,
        _ => s2.selected_mean(design, &decision.selected)?,
    };
    let tau1 = spec.se1.powi(-2);
    let tau2 = spec.se2.powi(-2);
    Ok((tau1 * x1 + tau2 * x2) / (tau1 + tau2))
}

/// Intervals for every target of the decision, in target order and then
/// method order.
pub fn confidence_intervals(
    design: &TrialDesign,
    decision: &InterimDecision,
    s1: &Stage1Summary,
    s2: &Stage2Summary,
    methods: &[Method],
) -> Result<Vec<IntervalEstimate>> {
    if decision.is_stop() {
        return Err(Error::Contract("the trial stopped for futility; there is no estimand".into()));
    }
    let mut out = Vec::with_capacity(decision.targets.len() * methods.len());
    for spec in &decision.targets {
        let observed = pooled_estimate(design, decision, s1, s2, &spec.target)?;
        for &method in methods {
            out.push(target_interval(spec, observed, design.alpha, method)?);
        }
    }
    Ok(out)
}

/// One interval for one target; unaltered targets get the naive interval
/// under every method.
pub fn target_interval(spec: &TargetSpec, observed: f64, alpha: f64, method: Method) -> Result<IntervalEstimate> {
    let ci = if spec.unaltered || method == Method::Naive {
        let mut ci = intervals::naive_ci(observed, spec.pooled_se(), alpha)?;
        ci.method = method;
        ci
    } else {
        intervals::interval(&spec.model(observed)?, observed, alpha, method)?
    };
    Ok(ci.with_target(spec.target.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two(sigma: f64, n1: u64, n2: u64) -> TrialDesign {
        TrialDesign::new(vec![0.5, 0.5], n1, n2, sigma, 0.05).unwrap()
    }

    fn s1(d: &TrialDesign, m: &[f64]) -> Stage1Summary {
        Stage1Summary::new(d, m.to_vec()).unwrap()
    }

    #[test]
    fn design_validation() {
        assert!(TrialDesign::new(vec![0.5, 0.4], 10, 10, 1.0, 0.05).is_err());
        assert!(TrialDesign::new(vec![1.0, 0.0], 10, 10, 1.0, 0.05).is_err());
        assert!(TrialDesign::new(vec![1.0], 10, 10, 0.0, 0.05).is_err());
        assert!(TrialDesign::new(vec![1.0], 10, 10, 1.0, 0.5).is_err());
        let d = two(1.0, 10, 10);
        assert!(Stage1Summary::new(&d, vec![1.0]).is_err());
        assert!(Stage1Summary::new(&d, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn d1_enrichment_bounds() {
        let d = two(8.0, 244, 244);
        let dec = apply_d1(&d, &s1(&d, &[2.0, 0.0]), 1.0, false).unwrap();
        assert_eq!(dec.selected, vec![0]);
        let t = &dec.targets[0];
        assert_eq!(t.lower, 0.0);
        assert_abs_diff_eq!(t.upper, 2.0486, epsilon = 1e-3);
        assert_abs_diff_eq!(t.se1, 16.0 / 122f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn d1_full_and_tie() {
        let d = two(8.0, 244, 244);
        // Z_full = 1.5.
        let m = 1.5 * 16.0 / 244f64.sqrt();
        let dec = apply_d1(&d, &s1(&d, &[m, m]), 1.0, false).unwrap();
        assert_eq!(dec.targets[0].target, Target::Full);
        assert_abs_diff_eq!(dec.targets[0].lower, 16.0 / 244f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(dec.targets[0].lower, 1.02434, epsilon = 1e-4);
        assert_eq!(dec.targets[0].upper, INF);
        let tie = apply_d1(&d, &s1(&d, &[0.0, 0.0]), 1.0, false).unwrap();
        assert_eq!(tie.selected, vec![0]);
        let k3 = TrialDesign::new(vec![0.2, 0.3, 0.5], 10, 10, 1.0, 0.05).unwrap();
        assert!(matches!(apply_d1(&k3, &s1(&k3, &[0.0; 3]), 1.0, false), Err(Error::Config(_))));
    }

    #[test]
    fn d2_branches() {
        let d = two(0.36, 200, 100);
        let full = apply_d2(&d, &s1(&d, &[0.113, 0.013]), 0.025, true).unwrap();
        assert_eq!(full.selected, vec![0, 1]);
        assert_eq!(full.targets.len(), 3);
        assert_abs_diff_eq!(full.targets[1].lower, 0.037, epsilon = 1e-12);
        assert_abs_diff_eq!(full.targets[2].lower, -0.063, epsilon = 1e-12);
        let enrich = apply_d2(&d, &s1(&d, &[0.06, -0.06]), 0.025, false).unwrap();
        assert_eq!(enrich.selected, vec![0]);
        assert_abs_diff_eq!(enrich.targets[0].lower, 0.025, epsilon = 1e-15);
        assert_abs_diff_eq!(enrich.targets[0].upper, 0.11, epsilon = 1e-12);
        let stop = apply_d2(&d, &s1(&d, &[0.01, 0.02]), 0.025, true).unwrap();
        assert!(stop.is_stop() && stop.targets.is_empty());
        assert_eq!(stop.label(2), "stop");
    }

    #[test]
    fn kimani2015_branches() {
        let d = two(1.0, 100, 100);
        let e = apply_kimani2015(&d, &s1(&d, &[1.0, 0.5]), 0.1, false).unwrap();
        assert_eq!(e.selected, vec![0]);
        assert_abs_diff_eq!(e.targets[0].lower, 0.7, epsilon = 1e-12);
        assert_eq!(e.targets[0].upper, INF);
        for means in [[0.5, 0.5], [0.5, 1.0]] {
            let f = apply_kimani2015(&d, &s1(&d, &means), 0.1, false).unwrap();
            assert_eq!(f.selected, vec![0, 1]);
            assert!(f.targets[0].unaltered);
        }
    }

    #[test]
    fn kimani2018_branches() {
        let third = 1.0 / 3.0;
        let d = TrialDesign::new(vec![third, third, 1.0 - 2.0 * third], 30, 30, 1.0, 0.05).unwrap();
        let a = apply_kimani2018(&d, &s1(&d, &[1.0, -2.0, -0.5]), 0.0, false).unwrap();
        assert_eq!(a.selected, vec![0]);
        assert_eq!(a.targets[0].lower, 0.0);
        assert_abs_diff_eq!(a.targets[0].upper, 2.0, epsilon = 1e-12);
        let b = apply_kimani2018(&d, &s1(&d, &[1.0, 0.5, 0.4]), 0.0, false).unwrap();
        assert_eq!(b.targets[0].target, Target::Full);
        assert_eq!(b.targets[0].upper, INF);
        let c = apply_kimani2018(&d, &s1(&d, &[-1.0, -1.0, -1.0]), 0.0, false).unwrap();
        assert!(c.is_stop());
    }

    #[test]
    fn pooling() {
        let d = two(0.36, 200, 100);
        let first = s1(&d, &[0.113, 0.013]);
        let dec = apply_d2(&d, &first, 0.025, true).unwrap();
        let second = Stage2Summary { means: vec![Some(0.155), Some(-0.064)], pooled: Some(0.045) };
        let full = pooled_estimate(&d, &dec, &first, &second, &Target::Full).unwrap();
        assert_abs_diff_eq!(full, 0.057, epsilon = 5e-4);
        let one = pooled_estimate(&d, &dec, &first, &second, &Target::CoPrimary(0)).unwrap();
        assert_abs_diff_eq!(one, 0.127, epsilon = 5e-4);
        let two_ = pooled_estimate(&d, &dec, &first, &second, &Target::CoPrimary(1)).unwrap();
        assert_abs_diff_eq!(two_, -0.013, epsilon = 5e-4);
        assert!(matches!(
            pooled_estimate(&d, &dec, &first, &second, &Target::Subset(vec![0])),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn pooling_idempotent() {
        let d = TrialDesign::new(vec![1.0], 50, 50, 1.0, 0.05).unwrap();
        let first = s1(&d, &[0.3]);
        let dec = apply_d2_like_full(&d, &first);
        let x = pooled_estimate(&d, &dec, &first, &Stage2Summary::pooled_only(0.3), &Target::Full).unwrap();
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-15);
    }

    fn apply_d2_like_full(d: &TrialDesign, s: &Stage1Summary) -> InterimDecision {
        full_continuation(d, s, -INF, false)
    }

    #[test]
    fn stop_has_no_intervals() {
        let d = two(0.36, 200, 100);
        let first = s1(&d, &[0.01, 0.02]);
        let dec = apply_d2(&d, &first, 0.025, false).unwrap();
        let r = confidence_intervals(&d, &dec, &first, &Stage2Summary::default(), &Method::ALL);
        assert!(matches!(r, Err(Error::Contract(_))));
    }
}
