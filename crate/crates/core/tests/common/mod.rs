//! Independent oracles shared by the integration and acceptance tests. None
//! of these call into the library's numerical code.
#![allow(dead_code)]

use std::collections::BTreeMap;

use enrich_ci::designs::{self, DecisionRule, InterimDecision, RuleKind, Stage1Summary, Stage2Summary, TrialDesign};
use enrich_ci::intervals::{Method, Target};
use enrich_ci::sim::SimResult;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

pub const INF: f64 = f64::INFINITY;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

pub fn phi(x: f64) -> f64 {
    std_normal().pdf(x)
}

pub fn big_phi(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// P(a < Z < b), taken from the nearer tail to avoid cancellation.
pub fn normal_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        big_phi(-a) - big_phi(-b)
    } else {
        big_phi(b) - big_phi(a)
    }
}

/// Conditional density written straight from the bivariate-normal
/// conditioning argument: X ~ N(Δ, σ12²), D1 | X = x ~ N(x, σ1² − σ12²).
pub fn oracle_pdf(delta: f64, s1: f64, s2: f64, l: f64, u: f64, x: f64) -> f64 {
    let v12 = 1.0 / (1.0 / (s1 * s1) + 1.0 / (s2 * s2));
    let sd12 = v12.sqrt();
    let sd_cond = (s1 * s1 - v12).sqrt();
    let num = normal_mass((l - x) / sd_cond, (u - x) / sd_cond);
    let den = normal_mass((l - delta) / s1, (u - delta) / s1);
    phi((x - delta) / sd12) / sd12 * num / den
}

/// Composite trapezoid rule with `n` panels.
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = 0.5 * (f(a) + f(b));
    for i in 1..n {
        acc += f(a + i as f64 * h);
    }
    acc * h
}

/// Midpoint Riemann sum with `n` cells.
pub fn riemann<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

/// Pooled estimates of `n` accepted two-stage draws with `l < D1 < u`.
pub fn accept_reject<R: Rng>(rng: &mut R, delta: f64, s1: f64, s2: f64, l: f64, u: f64, n: usize) -> Vec<f64> {
    let (t1, t2) = (1.0 / (s1 * s1), 1.0 / (s2 * s2));
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let z: f64 = rng.sample(StandardNormal);
        let d1 = delta + s1 * z;
        if !(l < d1 && d1 < u) {
            continue;
        }
        let z: f64 = rng.sample(StandardNormal);
        let d2 = delta + s2 * z;
        out.push((t1 * d1 + t2 * d2) / (t1 + t2));
    }
    out
}

/// Binomial band `p ± z·√(p(1 − p)/n)`.
pub fn binomial_band(p: f64, n: usize, z: f64) -> (f64, f64) {
    let h = z * (p * (1.0 - p) / n as f64).sqrt();
    (p - h, p + h)
}

pub const Z_995: f64 = 2.575_829_303_548_900_4;

/// Z-statistic form of each rule, written independently of the library's
/// bound form. Returns the selected subpopulations (0-based, sorted).
pub fn oracle_selection(kind: RuleKind, p: &[f64], sigma: f64, n1: u64, means: &[f64]) -> Vec<usize> {
    let k = p.len();
    let full: f64 = p.iter().zip(means).map(|(a, b)| a * b).sum();
    match kind {
        RuleKind::D1 { z_star } => {
            let z_full = full / (2.0 * sigma / (n1 as f64).sqrt());
            let z: Vec<f64> = (0..k).map(|m| means[m] / (2.0 * sigma / (p[m] * n1 as f64).sqrt())).collect();
            if z_full > z_star {
                (0..k).collect()
            } else if z[0] >= z[1] {
                vec![0]
            } else {
                vec![1]
            }
        }
        RuleKind::D2 { delta_star } => {
            if full > delta_star {
                (0..k).collect()
            } else {
                let best = if means[0] >= means[1] { 0 } else { 1 };
                if means[best] > delta_star {
                    vec![best]
                } else {
                    vec![]
                }
            }
        }
        RuleKind::Kimani2015 { delta_star } => {
            if means[0] - full > delta_star {
                vec![0]
            } else {
                vec![0, 1]
            }
        }
        RuleKind::Kimani2018 { delta_star } => {
            for m in (1..=k).rev() {
                let pm: f64 = p[..m].iter().sum();
                let mean: f64 = (0..m).map(|i| p[i] * means[i]).sum::<f64>() / pm;
                if mean > delta_star {
                    return (0..m).collect();
                }
            }
            vec![]
        }
    }
}

/// Weights of a target's stage 1 estimator over the subpopulation means.
pub fn target_weights(p: &[f64], target: &Target) -> Vec<f64> {
    let k = p.len();
    match target {
        Target::Full => p.to_vec(),
        Target::Subset(set) => {
            let ps: f64 = set.iter().map(|&m| p[m]).sum();
            (0..k).map(|m| if set.contains(&m) { p[m] / ps } else { 0.0 }).collect()
        }
        Target::CoPrimary(m) => (0..k).map(|j| if j == *m { 1.0 } else { 0.0 }).collect(),
        Target::Unlabelled => vec![0.0; k],
    }
}

/// Stage 1 means with the target estimator moved to `y` while the part of
/// the data independent of it is held fixed. Stage 1 variances are
/// proportional to 1/p_m.
pub fn move_target(p: &[f64], means: &[f64], target: &Target, y: f64) -> Vec<f64> {
    let w = target_weights(p, target);
    let t: f64 = w.iter().zip(means).map(|(a, b)| a * b).sum();
    let cw: Vec<f64> = w.iter().zip(p).map(|(wi, pi)| wi / pi).collect();
    let norm: f64 = w.iter().zip(&cw).map(|(a, b)| a * b).sum();
    means.iter().zip(&cw).map(|(m, c)| m + (y - t) * c / norm).collect()
}

/// Is the target still reported when its estimator is moved to `y`?
pub fn target_survives(
    decide: impl Fn(&[f64]) -> InterimDecision,
    reference: &InterimDecision,
    p: &[f64],
    means: &[f64],
    target: &Target,
    y: f64,
) -> bool {
    let moved = move_target(p, means, target, y);
    let d = decide(&moved);
    d.selected == reference.selected && d.target(target).is_some()
}

/// Stage 1 estimate of a target computed from the means directly.
pub fn target_value(p: &[f64], means: &[f64], target: &Target) -> f64 {
    target_weights(p, target).iter().zip(means).map(|(a, b)| a * b).sum()
}

pub fn summary(design: &TrialDesign, means: Vec<f64>) -> Stage1Summary {
    Stage1Summary::new(design, means).unwrap()
}

/// Patient-level two-arm trial: in each stage and enrolled subpopulation,
/// half the patients get treatment (mean Δ_m) and half control (mean 0),
/// outcomes N(·, σ²). Returns per-subpopulation mean differences.
pub fn patient_level_stage<R: Rng>(
    rng: &mut R,
    counts: &[usize],
    deltas: &[f64],
    sigma: f64,
) -> Vec<Option<f64>> {
    counts
        .iter()
        .zip(deltas)
        .map(|(&n, &d)| {
            if n == 0 {
                return None;
            }
            assert!(n % 2 == 0, "odd patient count {n}");
            let arm = n / 2;
            let mut treat = 0.0;
            let mut ctrl = 0.0;
            for _ in 0..arm {
                let z: f64 = rng.sample(StandardNormal);
                treat += d + sigma * z;
                let z: f64 = rng.sample(StandardNormal);
                ctrl += sigma * z;
            }
            Some((treat - ctrl) / arm as f64)
        })
        .collect()
}

/// Draws `draws` stage 1 outcomes around the decision boundary and counts
/// violations of: the library decision equals the Z-statistic form, every
/// reported target's estimate lies in its bounds, and moving that estimate
/// (holding the independent remainder fixed) keeps the decision exactly
/// when it stays inside the bounds. Returns (violations, distinct branches).
pub fn rule_violations(design: &TrialDesign, kind: RuleKind, co_primary: bool, draws: usize, seed: u64) -> (usize, usize) {
    let rule = DecisionRule::new(kind, co_primary);
    let mut r = rng(seed);
    let k = design.k();
    let decide = |means: &[f64]| rule.apply(design, &summary(design, means.to_vec())).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    let mut bad = 0;
    let mut report = |msg: String| {
        if bad < 5 {
            eprintln!("{msg}");
        }
        bad += 1;
    };
    // Center the draws on the decision boundary in mean units.
    let center = match kind {
        RuleKind::D1 { z_star } => z_star * design.stage1_se(1.0),
        other => other.threshold(),
    };
    let scale = design.stage1_se(1.0) * 3.0;
    for i in 0..draws {
        let means: Vec<f64> = (0..k)
            .map(|_| {
                let z: f64 = r.sample(StandardNormal);
                center + scale * z
            })
            .collect();
        let dec = decide(&means);
        let want = oracle_selection(kind, &design.p, design.sigma, design.n1, &means);
        if dec.selected != want {
            report(format!("draw {i}: means {means:?} selected {:?}, oracle {want:?}", dec.selected));
        }
        seen.insert(dec.selected.clone());
        if dec.is_stop() != dec.targets.is_empty() {
            report(format!("draw {i}: stop without empty targets"));
        }
        for t in &dec.targets {
            if !(t.lower < t.upper && t.se1 > 0.0 && t.se2 > 0.0) {
                report(format!("draw {i}: malformed target {}", t.target));
            }
            if t.unaltered {
                continue;
            }
            let x = target_value(&design.p, &means, &t.target);
            if !(t.lower <= x && x <= t.upper) {
                report(format!("draw {i}: {} = {x} outside ({}, {})", t.target, t.lower, t.upper));
            }
            if i % 10 != 0 {
                continue;
            }
            let width = if (t.upper - t.lower).is_finite() { t.upper - t.lower } else { scale };
            let eps = 1e-9 * (1.0 + x.abs());
            let probes = [
                t.lower - 0.5 * width,
                t.lower - eps * 10.0,
                t.lower + eps * 10.0,
                x,
                t.upper - eps * 10.0,
                t.upper + eps * 10.0,
                t.upper + 0.5 * width,
            ];
            for y in probes.into_iter().filter(|y| y.is_finite()) {
                let inside = t.lower < y && y < t.upper;
                if inside != target_survives(decide, &dec, &design.p, &means, &t.target, y) {
                    report(format!("draw {i}: target {} moved to {y}, bounds ({}, {})", t.target, t.lower, t.upper));
                }
            }
        }
    }
    (bad, seen.len())
}

#[derive(Default)]
pub struct Count {
    pub n: usize,
    pub covered: usize,
}

/// Brute-force patient-level replicate counts: branch label → (trials, umau covers).
pub fn patient_level(design: &TrialDesign, rule: DecisionRule, deltas: &[f64], reps: usize, seed: u64) -> BTreeMap<String, Count> {
    let mut r = rng(seed);
    let mut out: BTreeMap<String, Count> = BTreeMap::new();
    let k = design.k();
    for _ in 0..reps {
        let c1: Vec<usize> = design.p.iter().map(|p| (p * design.n1 as f64).round() as usize).collect();
        let m1: Vec<f64> = patient_level_stage(&mut r, &c1, deltas, design.sigma).into_iter().map(Option::unwrap).collect();
        let s1 = Stage1Summary::new(design, m1).unwrap();
        let decision = rule.apply(design, &s1).unwrap();
        let entry = out.entry(decision.label(k)).or_default();
        entry.n += 1;
        if decision.is_stop() {
            continue;
        }
        let ps: f64 = decision.selected.iter().map(|&m| design.p[m]).sum();
        let c2: Vec<usize> = (0..k)
            .map(|m| if decision.selected.contains(&m) { (design.n2 as f64 * design.p[m] / ps).round() as usize } else { 0 })
            .collect();
        let s2 = Stage2Summary::from_components(patient_level_stage(&mut r, &c2, deltas, design.sigma));
        let cis = designs::confidence_intervals(design, &decision, &s1, &s2, &[Method::Umau]).unwrap();
        let truth = match &decision.targets[0].target {
            Target::Full => design.p.iter().zip(deltas).map(|(a, b)| a * b).sum::<f64>(),
            Target::Subset(set) => set.iter().map(|&m| design.p[m] * deltas[m]).sum::<f64>() / ps,
            _ => unreachable!(),
        };
        entry.covered += cis[0].contains(truth) as usize;
    }
    out
}

/// Largest standardized gap, over branches, between patient-level and
/// sufficient-statistic runs of the same scenario: branch proportions and
/// UMAU coverage, each in units of its two-sample standard error.
pub fn patient_level_gap(fast: &SimResult, oracle: &BTreeMap<String, Count>, reps: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for b in &fast.branches {
        let o = oracle.get(&b.label).map_or((0, 0), |c| (c.n, c.covered));
        let po = o.0 as f64 / reps as f64;
        let pooled = 0.5 * (po + b.proportion);
        let se = (pooled * (1.0 - pooled) * 2.0 / reps as f64).sqrt();
        worst = worst.max((po - b.proportion).abs() / se);
        if b.label == "stop" || o.0 == 0 {
            continue;
        }
        let co = o.1 as f64 / o.0 as f64;
        let nf = (b.proportion * reps as f64).round();
        let se = (0.95 * 0.05 * (1.0 / o.0 as f64 + 1.0 / nf)).sqrt();
        worst = worst.max((co - b.methods[0].coverage).abs() / se);
    }
    worst
}
