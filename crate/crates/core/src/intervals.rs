//! Conditional UMPU acceptance regions, their inversion into UMAU intervals,
//! the two one-sided (TOST) conditional interval, and the naive z-interval.

use std::fmt;
use std::str::FromStr;

use crate::condnorm::{ConditionalNormal, Evaluator};
use crate::error::{Error, Result};
use crate::normal;
use crate::roots::{self, Bracket, Tolerance};

/// Acceptance region `[c1, c2]` of the two-sided conditional UMPU test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPair {
    pub c1: f64,
    pub c2: f64,
}

impl CriticalPair {
    /// Residuals of the size and unbiasedness constraints, recomputed by
    /// quadrature: `(P(c1 ≤ X ≤ c2) − (1 − α), ∫ t f − (1 − α)·E X)`.
    pub fn residuals(&self, model: &ConditionalNormal, alpha: f64) -> Result<(f64, f64)> {
        let reference = model.with_evaluator(Evaluator::Quadrature);
        let mass = reference.cdf(self.c2)? - reference.cdf(self.c1)?;
        let moment = reference.partial_moment(self.c1, self.c2)?;
        Ok((mass - (1.0 - alpha), moment - (1.0 - alpha) * model.mean()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Naive,
    Umau,
    Tost,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Naive, Method::Umau, Method::Tost];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Umau => "umau",
            Method::Tost => "tost",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "naive" => Ok(Method::Naive),
            "umau" => Ok(Method::Umau),
            "tost" => Ok(Method::Tost),
            other => Err(Error::Config(format!("unknown method `{other}` (expected naive, umau or tost)"))),
        }
    }
}

/// The parameter an interval estimates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    /// The whole population.
    Full,
    /// Effect in the union of the listed subpopulations (0-based, sorted, proper subset).
    Subset(Vec<usize>),
    /// A single subpopulation effect estimated alongside a full-population continuation.
    CoPrimary(usize),
    Unlabelled,
}

impl Target {
    pub fn label(&self) -> String {
        match self {
            Target::Full => "full".into(),
            Target::Subset(ix) => ix.iter().map(|m| format!("s{}", m + 1)).collect::<Vec<_>>().join("+"),
            Target::CoPrimary(m) => format!("s{}", m + 1),
            Target::Unlabelled => "delta".into(),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalEstimate {
    pub lower: f64,
    pub upper: f64,
    pub method: Method,
    pub alpha: f64,
    pub target: Target,
}

impl IntervalEstimate {
    pub fn with_target(mut self, target: Target) -> Self {
        self.target = target;
        self
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, delta: f64) -> bool {
        self.lower <= delta && delta <= self.upper
    }
}

fn check_umau_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0, 0.5) for the UMPU construction, got {alpha}")))
    }
}

fn check_observed(observed: f64) -> Result<()> {
    if observed.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("observed estimate must be finite, got {observed}")))
    }
}

/// Solves `I(c1) = (1 − α)·E(X)` with `c2 = F⁻¹(F(c1) + 1 − α)`.
pub fn solve_umpu(model: &ConditionalNormal, alpha: f64) -> Result<CriticalPair> {
    solve_umpu_near(model, alpha, None)
}

/// As [`solve_umpu`], warm-started from the critical pair of a nearby model.
pub fn solve_umpu_near(model: &ConditionalNormal, alpha: f64, hint: Option<CriticalPair>) -> Result<CriticalPair> {
    check_umau_alpha(alpha)?;
    let umpu = Umpu::new(model, alpha);
    let (z1_0, z2_0) = match hint {
        Some(cp) if cp.c1.is_finite() && cp.c2.is_finite() => (model.to_std(cp.c1), model.to_std(cp.c2)),
        _ => (f64::NAN, f64::NAN),
    };
    if let Some(cp) = umpu.newton(z1_0, z2_0)? {
        return Ok(cp);
    }
    umpu.bracketed()
}

/// Largest joint Newton step, in standardized units.
const MAX_NEWTON_STEP: f64 = 1.0;

/// The moment equation in standardized units.
struct Umpu<'a> {
    model: &'a ConditionalNormal,
    alpha: f64,
    target: f64,
}

const UMPU_TOL: Tolerance = Tolerance { f_abs: 1e-13, x_abs: 1e-13, x_rel: 1e-13, max_iter: 100 };

impl<'a> Umpu<'a> {
    fn new(model: &'a ConditionalNormal, alpha: f64) -> Self {
        Self { model, alpha, target: (1.0 - alpha) * model.mean_std() }
    }

    /// (I(z1) − target, I'(z1), z2), or `None` when F(z1) ≥ α leaves no room for z2.
    fn eval(&self, z1: f64, z2_hint: f64) -> Result<Option<(f64, f64, f64)>> {
        let (f1, dens1) = self.model.cdf_and_density_std(z1)?;
        let q2 = f1 + 1.0 - self.alpha;
        if !(q2 < 1.0) || !(f1 > 0.0) {
            return Ok(None);
        }
        let z2 = self.model.quantile_std_near(q2, z2_hint)?;
        let moment = self.model.centered_moment_std(z1, z2)?;
        Ok(Some((moment - self.target, dens1 * (z2 - z1), z2)))
    }

    fn pair(&self, z1: f64, z2: f64) -> CriticalPair {
        CriticalPair { c1: self.model.from_std(z1), c2: self.model.from_std(z2) }
    }

    /// Newton on both constraints jointly,
    /// `F(z2) − F(z1) = 1 − α` and `∫ z f = target`, from a warm start.
    /// Returns `None` when an iterate leaves the valid region or fails to
    /// settle; the bracketed one-dimensional solver then takes over.
    fn newton(&self, z1_0: f64, z2_0: f64) -> Result<Option<CriticalPair>> {
        let model = self.model;
        let (mut z1, mut z2) = if z1_0.is_finite() && z2_0.is_finite() && z1_0 < z2_0 {
            (z1_0, z2_0)
        } else {
            (
                model.quantile_std_near(0.5 * self.alpha, f64::NAN)?,
                model.quantile_std_near(1.0 - 0.5 * self.alpha, f64::NAN)?,
            )
        };
        for _ in 0..25 {
            let (f_lo, d_lo) = model.cdf_and_density_std(z1)?;
            let (f_hi, d_hi) = model.cdf_and_density_std(z2)?;
            let r1 = f_hi - f_lo - (1.0 - self.alpha);
            let r2 = model.centered_moment_std(z1, z2)? - self.target;
            if r1.abs() <= 1e-13 && r2.abs() <= UMPU_TOL.f_abs {
                return Ok(Some(self.pair(z1, z2)));
            }
            if !(d_lo > 0.0 && d_hi > 0.0) {
                return Ok(None);
            }
            let gap = z2 - z1;
            let mut s1 = (z2 * r1 - r2) / (d_lo * gap);
            let mut s2 = (z1 * r1 - r2) / (d_hi * gap);
            let big = s1.abs().max(s2.abs());
            if !big.is_finite() {
                return Ok(None);
            }
            if big > MAX_NEWTON_STEP {
                s1 *= MAX_NEWTON_STEP / big;
                s2 *= MAX_NEWTON_STEP / big;
            }
            z1 += s1;
            z2 += s2;
            if z1 >= z2 {
                return Ok(None);
            }
            if big <= UMPU_TOL.x_abs + UMPU_TOL.x_rel * z2.abs().max(z1.abs()) {
                return Ok(Some(self.pair(z1, z2)));
            }
        }
        Ok(None)
    }

    /// Safeguarded Newton on the validated bracket [F⁻¹(1e-8), F⁻¹(α(1 − 1e-8))].
    fn bracketed(&self) -> Result<CriticalPair> {
        let model = self.model;
        let alpha = self.alpha;
        let lo = model.quantile_std_near(1e-8, f64::NAN)?;
        let hi = model.quantile_std_near(alpha * (1.0 - 1e-8), f64::NAN)?;
        let c2_start = model.quantile_std_near(1.0 - 0.5 * alpha, f64::NAN)?;
        let value = |z: f64| -> Result<(f64, f64, f64)> {
            self.eval(z, c2_start)?
                .ok_or_else(|| Error::Numerical(format!("UMPU: no upper critical value for c1 at standardized {z}")))
        };
        let (f_lo, _, _) = value(lo)?;
        let (f_hi, _, _) = value(hi)?;
        let bracket = Bracket { lo, hi, f_lo, f_hi };
        if !bracket.has_sign_change() {
            return Err(Error::Numerical(format!(
                "UMPU bracket [{:.6}, {:.6}] has no sign change (I − target = {f_lo:.3e}, {f_hi:.3e}); \
                 delta = {}, sigma1 = {}, sigma2 = {}, bounds = ({}, {}), alpha = {alpha}",
                model.from_std(lo),
                model.from_std(hi),
                model.delta(),
                model.sigma1(),
                model.sigma2(),
                model.lower(),
                model.upper()
            )));
        }
        let start = model.quantile_std_near(0.5 * alpha, f64::NAN)?;
        let z1 = roots::safeguarded_newton(
            |z| {
                let (g, dg, _) = value(z)?;
                Ok((g, dg))
            },
            bracket,
            start,
            UMPU_TOL,
        )?;
        let (_, _, z2) = value(z1)?;
        Ok(self.pair(z1, z2))
    }
}

/// Finds the Δ at which the monotone function `g(Δ)` vanishes, starting from
/// a bracket around `center` of half-width `step`.
fn invert<G>(g: G, center: f64, step: f64, increasing: bool, endpoint: &str) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    let mut g = g;
    let bracket = roots::expand_bracket(&mut g, center, step, 6, increasing)
        .map_err(|e| Error::Numerical(format!("{endpoint} endpoint: {e}")))?;
    let tol = Tolerance { f_abs: 0.0, x_abs: 1e-10 * step, x_rel: 1e-13, max_iter: 200 };
    roots::brent(g, bracket, tol).map_err(|e| Error::Numerical(format!("{endpoint} endpoint: {e}")))
}

/// Conditional UMAU interval: lower solves `C2(Δ) = observed`, upper solves
/// `C1(Δ) = observed`. The model's own Δ is ignored.
pub fn umau_ci(model: &ConditionalNormal, observed: f64, alpha: f64) -> Result<IntervalEstimate> {
    check_umau_alpha(alpha)?;
    check_observed(observed)?;
    let se = model.sigma12();
    let z = normal::quantile(1.0 - 0.5 * alpha);
    let mut hint = None;
    let lower = invert(
        |d| {
            let cp = solve_umpu_near(&model.at(d)?, alpha, hint)?;
            hint = Some(cp);
            Ok(cp.c2 - observed)
        },
        observed - z * se,
        2.0 * se,
        true,
        "lower",
    )?;
    let mut hint = None;
    let upper = invert(
        |d| {
            let cp = solve_umpu_near(&model.at(d)?, alpha, hint)?;
            hint = Some(cp);
            Ok(cp.c1 - observed)
        },
        observed + z * se,
        2.0 * se,
        true,
        "upper",
    )?;
    finish(lower, upper, Method::Umau, alpha)
}

/// Conditional two one-sided tests interval: `F_Δ(observed) = 1 − α/2` at the
/// lower end and `α/2` at the upper end.
pub fn ctost_ci(model: &ConditionalNormal, observed: f64, alpha: f64) -> Result<IntervalEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    check_observed(observed)?;
    let se = model.sigma12();
    let z = normal::quantile(1.0 - 0.5 * alpha);
    let lower = invert(
        |d| Ok(model.at(d)?.cdf(observed)? - (1.0 - 0.5 * alpha)),
        observed - z * se,
        2.0 * se,
        false,
        "lower",
    )?;
    let upper = invert(
        |d| Ok(model.at(d)?.cdf(observed)? - 0.5 * alpha),
        observed + z * se,
        2.0 * se,
        false,
        "upper",
    )?;
    finish(lower, upper, Method::Tost, alpha)
}

/// `observed ± z_{1−α/2}·se`.
pub fn naive_ci(observed: f64, se: f64, alpha: f64) -> Result<IntervalEstimate> {
    check_observed(observed)?;
    if !(se > 0.0 && se.is_finite()) {
        return Err(Error::Domain(format!("standard error must be positive, got {se}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let half = normal::quantile(1.0 - 0.5 * alpha) * se;
    finish(observed - half, observed + half, Method::Naive, alpha)
}

fn finish(lower: f64, upper: f64, method: Method, alpha: f64) -> Result<IntervalEstimate> {
    if !(lower.is_finite() && upper.is_finite() && lower < upper) {
        return Err(Error::Numerical(format!("{method} interval is degenerate: ({lower}, {upper})")));
    }
    Ok(IntervalEstimate { lower, upper, method, alpha, target: Target::Unlabelled })
}

/// Dispatch by method; the naive interval uses the model's σ₁₂ as its SE.
pub fn interval(model: &ConditionalNormal, observed: f64, alpha: f64, method: Method) -> Result<IntervalEstimate> {
    match method {
        Method::Naive => naive_ci(observed, model.sigma12(), alpha),
        Method::Umau => umau_ci(model, observed, alpha),
        Method::Tost => ctost_ci(model, observed, alpha),
    }
}
