//! Law of the precision-weighted two-stage estimate given that the stage 1
//! estimate fell inside `(lower, upper)`.
//!
//! With stage estimates `D1 ~ N(delta, sigma1²)` and `D2 ~ N(delta, sigma2²)`
//! the pooled estimate `D = (tau1·D1 + tau2·D2)/(tau1 + tau2)` is bivariate
//! normal with `D1`, correlation `rho = sigma12/sigma1`. Conditioning on the
//! stage 1 interval tilts the density by
//! `[Φ((u − x)/(sigma1·s)) − Φ((l − x)/(sigma1·s))] / P(l < D1 < u)` where
//! `s = sqrt(1 − rho²)`.
//!
//! Internally everything is expressed in standardized coordinates
//! `z = (x − delta)/sigma12` and `y = (D1 − delta)/sigma1`.

use crate::bvn;
use crate::error::{Error, Result};
use crate::normal;
use crate::quad;

/// Selection probabilities below this are treated as a degenerate event.
pub const MIN_SELECTION_PROBABILITY: f64 = 1e-300;

/// Below this selection probability the bivariate-normal route loses absolute
/// accuracy and the CDF switches to quadrature.
const CLOSED_FORM_MIN_SELECTION: f64 = 1e-6;

const QUAD_ABS_TOL: f64 = 1e-13;
const QUAD_REL_TOL: f64 = 1e-11;

/// How the CDF and partial moments are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Evaluator {
    /// Bivariate-normal closed forms, with quadrature when the selection
    /// event is too improbable for them.
    #[default]
    ClosedForm,
    /// Adaptive quadrature of the density everywhere. Slow; the reference.
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalNormal {
    delta: f64,
    sigma1: f64,
    sigma2: f64,
    lower: f64,
    upper: f64,
    tau1: f64,
    tau2: f64,
    sigma12: f64,
    ratio: f64,
    rho: f64,
    s: f64,
    lo_std: f64,
    hi_std: f64,
    ln_selection: f64,
    evaluator: Evaluator,
}

impl ConditionalNormal {
    pub fn new(delta: f64, sigma1: f64, sigma2: f64, lower: f64, upper: f64) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::Domain(format!("delta must be finite, got {delta}")));
        }
        if !(sigma1 > 0.0 && sigma1.is_finite() && sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Domain(format!(
                "stage standard errors must be positive and finite, got {sigma1}, {sigma2}"
            )));
        }
        if lower.is_nan() || upper.is_nan() || lower >= upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(Error::Domain(format!("invalid truncation interval ({lower}, {upper})")));
        }
        let tau1 = 1.0 / (sigma1 * sigma1);
        let tau2 = 1.0 / (sigma2 * sigma2);
        let sigma12 = sigma1 * sigma2 / sigma1.hypot(sigma2);
        let rho = sigma2 / sigma1.hypot(sigma2);
        let s = sigma1 / sigma1.hypot(sigma2);
        let lo_std = (lower - delta) / sigma1;
        let hi_std = (upper - delta) / sigma1;
        let ln_selection = normal::log_phi_diff(lo_std, hi_std);
        if !(ln_selection >= MIN_SELECTION_PROBABILITY.ln()) {
            return Err(Error::Domain(format!(
                "selection probability P({lower} < D1 < {upper}) = exp({ln_selection:.1}) at delta = {delta} \
                 is below {MIN_SELECTION_PROBABILITY:e}"
            )));
        }
        Ok(Self {
            delta,
            sigma1,
            sigma2,
            lower,
            upper,
            tau1,
            tau2,
            sigma12,
            ratio: sigma1 / sigma2,
            rho,
            s,
            lo_std,
            hi_std,
            ln_selection,
            evaluator: Evaluator::default(),
        })
    }

    /// No selection: the ordinary normal law of the pooled estimate.
    pub fn untruncated(delta: f64, sigma1: f64, sigma2: f64) -> Result<Self> {
        Self::new(delta, sigma1, sigma2, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn with_evaluator(mut self, evaluator: Evaluator) -> Self {
        self.evaluator = evaluator;
        self
    }

    /// Same stage errors and selection interval at another parameter value.
    pub fn at(&self, delta: f64) -> Result<Self> {
        Ok(Self::new(delta, self.sigma1, self.sigma2, self.lower, self.upper)?.with_evaluator(self.evaluator))
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    pub fn lower(&self) -> f64 {
        self.lower
    }
    pub fn upper(&self) -> f64 {
        self.upper
    }
    pub fn tau1(&self) -> f64 {
        self.tau1
    }
    pub fn tau2(&self) -> f64 {
        self.tau2
    }
    /// Standard deviation of the pooled estimate without selection.
    pub fn sigma12(&self) -> f64 {
        self.sigma12
    }
    /// `sigma1 / sigma2`.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }
    pub fn evaluator(&self) -> Evaluator {
        self.evaluator
    }
    pub fn is_untruncated(&self) -> bool {
        self.lower == f64::NEG_INFINITY && self.upper == f64::INFINITY
    }
    /// P(lower < D1 < upper) at the model's delta.
    pub fn selection_probability(&self) -> f64 {
        self.ln_selection.exp()
    }

    #[inline]
    pub(crate) fn to_std(&self, x: f64) -> f64 {
        (x - self.delta) / self.sigma12
    }

    #[inline]
    pub(crate) fn from_std(&self, z: f64) -> f64 {
        self.delta + self.sigma12 * z
    }

    /// ln of the conditional selection probability given z: P(l' < y < u' | z).
    #[inline]
    fn ln_tilt(&self, z: f64) -> f64 {
        let shift = self.rho * z;
        normal::log_phi_diff((self.lo_std - shift) / self.s, (self.hi_std - shift) / self.s)
    }

    /// Density of z (standardized), no argument checks.
    #[inline]
    fn density_std(&self, z: f64) -> f64 {
        if !z.is_finite() {
            return 0.0;
        }
        (normal::ln_pdf(z) + self.ln_tilt(z) - self.ln_selection).exp()
    }

    /// φ(y)/P(selection) at a standardized stage 1 bound; zero at ±∞.
    #[inline]
    fn bound_hazard(&self, y: f64) -> f64 {
        if y.is_finite() {
            (normal::ln_pdf(y) - self.ln_selection).exp()
        } else {
            0.0
        }
    }

    /// Conditional density of the pooled estimate at `x`.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("pdf argument must be finite, got {x}")));
        }
        Ok(self.density_std(self.to_std(x)) / self.sigma12)
    }

    /// Conditional mean, closed form.
    pub fn mean(&self) -> f64 {
        self.from_std(self.mean_std())
    }

    pub(crate) fn mean_std(&self) -> f64 {
        self.rho * (self.bound_hazard(self.lo_std) - self.bound_hazard(self.hi_std))
    }

    /// Conditional standard deviation in z units (approximate in deep tails).
    fn sd_std(&self) -> f64 {
        let (l, u) = (self.lo_std, self.hi_std);
        let hl = self.bound_hazard(l);
        let hu = self.bound_hazard(u);
        let lh = if l.is_finite() { l * hl } else { 0.0 };
        let uh = if u.is_finite() { u * hu } else { 0.0 };
        let var_y = (1.0 + lh - uh - (hl - hu).powi(2)).clamp(0.0, 1.0);
        (self.s * self.s + self.rho * self.rho * var_y).sqrt()
    }

    /// Range of z outside of which the conditional mass is below ~1e-18.
    fn support_std(&self) -> (f64, f64) {
        const SPREAD: f64 = 83.0; // 2·ln(1e18)
        const EDGE: f64 = 9.2;
        let (l, u) = (self.lo_std, self.hi_std);
        let (ylo, yhi) = if l >= 0.0 {
            (l, u.min((l * l + SPREAD).sqrt()))
        } else if u <= 0.0 {
            ((-(u * u + SPREAD).sqrt()).max(l), u)
        } else {
            (l.max(-EDGE), u.min(EDGE))
        };
        (self.rho * ylo - 9.5 * self.s, self.rho * yhi + 9.5 * self.s)
    }

    /// Integrates `g(z)·density(z)` over `[a, b]` (standardized, clipped to the support).
    fn integrate_std<G: Fn(f64) -> f64>(&self, g: G, a: f64, b: f64) -> Result<f64> {
        let (slo, shi) = self.support_std();
        let a = a.max(slo);
        let b = b.min(shi);
        if a >= b {
            return Ok(0.0);
        }
        let m = self.mean_std();
        let sd = self.sd_std().max(1e-3);
        let mut cuts = vec![a];
        for k in [-4.0, -1.0, 0.0, 1.0, 4.0] {
            let c = m + k * sd;
            if c > a && c < b && c > *cuts.last().unwrap() {
                cuts.push(c);
            }
        }
        cuts.push(b);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let est = quad::integrate(|z| g(z) * self.density_std(z), w[0], w[1], QUAD_ABS_TOL, QUAD_REL_TOL)?;
            total += est.value;
        }
        Ok(total)
    }

    fn cdf_std(&self, z: f64) -> Result<f64> {
        if z == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        if z == f64::INFINITY {
            return Ok(1.0);
        }
        let use_closed = self.evaluator == Evaluator::ClosedForm && self.ln_selection >= CLOSED_FORM_MIN_SELECTION.ln();
        let value = if use_closed {
            self.cdf_std_closed(z)
        } else {
            self.integrate_std(|_| 1.0, f64::NEG_INFINITY, z)?
        };
        Ok(value.clamp(0.0, 1.0))
    }

    /// P(Z ≤ z, l' < Y < u') / P(l' < Y < u') via bivariate orthants with corr(Z, Y) = rho.
    fn cdf_std_closed(&self, z: f64) -> f64 {
        let (l, u, r) = (self.lo_std, self.hi_std, self.rho);
        let joint = if l >= 0.0 {
            // Interval in the upper half: P(Z ≤ z, Y > l) − P(Z ≤ z, Y > u).
            bvn::upper_orthant(-z, l, -r) - bvn::upper_orthant(-z, u, -r)
        } else if u <= 0.0 {
            bvn::lower_orthant(z, u, r) - bvn::lower_orthant(z, l, r)
        } else {
            normal::cdf(z) - bvn::lower_orthant(z, l, r) - bvn::upper_orthant(-z, u, -r)
        };
        joint / self.ln_selection.exp()
    }

    /// Conditional CDF at `x`. Infinite arguments map to 0 and 1.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::Domain("cdf argument is NaN".into()));
        }
        self.cdf_std(self.to_std(x))
    }

    /// Conditional quantile by bracketed safeguarded Newton.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        self.quantile_near(q, None)
    }

    /// Quantile with an optional warm start in outcome units.
    pub fn quantile_near(&self, q: f64, guess: Option<f64>) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {q}")));
        }
        let z0 = match guess {
            Some(x) if x.is_finite() => self.to_std(x),
            _ => self.mean_std() + self.sd_std() * normal::quantile(q),
        };
        Ok(self.from_std(self.quantile_std(q, z0)?))
    }

    fn quantile_std(&self, q: f64, z0: f64) -> Result<f64> {
        const F_TOL: f64 = 1e-12;
        const MAX_ITER: usize = 200;
        let step0 = self.sd_std().max(1e-3);
        let mut z = z0;
        let mut below = f64::NEG_INFINITY; // F(below) < q
        let mut above = f64::INFINITY; // F(above) > q
        let mut step = step0;
        for _ in 0..MAX_ITER {
            let gap = self.cdf_std(z)? - q;
            if gap.abs() <= F_TOL {
                return Ok(z);
            }
            if gap < 0.0 {
                below = z;
            } else {
                above = z;
            }
            if above - below <= 1e-14 * (1.0 + z.abs()) {
                return Ok(z);
            }
            let dens = self.density_std(z);
            let newton = z - gap / dens;
            z = if dens > 0.0 && newton.is_finite() && newton > below && newton < above {
                newton
            } else if below.is_finite() && above.is_finite() {
                0.5 * (below + above)
            } else if gap < 0.0 {
                step *= 2.0;
                below + step
            } else {
                step *= 2.0;
                above - step
            };
        }
        Err(Error::Numerical(format!("quantile({q}) did not converge (bracket [{below}, {above}])")))
    }

    /// ∫ₐᵇ t·f(t) dt.
    pub fn partial_moment(&self, a: f64, b: f64) -> Result<f64> {
        if a.is_nan() || b.is_nan() || a > b {
            return Err(Error::Domain(format!("partial moment needs a <= b, got [{a}, {b}]")));
        }
        if a == b {
            return Ok(0.0);
        }
        let (za, zb) = (self.to_std(a), self.to_std(b));
        let mass = self.cdf_std(zb)? - self.cdf_std(za)?;
        Ok(self.delta * mass + self.sigma12 * self.centered_moment_std(za, zb)?)
    }

    /// ∫ z·density(z) dz over [za, zb] in standardized units.
    pub(crate) fn centered_moment_std(&self, za: f64, zb: f64) -> Result<f64> {
        match self.evaluator {
            Evaluator::Quadrature => self.integrate_std(|z| z, za, zb),
            Evaluator::ClosedForm => Ok(self.centered_moment_closed(za, zb)),
        }
    }

    /// Integration by parts of z·φ(z)·G(z), with
    /// ∫ φ(z)·φ((c − ρz)/s) dz = s·φ(c)·[Φ((b − ρc)/s) − Φ((a − ρc)/s)].
    fn centered_moment_closed(&self, za: f64, zb: f64) -> f64 {
        let (l, u, r, s) = (self.lo_std, self.hi_std, self.rho, self.s);
        let boundary = |z: f64| if z.is_finite() { self.density_std(z) } else { 0.0 };
        let edge = |y: f64| {
            let h = self.bound_hazard(y);
            if h == 0.0 {
                0.0
            } else {
                h * normal::phi_diff((za - r * y) / s, (zb - r * y) / s)
            }
        };
        boundary(za) - boundary(zb) - r * (edge(u) - edge(l))
    }

    /// `partial_moment` and the CDF in standardized units for the UMPU solver:
    /// returns (F(z), density(z)).
    pub(crate) fn cdf_and_density_std(&self, z: f64) -> Result<(f64, f64)> {
        Ok((self.cdf_std(z)?, self.density_std(z)))
    }

    /// Standardized quantile; a non-finite `z0` falls back to the normal approximation.
    pub(crate) fn quantile_std_near(&self, q: f64, z0: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {q}")));
        }
        let z0 = if z0.is_finite() { z0 } else { self.mean_std() + self.sd_std() * normal::quantile(q) };
        self.quantile_std(q, z0)
    }
}
