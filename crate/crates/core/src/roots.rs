//! Bracketed root finding for monotone scalar functions.
//!
//! Objective closures return `Result` because evaluating them usually means
//! solving another root problem underneath.

use crate::error::{Error, Result};

/// A sign-changing interval for a function known to be monotone on it.
#[derive(Debug, Clone, Copy)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl Bracket {
    pub fn has_sign_change(&self) -> bool {
        self.f_lo == 0.0 || self.f_hi == 0.0 || (self.f_lo < 0.0) != (self.f_hi < 0.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    /// Stop once |f(x)| falls below this.
    pub f_abs: f64,
    /// Stop once the bracket is narrower than `x_abs + x_rel·|x|`.
    pub x_abs: f64,
    pub x_rel: f64,
    pub max_iter: usize,
}

impl Tolerance {
    fn x_tol(&self, x: f64) -> f64 {
        self.x_abs + self.x_rel * x.abs()
    }
}

/// Grow `[center − step, center + step]` by doubling the offending end until
/// an increasing (`increasing = true`) or decreasing function changes sign.
pub fn expand_bracket<F>(mut f: F, center: f64, step: f64, doublings: usize, increasing: bool) -> Result<Bracket>
where
    F: FnMut(f64) -> Result<f64>,
{
    let orient = if increasing { 1.0 } else { -1.0 };
    let mut lo = center - step;
    let mut hi = center + step;
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    let mut lo_step = step;
    let mut hi_step = step;
    for _ in 0..doublings {
        let low_ok = orient * f_lo <= 0.0;
        let high_ok = orient * f_hi >= 0.0;
        if low_ok && high_ok {
            break;
        }
        if !low_ok {
            hi = lo;
            f_hi = f_lo;
            lo_step *= 2.0;
            lo -= lo_step;
            f_lo = f(lo)?;
        } else {
            lo = hi;
            f_lo = f_hi;
            hi_step *= 2.0;
            hi += hi_step;
            f_hi = f(hi)?;
        }
    }
    let b = Bracket { lo, hi, f_lo, f_hi };
    if b.has_sign_change() {
        Ok(b)
    } else {
        Err(Error::Numerical(format!(
            "no sign change on [{lo:.6e}, {hi:.6e}] (f = {f_lo:.3e}, {f_hi:.3e}) after {doublings} doublings"
        )))
    }
}

/// Brent's method (inverse quadratic interpolation, secant and bisection).
pub fn brent<F>(mut f: F, bracket: Bracket, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !bracket.has_sign_change() {
        return Err(Error::Numerical(format!(
            "bracket [{}, {}] has no sign change ({}, {})",
            bracket.lo, bracket.hi, bracket.f_lo, bracket.f_hi
        )));
    }
    let (mut a, mut fa) = (bracket.lo, bracket.f_lo);
    let (mut b, mut fb) = (bracket.hi, bracket.f_hi);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;

    for _ in 0..tol.max_iter {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let xtol = 0.5 * tol.x_tol(b) + 2.0 * f64::EPSILON * b.abs();
        let m = 0.5 * (c - b);
        if fb.abs() <= tol.f_abs || m.abs() <= xtol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= xtol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (xtol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > xtol { d } else { xtol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::Numerical(format!("Brent did not converge within {} iterations near {b}", tol.max_iter)))
}

/// Newton's method kept inside a sign-change bracket; falls back to bisection
/// whenever the Newton step leaves the bracket or the derivative is unusable.
/// `f` returns the value and derivative.
pub fn safeguarded_newton<F>(mut f: F, bracket: Bracket, x0: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    if !bracket.has_sign_change() {
        return Err(Error::Numerical(format!(
            "bracket [{}, {}] has no sign change ({}, {})",
            bracket.lo, bracket.hi, bracket.f_lo, bracket.f_hi
        )));
    }
    if bracket.f_lo == 0.0 {
        return Ok(bracket.lo);
    }
    if bracket.f_hi == 0.0 {
        return Ok(bracket.hi);
    }
    // Keep `neg` where f < 0 and `pos` where f > 0.
    let (mut neg, mut pos) = if bracket.f_lo < 0.0 {
        (bracket.lo, bracket.hi)
    } else {
        (bracket.hi, bracket.lo)
    };
    let mut x = if x0 > neg.min(pos) && x0 < neg.max(pos) { x0 } else { 0.5 * (neg + pos) };
    for _ in 0..tol.max_iter {
        let (fx, dfx) = f(x)?;
        if fx.abs() <= tol.f_abs || fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            neg = x;
        } else {
            pos = x;
        }
        let width = (pos - neg).abs();
        if width <= tol.x_tol(x) {
            return Ok(x);
        }
        let newton = x - fx / dfx;
        let (lo, hi) = (neg.min(pos), neg.max(pos));
        x = if dfx.is_finite() && dfx != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::Numerical(format!("safeguarded Newton did not converge within {} iterations near {x}", tol.max_iter)))
}
