use crate::error::{Error, Result};

/// An interval on which a function is known to change sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_hi: f64,
}

impl Bracket {
    /// Evaluates `f` at both ends and certifies the sign change.
    pub fn new<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64) -> Result<Bracket> {
        let f_lo = f(lo);
        let f_hi = f(hi);
        Bracket::from_values(lo, hi, f_lo, f_hi)
    }

    pub fn from_values(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Result<Bracket> {
        if !(lo < hi) {
            return Err(Error::Precondition(format!("bracket [{lo}, {hi}] is empty")));
        }
        if !f_lo.is_finite() {
            return Err(Error::NonFinite { x: lo });
        }
        if !f_hi.is_finite() {
            return Err(Error::NonFinite { x: hi });
        }
        if f_lo * f_hi > 0.0 {
            return Err(Error::NoBracket { lo, hi });
        }
        Ok(Bracket { lo, hi, f_lo, f_hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

/// Brent's method. Stops when the enclosing interval is narrower than `tol`
/// (plus a few ulps of the iterate) or an exact zero is hit.
pub fn find_root<F: FnMut(f64) -> f64>(mut f: F, bracket: &Bracket, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = (bracket.f_lo, bracket.f_hi);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb * fc > 0.0 {
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
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::NonFinite { x: b });
        }
    }
    Err(Error::Convergence(format!("root finder exhausted iterations near {b}")))
}
