use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// How the endpoints of an integration range are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoints {
    /// Adaptive Gauss-Kronrod on a finite range.
    Regular,
    /// Integrable singularity at `lo`; double-exponential substitution.
    LeftSingular,
    /// Integrable singularity at `hi`; double-exponential substitution.
    RightSingular,
    /// `hi = +inf`; reciprocal map onto a finite range, then double-exponential.
    RightInfinite,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Interval budget for Gauss-Kronrod, level budget for the double-exponential rules.
    pub max_subdivisions: usize,
    pub endpoints: Endpoints,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_subdivisions: 200,
            endpoints: Endpoints::Regular,
        }
    }
}

impl QuadratureSpec {
    pub fn with_endpoints(mut self, endpoints: Endpoints) -> Self {
        self.endpoints = endpoints;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Integrates `f` over `[lo, hi]` (or `[lo, inf)` in right-infinite mode).
pub fn integrate<F>(f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<Integral>
where
    F: Fn(f64) -> f64,
{
    if !(spec.abs_tol > 0.0 && spec.rel_tol > 0.0) {
        return Err(Error::Precondition("quadrature tolerances must be positive".into()));
    }
    match spec.endpoints {
        Endpoints::RightInfinite => {
            if !lo.is_finite() {
                return Err(Error::Precondition("lower limit must be finite".into()));
            }
            // x = lo + v / (1 - v), dx = dv / (1 - v)^2
            tanh_sinh(
                |v, _, from_hi| {
                    if from_hi <= 0.0 {
                        return 0.0;
                    }
                    let x = lo + v / from_hi;
                    f(x) / (from_hi * from_hi)
                },
                0.0,
                1.0,
                spec,
            )
        }
        _ if lo == hi => Ok(Integral { value: 0.0, error: 0.0 }),
        _ if hi < lo => {
            let r = integrate(f, hi, lo, spec)?;
            Ok(Integral { value: -r.value, error: r.error })
        }
        _ if !lo.is_finite() || !hi.is_finite() => Err(Error::Precondition(
            "infinite limits require right-infinite mode".into(),
        )),
        Endpoints::Regular => gauss_kronrod(f, lo, hi, spec),
        Endpoints::LeftSingular => {
            tanh_sinh(|_, from_lo, _| f(lo + from_lo), lo, hi, spec)
        }
        Endpoints::RightSingular => {
            tanh_sinh(|_, _, from_hi| f(hi - from_hi), lo, hi, spec)
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod_segment<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Segment> {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    if !fc.is_finite() {
        return Err(Error::NonFinite { x: c });
    }
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let (xl, xr) = (c - h * x, c + h * x);
        let (fl, fr) = (f(xl), f(xr));
        if !fl.is_finite() {
            return Err(Error::NonFinite { x: xl });
        }
        if !fr.is_finite() {
            return Err(Error::NonFinite { x: xr });
        }
        kron += wk * (fl + fr);
        if i % 2 == 1 {
            gauss += WG[i / 2] * (fl + fr);
        }
    }
    Ok(Segment {
        lo,
        hi,
        value: kron * h,
        error: ((kron - gauss) * h).abs(),
    })
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<Integral> {
    let first = kronrod_segment(&f, lo, hi)?;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let budget = spec.max_subdivisions.max(1);
    while error > spec.target(value) {
        if heap.len() >= budget {
            return Err(Error::Quadrature { estimate: value, error });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            return Err(Error::Quadrature { estimate: value, error });
        }
        let left = kronrod_segment(&f, worst.lo, mid)?;
        let right = kronrod_segment(&f, mid, worst.hi)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // re-sum occasionally to keep round-off from drifting
        if heap.len() % 64 == 0 {
            value = heap.iter().map(|s| s.value).sum();
            error = heap.iter().map(|s| s.error).sum();
        }
    }
    let value = heap.iter().map(|s| s.value).sum();
    Ok(Integral { value, error })
}

/// Double-exponential rule on a finite range. `g` receives the abscissa and its
/// distances to both endpoints, computed without cancellation.
fn tanh_sinh<G: Fn(f64, f64, f64) -> f64>(g: G, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<Integral> {
    let half = 0.5 * (hi - lo);
    let centre = 0.5 * (lo + hi);

    // one abscissa pair at parameter t > 0, plus its weight
    let pair = |t: f64| -> Option<(f64, f64)> {
        let u = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * u).exp();
        let near = half * 2.0 * e / (1.0 + e);
        if near <= 0.0 || !near.is_finite() {
            return None;
        }
        let ch = u.cosh();
        let w = half * FRAC_PI_2 * t.cosh() / (ch * ch);
        if w == 0.0 || !w.is_finite() {
            return None;
        }
        let far = 2.0 * half - near;
        let left = g(lo + near, near, far);
        let right = g(hi - near, far, near);
        let mut s = 0.0;
        for v in [left, right] {
            if v.is_finite() {
                s += v;
            } else if t < 3.0 {
                return Some((f64::NAN, w));
            }
        }
        Some((s, w))
    };

    let sum_level = |h: f64, odd_only: bool| -> Result<f64> {
        let mut total = 0.0;
        let mut k: usize = 1;
        loop {
            if odd_only && k % 2 == 0 {
                k += 1;
                continue;
            }
            let t = k as f64 * h;
            match pair(t) {
                None => break,
                Some((s, w)) => {
                    if s.is_nan() {
                        return Err(Error::NonFinite { x: centre });
                    }
                    let term = w * s;
                    total += term;
                    if t > 1.0 && term.abs() < 1e-300 {
                        break;
                    }
                }
            }
            k += 1;
            if k > 1 << 22 {
                break;
            }
        }
        Ok(total)
    };

    let gc = g(centre, half, half);
    if !gc.is_finite() {
        return Err(Error::NonFinite { x: centre });
    }
    let mut h = 1.0;
    let mut sum = half * FRAC_PI_2 * gc + sum_level(h, false)?;
    let mut estimate = h * sum;
    let mut error = f64::INFINITY;
    let levels = spec.max_subdivisions.clamp(3, 14);
    for level in 1..=levels {
        h *= 0.5;
        sum += sum_level(h, true)?;
        let next = h * sum;
        error = (next - estimate).abs();
        estimate = next;
        if level >= 3 && error <= spec.target(estimate) {
            return Ok(Integral { value: estimate, error });
        }
    }
    Err(Error::Quadrature { estimate, error })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(endpoints: Endpoints) -> QuadratureSpec {
        QuadratureSpec::default().with_endpoints(endpoints)
    }

    #[test]
    fn linear_on_unit_interval() {
        let r = integrate(|x| x, 0.0, 1.0, &spec(Endpoints::Regular)).unwrap();
        assert!((r.value - 0.5).abs() < 1e-14);
    }

    #[test]
    fn inverse_square_root_left_singular() {
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, &spec(Endpoints::LeftSingular)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn right_singular_log() {
        // int_0^1 -ln(1 - x) dx = 1
        let r = integrate(|x| -(1.0 - x).ln(), 0.0, 1.0, &spec(Endpoints::RightSingular)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn right_infinite_exponential() {
        let r = integrate(|x| (-x).exp(), 0.0, f64::INFINITY, &spec(Endpoints::RightInfinite)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10, "{}", r.value);
        let r = integrate(|x| 1.0 / (1.0 + x * x), 1.0, f64::INFINITY, &spec(Endpoints::RightInfinite)).unwrap();
        assert!((r.value - std::f64::consts::FRAC_PI_4).abs() < 1e-10);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let r = integrate(|x| x * x, 2.0, 0.0, &spec(Endpoints::Regular)).unwrap();
        assert!((r.value + 8.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_regular() {
        let r = integrate(|x| (20.0 * x).sin(), 0.0, std::f64::consts::PI, &spec(Endpoints::Regular)).unwrap();
        assert!(r.value.abs() < 1e-10);
    }

    #[test]
    fn budget_exhaustion_reports_best_estimate() {
        let tight = QuadratureSpec {
            abs_tol: 1e-15,
            rel_tol: 1e-15,
            max_subdivisions: 2,
            endpoints: Endpoints::Regular,
        };
        match integrate(|x| (50.0 * x).sin().abs(), 0.0, 3.0, &tight) {
            Err(Error::Quadrature { estimate, .. }) => assert!(estimate.is_finite()),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let r = integrate(|x| if x > 0.5 { f64::NAN } else { 1.0 }, 0.0, 1.0, &spec(Endpoints::Regular));
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }
}
