//! Spectral cumulative integration on Chebyshev-Lobatto points.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Polynomial degree of the rule; the rule has `DEGREE + 1` nodes.
pub const DEGREE: usize = 24;
pub const NODES: usize = DEGREE + 1;

pub struct ChebyshevRule {
    /// Ascending nodes on [-1, 1].
    nodes: [f64; NODES],
    /// Row j maps node values to the integral from -1 to node j.
    cumulative: Vec<[f64; NODES]>,
}

impl ChebyshevRule {
    pub fn get() -> &'static ChebyshevRule {
        static RULE: OnceLock<ChebyshevRule> = OnceLock::new();
        RULE.get_or_init(ChebyshevRule::build)
    }

    fn build() -> ChebyshevRule {
        let n = DEGREE;
        // node j sits at angle (n - j) pi / n so that nodes ascend
        let theta: Vec<f64> = (0..=n).map(|j| (n - j) as f64 * PI / n as f64).collect();
        let mut nodes = [0.0; NODES];
        for (j, t) in theta.iter().enumerate() {
            nodes[j] = t.cos();
        }
        nodes[0] = -1.0;
        nodes[n] = 1.0;

        let mut cumulative = vec![[0.0; NODES]; NODES];
        for i in 0..=n {
            // Chebyshev coefficients of the interpolant through e_i
            let mut b = vec![0.0; n + 1];
            let end = if i == 0 || i == n { 0.5 } else { 1.0 };
            for (k, bk) in b.iter_mut().enumerate() {
                let mut c = 2.0 / n as f64 * end * (k as f64 * theta[i]).cos();
                if k == 0 || k == n {
                    c *= 0.5;
                }
                *bk = c;
            }
            // antiderivative coefficients
            let mut d = vec![0.0; n + 2];
            d[1] += b[0];
            d[2] += b[1] / 4.0;
            for k in 2..=n {
                d[k + 1] += b[k] / (2.0 * (k + 1) as f64);
                d[k - 1] -= b[k] / (2.0 * (k - 1) as f64);
            }
            let at_minus_one: f64 = d
                .iter()
                .enumerate()
                .map(|(k, dk)| if k % 2 == 0 { *dk } else { -*dk })
                .sum();
            for j in 0..=n {
                let value: f64 = d
                    .iter()
                    .enumerate()
                    .map(|(k, dk)| dk * (k as f64 * theta[j]).cos())
                    .sum();
                cumulative[j][i] = value - at_minus_one;
            }
        }
        ChebyshevRule { nodes, cumulative }
    }

    /// Nodes mapped onto `[lo, hi]`.
    pub fn nodes_on(&self, lo: f64, hi: f64) -> [f64; NODES] {
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        let mut out = [0.0; NODES];
        for (o, t) in out.iter_mut().zip(self.nodes.iter()) {
            *o = c + h * t;
        }
        out[0] = lo;
        out[DEGREE] = hi;
        out
    }

    /// Running integrals from `lo` to every node, for an interval of half-width `half`.
    pub fn cumulative(&self, values: &[f64; NODES], half: f64) -> [f64; NODES] {
        let mut out = [0.0; NODES];
        for (o, row) in out.iter_mut().zip(self.cumulative.iter()).skip(1) {
            *o = half * dot(row, values);
        }
        out
    }

    /// Integral over the whole interval.
    pub fn total(&self, values: &[f64; NODES], half: f64) -> f64 {
        half * dot(&self.cumulative[DEGREE], values)
    }
}

fn dot(a: &[f64; NODES], b: &[f64; NODES]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_antiderivative() {
        let rule = ChebyshevRule::get();
        let (lo, hi) = (0.3, 1.7);
        let x = rule.nodes_on(lo, hi);
        let v = x.map(f64::exp);
        let cum = rule.cumulative(&v, 0.5 * (hi - lo));
        for (xi, ci) in x.iter().zip(cum.iter()) {
            let exact = xi.exp() - lo.exp();
            assert!((ci - exact).abs() < 1e-14 * exact.abs().max(1.0), "{xi}: {ci} vs {exact}");
        }
        assert!((rule.total(&v, 0.5 * (hi - lo)) - (hi.exp() - lo.exp())).abs() < 1e-14);
    }

    #[test]
    fn polynomials_are_exact() {
        let rule = ChebyshevRule::get();
        let x = rule.nodes_on(-1.0, 1.0);
        let v = x.map(|t| t.powi(7) - 3.0 * t * t + 1.0);
        let cum = rule.cumulative(&v, 1.0);
        for (t, c) in x.iter().zip(cum.iter()) {
            let anti = |s: f64| s.powi(8) / 8.0 - s.powi(3) + s;
            assert!((c - (anti(*t) - anti(-1.0))).abs() < 1e-13);
        }
    }
}
