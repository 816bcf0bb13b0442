use std::cmp::Ordering;

use rayon::prelude::*;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal function on `[lo, hi]`.
///
/// The endpoints are compared against the interior result, so monotone
/// functions return the better endpoint.
pub fn maximize_unimodal<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let f_lo = eval(a);
    let f_hi = eval(b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    let tol = tol.max(4.0 * f64::EPSILON * (a.abs() + b.abs()));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d);
        }
    }
    let (mut x, mut v) = if fc >= fd { (c, fc) } else { (d, fd) };
    if f_lo > v {
        x = lo.min(hi);
        v = f_lo;
    }
    if f_hi > v {
        x = lo.max(hi);
        v = f_hi;
    }
    (x, v)
}

/// Axis-aligned search box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box2 {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Box2 {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Box2 {
        Box2 { lo, hi }
    }

    fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(self.lo[0], self.hi[0]), p[1].clamp(self.lo[1], self.hi[1])]
    }

    /// Centre of cell `(i, j)` on an `n x n` grid.
    pub fn cell_centre(&self, n: usize, i: usize, j: usize) -> [f64; 2] {
        let dx = (self.hi[0] - self.lo[0]) / n as f64;
        let dy = (self.hi[1] - self.lo[1]) / n as f64;
        [self.lo[0] + (i as f64 + 0.5) * dx, self.lo[1] + (j as f64 + 0.5) * dy]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Multistart {
    /// Grid points per axis for the coarse scan.
    pub grid: usize,
    /// Number of best grid cells refined by Nelder-Mead.
    pub starts: usize,
    pub tol: f64,
}

impl Default for Multistart {
    fn default() -> Self {
        Multistart { grid: 48, starts: 6, tol: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Max2d {
    pub arg: [f64; 2],
    pub value: f64,
    /// Best grid value before refinement.
    pub grid_value: f64,
    /// Starts whose refinement improved on their grid cell.
    pub improved_starts: usize,
    /// Set when no start improved on the grid optimum.
    pub warning: bool,
    /// Every refined start, best first.
    pub refined: Vec<([f64; 2], f64)>,
}

fn cmp_candidates(a: &([f64; 2], f64), b: &([f64; 2], f64)) -> Ordering {
    b.1.total_cmp(&a.1)
        .then(a.0[0].total_cmp(&b.0[0]))
        .then(a.0[1].total_cmp(&b.0[1]))
}

/// Grid scan followed by Nelder-Mead refinement from the best cells.
/// Output depends only on `f`, the box and the options.
pub fn maximize_2d<F>(f: F, bx: &Box2, opts: &Multistart) -> Max2d
where
    F: Fn([f64; 2]) -> f64 + Sync,
{
    let eval = |p: [f64; 2]| {
        let v = f(p);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let n = opts.grid.max(2);
    let cells: Vec<([f64; 2], f64)> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let p = bx.cell_centre(n, k / n, k % n);
            (p, eval(p))
        })
        .collect();
    let mut ranked = cells;
    ranked.sort_by(cmp_candidates);
    let grid_best = ranked[0];
    let starts: Vec<([f64; 2], f64)> = ranked.into_iter().take(opts.starts.max(1)).collect();

    let step = [
        0.5 * (bx.hi[0] - bx.lo[0]) / n as f64,
        0.5 * (bx.hi[1] - bx.lo[1]) / n as f64,
    ];
    let refined: Vec<(([f64; 2], f64), bool)> = starts
        .par_iter()
        .map(|&(p, v)| {
            let r = nelder_mead(&eval, bx, p, step, opts.tol);
            if r.1 > v {
                (r, true)
            } else {
                ((p, v), false)
            }
        })
        .collect();
    let improved_starts = refined.iter().filter(|r| r.1).count();
    let mut all: Vec<([f64; 2], f64)> = refined.into_iter().map(|r| r.0).collect();
    all.sort_by(cmp_candidates);
    let best = all[0];
    Max2d {
        arg: best.0,
        value: best.1,
        grid_value: grid_best.1,
        improved_starts,
        warning: !(best.1 > grid_best.1),
        refined: all,
    }
}

fn nelder_mead<F: Fn([f64; 2]) -> f64>(
    f: &F,
    bx: &Box2,
    start: [f64; 2],
    step: [f64; 2],
    tol: f64,
) -> ([f64; 2], f64) {
    let mut best = (start, f(start));
    // a restart from the current best guards against a collapsed simplex
    for _ in 0..3 {
        let r = nelder_mead_once(f, bx, best.0, step, tol);
        let converged = (r.0[0] - best.0[0]).abs() <= tol && (r.0[1] - best.0[1]).abs() <= tol;
        if r.1 >= best.1 {
            best = r;
        }
        if converged {
            break;
        }
    }
    best
}

fn nelder_mead_once<F: Fn([f64; 2]) -> f64>(
    f: &F,
    bx: &Box2,
    start: [f64; 2],
    step: [f64; 2],
    tol: f64,
) -> ([f64; 2], f64) {
    let mut simplex: Vec<([f64; 2], f64)> = Vec::with_capacity(3);
    let mut pts = [start, [start[0] + step[0], start[1]], [start[0], start[1] + step[1]]];
    for k in 1..3 {
        pts[k] = bx.clamp(pts[k]);
        if pts[k] == start {
            // clamped onto the start: step the other way instead
            let mut p = start;
            p[k - 1] -= step[k - 1];
            pts[k] = bx.clamp(p);
        }
    }
    for p in pts {
        simplex.push((p, f(p)));
    }
    let by_value = |a: &([f64; 2], f64), b: &([f64; 2], f64)| cmp_candidates(a, b);
    for _ in 0..4000 {
        simplex.sort_by(by_value);
        let (b, w) = (simplex[0], simplex[2]);
        let size = simplex[1..]
            .iter()
            .map(|v| (v.0[0] - b.0[0]).abs().max((v.0[1] - b.0[1]).abs()))
            .fold(0.0, f64::max);
        if size <= tol {
            break;
        }
        let centroid = [
            0.5 * (simplex[0].0[0] + simplex[1].0[0]),
            0.5 * (simplex[0].0[1] + simplex[1].0[1]),
        ];
        let along = |t: f64| {
            bx.clamp([
                centroid[0] + t * (w.0[0] - centroid[0]),
                centroid[1] + t * (w.0[1] - centroid[1]),
            ])
        };
        let xr = along(-1.0);
        let fr = f(xr);
        if fr > b.1 {
            let xe = along(-2.0);
            let fe = f(xe);
            simplex[2] = if fe > fr { (xe, fe) } else { (xr, fr) };
        } else if fr > simplex[1].1 {
            simplex[2] = (xr, fr);
        } else {
            let (xc, fc) = if fr > w.1 {
                let x = along(-0.5);
                (x, f(x))
            } else {
                let x = along(0.5);
                (x, f(x))
            };
            if (fr > w.1 && fc >= fr) || (fr <= w.1 && fc > w.1) {
                simplex[2] = (xc, fc);
            } else {
                for k in 1..3 {
                    let p = [
                        b.0[0] + 0.5 * (simplex[k].0[0] - b.0[0]),
                        b.0[1] + 0.5 * (simplex[k].0[1] - b.0[1]),
                    ];
                    simplex[k] = (p, f(p));
                }
            }
        }
    }
    simplex.sort_by(by_value);
    simplex[0]
}
