//! Scale/speed measures and the time and reward potentials.
//!
//! All quantities are carried along a knot set laid out on a coordinate that
//! stretches both boundaries to infinity. On each knot interval the triangular
//! system
//!
//! ```text
//! (ln s)' = -2 mu / sigma^2,  M' = m,  C' = c m,  S' = s,  xi' = s M,  g' = s C
//! ```
//!
//! is integrated with a Chebyshev-Lobatto rule; intervals are bisected until
//! the rule agrees with its two halves. Values between knots come from the
//! same rule applied to the exact integrands on the residual interval.

use std::sync::RwLock;

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::model::{BoundaryKind, DiffusionModel, MarketModel};
use crate::numerics::chebyshev::{ChebyshevRule, NODES};
use crate::numerics::{find_root, integrate, maximize_unimodal, Bracket, QuadratureSpec};

const BASE_STEP: f64 = 0.25;
const MAX_LOG_SCALE: f64 = 650.0;
const LEFT_DEPTH: f64 = 1e-30;
const SPLIT_TOL: f64 = 1e-12;
const MAX_SPLIT_DEPTH: u32 = 12;

/// Values of every potential at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potentials {
    pub x: f64,
    /// s(x)
    pub scale: f64,
    /// m(x)
    pub speed: f64,
    /// M[a, x]
    pub speed_measure: f64,
    /// integral of c dM over (a, x]
    pub reward_measure: f64,
    /// integral of s from x0 to x
    pub scale_measure: f64,
    pub xi: f64,
    pub xi_prime: f64,
    pub g: f64,
    pub g_prime: f64,
}

/// Outcome of a monotone-growth test along a sequence approaching a boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Growth {
    Diverges,
    Converges,
    Indeterminate,
}

/// Growth factor over the sequence needed to certify divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// Classifies a positive sequence sampled geometrically towards a boundary.
pub fn classify_growth(samples: &[f64]) -> Growth {
    if samples.len() < 2 || samples.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Growth::Indeterminate;
    }
    // growth is judged from the smallest sample onwards
    let start = (0..samples.len())
        .min_by(|&i, &j| samples[i].total_cmp(&samples[j]))
        .expect("non-empty samples");
    let tail = &samples[start..];
    let monotone = tail.len() >= 3 && tail.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    let first = tail[0];
    let last = samples[samples.len() - 1];
    let prev = samples[samples.len() - 2];
    if (last - prev).abs() <= 1e-12 * last {
        return Growth::Converges;
    }
    if monotone && last / first >= DIVERGENCE_FACTOR {
        return Growth::Diverges;
    }
    Growth::Indeterminate
}

#[derive(Debug, Clone, Copy)]
enum Coordinate {
    /// t = ln((x - a) / (b - x))
    Bounded { a: f64, b: f64 },
    /// t = ln((x - a) / scale)
    HalfLine { a: f64, scale: f64 },
}

impl Coordinate {
    fn to_t(&self, x: f64) -> f64 {
        match *self {
            Coordinate::Bounded { a, b } => ((x - a) / (b - x)).ln(),
            Coordinate::HalfLine { a, scale } => ((x - a) / scale).ln(),
        }
    }

    fn to_x(&self, t: f64) -> f64 {
        match *self {
            Coordinate::Bounded { a, b } => {
                if t < 0.0 {
                    let e = t.exp();
                    a + (b - a) * e / (1.0 + e)
                } else {
                    b - (b - a) / (1.0 + t.exp())
                }
            }
            Coordinate::HalfLine { a, scale } => a + scale * t.exp(),
        }
    }
}

/// Increments over one interval, relative to ln s = 0 at its left end.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    dls: f64,
    ds: f64,
    dm: f64,
    dc: f64,
    dxi: f64,
    dg: f64,
    mag_ls: f64,
    mag_c: f64,
}

impl Kernel {
    fn is_finite(&self) -> bool {
        [self.dls, self.ds, self.dm, self.dc, self.dxi, self.dg]
            .iter()
            .all(|v| v.is_finite())
    }

    /// `self` on [l, m] followed by `next` on [m, r].
    fn then(&self, next: &Kernel) -> Kernel {
        let e = self.dls.exp();
        Kernel {
            dls: self.dls + next.dls,
            ds: self.ds + e * next.ds,
            dm: self.dm + next.dm / e,
            dc: self.dc + next.dc / e,
            dxi: self.dxi + e * self.dm * next.ds + next.dxi,
            dg: self.dg + e * self.dc * next.ds + next.dg,
            mag_ls: self.mag_ls + next.mag_ls,
            mag_c: self.mag_c + next.mag_c / e,
        }
    }

    /// Agreement up to `tol`, relative to each component's magnitude.
    fn agrees(&self, other: &Kernel, tol: f64) -> bool {
        let close = |a: f64, b: f64, mag: f64| (a - b).abs() <= tol * mag.max(a.abs()).max(b.abs());
        close(self.dls, other.dls, self.mag_ls.max(1.0))
            && close(self.ds, other.ds, 0.0)
            && close(self.dm, other.dm, 0.0)
            && close(self.dc, other.dc, self.mag_c)
            && close(self.dxi, other.dxi, 0.0)
            && close(self.dg, other.dg, self.mag_c * self.ds)
    }
}

/// Deep splits only happen where rounding dominates, so the requirement loosens with depth.
fn split_tol(depth: u32) -> f64 {
    SPLIT_TOL * 10f64.powi(depth.saturating_sub(8) as i32)
}

#[derive(Debug, Clone, Copy)]
struct State {
    x: f64,
    ls: f64,
    s_int: f64,
    m_int: f64,
    c_int: f64,
    xi: f64,
    g: f64,
}

impl State {
    fn advance(&self, k: &Kernel, x: f64) -> State {
        let e = self.ls.exp();
        State {
            x,
            ls: self.ls + k.dls,
            s_int: self.s_int + e * k.ds,
            m_int: self.m_int + k.dm / e,
            c_int: self.c_int + k.dc / e,
            xi: self.xi + self.m_int * e * k.ds + k.dxi,
            g: self.g + self.c_int * e * k.ds + k.dg,
        }
    }

    fn is_finite(&self) -> bool {
        [self.ls, self.s_int, self.m_int, self.c_int, self.xi, self.g]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug)]
struct Knots {
    states: Vec<State>,
    /// Next base coordinate to extend to on the right.
    next_t: f64,
    /// No further extension is possible.
    closed: bool,
}

#[derive(Debug, Clone)]
pub struct EngineOptions {
    pub quadrature: QuadratureSpec,
    pub root_tol: f64,
    /// Used when the test on M[a, b] cannot decide between finite and infinite.
    pub cbar_override: Option<f64>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { quadrature: QuadratureSpec::default(), root_tol: 1e-9, cbar_override: None }
    }
}

/// Cached evaluators for the potentials of a diffusion/market pair, plus z0 and the
/// do-nothing value.
#[derive(Debug)]
pub struct PotentialEngine {
    model: DiffusionModel,
    market: MarketModel,
    options: EngineOptions,
    coord: Coordinate,
    knots: RwLock<Knots>,
    left_limit: Option<Potentials>,
    window: (f64, f64),
    z0: f64,
    z0_point: f64,
    cbar: f64,
    speed_total: Option<f64>,
}

impl PotentialEngine {
    pub fn build(model: &DiffusionModel, market: &MarketModel, options: &EngineOptions) -> Result<PotentialEngine> {
        let (a, b, x0) = (model.a(), model.b(), model.x0());
        let coord = if b.is_finite() {
            Coordinate::Bounded { a, b }
        } else {
            Coordinate::HalfLine { a, scale: x0 - a }
        };
        let mut engine = PotentialEngine {
            model: model.clone(),
            market: market.clone(),
            options: options.clone(),
            coord,
            knots: RwLock::new(Knots { states: Vec::new(), next_t: 0.0, closed: false }),
            left_limit: None,
            window: (0.0, 0.0),
            z0: f64::NAN,
            z0_point: f64::NAN,
            cbar: f64::NAN,
            speed_total: None,
        };
        engine.build_left()?;
        engine.build_window()?;
        engine.build_z0()?;
        engine.build_cbar()?;
        debug!(
            "{}: z0 = {} at {}, cbar = {}, window = {:?}",
            model.name(),
            engine.z0,
            engine.z0_point,
            engine.cbar,
            engine.window
        );
        Ok(engine)
    }

    fn kernel(&self, lo: f64, hi: f64) -> Kernel {
        let rule = ChebyshevRule::get();
        let xs = rule.nodes_on(lo, hi);
        let half = 0.5 * (hi - lo);
        let mut f = [0.0; NODES];
        let mut sig2 = [0.0; NODES];
        let mut c = [0.0; NODES];
        for i in 0..NODES {
            let v = self.model.volatility(xs[i]);
            sig2[i] = v * v;
            f[i] = -2.0 * self.model.drift(xs[i]) / sig2[i];
            c[i] = self.market.reward(xs[i]);
        }
        let ls = rule.cumulative(&f, half);
        let s = ls.map(f64::exp);
        let mut m = [0.0; NODES];
        let mut cm = [0.0; NODES];
        for i in 0..NODES {
            m[i] = 2.0 / (sig2[i] * s[i]);
            cm[i] = c[i] * m[i];
        }
        let mm = rule.cumulative(&m, half);
        let cc = rule.cumulative(&cm, half);
        let mut s_mm = [0.0; NODES];
        let mut s_cc = [0.0; NODES];
        for i in 0..NODES {
            s_mm[i] = s[i] * mm[i];
            s_cc[i] = s[i] * cc[i];
        }
        Kernel {
            dls: ls[NODES - 1],
            ds: rule.total(&s, half),
            dm: mm[NODES - 1],
            dc: cc[NODES - 1],
            dxi: rule.total(&s_mm, half),
            dg: rule.total(&s_cc, half),
            mag_ls: rule.total(&f.map(f64::abs), half),
            mag_c: rule.total(&cm.map(f64::abs), half),
        }
    }

    /// Relative rounding error of coefficients that depend on the distance to a boundary.
    fn rounding_floor(&self, lo: f64, hi: f64) -> f64 {
        let (a, b) = (self.model.a(), self.model.b());
        let mut floor = 64.0 * f64::EPSILON * (a.abs() + hi.abs()) / (lo - a);
        if b.is_finite() {
            floor = floor.max(64.0 * f64::EPSILON * b.abs() / (b - hi));
        }
        floor
    }

    /// Bisects [lo, hi] until the rule is resolved; pushes sub-intervals in ascending order.
    fn resolve(&self, lo: f64, hi: f64, depth: u32, out: &mut Vec<(f64, f64, Kernel)>) {
        let whole = self.kernel(lo, hi);
        let mid = 0.5 * (lo + hi);
        if depth >= MAX_SPLIT_DEPTH || mid <= lo || mid >= hi {
            if depth >= MAX_SPLIT_DEPTH {
                warn!("knot interval [{lo}, {hi}] not resolved at maximum depth");
            }
            out.push((lo, hi, whole));
            return;
        }
        let left = self.kernel(lo, mid);
        let right = self.kernel(mid, hi);
        if whole.is_finite() && left.is_finite() && right.is_finite() && whole.agrees(&left.then(&right), split_tol(depth).max(self.rounding_floor(lo, hi))) {
            out.push((lo, hi, whole));
        } else {
            self.resolve(lo, mid, depth + 1, out);
            self.resolve(mid, hi, depth + 1, out);
        }
    }

    /// Knots from x0 down to the left-most resolved point, the tail measure
    /// below it, and the forward march back up.
    fn build_left(&mut self) -> Result<()> {
        let (a, x0) = (self.model.a(), self.model.x0());
        let t0 = self.coord.to_t(x0);
        let depth = LEFT_DEPTH * (x0 - a);
        // (lo, hi, kernel, ln s at lo), collected from x0 downwards
        let mut pieces: Vec<(f64, f64, Kernel, f64)> = Vec::new();
        let mut ls_hi = 0.0;
        let mut hi = x0;
        let mut k = 1;
        'outer: loop {
            let lo = self.coord.to_x(t0 - k as f64 * BASE_STEP);
            if !(lo > a) || lo >= hi {
                break;
            }
            let mut subs = Vec::new();
            self.resolve(lo, hi, 0, &mut subs);
            for (l, h, ker) in subs.into_iter().rev() {
                let ls_lo = ls_hi - ker.dls;
                if !ker.is_finite() || !ls_lo.is_finite() || ls_lo.abs() > MAX_LOG_SCALE {
                    break 'outer;
                }
                pieces.push((l, h, ker, ls_lo));
                ls_hi = ls_lo;
            }
            hi = lo;
            if lo - a < depth {
                break;
            }
            k += 1;
        }
        pieces.reverse();
        let (x_far, ls_far) = match pieces.first() {
            Some(p) => (p.0, p.3),
            None => return Err(Error::Evaluation { x: x0, what: "cannot integrate left of x0".into() }),
        };

        let m_far = self.tail_measure(x_far, ls_far, false)?;
        let c_far = self.tail_measure(x_far, ls_far, true)?;

        // forward march with absolute M and C; S, xi, g fixed up afterwards
        let mut states = Vec::with_capacity(pieces.len() + 1);
        let mut incs = Vec::with_capacity(pieces.len());
        let mut cur = State { x: x_far, ls: ls_far, s_int: 0.0, m_int: m_far, c_int: c_far, xi: 0.0, g: 0.0 };
        states.push(cur);
        for (_, h, ker, _) in &pieces {
            let next = cur.advance(ker, *h);
            incs.push((next.s_int - cur.s_int, next.xi - cur.xi, next.g - cur.g));
            cur = State { s_int: 0.0, xi: 0.0, g: 0.0, ..next };
            states.push(cur);
        }
        if !states.iter().all(State::is_finite) {
            return Err(Error::Evaluation { x: x0, what: "speed measure is not finite near the left boundary".into() });
        }
        // suffix sums so that S, xi, g vanish at x0
        let n = states.len();
        let (mut s_acc, mut xi_acc, mut g_acc) = (0.0, 0.0, 0.0);
        states[n - 1].ls = 0.0;
        for i in (0..n - 1).rev() {
            s_acc -= incs[i].0;
            xi_acc -= incs[i].1;
            g_acc -= incs[i].2;
            states[i].s_int = s_acc;
            states[i].xi = xi_acc;
            states[i].g = g_acc;
        }

        if self.model.left_boundary() == BoundaryKind::Entrance {
            let first = states[0];
            self.left_limit = Some(Potentials {
                x: a,
                scale: f64::INFINITY,
                speed: f64::INFINITY,
                speed_measure: 0.0,
                reward_measure: 0.0,
                scale_measure: f64::NEG_INFINITY,
                xi: first.xi,
                xi_prime: f64::NAN,
                g: first.g,
                g_prime: f64::NAN,
            });
        }

        let knots = self.knots.get_mut().expect("fresh lock");
        knots.states = states;
        knots.next_t = t0 + BASE_STEP;
        Ok(())
    }

    /// M[a, x] (or the reward measure) by quadrature in tau = ln((x - a)/(u - a)).
    fn tail_measure(&self, x: f64, ls_x: f64, weighted: bool) -> Result<f64> {
        let a = self.model.a();
        let d = x - a;
        let spec = QuadratureSpec { max_subdivisions: 400, ..self.options.quadrature };
        let ratio = |tau: f64| {
            let u = a + d * (-tau).exp();
            let v = self.model.volatility(u);
            2.0 * self.model.drift(u) * ((u - a) / v) / v
        };
        let tau_max = (d / (f64::MIN_POSITIVE * 1e10)).ln().min(700.0);
        let integrand = |tau: f64| {
            let u = a + d * (-tau).exp();
            if !(u > a) {
                return 0.0;
            }
            let inner = match integrate(ratio, 0.0, tau, &self.options.quadrature) {
                Ok(r) => r.value,
                Err(_) => return f64::NAN,
            };
            let ls = ls_x + inner;
            let v = self.model.volatility(u);
            // m(u) (u - a) in logs: sigma(u) may underflow when squared
            let log_dens = std::f64::consts::LN_2 - 2.0 * v.abs().ln() - ls + (u - a).ln();
            let w = if weighted { self.market.reward(u) } else { 1.0 };
            w * log_dens.exp()
        };
        let r = integrate(integrand, 0.0, tau_max, &spec)
            .map_err(|e| Error::Evaluation { x, what: format!("speed measure near the left boundary: {e}") })?;
        Ok(r.value)
    }

    /// Extends knots to the right until `x` is covered or extension is impossible.
    fn extend_to(&self, x: f64) {
        let mut knots = self.knots.write().expect("knot lock poisoned");
        while !knots.closed && knots.states.last().map_or(true, |s| s.x < x) {
            let last = *knots.states.last().expect("left build populated knots");
            let t = knots.next_t;
            let hi = self.coord.to_x(t);
            if !(hi > last.x) || !(hi < self.model.b()) {
                knots.closed = true;
                break;
            }
            let mut subs = Vec::new();
            self.resolve(last.x, hi, 0, &mut subs);
            let mut cur = last;
            for (_, h, ker) in subs {
                let next = cur.advance(&ker, h);
                if !ker.is_finite() || !next.is_finite() || next.ls.abs() > MAX_LOG_SCALE {
                    knots.closed = true;
                    break;
                }
                knots.states.push(next);
                cur = next;
            }
            knots.next_t = t + BASE_STEP;
        }
    }

    fn state_at(&self, x: f64) -> Result<State> {
        if !self.model.contains(x) {
            return Err(Error::Evaluation { x, what: "outside the state interval".into() });
        }
        {
            let knots = self.knots.read().expect("knot lock poisoned");
            if let Some(st) = self.state_from(&knots.states, x)? {
                return Ok(st);
            }
        }
        self.extend_to(x);
        let knots = self.knots.read().expect("knot lock poisoned");
        self.state_from(&knots.states, x)?
            .ok_or_else(|| Error::Evaluation { x, what: "beyond the floating-point range of the potentials".into() })
    }

    fn state_from(&self, states: &[State], x: f64) -> Result<Option<State>> {
        let first = states[0];
        if x < first.x {
            return Err(Error::Evaluation { x, what: "closer to the left boundary than the resolved range".into() });
        }
        let last = states[states.len() - 1];
        if x > last.x {
            return Ok(None);
        }
        let j = states.partition_point(|s| s.x <= x) - 1;
        let base = states[j];
        if base.x == x {
            return Ok(Some(base));
        }
        let st = base.advance(&self.kernel(base.x, x), x);
        if st.is_finite() {
            Ok(Some(st))
        } else {
            Err(Error::Evaluation { x, what: "non-finite potential".into() })
        }
    }

    /// All potentials at `x`. At an entrance boundary `x = a` gives the limits.
    pub fn at(&self, x: f64) -> Result<Potentials> {
        if x == self.model.a() {
            if let Some(p) = self.left_limit {
                return Ok(p);
            }
        }
        let st = self.state_at(x)?;
        let scale = st.ls.exp();
        let v = self.model.volatility(x);
        Ok(Potentials {
            x,
            scale,
            speed: 2.0 / (v * v * scale),
            speed_measure: st.m_int,
            reward_measure: st.c_int,
            scale_measure: st.s_int,
            xi: st.xi,
            xi_prime: scale * st.m_int,
            g: st.g,
            g_prime: scale * st.c_int,
        })
    }

    pub fn xi(&self, x: f64) -> Result<f64> {
        Ok(self.at(x)?.xi)
    }

    pub fn xi_prime(&self, x: f64) -> Result<f64> {
        Ok(self.at(x)?.xi_prime)
    }

    pub fn g(&self, x: f64) -> Result<f64> {
        Ok(self.at(x)?.g)
    }

    pub fn g_prime(&self, x: f64) -> Result<f64> {
        Ok(self.at(x)?.g_prime)
    }

    /// r_p(x) = c(x) + p mu(x).
    pub fn reward_rate(&self, x: f64, p: f64) -> f64 {
        self.market.reward(x) + p * self.model.drift(x)
    }

    /// h_p(x) = (g'(x) + p) / xi'(x), evaluated as (C[a,x] + p/s(x)) / M[a,x].
    pub fn h(&self, x: f64, p: f64) -> Result<f64> {
        if x == self.model.a() && self.left_limit.is_some() {
            return self.h_left_limit(p);
        }
        let st = self.state_at(x)?;
        let v = (st.c_int + p * (-st.ls).exp()) / st.m_int;
        if st.m_int > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation { x, what: "xi' underflow in h_p".into() })
        }
    }

    /// lim h_p(x) as x -> a, by Richardson extrapolation along x_j = a + d 2^-j.
    pub fn h_left_limit(&self, p: f64) -> Result<f64> {
        let a = self.model.a();
        let d = (self.model.x0() - a) * 2f64.powi(-6);
        const LEVELS: usize = 8;
        let mut table = [[0.0; LEVELS]; LEVELS];
        for j in 0..LEVELS {
            let x = a + d * 2f64.powi(-(j as i32));
            let st = self.state_at(x)?;
            table[j][0] = (st.c_int + p * (-st.ls).exp()) / st.m_int;
            for k in 1..=j {
                let f = 2f64.powi(k as i32);
                table[j][k] = (f * table[j][k - 1] - table[j - 1][k - 1]) / (f - 1.0);
            }
        }
        let v = table[LEVELS - 1][LEVELS - 1];
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation { x: a, what: "h_p limit at the left boundary".into() })
        }
    }

    /// 1 / xi'(x).
    pub fn ell(&self, x: f64) -> Result<f64> {
        Ok(1.0 / self.xi_prime(x)?)
    }

    pub fn model(&self) -> &DiffusionModel {
        &self.model
    }

    pub fn market(&self) -> &MarketModel {
        &self.market
    }

    pub fn options(&self) -> &EngineOptions {
        &self.options
    }

    /// sup of the supply rate over all threshold policies.
    pub fn z0(&self) -> f64 {
        self.z0
    }

    /// Where 1/xi' attains z0.
    pub fn z0_point(&self) -> f64 {
        self.z0_point
    }

    /// Long-run value of never intervening.
    pub fn cbar_b(&self) -> f64 {
        self.cbar
    }

    /// M[a, b], or `None` when it diverges.
    pub fn speed_total(&self) -> Option<f64> {
        self.speed_total
    }

    pub fn to_x(&self, t: f64) -> f64 {
        self.coord.to_x(t)
    }

    pub fn to_t(&self, x: f64) -> f64 {
        self.coord.to_t(x)
    }

    /// Search window in the stretched coordinate.
    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// Left-most point with resolved potentials.
    pub fn resolved_left(&self) -> f64 {
        self.knots.read().expect("knot lock poisoned").states[0].x
    }

    /// Grid of knot abscissae currently cached.
    pub fn knot_points(&self) -> Vec<f64> {
        self.knots.read().expect("knot lock poisoned").states.iter().map(|s| s.x).collect()
    }

    fn build_window(&mut self) -> Result<()> {
        let (a, b, x0) = (self.model.a(), self.model.b(), self.model.x0());
        let left = a + 1e-8 * (x0 - a);
        let right_target = if b.is_finite() { b - 1e-8 * (b - x0) } else { a + 1e3 * (x0 - a) };
        self.extend_to(right_target);
        let last = self.knots.read().expect("knot lock poisoned").states.last().map(|s| s.x).unwrap_or(x0);
        let right = right_target.min(last);
        if !(right > x0) {
            return Err(Error::Evaluation { x: x0, what: "cannot integrate right of x0".into() });
        }
        let inset = 1e-9;
        self.window = (self.coord.to_t(left.max(self.resolved_left())) + inset, self.coord.to_t(right) - inset);
        Ok(())
    }

    /// Geometric sample points approaching b.
    pub fn right_sequence(&self) -> Vec<f64> {
        let (a, b, x0) = (self.model.a(), self.model.b(), self.model.x0());
        if b.is_finite() {
            (0..=12).map(|j| b - (b - x0) * 10f64.powi(-j)).collect()
        } else {
            (0..=12).map(|j| a + (x0 - a) * 2f64.powi(j)).collect()
        }
    }

    /// Geometric sample points approaching a.
    pub fn left_sequence(&self) -> Vec<f64> {
        let (a, x0) = (self.model.a(), self.model.x0());
        (1..=20).map(|j| a + (x0 - a) * 10f64.powi(-j)).collect()
    }

    /// Samples `f` at each point until a point cannot be evaluated.
    /// Returns the samples and whether sampling stopped early.
    pub fn sample<F: Fn(&Potentials) -> f64>(&self, points: &[f64], f: F) -> (Vec<f64>, bool) {
        let mut out = Vec::with_capacity(points.len());
        for &x in points {
            match self.at(x) {
                Ok(p) => out.push(f(&p)),
                Err(_) => return (out, true),
            }
        }
        (out, false)
    }

    fn build_z0(&mut self) -> Result<()> {
        let (t_lo, t_hi) = self.window;
        let n = 600;
        let ts: Vec<f64> = (0..=n).map(|i| t_lo + (t_hi - t_lo) * i as f64 / n as f64).collect();
        let vals: Vec<f64> = ts
            .iter()
            .map(|&t| self.ell(self.coord.to_x(t)).unwrap_or(f64::NEG_INFINITY))
            .collect();
        let best = (0..=n)
            .max_by(|&i, &j| vals[i].total_cmp(&vals[j]).then(j.cmp(&i)))
            .expect("non-empty grid");
        let peaks = (1..n).filter(|&i| vals[i] > vals[i - 1] && vals[i] >= vals[i + 1]).count();
        if peaks > 1 {
            warn!("1/xi' has {peaks} local maxima on the scan grid; using the largest");
        }
        let lo = ts[best.saturating_sub(1)];
        let hi = ts[(best + 1).min(n)];
        let (t_star, _) = maximize_unimodal(
            |t| self.ell(self.coord.to_x(t)).unwrap_or(f64::NEG_INFINITY),
            lo,
            hi,
            1e-12,
        );
        let mut x_star = self.coord.to_x(t_star);
        // at an interior maximum of 1/xi' the drift equals 1/xi'
        let foc = |t: f64| {
            let x = self.coord.to_x(t);
            match self.xi_prime(x) {
                Ok(d) => self.model.drift(x) * d - 1.0,
                Err(_) => f64::NAN,
            }
        };
        if best > 0 && best < n {
            if let Ok(br) = Bracket::new(foc, lo, hi) {
                if let Ok(t) = find_root(foc, &br, 1e-14) {
                    x_star = self.coord.to_x(t);
                }
            }
        }
        let z = self.ell(x_star)?;
        let mut z0 = z;
        let mut point = x_star;
        if let Some(left) = self.left_limit_ell() {
            if left > z0 {
                z0 = left;
                point = self.model.a();
            }
        }
        if !(z0 > 0.0 && z0.is_finite()) {
            return Err(Error::Evaluation { x: x_star, what: "supply-rate bound is not positive and finite".into() });
        }
        self.z0 = z0;
        self.z0_point = point;
        Ok(())
    }

    fn left_limit_ell(&self) -> Option<f64> {
        if self.left_limit.is_none() {
            return None;
        }
        let a = self.model.a();
        // 1/xi' -> mu(a) at an entrance boundary
        Some(self.model.drift(a))
    }

    fn build_cbar(&mut self) -> Result<()> {
        let points = self.right_sequence();
        let (m, _) = self.sample(&points, |p| p.speed_measure);
        let (c, _) = self.sample(&points[..m.len()], |p| p.reward_measure);
        let (b, x0) = (self.model.b(), self.model.x0());
        match classify_growth(&m) {
            Growth::Diverges => {
                self.speed_total = None;
                self.cbar = if b.is_finite() {
                    self.market.reward(b)
                } else {
                    self.market.reward(x0 + (x0 - self.model.a()) * 2f64.powi(40))
                };
            }
            Growth::Converges => {
                let mt = *m.last().expect("converged sequence is non-empty");
                self.speed_total = Some(mt);
                self.cbar = c[c.len() - 1] / mt;
            }
            Growth::Indeterminate => {
                self.speed_total = None;
                match self.options.cbar_override {
                    Some(v) => self.cbar = v,
                    None => {
                        return Err(Error::Precondition(format!(
                            "cannot decide whether M[a,b] is finite (samples {m:?}); supply cbar_override"
                        )))
                    }
                }
            }
        }
        if let Some(v) = self.options.cbar_override {
            self.cbar = v;
        }
        Ok(())
    }
}
