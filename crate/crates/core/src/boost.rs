//! Piecewise-linear boost converter under sliding-mode control.
//!
//! `x' = A+ x + b` above `z = 0` and `x' = A- x + b` below.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::cycles::{crossing_cycle, CycleOptions};
use crate::filippov::{FilippovSystem, Side, SmoothField};
use crate::integrator::{half_return, IntegratorOptions};

type V3 = Vector3<f64>;
type M3 = Matrix3<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoostParams {
    pub omega: f64,
    pub y_r: f64,
    pub b: f64,
    pub a: f64,
    pub k: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self { omega: 0.6, y_r: 1.33, b: 0.08, a: 1.3, k: 6.0 }
    }
}

impl BoostParams {
    pub fn with_ka(self, k: f64, a: f64) -> Self {
        Self { k, a, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.omega > 0.0 && self.omega <= 1.0 && self.y_r > 1.0 && self.b > 0.0 && self.a > 0.0 && self.k > 0.0;
        if !ok {
            return Err(Error::InvalidInput(format!("boost parameters out of range: {self:?}")));
        }
        Ok(())
    }

    pub fn a_minus(&self) -> M3 {
        let Self { omega, b, a, k, .. } = *self;
        M3::new(-b, 0.0, 0.0, 0.0, -a, 0.0, -k * b, omega - a, -omega)
    }

    pub fn a_plus(&self) -> M3 {
        let Self { omega, b, a, k, .. } = *self;
        M3::new(-b, -1.0, 0.0, 1.0, -a, 0.0, 1.0 - k * b, omega - a - k, -omega)
    }

    pub fn offset(&self) -> V3 {
        V3::new(1.0, 0.0, self.k - self.omega * self.y_r)
    }

    pub fn to_filippov(&self) -> FilippovSystem {
        FilippovSystem::new(
            SmoothField::affine(&self.a_plus(), &self.offset()),
            SmoothField::affine(&self.a_minus(), &self.offset()),
        )
    }

    /// `(x_bar_minus, x_bar_plus)`.
    pub fn equilibria(&self) -> Result<(V3, V3)> {
        let Self { b, a, y_r, .. } = *self;
        if b == 0.0 || (1.0 + a * b).abs() < 1e-14 {
            return Err(Error::Domain("singular boost parameters".into()));
        }
        let s = 1.0 / (1.0 + a * b);
        Ok((V3::new(1.0 / b, 0.0, -y_r), V3::new(a * s, s, s - y_r)))
    }

    /// `z'` of the lower field on `z = 0`; zero on its tangency line.
    pub fn lower_contact(&self, x: f64, y: f64) -> f64 {
        -self.k * self.b * x + (self.omega - self.a) * y + self.k - self.omega * self.y_r
    }

    /// `z'` of the upper field on `z = 0`.
    pub fn upper_contact(&self, x: f64, y: f64) -> f64 {
        (1.0 - self.k * self.b) * x + (self.omega - self.a - self.k) * y + self.k - self.omega * self.y_r
    }
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `exp(A t)` by scaling and squaring with the degree-13 Pade approximant.
pub fn matrix_exponential(a: &M3, t: f64) -> M3 {
    let a = a * t;
    let norm = (0..3).map(|c| a.column(c).abs().sum()).fold(0.0, f64::max);
    let theta = 5.371920351148152;
    let s = if norm > theta { (norm / theta).log2().ceil() as i32 } else { 0 };
    let a = a / 2f64.powi(s);
    let b = &PADE13;
    let id = M3::identity();
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let u = a * (a6 * (a6 * b[13] + a4 * b[11] + a2 * b[9]) + a6 * b[7] + a4 * b[5] + a2 * b[3] + id * b[1]);
    let v = a6 * (a6 * b[12] + a4 * b[10] + a2 * b[8]) + a6 * b[6] + a4 * b[4] + a2 * b[2] + id * b[0];
    let mut r = (v - u).lu().solve(&(v + u)).expect("Pade denominator is invertible for scaled input");
    for _ in 0..s {
        r = r * r;
    }
    r
}

/// `a_TS(k) = k (100/133 - 2k/25)`.
pub fn ts_curve(k: f64) -> Result<f64> {
    let (k1, k2) = k_window();
    if !(k > k1 && k < k2) || (k - 625.0 / 133.0).abs() < 1e-12 {
        return Err(Error::Domain(format!("k = {k} outside the T-singularity window ({k1}, {k2})")));
    }
    Ok(ts_formula(k))
}

pub fn ts_formula(k: f64) -> f64 {
    k * (100.0 / 133.0 - 2.0 * k / 25.0)
}

/// Ends of the window where the T-singularity curve is defined.
pub fn k_window() -> (f64, f64) {
    let r = (1.0 - 300713.0 / 781250.0f64).sqrt();
    let c = 625.0 / 133.0;
    (c * (1.0 - r), c * (1.0 + r))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ClosingMode {
    Clc,
    Polycycle,
}

/// Intersections `x0 = (x0, y0, 0)` and `x1 = (x1, y1, 0)` with arc durations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClosingState {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub tau_plus: f64,
    pub tau_minus: f64,
    pub a: f64,
}

impl ClosingState {
    pub fn p0(&self) -> V3 {
        V3::new(self.x0, self.y0, 0.0)
    }

    pub fn p1(&self) -> V3 {
        V3::new(self.x1, self.y1, 0.0)
    }

    fn to_vec(self, mode: ClosingMode) -> DVector<f64> {
        let mut v = vec![self.x0, self.y0, self.x1, self.y1, self.tau_plus, self.tau_minus];
        if mode == ClosingMode::Polycycle {
            v.push(self.a);
        }
        DVector::from_vec(v)
    }

    fn from_vec(v: &DVector<f64>, a: f64) -> Self {
        Self {
            x0: v[0],
            y0: v[1],
            x1: v[2],
            y1: v[3],
            tau_plus: v[4],
            tau_minus: v[5],
            a: if v.len() > 6 { v[6] } else { a },
        }
    }
}

/// Residuals of the closing equations; the state's `a` overrides `params.a`.
pub fn closing_residual(params: &BoostParams, s: &ClosingState, mode: ClosingMode) -> Result<DVector<f64>> {
    let p = BoostParams { a: s.a, ..*params };
    let (em, ep) = p.equilibria()?;
    let r1 = ep + matrix_exponential(&p.a_plus(), s.tau_plus) * (s.p0() - ep) - s.p1();
    let r2 = em + matrix_exponential(&p.a_minus(), s.tau_minus) * (s.p1() - em) - s.p0();
    let mut out = vec![r1[0], r1[1], r1[2], r2[0], r2[1], r2[2]];
    if mode == ClosingMode::Polycycle {
        out.push(p.lower_contact(s.x0, s.y0));
    }
    Ok(DVector::from_vec(out))
}

fn closing_jacobian(params: &BoostParams, s: &ClosingState, mode: ClosingMode) -> Result<DMatrix<f64>> {
    let p = BoostParams { a: s.a, ..*params };
    let (em, ep) = p.equilibria()?;
    let n = if mode == ClosingMode::Polycycle { 7 } else { 6 };
    let mut j = DMatrix::zeros(n, n);
    let (ap, am) = (p.a_plus(), p.a_minus());
    let (xp, xm) = (matrix_exponential(&ap, s.tau_plus), matrix_exponential(&am, s.tau_minus));
    for r in 0..3 {
        for c in 0..2 {
            j[(r, c)] = xp[(r, c)];
            j[(r + 3, c + 2)] = xm[(r, c)];
        }
        if r < 2 {
            j[(r, r + 2)] -= 1.0;
            j[(r + 3, r)] -= 1.0;
        }
    }
    let dtp = ap * xp * (s.p0() - ep);
    let dtm = am * xm * (s.p1() - em);
    for r in 0..3 {
        j[(r, 4)] = dtp[r];
        j[(r + 3, 5)] = dtm[r];
    }
    if mode == ClosingMode::Polycycle {
        j[(6, 0)] = -p.k * p.b;
        j[(6, 1)] = p.omega - p.a;
        let h = 1e-7 * (1.0 + s.a.abs());
        let up = closing_residual(params, &ClosingState { a: s.a + h, ..*s }, mode)?;
        let base = closing_residual(params, s, mode)?;
        j.set_column(6, &((up - base) / h));
    }
    Ok(j)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub tau_floor: f64,
    pub tau_cap: f64,
    pub margin: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 60, tau_floor: 1e-6, tau_cap: 100.0, margin: 1e-9 }
    }
}

/// Damped Newton solve of the closing equations followed by the region checks.
pub fn solve_closing(params: &BoostParams, mode: ClosingMode, seed: &ClosingState, opts: &SolveOptions) -> Result<ClosingState> {
    let s = newton_closing(params, mode, seed, opts)?;
    check_region(params, &s, mode, opts)?;
    Ok(s)
}

fn newton_closing(params: &BoostParams, mode: ClosingMode, seed: &ClosingState, opts: &SolveOptions) -> Result<ClosingState> {
    let a_fixed = seed.a;
    let mut v = seed.to_vec(mode);
    let state = |v: &DVector<f64>| ClosingState::from_vec(v, a_fixed);
    let mut r = closing_residual(params, &state(&v), mode)?;
    for _ in 0..opts.max_iter {
        if r.norm() < opts.tol {
            return Ok(state(&v));
        }
        let j = closing_jacobian(params, &state(&v), mode)?;
        let step = j.lu().solve(&(-&r)).ok_or(Error::Degenerate)?;
        let f0 = r.norm_squared();
        let mut lambda = 1.0;
        loop {
            let trial = &v + &step * lambda;
            let ok_tau = trial[4] > 0.0 && trial[5] > 0.0 && (mode == ClosingMode::Clc || trial[6] > 0.0);
            if ok_tau {
                let rt = closing_residual(params, &state(&trial), mode)?;
                if rt.norm_squared() <= (1.0 - 1e-4 * lambda) * f0 || rt.norm() < opts.tol {
                    v = trial;
                    r = rt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-10 {
                return Err(Error::NoConvergence(format!("closing equations stalled at |r| = {:.3e}", r.norm())));
            }
        }
    }
    if r.norm() < opts.tol {
        Ok(state(&v))
    } else {
        Err(Error::NoConvergence(format!("closing equations: |r| = {:.3e} after {} iterations", r.norm(), opts.max_iter)))
    }
}

fn check_region(params: &BoostParams, s: &ClosingState, mode: ClosingMode, opts: &SolveOptions) -> Result<()> {
    let p = BoostParams { a: s.a, ..*params };
    let fail = |what: &str| Err(Error::Domain(format!("closed orbit rejected: {what} ({s:?})")));
    for tau in [s.tau_plus, s.tau_minus] {
        if !(tau > opts.tau_floor && tau <= opts.tau_cap) {
            return fail("arc duration outside (floor, cap]");
        }
    }
    let m = opts.margin;
    if !(p.upper_contact(s.x1, s.y1) < -m && p.lower_contact(s.x1, s.y1) < -m) {
        return fail("x1 not in the downward crossing region");
    }
    match mode {
        ClosingMode::Clc => {
            if !(p.upper_contact(s.x0, s.y0) > m && p.lower_contact(s.x0, s.y0) > m) {
                return fail("x0 not in the upward crossing region");
            }
        }
        ClosingMode::Polycycle => {
            if !(p.upper_contact(s.x0, s.y0) > m) {
                return fail("x0 not on the crossing side of the lower tangency line");
            }
            // the lower arc must touch z = 0 from below
            let (em, _) = p.equilibria()?;
            let am = p.a_minus();
            let curvature = (am * (am * s.p0() + p.offset()))[2];
            if !(curvature < 0.0) {
                return fail("lower fold at x0 is not visible");
            }
            let _ = em;
        }
    }
    Ok(())
}

/// Double tangency where both contact lines meet (`x = k y`).
pub fn t_singularity(p: &BoostParams) -> Result<V3> {
    let den = p.k * p.k * p.b - (p.omega - p.a);
    if den.abs() < 1e-14 {
        return Err(Error::Degenerate);
    }
    let y = (p.k - p.omega * p.y_r) / den;
    Ok(V3::new(p.k * y, y, 0.0))
}

/// Crossing cycle located by multi-start shooting on the integrator return
/// map, with starting points on ellipses around the T-singularity.
pub fn shoot_clc(p: &BoostParams) -> Result<ClosingState> {
    let ts = t_singularity(p)?;
    let sys = p.to_filippov();
    let opts = CycleOptions::default();
    for r in [0.1, 0.3, 1.0, 2.0] {
        for i in 0..16 {
            let th = i as f64 * std::f64::consts::PI / 8.0;
            let seed = ts + V3::new(3.0 * r * th.cos(), r * th.sin(), 0.0);
            if !(p.upper_contact(seed.x, seed.y) > 0.0 && p.lower_contact(seed.x, seed.y) > 0.0) {
                continue;
            }
            if let Ok(c) = crossing_cycle(&sys, &seed, Side::Above, &opts) {
                return Ok(ClosingState {
                    x0: c.p0.x,
                    y0: c.p0.y,
                    x1: c.p1.x,
                    y1: c.p1.y,
                    tau_plus: c.t_first,
                    tau_minus: c.t_second,
                    a: p.a,
                });
            }
        }
    }
    Err(Error::NoConvergence(format!("no crossing cycle found at k = {}, a = {}", p.k, p.a)))
}

/// Crossing limit cycle at `(params.k, params.a)`.
pub fn find_clc(params: &BoostParams, opts: &SolveOptions) -> Result<ClosingState> {
    let seed = shoot_clc(params)?;
    solve_closing(params, ClosingMode::Clc, &seed, opts)
}

/// Re-integrates a closing state with the event integrator; returns the
/// largest mismatch at the two intersections and the two flight times.
pub fn resimulate(params: &BoostParams, s: &ClosingState, opts: &IntegratorOptions) -> Result<(f64, f64, f64)> {
    let sys = BoostParams { a: s.a, ..*params }.to_filippov();
    let up = half_return(&sys, &s.p0(), Side::Above, opts)?;
    let down = half_return(&sys, &up.point, Side::Below, opts)?;
    let mismatch = (up.point - s.p1()).amax().max((down.point - s.p0()).amax());
    Ok((mismatch, up.flight_time, down.flight_time))
}

/// Polycycle at `params.k`, reached from the cycle at `a = a_seed`.
pub fn find_polycycle(params: &BoostParams, a_seed: f64, opts: &SolveOptions) -> Result<ClosingState> {
    let clc = find_clc(&BoostParams { a: a_seed, ..*params }, opts)?;
    solve_closing(params, ClosingMode::Polycycle, &clc, opts)
}

/// Point of the polycycle branch with the T-singularity value for reference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchPoint {
    pub k: f64,
    pub state: ClosingState,
    pub a_ts: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuationOptions {
    pub solve: SolveOptions,
    pub anchor_k: f64,
    pub anchor_seed_a: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self { solve: SolveOptions::default(), anchor_k: 6.0, anchor_seed_a: 0.8, max_step: 0.05, min_step: 1e-4 }
    }
}

fn state_vec(s: &ClosingState) -> [f64; 7] {
    [s.x0, s.y0, s.x1, s.y1, s.tau_plus, s.tau_minus, s.a]
}

fn vec_state(v: &[f64; 7]) -> ClosingState {
    ClosingState { x0: v[0], y0: v[1], x1: v[2], y1: v[3], tau_plus: v[4], tau_minus: v[5], a: v[6] }
}

/// Continues the polycycle from `(k0, s0)` to each target in order with a
/// secant predictor; returns the states at the targets.
fn continue_to(
    base: &BoostParams,
    k0: f64,
    s0: ClosingState,
    targets: &[f64],
    opts: &ContinuationOptions,
) -> Result<Vec<BranchPoint>> {
    let mut out = Vec::with_capacity(targets.len());
    let (mut k, mut s) = (k0, s0);
    let mut prev: Option<(f64, ClosingState)> = None;
    let mut h = opts.max_step;
    for &target in targets {
        while (target - k).abs() > 1e-14 {
            let dir = (target - k).signum();
            let step = h.min((target - k).abs()) * dir;
            let kn = k + step;
            let mut pred = state_vec(&s);
            if let Some((kp, sp)) = prev {
                let r = step / (k - kp);
                let vp = state_vec(&sp);
                for i in 0..7 {
                    pred[i] += r * (pred[i] - vp[i]);
                }
            }
            let params = BoostParams { k: kn, ..*base };
            match solve_closing(&params, ClosingMode::Polycycle, &vec_state(&pred), &opts.solve) {
                Ok(sn) => {
                    prev = Some((k, s));
                    k = kn;
                    s = sn;
                    h = (h * 1.5).min(opts.max_step);
                }
                Err(_) => {
                    h *= 0.5;
                    if h < opts.min_step {
                        return Err(Error::ContinuationStalled { k, a: s.a });
                    }
                }
            }
        }
        out.push(BranchPoint { k, state: s, a_ts: ts_formula(k) });
    }
    Ok(out)
}

/// Polycycle branch `a_poly(k)` at `n` equally spaced values of `k`.
///
/// Continuation starts from the polycycle at `opts.anchor_k` and runs towards
/// both ends of the range.
pub fn trace_polycycle_curve(
    base: &BoostParams,
    k_min: f64,
    k_max: f64,
    n: usize,
    opts: &ContinuationOptions,
) -> Result<Vec<BranchPoint>> {
    let (k1, k2) = k_window();
    if !(k_min > k1 && k_max < k2 && k_min < k_max) || n < 2 {
        return Err(Error::InvalidInput(format!("k range must satisfy {k1} < k_min < k_max < {k2} with n >= 2")));
    }
    let grid: Vec<f64> = (0..n).map(|i| k_min + (k_max - k_min) * i as f64 / (n - 1) as f64).collect();
    let k0 = opts.anchor_k;
    let s0 = find_polycycle(&BoostParams { k: k0, ..*base }, opts.anchor_seed_a, &opts.solve)?;
    let mut up: Vec<f64> = grid.iter().copied().filter(|&k| k >= k0).collect();
    let mut down: Vec<f64> = grid.iter().copied().filter(|&k| k < k0).rev().collect();
    if up.is_empty() {
        up.push(k_max);
    }
    if down.is_empty() {
        down.push(k_min);
    }
    let mut lower = continue_to(base, k0, s0, &down, opts)?;
    let upper = continue_to(base, k0, s0, &up, opts)?;
    lower.reverse();
    lower.extend(upper);
    lower.retain(|p| p.k >= k_min - 1e-12 && p.k <= k_max + 1e-12);
    Ok(lower)
}
