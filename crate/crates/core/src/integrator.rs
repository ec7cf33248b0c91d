//! Adaptive Dormand-Prince 5(4) integration with switching events.

use crate::error::{Error, Result};
use crate::filippov::{FilippovSystem, RegionTag, Side, V3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Event refinement stops when `|g|` is below `event_ftol` times the local slope (capped at 1) ...
    pub event_ftol: f64,
    /// ... or the bracket is shorter than `event_ttol`.
    pub event_ttol: f64,
    /// Roots within this (relative) time of the start are ignored.
    pub trivial_time: f64,
    /// Minimum depth of a dip toward the manifold reported as a crossing rather than a graze.
    pub graze_tol: f64,
    pub domain_bound: f64,
    pub max_steps: usize,
    /// Horizon for a single half-return.
    pub return_horizon: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            event_ftol: 1e-12,
            event_ttol: 1e-13,
            trivial_time: 1e-10,
            graze_tol: 1e-10,
            domain_bound: 1e3,
            max_steps: 2_000_000,
            return_horizon: 1e3,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum ArcKind {
    Smooth(Side),
    Sliding,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum EventKind {
    Initial,
    CrossIn,
    CrossOut,
    TangencyHit,
    SlidingEntry,
    SlidingExit,
    TimeLimit,
}

/// A piece of trajectory under one vector field.
#[derive(Clone, Debug)]
pub struct Arc {
    pub kind: ArcKind,
    /// `(t, p)` with `t` increasing; elapsed time for reversed arcs.
    pub samples: Vec<(f64, V3)>,
    pub entry: EventKind,
    pub exit: EventKind,
    pub time_reversed: bool,
}

impl Arc {
    pub fn start(&self) -> V3 {
        self.samples[0].1
    }

    pub fn end(&self) -> V3 {
        self.samples[self.samples.len() - 1].1
    }

    pub fn duration(&self) -> f64 {
        self.samples[self.samples.len() - 1].0 - self.samples[0].0
    }
}

#[derive(Clone, Debug)]
pub struct SwitchHit {
    pub arc: Arc,
    /// Point on the switching manifold, if one was reached.
    pub hit: Option<V3>,
    /// Signed flight time; negative for backward returns.
    pub flight_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfReturn {
    pub point: V3,
    pub flight_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Termination {
    TimeLimit,
    /// Reached an escaping point, where the forward orbit is not unique.
    NonDeterministicExit,
    /// Stopped after too many transitions.
    TransitionLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub point: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct HybridTrajectory {
    pub arcs: Vec<Arc>,
    pub events: Vec<Event>,
    pub termination: Termination,
}

impl HybridTrajectory {
    pub fn end(&self) -> V3 {
        self.arcs.last().map(Arc::end).unwrap_or_else(V3::zeros)
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

struct Step {
    y1: V3,
    k: [V3; 7],
    err: f64,
}

fn dopri_step<F: Fn(&V3) -> V3>(rhs: &F, y: &V3, k1: &V3, h: f64, opts: &IntegratorOptions) -> Step {
    let mut k = [V3::zeros(); 7];
    k[0] = *k1;
    for s in 1..7 {
        let mut acc = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            if A[s][j] != 0.0 {
                acc += kj * (h * A[s][j]);
            }
        }
        k[s] = rhs(&acc);
    }
    let mut y1 = *y;
    for j in 0..6 {
        y1 += k[j] * (h * A[6][j]);
    }
    let mut e = V3::zeros();
    for j in 0..7 {
        e += k[j] * (h * E[j]);
    }
    let mut sum = 0.0;
    for i in 0..3 {
        let sc = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
        sum += (e[i] / sc).powi(2);
    }
    Step { y1, k, err: (sum / 3.0).sqrt() }
}

/// Continuous extension of an accepted step.
struct Dense {
    r: [V3; 5],
}

impl Dense {
    fn new(y0: &V3, st: &Step, h: f64) -> Self {
        let dy = st.y1 - y0;
        let bspl = st.k[0] * h - dy;
        let mut r5 = V3::zeros();
        for j in 0..7 {
            r5 += st.k[j] * (h * D[j]);
        }
        Self { r: [*y0, dy, bspl, dy - st.k[6] * h - bspl, r5] }
    }

    fn at(&self, th: f64) -> V3 {
        let t1 = 1.0 - th;
        self.r[0] + (self.r[1] + (self.r[2] + (self.r[3] + self.r[4] * t1) * th) * t1) * th
    }
}

/// Scalar event; positive inside the admissible region.
pub(crate) struct EventFn<'a> {
    pub g: Box<dyn Fn(&V3) -> f64 + 'a>,
    /// Whether to look for tangential contacts with `g = 0`.
    pub detect_graze: bool,
}

pub(crate) struct Drive {
    pub samples: Vec<(f64, V3)>,
    /// Index of the triggered event and whether it was a graze.
    pub event: Option<(usize, bool)>,
}

/// Integrates `y' = rhs(y)` in direction `dir` up to `|t| = horizon` or the first event.
pub(crate) fn drive<F: Fn(&V3) -> V3>(
    rhs: &F,
    y0: &V3,
    dir: f64,
    horizon: f64,
    events: &[EventFn<'_>],
    opts: &IntegratorOptions,
) -> Result<Drive> {
    let mut samples = vec![(0.0, *y0)];
    let mut y = *y0;
    let mut t = 0.0;
    let mut k1 = rhs(&y);
    let mut h = (1e-2 / (1.0 + k1.norm())).min(horizon.max(1e-300));
    let t_excl = opts.trivial_time * (1.0 + horizon.min(1.0));
    let mut steps = 0usize;
    while t < horizon {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepSizeUnderflow(dir * t));
        }
        let last = t + h >= horizon;
        if last {
            h = horizon - t;
        }
        let st = dopri_step(rhs, &y, &k1, dir * h, opts);
        if !st.err.is_finite() || st.err > 1.0 {
            let fac = if st.err.is_finite() { (0.9 * st.err.powf(-0.2)).max(0.2) } else { 0.2 };
            h *= fac;
            if h < 1e-14 * (1.0 + t) {
                return Err(Error::StepSizeUnderflow(dir * t));
            }
            continue;
        }
        let t1 = t + h;
        if st.y1.norm() > opts.domain_bound || !st.y1.iter().all(|v| v.is_finite()) {
            if h > 1e-6 * (1.0 + t) {
                h *= 0.25;
                continue;
            }
            return Err(Error::BlowUp(dir * t1));
        }
        let dense = Dense::new(&y, &st, dir * h);
        if let Some((idx, graze, lo, th)) = scan_events(&y, &dense, h, t, t_excl, events, opts) {
            let (th, p) = if graze {
                (th, dense.at(th))
            } else {
                refine(rhs, &y, &k1, dir * h, lo, th, &events[idx], opts)
            };
            samples.push((t + th * h, p));
            return Ok(Drive { samples, event: Some((idx, graze)) });
        }
        y = st.y1;
        k1 = st.k[6];
        t = if last { horizon } else { t1 };
        samples.push((t, y));
        let fac = (0.9 * st.err.max(1e-30).powf(-0.2)).clamp(0.2, 10.0);
        h *= fac;
    }
    Ok(Drive { samples, event: None })
}

/// First event inside the step as `(index, is_graze, lower, upper)` fractions of the step.
fn scan_events(
    y0: &V3,
    dense: &Dense,
    habs: f64,
    t0: f64,
    t_excl: f64,
    events: &[EventFn<'_>],
    opts: &IntegratorOptions,
) -> Option<(usize, bool, f64, f64)> {
    const N: usize = 16;
    let mut best: Option<(usize, bool, f64, f64)> = None;
    for (idx, ev) in events.iter().enumerate() {
        let mut found = None;
        let mut prev = (0.0, (ev.g)(y0));
        let mut vals = Vec::with_capacity(N + 1);
        vals.push(prev);
        for i in 1..=N {
            let th = i as f64 / N as f64;
            let v = (ev.g)(&dense.at(th));
            vals.push((th, v));
            let trivial = t0 + th * habs < t_excl;
            if v <= 0.0 && !trivial && (prev.1 > 0.0 || t0 + prev.0 * habs < t_excl) {
                let mut lo = prev.0;
                if t0 + lo * habs < t_excl {
                    // move the lower end past the departure root
                    let mut s = th;
                    while t0 + 0.5 * s * habs >= t_excl {
                        s *= 0.5;
                        if (ev.g)(&dense.at(s)) > 0.0 {
                            lo = s;
                            break;
                        }
                    }
                }
                found = Some((false, lo, th));
                break;
            }
            prev = (th, v);
        }
        if found.is_none() && ev.detect_graze {
            found = graze_scan(&vals, dense, ev, t0, habs, t_excl, opts).map(|(g, th)| (g, 0.0, th));
        }
        if let Some((graze, lo, th)) = found {
            if best.map_or(true, |b| th < b.3) {
                best = Some((idx, graze, lo, th));
            }
        }
    }
    best
}

/// Looks for an interior minimum of `g` that touches or dips below zero.
fn graze_scan(
    vals: &[(f64, f64)],
    dense: &Dense,
    ev: &EventFn<'_>,
    t0: f64,
    habs: f64,
    t_excl: f64,
    opts: &IntegratorOptions,
) -> Option<(bool, f64)> {
    let (imin, _) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap_or(std::cmp::Ordering::Equal))?;
    if imin == vals.len() - 1 {
        return None;
    }
    let lo = if imin == 0 { 0.0 } else { vals[imin - 1].0 };
    let hi = vals[imin + 1].0;
    let g = |th: f64| (ev.g)(&dense.at(th));
    let (mut a, mut b) = (lo, hi);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..80 {
        if (b - a) * habs < 1e-13 {
            break;
        }
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    let th = 0.5 * (a + b);
    if t0 + th * habs < t_excl.max(1e-9 * (1.0 + t0)) || th <= 0.0 {
        return None;
    }
    let gm = g(th);
    let scale = 1.0 + dense.at(th).norm();
    if gm < -opts.graze_tol * scale {
        // genuine double crossing inside the step: the first root lies before the minimum
        Some((false, th))
    } else if gm <= opts.graze_tol * scale {
        Some((true, th))
    } else {
        None
    }
}

/// Illinois refinement on `[lo, hi]` using true sub-steps from the step start.
#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(&V3) -> V3>(
    rhs: &F,
    y0: &V3,
    k1: &V3,
    h: f64,
    lo: f64,
    hi: f64,
    ev: &EventFn<'_>,
    opts: &IntegratorOptions,
) -> (f64, V3) {
    let at = |th: f64| -> V3 {
        if th == 0.0 {
            *y0
        } else {
            dopri_step(rhs, y0, k1, th * h, opts).y1
        }
    };
    let (mut a, mut b) = (lo, hi);
    let mut ga = (ev.g)(&at(a));
    if ga <= 0.0 {
        a = 0.0;
        ga = (ev.g)(y0);
    }
    ga = ga.max(f64::MIN_POSITIVE);
    let mut pb = at(b);
    let mut gb = (ev.g)(&pb);
    while gb > 0.0 {
        if b >= 1.0 {
            return (b, pb);
        }
        a = b;
        ga = gb;
        b = (b + 1.0 / 16.0).min(1.0);
        pb = at(b);
        gb = (ev.g)(&pb);
    }
    let mut best = (b, pb, gb);
    let mut side = 0i8;
    let mut slow = 0;
    for _ in 0..80 {
        let slope = ((ga - gb) / ((b - a) * h.abs())).abs();
        if best.2.abs() < opts.event_ftol * slope.min(1.0) || (b - a) * h.abs() < opts.event_ttol {
            break;
        }
        let width = b - a;
        let mut m = (a * gb - b * ga) / (gb - ga);
        if slow >= 2 || !(m > a && m < b) {
            m = 0.5 * (a + b);
            slow = 0;
        }
        let pm = at(m);
        let gm = (ev.g)(&pm);
        if gm.abs() < best.2.abs() {
            best = (m, pm, gm);
        }
        if gm > 0.0 {
            a = m;
            ga = gm;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = m;
            gb = gm;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
        slow = if b - a > 0.5 * width { slow + 1 } else { 0 };
    }
    (best.0, best.1)
}

fn smooth_arc(
    sys: &FilippovSystem,
    p0: &V3,
    side: Side,
    dir: f64,
    horizon: f64,
    entry: EventKind,
    opts: &IntegratorOptions,
) -> Result<(Arc, Option<(V3, bool)>)> {
    let field = sys.field(side);
    let rhs = |p: &V3| field.eval(p);
    let s = side.sign();
    let ev = EventFn { g: Box::new(move |p: &V3| s * sys.f(p)), detect_graze: true };
    let d = drive(&rhs, p0, dir, horizon, std::slice::from_ref(&ev), opts)?;
    let mut samples = d.samples;
    let hit = d.event.map(|(_, graze)| {
        let last = samples.last_mut().expect("nonempty");
        if !graze {
            last.1 = sys.switching.project(&last.1);
        }
        (last.1, graze)
    });
    let exit = match hit {
        Some((_, true)) => EventKind::TangencyHit,
        Some((_, false)) => EventKind::CrossOut,
        None => EventKind::TimeLimit,
    };
    let arc = Arc { kind: ArcKind::Smooth(side), samples, entry, exit, time_reversed: dir < 0.0 };
    Ok((arc, hit))
}

/// Forward integration of the field of `side` until it meets the manifold.
pub fn integrate_to_switch(
    sys: &FilippovSystem,
    p0: &V3,
    side: Side,
    t_max: f64,
    opts: &IntegratorOptions,
) -> Result<SwitchHit> {
    let (arc, hit) = smooth_arc(sys, p0, side, 1.0, t_max, EventKind::Initial, opts)?;
    let flight_time = arc.duration();
    Ok(SwitchHit { hit: hit.map(|h| h.0), arc, flight_time })
}

/// Half-return map of the field of `side` from a point on the manifold.
///
/// Integrates forward when the field points into `side`, backward when it
/// points out of it. A point on an invisible fold is its own return.
pub fn half_return(sys: &FilippovSystem, p: &V3, side: Side, opts: &IntegratorOptions) -> Result<HalfReturn> {
    if !sys.on_sigma(p) {
        return Err(Error::NotOnSigma(sys.f(p)));
    }
    let s = side.sign();
    let dir = if sys.is_tangent(side, p) {
        let d2 = sys.lie_derivative(side, p, 2)?;
        if s * d2 < 0.0 {
            return Ok(HalfReturn { point: *p, flight_time: 0.0 });
        }
        1.0
    } else if s * sys.ff(side, p) > 0.0 {
        1.0
    } else {
        -1.0
    };
    let (arc, hit) = smooth_arc(sys, p, side, dir, opts.return_horizon, EventKind::Initial, opts)?;
    match hit {
        Some((q, false)) => Ok(HalfReturn { point: q, flight_time: dir * arc.duration() }),
        Some((_, true)) => Err(Error::GrazingUnresolved),
        None => Err(Error::NoReturn),
    }
}

/// Sliding (or, in reversed time, escaping) motion along the manifold.
pub fn slide(sys: &FilippovSystem, p: &V3, t_max: f64, opts: &IntegratorOptions) -> Result<Arc> {
    slide_from(sys, p, t_max, EventKind::Initial, opts).map(|(a, _)| a)
}

fn slide_from(
    sys: &FilippovSystem,
    p: &V3,
    t_max: f64,
    entry: EventKind,
    opts: &IntegratorOptions,
) -> Result<(Arc, Option<Side>)> {
    let region = sys.classify_region(p)?;
    let sgn = match region {
        RegionTag::Sliding => 1.0,
        RegionTag::Escaping => -1.0,
        _ => {
            let (xf, yf) = (sys.ff(Side::Above, p), sys.ff(Side::Below, p));
            if xf <= 0.0 && yf >= 0.0 && yf - xf > 0.0 {
                1.0
            } else if xf >= 0.0 && yf <= 0.0 && xf - yf > 0.0 {
                -1.0
            } else {
                return Err(Error::NotSlidingRegion);
            }
        }
    };
    let n = sys.switching.normal;
    let rhs = |q: &V3| {
        let (xv, yv) = (sys.x.eval(q), sys.y.eval(q));
        let (xf, yf) = (n.dot(&xv), n.dot(&yv));
        (xv * yf - yv * xf) / (yf - xf)
    };
    let events = [
        EventFn { g: Box::new(move |q: &V3| -sgn * sys.ff(Side::Above, q)), detect_graze: false },
        EventFn { g: Box::new(move |q: &V3| sgn * sys.ff(Side::Below, q)), detect_graze: false },
    ];
    let d = drive(&rhs, p, sgn, t_max, &events, opts)?;
    let mut samples = d.samples;
    for s in samples.iter_mut() {
        s.1 = sys.switching.project(&s.1);
    }
    let exit_side = d.event.map(|(i, _)| if i == 0 { Side::Above } else { Side::Below });
    let arc = Arc {
        kind: ArcKind::Sliding,
        samples,
        entry,
        exit: if exit_side.is_some() { EventKind::SlidingExit } else { EventKind::TimeLimit },
        time_reversed: sgn < 0.0,
    };
    Ok((arc, exit_side))
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Mode {
    Smooth(Side),
    Sliding,
}

fn shift(mut arc: Arc, t0: f64) -> Arc {
    for s in arc.samples.iter_mut() {
        s.0 += t0;
    }
    arc
}

/// Side entered from a manifold point reached from `from`.
fn mode_after_hit(sys: &FilippovSystem, q: &V3, from: Side) -> Option<Mode> {
    let (xf, yf) = (sys.ff(Side::Above, q), sys.ff(Side::Below, q));
    let region = sys.classify_region(q).ok()?;
    match region {
        RegionTag::Crossing => Some(Mode::Smooth(from.other())),
        RegionTag::Sliding => Some(Mode::Sliding),
        RegionTag::Escaping => None,
        _ => {
            // tangency of one field: decide by raw signs
            let other = match from.other() {
                Side::Above => xf,
                Side::Below => yf,
            };
            let toward_other = from.other().sign() * other > 0.0;
            if toward_other {
                Some(Mode::Smooth(from.other()))
            } else if xf <= 0.0 && yf >= 0.0 {
                Some(Mode::Sliding)
            } else {
                None
            }
        }
    }
}

/// Full hybrid simulation with crossing, sliding and grazing transitions.
pub fn simulate(sys: &FilippovSystem, p0: &V3, t_max: f64, opts: &IntegratorOptions) -> Result<HybridTrajectory> {
    const MAX_TRANSITIONS: usize = 100_000;
    let mut arcs = Vec::new();
    let mut events = vec![Event { t: 0.0, kind: EventKind::Initial, point: (*p0).into() }];
    let mut p = *p0;
    let mut t = 0.0;
    let mut entry = EventKind::Initial;
    let push_event = |events: &mut Vec<Event>, t: f64, kind: EventKind, q: &V3| {
        events.push(Event { t, kind, point: (*q).into() })
    };
    let mut mode = if !sys.on_sigma(&p) {
        Mode::Smooth(if sys.f(&p) > 0.0 { Side::Above } else { Side::Below })
    } else {
        match sys.classify_region(&p)? {
            RegionTag::Escaping => {
                return Ok(HybridTrajectory {
                    arcs: vec![Arc {
                        kind: ArcKind::Sliding,
                        samples: vec![(0.0, p)],
                        entry,
                        exit: EventKind::TimeLimit,
                        time_reversed: false,
                    }],
                    events,
                    termination: Termination::NonDeterministicExit,
                })
            }
            RegionTag::Sliding => Mode::Sliding,
            _ => {
                let (xf, yf) = (sys.ff(Side::Above, &p), sys.ff(Side::Below, &p));
                if xf > 0.0 {
                    Mode::Smooth(Side::Above)
                } else if yf < 0.0 {
                    Mode::Smooth(Side::Below)
                } else {
                    Mode::Sliding
                }
            }
        }
    };
    for _ in 0..MAX_TRANSITIONS {
        let remaining = t_max - t;
        if remaining <= 0.0 {
            return Ok(HybridTrajectory { arcs, events, termination: Termination::TimeLimit });
        }
        match mode {
            Mode::Smooth(side) => {
                let (arc, hit) = smooth_arc(sys, &p, side, 1.0, remaining, entry, opts)?;
                let arc = shift(arc, t);
                t = arc.samples.last().expect("nonempty").0;
                p = arc.end();
                arcs.push(arc);
                match hit {
                    None => {
                        push_event(&mut events, t, EventKind::TimeLimit, &p);
                        return Ok(HybridTrajectory { arcs, events, termination: Termination::TimeLimit });
                    }
                    Some((_, true)) => {
                        push_event(&mut events, t, EventKind::TangencyHit, &p);
                        entry = EventKind::TangencyHit;
                    }
                    Some((q, false)) => match mode_after_hit(sys, &q, side) {
                        Some(Mode::Smooth(next)) => {
                            push_event(&mut events, t, EventKind::CrossIn, &q);
                            mode = Mode::Smooth(next);
                            entry = EventKind::CrossIn;
                        }
                        Some(Mode::Sliding) => {
                            push_event(&mut events, t, EventKind::SlidingEntry, &q);
                            mode = Mode::Sliding;
                            entry = EventKind::SlidingEntry;
                        }
                        None => {
                            push_event(&mut events, t, EventKind::CrossOut, &q);
                            return Ok(HybridTrajectory {
                                arcs,
                                events,
                                termination: Termination::NonDeterministicExit,
                            });
                        }
                    },
                }
            }
            Mode::Sliding => {
                let (arc, exit) = match slide_from(sys, &p, remaining, entry, opts) {
                    Ok(r) => r,
                    Err(Error::NotSlidingRegion) => {
                        let xf = sys.ff(Side::Above, &p);
                        mode = Mode::Smooth(if xf > 0.0 { Side::Above } else { Side::Below });
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                if arc.time_reversed {
                    return Ok(HybridTrajectory {
                        arcs,
                        events,
                        termination: Termination::NonDeterministicExit,
                    });
                }
                let arc = shift(arc, t);
                t = arc.samples.last().expect("nonempty").0;
                p = arc.end();
                arcs.push(arc);
                match exit {
                    None => {
                        push_event(&mut events, t, EventKind::TimeLimit, &p);
                        return Ok(HybridTrajectory { arcs, events, termination: Termination::TimeLimit });
                    }
                    Some(_) if sys.is_tangent(Side::Above, &p) && sys.is_tangent(Side::Below, &p) => {
                        push_event(&mut events, t, EventKind::SlidingExit, &p);
                        return Ok(HybridTrajectory {
                            arcs,
                            events,
                            termination: Termination::NonDeterministicExit,
                        });
                    }
                    Some(side) => {
                        push_event(&mut events, t, EventKind::SlidingExit, &p);
                        mode = Mode::Smooth(side);
                        entry = EventKind::SlidingExit;
                    }
                }
            }
        }
    }
    Ok(HybridTrajectory { arcs, events, termination: Termination::TransitionLimit })
}
