//! Cusp-fold normal form: `X = (-1, -(x + c), y)` above `z = 0` and a
//! polynomial field `Y = (sum alpha_ijk, sum beta_ijk, sum gamma_ijk) x^i y^j z^k` below.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::filippov::{FilippovSystem, Side, SmoothField, Switching};
use crate::integrator::{half_return, IntegratorOptions};
use crate::jets::{self, Real, ReturnMapSeries, SeriesField, TruncatedSeries};
use crate::poly::{Exponents, Poly3, PolyField};

pub type CoefTable = BTreeMap<Exponents, f64>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NormalFormSystem {
    pub c: f64,
    pub alpha: CoefTable,
    pub beta: CoefTable,
    pub gamma: CoefTable,
}

fn get(t: &CoefTable, e: Exponents) -> f64 {
    t.get(&e).copied().unwrap_or(0.0)
}

impl NormalFormSystem {
    pub fn new(c: f64) -> Self {
        Self { c, ..Default::default() }
    }

    /// Sets the coefficient of `x^i y^j z^k` in component `comp` (0, 1 or 2).
    pub fn set(&mut self, comp: usize, e: Exponents, v: f64) -> &mut Self {
        let t = match comp {
            0 => &mut self.alpha,
            1 => &mut self.beta,
            _ => &mut self.gamma,
        };
        if v == 0.0 {
            t.remove(&e);
        } else {
            t.insert(e, v);
        }
        self
    }

    pub fn alpha(&self, e: Exponents) -> f64 {
        get(&self.alpha, e)
    }

    pub fn beta(&self, e: Exponents) -> f64 {
        get(&self.beta, e)
    }

    pub fn gamma(&self, e: Exponents) -> f64 {
        get(&self.gamma, e)
    }

    pub fn with_c(&self, c: f64) -> Self {
        Self { c, ..self.clone() }
    }

    pub fn with_beta000(&self, b: f64) -> Self {
        let mut out = self.clone();
        out.set(1, [0, 0, 0], b);
        out
    }

    /// `alpha_000 gamma_100 + beta_000 gamma_010`; positive for an invisible fold.
    pub fn invisibility(&self) -> f64 {
        self.alpha([0, 0, 0]) * self.gamma([1, 0, 0]) + self.beta([0, 0, 0]) * self.gamma([0, 1, 0])
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma([0, 0, 0]) != 0.0 {
            return Err(Error::InvalidInput("gamma_000 must vanish".into()));
        }
        let inv = self.invisibility();
        if !(inv > 0.0) {
            return Err(Error::NonInvisibleFold(inv));
        }
        let all = self.alpha.iter().chain(&self.beta).chain(&self.gamma);
        for (e, v) in all {
            if e.iter().sum::<u32>() > 4 {
                return Err(Error::InvalidInput(format!("monomial {e:?} exceeds degree 4")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("coefficient of {e:?} is not finite")));
            }
        }
        if !self.c.is_finite() {
            return Err(Error::InvalidInput("c must be finite".into()));
        }
        Ok(())
    }

    pub fn y_field(&self) -> PolyField {
        PolyField::new([
            Poly3::from_terms(self.alpha.iter().map(|(e, v)| (*e, *v))),
            Poly3::from_terms(self.beta.iter().map(|(e, v)| (*e, *v))),
            Poly3::from_terms(self.gamma.iter().map(|(e, v)| (*e, *v))),
        ])
    }

    pub fn x_field(&self) -> PolyField {
        PolyField::from_rows(&[
            ([0, 0, 0], [-1.0, -self.c, 0.0]),
            ([1, 0, 0], [0.0, -1.0, 0.0]),
            ([0, 1, 0], [0.0, 0.0, 1.0]),
        ])
    }

    pub fn to_filippov(&self) -> FilippovSystem {
        FilippovSystem::new(SmoothField::polynomial(self.x_field()), SmoothField::polynomial(self.y_field()))
    }

    /// Reads a system already in normal-form shape at the origin, possibly
    /// with both fields reversed in time.
    pub fn from_filippov(sys: &FilippovSystem, p: &Vector3<f64>) -> Result<Self> {
        if p.norm() > 1e-12 {
            return Err(Error::RequiresNormalForm);
        }
        if sys.switching != Switching::z() {
            return Err(Error::RequiresNormalForm);
        }
        let (xp, yp) = match (sys.x.as_polynomial(), sys.y.as_polynomial()) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(Error::RequiresNormalForm),
        };
        for sign in [1.0, -1.0] {
            let x = xp.scale(sign);
            let c = -x.components[1].coefficient([0, 0, 0]);
            let template = Self::new(c).x_field();
            if x == template {
                let y = yp.scale(sign);
                let mut nf = Self::new(c);
                for (e, v) in y.rows() {
                    for (comp, val) in v.iter().enumerate() {
                        nf.set(comp, e, *val);
                    }
                }
                return Ok(nf);
            }
        }
        Err(Error::RequiresNormalForm)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let sys = FilippovSystem::from_json_str(text)?;
        Self::from_filippov(&sys, &Vector3::zeros())
    }

    pub fn return_map_series(&self, degree: u32) -> Result<ReturnMapSeries<f64>> {
        jets::return_map_series(&SeriesField::<f64>::from_poly(&self.y_field()), degree)
    }
}

/// Degree-2 index: the cubic coefficient of the reduced displacement at `c = beta_000 = 0`.
pub fn cuspfold_index(nf: &NormalFormSystem) -> Result<f64> {
    Ok(jets::g_coefficients::<f64>(&nf.with_c(0.0), 0.0, 0.0, 4)?.g3)
}

/// The closed-form index expression as printed, read with the whole bracket
/// multiplied by the prefactor. Kept for comparison with [`cuspfold_index`].
pub fn legacy_printed_index(nf: &NormalFormSystem) -> f64 {
    let a = |i, j, k| nf.alpha([i, j, k]);
    let b = |i, j, k| nf.beta([i, j, k]);
    let g = |i, j, k| nf.gamma([i, j, k]);
    let (a0, g1) = (a(0, 0, 0), g(1, 0, 0));
    let bracket = -a0 * g1 * (a(1, 0, 0) - b(0, 1, 0) - b(2, 0, 0) + g(0, 0, 1))
        + b(1, 0, 0) * (2.0 * g(0, 1, 0) + g(2, 0, 0))
        + a0 * a0 * (g(0, 1, 0) + g(2, 0, 0))
        - b(0, 0, 1) * g1 * g1
        + b(1, 0, 0).powi(2) * g(0, 1, 0)
        + b(1, 0, 0) * g1 * (g(0, 0, 1) - b(0, 1, 0));
    -4.0 / (3.0 * a0 * a0 * g1) * bracket
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PiX {
    pub point: Vector2<f64>,
    /// The root `t_-`; negative when the return happens in backward time.
    pub flight_time: f64,
}

/// Closed-form half-return map of `X`.
pub fn pi_x(x: f64, y: f64, c: f64) -> Result<PiX> {
    let u = x + c;
    let disc = 9.0 * u * u - 24.0 * y;
    if disc < 0.0 {
        return Err(Error::NoRealReturn(disc));
    }
    let tm = 0.5 * (3.0 * u - disc.sqrt());
    if y >= 0.0 && u <= 0.0 && !(y == 0.0 && u == 0.0) {
        return Err(Error::BackwardOnly);
    }
    Ok(PiX { point: Vector2::new(x - tm, 0.5 * u * tm - 2.0 * y), flight_time: tm })
}

/// Jacobian of [`pi_x`] in `(x, y)`.
pub fn pi_x_jacobian(x: f64, y: f64, c: f64) -> Result<Matrix2<f64>> {
    let u = x + c;
    let disc = 9.0 * u * u - 24.0 * y;
    if disc <= 0.0 {
        return Err(Error::NoRealReturn(disc));
    }
    let s = disc.sqrt();
    let t = 0.5 * (3.0 * u - s);
    let tx = 0.5 * (3.0 - 9.0 * u / s);
    let ty = 6.0 / s;
    Ok(Matrix2::new(1.0 - tx, -ty, 0.5 * t + 0.5 * u * tx, 0.5 * u * ty - 2.0))
}

/// How `Pi_Y` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReturnBackend {
    /// Truncated Taylor series of the given flow degree.
    Series { degree: u32 },
    Integrator(IntegratorOptions),
}

impl Default for ReturnBackend {
    fn default() -> Self {
        ReturnBackend::Series { degree: 8 }
    }
}

enum Inner {
    Series(ReturnMapSeries<f64>, [[TruncatedSeries<f64>; 2]; 2]),
    Integrator(FilippovSystem, IntegratorOptions),
}

/// Displacement map `G` of a fixed normal form.
pub struct Displacement {
    pub nf: NormalFormSystem,
    inner: Inner,
}

impl Displacement {
    pub fn new(nf: &NormalFormSystem, backend: &ReturnBackend) -> Result<Self> {
        nf.validate()?;
        let inner = match backend {
            ReturnBackend::Series { degree } => {
                let m = nf.return_map_series(*degree)?;
                let d = [
                    [m.p1.derivative(0), m.p1.derivative(1)],
                    [m.p2.derivative(0), m.p2.derivative(1)],
                ];
                Inner::Series(m, d)
            }
            ReturnBackend::Integrator(o) => Inner::Integrator(nf.to_filippov(), *o),
        };
        Ok(Self { nf: nf.clone(), inner })
    }

    /// The same lower map paired with another cusp offset; `Pi_Y` does not depend on `c`.
    pub fn with_c(&self, c: f64) -> Self {
        let inner = match &self.inner {
            Inner::Series(m, d) => Inner::Series(m.clone(), d.clone()),
            Inner::Integrator(_, o) => Inner::Integrator(self.nf.with_c(c).to_filippov(), *o),
        };
        Self { nf: self.nf.with_c(c), inner }
    }

    /// `Pi_Y(p)` and its (signed) flight time.
    pub fn pi_y(&self, p: &Vector2<f64>) -> Result<(Vector2<f64>, f64)> {
        match &self.inner {
            Inner::Series(m, _) => {
                let (a, b) = m.eval(p.x, p.y);
                Ok((Vector2::new(a, b), m.tau.eval(&[p.x, p.y])))
            }
            Inner::Integrator(sys, o) => {
                let r = half_return(sys, &Vector3::new(p.x, p.y, 0.0), Side::Below, o)?;
                Ok((Vector2::new(r.point.x, r.point.y), r.flight_time))
            }
        }
    }

    pub fn dpi_y(&self, p: &Vector2<f64>) -> Result<Matrix2<f64>> {
        match &self.inner {
            Inner::Series(_, d) => {
                let at = [p.x, p.y];
                Ok(Matrix2::new(d[0][0].eval(&at), d[0][1].eval(&at), d[1][0].eval(&at), d[1][1].eval(&at)))
            }
            Inner::Integrator(..) => {
                let h = 1e-7 * (1.0 + p.norm());
                let mut m = Matrix2::zeros();
                for j in 0..2 {
                    let mut e = Vector2::zeros();
                    e[j] = h;
                    let fp = self.pi_y(&(p + e))?.0;
                    let fm = self.pi_y(&(p - e))?.0;
                    m.set_column(j, &((fp - fm) / (2.0 * h)));
                }
                Ok(m)
            }
        }
    }

    fn g_from(&self, p: &Vector2<f64>, q: &Vector2<f64>) -> Vector2<f64> {
        let (x, y, c) = (p.x, p.y, self.nf.c);
        let dp = q.x - x;
        Vector2::new(
            6.0 * y + dp * (q.x + 3.0 * c + 2.0 * x),
            6.0 * q.y - dp * (2.0 * q.x + 3.0 * c + x),
        )
    }

    pub fn g(&self, p: &Vector2<f64>) -> Result<Vector2<f64>> {
        let q = self.pi_y(p)?.0;
        Ok(self.g_from(p, &q))
    }

    pub fn jacobian(&self, p: &Vector2<f64>) -> Result<Matrix2<f64>> {
        let q = self.pi_y(p)?.0;
        let dq = self.dpi_y(p)?;
        let (x, c, p1) = (p.x, self.nf.c, q.x);
        // explicit dependence on (x, y) and dependence through (P1, P2)
        let explicit = Matrix2::new(
            -(p1 + 3.0 * c + 2.0 * x) + 2.0 * (p1 - x),
            6.0,
            (2.0 * p1 + 3.0 * c + x) - (p1 - x),
            0.0,
        );
        let via = Matrix2::new(2.0 * p1 + 3.0 * c + x, 0.0, -(4.0 * p1 + 3.0 * c - x), 6.0);
        Ok(explicit + via * dq)
    }

    /// The curve `y(x)` solving `G1(x, y) = 0` near the origin.
    pub fn curve_y(&self, x: f64) -> Result<f64> {
        let mut y = self.nf.c * x + x * x / 3.0;
        for _ in 0..60 {
            let p = Vector2::new(x, y);
            let g1 = self.g(&p)?.x;
            let d = self.jacobian(&p)?[(0, 1)];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::NoConvergence("curve G1 = 0: singular derivative".into()));
            }
            let step = g1 / d;
            y -= step;
            if step.abs() <= 1e-15 * y.abs() || g1 == 0.0 {
                return Ok(y);
            }
        }
        let g1 = self.g(&Vector2::new(x, y))?.x;
        if g1.abs() < 1e-13 * (1.0 + x.abs()) {
            Ok(y)
        } else {
            Err(Error::NoConvergence(format!("curve G1 = 0 at x = {x:e}")))
        }
    }

    /// `G2(x, y(x)) / x`.
    pub fn reduced(&self, x: f64) -> Result<f64> {
        let y = self.curve_y(x)?;
        Ok(self.g(&Vector2::new(x, y))?.y / x)
    }

    /// Newton polish of a zero of `G`.
    pub fn newton(&self, p0: &Vector2<f64>) -> Result<Vector2<f64>> {
        let mut p = *p0;
        for _ in 0..50 {
            let g = self.g(&p)?;
            let j = self.jacobian(&p)?;
            let step = j.lu().solve(&g).ok_or_else(|| Error::NoConvergence("singular Jacobian of G".into()))?;
            p -= step;
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::NoConvergence("Newton on G diverged".into()));
            }
            if step.norm() <= 1e-14 * p.norm() {
                break;
            }
        }
        let g = self.g(&p)?;
        if g.norm() < 1e-12 * (1.0 + p.norm()) {
            Ok(p)
        } else {
            Err(Error::NoConvergence(format!("|G| = {:e} at {:?}", g.norm(), p)))
        }
    }

    /// Zero of the reduced displacement near `x0`, refined in both coordinates.
    pub fn solve_from_seed(&self, x0: f64) -> Result<Vector2<f64>> {
        let (mut a, mut b) = (x0, x0 * (1.0 + 1e-3));
        let (mut fa, mut fb) = (self.reduced(a)?, self.reduced(b)?);
        for _ in 0..80 {
            if fb == fa {
                break;
            }
            let next = b - fb * (b - a) / (fb - fa);
            if !next.is_finite() || next == 0.0 || next.abs() > 1e3 * x0.abs().max(1e-300) {
                return Err(Error::NoConvergence(format!("reduced displacement from seed {x0:e}")));
            }
            a = b;
            fa = fb;
            b = next;
            fb = self.reduced(b)?;
            if (b - a).abs() <= 1e-14 * b.abs() {
                break;
            }
        }
        let y = self.curve_y(b)?;
        self.newton(&Vector2::new(b, y))
    }
}

/// Convenience evaluation of `G` at `(x, y)`.
pub fn displacement_g(nf: &NormalFormSystem, x: f64, y: f64, backend: &ReturnBackend) -> Result<Vector2<f64>> {
    Displacement::new(nf, backend)?.g(&Vector2::new(x, y))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ClcKind {
    Clc,
    Polycycle,
    None,
    DoubleTangencyOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClcSolution {
    pub kind: ClcKind,
    /// Zero with `x > 0`, where `X` leaves the plane.
    pub p_plus: [f64; 2],
    /// Zero with `x < 0`, where `X` returns.
    pub p_minus: [f64; 2],
    pub flight_above: Option<f64>,
    pub flight_below: Option<f64>,
    pub index: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClcOptions {
    pub backend: ReturnBackend,
    /// Zeros farther than this from the origin are ignored.
    pub radius: Option<f64>,
}

impl Default for ClcOptions {
    fn default() -> Self {
        Self { backend: ReturnBackend::default(), radius: None }
    }
}

fn empty_solution(kind: ClcKind, index: f64) -> ClcSolution {
    ClcSolution {
        kind,
        p_plus: [0.0; 2],
        p_minus: [0.0; 2],
        flight_above: None,
        flight_below: None,
        index,
        warnings: Vec::new(),
    }
}

/// Classifies a pair of zeros of `G` with `p_plus.x > 0 > p_minus.x`.
fn classify_pair(d: &Displacement, pp: &Vector2<f64>, pm: &Vector2<f64>, index: f64) -> Result<ClcSolution> {
    let nf = &d.nf;
    let yf = nf.y_field().components[2].clone();
    let yf_at = |p: &Vector2<f64>| yf.eval(&Vector3::new(p.x, p.y, 0.0));
    let mut warnings = Vec::new();
    if nf.gamma([1, 0, 0]) <= 0.0 {
        warnings.push("gamma_100 <= 0: crossing-region membership is not guaranteed".to_string());
    }
    let tol = 1e-10;
    let plus_ok = pp.y > tol * (1.0 + pp.norm()) && yf_at(pp) > 0.0;
    let on_sx = pm.y.abs() <= 1e-10;
    let minus_cross = pm.y < 0.0 && !on_sx && yf_at(pm) < 0.0;
    let visible = pm.x < -nf.c - 1e-10;
    let kind = if plus_ok && minus_cross {
        ClcKind::Clc
    } else if plus_ok && on_sx && visible {
        ClcKind::Polycycle
    } else {
        if !plus_ok {
            warnings.push("p_plus is not in the crossing region".into());
        }
        if !minus_cross {
            warnings.push("p_minus is not in the crossing region".into());
        }
        ClcKind::None
    };
    let back = d.pi_y(pm)?;
    if (back.0 - pp).norm() > 1e-8 * (1.0 + pp.norm()) {
        warnings.push(format!("Pi_Y(p_minus) misses p_plus by {:e}", (back.0 - pp).norm()));
    }
    let flight_above = pi_x(pp.x, pp.y, nf.c).ok().map(|r| r.flight_time);
    Ok(ClcSolution {
        kind,
        p_plus: [pp.x, pp.y],
        p_minus: [pm.x, pm.y],
        flight_above,
        flight_below: Some(back.1),
        index,
        warnings,
    })
}

/// Locates the one-loop crossing cycle bifurcating from a degree-2 cusp-fold.
pub fn find_clc(nf: &NormalFormSystem, opts: &ClcOptions) -> Result<ClcSolution> {
    nf.validate()?;
    let index = cuspfold_index(nf)?;
    let d = Displacement::new(nf, &opts.backend)?;
    find_clc_with(&d, index, opts.radius)
}

/// [`find_clc`] on a prepared displacement map with a known index.
pub fn find_clc_with(d: &Displacement, index: f64, radius: Option<f64>) -> Result<ClcSolution> {
    let nf = &d.nf;
    if index.abs() < 1e-10 {
        return Err(Error::IndexZero);
    }
    let a0 = nf.alpha([0, 0, 0]);
    let b0 = nf.beta([0, 0, 0]);
    let gap = b0 - a0 * nf.c;
    if gap.abs() <= 1e-15 * (1.0 + b0.abs()) {
        return Ok(empty_solution(ClcKind::DoubleTangencyOnly, index));
    }
    let s = gap / (index * a0);
    if s < 0.0 {
        return Ok(empty_solution(ClcKind::None, index));
    }
    let seed = 2.0 * s.sqrt();
    if let Some(r) = radius {
        if seed > 2.0 * r {
            return Ok(empty_solution(ClcKind::None, index));
        }
    }
    let pp = d.solve_from_seed(seed)?;
    let pm = d.solve_from_seed(-seed)?;
    if pp.x <= 0.0 || pm.x >= 0.0 {
        return Err(Error::NoConvergence("branches x+ and x- merged".into()));
    }
    if let Some(r) = radius {
        if pp.norm() > r || pm.norm() > r {
            return Ok(empty_solution(ClcKind::None, index));
        }
    }
    classify_pair(d, &pp, &pm, index)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Precision {
    Double,
    DoubleDouble,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BetaStar {
    pub c: f64,
    pub beta_star: f64,
    pub x_star: f64,
}

/// Polycycle curve: the `beta_000` at which the return point reaches the fold line of `X`.
pub fn beta_star(nf: &NormalFormSystem, c: f64, precision: Precision) -> Result<BetaStar> {
    beta_star_with_degree(nf, c, precision, 4)
}

pub fn beta_star_with_degree(nf: &NormalFormSystem, c: f64, precision: Precision, degree: u32) -> Result<BetaStar> {
    if !(c > 0.0) {
        return Err(Error::InvalidInput("beta_star needs c > 0".into()));
    }
    let (x, b) = match precision {
        Precision::Double => {
            let (x, b) = beta_star_generic::<f64>(nf, c, degree)?;
            (x, b)
        }
        Precision::DoubleDouble => {
            let (x, b) = beta_star_generic::<TwoFloat>(nf, c, degree)?;
            (x.to_f64_lossy(), b.to_f64_lossy())
        }
    };
    Ok(BetaStar { c, beta_star: b, x_star: x })
}

/// Least-squares fit of `(beta* - alpha_000 c) / c^2 = B + C c`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvatureFit {
    pub curvature: f64,
    pub cubic: f64,
    pub index: f64,
    /// `B / (L alpha_000)`.
    pub ratio: f64,
    /// Largest relative deviation of the fitted model from the samples.
    pub residual: f64,
    pub samples: Vec<BetaStar>,
}

/// Samples `beta*` at `n` log-spaced values of `c` in `[c_min, c_max]` and fits its curvature.
pub fn fit_beta_star_curvature(nf: &NormalFormSystem, c_min: f64, c_max: f64, n: usize, precision: Precision) -> Result<CurvatureFit> {
    if !(c_min > 0.0 && c_max > c_min) || n < 3 {
        return Err(Error::InvalidInput("curvature fit needs 0 < c_min < c_max and n >= 3".into()));
    }
    let index = cuspfold_index(nf)?;
    let a0 = nf.alpha([0, 0, 0]);
    let samples = (0..n)
        .map(|i| {
            let c = c_min * (c_max / c_min).powf(i as f64 / (n - 1) as f64);
            beta_star(nf, c, precision)
        })
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.c, (s.beta_star - a0 * s.c) / (s.c * s.c))).collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let cubic = sxy / sxx;
    let curvature = my - cubic * mx;
    let residual = pts
        .iter()
        .map(|p| ((curvature + cubic * p.0 - p.1) / p.1).abs())
        .fold(0.0, f64::max);
    Ok(CurvatureFit { curvature, cubic, index, ratio: curvature / (index * a0), residual, samples })
}

/// `(G1(x, 0) / x, G2(x, 0) / x)` as polynomials in `x`.
fn sx_residual_polys<T: Real>(nf: &NormalFormSystem, c: T, beta: T, degree: u32) -> Result<[Vec<T>; 2]> {
    let mut field = SeriesField::<T>::from_poly(&nf.y_field());
    jets::set_constant(&mut field, 1, beta);
    let map = jets::return_map_series(&field, degree)?;
    let (g1, g2) = jets::displacement_series(&map, c);
    let d = map.degree() as usize;
    let coeffs = |s: &TruncatedSeries<T>| -> Vec<T> { (1..=d).map(|k| s.coeff(&[k as u32, 0])).collect() };
    Ok([coeffs(&g1), coeffs(&g2)])
}

fn horner<T: Real>(p: &[T], x: T) -> (T, T) {
    let (mut v, mut dv) = (T::zero(), T::zero());
    for &a in p.iter().rev() {
        dv = dv * x + v;
        v = v * x + a;
    }
    (v, dv)
}

fn beta_star_generic<T: Real>(nf: &NormalFormSystem, c: f64, degree: u32) -> Result<(T, T)> {
    let ct = T::lit(c);
    let a0 = T::lit(nf.alpha([0, 0, 0]));
    let mut x = T::lit(-3.0) * ct;
    let mut b = a0 * ct;
    let eps = T::eps();
    let eval = |x: T, b: T| -> Result<(T, T, T, T)> {
        let p = sx_residual_polys(nf, ct, b, degree)?;
        let (f1, d1) = horner(&p[0], x);
        let (f2, d2) = horner(&p[1], x);
        Ok((f1, f2, d1, d2))
    };
    for _ in 0..60 {
        let (f1, f2, dx1, dx2) = eval(x, b)?;
        let h = eps.sqrt() * (b.abs() + ct.abs());
        let (p1, p2, _, _) = eval(x, b + h)?;
        let (m1, m2, _, _) = eval(x, b - h)?;
        let two_h = T::lit(2.0) * h;
        let (db1, db2) = ((p1 - m1) / two_h, (p2 - m2) / two_h);
        let det = dx1 * db2 - db1 * dx2;
        if det == T::zero() || !det.is_finite() {
            return Err(Error::NoConvergence("beta_star: singular Jacobian".into()));
        }
        let sx = (f1 * db2 - db1 * f2) / det;
        let sb = (dx1 * f2 - f1 * dx2) / det;
        x = x - sx;
        b = b - sb;
        if !(x.is_finite() && b.is_finite()) {
            return Err(Error::NoConvergence("beta_star diverged".into()));
        }
        let small = T::lit(16.0) * eps;
        if sx.abs() <= small * x.abs() && sb.abs() <= small * b.abs() {
            return Ok((x, b));
        }
    }
    let (f1, f2, _, _) = eval(x, b)?;
    if (f1.abs() + f2.abs()).to_f64_lossy() < 1e-12 * c {
        Ok((x, b))
    } else {
        Err(Error::NoConvergence("beta_star: iteration limit".into()))
    }
}

/// Settings of the no-cycle sampling experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HarnessOptions {
    pub c_samples: usize,
    pub c_max: f64,
    /// Radius of the neighbourhood of the singularity that is searched.
    pub radius: f64,
    /// Grid points for the sign-change scan of the reduced displacement.
    pub grid: usize,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        Self { c_samples: 11, c_max: 0.05, radius: 0.05, grid: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarnessViolation {
    pub trial: usize,
    pub c: f64,
    pub beta000: f64,
    pub p_plus: [f64; 2],
    pub p_minus: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarnessReport {
    pub seed: u64,
    pub trials: usize,
    pub systems_checked: usize,
    /// Cycles found; for degree-1 forms every one is a violation.
    pub cycles_found: usize,
    pub violations: Vec<HarnessViolation>,
    pub errors: Vec<String>,
}

fn sym(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let v = rng.gen_range(lo..hi);
    if rng.gen_bool(0.5) {
        v
    } else {
        -v
    }
}

fn random_higher_terms(rng: &mut ChaCha8Rng, nf: &mut NormalFormSystem, scale: f64) {
    for comp in 0..3 {
        for i in 0..=2u32 {
            for j in 0..=(2 - i) {
                for k in 0..=(2 - i - j) {
                    let deg = i + j + k;
                    if deg == 0 || (comp == 2 && deg == 1 && k == 0) {
                        continue;
                    }
                    nf.set(comp, [i, j, k], rng.gen_range(-scale..scale));
                }
            }
        }
    }
}

/// Random normal form with `beta_000 = beta0` and `c = 0`.
pub fn random_normal_form(rng: &mut ChaCha8Rng, beta0: f64, gamma100_positive: bool) -> NormalFormSystem {
    loop {
        let mut nf = NormalFormSystem::new(0.0);
        random_higher_terms(rng, &mut nf, 0.3);
        let g1 = if gamma100_positive { rng.gen_range(0.5..1.5) } else { sym(rng, 0.5, 1.5) };
        let a0 = rng.gen_range(0.8..1.2) * g1.signum();
        nf.set(0, [0, 0, 0], a0);
        nf.set(1, [0, 0, 0], beta0);
        nf.set(2, [1, 0, 0], g1);
        nf.set(2, [0, 1, 0], rng.gen_range(-0.5..0.5));
        if nf.invisibility() > 0.2 {
            return nf;
        }
    }
}

/// Random degree-2 form (`beta_000 = 0`) with `|index| >= min_index` and `gamma_100 > 0`.
pub fn random_degree2(rng: &mut ChaCha8Rng, min_index: f64) -> NormalFormSystem {
    loop {
        let nf = random_normal_form(rng, 0.0, true);
        if let Ok(l) = cuspfold_index(&nf) {
            if l.abs() >= min_index && l.abs() <= 5.0 {
                return nf;
            }
        }
    }
}

/// Zeros of `G` found by a sign-change scan of the reduced displacement on `[-r, r]`.
pub fn scan_for_cycle(nf: &NormalFormSystem, opts: &HarnessOptions) -> Result<Option<ClcSolution>> {
    let d = Displacement::new(nf, &ReturnBackend::default())?;
    scan_with(&d, opts, || cuspfold_index(nf))
}

fn scan_with(d: &Displacement, opts: &HarnessOptions, index: impl FnOnce() -> Result<f64>) -> Result<Option<ClcSolution>> {
    let n = opts.grid.max(4);
    let r = opts.radius;
    let mut roots = Vec::new();
    for sign in [1.0, -1.0] {
        let xs: Vec<f64> = (1..=n).map(|i| sign * r * i as f64 / n as f64).collect();
        let mut prev: Option<(f64, f64)> = None;
        for &x in &xs {
            let v = match d.reduced(x) {
                Ok(v) => v,
                Err(_) => {
                    prev = None;
                    continue;
                }
            };
            if let Some((xp, vp)) = prev {
                if vp.signum() != v.signum() {
                    let (mut a, mut b, mut fa) = (xp, x, vp);
                    for _ in 0..100 {
                        let m = 0.5 * (a + b);
                        let fm = d.reduced(m)?;
                        if fm.signum() == fa.signum() {
                            a = m;
                            fa = fm;
                        } else {
                            b = m;
                        }
                        if (b - a).abs() < 1e-15 * m.abs() {
                            break;
                        }
                    }
                    let x0 = 0.5 * (a + b);
                    let seed = Vector2::new(x0, d.curve_y(x0)?);
                    let p = d.newton(&seed).unwrap_or(seed);
                    roots.push(p);
                }
            }
            prev = Some((x, v));
        }
    }
    let plus = roots.iter().filter(|p| p.x > 0.0).min_by(|a, b| a.norm().total_cmp(&b.norm()));
    let minus = roots.iter().filter(|p| p.x < 0.0).min_by(|a, b| a.norm().total_cmp(&b.norm()));
    match (plus, minus) {
        (Some(pp), Some(pm)) => {
            let sol = classify_pair(d, pp, pm, index()?)?;
            Ok(Some(sol))
        }
        _ => Ok(None),
    }
}

fn is_cycle(sol: &ClcSolution) -> bool {
    matches!(sol.kind, ClcKind::Clc | ClcKind::Polycycle)
}

/// Result of a single harness trial.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub systems_checked: usize,
    pub cycles_found: usize,
    pub violations: Vec<HarnessViolation>,
    pub errors: Vec<String>,
}

impl HarnessReport {
    /// Merges trial outcomes in the given order.
    pub fn from_trials<I: IntoIterator<Item = TrialOutcome>>(seed: u64, trials: usize, outcomes: I) -> Self {
        let mut report = HarnessReport {
            seed,
            trials,
            systems_checked: 0,
            cycles_found: 0,
            violations: Vec::new(),
            errors: Vec::new(),
        };
        for o in outcomes {
            report.systems_checked += o.systems_checked;
            report.cycles_found += o.cycles_found;
            report.violations.extend(o.violations);
            report.errors.extend(o.errors);
        }
        report
    }
}

/// Independent random stream for one trial, so results do not depend on scheduling.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// One degree-1 form swept over `c`; any cycle near the singularity is a violation.
pub fn nonexistence_trial(seed: u64, trial: usize, opts: &HarnessOptions) -> TrialOutcome {
    let mut rng = trial_rng(seed, trial);
    let mut out = TrialOutcome::default();
    let beta0 = sym(&mut rng, 0.12, 0.6);
    let base = random_normal_form(&mut rng, beta0, false);
    let prepared = Displacement::new(&base, &ReturnBackend::default()).and_then(|d| Ok((d, cuspfold_index(&base)?)));
    let (base_d, index) = match prepared {
        Ok(v) => v,
        Err(e) => {
            out.errors.push(format!("trial {trial}: {e}"));
            return out;
        }
    };
    for k in 0..opts.c_samples {
        let c = if opts.c_samples == 1 {
            0.0
        } else {
            -opts.c_max + 2.0 * opts.c_max * k as f64 / (opts.c_samples - 1) as f64
        };
        let d = base_d.with_c(c);
        out.systems_checked += 1;
        let mut found: Option<ClcSolution> = None;
        match find_clc_with(&d, index, Some(opts.radius)) {
            Ok(sol) if is_cycle(&sol) => found = Some(sol),
            Ok(_) | Err(Error::IndexZero) | Err(Error::NoConvergence(_)) => {}
            Err(e) => out.errors.push(format!("trial {trial}, c = {c}: {e}")),
        }
        if found.is_none() {
            match scan_with(&d, opts, || Ok(index)) {
                Ok(Some(sol)) if is_cycle(&sol) => found = Some(sol),
                Ok(_) => {}
                Err(e) => out.errors.push(format!("trial {trial}, c = {c}: {e}")),
            }
        }
        if let Some(sol) = found {
            out.cycles_found += 1;
            out.violations.push(HarnessViolation { trial, c, beta000: beta0, p_plus: sol.p_plus, p_minus: sol.p_minus });
        }
    }
    out
}

/// Samples degree-1 forms and sweeps `c`; any cycle near the singularity is a violation.
pub fn nonexistence_harness(seed: u64, trials: usize, opts: &HarnessOptions) -> HarnessReport {
    HarnessReport::from_trials(seed, trials, (0..trials).map(|t| nonexistence_trial(seed, t, opts)))
}

/// One degree-2 form unfolded inside the cycle wedge.
pub fn degree2_control_trial(seed: u64, trial: usize, opts: &HarnessOptions) -> TrialOutcome {
    let mut rng = trial_rng(seed, trial);
    let mut out = TrialOutcome::default();
    let base = random_degree2(&mut rng, 0.2);
    let c = rng.gen_range(0.004..0.01);
    let theta = rng.gen_range(0.2..0.8);
    let a0 = base.alpha([0, 0, 0]);
    let bs = match beta_star(&base, c, Precision::Double) {
        Ok(b) => b.beta_star,
        Err(e) => {
            out.errors.push(format!("trial {trial}: {e}"));
            return out;
        }
    };
    let beta0 = a0 * c + theta * (bs - a0 * c);
    let nf = base.with_c(c).with_beta000(beta0);
    out.systems_checked += 1;
    match scan_for_cycle(&nf, opts) {
        Ok(Some(sol)) if sol.kind == ClcKind::Clc => out.cycles_found += 1,
        Ok(other) => out.errors.push(format!("trial {trial}: no cycle found ({other:?})")),
        Err(e) => out.errors.push(format!("trial {trial}: {e}")),
    }
    out
}

/// Degree-2 forms unfolded inside the cycle wedge; every trial should yield a cycle.
pub fn degree2_controls(seed: u64, trials: usize, opts: &HarnessOptions) -> HarnessReport {
    HarnessReport::from_trials(seed, trials, (0..trials).map(|t| degree2_control_trial(seed, t, opts)))
}

/// Linear part of the lower half-return map in closed form.
pub fn pi_y_linear_closed_form(nf: &NormalFormSystem) -> Result<Matrix2<f64>> {
    let (a0, b0) = (nf.alpha([0, 0, 0]), nf.beta([0, 0, 0]));
    let (g1, g2) = (nf.gamma([1, 0, 0]), nf.gamma([0, 1, 0]));
    let d = g1 * a0 + g2 * b0;
    if d == 0.0 {
        return Err(Error::NonInvisibleFold(0.0));
    }
    Ok(Matrix2::new(1.0 - 2.0 * g1 * a0 / d, -2.0 * g2 * a0 / d, -2.0 * g1 * b0 / d, 1.0 - 2.0 * g2 * b0 / d))
}

/// Consistency of the lower half-return series for one coefficient draw.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JetsCheck {
    pub trial: usize,
    /// Largest entry of the difference between series and closed-form linear parts.
    pub linear_residual: f64,
    /// Largest coefficient of `P o P - id` through total degree 3.
    pub involution_residual: f64,
    pub trace: f64,
    pub determinant: f64,
}

pub fn jets_check(nf: &NormalFormSystem, trial: usize) -> Result<JetsCheck> {
    let map = nf.return_map_series(4)?;
    let lin = map.linear_part();
    let m = Matrix2::new(lin[0][0], lin[0][1], lin[1][0], lin[1][1]);
    let linear_residual = (m - pi_y_linear_closed_form(nf)?).abs().max();
    let (q1, q2) = map.compose_self();
    let id1 = TruncatedSeries::<f64>::variable(2, q1.max_degree(), 0);
    let id2 = TruncatedSeries::<f64>::variable(2, q2.max_degree(), 1);
    let involution_residual = q1.sub(&id1).max_abs().max(q2.sub(&id2).max_abs());
    Ok(JetsCheck { trial, linear_residual, involution_residual, trace: m.trace(), determinant: m.determinant() })
}

/// Random invisible-fold draw for trial `trial`, with a random `beta_000`.
pub fn jets_check_trial(seed: u64, trial: usize) -> Result<JetsCheck> {
    let mut rng = trial_rng(seed, trial);
    let beta0 = rng.gen_range(-0.5..0.5);
    let mut nf = random_normal_form(&mut rng, beta0, false);
    nf.c = rng.gen_range(-0.1..0.1);
    jets_check(&nf, trial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_x_examples() {
        let r = pi_x(1.0, 0.0, 0.0).unwrap();
        assert_eq!(r.point, Vector2::new(1.0, 0.0));
        assert_eq!(r.flight_time, 0.0);
        let r = pi_x(2.0, 1.0, 0.0).unwrap();
        let t = (6.0 - 12f64.sqrt()) / 2.0;
        assert!((r.flight_time - t).abs() < 1e-15);
        assert!((r.point - Vector2::new(2.0 - t, -(2.0 - t))).norm() < 1e-14);
        let r = pi_x(0.0, 0.0, 0.03).unwrap();
        assert_eq!(r.point, Vector2::zeros());
        assert!(matches!(pi_x(0.0, 1.0, 0.0), Err(Error::NoRealReturn(_))));
    }

    #[test]
    fn pi_x_jacobian_matches_differences() {
        let (x, y, c) = (0.7, 0.1, 0.05);
        let j = pi_x_jacobian(x, y, c).unwrap();
        let h = 1e-6;
        for k in 0..2 {
            let (dx, dy) = if k == 0 { (h, 0.0) } else { (0.0, h) };
            let fp = pi_x(x + dx, y + dy, c).unwrap().point;
            let fm = pi_x(x - dx, y - dy, c).unwrap().point;
            let col = (fp - fm) / (2.0 * h);
            assert!((col - j.column(k)).norm() < 1e-8);
        }
    }

    #[test]
    fn recast_roundtrip() {
        let mut nf = NormalFormSystem::new(0.2);
        nf.set(0, [0, 0, 0], 1.0).set(1, [0, 0, 0], 0.3).set(2, [1, 0, 0], 1.0).set(2, [0, 1, 0], -0.2);
        let sys = nf.to_filippov();
        assert_eq!(NormalFormSystem::from_filippov(&sys, &Vector3::zeros()).unwrap(), nf);
        let rev = FilippovSystem::new(sys.x.negated(), sys.y.negated());
        assert_eq!(NormalFormSystem::from_filippov(&rev, &Vector3::zeros()).unwrap(), nf);
    }

    #[test]
    fn double_tangency_and_sign() {
        let mut nf = NormalFormSystem::new(0.01);
        nf.set(0, [0, 0, 0], 1.0).set(1, [0, 0, 0], 0.01).set(2, [1, 0, 0], 1.0).set(2, [0, 1, 0], -1.0 / 3.0);
        let sol = find_clc(&nf, &ClcOptions::default()).unwrap();
        assert_eq!(sol.kind, ClcKind::DoubleTangencyOnly);
        assert_eq!(sol.p_plus, [0.0, 0.0]);
        // index 4/9 > 0, beta - alpha c < 0
        let sol = find_clc(&nf.with_beta000(0.005), &ClcOptions::default()).unwrap();
        assert_eq!(sol.kind, ClcKind::None);
    }
}
