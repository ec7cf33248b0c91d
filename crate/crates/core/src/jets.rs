//! Truncated Taylor series for the flow, the return time and the half-return
//! map of the polynomial field below the switching plane.
//!
//! Everything is generic over [`Real`], so the same code runs in `f64` and in
//! double-double precision ([`twofloat::TwoFloat`]).

use std::collections::BTreeMap;
use std::fmt::Debug;

use num_traits::Float;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::normal_form::NormalFormSystem;
use crate::poly::{Exponents, PolyField};

/// Scalar type of the series arithmetic.
pub trait Real: Float + Debug + Send + Sync + 'static {
    fn lit(x: f64) -> Self;
    fn to_f64_lossy(self) -> f64;
    /// Unit roundoff of the representation.
    fn eps() -> Self;
}

impl Real for f64 {
    fn lit(x: f64) -> Self {
        x
    }
    fn to_f64_lossy(self) -> f64 {
        self
    }
    fn eps() -> Self {
        f64::EPSILON
    }
}

impl Real for TwoFloat {
    fn lit(x: f64) -> Self {
        TwoFloat::from(x)
    }
    fn to_f64_lossy(self) -> f64 {
        self.hi() + self.lo()
    }
    fn eps() -> Self {
        TwoFloat::from(2f64.powi(-104))
    }
}

/// Polynomial in `nvars` variables truncated at total degree `max_degree`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries<T: Real = f64> {
    nvars: usize,
    max_degree: u32,
    coeffs: BTreeMap<Vec<u32>, T>,
}

impl<T: Real> TruncatedSeries<T> {
    pub fn zero(nvars: usize, max_degree: u32) -> Self {
        Self { nvars, max_degree, coeffs: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, max_degree: u32, c: T) -> Self {
        let mut s = Self::zero(nvars, max_degree);
        s.set(&vec![0; nvars], c);
        s
    }

    pub fn variable(nvars: usize, max_degree: u32, var: usize) -> Self {
        let mut s = Self::zero(nvars, max_degree);
        let mut e = vec![0; nvars];
        e[var] = 1;
        s.set(&e, T::one());
        s
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn coeff(&self, e: &[u32]) -> T {
        self.coeffs.get(e).copied().unwrap_or_else(T::zero)
    }

    pub fn set(&mut self, e: &[u32], v: T) {
        assert_eq!(e.len(), self.nvars);
        if e.iter().sum::<u32>() > self.max_degree {
            return;
        }
        if v == T::zero() {
            self.coeffs.remove(e);
        } else {
            self.coeffs.insert(e.to_vec(), v);
        }
    }

    fn add_to(&mut self, e: &[u32], v: T) {
        if e.iter().sum::<u32>() > self.max_degree {
            return;
        }
        let slot = self.coeffs.entry(e.to_vec()).or_insert_with(T::zero);
        *slot = *slot + v;
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &T)> {
        self.coeffs.iter()
    }

    pub fn truncate(&self, max_degree: u32) -> Self {
        Self {
            nvars: self.nvars,
            max_degree,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(e, _)| e.iter().sum::<u32>() <= max_degree)
                .map(|(e, c)| (e.clone(), *c))
                .collect(),
        }
    }

    /// Homogeneous part of the given degree.
    pub fn homogeneous(&self, degree: u32) -> Self {
        Self {
            nvars: self.nvars,
            max_degree: self.max_degree,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(e, _)| e.iter().sum::<u32>() == degree)
                .map(|(e, c)| (e.clone(), *c))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.truncate(self.max_degree.min(other.max_degree));
        for (e, c) in &other.coeffs {
            out.add_to(e, *c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            nvars: self.nvars,
            max_degree: self.max_degree,
            coeffs: self.coeffs.iter().map(|(e, c)| (e.clone(), *c * s)).collect(),
        }
    }

    pub fn add_scalar(&self, s: T) -> Self {
        let mut out = self.clone();
        out.add_to(&vec![0; self.nvars], s);
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let deg = self.max_degree.min(other.max_degree);
        let mut out = Self::zero(self.nvars, deg);
        let mut e = vec![0u32; self.nvars];
        for (a, ca) in &self.coeffs {
            let da: u32 = a.iter().sum();
            for (b, cb) in &other.coeffs {
                if da + b.iter().sum::<u32>() > deg {
                    continue;
                }
                for i in 0..self.nvars {
                    e[i] = a[i] + b[i];
                }
                out.add_to(&e, *ca * *cb);
            }
        }
        out
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = Self::constant(self.nvars, self.max_degree, T::one());
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    pub fn derivative(&self, var: usize) -> Self {
        let mut out = Self::zero(self.nvars, self.max_degree);
        for (e, c) in &self.coeffs {
            if e[var] > 0 {
                let mut d = e.clone();
                d[var] -= 1;
                out.add_to(&d, *c * T::lit(e[var] as f64));
            }
        }
        out
    }

    /// Antiderivative in `var` vanishing at `var = 0`, kept within the truncation degree.
    pub fn integrate(&self, var: usize) -> Self {
        let mut out = Self::zero(self.nvars, self.max_degree);
        for (e, c) in &self.coeffs {
            let mut d = e.clone();
            d[var] += 1;
            out.add_to(&d, *c / T::lit(d[var] as f64));
        }
        out
    }

    /// Division by the variable `var`; terms without it are dropped.
    pub fn divide_by_var(&self, var: usize) -> Self {
        let mut out = Self::zero(self.nvars, self.max_degree.saturating_sub(1));
        for (e, c) in &self.coeffs {
            if e[var] > 0 {
                let mut d = e.clone();
                d[var] -= 1;
                out.add_to(&d, *c);
            }
        }
        out
    }

    pub fn eval(&self, point: &[T]) -> T {
        let mut acc = T::zero();
        for (e, c) in &self.coeffs {
            let mut term = *c;
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    term = term * point[i].powi(k as i32);
                }
            }
            acc = acc + term;
        }
        acc
    }

    /// Substitutes `subs[i]` for variable `i`.
    pub fn compose(&self, subs: &[Self]) -> Self {
        assert_eq!(subs.len(), self.nvars);
        let nv = subs[0].nvars;
        let deg = subs.iter().map(|s| s.max_degree).min().unwrap_or(self.max_degree);
        let maxpow: Vec<u32> = (0..self.nvars)
            .map(|i| self.coeffs.keys().map(|e| e[i]).max().unwrap_or(0))
            .collect();
        let powers: Vec<Vec<Self>> = subs
            .iter()
            .zip(&maxpow)
            .map(|(s, &m)| {
                let s = s.truncate(deg);
                let mut v = vec![Self::constant(nv, deg, T::one())];
                for k in 1..=m {
                    let next = v[k as usize - 1].mul(&s);
                    v.push(next);
                }
                v
            })
            .collect();
        let mut out = Self::zero(nv, deg);
        for (e, c) in &self.coeffs {
            let mut term = Self::constant(nv, deg, *c);
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    term = term.mul(&powers[i][k as usize]);
                }
            }
            out = out.add(&term);
        }
        out
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> TruncatedSeries<U> {
        TruncatedSeries {
            nvars: self.nvars,
            max_degree: self.max_degree,
            coeffs: self.coeffs.iter().map(|(e, c)| (e.clone(), f(*c))).collect(),
        }
    }

    /// Largest coefficient magnitude, as `f64`.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().map(|c| c.abs().to_f64_lossy()).fold(0.0, f64::max)
    }

    pub fn to_json(&self, names: &[&str]) -> serde_json::Value {
        let terms: Vec<_> = self
            .coeffs
            .iter()
            .map(|(e, c)| {
                let mono: serde_json::Map<String, serde_json::Value> =
                    names.iter().zip(e).map(|(n, k)| (n.to_string(), (*k).into())).collect();
                serde_json::json!({"exponents": mono, "coefficient": c.to_f64_lossy()})
            })
            .collect();
        serde_json::json!({"max_degree": self.max_degree, "terms": terms})
    }
}

/// Polynomial vector field with coefficients in `T`.
#[derive(Clone, Debug)]
pub struct SeriesField<T: Real> {
    pub rows: Vec<(Exponents, [T; 3])>,
}

impl<T: Real> SeriesField<T> {
    pub fn from_poly(field: &PolyField) -> Self {
        Self { rows: field.rows().into_iter().map(|(e, c)| (e, c.map(T::lit))).collect() }
    }

    /// `F(phi)` for a series-valued point.
    pub fn eval(&self, phi: &[TruncatedSeries<T>; 3]) -> [TruncatedSeries<T>; 3] {
        let nv = phi[0].nvars;
        let deg = phi[0].max_degree;
        let maxpow = |i: usize| self.rows.iter().map(|(e, _)| e[i]).max().unwrap_or(0);
        let powers: Vec<Vec<TruncatedSeries<T>>> = (0..3)
            .map(|i| {
                let mut v = vec![TruncatedSeries::constant(nv, deg, T::one())];
                for k in 1..=maxpow(i) {
                    let next = v[k as usize - 1].mul(&phi[i]);
                    v.push(next);
                }
                v
            })
            .collect();
        let mut out = [
            TruncatedSeries::zero(nv, deg),
            TruncatedSeries::zero(nv, deg),
            TruncatedSeries::zero(nv, deg),
        ];
        for (e, c) in &self.rows {
            let mono = powers[0][e[0] as usize]
                .mul(&powers[1][e[1] as usize])
                .mul(&powers[2][e[2] as usize]);
            for n in 0..3 {
                if c[n] != T::zero() {
                    out[n] = out[n].add(&mono.scale(c[n]));
                }
            }
        }
        out
    }
}

/// Taylor series of the flow from `(x, y, 0)` in the variables `(t, x, y)`.
pub fn series_flow<T: Real>(field: &SeriesField<T>, degree: u32) -> [TruncatedSeries<T>; 3] {
    let x = TruncatedSeries::variable(3, degree, 1);
    let y = TruncatedSeries::variable(3, degree, 2);
    let init = [x, y, TruncatedSeries::zero(3, degree)];
    let mut phi = init.clone();
    // each Picard sweep fixes one more total degree
    for _ in 0..=degree {
        let rhs = field.eval(&phi);
        phi = [0, 1, 2].map(|n| init[n].add(&rhs[n].integrate(0)));
    }
    phi
}

/// Nonzero root `t = tau(x, y)` of the third flow component, in `(x, y)`.
pub fn return_time_series<T: Real>(flow: &[TruncatedSeries<T>; 3]) -> Result<TruncatedSeries<T>> {
    let degree = flow[2].max_degree();
    let r = flow[2].divide_by_var(0);
    let r0 = r.coeff(&[0, 0, 0]);
    if r0.abs().to_f64_lossy() > 1e-14 {
        return Err(Error::InvalidInput("the fold must pass through the origin (gamma_000 = 0)".into()));
    }
    let kappa = r.coeff(&[1, 0, 0]);
    if kappa.abs().to_f64_lossy() < 1e-14 {
        return Err(Error::NonInvisibleFold(kappa.to_f64_lossy()));
    }
    let tdeg = degree - 1;
    let x = TruncatedSeries::variable(2, tdeg, 0);
    let y = TruncatedSeries::variable(2, tdeg, 1);
    let mut tau = TruncatedSeries::<T>::zero(2, tdeg);
    for n in 1..=tdeg {
        let res = r.compose(&[tau.clone(), x.clone(), y.clone()]).homogeneous(n);
        tau = tau.add(&res.scale(-T::one() / kappa));
    }
    Ok(tau)
}

/// Half-return map of the field below the plane as truncated series in `(x, y)`.
#[derive(Clone, Debug)]
pub struct ReturnMapSeries<T: Real = f64> {
    pub p1: TruncatedSeries<T>,
    pub p2: TruncatedSeries<T>,
    pub tau: TruncatedSeries<T>,
}

impl<T: Real> ReturnMapSeries<T> {
    pub fn eval(&self, x: T, y: T) -> (T, T) {
        (self.p1.eval(&[x, y]), self.p2.eval(&[x, y]))
    }

    pub fn linear_part(&self) -> [[T; 2]; 2] {
        [
            [self.p1.coeff(&[1, 0]), self.p1.coeff(&[0, 1])],
            [self.p2.coeff(&[1, 0]), self.p2.coeff(&[0, 1])],
        ]
    }

    /// `P o P` truncated at the series degree.
    pub fn compose_self(&self) -> (TruncatedSeries<T>, TruncatedSeries<T>) {
        let subs = [self.p1.clone(), self.p2.clone()];
        (self.p1.compose(&subs), self.p2.compose(&subs))
    }

    pub fn degree(&self) -> u32 {
        self.p1.max_degree()
    }
}

/// Half-return map from a flow of total degree `degree`; the map has degree `degree - 1`.
pub fn return_map_series<T: Real>(field: &SeriesField<T>, degree: u32) -> Result<ReturnMapSeries<T>> {
    if degree < 2 {
        return Err(Error::InvalidInput("series degree must be at least 2".into()));
    }
    let flow = series_flow(field, degree);
    let tau = return_time_series(&flow)?;
    let tdeg = degree - 1;
    let subs = [tau.clone(), TruncatedSeries::variable(2, tdeg, 0), TruncatedSeries::variable(2, tdeg, 1)];
    Ok(ReturnMapSeries { p1: flow[0].compose(&subs), p2: flow[1].compose(&subs), tau })
}

/// Coefficients of `G2(x, y(x)) / 3 = g1 x + g2 x^2 + g3 x^3 + ...`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GCoefficients<T: Real = f64> {
    pub g1: T,
    pub g2: T,
    pub g3: T,
    /// Coefficients of the curve `y(x) = y1 x + y2 x^2 + y3 x^3` solving `G1 = 0`.
    pub curve: [T; 3],
}

/// Displacement components as series in `(x, y)` for a given map series.
pub fn displacement_series<T: Real>(
    map: &ReturnMapSeries<T>,
    c: T,
) -> (TruncatedSeries<T>, TruncatedSeries<T>) {
    let d = map.degree();
    let x = TruncatedSeries::variable(2, d, 0);
    let y = TruncatedSeries::variable(2, d, 1);
    let (p1, p2) = (&map.p1, &map.p2);
    let three_c = T::lit(3.0) * c;
    let dp = p1.sub(&x);
    let g1 = y.scale(T::lit(6.0)).add(&dp.mul(&p1.add(&x.scale(T::lit(2.0))).add_scalar(three_c)));
    let g2 = p2.scale(T::lit(6.0)).sub(&dp.mul(&p1.scale(T::lit(2.0)).add(&x).add_scalar(three_c)));
    (g1, g2)
}

/// Reduced displacement coefficients for the given `c` and `beta_000`.
pub fn g_coefficients<T: Real>(nf: &NormalFormSystem, c: T, beta000: T, degree: u32) -> Result<GCoefficients<T>> {
    let mut field = SeriesField::<T>::from_poly(&nf.y_field());
    set_constant(&mut field, 1, beta000);
    let map = return_map_series(&field, degree)?;
    g_from_map(&map, c)
}

pub(crate) fn set_constant<T: Real>(field: &mut SeriesField<T>, comp: usize, v: T) {
    match field.rows.iter_mut().find(|(e, _)| *e == [0, 0, 0]) {
        Some(row) => row.1[comp] = v,
        None => {
            let mut c = [T::zero(); 3];
            c[comp] = v;
            field.rows.push(([0, 0, 0], c));
        }
    }
}

pub fn g_from_map<T: Real>(map: &ReturnMapSeries<T>, c: T) -> Result<GCoefficients<T>> {
    let (g1s, g2s) = displacement_series(map, c);
    let d = 3.min(map.degree());
    let dy = g1s.coeff(&[0, 1]);
    if dy.abs().to_f64_lossy() < 1e-14 {
        return Err(Error::Domain("implicit curve G1 = 0 is singular".into()));
    }
    let xs = TruncatedSeries::variable(1, d, 0);
    let mut ycurve = TruncatedSeries::<T>::zero(1, d);
    for k in 1..=d {
        let r = g1s.compose(&[xs.clone(), ycurve.clone()]).coeff(&[k]);
        ycurve.set(&[k], -r / dy);
    }
    let red = g2s.compose(&[xs, ycurve.clone()]).scale(T::lit(1.0 / 3.0));
    Ok(GCoefficients {
        g1: red.coeff(&[1]),
        g2: red.coeff(&[2]),
        g3: red.coeff(&[3]),
        curve: [ycurve.coeff(&[1]), ycurve.coeff(&[2]), ycurve.coeff(&[3])],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    type S = TruncatedSeries<f64>;

    #[test]
    fn flow_of_simple_field() {
        // Y = (1, 0, x): phi = (x + t, y, x t + t^2 / 2)
        let f = SeriesField::<f64>::from_poly(&PolyField::from_rows(&[
            ([0, 0, 0], [1.0, 0.0, 0.0]),
            ([1, 0, 0], [0.0, 0.0, 1.0]),
        ]));
        let phi = series_flow(&f, 4);
        let mut expect = S::zero(3, 4);
        expect.set(&[1, 1, 0], 1.0);
        expect.set(&[2, 0, 0], 0.5);
        assert_eq!(phi[2], expect);
        assert_eq!(phi[0].coeff(&[1, 0, 0]), 1.0);
        assert_eq!(phi[0].coeff(&[0, 1, 0]), 1.0);
    }

    #[test]
    fn flow_of_linear_field_is_exponential() {
        // Y = (x, 0, 0): phi_1 = x e^t
        let f = SeriesField::<f64>::from_poly(&PolyField::from_rows(&[([1, 0, 0], [1.0, 0.0, 0.0])]));
        let phi = series_flow(&f, 5);
        for k in 0..5u32 {
            let fact: f64 = (1..=k).map(f64::from).product();
            assert!((phi[0].coeff(&[k, 1, 0]) - 1.0 / fact).abs() < 1e-15);
        }
    }

    #[test]
    fn series_algebra() {
        let x = S::variable(2, 3, 0);
        let y = S::variable(2, 3, 1);
        let p = x.add(&y).powi(4);
        assert_eq!(p, S::zero(2, 3));
        let q = x.mul(&y).add_scalar(2.0);
        assert_eq!(q.eval(&[3.0, 5.0]), 17.0);
        let comp = q.compose(&[y.clone(), x.clone()]);
        assert_eq!(comp.eval(&[3.0, 5.0]), 17.0);
        assert_eq!(q.derivative(0), y);
        assert_eq!(q.integrate(0).derivative(0).truncate(2), q.truncate(2));
    }
}
