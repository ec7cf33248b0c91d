//! Closed-form oracle for the semi-linear toy model
//!
//! `X = (1, x + alpha, -y)` above `z = 0` and `Y = (-1, -beta, -x - b y)` below.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filippov::{FilippovSystem, SmoothField};
use crate::normal_form::NormalFormSystem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ToyParams {
    pub alpha: f64,
    pub beta: f64,
    pub b: f64,
}

impl ToyParams {
    pub fn new(alpha: f64, beta: f64, b: f64) -> Self {
        Self { alpha, beta, b }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    /// `Y^2 f` on the tangency line of `Y`; positive means invisible folds.
    pub fn y_fold_curvature(&self) -> f64 {
        1.0 + self.b * self.beta
    }

    pub fn to_filippov(&self) -> FilippovSystem {
        let x = Matrix3::new(0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
        let y = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, -self.b, 0.0);
        FilippovSystem::new(
            SmoothField::affine(&x, &Vector3::new(1.0, self.alpha, 0.0)),
            SmoothField::affine(&y, &Vector3::new(-1.0, -self.beta, 0.0)),
        )
    }

    /// The same system in normal-form coordinates: reversing time maps it onto
    /// the template with `c = alpha`.
    pub fn to_normal_form(&self) -> NormalFormSystem {
        let mut nf = NormalFormSystem::new(self.alpha);
        nf.set(0, [0, 0, 0], 1.0)
            .set(1, [0, 0, 0], self.beta)
            .set(2, [1, 0, 0], 1.0)
            .set(2, [0, 1, 0], self.b);
        nf
    }

    /// The linear map `P-` as a matrix.
    pub fn p_minus_matrix(&self) -> Matrix2<f64> {
        let (b, beta) = (self.b, self.beta);
        Matrix2::new(b * beta - 1.0, -2.0 * b, -2.0 * beta, 1.0 - b * beta) / (1.0 + b * beta)
    }

    /// Half-return map below the plane.
    pub fn p_minus(&self, x0: f64, y0: f64) -> Result<Vector2<f64>> {
        if !(x0 > -self.b * y0) || !(self.y_fold_curvature() > 0.0) {
            return Err(Error::Domain(format!("({x0}, {y0}) does not cross into z < 0")));
        }
        Ok(self.p_minus_matrix() * Vector2::new(x0, y0))
    }

    /// Landing point above the plane after flight time `t`.
    pub fn p_plus(&self, t: f64, x1: f64, y1: f64) -> Vector2<f64> {
        Vector2::new(t + x1, 0.5 * (t * t + 2.0 * (x1 + self.alpha) * t + 2.0 * y1))
    }

    /// Vanishes when `t` is a flight time of the arc above the plane.
    pub fn flight_residual(&self, t: f64, x1: f64, y1: f64) -> f64 {
        -t * t - 3.0 * t * (x1 + self.alpha) - 6.0 * y1
    }

    /// Positive root of the flight equation.
    pub fn flight_time(&self, x1: f64, y1: f64) -> Result<f64> {
        let u = 3.0 * (x1 + self.alpha);
        let disc = u * u - 24.0 * y1;
        if disc < 0.0 {
            return Err(Error::NoRealReturn(disc));
        }
        let t = 0.5 * (-u + disc.sqrt());
        if t < 0.0 {
            return Err(Error::NoReturn);
        }
        Ok(t)
    }

    /// Full return map `P+ o P-` and its flight time above the plane.
    pub fn return_map(&self, x0: f64, y0: f64) -> Result<(Vector2<f64>, f64)> {
        let q = self.p_minus(x0, y0)?;
        let t = self.flight_time(q.x, q.y)?;
        Ok((self.p_plus(t, q.x, q.y), t))
    }

    /// Zero of the sliding field, `(beta - alpha, (alpha - beta) / (1 + b), 0)`.
    pub fn pseudo_equilibrium(&self) -> Result<Vector3<f64>> {
        if (1.0 + self.b).abs() < 1e-14 {
            return Err(Error::Degenerate);
        }
        let y = (self.alpha - self.beta) / (1.0 + self.b);
        Ok(Vector3::new(self.beta - self.alpha, y, 0.0))
    }
}

fn check_family_range(beta: f64, b: f64, t: f64) -> Result<()> {
    if !(beta > 0.0) || b == 0.0 || !(1.0 + b * beta > 0.0) {
        return Err(Error::Domain(format!("family needs beta > 0, b != 0, 1 + b beta > 0 (beta={beta}, b={b})")));
    }
    if !(t > 0.0 && t < 6.0 * beta) {
        return Err(Error::Domain(format!("t = {t} outside (0, {})", 6.0 * beta)));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClcFamilyPoint {
    pub t: f64,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub alpha: f64,
}

impl ClcFamilyPoint {
    pub fn upper_point(&self) -> Vector3<f64> {
        Vector3::new(self.x0, self.y0, 0.0)
    }

    pub fn lower_point(&self) -> Vector3<f64> {
        Vector3::new(self.x1, self.y1, 0.0)
    }
}

/// `alpha(t) = b t^2 / 12 + beta`.
pub fn family_alpha(beta: f64, b: f64, t: f64) -> f64 {
    b * t * t / 12.0 + beta
}

/// Family point without range checks, valid as a formula on the closed interval.
pub fn family_formula(beta: f64, b: f64, t: f64) -> ClcFamilyPoint {
    ClcFamilyPoint {
        t,
        x0: t * (6.0 - b * t) / 12.0,
        y0: t * (t + 6.0 * beta) / 12.0,
        x1: -t * (6.0 + b * t) / 12.0,
        y1: t * (t - 6.0 * beta) / 12.0,
        alpha: family_alpha(beta, b, t),
    }
}

/// Analytic crossing limit cycle with flight time `t` above the plane.
pub fn clc_family(beta: f64, b: f64, t: f64) -> Result<ClcFamilyPoint> {
    check_family_range(beta, b, t)?;
    let p = family_formula(beta, b, t);
    let params = ToyParams::new(p.alpha, beta, b);
    let below = params.p_minus_matrix() * Vector2::new(p.x0, p.y0);
    let above = params.p_plus(t, p.x1, p.y1);
    let g = params.flight_residual(t, p.x1, p.y1);
    let scale = 1.0 + p.x0.abs() + p.y0.abs();
    let err = (below - Vector2::new(p.x1, p.y1)).amax().max((above - Vector2::new(p.x0, p.y0)).amax()).max(g.abs());
    if err > 1e-12 * scale * scale {
        return Err(Error::NoConvergence(format!("family closure residual {err:.3e}")));
    }
    Ok(p)
}

/// Flight time of the family point at the given `alpha`, by bisection on the monotone branch.
pub fn family_t_of_alpha(params: &ToyParams) -> Result<f64> {
    let ToyParams { alpha, beta, b } = *params;
    check_family_range(beta, b, 3.0 * beta)?;
    let f = |t: f64| family_alpha(beta, b, t) - alpha;
    let (mut lo, mut hi) = (0.0, 6.0 * beta);
    let (flo, fhi) = (f(lo), f(hi));
    if flo * fhi >= 0.0 {
        return Err(Error::Domain(format!("alpha = {alpha} admits no crossing limit cycle")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BifurcationCurves {
    pub alpha_ts: f64,
    pub alpha_poly: f64,
    pub alpha_flip: f64,
}

pub fn bifurcation_curves(beta: f64, b: f64) -> BifurcationCurves {
    BifurcationCurves {
        alpha_ts: beta,
        alpha_poly: beta * (1.0 + 3.0 * b * beta),
        alpha_flip: beta * (1.0 - b * beta) / 2.0,
    }
}

/// Polycycle intersections `(3 beta (1 - b beta), 6 beta^2)` and `(-3 beta (1 + b beta), 0)`.
pub fn polycycle_points(beta: f64, b: f64) -> (Vector3<f64>, Vector3<f64>) {
    (
        Vector3::new(3.0 * beta * (1.0 - b * beta), 6.0 * beta * beta, 0.0),
        Vector3::new(-3.0 * beta * (1.0 + b * beta), 0.0, 0.0),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StabilityClass {
    Saddle,
    StableFocusNode,
    FlipBoundary,
    NonHyperbolic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClcStability {
    pub delta: f64,
    pub tau: f64,
    pub class: StabilityClass,
    /// Eigenvalues as `(re, im)` pairs.
    pub eigenvalues: [(f64, f64); 2],
}

/// Jacobian of the return map at the family point, `DP+ . DP-` with the
/// implicit flight-time dependence of `P+`.
pub fn return_jacobian(beta: f64, b: f64, t: f64) -> Result<Matrix2<f64>> {
    let p = clc_family(beta, b, t)?;
    let params = ToyParams::new(p.alpha, beta, b);
    let dg_dt = -2.0 * t - 3.0 * (p.x1 + p.alpha);
    if dg_dt.abs() < 1e-14 {
        return Err(Error::Degenerate);
    }
    let dg_dq = Vector2::new(-3.0 * t, -6.0);
    let dp_dt = Vector2::new(1.0, t + p.x1 + p.alpha);
    let dp_dq = Matrix2::new(1.0, 0.0, t, 1.0);
    let dp_plus = dp_dq - dp_dt * dg_dq.transpose() / dg_dt;
    Ok(dp_plus * params.p_minus_matrix())
}

/// `det J = 1 - 2t / (t + 6 beta)`.
pub fn delta_closed_form(beta: f64, t: f64) -> f64 {
    1.0 - 2.0 * t / (t + 6.0 * beta)
}

fn eigen2(j: &Matrix2<f64>) -> [(f64, f64); 2] {
    let tr = j.trace();
    let det = j.determinant();
    let disc = 0.25 * tr * tr - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let l1 = 0.5 * tr + s;
        let l2 = 0.5 * tr - s;
        [(l1, 0.0), (l2, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [(0.5 * tr, s), (0.5 * tr, -s)]
    }
}

pub fn clc_stability(beta: f64, b: f64, t: f64) -> Result<ClcStability> {
    let j = return_jacobian(beta, b, t)?;
    let delta = delta_closed_form(beta, t);
    let tau = j.trace();
    let plus = delta + tau + 1.0;
    let minus = delta - tau + 1.0;
    let tol = 1e-12;
    let class = if plus.abs() < tol {
        StabilityClass::FlipBoundary
    } else if minus.abs() < tol || (delta - 1.0).abs() < tol {
        StabilityClass::NonHyperbolic
    } else if plus < 0.0 || minus < 0.0 {
        StabilityClass::Saddle
    } else {
        StabilityClass::StableFocusNode
    };
    Ok(ClcStability { delta, tau, class, eigenvalues: eigen2(&j) })
}

/// `delta + tau + 1 = 24 (2 (alpha - beta) + b beta^2 + beta) / ((t + 6 beta)(1 + b beta))`.
pub fn flip_indicator_closed_form(beta: f64, b: f64, t: f64) -> f64 {
    let alpha = family_alpha(beta, b, t);
    24.0 * (2.0 * (alpha - beta) + b * beta * beta + beta) / ((t + 6.0 * beta) * (1.0 + b * beta))
}

/// Point on the family where the return map has eigenvalue `-1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlipPoint {
    pub t: f64,
    pub alpha: f64,
    pub eigenvalue: f64,
}

/// Locates the flip by bisection on `t` using the numerically assembled Jacobian.
pub fn locate_flip(beta: f64, b: f64) -> Result<FlipPoint> {
    let ind = |t: f64| -> Result<f64> {
        let j = return_jacobian(beta, b, t)?;
        Ok(j.determinant() + j.trace() + 1.0)
    };
    let n = 64;
    let tmax = 6.0 * beta;
    let mut prev = (tmax / n as f64, ind(tmax / n as f64)?);
    let mut bracket = None;
    for i in 2..n {
        let t = tmax * i as f64 / n as f64;
        let v = ind(t)?;
        if v * prev.1 <= 0.0 {
            bracket = Some((prev.0, t, prev.1));
            break;
        }
        prev = (t, v);
    }
    let (mut lo, mut hi, flo) = bracket.ok_or_else(|| Error::Domain("no flip on the family".into()))?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if (ind(mid)? > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let eig = eigen2(&return_jacobian(beta, b, t)?);
    let eigenvalue = if (eig[0].0 + 1.0).abs() < (eig[1].0 + 1.0).abs() { eig[0].0 } else { eig[1].0 };
    Ok(FlipPoint { t, alpha: family_alpha(beta, b, t), eigenvalue })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_minus_example() {
        let p = ToyParams::new(0.75, 1.0, -1.0 / 3.0);
        let q = p.p_minus(1.75, 2.25).unwrap();
        assert!((q - Vector2::new(-1.25, -0.75)).amax() < 1e-14);
        let m = p.p_minus_matrix();
        assert!((m - Matrix2::new(-2.0, 1.0, -3.0, 2.0)).amax() < 1e-14);
    }

    #[test]
    fn family_example() {
        let p = clc_family(1.0, -1.0 / 3.0, 3.0).unwrap();
        for (a, e) in [(p.x0, 1.75), (p.y0, 2.25), (p.x1, -1.25), (p.y1, -0.75), (p.alpha, 0.75)] {
            assert!((a - e).abs() < 1e-14);
        }
    }

    #[test]
    fn curves_example() {
        let c = bifurcation_curves(1.0, -1.0 / 3.0);
        assert!((c.alpha_ts - 1.0).abs() < 1e-15);
        assert!(c.alpha_poly.abs() < 1e-15);
        assert!((c.alpha_flip - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn flip_indicator_matches_closed_form() {
        for t in [0.5, 2.0, 4.5] {
            let j = return_jacobian(1.0, -1.0 / 3.0, t).unwrap();
            let v = j.determinant() + j.trace() + 1.0;
            assert!((v - flip_indicator_closed_form(1.0, -1.0 / 3.0, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn pseudo_equilibrium_zeroes_sliding_field() {
        let p = ToyParams::new(1.5, 1.0, -1.0 / 3.0);
        let q = p.pseudo_equilibrium().unwrap();
        let v = p.to_filippov().sliding_vector(&q, true).unwrap();
        assert!(v.norm() < 1e-14);
    }
}
