//! Generic periodic-orbit solvers built on integrator half-return maps.

use nalgebra::{Matrix2, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::filippov::{FilippovSystem, RegionTag, Side};
use crate::integrator::{half_return, IntegratorOptions};

type V3 = Vector3<f64>;

#[derive(Clone, Debug)]
pub struct CycleOptions {
    pub integrator: IntegratorOptions,
    pub tol: f64,
    pub max_iter: usize,
    /// Relative finite-difference step for Jacobians.
    pub fd_step: f64,
    /// Cycles with a shorter arc are rejected as degenerate.
    pub min_flight: f64,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self { integrator: IntegratorOptions::default(), tol: 1e-11, max_iter: 40, fd_step: 1e-6, min_flight: 1e-6 }
    }
}

/// Two-point closed orbit `p0 -> p1 -> p0`.
#[derive(Clone, Debug)]
pub struct CrossingCycle {
    pub p0: V3,
    pub p1: V3,
    /// Flight time of the `first` side arc `p0 -> p1`.
    pub t_first: f64,
    /// Flight time of the return arc `p1 -> p0`.
    pub t_second: f64,
    pub first: Side,
    pub residual: f64,
    /// Jacobian of the forward return map in chart coordinates, up to conjugacy.
    pub monodromy: Matrix2<f64>,
    pub iterations: usize,
}

/// Full return map from the manifold: `first` side arc, then the other side arc.
pub fn return_map(sys: &FilippovSystem, p: &V3, first: Side, opts: &IntegratorOptions) -> Result<(V3, V3, f64, f64)> {
    let a = half_return(sys, p, first, opts)?;
    let b = half_return(sys, &a.point, first.other(), opts)?;
    Ok((a.point, b.point, a.flight_time, b.flight_time))
}

fn fd_jacobian<F>(f: &F, u: &Vector2<f64>, rel: f64) -> Result<Matrix2<f64>>
where
    F: Fn(&Vector2<f64>) -> Result<Vector2<f64>>,
{
    let mut j = Matrix2::zeros();
    for k in 0..2 {
        let h = rel * (1.0 + u[k].abs());
        let mut up = *u;
        let mut dn = *u;
        up[k] += h;
        dn[k] -= h;
        let d = (f(&up)? - f(&dn)?) / (2.0 * h);
        j.set_column(k, &d);
    }
    Ok(j)
}

/// Newton solve for a crossing cycle with two intersections, seeded at `seed`.
pub fn crossing_cycle(sys: &FilippovSystem, seed: &V3, first: Side, opts: &CycleOptions) -> Result<CrossingCycle> {
    let chart = sys.switching.chart();
    let disp = |u: &Vector2<f64>| -> Result<Vector2<f64>> {
        let (_, q, _, _) = return_map(sys, &chart.point(u), first, &opts.integrator)?;
        Ok(chart.coords(&q) - u)
    };
    let mut u = chart.coords(seed);
    let mut r = disp(&u)?;
    let mut iterations = 0;
    while r.norm() > opts.tol * (1.0 + u.norm()) {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence(format!("crossing cycle: residual {:.3e}", r.norm())));
        }
        iterations += 1;
        let j = fd_jacobian(&disp, &u, opts.fd_step)?;
        let step = j.lu().solve(&(-r)).ok_or(Error::Degenerate)?;
        let mut lambda = 1.0;
        loop {
            let trial = u + step * lambda;
            match disp(&trial) {
                Ok(rt) if rt.norm() < r.norm() || lambda < 1e-3 => {
                    u = trial;
                    r = rt;
                    break;
                }
                _ if lambda < 1e-3 => return Err(Error::NoConvergence("crossing cycle: line search failed".into())),
                _ => lambda *= 0.5,
            }
        }
        if step.norm() * lambda < 1e-15 * (1.0 + u.norm()) {
            break;
        }
    }
    let mut p0 = chart.point(&u);
    let (mut p1, _, mut t_first, mut t_second) = return_map(sys, &p0, first, &opts.integrator)?;
    if t_first.abs().min(t_second.abs()) < opts.min_flight {
        return Err(Error::Domain("converged to a zero-length orbit".into()));
    }
    if t_first < 0.0 && t_second < 0.0 {
        // the same cycle traversed backwards: restart the description at p1
        std::mem::swap(&mut p0, &mut p1);
        (t_first, t_second) = (-t_first, -t_second);
        let j = fd_jacobian(&disp, &u, opts.fd_step)? + Matrix2::identity();
        let monodromy = j.try_inverse().ok_or(Error::Degenerate)?;
        check_crossing(sys, &p0, &p1)?;
        return Ok(CrossingCycle { p0, p1, t_first, t_second, first, residual: r.norm(), monodromy, iterations });
    }
    if t_first < 0.0 || t_second < 0.0 {
        return Err(Error::Domain("half-return arcs have inconsistent time directions".into()));
    }
    check_crossing(sys, &p0, &p1)?;
    let monodromy = fd_jacobian(&disp, &u, opts.fd_step)? + Matrix2::identity();
    Ok(CrossingCycle { p0, p1, t_first, t_second, first, residual: r.norm(), monodromy, iterations })
}

fn check_crossing(sys: &FilippovSystem, p0: &V3, p1: &V3) -> Result<()> {
    for p in [p0, p1] {
        if sys.classify_region(p)? != RegionTag::Crossing {
            return Err(Error::Domain(format!("cycle point {:?} is not in the crossing region", p.as_slice())));
        }
    }
    Ok(())
}

/// Closed orbit through a visible fold point of one field.
#[derive(Clone, Debug)]
pub struct Polycycle {
    /// Point on the fold curve of `fold_side`.
    pub fold_point: V3,
    /// Other intersection with the manifold.
    pub crossing_point: V3,
    pub fold_side: Side,
    pub residual: f64,
}

/// Point on the tangency curve of `side` obtained by projecting `p` along the gradient of `Ff`.
fn project_to_fold(sys: &FilippovSystem, side: Side, p: &V3) -> Result<V3> {
    let mut q = sys.switching.project(p);
    for _ in 0..50 {
        let h = sys.ff(side, &q);
        let g = sys.lie_gradient(side, &q, 1)?;
        let n = sys.switching.normal;
        let gt = g - n * g.dot(&n);
        let gn = gt.norm_squared();
        if gn == 0.0 {
            return Err(Error::Degenerate);
        }
        q -= gt * (h / gn);
        if h.abs() < 1e-15 * (1.0 + q.norm()) {
            break;
        }
    }
    Ok(q)
}

/// Finds a polycycle through a visible fold of `fold_side` near `seed`.
///
/// The unknown is the arclength coordinate along the fold curve; the two
/// closing residuals are minimized by Gauss-Newton and must vanish.
pub fn polycycle(sys: &FilippovSystem, seed: &V3, fold_side: Side, opts: &CycleOptions) -> Result<Polycycle> {
    let base = project_to_fold(sys, fold_side, seed)?;
    let n = sys.switching.normal;
    let g = sys.lie_gradient(fold_side, &base, 1)?;
    let gt = g - n * g.dot(&n);
    let tangent = n.cross(&gt).normalize();
    let point_at = |s: f64| project_to_fold(sys, fold_side, &(base + tangent * s));
    let resid = |s: f64| -> Result<(V3, V3, V3)> {
        let q = point_at(s)?;
        if fold_side.sign() * sys.lie_derivative(fold_side, &q, 2)? <= 0.0 {
            return Err(Error::Domain("fold is not visible".into()));
        }
        let (p, back, _, _) = return_map(sys, &q, fold_side, &opts.integrator)?;
        Ok((q, p, back - q))
    };
    let mut s = 0.0;
    let (mut q, mut p, mut r) = resid(s)?;
    for _ in 0..opts.max_iter {
        if r.norm() < opts.tol * (1.0 + q.norm()) {
            break;
        }
        let h = opts.fd_step * (1.0 + s.abs());
        let d = (resid(s + h)?.2 - resid(s - h)?.2) / (2.0 * h);
        let dd = d.norm_squared();
        if dd == 0.0 {
            return Err(Error::Degenerate);
        }
        let step = -d.dot(&r) / dd;
        s += step;
        (q, p, r) = resid(s)?;
        if step.abs() < 1e-15 * (1.0 + s.abs()) {
            break;
        }
    }
    if r.norm() > 1e-8 * (1.0 + q.norm()) {
        return Err(Error::NoConvergence(format!("polycycle: closing residual {:.3e}", r.norm())));
    }
    Ok(Polycycle { fold_point: q, crossing_point: p, fold_side, residual: r.norm() })
}
