//! Filippov systems `Z = (X, Y)` on `R^3` with a planar switching manifold.
//!
//! `X` governs `f > 0` and `Y` governs `f < 0`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::normal_form::NormalFormSystem;
use crate::poly::{Poly3, PolyField};

pub type V3 = Vector3<f64>;
type EvalFn = Arc<dyn Fn(&V3) -> V3 + Send + Sync>;
type JacFn = Arc<dyn Fn(&V3) -> Matrix3<f64> + Send + Sync>;

#[derive(Clone)]
enum FieldRepr {
    Polynomial(PolyField),
    Custom { eval: EvalFn, jac: JacFn },
}

/// A smooth vector field with an analytic Jacobian.
#[derive(Clone)]
pub struct SmoothField {
    repr: FieldRepr,
}

impl fmt::Debug for SmoothField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            FieldRepr::Polynomial(p) => f.debug_tuple("SmoothField::Polynomial").field(p).finish(),
            FieldRepr::Custom { .. } => f.write_str("SmoothField::Custom"),
        }
    }
}

impl SmoothField {
    pub fn polynomial(field: PolyField) -> Self {
        Self { repr: FieldRepr::Polynomial(field) }
    }

    pub fn affine(a: &Matrix3<f64>, b: &V3) -> Self {
        Self::polynomial(PolyField::affine(a, b))
    }

    pub fn custom<E, J>(eval: E, jac: J) -> Self
    where
        E: Fn(&V3) -> V3 + Send + Sync + 'static,
        J: Fn(&V3) -> Matrix3<f64> + Send + Sync + 'static,
    {
        Self { repr: FieldRepr::Custom { eval: Arc::new(eval), jac: Arc::new(jac) } }
    }

    #[inline]
    pub fn eval(&self, p: &V3) -> V3 {
        match &self.repr {
            FieldRepr::Polynomial(f) => f.eval(p),
            FieldRepr::Custom { eval, .. } => eval(p),
        }
    }

    pub fn jacobian(&self, p: &V3) -> Matrix3<f64> {
        match &self.repr {
            FieldRepr::Polynomial(f) => f.jacobian(p),
            FieldRepr::Custom { jac, .. } => jac(p),
        }
    }

    pub fn as_polynomial(&self) -> Option<&PolyField> {
        match &self.repr {
            FieldRepr::Polynomial(f) => Some(f),
            FieldRepr::Custom { .. } => None,
        }
    }

    /// The field `-F`, i.e. the same orbits in reversed time.
    pub fn negated(&self) -> Self {
        match &self.repr {
            FieldRepr::Polynomial(f) => Self::polynomial(f.scale(-1.0)),
            FieldRepr::Custom { eval, jac } => {
                let (e, j) = (eval.clone(), jac.clone());
                Self::custom(move |p| -e(p), move |p| -j(p))
            }
        }
    }
}

/// Affine switching function `f(p) = n . p + d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Switching {
    pub normal: V3,
    pub offset: f64,
}

impl Default for Switching {
    fn default() -> Self {
        Self::z()
    }
}

impl Switching {
    /// `f(x, y, z) = z`.
    pub fn z() -> Self {
        Self { normal: V3::new(0.0, 0.0, 1.0), offset: 0.0 }
    }

    pub fn new(normal: V3, offset: f64) -> Result<Self> {
        if !(normal.norm() > 0.0) || !offset.is_finite() {
            return Err(Error::InvalidInput("switching normal must be nonzero".into()));
        }
        Ok(Self { normal, offset })
    }

    #[inline]
    pub fn eval(&self, p: &V3) -> f64 {
        self.normal.dot(p) + self.offset
    }

    pub fn negated(&self) -> Self {
        Self { normal: -self.normal, offset: -self.offset }
    }

    pub fn as_poly(&self) -> Poly3 {
        Poly3::from_terms([
            ([0, 0, 0], self.offset),
            ([1, 0, 0], self.normal.x),
            ([0, 1, 0], self.normal.y),
            ([0, 0, 1], self.normal.z),
        ])
    }

    /// Orthogonal projection onto the plane `f = 0`.
    pub fn project(&self, p: &V3) -> V3 {
        p - self.normal * (self.eval(p) / self.normal.norm_squared())
    }

    /// A chart of the plane. For `f = +-z` it is `(u, v) -> (u, v, 0)`.
    pub fn chart(&self) -> PlaneChart {
        let n = self.normal.normalize();
        let origin = self.project(&V3::zeros());
        if n.x == 0.0 && n.y == 0.0 {
            return PlaneChart { origin, e1: V3::x(), e2: V3::y() };
        }
        let seed = if n.x.abs() < 0.9 { V3::x() } else { V3::y() };
        let e1 = (seed - n * n.dot(&seed)).normalize();
        let e2 = n.cross(&e1);
        PlaneChart { origin, e1, e2 }
    }
}

/// Affine coordinates on the switching plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneChart {
    pub origin: V3,
    pub e1: V3,
    pub e2: V3,
}

impl PlaneChart {
    pub fn point(&self, u: &Vector2<f64>) -> V3 {
        self.origin + self.e1 * u.x + self.e2 * u.y
    }

    pub fn coords(&self, p: &V3) -> Vector2<f64> {
        let d = p - self.origin;
        Vector2::new(d.dot(&self.e1), d.dot(&self.e2))
    }
}

/// Side of the switching manifold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Side {
    /// `f > 0`, governed by `X`.
    Above,
    /// `f < 0`, governed by `Y`.
    Below,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Above => 1.0,
            Side::Below => -1.0,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Side::Above => Side::Below,
            Side::Below => Side::Above,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Points with `|f| < sigma (1 + |p|)` are on the manifold.
    pub sigma: f64,
    /// `F` is tangent when `|Ff| < tangency (1 + |F(p)|)`.
    pub tangency: f64,
    /// Threshold on the cross product deciding `S_X` transverse to `S_Y`.
    pub transversal: f64,
    /// Relative threshold for the cusp determinant.
    pub determinant: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { sigma: 1e-9, tangency: 1e-9, transversal: 1e-8, determinant: 1e-9 }
    }
}

#[derive(Clone, Debug)]
pub struct FilippovSystem {
    pub x: SmoothField,
    pub y: SmoothField,
    pub switching: Switching,
    pub tol: Tolerances,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum RegionTag {
    Crossing,
    Sliding,
    Escaping,
    TangencyX,
    TangencyY,
    DoubleTangency,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum TangencyTag {
    Regular,
    Fold,
    Cusp,
    FoldFoldVV,
    FoldFoldVI,
    FoldFoldIV,
    TSingularity,
    CuspFold,
    FoldCusp,
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum TangentSide {
    Neither,
    X,
    Y,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Contact {
    Fold { visible: bool },
    Cusp,
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TangencyClass {
    pub tag: TangencyTag,
    pub side: TangentSide,
    /// `S_X` transverse to `S_Y` at the point; meaningful for double tangencies.
    pub transversal: bool,
    pub x_contact: Option<Contact>,
    pub y_contact: Option<Contact>,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub enum CuspFoldDegree {
    NotCuspFold,
    Degree1,
    Degree2 { index: f64 },
}

impl FilippovSystem {
    pub fn new(x: SmoothField, y: SmoothField) -> Self {
        Self { x, y, switching: Switching::z(), tol: Tolerances::default() }
    }

    pub fn with_switching(mut self, s: Switching) -> Self {
        self.switching = s;
        self
    }

    pub fn field(&self, side: Side) -> &SmoothField {
        match side {
            Side::Above => &self.x,
            Side::Below => &self.y,
        }
    }

    /// The system `(Y, X, -f)`, which describes the same dynamics.
    pub fn swapped(&self) -> Self {
        Self {
            x: self.y.clone(),
            y: self.x.clone(),
            switching: self.switching.negated(),
            tol: self.tol,
        }
    }

    pub fn f(&self, p: &V3) -> f64 {
        self.switching.eval(p)
    }

    pub fn on_sigma(&self, p: &V3) -> bool {
        self.f(p).abs() < self.tol.sigma * (1.0 + p.norm())
    }

    /// `Ff(p)` for the field of the given side.
    #[inline]
    pub fn ff(&self, side: Side, p: &V3) -> f64 {
        self.switching.normal.dot(&self.field(side).eval(p))
    }

    pub fn is_tangent(&self, side: Side, p: &V3) -> bool {
        let v = self.field(side).eval(p);
        self.switching.normal.dot(&v).abs() < self.tol.tangency * (1.0 + v.norm())
    }

    /// `F^n f(p)` for `n` in `0..=3`, exact for polynomial fields.
    pub fn lie_derivative(&self, side: Side, p: &V3, order: u32) -> Result<f64> {
        let field = self.field(side);
        if let Some(poly) = field.as_polynomial() {
            let mut h = self.switching.as_poly();
            for _ in 0..order {
                h = h.lie_derivative(poly);
            }
            return Ok(h.eval(p));
        }
        match order {
            0 => Ok(self.f(p)),
            1 => Ok(self.ff(side, p)),
            2 => Ok(self.second_numeric(side, p)),
            3 => Ok(self.lie_gradient(side, p, 2)?.dot(&field.eval(p))),
            n => Err(Error::OrderUnsupported(n)),
        }
    }

    fn second_numeric(&self, side: Side, q: &V3) -> f64 {
        let field = self.field(side);
        let n = self.switching.normal;
        (field.jacobian(q).transpose() * n).dot(&field.eval(q))
    }

    /// Gradient of `F^n f` for `n` in `0..=2`.
    pub fn lie_gradient(&self, side: Side, p: &V3, order: u32) -> Result<V3> {
        let field = self.field(side);
        if let Some(poly) = field.as_polynomial() {
            let mut h = self.switching.as_poly();
            for _ in 0..order {
                h = h.lie_derivative(poly);
            }
            let g = h.gradient();
            return Ok(V3::new(g[0].eval(p), g[1].eval(p), g[2].eval(p)));
        }
        match order {
            0 => Ok(self.switching.normal),
            1 => Ok(field.jacobian(p).transpose() * self.switching.normal),
            2 => {
                let h = 1e-5 * (1.0 + p.norm());
                let mut g = V3::zeros();
                for i in 0..3 {
                    let mut e = V3::zeros();
                    e[i] = h;
                    g[i] = (self.second_numeric(side, &(p + e)) - self.second_numeric(side, &(p - e)))
                        / (2.0 * h);
                }
                Ok(g)
            }
            n => Err(Error::OrderUnsupported(n)),
        }
    }

    /// `G(F f)(p)`, the derivative of `Ff` along the field of `outer`.
    pub fn mixed_lie_derivative(&self, outer: Side, inner: Side, p: &V3) -> Result<f64> {
        Ok(self.lie_gradient(inner, p, 1)?.dot(&self.field(outer).eval(p)))
    }

    pub fn classify_region(&self, p: &V3) -> Result<RegionTag> {
        if !self.on_sigma(p) {
            return Err(Error::NotOnSigma(self.f(p)));
        }
        let tx = self.is_tangent(Side::Above, p);
        let ty = self.is_tangent(Side::Below, p);
        Ok(match (tx, ty) {
            (true, true) => RegionTag::DoubleTangency,
            (true, false) => RegionTag::TangencyX,
            (false, true) => RegionTag::TangencyY,
            (false, false) => {
                let (xf, yf) = (self.ff(Side::Above, p), self.ff(Side::Below, p));
                if xf * yf > 0.0 {
                    RegionTag::Crossing
                } else if xf < 0.0 {
                    RegionTag::Sliding
                } else {
                    RegionTag::Escaping
                }
            }
        })
    }

    /// Sliding vector field; with `normalized` the numerator `Yf X - Xf Y` alone.
    pub fn sliding_vector(&self, p: &V3, normalized: bool) -> Result<V3> {
        let region = self.classify_region(p)?;
        let (xv, yv) = (self.x.eval(p), self.y.eval(p));
        let n = self.switching.normal;
        let (xf, yf) = (n.dot(&xv), n.dot(&yv));
        let num = xv * yf - yv * xf;
        if normalized {
            return Ok(num);
        }
        if region == RegionTag::Crossing {
            return Err(Error::NotSlidingRegion);
        }
        let den = yf - xf;
        if den.abs() < self.tol.tangency * (1.0 + xv.norm() + yv.norm()) {
            return Err(Error::DenominatorVanishes);
        }
        Ok(num / den)
    }

    fn contact(&self, side: Side, p: &V3) -> Result<Option<Contact>> {
        if !self.is_tangent(side, p) {
            return Ok(None);
        }
        let v = self.field(side).eval(p);
        let scale = self.tol.tangency * (1.0 + v.norm());
        let d2 = self.lie_derivative(side, p, 2)?;
        if d2.abs() >= scale {
            let visible = side.sign() * d2 > 0.0;
            return Ok(Some(Contact::Fold { visible }));
        }
        let d3 = self.lie_derivative(side, p, 3)?;
        if d3.abs() < scale {
            return Err(Error::Degenerate);
        }
        let g0 = self.switching.normal;
        let g1 = self.lie_gradient(side, p, 1)?;
        let g2 = self.lie_gradient(side, p, 2)?;
        let det = Matrix3::from_columns(&[g0, g1, g2]).determinant();
        let mag = (g0.norm() * g1.norm() * g2.norm()).max(1.0);
        Ok(Some(if det.abs() > self.tol.determinant * mag {
            Contact::Cusp
        } else {
            Contact::Degenerate
        }))
    }

    /// Whether `S_X` and `S_Y` cross transversally inside the plane at `p`.
    pub fn tangency_sets_transversal(&self, p: &V3) -> Result<bool> {
        let gx = self.lie_gradient(Side::Above, p, 1)?;
        let gy = self.lie_gradient(Side::Below, p, 1)?;
        let cross = gx.cross(&gy).dot(&self.switching.normal.normalize());
        Ok(cross.abs() > self.tol.transversal)
    }

    pub fn classify_tangency(&self, p: &V3) -> Result<TangencyClass> {
        if !self.on_sigma(p) {
            return Err(Error::NotOnSigma(self.f(p)));
        }
        let cx = self.contact(Side::Above, p)?;
        let cy = self.contact(Side::Below, p)?;
        let side = match (cx.is_some(), cy.is_some()) {
            (false, false) => TangentSide::Neither,
            (true, false) => TangentSide::X,
            (false, true) => TangentSide::Y,
            (true, true) => TangentSide::Both,
        };
        let transversal = side == TangentSide::Both && self.tangency_sets_transversal(p)?;
        use Contact::*;
        let tag = match (cx, cy) {
            (None, None) => TangencyTag::Regular,
            (Some(Fold { .. }), None) | (None, Some(Fold { .. })) => TangencyTag::Fold,
            (Some(Cusp), None) | (None, Some(Cusp)) => TangencyTag::Cusp,
            (Some(Fold { visible: vx }), Some(Fold { visible: vy })) => match (vx, vy) {
                (true, true) => TangencyTag::FoldFoldVV,
                (true, false) => TangencyTag::FoldFoldVI,
                (false, true) => TangencyTag::FoldFoldIV,
                (false, false) => TangencyTag::TSingularity,
            },
            (Some(Cusp), Some(Fold { .. })) => TangencyTag::CuspFold,
            (Some(Fold { .. }), Some(Cusp)) => TangencyTag::FoldCusp,
            _ => TangencyTag::Degenerate,
        };
        Ok(TangencyClass { tag, side, transversal, x_contact: cx, y_contact: cy })
    }

    /// Degree of a cusp-fold whose `Y` fold is invisible.
    ///
    /// Degree 2 needs the normal-form coefficients; when `nf` is absent the
    /// system itself is recast if it already has the normal-form shape.
    pub fn cuspfold_degree(&self, p: &V3, nf: Option<&NormalFormSystem>) -> Result<CuspFoldDegree> {
        let tc = self.classify_tangency(p)?;
        if tc.tag != TangencyTag::CuspFold || tc.y_contact != Some(Contact::Fold { visible: false }) {
            return Ok(CuspFoldDegree::NotCuspFold);
        }
        let yxf = self.mixed_lie_derivative(Side::Below, Side::Above, p)?;
        let scale = self.tol.tangency * (1.0 + self.y.eval(p).norm());
        if yxf.abs() >= scale {
            return Ok(if tc.transversal { CuspFoldDegree::Degree1 } else { CuspFoldDegree::NotCuspFold });
        }
        let owned;
        let nf = match nf {
            Some(nf) => nf,
            None => {
                owned = NormalFormSystem::from_filippov(self, p)?;
                &owned
            }
        };
        let index = crate::normal_form::cuspfold_index(nf)?;
        Ok(CuspFoldDegree::Degree2 { index })
    }

    /// Parses the JSON system format.
    ///
    /// ```json
    /// {"switching": "z", "params": {"a": 0.5},
    ///  "X": {"poly": [[0,0,0, 1,"a",0], [1,0,0, 0,1,0], [0,1,0, 0,0,-1]]},
    ///  "Y": {"poly": [[0,0,0, -1,-1,0], [1,0,0, 0,0,-1]]}}
    /// ```
    ///
    /// Coefficients are numbers or parameter names, optionally prefixed by `-`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("JSON: {e}")))?;
        Self::from_json_value(&v)
    }

    pub fn from_json_value(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::InvalidInput("system must be a JSON object".into()))?;
        let switching = match obj.get("switching").and_then(Value::as_str).unwrap_or("z") {
            "z" => Switching::z(),
            "-z" => Switching::z().negated(),
            other => return Err(Error::InvalidInput(format!("unsupported switching function {other:?}"))),
        };
        let params = obj.get("params").and_then(Value::as_object);
        let coef = |c: &Value| -> Result<f64> {
            let x = match c {
                Value::Number(n) => n.as_f64(),
                Value::String(s) => {
                    let (sign, name) = match s.strip_prefix('-') {
                        Some(rest) => (-1.0, rest),
                        None => (1.0, s.as_str()),
                    };
                    params.and_then(|p| p.get(name)).and_then(Value::as_f64).map(|x| sign * x)
                }
                _ => None,
            };
            match x {
                Some(x) if x.is_finite() => Ok(x),
                _ => Err(Error::InvalidInput(format!("invalid coefficient {c}"))),
            }
        };
        let field = |key: &str| -> Result<SmoothField> {
            let rows = obj
                .get(key)
                .and_then(|f| f.get("poly"))
                .and_then(Value::as_array)
                .ok_or_else(|| Error::InvalidInput(format!("missing {key}.poly")))?;
            let mut parsed = Vec::with_capacity(rows.len());
            for row in rows {
                let r = row
                    .as_array()
                    .filter(|r| r.len() == 6)
                    .ok_or_else(|| Error::InvalidInput(format!("{key}: rows need 6 entries, got {row}")))?;
                let mut e = [0u32; 3];
                for (i, slot) in e.iter_mut().enumerate() {
                    *slot = r[i]
                        .as_u64()
                        .and_then(|x| u32::try_from(x).ok())
                        .ok_or_else(|| Error::InvalidInput(format!("{key}: bad exponent {}", r[i])))?;
                }
                parsed.push((e, [coef(&r[3])?, coef(&r[4])?, coef(&r[5])?]));
            }
            Ok(SmoothField::polynomial(PolyField::from_rows(&parsed)))
        };
        Ok(Self::new(field("X")?, field("Y")?).with_switching(switching))
    }
}
