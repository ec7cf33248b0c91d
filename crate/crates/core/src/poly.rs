//! Polynomials in (x, y, z) and polynomial vector fields.

use nalgebra::{Matrix3, Vector3};

/// Exponent triple `(i, j, k)` for the monomial `x^i y^j z^k`.
pub type Exponents = [u32; 3];

/// Sparse polynomial in three variables with sorted, merged terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly3 {
    terms: Vec<(Exponents, f64)>,
}

impl Poly3 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms(vec![([0, 0, 0], c)])
    }

    /// The coordinate function for axis 0, 1 or 2.
    pub fn coordinate(axis: usize) -> Self {
        let mut e = [0; 3];
        e[axis] = 1;
        Self::from_terms(vec![(e, 1.0)])
    }

    pub fn from_terms<I: IntoIterator<Item = (Exponents, f64)>>(terms: I) -> Self {
        let mut v: Vec<(Exponents, f64)> = terms.into_iter().collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(Exponents, f64)> = Vec::with_capacity(v.len());
        for (e, c) in v {
            match out.last_mut() {
                Some(last) if last.0 == e => last.1 += c,
                _ => out.push((e, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        Self { terms: out }
    }

    pub fn terms(&self) -> &[(Exponents, f64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, e: Exponents) -> f64 {
        self.terms
            .binary_search_by(|t| t.0.cmp(&e))
            .map(|i| self.terms[i].1)
            .unwrap_or(0.0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(e, _)| e[0] + e[1] + e[2]).max().unwrap_or(0)
    }

    pub fn eval(&self, p: &Vector3<f64>) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * p.x.powi(e[0] as i32) * p.y.powi(e[1] as i32) * p.z.powi(e[2] as i32))
            .sum()
    }

    pub fn partial(&self, axis: usize) -> Self {
        Self::from_terms(self.terms.iter().filter(|(e, _)| e[axis] > 0).map(|(e, c)| {
            let mut d = *e;
            d[axis] -= 1;
            (d, c * e[axis] as f64)
        }))
    }

    pub fn gradient(&self) -> [Poly3; 3] {
        [self.partial(0), self.partial(1), self.partial(2)]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_terms(self.terms.iter().map(|(e, c)| (*e, c * s)))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_terms(self.terms.iter().chain(other.terms.iter()).copied())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut v = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                v.push(([a[0] + b[0], a[1] + b[1], a[2] + b[2]], ca * cb));
            }
        }
        Self::from_terms(v)
    }

    /// Lie derivative `F . grad(self)` along a polynomial field.
    pub fn lie_derivative(&self, field: &PolyField) -> Self {
        let mut acc = Poly3::zero();
        for axis in 0..3 {
            let d = self.partial(axis);
            if !d.is_zero() {
                acc = acc.add(&d.mul(&field.components[axis]));
            }
        }
        acc
    }
}

/// Vector field whose components are polynomials.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolyField {
    pub components: [Poly3; 3],
}

impl PolyField {
    pub fn new(components: [Poly3; 3]) -> Self {
        Self { components }
    }

    /// Builds a field from rows `(i, j, k, cx, cy, cz)`.
    pub fn from_rows(rows: &[(Exponents, [f64; 3])]) -> Self {
        let comp = |n: usize| Poly3::from_terms(rows.iter().map(|(e, c)| (*e, c[n])));
        Self::new([comp(0), comp(1), comp(2)])
    }

    /// Affine field `A p + b`.
    pub fn affine(a: &Matrix3<f64>, b: &Vector3<f64>) -> Self {
        let comp = |r: usize| {
            Poly3::from_terms([
                ([0, 0, 0], b[r]),
                ([1, 0, 0], a[(r, 0)]),
                ([0, 1, 0], a[(r, 1)]),
                ([0, 0, 1], a[(r, 2)]),
            ])
        };
        Self::new([comp(0), comp(1), comp(2)])
    }

    pub fn eval(&self, p: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            self.components[0].eval(p),
            self.components[1].eval(p),
            self.components[2].eval(p),
        )
    }

    pub fn jacobian(&self, p: &Vector3<f64>) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.components[r].partial(c).eval(p))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.components.clone().map(|c| c.scale(s)))
    }

    pub fn degree(&self) -> u32 {
        self.components.iter().map(Poly3::degree).max().unwrap_or(0)
    }

    /// Rows `(exponents, [cx, cy, cz])` over the union of monomials.
    pub fn rows(&self) -> Vec<(Exponents, [f64; 3])> {
        let mut keys: Vec<Exponents> =
            self.components.iter().flat_map(|c| c.terms().iter().map(|t| t.0)).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|e| (e, [0, 1, 2].map(|n| self.components[n].coefficient(e))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_and_cancel() {
        let p = Poly3::from_terms([([1, 0, 0], 2.0), ([1, 0, 0], -2.0), ([0, 1, 0], 1.0)]);
        assert_eq!(p.terms().len(), 1);
        assert_eq!(p.coefficient([0, 1, 0]), 1.0);
    }

    #[test]
    fn lie_derivative_of_z_along_toy_field() {
        // X = (1, x + a, -y) with a = 0.5
        let x = PolyField::from_rows(&[
            ([0, 0, 0], [1.0, 0.5, 0.0]),
            ([1, 0, 0], [0.0, 1.0, 0.0]),
            ([0, 1, 0], [0.0, 0.0, -1.0]),
        ]);
        let f = Poly3::coordinate(2);
        let xf = f.lie_derivative(&x);
        let x2f = xf.lie_derivative(&x);
        let x3f = x2f.lie_derivative(&x);
        assert_eq!(xf, Poly3::from_terms([([0, 1, 0], -1.0)]));
        assert_eq!(x2f, Poly3::from_terms([([1, 0, 0], -1.0), ([0, 0, 0], -0.5)]));
        assert_eq!(x3f, Poly3::constant(-1.0));
    }

    #[test]
    fn jacobian_matches_affine() {
        let a = Matrix3::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.5);
        let b = Vector3::new(0.1, 0.2, 0.3);
        let f = PolyField::affine(&a, &b);
        let p = Vector3::new(0.3, -1.0, 2.0);
        assert_eq!(f.jacobian(&p), a);
        assert!((f.eval(&p) - (a * p + b)).norm() < 1e-14);
    }
}
