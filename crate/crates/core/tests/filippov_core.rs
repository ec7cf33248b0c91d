use filippov_lab::filippov::{
    Contact, CuspFoldDegree, RegionTag, SmoothField, TangencyTag, TangentSide, V3,
};
use filippov_lab::normal_form::NormalFormSystem;
use filippov_lab::poly::PolyField;
use filippov_lab::toy_model::ToyParams;
use filippov_lab::{Error, FilippovSystem, Side};
use proptest::prelude::*;

fn nf_x_only() -> FilippovSystem {
    // X = (-1, -x, y) above, Y = (1, 0, x) below.
    let x = PolyField::from_rows(&[([0, 0, 0], [-1.0, 0.0, 0.0]), ([1, 0, 0], [0.0, -1.0, 0.0]), ([0, 1, 0], [0.0, 0.0, 1.0])]);
    let y = PolyField::from_rows(&[([0, 0, 0], [1.0, 0.0, 0.0]), ([1, 0, 0], [0.0, 0.0, 1.0])]);
    FilippovSystem::new(SmoothField::polynomial(x), SmoothField::polynomial(y))
}

#[test]
fn lie_derivatives_of_cusp_field() {
    let s = nf_x_only();
    let o = V3::zeros();
    assert_eq!(s.lie_derivative(Side::Above, &o, 1).unwrap(), 0.0);
    assert_eq!(s.lie_derivative(Side::Above, &o, 2).unwrap(), 0.0);
    assert_eq!(s.lie_derivative(Side::Above, &o, 3).unwrap(), 1.0);
    // Xf = y, X^2 f = -x, X^3 f = 1 at a generic point.
    let p = V3::new(0.3, -0.7, 0.0);
    assert_eq!(s.lie_derivative(Side::Above, &p, 1).unwrap(), -0.7);
    assert_eq!(s.lie_derivative(Side::Above, &p, 2).unwrap(), -0.3);
}

#[test]
fn lie_derivative_order_three_matches_differences() {
    let s = nf_x_only();
    let p = V3::new(0.4, 0.2, 0.0);
    let h = 1e-4;
    let x2f = |q: &V3| s.lie_derivative(Side::Above, q, 2).unwrap();
    let v = s.x.eval(&p);
    let fd = (x2f(&(p + v * h)) - x2f(&(p - v * h))) / (2.0 * h);
    assert!((fd - s.lie_derivative(Side::Above, &p, 3).unwrap()).abs() < 1e-6);
}

#[test]
fn toy_second_derivative_on_fold_line() {
    for (beta, b) in [(1.0, -1.0 / 3.0), (0.5, 0.7), (2.0, -0.2)] {
        let s = ToyParams::new(0.2, beta, b).to_filippov();
        // S_Y is x + b y = 0.
        let p = V3::new(-b * 0.6, 0.6, 0.0);
        let d2 = s.lie_derivative(Side::Below, &p, 2).unwrap();
        assert!((d2 - (1.0 + b * beta)).abs() < 1e-14);
    }
}

#[test]
fn regions_of_simple_systems() {
    let s = nf_x_only();
    assert_eq!(s.classify_region(&V3::new(1.0, 1.0, 0.0)).unwrap(), RegionTag::Crossing);
    let toy = ToyParams::new(0.0, 1.0, -1.0 / 3.0).to_filippov();
    assert_eq!(toy.classify_region(&V3::new(1.0, -1.0, 0.0)).unwrap(), RegionTag::Escaping);
    assert_eq!(toy.classify_region(&V3::new(-1.0, 1.0, 0.0)).unwrap(), RegionTag::Sliding);
    assert_eq!(toy.classify_region(&V3::new(1.0, 0.0, 0.0)).unwrap(), RegionTag::TangencyX);
    assert!(matches!(toy.classify_region(&V3::new(0.0, 0.0, 0.5)), Err(Error::NotOnSigma(_))));
}

#[test]
fn sliding_vectors_of_toy() {
    let toy = ToyParams::new(0.0, 1.0, -1.0 / 3.0).to_filippov();
    let p = V3::new(-1.0, 1.0, 0.0);
    let n = toy.sliding_vector(&p, true).unwrap();
    assert!((n - V3::new(1.0 / 3.0, -7.0 / 3.0, 0.0)).amax() < 1e-15);
    let f = toy.sliding_vector(&p, false).unwrap();
    assert!((f - V3::new(1.0 / 7.0, -1.0, 0.0)).amax() < 1e-15);
    assert_eq!(toy.sliding_vector(&V3::new(1.0, 1.0, 0.0), false), Err(Error::NotSlidingRegion));
}

#[test]
fn sliding_vector_on_fold_of_x() {
    let toy = ToyParams::new(0.0, 1.0, -1.0 / 3.0).to_filippov();
    let p = V3::new(-2.0, 0.0, 0.0);
    let n = toy.sliding_vector(&p, true).unwrap();
    let expect = toy.x.eval(&p) * toy.ff(Side::Below, &p);
    assert!((n - expect).amax() < 1e-15);
}

#[test]
fn normal_form_origin_is_cusp_fold() {
    let mut nf = NormalFormSystem::new(0.0);
    nf.set(0, [0, 0, 0], 1.0).set(2, [1, 0, 0], 1.0).set(2, [0, 1, 0], 0.4);
    let s = nf.to_filippov();
    let c = s.classify_tangency(&V3::zeros()).unwrap();
    assert_eq!(c.tag, TangencyTag::CuspFold);
    assert_eq!(c.x_contact, Some(Contact::Cusp));
    assert_eq!(c.y_contact, Some(Contact::Fold { visible: false }));
    assert!(c.transversal);
    assert!(matches!(s.cuspfold_degree(&V3::zeros(), None).unwrap(), CuspFoldDegree::Degree2 { .. }));
    nf.set(1, [0, 0, 0], 0.1);
    assert_eq!(nf.to_filippov().cuspfold_degree(&V3::zeros(), None).unwrap(), CuspFoldDegree::Degree1);
}

#[test]
fn toy_cusp_point_and_t_singularity() {
    let alpha = 0.4;
    let s = ToyParams::new(alpha, 1.0, -1.0 / 3.0).to_filippov();
    let q = V3::new(-alpha, 0.0, 0.0);
    assert_eq!(s.lie_derivative(Side::Above, &q, 3).unwrap(), -1.0);
    let c = s.classify_tangency(&q).unwrap();
    assert_eq!(c.x_contact, Some(Contact::Cusp));
    assert_eq!(c.side, TangentSide::X);
    assert_eq!(s.classify_tangency(&V3::zeros()).unwrap().tag, TangencyTag::TSingularity);
}

#[test]
fn toy_degrees() {
    for b in [-1.0, -1.0 / 3.0, 0.5] {
        let s = ToyParams::new(0.0, 0.0, b).to_filippov();
        match s.cuspfold_degree(&V3::zeros(), None).unwrap() {
            CuspFoldDegree::Degree2 { index } => assert!((index + 4.0 * b / 3.0).abs() < 1e-12),
            other => panic!("expected degree 2, got {other:?}"),
        }
    }
    let s = ToyParams::new(0.0, 0.3, -1.0 / 3.0).to_filippov();
    assert_eq!(s.cuspfold_degree(&V3::zeros(), None).unwrap(), CuspFoldDegree::Degree1);
}

#[test]
fn index_requires_normal_form_shape() {
    // The toy system shifted along x is a cusp-fold away from the origin.
    let s = ToyParams::new(0.0, 0.0, -1.0 / 3.0).to_filippov();
    let shift = V3::new(1.0, 0.0, 0.0);
    let (sx, sy) = (s.x.clone(), s.y.clone());
    let (sx2, sy2) = (s.x.clone(), s.y.clone());
    let moved = FilippovSystem::new(
        SmoothField::custom(move |p| sx.eval(&(p - shift)), move |p| sx2.jacobian(&(p - shift))),
        SmoothField::custom(move |p| sy.eval(&(p - shift)), move |p| sy2.jacobian(&(p - shift))),
    );
    assert_eq!(moved.cuspfold_degree(&shift, None), Err(Error::RequiresNormalForm));
}

fn random_poly_field(c: &[f64]) -> PolyField {
    let mut rows = Vec::new();
    let mut k = 0;
    for i in 0..=2u32 {
        for j in 0..=(2 - i) {
            for l in 0..=(2 - i - j) {
                rows.push(([i, j, l], [c[k], c[k + 1], c[k + 2]]));
                k += 3;
            }
        }
    }
    PolyField::from_rows(&rows)
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn region_invariant_under_positive_rescaling(cx in coeffs(), cy in coeffs(), lx in 0.1..10.0f64, ly in 0.1..10.0f64,
                                                  x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let (fx, fy) = (random_poly_field(&cx), random_poly_field(&cy));
        let s = FilippovSystem::new(SmoothField::polynomial(fx.clone()), SmoothField::polynomial(fy.clone()));
        let r = FilippovSystem::new(SmoothField::polynomial(fx.scale(lx)), SmoothField::polynomial(fy.scale(ly)));
        let p = V3::new(x, y, 0.0);
        let (a, b) = (s.classify_region(&p).unwrap(), r.classify_region(&p).unwrap());
        let tangent = |t: RegionTag| !matches!(t, RegionTag::Crossing | RegionTag::Sliding | RegionTag::Escaping);
        if !tangent(a) && !tangent(b) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn sliding_vector_is_tangent(cx in coeffs(), cy in coeffs(), x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let s = FilippovSystem::new(SmoothField::polynomial(random_poly_field(&cx)), SmoothField::polynomial(random_poly_field(&cy)));
        let p = V3::new(x, y, 0.0);
        let region = s.classify_region(&p).unwrap();
        prop_assume!(matches!(region, RegionTag::Sliding | RegionTag::Escaping));
        if let Ok(v) = s.sliding_vector(&p, false) {
            prop_assert!(v.z.abs() < 1e-10 * (1.0 + v.norm()));
            let n = s.sliding_vector(&p, true).unwrap();
            let scale = s.ff(Side::Below, &p) - s.ff(Side::Above, &p);
            prop_assert!((n - v * scale).amax() < 1e-12 * (1.0 + n.norm()));
        }
    }

    #[test]
    fn exact_lie_derivatives_match_differences(cx in coeffs(), x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let fx = random_poly_field(&cx);
        let (f1, f2) = (fx.clone(), fx.clone());
        let poly = FilippovSystem::new(SmoothField::polynomial(fx.clone()), SmoothField::polynomial(fx));
        let custom = FilippovSystem::new(
            SmoothField::custom(move |p| f1.eval(p), move |p| f2.jacobian(p)),
            SmoothField::polynomial(PolyField::from_rows(&[([0, 0, 0], [0.0, 0.0, 1.0])])),
        );
        let p = V3::new(x, y, 0.0);
        for order in 1..=3 {
            let a = poly.lie_derivative(Side::Above, &p, order).unwrap();
            let b = custom.lie_derivative(Side::Above, &p, order).unwrap();
            prop_assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()), "order {}: {} vs {}", order, a, b);
        }
    }

    #[test]
    fn tangency_consistent_under_side_swap(alpha in 0.05..1.0f64, beta in -1.0..1.0f64, b in -0.5..0.5f64,
                                           x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let s = ToyParams::new(alpha, beta, b).to_filippov();
        let w = s.swapped();
        let points = [V3::new(x, y, 0.0), V3::new(-alpha, 0.0, 0.0), V3::zeros(), V3::new(x, 0.0, 0.0)];
        for p in points {
            let (a, c) = (s.classify_tangency(&p), w.classify_tangency(&p));
            match (a, c) {
                (Ok(a), Ok(c)) => {
                    prop_assert_eq!(a.x_contact, c.y_contact);
                    prop_assert_eq!(a.y_contact, c.x_contact);
                    let mirrored = match a.tag {
                        TangencyTag::CuspFold => TangencyTag::FoldCusp,
                        TangencyTag::FoldCusp => TangencyTag::CuspFold,
                        TangencyTag::FoldFoldVI => TangencyTag::FoldFoldIV,
                        TangencyTag::FoldFoldIV => TangencyTag::FoldFoldVI,
                        t => t,
                    };
                    prop_assert_eq!(mirrored, c.tag);
                }
                (Err(e1), Err(e2)) => prop_assert_eq!(e1, e2),
                (a, c) => prop_assert!(false, "inconsistent: {:?} vs {:?}", a, c),
            }
        }
    }
}

#[test]
fn json_system_round_trip() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../systems/toy.json")).unwrap();
    let s = FilippovSystem::from_json_str(&text).unwrap();
    let t = ToyParams::new(0.0, 1.0, -1.0 / 3.0).to_filippov();
    for p in [V3::new(0.3, -0.2, 0.0), V3::new(-1.0, 2.0, 0.5)] {
        assert!((s.x.eval(&p) - t.x.eval(&p)).amax() < 1e-15);
        assert!((s.y.eval(&p) - t.y.eval(&p)).amax() < 1e-15);
    }
}
