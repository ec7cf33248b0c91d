use filippov_lab::boost::BoostParams;
use filippov_lab::filippov::{SmoothField, V3};
use filippov_lab::integrator::{
    half_return, integrate_to_switch, simulate, slide, ArcKind, EventKind, IntegratorOptions, Termination,
};
use filippov_lab::normal_form::{pi_x, random_normal_form, trial_rng, NormalFormSystem};
use filippov_lab::poly::PolyField;
use filippov_lab::toy_model::ToyParams;
use filippov_lab::{FilippovSystem, Side};
use proptest::prelude::*;

fn opts() -> IntegratorOptions {
    IntegratorOptions::default()
}

fn constant(v: [f64; 3]) -> SmoothField {
    SmoothField::polynomial(PolyField::from_rows(&[([0, 0, 0], v)]))
}

#[test]
fn cusp_field_first_return() {
    let nf = NormalFormSystem::new(0.0);
    let mut sys = nf.to_filippov();
    sys.y = constant([0.0, 0.0, -1.0]);
    let hit = integrate_to_switch(&sys, &V3::new(2.0, 1.0, 0.0), Side::Above, 10.0, &opts()).unwrap();
    let t = (6.0 - 12f64.sqrt()) / 2.0;
    assert!((hit.flight_time - t).abs() < 1e-10);
    let q = hit.hit.unwrap();
    assert!((q - V3::new(2.0 - t, -(2.0 - t), 0.0)).amax() < 1e-10);
    assert!(q.z.abs() < 1e-12);
}

#[test]
fn equilibrium_never_hits() {
    let p = BoostParams::default();
    let sys = p.to_filippov();
    let (xm, _) = p.equilibria().unwrap();
    let r = integrate_to_switch(&sys, &xm, Side::Below, 5.0, &opts()).unwrap();
    assert!(r.hit.is_none());
    assert_eq!(r.arc.exit, EventKind::TimeLimit);
    assert!((r.arc.end() - xm).amax() < 1e-12);
}

#[test]
fn constant_field_hit() {
    let sys = FilippovSystem::new(constant([0.0, 0.0, -1.0]), constant([0.0, 0.0, 1.0]));
    let r = integrate_to_switch(&sys, &V3::new(0.0, 0.0, -1.0), Side::Below, 5.0, &opts()).unwrap();
    assert!((r.flight_time - 1.0).abs() < 1e-12);
    assert!(r.hit.unwrap().amax() < 1e-12);
}

#[test]
fn toy_half_returns() {
    let toy = ToyParams::new(0.75, 1.0, -1.0 / 3.0);
    let sys = toy.to_filippov();
    let below = half_return(&sys, &V3::new(1.75, 2.25, 0.0), Side::Below, &opts()).unwrap();
    assert!((below.point - V3::new(-1.25, -0.75, 0.0)).amax() < 1e-9);
    let above = half_return(&sys, &V3::new(-1.25, -0.75, 0.0), Side::Above, &opts()).unwrap();
    assert!((above.point - V3::new(1.75, 2.25, 0.0)).amax() < 1e-9);
    assert!((above.flight_time - 3.0).abs() < 1e-9);
}

#[test]
fn invisible_fold_point_is_its_own_return() {
    let c = 0.1;
    let sys = NormalFormSystem::new(c).to_filippov();
    let p = V3::new(0.5, 0.0, 0.0);
    let r = half_return(&sys, &p, Side::Above, &opts()).unwrap();
    let closed = pi_x(p.x, p.y, c).unwrap();
    assert_eq!(r.flight_time, 0.0);
    assert_eq!(r.point, p);
    assert!(closed.flight_time.abs() < 1e-15);
}

#[test]
fn pseudo_equilibrium_is_stationary() {
    let toy = ToyParams::new(1.5, 1.0, -1.0 / 3.0);
    let sys = toy.to_filippov();
    let pe = toy.pseudo_equilibrium().unwrap();
    let arc = slide(&sys, &pe, 5.0, &opts()).unwrap();
    assert_eq!(arc.kind, ArcKind::Sliding);
    assert!((arc.end() - pe).amax() < 1e-12);
}

#[test]
fn sliding_exits_on_tangency_line() {
    let toy = ToyParams::new(0.0, 1.0, -1.0 / 3.0);
    let sys = toy.to_filippov();
    let arc = slide(&sys, &V3::new(-1.0, 1.0, 0.0), 50.0, &opts()).unwrap();
    assert_eq!(arc.exit, EventKind::SlidingExit);
    let q = arc.end();
    let on_sx = sys.ff(Side::Above, &q).abs() < 1e-9;
    let on_sy = sys.ff(Side::Below, &q).abs() < 1e-9;
    assert!(on_sx || on_sy, "exit point {q:?}");
}

#[test]
fn escaping_in_reverse_matches_swapped_sliding() {
    // Reversing both fields turns the escaping region into a sliding region.
    let toy = ToyParams::new(0.0, 1.0, -1.0 / 3.0);
    let sys = toy.to_filippov();
    let rev = FilippovSystem::new(sys.x.negated(), sys.y.negated());
    let p = V3::new(1.0, -1.0, 0.0);
    let esc = slide(&sys, &p, 0.2, &opts()).unwrap();
    let sl = slide(&rev, &p, 0.2, &opts()).unwrap();
    assert!(esc.time_reversed);
    assert!((esc.end() - sl.end()).amax() < 1e-9);
}

#[test]
fn toy_converges_to_pseudo_equilibrium() {
    let toy = ToyParams::new(1.5, 1.0, -1.0 / 3.0);
    let sys = toy.to_filippov();
    let traj = simulate(&sys, &V3::new(1.0, 1.0, 1.0), 60.0, &opts()).unwrap();
    let pe = toy.pseudo_equilibrium().unwrap();
    assert!((traj.end() - pe).amax() < 1e-6, "end {:?}", traj.end());
}

#[test]
fn toy_orbit_approaches_stable_cycle() {
    let beta = 1.0;
    let b = -1.0 / 3.0;
    let toy = ToyParams::new(0.85, beta, b);
    let t = filippov_lab::toy_model::family_t_of_alpha(&toy).unwrap();
    let fam = filippov_lab::toy_model::clc_family(beta, b, t).unwrap();
    let sys = toy.to_filippov();
    let start = fam.upper_point() + V3::new(0.05, 0.02, 0.0);
    let traj = simulate(&sys, &start, 300.0, &opts()).unwrap();
    let hits: Vec<V3> = traj
        .events
        .iter()
        .filter(|e| e.kind == EventKind::CrossOut || e.kind == EventKind::CrossIn)
        .map(|e| V3::from(e.point))
        .collect();
    let near = |p: &V3| (p - fam.upper_point()).amax().min((p - fam.lower_point()).amax());
    let first = near(&hits[1]);
    let last = near(hits.last().unwrap());
    assert!(last < 1e-3 && last < first, "first {first:e}, last {last:e}");
}

#[test]
fn constant_fields_slide_forever() {
    let sys = FilippovSystem::new(constant([0.0, 0.0, -1.0]), constant([0.0, 0.0, 1.0]));
    let traj = simulate(&sys, &V3::new(0.0, 0.0, 1.0), 5.0, &opts()).unwrap();
    assert_eq!(traj.arcs.len(), 2);
    assert_eq!(traj.arcs[1].kind, ArcKind::Sliding);
    assert_eq!(traj.termination, Termination::TimeLimit);
    assert!(traj.end().amax() < 1e-12);
}

#[test]
fn escaping_point_stops_simulation() {
    let sys = FilippovSystem::new(constant([1.0, 0.0, 1.0]), constant([1.0, 0.0, -1.0]));
    let traj = simulate(&sys, &V3::new(0.0, 0.0, 0.0), 5.0, &opts()).unwrap();
    assert_eq!(traj.termination, Termination::NonDeterministicExit);
}

#[test]
fn sliding_into_two_fold_is_non_deterministic() {
    let toy = ToyParams::new(0.85, 1.0, -1.0 / 3.0);
    let traj = simulate(&toy.to_filippov(), &V3::new(1.0, 1.5, 0.3), 40.0, &opts()).unwrap();
    assert_eq!(traj.termination, Termination::NonDeterministicExit);
    assert_eq!(traj.arcs.last().unwrap().kind, ArcKind::Sliding);
    assert!(traj.end().amax() < 1e-9);
}

#[test]
fn arcs_join_and_times_increase() {
    let toy = ToyParams::new(0.85, 1.0, -1.0 / 3.0);
    let traj = simulate(&toy.to_filippov(), &V3::new(1.8, 2.3, 0.2), 40.0, &opts()).unwrap();
    assert!(traj.arcs.len() > 10);
    for w in traj.arcs.windows(2) {
        assert!((w[0].end() - w[1].start()).amax() < 1e-9, "{:?} -> {:?}", w[0].end(), w[1].start());
    }
    for arc in &traj.arcs {
        for s in arc.samples.windows(2) {
            assert!(s[1].0 > s[0].0, "{:?} {:?} {:?} n={}", arc.kind, s, arc.exit, arc.samples.len());
        }
        for (_, p) in &arc.samples {
            match arc.kind {
                ArcKind::Smooth(Side::Above) => assert!(p.z >= -1e-9, "{p:?}"),
                ArcKind::Smooth(Side::Below) => assert!(p.z <= 1e-9, "{p:?}"),
                ArcKind::Sliding => assert!(p.z.abs() <= 1e-9, "{p:?}"),
            }
        }
    }
    assert!(traj.events.windows(2).all(|e| e[1].t >= e[0].t), "event times");
}

#[test]
fn halving_tolerances_barely_moves_endpoint() {
    let toy = ToyParams::new(0.75, 1.0, -1.0 / 3.0);
    let sys = toy.to_filippov();
    let p = V3::new(1.75, 2.25, 0.0);
    let a = half_return(&sys, &p, Side::Below, &opts()).unwrap();
    let fine = opts().with_tolerances(0.5e-10, 0.5e-12);
    let b = half_return(&sys, &p, Side::Below, &fine).unwrap();
    assert!((a.point - b.point).amax() < 1e-8);
}

#[test]
fn normal_form_lower_return_is_involution() {
    for trial in 0..20 {
        let mut rng = trial_rng(5, trial);
        let nf = random_normal_form(&mut rng, 0.2, true);
        let sys = nf.to_filippov();
        let p = V3::new(0.03, 0.02, 0.0);
        let q = half_return(&sys, &p, Side::Below, &opts()).unwrap();
        let r = half_return(&sys, &q.point, Side::Below, &opts()).unwrap();
        assert!((r.point - p).amax() < 1e-8, "trial {trial}: {:?}", r.point);
    }
}

#[test]
fn affine_field_matches_matrix_exponential() {
    let p = BoostParams::default();
    let sys = p.to_filippov();
    let x0 = V3::new(9.0, 0.7, 0.0);
    let r = half_return(&sys, &x0, Side::Above, &opts()).unwrap();
    let (_, xp) = p.equilibria().unwrap();
    let e = filippov_lab::boost::matrix_exponential(&p.a_plus(), r.flight_time);
    let pred = xp + e * (x0 - xp);
    assert!((pred - r.point).amax() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn toy_lower_return_is_linear_map(beta in 0.1..2.0f64, b in -0.4..0.4f64, x in -2.0..2.0f64, y in -2.0..2.0f64) {
        let toy = ToyParams::new(0.3, beta, b);
        prop_assume!(toy.y_fold_curvature() > 0.2);
        // crossing into the lower side needs Yf < 0
        prop_assume!(-x - b * y < -0.05 && y < -0.05);
        let sys = toy.to_filippov();
        let r = half_return(&sys, &V3::new(x, y, 0.0), Side::Below, &opts()).unwrap();
        let m = toy.p_minus(x, y).unwrap();
        prop_assert!((r.point.x - m.x).abs() < 1e-9 && (r.point.y - m.y).abs() < 1e-9);
    }

    #[test]
    fn closed_form_upper_return_matches_integration(c in -0.2..0.2f64, u in 0.1..1.0f64, frac in -1.0..0.95f64) {
        prop_assume!(frac.abs() > 0.05);
        let x = u - c;
        let y = frac * 9.0 * u * u / 24.0;
        let sys = NormalFormSystem::new(c).to_filippov();
        let r = half_return(&sys, &V3::new(x, y, 0.0), Side::Above, &opts()).unwrap();
        let closed = pi_x(x, y, c).unwrap();
        prop_assert!((r.point.x - closed.point.x).abs() < 1e-9 && (r.point.y - closed.point.y).abs() < 1e-9);
        prop_assert!((r.flight_time - closed.flight_time).abs() < 1e-9);
    }
}
