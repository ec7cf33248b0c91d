//! Acceptance checks: one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use filippov_lab::boost::{self, BoostParams, ContinuationOptions, SolveOptions};
use filippov_lab::cycles::{crossing_cycle, polycycle, CycleOptions};
use filippov_lab::filippov::{RegionTag, V3};
use filippov_lab::integrator::IntegratorOptions;
use filippov_lab::normal_form::{
    cuspfold_index, degree2_controls, fit_beta_star_curvature, jets_check_trial, nonexistence_harness,
    random_degree2, trial_rng, HarnessOptions, Precision,
};
use filippov_lab::toy_model::{self, StabilityClass, ToyParams};
use filippov_lab::Side;

struct Outcome {
    ok: bool,
    detail: String,
}

fn run(id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let ok = out.ok && elapsed <= limit;
    println!(
        "{} [{id}] {name}: {} ({:.3} s, limit {} s)",
        if ok { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    ok
}

const B: f64 = -1.0 / 3.0;

fn toy_family() -> Outcome {
    let beta = 1.0;
    let opts = CycleOptions::default();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for i in 1..=11 {
        let t = 0.5 * i as f64;
        let fam = toy_model::family_formula(beta, B, t);
        let sys = ToyParams::new(fam.alpha, beta, B).to_filippov();
        let seed = fam.upper_point() * 1.1 + V3::new(0.05, -0.05, 0.0);
        match crossing_cycle(&sys, &seed, Side::Below, &opts) {
            Ok(c) => {
                let e = (c.p0 - fam.upper_point()).amax().max((c.p1 - fam.lower_point()).amax());
                worst = worst.max(e);
            }
            Err(e) => failures.push(format!("t = {t}: {e}")),
        }
    }
    Outcome {
        ok: failures.is_empty() && worst < 1e-7,
        detail: format!("11 family points, max |error| = {worst:.2e} (tol 1e-7){}", fmt_failures(&failures)),
    }
}

fn fmt_failures(f: &[String]) -> String {
    if f.is_empty() {
        String::new()
    } else {
        format!("; failures: {}", f.join("; "))
    }
}

fn toy_polycycle() -> Outcome {
    let beta = 1.0;
    let sys = ToyParams::new(0.0, beta, B).to_filippov();
    let upper = V3::new(3.0 * beta * (1.0 - B * beta), 6.0 * beta * beta, 0.0);
    let lower = V3::new(-3.0 * beta * (1.0 + B * beta), 0.0, 0.0);
    match polycycle(&sys, &V3::new(-1.8, 0.1, 0.0), Side::Above, &CycleOptions::default()) {
        Ok(p) => {
            let e = (p.fold_point - lower).amax().max((p.crossing_point - upper).amax());
            Outcome {
                ok: e < 1e-6,
                detail: format!(
                    "fold point {:?}, crossing point {:?}, max |error| = {e:.2e} (tol 1e-6)",
                    rounded(&p.fold_point),
                    rounded(&p.crossing_point)
                ),
            }
        }
        Err(e) => Outcome { ok: false, detail: format!("polycycle search failed: {e}") },
    }
}

fn rounded(p: &V3) -> [f64; 3] {
    [p.x, p.y, p.z].map(|v| (v * 1e9).round() / 1e9)
}

fn toy_stability() -> Outcome {
    let mut worst_det: f64 = 0.0;
    let mut notes = Vec::new();
    let mut ok = true;
    for (beta, b) in [(1.0, B), (0.8, -0.5)] {
        for i in 1..=25 {
            let t = 6.0 * beta * i as f64 / 26.0;
            match toy_model::return_jacobian(beta, b, t) {
                Ok(j) => worst_det = worst_det.max((j.determinant() - (1.0 - 2.0 * t / (t + 6.0 * beta))).abs()),
                Err(e) => {
                    ok = false;
                    notes.push(format!("jacobian at t = {t}: {e}"));
                }
            }
        }
        let alpha_flip = beta * (1.0 - b * beta) / 2.0;
        match toy_model::locate_flip(beta, b) {
            Ok(fp) => {
                let da = (fp.alpha - alpha_flip).abs();
                let de = (fp.eigenvalue + 1.0).abs();
                ok &= da < 1e-6 && de < 1e-7;
                notes.push(format!("beta = {beta}, b = {b}: |d alpha| = {da:.1e}, |lambda + 1| = {de:.1e}"));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("flip search failed: {e}"));
            }
        }
        let class_at = |alpha: f64| -> Option<StabilityClass> {
            let t = toy_model::family_t_of_alpha(&ToyParams::new(alpha, beta, b)).ok()?;
            toy_model::clc_stability(beta, b, t).ok().map(|s| s.class)
        };
        let above = class_at(alpha_flip + 1e-6);
        let below = class_at(alpha_flip - 1e-6);
        if above != Some(StabilityClass::StableFocusNode) || below != Some(StabilityClass::Saddle) {
            ok = false;
            notes.push(format!("classes around the flip: {above:?} above, {below:?} below"));
        }
    }
    ok &= worst_det < 1e-9;
    Outcome { ok, detail: format!("50 family points, max |det J - delta| = {worst_det:.2e} (tol 1e-9); {}", notes.join("; ")) }
}

fn jets_vs_closed_form() -> Outcome {
    let (mut lin, mut inv) = (0.0f64, 0.0f64);
    let mut errors = Vec::new();
    for trial in 0..200 {
        match jets_check_trial(2024, trial) {
            Ok(c) => {
                lin = lin.max(c.linear_residual);
                inv = inv.max(c.involution_residual);
            }
            Err(e) => errors.push(format!("draw {trial}: {e}")),
        }
    }
    Outcome {
        ok: errors.is_empty() && lin < 1e-12 && inv < 1e-10,
        detail: format!(
            "200 draws, linear part residual {lin:.2e} (tol 1e-12), involution residual {inv:.2e} (tol 1e-10){}",
            fmt_failures(&errors)
        ),
    }
}

fn toy_index() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut errors = Vec::new();
    for b in [-1.0, -0.5, -0.1, 0.1, 0.5, 1.0] {
        match cuspfold_index(&ToyParams::new(0.0, 0.0, b).to_normal_form()) {
            Ok(l) => worst = worst.max((l - (-4.0 * b / 3.0)).abs()),
            Err(e) => errors.push(format!("b = {b}: {e}")),
        }
    }
    Outcome {
        ok: errors.is_empty() && worst < 1e-9,
        detail: format!("6 values of b, max |L - (-4b/3)| = {worst:.2e} (tol 1e-9){}", fmt_failures(&errors)),
    }
}

fn curvature() -> Outcome {
    let mut ratios = Vec::new();
    let mut notes = Vec::new();
    let mut ok = true;
    for i in 0..5 {
        let mut rng = trial_rng(11, i);
        let nf = random_degree2(&mut rng, 0.2);
        match fit_beta_star_curvature(&nf, 1e-4, 1e-2, 20, Precision::DoubleDouble) {
            Ok(f) => {
                ok &= f.residual < 0.01;
                ratios.push(f.ratio);
                notes.push(format!("{:.4} (fit residual {:.1e})", f.ratio, f.residual));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("system {i}: {e}"));
            }
        }
    }
    // The toy model has its polycycle at alpha = beta (1 + 3 b beta) exactly.
    let b = B;
    let toy = ToyParams::new(0.0, 0.0, b).to_normal_form();
    let l0 = -4.0 * b / 3.0;
    let mut toy_ratio = f64::NAN;
    match fit_beta_star_curvature(&toy, 1e-4, 1e-2, 20, Precision::DoubleDouble) {
        Ok(f) => {
            let identity = f
                .samples
                .iter()
                .map(|s| (s.beta_star * (1.0 + 3.0 * b * s.beta_star) - s.c).abs() / (s.c * s.c))
                .fold(0.0, f64::max);
            ok &= identity < 1e-6 && f.residual < 0.01;
            toy_ratio = f.curvature / l0;
            notes.push(format!("toy B/(L0 alpha) = {toy_ratio:.4}, identity residual {identity:.1e}"));
        }
        Err(e) => {
            ok = false;
            notes.push(format!("toy: {e}"));
        }
    }
    let near = |r: f64, target: f64| (r / target - 1.0).abs() < 0.01;
    let verdict = if ratios.iter().all(|&r| near(r, 2.25)) && near(toy_ratio, 2.25) {
        "9/4"
    } else if ratios.iter().all(|&r| near(r, 1.5)) && near(toy_ratio, 1.5) {
        "3/2"
    } else {
        ok = false;
        "neither"
    };
    ok &= ratios.len() == 5;
    Outcome { ok, detail: format!("B/(L alpha) matches {verdict}: {}", notes.join(", ")) }
}

fn nonexistence() -> Outcome {
    let opts = HarnessOptions::default();
    let r1 = nonexistence_harness(7, 200, &opts);
    let r2 = degree2_controls(7, 50, &opts);
    Outcome {
        ok: r1.cycles_found == 0 && r1.errors.is_empty() && r2.cycles_found == 50 && r2.errors.is_empty(),
        detail: format!(
            "degree 1: {} cycles in {} systems ({} errors); degree-2 controls: {}/50 cycles ({} errors)",
            r1.cycles_found,
            r1.systems_checked,
            r1.errors.len(),
            r2.cycles_found,
            r2.errors.len()
        ),
    }
}

fn boost_anchors() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    match boost::ts_curve(6.0) {
        Ok(a) => {
            ok &= (a - 1.63128).abs() <= 1e-5;
            notes.push(format!("a_TS(6) = {a:.6}"));
        }
        Err(e) => {
            ok = false;
            notes.push(format!("a_TS(6): {e}"));
        }
    }
    let opts = ContinuationOptions::default();
    let base = BoostParams::default();
    match boost::find_polycycle(&base.with_ka(6.0, opts.anchor_seed_a), opts.anchor_seed_a, &opts.solve) {
        Ok(s) => {
            ok &= (s.a - 0.72).abs() <= 0.02;
            notes.push(format!("a_poly(6) = {:.5}", s.a));
        }
        Err(e) => {
            ok = false;
            notes.push(format!("polycycle at k = 6: {e}"));
        }
    }
    let params = base.with_ka(6.0, 1.3);
    match boost::find_clc(&params, &SolveOptions::default()) {
        Ok(s) => {
            let sys = params.to_filippov();
            let crossing = [s.p0(), s.p1()].iter().all(|p| sys.classify_region(p) == Ok(RegionTag::Crossing));
            match boost::resimulate(&params, &s, &IntegratorOptions::default()) {
                Ok((mismatch, _, _)) => {
                    ok &= crossing && mismatch < 1e-7;
                    notes.push(format!("CLC at (6, 1.3): crossing = {crossing}, re-simulation residual {mismatch:.1e}"));
                }
                Err(e) => {
                    ok = false;
                    notes.push(format!("re-simulation: {e}"));
                }
            }
        }
        Err(e) => {
            ok = false;
            notes.push(format!("CLC at (6, 1.3): {e}"));
        }
    }
    Outcome { ok, detail: notes.join("; ") }
}

fn boost_branch() -> Outcome {
    match boost::trace_polycycle_curve(&BoostParams::default(), 1.05, 8.35, 60, &ContinuationOptions::default()) {
        Ok(branch) => {
            let gaps: Vec<f64> = branch.iter().map(|p| (p.state.a - p.a_ts).abs()).collect();
            let n = gaps.len();
            let head_monotone = gaps[..10].windows(2).all(|w| w[0] < w[1]);
            let tail_monotone = gaps[n - 10..].windows(2).all(|w| w[0] > w[1]);
            let (g0, g1) = (gaps[0], gaps[n - 1]);
            Outcome {
                ok: head_monotone && tail_monotone && g0 < 0.03 && g1 < 0.03,
                detail: format!(
                    "{n} points, gap {g0:.4} at k = {:.2} and {g1:.4} at k = {:.2} (tol 0.03), monotone approach: {} / {}",
                    branch[0].k,
                    branch[n - 1].k,
                    head_monotone,
                    tail_monotone
                ),
            }
        }
        Err(e) => Outcome { ok: false, detail: format!("continuation failed: {e}") },
    }
}

fn main() -> ExitCode {
    let s = Duration::from_secs;
    let results = [
        run(1, "toy CLC family reproduced by the generic cycle solver", s(10), toy_family),
        run(2, "toy polycycle endpoints", s(5), toy_polycycle),
        run(3, "toy CLC stability and flip boundary", s(10), toy_stability),
        run(4, "series half-return map: linear part and involution", s(5), jets_vs_closed_form),
        run(5, "degree-2 index of the toy model", s(5), toy_index),
        run(6, "curvature of the polycycle curve", s(60), curvature),
        run(7, "no cycles near degree-1 cusp-folds; degree-2 controls", s(120), nonexistence),
        run(8, "boost converter anchor points", s(120), boost_anchors),
        run(9, "boost polycycle branch meets the T-singularity curve", s(600), boost_branch),
    ];
    if results.iter().all(|&r| r) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
