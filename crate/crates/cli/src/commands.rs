use std::fs;
use std::path::{Path, PathBuf};

use filippov_lab::boost::{self, BoostParams, ContinuationOptions, SolveOptions};
use filippov_lab::cycles::{crossing_cycle, CycleOptions};
use filippov_lab::filippov::{Contact, CuspFoldDegree, TangencyTag, V3};
use filippov_lab::integrator::{simulate, ArcKind, IntegratorOptions};
use filippov_lab::normal_form::{
    degree2_control_trial, find_clc, fit_beta_star_curvature, jets_check_trial, nonexistence_trial, ClcOptions,
    HarnessOptions, HarnessReport, NormalFormSystem, Precision,
};
use filippov_lab::output::{fmt_csv, fmt_svg, render_svg, Curve, SvgStyle, Table};
use filippov_lab::toy_model::{self, ToyParams};
use filippov_lab::{FilippovSystem, Side};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::{Cli, CliError, Command, Format, GlobalOpts, Overrides, PrecisionArg};

type CliResult<T> = std::result::Result<T, CliError>;

struct Sink<'a> {
    global: &'a GlobalOpts,
    stem: &'static str,
}

impl Sink<'_> {
    fn wants(&self, f: Format) -> bool {
        self.global.formats.contains(&f)
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.global.out.join(format!("{}{suffix}", self.stem))
    }

    fn write(&self, format: Format, suffix: &str, contents: &str) -> CliResult<()> {
        if !self.wants(format) {
            return Ok(());
        }
        fs::create_dir_all(&self.global.out)?;
        fs::write(self.path(suffix), contents)?;
        Ok(())
    }

    fn csv(&self, table: &Table) -> CliResult<()> {
        self.write(Format::Csv, ".csv", &table.to_csv())
    }

    fn svg(&self, curves: &[Curve], style: &SvgStyle) -> CliResult<()> {
        if !self.wants(Format::Svg) {
            return Ok(());
        }
        self.write(Format::Svg, ".svg", &render_svg(curves, style)?)
    }

    fn json(&self, v: &Value) -> CliResult<()> {
        let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Domain(e.to_string()))?;
        self.write(Format::Json, ".json", &(text + "\n"))
    }
}

fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| CliError::Domain(e.to_string()))
}

fn finite(name: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be finite")))
    }
}

fn positive_count(name: &str, n: usize, min: usize) -> CliResult<usize> {
    if n >= min {
        Ok(n)
    } else {
        Err(CliError::Usage(format!("--{name} must be at least {min}")))
    }
}

fn parse_point(s: &str) -> CliResult<V3> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!("expected x,y,z, got {s:?}")));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|_| CliError::Usage(format!("bad coordinate {p:?}")))?;
        finite("point", *slot)?;
    }
    Ok(V3::from(v))
}

fn override_pairs(o: &Overrides) -> CliResult<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for item in &o.params {
        let (k, v) = item.split_once('=').ok_or_else(|| CliError::Usage(format!("--param expects NAME=VALUE, got {item:?}")))?;
        let v: f64 = v.trim().parse().map_err(|_| CliError::Usage(format!("--param {k}: bad number {v:?}")))?;
        out.push((k.trim().to_string(), finite("param", v)?));
    }
    for (k, v) in [("alpha", o.alpha), ("beta", o.beta), ("b", o.b)] {
        if let Some(v) = v {
            out.push((k.to_string(), finite(k, v)?));
        }
    }
    Ok(out)
}

fn load_system_json(path: &Path, o: &Overrides) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut v: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let pairs = override_pairs(o)?;
    if !pairs.is_empty() {
        let params = v
            .get_mut("params")
            .and_then(Value::as_object_mut)
            .ok_or_else(|| CliError::Usage("system file declares no parameters to override".into()))?;
        for (k, x) in pairs {
            match params.get_mut(&k) {
                Some(slot) => *slot = json!(x),
                None => return Err(CliError::Usage(format!("unknown parameter {k:?}"))),
            }
        }
    }
    Ok(v)
}

fn load_system(path: &Path, o: &Overrides) -> CliResult<FilippovSystem> {
    Ok(FilippovSystem::from_json_value(&load_system_json(path, o)?)?)
}

fn load_normal_form(path: &Path, o: &Overrides) -> CliResult<NormalFormSystem> {
    let sys = load_system(path, o)?;
    Ok(NormalFormSystem::from_filippov(&sys, &V3::zeros())?)
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let g = &cli.global;
    let sink = Sink { global: g, stem: cli.command.name() };
    match &cli.command {
        Command::Classify { system, point, overrides } => classify(&sink, system, point, overrides),
        Command::Simulate { system, x0, t_max, rtol, atol, overrides } => {
            simulate_cmd(&sink, system, x0, *t_max, *rtol, *atol, overrides)
        }
        Command::NfClc { system, radius, overrides } => nf_clc(&sink, system, *radius, overrides),
        Command::NfBetaStar { system, c_min, c_max, n, precision, overrides } => {
            nf_beta_star(&sink, system, *c_min, *c_max, *n, *precision, overrides)
        }
        Command::NfNonexistence { trials, controls, c_max, c_samples } => {
            nf_nonexistence(&sink, *trials, *controls, *c_max, *c_samples)
        }
        Command::JetsCheck { draws } => jets_check(&sink, *draws),
        Command::ToyBifset { b, beta_max, n } => toy_bifset(&sink, *b, *beta_max, *n),
        Command::ToyClc { alpha, beta, b } => toy_clc(&sink, *alpha, *beta, *b),
        Command::BoostTsCurve { k_min, k_max, n } => boost_ts_curve(&sink, *k_min, *k_max, *n),
        Command::BoostPolycycle { k_min, k_max, n } => boost_polycycle(&sink, *k_min, *k_max, *n),
        Command::BoostClc { k, a } => boost_clc(&sink, *k, *a),
    }
}

fn contact_label(c: Option<Contact>) -> &'static str {
    match c {
        None => "none",
        Some(Contact::Fold { visible: true }) => "visible-fold",
        Some(Contact::Fold { visible: false }) => "invisible-fold",
        Some(Contact::Cusp) => "cusp",
        Some(Contact::Degenerate) => "degenerate",
    }
}

fn classify(sink: &Sink, system: &Path, point: &str, o: &Overrides) -> CliResult<()> {
    let sys = load_system(system, o)?;
    let p = parse_point(point)?;
    let region = sys.classify_region(&p)?;
    let tc = sys.classify_tangency(&p)?;
    let line = match tc.tag {
        TangencyTag::CuspFold => match sys.cuspfold_degree(&p, None)? {
            CuspFoldDegree::Degree2 { index } => format!("CuspFold degree=2 L0={index:.4}"),
            CuspFoldDegree::Degree1 => "CuspFold degree=1".to_string(),
            CuspFoldDegree::NotCuspFold => "CuspFold".to_string(),
        },
        TangencyTag::Regular => format!("Regular region={region:?}"),
        tag => format!("{tag:?} side={:?}", tc.side),
    };
    println!("{line}");
    sink.json(&json!({
        "point": [p.x, p.y, p.z],
        "region": region,
        "tangency": tc,
        "x_contact": contact_label(tc.x_contact),
        "y_contact": contact_label(tc.y_contact),
        "summary": line,
    }))
}

fn simulate_cmd(
    sink: &Sink,
    system: &Path,
    x0: &str,
    t_max: f64,
    rtol: f64,
    atol: f64,
    o: &Overrides,
) -> CliResult<()> {
    let sys = load_system(system, o)?;
    let p0 = parse_point(x0)?;
    if !(finite("t-max", t_max)? > 0.0) {
        return Err(CliError::Usage("--t-max must be positive".into()));
    }
    if !(rtol > 0.0 && atol > 0.0) {
        return Err(CliError::Usage("tolerances must be positive".into()));
    }
    let opts = IntegratorOptions::default().with_tolerances(rtol, atol);
    let traj = simulate(&sys, &p0, t_max, &opts)?;
    let mut table = Table::new(&["arc", "kind", "t", "x", "y", "z"]);
    let mut t0 = 0.0;
    for (i, arc) in traj.arcs.iter().enumerate() {
        let kind = match arc.kind {
            ArcKind::Smooth(Side::Above) => "above",
            ArcKind::Smooth(Side::Below) => "below",
            ArcKind::Sliding => "sliding",
        };
        let start = arc.samples[0].0;
        for (t, p) in &arc.samples {
            table.push_row(vec![
                i.to_string(),
                kind.to_string(),
                fmt_csv(t0 + t - start),
                fmt_csv(p.x),
                fmt_csv(p.y),
                fmt_csv(p.z),
            ]);
        }
        t0 += arc.duration();
    }
    let end = traj.end();
    println!(
        "arcs={} events={} termination={:?} end=({:.6}, {:.6}, {:.6})",
        traj.arcs.len(),
        traj.events.len(),
        traj.termination,
        end.x,
        end.y,
        end.z
    );
    sink.csv(&table)?;
    let curves: Vec<Curve> = traj
        .arcs
        .iter()
        .map(|arc| {
            let (label, color) = match arc.kind {
                ArcKind::Smooth(Side::Above) => ("above", "#1f4e9c"),
                ArcKind::Smooth(Side::Below) => ("below", "#b22222"),
                ArcKind::Sliding => ("sliding", "#228b22"),
            };
            Curve::new(label, color, arc.samples.iter().map(|(_, p)| (p.x, p.y)).collect())
        })
        .collect();
    if !curves.is_empty() {
        let style = SvgStyle { title: "trajectory projected on (x, y)".into(), ..Default::default() };
        sink.svg(&curves, &style)?;
    }
    sink.json(&json!({"termination": traj.termination, "events": traj.events}))
}

fn nf_clc(sink: &Sink, system: &Path, radius: Option<f64>, o: &Overrides) -> CliResult<()> {
    let nf = load_normal_form(system, o)?;
    let sol = find_clc(&nf, &ClcOptions { radius, ..Default::default() })?;
    println!(
        "{:?} index={:.6} p_plus=({:.6e}, {:.6e}) p_minus=({:.6e}, {:.6e})",
        sol.kind, sol.index, sol.p_plus[0], sol.p_plus[1], sol.p_minus[0], sol.p_minus[1]
    );
    for w in &sol.warnings {
        println!("warning: {w}");
    }
    let mut table = Table::new(&["kind", "index", "x_plus", "y_plus", "x_minus", "y_minus", "flight_above", "flight_below"]);
    let f = fmt_csv;
    table.push_row(vec![
        format!("{:?}", sol.kind),
        f(sol.index),
        f(sol.p_plus[0]),
        f(sol.p_plus[1]),
        f(sol.p_minus[0]),
        f(sol.p_minus[1]),
        sol.flight_above.map_or_else(String::new, f),
        sol.flight_below.map_or_else(String::new, f),
    ]);
    sink.csv(&table)?;
    sink.json(&json!(sol))
}

fn nf_beta_star(
    sink: &Sink,
    system: &Path,
    c_min: f64,
    c_max: f64,
    n: usize,
    precision: PrecisionArg,
    o: &Overrides,
) -> CliResult<()> {
    let nf = load_normal_form(system, o)?;
    finite("c-min", c_min)?;
    finite("c-max", c_max)?;
    let prec = match precision {
        PrecisionArg::Double => Precision::Double,
        PrecisionArg::DoubleDouble => Precision::DoubleDouble,
    };
    let fit = fit_beta_star_curvature(&nf, c_min, c_max, positive_count("n", n, 3)?, prec)?;
    let verdict = if (fit.ratio - 2.25).abs() < (fit.ratio - 1.5).abs() { "9/4" } else { "3/2" };
    println!(
        "B={:.6} L={:.6} B/(L alpha)={:.6} closer to {verdict} fit_residual={:.2e}",
        fit.curvature, fit.index, fit.ratio, fit.residual
    );
    let mut table = Table::new(&["c", "beta_star", "x_star"]);
    for s in &fit.samples {
        table.push_numbers(&[s.c, s.beta_star, s.x_star]);
    }
    sink.csv(&table)?;
    let a0 = nf.alpha([0, 0, 0]);
    let curves = [
        Curve::new("beta*(c)", "#b22222", fit.samples.iter().map(|s| (s.c, s.beta_star)).collect()),
        Curve::new(
            "alpha c + B c^2",
            "#1f4e9c",
            fit.samples.iter().map(|s| (s.c, a0 * s.c + fit.curvature * s.c * s.c)).collect(),
        )
        .dashed(),
    ];
    let style = SvgStyle { x_label: "c".into(), y_label: "beta*".into(), title: "polycycle curve".into(), ..Default::default() };
    sink.svg(&curves, &style)?;
    sink.json(&json!({"fit": fit, "closer_to": verdict}))
}

fn nf_nonexistence(sink: &Sink, trials: usize, controls: usize, c_max: f64, c_samples: usize) -> CliResult<()> {
    let seed = sink.global.seed;
    let opts = HarnessOptions {
        c_samples: positive_count("c-samples", c_samples, 1)?,
        c_max: finite("c-max", c_max)?.abs(),
        ..Default::default()
    };
    let pool = pool(sink.global.jobs)?;
    let (deg1, ctrl) = pool.install(|| {
        let d: Vec<_> = (0..trials).into_par_iter().map(|t| nonexistence_trial(seed, t, &opts)).collect();
        let c: Vec<_> = (0..controls).into_par_iter().map(|t| degree2_control_trial(seed, t, &opts)).collect();
        (d, c)
    });
    let mut table = Table::new(&["group", "trial", "systems_checked", "cycles_found", "errors"]);
    for (group, outcomes) in [("degree1", &deg1), ("control", &ctrl)] {
        for (i, o) in outcomes.iter().enumerate() {
            table.push_row(vec![
                group.into(),
                i.to_string(),
                o.systems_checked.to_string(),
                o.cycles_found.to_string(),
                o.errors.len().to_string(),
            ]);
        }
    }
    let r1 = HarnessReport::from_trials(seed, trials, deg1);
    let r2 = HarnessReport::from_trials(seed, controls, ctrl);
    println!(
        "degree1: {} cycles in {} systems ({} errors); controls: {}/{} with a cycle ({} errors)",
        r1.cycles_found,
        r1.systems_checked,
        r1.errors.len(),
        r2.cycles_found,
        controls,
        r2.errors.len()
    );
    sink.csv(&table)?;
    sink.json(&json!({"degree1": r1, "controls": r2}))
}

fn jets_check(sink: &Sink, draws: usize) -> CliResult<()> {
    let seed = sink.global.seed;
    let pool = pool(sink.global.jobs)?;
    let results: Vec<_> = pool.install(|| (0..draws).into_par_iter().map(|t| jets_check_trial(seed, t)).collect());
    let checks = results.into_iter().collect::<filippov_lab::Result<Vec<_>>>()?;
    let mut table = Table::new(&["trial", "linear_residual", "involution_residual", "trace", "determinant"]);
    let (mut lin, mut inv) = (0.0f64, 0.0f64);
    for c in &checks {
        lin = lin.max(c.linear_residual);
        inv = inv.max(c.involution_residual);
        table.push_row(vec![
            c.trial.to_string(),
            fmt_csv(c.linear_residual),
            fmt_csv(c.involution_residual),
            fmt_csv(c.trace),
            fmt_csv(c.determinant),
        ]);
    }
    println!("draws={draws} max_linear_residual={lin:.3e} max_involution_residual={inv:.3e}");
    sink.csv(&table)?;
    sink.json(&json!({"seed": seed, "max_linear_residual": lin, "max_involution_residual": inv, "draws": checks}))
}

fn toy_bifset(sink: &Sink, b: f64, beta_max: f64, n: usize) -> CliResult<()> {
    finite("b", b)?;
    if !(finite("beta-max", beta_max)? > 0.0) {
        return Err(CliError::Usage("--beta-max must be positive".into()));
    }
    let n = positive_count("n", n, 2)?;
    let pool = pool(sink.global.jobs)?;
    let rows: Vec<(f64, toy_model::BifurcationCurves)> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let beta = beta_max * i as f64 / (n - 1) as f64;
                (beta, toy_model::bifurcation_curves(beta, b))
            })
            .collect()
    });
    let mut table = Table::new(&["beta", "alpha_TS", "alpha_poly", "alpha_flip"]);
    for (beta, c) in &rows {
        table.push_numbers(&[*beta, c.alpha_ts, c.alpha_poly, c.alpha_flip]);
    }
    sink.csv(&table)?;
    let pick = |f: fn(&toy_model::BifurcationCurves) -> f64| rows.iter().map(|(beta, c)| (*beta, f(c))).collect::<Vec<_>>();
    let curves = [
        Curve::new("T-singularity", "#1f4e9c", pick(|c| c.alpha_ts)),
        Curve::new("polycycle", "#b22222", pick(|c| c.alpha_poly)),
        Curve::new("flip", "#7b2d8e", pick(|c| c.alpha_flip)).dashed(),
    ];
    let beta_l = 0.75 * beta_max;
    let c = toy_model::bifurcation_curves(beta_l, b);
    let mut annotations = Vec::new();
    let (lo, hi) = (c.alpha_poly.min(c.alpha_ts), c.alpha_poly.max(c.alpha_ts));
    if c.alpha_flip > lo && c.alpha_flip < hi {
        annotations.push((beta_l, 0.5 * (c.alpha_flip + c.alpha_ts), "stable CLC".to_string()));
        annotations.push((beta_l, 0.5 * (c.alpha_flip + c.alpha_poly), "saddle CLC".to_string()));
    } else {
        annotations.push((beta_l, 0.5 * (lo + hi), "CLC".to_string()));
    }
    let mut style = SvgStyle {
        title: format!("bifurcation set, b = {}", fmt_svg(b)),
        x_label: "beta".into(),
        y_label: "alpha".into(),
        annotations,
        ..Default::default()
    };
    if b != 0.0 {
        for (v, label) in [(-1.0 / b, "-1/b"), (-1.0 / (3.0 * b), "-1/(3b)"), (-1.0 / (7.0 * b), "-1/(7b)")] {
            if v > 0.0 && v < beta_max {
                let y = toy_model::bifurcation_curves(v, b).alpha_poly;
                style.annotations.push((v, y, label.to_string()));
            }
        }
    }
    sink.svg(&curves, &style)?;
    println!("rows={n} b={b} beta_max={beta_max}");
    sink.json(&json!({"b": b, "rows": rows.iter().map(|(beta, c)| json!({"beta": beta, "curves": c})).collect::<Vec<_>>()}))
}

fn toy_clc(sink: &Sink, alpha: f64, beta: f64, b: f64) -> CliResult<()> {
    let params = ToyParams::new(finite("alpha", alpha)?, finite("beta", beta)?, finite("b", b)?);
    let t = toy_model::family_t_of_alpha(&params)?;
    let fam = toy_model::clc_family(beta, b, t)?;
    let stab = toy_model::clc_stability(beta, b, t)?;
    let sys = params.to_filippov();
    let seed = fam.upper_point() * 1.1 + V3::new(0.05, -0.05, 0.0);
    let num = crossing_cycle(&sys, &seed, Side::Below, &CycleOptions::default())?;
    let err = (num.p0 - fam.upper_point()).amax().max((num.p1 - fam.lower_point()).amax());
    println!(
        "t={t:.10} x0=({:.10}, {:.10}) x1=({:.10}, {:.10}) class={:?} det={:.10} numeric_error={err:.2e}",
        fam.x0, fam.y0, fam.x1, fam.y1, stab.class, stab.delta
    );
    let mut table =
        Table::new(&["t", "alpha", "x0", "y0", "x1", "y1", "det", "trace", "x0_numeric", "y0_numeric", "x1_numeric", "y1_numeric"]);
    table.push_numbers(&[
        t, fam.alpha, fam.x0, fam.y0, fam.x1, fam.y1, stab.delta, stab.tau, num.p0.x, num.p0.y, num.p1.x, num.p1.y,
    ]);
    sink.csv(&table)?;
    sink.json(&json!({"family": fam, "stability": stab, "numeric_error": err, "iterations": num.iterations}))
}

fn ts_grid(k_min: f64, k_max: f64, n: usize) -> CliResult<Vec<f64>> {
    finite("k-min", k_min)?;
    finite("k-max", k_max)?;
    let n = positive_count("n", n, 2)?;
    if k_min >= k_max {
        return Err(CliError::Usage("--k-min must be below --k-max".into()));
    }
    Ok((0..n).map(|i| k_min + (k_max - k_min) * i as f64 / (n - 1) as f64).collect())
}

fn ts_points(grid: &[f64], jobs: usize) -> CliResult<Vec<(f64, f64)>> {
    let pool = pool(jobs)?;
    let vals: Vec<_> = pool.install(|| grid.par_iter().map(|&k| boost::ts_curve(k).map(|a| (k, a))).collect());
    Ok(vals.into_iter().collect::<filippov_lab::Result<Vec<_>>>()?)
}

fn boost_ts_curve(sink: &Sink, k_min: f64, k_max: f64, n: usize) -> CliResult<()> {
    let grid = ts_grid(k_min, k_max, n)?;
    let pts = ts_points(&grid, sink.global.jobs)?;
    let mut table = Table::new(&["k", "a"]);
    for (k, a) in &pts {
        table.push_numbers(&[*k, *a]);
    }
    sink.csv(&table)?;
    let style = SvgStyle { x_label: "k".into(), y_label: "a".into(), title: "T-singularity curve".into(), ..Default::default() };
    sink.svg(&[Curve::new("T-singularity", "#1f4e9c", pts.clone())], &style)?;
    let (kmax, amax) = pts.iter().copied().fold((f64::NAN, f64::NEG_INFINITY), |m, p| if p.1 > m.1 { p } else { m });
    println!("points={} max a_TS={amax:.6} at k={kmax:.6}", pts.len());
    sink.json(&json!({"points": pts}))
}

fn state_row(k: f64, s: &boost::ClosingState) -> [f64; 8] {
    [k, s.a, s.x0, s.y0, s.x1, s.y1, s.tau_plus, s.tau_minus]
}

const STATE_HEADER: [&str; 8] = ["k", "a", "x0", "y0", "x1", "y1", "tau_plus", "tau_minus"];

fn boost_polycycle(sink: &Sink, k_min: f64, k_max: f64, n: usize) -> CliResult<()> {
    ts_grid(k_min, k_max, n)?;
    let branch = boost::trace_polycycle_curve(&BoostParams::default(), k_min, k_max, n, &ContinuationOptions::default())?;
    let mut table = Table::new(&STATE_HEADER);
    for p in &branch {
        table.push_numbers(&state_row(p.k, &p.state));
    }
    sink.csv(&table)?;
    let (k1, k2) = boost::k_window();
    let ts_grid_fine: Vec<f64> = (1..400).map(|i| k1 + (k2 - k1) * i as f64 / 400.0).filter(|k| (k - 625.0 / 133.0).abs() > 1e-9).collect();
    let ts = ts_points(&ts_grid_fine, sink.global.jobs)?;
    let amax = ts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let curves = [
        Curve::new("T-singularity", "#1f4e9c", ts),
        Curve::new("polycycle", "#b22222", branch.iter().map(|p| (p.k, p.state.a)).collect()),
        Curve::new("saddle-node (unverified)", "#000000", vec![(k1, amax), (k2, amax)]),
    ];
    let style = SvgStyle { x_label: "k".into(), y_label: "a".into(), title: "bifurcation set in the (k, a)-plane".into(), ..Default::default() };
    sink.svg(&curves, &style)?;
    if let (Some(first), Some(last)) = (branch.first(), branch.last()) {
        println!(
            "points={} gap at k={:.4}: {:.5}; gap at k={:.4}: {:.5}",
            branch.len(),
            first.k,
            (first.a_ts - first.state.a).abs(),
            last.k,
            (last.a_ts - last.state.a).abs()
        );
    }
    sink.json(&json!({"branch": branch}))
}

fn boost_clc(sink: &Sink, k: f64, a: f64) -> CliResult<()> {
    let params = BoostParams::default().with_ka(finite("k", k)?, finite("a", a)?);
    params.validate()?;
    let s = boost::find_clc(&params, &SolveOptions::default())?;
    let (mismatch, _, _) = boost::resimulate(&params, &s, &IntegratorOptions::default())?;
    println!(
        "x0=({:.8}, {:.8}) x1=({:.8}, {:.8}) tau_plus={:.8} tau_minus={:.8} resimulation_residual={mismatch:.2e}",
        s.x0, s.y0, s.x1, s.y1, s.tau_plus, s.tau_minus
    );
    let mut table = Table::new(&STATE_HEADER);
    table.push_numbers(&state_row(k, &s));
    sink.csv(&table)?;
    sink.json(&json!({"state": s, "resimulation_residual": mismatch}))
}

