//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test -p driftlab --test acceptance -- C5 C8` runs a subset.

use std::process::ExitCode;
use std::time::Instant;

use driftlab::bmo::CatalogSpec;
use driftlab::cli::RunConfig;
use driftlab::geometry::cutoff::build_cutoff;
use driftlab::maximal::MaximalOptions;
use driftlab::stokes::{max_stable_tau, run, InitialData, SolutionTrajectory, StepperParams, TestFunction};
use driftlab::verify::{
    caccioppoli_reports, cz_report, default_radii, energy_report, identity_report, iteration_report,
    llogl_check_with, mazver_report, merge_reports, pressure_estimate, reverse_holder_check_with, stein_grid,
    stein_report, CylinderEnsemble, GammaMode, VerificationReport, DEFAULT_ENSEMBLE_SIZE,
};
use driftlab::Result;

const STEIN_FIELDS: usize = 100;
const STEIN_BUDGET_SECS: f64 = 600.0;
const CZ_FIELDS: usize = 100;
const SKEW_TRIPLES: usize = 100;
const SKEW_TOL: f64 = 1e-12;
const NEUTRALITY_TOL: f64 = 1e-12;
const MAZVER_TRIPLES: usize = 200;
const REFINEMENT_TOL: f64 = 0.2;
const DECAY_TOL: f64 = 1e-3;
const DECAY_GAIN: f64 = 2.0;
const IDENTITY_GAIN: f64 = 1.5;
const PRESSURE_RUNS: usize = 50;
const CACCIOPPOLI_TOL: f64 = 1.1;
const PATH_TOL: f64 = 1e-12;
const GAMMA_SPAN: f64 = 100.0;
const ITERATION_SAMPLES: usize = 33;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn rel_change(coarse: f64, fine: f64) -> f64 {
    (fine - coarse).abs() / coarse.abs()
}

fn config(points: usize, t_end: f64, steps: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    (cfg.points, cfg.t_end, cfg.steps) = (points, t_end, steps);
    cfg
}

/// Smallest step count whose `tau` passes the stability guard.
fn fit_steps(cfg: &mut RunConfig) -> Result<()> {
    let g = cfg.grid_at(1)?;
    let d = cfg.drift_on(&g, false)?;
    let tau = max_stable_tau(g.lattice(), d.tensor().max_abs(), d.b().max_abs(), cfg.stepper.cfl_safety);
    cfg.steps = cfg.steps.max(((cfg.t_end - cfg.t_start) / tau).ceil() as usize);
    Ok(())
}

fn solve(cfg: &RunConfig, k: usize) -> Result<SolutionTrajectory> {
    run(&cfg.solver_config(k, false)?)
}

fn random_drift(amplitude: f64, modes: usize, seed: u64) -> Option<CatalogSpec> {
    Some(CatalogSpec::Random { modes, amplitude, seed })
}

fn failing(r: &VerificationReport) -> usize {
    r.records.iter().filter(|x| x.pass == Some(false)).count()
}

fn c1() -> Result<Outcome> {
    let start = Instant::now();
    let r = stein_report(&stein_grid(), STEIN_FIELDS, 2024, MaximalOptions { dyadic_only: false })?;
    let secs = start.elapsed().as_secs_f64();
    let fails = failing(&r);
    outcome(
        fails == 0 && r.records.len() >= STEIN_FIELDS && secs <= STEIN_BUDGET_SECS,
        format!(
            "{} fields, {fails} failing, max llogl/int M = {:.3e}, {secs:.1} s",
            r.records.len(),
            r.summary.max_constant.0
        ),
    )
}

fn c2() -> Result<Outcome> {
    let r = cz_report(&stein_grid(), CZ_FIELDS, &[1.0, 2.0, 4.0], 2025)?;
    let fails = failing(&r);
    outcome(
        fails == 0 && r.records.len() >= 3 * CZ_FIELDS,
        format!("{} (field, level) pairs, {fails} failing, max mean/t = {:.4}", r.records.len(), r.summary.max_constant.0),
    )
}

fn c3() -> Result<Outcome> {
    let r = mazver_report(16, SKEW_TRIPLES, 2026)?;
    let skew = r.records.iter().map(|x| x.extra["skew_relative"].0).fold(0.0, f64::max);
    let mut neut: f64 = 0.0;
    for seed in 0..4 {
        let mut cfg = config(16, 0.05, 20);
        cfg.drift = random_drift(1.0, 1 + seed as usize % 3, 300 + seed);
        cfg.initial = InitialData::Random { modes: 3, amplitude: 1.0, seed: 400 + seed };
        fit_steps(&mut cfg)?;
        let t = solve(&cfg, 1)?;
        neut = t.energy.drift_neutrality.iter().copied().fold(neut, f64::max);
    }
    outcome(
        skew <= SKEW_TOL && neut <= NEUTRALITY_TOL,
        format!("max skew ratio {skew:.2e} over {} triples, max solver neutrality {neut:.2e} over 4 runs", r.records.len()),
    )
}

fn c4() -> Result<Outcome> {
    let coarse = mazver_report(16, MAZVER_TRIPLES, 2027)?;
    let fine = mazver_report(32, MAZVER_TRIPLES, 2027)?;
    let (a, b) = (coarse.summary.max_constant.0, fine.summary.max_constant.0);
    let delta = rel_change(a, b);
    outcome(
        a.is_finite() && b.is_finite() && delta <= REFINEMENT_TOL,
        format!("max C 16^3 = {a:.4}, 32^3 = {b:.4}, change {:.1}%", 100.0 * delta),
    )
}

/// Largest velocity error against `sin(2 pi x_1) exp(-4 pi^2 t) e_2`, relative
/// to the exact amplitude at each level.
fn decay_error(points: usize) -> Result<f64> {
    let h = 1.0 / points as f64;
    let tau = h / 16.0;
    let t_end = 1.0 / 64.0;
    let steps = (t_end / tau).round() as usize;
    let mut cfg = config(points, t_end, steps);
    cfg.initial = InitialData::SingleMode { mode: [1, 0, 0], component: 1, amplitude: 1.0 };
    cfg.stepper = StepperParams { imex_theta: 0.5, cfl_safety: 0.5 };
    let t = solve(&cfg, 1)?;
    let lat = *t.grid().lattice();
    let k2 = (2.0 * std::f64::consts::PI).powi(2);
    let mut worst: f64 = 0.0;
    for n in 0..t.levels() {
        let amp = (-k2 * t.level_time(n)).exp();
        let v = t.velocity(n);
        for (flat, val) in v.comps[1].iter().enumerate() {
            let x = lat.position(lat.unflat(flat));
            let exact = amp * (2.0 * std::f64::consts::PI * x[0]).sin();
            worst = worst.max((val - exact).abs() / amp);
        }
        for c in [0, 2] {
            worst = worst.max(v.comps[c].iter().fold(0.0f64, |m, x| m.max(x.abs())) / amp);
        }
    }
    Ok(worst)
}

fn c5() -> Result<Outcome> {
    let e32 = decay_error(32)?;
    let e64 = decay_error(64)?;
    let mut energy_ok = true;
    let mut worst_margin = f64::INFINITY;
    let mut worst_div: f64 = 0.0;
    for (i, amp) in [0.0, 0.25, 1.0].into_iter().enumerate() {
        let mut cfg = config(16, 0.05, 32);
        cfg.drift = if amp == 0.0 { None } else { random_drift(amp, 2, 500 + i as u64) };
        cfg.initial = InitialData::Random { modes: 3, amplitude: 1.0, seed: 600 + i as u64 };
        fit_steps(&mut cfg)?;
        let t = solve(&cfg, 1)?;
        let r = energy_report(&t)?;
        energy_ok &= r.summary.pass;
        let e0 = t.energy.kinetic[0];
        worst_margin = t.energy.inequality_margins()[1..].iter().map(|m| m / e0).fold(worst_margin, f64::min);
        worst_div = t.energy.div_max.iter().copied().fold(worst_div, f64::max);
    }
    outcome(
        e32 <= DECAY_TOL && e64 * DECAY_GAIN <= e32 && energy_ok,
        format!(
            "decay error 32^3 = {e32:.3e}, 64^3 = {e64:.3e} (gain {:.2}); theta = 1: worst energy margin {worst_margin:.3e}, max div {worst_div:.2e}",
            e32 / e64
        ),
    )
}

fn identity_residuals(t: &SolutionTrajectory) -> Result<Vec<f64>> {
    let lat = *t.grid().lattice();
    let t_end = t.level_time(t.levels() - 1);
    // wide transitions, so the cut-offs are resolved at the coarse level
    let big = 0.45;
    let centers = [[0.5, 0.5, 0.5], [0.25, 0.5, 0.75], [0.0, 0.0, 0.0], [0.75, 0.25, 0.5], [0.6, 0.1, 0.3]];
    let phis = centers
        .iter()
        .enumerate()
        .map(|(i, c)| Ok(TestFunction::Cutoff(build_cutoff(&lat, *c, t_end, 0.08 + 0.02 * i as f64, big)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(identity_report(t, &phis)?.records.iter().map(|r| r.lhs.0).collect())
}

fn c6() -> Result<Outcome> {
    let mut cfg = config(16, 0.25, 64);
    cfg.drift = random_drift(0.5, 1, 700);
    cfg.initial = InitialData::Random { modes: 2, amplitude: 1.0, seed: 701 };
    let coarse = identity_residuals(&solve(&cfg, 1)?)?;
    let fine = identity_residuals(&solve(&cfg, 2)?)?;
    let gains: Vec<f64> = coarse.iter().zip(&fine).map(|(a, b)| a / b).collect();
    let worst = gains.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        gains.len() >= 5 && worst >= IDENTITY_GAIN,
        format!("{} cut-offs, residual gains {:?}", gains.len(), gains.iter().map(|g| format!("{g:.2}")).collect::<Vec<_>>()),
    )
}

fn c7() -> Result<Outcome> {
    let mut max = [0.0f64; 2];
    let mut worst_run: f64 = 0.0;
    for i in 0..PRESSURE_RUNS {
        let mut ratios = [0.0; 2];
        for (j, k) in [1, 2].into_iter().enumerate() {
            let mut cfg = config(16, 1.0 / 256.0, 4);
            cfg.drift = random_drift(0.25 + 0.05 * i as f64, 1 + i % 2, 800 + i as u64);
            cfg.initial = InitialData::Random { modes: 1 + (i / 2) % 2, amplitude: 1.0, seed: 900 + i as u64 };
            fit_steps(&mut cfg)?;
            let t = solve(&cfg, k)?;
            ratios[j] = pressure_estimate(&t)?.max_ratio;
        }
        max[0] = max[0].max(ratios[0]);
        max[1] = max[1].max(ratios[1]);
        worst_run = worst_run.max(rel_change(ratios[0], ratios[1]));
    }
    let delta = rel_change(max[0], max[1]);
    outcome(
        max.iter().all(|m| m.is_finite()) && delta <= REFINEMENT_TOL,
        format!(
            "{PRESSURE_RUNS} runs, max ratio 16^3 = {:.4}, 32^3 = {:.4}, change {:.1}% (worst single run {:.1}%)",
            max[0],
            max[1],
            100.0 * delta,
            100.0 * worst_run
        ),
    )
}

fn c8() -> Result<Outcome> {
    let mut cfg = config(32, 0.25, 128);
    cfg.drift = random_drift(0.5, 2, 1000);
    cfg.initial = InitialData::Random { modes: 2, amplitude: 1.0, seed: 1001 };
    cfg.stepper = StepperParams { imex_theta: 0.5, cfl_safety: 0.5 };
    fit_steps(&mut cfg)?;
    let t = solve(&cfg, 1)?;
    let h = t.grid().lattice().spacing();
    let radii: Vec<f64> = default_radii(t.grid(), 2.0).into_iter().filter(|&r| r >= 4.0 * h).collect();
    let ens = CylinderEnsemble::seeded(t.grid(), 2.0, DEFAULT_ENSEMBLE_SIZE, &radii, 1002)?;
    let mut pass = true;
    let mut parts = Vec::new();
    let ss = [1.05, 1.1, 1.15];
    for (s, r) in ss.iter().zip(caccioppoli_reports(&t, &ens, &ss)?) {
        let m = r.summary.max_constant.0;
        pass &= r.records.len() == DEFAULT_ENSEMBLE_SIZE && m <= CACCIOPPOLI_TOL;
        parts.push(format!("s = {s}: max ratio {m:.4}"));
    }
    outcome(pass, format!("{} cylinders, {}", ens.cylinders.len(), parts.join(", ")))
}

/// RH for each `l` plus LlogL on one trajectory.
fn c9_reports(t: &SolutionTrajectory, rh: &CylinderEnsemble, ll: &CylinderEnsemble, mode: GammaMode) -> Result<Vec<VerificationReport>> {
    let mut out = [1.3, 1.5, 1.9]
        .into_iter()
        .map(|l| reverse_holder_check_with(t, l, rh, mode))
        .collect::<Result<Vec<_>>>()?;
    out.push(llogl_check_with(t, ll, mode)?);
    Ok(out)
}

fn c9_config(amp: f64) -> RunConfig {
    let mut cfg = config(32, 0.125, 80);
    cfg.drift = if amp == 0.0 { None } else { random_drift(amp, 1, 1100) };
    cfg.initial = InitialData::Random { modes: 1, amplitude: 1.0, seed: 1101 };
    cfg
}

fn c9() -> Result<Outcome> {
    let names = ["rh-1.3", "rh-1.5", "rh-1.9", "llogl"];
    let mut pass = true;
    let mut parts = Vec::new();
    let mut gammas = Vec::new();
    let base_grid = c9_config(0.0).grid_at(1)?.level_grid();
    let rh = CylinderEnsemble::seeded(&base_grid, 2.0, DEFAULT_ENSEMBLE_SIZE, &default_radii(&base_grid, 2.0), 1200)?;
    let ll = CylinderEnsemble::seeded(&base_grid, 5.0, DEFAULT_ENSEMBLE_SIZE, &default_radii(&base_grid, 5.0), 1201)?;
    let mut coarse_by = Vec::new();
    for amp in [0.009, 0.1, 1.0] {
        let cfg = c9_config(amp);
        let coarse = c9_reports(&solve(&cfg, 1)?, &rh, &ll, GammaMode::Drift)?;
        let fine = c9_reports(&solve(&cfg, 2)?, &rh, &ll, GammaMode::Drift)?;
        let g: Vec<f64> = coarse[0].records.iter().map(|r| r.gamma.0).collect();
        gammas.push(g.iter().sum::<f64>() / g.len() as f64);
        for (i, (a, b)) in coarse.iter().zip(&fine).enumerate() {
            let merged = merge_reports(&[a.clone(), b.clone()])?;
            let delta = merged.summary.refinement_delta.map(|d| d.0).unwrap_or(f64::NAN);
            let (ca, cb) = (a.summary.max_constant.0, b.summary.max_constant.0);
            let ok = ca.is_finite() && cb.is_finite() && delta <= REFINEMENT_TOL;
            pass &= ok;
            if !ok || i == 0 || i == 3 {
                parts.push(format!("amp {amp} {}: {ca:.4e} -> {cb:.4e} ({:.1}%)", names[i], 100.0 * delta));
            }
        }
        coarse_by.push(coarse);
    }
    let span = gammas.iter().copied().fold(0.0, f64::max) / gammas.iter().copied().fold(f64::INFINITY, f64::min);
    pass &= span >= GAMMA_SPAN;
    // d = 0 through the drift path and through the drift-free path
    let zero = solve(&c9_config(0.0), 1)?;
    let with = c9_reports(&zero, &rh, &ll, GammaMode::Drift)?;
    let without = c9_reports(&zero, &rh, &ll, GammaMode::Absent)?;
    let mut path_gap: f64 = 0.0;
    for (a, b) in with.iter().zip(&without) {
        for (x, y) in a.records.iter().zip(&b.records) {
            let scale = x.constant.0.abs().max(y.constant.0.abs()).max(f64::MIN_POSITIVE);
            path_gap = path_gap.max((x.constant.0 - y.constant.0).abs() / scale);
        }
    }
    pass &= path_gap <= PATH_TOL;
    outcome(
        pass,
        format!(
            "mean Gamma {:?} (span {span:.0}x); {}; d = 0 path gap {path_gap:.1e}",
            gammas.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>(),
            parts.join("; ")
        ),
    )
}

fn c10() -> Result<Outcome> {
    let r = iteration_report(ITERATION_SAMPLES)?;
    let fails = failing(&r);
    let saturating = r
        .records
        .iter()
        .find(|x| x.key == "saturating-d0.5-a1-T1")
        .map(|x| (x.lhs.0, x.rhs_terms[0].0));
    outcome(
        fails == 0 && saturating.is_some(),
        format!(
            "{} families, {fails} failing; delta = 1/2 saturating worst/C = {:?}",
            r.records.len(),
            saturating.map(|(w, c)| format!("{w:.4}/{c:.4}"))
        ),
    )
}

type Criterion = (&'static str, &'static str, fn() -> Result<Outcome>);

const CRITERIA: &[Criterion] = &[
    ("C1", "stein equivalence", c1),
    ("C2", "cz decomposition", c2),
    ("C3", "skew cancellation", c3),
    ("C4", "mazya-verbitsky refinement", c4),
    ("C5", "solver correctness", c5),
    ("C6", "local energy identity", c6),
    ("C7", "pressure estimate", c7),
    ("C8", "caccioppoli audit", c8),
    ("C9", "reverse holder and llogl", c9),
    ("C10", "iteration lemma", c10),
];

fn main() -> ExitCode {
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut all = true;
    for (id, name, f) in CRITERIA {
        if !wanted.is_empty() && !wanted.iter().any(|w| w.eq_ignore_ascii_case(id)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match f() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= pass;
        println!(
            "{id} {name}: {} ({detail}) [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
