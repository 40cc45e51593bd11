//! Batch entry point: a flat `key = value` run configuration and the
//! `solve`, `verify` and `report` commands.
//!
//! Exit status: 0 when every check passes, 2 when a check fails, 1 on an
//! operational error.

pub mod config;

use std::path::{Path, PathBuf};

use crate::bmo::{catalog_stream, catalog_tensor, drift_from_stream, drift_from_tensor, BallLadder, DriftField};
use crate::error::{Error, Result};
use crate::geometry::cutoff::build_cutoff;
use crate::geometry::grid::SpaceTimeGrid;
use crate::maximal::MaximalOptions;
use crate::stokes::{initial_velocity, run, SolutionTrajectory, SolverConfig, TestFunction};
use crate::verify::{
    caccioppoli_reports, cz_report, emit_report, energy_report, identity_report, iteration_report, llogl_check,
    mazver_report, merge_reports, parse_report, pressure_report, reverse_holder_check, stein_grid, stein_report,
    default_radii, CylinderEnsemble, ReportFormat, VerificationReport,
};

pub use config::{DriftForm, RunConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_ERROR: i32 = 1;

/// Names accepted by `verify`.
pub const CHECKS: &[&str] =
    &["rh", "llogl", "stein", "cz", "mazver", "energy", "caccioppoli", "iteration", "identity", "pressure"];

/// Command-line overrides shared by all commands.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub exhaustive: bool,
    pub refine: Option<usize>,
    pub trajectory: Option<PathBuf>,
}

/// Loads and validates a config file, then applies overrides.
pub fn load_config(path: Option<&Path>, ov: &Overrides) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::parse(&std::fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(o) = &ov.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Grid at `k`-fold resolution in space and time.
    pub fn grid_at(&self, k: usize) -> Result<SpaceTimeGrid> {
        let g = SpaceTimeGrid::with_dims(self.dim, self.period, self.points, self.t_start, self.t_end, self.steps)?;
        if k == 1 {
            Ok(g)
        } else {
            g.refined(k)
        }
    }

    pub fn drift_on(&self, grid: &SpaceTimeGrid, exhaustive: bool) -> Result<DriftField> {
        let steady = SpaceTimeGrid::new(*grid.lattice(), grid.t_start(), grid.t_end(), 1)?;
        let d = match &self.drift {
            None => DriftField::zero(steady)?,
            Some(spec) => match self.drift_form {
                DriftForm::Tensor => drift_from_tensor(catalog_tensor(&steady, spec)?)?,
                DriftForm::Stream => drift_from_stream(catalog_stream(&steady, spec)?)?,
            },
        };
        Ok(if exhaustive { d.with_ladder(BallLadder::exhaustive(grid.lattice())) } else { d })
    }

    pub fn solver_config(&self, k: usize, exhaustive: bool) -> Result<SolverConfig> {
        let grid = self.grid_at(k)?;
        let drift = self.drift_on(&grid, exhaustive)?;
        let u0 = initial_velocity(grid.lattice(), &self.initial)?;
        SolverConfig::new(grid, drift, u0, self.stepper, self.seed)
    }
}

fn trajectory(cfg: &RunConfig, k: usize, ov: &Overrides) -> Result<SolutionTrajectory> {
    match (&ov.trajectory, k) {
        (Some(dir), 1) => {
            let grid = cfg.grid_at(1)?;
            let drift = cfg.drift_on(&grid, ov.exhaustive)?;
            let t = SolutionTrajectory::load(dir, drift)?;
            let want = cfg.solver_config(1, ov.exhaustive)?.manifest().config_hash;
            if t.config_hash() != want {
                return Err(Error::Config(format!(
                    "trajectory in {} was produced by a different configuration",
                    dir.display()
                )));
            }
            Ok(t)
        }
        _ => run(&cfg.solver_config(k, ov.exhaustive)?),
    }
}

/// Runs the solver and writes the trajectory under `<out>/trajectory`.
pub fn cmd_solve(cfg: &RunConfig, ov: &Overrides) -> Result<(String, Vec<PathBuf>)> {
    let k = ov.refine.unwrap_or(1);
    let traj = run(&cfg.solver_config(k, ov.exhaustive)?)?;
    let dir = cfg.output_dir.join("trajectory");
    let files = traj.save(&dir)?;
    Ok((traj.config_hash().to_string(), files))
}

fn radii_for(cfg: &RunConfig, grid: &SpaceTimeGrid, margin: f64) -> Vec<f64> {
    if !cfg.radii.is_empty() {
        return cfg.radii.clone();
    }
    default_radii(grid, margin)
}

fn trajectory_check(
    cfg: &RunConfig,
    ov: &Overrides,
    build: &dyn Fn(&SolutionTrajectory, &CylinderEnsemble) -> Result<Vec<VerificationReport>>,
    margin: f64,
) -> Result<Vec<VerificationReport>> {
    let base = trajectory(cfg, 1, ov)?;
    let radii = radii_for(cfg, base.grid(), margin);
    if radii.is_empty() {
        return Err(Error::Config(format!(
            "no cylinder radius fits margin {margin} on this grid; raise grid.points or grid.t_end, or set verify.radii"
        )));
    }
    let ens = CylinderEnsemble::seeded(base.grid(), margin, cfg.ensemble_size, &radii, cfg.ensemble_seed())?;
    let mut reports = build(&base, &ens)?;
    if let Some(k) = ov.refine.filter(|&k| k > 1) {
        let fine = trajectory(cfg, k, ov)?;
        let more = build(&fine, &ens)?;
        reports = reports
            .into_iter()
            .zip(more)
            .map(|(a, b)| merge_reports(&[a, b]))
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(reports)
}

/// Runs one named check and returns its reports (several for exponent sweeps).
pub fn run_check(cfg: &RunConfig, which: &str, ov: &Overrides) -> Result<Vec<VerificationReport>> {
    let opts = MaximalOptions { dyadic_only: !ov.exhaustive };
    match which {
        "stein" => Ok(vec![stein_report(&stein_grid(), cfg.fields, cfg.seed, opts)?]),
        "cz" => Ok(vec![cz_report(&stein_grid(), cfg.fields, &cfg.cz_factors, cfg.seed)?]),
        "mazver" => {
            let mut out = vec![mazver_report(cfg.mazver_points, cfg.triples, cfg.seed)?];
            if let Some(k) = ov.refine.filter(|&k| k > 1) {
                let fine = mazver_report(cfg.mazver_points * k, cfg.triples, cfg.seed)?;
                out = vec![merge_reports(&[out.remove(0), fine])?];
            }
            Ok(out)
        }
        "iteration" => Ok(vec![iteration_report(cfg.iteration_samples)?]),
        "rh" => {
            let ls = cfg.l_values.clone();
            trajectory_check(
                cfg,
                ov,
                &|t, e| ls.iter().map(|&l| reverse_holder_check(t, l, e)).collect(),
                cfg.rh_margin,
            )
        }
        "llogl" => trajectory_check(cfg, ov, &|t, e| Ok(vec![llogl_check(t, e)?]), cfg.llogl_margin),
        "caccioppoli" => {
            let ss = cfg.s_values.clone();
            trajectory_check(
                cfg,
                ov,
                &|t, e| caccioppoli_reports(t, e, &ss),
                cfg.caccioppoli_margin,
            )
        }
        "energy" => {
            let t = trajectory(cfg, ov.refine.unwrap_or(1), ov)?;
            Ok(vec![energy_report(&t)?])
        }
        "identity" => {
            let run_ident = |t: &SolutionTrajectory| -> Result<VerificationReport> {
                let lat = *t.grid().lattice();
                let t_end = t.level_time(t.levels() - 1);
                let span = t_end - t.level_time(0);
                let big = (0.3 * lat.period()).min(0.95 * span.sqrt());
                let mut phis = vec![TestFunction::Constant(1.0)];
                for (i, c) in [[0.5, 0.5, 0.5], [0.25, 0.5, 0.75], [0.0, 0.0, 0.0], [0.75, 0.25, 0.5]].iter().enumerate() {
                    let x0 = c.map(|v| v * lat.period());
                    phis.push(TestFunction::Cutoff(build_cutoff(&lat, x0, t_end, big * (0.35 + 0.1 * i as f64), big)?));
                }
                identity_report(t, &phis)
            };
            let base = run_ident(&trajectory(cfg, 1, ov)?)?;
            match ov.refine.filter(|&k| k > 1) {
                Some(k) => Ok(vec![merge_reports(&[base, run_ident(&trajectory(cfg, k, ov)?)?])?]),
                None => Ok(vec![base]),
            }
        }
        "pressure" => {
            let base = trajectory(cfg, 1, ov)?;
            let mut reports = vec![pressure_report(&[("run".to_string(), &base)])?];
            if let Some(k) = ov.refine.filter(|&k| k > 1) {
                let fine = trajectory(cfg, k, ov)?;
                reports = vec![merge_reports(&[reports.remove(0), pressure_report(&[("run".to_string(), &fine)])?])?];
            }
            Ok(reports)
        }
        other => Err(Error::Config(format!("unknown check `{other}`; expected one of {}", CHECKS.join(", ")))),
    }
}

fn report_name(which: &str, r: &VerificationReport, i: usize, n: usize) -> String {
    if n == 1 {
        return which.to_string();
    }
    let tag = r
        .meta
        .params
        .get("l")
        .or_else(|| r.meta.params.get("s"))
        .map(|v| format!("{v}"))
        .unwrap_or_else(|| i.to_string());
    format!("{which}-{tag}")
}

/// Writes `<out>/<check>[-param].json` and `.csv`; returns the paths and
/// whether every report passed.
pub fn cmd_verify(cfg: &RunConfig, which: &str, ov: &Overrides) -> Result<(bool, Vec<PathBuf>)> {
    if !CHECKS.contains(&which) {
        return Err(Error::Config(format!("unknown check `{which}`; expected one of {}", CHECKS.join(", "))));
    }
    let reports = run_check(cfg, which, ov)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut paths = Vec::new();
    let n = reports.len();
    for (i, r) in reports.iter().enumerate() {
        let name = report_name(which, r, i, n);
        let j = cfg.output_dir.join(format!("{name}.json"));
        let c = cfg.output_dir.join(format!("{name}.csv"));
        emit_report(r, &j, ReportFormat::Json)?;
        emit_report(r, &c, ReportFormat::Csv)?;
        paths.push(j);
        paths.push(c);
    }
    Ok((reports.iter().all(|r| r.summary.pass), paths))
}

/// Merges reports of one check into `<out>/merged.json` (and `.csv`).
pub fn cmd_report(paths: &[PathBuf], out: Option<&Path>) -> Result<(VerificationReport, Vec<PathBuf>)> {
    if paths.is_empty() {
        return Err(Error::Config("report needs at least one input".into()));
    }
    let reports = paths.iter().map(|p| parse_report(p)).collect::<Result<Vec<_>>>()?;
    let merged = merge_reports(&reports)?;
    let mut written = Vec::new();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let j = dir.join("merged.json");
        let c = dir.join("merged.csv");
        emit_report(&merged, &j, ReportFormat::Json)?;
        emit_report(&merged, &c, ReportFormat::Csv)?;
        written = vec![j, c];
    }
    Ok((merged, written))
}

/// One-line summary for the terminal.
pub fn summary_line(r: &VerificationReport) -> String {
    let delta = r.summary.refinement_delta.map(|d| format!(" refinement_delta={:.6e}", d.0)).unwrap_or_default();
    format!(
        "{} records={} max_constant={:.6e} median_constant={:.6e}{} {}",
        r.meta.check,
        r.summary.records,
        r.summary.max_constant.0,
        r.summary.median_constant.0,
        delta,
        if r.summary.pass { "PASS" } else { "FAIL" }
    )
}
