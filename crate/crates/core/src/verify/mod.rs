//! Inequality harnesses on stored trajectories: reverse Hölder, `L log L`
//! higher integrability and the pressure bound, plus report plumbing.

pub mod harness;
pub mod iteration;
pub mod report;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::geometry::field::ScalarField;
use crate::geometry::grid::SpaceTimeGrid;
use crate::geometry::region::{region_cells, ParabolicCylinder, Region, RegionCells};
use crate::maximal::{llogl_sum, LlogVariant};
use crate::stokes::SolutionTrajectory;

pub use harness::*;
pub use iteration::{iteration_lemma_check, IterationCheck, IterationProblem, IterationTerm};
pub use report::{
    emit_report, merge_reports, parse_report, schema_check, Num, Record, RecordCylinder, ReportFormat, ReportMeta,
    Summary, VerificationReport, REPORT_SCHEMA,
};

/// Default number of cylinders in a seeded ensemble.
pub const DEFAULT_ENSEMBLE_SIZE: usize = 64;

/// Cap used for the exploratory minimal Γ exponent.
pub const BETA_CAP: f64 = 1.0;

/// Cylinders `Q(z0, rho)` whose enlargements `Q(z0, margin rho)` must be
/// embedded in the trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderEnsemble {
    pub margin: f64,
    pub seed: u64,
    pub cylinders: Vec<ParabolicCylinder>,
}

impl CylinderEnsemble {
    pub fn new(margin: f64, seed: u64, cylinders: Vec<ParabolicCylinder>) -> Self {
        Self { margin, seed, cylinders }
    }

    /// Draws `size` cylinders with radii from `radii`, centres on lattice
    /// points and `t0` on time levels of `grid` (a level grid), keeping
    /// only admissible placements.
    pub fn seeded(grid: &SpaceTimeGrid, margin: f64, size: usize, radii: &[f64], seed: u64) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::EmptyLadder);
        }
        let lat = *grid.lattice();
        let levels = grid.steps();
        let tau = grid.tau();
        // admissible first level per radius
        let mut first = Vec::with_capacity(radii.len());
        for &rho in radii {
            let big = margin * rho;
            if !(rho >= lat.spacing() && big < 0.5 * lat.period()) {
                return Err(Error::Region(format!("radius {rho} with margin {margin} does not fit the lattice")));
            }
            if rho * rho <= tau * (1.0 + 1e-9) {
                return Err(Error::Region(format!("Q(z0, {rho}) contains no earlier time level")));
            }
            let k = ((big * big) / tau - 1e-9).ceil().max(0.0) as usize;
            if k >= levels {
                return Err(Error::Region(format!("Q(z0, {big}) is longer than the trajectory")));
            }
            first.push(k);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cylinders = Vec::with_capacity(size);
        for _ in 0..size {
            let which = rng.gen_range(0..radii.len());
            let mut idx = [0usize; 3];
            for a in idx.iter_mut().take(lat.dim()) {
                *a = rng.gen_range(0..lat.points());
            }
            let k = rng.gen_range(first[which]..levels);
            let t0 = grid.t_start() + (k as f64 + 0.5) * tau;
            cylinders.push(ParabolicCylinder::new(lat.position(idx), t0, radii[which]));
        }
        Ok(Self { margin, seed, cylinders })
    }

    /// Checks placement against a trajectory.
    pub fn validate(&self, traj: &SolutionTrajectory) -> Result<()> {
        let lat = *traj.grid().lattice();
        let t_first = traj.level_time(0);
        let t_last = traj.level_time(traj.levels() - 1);
        let eps = 1e-9 * traj.tau();
        for c in &self.cylinders {
            let big = self.margin * c.radius;
            if !(c.radius >= lat.spacing() && big < 0.5 * lat.period()) {
                return Err(Error::Region(format!("cylinder radius {} with margin {} does not fit", c.radius, self.margin)));
            }
            if c.t0 - big * big < t_first - eps || c.t0 > t_last + eps {
                return Err(Error::Region(format!(
                    "Q(z0, {big}) with t0 = {} is not embedded in [{t_first}, {t_last}]",
                    c.t0
                )));
            }
        }
        Ok(())
    }

    fn require_margin(&self, need: f64) -> Result<()> {
        if self.margin < need {
            return Err(Error::Region(format!("ensemble margin {} is below the required {need}", self.margin)));
        }
        Ok(())
    }
}

/// Stable record key of a cylinder.
/// Radii `2h sqrt(2)^j` whose enlarged cylinder fits the lattice and the run,
/// keeping only those whose `Q(z0, r)` holds an earlier time level. Below `2h`
/// a lattice ball misstates its own measure by a large factor.
pub fn default_radii(grid: &SpaceTimeGrid, margin: f64) -> Vec<f64> {
    let lat = grid.lattice();
    let h = lat.spacing();
    let t_len = grid.t_end() - grid.t_start();
    let limit = (0.5 * lat.period() / margin).min(t_len.sqrt() / margin);
    let mut out = Vec::new();
    let mut r = 2.0 * h;
    while r < limit * (1.0 - 1e-12) {
        if r * r > grid.tau() * (1.0 + 1e-9) {
            out.push(r);
        }
        r *= std::f64::consts::SQRT_2;
    }
    out
}

pub fn cylinder_key(c: &ParabolicCylinder) -> String {
    format!(
        "x={:.9e},{:.9e},{:.9e};t={:.9e};r={:.9e}",
        c.center[0], c.center[1], c.center[2], c.t0, c.radius
    )
}

fn record_cylinder(c: &ParabolicCylinder) -> RecordCylinder {
    RecordCylinder { center: c.center, t0: c.t0, radius: c.radius }
}

/// `l = 6s / (12 - 7s)` for `1 < s < 6/5`.
pub fn exponent_map(s: f64) -> Result<f64> {
    if !(s > 1.0 && s < 1.2) {
        return Err(Error::Exponent(format!("s = {s} must lie in (1, 6/5)")));
    }
    Ok(6.0 * s / (12.0 - 7.0 * s))
}

/// How Γ enters the right-hand sides.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaMode {
    /// Γ is measured from the trajectory's drift.
    Drift,
    /// The drift-free form: the Γ factor is left out altogether.
    Absent,
}

/// `|grad v|^2` on the trajectory's level grid.
fn mean_of(f: &ScalarField, cells: &RegionCells, g: impl Fn(f64) -> f64) -> f64 {
    let mut s = 0.0;
    for k in cells.times.clone() {
        let sl = f.slice(k);
        for &i in &cells.spatial {
            s += g(sl[i]);
        }
    }
    s / cells.count() as f64
}

fn cells_of(traj: &SolutionTrajectory, c: &ParabolicCylinder) -> Result<RegionCells> {
    region_cells(traj.grid(), &Region::Cylinder(*c))
}

fn gamma_at(traj: &SolutionTrajectory, c: &ParabolicCylinder, mode: GammaMode) -> Result<Option<f64>> {
    match mode {
        GammaMode::Absent => Ok(None),
        GammaMode::Drift => traj.drift.gamma(c.center, c.t0, c.radius).map(Some),
    }
}

/// Smallest `beta` on `0, 1/8, ..., 10` with `max_i lhs_i / ((g_i^beta + 1) a_i + b_i) <= cap`.
fn beta_min(rows: &[(f64, f64, f64, f64)], cap: f64) -> f64 {
    for step in 0..=80 {
        let beta = step as f64 / 8.0;
        let worst = rows
            .iter()
            .map(|&(lhs, g, a, b)| {
                if lhs == 0.0 {
                    0.0
                } else {
                    lhs / ((g.powf(beta) + 1.0) * a + b)
                }
            })
            .fold(0.0, f64::max);
        if worst <= cap {
            return beta;
        }
    }
    f64::INFINITY
}

fn meta(traj: &SolutionTrajectory, check: &str, ensemble: &CylinderEnsemble, params: BTreeMap<String, serde_json::Value>) -> ReportMeta {
    ReportMeta {
        check: check.into(),
        trajectory_hash: traj.config_hash().to_string(),
        ensemble_seed: ensemble.seed,
        params,
        notes: Vec::new(),
    }
}

pub fn reverse_holder_check(traj: &SolutionTrajectory, l: f64, ensemble: &CylinderEnsemble) -> Result<VerificationReport> {
    reverse_holder_check_with(traj, l, ensemble, GammaMode::Drift)
}

/// Per cylinder `C = avg_{Q(rho)} G / ((Γ^5(z0, 2rho) + 1)(avg_{Q(2rho)} G^{l/2})^{2/l} + (avg_{Q(2rho)} |q|)^2)`
/// with `G = |grad v|^2`.
pub fn reverse_holder_check_with(
    traj: &SolutionTrajectory,
    l: f64,
    ensemble: &CylinderEnsemble,
    mode: GammaMode,
) -> Result<VerificationReport> {
    if !(l > 1.2 && l < 2.0) {
        return Err(Error::Exponent(format!("l = {l} must lie in (6/5, 2)")));
    }
    ensemble.require_margin(2.0)?;
    ensemble.validate(traj)?;
    let g = traj.gradient_density();
    let level = traj.grid().lattice().points() as u64;
    let mut records = Vec::with_capacity(ensemble.cylinders.len());
    let mut rows = Vec::with_capacity(ensemble.cylinders.len());
    for c in &ensemble.cylinders {
        let big = c.enlarged(2.0);
        let inner = cells_of(traj, c)?;
        let outer = cells_of(traj, &big)?;
        let lhs = mean_of(&g, &inner, |x| x);
        let a = mean_of(&g, &outer, |x| x.powf(0.5 * l)).powf(2.0 / l);
        let qm = mean_of(&traj.q, &outer, f64::abs);
        let t2 = qm * qm;
        let gamma = gamma_at(traj, &big, mode)?;
        let t1 = match gamma {
            Some(gm) => (gm.powi(5) + 1.0) * a,
            None => a,
        };
        let constant = if lhs == 0.0 { 0.0 } else { lhs / (t1 + t2) };
        let gm = gamma.unwrap_or(0.0);
        rows.push((lhs, gm, a, t2));
        let mut rec = Record::new(cylinder_key(c), level);
        rec.cylinder = Some(record_cylinder(c));
        rec.gamma = Num(gm);
        rec.lhs = Num(lhs);
        rec.rhs_terms = vec![Num(t1), Num(t2)];
        rec.constant = Num(constant);
        rec.pass = Some(constant.is_finite());
        rec.extra.insert("beta_min".into(), Num(beta_min(&[(lhs, gm, a, t2)], BETA_CAP)));
        records.push(rec);
    }
    let mut params = BTreeMap::new();
    params.insert("l".into(), json!(l));
    params.insert("margin".into(), json!(ensemble.margin));
    params.insert("gamma_mode".into(), json!(mode));
    let mut report = VerificationReport::new(meta(traj, "rh", ensemble, params), records);
    report.summary.extra.insert("beta_min".into(), Num(beta_min(&rows, BETA_CAP)));
    report.summary.extra.insert("beta_cap".into(), Num(BETA_CAP));
    report.meta.notes.push("beta_min is exploratory and does not enter pass flags".into());
    Ok(report)
}

pub fn llogl_check(traj: &SolutionTrajectory, ensemble: &CylinderEnsemble) -> Result<VerificationReport> {
    llogl_check_with(traj, ensemble, GammaMode::Drift)
}

/// Per cylinder `C = int_{Q(r)} G log(1 + G / (G)_{z0,r}) / ((1 + Γ^5(z0, 5r)) int_{Q(5r)} G + int_{Q(5r)} q^2)`.
pub fn llogl_check_with(traj: &SolutionTrajectory, ensemble: &CylinderEnsemble, mode: GammaMode) -> Result<VerificationReport> {
    ensemble.require_margin(5.0)?;
    ensemble.validate(traj)?;
    let g = traj.gradient_density();
    let level = traj.grid().lattice().points() as u64;
    let mut records = Vec::with_capacity(ensemble.cylinders.len());
    let mut rows = Vec::with_capacity(ensemble.cylinders.len());
    for c in &ensemble.cylinders {
        let big = c.enlarged(5.0);
        let inner = cells_of(traj, c)?;
        let outer = cells_of(traj, &big)?;
        let reference = mean_of(&g, &inner, |x| x);
        let vals = inner.times.clone().flat_map(|k| {
            let sl = g.slice(k);
            inner.spatial.iter().map(move |&i| sl[i])
        });
        let lhs = llogl_sum(vals, reference, LlogVariant::One, inner.weight)?;
        let a = mean_of(&g, &outer, |x| x) * outer.measure();
        let b = mean_of(&traj.q, &outer, |x| x * x) * outer.measure();
        let gamma = gamma_at(traj, &big, mode)?;
        let t1 = match gamma {
            Some(gm) => (1.0 + gm.powi(5)) * a,
            None => a,
        };
        let constant = if lhs == 0.0 { 0.0 } else { lhs / (t1 + b) };
        let gm = gamma.unwrap_or(0.0);
        rows.push((lhs, gm, a, b));
        let mut rec = Record::new(cylinder_key(c), level);
        rec.cylinder = Some(record_cylinder(c));
        rec.gamma = Num(gm);
        rec.lhs = Num(lhs);
        rec.rhs_terms = vec![Num(t1), Num(b)];
        rec.constant = Num(constant);
        rec.pass = Some(constant.is_finite());
        rec.extra.insert("beta_min".into(), Num(beta_min(&[(lhs, gm, a, b)], BETA_CAP)));
        records.push(rec);
    }
    let mut params = BTreeMap::new();
    params.insert("margin".into(), json!(ensemble.margin));
    params.insert("gamma_mode".into(), json!(mode));
    params.insert("variant".into(), json!(LlogVariant::One));
    let mut report = VerificationReport::new(meta(traj, "llogl", ensemble, params), records);
    report.summary.extra.insert("beta_min".into(), Num(beta_min(&rows, BETA_CAP)));
    report.summary.extra.insert("beta_cap".into(), Num(BETA_CAP));
    report.meta.notes.push("beta_min is exploratory and does not enter pass flags".into());
    Ok(report)
}

/// `||q||_2 / (||d||_BMO ||grad v||_2)` per level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    pub bmo_norm: f64,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// Levels with `grad v = 0` and `q = 0` give 0; `q != 0` against a zero
/// denominator gives infinity.
pub fn pressure_estimate(traj: &SolutionTrajectory) -> Result<PressureEstimate> {
    let bmo = traj.drift.bmo_norm()?;
    let lat = *traj.grid().lattice();
    let w = lat.cell_volume();
    let mut ratios = Vec::with_capacity(traj.levels());
    for k in 0..traj.levels() {
        let q2 = (traj.pressure(k).iter().map(|x| x * x).sum::<f64>() * w).sqrt();
        let gv = traj.energy.grad_sq.get(k).copied().unwrap_or(0.0).sqrt();
        let den = bmo * gv;
        ratios.push(if q2 == 0.0 {
            0.0
        } else if den > 0.0 {
            q2 / den
        } else {
            f64::INFINITY
        });
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(PressureEstimate { bmo_norm: bmo, ratios, max_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmo::DriftField;
    use crate::geometry::field::VectorField;

    /// Steady `v = A x` with `A` trace-free, `q = 0`, `d = 0`, and the exact
    /// gradient supplied.
    fn linear_traj(a: [[f64; 3]; 3]) -> SolutionTrajectory {
        let grid = SpaceTimeGrid::with_dims(3, 1.0, 16, 0.0, 0.25, 128).unwrap().level_grid();
        let v = VectorField::from_fn(grid, |x, _| {
            let mut out = [0.0; 3];
            for i in 0..3 {
                out[i] = (0..3).map(|j| a[i][j] * x[j]).sum();
            }
            out
        });
        let q = ScalarField::zeros(grid);
        let grad = (0..3).map(|i| (0..3).map(|j| ScalarField::constant(grid, a[i][j])).collect()).collect();
        let drift = DriftField::zero(grid).unwrap();
        SolutionTrajectory::from_parts(v, q, drift, Some(grad)).unwrap()
    }

    #[test]
    fn exponent_map_range_and_values() {
        assert!((exponent_map(12.0 / 11.0).unwrap() - 1.5).abs() < 1e-14);
        assert!((exponent_map(1.0 + 1e-9).unwrap() - 1.2).abs() < 1e-7);
        assert!((exponent_map(1.2 - 1e-9).unwrap() - 2.0).abs() < 1e-6);
        assert!(exponent_map(1.0).is_err() && exponent_map(1.2).is_err());
        let mut prev = 0.0;
        for i in 1..100 {
            let l = exponent_map(1.0 + 0.2 * i as f64 / 100.0).unwrap();
            assert!(l > prev);
            prev = l;
        }
    }

    #[test]
    fn reverse_holder_constant_gradient_equality() {
        let traj = linear_traj([[1.0, 2.0, 0.0], [0.0, -0.5, 0.3], [0.1, 0.0, -0.5]]);
        let ens = CylinderEnsemble::seeded(traj.grid(), 2.0, 16, &[0.125, 0.2], 3).unwrap();
        for l in [1.3, 1.5, 1.9] {
            let r = reverse_holder_check(&traj, l, &ens).unwrap();
            for rec in &r.records {
                assert!((rec.constant.0 - 1.0).abs() < 1e-10, "{}", rec.constant.0);
            }
        }
    }

    #[test]
    fn zero_field_gives_zero_constants() {
        let traj = linear_traj([[0.0; 3]; 3]);
        let rh_ens = CylinderEnsemble::seeded(traj.grid(), 2.0, 8, &[0.125], 1).unwrap();
        let r = reverse_holder_check(&traj, 1.5, &rh_ens).unwrap();
        assert!(r.records.iter().all(|x| x.constant.0 == 0.0));
        let ens = CylinderEnsemble::seeded(traj.grid(), 5.0, 8, &[0.07], 1).unwrap();
        let r = llogl_check(&traj, &ens).unwrap();
        assert!(r.records.iter().all(|x| x.constant.0 == 0.0));
        assert_eq!(pressure_estimate(&traj).unwrap().max_ratio, 0.0);
    }

    #[test]
    fn gamma_paths_agree_for_zero_drift() {
        let traj = linear_traj([[0.3, 0.0, 0.0], [0.0, -0.1, 0.0], [0.0, 0.0, -0.2]]);
        let ens = CylinderEnsemble::seeded(traj.grid(), 5.0, 8, &[0.07, 0.09], 5).unwrap();
        let a = llogl_check_with(&traj, &ens, GammaMode::Drift).unwrap();
        let b = llogl_check_with(&traj, &ens, GammaMode::Absent).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.constant, y.constant);
        }
    }

    #[test]
    fn margins_and_exponents_enforced() {
        let traj = linear_traj([[0.0; 3]; 3]);
        let ens = CylinderEnsemble::seeded(traj.grid(), 2.0, 4, &[0.125], 1).unwrap();
        assert!(matches!(llogl_check(&traj, &ens), Err(Error::Region(_))));
        assert!(matches!(reverse_holder_check(&traj, 1.2, &ens), Err(Error::Exponent(_))));
        assert!(matches!(reverse_holder_check(&traj, 2.0, &ens), Err(Error::Exponent(_))));
        let bad = CylinderEnsemble::new(2.0, 0, vec![ParabolicCylinder::new([0.0; 3], 0.01, 0.125)]);
        assert!(matches!(reverse_holder_check(&traj, 1.5, &bad), Err(Error::Region(_))));
    }

    #[test]
    fn ensemble_order_does_not_matter() {
        let traj = linear_traj([[0.2, 1.0, 0.0], [0.0, -0.1, 0.0], [0.0, 0.0, -0.1]]);
        let ens = CylinderEnsemble::seeded(traj.grid(), 2.0, 10, &[0.125, 0.2], 9).unwrap();
        let mut rev = ens.clone();
        rev.cylinders.reverse();
        let a = reverse_holder_check(&traj, 1.5, &ens).unwrap();
        let b = reverse_holder_check(&traj, 1.5, &rev).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }
}
