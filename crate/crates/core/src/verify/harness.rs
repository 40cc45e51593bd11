//! Batch harnesses that turn module checks into reports.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::bmo::{catalog_tensor, drift_from_tensor, grad_l2, mazver_pairing, CatalogSpec};
use crate::error::{Error, Result};
use crate::geometry::field::{ScalarField, VectorSlice};
use crate::geometry::grid::{Lattice, SpaceTimeGrid};
use crate::geometry::random::{random_scalar, random_vector};
use crate::maximal::{cz_decompose_box, stein_equivalence_box, LatticeBox, LocalAbs, MaximalOptions, STEIN_CONSTANT};
use crate::stokes::{
    caccioppoli_audit_many, energy_identity_audit_many, CaccioppoliCylinder, SolutionTrajectory, TestFunction, DIV_TOL,
};
use crate::verify::iteration::{iteration_lemma_check, IterationProblem};
use crate::verify::report::{Num, Record, RecordCylinder, ReportMeta, VerificationReport};
use crate::verify::{cylinder_key, pressure_estimate, CylinderEnsemble};

/// Relative slack on the discrete energy inequality.
pub const ENERGY_TOL: f64 = 1e-12;
/// Per-step bound on `|<div(D grad v), v>| / (max|d| ||grad v||^2)`.
pub const NEUTRALITY_TOL: f64 = 1e-12;
/// Pass threshold for Caccioppoli ratios.
pub const CACCIOPPOLI_CAP: f64 = 1.1;

fn meta(check: &str, hash: &str, seed: u64, params: BTreeMap<String, serde_json::Value>) -> ReportMeta {
    ReportMeta { check: check.into(), trajectory_hash: hash.into(), ensemble_seed: seed, params, notes: Vec::new() }
}

/// `16^3 x 8` samples of the parabolic cube of half-side `1/2` on the unit
/// torus over `(0, 1/4)`.
pub fn stein_grid() -> SpaceTimeGrid {
    SpaceTimeGrid::with_dims(3, 1.0, 16, 0.0, 0.25, 8).expect("fixed grid")
}

/// Field `i` of the seeded test family: band-limited slices (`K = 1..5`),
/// raised to a power to make them peaky, alternating with white noise.
pub fn test_field(grid: &SpaceTimeGrid, seed: u64, i: usize) -> Result<ScalarField> {
    let lat = *grid.lattice();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut data = Vec::with_capacity(grid.samples());
    if i % 3 == 2 {
        data.extend((0..grid.samples()).map(|_| rng.gen_range(-1.0..1.0)));
    } else {
        let kmax = ((lat.points() - 1) / 3).max(1);
        let k = 1 + i % kmax.min(5);
        let p: f64 = rng.gen_range(1.0..4.0);
        for t in 0..grid.steps() {
            let s = random_scalar(&lat, k, seed.wrapping_add(i as u64), t as u64)?;
            data.extend(s.into_iter().map(|x| x.abs().powf(p) * x.signum()));
        }
    }
    ScalarField::from_data(*grid, data)
}

/// Two-sided maximal / `L log L` equivalence on `count` fields over the
/// whole grid box.
pub fn stein_report(grid: &SpaceTimeGrid, count: usize, seed: u64, opts: MaximalOptions) -> Result<VerificationReport> {
    let g = LatticeBox::whole(grid);
    let records = (0..count)
        .into_par_iter()
        .map(|i| {
            let f = test_field(grid, seed, i)?;
            let s = stein_equivalence_box(&f, &g, opts)?;
            let mut r = Record::new(format!("field-{i:05}"), grid.lattice().points() as u64);
            r.lhs = Num(s.llogl_value);
            r.rhs_terms = vec![Num(s.integral_of_m / STEIN_CONSTANT), Num(STEIN_CONSTANT * s.integral_of_m)];
            r.constant = Num(if s.llogl_value == 0.0 { 0.0 } else { s.llogl_value / s.integral_of_m });
            r.pass = Some(s.lower_ok && s.upper_ok);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut params = BTreeMap::new();
    params.insert("dyadic_only".into(), json!(opts.dyadic_only));
    params.insert("constant".into(), json!(STEIN_CONSTANT));
    Ok(VerificationReport::new(meta("stein", "", seed, params), records))
}

/// Stopping-time decomposition of `count` fields at levels `factor * (|f|)_{C0}`.
pub fn cz_report(grid: &SpaceTimeGrid, count: usize, factors: &[f64], seed: u64) -> Result<VerificationReport> {
    if factors.iter().any(|&f| !(f >= 1.0)) {
        return Err(Error::Precondition("level factors must be >= 1".into()));
    }
    let parent = LatticeBox::whole(grid);
    let n = grid.lattice().points() as u64;
    let records = (0..count)
        .into_par_iter()
        .map(|i| {
            let f = test_field(grid, seed, i)?;
            let mean = LocalAbs::gather(&f, &parent).box_mean(&parent);
            factors
                .iter()
                .enumerate()
                .map(|(j, &fac)| {
                    let fam = cz_decompose_box(&f, &parent, fac * mean)?;
                    let c = fam.check(&f);
                    let mut r = Record::new(format!("field-{i:05}-level-{j}"), n);
                    r.lhs = Num(c.max_ratio);
                    r.rhs_terms = vec![Num(crate::maximal::cz::child_bound(grid.lattice().dim()))];
                    r.constant = Num(c.max_ratio);
                    r.pass = Some(c.all_ok());
                    r.extra.insert("cubes".into(), Num(fam.cubes.len() as f64));
                    r.extra.insert("level".into(), Num(fac * mean));
                    Ok(r)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut params = BTreeMap::new();
    params.insert("factors".into(), json!(factors));
    Ok(VerificationReport::new(meta("cz", "", seed, params), records))
}

/// Seeded `(d, u, v)` on one slice of an `n^3` torus with band limit `k`.
pub struct Triple {
    pub drift: crate::bmo::DriftField,
    pub u: VectorSlice,
    pub v: VectorSlice,
}

pub fn random_triple(n: usize, k: usize, seed: u64) -> Result<Triple> {
    let grid = SpaceTimeGrid::with_dims(3, 1.0, n, 0.0, 1.0, 1)?;
    let lat: Lattice = *grid.lattice();
    let spec = CatalogSpec::Random { modes: k, amplitude: 1.0, seed };
    let drift = drift_from_tensor(catalog_tensor(&grid, &spec)?)?;
    let u = VectorSlice { lattice: lat, comps: random_vector(&lat, k, seed, 100, false)? };
    let v = VectorSlice { lattice: lat, comps: random_vector(&lat, k, seed, 200, false)? };
    Ok(Triple { drift, u, v })
}

/// `|<d grad u, grad v>| / (||d||_BMO ||grad u|| ||grad v||)` and the skew
/// cancellation `|<d grad u, grad u>| / (||d||_inf ||grad u||^2)` per triple.
pub fn mazver_report(n: usize, count: usize, seed: u64) -> Result<VerificationReport> {
    let k = ((n - 1) / 3).clamp(1, 5);
    let records = (0..count)
        .map(|i| {
            let s = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            let kk = 1 + i % k;
            let t = random_triple(n, kk, s)?;
            let pairing = mazver_pairing(&t.drift, &t.u, &t.v)?;
            let skew = mazver_pairing(&t.drift, &t.u, &t.u)?;
            let bmo = t.drift.bmo_norm()?;
            let (gu, gv) = (grad_l2(&t.u), grad_l2(&t.v));
            let den = bmo * gu * gv;
            let dinf = t.drift.tensor().max_abs();
            let skew_rel = if skew == 0.0 { 0.0 } else { skew.abs() / (dinf * gu * gu) };
            let mut r = Record::new(format!("triple-{i:05}"), n as u64);
            r.lhs = Num(pairing.abs());
            r.rhs_terms = vec![Num(bmo), Num(gu), Num(gv)];
            r.constant = Num(if pairing == 0.0 { 0.0 } else { pairing.abs() / den });
            r.pass = Some(r.constant.0.is_finite() && skew_rel <= 1e-12);
            r.extra.insert("skew_relative".into(), Num(skew_rel));
            r.extra.insert("modes".into(), Num(kk as f64));
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut params = BTreeMap::new();
    params.insert("n".into(), json!(n));
    Ok(VerificationReport::new(meta("mazver", "", seed, params), records))
}

/// Per-level energy bookkeeping: the discrete energy inequality, `div v` and
/// drift neutrality.
pub fn energy_report(traj: &SolutionTrajectory) -> Result<VerificationReport> {
    let e = &traj.energy;
    let margins = e.inequality_margins();
    let e0 = e.kinetic.first().copied().unwrap_or(0.0);
    let n = traj.grid().lattice().points() as u64;
    let mut records = Vec::with_capacity(margins.len());
    for (k, m) in margins.iter().enumerate() {
        let mut r = Record::new(format!("level-{k:06}"), n);
        let lhs = e0 - m;
        r.lhs = Num(lhs);
        r.rhs_terms = vec![Num(e0)];
        r.constant = Num(if lhs == 0.0 { 0.0 } else { lhs / e0 });
        let div = e.div_max.get(k).copied().unwrap_or(0.0);
        let neut = e.drift_neutrality.get(k).copied().unwrap_or(0.0);
        r.pass = Some(*m >= -ENERGY_TOL * e0 && div <= DIV_TOL && neut <= NEUTRALITY_TOL);
        r.extra.insert("div_max".into(), Num(div));
        r.extra.insert("drift_neutrality".into(), Num(neut));
        records.push(r);
    }
    let mut params = BTreeMap::new();
    params.insert("tau".into(), json!(e.tau));
    params.insert("theta".into(), json!(traj.manifest.stepper.imex_theta));
    Ok(VerificationReport::new(meta("energy", traj.config_hash(), traj.manifest.seed, params), records))
}

/// Local energy identity residuals for a set of test functions.
pub fn identity_report(traj: &SolutionTrajectory, phis: &[TestFunction]) -> Result<VerificationReport> {
    let audits = energy_identity_audit_many(traj, phis)?;
    let n = traj.grid().lattice().points() as u64;
    let records = audits
        .iter()
        .zip(phis)
        .enumerate()
        .map(|(i, (a, phi))| {
            let mut r = Record::new(format!("phi-{i:03}"), n);
            if let TestFunction::Cutoff(c) = phi {
                r.cylinder = Some(RecordCylinder { center: c.x0, t0: c.t0, radius: c.big_r });
            }
            r.lhs = Num(a.max_abs);
            r.constant = Num(a.max_rel);
            r
        })
        .collect();
    let mut out = VerificationReport::new(meta("identity", traj.config_hash(), traj.manifest.seed, BTreeMap::new()), records);
    out.meta.notes.push("constant is the largest residual relative to the identity's scale".into());
    Ok(out)
}

/// Caccioppoli ratios with `r = rho`, `R = margin rho` for each cylinder.
pub fn caccioppoli_report(traj: &SolutionTrajectory, ensemble: &CylinderEnsemble, s: f64) -> Result<VerificationReport> {
    Ok(caccioppoli_reports(traj, ensemble, &[s])?.remove(0))
}

/// One report per exponent from a single pass over the trajectory.
pub fn caccioppoli_reports(
    traj: &SolutionTrajectory,
    ensemble: &CylinderEnsemble,
    s_values: &[f64],
) -> Result<Vec<VerificationReport>> {
    ensemble.validate(traj)?;
    let n = traj.grid().lattice().points() as u64;
    let specs: Vec<CaccioppoliCylinder> = ensemble
        .cylinders
        .iter()
        .map(|c| CaccioppoliCylinder { x0: c.center, t0: c.t0, r: c.radius, big_r: ensemble.margin * c.radius })
        .collect();
    let audits = caccioppoli_audit_many(traj, &specs, s_values)?;
    Ok(s_values
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let records = ensemble
                .cylinders
                .iter()
                .zip(&audits)
                .map(|(c, per_s)| {
                    let a = &per_s[k];
                    let mut r = Record::new(cylinder_key(c), n);
                    r.cylinder = Some(RecordCylinder { center: c.center, t0: c.t0, radius: c.radius });
                    r.lhs = Num(a.lhs);
                    r.rhs_terms = vec![Num(a.rhs)];
                    r.constant = Num(a.ratio);
                    r.pass = Some(a.ratio <= CACCIOPPOLI_CAP);
                    r.extra.insert("dissipation".into(), Num(a.dissipation));
                    r.extra.insert("mixed_norm".into(), Num(a.mixed_norm));
                    r
                })
                .collect();
            let mut params = BTreeMap::new();
            params.insert("s".into(), json!(s));
            params.insert("margin".into(), json!(ensemble.margin));
            VerificationReport::new(meta("caccioppoli", traj.config_hash(), ensemble.seed, params), records)
        })
        .collect())
}

/// The constructive iteration-lemma families over a grid of `delta` and `alpha`.
pub fn iteration_families(samples: usize) -> Vec<(String, IterationProblem)> {
    let mut out = Vec::new();
    for delta in [0.0, 0.25, 0.5, 0.75] {
        for alpha in [0.0, 1.0, 2.5, 8.0, 20.0] {
            for t_end in [0.5, 1.0] {
                out.push((
                    format!("saturating-d{delta}-a{alpha}-T{t_end}"),
                    IterationProblem::saturating(delta, 1.0, alpha, t_end, samples),
                ));
                out.push((
                    format!("growing-d{delta}-a{alpha}-T{t_end}"),
                    IterationProblem::growing(delta, 0.5, alpha, t_end, samples),
                ));
            }
        }
    }
    out
}

pub fn iteration_report(samples: usize) -> Result<VerificationReport> {
    let records = iteration_families(samples)
        .into_iter()
        .map(|(key, p)| {
            let c = iteration_lemma_check(&p)?;
            let mut r = Record::new(key, samples as u64);
            r.lhs = Num(c.worst_ratio);
            r.rhs_terms = vec![Num(c.c_delta)];
            r.constant = Num(c.worst_ratio);
            r.pass = Some(c.holds);
            r.extra.insert("delta".into(), Num(p.delta));
            r.extra.insert("lambda".into(), Num(c.lambda));
            r.extra.insert("pairs".into(), Num(c.pairs as f64));
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationReport::new(meta("iteration", "", 0, BTreeMap::new()), records))
}

/// `max_n ||q||_2 / (||d||_BMO ||grad v||_2)` per trajectory.
pub fn pressure_report(trajs: &[(String, &SolutionTrajectory)]) -> Result<VerificationReport> {
    let records = trajs
        .iter()
        .map(|(key, t)| {
            let p = pressure_estimate(t)?;
            let mut r = Record::new(key.clone(), t.grid().lattice().points() as u64);
            r.lhs = Num(p.max_ratio);
            r.rhs_terms = vec![Num(p.bmo_norm)];
            r.constant = Num(p.max_ratio);
            r.pass = Some(p.max_ratio.is_finite());
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let hash = trajs.first().map(|(_, t)| t.config_hash().to_string()).unwrap_or_default();
    Ok(VerificationReport::new(meta("pressure", &hash, 0, BTreeMap::new()), records))
}
