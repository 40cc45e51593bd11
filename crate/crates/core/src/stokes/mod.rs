//! Pseudo-spectral solver for the periodic Stokes system with a skew drift,
//!
//! `dt v - div(D grad v) - Lap v + grad q = 0`, `div v = 0`,
//!
//! where `(D grad v)_{ij} = d_{jl} v_{i,l}`, so that `div(D grad v) = -b.grad v`
//! for `b = div d`. The drift is explicit, diffusion is an implicit
//! theta-multiplier, and every step ends with a Leray projection. Pressure is
//! recovered diagnostically from `Lap q = div div(D grad v)`.

pub mod audit;
pub mod initial;

use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bmo::DriftField;
use crate::error::{Error, Result};
use crate::geometry::field::{ScalarField, SkewTensorSlice, VectorField, VectorSlice};
use crate::geometry::grid::{Lattice, SpaceTimeGrid};
use crate::geometry::io::{read_fields, write_fields};
use crate::geometry::spectral::{plan, Spectral};

pub use audit::{
    caccioppoli_audit, caccioppoli_audit_many, energy_identity_audit, energy_identity_audit_many, CaccioppoliAudit, CaccioppoliCylinder, IdentityAudit,
    TestFunction,
};
pub use initial::{initial_velocity, InitialData};

/// Divergence tolerance for initial data and every stored level, relative to
/// `1 + max |grad v|`.
pub const DIV_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepperParams {
    /// `theta` in `[1/2, 1]`; 1 is backward Euler, 1/2 Crank-Nicolson.
    pub imex_theta: f64,
    /// In `(0, 1]`.
    pub cfl_safety: f64,
}

impl Default for StepperParams {
    fn default() -> Self {
        Self { imex_theta: 1.0, cfl_safety: 0.5 }
    }
}

impl StepperParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.imex_theta) {
            return Err(Error::Config(format!("imex_theta = {} not in [1/2, 1]", self.imex_theta)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Config(format!("cfl_safety = {} not in (0, 1]", self.cfl_safety)));
        }
        Ok(())
    }
}

/// Stability guard `cfl min(h^2 / (h + max|d| h), 2 / max|b|^2)`. The second
/// bound is the explicit-drift limit: the theta-step keeps a transported mode
/// bounded only if `tau |b|^2 <= 2`.
pub fn max_stable_tau(lattice: &Lattice, d_max: f64, b_max: f64, cfl: f64) -> f64 {
    let h = lattice.spacing();
    let surrogate = h * h / (h + d_max * h);
    let transport = if b_max > 0.0 { 2.0 / (b_max * b_max) } else { f64::INFINITY };
    cfl * surrogate.min(transport)
}

fn check_tau(lattice: &Lattice, tau: f64, d_max: f64, b_max: f64, cfl: f64) -> Result<()> {
    let suggested = max_stable_tau(lattice, d_max, b_max, cfl);
    if tau > suggested * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { tau, suggested });
    }
    Ok(())
}

/// Solver inputs. `grid.steps()` is the number of time steps; the drift is
/// either steady or sampled on a grid covering `[t_start, t_end]`.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub grid: SpaceTimeGrid,
    pub drift: DriftField,
    pub initial_velocity: VectorSlice,
    pub stepper: StepperParams,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(
        grid: SpaceTimeGrid,
        drift: DriftField,
        initial_velocity: VectorSlice,
        stepper: StepperParams,
        seed: u64,
    ) -> Result<Self> {
        let c = Self { grid, drift, initial_velocity, stepper, seed };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.stepper.validate()?;
        let lat = self.grid.lattice();
        if self.drift.grid().lattice() != lat {
            return Err(Error::GridMismatch("drift lattice differs from the solver lattice".into()));
        }
        if !self.drift.is_steady() {
            let dg = self.drift.grid();
            let eps = 1e-12 * (self.grid.t_end() - self.grid.t_start());
            if dg.t_start() > self.grid.t_start() + eps || dg.t_end() < self.grid.t_end() - eps {
                return Err(Error::GridMismatch("drift does not cover the run interval".into()));
            }
        }
        if self.initial_velocity.lattice != *lat {
            return Err(Error::GridMismatch("initial velocity lattice differs".into()));
        }
        let sp = plan(lat);
        let div = sp.divergence_slice(&self.initial_velocity.comps);
        let grad_max = self
            .initial_velocity
            .comps
            .iter()
            .flat_map(|c| sp.gradient_slice(c))
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let div_max = div.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if div_max > DIV_TOL * (1.0 + grad_max) {
            return Err(Error::Precondition(format!("initial velocity has max |div| = {div_max:e}")));
        }
        check_tau(lat, self.grid.tau(), self.drift.tensor().max_abs(), self.drift.b().max_abs(), self.stepper.cfl_safety)
    }

    pub fn manifest(&self) -> RunManifest {
        let initial_sha256 = sha_of(self.initial_velocity.comps.iter().map(|c| c.as_slice()));
        let drift_sha256 = sha_of(self.drift.tensor().upper().iter().map(|c| c.data()));
        let mut m = RunManifest {
            grid: self.grid,
            drift_grid: *self.drift.grid(),
            stepper: self.stepper,
            seed: self.seed,
            initial_sha256,
            drift_sha256,
            config_hash: String::new(),
        };
        let bytes = serde_json::to_vec(&m).unwrap_or_default();
        m.config_hash = hex::encode(Sha256::digest(bytes));
        m
    }
}

fn sha_of<'a>(slices: impl Iterator<Item = &'a [f64]>) -> String {
    let mut h = Sha256::new();
    for s in slices {
        for v in s {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Everything needed to re-derive a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub grid: SpaceTimeGrid,
    pub drift_grid: SpaceTimeGrid,
    pub stepper: StepperParams,
    pub seed: u64,
    pub initial_sha256: String,
    pub drift_sha256: String,
    /// SHA-256 of this manifest serialized with an empty hash.
    pub config_hash: String,
}

/// Per-level and per-step energy bookkeeping.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergySeries {
    pub tau: f64,
    pub times: Vec<f64>,
    /// `1/2 ||v^n||^2`.
    pub kinetic: Vec<f64>,
    /// `||grad v^n||^2`.
    pub grad_sq: Vec<f64>,
    pub div_max: Vec<f64>,
    /// `||grad v^{n+theta}||^2` with `v^{n+theta} = theta v^{n+1} + (1-theta) v^n`.
    pub step_dissipation: Vec<f64>,
    /// `|<div(D grad v^n), v^n>| / (max|d| ||grad v^n||^2)`.
    pub drift_neutrality: Vec<f64>,
}

impl EnergySeries {
    /// `1/2 ||u0||^2 - (1/2 ||v^n||^2 + tau sum_{k<n} D_k)` per level.
    pub fn inequality_margins(&self) -> Vec<f64> {
        let e0 = self.kinetic.first().copied().unwrap_or(0.0);
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.kinetic.len());
        for (n, e) in self.kinetic.iter().enumerate() {
            if n > 0 {
                acc += self.tau * self.step_dissipation.get(n - 1).copied().unwrap_or(0.0);
            }
            out.push(e0 - e - acc);
        }
        out
    }

    /// Smallest margin relative to `1/2 ||u0||^2` (0 for zero data).
    pub fn worst_relative_margin(&self) -> f64 {
        let e0 = self.kinetic.first().copied().unwrap_or(0.0);
        if e0 == 0.0 {
            return 0.0;
        }
        self.inequality_margins().into_iter().fold(f64::INFINITY, f64::min) / e0
    }

    /// `max_n (E^{n+1} - E^n)`.
    pub fn max_kinetic_increase(&self) -> f64 {
        self.kinetic.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `d_{jl}` as dense per-entry sample arrays, `entries[j * dim + l]`.
struct DenseDrift {
    dim: usize,
    entries: Vec<Vec<f64>>,
    max_abs: f64,
    /// `max |b|` with `b_j = d_{jl,l}`.
    b_max: f64,
}

impl DenseDrift {
    fn new(d: &SkewTensorSlice) -> Self {
        let dim = d.lattice.dim();
        let n = d.lattice.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for j in 0..dim {
            for l in 0..dim {
                entries.push((0..n).map(|x| d.at(j, l, x)).collect());
            }
        }
        let sp = plan(&d.lattice);
        let b_max = (0..dim)
            .map(|j| sp.divergence_slice(&entries[j * dim..(j + 1) * dim]))
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        Self { dim, entries, max_abs: d.max_abs(), b_max }
    }

    fn get(&self, j: usize, l: usize) -> &[f64] {
        &self.entries[j * self.dim + l]
    }
}

type Hat = Vec<Vec<Complex64>>;

struct Engine {
    sp: Arc<Spectral>,
    theta: f64,
    tau: f64,
}

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

impl Engine {
    fn new(lattice: &Lattice, theta: f64, tau: f64) -> Self {
        Self { sp: plan(lattice), theta, tau }
    }

    fn lat(&self) -> &Lattice {
        self.sp.lattice()
    }

    /// `h^d / N^d`, turning `sum |f_hat|^2` into `||f||^2`.
    fn parseval(&self) -> f64 {
        let lat = self.lat();
        lat.cell_volume() / lat.len() as f64
    }

    fn forward(&self, v: &[Vec<f64>]) -> Hat {
        v.iter().map(|c| self.sp.forward(c)).collect()
    }

    fn inverse(&self, vh: &Hat) -> Vec<Vec<f64>> {
        vh.iter().map(|c| self.sp.inverse(c)).collect()
    }

    fn grads(&self, vh: &Hat) -> Vec<Vec<Vec<f64>>> {
        let dim = self.lat().dim();
        vh.iter()
            .map(|c| (0..dim).map(|l| self.sp.inverse(&self.sp.derivative_hat(c, l))).collect())
            .collect()
    }

    fn l2_sq(&self, vh: &Hat) -> f64 {
        vh.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>() * self.parseval()
    }

    fn grad_sq(&self, vh: &Hat) -> f64 {
        let mut s = 0.0;
        for c in vh {
            for (k, z) in c.iter().enumerate() {
                s += self.sp.k2(k) * z.norm_sqr();
            }
        }
        s * self.parseval()
    }

    fn div_hat(&self, vh: &Hat) -> Vec<Complex64> {
        let n = self.lat().len();
        let mut out = vec![ZERO; n];
        for (a, c) in vh.iter().enumerate() {
            for (i, z) in c.iter().enumerate() {
                out[i] += Complex64::new(0.0, self.sp.k(i)[a]) * z;
            }
        }
        out
    }

    /// Dealiased `div(D grad v)` and its relative pairing with `v`.
    fn rhs(&self, vh: &Hat, dd: &DenseDrift) -> (Hat, f64) {
        let dim = self.lat().dim();
        let n = self.lat().len();
        if dd.max_abs == 0.0 {
            return (vec![vec![ZERO; n]; dim], 0.0);
        }
        let g = self.grads(vh);
        let mut fh: Hat = Vec::with_capacity(dim);
        for gi in &g {
            let mut acc = vec![ZERO; n];
            for j in 0..dim {
                let mut p = vec![0.0; n];
                for (l, gil) in gi.iter().enumerate() {
                    let d = dd.get(j, l);
                    for x in 0..n {
                        p[x] += d[x] * gil[x];
                    }
                }
                let ph = self.sp.forward(&p);
                for (i, z) in ph.iter().enumerate() {
                    acc[i] += Complex64::new(0.0, self.sp.k(i)[j]) * z;
                }
            }
            self.sp.dealias_hat(&mut acc);
            fh.push(acc);
        }
        let mut pair = 0.0;
        for (f, v) in fh.iter().zip(vh) {
            for (a, b) in f.iter().zip(v) {
                pair += (a.conj() * b).re;
            }
        }
        pair *= self.parseval();
        let den = dd.max_abs * self.grad_sq(vh);
        (fh, if den > 0.0 { pair.abs() / den } else { 0.0 })
    }

    /// One theta step followed by projection; returns `||grad v^{n+theta}||^2`.
    fn advance(&self, vh: &Hat, fh: &Hat) -> (Hat, f64) {
        let (th, tau) = (self.theta, self.tau);
        let mut out: Hat = vh
            .iter()
            .zip(fh)
            .map(|(v, f)| {
                v.iter()
                    .zip(f)
                    .enumerate()
                    .map(|(k, (a, b))| {
                        let k2 = self.sp.k2(k);
                        (a * (1.0 - (1.0 - th) * tau * k2) + b * tau) / (1.0 + th * tau * k2)
                    })
                    .collect()
            })
            .collect();
        self.sp.leray_hat(&mut out);
        let mid: Hat = out
            .iter()
            .zip(vh)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * th + y * (1.0 - th)).collect())
            .collect();
        let d = self.grad_sq(&mid);
        (out, d)
    }

    /// `q_hat` from `Lap q = div F`.
    fn pressure_hat(&self, fh: &Hat) -> Vec<Complex64> {
        let mut q = self.div_hat(fh);
        for (i, z) in q.iter_mut().enumerate() {
            let k2 = self.sp.k2(i);
            *z = if k2 == 0.0 { ZERO } else { -*z / k2 };
        }
        q
    }
}

fn check_slice(v: &VectorSlice, d: &SkewTensorSlice) -> Result<()> {
    if v.lattice != d.lattice {
        return Err(Error::GridMismatch("velocity and drift lattices differ".into()));
    }
    Ok(())
}

/// `u - grad Lap^{-1} div u`.
pub fn leray_project(u: &VectorSlice) -> VectorSlice {
    let sp = plan(&u.lattice);
    VectorSlice { lattice: u.lattice, comps: sp.leray_slice(&u.comps) }
}

/// Dealiased `div(D grad v)`.
pub fn drift_term(d: &SkewTensorSlice, v: &VectorSlice) -> Result<VectorSlice> {
    check_slice(v, d)?;
    let e = Engine::new(&v.lattice, 1.0, 0.0);
    let (fh, _) = e.rhs(&e.forward(&v.comps), &DenseDrift::new(d));
    Ok(VectorSlice { lattice: v.lattice, comps: e.inverse(&fh) })
}

/// Dealiased `b.grad v`.
pub fn transport_term(b: &VectorSlice, v: &VectorSlice) -> Result<VectorSlice> {
    if b.lattice != v.lattice {
        return Err(Error::GridMismatch("velocity and drift lattices differ".into()));
    }
    let sp = plan(&v.lattice);
    let n = v.lattice.len();
    let comps = v
        .comps
        .iter()
        .map(|c| {
            let g = sp.gradient_slice(c);
            let mut s = vec![0.0; n];
            for (bl, gl) in b.comps.iter().zip(&g) {
                for x in 0..n {
                    s[x] += bl[x] * gl[x];
                }
            }
            sp.dealias_slice(&s)
        })
        .collect();
    Ok(VectorSlice { lattice: v.lattice, comps })
}

/// Zero-mean pressure of `v` under the drift slice `d`.
pub fn pressure_solve_slice(d: &SkewTensorSlice, v: &VectorSlice) -> Result<Vec<f64>> {
    check_slice(v, d)?;
    let e = Engine::new(&v.lattice, 1.0, 0.0);
    let (fh, _) = e.rhs(&e.forward(&v.comps), &DenseDrift::new(d));
    Ok(e.sp.inverse(&e.pressure_hat(&fh)))
}

/// Pressure of `v` under the drift in force at time `t`.
pub fn pressure_solve(drift: &DriftField, v: &VectorSlice, t: f64) -> Result<Vec<f64>> {
    pressure_solve_slice(&drift.tensor_at(t)?, v)
}

/// `max |Lap q - div div(D grad v)| / max |div div(D grad v)|`.
pub fn pressure_residual(d: &SkewTensorSlice, v: &VectorSlice, q: &[f64]) -> Result<f64> {
    let f = drift_term(d, v)?;
    let sp = plan(&v.lattice);
    let rhs = sp.divergence_slice(&f.comps);
    let grad = sp.gradient_slice(q);
    let lap = sp.divergence_slice(&grad);
    let scale = rhs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let err = lap.iter().zip(&rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(if scale > 0.0 { err / scale } else { err })
}

/// One step of length `tau`; returns `v'` and its pressure.
pub fn step(v: &VectorSlice, d: &SkewTensorSlice, tau: f64, stepper: &StepperParams) -> Result<(VectorSlice, Vec<f64>)> {
    stepper.validate()?;
    check_slice(v, d)?;
    let dd = DenseDrift::new(d);
    check_tau(&v.lattice, tau, dd.max_abs, dd.b_max, stepper.cfl_safety)?;
    let e = Engine::new(&v.lattice, stepper.imex_theta, tau);
    let vh = e.forward(&v.comps);
    let (fh, _) = e.rhs(&vh, &dd);
    let (nh, _) = e.advance(&vh, &fh);
    let (f2, _) = e.rhs(&nh, &dd);
    let q = e.sp.inverse(&e.pressure_hat(&f2));
    Ok((VectorSlice { lattice: v.lattice, comps: e.inverse(&nh) }, q))
}

/// How audits obtain `grad v`.
#[derive(Clone, Debug)]
enum GradientSource {
    Spectral,
    /// `grad[i][l]` on the level grid, for analytic data that is not periodic.
    Given(Vec<Vec<ScalarField>>),
}

/// Velocity and pressure on the time levels `t_start + n tau`, `n = 0..=steps`.
#[derive(Clone, Debug)]
pub struct SolutionTrajectory {
    pub v: VectorField,
    pub q: ScalarField,
    pub energy: EnergySeries,
    pub manifest: RunManifest,
    pub drift: DriftField,
    gradient: GradientSource,
    /// `|grad v|^2` on the level grid, filled at first use.
    density: OnceLock<ScalarField>,
}

impl SolutionTrajectory {
    /// Wraps precomputed fields; `gradient` overrides the spectral gradient.
    pub fn from_parts(
        v: VectorField,
        q: ScalarField,
        drift: DriftField,
        gradient: Option<Vec<Vec<ScalarField>>>,
    ) -> Result<Self> {
        let grid = *v.grid();
        if *q.grid() != grid || drift.grid().lattice() != grid.lattice() {
            return Err(Error::GridMismatch("trajectory parts live on different grids".into()));
        }
        if let Some(g) = &gradient {
            if g.len() != v.dim() || g.iter().any(|r| r.len() != v.dim() || r.iter().any(|c| *c.grid() != grid)) {
                return Err(Error::GridMismatch("gradient has the wrong shape".into()));
            }
        }
        let source = match gradient {
            None => GradientSource::Spectral,
            Some(g) => GradientSource::Given(g),
        };
        let mut out = Self {
            v,
            q,
            energy: EnergySeries::default(),
            manifest: RunManifest {
                grid,
                drift_grid: *drift.grid(),
                stepper: StepperParams::default(),
                seed: 0,
                initial_sha256: String::new(),
                drift_sha256: String::new(),
                config_hash: String::new(),
            },
            drift,
            gradient: source,
            density: OnceLock::new(),
        };
        let lat = *grid.lattice();
        out.energy.tau = grid.tau();
        for n in 0..grid.steps() {
            let vs = out.velocity(n);
            out.energy.times.push(grid.time(n));
            out.energy.kinetic.push(0.5 * vs.l2_squared());
            let g = out.velocity_gradient(n);
            let s: f64 = g.iter().flatten().flatten().map(|x| x * x).sum();
            out.energy.grad_sq.push(s * lat.cell_volume());
        }
        Ok(out)
    }

    /// Level grid: sample `n` sits at `t_start + n tau`.
    pub fn grid(&self) -> &SpaceTimeGrid {
        self.v.grid()
    }

    pub fn levels(&self) -> usize {
        self.grid().steps()
    }

    pub fn level_time(&self, n: usize) -> f64 {
        self.grid().time(n)
    }

    pub fn tau(&self) -> f64 {
        self.grid().tau()
    }

    pub fn config_hash(&self) -> &str {
        &self.manifest.config_hash
    }

    pub fn velocity(&self, n: usize) -> VectorSlice {
        self.v.slice(n)
    }

    pub fn pressure(&self, n: usize) -> &[f64] {
        self.q.slice(n)
    }

    /// `grad[i][l] = v_{i,l}` at level `n`.
    pub fn velocity_gradient(&self, n: usize) -> Vec<Vec<Vec<f64>>> {
        match &self.gradient {
            GradientSource::Spectral => {
                let sp = plan(self.grid().lattice());
                self.v.components().iter().map(|c| sp.gradient_slice(c.slice(n))).collect()
            }
            GradientSource::Given(g) => {
                g.iter().map(|row| row.iter().map(|c| c.slice(n).to_vec()).collect()).collect()
            }
        }
    }

    /// Drift tensor in force at level `n`.
    /// `|grad v|^2` at every level, computed once per trajectory.
    pub fn gradient_density(&self) -> &ScalarField {
        self.density.get_or_init(|| {
            let grid = *self.grid();
            let n = grid.lattice().len();
            let mut data = Vec::with_capacity(grid.samples());
            for k in 0..self.levels() {
                let mut s = vec![0.0; n];
                for row in &self.velocity_gradient(k) {
                    for c in row {
                        for (acc, x) in s.iter_mut().zip(c) {
                            *acc += x * x;
                        }
                    }
                }
                data.extend(s);
            }
            ScalarField::from_data(grid, data).expect("level grid sample count")
        })
    }

    pub fn drift_at(&self, n: usize) -> Result<SkewTensorSlice> {
        self.drift.tensor_at(self.level_time(n))
    }

    /// Writes `velocity.bin`, `pressure.bin` and `manifest.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let vp = dir.join("velocity.bin");
        let qp = dir.join("pressure.bin");
        let comps: Vec<&ScalarField> = self.v.components().iter().collect();
        let names: Vec<String> = (0..comps.len()).map(|c| format!("v{c}")).collect();
        let names: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let hash = serde_json::json!({ "config_hash": self.manifest.config_hash });
        write_fields(&vp, &comps, &names, hash.clone())?;
        write_fields(&qp, &[&self.q], &["q"], hash)?;
        let mp = dir.join("manifest.json");
        let doc = serde_json::json!({ "manifest": self.manifest, "energy": self.energy });
        std::fs::write(&mp, serde_json::to_string_pretty(&doc)?)?;
        Ok(vec![vp, qp, mp])
    }

    /// Reads a directory written by [`SolutionTrajectory::save`]; `drift`
    /// must be the run's drift, checked against the stored hash.
    pub fn load(dir: &Path, drift: DriftField) -> Result<Self> {
        let (v, _) = read_fields(&dir.join("velocity.bin"))?;
        let (mut q, _) = read_fields(&dir.join("pressure.bin"))?;
        let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let manifest: RunManifest = serde_json::from_value(doc["manifest"].clone())?;
        let energy: EnergySeries = serde_json::from_value(doc["energy"].clone())?;
        if q.len() != 1 {
            return Err(Error::Format("pressure container must hold one component".into()));
        }
        if sha_of(drift.tensor().upper().iter().map(|c| c.data())) != manifest.drift_sha256 {
            return Err(Error::Format("drift does not match the stored trajectory".into()));
        }
        let mut t = Self::from_parts(VectorField::from_components(v)?, q.remove(0), drift, None)?;
        t.manifest = manifest;
        t.energy = energy;
        Ok(t)
    }
}

/// Runs the configured problem and records every level.
pub fn run(config: &SolverConfig) -> Result<SolutionTrajectory> {
    config.validate()?;
    let grid = config.grid;
    let lat = *grid.lattice();
    let steps = grid.steps();
    let tau = grid.tau();
    let n = lat.len();
    let dim = lat.dim();
    let e = Engine::new(&lat, config.stepper.imex_theta, tau);
    let level = grid.level_grid();

    let mut v_data: Vec<Vec<f64>> = vec![Vec::with_capacity((steps + 1) * n); dim];
    let mut q_data: Vec<f64> = Vec::with_capacity((steps + 1) * n);
    let mut energy = EnergySeries { tau, ..Default::default() };

    let steady = config.drift.is_steady().then(|| DenseDrift::new(&config.drift.tensor().slice(0)));
    let mut vh = e.forward(&config.initial_velocity.comps);
    for k in 0..=steps {
        let t = grid.t_start() + k as f64 * tau;
        let owned;
        let dd = match &steady {
            Some(d) => d,
            None => {
                owned = DenseDrift::new(&config.drift.tensor_at(t)?);
                &owned
            }
        };
        let (fh, neutrality) = e.rhs(&vh, dd);
        for (store, c) in v_data.iter_mut().zip(e.inverse(&vh)) {
            store.extend(c);
        }
        q_data.extend(e.sp.inverse(&e.pressure_hat(&fh)));
        let gsq = e.grad_sq(&vh);
        let div = e.sp.inverse(&e.div_hat(&vh)).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        energy.times.push(t);
        energy.kinetic.push(0.5 * e.l2_sq(&vh));
        energy.grad_sq.push(gsq);
        energy.div_max.push(div);
        if k == steps {
            break;
        }
        check_tau(&lat, tau, dd.max_abs, dd.b_max, config.stepper.cfl_safety)?;
        energy.drift_neutrality.push(neutrality);
        let (next, diss) = e.advance(&vh, &fh);
        energy.step_dissipation.push(diss);
        vh = next;
    }
    let v = VectorField::from_components(
        v_data
            .into_iter()
            .map(|c| ScalarField::from_data(level, c))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let q = ScalarField::from_data(level, q_data)?;
    Ok(SolutionTrajectory {
        v,
        q,
        energy,
        manifest: config.manifest(),
        drift: config.drift.clone(),
        gradient: GradientSource::Spectral,
        density: OnceLock::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmo::{drift_from_stream, drift_from_tensor};
    use crate::geometry::random::{random_scalar, random_vector};
    use crate::geometry::field::SkewTensorField;
    use std::f64::consts::PI;

    fn steady(dim: usize, n: usize) -> SpaceTimeGrid {
        SpaceTimeGrid::with_dims(dim, 1.0, n, 0.0, 1.0, 1).unwrap()
    }

    fn random_tensor(lat: Lattice, seed: u64, amp: f64) -> SkewTensorSlice {
        let mut d = SkewTensorSlice::zeros(lat);
        for (p, c) in d.upper.iter_mut().enumerate() {
            *c = random_scalar(&lat, 3, seed, p as u64).unwrap().into_iter().map(|v| amp * v).collect();
        }
        d
    }

    fn random_drift(g: SpaceTimeGrid, seed: u64, amp: f64) -> DriftField {
        let s = random_tensor(*g.lattice(), seed, amp);
        let up = s.upper.into_iter().map(|c| ScalarField::from_data(g, c).unwrap()).collect();
        drift_from_tensor(SkewTensorField::from_upper(g, up).unwrap()).unwrap()
    }

    #[test]
    fn leray_kills_gradients_and_is_idempotent() {
        let lat = Lattice::new(3, 1.0, 16).unwrap();
        let phi = random_scalar(&lat, 4, 1, 0).unwrap();
        let g = VectorSlice { lattice: lat, comps: plan(&lat).gradient_slice(&phi) };
        assert!(leray_project(&g).max_abs() < 1e-10);
        let u = VectorSlice { lattice: lat, comps: random_vector(&lat, 4, 2, 0, true).unwrap() };
        let p = leray_project(&u);
        for (a, b) in p.comps.iter().flatten().zip(u.comps.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn transport_matches_divergence_form() {
        let g = steady(3, 16);
        let drift = drift_from_stream({
            let c = random_vector(g.lattice(), 2, 5, 0, false).unwrap();
            VectorField::from_components(c.into_iter().map(|x| ScalarField::from_data(g, x).unwrap()).collect())
                .unwrap()
        })
        .unwrap();
        let lat = *g.lattice();
        let v = VectorSlice { lattice: lat, comps: random_vector(&lat, 2, 9, 0, true).unwrap() };
        let f = drift_term(&drift.tensor().slice(0), &v).unwrap();
        let t = transport_term(&drift.b().slice(0), &v).unwrap();
        let scale = t.max_abs();
        for (a, b) in f.comps.iter().flatten().zip(t.comps.iter().flatten()) {
            assert!((a + b).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn pressure_trivial_cases_and_residual() {
        let lat = Lattice::new(3, 1.0, 16).unwrap();
        let v = VectorSlice { lattice: lat, comps: random_vector(&lat, 3, 3, 0, true).unwrap() };
        let q = pressure_solve_slice(&SkewTensorSlice::zeros(lat), &v).unwrap();
        assert!(q.iter().all(|x| *x == 0.0));
        let d = random_tensor(lat, 4, 1.0);
        assert!(pressure_solve_slice(&d, &VectorSlice::zeros(lat)).unwrap().iter().all(|x| *x == 0.0));
        let q = pressure_solve_slice(&d, &v).unwrap();
        assert!(q.iter().sum::<f64>().abs() < 1e-10 * q.len() as f64);
        assert!(pressure_residual(&d, &v, &q).unwrap() < 1e-8);
    }

    #[test]
    fn single_mode_step_matches_heat_decay() {
        let lat = Lattice::new(3, 1.0, 16).unwrap();
        let u = initial_velocity(&lat, &InitialData::SingleMode { mode: [1, 0, 0], component: 1, amplitude: 1.0 })
            .unwrap();
        let tau = 1e-4;
        let (v, q) = step(&u, &SkewTensorSlice::zeros(lat), tau, &StepperParams { imex_theta: 1.0, cfl_safety: 1.0 })
            .unwrap();
        let k2 = (2.0 * PI).powi(2);
        let ratio = v.comps[1][lat.flat([3, 0, 0])] / u.comps[1][lat.flat([3, 0, 0])];
        assert!((ratio - (-k2 * tau).exp()).abs() < (k2 * tau).powi(2));
        assert!(q.iter().all(|x| *x == 0.0));
        let (z, _) = step(&VectorSlice::zeros(lat), &SkewTensorSlice::zeros(lat), tau, &StepperParams::default())
            .unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn step_rejects_large_tau() {
        let lat = Lattice::new(2, 1.0, 16).unwrap();
        let d = random_tensor(lat, 1, 5.0);
        let err = step(&VectorSlice::zeros(lat), &d, 0.1, &StepperParams::default()).unwrap_err();
        match err {
            Error::StepTooLarge { suggested, .. } => {
                assert!((suggested - max_stable_tau(&lat, d.max_abs(), DenseDrift::new(&d).b_max, 0.5)).abs() < 1e-15)
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn drift_run_is_neutral_and_dissipative() {
        let g = SpaceTimeGrid::with_dims(3, 1.0, 16, 0.0, 0.02, 20).unwrap();
        let drift = random_drift(steady(3, 16), 11, 0.2);
        let u = initial_velocity(g.lattice(), &InitialData::Random { modes: 3, amplitude: 1.0, seed: 2 }).unwrap();
        let cfg = SolverConfig::new(g, drift, u, StepperParams::default(), 0).unwrap();
        let traj = run(&cfg).unwrap();
        assert_eq!(traj.levels(), 21);
        assert!(traj.energy.drift_neutrality.iter().all(|x| *x < 1e-12), "{:?}", traj.energy.drift_neutrality);
        assert!(traj.energy.div_max.iter().all(|x| *x < 1e-10));
        assert!(traj.energy.max_kinetic_increase() <= 1e-12);
        for k in 0..traj.levels() {
            let q = traj.pressure(k);
            assert!(q.iter().sum::<f64>().abs() / (q.len() as f64) < 1e-12);
        }
        // determinism
        let again = run(&cfg).unwrap();
        assert_eq!(again.config_hash(), traj.config_hash());
        assert_eq!(again.v.component(0).data(), traj.v.component(0).data());
    }

    #[test]
    fn zero_data_zero_trajectory_and_energy_inequality() {
        let g = SpaceTimeGrid::with_dims(2, 1.0, 16, 0.0, 0.01, 4).unwrap();
        let zero = run(&SolverConfig::new(
            g,
            DriftField::zero(steady(2, 16)).unwrap(),
            VectorSlice::zeros(*g.lattice()),
            StepperParams::default(),
            0,
        )
        .unwrap())
        .unwrap();
        assert_eq!(zero.v.max_abs(), 0.0);
        let u = initial_velocity(g.lattice(), &InitialData::TaylorGreen { amplitude: 1.0 }).unwrap();
        let t =
            run(&SolverConfig::new(g, DriftField::zero(steady(2, 16)).unwrap(), u, StepperParams::default(), 0).unwrap())
                .unwrap();
        assert!(t.energy.inequality_margins().iter().all(|m| *m >= -1e-15));
    }

    #[test]
    fn config_validation() {
        let g = SpaceTimeGrid::with_dims(3, 1.0, 16, 0.0, 0.01, 4).unwrap();
        let drift = DriftField::zero(steady(3, 16)).unwrap();
        let lat = *g.lattice();
        let bad = VectorSlice { lattice: lat, comps: random_vector(&lat, 3, 1, 0, false).unwrap() };
        assert!(SolverConfig::new(g, drift.clone(), bad, StepperParams::default(), 0).is_err());
        let u = VectorSlice::zeros(lat);
        let st = StepperParams { imex_theta: 0.3, cfl_safety: 0.5 };
        assert!(matches!(SolverConfig::new(g, drift.clone(), u.clone(), st, 0), Err(Error::Config(_))));
        let other = DriftField::zero(steady(3, 8)).unwrap();
        assert!(matches!(
            SolverConfig::new(g, other, u, StepperParams::default(), 0),
            Err(Error::GridMismatch(_))
        ));
    }
}
