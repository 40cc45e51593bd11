//! Smooth space/time cut-offs `phi`, `chi`, `eta = chi phi`, weighted means and
//! oscillations.
//!
//! The ramp profile is `S(u) = int_0^u beta / Z` with
//! `beta(s) = exp(-1 / (4 s (1 - s)))`, i.e. the standard bump
//! `exp(-1/(1-y^2))` after `s = (1+y)/2`. `S` is tabulated once and evaluated by
//! cubic Hermite interpolation; `S'` and `S''` are analytic.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::field::{ScalarField, VectorField};
use crate::geometry::grid::{Lattice, SpaceTimeGrid};

const TABLE_INTERVALS: usize = 1 << 14;

fn beta(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / (4.0 * s * (1.0 - s))).exp()
    }
}

fn beta_prime(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        let q = s * (1.0 - s);
        beta(s) * (1.0 - 2.0 * s) / (4.0 * q * q)
    }
}

struct Profile {
    z: f64,
    cumulative: Vec<f64>,
}

fn profile() -> &'static Profile {
    static P: OnceLock<Profile> = OnceLock::new();
    P.get_or_init(|| {
        let n = TABLE_INTERVALS;
        let du = 1.0 / n as f64;
        let mut cumulative = Vec::with_capacity(n + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            let a = i as f64 * du;
            acc += du / 6.0 * (beta(a) + 4.0 * beta(a + 0.5 * du) + beta(a + du));
            cumulative.push(acc);
        }
        let z = acc;
        for c in &mut cumulative {
            *c /= z;
        }
        Profile { z, cumulative }
    })
}

/// Ramp `S`: 0 for `u <= 0`, 1 for `u >= 1`, smooth and increasing in between.
pub fn ramp(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let p = profile();
    let n = TABLE_INTERVALS;
    let x = u * n as f64;
    let i = (x.floor() as usize).min(n - 1);
    let du = 1.0 / n as f64;
    let t = x - i as f64;
    let (y0, y1) = (p.cumulative[i], p.cumulative[i + 1]);
    let (m0, m1) = (ramp_prime(i as f64 * du) * du, ramp_prime((i + 1) as f64 * du) * du);
    let t2 = t * t;
    let t3 = t2 * t;
    let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * m1;
    v.clamp(0.0, 1.0)
}

pub fn ramp_prime(u: f64) -> f64 {
    beta(u) / profile().z
}

pub fn ramp_second(u: f64) -> f64 {
    beta_prime(u) / profile().z
}

/// `max S'`, attained at `u = 1/2`.
pub fn ramp_c1() -> f64 {
    ramp_prime(0.5)
}

/// Smooth cut-offs attached to `Q(z0, R)` with inner radius `r`.
///
/// `phi = 1` on `B(x0, r)`, `phi = 0` off `B(x0, R)`; `chi = 0` for
/// `t <= t0 - R^2`, `chi = 1` for `t >= t0 - r^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffPair {
    pub x0: [f64; 3],
    pub t0: f64,
    pub r: f64,
    pub big_r: f64,
    /// `sup |grad phi| (R - r)`.
    pub c1: f64,
    /// `sup |hess phi| (R - r)^2`, operator norm.
    pub c2: f64,
    /// `sup |chi'| (R - r)^2 / 2`.
    pub ct: f64,
    lattice: Lattice,
}

pub fn build_cutoff(lattice: &Lattice, x0: [f64; 3], t0: f64, r: f64, big_r: f64) -> Result<CutoffPair> {
    if !(r.is_finite() && big_r.is_finite() && r > 0.0 && r < big_r) {
        return Err(Error::DegenerateCutoff(format!("need 0 < r < R, got r = {r}, R = {big_r}")));
    }
    if big_r >= 0.5 * lattice.period() {
        return Err(Error::DegenerateCutoff(format!(
            "outer radius {big_r} does not fit the torus (L/2 = {})",
            0.5 * lattice.period()
        )));
    }
    let h = lattice.spacing();
    if r < h || big_r - r < h {
        return Err(Error::DegenerateCutoff(format!(
            "r = {r} and R - r = {} must both resolve the spacing {h}",
            big_r - r
        )));
    }
    let c1 = ramp_c1();
    let w = big_r - r;
    let mut c2: f64 = 0.0;
    let n = 1 << 14;
    for i in 0..=n {
        let u = i as f64 / n as f64;
        let radial = ramp_second(u).abs();
        let tangential = ramp_prime(u) * w / (r + u * w);
        c2 = c2.max(radial).max(tangential);
    }
    // the sweep under-resolves the sup by O(1/n^2)
    c2 *= 1.0 + 1e-6;
    let ct = 0.5 * c1 * w * w / (big_r * big_r - r * r);
    Ok(CutoffPair { x0, t0, r, big_r, c1, c2, ct, lattice: *lattice })
}

impl CutoffPair {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn width(&self) -> f64 {
        self.big_r - self.r
    }

    fn radial(&self, x: [f64; 3]) -> ([f64; 3], f64) {
        let d = self.lattice.displacement(x, self.x0);
        let rho = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        (d, rho)
    }

    pub fn phi(&self, x: [f64; 3]) -> f64 {
        let (_, rho) = self.radial(x);
        1.0 - ramp((rho - self.r) / self.width())
    }

    pub fn grad_phi(&self, x: [f64; 3]) -> [f64; 3] {
        let (d, rho) = self.radial(x);
        let u = (rho - self.r) / self.width();
        if u <= 0.0 || u >= 1.0 {
            return [0.0; 3];
        }
        let g = -ramp_prime(u) / self.width() / rho;
        [g * d[0], g * d[1], g * d[2]]
    }

    /// Hessian of `phi`.
    pub fn hess_phi(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let (d, rho) = self.radial(x);
        let u = (rho - self.r) / self.width();
        let mut m = [[0.0; 3]; 3];
        if u <= 0.0 || u >= 1.0 {
            return m;
        }
        let w = self.width();
        let p1 = -ramp_prime(u) / w;
        let p2 = -ramp_second(u) / (w * w);
        let dim = self.lattice.dim();
        for a in 0..dim {
            for b in 0..dim {
                let na = d[a] / rho;
                let nb = d[b] / rho;
                let delta = if a == b { 1.0 } else { 0.0 };
                m[a][b] = p2 * na * nb + p1 / rho * (delta - na * nb);
            }
        }
        m
    }

    pub fn lap_phi(&self, x: [f64; 3]) -> f64 {
        let m = self.hess_phi(x);
        m[0][0] + m[1][1] + m[2][2]
    }

    pub fn chi(&self, t: f64) -> f64 {
        let lo = self.t0 - self.big_r * self.big_r;
        ramp((t - lo) / (self.big_r * self.big_r - self.r * self.r))
    }

    pub fn dchi(&self, t: f64) -> f64 {
        let lo = self.t0 - self.big_r * self.big_r;
        let len = self.big_r * self.big_r - self.r * self.r;
        let u = (t - lo) / len;
        if u <= 0.0 || u >= 1.0 {
            0.0
        } else {
            ramp_prime(u) / len
        }
    }

    pub fn eta(&self, x: [f64; 3], t: f64) -> f64 {
        self.chi(t) * self.phi(x)
    }

    /// `phi` sampled on the lattice.
    pub fn sample_phi(&self) -> Vec<f64> {
        let lat = self.lattice;
        lat.indices().map(|i| self.phi(lat.position(i))).collect()
    }

    /// `eta` sampled on a space-time grid.
    pub fn sample_eta(&self, grid: &SpaceTimeGrid) -> Result<ScalarField> {
        if *grid.lattice() != self.lattice {
            return Err(Error::GridMismatch("cut-off built on a different lattice".into()));
        }
        let phi = self.sample_phi();
        let mut data = Vec::with_capacity(grid.samples());
        for k in 0..grid.steps() {
            let c = self.chi(grid.time(k));
            data.extend(phi.iter().map(|p| c * p));
        }
        ScalarField::from_data(*grid, data)
    }

    /// Exhaustive lattice sweep of the support and derivative bounds using
    /// central differences of the sampled cut-offs.
    pub fn sweep_bounds(&self, grid: &SpaceTimeGrid) -> CutoffSweep {
        let lat = self.lattice;
        let h = lat.spacing();
        let dim = lat.dim();
        let phi = self.sample_phi();
        let w = self.width();
        let mut out = CutoffSweep::default();
        for idx in lat.indices() {
            let f = lat.flat(idx);
            let x = lat.position(idx);
            let rho = lat.distance(x, self.x0);
            if rho < self.r {
                out.inner_ok &= phi[f] == 1.0;
            }
            if rho >= self.big_r {
                out.outer_ok &= phi[f] == 0.0;
            }
            let mut off = [0i64; 3];
            let mut grad = [0.0; 3];
            for a in 0..dim {
                off[a] = 1;
                let p = phi[lat.flat_wrapped(idx, off)];
                off[a] = -1;
                let m = phi[lat.flat_wrapped(idx, off)];
                off[a] = 0;
                grad[a] = (p - m) / (2.0 * h);
            }
            let g = (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]).sqrt();
            out.grad_max = out.grad_max.max(g * w);
            let mut hess = [[0.0; 3]; 3];
            for a in 0..dim {
                for b in a..dim {
                    let v = if a == b {
                        off[a] = 1;
                        let p = phi[lat.flat_wrapped(idx, off)];
                        off[a] = -1;
                        let m = phi[lat.flat_wrapped(idx, off)];
                        off[a] = 0;
                        (p - 2.0 * phi[f] + m) / (h * h)
                    } else {
                        let mut s = 0.0;
                        for (sa, sb, sign) in [(1, 1, 1.0), (-1, -1, 1.0), (1, -1, -1.0), (-1, 1, -1.0)] {
                            off[a] = sa;
                            off[b] = sb;
                            s += sign * phi[lat.flat_wrapped(idx, off)];
                        }
                        off[a] = 0;
                        off[b] = 0;
                        s / (4.0 * h * h)
                    };
                    hess[a][b] = v;
                    hess[b][a] = v;
                }
            }
            out.hess_max = out.hess_max.max(symmetric_norm(&hess, dim) * w * w);
        }
        let taus = grid.tau();
        for k in 0..grid.steps() {
            let t = grid.time(k);
            let c = self.chi(t);
            if t <= self.t0 - self.big_r * self.big_r {
                out.chi_low_ok &= c == 0.0;
            }
            if t >= self.t0 - self.r * self.r {
                out.chi_high_ok &= c == 1.0;
            }
            let d = (self.chi(t + taus) - self.chi(t - taus)) / (2.0 * taus);
            out.dchi_max = out.dchi_max.max(d.abs() * w * w);
        }
        out.grad_ok = out.grad_max <= self.c1;
        out.hess_ok = out.hess_max <= self.c2;
        out.dchi_ok = out.dchi_max <= 2.0 * self.ct;
        out
    }
}

/// Results of [`CutoffPair::sweep_bounds`]; maxima are scaled by `(R - r)^i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffSweep {
    pub inner_ok: bool,
    pub outer_ok: bool,
    pub chi_low_ok: bool,
    pub chi_high_ok: bool,
    pub grad_max: f64,
    pub hess_max: f64,
    pub dchi_max: f64,
    pub grad_ok: bool,
    pub hess_ok: bool,
    pub dchi_ok: bool,
}

impl Default for CutoffSweep {
    fn default() -> Self {
        Self {
            inner_ok: true,
            outer_ok: true,
            chi_low_ok: true,
            chi_high_ok: true,
            grad_max: 0.0,
            hess_max: 0.0,
            dchi_max: 0.0,
            grad_ok: false,
            hess_ok: false,
            dchi_ok: false,
        }
    }
}

impl CutoffSweep {
    pub fn all_ok(&self) -> bool {
        self.inner_ok
            && self.outer_ok
            && self.chi_low_ok
            && self.chi_high_ok
            && self.grad_ok
            && self.hess_ok
            && self.dchi_ok
    }
}

/// Spectral norm of a symmetric 2x2 or 3x3 matrix.
pub fn symmetric_norm(m: &[[f64; 3]; 3], dim: usize) -> f64 {
    if dim == 2 {
        let (a, b, c) = (m[0][0], m[0][1], m[1][1]);
        let mid = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        return (mid + rad).abs().max((mid - rad).abs());
    }
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    if p1 == 0.0 {
        return (0..3).fold(0.0f64, |acc, i| acc.max(m[i][i].abs()));
    }
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (m[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let phi = (0.5 * det).clamp(-1.0, 1.0).acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    e1.abs().max(e2.abs()).max(e3.abs())
}

/// Time sample whose cell contains `t`.
pub fn time_index(grid: &SpaceTimeGrid, t: f64) -> Result<usize> {
    let eps = 1e-12 * (grid.t_end() - grid.t_start());
    if !(t >= grid.t_start() - eps && t <= grid.t_end() + eps) {
        return Err(Error::Region(format!(
            "time {t} outside [{}, {}]",
            grid.t_start(),
            grid.t_end()
        )));
    }
    let k = ((t - grid.t_start()) / grid.tau()).floor().max(0.0) as usize;
    Ok(k.min(grid.steps() - 1))
}

/// `int f phi^2 dx / int phi^2 dx` on time sample `k`.
pub fn weighted_mean_at(f: &ScalarField, cutoff: &CutoffPair, k: usize) -> Result<f64> {
    if *f.lattice() != cutoff.lattice {
        return Err(Error::GridMismatch("cut-off built on a different lattice".into()));
    }
    let phi = cutoff.sample_phi();
    weighted_mean_with(f.slice(k), &phi)
}

fn weighted_mean_with(slice: &[f64], phi: &[f64]) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (v, p) in slice.iter().zip(phi) {
        let w = p * p;
        num += v * w;
        den += w;
    }
    if den <= 0.0 {
        return Err(Error::DegenerateCutoff("cut-off has no weight on the lattice".into()));
    }
    Ok(num / den)
}

/// Weighted mean at the time sample containing `t`.
pub fn weighted_mean(f: &ScalarField, cutoff: &CutoffPair, t: f64) -> Result<f64> {
    let k = time_index(f.grid(), t)?;
    weighted_mean_at(f, cutoff, k)
}

/// Which time-sliced mean an oscillation subtracts.
#[derive(Clone, Copy, Debug)]
pub enum OscillationMode<'a> {
    /// `f - f_{x0,r,R}(t)` with the `phi^2`-weighted mean.
    Weighted(&'a CutoffPair),
    /// `f - [f]_{x0,R}(t)` with the plain ball mean.
    Ball { center: [f64; 3], radius: f64 },
}

/// Per-slice means subtracted by [`oscillation`].
pub fn slice_means(f: &ScalarField, mode: OscillationMode<'_>) -> Result<Vec<f64>> {
    let grid = f.grid();
    match mode {
        OscillationMode::Weighted(c) => {
            if *f.lattice() != c.lattice {
                return Err(Error::GridMismatch("cut-off built on a different lattice".into()));
            }
            let phi = c.sample_phi();
            (0..grid.steps()).map(|k| weighted_mean_with(f.slice(k), &phi)).collect()
        }
        OscillationMode::Ball { center, radius } => {
            let lat = f.lattice();
            if !(radius >= lat.spacing()) {
                return Err(Error::Region(format!("ball radius {radius} below the spacing")));
            }
            let cells = lat.ball_cells(center, radius);
            if cells.is_empty() {
                return Err(Error::Region("ball contains no samples".into()));
            }
            Ok((0..grid.steps())
                .map(|k| {
                    let s = f.slice(k);
                    cells.iter().map(|&i| s[i]).sum::<f64>() / cells.len() as f64
                })
                .collect())
        }
    }
}

pub fn oscillation(f: &ScalarField, mode: OscillationMode<'_>) -> Result<ScalarField> {
    let means = slice_means(f, mode)?;
    let mut out = f.clone();
    let n = f.lattice().len();
    for (k, m) in means.iter().enumerate() {
        for v in &mut out.data_mut()[k * n..(k + 1) * n] {
            *v -= m;
        }
    }
    Ok(out)
}

pub fn vector_oscillation(u: &VectorField, mode: OscillationMode<'_>) -> Result<VectorField> {
    let comps = u
        .components()
        .iter()
        .map(|c| oscillation(c, mode))
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_components(comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lat() -> Lattice {
        Lattice::new(3, 1.0, 16).unwrap()
    }

    #[test]
    fn ramp_endpoints_and_monotone() {
        assert_eq!(ramp(0.0), 0.0);
        assert_eq!(ramp(1.0), 1.0);
        assert!((ramp(0.5) - 0.5).abs() < 1e-12);
        let mut prev = 0.0;
        for i in 0..=1000 {
            let v = ramp(i as f64 / 1000.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn ramp_derivative_matches_table() {
        for &u in &[0.1, 0.3, 0.5, 0.77] {
            let e = 1e-5;
            let fd = (ramp(u + e) - ramp(u - e)) / (2.0 * e);
            assert!((fd - ramp_prime(u)).abs() < 1e-7, "{u}");
            let fd2 = (ramp_prime(u + e) - ramp_prime(u - e)) / (2.0 * e);
            assert!((fd2 - ramp_second(u)).abs() < 1e-5, "{u}");
        }
    }

    #[test]
    fn cutoff_pointwise() {
        let c = build_cutoff(&lat(), [0.5; 3], 1.0, 0.15, 0.35).unwrap();
        assert_eq!(c.phi([0.5; 3]), 1.0);
        assert_eq!(c.phi([0.85, 0.5, 0.5]), 0.0);
        assert_eq!(c.eta([0.5; 3], 1.0 - 0.35 * 0.35), 0.0);
        assert_eq!(c.chi(1.0 - 0.15 * 0.15), 1.0);
    }

    #[test]
    fn rejects_bad_radii() {
        let l = lat();
        assert!(build_cutoff(&l, [0.0; 3], 1.0, 0.3, 0.3).is_err());
        assert!(build_cutoff(&l, [0.0; 3], 1.0, 0.3, 0.5).is_err());
        assert!(build_cutoff(&l, [0.0; 3], 1.0, 0.01, 0.3).is_err());
    }

    #[test]
    fn hessian_and_laplacian_match_finite_differences() {
        let c = build_cutoff(&lat(), [0.5; 3], 1.0, 0.1, 0.4).unwrap();
        let x = [0.73, 0.41, 0.55];
        let e = 1e-5;
        let mut lap = 0.0;
        for a in 0..3 {
            let mut p = x;
            p[a] += e;
            let mut m = x;
            m[a] -= e;
            let gp = c.grad_phi(p);
            let gm = c.grad_phi(m);
            let h = c.hess_phi(x);
            for b in 0..3 {
                assert!(((gp[b] - gm[b]) / (2.0 * e) - h[a][b]).abs() < 1e-4);
            }
            let fd = (c.phi(p) - c.phi(m)) / (2.0 * e);
            assert!((fd - c.grad_phi(x)[a]).abs() < 1e-6);
            lap += h[a][a];
        }
        assert!((lap - c.lap_phi(x)).abs() < 1e-12);
    }

    #[test]
    fn sweep_bounds_hold() {
        let l = Lattice::new(3, 1.0, 32).unwrap();
        let g = SpaceTimeGrid::new(l, 0.0, 0.3, 60).unwrap();
        for (r, big_r) in [(0.1, 0.2), (0.05, 0.4), (0.2, 0.25)] {
            let c = build_cutoff(&l, [0.43, 0.5, 0.61], 0.3, r, big_r).unwrap();
            let s = c.sweep_bounds(&g);
            assert!(s.all_ok(), "{s:?}");
        }
    }

    #[test]
    fn symmetric_norm_matches_diagonal() {
        let m = [[2.0, 0.0, 0.0], [0.0, -5.0, 0.0], [0.0, 0.0, 1.0]];
        assert!((symmetric_norm(&m, 3) - 5.0).abs() < 1e-12);
        let r = [[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 0.0]];
        assert!((symmetric_norm(&r, 3) - 3.0).abs() < 1e-12);
        assert!((symmetric_norm(&r, 2) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_mean_constant_and_oracle() {
        let l = lat();
        let g = SpaceTimeGrid::new(l, 0.0, 1.0, 3).unwrap();
        let c = build_cutoff(&l, [0.5; 3], 1.0, 0.1, 0.3).unwrap();
        let f = ScalarField::constant(g, -1.25);
        assert!((weighted_mean(&f, &c, 0.5).unwrap() + 1.25).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f64> = (0..g.samples()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = ScalarField::from_data(g, data).unwrap();
        let k = 1;
        let mut num = 0.0;
        let mut den = 0.0;
        for idx in l.indices() {
            let p = c.phi(l.position(idx));
            num += f.at(k, l.flat(idx)) * p * p;
            den += p * p;
        }
        let got = weighted_mean_at(&f, &c, k).unwrap();
        assert!((got - num / den).abs() < 1e-14);
    }

    #[test]
    fn oscillation_has_zero_means() {
        let l = lat();
        let g = SpaceTimeGrid::new(l, 0.0, 1.0, 3).unwrap();
        let c = build_cutoff(&l, [0.2, 0.3, 0.4], 1.0, 0.1, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..g.samples()).map(|_| rng.gen_range(0.0..4.0)).collect();
        let f = ScalarField::from_data(g, data).unwrap();
        let o = oscillation(&f, OscillationMode::Weighted(&c)).unwrap();
        for k in 0..3 {
            assert!(weighted_mean_at(&o, &c, k).unwrap().abs() < 1e-12);
        }
        let mode = OscillationMode::Ball { center: [0.2, 0.3, 0.4], radius: 0.25 };
        let o = oscillation(&f, mode).unwrap();
        for m in slice_means(&o, mode).unwrap() {
            assert!(m.abs() < 1e-12);
        }
        let zero = oscillation(&ScalarField::constant(g, 2.0), mode).unwrap();
        assert!(zero.max_abs() < 1e-15);
    }
}
