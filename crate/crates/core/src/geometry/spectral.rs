//! Pseudo-spectral derivatives on periodic lattices.
//!
//! Derivative wavenumbers zero the Nyquist mode so that first derivatives of
//! real data stay real and `div`, `grad`, `curl` and the Leray projector share
//! one symbol.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::geometry::field::{ScalarField, VectorField};
use crate::geometry::grid::Lattice;

/// FFT plans and wavenumber tables for one lattice.
pub struct Spectral {
    lattice: Lattice,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kvec: Vec<[f64; 3]>,
    k2: Vec<f64>,
    band: Vec<bool>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("lattice", &self.lattice).finish()
    }
}

type Key = (usize, usize, u64);

/// Shared plan for `lattice`, built on first use.
pub fn plan(lattice: &Lattice) -> Arc<Spectral> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Spectral>>>> = OnceLock::new();
    let key = (lattice.dim(), lattice.points(), lattice.period().to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(key).or_insert_with(|| Arc::new(Spectral::new(lattice))).clone()
}

impl Spectral {
    pub fn new(lattice: &Lattice) -> Self {
        let n = lattice.points();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let base = 2.0 * std::f64::consts::PI / lattice.period();
        let kd: Vec<f64> = (0..n)
            .map(|i| if i == n / 2 { 0.0 } else { base * Lattice::mode(i, n) as f64 })
            .collect();
        let mut kvec = Vec::with_capacity(lattice.len());
        let mut k2 = Vec::with_capacity(lattice.len());
        let mut band = Vec::with_capacity(lattice.len());
        let dim = lattice.dim();
        for idx in lattice.indices() {
            let mut k = [0.0; 3];
            let mut inside = true;
            for a in 0..dim {
                k[a] = kd[idx[a]];
                inside &= 3 * Lattice::mode(idx[a], n).unsigned_abs() < n as u64;
            }
            k2.push(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
            kvec.push(k);
            band.push(inside);
        }
        Self { lattice: *lattice, forward, inverse, kvec, k2, band }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Derivative wave vector at a flat index.
    #[inline]
    pub fn k(&self, flat: usize) -> [f64; 3] {
        self.kvec[flat]
    }

    #[inline]
    pub fn k2(&self, flat: usize) -> f64 {
        self.k2[flat]
    }

    /// Two-thirds band `3 |m_a| < N` on every axis.
    #[inline]
    pub fn in_band(&self, flat: usize) -> bool {
        self.band[flat]
    }

    fn transform(&self, buf: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let s = self.lattice.shape3();
        let n = self.lattice.points();
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let strides = [s[1] * s[2], s[2], 1];
        for a in 0..self.lattice.dim() {
            let stride = strides[a];
            if stride == 1 || (a == 1 && s[2] == 1) {
                fft.process_with_scratch(buf, &mut scratch);
                continue;
            }
            // all lines along axis `a`: start offsets with index 0 on that axis
            let outer = buf.len() / (n * stride);
            for o in 0..outer {
                for inner in 0..stride {
                    let start = o * n * stride + inner;
                    for (i, l) in line.iter_mut().enumerate() {
                        *l = buf[start + i * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (i, l) in line.iter().enumerate() {
                        buf[start + i * stride] = *l;
                    }
                }
            }
        }
    }

    pub fn forward(&self, real: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = real.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.forward);
        buf
    }

    /// Inverse transform, normalized, keeping the real part.
    pub fn inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        let mut buf = spec.to_vec();
        self.transform(&mut buf, &self.inverse);
        let scale = 1.0 / self.lattice.len() as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    /// `i k_a f_hat`.
    pub fn derivative_hat(&self, f_hat: &[Complex64], axis: usize) -> Vec<Complex64> {
        f_hat
            .iter()
            .enumerate()
            .map(|(i, c)| Complex64::new(0.0, self.kvec[i][axis]) * c)
            .collect()
    }

    pub fn gradient_slice(&self, f: &[f64]) -> Vec<Vec<f64>> {
        let fh = self.forward(f);
        (0..self.lattice.dim()).map(|a| self.inverse(&self.derivative_hat(&fh, a))).collect()
    }

    pub fn divergence_slice(&self, u: &[Vec<f64>]) -> Vec<f64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.lattice.len()];
        for (a, c) in u.iter().enumerate() {
            let ch = self.forward(c);
            for (i, v) in acc.iter_mut().enumerate() {
                *v += Complex64::new(0.0, self.kvec[i][a]) * ch[i];
            }
        }
        self.inverse(&acc)
    }

    pub fn curl_slice(&self, u: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if self.lattice.dim() != 3 || u.len() != 3 {
            return Err(Error::Grid("curl needs a 3-d vector field".into()));
        }
        let h: Vec<Vec<Complex64>> = u.iter().map(|c| self.forward(c)).collect();
        let mut out = Vec::with_capacity(3);
        for a in 0..3 {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            let comp: Vec<Complex64> = (0..self.lattice.len())
                .map(|i| {
                    let k = self.kvec[i];
                    Complex64::new(0.0, 1.0) * (k[b] * h[c][i] - k[c] * h[b][i])
                })
                .collect();
            out.push(self.inverse(&comp));
        }
        Ok(out)
    }

    /// Leray projection `P u_hat = u_hat - k (k . u_hat) / |k|^2` in place.
    pub fn leray_hat(&self, u_hat: &mut [Vec<Complex64>]) {
        let d = self.lattice.dim();
        for i in 0..self.lattice.len() {
            let k2 = self.k2[i];
            if k2 == 0.0 {
                continue;
            }
            let k = self.kvec[i];
            let mut dot = Complex64::new(0.0, 0.0);
            for a in 0..d {
                dot += k[a] * u_hat[a][i];
            }
            for a in 0..d {
                u_hat[a][i] -= k[a] * dot / k2;
            }
        }
    }

    pub fn leray_slice(&self, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut h: Vec<Vec<Complex64>> = u.iter().map(|c| self.forward(c)).collect();
        self.leray_hat(&mut h);
        h.iter().map(|c| self.inverse(c)).collect()
    }

    /// Zeroes every mode outside the two-thirds band.
    pub fn dealias_hat(&self, f_hat: &mut [Complex64]) {
        for (i, v) in f_hat.iter_mut().enumerate() {
            if !self.band[i] {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn dealias_slice(&self, f: &[f64]) -> Vec<f64> {
        let mut h = self.forward(f);
        self.dealias_hat(&mut h);
        self.inverse(&h)
    }

    /// Zero-mean solution of `Lap u = f` (the mean of `f` is discarded).
    pub fn poisson_slice(&self, f: &[f64]) -> Vec<f64> {
        let mut h = self.forward(f);
        for (i, v) in h.iter_mut().enumerate() {
            let k2 = self.k2[i];
            *v = if k2 == 0.0 { Complex64::new(0.0, 0.0) } else { -*v / k2 };
        }
        self.inverse(&h)
    }
}

fn per_slice<T>(f: &ScalarField, op: impl Fn(&[f64]) -> T) -> Vec<T> {
    (0..f.grid().steps()).map(|k| op(f.slice(k))).collect()
}

fn assemble(grid: crate::geometry::grid::SpaceTimeGrid, slices: Vec<Vec<f64>>) -> Result<ScalarField> {
    ScalarField::from_data(grid, slices.concat())
}

pub fn gradient(f: &ScalarField) -> Result<VectorField> {
    let sp = plan(f.lattice());
    let grid = *f.grid();
    let d = grid.lattice().dim();
    let slices = per_slice(f, |s| sp.gradient_slice(s));
    let comps = (0..d)
        .map(|a| assemble(grid, slices.iter().map(|g| g[a].clone()).collect()))
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_components(comps)
}

pub fn divergence(u: &VectorField) -> Result<ScalarField> {
    let grid = *u.grid();
    let sp = plan(grid.lattice());
    let slices = (0..grid.steps())
        .map(|k| {
            let comps: Vec<Vec<f64>> = u.components().iter().map(|c| c.slice(k).to_vec()).collect();
            sp.divergence_slice(&comps)
        })
        .collect();
    assemble(grid, slices)
}

pub fn curl(u: &VectorField) -> Result<VectorField> {
    let grid = *u.grid();
    if grid.lattice().dim() != 3 {
        return Err(Error::Grid("curl needs a 3-d vector field".into()));
    }
    let sp = plan(grid.lattice());
    let mut per_time = Vec::with_capacity(grid.steps());
    for k in 0..grid.steps() {
        let comps: Vec<Vec<f64>> = u.components().iter().map(|c| c.slice(k).to_vec()).collect();
        per_time.push(sp.curl_slice(&comps)?);
    }
    let comps = (0..3)
        .map(|a| assemble(grid, per_time.iter().map(|g| g[a].clone()).collect()))
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_components(comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::grid::SpaceTimeGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_slice(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn round_trip() {
        for d in [2, 3] {
            let l = Lattice::new(d, 2.0, 8).unwrap();
            let sp = Spectral::new(&l);
            let f = random_slice(l.len(), 1);
            let back = sp.inverse(&sp.forward(&f));
            for (a, b) in f.iter().zip(&back) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn gradient_of_sine() {
        let g = SpaceTimeGrid::with_dims(3, 3.0, 16, 0.0, 1.0, 2).unwrap();
        let w = 2.0 * PI / 3.0;
        let f = ScalarField::from_fn(g, |x, _| (w * x[0]).sin());
        let gr = gradient(&f).unwrap();
        let want = ScalarField::from_fn(g, |x, _| w * (w * x[0]).cos());
        let err = gr.component(0).combine(1.0, &want, -1.0).unwrap().max_abs();
        assert!(err < 1e-12, "{err}");
        assert!(gr.component(1).max_abs() < 1e-12);
        assert!(gr.component(2).max_abs() < 1e-12);
        let c = gradient(&ScalarField::constant(g, 4.0)).unwrap();
        assert!(c.max_abs() < 1e-12);
    }

    #[test]
    fn vector_identities() {
        let g = SpaceTimeGrid::with_dims(3, 1.0, 16, 0.0, 1.0, 1).unwrap();
        let comps: Vec<ScalarField> = (0..3)
            .map(|c| ScalarField::from_data(g, random_slice(g.samples(), 10 + c)).unwrap())
            .collect();
        let omega = VectorField::from_components(comps).unwrap();
        let dc = divergence(&curl(&omega).unwrap()).unwrap();
        assert!(dc.max_abs() < 1e-10, "{}", dc.max_abs());
        let f = ScalarField::from_data(g, random_slice(g.samples(), 4)).unwrap();
        let cg = curl(&gradient(&f).unwrap()).unwrap();
        assert!(cg.max_abs() < 1e-10, "{}", cg.max_abs());
        let g2 = SpaceTimeGrid::with_dims(2, 1.0, 16, 0.0, 1.0, 1).unwrap();
        assert!(curl(&VectorField::zeros(g2)).is_err());
    }

    #[test]
    fn leray_kills_gradients_and_is_idempotent() {
        let l = Lattice::new(3, 1.0, 16).unwrap();
        let sp = Spectral::new(&l);
        let phi = random_slice(l.len(), 7);
        let grad = sp.gradient_slice(&phi);
        let p = sp.leray_slice(&grad);
        let m = p.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(m < 1e-10);
        let u: Vec<Vec<f64>> = (0..3).map(|c| random_slice(l.len(), 20 + c)).collect();
        let pu = sp.leray_slice(&u);
        let div = sp.divergence_slice(&pu);
        assert!(div.iter().fold(0.0f64, |a, v| a.max(v.abs())) < 1e-10);
        let ppu = sp.leray_slice(&pu);
        for (a, b) in pu.iter().flatten().zip(ppu.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_inverts_laplacian() {
        let l = Lattice::new(2, 1.0, 16).unwrap();
        let sp = Spectral::new(&l);
        let f = sp.dealias_slice(&random_slice(l.len(), 3));
        let u = sp.poisson_slice(&f);
        let lap = sp.divergence_slice(&sp.gradient_slice(&u));
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        for (a, b) in lap.iter().zip(&f) {
            assert!((a - (b - mean)).abs() < 1e-10);
        }
    }
}
