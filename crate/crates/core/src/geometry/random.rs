//! Seeded band-limited random fields.
//!
//! A field is a trigonometric sum over the integer modes `0 < |m|_inf <= K`
//! with standard normal coefficients, drawn in a fixed mode order, so the same
//! seed gives the same continuous function at every resolution that resolves
//! the band. Fields are scaled to unit RMS.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::grid::Lattice;
use crate::geometry::spectral::plan;

/// Modes `m` with `0 < |m|_inf <= k` whose first nonzero entry is positive.
pub fn half_modes(dim: usize, k: i64) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    let kz = if dim == 3 { k } else { 0 };
    for a in -k..=k {
        for b in -k..=k {
            for c in -kz..=kz {
                let m = [a, b, c];
                let first = m.iter().copied().find(|&v| v != 0);
                if matches!(first, Some(v) if v > 0) {
                    out.push(m);
                }
            }
        }
    }
    out
}

fn check_band(lattice: &Lattice, k: usize) -> Result<()> {
    if k == 0 || 3 * k >= lattice.points() {
        return Err(Error::Precondition(format!(
            "band limit {k} must satisfy 0 < 3K < N = {}",
            lattice.points()
        )));
    }
    Ok(())
}

fn flat_of_mode(lattice: &Lattice, m: [i64; 3]) -> usize {
    let n = lattice.points() as i64;
    let mut idx = [0usize; 3];
    for a in 0..lattice.dim() {
        idx[a] = m[a].rem_euclid(n) as usize;
    }
    lattice.flat(idx)
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Samples `sum_m a_m cos(k.x) + b_m sin(k.x)` given per-mode `(a, b)`.
fn synthesize(lattice: &Lattice, modes: &[[i64; 3]], coeffs: &[(f64, f64)]) -> Vec<f64> {
    let sp = plan(lattice);
    let big = lattice.len() as f64;
    let mut hat = vec![Complex64::new(0.0, 0.0); lattice.len()];
    for (m, &(a, b)) in modes.iter().zip(coeffs) {
        let neg = [-m[0], -m[1], -m[2]];
        hat[flat_of_mode(lattice, *m)] += Complex64::new(a, -b) * (0.5 * big);
        hat[flat_of_mode(lattice, neg)] += Complex64::new(a, b) * (0.5 * big);
    }
    sp.inverse(&hat)
}

/// Unit-RMS random scalar on one slice.
pub fn random_scalar(lattice: &Lattice, k: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
    check_band(lattice, k)?;
    let modes = half_modes(lattice.dim(), k as i64);
    let mut r = rng(seed, stream);
    let mut coeffs: Vec<(f64, f64)> = modes
        .iter()
        .map(|_| (StandardNormal.sample(&mut r), StandardNormal.sample(&mut r)))
        .collect();
    let power: f64 = coeffs.iter().map(|(a, b)| 0.5 * (a * a + b * b)).sum();
    let s = 1.0 / power.sqrt();
    for c in &mut coeffs {
        c.0 *= s;
        c.1 *= s;
    }
    Ok(synthesize(lattice, &modes, &coeffs))
}

/// Random vector field with unit RMS magnitude; `solenoidal` projects each
/// mode's coefficients orthogonally to its wave vector.
pub fn random_vector(lattice: &Lattice, k: usize, seed: u64, stream: u64, solenoidal: bool) -> Result<Vec<Vec<f64>>> {
    check_band(lattice, k)?;
    let d = lattice.dim();
    let modes = half_modes(d, k as i64);
    let mut r = rng(seed, stream);
    let mut coeffs: Vec<Vec<(f64, f64)>> = vec![Vec::with_capacity(modes.len()); d];
    let mut power = 0.0;
    for m in &modes {
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        for c in 0..d {
            a[c] = StandardNormal.sample(&mut r);
            b[c] = StandardNormal.sample(&mut r);
        }
        if solenoidal {
            let k2: f64 = (0..d).map(|c| (m[c] * m[c]) as f64).sum();
            let da: f64 = (0..d).map(|c| a[c] * m[c] as f64).sum::<f64>() / k2;
            let db: f64 = (0..d).map(|c| b[c] * m[c] as f64).sum::<f64>() / k2;
            for c in 0..d {
                a[c] -= da * m[c] as f64;
                b[c] -= db * m[c] as f64;
            }
        }
        for c in 0..d {
            power += 0.5 * (a[c] * a[c] + b[c] * b[c]);
            coeffs[c].push((a[c], b[c]));
        }
    }
    let s = if power > 0.0 { 1.0 / power.sqrt() } else { 0.0 };
    Ok(coeffs
        .into_iter()
        .map(|mut cc| {
            for c in &mut cc {
                c.0 *= s;
                c.1 *= s;
            }
            synthesize(lattice, &modes, &cc)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rms(v: &[f64]) -> f64 {
        (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
    }

    #[test]
    fn unit_rms_and_deterministic() {
        let l = Lattice::new(3, 1.0, 16).unwrap();
        let a = random_scalar(&l, 3, 42, 0).unwrap();
        let b = random_scalar(&l, 3, 42, 0).unwrap();
        assert_eq!(a, b);
        assert!((rms(&a) - 1.0).abs() < 1e-12);
        assert_ne!(a, random_scalar(&l, 3, 42, 1).unwrap());
        assert!(random_scalar(&l, 6, 1, 0).is_err());
    }

    #[test]
    fn resolution_independent() {
        let coarse = Lattice::new(2, 1.0, 16).unwrap();
        let fine = Lattice::new(2, 1.0, 32).unwrap();
        let a = random_scalar(&coarse, 4, 9, 0).unwrap();
        let b = random_scalar(&fine, 4, 9, 0).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let va = a[coarse.flat([i, j, 0])];
                let vb = b[fine.flat([2 * i, 2 * j, 0])];
                assert!((va - vb).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn solenoidal_fields_are_divergence_free() {
        let l = Lattice::new(3, 2.0, 16).unwrap();
        let u = random_vector(&l, 4, 5, 0, true).unwrap();
        let div = plan(&l).divergence_slice(&u);
        assert!(div.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-12);
        let s: f64 = u.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>()).sum::<f64>() / l.len() as f64;
        assert!((s - 1.0).abs() < 1e-12);
    }
}
