//! The bilinear pairing `int (D grad u) : grad v` and the mollified maximal
//! function `H_s` of the density `u_{i,l} eps_{jls} v_{i,j}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bmo::drift::DriftField;
use crate::error::{Error, Result};
use crate::geometry::field::{SkewTensorSlice, VectorSlice};
use crate::geometry::grid::Lattice;
use crate::geometry::spectral::{plan, Spectral};

/// `grad[i][l] = u_{i,l}`.
pub fn slice_gradient(u: &VectorSlice) -> Vec<Vec<Vec<f64>>> {
    let sp = plan(&u.lattice);
    u.comps.iter().map(|c| sp.gradient_slice(c)).collect()
}

/// `||grad u||_2`.
pub fn grad_l2(u: &VectorSlice) -> f64 {
    let g = slice_gradient(u);
    let s: f64 = g.iter().flatten().flatten().map(|v| v * v).sum();
    (s * u.lattice.cell_volume()).sqrt()
}

fn check_same(a: &Lattice, b: &Lattice) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch("operands live on different lattices".into()));
    }
    Ok(())
}

/// `sum_x u_{i,l} d_{jl} v_{i,j} h^d`.
pub fn mazver_pairing_slice(d: &SkewTensorSlice, u: &VectorSlice, v: &VectorSlice) -> Result<f64> {
    check_same(&d.lattice, &u.lattice)?;
    check_same(&d.lattice, &v.lattice)?;
    let lat = d.lattice;
    let dim = lat.dim();
    let gu = slice_gradient(u);
    let gv = slice_gradient(v);
    let mut total = 0.0;
    for x in 0..lat.len() {
        let m = d.matrix(x);
        let mut s = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                for l in 0..dim {
                    s += gu[i][l][x] * m[j][l] * gv[i][j][x];
                }
            }
        }
        total += s;
    }
    Ok(total * lat.cell_volume())
}

/// Pairing with a steady drift's tensor.
pub fn mazver_pairing(drift: &DriftField, u: &VectorSlice, v: &VectorSlice) -> Result<f64> {
    if !drift.is_steady() {
        return Err(Error::Precondition("pairing needs a steady drift".into()));
    }
    mazver_pairing_slice(&drift.tensor().slice(0), u, v)
}

fn levi(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

fn bump(q: f64) -> f64 {
    if q >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - q * q)).exp()
    }
}

fn bump_prime(q: f64) -> f64 {
    if q >= 1.0 {
        0.0
    } else {
        let w = 1.0 - q * q;
        bump(q) * (-2.0 * q / (w * w))
    }
}

/// Sampled mollifier `Phi_rho` renormalised to unit quadrature mass, and its
/// analytic gradient with the same normalisation.
fn mollifier(lat: &Lattice, rho: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if !(rho >= 2.0 * lat.spacing() && rho < 0.5 * lat.period()) {
        return Err(Error::Region(format!("mollifier radius {rho} out of range")));
    }
    let dim = lat.dim();
    let mut phi = vec![0.0; lat.len()];
    let mut grad = vec![vec![0.0; lat.len()]; dim];
    for (f, idx) in lat.indices().enumerate() {
        let y = lat.displacement(lat.position(idx), [0.0; 3]);
        let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        let q = r / rho;
        phi[f] = bump(q);
        if r > 0.0 {
            let dp = bump_prime(q) / rho;
            for a in 0..dim {
                grad[a][f] = dp * y[a] / r;
            }
        }
    }
    let mass: f64 = phi.iter().sum::<f64>() * lat.cell_volume();
    for v in &mut phi {
        *v /= mass;
    }
    for g in &mut grad {
        for v in g.iter_mut() {
            *v /= mass;
        }
    }
    Ok((phi, grad))
}

/// `(K * g)(x) = sum_y K(x - y) g(y) h^d` via FFT, with `K_hat` given.
fn convolve(sp: &Spectral, k_hat: &[Complex64], g: &[f64]) -> Vec<f64> {
    let gh = sp.forward(g);
    let prod: Vec<Complex64> = gh.iter().zip(k_hat).map(|(a, b)| a * b).collect();
    let hd = sp.lattice().cell_volume();
    sp.inverse(&prod).into_iter().map(|v| v * hd).collect()
}

fn density(gu: &[Vec<Vec<f64>>], gv: &[Vec<Vec<f64>>], s: usize, n: usize) -> Vec<f64> {
    let mut g = vec![0.0; n];
    for i in 0..3 {
        for j in 0..3 {
            for l in 0..3 {
                let e = levi(j, l, s);
                if e == 0.0 {
                    continue;
                }
                for x in 0..n {
                    g[x] += e * gu[i][l][x] * gv[i][j][x];
                }
            }
        }
    }
    g
}

fn check_hardy(u: &VectorSlice, v: &VectorSlice, s: usize, radii: &[f64]) -> Result<()> {
    check_same(&u.lattice, &v.lattice)?;
    if u.lattice.dim() != 3 {
        return Err(Error::Grid("H_s needs d = 3".into()));
    }
    if s > 2 {
        return Err(Error::Precondition(format!("index s = {s} must be 0, 1 or 2")));
    }
    if radii.is_empty() {
        return Err(Error::EmptyLadder);
    }
    Ok(())
}

/// `H_s(x) = sup_rho |(Phi_rho * (u_{i,l} eps_{jls} v_{i,j}))(x)|` over the ladder.
pub fn hardy_maximal(u: &VectorSlice, v: &VectorSlice, s: usize, radii: &[f64]) -> Result<Vec<f64>> {
    check_hardy(u, v, s, radii)?;
    let lat = u.lattice;
    let sp = plan(&lat);
    let g = density(&slice_gradient(u), &slice_gradient(v), s, lat.len());
    let mut out = vec![0.0f64; lat.len()];
    for &rho in radii {
        let (phi, _) = mollifier(&lat, rho)?;
        let c = convolve(&sp, &sp.forward(&phi), &g);
        for (o, v) in out.iter_mut().zip(c) {
            *o = o.max(v.abs());
        }
    }
    Ok(out)
}

/// Pointwise monitors for the chain `H_s <= c M^{2/3}(|grad u|^{3/2}) M^{2/3}(|grad v|^{3/2})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardyChain {
    pub h_s: Vec<f64>,
    /// Sup over the ladder of the integrated-by-parts form with the mean of
    /// `u` over `B(x, rho)` subtracted.
    pub by_parts: Vec<f64>,
    pub bound: Vec<f64>,
    /// `max |H_s - by_parts| / max H_s`.
    pub by_parts_gap: f64,
    /// `max_x H_s / bound` over points with a positive bound.
    pub constant: f64,
    pub h_s_l1: f64,
}

pub fn hardy_chain(u: &VectorSlice, v: &VectorSlice, s: usize, radii: &[f64]) -> Result<HardyChain> {
    check_hardy(u, v, s, radii)?;
    let lat = u.lattice;
    let n = lat.len();
    let sp = plan(&lat);
    let gu = slice_gradient(u);
    let gv = slice_gradient(v);
    let g = density(&gu, &gv, s, n);
    // w[i][l] = eps_{jls} v_{i,j}
    let mut w = vec![vec![vec![0.0; n]; 3]; 3];
    for (i, wi) in w.iter_mut().enumerate() {
        for (l, wil) in wi.iter_mut().enumerate() {
            for j in 0..3 {
                let e = levi(j, l, s);
                if e != 0.0 {
                    for x in 0..n {
                        wil[x] += e * gv[i][j][x];
                    }
                }
            }
        }
    }
    let mag = |gr: &[Vec<Vec<f64>>]| -> Vec<f64> {
        (0..n)
            .map(|x| {
                let s: f64 = gr.iter().flatten().map(|c| c[x] * c[x]).sum();
                s.sqrt().powf(1.5)
            })
            .collect()
    };
    let au = mag(&gu);
    let av = mag(&gv);
    let mut h_s = vec![0.0f64; n];
    let mut by_parts = vec![0.0f64; n];
    let mut mu = vec![0.0f64; n];
    let mut mv = vec![0.0f64; n];
    for &rho in radii {
        let (phi, dphi) = mollifier(&lat, rho)?;
        let c = convolve(&sp, &sp.forward(&phi), &g);
        // normalised ball indicator for means over B(x, rho)
        let offs = lat.ball_offsets(rho);
        let mut ball = vec![0.0; n];
        let vol = offs.len() as f64 * lat.cell_volume();
        for o in &offs {
            ball[lat.flat_wrapped([0; 3], *o)] = 1.0 / vol;
        }
        let ball_hat = sp.forward(&ball);
        let means: Vec<Vec<f64>> = u.comps.iter().map(|c| convolve(&sp, &ball_hat, c)).collect();
        let mut j = vec![0.0; n];
        for l in 0..3 {
            let k_hat = sp.forward(&dphi[l]);
            for i in 0..3 {
                let uw: Vec<f64> = (0..n).map(|x| u.comps[i][x] * w[i][l][x]).collect();
                let a = convolve(&sp, &k_hat, &uw);
                let b = convolve(&sp, &k_hat, &w[i][l]);
                for x in 0..n {
                    j[x] += a[x] - means[i][x] * b[x];
                }
            }
        }
        let mu_r = convolve(&sp, &ball_hat, &au);
        let mv_r = convolve(&sp, &ball_hat, &av);
        for x in 0..n {
            h_s[x] = h_s[x].max(c[x].abs());
            by_parts[x] = by_parts[x].max(j[x].abs());
            mu[x] = mu[x].max(mu_r[x]);
            mv[x] = mv[x].max(mv_r[x]);
        }
    }
    let bound: Vec<f64> = (0..n).map(|x| mu[x].max(0.0).powf(2.0 / 3.0) * mv[x].max(0.0).powf(2.0 / 3.0)).collect();
    let hmax = h_s.iter().fold(0.0f64, |m, v| m.max(*v));
    let gap = h_s.iter().zip(&by_parts).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let constant = h_s
        .iter()
        .zip(&bound)
        .filter(|(_, b)| **b > 0.0)
        .fold(0.0f64, |m, (a, b)| m.max(a / b));
    let h_s_l1 = h_s.iter().sum::<f64>() * lat.cell_volume();
    Ok(HardyChain {
        h_s,
        by_parts,
        bound,
        by_parts_gap: if hmax > 0.0 { gap / hmax } else { 0.0 },
        constant,
        h_s_l1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::random::random_vector;

    fn rand_slice(lat: Lattice, seed: u64) -> VectorSlice {
        VectorSlice { lattice: lat, comps: random_vector(&lat, 3, seed, 0, false).unwrap() }
    }

    #[test]
    fn zero_u_gives_zero() {
        let lat = Lattice::new(3, 1.0, 16).unwrap();
        let v = rand_slice(lat, 1);
        let h = hardy_maximal(&VectorSlice::zeros(lat), &v, 0, &[0.125, 0.25]).unwrap();
        assert!(h.iter().all(|x| *x == 0.0));
        assert!(matches!(hardy_maximal(&v, &v, 0, &[]), Err(Error::EmptyLadder)));
    }

    #[test]
    fn homogeneity() {
        let lat = Lattice::new(3, 1.0, 16).unwrap();
        let u = rand_slice(lat, 2);
        let v = rand_slice(lat, 3);
        let radii = [0.125, 0.25];
        let a = hardy_maximal(&u, &v, 1, &radii).unwrap();
        let b = hardy_maximal(&u.scaled(2.0), &v, 1, &radii).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((2.0 * x - y).abs() < 1e-10 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn mollifier_has_unit_mass() {
        let lat = Lattice::new(3, 1.0, 16).unwrap();
        let (phi, grad) = mollifier(&lat, 0.25).unwrap();
        assert!((phi.iter().sum::<f64>() * lat.cell_volume() - 1.0).abs() < 1e-12);
        // odd kernel integrates to zero
        assert!(grad[0].iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn chain_monitors_agree() {
        let lat = Lattice::new(3, 1.0, 16).unwrap();
        let u = rand_slice(lat, 4);
        let v = rand_slice(lat, 5);
        let c = hardy_chain(&u, &v, 2, &[0.125, 0.25]).unwrap();
        let h = hardy_maximal(&u, &v, 2, &[0.125, 0.25]).unwrap();
        assert_eq!(c.h_s, h);
        assert!(c.constant.is_finite() && c.constant > 0.0);
        assert!(c.by_parts_gap < 0.5, "{}", c.by_parts_gap);
    }

    #[test]
    fn pairing_of_u_with_itself_vanishes() {
        let lat = Lattice::new(3, 1.0, 16).unwrap();
        let u = rand_slice(lat, 6);
        let mut d = SkewTensorSlice::zeros(lat);
        for (p, c) in d.upper.iter_mut().enumerate() {
            *c = random_vector(&lat, 3, 30 + p as u64, 0, false).unwrap().remove(0);
        }
        let p = mazver_pairing_slice(&d, &u, &u).unwrap();
        let scale = d.max_abs() * grad_l2(&u).powi(2);
        assert!(p.abs() <= 1e-12 * scale);
        let v = rand_slice(lat, 7);
        let a = mazver_pairing_slice(&d, &u, &v).unwrap();
        let b = mazver_pairing_slice(&d, &v, &u).unwrap();
        // (D grad u) : grad v is antisymmetric in (u, v)
        assert!((a + b).abs() < 1e-10 * a.abs().max(1.0));
    }
}
