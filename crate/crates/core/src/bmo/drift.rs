//! Solenoidal drifts `b_i = d_{ij,j}` built from skew tensors or stream fields.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use crate::bmo::{check_ladder, ladder_entries, reduce_entries, BallEntry, BallLadder, BmoRegion};
use crate::error::{Error, Result};
use crate::geometry::field::{ScalarField, SkewTensorField, SkewTensorSlice, VectorField};
use crate::geometry::grid::SpaceTimeGrid;
use crate::geometry::spectral::{curl, plan};

type GammaKey = ([u64; 3], u64, u64);

/// Drift `b = div d` with its skew potential `d` (and stream field `omega`
/// when built from one). A drift whose grid has a single time sample is
/// steady and applies at every time.
pub struct DriftField {
    omega: Option<VectorField>,
    tensor: SkewTensorField,
    b: VectorField,
    ladder: BallLadder,
    atlas: OnceLock<Vec<Vec<BallEntry>>>,
    gamma_cache: RwLock<HashMap<GammaKey, f64>>,
}

impl Clone for DriftField {
    fn clone(&self) -> Self {
        Self {
            omega: self.omega.clone(),
            tensor: self.tensor.clone(),
            b: self.b.clone(),
            ladder: self.ladder.clone(),
            atlas: OnceLock::new(),
            gamma_cache: RwLock::new(HashMap::new()),
        }
    }
}

impl std::fmt::Debug for DriftField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DriftField")
            .field("grid", self.tensor.grid())
            .field("from_stream", &self.omega.is_some())
            .finish()
    }
}

/// `b_i = sum_j d_{ij,j}` on every time sample.
fn divergence_rows(d: &SkewTensorField) -> Result<VectorField> {
    let grid = *d.grid();
    let lat = *grid.lattice();
    let sp = plan(&lat);
    let dim = lat.dim();
    let mut comps: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.samples()); dim];
    for k in 0..grid.steps() {
        let s = d.slice(k);
        for (i, comp) in comps.iter_mut().enumerate() {
            let row: Vec<Vec<f64>> = (0..dim)
                .map(|j| (0..lat.len()).map(|x| s.at(i, j, x)).collect())
                .collect();
            comp.extend(sp.divergence_slice(&row));
        }
    }
    VectorField::from_components(
        comps.into_iter().map(|c| ScalarField::from_data(grid, c)).collect::<Result<Vec<_>>>()?,
    )
}

pub fn drift_from_tensor(d: SkewTensorField) -> Result<DriftField> {
    let b = divergence_rows(&d)?;
    let ladder = BallLadder::geometric(d.grid().lattice());
    Ok(DriftField {
        omega: None,
        tensor: d,
        b,
        ladder,
        atlas: OnceLock::new(),
        gamma_cache: RwLock::new(HashMap::new()),
    })
}

/// `d_{ij} = eps_{ijk} omega_k`, so that `b = rot omega`.
pub fn drift_from_stream(omega: VectorField) -> Result<DriftField> {
    if omega.dim() != 3 {
        return Err(Error::Grid("stream form needs d = 3".into()));
    }
    let d = SkewTensorField::from_stream(&omega)?;
    let mut out = drift_from_tensor(d)?;
    out.omega = Some(omega);
    Ok(out)
}

impl DriftField {
    /// The zero drift on `grid`.
    pub fn zero(grid: SpaceTimeGrid) -> Result<Self> {
        drift_from_tensor(SkewTensorField::zeros(grid))
    }

    /// Uses `ladder` for `Gamma` and BMO sups instead of the default geometric one.
    pub fn with_ladder(mut self, ladder: BallLadder) -> Self {
        self.ladder = ladder;
        self.atlas = OnceLock::new();
        self.gamma_cache = RwLock::new(HashMap::new());
        self
    }

    pub fn ladder(&self) -> &BallLadder {
        &self.ladder
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        self.tensor.grid()
    }

    pub fn tensor(&self) -> &SkewTensorField {
        &self.tensor
    }

    pub fn b(&self) -> &VectorField {
        &self.b
    }

    pub fn omega(&self) -> Option<&VectorField> {
        self.omega.as_ref()
    }

    pub fn is_steady(&self) -> bool {
        self.grid().steps() == 1
    }

    pub fn is_zero(&self) -> bool {
        self.tensor.max_abs() == 0.0
    }

    /// Tensor slice in force at time `t`.
    pub fn tensor_at(&self, t: f64) -> Result<SkewTensorSlice> {
        if self.is_steady() {
            return Ok(self.tensor.slice(0));
        }
        let k = crate::geometry::cutoff::time_index(self.grid(), t)?;
        Ok(self.tensor.slice(k))
    }

    /// `max |div b|`.
    pub fn div_b_max(&self) -> Result<f64> {
        Ok(crate::geometry::spectral::divergence(&self.b)?.max_abs())
    }

    /// `max |b - rot omega|` when built from a stream field.
    pub fn stream_consistency(&self) -> Result<Option<f64>> {
        match &self.omega {
            None => Ok(None),
            Some(w) => {
                let c = curl(w)?;
                let mut m: f64 = 0.0;
                for (a, b) in c.components().iter().zip(self.b.components()) {
                    m = m.max(a.combine(1.0, b, -1.0)?.max_abs());
                }
                Ok(Some(m))
            }
        }
    }

    /// BMO seminorm of `d` over the torus (time sup included).
    pub fn bmo_norm(&self) -> Result<f64> {
        let atlas = self.atlas()?;
        let lat = *self.grid().lattice();
        let mut best: f64 = 0.0;
        for (k, entries) in atlas.iter().enumerate() {
            let comps: Vec<&[f64]> = self.tensor.upper().iter().map(|c| c.slice(k)).collect();
            if comps.is_empty() {
                continue;
            }
            best = best.max(reduce_entries(entries, &comps, &lat, &BmoRegion::Torus)?);
        }
        Ok(best)
    }

    fn atlas(&self) -> Result<&Vec<Vec<BallEntry>>> {
        let lat = *self.grid().lattice();
        check_ladder(&lat, &self.ladder)?;
        Ok(self.atlas.get_or_init(|| {
            (0..self.grid().steps())
                .map(|k| {
                    let comps: Vec<&[f64]> = self.tensor.upper().iter().map(|c| c.slice(k)).collect();
                    ladder_entries(&comps, &lat, &self.ladder)
                })
                .collect()
        }))
    }

    /// Computes the ladder oscillation atlas now (useful before sharing).
    pub fn warm(&self) -> Result<()> {
        self.atlas().map(|_| ())
    }

    /// `Gamma(z, rho)`: sup over time samples in `(t - rho^2, t)` of the BMO
    /// seminorm of `d` on `B(x, rho)`.
    pub fn gamma(&self, x: [f64; 3], t: f64, rho: f64) -> Result<f64> {
        let key = (x.map(f64::to_bits), t.to_bits(), rho.to_bits());
        if let Some(v) = self.gamma_cache.read().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(*v);
        }
        let v = self.gamma_uncached(x, t, rho)?;
        self.gamma_cache.write().unwrap_or_else(|e| e.into_inner()).insert(key, v);
        Ok(v)
    }

    fn gamma_uncached(&self, x: [f64; 3], t: f64, rho: f64) -> Result<f64> {
        let grid = *self.grid();
        let lat = *grid.lattice();
        let slices: Vec<usize> = if self.is_steady() {
            vec![0]
        } else {
            let r = grid.time_range(t - rho * rho, t);
            if r.is_empty() {
                return Err(Error::Region(format!("no drift samples in ({}, {t})", t - rho * rho)));
            }
            r.collect()
        };
        if self.tensor.upper().is_empty() {
            return Ok(0.0);
        }
        let atlas = self.atlas()?;
        let region = BmoRegion::Ball { center: x, radius: rho };
        let mut best: f64 = 0.0;
        for k in slices {
            let comps: Vec<&[f64]> = self.tensor.upper().iter().map(|c| c.slice(k)).collect();
            best = best.max(reduce_entries(&atlas[k], &comps, &lat, &region)?);
        }
        Ok(best)
    }

    pub fn cached_gammas(&self) -> usize {
        self.gamma_cache.read().map(|m| m.len()).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmo::bmo_seminorm_tensor;
    use crate::geometry::random::random_vector;
    use std::f64::consts::PI;

    fn steady(n: usize) -> SpaceTimeGrid {
        SpaceTimeGrid::with_dims(3, 1.0, n, 0.0, 1.0, 1).unwrap()
    }

    fn random_stream(g: SpaceTimeGrid, seed: u64) -> VectorField {
        let u = random_vector(g.lattice(), 3, seed, 0, false).unwrap();
        VectorField::from_components(u.into_iter().map(|c| ScalarField::from_data(g, c).unwrap()).collect())
            .unwrap()
    }

    #[test]
    fn zero_stream_gives_zero_drift() {
        let g = steady(8);
        let d = drift_from_stream(VectorField::zeros(g)).unwrap();
        assert_eq!(d.b().max_abs(), 0.0);
        assert_eq!(d.tensor().max_abs(), 0.0);
        assert_eq!(d.gamma([0.5; 3], 0.5, 0.25).unwrap(), 0.0);
    }

    #[test]
    fn single_mode_stream() {
        let g = steady(16);
        let w = 2.0 * PI;
        let omega = VectorField::from_fn(g, |x, _| [0.0, 0.0, (w * x[0]).sin()]);
        let d = drift_from_stream(omega).unwrap();
        let want = ScalarField::from_fn(g, |x, _| -w * (w * x[0]).cos());
        assert!(d.b().component(1).combine(1.0, &want, -1.0).unwrap().max_abs() < 1e-12);
        assert!(d.b().component(0).max_abs() < 1e-12);
        assert!(d.b().component(2).max_abs() < 1e-12);
    }

    #[test]
    fn random_stream_is_solenoidal_and_consistent() {
        let g = steady(16);
        let d = drift_from_stream(random_stream(g, 4)).unwrap();
        assert!(d.div_b_max().unwrap() < 1e-10);
        assert!(d.stream_consistency().unwrap().unwrap() < 1e-10);
    }

    #[test]
    fn gamma_matches_direct_seminorm_and_grows() {
        let g = steady(16);
        let d = drift_from_stream(random_stream(g, 6)).unwrap();
        let x = [0.31, 0.5, 0.62];
        let mut prev = 0.0;
        for rho in [0.125, 0.2, 0.25, 0.3] {
            let gm = d.gamma(x, 0.8, rho).unwrap();
            let direct =
                bmo_seminorm_tensor(d.tensor(), &BmoRegion::Ball { center: x, radius: rho }, d.ladder()).unwrap();
            assert_eq!(gm, direct);
            prev = gm;
        }
        // monotone along ladder radii
        let a = d.gamma(x, 0.8, 0.125).unwrap();
        let b = d.gamma(x, 0.8, 0.25).unwrap();
        assert!(b >= a);
        assert!(d.cached_gammas() >= 4);
        assert_eq!(d.gamma(x, 0.8, 0.3).unwrap(), prev);
    }

    #[test]
    fn constant_tensor_has_zero_gamma() {
        let g = steady(8);
        let up: Vec<ScalarField> = (0..3).map(|c| ScalarField::constant(g, c as f64 + 1.0)).collect();
        let d = drift_from_tensor(SkewTensorField::from_upper(g, up).unwrap()).unwrap();
        assert_eq!(d.gamma([0.5; 3], 0.0, 0.3).unwrap(), 0.0);
        assert!(d.b().max_abs() < 1e-12);
    }
}
