//! BMO seminorms, solenoidal drifts `b = div d`, the `Gamma` functional, test
//! fields, and the bilinear Hardy-space harness.

pub mod catalog;
pub mod drift;
pub mod hardy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::field::{ScalarField, SkewTensorField};
use crate::geometry::grid::{Lattice, EDGE_TOL};

pub use catalog::{bmo_catalog, catalog_scalar, catalog_stream, catalog_tensor, CatalogSpec};
pub use drift::{drift_from_stream, drift_from_tensor, DriftField};
pub use hardy::{grad_l2, hardy_chain, hardy_maximal, mazver_pairing, mazver_pairing_slice, HardyChain};

/// Balls the BMO sup ranges over: centres on every `stride`-th lattice point,
/// radii from `radii`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallLadder {
    pub stride: usize,
    pub radii: Vec<f64>,
}

impl BallLadder {
    pub fn new(stride: usize, radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() || stride == 0 {
            return Err(Error::EmptyLadder);
        }
        Ok(Self { stride, radii })
    }

    /// Centres at stride 2, radii `2h, 4h, ...` up to `L/4`.
    pub fn geometric(lattice: &Lattice) -> Self {
        let h = lattice.spacing();
        let mut radii = Vec::new();
        let mut r = 2.0 * h;
        while r <= 0.25 * lattice.period() * (1.0 + 1e-12) {
            radii.push(r);
            r *= 2.0;
        }
        Self { stride: 2, radii }
    }

    /// Every lattice point, radii `k h` for `k >= 2` up to `L/4`.
    pub fn exhaustive(lattice: &Lattice) -> Self {
        let h = lattice.spacing();
        let kmax = (0.25 * lattice.period() / h + 1e-9).floor() as usize;
        Self { stride: 1, radii: (2..=kmax).map(|k| k as f64 * h).collect() }
    }

    pub fn centers(&self, lattice: &Lattice) -> Vec<usize> {
        let s = self.stride;
        lattice
            .indices()
            .filter(|idx| (0..lattice.dim()).all(|a| idx[a] % s == 0))
            .map(|idx| lattice.flat(idx))
            .collect()
    }
}

/// Where the BMO sup is taken.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BmoRegion {
    Torus,
    /// Ladder balls `B(c, r)` with `|c - x| + r <= rho`, plus `B(x, rho)` and
    /// the balls `B(x, r)` for the smaller ladder radii.
    Ball { center: [f64; 3], radius: f64 },
}

/// Mean of `|f - [f]_B|` over the listed samples.
pub fn mean_oscillation(values: &[f64], cells: impl Iterator<Item = usize> + Clone) -> f64 {
    let mut n = 0usize;
    let mut s = 0.0;
    for i in cells.clone() {
        s += values[i];
        n += 1;
    }
    if n == 0 {
        return 0.0;
    }
    let m = s / n as f64;
    let dev: f64 = cells.map(|i| (values[i] - m).abs()).sum();
    dev / n as f64
}

/// One ladder ball with its oscillation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallEntry {
    pub center: [f64; 3],
    pub radius: f64,
    pub oscillation: f64,
}

/// Oscillation of every ladder ball on one slice, maximised over the given
/// component slices.
pub fn ladder_entries(comps: &[&[f64]], lattice: &Lattice, ladder: &BallLadder) -> Vec<BallEntry> {
    let centers = ladder.centers(lattice);
    let mut out = Vec::with_capacity(centers.len() * ladder.radii.len());
    for &r in &ladder.radii {
        let offs = lattice.ball_offsets(r);
        for &c in &centers {
            let idx = lattice.unflat(c);
            let cells = offs.iter().map(|o| lattice.flat_wrapped(idx, *o));
            let osc = comps
                .iter()
                .map(|v| mean_oscillation(v, cells.clone()))
                .fold(0.0, f64::max);
            out.push(BallEntry { center: lattice.position(idx), radius: r, oscillation: osc });
        }
    }
    out
}

/// Oscillation of `B(x, rho)` itself, maximised over components.
pub fn ball_oscillation(comps: &[&[f64]], lattice: &Lattice, x: [f64; 3], rho: f64) -> f64 {
    let cells = lattice.ball_cells(x, rho);
    comps
        .iter()
        .map(|v| mean_oscillation(v, cells.iter().copied()))
        .fold(0.0, f64::max)
}

/// Reduces precomputed ladder entries and the direct ball to the seminorm.
pub fn reduce_entries(
    entries: &[BallEntry],
    comps: &[&[f64]],
    lattice: &Lattice,
    region: &BmoRegion,
) -> Result<f64> {
    match *region {
        BmoRegion::Torus => {
            if entries.is_empty() {
                return Err(Error::EmptyLadder);
            }
            Ok(entries.iter().map(|e| e.oscillation).fold(0.0, f64::max))
        }
        BmoRegion::Ball { center, radius } => {
            check_ball(lattice, radius)?;
            let slack = EDGE_TOL * lattice.spacing();
            let inner = entries
                .iter()
                .filter(|e| lattice.distance(e.center, center) + e.radius <= radius + slack)
                .map(|e| e.oscillation)
                .fold(0.0, f64::max);
            // concentric ladder balls keep the sup monotone along ladder radii
            let mut own = ball_oscillation(comps, lattice, center, radius);
            let mut seen: Vec<f64> = Vec::new();
            for e in entries {
                if e.radius < radius - slack && !seen.contains(&e.radius) {
                    seen.push(e.radius);
                    own = own.max(ball_oscillation(comps, lattice, center, e.radius));
                }
            }
            Ok(inner.max(own))
        }
    }
}

fn check_ball(lattice: &Lattice, radius: f64) -> Result<()> {
    if !(radius >= lattice.spacing() && radius < 0.5 * lattice.period()) {
        return Err(Error::Region(format!("BMO ball radius {radius} out of range")));
    }
    Ok(())
}

fn check_ladder(lattice: &Lattice, ladder: &BallLadder) -> Result<()> {
    if ladder.radii.is_empty() {
        return Err(Error::EmptyLadder);
    }
    if ladder.radii.iter().any(|&r| !(r > 0.0 && r < 0.5 * lattice.period())) {
        return Err(Error::Region("ladder radius does not fit the torus".into()));
    }
    Ok(())
}

pub fn slice_seminorm(comps: &[&[f64]], lattice: &Lattice, region: &BmoRegion, ladder: &BallLadder) -> Result<f64> {
    check_ladder(lattice, ladder)?;
    let entries = match region {
        BmoRegion::Torus => ladder_entries(comps, lattice, ladder),
        BmoRegion::Ball { center, radius } => {
            check_ball(lattice, *radius)?;
            let slack = EDGE_TOL * lattice.spacing();
            let keep: Vec<f64> = ladder.radii.iter().copied().filter(|&r| r <= radius + slack).collect();
            if keep.is_empty() {
                Vec::new()
            } else {
                let sub = BallLadder { stride: ladder.stride, radii: keep };
                ladder_entries_near(comps, lattice, &sub, *center, *radius)
            }
        }
    };
    reduce_entries(&entries, comps, lattice, region)
}

/// Ladder entries restricted to centres within `rho` of `x`.
fn ladder_entries_near(comps: &[&[f64]], lattice: &Lattice, ladder: &BallLadder, x: [f64; 3], rho: f64) -> Vec<BallEntry> {
    let centers: Vec<usize> = ladder
        .centers(lattice)
        .into_iter()
        .filter(|&c| lattice.distance(lattice.position(lattice.unflat(c)), x) < rho)
        .collect();
    let mut out = Vec::new();
    for &r in &ladder.radii {
        let offs = lattice.ball_offsets(r);
        for &c in &centers {
            let idx = lattice.unflat(c);
            let cells = offs.iter().map(|o| lattice.flat_wrapped(idx, *o));
            let osc = comps
                .iter()
                .map(|v| mean_oscillation(v, cells.clone()))
                .fold(0.0, f64::max);
            out.push(BallEntry { center: lattice.position(idx), radius: r, oscillation: osc });
        }
    }
    out
}

/// Sup over ladder balls in `region` and over time samples of the mean
/// oscillation of `f`.
pub fn bmo_seminorm(f: &ScalarField, region: &BmoRegion, ladder: &BallLadder) -> Result<f64> {
    let lat = f.lattice();
    let mut best: f64 = 0.0;
    for k in 0..f.grid().steps() {
        best = best.max(slice_seminorm(&[f.slice(k)], lat, region, ladder)?);
    }
    Ok(best)
}

/// Tensor version: max over the independent components.
pub fn bmo_seminorm_tensor(d: &SkewTensorField, region: &BmoRegion, ladder: &BallLadder) -> Result<f64> {
    let lat = *d.grid().lattice();
    let mut best: f64 = 0.0;
    for k in 0..d.grid().steps() {
        let comps: Vec<&[f64]> = d.upper().iter().map(|c| c.slice(k)).collect();
        best = best.max(slice_seminorm(&comps, &lat, region, ladder)?);
    }
    Ok(best)
}
