//! Uniform periodic lattices and their space-time extensions.
//!
//! Samples are cell-centred: spatial sample `i` sits at `i * h` and owns the
//! cell `[(i - 1/2) h, (i + 1/2) h)`; time sample `k` sits at
//! `t_start + (k + 1/2) tau`. A region contains a sample iff the sample
//! position lies inside the region, which makes midpoint quadrature exact on
//! grid-aligned boxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack (in cells) for deciding whether a sample sits on a region
/// boundary; such samples are treated as outside the open region.
pub const EDGE_TOL: f64 = 1e-9;

/// Spatial periodic lattice (a torus of period `period` on each axis).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
    period: f64,
    points: usize,
}

impl Lattice {
    pub fn new(dim: usize, period: f64, points: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Grid(format!("spatial dimension must be 2 or 3, got {dim}")));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Grid(format!("period must be positive, got {period}")));
        }
        if points < 8 || points % 2 != 0 {
            return Err(Error::Grid(format!(
                "points per axis must be even and >= 8, got {points}"
            )));
        }
        Ok(Self { dim, period, points })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn period(&self) -> f64 {
        self.period
    }

    #[inline]
    pub fn points(&self) -> usize {
        self.points
    }

    /// Grid spacing `h = L / N`.
    #[inline]
    pub fn spacing(&self) -> f64 {
        self.period / self.points as f64
    }

    /// Number of spatial samples `N^d`.
    #[inline]
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of one spatial cell, `h^d`.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Shape padded to three axes; a 2-d lattice has a trailing axis of length 1.
    #[inline]
    pub fn shape3(&self) -> [usize; 3] {
        let n = self.points;
        if self.dim == 3 {
            [n, n, n]
        } else {
            [n, n, 1]
        }
    }

    #[inline]
    pub fn flat(&self, idx: [usize; 3]) -> usize {
        let s = self.shape3();
        (idx[0] * s[1] + idx[1]) * s[2] + idx[2]
    }

    #[inline]
    pub fn unflat(&self, flat: usize) -> [usize; 3] {
        let s = self.shape3();
        [flat / (s[1] * s[2]), (flat / s[2]) % s[1], flat % s[2]]
    }

    /// Flat index of `idx + offset` with periodic wrap on the active axes.
    #[inline]
    pub fn flat_wrapped(&self, idx: [usize; 3], offset: [i64; 3]) -> usize {
        let s = self.shape3();
        let mut w = [0usize; 3];
        for a in 0..3 {
            let n = s[a] as i64;
            w[a] = (idx[a] as i64 + offset[a]).rem_euclid(n) as usize;
        }
        self.flat(w)
    }

    /// Physical position of a sample; unused axes report 0.
    #[inline]
    pub fn position(&self, idx: [usize; 3]) -> [f64; 3] {
        let h = self.spacing();
        let mut x = [0.0; 3];
        for (a, xa) in x.iter_mut().enumerate().take(self.dim) {
            *xa = idx[a] as f64 * h;
        }
        x
    }

    /// Minimum-image displacement `x - x0` on the torus.
    #[inline]
    pub fn displacement(&self, x: [f64; 3], x0: [f64; 3]) -> [f64; 3] {
        let l = self.period;
        let mut d = [0.0; 3];
        for a in 0..self.dim {
            let mut v = (x[a] - x0[a]).rem_euclid(l);
            if v >= 0.5 * l {
                v -= l;
            }
            d[a] = v;
        }
        d
    }

    #[inline]
    pub fn distance(&self, x: [f64; 3], x0: [f64; 3]) -> f64 {
        let d = self.displacement(x, x0);
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    /// Iterator over all spatial multi-indices in flat order.
    pub fn indices(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        (0..self.len()).map(move |f| self.unflat(f))
    }

    /// Flat indices of the samples whose positions lie in the open ball
    /// `|x - center| < radius` (periodic).
    pub fn ball_cells(&self, center: [f64; 3], radius: f64) -> Vec<usize> {
        let h = self.spacing();
        let s = self.shape3();
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for a in 0..3 {
            if a < self.dim {
                lo[a] = ((center[a] - radius) / h).floor() as i64 - 1;
                hi[a] = ((center[a] + radius) / h).ceil() as i64 + 1;
                // never visit the same periodic cell twice
                if hi[a] - lo[a] + 1 > s[a] as i64 {
                    lo[a] = 0;
                    hi[a] = s[a] as i64 - 1;
                }
            }
        }
        let mut out = Vec::new();
        for i0 in lo[0]..=hi[0] {
            for i1 in lo[1]..=hi[1] {
                for i2 in lo[2]..=hi[2] {
                    let w = [
                        i0.rem_euclid(s[0] as i64) as usize,
                        i1.rem_euclid(s[1] as i64) as usize,
                        i2.rem_euclid(s[2] as i64) as usize,
                    ];
                    if self.distance(self.position(w), center) < radius - EDGE_TOL * h {
                        out.push(self.flat(w));
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Integer offsets `o` with `|o| h < radius`, for balls centred on samples.
    pub fn ball_offsets(&self, radius: f64) -> Vec<[i64; 3]> {
        let h = self.spacing();
        let k = (radius / h).ceil() as i64;
        let kz = if self.dim == 3 { k } else { 0 };
        let mut out = Vec::new();
        for a in -k..=k {
            for b in -k..=k {
                for c in -kz..=kz {
                    let r = (((a * a + b * b + c * c) as f64).sqrt()) * h;
                    if r < radius - EDGE_TOL * h {
                        out.push([a, b, c]);
                    }
                }
            }
        }
        out
    }

    /// Signed Fourier mode number of index `i` on an axis of length `n`.
    #[inline]
    pub fn mode(i: usize, n: usize) -> i64 {
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }
}

/// Uniform space-time lattice: a periodic spatial lattice times `[t_start, t_end]`
/// cut into `steps` cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    lattice: Lattice,
    t_start: f64,
    t_end: f64,
    steps: usize,
}

impl SpaceTimeGrid {
    pub fn new(lattice: Lattice, t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Grid("time steps must be positive".into()));
        }
        if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
            return Err(Error::Grid(format!(
                "time interval must satisfy t_start < t_end, got [{t_start}, {t_end}]"
            )));
        }
        Ok(Self { lattice, t_start, t_end, steps })
    }

    pub fn with_dims(
        dim: usize,
        period: f64,
        points: usize,
        t_start: f64,
        t_end: f64,
        steps: usize,
    ) -> Result<Self> {
        Self::new(Lattice::new(dim, period, points)?, t_start, t_end, steps)
    }

    #[inline]
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    #[inline]
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    #[inline]
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Number of time samples.
    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn tau(&self) -> f64 {
        (self.t_end - self.t_start) / self.steps as f64
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t_start + (k as f64 + 0.5) * self.tau()
    }

    /// Space-time cell measure `h^d tau`.
    #[inline]
    pub fn cell_measure(&self) -> f64 {
        self.lattice.cell_volume() * self.tau()
    }

    #[inline]
    pub fn samples(&self) -> usize {
        self.lattice.len() * self.steps
    }

    /// Time samples whose centres lie in the open interval `(lo, hi)`.
    pub fn time_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let tau = self.tau();
        // k is inside iff lo < t_start + (k + 1/2) tau < hi
        // centres within EDGE_TOL cells of a boundary count as on it
        let first = ((lo - self.t_start) / tau - 0.5 + EDGE_TOL).floor() as i64 + 1;
        let last = ((hi - self.t_start) / tau - 0.5 - EDGE_TOL).ceil() as i64 - 1;
        let first = first.max(0) as usize;
        let last = last.min(self.steps as i64 - 1);
        if last < first as i64 {
            0..0
        } else {
            first..(last as usize + 1)
        }
    }

    /// Grid whose time samples sit on the time levels `t_start + k tau`,
    /// `k = 0..=steps`; used for solver trajectories.
    pub fn level_grid(&self) -> SpaceTimeGrid {
        let tau = self.tau();
        SpaceTimeGrid {
            lattice: self.lattice,
            t_start: self.t_start - 0.5 * tau,
            t_end: self.t_end + 0.5 * tau,
            steps: self.steps + 1,
        }
    }

    /// The same space-time box refined `k` times in space and time.
    pub fn refined(&self, k: usize) -> Result<SpaceTimeGrid> {
        let l = Lattice::new(self.lattice.dim, self.lattice.period, self.lattice.points * k)?;
        SpaceTimeGrid::new(l, self.t_start, self.t_end, self.steps * k)
    }

    pub fn same_lattice(&self, other: &SpaceTimeGrid) -> bool {
        self.lattice == other.lattice
    }
}
