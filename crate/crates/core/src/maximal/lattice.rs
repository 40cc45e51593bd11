//! Grid-aligned parabolic boxes and dense local copies of `|f|` over them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::field::ScalarField;
use crate::geometry::grid::{SpaceTimeGrid, EDGE_TOL};
use crate::geometry::region::ParabolicCube;

/// A box of lattice samples: `width` cells on every active spatial axis,
/// `t_len` time samples. Spatial origins are unwrapped global indices (reduce
/// modulo `N` to address samples), so interval arithmetic inside a parent box
/// never has to deal with the torus seam.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeBox {
    pub origin: [usize; 3],
    pub width: usize,
    pub t_first: usize,
    pub t_len: usize,
}

impl LatticeBox {
    /// Samples of a parabolic cube, which must form a full box.
    pub fn from_cube(grid: &SpaceTimeGrid, cube: &ParabolicCube) -> Result<Self> {
        let lat = grid.lattice();
        let n = lat.points();
        let h = lat.spacing();
        if !(cube.half_side >= 0.5 * h) || cube.half_side > 0.5 * lat.period() + EDGE_TOL * h {
            return Err(Error::Region(format!("cube half-side {} out of range", cube.half_side)));
        }
        let mut origin = [0usize; 3];
        let mut width = None;
        for a in 0..lat.dim() {
            let inside: Vec<bool> = (0..n)
                .map(|i| {
                    let mut x = [0.0; 3];
                    x[a] = i as f64 * h;
                    let mut c = [0.0; 3];
                    c[a] = cube.center[a];
                    lat.displacement(x, c)[a].abs() < cube.half_side - EDGE_TOL * h
                })
                .collect();
            let count = inside.iter().filter(|&&b| b).count();
            if count == 0 {
                return Err(Error::Region("cube contains no spatial samples".into()));
            }
            let start = if count == n {
                0
            } else {
                (0..n).find(|&i| inside[i] && !inside[(i + n - 1) % n]).unwrap_or(0)
            };
            origin[a] = start;
            match width {
                None => width = Some(count),
                Some(w) if w != count => {
                    return Err(Error::Region("cube samples are not a cube".into()));
                }
                _ => {}
            }
        }
        let (lo, hi) = cube.time_interval();
        let tr = grid.time_range(lo, hi);
        if tr.is_empty() {
            return Err(Error::Region("cube contains no time samples".into()));
        }
        Ok(Self { origin, width: width.unwrap_or(1), t_first: tr.start, t_len: tr.len() })
    }

    /// The whole grid as a box (spatial extent `N`).
    pub fn whole(grid: &SpaceTimeGrid) -> Self {
        Self { origin: [0; 3], width: grid.lattice().points(), t_first: 0, t_len: grid.steps() }
    }

    /// Per-axis extents `[t, x0, x1, x2]` for a `dim`-dimensional lattice.
    pub fn dims(&self, dim: usize) -> [usize; 4] {
        [self.t_len, self.width, self.width, if dim == 3 { self.width } else { 1 }]
    }

    pub fn count(&self, dim: usize) -> usize {
        self.dims(dim).iter().product()
    }

    /// Physical cube with the same centre and half-side `width h / 2`;
    /// its time top is the end of the last time cell.
    pub fn to_cube(&self, grid: &SpaceTimeGrid) -> ParabolicCube {
        let lat = grid.lattice();
        let h = lat.spacing();
        let mut c = [0.0; 3];
        for (a, ca) in c.iter_mut().enumerate().take(lat.dim()) {
            let x = (self.origin[a] as f64 + 0.5 * (self.width as f64 - 1.0)) * h;
            *ca = x.rem_euclid(lat.period());
        }
        let t0 = grid.t_start() + (self.t_first + self.t_len) as f64 * grid.tau();
        ParabolicCube::new(c, t0, 0.5 * self.width as f64 * h)
    }

    /// Time length `t_len tau` actually covered.
    pub fn duration(&self, grid: &SpaceTimeGrid) -> f64 {
        self.t_len as f64 * grid.tau()
    }

    pub fn contains_box(&self, other: &LatticeBox, dim: usize) -> bool {
        let space = (0..dim).all(|a| {
            other.origin[a] >= self.origin[a]
                && other.origin[a] + other.width <= self.origin[a] + self.width
        });
        space && other.t_first >= self.t_first && other.t_first + other.t_len <= self.t_first + self.t_len
    }

    pub fn intersects(&self, other: &LatticeBox, dim: usize) -> bool {
        let overlap = |a0: usize, l0: usize, a1: usize, l1: usize| a0 < a1 + l1 && a1 < a0 + l0;
        (0..dim).all(|a| overlap(self.origin[a], self.width, other.origin[a], other.width))
            && overlap(self.t_first, self.t_len, other.t_first, other.t_len)
    }

    /// Global `(time, flat)` of every sample, in local order.
    pub fn samples(&self, grid: &SpaceTimeGrid) -> Vec<(usize, usize)> {
        let lat = grid.lattice();
        let n = lat.points();
        let d = self.dims(lat.dim());
        let mut out = Vec::with_capacity(self.count(lat.dim()));
        for k in 0..d[0] {
            for i0 in 0..d[1] {
                for i1 in 0..d[2] {
                    for i2 in 0..d[3] {
                        let g = [
                            (self.origin[0] + i0) % n,
                            (self.origin[1] + i1) % n,
                            if lat.dim() == 3 { (self.origin[2] + i2) % n } else { 0 },
                        ];
                        out.push((self.t_first + k, lat.flat(g)));
                    }
                }
            }
        }
        out
    }

    /// Spatial-then-temporal subdivision: halve the side when it is even; cut
    /// time into 4 when divisible by 4, else into 2 when even.
    pub fn children(&self, dim: usize) -> Vec<LatticeBox> {
        let (ws, parts_s) = if self.width % 2 == 0 { (self.width / 2, 2) } else { (self.width, 1) };
        let parts_t = if self.t_len % 4 == 0 {
            4
        } else if self.t_len % 2 == 0 {
            2
        } else {
            1
        };
        if parts_s == 1 && parts_t == 1 {
            return Vec::new();
        }
        let lt = self.t_len / parts_t;
        let p2 = if dim == 3 { parts_s } else { 1 };
        let mut out = Vec::with_capacity(parts_t * parts_s * parts_s * p2);
        for pt in 0..parts_t {
            for a in 0..parts_s {
                for b in 0..parts_s {
                    for c in 0..p2 {
                        out.push(LatticeBox {
                            origin: [
                                self.origin[0] + a * ws,
                                self.origin[1] + b * ws,
                                self.origin[2] + if dim == 3 { c * ws } else { 0 },
                            ],
                            width: ws,
                            t_first: self.t_first + pt * lt,
                            t_len: lt,
                        });
                    }
                }
            }
        }
        out
    }

    /// True when repeated subdivision ends in single samples.
    pub fn is_dyadic(&self) -> bool {
        self.width.is_power_of_two() && self.t_len.is_power_of_two()
    }
}

/// Dense copy of `|f|` over a box, layout `[t][x0][x1][x2]`.
#[derive(Clone, Debug)]
pub struct LocalAbs {
    pub bx: LatticeBox,
    pub dims: [usize; 4],
    pub vals: Vec<f64>,
}

impl LocalAbs {
    pub fn gather(f: &ScalarField, bx: &LatticeBox) -> Self {
        let grid = f.grid();
        let vals = bx.samples(grid).into_iter().map(|(k, i)| f.at(k, i).abs()).collect();
        Self { bx: *bx, dims: bx.dims(grid.lattice().dim()), vals }
    }

    #[inline]
    pub fn index(&self, p: [usize; 4]) -> usize {
        ((p[0] * self.dims[1] + p[1]) * self.dims[2] + p[2]) * self.dims[3] + p[3]
    }

    /// Local position of a sub-box's first sample.
    pub fn local_origin(&self, b: &LatticeBox) -> [usize; 4] {
        [
            b.t_first - self.bx.t_first,
            b.origin[0] - self.bx.origin[0],
            b.origin[1] - self.bx.origin[1],
            if self.dims[3] > 1 { b.origin[2] - self.bx.origin[2] } else { 0 },
        ]
    }

    pub fn sub_dims(&self, b: &LatticeBox) -> [usize; 4] {
        [b.t_len, b.width, b.width, if self.dims[3] > 1 { b.width } else { 1 }]
    }

    /// Compensated sum over a sub-box.
    pub fn box_sum(&self, b: &LatticeBox) -> f64 {
        let o = self.local_origin(b);
        let d = self.sub_dims(b);
        let mut sum = 0.0;
        let mut comp = 0.0;
        for k in 0..d[0] {
            for i0 in 0..d[1] {
                for i1 in 0..d[2] {
                    let base = self.index([o[0] + k, o[1] + i0, o[2] + i1, o[3]]);
                    for &v in &self.vals[base..base + d[3]] {
                        let t = sum + v;
                        if sum.abs() >= v.abs() {
                            comp += (sum - t) + v;
                        } else {
                            comp += (v - t) + sum;
                        }
                        sum = t;
                    }
                }
            }
        }
        sum + comp
    }

    pub fn box_mean(&self, b: &LatticeBox) -> f64 {
        self.box_sum(b) / self.sub_dims(b).iter().product::<usize>() as f64
    }
}

/// Inclusive 4-d summed-area table.
pub struct Prefix {
    dims: [usize; 4],
    p: Vec<f64>,
}

impl Prefix {
    pub fn new(local: &LocalAbs) -> Self {
        let d = local.dims;
        let e = [d[0] + 1, d[1] + 1, d[2] + 1, d[3] + 1];
        let idx = |p: [usize; 4]| ((p[0] * e[1] + p[1]) * e[2] + p[2]) * e[3] + p[3];
        let mut p = vec![0.0; e.iter().product()];
        for k in 0..d[0] {
            for a in 0..d[1] {
                for b in 0..d[2] {
                    for c in 0..d[3] {
                        p[idx([k + 1, a + 1, b + 1, c + 1])] = local.vals[local.index([k, a, b, c])];
                    }
                }
            }
        }
        for axis in 0..4 {
            let mut stride = 1;
            for s in (axis + 1)..4 {
                stride *= e[s];
            }
            for i in 0..p.len() {
                let coord = (i / stride) % e[axis];
                if coord > 0 {
                    p[i] += p[i - stride];
                }
            }
        }
        Self { dims: e, p }
    }

    /// Sum over `[lo, lo + len)` on every axis.
    pub fn sum(&self, lo: [usize; 4], len: [usize; 4]) -> f64 {
        let e = self.dims;
        let mut s = 0.0;
        for mask in 0..16u32 {
            let mut p = [0usize; 4];
            let mut sign = 1.0;
            for a in 0..4 {
                if mask & (1 << a) != 0 {
                    p[a] = lo[a] + len[a];
                } else {
                    p[a] = lo[a];
                    sign = -sign;
                }
            }
            s += sign * self.p[((p[0] * e[1] + p[1]) * e[2] + p[2]) * e[3] + p[3]];
        }
        s
    }
}
