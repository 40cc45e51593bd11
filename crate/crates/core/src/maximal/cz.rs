//! Calderon-Zygmund stopping-time decomposition on lattice boxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::field::ScalarField;
use crate::geometry::region::ParabolicCube;
use crate::maximal::lattice::{LatticeBox, LocalAbs};

/// One stopped cube with its mean of `|f|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppedCube {
    pub center: [f64; 3],
    pub t0: f64,
    pub half_side: f64,
    /// Time length covered by the lattice box (equals `half_side^2` only when
    /// the box is exactly parabolic).
    pub duration: f64,
    pub mean: f64,
    pub lattice: LatticeBox,
}

/// Output of [`cz_decompose`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeFamily {
    pub parent: ParabolicCube,
    pub parent_lattice: LatticeBox,
    pub level: f64,
    pub parent_mean: f64,
    pub cubes: Vec<StoppedCube>,
}

/// Results of [`CubeFamily::check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzCheck {
    pub disjoint: bool,
    pub contained: bool,
    /// `|f| <= t` at every sample off the union.
    pub bounded_off_union: bool,
    /// Every sample with `|f| > t` lies in a stopped cube.
    pub covered: bool,
    /// `t < mean <= 2^{d+2} t` for each cube.
    pub mean_bounds: bool,
    /// `mean <= 2^8 t` for each cube.
    pub paper_bound: bool,
    pub max_ratio: f64,
}

impl CzCheck {
    pub fn all_ok(&self) -> bool {
        self.disjoint && self.contained && self.bounded_off_union && self.covered && self.mean_bounds && self.paper_bound
    }
}

/// Largest possible `mean / t` for a stopped cube, `2^{d+2}`.
pub fn child_bound(dim: usize) -> f64 {
    (1u32 << (dim + 2)) as f64
}

pub fn cz_decompose(f: &ScalarField, c0: &ParabolicCube, t: f64) -> Result<CubeFamily> {
    let bx = LatticeBox::from_cube(f.grid(), c0)?;
    cz_decompose_box(f, &bx, t)
}

pub fn cz_decompose_box(f: &ScalarField, c0: &LatticeBox, t: f64) -> Result<CubeFamily> {
    let grid = *f.grid();
    let dim = grid.lattice().dim();
    if !c0.is_dyadic() {
        return Err(Error::Precondition(format!(
            "CZ parent needs power-of-two width and time length, got {} x {}",
            c0.width, c0.t_len
        )));
    }
    let loc = LocalAbs::gather(f, c0);
    let parent_mean = loc.box_mean(c0);
    if !(t >= parent_mean) {
        return Err(Error::Precondition(format!("level {t} is below the parent mean {parent_mean}")));
    }
    let mut stopped = Vec::new();
    let mut stack = vec![*c0];
    while let Some(b) = stack.pop() {
        for c in b.children(dim) {
            let m = loc.box_mean(&c);
            if m > t {
                stopped.push((c, m));
            } else if c.count(dim) > 1 {
                stack.push(c);
            }
        }
    }
    stopped.sort_by(|a, b| a.0.cmp(&b.0));
    let cubes = stopped
        .into_iter()
        .map(|(b, mean)| {
            let c = b.to_cube(&grid);
            StoppedCube {
                center: c.center,
                t0: c.t0,
                half_side: c.half_side,
                duration: b.duration(&grid),
                mean,
                lattice: b,
            }
        })
        .collect();
    Ok(CubeFamily { parent: c0.to_cube(&grid), parent_lattice: *c0, level: t, parent_mean, cubes })
}

impl CubeFamily {
    /// Exhaustive check of the decomposition properties against `f`.
    pub fn check(&self, f: &ScalarField) -> CzCheck {
        let grid = *f.grid();
        let dim = grid.lattice().dim();
        let t = self.level;
        let p = &self.parent_lattice;
        let mut disjoint = true;
        for (i, a) in self.cubes.iter().enumerate() {
            for b in &self.cubes[i + 1..] {
                if a.lattice.intersects(&b.lattice, dim) {
                    disjoint = false;
                }
            }
        }
        let contained = self.cubes.iter().all(|c| p.contains_box(&c.lattice, dim));
        let loc = LocalAbs::gather(f, p);
        let mut inside = vec![false; loc.vals.len()];
        for c in &self.cubes {
            let o = loc.local_origin(&c.lattice);
            let sd = loc.sub_dims(&c.lattice);
            for k in 0..sd[0] {
                for a in 0..sd[1] {
                    for b in 0..sd[2] {
                        for e in 0..sd[3] {
                            inside[loc.index([o[0] + k, o[1] + a, o[2] + b, o[3] + e])] = true;
                        }
                    }
                }
            }
        }
        let mut bounded_off_union = true;
        let mut covered = true;
        for (v, &ins) in loc.vals.iter().zip(&inside) {
            if !ins && *v > t {
                bounded_off_union = false;
                covered = false;
            }
        }
        let bound = child_bound(dim);
        let mut max_ratio: f64 = 0.0;
        let mut mean_bounds = true;
        let mut paper_bound = true;
        for c in &self.cubes {
            let m = loc.box_mean(&c.lattice);
            mean_bounds &= m > t && m <= bound * t && m == c.mean;
            paper_bound &= m <= 256.0 * t;
            max_ratio = max_ratio.max(m / t);
        }
        CzCheck { disjoint, contained, bounded_off_union, covered, mean_bounds, paper_bound, max_ratio }
    }

    /// Total measure of the stopped cubes.
    pub fn measure(&self, cell_measure: f64, dim: usize) -> f64 {
        self.cubes.iter().map(|c| c.lattice.count(dim) as f64).sum::<f64>() * cell_measure
    }
}
