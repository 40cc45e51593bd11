//! Parabolic regions and midpoint-rule integrals over them.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::field::ScalarField;
use crate::geometry::grid::{Lattice, SpaceTimeGrid, EDGE_TOL};

/// `Q(z0, R) = B(x0, R) x (t0 - R^2, t0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicCylinder {
    pub center: [f64; 3],
    pub t0: f64,
    pub radius: f64,
}

/// `C(z0, R) = {max_i |x^i - x0^i| < R} x (t0 - R^2, t0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicCube {
    pub center: [f64; 3],
    pub t0: f64,
    pub half_side: f64,
}

impl ParabolicCylinder {
    pub fn new(center: [f64; 3], t0: f64, radius: f64) -> Self {
        Self { center, t0, radius }
    }

    /// Same centre, radius multiplied by `factor`.
    pub fn enlarged(&self, factor: f64) -> Self {
        Self { radius: self.radius * factor, ..*self }
    }

    /// Open time interval `(t0 - R^2, t0)`.
    pub fn time_interval(&self) -> (f64, f64) {
        (self.t0 - self.radius * self.radius, self.t0)
    }

    /// True if the cylinder lies in the grid's space-time box without wrapping
    /// onto itself.
    pub fn embedded_in(&self, grid: &SpaceTimeGrid) -> bool {
        let (lo, hi) = self.time_interval();
        let eps = 1e-12 * (grid.t_end() - grid.t_start());
        self.radius < 0.5 * grid.lattice().period()
            && lo >= grid.t_start() - eps
            && hi <= grid.t_end() + eps
    }
}

impl ParabolicCube {
    pub fn new(center: [f64; 3], t0: f64, half_side: f64) -> Self {
        Self { center, t0, half_side }
    }

    pub fn time_interval(&self) -> (f64, f64) {
        (self.t0 - self.half_side * self.half_side, self.t0)
    }
}

/// Any region a mean, norm or oscillation can range over.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    Cylinder(ParabolicCylinder),
    Cube(ParabolicCube),
    /// Spatial ball at a single time sample.
    Ball { center: [f64; 3], radius: f64, time_index: usize },
    /// A whole time sample.
    TimeSlice(usize),
    /// The full space-time grid.
    Whole,
}

/// Sample set of a region: a product of spatial samples and a time range.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionCells {
    pub spatial: Vec<usize>,
    pub times: Range<usize>,
    /// Quadrature weight per sample (`h^d tau` or `h^d` for spatial regions).
    pub weight: f64,
}

impl RegionCells {
    pub fn count(&self) -> usize {
        self.spatial.len() * self.times.len()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.weight
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }
}

fn check_radius(lattice: &Lattice, r: f64, what: &str) -> Result<()> {
    if !(r.is_finite() && r >= lattice.spacing()) {
        return Err(Error::Region(format!(
            "{what} {r} is below the grid spacing {}",
            lattice.spacing()
        )));
    }
    if r > 0.5 * lattice.period() {
        return Err(Error::Region(format!(
            "{what} {r} exceeds half the period {}",
            0.5 * lattice.period()
        )));
    }
    Ok(())
}

/// Spatial samples of the open cube `max_i |x^i - c^i| < half_side`.
pub fn cube_cells(lattice: &Lattice, center: [f64; 3], half_side: f64) -> Vec<usize> {
    let d = lattice.dim();
    let s = lattice.shape3();
    let mut axes: Vec<Vec<usize>> = Vec::with_capacity(3);
    for (a, &extent) in s.iter().enumerate() {
        if a < d {
            let mut pts: Vec<usize> = (0..extent)
                .filter(|&i| {
                    let mut x = [0.0; 3];
                    x[a] = lattice.position([i, i, i])[a];
                    let mut c = [0.0; 3];
                    c[a] = center[a];
                    lattice.displacement(x, c)[a].abs() < half_side - EDGE_TOL * lattice.spacing()
                })
                .collect();
            pts.sort_unstable();
            axes.push(pts);
        } else {
            axes.push(vec![0]);
        }
    }
    let mut out = Vec::with_capacity(axes[0].len() * axes[1].len() * axes[2].len());
    for &i in &axes[0] {
        for &j in &axes[1] {
            for &k in &axes[2] {
                out.push(lattice.flat([i, j, k]));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Resolves a region to its sample set on `grid`.
pub fn region_cells(grid: &SpaceTimeGrid, region: &Region) -> Result<RegionCells> {
    let lat = grid.lattice();
    let cells = match *region {
        Region::Cylinder(c) => {
            check_radius(lat, c.radius, "cylinder radius")?;
            let (lo, hi) = c.time_interval();
            RegionCells {
                spatial: lat.ball_cells(c.center, c.radius),
                times: grid.time_range(lo, hi),
                weight: grid.cell_measure(),
            }
        }
        Region::Cube(c) => {
            check_radius(lat, c.half_side, "cube half-side")?;
            let (lo, hi) = c.time_interval();
            RegionCells {
                spatial: cube_cells(lat, c.center, c.half_side),
                times: grid.time_range(lo, hi),
                weight: grid.cell_measure(),
            }
        }
        Region::Ball { center, radius, time_index } => {
            check_radius(lat, radius, "ball radius")?;
            if time_index >= grid.steps() {
                return Err(Error::Region(format!("time index {time_index} out of range")));
            }
            RegionCells {
                spatial: lat.ball_cells(center, radius),
                times: time_index..time_index + 1,
                weight: lat.cell_volume(),
            }
        }
        Region::TimeSlice(k) => {
            if k >= grid.steps() {
                return Err(Error::Region(format!("time index {k} out of range")));
            }
            RegionCells { spatial: (0..lat.len()).collect(), times: k..k + 1, weight: lat.cell_volume() }
        }
        Region::Whole => RegionCells {
            spatial: (0..lat.len()).collect(),
            times: 0..grid.steps(),
            weight: grid.cell_measure(),
        },
    };
    if cells.is_empty() {
        return Err(Error::Region(format!("{region:?} contains no grid samples")));
    }
    Ok(cells)
}

/// Sum of `g(f)` over the region's samples.
pub fn region_sum(f: &ScalarField, cells: &RegionCells, g: impl Fn(f64) -> f64) -> f64 {
    let mut s = 0.0;
    for k in cells.times.clone() {
        let slice = f.slice(k);
        for &i in &cells.spatial {
            s += g(slice[i]);
        }
    }
    s
}

/// Midpoint-rule average of `f` over a region.
pub fn mean(f: &ScalarField, region: &Region) -> Result<f64> {
    let cells = region_cells(f.grid(), region)?;
    Ok(region_sum(f, &cells, |v| v) / cells.count() as f64)
}

/// Quadrature measure of a region.
pub fn measure(grid: &SpaceTimeGrid, region: &Region) -> Result<f64> {
    Ok(region_cells(grid, region)?.measure())
}

/// `(int_region |f|^p)^(1/p)` by midpoint quadrature.
pub fn lp_norm(f: &ScalarField, p: f64, region: &Region) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Exponent(format!("lp_norm needs p >= 1, got {p}")));
    }
    let cells = region_cells(f.grid(), region)?;
    let s = if p.is_infinite() {
        let mut m: f64 = 0.0;
        for k in cells.times.clone() {
            for &i in &cells.spatial {
                m = m.max(f.at(k, i).abs());
            }
        }
        return Ok(m);
    } else {
        region_sum(f, &cells, |v| v.abs().powf(p)) * cells.weight
    };
    Ok(s.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::with_dims(3, 1.0, 8, 0.0, 1.0, 4).unwrap()
    }

    #[test]
    fn mean_of_constant() {
        let g = grid();
        let f = ScalarField::constant(g, 3.5);
        let regions = [
            Region::Whole,
            Region::TimeSlice(2),
            Region::Cylinder(ParabolicCylinder::new([0.5, 0.5, 0.5], 0.9, 0.3)),
            Region::Cube(ParabolicCube::new([0.0, 0.0, 0.0], 0.9, 0.25)),
            Region::Ball { center: [0.1, 0.2, 0.3], radius: 0.2, time_index: 1 },
        ];
        for r in regions {
            assert!((mean(&f, &r).unwrap() - 3.5).abs() < 1e-14, "{r:?}");
        }
    }

    #[test]
    fn odd_function_has_zero_mean_on_centred_ball() {
        let g = grid();
        let f = ScalarField::from_fn(g, |x, _| {
            let d = g.lattice().displacement(x, [0.0; 3]);
            d[0]
        });
        let r = Region::Ball { center: [0.0; 3], radius: 0.3, time_index: 0 };
        assert!(mean(&f, &r).unwrap().abs() < 1e-15);
    }

    #[test]
    fn grid_aligned_cube_mean_matches_direct_sum() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..g.samples()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = ScalarField::from_data(g, data).unwrap();
        // faces at multiples of h/2 off the centres: cube over index box [2,6)^3
        let h = g.lattice().spacing();
        let c = [3.5 * h, 3.5 * h, 3.5 * h];
        let cube = ParabolicCube::new(c, 1.0, 2.0 * h);
        // time extent 4 h^2 = 1/16 < tau: choose t0 so that exactly one centre is inside
        let cube = ParabolicCube { t0: 0.4, ..cube };
        let got = mean(&f, &Region::Cube(cube)).unwrap();
        let mut s = 0.0;
        let mut n = 0;
        for i in 2..6 {
            for j in 2..6 {
                for k in 2..6 {
                    s += f.at(1, g.lattice().flat([i, j, k]));
                    n += 1;
                }
            }
        }
        assert!((got - s / n as f64).abs() < 1e-14);
    }

    #[test]
    fn degenerate_and_empty_regions_rejected() {
        let g = grid();
        let f = ScalarField::zeros(g);
        let tiny = Region::Cylinder(ParabolicCylinder::new([0.0; 3], 0.5, 0.05));
        assert!(matches!(mean(&f, &tiny), Err(Error::Region(_))));
        let future = Region::Cylinder(ParabolicCylinder::new([0.0; 3], 5.0, 0.2));
        assert!(matches!(mean(&f, &future), Err(Error::Region(_))));
        assert!(lp_norm(&f, 0.5, &Region::Whole).is_err());
    }

    #[test]
    fn lp_norm_of_constant() {
        let g = grid();
        let f = ScalarField::constant(g, -2.0);
        for p in [1.0, 1.5, 2.0, 3.0] {
            let got = lp_norm(&f, p, &Region::Whole).unwrap();
            assert!((got - 2.0 * 1.0f64.powf(1.0 / p)).abs() < 1e-12);
        }
        let r = Region::Ball { center: [0.0; 3], radius: 0.3, time_index: 0 };
        let mu = measure(&g, &r).unwrap();
        let got = lp_norm(&f, 2.0, &r).unwrap();
        assert!((got - 2.0 * mu.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cylinder_measure_scales_parabolically() {
        let g = SpaceTimeGrid::with_dims(3, 1.0, 64, 0.0, 0.25, 4096).unwrap();
        let small = ParabolicCylinder::new([0.5, 0.5, 0.5], 0.2, 0.08);
        let m1 = measure(&g, &Region::Cylinder(small)).unwrap();
        let m2 = measure(&g, &Region::Cylinder(small.enlarged(2.0))).unwrap();
        let ratio = m2 / m1;
        // one cell of relative error at radius 0.08 ~ 5h
        assert!((ratio / 32.0 - 1.0).abs() < 0.2, "ratio {ratio}");
    }
}
