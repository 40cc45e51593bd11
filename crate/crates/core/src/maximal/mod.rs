//! Parabolic maximal operators, the Calderon-Zygmund stopping-time
//! decomposition and the `L log L` equivalence.
//!
//! The cube family behind `M_G` is every lattice box `C` with `z in C subset G`
//! whose spatial width is `w = 1..W` cells (half-side `w h / 2`) and whose time
//! extent is `n_t(w) = max(1, round(w^2 h^2 / (4 tau)))` samples.

pub mod cz;
pub mod lattice;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::cutoff::time_index;
use crate::geometry::field::ScalarField;
use crate::geometry::grid::SpaceTimeGrid;
use crate::geometry::region::{region_cells, ParabolicCube, ParabolicCylinder, Region};

pub use cz::{cz_decompose, cz_decompose_box, CubeFamily, CzCheck, StoppedCube};
pub use lattice::{LatticeBox, LocalAbs, Prefix};

/// Choice of cube family for `M_G`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaximalOptions {
    /// Restrict to the subdivision tree of `G`.
    pub dyadic_only: bool,
}

/// Time samples of a lattice cube of spatial width `w`.
pub fn cube_time_len(grid: &SpaceTimeGrid, w: usize) -> usize {
    let h = grid.lattice().spacing();
    let n = (w as f64 * w as f64 * h * h / (4.0 * grid.tau())).round();
    (n as usize).max(1)
}

/// `out[z] = max { inp[s] : s <= z <= s + window - 1 }` along one axis.
fn dilate(inp: &[f64], dims: [usize; 4], axis: usize, window: usize, out_len: usize) -> (Vec<f64>, [usize; 4]) {
    let mut od = dims;
    od[axis] = out_len;
    let mut stride_in = 1;
    for s in (axis + 1)..4 {
        stride_in *= dims[s];
    }
    let outer: usize = dims[..axis].iter().product();
    let inner = stride_in;
    let mut out = vec![0.0; od.iter().product()];
    let a = dims[axis];
    for o in 0..outer {
        for z in 0..out_len {
            let lo = (z + 1).saturating_sub(window);
            let hi = z.min(a - 1);
            let ob = (o * out_len + z) * inner;
            for i in 0..inner {
                let mut m = 0.0f64;
                for s in lo..=hi {
                    m = m.max(inp[(o * a + s) * inner + i]);
                }
                out[ob + i] = m;
            }
        }
    }
    (out, od)
}

fn exhaustive_local(loc: &LocalAbs, grid: &SpaceTimeGrid) -> Vec<f64> {
    let pre = Prefix::new(loc);
    let d = loc.dims;
    let mut best = vec![0.0f64; loc.vals.len()];
    for w in 1..=loc.bx.width {
        let nt = cube_time_len(grid, w);
        if nt > d[0] {
            continue;
        }
        let w3 = if d[3] > 1 { w } else { 1 };
        let len = [nt, w, w, w3];
        let ad = [d[0] - nt + 1, d[1] - w + 1, d[2] - w + 1, d[3] - w3 + 1];
        let count = (nt * w * w * w3) as f64;
        let mut means = Vec::with_capacity(ad.iter().product());
        for k in 0..ad[0] {
            for a in 0..ad[1] {
                for b in 0..ad[2] {
                    for c in 0..ad[3] {
                        means.push(pre.sum([k, a, b, c], len) / count);
                    }
                }
            }
        }
        let mut cur = (means, ad);
        for axis in 0..4 {
            if len[axis] > 1 || cur.1[axis] != d[axis] {
                cur = dilate(&cur.0, cur.1, axis, len[axis], d[axis]);
            }
        }
        for (b, v) in best.iter_mut().zip(&cur.0) {
            *b = b.max(*v);
        }
    }
    best
}

fn dyadic_local(loc: &LocalAbs, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; loc.vals.len()];
    let mut stack = vec![(loc.bx, 0.0f64)];
    while let Some((b, run)) = stack.pop() {
        let run = run.max(loc.box_mean(&b));
        let ch = b.children(dim);
        if ch.is_empty() {
            let o = loc.local_origin(&b);
            let sd = loc.sub_dims(&b);
            for k in 0..sd[0] {
                for i0 in 0..sd[1] {
                    for i1 in 0..sd[2] {
                        for i2 in 0..sd[3] {
                            out[loc.index([o[0] + k, o[1] + i0, o[2] + i1, o[3] + i2])] = run;
                        }
                    }
                }
            }
        } else {
            stack.extend(ch.into_iter().map(|c| (c, run)));
        }
    }
    out
}

/// `M_G f` on every sample of `G`, in the local layout of [`LocalAbs`].
pub fn local_maximal_values(f: &ScalarField, g: &LatticeBox, opts: MaximalOptions) -> Result<LocalAbs> {
    let grid = f.grid();
    check_box(grid, g)?;
    let dim = grid.lattice().dim();
    let mut loc = LocalAbs::gather(f, g);
    loc.vals = if opts.dyadic_only {
        if !g.is_dyadic() {
            return Err(Error::Precondition("dyadic family needs power-of-two extents".into()));
        }
        dyadic_local(&loc, dim)
    } else {
        exhaustive_local(&loc, grid)
    };
    Ok(loc)
}

fn check_box(grid: &SpaceTimeGrid, g: &LatticeBox) -> Result<()> {
    let n = grid.lattice().points();
    if g.width == 0 || g.width > n || g.t_len == 0 || g.t_first + g.t_len > grid.steps() {
        return Err(Error::Region(format!("{g:?} does not fit the grid")));
    }
    Ok(())
}

/// `M_G f` as a field on the whole grid; zero off `G`.
pub fn local_maximal_field(f: &ScalarField, g: &ParabolicCube, opts: MaximalOptions) -> Result<ScalarField> {
    let grid = *f.grid();
    let bx = LatticeBox::from_cube(&grid, g)?;
    let loc = local_maximal_values(f, &bx, opts)?;
    let mut out = ScalarField::zeros(grid);
    let n = grid.lattice().len();
    for ((k, i), v) in bx.samples(&grid).into_iter().zip(loc.vals) {
        out.data_mut()[k * n + i] = v;
    }
    Ok(out)
}

/// Sample `(k, flat)` containing the space-time point `(x, t)`.
pub fn locate_sample(grid: &SpaceTimeGrid, x: [f64; 3], t: f64) -> Result<(usize, usize)> {
    let lat = grid.lattice();
    let n = lat.points() as i64;
    let mut idx = [0usize; 3];
    for a in 0..lat.dim() {
        idx[a] = ((x[a] / lat.spacing()).round() as i64).rem_euclid(n) as usize;
    }
    Ok((time_index(grid, t)?, lat.flat(idx)))
}

/// `M_G f(z)`.
pub fn local_maximal(f: &ScalarField, g: &ParabolicCube, x: [f64; 3], t: f64, opts: MaximalOptions) -> Result<f64> {
    let grid = f.grid();
    let bx = LatticeBox::from_cube(grid, g)?;
    let (k, flat) = locate_sample(grid, x, t)?;
    local_maximal_at(f, &bx, k, flat, opts)
}

/// `M_G f` at one sample, by direct enumeration of the cubes containing it.
pub fn local_maximal_at(f: &ScalarField, g: &LatticeBox, k: usize, flat: usize, opts: MaximalOptions) -> Result<f64> {
    let grid = f.grid();
    check_box(grid, g)?;
    let lat = grid.lattice();
    let n = lat.points();
    let idx = lat.unflat(flat);
    let mut rel = [0usize; 4];
    rel[0] = k.wrapping_sub(g.t_first);
    for a in 0..lat.dim() {
        rel[a + 1] = (idx[a] + n - g.origin[a] % n) % n;
    }
    if rel[0] >= g.t_len || (0..lat.dim()).any(|a| rel[a + 1] >= g.width) {
        return Err(Error::Region("point is not in G".into()));
    }
    let loc = LocalAbs::gather(f, g);
    let d = loc.dims;
    if opts.dyadic_only {
        if !g.is_dyadic() {
            return Err(Error::Precondition("dyadic family needs power-of-two extents".into()));
        }
        let mut b = *g;
        let mut best: f64 = 0.0;
        loop {
            best = best.max(loc.box_mean(&b));
            let next = b.children(lat.dim()).into_iter().find(|c| {
                let o = loc.local_origin(c);
                let sd = loc.sub_dims(c);
                (0..4).all(|a| rel[a] >= o[a] && rel[a] < o[a] + sd[a])
            });
            match next {
                Some(c) => b = c,
                None => return Ok(best),
            }
        }
    }
    let mut best: f64 = 0.0;
    for w in 1..=g.width {
        let nt = cube_time_len(grid, w);
        if nt > d[0] {
            continue;
        }
        let len = [nt, w, w, if d[3] > 1 { w } else { 1 }];
        let range = |a: usize| {
            let lo = (rel[a] + 1).saturating_sub(len[a]);
            let hi = rel[a].min(d[a] - len[a]);
            lo..=hi
        };
        for s0 in range(0) {
            for s1 in range(1) {
                for s2 in range(2) {
                    for s3 in range(3) {
                        let b = LatticeBox {
                            origin: [g.origin[0] + s1, g.origin[1] + s2, g.origin[2] + s3],
                            width: w,
                            t_first: g.t_first + s0,
                            t_len: nt,
                        };
                        best = best.max(loc.box_mean(&b));
                    }
                }
            }
        }
    }
    Ok(best)
}

/// The centred cylinder with top at the end of time cell `k`.
pub fn centred_cylinder(grid: &SpaceTimeGrid, k: usize, flat: usize, radius: f64) -> ParabolicCylinder {
    let lat = grid.lattice();
    let t0 = grid.t_start() + (k + 1) as f64 * grid.tau();
    ParabolicCylinder::new(lat.position(lat.unflat(flat)), t0, radius)
}

/// `sup_rho (|f|)_{Q(z, rho)}` over a radius ladder, each cylinder intersected
/// with the time domain.
pub fn centered_maximal(f: &ScalarField, k: usize, flat: usize, ladder: &[f64]) -> Result<f64> {
    if ladder.is_empty() {
        return Err(Error::EmptyLadder);
    }
    let grid = f.grid();
    let mut best: f64 = 0.0;
    for &rho in ladder {
        let cyl = centred_cylinder(grid, k, flat, rho);
        let cells = region_cells(grid, &Region::Cylinder(cyl))?;
        let mut s = 0.0;
        for kk in cells.times.clone() {
            let sl = f.slice(kk);
            for &i in &cells.spatial {
                s += sl[i].abs();
            }
        }
        best = best.max(s / cells.count() as f64);
    }
    Ok(best)
}

/// Centred maximal function at every sample.
pub fn centered_maximal_field(f: &ScalarField, ladder: &[f64]) -> Result<ScalarField> {
    if ladder.is_empty() {
        return Err(Error::EmptyLadder);
    }
    let grid = *f.grid();
    let lat = *grid.lattice();
    let n = lat.len();
    let abs = f.abs();
    let mut out = ScalarField::zeros(grid);
    for &rho in ladder {
        // validates the radius
        region_cells(&grid, &Region::Cylinder(centred_cylinder(&grid, grid.steps() - 1, 0, rho)))?;
        let offs = lat.ball_offsets(rho);
        let mut ball = vec![0.0; grid.samples()];
        for k in 0..grid.steps() {
            let sl = abs.slice(k);
            for (i, idx) in lat.indices().enumerate() {
                let mut s = 0.0;
                for o in &offs {
                    s += sl[lat.flat_wrapped(idx, *o)];
                }
                ball[k * n + i] = s;
            }
        }
        for k in 0..grid.steps() {
            let t0 = grid.t_start() + (k + 1) as f64 * grid.tau();
            let tr = grid.time_range(t0 - rho * rho, t0);
            let count = (tr.len() * offs.len()) as f64;
            for i in 0..n {
                let s: f64 = tr.clone().map(|kk| ball[kk * n + i]).sum();
                let v = &mut out.data_mut()[k * n + i];
                *v = v.max(s / count);
            }
        }
    }
    Ok(out)
}

/// `(||M f||_p, ||f||_p)` over the whole grid for the centred operator.
pub fn strong_lp_check(f: &ScalarField, p: f64, ladder: &[f64]) -> Result<(f64, f64)> {
    if !(p > 1.0) {
        return Err(Error::Exponent(format!("strong L_p check needs p > 1, got {p}")));
    }
    let m = centered_maximal_field(f, ladder)?;
    let norm = |g: &ScalarField| {
        let s: f64 = g.data().iter().map(|v| v.abs().powf(p)).sum();
        (s * g.grid().cell_measure()).powf(1.0 / p)
    };
    Ok((norm(&m), norm(f)))
}

/// Which logarithm the `L log L` functional uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LlogVariant {
    /// `|f| log(e + |f| / ref)`.
    E,
    /// `|f| log(1 + |f| / ref)`.
    One,
}

fn llogl_density(v: f64, reference: f64, variant: LlogVariant) -> f64 {
    let a = v.abs();
    if a == 0.0 {
        return 0.0;
    }
    let base = match variant {
        LlogVariant::E => std::f64::consts::E,
        LlogVariant::One => 1.0,
    };
    a * (base + a / reference).ln()
}

/// Sum of the `L log L` density over values, times a cell weight.
pub fn llogl_sum(values: impl IntoIterator<Item = f64>, reference: f64, variant: LlogVariant, weight: f64) -> Result<f64> {
    let mut s = 0.0;
    let mut nonzero = false;
    for v in values {
        if v != 0.0 {
            nonzero = true;
            if !(reference > 0.0) {
                return Err(Error::Precondition(format!(
                    "reference mean must be positive for a nonzero field, got {reference}"
                )));
            }
            s += llogl_density(v, reference, variant);
        }
    }
    Ok(if nonzero { s * weight } else { 0.0 })
}

/// Quadrature of `|f| log(e|1 + |f| / ref)` over a region.
pub fn llogl_functional(f: &ScalarField, region: &Region, variant: LlogVariant, reference_mean: f64) -> Result<f64> {
    let cells = region_cells(f.grid(), region)?;
    let vals = cells.times.clone().flat_map(|k| cells.spatial.iter().map(move |&i| (k, i)));
    llogl_sum(vals.map(|(k, i)| f.at(k, i)), reference_mean, variant, cells.weight)
}

/// Both sides of the two-sided `L log L` / maximal-function equivalence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteinCheck {
    pub integral_of_m: f64,
    pub llogl_value: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

pub const STEIN_CONSTANT: f64 = 512.0;

pub fn stein_equivalence_check(f: &ScalarField, c0: &ParabolicCube) -> Result<SteinCheck> {
    let bx = LatticeBox::from_cube(f.grid(), c0)?;
    stein_equivalence_box(f, &bx, MaximalOptions::default())
}

pub fn stein_equivalence_box(f: &ScalarField, c0: &LatticeBox, opts: MaximalOptions) -> Result<SteinCheck> {
    let grid = f.grid();
    let w = grid.cell_measure();
    let m = local_maximal_values(f, c0, opts)?;
    let loc = LocalAbs::gather(f, c0);
    let integral_of_m = m.vals.iter().sum::<f64>() * w;
    let mean = loc.vals.iter().sum::<f64>() / loc.vals.len() as f64;
    let llogl_value = llogl_sum(loc.vals.iter().copied(), mean, LlogVariant::E, w)?;
    Ok(SteinCheck {
        integral_of_m,
        llogl_value,
        lower_ok: integral_of_m / STEIN_CONSTANT <= llogl_value,
        upper_ok: llogl_value <= STEIN_CONSTANT * integral_of_m,
    })
}

/// `mu{M_G f > t}` against `2^8 / t * int_{|f| > t/2} |f|`, both over `G`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakTypeCheck {
    pub level: f64,
    pub measure: f64,
    pub bound: f64,
    pub ok: bool,
}

pub fn weak_type_check(f: &ScalarField, g: &LatticeBox, levels: &[f64], opts: MaximalOptions) -> Result<Vec<WeakTypeCheck>> {
    let grid = f.grid();
    let w = grid.cell_measure();
    let m = local_maximal_values(f, g, opts)?;
    let loc = LocalAbs::gather(f, g);
    levels
        .iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(Error::Precondition(format!("level must be positive, got {t}")));
            }
            let measure = m.vals.iter().filter(|&&v| v > t).count() as f64 * w;
            let tail: f64 = loc.vals.iter().filter(|&&v| v > 0.5 * t).sum::<f64>() * w;
            let bound = 256.0 / t * tail;
            Ok(WeakTypeCheck { level: t, measure, bound, ok: measure <= bound })
        })
        .collect()
}
