//! Scalar, vector and skew-tensor samples on space-time grids.

use crate::error::{Error, Result};
use crate::geometry::grid::{Lattice, SpaceTimeGrid};

/// Real samples on a space-time grid, stored time-major: `data[k * N^d + i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: SpaceTimeGrid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: SpaceTimeGrid) -> Self {
        Self { data: vec![0.0; grid.samples()], grid }
    }

    pub fn constant(grid: SpaceTimeGrid, value: f64) -> Self {
        Self { data: vec![value; grid.samples()], grid }
    }

    pub fn from_data(grid: SpaceTimeGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.samples() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.samples(),
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!("non-finite sample at {bad}")));
        }
        Ok(Self { grid, data })
    }

    /// Samples `f(x, t)` at every sample position.
    pub fn from_fn(grid: SpaceTimeGrid, f: impl Fn([f64; 3], f64) -> f64) -> Self {
        let lat = *grid.lattice();
        let mut data = Vec::with_capacity(grid.samples());
        for k in 0..grid.steps() {
            let t = grid.time(k);
            data.extend(lat.indices().map(|idx| f(lat.position(idx), t)));
        }
        Self { grid, data }
    }

    /// Stacks equal-lattice spatial slices as consecutive time samples.
    pub fn from_slices(grid: SpaceTimeGrid, slices: &[&[f64]]) -> Result<Self> {
        if slices.len() != grid.steps() {
            return Err(Error::GridMismatch(format!(
                "expected {} slices, got {}",
                grid.steps(),
                slices.len()
            )));
        }
        let mut data = Vec::with_capacity(grid.samples());
        for s in slices {
            if s.len() != grid.lattice().len() {
                return Err(Error::GridMismatch("slice length differs from lattice".into()));
            }
            data.extend_from_slice(s);
        }
        Self::from_data(grid, data)
    }

    #[inline]
    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    #[inline]
    pub fn lattice(&self) -> &Lattice {
        self.grid.lattice()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.grid.lattice().len();
        &self.data[k * n..(k + 1) * n]
    }

    #[inline]
    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.grid.lattice().len();
        &mut self.data[k * n..(k + 1) * n]
    }

    #[inline]
    pub fn at(&self, k: usize, flat: usize) -> f64 {
        self.data[k * self.grid.lattice().len() + flat]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        self.map(|v| lambda * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("combine on different grids".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid, data })
    }
}

/// `d` scalar components on a common grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn zeros(grid: SpaceTimeGrid) -> Self {
        let d = grid.lattice().dim();
        Self { comps: (0..d).map(|_| ScalarField::zeros(grid)).collect() }
    }

    pub fn from_components(comps: Vec<ScalarField>) -> Result<Self> {
        let Some(first) = comps.first() else {
            return Err(Error::GridMismatch("vector field needs components".into()));
        };
        let grid = *first.grid();
        if comps.len() != grid.lattice().dim() {
            return Err(Error::GridMismatch(format!(
                "vector field in {}-d needs {} components, got {}",
                grid.lattice().dim(),
                grid.lattice().dim(),
                comps.len()
            )));
        }
        if comps.iter().any(|c| *c.grid() != grid) {
            return Err(Error::GridMismatch("components live on different grids".into()));
        }
        Ok(Self { comps })
    }

    pub fn from_fn(grid: SpaceTimeGrid, f: impl Fn([f64; 3], f64) -> [f64; 3]) -> Self {
        let d = grid.lattice().dim();
        Self {
            comps: (0..d).map(|c| ScalarField::from_fn(grid, |x, t| f(x, t)[c])).collect(),
        }
    }

    #[inline]
    pub fn grid(&self) -> &SpaceTimeGrid {
        self.comps[0].grid()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    #[inline]
    pub fn component(&self, c: usize) -> &ScalarField {
        &self.comps[c]
    }

    #[inline]
    pub fn component_mut(&mut self, c: usize) -> &mut ScalarField {
        &mut self.comps[c]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.comps
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { comps: self.comps.iter().map(|c| c.scaled(lambda)).collect() }
    }

    /// Pointwise Euclidean norm.
    pub fn norm(&self) -> ScalarField {
        let grid = *self.grid();
        let mut out = ScalarField::zeros(grid);
        for c in &self.comps {
            for (o, v) in out.data_mut().iter_mut().zip(c.data()) {
                *o += v * v;
            }
        }
        out.map(f64::sqrt)
    }

    /// Single-time-sample slice `k` of each component.
    pub fn slice(&self, k: usize) -> VectorSlice {
        VectorSlice {
            lattice: *self.grid().lattice(),
            comps: self.comps.iter().map(|c| c.slice(k).to_vec()).collect(),
        }
    }
}

/// Pairs `(j, l)` with `j < l`, in storage order.
pub fn upper_pairs(dim: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for j in 0..dim {
        for l in (j + 1)..dim {
            v.push((j, l));
        }
    }
    v
}

/// Skew tensor field `d_{jl} = -d_{lj}`; only the strictly upper triangle is stored,
/// so skew-symmetry holds by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewTensorField {
    grid: SpaceTimeGrid,
    upper: Vec<ScalarField>,
}

impl SkewTensorField {
    pub fn zeros(grid: SpaceTimeGrid) -> Self {
        let n = upper_pairs(grid.lattice().dim()).len();
        Self { grid, upper: (0..n).map(|_| ScalarField::zeros(grid)).collect() }
    }

    /// Builds from the strictly upper components in [`upper_pairs`] order.
    pub fn from_upper(grid: SpaceTimeGrid, upper: Vec<ScalarField>) -> Result<Self> {
        if upper.len() != upper_pairs(grid.lattice().dim()).len() {
            return Err(Error::GridMismatch("wrong number of tensor components".into()));
        }
        if upper.iter().any(|c| *c.grid() != grid) {
            return Err(Error::GridMismatch("tensor components on different grids".into()));
        }
        Ok(Self { grid, upper })
    }

    /// Builds from a full `d x d` array of components, rejecting non-skew input.
    pub fn from_full(grid: SpaceTimeGrid, full: Vec<Vec<ScalarField>>) -> Result<Self> {
        let d = grid.lattice().dim();
        if full.len() != d || full.iter().any(|r| r.len() != d) {
            return Err(Error::GridMismatch(format!("expected {d}x{d} components")));
        }
        let mut scale: f64 = 0.0;
        for row in &full {
            for c in row {
                if *c.grid() != grid {
                    return Err(Error::GridMismatch("tensor components on different grids".into()));
                }
                scale = scale.max(c.max_abs());
            }
        }
        let mut defect: f64 = 0.0;
        for j in 0..d {
            for l in j..d {
                for (a, b) in full[j][l].data().iter().zip(full[l][j].data()) {
                    defect = defect.max((a + b).abs());
                }
            }
        }
        if defect > 1e-12 * scale.max(1.0) {
            return Err(Error::NotSkew(defect));
        }
        let upper = upper_pairs(d).into_iter().map(|(j, l)| full[j][l].clone()).collect();
        Ok(Self { grid, upper })
    }

    /// `d_{jk} = eps_{jkm} omega_m` for a 3-d stream field.
    pub fn from_stream(omega: &VectorField) -> Result<Self> {
        let grid = *omega.grid();
        if grid.lattice().dim() != 3 {
            return Err(Error::Precondition("stream form requires d = 3".into()));
        }
        // (0,1) -> omega_2, (0,2) -> -omega_1, (1,2) -> omega_0
        let upper = vec![
            omega.component(2).clone(),
            omega.component(1).scaled(-1.0),
            omega.component(0).clone(),
        ];
        Self::from_upper(grid, upper)
    }

    #[inline]
    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.grid.lattice().dim()
    }

    pub fn upper(&self) -> &[ScalarField] {
        &self.upper
    }

    /// Storage position and sign of entry `(j, l)`; `None` on the diagonal.
    pub fn locate(&self, j: usize, l: usize) -> Option<(usize, f64)> {
        locate_pair(self.dim(), j, l)
    }

    /// Entry `(j, l)` at time sample `k`, spatial sample `flat`.
    #[inline]
    pub fn at(&self, j: usize, l: usize, k: usize, flat: usize) -> f64 {
        match self.locate(j, l) {
            None => 0.0,
            Some((p, s)) => s * self.upper[p].at(k, flat),
        }
    }

    /// Full component `(j, l)` as a scalar field.
    pub fn component(&self, j: usize, l: usize) -> ScalarField {
        match self.locate(j, l) {
            None => ScalarField::zeros(self.grid),
            Some((p, s)) => self.upper[p].scaled(s),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { grid: self.grid, upper: self.upper.iter().map(|c| c.scaled(lambda)).collect() }
    }

    pub fn slice(&self, k: usize) -> SkewTensorSlice {
        SkewTensorSlice {
            lattice: *self.grid.lattice(),
            upper: self.upper.iter().map(|c| c.slice(k).to_vec()).collect(),
        }
    }
}

pub(crate) fn locate_pair(dim: usize, j: usize, l: usize) -> Option<(usize, f64)> {
    if j == l {
        return None;
    }
    let (a, b, s) = if j < l { (j, l, 1.0) } else { (l, j, -1.0) };
    let pos = upper_pairs(dim).iter().position(|&p| p == (a, b))?;
    Some((pos, s))
}

/// Vector values on one spatial slice.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorSlice {
    pub lattice: Lattice,
    pub comps: Vec<Vec<f64>>,
}

impl VectorSlice {
    pub fn zeros(lattice: Lattice) -> Self {
        Self { lattice, comps: vec![vec![0.0; lattice.len()]; lattice.dim()] }
    }

    pub fn from_fn(lattice: Lattice, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(lattice);
        for (i, idx) in lattice.indices().enumerate() {
            let v = f(lattice.position(idx));
            for c in 0..lattice.dim() {
                out.comps[c][i] = v[c];
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sum_x |u|^2 h^d`.
    pub fn l2_squared(&self) -> f64 {
        let s: f64 = self.comps.iter().flatten().map(|v| v * v).sum();
        s * self.lattice.cell_volume()
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            lattice: self.lattice,
            comps: self.comps.iter().map(|c| c.iter().map(|v| lambda * v).collect()).collect(),
        }
    }
}

/// Skew tensor values on one spatial slice (strict upper triangle).
#[derive(Clone, Debug, PartialEq)]
pub struct SkewTensorSlice {
    pub lattice: Lattice,
    pub upper: Vec<Vec<f64>>,
}

impl SkewTensorSlice {
    pub fn zeros(lattice: Lattice) -> Self {
        let n = upper_pairs(lattice.dim()).len();
        Self { lattice, upper: vec![vec![0.0; lattice.len()]; n] }
    }

    #[inline]
    pub fn at(&self, j: usize, l: usize, flat: usize) -> f64 {
        match locate_pair(self.lattice.dim(), j, l) {
            None => 0.0,
            Some((p, s)) => s * self.upper[p][flat],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Dense `d x d` matrix at one sample.
    pub fn matrix(&self, flat: usize) -> [[f64; 3]; 3] {
        let d = self.lattice.dim();
        let mut m = [[0.0; 3]; 3];
        for (p, &(j, l)) in upper_pairs(d).iter().enumerate() {
            m[j][l] = self.upper[p][flat];
            m[l][j] = -self.upper[p][flat];
        }
        m
    }
}
