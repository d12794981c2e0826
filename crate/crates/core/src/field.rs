//! Grid functions: scalar, vector and matrix fields, and the relaxation state.

use ndarray::ArrayD;

use crate::error::{CoreError, Result};
use crate::grid::PeriodicGrid;

/// A real scalar function sampled on a [`PeriodicGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: PeriodicGrid,
    values: ArrayD<f64>,
}

impl ScalarField {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            values: ArrayD::zeros(grid.shape()),
        }
    }

    pub fn constant(grid: PeriodicGrid, value: f64) -> Self {
        Self {
            grid,
            values: ArrayD::from_elem(grid.shape(), value),
        }
    }

    /// Sample `f(x)` at every grid point; `x` has `d` coordinates.
    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut values = ArrayD::zeros(grid.shape());
        let mut coords = vec![0.0; grid.dim()];
        for (idx, v) in values.indexed_iter_mut() {
            for (a, c) in coords.iter_mut().enumerate() {
                *c = grid.coordinate(idx[a]);
            }
            *v = f(&coords);
        }
        Self { grid, values }
    }

    pub fn from_values(grid: PeriodicGrid, values: ArrayD<f64>) -> Result<Self> {
        if values.shape() != grid.shape().as_slice() {
            return Err(CoreError::GridMismatch(format!(
                "array shape {:?} does not match grid shape {:?}",
                values.shape(),
                grid.shape()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &ArrayD<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut ArrayD<f64> {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Maximum absolute value over grid points.
    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Grid average `(1/n^d) sum f`.
    pub fn mean(&self) -> f64 {
        self.values.sum() / self.grid.total_points() as f64
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        debug_assert_eq!(self.grid, other.grid);
        self.values.zip_mut_with(&other.values, |x, y| *x += a * y);
    }

    pub fn scale(&mut self, a: f64) {
        self.values.mapv_inplace(|x| a * x);
    }

    pub fn checked_sub(&self, other: &ScalarField) -> Result<ScalarField> {
        same_grid(self.grid, other.grid)?;
        let mut out = self.clone();
        out.axpy(-1.0, other);
        Ok(out)
    }
}

/// Rectangle-rule inner product `sum f*g * dx^d`; spectrally accurate for
/// smooth periodic integrands.
pub fn inner_product(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    same_grid(f.grid, g.grid)?;
    let mut acc = 0.0;
    for (a, b) in f.values.iter().zip(g.values.iter()) {
        acc += a * b;
    }
    Ok(acc * f.grid.cell_volume())
}

/// Squared `L^2` norm, `integral of f^2`.
pub fn l2_norm_sq(f: &ScalarField) -> f64 {
    let mut acc = 0.0;
    for a in f.values.iter() {
        acc += a * a;
    }
    acc * f.grid.cell_volume()
}

pub(crate) fn same_grid(a: PeriodicGrid, b: PeriodicGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(CoreError::GridMismatch(format!(
            "fields live on different grids: {a:?} vs {b:?}"
        )))
    }
}

/// `d` scalar components `v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            comps: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    pub fn from_components(comps: Vec<ScalarField>) -> Result<Self> {
        let grid = comps
            .first()
            .ok_or_else(|| CoreError::InvalidInput("empty vector field".into()))?
            .grid();
        if comps.len() != grid.dim() {
            return Err(CoreError::InvalidInput(format!(
                "vector field needs {} components, got {}",
                grid.dim(),
                comps.len()
            )));
        }
        for c in &comps {
            same_grid(grid, c.grid())?;
        }
        Ok(Self { comps })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.comps[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    /// Component `v_i`, `i` zero-based.
    pub fn comp(&self, i: usize) -> &ScalarField {
        &self.comps[i]
    }

    pub fn comp_mut(&mut self, i: usize) -> &mut ScalarField {
        &mut self.comps[i]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn axpy(&mut self, a: f64, other: &VectorField) {
        for (x, y) in self.comps.iter_mut().zip(&other.comps) {
            x.axpy(a, y);
        }
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.comps {
            c.scale(a);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(ScalarField::is_finite)
    }

    pub fn checked_sub(&self, other: &VectorField) -> Result<VectorField> {
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.checked_sub(b))
            .collect::<Result<Vec<_>>>()?;
        VectorField::from_components(comps)
    }
}

/// `d x d` scalar components `m_{i,alpha}`, stored row-major (`i` outer).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    dim: usize,
    comps: Vec<ScalarField>,
}

impl MatrixField {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        let d = grid.dim();
        Self {
            dim: d,
            comps: (0..d * d).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    pub fn from_components(dim: usize, comps: Vec<ScalarField>) -> Result<Self> {
        if comps.len() != dim * dim {
            return Err(CoreError::InvalidInput(format!(
                "matrix field needs {} components, got {}",
                dim * dim,
                comps.len()
            )));
        }
        let grid = comps[0].grid();
        if grid.dim() != dim {
            return Err(CoreError::GridMismatch(format!(
                "matrix dimension {dim} does not match grid dimension {}",
                grid.dim()
            )));
        }
        for c in &comps {
            same_grid(grid, c.grid())?;
        }
        Ok(Self { dim, comps })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.comps[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Component `m_{i,alpha}`, both indices zero-based.
    pub fn comp(&self, i: usize, alpha: usize) -> &ScalarField {
        &self.comps[i * self.dim + alpha]
    }

    pub fn comp_mut(&mut self, i: usize, alpha: usize) -> &mut ScalarField {
        &mut self.comps[i * self.dim + alpha]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.comps
    }

    pub fn axpy(&mut self, a: f64, other: &MatrixField) {
        for (x, y) in self.comps.iter_mut().zip(&other.comps) {
            x.axpy(a, y);
        }
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.comps {
            c.scale(a);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(ScalarField::is_finite)
    }

    pub fn checked_sub(&self, other: &MatrixField) -> Result<MatrixField> {
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.checked_sub(b))
            .collect::<Result<Vec<_>>>()?;
        MatrixField::from_components(self.dim, comps)
    }

    pub fn linf_norm(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, c| m.max(c.linf_norm()))
    }
}

/// Full state `(F, v, S)` of the relaxation system on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub f: MatrixField,
    pub v: VectorField,
    pub s: MatrixField,
}

impl StateField {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            f: MatrixField::zeros(grid),
            v: VectorField::zeros(grid),
            s: MatrixField::zeros(grid),
        }
    }

    pub fn new(f: MatrixField, v: VectorField, s: MatrixField) -> Result<Self> {
        same_grid(f.grid(), v.grid())?;
        same_grid(f.grid(), s.grid())?;
        Ok(Self { f, v, s })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.f.grid()
    }

    pub fn axpy(&mut self, a: f64, other: &StateField) {
        self.f.axpy(a, &other.f);
        self.v.axpy(a, &other.v);
        self.s.axpy(a, &other.s);
    }

    pub fn scale(&mut self, a: f64) {
        self.f.scale(a);
        self.v.scale(a);
        self.s.scale(a);
    }

    pub fn is_finite(&self) -> bool {
        self.f.is_finite() && self.v.is_finite() && self.s.is_finite()
    }

    /// All `2d^2 + d` scalar components in the fixed state order
    /// (F row-major, then v, then S row-major).
    pub fn components(&self) -> impl Iterator<Item = &ScalarField> {
        self.f
            .components()
            .iter()
            .chain(self.v.components())
            .chain(self.s.components())
    }
}
