//! Fourier pseudospectral differentiation on the periodic grid.
//!
//! Derivatives are exact for band-limited data. The unmatched Nyquist mode is
//! zeroed for odd derivative orders so real input maps to real output with a
//! skew-symmetric differentiation operator.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use ndarray::{ArrayD, Axis};
use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};

use crate::error::{CoreError, Result};
use crate::field::{MatrixField, ScalarField, VectorField};
use crate::grid::{MultiIndex, PeriodicGrid};

// Plans are cached per (length, direction); rustfft plans are Send + Sync, so
// concurrent callers only contend on the map lookup.
type PlanCache = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

static PLANS: Lazy<Mutex<PlanCache>> = Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut map = PLANS.lock().expect("fft plan cache poisoned");
    map.entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

fn transform_axis(data: &mut ArrayD<Complex64>, axis: usize, inverse: bool) {
    let n = data.shape()[axis];
    let fft = plan(n, inverse);
    let mut buf = vec![Complex64::default(); n];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for mut lane in data.lanes_mut(Axis(axis)) {
        for (b, v) in buf.iter_mut().zip(lane.iter()) {
            *b = *v;
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (v, b) in lane.iter_mut().zip(buf.iter()) {
            *v = *b;
        }
    }
}

/// Unnormalized forward transform over all axes.
pub(crate) fn forward_nd(f: &ScalarField) -> ArrayD<Complex64> {
    let mut data = f.values().mapv(|v| Complex64::new(v, 0.0));
    for axis in 0..f.grid().dim() {
        transform_axis(&mut data, axis, false);
    }
    data
}

/// Inverse transform over all axes, normalized, real part extracted.
pub(crate) fn inverse_nd_real(mut data: ArrayD<Complex64>, grid: PeriodicGrid) -> ScalarField {
    for axis in 0..grid.dim() {
        transform_axis(&mut data, axis, true);
    }
    let scale = 1.0 / grid.total_points() as f64;
    let values = data.mapv(|c| c.re * scale);
    ScalarField::from_values(grid, values).expect("shape preserved by transform")
}

/// Spectral multiplier `(i k)` for one axis, zero at the Nyquist index.
pub(crate) fn ik_factor(grid: PeriodicGrid, j: usize) -> Complex64 {
    if grid.is_nyquist(j) {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(0.0, grid.wavenumber(j))
    }
}

/// First derivative along `axis` (zero-based), one axis-local Fourier pass.
pub fn derivative(f: &ScalarField, axis: usize) -> Result<ScalarField> {
    let grid = f.grid();
    if axis >= grid.dim() {
        return Err(CoreError::InvalidInput(format!(
            "derivative axis {axis} out of range for dimension {}",
            grid.dim()
        )));
    }
    let n = grid.n_points();
    let fwd = plan(n, false);
    let inv = plan(n, true);
    let mut out = ArrayD::zeros(grid.shape());
    let mut buf = vec![Complex64::default(); n];
    let mut scratch = vec![
        Complex64::default();
        fwd.get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len())
    ];
    let factors: Vec<Complex64> = (0..n).map(|j| ik_factor(grid, j)).collect();
    for (lane_in, mut lane_out) in f
        .values()
        .lanes(Axis(axis))
        .into_iter()
        .zip(out.lanes_mut(Axis(axis)))
    {
        for (b, v) in buf.iter_mut().zip(lane_in.iter()) {
            *b = Complex64::new(*v, 0.0);
        }
        fwd.process_with_scratch(&mut buf, &mut scratch);
        for (b, factor) in buf.iter_mut().zip(&factors) {
            *b *= factor;
        }
        inv.process_with_scratch(&mut buf, &mut scratch);
        let scale = 1.0 / n as f64;
        for (v, b) in lane_out.iter_mut().zip(buf.iter()) {
            *v = b.re * scale;
        }
    }
    ScalarField::from_values(grid, out)
}

/// Mixed derivative `partial_gamma f` in a single full-spectrum pass.
pub fn multi_derivative(f: &ScalarField, gamma: &MultiIndex) -> Result<ScalarField> {
    let grid = f.grid();
    if gamma.dim() != grid.dim() {
        return Err(CoreError::InvalidInput(format!(
            "multi-index has {} axes but grid has {}",
            gamma.dim(),
            grid.dim()
        )));
    }
    if gamma.total_order() == 0 {
        return Ok(f.clone());
    }
    let mut spec = forward_nd(f);
    for (idx, c) in spec.indexed_iter_mut() {
        let mut factor = Complex64::new(1.0, 0.0);
        for (axis, &order) in gamma.orders().iter().enumerate() {
            if order == 0 {
                continue;
            }
            let j = idx[axis];
            if order % 2 == 1 && grid.is_nyquist(j) {
                factor = Complex64::new(0.0, 0.0);
                break;
            }
            let ik = Complex64::new(0.0, grid.wavenumber(j));
            factor *= ik.powu(order as u32);
        }
        *c *= factor;
    }
    Ok(inverse_nd_real(spec, grid))
}

/// Laplacian `sum_a partial_a^2 f` (even symbol, Nyquist kept).
pub fn laplacian(f: &ScalarField) -> Result<ScalarField> {
    let grid = f.grid();
    let mut spec = forward_nd(f);
    for (idx, c) in spec.indexed_iter_mut() {
        let mut ksq = 0.0;
        for axis in 0..grid.dim() {
            let k = grid.wavenumber(idx[axis]);
            ksq += k * k;
        }
        *c *= -ksq;
    }
    Ok(inverse_nd_real(spec, grid))
}

/// Divergence of row `i` of a matrix field: `sum_alpha partial_alpha m_{i,alpha}`.
pub fn divergence_row(m: &MatrixField, i: usize) -> Result<ScalarField> {
    let mut out = derivative(m.comp(i, 0), 0)?;
    for alpha in 1..m.dim() {
        let d = derivative(m.comp(i, alpha), alpha)?;
        out.axpy(1.0, &d);
    }
    Ok(out)
}

/// Gradient matrix `X_{i,alpha} = partial_alpha v_i`.
pub fn velocity_gradient(v: &VectorField) -> Result<MatrixField> {
    let d = v.dim();
    let mut comps = Vec::with_capacity(d * d);
    for i in 0..d {
        for alpha in 0..d {
            comps.push(derivative(v.comp(i), alpha)?);
        }
    }
    MatrixField::from_components(d, comps)
}

/// Fraction of spectral energy carried by modes with any axis wavenumber
/// above two thirds of the Nyquist wavenumber. Used to monitor aliasing of
/// the cubic stress without filtering.
pub fn high_mode_energy_fraction(f: &ScalarField) -> f64 {
    let grid = f.grid();
    let spec = forward_nd(f);
    let cutoff = 2.0 / 3.0 * grid.max_wavenumber();
    let mut high = 0.0;
    let mut total = 0.0;
    for (idx, c) in spec.indexed_iter() {
        let e = c.norm_sqr();
        total += e;
        let kmax_axis = (0..grid.dim())
            .map(|a| grid.wavenumber(idx[a]).abs())
            .fold(0.0, f64::max);
        if kmax_axis > cutoff {
            high += e;
        }
    }
    if total > 0.0 {
        high / total
    } else {
        0.0
    }
}
