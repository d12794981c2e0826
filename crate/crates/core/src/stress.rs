//! Constitutive stress laws `T(F)`, their Jacobians, and the
//! subcharacteristic / weak-parabolicity condition checkers.

use nalgebra::DMatrix;

use crate::algebra::selector_matrix;
use crate::error::{CoreError, Result};
use crate::field::{MatrixField, ScalarField};

/// Built-in smooth stress laws with `T(0) = 0`.
///
/// * `Linear`:  `T(F) = kappa * F`
/// * `Cubic`:   `T(F) = kappa * F + beta * |F|^2 * F` with `|F|` the
///   Frobenius norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StressModel {
    Linear { kappa: f64 },
    Cubic { kappa: f64, beta: f64 },
}

impl StressModel {
    pub fn linear(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "stress modulus kappa must be positive, got {kappa}"
            )));
        }
        Ok(Self::Linear { kappa })
    }

    pub fn cubic(kappa: f64, beta: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "stress modulus kappa must be positive, got {kappa}"
            )));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "cubic coefficient beta must be nonnegative, got {beta}"
            )));
        }
        Ok(Self::Cubic { kappa, beta })
    }

    pub fn kappa(&self) -> f64 {
        match *self {
            Self::Linear { kappa } | Self::Cubic { kappa, .. } => kappa,
        }
    }

    /// Evaluate `T(F)` for a single `d x d` deformation gradient.
    pub fn eval(&self, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_square_finite(f)?;
        match *self {
            Self::Linear { kappa } => Ok(f * kappa),
            Self::Cubic { kappa, beta } => {
                let q: f64 = f.iter().map(|x| x * x).sum();
                Ok(f * (kappa + beta * q))
            }
        }
    }

    /// Exact analytic Jacobian `dT_{i,alpha} / dF_{j,beta}`.
    ///
    /// For the cubic law
    /// `dT_{ia}/dF_{jb} = (kappa + beta |F|^2) delta_ij delta_ab
    ///                    + 2 beta F_{ia} F_{jb}`.
    pub fn jacobian(&self, f: &DMatrix<f64>) -> Result<JacobianTensor> {
        check_square_finite(f)?;
        let d = f.nrows();
        let n = d * d;
        let entries = match *self {
            Self::Linear { kappa } => DMatrix::identity(n, n) * kappa,
            Self::Cubic { kappa, beta } => {
                let q: f64 = f.iter().map(|x| x * x).sum();
                let mut m = DMatrix::identity(n, n) * (kappa + beta * q);
                for i in 0..d {
                    for a in 0..d {
                        for j in 0..d {
                            for b in 0..d {
                                m[(i * d + a, j * d + b)] += 2.0 * beta * f[(i, a)] * f[(j, b)];
                            }
                        }
                    }
                }
                m
            }
        };
        Ok(JacobianTensor { dim: d, entries })
    }

    /// `T(F)` applied pointwise over a matrix field.
    pub fn eval_field(&self, f: &MatrixField) -> MatrixField {
        match *self {
            Self::Linear { kappa } => {
                let mut out = f.clone();
                out.scale(kappa);
                out
            }
            Self::Cubic { kappa, beta } => {
                let q = frobenius_sq_field(f);
                let mut out = f.clone();
                for c in out.components_mut() {
                    let comp_vals = c.values_mut();
                    for (v, qv) in comp_vals.iter_mut().zip(q.values().iter()) {
                        *v *= kappa + beta * qv;
                    }
                }
                out
            }
        }
    }

    /// Directional derivative `grad T(F)[X]` applied pointwise: component
    /// `(i,alpha)` is `(kappa + beta |F|^2) X_{ia} + 2 beta F_{ia} <F, X>`.
    pub fn jacobian_apply_field(&self, f: &MatrixField, x: &MatrixField) -> MatrixField {
        match *self {
            Self::Linear { kappa } => {
                let mut out = x.clone();
                out.scale(kappa);
                out
            }
            Self::Cubic { kappa, beta } => {
                let grid = f.grid();
                let q = frobenius_sq_field(f);
                // pointwise inner product <F, X>
                let mut fx = ScalarField::zeros(grid);
                for (fc, xc) in f.components().iter().zip(x.components()) {
                    let fxv = fx.values_mut();
                    for ((t, a), b) in fxv.iter_mut().zip(fc.values()).zip(xc.values()) {
                        *t += a * b;
                    }
                }
                let mut out = x.clone();
                let d = f.dim();
                for i in 0..d {
                    for a in 0..d {
                        let fc = f.comp(i, a).clone();
                        let oc = out.comp_mut(i, a).values_mut();
                        for (((o, qv), fv), fxv) in oc
                            .iter_mut()
                            .zip(q.values())
                            .zip(fc.values())
                            .zip(fx.values())
                        {
                            *o = (kappa + beta * qv) * *o + 2.0 * beta * fv * fxv;
                        }
                    }
                }
                out
            }
        }
    }

    /// Largest eigenvalue of the symmetric Jacobian over a whole field,
    /// analytic for the built-in laws: `kappa + 3 beta |F|^2` pointwise.
    pub fn gamma_over_field(&self, f: &MatrixField) -> f64 {
        match *self {
            Self::Linear { kappa } => kappa,
            Self::Cubic { kappa, beta } => {
                let mut qmax = 0.0f64;
                let q = frobenius_sq_field(f);
                for v in q.values() {
                    qmax = qmax.max(*v);
                }
                kappa + 3.0 * beta * qmax
            }
        }
    }
}

/// Squared Frobenius norm `|F|^2` as a scalar field.
fn frobenius_sq_field(f: &MatrixField) -> ScalarField {
    let mut q = ScalarField::zeros(f.grid());
    for c in f.components() {
        let qv = q.values_mut();
        for (t, a) in qv.iter_mut().zip(c.values()) {
            *t += a * a;
        }
    }
    q
}

fn check_square_finite(f: &DMatrix<f64>) -> Result<()> {
    if f.nrows() != f.ncols() || !(1..=3).contains(&f.nrows()) {
        return Err(CoreError::InvalidInput(format!(
            "deformation gradient must be d x d with d in 1..=3, got {} x {}",
            f.nrows(),
            f.ncols()
        )));
    }
    if f.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::InvalidInput(
            "deformation gradient has non-finite entries".into(),
        ));
    }
    Ok(())
}

/// Stress Jacobian as a `d^2 x d^2` matrix. Rows are indexed by the pair
/// `(i, alpha)` with `i` outer, columns by `(j, beta)` with `j` outer, so the
/// linear law maps to `kappa * I`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianTensor {
    dim: usize,
    entries: DMatrix<f64>,
}

impl JacobianTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Entry `dT_{i,alpha} / dF_{j,beta}` (all indices zero-based).
    pub fn entry(&self, i: usize, alpha: usize, j: usize, beta: usize) -> f64 {
        self.entries[(i * self.dim + alpha, j * self.dim + beta)]
    }
}

/// Compare the analytic Jacobian against central finite differences of the
/// stress, returning the worst entry error relative to the Jacobian scale.
pub fn jacobian_fd_check(model: &StressModel, f: &DMatrix<f64>, h: f64) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let exact = model.jacobian(f)?;
    let d = f.nrows();
    let scale = exact
        .matrix()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for j in 0..d {
        for b in 0..d {
            let mut fp = f.clone();
            let mut fm = f.clone();
            fp[(j, b)] += h;
            fm[(j, b)] -= h;
            let tp = model.eval(&fp)?;
            let tm = model.eval(&fm)?;
            for i in 0..d {
                for a in 0..d {
                    let fd = (tp[(i, a)] - tm[(i, a)]) / (2.0 * h);
                    let err = (fd - exact.entry(i, a, j, b)).abs() / scale;
                    worst = worst.max(err);
                }
            }
        }
    }
    Ok(worst)
}

/// Subcharacteristic bound: maximum over the sample states of the largest
/// eigenvalue of the symmetric part of `grad T`, i.e. the smallest `Gamma`
/// with `grad T(F) <= Gamma I` in the quadratic-form sense over the samples.
pub fn subchar_gamma(model: &StressModel, f_samples: &[DMatrix<f64>]) -> Result<f64> {
    if f_samples.is_empty() {
        return Err(CoreError::InvalidInput(
            "subcharacteristic bound needs at least one sample state".into(),
        ));
    }
    let mut gamma = f64::NEG_INFINITY;
    for f in f_samples {
        let jac = model.jacobian(f)?;
        let sym = (jac.matrix() + jac.matrix().transpose()) * 0.5;
        let eigs = sym.symmetric_eigenvalues();
        gamma = gamma.max(eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(gamma)
}

/// Smallest `C` with
/// `sum_alpha |(R_alpha - A_alpha(F)^T) v_alpha|^2 <= C mu sum_alpha |v_alpha|^2`,
/// computed as the squared operator norm of the block-diagonal stacked map
/// divided by `mu`.
pub fn das_condition_norm(model: &StressModel, f: &DMatrix<f64>, mu: f64) -> Result<f64> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "viscosity mu must be positive, got {mu}"
        )));
    }
    check_square_finite(f)?;
    let d = f.nrows();
    let mut worst = 0.0f64;
    for alpha in 1..=d {
        let r = selector_matrix(d, alpha)?;
        let a_t = crate::algebra::stress_jacobian_block(model, f, alpha)?;
        let diff = &r - &a_t;
        // spectral norm of a d^2 x d block
        let sigma = diff
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        worst = worst.max(sigma * sigma);
    }
    Ok(worst / mu)
}
