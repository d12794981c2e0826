//! Block matrices of the relaxation system in vectorial form and their
//! positive definite symmetrizer.
//!
//! The state vector is ordered `(F, v, S)` with both matrix blocks flattened
//! row-major (`i` outer, `alpha` inner), giving system size `n = 2 d^2 + d`.
//! The direction selectors `R_alpha` stack Kronecker blocks
//! `delta_{k,alpha} I_{dxd}`, and the flux matrix `A^eps_alpha` carries the
//! three nonzero blocks `-R_alpha`, `-R_alpha^T`, `-(mu/eps) R_alpha`.

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::stress::StressModel;

fn check_dim(d: usize) -> Result<()> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(CoreError::InvalidInput(format!(
            "dimension must be 1, 2 or 3, got {d}"
        )))
    }
}

fn check_eps_mu(eps: f64, mu: f64) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "relaxation parameter eps must be positive, got {eps}"
        )));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "viscosity mu must be positive, got {mu}"
        )));
    }
    Ok(())
}

/// Direction selector `R_alpha` (`d^2 x d`, `alpha` one-based): stacked
/// blocks `delta_{k,alpha} I_{dxd}`.
pub fn selector_matrix(d: usize, alpha: usize) -> Result<DMatrix<f64>> {
    check_dim(d)?;
    if alpha == 0 || alpha > d {
        return Err(CoreError::InvalidInput(format!(
            "direction index alpha must be in 1..={d}, got {alpha}"
        )));
    }
    let mut r = DMatrix::zeros(d * d, d);
    let block = alpha - 1;
    for m in 0..d {
        r[(block * d + m, m)] = 1.0;
    }
    Ok(r)
}

/// Stress block `A_alpha(F)^T` (`d^2 x d`): entry at row `(beta, j)` (block
/// `beta`, inner `j`) and column `i` is `dT_{i,alpha}/dF_{j,beta}`. With this
/// arrangement the linear law gives exactly `kappa * R_alpha`.
pub fn stress_jacobian_block(
    model: &StressModel,
    f: &DMatrix<f64>,
    alpha: usize,
) -> Result<DMatrix<f64>> {
    let d = f.nrows();
    check_dim(d)?;
    if alpha == 0 || alpha > d {
        return Err(CoreError::InvalidInput(format!(
            "direction index alpha must be in 1..={d}, got {alpha}"
        )));
    }
    let jac = model.jacobian(f)?;
    let mut out = DMatrix::zeros(d * d, d);
    for beta in 0..d {
        for j in 0..d {
            for i in 0..d {
                out[(beta * d + j, i)] = jac.entry(i, alpha - 1, j, beta);
            }
        }
    }
    Ok(out)
}

/// Flux matrix `A^eps_alpha` (`n x n`, `n = 2 d^2 + d`).
pub fn flux_matrix(d: usize, alpha: usize, eps: f64, mu: f64) -> Result<DMatrix<f64>> {
    check_eps_mu(eps, mu)?;
    let r = selector_matrix(d, alpha)?;
    let dd = d * d;
    let n = 2 * dd + d;
    let mut a = DMatrix::zeros(n, n);
    // F rows, v columns: -R_alpha
    a.view_mut((0, dd), (dd, d)).copy_from(&(-&r));
    // v rows, S columns: -R_alpha^T
    a.view_mut((dd, dd + d), (d, dd))
        .copy_from(&(-r.transpose()));
    // S rows, v columns: -(mu/eps) R_alpha
    a.view_mut((dd + d, dd), (dd, d))
        .copy_from(&(&r * (-mu / eps)));
    Ok(a)
}

/// Positive definite symmetrizer `B^eps` (`n x n`): diagonal blocks
/// `(mu/eps) I_{d^2}`, `(mu/eps - 1) I_d`, `I_{d^2}` and `-I_{d^2}` coupling
/// the F and S blocks.
pub fn symmetrizer(d: usize, eps: f64, mu: f64) -> Result<DMatrix<f64>> {
    check_dim(d)?;
    check_eps_mu(eps, mu)?;
    let dd = d * d;
    let n = 2 * dd + d;
    let mut b = DMatrix::zeros(n, n);
    let ratio = mu / eps;
    for k in 0..dd {
        b[(k, k)] = ratio;
        b[(dd + d + k, dd + d + k)] = 1.0;
        b[(k, dd + d + k)] = -1.0;
        b[(dd + d + k, k)] = -1.0;
    }
    for k in 0..d {
        b[(dd + k, dd + k)] = ratio - 1.0;
    }
    Ok(b)
}

/// Smallest eigenvalue of `B^eps`; positive whenever `eps < mu/4`, and a
/// nonpositive value signals loss of positivity.
pub fn symmetrizer_min_eigenvalue(d: usize, eps: f64, mu: f64) -> Result<f64> {
    let b = symmetrizer(d, eps, mu)?;
    let eigs = b.symmetric_eigenvalues();
    Ok(eigs.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// The assembled flux matrices and symmetrizer for one `(d, eps, mu)`.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    dim: usize,
    eps: f64,
    mu: f64,
    a: Vec<DMatrix<f64>>,
    b: DMatrix<f64>,
}

impl SystemMatrices {
    pub fn new(d: usize, eps: f64, mu: f64) -> Result<Self> {
        let a = (1..=d)
            .map(|alpha| flux_matrix(d, alpha, eps, mu))
            .collect::<Result<Vec<_>>>()?;
        let b = symmetrizer(d, eps, mu)?;
        Ok(Self {
            dim: d,
            eps,
            mu,
            a,
            b,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// System size `2 d^2 + d`.
    pub fn size(&self) -> usize {
        2 * self.dim * self.dim + self.dim
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Flux matrix for direction `alpha` (one-based).
    pub fn flux(&self, alpha: usize) -> &DMatrix<f64> {
        &self.a[alpha - 1]
    }

    pub fn symmetrizer(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// `max_alpha || B A_alpha - (B A_alpha)^T ||_max`; at most
    /// `1e-13 * mu/eps` for all valid inputs.
    pub fn symmetrizer_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in &self.a {
            let ba = &self.b * a;
            let skew = &ba - ba.transpose();
            worst = worst.max(skew.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        worst
    }

    /// Quadratic form `<B w, w>` for a raw state vector of length `n`.
    pub fn quadratic_form(&self, w: &[f64]) -> f64 {
        let n = self.size();
        assert_eq!(w.len(), n, "state vector has wrong length");
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += w[i] * self.b[(i, j)] * w[j];
            }
        }
        acc
    }
}
