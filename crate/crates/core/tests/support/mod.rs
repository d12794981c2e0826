//! Shared oracle machinery for solver integration tests: a naive DFT and a
//! dense matrix exponential, deliberately independent of the library's FFT
//! and time-stepping paths.

use nalgebra::DMatrix;
use num_complex::Complex64;

use visco_core::equilibrium::{EquilConfig, EquilState};
use visco_core::field::{MatrixField, ScalarField, StateField, VectorField};
use visco_core::grid::PeriodicGrid;
use visco_core::relax::RelaxConfig;

/// Plain O(N^2) forward DFT of real samples.
pub fn dft(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut out = vec![Complex64::default(); n];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::default();
        for (j, &v) in values.iter().enumerate() {
            let angle = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
            acc += Complex64::new(angle.cos(), angle.sin()) * v;
        }
        *o = acc;
    }
    out
}

/// Inverse DFT, real part.
pub fn idft(spec: &[Complex64]) -> Vec<f64> {
    let n = spec.len();
    let mut out = vec![0.0; n];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::default();
        for (k, &c) in spec.iter().enumerate() {
            let angle = 2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
            acc += Complex64::new(angle.cos(), angle.sin()) * c;
        }
        *o = acc.re / n as f64;
    }
    out
}

/// Dense matrix exponential by scaling and squaring with a Taylor series.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let norm: f64 = a.iter().map(|c| c.norm()).fold(0.0, f64::max) * n as f64;
    let s = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.map(|c| c / 2f64.powi(s as i32));
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let mut acc = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=60 {
        term = (&term * &scaled).map(|c| c / k as f64);
        acc += &term;
        let tnorm: f64 = term.iter().map(|c| c.norm()).sum();
        if tnorm <= 1e-20 {
            break;
        }
    }
    let mut result = acc;
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// First-derivative wavenumber as the solver sees it (Nyquist zeroed).
pub fn deriv_wavenumber(grid: PeriodicGrid, j: usize) -> f64 {
    if grid.is_nyquist(j) {
        0.0
    } else {
        grid.wavenumber(j)
    }
}

/// Exact solution of the d = 1 linear relaxation system by per-mode matrix
/// exponentials of `[[0, ik, 0], [0, 0, ik], [kappa/eps, ik mu/eps, -1/eps]]`.
pub fn relax_oracle_1d(init: &StateField, cfg: &RelaxConfig, t: f64, kappa: f64) -> StateField {
    let grid = cfg.grid;
    let n = grid.n_points();
    let f_hat = dft(init.f.comp(0, 0).values().as_slice().unwrap());
    let v_hat = dft(init.v.comp(0).values().as_slice().unwrap());
    let s_hat = dft(init.s.comp(0, 0).values().as_slice().unwrap());

    let mut f_out = vec![Complex64::default(); n];
    let mut v_out = vec![Complex64::default(); n];
    let mut s_out = vec![Complex64::default(); n];
    for j in 0..n {
        let ik = Complex64::new(0.0, deriv_wavenumber(grid, j));
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                Complex64::default(),
                ik,
                Complex64::default(),
                Complex64::default(),
                Complex64::default(),
                ik,
                Complex64::new(kappa / cfg.eps, 0.0),
                ik * (cfg.mu / cfg.eps),
                Complex64::new(-1.0 / cfg.eps, 0.0),
            ],
        );
        let prop = expm(&m.map(|c| c * t));
        let u0 = nalgebra::DVector::from_vec(vec![f_hat[j], v_hat[j], s_hat[j]]);
        let u = &prop * u0;
        f_out[j] = u[0];
        v_out[j] = u[1];
        s_out[j] = u[2];
    }

    let to_field = |spec: &[Complex64]| {
        let vals = idft(spec);
        ScalarField::from_values(
            grid,
            ndarray::ArrayD::from_shape_vec(grid.shape(), vals).unwrap(),
        )
        .unwrap()
    };
    StateField::new(
        MatrixField::from_components(1, vec![to_field(&f_out)]).unwrap(),
        VectorField::from_components(vec![to_field(&v_out)]).unwrap(),
        MatrixField::from_components(1, vec![to_field(&s_out)]).unwrap(),
    )
    .unwrap()
}

/// Per-mode propagator of the d = 1 linear equilibrium system
/// `[[0, ik], [ik kappa, -mu k^2]]` (full `k^2` in the diffusion symbol).
pub fn equil_mode_matrix(grid: PeriodicGrid, j: usize, kappa: f64, mu: f64) -> DMatrix<Complex64> {
    let ik = Complex64::new(0.0, deriv_wavenumber(grid, j));
    let k_full = grid.wavenumber(j);
    DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::default(),
            ik,
            ik * kappa,
            Complex64::new(-mu * k_full * k_full, 0.0),
        ],
    )
}

/// Exact solution of the d = 1 linear equilibrium system.
pub fn equil_oracle_1d(init: &EquilState, cfg: &EquilConfig, t: f64, kappa: f64) -> EquilState {
    let grid = cfg.grid;
    let n = grid.n_points();
    let f_hat = dft(init.f.comp(0, 0).values().as_slice().unwrap());
    let v_hat = dft(init.v.comp(0).values().as_slice().unwrap());
    let mut f_out = vec![Complex64::default(); n];
    let mut v_out = vec![Complex64::default(); n];
    for j in 0..n {
        let m = equil_mode_matrix(grid, j, kappa, cfg.mu);
        let prop = expm(&m.map(|c| c * t));
        let u0 = nalgebra::DVector::from_vec(vec![f_hat[j], v_hat[j]]);
        let u = &prop * u0;
        f_out[j] = u[0];
        v_out[j] = u[1];
    }
    let to_field = |spec: &[Complex64]| {
        let vals = idft(spec);
        ScalarField::from_values(
            grid,
            ndarray::ArrayD::from_shape_vec(grid.shape(), vals).unwrap(),
        )
        .unwrap()
    };
    EquilState::new(
        MatrixField::from_components(1, vec![to_field(&f_out)]).unwrap(),
        VectorField::from_components(vec![to_field(&v_out)]).unwrap(),
    )
    .unwrap()
}

/// Max-norm distance between two relaxation states.
pub fn state_distance(a: &StateField, b: &StateField) -> f64 {
    a.components()
        .zip(b.components())
        .map(|(x, y)| x.checked_sub(y).unwrap().linf_norm())
        .fold(0.0, f64::max)
}

/// Max-norm distance between two equilibrium states.
pub fn equil_distance(a: &EquilState, b: &EquilState) -> f64 {
    let df = a.f.checked_sub(&b.f).unwrap().linf_norm();
    let dv = (0..a.v.dim())
        .map(|i| a.v.comp(i).checked_sub(b.v.comp(i)).unwrap().linf_norm())
        .fold(0.0, f64::max);
    df.max(dv)
}
