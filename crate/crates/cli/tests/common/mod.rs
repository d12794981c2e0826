//! Oracle helpers for the acceptance suite: naive DFT, dense matrix
//! exponential, per-mode exact solutions, and a small deterministic
//! pseudo-random generator. Independent of the library's FFT and
//! time-stepping code paths.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;

use visco_core::equilibrium::{EquilConfig, EquilState};
use visco_core::field::{MatrixField, ScalarField, StateField, VectorField};
use visco_core::grid::PeriodicGrid;
use visco_core::relax::RelaxConfig;

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

fn deriv_wavenumber(grid: PeriodicGrid, j: usize) -> f64 {
    if grid.is_nyquist(j) {
        0.0
    } else {
        grid.wavenumber(j)
    }
}

fn to_field(grid: PeriodicGrid, spec: &[Complex64]) -> ScalarField {
    let vals = idft(spec);
    ScalarField::from_values(
        grid,
        ndarray::ArrayD::from_shape_vec(grid.shape(), vals).unwrap(),
    )
    .unwrap()
}

/// Exact d = 1 linear relaxation solution by per-mode matrix exponentials.
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
    StateField::new(
        MatrixField::from_components(1, vec![to_field(grid, &f_out)]).unwrap(),
        VectorField::from_components(vec![to_field(grid, &v_out)]).unwrap(),
        MatrixField::from_components(1, vec![to_field(grid, &s_out)]).unwrap(),
    )
    .unwrap()
}

/// Exact d = 1 linear equilibrium solution by per-mode matrix exponentials.
pub fn equil_oracle_1d(init: &EquilState, cfg: &EquilConfig, t: f64, kappa: f64) -> EquilState {
    let grid = cfg.grid;
    let n = grid.n_points();
    let f_hat = dft(init.f.comp(0, 0).values().as_slice().unwrap());
    let v_hat = dft(init.v.comp(0).values().as_slice().unwrap());
    let mut f_out = vec![Complex64::default(); n];
    let mut v_out = vec![Complex64::default(); n];
    for j in 0..n {
        let ik = Complex64::new(0.0, deriv_wavenumber(grid, j));
        let k_full = grid.wavenumber(j);
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::default(),
                ik,
                ik * kappa,
                Complex64::new(-cfg.mu * k_full * k_full, 0.0),
            ],
        );
        let prop = expm(&m.map(|c| c * t));
        let u0 = nalgebra::DVector::from_vec(vec![f_hat[j], v_hat[j]]);
        let u = &prop * u0;
        f_out[j] = u[0];
        v_out[j] = u[1];
    }
    EquilState::new(
        MatrixField::from_components(1, vec![to_field(grid, &f_out)]).unwrap(),
        VectorField::from_components(vec![to_field(grid, &v_out)]).unwrap(),
    )
    .unwrap()
}

pub fn state_distance(a: &StateField, b: &StateField) -> f64 {
    a.components()
        .zip(b.components())
        .map(|(x, y)| x.checked_sub(y).unwrap().linf_norm())
        .fold(0.0, f64::max)
}

pub fn equil_distance(a: &EquilState, b: &EquilState) -> f64 {
    let df = a.f.checked_sub(&b.f).unwrap().linf_norm();
    let dv = (0..a.v.dim())
        .map(|i| a.v.comp(i).checked_sub(b.v.comp(i)).unwrap().linf_norm())
        .fold(0.0, f64::max);
    df.max(dv)
}

/// Small deterministic xorshift generator for reproducible random states.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    /// Uniform in [-1, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 52) as f64 * 2.0 - 1.0
    }
}
