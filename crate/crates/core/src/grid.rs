//! Periodic Cartesian grid and spatial multi-indices.

use crate::error::{CoreError, Result};

/// Uniform periodic grid on `[0, L)^d` with `n` points per axis.
///
/// All axes share the same point count and length. `n` must be a power of two
/// (at least 8) so the Fourier transforms stay fast and the Nyquist-mode
/// conventions are unambiguous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    dim: usize,
    n_points: usize,
    length: f64,
}

impl PeriodicGrid {
    /// Standard domain length `2*pi`.
    pub const DEFAULT_LENGTH: f64 = std::f64::consts::TAU;

    pub fn new(dim: usize, n_points: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(CoreError::InvalidInput(format!(
                "grid dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(CoreError::InvalidInput(format!(
                "grid points per axis must be a power of two >= 8, got {n_points}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "grid length must be positive and finite, got {length}"
            )));
        }
        Ok(Self {
            dim,
            n_points,
            length,
        })
    }

    /// Grid with the default `2*pi` length.
    pub fn standard(dim: usize, n_points: usize) -> Result<Self> {
        Self::new(dim, n_points, Self::DEFAULT_LENGTH)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Mesh width `L / n`.
    pub fn spacing(&self) -> f64 {
        self.length / self.n_points as f64
    }

    /// Total number of grid points `n^d`.
    pub fn total_points(&self) -> usize {
        self.n_points.pow(self.dim as u32)
    }

    /// Volume of one grid cell, `dx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Shape vector `[n; d]` for array storage.
    pub fn shape(&self) -> Vec<usize> {
        vec![self.n_points; self.dim]
    }

    /// Physical coordinate of point index `j` along one axis.
    pub fn coordinate(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    /// Signed Fourier wavenumber of transform index `j` along one axis,
    /// in the standard FFT ordering `0, 1, .., n/2-1, -n/2, .., -1` scaled
    /// by `2*pi/L`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.n_points;
        let base = std::f64::consts::TAU / self.length;
        if j < n / 2 {
            j as f64 * base
        } else {
            (j as f64 - n as f64) * base
        }
    }

    /// Largest resolvable wavenumber magnitude `(n/2) * 2*pi/L`.
    pub fn max_wavenumber(&self) -> f64 {
        (self.n_points as f64 / 2.0) * std::f64::consts::TAU / self.length
    }

    /// True when `j` is the unmatched Nyquist index `n/2`.
    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.n_points / 2
    }
}

/// Spatial multi-index `gamma` with `|gamma| <= 3`, one order per axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndex {
    orders: Vec<usize>,
}

impl MultiIndex {
    /// Maximum total derivative order supported by the energy machinery.
    pub const MAX_ORDER: usize = 3;

    pub fn new(orders: &[usize]) -> Result<Self> {
        if orders.is_empty() || orders.len() > 3 {
            return Err(CoreError::InvalidInput(format!(
                "multi-index must have 1..=3 axes, got {}",
                orders.len()
            )));
        }
        let total: usize = orders.iter().sum();
        if total > Self::MAX_ORDER {
            return Err(CoreError::InvalidInput(format!(
                "multi-index order |gamma| = {total} exceeds {}",
                Self::MAX_ORDER
            )));
        }
        Ok(Self {
            orders: orders.to_vec(),
        })
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn dim(&self) -> usize {
        self.orders.len()
    }

    /// Total order `|gamma|`.
    pub fn total_order(&self) -> usize {
        self.orders.iter().sum()
    }

    /// All multi-indices over `d` axes with `|gamma| <= max_order`,
    /// enumerated in a fixed (lexicographic) order.
    pub fn enumerate(dim: usize, max_order: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut orders = vec![0usize; dim];
        loop {
            if orders.iter().sum::<usize>() <= max_order {
                out.push(MultiIndex {
                    orders: orders.clone(),
                });
            }
            // odometer increment, each digit bounded by max_order
            let mut axis = dim;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if orders[axis] < max_order {
                    orders[axis] += 1;
                    break;
                }
                orders[axis] = 0;
            }
        }
    }
}
