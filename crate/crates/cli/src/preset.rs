//! Initial-data presets.

use visco_core::field::{MatrixField, ScalarField, VectorField};

use crate::config::{InitPreset, RunSpec};
use crate::error::Result;

/// Build the equilibrium initial data `(F0, v0)` for a spec.
///
/// * `zero`: all components zero.
/// * `trig_smooth`: `F0_{i,a} = amp_a * delta_{i,a} * cos(x_a)`,
///   `v0_i = amp_b * sin(x_1)` — zero-mean smooth data reproducible across
///   implementations.
pub fn build_preset(spec: &RunSpec) -> Result<(MatrixField, VectorField)> {
    let grid = spec.grid()?;
    let d = spec.dim;
    match spec.init_preset {
        InitPreset::Zero => Ok((MatrixField::zeros(grid), VectorField::zeros(grid))),
        InitPreset::TrigSmooth => {
            let a = spec.amp_a;
            let b = spec.amp_b;
            let mut f_comps = Vec::with_capacity(d * d);
            for i in 0..d {
                for alpha in 0..d {
                    if i == alpha {
                        f_comps.push(ScalarField::from_fn(grid, move |x| a * x[alpha].cos()));
                    } else {
                        f_comps.push(ScalarField::zeros(grid));
                    }
                }
            }
            let v_comps = (0..d)
                .map(|_| ScalarField::from_fn(grid, move |x| b * x[0].sin()))
                .collect();
            Ok((
                MatrixField::from_components(d, f_comps)?,
                VectorField::from_components(v_comps)?,
            ))
        }
    }
}
