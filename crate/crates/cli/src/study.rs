//! Relaxation-limit convergence study: sweep `eps`, compare each relaxation
//! run against one shared equilibrium solution, and fit the decay rate of the
//! supremum energies.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use visco_core::energy::{phi_eps, sobolev_energy, DiffState};
use visco_core::equilibrium::{self, EquilConfig, EquilState};
use visco_core::relax::{self, RelaxConfig};
use visco_core::{CoreError, Result as CoreResult};

use crate::config::RunSpec;
use crate::error::{CliError, Result};
use crate::preset::build_preset;

/// Least-squares line through `(log eps, log value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
}

/// Fit `value ~ exp(intercept) * eps^slope` by least squares in log-log
/// coordinates. Needs at least three strictly positive points.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(CliError::Core(CoreError::InvalidInput(format!(
            "rate fit needs at least 3 points, got {}",
            points.len()
        ))));
    }
    for (eps, value) in points {
        if !(eps.is_finite() && *eps > 0.0 && value.is_finite() && *value > 0.0) {
            return Err(CliError::Core(CoreError::InvalidInput(format!(
                "rate fit needs positive finite data, got ({eps}, {value})"
            ))));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(e, _)| e.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    if sxx == 0.0 {
        return Err(CliError::Core(CoreError::InvalidInput(
            "rate fit needs at least two distinct eps values".into(),
        )));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0, f64::max);
    Ok(RateFit {
        slope,
        intercept,
        max_residual,
    })
}

/// One sweep entry. Wall time is reported in the CSV only, so the JSON
/// report stays byte-identical across repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsRow {
    pub eps: f64,
    pub sup_e_sobolev: Option<f64>,
    pub sup_phi: Option<f64>,
    #[serde(skip, default)]
    pub wall_s: f64,
    pub blown_up: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub version: String,
    pub config: RunSpec,
    /// Rows ordered by decreasing eps, one per sweep entry.
    pub rows: Vec<EpsRow>,
    pub fit_energy: Option<RateFit>,
    pub fit_phi: Option<RateFit>,
    /// Measured `max_eps sup_t E / eps^2`.
    pub c_t: Option<f64>,
    /// Largest high-order energy of the prepared data at `t = 0`.
    pub initial_energy_max: f64,
    /// True when fewer than three usable rows prevented the fits.
    pub degenerate_fit: bool,
}

struct EpsOutcome {
    sup_e: f64,
    sup_phi: f64,
    e0: f64,
}

fn sweep_one(
    spec: &RunSpec,
    eps: f64,
    n_intervals: usize,
    equil: &equilibrium::EquilTrajectory,
) -> CoreResult<EpsOutcome> {
    let grid = equil.config.grid;
    let model = equil.config.model;
    let cfg = RelaxConfig::new(eps, spec.mu, model, grid, spec.t_final, spec.cfl_safety)?;
    let (f0, v0) = (&equil.states[0].f, &equil.states[0].v);
    let init = relax::well_prepared_init(f0, v0, &cfg)?;
    let traj = relax::run_sampled(&init, &cfg, n_intervals, None)?;

    let mut sup_e = 0.0f64;
    let mut sup_phi = 0.0f64;
    let mut e0 = 0.0;
    for (j, (w, e)) in traj.states.iter().zip(&equil.states).enumerate() {
        let diff = DiffState::from_solutions(w, e, &model, spec.mu)?;
        let es = sobolev_energy(&diff, eps, spec.mu)?;
        let p = phi_eps(&diff, eps)?;
        if j == 0 {
            e0 = es;
        }
        sup_e = sup_e.max(es);
        sup_phi = sup_phi.max(p);
    }
    Ok(EpsOutcome { sup_e, sup_phi, e0 })
}

/// Run the full sweep: one shared equilibrium solution sampled on a grid of
/// times common to every `eps`, well-prepared relaxation data per `eps`
/// (so the initial high-order energy vanishes), supremum energies per run,
/// and log-log rate fits over the sweep.
pub fn run_convergence_study(spec: &RunSpec) -> Result<ConvergenceReport> {
    let grid = spec.grid()?;
    let model = spec.stress_model()?;
    let (f0, v0) = build_preset(spec)?;

    // shared sampling grid, fine enough for the smallest (stiffest) eps
    let eps_min = *spec.eps_list.last().expect("validated nonempty");
    let dt_min = relax::stable_dt(&RelaxConfig::new(
        eps_min,
        spec.mu,
        model,
        grid,
        spec.t_final,
        spec.cfl_safety,
    )?);
    let delta_s = spec.sample_every as f64 * dt_min;
    let n_intervals = ((spec.t_final / delta_s).ceil() as usize).max(2);

    // the equilibrium run is shared across eps and at least as finely
    // stepped as the finest relaxation run
    let equil_cfg = EquilConfig::new(spec.mu, model, grid, spec.t_final, spec.cfl_safety)?;
    let init_eq = EquilState::new(f0, v0)?;
    let equil = equilibrium::run_sampled(&init_eq, &equil_cfg, n_intervals, Some(dt_min))?;

    let mut rows = Vec::with_capacity(spec.eps_list.len());
    let mut fit_points_e = Vec::new();
    let mut fit_points_phi = Vec::new();
    let mut c_t: Option<f64> = None;
    let mut initial_energy_max = 0.0f64;
    for &eps in &spec.eps_list {
        let started = Instant::now();
        match sweep_one(spec, eps, n_intervals, &equil) {
            Ok(out) => {
                initial_energy_max = initial_energy_max.max(out.e0);
                if out.sup_e > 0.0 {
                    fit_points_e.push((eps, out.sup_e));
                    let ratio = out.sup_e / (eps * eps);
                    c_t = Some(c_t.map_or(ratio, |c: f64| c.max(ratio)));
                }
                if out.sup_phi > 0.0 {
                    fit_points_phi.push((eps, out.sup_phi));
                }
                rows.push(EpsRow {
                    eps,
                    sup_e_sobolev: Some(out.sup_e),
                    sup_phi: Some(out.sup_phi),
                    wall_s: started.elapsed().as_secs_f64(),
                    blown_up: false,
                });
            }
            Err(CoreError::BlowUp { .. }) => {
                rows.push(EpsRow {
                    eps,
                    sup_e_sobolev: None,
                    sup_phi: None,
                    wall_s: started.elapsed().as_secs_f64(),
                    blown_up: true,
                });
            }
            Err(other) => return Err(other.into()),
        }
    }

    let fit_energy = fit_rate(&fit_points_e).ok();
    let fit_phi = fit_rate(&fit_points_phi).ok();
    let degenerate_fit = fit_energy.is_none() || fit_phi.is_none();

    Ok(ConvergenceReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: spec.clone(),
        rows,
        fit_energy,
        fit_phi,
        c_t,
        initial_energy_max,
        degenerate_fit,
    })
}

/// Acceptance window on the fitted slope around the theoretical rate 2.
pub const SLOPE_WINDOW: (f64, f64) = (1.7, 2.3);
