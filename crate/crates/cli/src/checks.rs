//! Drivers behind `algebra-check`, `modulated-check` and `memory-check`,
//! shared between the executable and the acceptance suite.

use serde::Serialize;

use visco_core::algebra::{symmetrizer_min_eigenvalue, SystemMatrices};
use visco_core::energy::{self, EnergyReport, ModulatedParams};
use visco_core::equilibrium::{self, EquilConfig, EquilState};
use visco_core::field::MatrixField;
use visco_core::grid::PeriodicGrid;
use visco_core::relax::{self, RelaxConfig};
use visco_core::stress::StressModel;

use crate::config::RunSpec;
use crate::error::Result;
use crate::preset::build_preset;

/// Parameter grid exercised by `algebra-check`.
pub const ALGEBRA_EPS: [f64; 3] = [1e-1, 1e-2, 1e-3];
pub const ALGEBRA_MU: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AlgebraRow {
    pub d: usize,
    pub alpha: usize,
    pub eps: f64,
    pub mu: f64,
    /// `max-norm asymmetry of B A_alpha`.
    pub asym: f64,
    /// Smallest eigenvalue of the symmetrizer.
    pub min_eig: f64,
}

/// Symmetrizer defect and minimum eigenvalue over the whole
/// `(d, alpha, eps, mu)` grid.
pub fn algebra_check() -> Result<Vec<AlgebraRow>> {
    let mut rows = Vec::new();
    for d in 1..=3usize {
        for &mu in &ALGEBRA_MU {
            for &eps in &ALGEBRA_EPS {
                let sys = SystemMatrices::new(d, eps, mu)?;
                let min_eig = symmetrizer_min_eigenvalue(d, eps, mu)?;
                for alpha in 1..=d {
                    let ba = sys.symmetrizer() * sys.flux(alpha);
                    let skew = &ba - ba.transpose();
                    let asym = skew.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    rows.push(AlgebraRow {
                        d,
                        alpha,
                        eps,
                        mu,
                        asym,
                        min_eig,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn algebra_csv(rows: &[AlgebraRow]) -> String {
    let mut out = String::from("d,alpha,eps,mu,asym,min_eig\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.d, r.alpha, r.eps, r.mu, r.asym, r.min_eig
        ));
    }
    out
}

/// A matched relaxation/equilibrium pair and its modulated-energy report.
pub struct ModulatedRun {
    pub n_points: usize,
    pub n_intervals: usize,
    pub report: EnergyReport,
}

pub struct ModulatedOutcome {
    pub eps: f64,
    pub gamma: f64,
    pub base: ModulatedRun,
    pub refined: ModulatedRun,
    /// Residual reduction factor from base to the doubled resolution.
    pub ratio: f64,
}

fn modulated_pair(
    spec: &RunSpec,
    grid: PeriodicGrid,
    model: StressModel,
    eps: f64,
    n_intervals: usize,
) -> Result<(relax::Trajectory, equilibrium::EquilTrajectory)> {
    let (f0, v0) = build_preset_on(spec, grid)?;
    let relax_cfg = RelaxConfig::new(eps, spec.mu, model, grid, spec.t_final, spec.cfl_safety)?;
    let init = relax::well_prepared_init(&f0, &v0, &relax_cfg)?;
    let traj = relax::run_sampled(&init, &relax_cfg, n_intervals, None)?;
    let equil_cfg = EquilConfig::new(spec.mu, model, grid, spec.t_final, spec.cfl_safety)?;
    let init_eq = EquilState::new(f0, v0)?;
    let equil = equilibrium::run_sampled(&init_eq, &equil_cfg, n_intervals, Some(traj.step_dt))?;
    Ok((traj, equil))
}

fn build_preset_on(
    spec: &RunSpec,
    grid: PeriodicGrid,
) -> Result<(MatrixField, visco_core::field::VectorField)> {
    let mut on_grid = spec.clone();
    on_grid.n_points = grid.n_points();
    build_preset(&on_grid)
}

/// Subcharacteristic bound over both trajectories.
fn gamma_over_runs(
    model: &StressModel,
    traj: &relax::Trajectory,
    equil: &equilibrium::EquilTrajectory,
) -> f64 {
    let mut gamma = f64::NEG_INFINITY;
    for w in &traj.states {
        gamma = gamma.max(model.gamma_over_field(&w.f));
    }
    for e in &equil.states {
        gamma = gamma.max(model.gamma_over_field(&e.f));
    }
    gamma
}

/// Assemble the modulated-energy identity at the first sweep `eps`, then
/// repeat with both the grid and the sampling rate doubled and report the
/// residual reduction. Sampling resolves the relaxation layer
/// (`dt_s <= eps/8`) so the central time differences converge at order two.
pub fn modulated_check(spec: &RunSpec) -> Result<ModulatedOutcome> {
    let eps = spec.eps_list[0];
    let model = spec.stress_model()?;
    let base_grid = spec.grid()?;

    let base_cfg = RelaxConfig::new(
        eps,
        spec.mu,
        model,
        base_grid,
        spec.t_final,
        spec.cfl_safety,
    )?;
    let delta_s = (spec.sample_every as f64 * relax::stable_dt(&base_cfg)).min(eps / 8.0);
    let base_k = ((spec.t_final / delta_s).ceil() as usize).max(2);

    let (traj_base, equil_base) = modulated_pair(spec, base_grid, model, eps, base_k)?;
    let gamma = gamma_over_runs(&model, &traj_base, &equil_base);
    let params = ModulatedParams::new(spec.lambda, gamma, spec.mu, eps)?;
    let report_base = energy::modulated_residual(&traj_base, &equil_base, &params)?;

    let fine_grid = PeriodicGrid::new(spec.dim, 2 * spec.n_points, spec.length)?;
    let (traj_fine, equil_fine) = modulated_pair(spec, fine_grid, model, eps, 2 * base_k)?;
    let report_fine = energy::modulated_residual(&traj_fine, &equil_fine, &params)?;

    let ratio = report_base.identity_residual_l1 / report_fine.identity_residual_l1;
    Ok(ModulatedOutcome {
        eps,
        gamma,
        base: ModulatedRun {
            n_points: base_grid.n_points(),
            n_intervals: base_k,
            report: report_base,
        },
        refined: ModulatedRun {
            n_points: fine_grid.n_points(),
            n_intervals: 2 * base_k,
            report: report_fine,
        },
        ratio,
    })
}

pub struct MemoryOutcome {
    pub eps: f64,
    /// Base history sampling interval (at most `eps/20`).
    pub dt_s: f64,
    /// Start of the comparison window, five relaxation times.
    pub window_start: f64,
    pub sup_base: f64,
    pub sup_half: f64,
    /// Mismatch reduction when the history sampling is halved.
    pub ratio: f64,
    /// `(t, max-norm mismatch)` for the base run inside the window.
    pub series: Vec<(f64, f64)>,
}

/// Compare the evolved stress of a well-prepared relaxation run against the
/// fading-memory quadrature over the stored `F` history, at the base history
/// sampling `eps/40` and again at half that interval.
pub fn memory_check(spec: &RunSpec) -> Result<MemoryOutcome> {
    let eps = spec.eps_list[0];
    let model = spec.stress_model()?;
    let grid = spec.grid()?;
    let (f0, v0) = build_preset(spec)?;
    let cfg = RelaxConfig::new(eps, spec.mu, model, grid, spec.t_final, spec.cfl_safety)?;
    let init = relax::well_prepared_init(&f0, &v0, &cfg)?;
    let window_start = 5.0 * eps;

    let mut sups = Vec::new();
    let mut series = Vec::new();
    let dt_s = eps / 40.0;
    for (pass, divisor) in [(0usize, 40.0), (1, 80.0)] {
        let step = eps / divisor;
        let n = ((spec.t_final / step).ceil() as usize).max(2);
        let traj = relax::run_sampled(&init, &cfg, n, Some(spec.t_final / n as f64))?;
        let f_hist: Vec<MatrixField> = traj.states.iter().map(|w| w.f.clone()).collect();
        let mut sup = 0.0f64;
        for (j, &t) in traj.times.iter().enumerate() {
            if t + 1e-12 < window_start {
                continue;
            }
            let s = energy::memory_stress(&traj.times, &f_hist, eps, spec.mu, &model, t)?;
            let err = s.checked_sub(&traj.states[j].s)?.linf_norm();
            sup = sup.max(err);
            if pass == 0 {
                series.push((t, err));
            }
        }
        sups.push(sup);
    }
    Ok(MemoryOutcome {
        eps,
        dt_s,
        window_start,
        sup_base: sups[0],
        sup_half: sups[1],
        ratio: sups[0] / sups[1],
        series,
    })
}

pub fn memory_csv(outcome: &MemoryOutcome) -> String {
    let mut out = String::from("t,mismatch\n");
    for (t, m) in &outcome.series {
        out.push_str(&format!("{t},{m}\n"));
    }
    out
}
