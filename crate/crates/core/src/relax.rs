//! Explicit RK4 integration of the stress-relaxation system
//!
//! ```text
//!   dF_{i,a}/dt = partial_a v_i
//!   dv_i/dt     = sum_a partial_a S_{i,a}
//!   dS_{i,a}/dt = (mu/eps) partial_a v_i - (1/eps) S_{i,a} + (1/eps) T_{i,a}(F)
//! ```
//!
//! with stiffness-aware step control: the step obeys both the RK4 real-axis
//! limit for the `-S/eps` damping and the imaginary-axis limit for acoustic
//! waves of speed `sqrt(mu/eps)`. No dealiasing is applied; the cubic model's
//! aliasing is monitored through the highest-third spectral energy fraction.

use crate::error::{CoreError, Result};
use crate::field::{l2_norm_sq, same_grid, MatrixField, StateField, VectorField};
use crate::grid::PeriodicGrid;
use crate::spectral::{
    derivative, divergence_row, high_mode_energy_fraction, laplacian, velocity_gradient,
};
use crate::stress::StressModel;

/// Parameters of one relaxation run.
#[derive(Debug, Clone, Copy)]
pub struct RelaxConfig {
    pub eps: f64,
    pub mu: f64,
    pub model: StressModel,
    pub grid: PeriodicGrid,
    pub t_final: f64,
    pub cfl_safety: f64,
}

impl RelaxConfig {
    pub fn new(
        eps: f64,
        mu: f64,
        model: StressModel,
        grid: PeriodicGrid,
        t_final: f64,
        cfl_safety: f64,
    ) -> Result<Self> {
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
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if !(cfl_safety > 0.0 && cfl_safety <= 1.0) {
            return Err(CoreError::InvalidInput(format!(
                "cfl safety factor must lie in (0, 1], got {cfl_safety}"
            )));
        }
        Ok(Self {
            eps,
            mu,
            model,
            grid,
            t_final,
            cfl_safety,
        })
    }
}

/// Largest stable step:
/// `cfl_safety * min(2.5 eps, 2.8 / (sqrt(mu/eps) * k_max))`.
///
/// 2.5 sits inside the RK4 real-axis stability interval (~2.78) for the
/// `-S/eps` damping; 2.8 sits inside the imaginary-axis interval
/// (2*sqrt(2) ~ 2.83) for the acoustic speed `sqrt(mu/eps)`.
pub fn stable_dt(cfg: &RelaxConfig) -> f64 {
    let k_max = cfg.grid.max_wavenumber();
    let damping_limit = 2.5 * cfg.eps;
    let acoustic_limit = 2.8 / ((cfg.mu / cfg.eps).sqrt() * k_max);
    cfg.cfl_safety * damping_limit.min(acoustic_limit)
}

/// Right-hand side of the relaxation system.
pub fn rhs(state: &StateField, cfg: &RelaxConfig) -> Result<StateField> {
    if !state.is_finite() {
        return Err(CoreError::InvalidInput(
            "non-finite relaxation state (blow-up signal)".into(),
        ));
    }
    same_grid(state.grid(), cfg.grid)?;
    let d = cfg.grid.dim();
    let grad_v = velocity_gradient(&state.v)?;
    let stress = cfg.model.eval_field(&state.f);

    let df = grad_v.clone();

    let mut dv_comps = Vec::with_capacity(d);
    for i in 0..d {
        dv_comps.push(divergence_row(&state.s, i)?);
    }
    let dv = VectorField::from_components(dv_comps)?;

    let mut ds = grad_v;
    ds.scale(cfg.mu / cfg.eps);
    ds.axpy(-1.0 / cfg.eps, &state.s);
    ds.axpy(1.0 / cfg.eps, &stress);

    StateField::new(df, dv, ds)
}

/// One classical four-stage explicit step.
pub fn rk4_step(state: &StateField, cfg: &RelaxConfig, dt: f64) -> Result<StateField> {
    let k1 = rhs(state, cfg)?;
    let mut u = state.clone();
    u.axpy(0.5 * dt, &k1);
    let k2 = rhs(&u, cfg)?;
    let mut u = state.clone();
    u.axpy(0.5 * dt, &k2);
    let k3 = rhs(&u, cfg)?;
    let mut u = state.clone();
    u.axpy(dt, &k3);
    let k4 = rhs(&u, cfg)?;

    let mut out = state.clone();
    out.axpy(dt / 6.0, &k1);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4);
    if !out.is_finite() {
        return Err(CoreError::InvalidInput(
            "time step produced non-finite values (blow-up signal)".into(),
        ));
    }
    Ok(out)
}

/// Uniformly sampled solution record.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateField>,
    pub config: RelaxConfig,
    /// Internal step actually used (at most `stable_dt`).
    pub step_dt: f64,
    /// Worst highest-third spectral energy fraction seen at sample times.
    pub max_aliasing_fraction: f64,
}

impl Trajectory {
    /// Spacing of the stored samples.
    pub fn sample_interval(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }
}

/// Integrate to `t_final`, storing `n_intervals + 1` uniformly spaced samples
/// (including the initial and exact final time). The internal step divides
/// the sampling interval and respects `stable_dt` and the optional `dt_cap`.
pub fn run_sampled(
    init: &StateField,
    cfg: &RelaxConfig,
    n_intervals: usize,
    dt_cap: Option<f64>,
) -> Result<Trajectory> {
    same_grid(init.grid(), cfg.grid)?;
    if n_intervals == 0 {
        return Err(CoreError::InvalidInput(
            "need at least one sampling interval".into(),
        ));
    }
    if !init.is_finite() {
        return Err(CoreError::InvalidInput("non-finite initial state".into()));
    }
    let delta = cfg.t_final / n_intervals as f64;
    let mut limit = stable_dt(cfg);
    if let Some(cap) = dt_cap {
        if !(cap.is_finite() && cap > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "step cap must be positive, got {cap}"
            )));
        }
        limit = limit.min(cap);
    }
    let substeps = (delta / limit).ceil().max(1.0) as usize;
    let dt = delta / substeps as f64;

    let mut times = Vec::with_capacity(n_intervals + 1);
    let mut states = Vec::with_capacity(n_intervals + 1);
    let mut max_alias = aliasing_fraction(init);
    times.push(0.0);
    states.push(init.clone());

    let mut current = init.clone();
    for j in 1..=n_intervals {
        for s in 0..substeps {
            let t_now = (j - 1) as f64 * delta + s as f64 * dt;
            current = rk4_step(&current, cfg, dt).map_err(|_| CoreError::BlowUp { time: t_now })?;
        }
        times.push(j as f64 * delta);
        states.push(current.clone());
        max_alias = max_alias.max(aliasing_fraction(&current));
    }

    Ok(Trajectory {
        times,
        states,
        config: *cfg,
        step_dt: dt,
        max_aliasing_fraction: max_alias,
    })
}

/// Integrate with `dt = stable_dt` (nudged down so steps land exactly on
/// `t_final`), recording every `sample_every` steps plus the final time.
pub fn run(init: &StateField, cfg: &RelaxConfig, sample_every: usize) -> Result<Trajectory> {
    if sample_every == 0 {
        return Err(CoreError::InvalidInput(
            "sample_every must be at least 1".into(),
        ));
    }
    let raw_steps = (cfg.t_final / stable_dt(cfg)).ceil().max(1.0) as usize;
    let n_total = raw_steps.div_ceil(sample_every) * sample_every;
    run_sampled(init, cfg, n_total / sample_every, None)
}

/// Build relaxation data sitting exactly on the equilibrium manifold:
/// `F = F0`, `v = v0`, `S_{i,a} = T_{i,a}(F0) + mu * partial_a v0_i`.
pub fn well_prepared_init(
    f0: &MatrixField,
    v0: &VectorField,
    cfg: &RelaxConfig,
) -> Result<StateField> {
    same_grid(f0.grid(), cfg.grid)?;
    same_grid(v0.grid(), cfg.grid)?;
    let d = cfg.grid.dim();
    let mut s = cfg.model.eval_field(f0);
    for i in 0..d {
        for alpha in 0..d {
            let dv = derivative(v0.comp(i), alpha)?;
            s.comp_mut(i, alpha).axpy(cfg.mu, &dv);
        }
    }
    StateField::new(f0.clone(), v0.clone(), s)
}

/// `L^2` residual of the second-order form
/// `eps d2v/dt2 + dv/dt - div T(F) - mu lap v`
/// at interior sample times, with time derivatives by central differences of
/// the stored velocity.
pub fn second_order_residual(traj: &Trajectory) -> Result<Vec<(f64, f64)>> {
    if traj.times.len() < 3 {
        return Err(CoreError::InvalidInput(
            "second-order residual needs at least three samples".into(),
        ));
    }
    let cfg = &traj.config;
    let d = cfg.grid.dim();
    let dt_s = traj.sample_interval();
    let mut out = Vec::with_capacity(traj.times.len() - 2);
    for j in 1..traj.times.len() - 1 {
        let stress = cfg.model.eval_field(&traj.states[j].f);
        let mut norm_sq = 0.0;
        for i in 0..d {
            let vm = traj.states[j - 1].v.comp(i);
            let v0 = traj.states[j].v.comp(i);
            let vp = traj.states[j + 1].v.comp(i);

            // eps * (v+ - 2 v0 + v-) / dt^2 + (v+ - v-) / (2 dt)
            let mut r = vp.clone();
            r.axpy(-2.0, v0);
            r.axpy(1.0, vm);
            r.scale(cfg.eps / (dt_s * dt_s));
            let mut first = vp.clone();
            first.axpy(-1.0, vm);
            first.scale(1.0 / (2.0 * dt_s));
            r.axpy(1.0, &first);

            r.axpy(-1.0, &divergence_row(&stress, i)?);
            r.axpy(-cfg.mu, &laplacian(v0)?);
            norm_sq += l2_norm_sq(&r);
        }
        out.push((traj.times[j], norm_sq.sqrt()));
    }
    Ok(out)
}

/// Worst highest-third spectral energy fraction over all state components.
pub fn aliasing_fraction(state: &StateField) -> f64 {
    state
        .components()
        .map(high_mode_energy_fraction)
        .fold(0.0, f64::max)
}
