//! Energy functionals and identities for solution differences: the quadratic
//! symmetrizer energy, the Sobolev-weighted high-order energy, the relative
//! modulated energy with its flux and identity residual, and the
//! fading-memory representation of the relaxed stress.

use crate::equilibrium::{self, EquilState, EquilTrajectory};
use crate::error::{CoreError, Result};
use crate::field::{inner_product, l2_norm_sq, same_grid, MatrixField, ScalarField, VectorField};
use crate::grid::{MultiIndex, PeriodicGrid};
use crate::relax::Trajectory;
use crate::spectral::{derivative, divergence_row, multi_derivative, velocity_gradient};
use crate::stress::StressModel;

/// Differences `W = (F-bar - F-hat, v-bar - v-hat, S-bar - S-hat)` between a
/// relaxation state and an equilibrium state, with an optionally cached
/// `d/dt (v-bar - v-hat)` obtained from the two PDE right-hand sides (never
/// from time differencing).
#[derive(Debug, Clone)]
pub struct DiffState {
    pub f: MatrixField,
    pub v: VectorField,
    pub s: MatrixField,
    pub dt_v: Option<VectorField>,
}

impl DiffState {
    pub fn grid(&self) -> PeriodicGrid {
        self.f.grid()
    }

    pub fn new(f: MatrixField, v: VectorField, s: MatrixField) -> Result<Self> {
        same_grid(f.grid(), v.grid())?;
        same_grid(f.grid(), s.grid())?;
        Ok(Self {
            f,
            v,
            s,
            dt_v: None,
        })
    }

    /// All `2d^2 + d` scalar components in the fixed state order.
    pub fn components(&self) -> impl Iterator<Item = &ScalarField> {
        self.f
            .components()
            .iter()
            .chain(self.v.components())
            .chain(self.s.components())
    }

    /// Assemble the difference of a relaxation state against an equilibrium
    /// state with the equilibrium stress reconstructed, caching the velocity
    /// difference rate `div S-bar - (div T(F-hat) + mu lap v-hat)`.
    pub fn from_solutions(
        relax_state: &crate::field::StateField,
        equil_state: &EquilState,
        model: &StressModel,
        mu: f64,
    ) -> Result<Self> {
        same_grid(relax_state.grid(), equil_state.grid())?;
        let d = relax_state.grid().dim();
        let s_hat = equilibrium::equilibrium_stress_with(equil_state, model, mu)?;
        let equil_rates = equilibrium::time_derivatives_with(equil_state, model, mu)?;
        let mut dt_v_comps = Vec::with_capacity(d);
        for i in 0..d {
            let mut c = divergence_row(&relax_state.s, i)?;
            c.axpy(-1.0, equil_rates.v.comp(i));
            dt_v_comps.push(c);
        }
        Ok(Self {
            f: relax_state.f.checked_sub(&equil_state.f)?,
            v: relax_state.v.checked_sub(&equil_state.v)?,
            s: relax_state.s.checked_sub(&s_hat)?,
            dt_v: Some(VectorField::from_components(dt_v_comps)?),
        })
    }

    fn apply_multi_derivative(&self, gamma: &MultiIndex) -> Result<DiffState> {
        let d = self.grid().dim();
        let mut f_comps = Vec::with_capacity(d * d);
        for c in self.f.components() {
            f_comps.push(multi_derivative(c, gamma)?);
        }
        let mut v_comps = Vec::with_capacity(d);
        for c in self.v.components() {
            v_comps.push(multi_derivative(c, gamma)?);
        }
        let mut s_comps = Vec::with_capacity(d * d);
        for c in self.s.components() {
            s_comps.push(multi_derivative(c, gamma)?);
        }
        DiffState::new(
            MatrixField::from_components(d, f_comps)?,
            VectorField::from_components(v_comps)?,
            MatrixField::from_components(d, s_comps)?,
        )
    }
}

fn check_positivity_threshold(eps: f64, mu: f64) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0 && mu.is_finite() && mu > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "eps and mu must be positive, got eps = {eps}, mu = {mu}"
        )));
    }
    if eps >= mu / 4.0 {
        return Err(CoreError::PositivityThreshold {
            eps,
            limit: mu / 4.0,
        });
    }
    Ok(())
}

/// Quadratic symmetrizer energy
/// `integral( (mu/eps)|F|^2 - 2 F:S + (mu/eps - 1)|v|^2 + |S|^2 )`,
/// positive definite for `eps < mu/4`.
pub fn quadratic_energy(w: &DiffState, eps: f64, mu: f64) -> Result<f64> {
    check_positivity_threshold(eps, mu)?;
    let ratio = mu / eps;
    let mut acc = 0.0;
    for (fc, sc) in w.f.components().iter().zip(w.s.components()) {
        acc += ratio * l2_norm_sq(fc);
        acc -= 2.0 * inner_product(fc, sc)?;
        acc += l2_norm_sq(sc);
    }
    for vc in w.v.components() {
        acc += (ratio - 1.0) * l2_norm_sq(vc);
    }
    Ok(acc)
}

/// High-order energy truncated at `|gamma| <= max_order`:
/// `sum_gamma eps * quadratic_energy(partial_gamma W)`.
pub fn sobolev_energy_order(w: &DiffState, eps: f64, mu: f64, max_order: usize) -> Result<f64> {
    check_positivity_threshold(eps, mu)?;
    let d = w.grid().dim();
    let mut acc = 0.0;
    for gamma in MultiIndex::enumerate(d, max_order) {
        let dw = w.apply_multi_derivative(&gamma)?;
        acc += eps * quadratic_energy(&dw, eps, mu)?;
    }
    Ok(acc)
}

/// High-order energy over all multi-indices `|gamma| <= 3`, equivalent to the
/// squared `H^3` norm of `(F, v, sqrt(eps) S)` for small `eps`.
pub fn sobolev_energy(w: &DiffState, eps: f64, mu: f64) -> Result<f64> {
    sobolev_energy_order(w, eps, mu, MultiIndex::MAX_ORDER)
}

/// Comparison functional
/// `integral( |v|^2 + |F|^2 + eps^2 |dv/dt|^2 + eps |grad v|^2 )`
/// controlling the modulated energy from both sides.
pub fn phi_eps(w: &DiffState, eps: f64) -> Result<f64> {
    let dt_v = w.dt_v.as_ref().ok_or_else(|| {
        CoreError::InvalidInput(
            "phi needs the cached velocity rate; build the difference with from_solutions".into(),
        )
    })?;
    let mut acc = 0.0;
    for c in w.v.components() {
        acc += l2_norm_sq(c);
    }
    for c in w.f.components() {
        acc += l2_norm_sq(c);
    }
    for c in dt_v.components() {
        acc += eps * eps * l2_norm_sq(c);
    }
    let grad = velocity_gradient(&w.v)?;
    for c in grad.components() {
        acc += eps * l2_norm_sq(c);
    }
    Ok(acc)
}

/// Parameters of the relative modulated energy.
#[derive(Debug, Clone, Copy)]
pub struct ModulatedParams {
    pub lambda: f64,
    /// Subcharacteristic bound for the states under consideration.
    pub gamma: f64,
    pub mu: f64,
    pub eps: f64,
}

impl ModulatedParams {
    pub fn new(lambda: f64, gamma: f64, mu: f64, eps: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 1.0) {
            return Err(CoreError::ThresholdViolation(format!(
                "lambda must exceed 1, got {lambda}"
            )));
        }
        if !(gamma.is_finite() && gamma > 0.0 && mu.is_finite() && mu > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "gamma and mu must be positive, got gamma = {gamma}, mu = {mu}"
            )));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "eps must be positive, got {eps}"
            )));
        }
        for (bound, name) in [
            (mu / gamma, "eps < mu/Gamma"),
            (mu / (gamma * gamma), "eps < mu/Gamma^2"),
            (1.0, "eps < 1"),
        ] {
            if eps >= bound {
                return Err(CoreError::ThresholdViolation(format!(
                    "{name} violated: eps = {eps}, bound = {bound}"
                )));
            }
        }
        Ok(Self {
            lambda,
            gamma,
            mu,
            eps,
        })
    }
}

/// Pointwise modulated energy, its integral, and the associated flux.
#[derive(Debug, Clone)]
pub struct ModulatedEnergy {
    pub integral: f64,
    pub density: ScalarField,
    /// One flux component per direction.
    pub flux: Vec<ScalarField>,
}

/// Relative modulated energy density
/// `1/2 (|v|^2 + |F|^2) + eps v . dv/dt + 1/2 eps^2 lambda |dv/dt|^2
///  + 1/2 eps lambda mu |grad v|^2 + eps lambda (partial_a v_i) dT_{i,a}`
/// and flux
/// `Q_a = v_i dT_{i,a} + mu v_i partial_a v_i
///  + eps lambda mu (dv_i/dt) partial_a v_i + eps lambda (dv_i/dt) dT_{i,a}`
/// where `dT = T(F-bar) - T(F-hat)` is supplied by the caller.
pub fn modulated_energy(
    w: &DiffState,
    params: &ModulatedParams,
    stress_diff: &MatrixField,
) -> Result<ModulatedEnergy> {
    same_grid(w.grid(), stress_diff.grid())?;
    let dt_v = w.dt_v.as_ref().ok_or_else(|| {
        CoreError::InvalidInput(
            "modulated energy needs the cached velocity rate; use from_solutions".into(),
        )
    })?;
    let grid = w.grid();
    let d = grid.dim();
    let (eps, lambda, mu) = (params.eps, params.lambda, params.mu);
    let grad_v = velocity_gradient(&w.v)?;

    let mut density = ScalarField::zeros(grid);
    {
        let dv = density.values_mut();
        for i in 0..d {
            let vi = w.v.comp(i).values();
            let ti = dt_v.comp(i).values();
            for ((o, a), b) in dv.iter_mut().zip(vi).zip(ti) {
                *o += 0.5 * a * a + eps * a * b + 0.5 * eps * eps * lambda * b * b;
            }
        }
        for c in w.f.components() {
            for (o, a) in dv.iter_mut().zip(c.values()) {
                *o += 0.5 * a * a;
            }
        }
        for (gc, tc) in grad_v.components().iter().zip(stress_diff.components()) {
            for ((o, g), t) in dv.iter_mut().zip(gc.values()).zip(tc.values()) {
                *o += 0.5 * eps * lambda * mu * g * g + eps * lambda * g * t;
            }
        }
    }

    let mut flux = Vec::with_capacity(d);
    for alpha in 0..d {
        let mut q = ScalarField::zeros(grid);
        let qv = q.values_mut();
        for i in 0..d {
            let vi = w.v.comp(i).values();
            let dtv = dt_v.comp(i).values();
            let dvia = grad_v.comp(i, alpha).values();
            let dti = stress_diff.comp(i, alpha).values();
            for ((((o, a), b), g), t) in qv.iter_mut().zip(vi).zip(dtv).zip(dvia).zip(dti) {
                *o += a * t + mu * a * g + eps * lambda * mu * b * g + eps * lambda * b * t;
            }
        }
        flux.push(q);
    }

    let one = ScalarField::constant(grid, 1.0);
    let integral = inner_product(&density, &one)?;
    Ok(ModulatedEnergy {
        integral,
        density,
        flux,
    })
}

/// Time series of the energies, the modulated identity residual, and the
/// measured coercivity/Gronwall constants.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    pub e_eps: Vec<f64>,
    pub e_sobolev: Vec<f64>,
    pub phi: Vec<f64>,
    pub h_rm: Vec<f64>,
    /// Space-time `L^1` norm of the pointwise identity defect.
    pub identity_residual_l1: f64,
    /// Dissipation-block coercivity: worst ratio of the dissipation integral
    /// to `||grad(v-bar - v-hat)||^2`.
    pub c1: f64,
    /// Upper comparison constant in `C3 phi <= integral(H_rm) <= C2 phi`.
    pub c2: f64,
    /// Lower comparison constant.
    pub c3: f64,
    /// Gronwall constants in `|integral R| <= eps^2 K1 + K2 integral(H_rm)`.
    pub k1: f64,
    pub k2: f64,
}

fn check_matched(
    relax: &Trajectory,
    equil: &EquilTrajectory,
    params: &ModulatedParams,
) -> Result<()> {
    same_grid(relax.config.grid, equil.config.grid)?;
    if relax.times.len() != equil.times.len() {
        return Err(CoreError::GridMismatch(format!(
            "trajectories store {} vs {} samples",
            relax.times.len(),
            equil.times.len()
        )));
    }
    for (a, b) in relax.times.iter().zip(&equil.times) {
        if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
            return Err(CoreError::GridMismatch(format!(
                "sample times differ: {a} vs {b}"
            )));
        }
    }
    if (relax.config.mu - equil.config.mu).abs() > 1e-12 * relax.config.mu.abs() {
        return Err(CoreError::GridMismatch(
            "trajectories use different viscosities".into(),
        ));
    }
    if relax.config.model != equil.config.model {
        return Err(CoreError::GridMismatch(
            "trajectories use different stress models".into(),
        ));
    }
    if (params.eps - relax.config.eps).abs() > 1e-12 * relax.config.eps {
        return Err(CoreError::InvalidInput(format!(
            "params.eps = {} does not match the relaxation run eps = {}",
            params.eps, relax.config.eps
        )));
    }
    if (params.mu - relax.config.mu).abs() > 1e-12 * relax.config.mu {
        return Err(CoreError::InvalidInput(format!(
            "params.mu = {} does not match the run mu = {}",
            params.mu, relax.config.mu
        )));
    }
    if relax.times.len() < 3 {
        return Err(CoreError::InvalidInput(
            "modulated residual needs at least three matched samples".into(),
        ));
    }
    Ok(())
}

/// Assemble every term of the modulated-energy identity
/// `dH/dt - div Q + dissipation + eps (lambda - 1)|dv/dt|^2 = R`
/// at the matched sample times, with `dH/dt` by central differences of the
/// stored density and everything else by spectral/chain-rule evaluation.
/// Returns the per-time energy series, the space-time `L^1` defect, and the
/// measured constants.
pub fn modulated_residual(
    relax: &Trajectory,
    equil: &EquilTrajectory,
    params: &ModulatedParams,
) -> Result<EnergyReport> {
    check_matched(relax, equil, params)?;
    let grid = relax.config.grid;
    let d = grid.dim();
    let model = relax.config.model;
    let (eps, lambda, mu) = (params.eps, params.lambda, params.mu);
    let n_samples = relax.times.len();
    let one = ScalarField::constant(grid, 1.0);

    let mut e_eps = Vec::with_capacity(n_samples);
    let mut e_sob = Vec::with_capacity(n_samples);
    let mut phi = Vec::with_capacity(n_samples);
    let mut h_rm = Vec::with_capacity(n_samples);
    let mut densities = Vec::with_capacity(n_samples);
    // per-sample sum of the time-independent identity terms, signed as on
    // the left-hand side
    let mut fixed_terms = Vec::with_capacity(n_samples);
    let mut diss_ratio_min = f64::INFINITY;
    let mut r_integrals = Vec::with_capacity(n_samples);

    for j in 0..n_samples {
        let wj = &relax.states[j];
        let ej = &equil.states[j];
        let diff = DiffState::from_solutions(wj, ej, &model, mu)?;
        let dt_v = diff.dt_v.clone().expect("from_solutions caches the rate");

        let t_bar = model.eval_field(&wj.f);
        let t_hat = model.eval_field(&ej.f);
        let stress_diff = t_bar.checked_sub(&t_hat)?;

        let modulated = modulated_energy(&diff, params, &stress_diff)?;
        e_eps.push(quadratic_energy(&diff, eps, mu)?);
        e_sob.push(sobolev_energy(&diff, eps, mu)?);
        phi.push(phi_eps(&diff, eps)?);
        h_rm.push(modulated.integral);

        let grad_v = velocity_gradient(&diff.v)?;

        // dissipation block
        // mu |grad v|^2 - eps lambda (partial_a v_i)(grad T(F-bar)[grad v])_{i,a}
        let jac_grad = model.jacobian_apply_field(&wj.f, &grad_v);
        let mut diss = ScalarField::zeros(grid);
        {
            let dv = diss.values_mut();
            for (gc, jc) in grad_v.components().iter().zip(jac_grad.components()) {
                for ((o, g), jv) in dv.iter_mut().zip(gc.values()).zip(jc.values()) {
                    *o += mu * g * g - eps * lambda * g * jv;
                }
            }
        }
        let diss_int = inner_product(&diss, &one)?;
        let mut grad_sq = 0.0;
        for c in grad_v.components() {
            grad_sq += l2_norm_sq(c);
        }
        if grad_sq > 1e-30 {
            diss_ratio_min = diss_ratio_min.min(diss_int / grad_sq);
        }

        // relaxation damping eps (lambda - 1) |dv/dt|^2
        let mut damp = ScalarField::zeros(grid);
        {
            let dv = damp.values_mut();
            for c in dt_v.components() {
                for (o, b) in dv.iter_mut().zip(c.values()) {
                    *o += eps * (lambda - 1.0) * b * b;
                }
            }
        }

        // error terms R: transport mismatch, the two acceleration couplings,
        // and the Jacobian-difference term against dF-hat/dt = grad v-hat
        let d2v_hat = equilibrium::velocity_second_derivative_with(ej, &model, mu)?;
        let dt_f_hat = velocity_gradient(&ej.v)?;
        let jac_diff_rate = {
            let on_bar = model.jacobian_apply_field(&wj.f, &dt_f_hat);
            let on_hat = model.jacobian_apply_field(&ej.f, &dt_f_hat);
            on_bar.checked_sub(&on_hat)?
        };
        let mut r_field = ScalarField::zeros(grid);
        {
            let rv = r_field.values_mut();
            for i in 0..d {
                for alpha in 0..d {
                    let g = grad_v.comp(i, alpha).values();
                    let fd = diff.f.comp(i, alpha).values();
                    let td = stress_diff.comp(i, alpha).values();
                    let jr = jac_diff_rate.comp(i, alpha).values();
                    for ((((o, gv), fv), tv), jv) in rv.iter_mut().zip(g).zip(fd).zip(td).zip(jr) {
                        *o += gv * (fv - tv) + eps * lambda * gv * jv;
                    }
                }
                let a2 = d2v_hat.comp(i).values();
                let vd = diff.v.comp(i).values();
                let bd = dt_v.comp(i).values();
                for (((o, a), v), b) in rv.iter_mut().zip(a2).zip(vd).zip(bd) {
                    *o += -eps * a * v - eps * eps * lambda * a * b;
                }
            }
        }
        r_integrals.push(inner_product(&r_field, &one)?);

        let mut div_q = ScalarField::zeros(grid);
        for (alpha, q) in modulated.flux.iter().enumerate() {
            div_q.axpy(1.0, &derivative(q, alpha)?);
        }

        let mut fixed = diss;
        fixed.axpy(1.0, &damp);
        fixed.axpy(-1.0, &div_q);
        fixed.axpy(-1.0, &r_field);
        fixed_terms.push(fixed);
        densities.push(modulated.density);
    }

    // close the identity with central differences of the stored density
    let dt_s = relax.times[1] - relax.times[0];
    let mut residual_l1 = 0.0;
    for j in 1..n_samples - 1 {
        let mut defect = densities[j + 1].clone();
        defect.axpy(-1.0, &densities[j - 1]);
        defect.scale(1.0 / (2.0 * dt_s));
        defect.axpy(1.0, &fixed_terms[j]);
        let mut abs_int = 0.0;
        for v in defect.values() {
            abs_int += v.abs();
        }
        residual_l1 += abs_int * grid.cell_volume() * dt_s;
    }

    let mut c2 = f64::NEG_INFINITY;
    let mut c3 = f64::INFINITY;
    for (h, p) in h_rm.iter().zip(&phi) {
        if *p > 1e-30 {
            c2 = c2.max(h / p);
            c3 = c3.min(h / p);
        }
    }
    let mut k1 = 0.0f64;
    let mut k2 = 0.0f64;
    for (r, h) in r_integrals.iter().zip(&h_rm) {
        if *h <= eps * eps {
            k1 = k1.max(r.abs() / (eps * eps));
        } else {
            k2 = k2.max(r.abs() / h);
        }
    }

    Ok(EnergyReport {
        times: relax.times.clone(),
        e_eps,
        e_sobolev: e_sob,
        phi,
        h_rm,
        identity_residual_l1: residual_l1,
        c1: diss_ratio_min,
        c2,
        c3,
        k1,
        k2,
    })
}

/// Fading-memory representation of the relaxed stress:
/// `S(t) = (mu/eps) F(t)
///         - integral_{-inf}^t (1/eps) exp(-(t-tau)/eps)
///           ((mu/eps) F - T(F))(tau) dtau`,
/// with the history before time zero extended as the constant initial datum
/// (tail integrated in closed form) and the stored part integrated by the
/// product trapezoidal rule, exact for the exponential kernel against
/// piecewise-linear data.
pub fn memory_stress(
    times: &[f64],
    f_history: &[MatrixField],
    eps: f64,
    mu: f64,
    model: &StressModel,
    t: f64,
) -> Result<MatrixField> {
    if times.len() != f_history.len() || times.is_empty() {
        return Err(CoreError::InvalidInput(format!(
            "history needs matching nonempty times/fields, got {} times and {} fields",
            times.len(),
            f_history.len()
        )));
    }
    if !(eps.is_finite() && eps > 0.0 && mu.is_finite() && mu > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "eps and mu must be positive, got eps = {eps}, mu = {mu}"
        )));
    }
    if times[0].abs() > 1e-12 {
        return Err(CoreError::InvalidInput(format!(
            "history must start at time zero, got {}",
            times[0]
        )));
    }
    let t_last = *times.last().unwrap();
    let idx = times
        .iter()
        .position(|&tj| (tj - t).abs() <= 1e-9 * t.abs().max(1.0))
        .ok_or(CoreError::OutsideHistory {
            t,
            t0: times[0],
            t1: t_last,
        })?;

    let ratio = mu / eps;
    // G = (mu/eps) F - T(F)
    let g_at = |j: usize| -> MatrixField {
        let mut g = f_history[j].clone();
        g.scale(ratio);
        g.axpy(-1.0, &model.eval_field(&f_history[j]));
        g
    };

    // tail over (-inf, 0] against the constant extension
    let mut integral = g_at(0);
    integral.scale((-t / eps).exp());

    // product trapezoid: E_b G_b - E_a G_a - (eps/h)(E_b - E_a)(G_b - G_a)
    // per interval, E_x = exp(-(t - tau_x)/eps)
    let mut g_prev = g_at(0);
    for j in 0..idx {
        let (ta, tb) = (times[j], times[j + 1]);
        let h = tb - ta;
        let g_next = g_at(j + 1);
        let ea = (-(t - ta) / eps).exp();
        let eb = (-(t - tb) / eps).exp();
        let mut piece = g_next.clone();
        piece.scale(eb);
        piece.axpy(-ea, &g_prev);
        let mut slope = g_next.clone();
        slope.axpy(-1.0, &g_prev);
        slope.scale(-(eps / h) * (eb - ea));
        piece.axpy(1.0, &slope);
        integral.axpy(1.0, &piece);
        g_prev = g_next;
    }

    let mut s = f_history[idx].clone();
    s.scale(ratio);
    s.axpy(-1.0, &integral);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid1() -> PeriodicGrid {
        PeriodicGrid::standard(1, 32).unwrap()
    }

    fn zero_diff(grid: PeriodicGrid) -> DiffState {
        DiffState {
            f: MatrixField::zeros(grid),
            v: VectorField::zeros(grid),
            s: MatrixField::zeros(grid),
            dt_v: Some(VectorField::zeros(grid)),
        }
    }

    fn random_diff(grid: PeriodicGrid, rng: &mut ChaCha8Rng, with_rate: bool) -> DiffState {
        let d = grid.dim();
        let band = |rng: &mut ChaCha8Rng| {
            let modes: Vec<(f64, f64, f64)> = (1..=4)
                .map(|k| {
                    (
                        k as f64,
                        rng.gen_range(-0.5..0.5) / k as f64,
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            let offset = rng.gen_range(-0.2..0.2);
            ScalarField::from_fn(grid, |x| {
                offset
                    + modes
                        .iter()
                        .map(|(k, a, p)| a * (k * x[0] + p).sin())
                        .sum::<f64>()
            })
        };
        let f = MatrixField::from_components(d, (0..d * d).map(|_| band(rng)).collect()).unwrap();
        let v = VectorField::from_components((0..d).map(|_| band(rng)).collect()).unwrap();
        let s = MatrixField::from_components(d, (0..d * d).map(|_| band(rng)).collect()).unwrap();
        let dt_v = with_rate
            .then(|| VectorField::from_components((0..d).map(|_| band(rng)).collect()).unwrap());
        DiffState { f, v, s, dt_v }
    }

    #[test]
    fn quadratic_energy_closed_forms() {
        let grid = grid1();
        assert_eq!(quadratic_energy(&zero_diff(grid), 0.1, 1.0).unwrap(), 0.0);

        // F = 1, v = S = 0, eps = 0.1, mu = 1 -> 10 * 2 pi
        let mut w = zero_diff(grid);
        *w.f.comp_mut(0, 0) = ScalarField::constant(grid, 1.0);
        let e = quadratic_energy(&w, 0.1, 1.0).unwrap();
        assert!((e - 20.0 * std::f64::consts::PI).abs() <= 1e-10);

        // F = 1, S = 1, v = 0, eps = 0.2 -> (5 - 2 + 1) * 2 pi
        *w.s.comp_mut(0, 0) = ScalarField::constant(grid, 1.0);
        let e = quadratic_energy(&w, 0.2, 1.0).unwrap();
        assert!((e - 8.0 * std::f64::consts::PI).abs() <= 1e-10);
    }

    #[test]
    fn quadratic_energy_requires_small_eps() {
        let grid = grid1();
        match quadratic_energy(&zero_diff(grid), 0.25, 1.0) {
            Err(CoreError::PositivityThreshold { eps, limit }) => {
                assert_eq!(eps, 0.25);
                assert_eq!(limit, 0.25);
            }
            other => panic!("expected positivity-threshold error, got {other:?}"),
        }
    }

    #[test]
    fn quadratic_energy_dominates_plain_norms() {
        // E >= 1/2 integral((mu/eps)(|F|^2 + |v|^2) + |S|^2) at eps = mu/5
        let grid = grid1();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (eps, mu) = (0.2, 1.0);
        for _ in 0..50 {
            let w = random_diff(grid, &mut rng, false);
            let e = quadratic_energy(&w, eps, mu).unwrap();
            let mut bound = 0.0;
            for c in w.f.components() {
                bound += (mu / eps) * l2_norm_sq(c);
            }
            for c in w.v.components() {
                bound += (mu / eps) * l2_norm_sq(c);
            }
            for c in w.s.components() {
                bound += l2_norm_sq(c);
            }
            assert!(e - 0.5 * bound >= -1e-12, "slack = {}", e - 0.5 * bound);
        }
    }

    #[test]
    fn sobolev_energy_cosine_closed_form() {
        // F = cos x: every derivative has squared L2 norm pi, so the four
        // orders sum to 4 pi after the eps weight cancels mu/eps
        let grid = grid1();
        let mut w = zero_diff(grid);
        *w.f.comp_mut(0, 0) = ScalarField::from_fn(grid, |x| x[0].cos());
        for eps in [0.1, 0.01] {
            let e = sobolev_energy(&w, eps, 1.0).unwrap();
            let expect = 4.0 * std::f64::consts::PI;
            assert!((e - expect).abs() <= 1e-10, "eps = {eps}: {e}");
        }
    }

    #[test]
    fn sobolev_energy_order_zero_is_scaled_quadratic() {
        let grid = grid1();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let w = random_diff(grid, &mut rng, false);
        let (eps, mu) = (0.05, 1.0);
        let a = sobolev_energy_order(&w, eps, mu, 0).unwrap();
        let b = eps * quadratic_energy(&w, eps, mu).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sobolev_energy_two_sided_h3_comparison() {
        let grid = grid1();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (eps, mu) = (0.05, 1.0);
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for _ in 0..100 {
            let w = random_diff(grid, &mut rng, false);
            let e = sobolev_energy(&w, eps, mu).unwrap();
            // squared H^3 norm of (F, v, sqrt(eps) S)
            let mut h3 = 0.0;
            for gamma in MultiIndex::enumerate(1, 3) {
                let dw = w.apply_multi_derivative(&gamma).unwrap();
                for c in dw.f.components() {
                    h3 += l2_norm_sq(c);
                }
                for c in dw.v.components() {
                    h3 += l2_norm_sq(c);
                }
                for c in dw.s.components() {
                    h3 += eps * l2_norm_sq(c);
                }
            }
            let ratio = e / h3;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        println!("measured ratio range: [{lo:.3}, {hi:.3}]");
        assert!(lo >= 0.5 - 1e-12, "lower comparison fails: {lo}");
        assert!(
            hi <= 2.0 * (mu / eps + 1.0) + 1e-9,
            "upper comparison fails: {hi}"
        );
    }

    #[test]
    fn phi_closed_form_and_scaling() {
        let grid = grid1();
        let eps = 0.05;
        let mut w = zero_diff(grid);
        *w.v.comp_mut(0) = ScalarField::from_fn(grid, |x| x[0].sin());
        let p = phi_eps(&w, eps).unwrap();
        let expect = std::f64::consts::PI * (1.0 + eps);
        assert!((p - expect).abs() <= 1e-10, "phi = {p}");

        let mut w2 = w.clone();
        w2.f.scale(3.0);
        w2.v.scale(3.0);
        w2.s.scale(3.0);
        if let Some(r) = w2.dt_v.as_mut() {
            r.scale(3.0);
        }
        let p2 = phi_eps(&w2, eps).unwrap();
        assert!((p2 - 9.0 * p).abs() <= 1e-10 * p2.max(1.0));
    }

    #[test]
    fn phi_requires_cached_rate() {
        let grid = grid1();
        let mut w = zero_diff(grid);
        w.dt_v = None;
        assert!(phi_eps(&w, 0.05).is_err());
    }

    #[test]
    fn modulated_params_thresholds() {
        assert!(ModulatedParams::new(2.0, 1.0, 1.0, 0.01).is_ok());
        assert!(ModulatedParams::new(1.0, 1.0, 1.0, 0.01).is_err());
        // eps >= mu/Gamma^2
        let err = ModulatedParams::new(2.0, 4.0, 1.0, 0.1).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("mu/Gamma"), "message: {msg}");
        // eps >= 1
        assert!(ModulatedParams::new(2.0, 0.1, 100.0, 1.0).is_err());
    }

    #[test]
    fn modulated_energy_zero_difference() {
        let grid = grid1();
        let params = ModulatedParams::new(2.0, 1.0, 1.0, 0.01).unwrap();
        let w = zero_diff(grid);
        let m = modulated_energy(&w, &params, &MatrixField::zeros(grid)).unwrap();
        assert_eq!(m.integral, 0.0);
        assert_eq!(m.density.linf_norm(), 0.0);
        for q in &m.flux {
            assert_eq!(q.linf_norm(), 0.0);
        }
    }

    #[test]
    fn modulated_energy_coercivity_measured() {
        // C3 phi <= integral(H_rm) <= C2 phi on random differences with the
        // stress difference induced by a linear law (Gamma = 1)
        let grid = grid1();
        let model = StressModel::linear(1.0).unwrap();
        let params = ModulatedParams::new(2.0, 1.0, 1.0, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut c2 = f64::NEG_INFINITY;
        let mut c3 = f64::INFINITY;
        for _ in 0..100 {
            let w = random_diff(grid, &mut rng, true);
            let mut sd = w.f.clone();
            sd.scale(model.kappa());
            let m = modulated_energy(&w, &params, &sd).unwrap();
            let p = phi_eps(&w, params.eps).unwrap();
            c2 = c2.max(m.integral / p);
            c3 = c3.min(m.integral / p);
        }
        println!("measured C2 = {c2:.4}, C3 = {c3:.4}");
        assert!(c3 > 0.0, "C3 = {c3}");
        assert!(c2.is_finite() && c2 > c3);
    }

    #[test]
    fn modulated_coercivity_margin_shrinks_as_lambda_drops() {
        let grid = grid1();
        let model = StressModel::linear(1.0).unwrap();
        let mu = 1.0;
        let gamma = 1.0;
        // eps close to the threshold min(mu/Gamma, mu/Gamma^2, 1) = 1
        let eps = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let diffs: Vec<DiffState> = (0..60).map(|_| random_diff(grid, &mut rng, true)).collect();
        let mut last = f64::INFINITY;
        for lambda in [2.0, 1.5, 1.2, 1.05] {
            let params = ModulatedParams::new(lambda, gamma, mu, eps).unwrap();
            let mut c3 = f64::INFINITY;
            for w in &diffs {
                let mut sd = w.f.clone();
                sd.scale(model.kappa());
                let m = modulated_energy(w, &params, &sd).unwrap();
                let p = phi_eps(w, eps).unwrap();
                c3 = c3.min(m.integral / p);
            }
            println!("lambda = {lambda}: measured C3 = {c3:.4}");
            assert!(c3 <= last + 1e-12, "C3 should not grow as lambda drops");
            last = c3;
        }
    }

    #[test]
    fn memory_stress_constant_history_is_exact() {
        let grid = grid1();
        let model = StressModel::cubic(1.0, 0.1).unwrap();
        let (eps, mu) = (0.1, 1.0);
        let mut f0 = MatrixField::zeros(grid);
        *f0.comp_mut(0, 0) = ScalarField::from_fn(grid, |x| 0.3 + 0.1 * x[0].cos());
        let times: Vec<f64> = (0..=40).map(|j| j as f64 * 0.01).collect();
        let history: Vec<MatrixField> = times.iter().map(|_| f0.clone()).collect();
        let s = memory_stress(&times, &history, eps, mu, &model, 0.4).unwrap();
        let expect = model.eval_field(&f0);
        let err = s.checked_sub(&expect).unwrap().linf_norm();
        assert!(err <= 1e-14, "err = {err:e}");
    }

    #[test]
    fn memory_stress_rejects_out_of_history_times() {
        let grid = grid1();
        let model = StressModel::linear(1.0).unwrap();
        let f0 = MatrixField::zeros(grid);
        let times = vec![0.0, 0.1, 0.2];
        let history = vec![f0.clone(), f0.clone(), f0];
        match memory_stress(&times, &history, 0.1, 1.0, &model, 0.3) {
            Err(CoreError::OutsideHistory { .. }) => {}
            other => panic!("expected out-of-history error, got {other:?}"),
        }
        // off-grid interior times are also refused
        assert!(memory_stress(&times, &history, 0.1, 1.0, &model, 0.15).is_err());
    }
}
