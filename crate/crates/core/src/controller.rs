//! Online exponential barrier controller.
//!
//! The voltage limits enter the cost as exponential penalties
//! `(alpha_i / beta_i) exp(beta_i (b_i^T u + e_i - x_bar_i))`, and the update
//! uses the measured voltage instead of the model prediction:
//!
//! ```text
//! F(u) = Q u + alpha_i exp(beta_i (x_i - x_bar_i)) b_hat_i
//! u(k+1) = clamp(u(k) - eta F(u(k)), u_lo, u_hi)
//! ```
//!
//! Only one bus (the attention bus, largest margin `x_j - x_bar_j`) carries a
//! nonzero weight. Its weight is the multiplier of a single-constraint KKT
//! system built from the estimated model, inflated by a safety factor that
//! covers the model error `eps_b`. Weights, the attention bus and the step
//! size are recomputed whenever an action enters or leaves a bound, or the
//! attention bus moves.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{norm2, solve_linear, Matrix};
use crate::plant::{InverterLimits, Plant};
use crate::trajectory::{argmax_margin, Events, Status, Trajectory};

/// Cap on `beta (x - x_bar)` before exponentiation.
pub const EXPONENT_CAP: f64 = 30.0;

pub const DEFAULT_BETA: f64 = 200.0;
pub const DEFAULT_KAPPA: f64 = 0.6;

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierConfig {
    /// Barrier curvature per bus.
    pub beta: Vec<f64>,
    /// Fraction of available solar kept by the initial action.
    pub kappa: f64,
    /// Diagonal of the cost matrix, active block then reactive block.
    pub q_diag: Vec<f64>,
    /// Upper voltage deviation limit per bus.
    pub x_bar: Vec<f64>,
    pub max_iters: usize,
    pub eta_override: Option<f64>,
    /// Stop once `max |u(k+1) - u(k)|` falls below this.
    pub tolerance: f64,
}

impl BarrierConfig {
    /// Cost `sum c_p (u^p_i)^2 + c_q (u^q_i)^2`, i.e. `Q = diag(2 c_p, 2 c_q)`.
    pub fn new(n: usize, c_p: f64, c_q: f64, x_bar: f64) -> Self {
        BarrierConfig {
            beta: vec![DEFAULT_BETA; n],
            kappa: DEFAULT_KAPPA,
            q_diag: [vec![2.0 * c_p; n], vec![2.0 * c_q; n]].concat(),
            x_bar: vec![x_bar; n],
            max_iters: 5000,
            eta_override: None,
            tolerance: 1e-8,
        }
    }

    pub fn n(&self) -> usize {
        self.x_bar.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.beta.len() != n || self.q_diag.len() != 2 * n {
            return Err(Error::DimensionMismatch(format!(
                "config for {n} buses has {} curvatures and {} cost entries",
                self.beta.len(),
                self.q_diag.len()
            )));
        }
        if self.beta.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::DimensionMismatch("barrier curvatures must be positive".into()));
        }
        if self.q_diag.iter().any(|&q| !(q > 0.0)) {
            return Err(Error::DimensionMismatch("cost diagonal must be positive".into()));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::DimensionMismatch(format!("kappa {} outside (0, 1]", self.kappa)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerState {
    pub u: Vec<f64>,
    /// Attention bus index (0-based).
    pub attention: usize,
    /// Actions strictly inside their bounds.
    pub unsaturated: Vec<usize>,
    /// Barrier weights; nonzero only at the attention bus.
    pub alpha_s: Vec<f64>,
    pub alpha_hat: f64,
    pub gamma_s: f64,
    pub eta: f64,
    pub lipschitz: f64,
    pub sigma: f64,
    pub e_hat: Vec<f64>,
    pub step_count: usize,
    pub weights_computed: usize,
}

impl ControllerState {
    pub fn weight(&self) -> f64 {
        self.alpha_s[self.attention]
    }
}

/// Initial safe action `[(kappa - 1) p_av, 0]`, clamped into the box.
///
/// Fails with `NotActivated` unless some bus meets or exceeds its limit.
pub fn initialize(
    config: &BarrierConfig,
    limits: &InverterLimits,
    p_av: &[f64],
    x_observed: &[f64],
) -> Result<ControllerState> {
    config.validate()?;
    let n = config.n();
    if p_av.len() != n || x_observed.len() != n || limits.dim() != 2 * n {
        return Err(Error::DimensionMismatch(format!(
            "{n} buses but p_av has {}, x has {}, limits have {}",
            p_av.len(),
            x_observed.len(),
            limits.dim()
        )));
    }
    let attention = argmax_margin(x_observed, &config.x_bar);
    let margin = x_observed[attention] - config.x_bar[attention];
    if margin < 0.0 {
        return Err(Error::NotActivated { margin });
    }
    let mut u = vec![0.0; 2 * n];
    for (uj, p) in u.iter_mut().zip(p_av) {
        *uj = (config.kappa - 1.0) * p;
    }
    limits.clamp(&mut u);
    Ok(ControllerState {
        unsaturated: limits.unsaturated(&u),
        u,
        attention,
        alpha_s: vec![0.0; n],
        alpha_hat: 0.0,
        gamma_s: 0.0,
        eta: 0.0,
        lipschitz: 0.0,
        sigma: 1.0,
        e_hat: vec![0.0; n],
        step_count: 0,
        weights_computed: 0,
    })
}

/// `e_hat = x - B_hat u`.
pub fn estimate_drop(b_hat: &Matrix, x_observed: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let bu = b_hat.matvec(u)?;
    if bu.len() != x_observed.len() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} rows, measurement has {}",
            bu.len(),
            x_observed.len()
        )));
    }
    Ok(x_observed.iter().zip(&bu).map(|(x, b)| x - b).collect())
}

/// Solves `[[Q, B^T], [B, 0]] [u; alpha] = [0; rhs]`.
pub fn compute_alpha_kkt(q: &Matrix, b_rows: &Matrix, rhs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let dim = q.rows();
    let m = b_rows.rows();
    if !q.is_square() || b_rows.cols() != dim || rhs.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "KKT with Q {}x{}, rows {}x{}, rhs {}",
            q.rows(),
            q.cols(),
            m,
            b_rows.cols(),
            rhs.len()
        )));
    }
    let mut kkt = Matrix::zeros(dim + m, dim + m);
    for i in 0..dim {
        kkt.row_mut(i)[..dim].copy_from_slice(q.row(i));
    }
    for a in 0..m {
        for j in 0..dim {
            let v = b_rows[(a, j)];
            kkt[(dim + a, j)] = v;
            kkt[(j, dim + a)] = v;
        }
    }
    let mut full_rhs = vec![0.0; dim + m];
    full_rhs[dim..].copy_from_slice(rhs);
    let sol = solve_linear(&kkt, &full_rhs).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::SingularKKT,
        other => other,
    })?;
    Ok((sol[..dim].to_vec(), sol[dim..].to_vec()))
}

/// Raw weight `alpha_hat` for `attention` over the free actions `free`.
///
/// Actions outside `free` stay at their current value, which moves their
/// contribution `b_hat_ij u_j` into the constant drop. Returns the weight and
/// the full candidate action.
pub fn compute_alpha_hat(
    q_diag: &[f64],
    b_hat: &Matrix,
    x_bar: &[f64],
    attention: usize,
    free: &[usize],
    e_hat: &[f64],
    u: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if free.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    let row = b_hat.row(attention);
    let in_free = membership(free, u.len());
    let e_sat = e_hat[attention]
        + (0..u.len()).filter(|&j| !in_free[j]).map(|j| row[j] * u[j]).sum::<f64>();
    let q_sub = Matrix::from_diag(&free.iter().map(|&j| q_diag[j]).collect::<Vec<_>>());
    let b_sub = Matrix::from_vec(1, free.len(), free.iter().map(|&j| row[j]).collect())?;
    let (u_sub, alpha) = compute_alpha_kkt(&q_sub, &b_sub, &[x_bar[attention] - e_sat])?;
    let mut candidate = u.to_vec();
    for (&j, v) in free.iter().zip(u_sub) {
        candidate[j] = v;
    }
    Ok((alpha[0], candidate))
}

/// Safety inflation
/// `eps_b / |b^T Q^-1 b| * (||u_lo|| + ||Q^-1 b|| |alpha_hat|)`
/// over the free actions.
pub fn compute_gamma_s(eps_b: f64, q_diag: &[f64], b_hat: &[f64], u_lo: &[f64], alpha_hat: f64) -> Result<f64> {
    let q_inv_b: Vec<f64> = b_hat.iter().zip(q_diag).map(|(b, q)| b / q).collect();
    let curvature: f64 = b_hat.iter().zip(&q_inv_b).map(|(b, v)| b * v).sum();
    if curvature == 0.0 {
        return Err(Error::DegenerateConstraint);
    }
    Ok(eps_b / curvature.abs() * (norm2(u_lo) + norm2(&q_inv_b) * alpha_hat.abs()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSize {
    pub eta: f64,
    /// `L_s = lambda_max(Q) + sigma alpha beta ||b_hat|| (||b_hat|| + eps_b)`
    pub lipschitz: f64,
}

pub fn compute_step_size(
    q_diag: &[f64],
    alpha_s: f64,
    beta: f64,
    b_hat_row: &[f64],
    eps_b: f64,
    sigma: f64,
    eta_override: Option<f64>,
) -> StepSize {
    let lambda_max = q_diag.iter().cloned().fold(0.0, f64::max);
    let nb = norm2(b_hat_row);
    let lipschitz = lambda_max + sigma * alpha_s * beta * nb * (nb + eps_b);
    StepSize { eta: eta_override.unwrap_or(1.0 / lipschitz), lipschitz }
}

/// `F = Q u + alpha_i exp(beta_i (x_i - x_bar_i)) b_hat_i` at the attention bus.
pub fn gradient_feedback(state: &ControllerState, config: &BarrierConfig, b_hat: &Matrix, x_measured: &[f64]) -> Vec<f64> {
    let i = state.attention;
    let mut f: Vec<f64> = state.u.iter().zip(&config.q_diag).map(|(u, q)| q * u).collect();
    let alpha = state.alpha_s[i];
    if alpha != 0.0 {
        let expo = (config.beta[i] * (x_measured[i] - config.x_bar[i])).min(EXPONENT_CAP);
        let w = alpha * expo.exp();
        for (fj, b) in f.iter_mut().zip(b_hat.row(i)) {
            *fj += w * b;
        }
    }
    f
}

/// `clamp(u - eta F, u_lo, u_hi)`.
pub fn project_step(u: &[f64], eta: f64, f: &[f64], limits: &InverterLimits) -> Vec<f64> {
    let mut next: Vec<f64> = u.iter().zip(f).map(|(u, f)| u - eta * f).collect();
    limits.clamp(&mut next);
    next
}

/// One barrier update against a fresh measurement of the current action.
pub fn step(
    state: &ControllerState,
    config: &BarrierConfig,
    limits: &InverterLimits,
    b_hat: &Matrix,
    x_measured: &[f64],
) -> ControllerState {
    let f = gradient_feedback(state, config, b_hat, x_measured);
    let mut next = state.clone();
    next.u = project_step(&state.u, state.eta, &f, limits);
    next.step_count += 1;
    next
}

/// Actions the weight computation may move: not pinned, not at the lower bound.
///
/// With a nonnegative weight and nonnegative sensitivities the update pushes
/// every action away from its upper bound, so those stay free.
pub fn weight_set(limits: &InverterLimits, u: &[f64]) -> Vec<usize> {
    (0..limits.dim()).filter(|&j| limits.u_lo[j] < limits.u_hi[j] && u[j] > limits.u_lo[j]).collect()
}

/// Recomputes `e_hat`, `alpha_hat`, `gamma_s`, the weight at the attention
/// bus and the step size from the current measurement.
pub fn compute_weights(
    state: &mut ControllerState,
    config: &BarrierConfig,
    limits: &InverterLimits,
    b_hat: &Matrix,
    x_measured: &[f64],
    eps_b: f64,
) -> Result<()> {
    let i = state.attention;
    let free = weight_set(limits, &state.u);
    state.e_hat = estimate_drop(b_hat, x_measured, &state.u)?;
    let (alpha_hat, _) = match compute_alpha_hat(&config.q_diag, b_hat, &config.x_bar, i, &free, &state.e_hat, &state.u) {
        Ok(r) => r,
        // everything already at full curtailment: keep the current weights
        Err(Error::EmptyActiveSet) => return Ok(()),
        Err(e) => return Err(e),
    };
    let q_free: Vec<f64> = free.iter().map(|&j| config.q_diag[j]).collect();
    let b_free: Vec<f64> = free.iter().map(|&j| b_hat[(i, j)]).collect();
    let lo_free: Vec<f64> = free.iter().map(|&j| limits.u_lo[j]).collect();
    let gamma_s = compute_gamma_s(eps_b, &q_free, &b_free, &lo_free, alpha_hat)?;

    state.alpha_hat = alpha_hat;
    state.gamma_s = gamma_s;
    state.alpha_s.iter_mut().for_each(|a| *a = 0.0);
    state.alpha_s[i] = (alpha_hat + gamma_s).max(0.0);
    state.sigma = x_measured
        .iter()
        .zip(&config.x_bar)
        .zip(&config.beta)
        .map(|((x, xb), b)| (b * (x - xb)).min(EXPONENT_CAP).exp())
        .fold(1.0, f64::max);
    let q_unsat: Vec<f64> = state.unsaturated.iter().map(|&j| config.q_diag[j]).collect();
    let q_for_lambda = if q_unsat.is_empty() { &q_free } else { &q_unsat };
    let size = compute_step_size(
        q_for_lambda,
        state.alpha_s[i],
        config.beta[i],
        b_hat.row(i),
        eps_b,
        state.sigma,
        config.eta_override,
    );
    state.eta = size.eta;
    state.lipschitz = size.lipschitz;
    state.weights_computed += 1;
    Ok(())
}

/// Saturation and attention-switch triggers. Recomputes the weights when
/// either fires and reports which did.
pub fn handle_events(
    state: &mut ControllerState,
    config: &BarrierConfig,
    limits: &InverterLimits,
    b_hat: &Matrix,
    x_measured: &[f64],
    eps_b: f64,
) -> Result<Events> {
    let unsaturated = limits.unsaturated(&state.u);
    let attention = argmax_margin(x_measured, &config.x_bar);
    let events = Events {
        init: false,
        saturation: unsaturated != state.unsaturated,
        switch: attention != state.attention,
    };
    if events.any() {
        state.unsaturated = unsaturated;
        state.attention = attention;
        compute_weights(state, config, limits, b_hat, x_measured, eps_b)?;
    }
    Ok(events)
}

/// `rho = max(|1 - eta m1|, |1 - eta m2|)` over the current unsaturated set.
pub fn contraction_bound(state: &ControllerState, config: &BarrierConfig, b_hat: &Matrix, eps_b: f64) -> f64 {
    let i = state.attention;
    let q: Vec<f64> = state.unsaturated.iter().map(|&j| config.q_diag[j]).collect();
    let m1 = q.iter().cloned().fold(f64::INFINITY, f64::min);
    let nb = norm2(b_hat.row(i));
    let m2 = q.iter().cloned().fold(0.0, f64::max) + state.alpha_s[i] * config.beta[i] * nb * (nb + eps_b);
    (1.0 - state.eta * m1).abs().max((1.0 - state.eta * m2).abs())
}

#[derive(Clone, Debug)]
pub struct BarrierRun {
    pub trajectory: Trajectory,
    pub state: ControllerState,
}

/// Closed loop against `plant` with estimate `b_hat` and error bound `eps_b`.
pub fn run(
    plant: &Plant,
    b_hat: &Matrix,
    eps_b: f64,
    config: &BarrierConfig,
    limits: &InverterLimits,
    p_av: &[f64],
) -> Result<BarrierRun> {
    let start = Instant::now();
    let n = plant.n();
    if b_hat.rows() != n || b_hat.cols() != 2 * n {
        return Err(Error::DimensionMismatch(format!(
            "estimate is {}x{} for {n} buses",
            b_hat.rows(),
            b_hat.cols()
        )));
    }
    let x_uncontrolled = plant.measure(&vec![0.0; 2 * n])?;
    let mut state = initialize(config, limits, p_av, &x_uncontrolled)?;
    let mut x = plant.measure(&state.u)?;
    state.attention = argmax_margin(&x, &config.x_bar);
    compute_weights(&mut state, config, limits, b_hat, &x, eps_b)?;

    let mut traj = Trajectory::new("barrier");
    traj.push(&state.u, &x, &config.x_bar, state.weight(), Events { init: true, ..Default::default() });
    for _ in 0..config.max_iters {
        let next = step(&state, config, limits, b_hat, &x);
        let du = next.u.iter().zip(&state.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        state = next;
        x = plant.measure(&state.u)?;
        let events = handle_events(&mut state, config, limits, b_hat, &x, eps_b)?;
        traj.push(&state.u, &x, &config.x_bar, state.weight(), events);
        if !events.any() && du < config.tolerance {
            traj.status = Status::Converged;
            break;
        }
    }
    traj.wall_time = start.elapsed();
    Ok(BarrierRun { trajectory: traj, state })
}

fn membership(set: &[usize], len: usize) -> Vec<bool> {
    let mut m = vec![false; len];
    for &j in set {
        m[j] = true;
    }
    m
}
