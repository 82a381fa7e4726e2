//! Reference methods: the exact linearly constrained QP and the regularized
//! online primal-dual controller.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{dot, invert, is_spd, norm_inf, Lu, Matrix};
use crate::plant::{InverterLimits, Plant};
use crate::trajectory::{argmax_margin, Events, Status, Trajectory};

pub const MAX_PIVOTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Constraint {
    /// `b_i^T u + e_i <= x_bar_i`
    Voltage(usize),
    Lower(usize),
    Upper(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub u_star: Vec<f64>,
    /// One multiplier per voltage row.
    pub multipliers: Vec<f64>,
    pub lower_multipliers: Vec<f64>,
    pub upper_multipliers: Vec<f64>,
    pub active_set: Vec<Constraint>,
    pub objective: f64,
    pub pivots: usize,
}

/// Minimizes `1/2 u^T Q u` subject to `B u + e <= x_bar` and the inverter box.
///
/// Goldfarb-Idnani dual active-set method: starts from the unconstrained
/// minimum and adds violated constraints, lowest index first. Variables with
/// `u_lo == u_hi` are eliminated before solving.
pub fn solve_lcqp(q: &Matrix, b: &Matrix, e: &[f64], x_bar: &[f64], limits: &InverterLimits) -> Result<QpSolution> {
    let n = b.rows();
    let dim = b.cols();
    if q.rows() != dim || q.cols() != dim || e.len() != n || x_bar.len() != n || limits.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "QP with B {}x{}, Q {}x{}, e {}, x_bar {}, limits {}",
            n,
            dim,
            q.rows(),
            q.cols(),
            e.len(),
            x_bar.len(),
            limits.dim()
        )));
    }
    if !is_spd(q) {
        return Err(Error::DimensionMismatch("cost matrix must be symmetric positive definite".into()));
    }

    let free: Vec<usize> = (0..dim).filter(|&j| limits.u_lo[j] < limits.u_hi[j]).collect();
    let fixed: Vec<usize> = (0..dim).filter(|&j| limits.u_lo[j] >= limits.u_hi[j]).collect();
    let u_fixed: Vec<f64> = fixed.iter().map(|&j| limits.u_lo[j]).collect();
    let d = free.len();

    // constraints n_k^T y >= c_k over the free variables y
    let mut normals: Vec<Vec<f64>> = Vec::with_capacity(n + 2 * d);
    let mut rhs: Vec<f64> = Vec::with_capacity(n + 2 * d);
    let mut labels: Vec<Constraint> = Vec::with_capacity(n + 2 * d);
    for i in 0..n {
        let row = b.row(i);
        normals.push(free.iter().map(|&j| -row[j]).collect());
        let fixed_part: f64 = fixed.iter().zip(&u_fixed).map(|(&j, &v)| row[j] * v).sum();
        rhs.push(e[i] + fixed_part - x_bar[i]);
        labels.push(Constraint::Voltage(i));
    }
    for (k, &j) in free.iter().enumerate() {
        let mut nv = vec![0.0; d];
        nv[k] = 1.0;
        normals.push(nv);
        rhs.push(limits.u_lo[j]);
        labels.push(Constraint::Lower(j));
    }
    for (k, &j) in free.iter().enumerate() {
        let mut nv = vec![0.0; d];
        nv[k] = -1.0;
        normals.push(nv);
        rhs.push(-limits.u_hi[j]);
        labels.push(Constraint::Upper(j));
    }

    let (y, active, mults, pivots) = if d == 0 {
        let infeasible = (0..n).any(|i| rhs[i] > 1e-12 * (1.0 + rhs[i].abs()));
        if infeasible {
            return Err(Error::Infeasible);
        }
        (Vec::new(), Vec::new(), Vec::new(), 0)
    } else {
        let q_ff = q.select(&free, &free);
        let q_fx = q.select(&free, &fixed);
        let linear = q_fx.matvec(&u_fixed)?;
        goldfarb_idnani(&q_ff, &linear, &normals, &rhs)?
    };

    let mut u_star = vec![0.0; dim];
    for (k, &j) in free.iter().enumerate() {
        u_star[j] = y[k];
    }
    for (&j, &v) in fixed.iter().zip(&u_fixed) {
        u_star[j] = v;
    }
    let mut multipliers = vec![0.0; n];
    let mut lower_multipliers = vec![0.0; dim];
    let mut upper_multipliers = vec![0.0; dim];
    let mut active_set = Vec::with_capacity(active.len());
    for (&k, &m) in active.iter().zip(&mults) {
        match labels[k] {
            Constraint::Voltage(i) => multipliers[i] = m,
            Constraint::Lower(j) => lower_multipliers[j] = m,
            Constraint::Upper(j) => upper_multipliers[j] = m,
        }
        active_set.push(labels[k]);
    }
    // pinned variables: split the stationarity residual into bound multipliers
    if !fixed.is_empty() {
        let qu = q.matvec(&u_star)?;
        for &j in &fixed {
            let btm: f64 = (0..n).map(|i| b[(i, j)] * multipliers[i]).sum();
            let r = qu[j] + btm;
            if r >= 0.0 {
                lower_multipliers[j] = r;
            } else {
                upper_multipliers[j] = -r;
            }
        }
    }
    active_set.sort();
    let objective = 0.5 * dot(&u_star, &q.matvec(&u_star)?);
    Ok(QpSolution { u_star, multipliers, lower_multipliers, upper_multipliers, active_set, objective, pivots })
}

type GiResult = (Vec<f64>, Vec<usize>, Vec<f64>, usize);

/// `min 1/2 y^T G y + a^T y` s.t. `n_k^T y >= c_k`.
fn goldfarb_idnani(g: &Matrix, a: &[f64], normals: &[Vec<f64>], rhs: &[f64]) -> Result<GiResult> {
    let g_inv = invert(g)?;
    let mut y: Vec<f64> = g_inv.matvec(a)?.into_iter().map(|v| -v).collect();
    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let mut pivots = 0;

    let slack = |k: usize, y: &[f64]| dot(&normals[k], y) - rhs[k];
    let tol = |k: usize, y: &[f64]| 1e-11 * (1.0 + rhs[k].abs() + norm_inf(&normals[k]) * norm_inf(y));

    loop {
        let p = match (0..normals.len()).find(|&k| !active.contains(&k) && slack(k, &y) < -tol(k, &y)) {
            Some(p) => p,
            None => return Ok((y, active, mult, pivots)),
        };
        let np = &normals[p];
        let ginv_np = g_inv.matvec(np)?;
        let np_ginv_np = dot(np, &ginv_np);
        let mut new_mult = 0.0;
        loop {
            pivots += 1;
            if pivots > MAX_PIVOTS {
                return Err(Error::MaxPivots(MAX_PIVOTS));
            }
            // z = H n_p (primal direction), r = N* n_p (dual direction)
            let (z, r) = if active.is_empty() {
                (ginv_np.clone(), Vec::new())
            } else {
                let m = active.len();
                let ginv_na: Vec<Vec<f64>> =
                    active.iter().map(|&k| g_inv.matvec(&normals[k])).collect::<Result<_>>()?;
                let mut gram = Matrix::zeros(m, m);
                for i in 0..m {
                    for j in 0..m {
                        gram[(i, j)] = dot(&normals[active[i]], &ginv_na[j]);
                    }
                }
                let rhs_r: Vec<f64> = active.iter().map(|&k| dot(&normals[k], &ginv_np)).collect();
                let r = Lu::factor(&gram).map_err(|_| Error::SingularKKT)?.solve(&rhs_r)?;
                let mut z = ginv_np.clone();
                for (col, rj) in ginv_na.iter().zip(&r) {
                    for (zi, ci) in z.iter_mut().zip(col) {
                        *zi -= rj * ci;
                    }
                }
                (z, r)
            };

            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for (idx, (&rj, &uj)) in r.iter().zip(&mult).enumerate() {
                if rj > 0.0 {
                    let ratio = uj / rj;
                    if ratio < t1 {
                        t1 = ratio;
                        drop_at = Some(idx);
                    }
                }
            }
            let zn = dot(&z, np);
            let t2 = if zn <= 1e-12 * np_ginv_np { f64::INFINITY } else { -slack(p, &y) / zn };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(Error::Infeasible);
            }
            if t2.is_finite() {
                for (yi, zi) in y.iter_mut().zip(&z) {
                    *yi += t * zi;
                }
            }
            for (uj, rj) in mult.iter_mut().zip(&r) {
                *uj -= t * rj;
            }
            new_mult += t;
            if t2 <= t1 {
                active.push(p);
                mult.push(new_mult);
                break;
            }
            let idx = drop_at.expect("partial step has a blocking constraint");
            active.remove(idx);
            mult.remove(idx);
        }
    }
}

/// Stateful regularized online primal-dual iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalDualState {
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub eta_p: f64,
    pub eta_d: f64,
    pub epsilon_reg: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrimalDualConfig {
    pub eta_p: f64,
    pub eta_d: f64,
    pub epsilon_reg: f64,
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for PrimalDualConfig {
    fn default() -> Self {
        PrimalDualConfig { eta_p: 0.01, eta_d: 0.01, epsilon_reg: 1e-4, max_iters: 2000, tolerance: 1e-8 }
    }
}

impl PrimalDualState {
    pub fn new(u: Vec<f64>, n: usize, config: &PrimalDualConfig) -> Self {
        PrimalDualState {
            u,
            lambda: vec![0.0; n],
            eta_p: config.eta_p,
            eta_d: config.eta_d,
            epsilon_reg: config.epsilon_reg,
        }
    }
}

/// `u' = clamp(u - eta_p (Q u + B_hat^T lambda))`,
/// `lambda' = max(0, lambda + eta_d (x - x_bar - eps lambda))`.
pub fn primal_dual_step(
    state: &PrimalDualState,
    q_diag: &[f64],
    b_hat: &Matrix,
    x_measured: &[f64],
    x_bar: &[f64],
    limits: &InverterLimits,
) -> Result<PrimalDualState> {
    let n = b_hat.rows();
    if x_measured.len() != n || x_bar.len() != n || state.lambda.len() != n || state.u.len() != b_hat.cols() {
        return Err(Error::DimensionMismatch("primal-dual state does not match the model".into()));
    }
    let bt_lambda = b_hat.transpose().matvec(&state.lambda)?;
    let mut u: Vec<f64> = state
        .u
        .iter()
        .zip(q_diag)
        .zip(&bt_lambda)
        .map(|((u, q), bl)| u - state.eta_p * (q * u + bl))
        .collect();
    limits.clamp(&mut u);
    let lambda = state
        .lambda
        .iter()
        .zip(x_measured)
        .zip(x_bar)
        .map(|((l, x), xb)| (l + state.eta_d * (x - xb - state.epsilon_reg * l)).max(0.0))
        .collect();
    Ok(PrimalDualState { u, lambda, ..state.clone() })
}

/// Iterates [`primal_dual_step`] against the plant from `u0`.
pub fn run_primal_dual(
    plant: &Plant,
    b_hat: &Matrix,
    q_diag: &[f64],
    x_bar: &[f64],
    limits: &InverterLimits,
    u0: &[f64],
    config: &PrimalDualConfig,
) -> Result<Trajectory> {
    let start = Instant::now();
    let n = plant.n();
    let mut traj = Trajectory::new("primal-dual");
    let mut u0 = u0.to_vec();
    limits.clamp(&mut u0);
    let mut state = PrimalDualState::new(u0, n, config);
    let mut x = plant.measure(&state.u)?;
    traj.push(&state.u, &x, x_bar, 0.0, Events { init: true, ..Default::default() });
    for _ in 0..config.max_iters {
        let next = primal_dual_step(&state, q_diag, b_hat, &x, x_bar, limits)?;
        let du = next.u.iter().zip(&state.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dl = next.lambda.iter().zip(&state.lambda).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        state = next;
        x = plant.measure(&state.u)?;
        let lam = state.lambda[argmax_margin(&x, x_bar)];
        traj.push(&state.u, &x, x_bar, lam, Events::default());
        if du < config.tolerance && dl < config.tolerance {
            traj.status = Status::Converged;
            break;
        }
    }
    traj.wall_time = start.elapsed();
    Ok(traj)
}
