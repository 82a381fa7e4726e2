//! One scenario, every method: no control, the exact QP with the true and the
//! estimated model, the barrier controller and primal-dual.

use std::fmt;

use crate::baselines::{run_primal_dual, solve_lcqp};
use crate::controller::{self, BarrierConfig, ControllerState};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::netmodel::{generate_synthetic_feeder, load_network, RadialNetwork, SensitivityModel};
use crate::plant::{perturb_composed, perturb_model, tune_perturbation, InverterLimits, ModelEstimate, Plant};
use crate::scenario::{ModelSpec, NetworkSource, Scenario};
use crate::trajectory::{Events, Status, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    NoControl,
    LcqpTrue,
    LcqpEstimate,
    Barrier,
    PrimalDual,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::NoControl, Method::LcqpTrue, Method::LcqpEstimate, Method::Barrier, Method::PrimalDual];

    pub fn name(self) -> &'static str {
        match self {
            Method::NoControl => "no-control",
            Method::LcqpTrue => "lcqp-true",
            Method::LcqpEstimate => "lcqp-estimate",
            Method::Barrier => "barrier",
            Method::PrimalDual => "primal-dual",
        }
    }

    pub fn iterative(self) -> bool {
        matches!(self, Method::Barrier | Method::PrimalDual)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Network, true plant and model estimate for a scenario.
#[derive(Clone, Debug)]
pub struct Setup {
    pub network: RadialNetwork,
    pub plant: Plant,
    pub estimate: ModelEstimate,
    pub limits: InverterLimits,
    pub config: BarrierConfig,
}

impl Setup {
    pub fn model(&self) -> &SensitivityModel {
        &self.plant.model
    }

    pub fn q(&self) -> Matrix {
        Matrix::from_diag(&self.config.q_diag)
    }

    pub fn objective(&self, u: &[f64]) -> f64 {
        0.5 * u.iter().zip(&self.config.q_diag).map(|(u, q)| q * u * u).sum::<f64>()
    }
}

pub fn build_network(sc: &Scenario) -> Result<RadialNetwork> {
    match &sc.network {
        NetworkSource::File(p) => load_network(p),
        NetworkSource::Synthetic { n, seed, overload_factor } => Ok(generate_synthetic_feeder(*n, *seed, *overload_factor)),
    }
}

pub fn estimate_model(b: &Matrix, spec: &ModelSpec) -> ModelEstimate {
    match *spec {
        ModelSpec::Exact => ModelEstimate::exact(b),
        ModelSpec::Perturbed { kind, magnitude, swaps: None, seed } => perturb_model(b, kind, magnitude, seed),
        ModelSpec::Perturbed { magnitude, swaps: Some(s), seed, .. } => perturb_composed(b, magnitude, s, seed),
        ModelSpec::Target { relative_error, seed } => tune_perturbation(b, relative_error, seed),
    }
}

pub fn prepare(sc: &Scenario) -> Result<Setup> {
    let network = build_network(sc)?;
    let model = SensitivityModel::from_network(&network)?;
    let estimate = estimate_model(&model.b, &sc.model);
    let limits = InverterLimits::from_network(&network, sc.reactive_fraction, sc.upper_zero);
    let config = sc.barrier_config(network.n());
    Ok(Setup { network, plant: Plant::new(model), estimate, limits, config })
}

#[derive(Debug)]
pub struct MethodResult {
    pub method: Method,
    pub outcome: Result<Trajectory>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub final_max_x: Option<f64>,
    /// Update steps until the tolerance fired; `None` if it never did or the
    /// method is not iterative.
    pub steps_to_convergence: Option<usize>,
    pub violation_steps: usize,
    pub objective: Option<f64>,
    pub note: String,
}

#[derive(Debug)]
pub struct Experiment {
    pub name: String,
    pub nominal_kv: f64,
    pub setup: Setup,
    pub results: Vec<MethodResult>,
    pub barrier_state: Option<ControllerState>,
}

impl Experiment {
    pub fn trajectory(&self, method: Method) -> Option<&Trajectory> {
        self.results.iter().find(|r| r.method == method).and_then(|r| r.outcome.as_ref().ok())
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        self.results
            .iter()
            .map(|r| match &r.outcome {
                Ok(t) => SummaryRow {
                    method: r.method,
                    final_max_x: t.last().map(|rec| rec.max_x),
                    steps_to_convergence: (r.method.iterative() && t.converged()).then(|| t.steps()),
                    violation_steps: t.violation_steps(),
                    objective: Some(self.setup.objective(t.final_u())),
                    note: if r.method.iterative() { t.status.to_string() } else { String::new() },
                },
                Err(e) => SummaryRow {
                    method: r.method,
                    final_max_x: None,
                    steps_to_convergence: None,
                    violation_steps: 0,
                    objective: None,
                    note: e.to_string(),
                },
            })
            .collect()
    }
}

/// Runs every enabled method. A failing method is recorded in its result and
/// does not stop the others.
pub fn run_experiment(sc: &Scenario) -> Result<Experiment> {
    let setup = prepare(sc)?;
    let mut results = Vec::new();
    let mut barrier_state = None;
    let m = &sc.methods;
    if m.no_control {
        results.push(MethodResult { method: Method::NoControl, outcome: single_shot(&setup, "no-control", Ok(zeros(&setup))) });
    }
    if m.lcqp {
        let model = setup.model();
        let q = setup.q();
        let u_true = solve_lcqp(&q, &model.b, &model.e, &setup.config.x_bar, &setup.limits).map(|s| s.u_star);
        results.push(MethodResult { method: Method::LcqpTrue, outcome: single_shot(&setup, "lcqp-true", u_true) });
        // the drop itself is observable by measuring at zero action
        let u_hat = solve_lcqp(&q, &setup.estimate.b_hat, &model.e, &setup.config.x_bar, &setup.limits).map(|s| s.u_star);
        results.push(MethodResult { method: Method::LcqpEstimate, outcome: single_shot(&setup, "lcqp-estimate", u_hat) });
    }
    if m.barrier {
        let out = controller::run(
            &setup.plant,
            &setup.estimate.b_hat,
            setup.estimate.eps_b,
            &setup.config,
            &setup.limits,
            &setup.network.p_av(),
        );
        let outcome = out.map(|r| {
            barrier_state = Some(r.state);
            r.trajectory
        });
        results.push(MethodResult { method: Method::Barrier, outcome });
    }
    if m.primal_dual {
        let outcome = run_primal_dual(
            &setup.plant,
            &setup.estimate.b_hat,
            &setup.config.q_diag,
            &setup.config.x_bar,
            &setup.limits,
            &initial_action(&setup),
            &sc.primal_dual,
        );
        results.push(MethodResult { method: Method::PrimalDual, outcome });
    }
    Ok(Experiment { name: sc.name.clone(), nominal_kv: sc.nominal_kv, setup, results, barrier_state })
}

/// `[(kappa - 1) p_av, 0]` clamped into the box; both controllers start here.
pub fn initial_action(setup: &Setup) -> Vec<f64> {
    let n = setup.network.n();
    let mut u = vec![0.0; 2 * n];
    for (uj, p) in u.iter_mut().zip(setup.network.p_av()) {
        *uj = (setup.config.kappa - 1.0) * p;
    }
    setup.limits.clamp(&mut u);
    u
}

fn zeros(setup: &Setup) -> Vec<f64> {
    vec![0.0; 2 * setup.network.n()]
}

fn single_shot(setup: &Setup, name: &str, u: Result<Vec<f64>>) -> Result<Trajectory> {
    let u = u?;
    if u.len() != setup.limits.dim() {
        return Err(Error::DimensionMismatch(format!("{name} returned {} actions", u.len())));
    }
    let x = setup.plant.measure(&u)?;
    let mut t = Trajectory::new(name);
    t.push(&u, &x, &setup.config.x_bar, 0.0, Events { init: true, ..Default::default() });
    t.status = Status::Converged;
    Ok(t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub magnitude: f64,
    pub eps_b: f64,
    pub relative_error: f64,
    pub barrier_max_x: Option<f64>,
    pub barrier_steps: Option<usize>,
    /// `(c(u_barrier) - c(u*)) / c(u*)` against the true-model optimum.
    pub optimality_gap: Option<f64>,
    pub lcqp_estimate_max_x: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn safe(&self, x_bar: f64) -> Option<bool> {
        self.barrier_max_x.map(|m| m <= x_bar + crate::trajectory::VIOLATION_TOL)
    }
}

/// Re-runs the barrier controller and the estimated-model QP for each noise
/// magnitude, keeping the perturbation kind and seed of the scenario.
pub fn sweep(sc: &Scenario, magnitudes: &[f64]) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;

    let base = prepare(sc)?;
    let (kind, swaps, seed) = match sc.model {
        ModelSpec::Perturbed { kind, swaps, seed, .. } => (kind, swaps, seed),
        ModelSpec::Target { seed, .. } => (crate::plant::PerturbationKind::Both, None, seed),
        ModelSpec::Exact => (crate::plant::PerturbationKind::Both, None, 7),
    };
    let model = base.model();
    let q = base.q();
    let optimum = solve_lcqp(&q, &model.b, &model.e, &base.config.x_bar, &base.limits)?;
    let best = base.objective(&optimum.u_star);
    let p_av = base.network.p_av();
    let rows = magnitudes
        .par_iter()
        .map(|&magnitude| {
            let spec = ModelSpec::Perturbed { kind, magnitude, swaps, seed };
            let est = estimate_model(&model.b, &spec);
            let run = controller::run(&base.plant, &est.b_hat, est.eps_b, &base.config, &base.limits, &p_av);
            let lcqp = solve_lcqp(&q, &est.b_hat, &model.e, &base.config.x_bar, &base.limits)
                .and_then(|s| base.plant.measure(&s.u_star));
            let mut row = SweepRow {
                magnitude,
                eps_b: est.eps_b,
                relative_error: est.relative_error,
                barrier_max_x: None,
                barrier_steps: None,
                optimality_gap: None,
                lcqp_estimate_max_x: lcqp.ok().map(|x| x.iter().cloned().fold(f64::NEG_INFINITY, f64::max)),
                error: None,
            };
            match run {
                Ok(r) => {
                    let t = r.trajectory;
                    row.barrier_max_x = t.last().map(|rec| rec.max_x);
                    row.barrier_steps = t.converged().then(|| t.steps());
                    row.optimality_gap = (best > 0.0).then(|| (base.objective(t.final_u()) - best) / best);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_feeder_runs_every_method() {
        let mut sc = Scenario::synthetic(8, 3, 1.3);
        sc.controller.max_iters = 20_000;
        sc.primal_dual.max_iters = 200;
        let ex = run_experiment(&sc).unwrap();
        let rows = ex.summary();
        assert_eq!(rows.iter().map(|r| r.method).collect::<Vec<_>>(), Method::ALL.to_vec());
        let x_bar = sc.x_bar();
        assert!(rows[0].final_max_x.unwrap() > x_bar);
        assert!((rows[1].final_max_x.unwrap() - x_bar).abs() < 1e-9);
        let barrier = &rows[3];
        assert!(barrier.steps_to_convergence.is_some(), "{barrier:?}");
        assert!((barrier.final_max_x.unwrap() - x_bar).abs() < 1e-6);
        assert!((barrier.objective.unwrap() - rows[1].objective.unwrap()).abs() < 1e-6);
        assert!(ex.barrier_state.is_some());
    }

    #[test]
    fn unloaded_feeder_reports_not_activated() {
        let mut sc = Scenario::synthetic(6, 1, 0.5);
        sc.controller.kappa = 1.0;
        let ex = run_experiment(&sc).unwrap();
        let barrier = ex.results.iter().find(|r| r.method == Method::Barrier).unwrap();
        assert!(matches!(barrier.outcome, Err(Error::NotActivated { .. })));
        let lcqp = ex.trajectory(Method::LcqpTrue).unwrap();
        assert!(lcqp.final_u().iter().all(|v| v.abs() < 1e-12));
        assert!(ex.trajectory(Method::PrimalDual).is_some());
    }

    #[test]
    fn sweep_reports_realized_error_per_magnitude() {
        let mut sc = Scenario::synthetic(6, 2, 1.3);
        sc.controller.max_iters = 20_000;
        let rows = sweep(&sc, &[0.0, 0.2, 0.5]).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].relative_error > 0.0, "kind `both` still transposes one pair");
        assert!(rows.iter().all(|r| r.error.is_none()));
        assert!(rows[1].relative_error > 0.0 && rows[2].relative_error > 0.0);
    }
}
