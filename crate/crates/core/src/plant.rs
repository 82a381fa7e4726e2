//! The simulated grid: noise-free linear measurements and inaccurate model
//! estimates handed to the controllers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, Matrix};
use crate::netmodel::{RadialNetwork, SensitivityModel};

/// Box `u_lo <= u <= u_hi` on the stacked `(u^p, u^q)` actions.
#[derive(Clone, Debug, PartialEq)]
pub struct InverterLimits {
    pub u_lo: Vec<f64>,
    pub u_hi: Vec<f64>,
}

impl InverterLimits {
    pub fn new(u_lo: Vec<f64>, u_hi: Vec<f64>) -> Result<Self> {
        if u_lo.len() != u_hi.len() || !u_lo.len().is_multiple_of(2) {
            return Err(Error::DimensionMismatch(format!(
                "limits need two equal even-length vectors, got {} and {}",
                u_lo.len(),
                u_hi.len()
            )));
        }
        if let Some(j) = (0..u_lo.len()).find(|&j| !(u_lo[j] <= u_hi[j])) {
            return Err(Error::DimensionMismatch(format!(
                "action {j} has lower bound {} above upper bound {}",
                u_lo[j], u_hi[j]
            )));
        }
        Ok(InverterLimits { u_lo, u_hi })
    }

    /// Curtailment `u^p in [-p_av, 0]` and reactive support
    /// `u^q in [-f p_av, f p_av]`, or `[-f p_av, 0]` when `upper_zero`.
    /// Buses without an inverter are pinned at zero.
    pub fn from_network(net: &RadialNetwork, reactive_fraction: f64, upper_zero: bool) -> Self {
        let n = net.n();
        let mut u_lo = vec![0.0; 2 * n];
        let mut u_hi = vec![0.0; 2 * n];
        for (k, bus) in net.buses.iter().enumerate() {
            if !bus.has_inverter {
                continue;
            }
            u_lo[k] = -bus.p_av;
            u_lo[n + k] = -reactive_fraction * bus.p_av;
            if !upper_zero {
                u_hi[n + k] = reactive_fraction * bus.p_av;
            }
        }
        InverterLimits { u_lo, u_hi }
    }

    pub fn dim(&self) -> usize {
        self.u_lo.len()
    }

    pub fn clamp(&self, u: &mut [f64]) {
        for ((v, lo), hi) in u.iter_mut().zip(&self.u_lo).zip(&self.u_hi) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.dim()
            && u.iter().zip(&self.u_lo).zip(&self.u_hi).all(|((v, lo), hi)| lo <= v && v <= hi)
    }

    /// Indices strictly inside their bounds.
    pub fn unsaturated(&self, u: &[f64]) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.u_lo[j] < u[j] && u[j] < self.u_hi[j]).collect()
    }
}

/// Ground truth voltage response.
#[derive(Clone, Debug)]
pub struct Plant {
    pub model: SensitivityModel,
}

impl Plant {
    pub fn new(model: SensitivityModel) -> Self {
        Plant { model }
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn measure(&self, u: &[f64]) -> Result<Vec<f64>> {
        measure(&self.model, u)
    }
}

/// `x = B u + e`.
pub fn measure(model: &SensitivityModel, u: &[f64]) -> Result<Vec<f64>> {
    let bu = model.b.matvec(u)?;
    Ok(bu.iter().zip(&model.e).map(|(a, b)| a + b).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationKind {
    Parametric,
    Topological,
    Both,
}

impl std::str::FromStr for PerturbationKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "parametric" => Ok(PerturbationKind::Parametric),
            "topological" => Ok(PerturbationKind::Topological),
            "both" => Ok(PerturbationKind::Both),
            other => Err(format!("unknown perturbation kind `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelEstimate {
    pub b_hat: Matrix,
    /// Realized spectral norm of `B - B_hat`.
    pub eps_b: f64,
    pub relative_error: f64,
    /// Parametric magnitude and transposition count actually applied.
    pub magnitude: f64,
    pub swaps: usize,
}

impl ModelEstimate {
    pub fn exact(b: &Matrix) -> Self {
        ModelEstimate { b_hat: b.clone(), eps_b: 0.0, relative_error: 0.0, magnitude: 0.0, swaps: 0 }
    }
}

/// Applies entrywise `(1 + delta)` noise and/or one random bus transposition.
pub fn perturb_model(b: &Matrix, kind: PerturbationKind, magnitude: f64, seed: u64) -> ModelEstimate {
    let (mag, swaps) = match kind {
        PerturbationKind::Parametric => (magnitude, 0),
        PerturbationKind::Topological => (0.0, 1),
        PerturbationKind::Both => (magnitude, 1),
    };
    perturb_composed(b, mag, swaps, seed)
}

/// Parametric noise of size `magnitude` followed by `swaps` transpositions.
///
/// The noise pattern and the transposition sequence depend only on `seed`, so
/// increasing `magnitude` scales the same noise and increasing `swaps` extends
/// the same sequence.
pub fn perturb_composed(b: &Matrix, magnitude: f64, swaps: usize, seed: u64) -> ModelEstimate {
    let n = b.rows();
    assert_eq!(b.cols(), 2 * n, "B must be n x 2n");
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut swap_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);

    let mut b_hat = b.clone();
    if magnitude > 0.0 {
        for i in 0..n {
            for j in 0..2 * n {
                let delta: f64 = noise_rng.gen_range(-1.0..=1.0);
                b_hat[(i, j)] *= 1.0 + magnitude * delta;
            }
        }
        for block in 0..2 {
            let off = block * n;
            for i in 0..n {
                for j in 0..i {
                    let avg = 0.5 * (b_hat[(i, off + j)] + b_hat[(j, off + i)]);
                    b_hat[(i, off + j)] = avg;
                    b_hat[(j, off + i)] = avg;
                }
            }
        }
    }
    if n >= 2 {
        let buses: Vec<usize> = (0..n).collect();
        for _ in 0..swaps {
            let pair: Vec<usize> = buses.choose_multiple(&mut swap_rng, 2).copied().collect();
            transpose_buses(&mut b_hat, pair[0], pair[1]);
        }
    }

    let eps_b = spectral_norm(&b.sub(&b_hat).expect("same shape"));
    let norm_b = spectral_norm(b);
    let relative_error = if norm_b > 0.0 { eps_b / norm_b } else { 0.0 };
    ModelEstimate { b_hat, eps_b, relative_error, magnitude, swaps }
}

/// Swaps rows `a` and `b`, and columns `a`, `b` within each `n x n` block.
fn transpose_buses(m: &mut Matrix, a: usize, b: usize) {
    let n = m.rows();
    for j in 0..2 * n {
        let tmp = m[(a, j)];
        m[(a, j)] = m[(b, j)];
        m[(b, j)] = tmp;
    }
    for block in 0..2 {
        let (ca, cb) = (block * n + a, block * n + b);
        for i in 0..n {
            let tmp = m[(i, ca)];
            m[(i, ca)] = m[(i, cb)];
            m[(i, cb)] = tmp;
        }
    }
}

const MAX_TUNING_MAGNITUDE: f64 = 0.9;

/// Searches transposition count and noise magnitude for a realized relative
/// error close to `target`. Returns the closest estimate found.
pub fn tune_perturbation(b: &Matrix, target: f64, seed: u64) -> ModelEstimate {
    if target <= 0.0 {
        return ModelEstimate::exact(b);
    }
    let n = b.rows();
    let mut best = ModelEstimate::exact(b);
    let consider = |est: ModelEstimate, best: &mut ModelEstimate| {
        if (est.relative_error - target).abs() < (best.relative_error - target).abs() {
            *best = est;
        }
    };
    for swaps in 0..=4 * n {
        let lo = perturb_composed(b, 0.0, swaps, seed);
        let hi = perturb_composed(b, MAX_TUNING_MAGNITUDE, swaps, seed);
        let (elo, ehi) = (lo.relative_error, hi.relative_error);
        consider(lo, &mut best);
        consider(hi, &mut best);
        if elo <= target && target <= ehi {
            let (mut a, mut c) = (0.0, MAX_TUNING_MAGNITUDE);
            for _ in 0..50 {
                let mid = 0.5 * (a + c);
                let est = perturb_composed(b, mid, swaps, seed);
                let err = est.relative_error;
                consider(est, &mut best);
                if (err - target).abs() <= 1e-4 * target {
                    return best;
                }
                if err < target {
                    a = mid;
                } else {
                    c = mid;
                }
            }
            return best;
        }
    }
    best
}

/// Largest singular value by power iteration on `M^T M`.
pub fn spectral_norm(m: &Matrix) -> f64 {
    spectral_norm_tol(m, 1e-12)
}

pub fn spectral_norm_tol(m: &Matrix, rel_tol: f64) -> f64 {
    if m.cols() == 0 || m.rows() == 0 || m.max_abs() == 0.0 {
        return 0.0;
    }
    // power iteration on the smaller Gram matrix
    let gram = if m.rows() <= m.cols() {
        m.matmul(&m.transpose())
    } else {
        m.transpose().matmul(m)
    }
    .expect("dimensions agree");
    let dim = gram.rows();
    let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + 0.1 * ((i as f64) + 1.0).sin()).collect();
    let mut sigma_sq = 0.0;
    for _ in 0..100_000 {
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let w = gram.matvec(&v).expect("dimensions agree");
        let next = dot(&v, &w);
        if next == 0.0 {
            // start vector in the null space; restart from a basis vector
            let j = (0..dim).find(|&j| gram[(j, j)] != 0.0).unwrap();
            v = vec![0.0; dim];
            v[j] = 1.0;
            continue;
        }
        let done = (next - sigma_sq).abs() <= rel_tol * next;
        sigma_sq = next;
        v = w;
        if done {
            break;
        }
    }
    sigma_sq.sqrt()
}
