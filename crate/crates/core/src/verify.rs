//! Convergence checks on closed-form quadratic instances.
//!
//! An instance pairs a convex retain objective `½(θ−c_r)ᵀA_r(θ−c_r)`
//! with a concave inner objective `−½(θ−c_φ)ᵀA_φ(θ−c_φ)`, both with
//! symmetric positive-definite matrices. Everything the theory needs is
//! then available in closed form: the inner optimum is `c_φ`, gradient
//! Lipschitz constants are largest eigenvalues, and the penalty
//! objective's minimizer solves a single linear system
//! `(A_r + 2ρA_φ²)θ = A_r c_r + 2ρA_φ² c_φ`.
//!
//! Three checks are exposed, matching the harness's `lemma1`–`lemma3`
//! selection tokens: penalty stationarity (residual `‖∇Φ(θ*_ρ)‖`
//! vanishing as ρ grows), the inner ascent suboptimality bound
//! `Φ* − Φ(θ^(T)) ≤ ‖θ* − θ0‖²/(2Tη)`, and the qualitative decay of
//! the penalty-objective gap under the full two-loop run.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, CoreError, Result};
use crate::optimizer::{
    run_two_loop, OfmuConfig, RunError, StepStats, Trajectory, TwoLoopDriver,
};
use crate::vector::ParameterVector;

const SYMMETRY_TOL: f64 = 1e-12;
const ZERO_RESIDUAL: f64 = 1e-12;

/// Dense symmetric matrix with the few operations the checks need.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>, // row-major
}

impl SymMatrix {
    /// Validates squareness and symmetry (entries within `1e-12`).
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("matrix dimension must be positive"));
        }
        if data.len() != n * n {
            return Err(CoreError::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NumericalFailure {
                context: "matrix construction",
                coordinate: None,
            });
        }
        for i in 0..n {
            for j in 0..i {
                if (data[i * n + j] - data[j * n + i]).abs() > SYMMETRY_TOL {
                    return Err(invalid(alloc::format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut data = vec![0.0; n * n];
        for (i, &e) in entries.iter().enumerate() {
            data[i * n + i] = e;
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// `A·A`; symmetric whenever `A` is.
    pub fn squared(&self) -> SymMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.get(i, k) * self.get(k, j);
                }
                data[i * n + j] = s;
                data[j * n + i] = s;
            }
        }
        Self { n, data }
    }

    /// `self + alpha·other`.
    pub fn add_scaled(&self, alpha: f64, other: &SymMatrix) -> Result<SymMatrix> {
        if self.n != other.n {
            return Err(CoreError::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        })
    }

    /// Largest eigenvalue by power iteration with a Rayleigh quotient.
    /// Intended for positive-definite matrices, where the spectral
    /// radius and the largest eigenvalue coincide.
    pub fn largest_eigenvalue(&self) -> f64 {
        let n = self.n;
        // deterministic start with no zero pattern
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * (i % 7) as f64).collect();
        let mut norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in x.iter_mut() {
            *v /= norm;
        }
        let mut lambda = 0.0;
        for _ in 0..10_000 {
            let y = self.matvec(&x);
            let next = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
            norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            for (xi, yi) in x.iter_mut().zip(&y) {
                *xi = yi / norm;
            }
            if (next - lambda).abs() <= 1e-13 * next.abs().max(1.0) {
                return next;
            }
            lambda = next;
        }
        lambda
    }

    /// Cholesky factor `L` with `A = LLᵀ`; errors unless positive
    /// definite.
    fn cholesky(&self) -> Result<Vec<f64>> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut s = self.get(j, j);
            for k in 0..j {
                s -= l[j * n + k] * l[j * n + k];
            }
            if !(s > 0.0) {
                return Err(CoreError::SingularSystem);
            }
            let d = s.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut v = self.get(i, j);
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = v / d;
            }
        }
        Ok(l)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }

    /// Solves `A·x = rhs` by Cholesky, falling back to partially
    /// pivoted LU if the factorization fails.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(CoreError::DimensionMismatch {
                expected: self.n,
                got: rhs.len(),
            });
        }
        match self.cholesky() {
            Ok(l) => {
                let n = self.n;
                let mut y = rhs.to_vec();
                for i in 0..n {
                    for k in 0..i {
                        y[i] -= l[i * n + k] * y[k];
                    }
                    y[i] /= l[i * n + i];
                }
                for i in (0..n).rev() {
                    for k in (i + 1)..n {
                        y[i] -= l[k * n + i] * y[k];
                    }
                    y[i] /= l[i * n + i];
                }
                Ok(y)
            }
            Err(_) => lu_solve(self.n, self.data.clone(), rhs.to_vec()),
        }
    }
}

fn lu_solve(n: usize, mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < 1e-14 {
            return Err(CoreError::SingularSystem);
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        for row in (col + 1)..n {
            let f = a[row * n + col] / a[col * n + col];
            a[row * n + col] = 0.0;
            for j in (col + 1)..n {
                a[row * n + j] -= f * a[col * n + j];
            }
            b[row] -= f * b[col];
        }
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            b[i] -= a[i * n + j] * b[j];
        }
        b[i] /= a[i * n + i];
    }
    Ok(b)
}

/// A retain/inner quadratic pair with everything in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticInstance {
    retain_matrix: SymMatrix,
    inner_matrix: SymMatrix,
    retain_center: ParameterVector,
    inner_center: ParameterVector,
    inner_matrix_sq: SymMatrix,
    lipschitz: f64,
}

impl QuadraticInstance {
    /// Both matrices must be symmetric positive definite and all
    /// dimensions must agree.
    pub fn new(
        retain_matrix: SymMatrix,
        inner_matrix: SymMatrix,
        retain_center: ParameterVector,
        inner_center: ParameterVector,
    ) -> Result<Self> {
        let n = retain_matrix.dim();
        if inner_matrix.dim() != n || retain_center.dim() != n || inner_center.dim() != n {
            return Err(CoreError::DimensionMismatch {
                expected: n,
                got: inner_matrix.dim().max(retain_center.dim()).max(inner_center.dim()),
            });
        }
        if !retain_matrix.is_positive_definite() || !inner_matrix.is_positive_definite() {
            return Err(invalid("instance matrices must be positive definite"));
        }
        let inner_matrix_sq = inner_matrix.squared();
        let lipschitz = inner_matrix.largest_eigenvalue();
        Ok(Self {
            retain_matrix,
            inner_matrix,
            retain_center,
            inner_center,
            inner_matrix_sq,
            lipschitz,
        })
    }

    pub fn dim(&self) -> usize {
        self.retain_matrix.dim()
    }

    /// Gradient Lipschitz constant of the inner objective: the largest
    /// eigenvalue of its curvature matrix.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Gradient Lipschitz constant of the penalty objective at weight
    /// `rho`.
    pub fn penalty_lipschitz(&self, rho: f64) -> f64 {
        self.retain_matrix
            .add_scaled(2.0 * rho, &self.inner_matrix_sq)
            .expect("dimensions agree by construction")
            .largest_eigenvalue()
    }

    /// The inner objective's unique maximizer.
    pub fn inner_optimum(&self) -> &ParameterVector {
        &self.inner_center
    }

    pub fn loss_r(&self, theta: &ParameterVector) -> f64 {
        let d = theta.sub(&self.retain_center);
        0.5 * dot(d.as_slice(), &self.retain_matrix.matvec(d.as_slice()))
    }

    pub fn phi(&self, theta: &ParameterVector) -> f64 {
        let d = theta.sub(&self.inner_center);
        -0.5 * dot(d.as_slice(), &self.inner_matrix.matvec(d.as_slice()))
    }

    pub fn grad_loss_r(&self, theta: &ParameterVector) -> ParameterVector {
        let d = theta.sub(&self.retain_center);
        ParameterVector::from_raw(self.retain_matrix.matvec(d.as_slice()))
    }

    pub fn grad_phi(&self, theta: &ParameterVector) -> ParameterVector {
        let d = self.inner_center.sub(theta); // −A_φ(θ−c_φ)
        ParameterVector::from_raw(self.inner_matrix.matvec(d.as_slice()))
    }

    /// `F(θ; ρ) = L_r(θ) + ρ‖∇Φ(θ)‖²`.
    pub fn penalty_value(&self, theta: &ParameterVector, rho: f64) -> f64 {
        self.loss_r(theta) + rho * self.grad_phi(theta).norm_sq()
    }

    /// `∇F(θ; ρ) = A_r(θ−c_r) + 2ρ·A_φ²(θ−c_φ)`.
    pub fn grad_penalty(&self, theta: &ParameterVector, rho: f64) -> ParameterVector {
        let mut g = self.grad_loss_r(theta);
        let d = theta.sub(&self.inner_center);
        let hv = self.inner_matrix_sq.matvec(d.as_slice());
        g.add_scaled(2.0 * rho, &ParameterVector::from_raw(hv));
        g
    }

    /// Exact minimizer of the penalty objective at weight `rho`, from
    /// one symmetric positive-definite solve.
    pub fn penalty_minimizer(&self, rho: f64) -> Result<ParameterVector> {
        if !(rho >= 0.0) {
            return Err(invalid("rho must be non-negative"));
        }
        let system = self
            .retain_matrix
            .add_scaled(2.0 * rho, &self.inner_matrix_sq)?;
        let mut rhs = self.retain_matrix.matvec(self.retain_center.as_slice());
        let extra = self.inner_matrix_sq.matvec(self.inner_center.as_slice());
        for (r, e) in rhs.iter_mut().zip(&extra) {
            *r += 2.0 * rho * e;
        }
        Ok(ParameterVector::from_raw(system.solve(&rhs)?))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of the inner-ascent bound check.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Lemma2Report {
    /// `Φ* − Φ(θ^(T))` after `T` exact ascent steps.
    pub lhs: f64,
    /// `‖θ* − θ0‖² / (2Tη)`.
    pub bound: f64,
    pub pass: bool,
}

/// Runs `steps` exact ascent steps on the instance's inner objective
/// and compares the remaining suboptimality against the analytic bound.
///
/// The bound's hypothesis requires `0 < eta_in ≤ 1/L`; violating step
/// sizes are reported as [`CoreError::HypothesisViolated`] so harnesses
/// can mark the case skipped rather than failed.
pub fn check_lemma2(
    instance: &QuadraticInstance,
    theta0: &ParameterVector,
    steps: usize,
    eta_in: f64,
) -> Result<Lemma2Report> {
    if theta0.dim() != instance.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: instance.dim(),
            got: theta0.dim(),
        });
    }
    if steps == 0 {
        return Err(invalid("ascent step count must be at least 1"));
    }
    if !(eta_in > 0.0) {
        return Err(invalid("eta_in must be positive"));
    }
    let lipschitz = instance.lipschitz();
    if eta_in * lipschitz > 1.0 + 1e-9 {
        return Err(CoreError::HypothesisViolated(alloc::format!(
            "eta_in {eta_in} exceeds 1/L = {}",
            1.0 / lipschitz
        )));
    }
    let mut theta = theta0.clone();
    for _ in 0..steps {
        let g = instance.grad_phi(&theta);
        theta.add_scaled(eta_in, &g);
    }
    // Φ* = Φ(c_φ) = 0 for this parameterization.
    let lhs = -instance.phi(&theta);
    let bound =
        instance.inner_optimum().sub(theta0).norm_sq() / (2.0 * steps as f64 * eta_in);
    Ok(Lemma2Report {
        lhs,
        bound,
        pass: lhs <= bound + 1e-10,
    })
}

/// Result of the penalty-stationarity check.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Lemma1Report {
    pub rhos: Vec<f64>,
    /// `‖∇Φ(θ*_ρ)‖` at the exact penalty minimizer for each ρ.
    pub residuals: Vec<f64>,
    pub pass: bool,
}

/// Minimizes the penalty objective exactly for each weight in an
/// increasing sequence and checks that the inner-gradient residual
/// decays toward zero.
///
/// Pass requires the residuals to decrease strictly (consecutive
/// residuals already below `1e-12` count as converged-to-zero rather
/// than as violations, which covers instances whose objectives share an
/// optimum) and, whenever the sequence reaches `ρ ≥ 1e4`, a final
/// residual of at most `1e-4`.
pub fn check_lemma1(instance: &QuadraticInstance, rho_sequence: &[f64]) -> Result<Lemma1Report> {
    if rho_sequence.is_empty() {
        return Err(invalid("rho sequence must be non-empty"));
    }
    if !(rho_sequence[0] > 0.0) {
        return Err(invalid("rho sequence must be positive"));
    }
    if rho_sequence.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("rho sequence must be strictly increasing"));
    }
    let mut residuals = Vec::with_capacity(rho_sequence.len());
    for &rho in rho_sequence {
        let minimizer = instance.penalty_minimizer(rho)?;
        residuals.push(instance.grad_phi(&minimizer).norm());
    }
    let decreasing = residuals
        .windows(2)
        .all(|w| w[1] < w[0] || w[0] <= ZERO_RESIDUAL);
    let reaches_large_rho = *rho_sequence.last().unwrap() >= 1e4;
    let small_tail = !reaches_large_rho || *residuals.last().unwrap() <= 1e-4;
    Ok(Lemma1Report {
        rhos: rho_sequence.to_vec(),
        residuals,
        pass: decreasing && small_tail,
    })
}

/// Result of the two-loop decay check.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Lemma3Report {
    /// Penalty weight the gap is measured against.
    pub rho: f64,
    /// Exact minimum of the penalty objective at that weight.
    pub f_star: f64,
    /// `F(θ^(k); ρ) − F*` after each outer iteration.
    pub gaps: Vec<f64>,
    pub pass: bool,
}

struct QuadraticDriver<'a> {
    instance: &'a QuadraticInstance,
    /// When set, records `F(θ^(k); ρ)` at this fixed weight after every
    /// outer step.
    track_rho: Option<f64>,
    penalty_values: Vec<f64>,
}

impl<'a> QuadraticDriver<'a> {
    fn new(instance: &'a QuadraticInstance) -> Self {
        Self {
            instance,
            track_rho: None,
            penalty_values: Vec::new(),
        }
    }
}

impl TwoLoopDriver for QuadraticDriver<'_> {
    fn inner_gradient(&mut self, theta: &ParameterVector) -> Result<ParameterVector> {
        Ok(self.instance.grad_phi(theta))
    }

    fn stationarity_stats(&mut self, theta_in: &ParameterVector) -> Result<StepStats> {
        Ok(StepStats {
            grad_phi_norm: self.instance.grad_phi(theta_in).norm(),
            loss_r: Some(self.instance.loss_r(theta_in)),
            loss_f: Some(self.instance.phi(theta_in)),
            sim: None,
        })
    }

    fn outer_gradient(&mut self, theta_in: &ParameterVector, rho: f64) -> Result<ParameterVector> {
        Ok(self.instance.grad_penalty(theta_in, rho))
    }

    fn after_outer(&mut self, _k: usize, theta: &ParameterVector) {
        if let Some(rho) = self.track_rho {
            self.penalty_values
                .push(self.instance.penalty_value(theta, rho));
        }
    }
}

/// Runs the two-loop optimizer directly on a quadratic instance with
/// exact gradients, honoring the config's penalty schedule.
pub fn run_on_instance(
    instance: &QuadraticInstance,
    theta0: &ParameterVector,
    cfg: &OfmuConfig,
) -> core::result::Result<Trajectory, RunError> {
    let mut driver = QuadraticDriver::new(instance);
    run_two_loop(&mut driver, theta0, cfg)
}

/// Runs the full two-loop procedure on a quadratic instance at a fixed
/// penalty weight (`cfg.rho_init`; the schedule is pinned to constant)
/// and checks the qualitative decay of `F(θ^(k)) − F*`: the tail of the
/// gap sequence must be non-increasing and the final gap at most 90% of
/// the mid-run gap.
///
/// At fixed ρ the iteration converges to a point slightly biased away
/// from the penalty minimizer — each inner phase re-perturbs the
/// iterate — so the gap has a positive floor of order
/// `(inner displacement / outer progress)²`. The decay shape is
/// therefore checked in the regime where inner steps are mild relative
/// to outer ones; configs whose inner pull dominates stall at the floor
/// and fail, as does the no-outer-step control.
///
/// Step sizes beyond the instance's `1/L` (inner) or `1/L_F` (outer)
/// hypotheses are reported as [`CoreError::HypothesisViolated`].
pub fn check_lemma3_convex(
    instance: &QuadraticInstance,
    theta0: &ParameterVector,
    cfg: &OfmuConfig,
) -> Result<Lemma3Report> {
    if theta0.dim() != instance.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: instance.dim(),
            got: theta0.dim(),
        });
    }
    let rho = cfg.rho_init;
    let inner_l = instance.lipschitz();
    if cfg.inner_lr * inner_l > 1.0 + 1e-9 {
        return Err(CoreError::HypothesisViolated(alloc::format!(
            "inner_lr {} exceeds 1/L = {}",
            cfg.inner_lr,
            1.0 / inner_l
        )));
    }
    let outer_l = instance.penalty_lipschitz(rho);
    if cfg.outer_lr * outer_l > 1.0 + 1e-9 {
        return Err(CoreError::HypothesisViolated(alloc::format!(
            "outer_lr {} exceeds 1/L_F = {}",
            cfg.outer_lr,
            1.0 / outer_l
        )));
    }

    let mut pinned = cfg.clone();
    pinned.rho_growth = 1.0;
    pinned.rho_max = rho.max(pinned.rho_max);

    let mut driver = QuadraticDriver::new(instance);
    driver.track_rho = Some(rho);
    let _trajectory: Trajectory = run_two_loop(&mut driver, theta0, &pinned).map_err(|e| match e {
        RunError::Eval(core) => core,
        RunError::Diverged { outer, inner, .. } => CoreError::NumericalFailure {
            context: "two-loop run diverged",
            coordinate: outer.or(inner),
        },
    })?;

    let f_star = instance.penalty_value(&instance.penalty_minimizer(rho)?, rho);
    let gaps: Vec<f64> = driver
        .penalty_values
        .iter()
        .map(|f| f - f_star)
        .collect();
    if gaps.len() < 2 {
        return Err(invalid("decay check needs at least 2 outer iterations"));
    }

    let half = gaps.len() / 2;
    let tail_monotone = gaps[half..]
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
    let decayed = *gaps.last().unwrap() <= 0.9 * gaps[half] + 1e-15;
    Ok(Lemma3Report {
        rho,
        f_star,
        gaps,
        pass: tail_monotone && decayed,
    })
}

/// The canonical decay-check setup: the identity quadratic pair with
/// centers `c_r = (1, 0)`, `c_φ = (0, 0)`, start `(3, −2)`, 200 outer
/// iterations of 10 inner steps at weight `ρ = 0.5`, with inner steps
/// mild enough (total inner displacement ≈ 0.02% per iteration) that
/// the gap's bias floor stays far below the observable transient
/// throughout the run.
pub fn canonical_decay_setup() -> (QuadraticInstance, ParameterVector, OfmuConfig) {
    let instance = QuadraticInstance::new(
        SymMatrix::identity(2),
        SymMatrix::identity(2),
        ParameterVector::from_raw(vec![1.0, 0.0]),
        ParameterVector::zeros(2),
    )
    .expect("identity pair is positive definite");
    let theta0 = ParameterVector::from_raw(vec![3.0, -2.0]);
    let mut cfg = OfmuConfig::new(0);
    cfg.outer_iters = 200;
    cfg.inner_steps = 10;
    cfg.rho_init = 0.5;
    cfg.rho_growth = 1.0;
    cfg.rho_max = 0.5;
    cfg.inner_lr = 2e-5 / instance.lipschitz();
    cfg.outer_lr = 5e-3 / instance.penalty_lipschitz(cfg.rho_init);
    cfg.stationarity_tol = 1e-14;
    (instance, theta0, cfg)
}

/// Deterministic random symmetric positive-definite instance bank used
/// by tests and the verification harness: `A = MᵀM + I` with `M`
/// standard normal.
pub fn random_spd_matrix(dim: usize, seed: u64) -> SymMatrix {
    use rand::SeedableRng;
    use rand_distr::Distribution;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut m = vec![0.0; dim * dim];
    for v in m.iter_mut() {
        *v = rand_distr::StandardNormal.sample(&mut rng);
    }
    let mut data = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut s = if i == j { 1.0 } else { 0.0 };
            for k in 0..dim {
                s += m[k * dim + i] * m[k * dim + j];
            }
            data[i * dim + j] = s;
            data[j * dim + i] = s;
        }
    }
    SymMatrix { n: dim, data }
}

/// Random instance with spectra pinned to `[0.7, 1.0]` and unit
/// distance between the two centers.
///
/// The stationarity residual at the exact penalty minimizer behaves
/// like `‖A_φ⁻¹ A_r (c_r − c_φ)‖ / 2ρ` for large ρ, so driving it
/// below `1e-4` by `ρ = 1e4` needs that constant kept near one; this
/// generator bounds it by `1/0.7` while staying genuinely random.
pub fn well_conditioned_instance(dim: usize, seed: u64) -> QuadraticInstance {
    use rand::SeedableRng;
    use rand_distr::Distribution;
    let temper = |m: SymMatrix| {
        let scale = 0.3 / m.largest_eigenvalue();
        let n = m.dim();
        let mut data: Vec<f64> = m.data.iter().map(|v| v * scale).collect();
        for i in 0..n {
            data[i * n + i] += 0.7;
        }
        SymMatrix { n, data }
    };
    let retain_matrix = temper(random_spd_matrix(dim, seed.wrapping_mul(2).wrapping_add(1)));
    let inner_matrix = temper(random_spd_matrix(dim, seed.wrapping_mul(2).wrapping_add(2)));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(31));
    let direction: Vec<f64> = (0..dim)
        .map(|_| {
            let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
            z
        })
        .collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
    let retain_center = ParameterVector::from_raw(direction.iter().map(|v| v / norm).collect());
    let inner_center = ParameterVector::zeros(dim);
    QuadraticInstance::new(retain_matrix, inner_matrix, retain_center, inner_center)
        .expect("tempered matrices are positive definite")
}

/// Companion to [`random_spd_matrix`]: a full random instance.
pub fn random_instance(dim: usize, seed: u64) -> QuadraticInstance {
    use rand::SeedableRng;
    use rand_distr::Distribution;
    let retain_matrix = random_spd_matrix(dim, seed.wrapping_mul(2).wrapping_add(1));
    let inner_matrix = random_spd_matrix(dim, seed.wrapping_mul(2).wrapping_add(2));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(77));
    let mut centers = (0..2 * dim).map(|_| {
        let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
        z
    });
    let retain_center = ParameterVector::from_raw(centers.by_ref().take(dim).collect());
    let inner_center = ParameterVector::from_raw(centers.collect());
    QuadraticInstance::new(retain_matrix, inner_matrix, retain_center, inner_center)
        .expect("random SPD construction is positive definite")
}
