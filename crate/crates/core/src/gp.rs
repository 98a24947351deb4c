//! Single-fidelity Gaussian process regression.
//!
//! The model is a zero-mean process with the squared-exponential kernel and
//! homoscedastic Gaussian noise. Hyperparameters are found by multi-start
//! maximization of the penalized log marginal likelihood in log-parameter
//! space; fitting works on internally standardized data (inputs mapped to
//! the unit hypercube, response scaled to unit root mean square) and the
//! fitted parameters are mapped back to original units, so that model
//! formulas apply to the raw data exactly as written.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use ndarray::linalg::general_mat_mul;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design;
use crate::kernels::{add_noise_diagonal, Kernel, KernelError, NoiseSpec, SeKernel};
use crate::mle;
use crate::numerics::{cholesky, CholeskyFactor, NumericsError};

/// Penalty weight on the distance of log-parameters from their initial
/// guess; stands in for the hierarchical priors of the wider literature.
const LOG_PENALTY: f64 = 1e-3;

/// Half-width of the box around the initial log-parameters.
const LOG_BOX: f64 = 10.0;

/// Default relative nugget floor: σ² ≥ 1e-10 · mean(y²). Keeps the noise
/// variance away from exact zero without visibly perturbing noiseless
/// interpolation at training points; the jitter ladder backstops
/// factorization when even this is too small.
const NUGGET_FLOOR_REL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum GpError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("every optimizer start failed factorization")]
    AllStartsFailed,
    #[error("query dimension {found} does not match training dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Training sample: inputs X (one row per point) and responses y.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array1<f64>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self, GpError> {
        if x.nrows() != y.len() {
            return Err(GpError::InvalidData(format!(
                "{} input rows but {} responses",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() == 0 {
            return Err(GpError::InvalidData("empty sample".into()));
        }
        if x.ncols() == 0 {
            return Err(GpError::InvalidData("zero input dimension".into()));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(GpError::InvalidData("non-finite values".into()));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// Knobs for the hyperparameter search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    /// Number of optimizer starts; the first is the heuristic initial
    /// point, the rest are space-filling perturbations of it.
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Lower bound for the noise variance, in response units squared.
    /// Defaults to 1e-8 · mean(y²).
    pub nugget_floor: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iters: 200,
            seed: 0,
            nugget_floor: None,
        }
    }
}

/// Outcome of a hyperparameter search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    /// Final log marginal likelihood in original units.
    pub log_likelihood: f64,
    /// Final penalized objective (internal standardized space).
    pub penalized_objective: f64,
    /// Penalized objective at the heuristic start point.
    pub initial_objective: f64,
    pub restarts_used: usize,
    pub restarts_failed: usize,
    /// Iterations of the winning restart.
    pub iterations: usize,
    pub converged: bool,
    /// Final objective ≥ start objective held on every successful restart.
    pub monotone_improvement: bool,
}

/// Fitted single-fidelity model. Immutable after construction.
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: SeKernel,
    noise: NoiseSpec,
    training: Dataset,
    factor: CholeskyFactor,
    weights: Array1<f64>,
    fit_report: FitReport,
}

impl GpModel {
    /// Maximum likelihood fit, Eq. (1)-style objective with a quadratic
    /// log-parameter penalty.
    pub fn fit(data: Dataset, config: &FitConfig) -> Result<Self, GpError> {
        let std = Standardizer::from_data(&data);
        let x_std = std.transform_x(data.x());
        let y_std = &data.y / std.y_scale;

        let d = data.dim();
        let floor_std = config
            .nugget_floor
            .map(|f| f / (std.y_scale * std.y_scale))
            .unwrap_or(NUGGET_FLOOR_REL)
            .max(f64::MIN_POSITIVE);

        // anchor: θ₀² = mean(y_std²) = 1, θ_k = 1 per unit cube, σ² = 1e-2
        let mut anchor = vec![0.0; d + 2];
        anchor[d + 1] = (1e-2f64).ln();
        let mut lower: Vec<f64> = anchor.iter().map(|v| v - LOG_BOX).collect();
        let mut upper: Vec<f64> = anchor.iter().map(|v| v + LOG_BOX).collect();
        lower[d + 1] = floor_std.ln();
        upper[d + 1] = upper[d + 1].max(lower[d + 1] + 1.0);

        let mut obj = SeObjective {
            x: x_std,
            y: y_std,
            anchor: anchor.clone(),
        };

        let starts = build_starts(&anchor, config.restarts.max(1), config.seed);
        let best = run_starts(&mut obj, &starts, &lower, &upper, config.max_iters);
        let (outcome, report_counters) = best.ok_or(GpError::AllStartsFailed)?;

        let (kernel, noise) = std.destandardize(&outcome.p, d);
        let mut model = Self::from_parts(kernel, noise, data)?;
        model.fit_report = FitReport {
            log_likelihood: model.fit_report.log_likelihood,
            penalized_objective: outcome.value,
            initial_objective: outcome.start_value,
            restarts_used: report_counters.0,
            restarts_failed: report_counters.1,
            iterations: outcome.iterations,
            converged: outcome.converged,
            monotone_improvement: report_counters.2,
        };
        Ok(model)
    }

    /// Assembles the cached factor and weight vector for fixed parameters.
    pub fn from_parts(
        kernel: SeKernel,
        noise: NoiseSpec,
        training: Dataset,
    ) -> Result<Self, GpError> {
        if kernel.dim() != training.dim() {
            return Err(GpError::DimensionMismatch {
                expected: kernel.dim(),
                found: training.dim(),
            });
        }
        let gram = kernel.cov_matrix(training.x(), training.x())?;
        let spd = add_noise_diagonal(gram, noise)?;
        let factor = cholesky(&spd)?;
        let weights = factor.solve_vec(training.y())?;
        let n = training.len() as f64;
        let quad = training.y().dot(&weights);
        let ll = -0.5 * (n * LN_2PI + factor.log_det() + quad);
        Ok(Self {
            kernel,
            noise,
            training,
            factor,
            weights,
            fit_report: FitReport {
                log_likelihood: ll,
                penalized_objective: ll,
                initial_objective: ll,
                restarts_used: 0,
                restarts_failed: 0,
                iterations: 0,
                converged: true,
                monotone_improvement: true,
            },
        })
    }

    /// Posterior mean and covariance at the query points, Eq. (2)–(3).
    pub fn predict(
        &self,
        xs: ArrayView2<'_, f64>,
    ) -> Result<(Array1<f64>, Array2<f64>), GpError> {
        if xs.ncols() != self.training.dim() {
            return Err(GpError::DimensionMismatch {
                expected: self.training.dim(),
                found: xs.ncols(),
            });
        }
        let cross = self.kernel.cov_matrix(xs, self.training.x())?;
        let mean = cross.dot(&self.weights);

        let mut cov = self.kernel.cov_matrix(xs, xs)?;
        for i in 0..cov.nrows() {
            cov[[i, i]] += self.noise.variance();
        }
        let v = crate::numerics::solve_lower_mat(self.factor.l(), cross.t().as_standard_layout().view())?;
        general_mat_mul(-1.0, &v.t(), &v.view(), 1.0, &mut cov);
        symmetrize_and_clamp(&mut cov);
        Ok((mean, cov))
    }

    pub fn kernel(&self) -> &SeKernel {
        &self.kernel
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }

    pub fn training(&self) -> &Dataset {
        &self.training
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    pub fn fit_report(&self) -> &FitReport {
        &self.fit_report
    }
}

pub(crate) const LN_2PI: f64 = 1.8378770664093453;

/// Log marginal likelihood of the data under the given kernel and noise,
/// −½(n·log 2π + log|K| + yᵀK⁻¹y) with log|K| read off the factor.
pub fn log_likelihood(
    data: &Dataset,
    kernel: &SeKernel,
    noise: NoiseSpec,
) -> Result<f64, GpError> {
    let gram = kernel.cov_matrix(data.x(), data.x())?;
    let spd = add_noise_diagonal(gram, noise)?;
    let factor = cholesky(&spd)?;
    let alpha = factor.solve_vec(data.y())?;
    let n = data.len() as f64;
    Ok(-0.5 * (n * LN_2PI + factor.log_det() + data.y().dot(&alpha)))
}

/// Log likelihood together with its gradient with respect to the
/// log-parameters [log θ₀², log θ₁², …, log θ_d², log σ²].
pub fn log_likelihood_with_grad(
    data: &Dataset,
    kernel: &SeKernel,
    noise: NoiseSpec,
) -> Result<(f64, Vec<f64>), GpError> {
    let eval = eval_loglik(data.x(), data.y(), kernel, noise.variance())
        .ok_or(GpError::AllStartsFailed)?;
    let grads = loglik_param_grads(data.x(), kernel, noise.variance(), &eval);
    Ok((eval.value, grads))
}

// ---------------------------------------------------------------------------
// internals shared with the variable-fidelity fit

pub(crate) struct LikEval {
    pub value: f64,
    pub factor: CholeskyFactor,
    pub alpha: Array1<f64>,
    pub kf: Array2<f64>,
}

/// Likelihood evaluation for arbitrary points/response under (kernel, σ²).
/// None when the Gram matrix cannot be factorized even with jitter.
pub(crate) fn eval_loglik(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    kernel: &SeKernel,
    sigma_sq: f64,
) -> Option<LikEval> {
    let kf = kernel.cov_matrix(x, x).ok()?;
    let mut k = kf.clone();
    for i in 0..k.nrows() {
        k[[i, i]] += sigma_sq;
    }
    let factor = crate::numerics::cholesky_with_jitter(k.view()).ok()?;
    let alpha = factor.solve_vec(y).ok()?;
    let n = y.len() as f64;
    let value = -0.5 * (n * LN_2PI + factor.log_det() + y.dot(&alpha));
    Some(LikEval {
        value,
        factor,
        alpha,
        kf,
    })
}

/// Gradient of the log likelihood with respect to the log-parameters.
///
/// Uses ∂ℓ/∂p = ½·(αᵀ(∂K/∂p)α − tr(K⁻¹·∂K/∂p)) with the two terms fused
/// into one pass over the matrix entries; K⁻¹ is formed explicitly from the
/// triangular inverse of the factor.
pub(crate) fn loglik_param_grads(
    x: ArrayView2<'_, f64>,
    kernel: &SeKernel,
    sigma_sq: f64,
    eval: &LikEval,
) -> Vec<f64> {
    let n = x.nrows();
    let d = kernel.dim();
    let linv = crate::numerics::lower_triangular_inverse(eval.factor.l());
    let mut kinv = Array2::zeros((n, n));
    general_mat_mul(1.0, &linv.t(), &linv.view(), 0.0, &mut kinv);

    let weights = kernel.length_weights();
    let alpha = &eval.alpha;
    let mut grads = vec![0.0; d + 2];
    let mut trace_kinv = 0.0;
    for i in 0..n {
        let xi = x.row(i);
        for j in 0..=i {
            let w = alpha[i] * alpha[j] - kinv[[i, j]];
            let pair = if i == j { 1.0 } else { 2.0 };
            let wk = w * eval.kf[[i, j]] * pair;
            grads[0] += wk;
            let xj = x.row(j);
            for k in 0..d {
                let diff = xi[k] - xj[k];
                grads[1 + k] -= wk * weights[k] * weights[k] * diff * diff;
            }
        }
        trace_kinv += kinv[[i, i]];
    }
    let alpha_sq = alpha.dot(alpha);
    grads[d + 1] = sigma_sq * (alpha_sq - trace_kinv);
    for g in grads.iter_mut() {
        *g *= 0.5;
    }
    grads
}

/// Per-dimension affine map of X onto the unit cube plus a root-mean-square
/// scale for y. The response is deliberately not centered: the model is a
/// zero-mean process and predictions must revert to zero far from data.
pub(crate) struct Standardizer {
    pub x_lo: Vec<f64>,
    pub x_range: Vec<f64>,
    pub y_scale: f64,
}

impl Standardizer {
    pub fn from_data(data: &Dataset) -> Self {
        Self::from_points(data.x(), data.y())
    }

    pub fn from_points(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Self {
        let d = x.ncols();
        let mut x_lo = vec![0.0; d];
        let mut x_range = vec![1.0; d];
        for k in 0..d {
            let col = x.column(k);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            x_lo[k] = lo;
            x_range[k] = if hi - lo > 0.0 { hi - lo } else { 1.0 };
        }
        let rms = (y.iter().map(|v| v * v).sum::<f64>() / y.len().max(1) as f64).sqrt();
        Self {
            x_lo,
            x_range,
            y_scale: if rms > 0.0 { rms } else { 1.0 },
        }
    }

    pub fn transform_x(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for k in 0..row.len() {
                row[k] = (row[k] - self.x_lo[k]) / self.x_range[k];
            }
        }
        out
    }

    /// Maps optimized log-parameters back to original units:
    /// θ₀² and σ² pick up the squared response scale, each θ_k divides by
    /// its coordinate range.
    pub fn destandardize(&self, p: &[f64], d: usize) -> (SeKernel, NoiseSpec) {
        let theta0_sq = p[0].exp() * self.y_scale * self.y_scale;
        let weights: Vec<f64> = (0..d)
            .map(|k| (0.5 * p[1 + k]).exp() / self.x_range[k])
            .collect();
        let sigma_sq = p[d + 1].exp() * self.y_scale * self.y_scale;
        let kernel = SeKernel::new(theta0_sq.sqrt(), weights).expect("positive parameters");
        let noise = NoiseSpec::new(sigma_sq).expect("non-negative variance");
        (kernel, noise)
    }
}

struct SeObjective {
    x: Array2<f64>,
    y: Array1<f64>,
    anchor: Vec<f64>,
}

impl SeObjective {
    fn kernel_of(&self, p: &[f64]) -> (SeKernel, f64) {
        let d = self.x.ncols();
        let theta0 = (0.5 * p[0]).exp();
        let weights: Vec<f64> = (0..d).map(|k| (0.5 * p[1 + k]).exp()).collect();
        let sigma_sq = p[d + 1].exp();
        (
            SeKernel::new(theta0, weights).expect("positive parameters"),
            sigma_sq,
        )
    }

    /// Quadratic pull of the kernel log-parameters toward the heuristic
    /// anchor; the noise variance is left to the likelihood and its floor.
    fn penalty(&self, p: &[f64]) -> f64 {
        let kernel_dims = self.x.ncols() + 1;
        LOG_PENALTY
            * p.iter()
                .zip(&self.anchor)
                .take(kernel_dims)
                .map(|(v, a)| (v - a) * (v - a))
                .sum::<f64>()
    }
}

impl mle::Objective for SeObjective {
    fn dim(&self) -> usize {
        self.x.ncols() + 2
    }

    fn value(&mut self, p: &[f64]) -> Option<f64> {
        let (kernel, sigma_sq) = self.kernel_of(p);
        let eval = eval_loglik(self.x.view(), self.y.view(), &kernel, sigma_sq)?;
        Some(eval.value - self.penalty(p))
    }

    fn value_grad(&mut self, p: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (kernel, sigma_sq) = self.kernel_of(p);
        let eval = eval_loglik(self.x.view(), self.y.view(), &kernel, sigma_sq)?;
        let mut grads = loglik_param_grads(self.x.view(), &kernel, sigma_sq, &eval);
        let kernel_dims = self.x.ncols() + 1;
        for (g, (v, a)) in grads
            .iter_mut()
            .zip(p.iter().zip(&self.anchor))
            .take(kernel_dims)
        {
            *g -= 2.0 * LOG_PENALTY * (v - a);
        }
        Some((eval.value - self.penalty(p), grads))
    }
}

/// The heuristic start followed by space-filling perturbations of it.
pub(crate) fn build_starts(anchor: &[f64], restarts: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut starts = vec![anchor.to_vec()];
    if restarts > 1 {
        let bounds: Vec<(f64, f64)> = vec![(-2.0, 2.0); anchor.len()];
        let jitters = design::lhs(restarts - 1, &bounds, seed ^ 0x9e3779b97f4a7c15);
        for row in jitters.rows() {
            starts.push(
                anchor
                    .iter()
                    .zip(row.iter())
                    .map(|(a, j)| a + j)
                    .collect(),
            );
        }
    }
    starts
}

/// Runs every start, keeping the best outcome by penalized objective (ties
/// broken by start order). Returns the winner plus
/// (starts used, starts failed, monotone improvement everywhere).
pub(crate) fn run_starts<O: mle::Objective>(
    obj: &mut O,
    starts: &[Vec<f64>],
    lower: &[f64],
    upper: &[f64],
    max_iters: usize,
) -> Option<(mle::Outcome, (usize, usize, bool))> {
    let mut best: Option<mle::Outcome> = None;
    let mut failed = 0;
    let mut monotone = true;
    for start in starts {
        match mle::maximize(obj, start, lower, upper, max_iters) {
            Some(out) => {
                monotone &= out.value >= out.start_value;
                if best.as_ref().map_or(true, |b| out.value > b.value) {
                    best = Some(out);
                }
            }
            None => failed += 1,
        }
    }
    best.map(|b| (b, (starts.len(), failed, monotone)))
}

/// Symmetrizes a posterior covariance in place and clamps small negative
/// diagonal values (≥ −1e-10 by construction) to zero.
pub(crate) fn symmetrize_and_clamp(cov: &mut Array2<f64>) {
    let n = cov.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (cov[[i, j]] + cov[[j, i]]);
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
        if cov[[i, i]] < 0.0 {
            cov[[i, i]] = 0.0;
        }
    }
}
