//! Variable-fidelity cokriging with two fidelity levels.
//!
//! The data model links the fidelities through y_h = ρ·y_l + y_d with
//! independent processes y_l and y_d. Fitting follows the standard
//! three-step procedure: estimate the low process on the low sample, predict
//! it at the high points, then estimate the difference process and ρ jointly
//! by likelihood over the residual sample with the residuals recomputed for
//! every candidate ρ. The low-process parameters are frozen after step one.

use ndarray::linalg::general_mat_mul;
use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::gp::{
    self, build_starts, eval_loglik, loglik_param_grads, run_starts, symmetrize_and_clamp,
    Dataset, FitConfig, FitReport, GpError, GpModel, Standardizer,
};
use crate::kernels::{Kernel, NoiseSpec, SeKernel};
use crate::mle;
use crate::numerics::{cholesky, CholeskyFactor, SpdMatrix};

const LOG_PENALTY: f64 = 1e-3;
const LOG_BOX: f64 = 10.0;
const NUGGET_FLOOR_REL: f64 = 1e-10;
const RHO_BOUND: f64 = 1e3;

/// Two training samples over a shared input space.
#[derive(Debug, Clone)]
pub struct VfDataset {
    low: Dataset,
    high: Dataset,
}

impl VfDataset {
    pub fn new(low: Dataset, high: Dataset) -> Result<Self, GpError> {
        if low.dim() != high.dim() {
            return Err(GpError::DimensionMismatch {
                expected: low.dim(),
                found: high.dim(),
            });
        }
        Ok(Self { low, high })
    }

    pub fn low(&self) -> &Dataset {
        &self.low
    }

    pub fn high(&self) -> &Dataset {
        &self.high
    }

    pub fn dim(&self) -> usize {
        self.low.dim()
    }

    /// n_l + n_h.
    pub fn len(&self) -> usize {
        self.low.len() + self.high.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// (y_l; y_h).
    pub fn stacked_y(&self) -> Array1<f64> {
        concatenate![Axis(0), self.low.y(), self.high.y()]
    }
}

/// Residual sample of step three: the high inputs with y_h − ρ·ŷ_l(X_h).
#[derive(Debug, Clone)]
pub struct DiffDataset {
    pub x: Array2<f64>,
    pub y_diff: Array1<f64>,
    pub rho: f64,
}

impl DiffDataset {
    pub fn new(high: &Dataset, low_pred: ArrayView1<'_, f64>, rho: f64) -> Self {
        let y_diff = &high.y() - &(&low_pred * rho);
        Self {
            x: high.x().to_owned(),
            y_diff,
            rho,
        }
    }
}

/// Joint covariance of the stacked sample (y_l; y_h):
///
/// [ K_l(Xl,Xl)+σ_l²I            ρ·K_l(Xl,Xh)                        ]
/// [ ρ·K_l(Xh,Xl)                ρ²·K_l(Xh,Xh)+K_d(Xh,Xh)+(ρ²σ_l²+σ_d²)I ]
pub fn assemble_joint_cov(
    low_kernel: &SeKernel,
    low_noise: NoiseSpec,
    diff_kernel: &SeKernel,
    diff_noise: NoiseSpec,
    rho: f64,
    x_low: ArrayView2<'_, f64>,
    x_high: ArrayView2<'_, f64>,
) -> Result<SpdMatrix, GpError> {
    let nl = x_low.nrows();
    let nh = x_high.nrows();
    let n = nl + nh;
    let mut k = Array2::zeros((n, n));

    let ll = low_kernel.cov_matrix(x_low, x_low)?;
    k.slice_mut(s![..nl, ..nl]).assign(&ll);
    let lh = low_kernel.cov_matrix(x_low, x_high)?;
    k.slice_mut(s![..nl, nl..]).assign(&(&lh * rho));
    k.slice_mut(s![nl.., ..nl]).assign(&(&lh.t() * rho));
    let hh_low = low_kernel.cov_matrix(x_high, x_high)?;
    let hh_diff = diff_kernel.cov_matrix(x_high, x_high)?;
    k.slice_mut(s![nl.., nl..])
        .assign(&(&(&hh_low * (rho * rho)) + &hh_diff));

    let high_nugget = rho * rho * low_noise.variance() + diff_noise.variance();
    for i in 0..nl {
        k[[i, i]] += low_noise.variance();
    }
    for i in nl..n {
        k[[i, i]] += high_nugget;
    }
    Ok(SpdMatrix::new(k)?)
}

/// Fitted cokriging model; immutable after construction.
#[derive(Debug, Clone)]
pub struct VfgpModel {
    low_kernel: SeKernel,
    low_noise: NoiseSpec,
    diff_kernel: SeKernel,
    diff_noise: NoiseSpec,
    rho: f64,
    training: VfDataset,
    joint_factor: CholeskyFactor,
    weights: Array1<f64>,
    low_fit: FitReport,
    diff_fit: FitReport,
}

impl VfgpModel {
    /// Three-step estimation, then assembly of the joint factor and weights.
    pub fn fit(data: VfDataset, config: &FitConfig) -> Result<Self, GpError> {
        if data.low.len() < 2 || data.high.len() < 2 {
            return Err(GpError::InvalidData(
                "need at least two points per fidelity".into(),
            ));
        }
        // step 1: low process on the low sample
        let low_model = GpModel::fit(data.low.clone(), config)?;
        // step 2: posterior mean of the low process at the high inputs
        let (low_pred, _) = low_model.predict(data.high.x())?;
        // step 3: difference process and rho by joint likelihood search
        let (diff_kernel, diff_noise, rho, diff_fit) =
            fit_diff_process(&data.high, low_pred.view(), config)?;

        let low_fit = low_model.fit_report().clone();
        let (low_kernel, low_noise) = (low_model.kernel().clone(), low_model.noise());
        let mut model = Self::from_parts(
            low_kernel, low_noise, diff_kernel, diff_noise, rho, data,
        )?;
        model.low_fit = low_fit;
        model.diff_fit = diff_fit;
        Ok(model)
    }

    /// Builds the joint factor and weight vector for fixed parameters.
    pub fn from_parts(
        low_kernel: SeKernel,
        low_noise: NoiseSpec,
        diff_kernel: SeKernel,
        diff_noise: NoiseSpec,
        rho: f64,
        training: VfDataset,
    ) -> Result<Self, GpError> {
        if low_kernel.dim() != training.dim() || diff_kernel.dim() != training.dim() {
            return Err(GpError::DimensionMismatch {
                expected: training.dim(),
                found: low_kernel.dim(),
            });
        }
        let joint = assemble_joint_cov(
            &low_kernel,
            low_noise,
            &diff_kernel,
            diff_noise,
            rho,
            training.low.x(),
            training.high.x(),
        )?;
        let joint_factor = cholesky(&joint)?;
        let weights = joint_factor.solve_vec(training.stacked_y().view())?;
        let placeholder = FitReport {
            log_likelihood: 0.0,
            penalized_objective: 0.0,
            initial_objective: 0.0,
            restarts_used: 0,
            restarts_failed: 0,
            iterations: 0,
            converged: true,
            monotone_improvement: true,
        };
        Ok(Self {
            low_kernel,
            low_noise,
            diff_kernel,
            diff_noise,
            rho,
            training,
            joint_factor,
            weights,
            low_fit: placeholder.clone(),
            diff_fit: placeholder,
        })
    }

    /// Cross-covariances between query points and the stacked sample:
    /// [ρ·K_l(X*,Xl), ρ²·K_l(X*,Xh)+K_d(X*,Xh)].
    pub fn cross_cov(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>, GpError> {
        let nl = self.training.low.len();
        let n = self.training.len();
        let mut cross = Array2::zeros((xs.nrows(), n));
        let low = self.low_kernel.cov_matrix(xs, self.training.low.x())?;
        cross.slice_mut(s![.., ..nl]).assign(&(&low * self.rho));
        let high_low = self.low_kernel.cov_matrix(xs, self.training.high.x())?;
        let high_diff = self.diff_kernel.cov_matrix(xs, self.training.high.x())?;
        cross
            .slice_mut(s![.., nl..])
            .assign(&(&(&high_low * (self.rho * self.rho)) + &high_diff));
        Ok(cross)
    }

    /// Posterior mean and covariance of the high-fidelity response.
    ///
    /// The prior block is ρ²·K_l(X*,X*) + K_d(X*,X*) plus the response noise
    /// (ρ²σ_l² + σ_d²) on the diagonal, matching the single-fidelity
    /// convention of including observation noise in the predictive prior.
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
        let cross = self.cross_cov(xs)?;
        let mean = cross.dot(&self.weights);

        let low_prior = self.low_kernel.cov_matrix(xs, xs)?;
        let diff_prior = self.diff_kernel.cov_matrix(xs, xs)?;
        let mut cov = &(&low_prior * (self.rho * self.rho)) + &diff_prior;
        let nugget = self.high_noise_variance();
        for i in 0..cov.nrows() {
            cov[[i, i]] += nugget;
        }
        let v = crate::numerics::solve_lower_mat(
            self.joint_factor.l(),
            cross.t().as_standard_layout().view(),
        )?;
        general_mat_mul(-1.0, &v.t(), &v.view(), 1.0, &mut cov);
        symmetrize_and_clamp(&mut cov);
        Ok((mean, cov))
    }

    /// Total noise variance on high-fidelity observations, ρ²σ_l² + σ_d².
    pub fn high_noise_variance(&self) -> f64 {
        self.rho * self.rho * self.low_noise.variance() + self.diff_noise.variance()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn low_kernel(&self) -> &SeKernel {
        &self.low_kernel
    }

    pub fn low_noise(&self) -> NoiseSpec {
        self.low_noise
    }

    pub fn diff_kernel(&self) -> &SeKernel {
        &self.diff_kernel
    }

    pub fn diff_noise(&self) -> NoiseSpec {
        self.diff_noise
    }

    pub fn training(&self) -> &VfDataset {
        &self.training
    }

    pub fn joint_factor(&self) -> &CholeskyFactor {
        &self.joint_factor
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    pub fn low_fit(&self) -> &FitReport {
        &self.low_fit
    }

    pub fn diff_fit(&self) -> &FitReport {
        &self.diff_fit
    }

    /// Replaces the joint factor with one carrying an explicit inverse.
    pub fn ensure_factor_inverse(&mut self) {
        if self.joint_factor.inverse().is_none() {
            self.joint_factor = self.joint_factor.clone().with_inverse();
        }
    }
}

/// Step-3 search over the difference-process parameters and ρ. The residual
/// y_h − ρ·ŷ_l(X_h) is recomputed at every objective evaluation.
fn fit_diff_process(
    high: &Dataset,
    low_pred: ArrayView1<'_, f64>,
    config: &FitConfig,
) -> Result<(SeKernel, NoiseSpec, f64, FitReport), GpError> {
    let d = high.dim();
    let initial_residual = &high.y() - &low_pred;
    let std = Standardizer::from_points(high.x(), initial_residual.view());
    let x_std = std.transform_x(high.x());
    let y_high = &high.y() / std.y_scale;
    let y_low_pred = &low_pred / std.y_scale;

    let floor_std = config
        .nugget_floor
        .map(|f| f / (std.y_scale * std.y_scale))
        .unwrap_or(NUGGET_FLOOR_REL)
        .max(f64::MIN_POSITIVE);

    // parameters: [log θ₀², log θ_1²..log θ_d², log σ², ρ]
    let mut anchor = vec![0.0; d + 3];
    anchor[d + 1] = (1e-2f64).ln();
    anchor[d + 2] = 1.0;
    let mut lower: Vec<f64> = anchor.iter().map(|v| v - LOG_BOX).collect();
    let mut upper: Vec<f64> = anchor.iter().map(|v| v + LOG_BOX).collect();
    lower[d + 1] = floor_std.ln();
    upper[d + 1] = upper[d + 1].max(lower[d + 1] + 1.0);
    lower[d + 2] = -RHO_BOUND;
    upper[d + 2] = RHO_BOUND;

    let mut obj = DiffObjective {
        x: x_std,
        y_high,
        y_low_pred,
        anchor: anchor.clone(),
    };
    let starts = build_starts(&anchor, config.restarts.max(1), config.seed ^ 0xd1f);
    let best = run_starts(&mut obj, &starts, &lower, &upper, config.max_iters);
    let (outcome, (used, failed, monotone)) = best.ok_or(GpError::AllStartsFailed)?;

    let (kernel, noise) = std.destandardize(&outcome.p, d);
    let rho = outcome.p[d + 2];
    let report = FitReport {
        log_likelihood: outcome.value,
        penalized_objective: outcome.value,
        initial_objective: outcome.start_value,
        restarts_used: used,
        restarts_failed: failed,
        iterations: outcome.iterations,
        converged: outcome.converged,
        monotone_improvement: monotone,
    };
    Ok((kernel, noise, rho, report))
}

struct DiffObjective {
    x: Array2<f64>,
    y_high: Array1<f64>,
    y_low_pred: Array1<f64>,
    anchor: Vec<f64>,
}

impl DiffObjective {
    fn unpack(&self, p: &[f64]) -> (SeKernel, f64, f64) {
        let d = self.x.ncols();
        let kernel = SeKernel::new(
            (0.5 * p[0]).exp(),
            (0..d).map(|k| (0.5 * p[1 + k]).exp()).collect(),
        )
        .expect("positive parameters");
        (kernel, p[d + 1].exp(), p[d + 2])
    }

    fn residual(&self, rho: f64) -> Array1<f64> {
        &self.y_high - &(&self.y_low_pred * rho)
    }

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

impl mle::Objective for DiffObjective {
    fn dim(&self) -> usize {
        self.x.ncols() + 3
    }

    fn value(&mut self, p: &[f64]) -> Option<f64> {
        let (kernel, sigma_sq, rho) = self.unpack(p);
        let y = self.residual(rho);
        let eval = eval_loglik(self.x.view(), y.view(), &kernel, sigma_sq)?;
        Some(eval.value - self.penalty(p))
    }

    fn value_grad(&mut self, p: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (kernel, sigma_sq, rho) = self.unpack(p);
        let y = self.residual(rho);
        let eval = eval_loglik(self.x.view(), y.view(), &kernel, sigma_sq)?;
        let kernel_grads = loglik_param_grads(self.x.view(), &kernel, sigma_sq, &eval);

        let d = self.x.ncols();
        let mut grads = vec![0.0; d + 3];
        grads[..d + 2].copy_from_slice(&kernel_grads);
        let kernel_dims = d + 1;
        for (g, (v, a)) in grads
            .iter_mut()
            .zip(p.iter().zip(&self.anchor))
            .take(kernel_dims)
        {
            *g -= 2.0 * LOG_PENALTY * (v - a);
        }
        // ∂ℓ/∂ρ = ŷ_lᵀ·K⁻¹·y_d, since ∂y_d/∂ρ = −ŷ_l
        grads[d + 2] = self.y_low_pred.dot(&eval.alpha);
        Some((eval.value - self.penalty(p), grads))
    }
}

#[allow(unused)]
fn _gp_reexport_guard(_: &gp::FitConfig) {}
