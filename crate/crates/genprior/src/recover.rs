//! Measurement models, the empirical risk `f(x) = 1/2 |A G(x) - y|^2` and
//! its subgradient, descent-based recovery with a negation check, empirical
//! range-restricted isometry estimation, and multi-start landscape scans.
//!
//! The subgradient at `x` follows the active-row factorization of the
//! forward pass: `grad f(x) = (prod_i W^(i)_{+,x})^T A^T (A G(x) - y)`. The
//! risk is piecewise quadratic, so plain fixed-step descent can oscillate
//! across activation kinks; every iteration therefore insists on a strict
//! loss decrease, halving the step a bounded number of times before giving
//! up. The negation check addresses the one spurious descent direction the
//! landscape admits: a rescaled negative multiple of the true latent point.
//! Jumping to `-x` whenever that strictly lowers the risk escapes the
//! mirrored basin without otherwise disturbing descent.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::network::{hidden_trace, GenerativeNetwork, LatentVector, NetworkError};
use crate::sampling::{derive_seed, gaussian_vector, rng_from_seed};
use crate::wdc::operator_norm;

/// Step halvings a single iteration may spend searching for strict decrease.
const MAX_BACKTRACKS: usize = 40;
/// Quadruple differences shorter than this are skipped as degenerate.
const DEGENERATE_DIFF: f64 = 1e-10;
/// Grid scans refuse to enumerate more starts than this.
const MAX_GRID_STARTS: usize = 100_000;

const TAG_RECOVER_INIT: u64 = 0x5245_494E;
const TAG_LANDSCAPE: u64 = 0x4C53_5254;
const TAG_RRIC: u64 = 0x5252_4943;

#[derive(Debug, Error)]
pub enum RecoverError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("noise level sigma must be finite and nonnegative, got {0}")]
    NegativeSigma(f64),
    #[error("descent-based recovery supports linear measurement variants only, got {0}")]
    UnsupportedVariant(&'static str),
    #[error("invalid recovery configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("isometry estimation needs at least one quadruple")]
    NoQuadruples,
    #[error("all sampled quadruples had degenerate range differences")]
    DegenerateQuadruples,
    #[error("grid scan of {0} starts exceeds the cap of {MAX_GRID_STARTS}")]
    GridTooLarge(usize),
}

/// How observations are formed from `A G(x*)`.
#[derive(Debug, Clone)]
pub enum MeasurementModel {
    /// `y = A G(x*)`.
    Linear { a: DMatrix<f64> },
    /// `y = A G(x*) + e` with a fixed noise vector.
    NoisyLinear { a: DMatrix<f64>, e: DVector<f64> },
    /// `y = A G(x*) + e`, `e ~ N(0, sigma^2)^m` drawn from the seed.
    GaussianNoise {
        a: DMatrix<f64>,
        sigma: f64,
        seed: u64,
    },
    /// `y = |A G(x*)|` entrywise.
    Phaseless { a: DMatrix<f64> },
    /// `y = sign(A G(x*) + xi + tau)` entrywise, with `sign(0) = +1`.
    OneBit {
        a: DMatrix<f64>,
        tau: DVector<f64>,
        xi: DVector<f64>,
    },
}

impl MeasurementModel {
    pub fn matrix(&self) -> &DMatrix<f64> {
        match self {
            Self::Linear { a }
            | Self::NoisyLinear { a, .. }
            | Self::GaussianNoise { a, .. }
            | Self::Phaseless { a }
            | Self::OneBit { a, .. } => a,
        }
    }

    pub fn measurements(&self) -> usize {
        self.matrix().nrows()
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Self::Linear { .. } => "linear",
            Self::NoisyLinear { .. } => "noisy_linear",
            Self::GaussianNoise { .. } => "gaussian_noise",
            Self::Phaseless { .. } => "phaseless",
            Self::OneBit { .. } => "one_bit",
        }
    }

    fn validate(&self, net: &GenerativeNetwork) -> Result<(), RecoverError> {
        let a = self.matrix();
        if a.ncols() != net.output_dim() {
            return Err(RecoverError::DimensionMismatch {
                expected: net.output_dim(),
                got: a.ncols(),
            });
        }
        let m = a.nrows();
        match self {
            Self::NoisyLinear { e, .. } if e.len() != m => {
                Err(RecoverError::DimensionMismatch {
                    expected: m,
                    got: e.len(),
                })
            }
            Self::GaussianNoise { sigma, .. } if !(*sigma >= 0.0 && sigma.is_finite()) => {
                Err(RecoverError::NegativeSigma(*sigma))
            }
            Self::OneBit { tau, xi, .. } if tau.len() != m || xi.len() != m => {
                Err(RecoverError::DimensionMismatch {
                    expected: m,
                    got: tau.len().max(xi.len()),
                })
            }
            _ => Ok(()),
        }
    }
}

/// `sign` with the deterministic tie rule `sign(0) = +1`.
fn sign_plus(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Forms the observation vector for the model. Gaussian noise is drawn
/// deterministically from the model's own seed, so repeated calls reproduce
/// the observation bit for bit.
pub fn measure(
    model: &MeasurementModel,
    net: &GenerativeNetwork,
    x_star: &LatentVector,
) -> Result<DVector<f64>, RecoverError> {
    model.validate(net)?;
    let g = net.forward(x_star)?;
    let ag = model.matrix() * g;
    Ok(match model {
        MeasurementModel::Linear { .. } => ag,
        MeasurementModel::NoisyLinear { e, .. } => ag + e,
        MeasurementModel::GaussianNoise { sigma, seed, .. } => {
            let mut rng = rng_from_seed(*seed);
            let e = gaussian_vector(ag.len(), &mut rng) * *sigma;
            ag + e
        }
        MeasurementModel::Phaseless { .. } => ag.map(f64::abs),
        MeasurementModel::OneBit { tau, xi, .. } => (ag + xi + tau).map(sign_plus),
    })
}

fn check_shapes(
    net: &GenerativeNetwork,
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    x: &LatentVector,
) -> Result<(), RecoverError> {
    if a.ncols() != net.output_dim() {
        return Err(RecoverError::DimensionMismatch {
            expected: net.output_dim(),
            got: a.ncols(),
        });
    }
    if y.len() != a.nrows() {
        return Err(RecoverError::DimensionMismatch {
            expected: a.nrows(),
            got: y.len(),
        });
    }
    if x.len() != net.latent_dim() {
        return Err(RecoverError::DimensionMismatch {
            expected: net.latent_dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// `f(x) = 1/2 |A G(x) - y|^2`.
pub fn empirical_risk(
    net: &GenerativeNetwork,
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    x: &LatentVector,
) -> Result<f64, RecoverError> {
    check_shapes(net, a, y, x)?;
    let r = a * net.forward(x)? - y;
    Ok(0.5 * r.norm_squared())
}

/// `(prod_i W^(i)_{+,x})^T A^T (A G(x) - y)`: the descent direction of the
/// piecewise-quadratic risk, exact wherever no pre-activation sits at zero.
pub fn risk_subgradient(
    net: &GenerativeNetwork,
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    x: &LatentVector,
) -> Result<DVector<f64>, RecoverError> {
    check_shapes(net, a, y, x)?;
    let trace = hidden_trace(net, x)?;
    let residual = a * net.forward(x)? - y;
    Ok(trace.active_product.transpose() * (a.transpose() * residual))
}

/// Parameters for descent-based recovery.
#[derive(Debug, Clone)]
pub struct RecoveryConfig {
    /// Fixed step size; `None` picks [`default_step_size`].
    pub step_size: Option<f64>,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Evaluate the risk at `-x` each iteration and jump when strictly
    /// smaller, escaping the mirrored spurious basin.
    pub negation_check: bool,
    pub restarts: usize,
    pub init_seed: u64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            step_size: None,
            max_iterations: 2000,
            gradient_tolerance: 1e-9,
            negation_check: true,
            restarts: 10,
            init_seed: 0,
        }
    }
}

impl RecoveryConfig {
    fn validate(&self) -> Result<(), RecoverError> {
        if let Some(s) = self.step_size {
            if !(s > 0.0 && s.is_finite()) {
                return Err(RecoverError::InvalidConfig("step_size must be positive"));
            }
        }
        if self.max_iterations == 0 {
            return Err(RecoverError::InvalidConfig("max_iterations must be positive"));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(RecoverError::InvalidConfig(
                "gradient_tolerance must be positive",
            ));
        }
        if self.restarts == 0 {
            return Err(RecoverError::InvalidConfig("restarts must be positive"));
        }
        Ok(())
    }
}

/// Conservative default step `0.25 / (d * L)` with `L` a power-iteration
/// estimate of `|A^T A| * prod_i |W^(i)|^2`, an upper bound on the local
/// smoothness away from activation boundaries. Falls back to 1 when the
/// estimate degenerates (for example `A = 0`).
pub fn default_step_size(net: &GenerativeNetwork, a: &DMatrix<f64>) -> f64 {
    let mut l = operator_norm(a).powi(2);
    for w in net.weights() {
        l *= operator_norm(w).powi(2);
    }
    let s = 0.25 / (net.depth() as f64 * l);
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

fn serialize_dvector<S: Serializer>(v: &LatentVector, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

/// Outcome of a recovery run (the best restart).
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryResult {
    #[serde(serialize_with = "serialize_dvector")]
    pub estimate: LatentVector,
    /// Final risk value at the estimate.
    pub loss: f64,
    /// Risk at the start of each accepted iteration; non-increasing.
    pub loss_trace: Vec<f64>,
    /// Subgradient norm aligned with `loss_trace`.
    pub gradient_trace: Vec<f64>,
    /// Iterate norm aligned with `loss_trace`.
    pub iterate_norms: Vec<f64>,
    /// `|estimate - truth| / |truth|` when a ground truth was supplied; the
    /// absolute error when the truth is the zero vector.
    pub relative_error: Option<f64>,
    /// Whether the subgradient norm fell below the tolerance.
    pub converged: bool,
    /// Whether the risk or subgradient went non-finite.
    pub diverged: bool,
}

impl RecoveryResult {
    /// Loss trace as CSV with columns `iteration,loss,gradient_norm`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,loss,gradient_norm\n");
        for (i, (l, g)) in self
            .loss_trace
            .iter()
            .zip(self.gradient_trace.iter())
            .enumerate()
        {
            out.push_str(&format!("{i},{l},{g}\n"));
        }
        out
    }
}

struct DescentOutcome {
    x: LatentVector,
    loss: f64,
    losses: Vec<f64>,
    grad_norms: Vec<f64>,
    norms: Vec<f64>,
    converged: bool,
    diverged: bool,
}

/// Strict-decrease descent from one start. Generic over the objective so the
/// landscape scan can swap in per-model losses.
fn descend_with<F, G>(
    start: LatentVector,
    step: f64,
    max_iterations: usize,
    tolerance: f64,
    negation_check: bool,
    risk: F,
    grad: G,
) -> Result<DescentOutcome, RecoverError>
where
    F: Fn(&LatentVector) -> Result<f64, RecoverError>,
    G: Fn(&LatentVector) -> Result<DVector<f64>, RecoverError>,
{
    let mut x = start;
    let mut loss = risk(&x)?;
    let mut gradient = grad(&x)?;
    let mut losses = Vec::new();
    let mut grad_norms = Vec::new();
    let mut norms = Vec::new();
    let mut converged = false;
    let mut diverged = false;
    loop {
        if !loss.is_finite() || gradient.iter().any(|z| !z.is_finite()) {
            diverged = true;
            break;
        }
        let gnorm = gradient.norm();
        losses.push(loss);
        grad_norms.push(gnorm);
        norms.push(x.norm());
        if gnorm < tolerance {
            converged = true;
            break;
        }
        if losses.len() > max_iterations {
            break;
        }
        if negation_check {
            let neg = -&x;
            let neg_loss = risk(&neg)?;
            if neg_loss < loss {
                x = neg;
                loss = neg_loss;
                gradient = grad(&x)?;
            }
        }
        let mut s = step;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let candidate = &x - &gradient * s;
            let candidate_loss = risk(&candidate)?;
            if candidate_loss < loss {
                x = candidate;
                loss = candidate_loss;
                gradient = grad(&x)?;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            // No strictly decreasing step exists at this scale: a kink or
            // the bottom of the current basin.
            break;
        }
    }
    Ok(DescentOutcome {
        x,
        loss,
        losses,
        grad_norms,
        norms,
        converged,
        diverged,
    })
}

fn relative_error_to(truth: Option<&LatentVector>, estimate: &LatentVector) -> Option<f64> {
    truth.map(|t| {
        let tn = t.norm();
        if tn > 0.0 {
            (estimate - t).norm() / tn
        } else {
            estimate.norm()
        }
    })
}

fn result_from(outcome: DescentOutcome, truth: Option<&LatentVector>) -> RecoveryResult {
    let relative_error = relative_error_to(truth, &outcome.x);
    RecoveryResult {
        estimate: outcome.x,
        loss: outcome.loss,
        loss_trace: outcome.losses,
        gradient_trace: outcome.grad_norms,
        iterate_norms: outcome.norms,
        relative_error,
        converged: outcome.converged,
        diverged: outcome.diverged,
    }
}

fn linear_variant_only(model: &MeasurementModel) -> Result<(), RecoverError> {
    match model {
        MeasurementModel::Linear { .. }
        | MeasurementModel::NoisyLinear { .. }
        | MeasurementModel::GaussianNoise { .. } => Ok(()),
        other => Err(RecoverError::UnsupportedVariant(other.variant_name())),
    }
}

/// Subgradient descent on the squared loss with restarts; returns the
/// lowest-loss restart (non-diverged results preferred, ties to the earliest
/// restart). Restarts run in parallel on seeds derived per restart index, so
/// the result does not depend on thread count.
pub fn recover(
    net: &GenerativeNetwork,
    model: &MeasurementModel,
    y: &DVector<f64>,
    config: &RecoveryConfig,
    ground_truth: Option<&LatentVector>,
) -> Result<RecoveryResult, RecoverError> {
    linear_variant_only(model)?;
    model.validate(net)?;
    config.validate()?;
    let a = model.matrix();
    if y.len() != a.nrows() {
        return Err(RecoverError::DimensionMismatch {
            expected: a.nrows(),
            got: y.len(),
        });
    }
    let step = config.step_size.unwrap_or_else(|| default_step_size(net, a));
    let k = net.latent_dim();
    let outcomes: Vec<DescentOutcome> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(config.init_seed, TAG_RECOVER_INIT, r as u64));
            let start = gaussian_vector(k, &mut rng);
            descend_with(
                start,
                step,
                config.max_iterations,
                config.gradient_tolerance,
                config.negation_check,
                |x| empirical_risk(net, a, y, x),
                |x| risk_subgradient(net, a, y, x),
            )
        })
        .collect::<Result<_, _>>()?;
    let best = outcomes
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| {
            a.diverged
                .cmp(&b.diverged)
                .then(a.loss.total_cmp(&b.loss))
                .then(i.cmp(j))
        })
        .map(|(_, o)| o)
        .expect("restarts >= 1 was validated");
    Ok(result_from(best, ground_truth))
}

/// Single descent from an explicit starting point; otherwise identical to
/// [`recover`] with one restart.
pub fn recover_with_init(
    net: &GenerativeNetwork,
    model: &MeasurementModel,
    y: &DVector<f64>,
    config: &RecoveryConfig,
    init: &LatentVector,
    ground_truth: Option<&LatentVector>,
) -> Result<RecoveryResult, RecoverError> {
    linear_variant_only(model)?;
    model.validate(net)?;
    config.validate()?;
    let a = model.matrix();
    if y.len() != a.nrows() {
        return Err(RecoverError::DimensionMismatch {
            expected: a.nrows(),
            got: y.len(),
        });
    }
    if init.len() != net.latent_dim() {
        return Err(RecoverError::DimensionMismatch {
            expected: net.latent_dim(),
            got: init.len(),
        });
    }
    let step = config.step_size.unwrap_or_else(|| default_step_size(net, a));
    let outcome = descend_with(
        init.clone(),
        step,
        config.max_iterations,
        config.gradient_tolerance,
        config.negation_check,
        |x| empirical_risk(net, a, y, x),
        |x| risk_subgradient(net, a, y, x),
    )?;
    Ok(result_from(outcome, ground_truth))
}

/// Empirical range-restricted isometry report.
#[derive(Debug, Clone, Serialize)]
pub struct RricReport {
    pub max_ratio_deviation: f64,
    /// Quadruples that survived the degeneracy filter.
    pub quadruples_tested: usize,
}

/// Max over sampled latent quadruples `(x, y, z, w)` of
/// `|d1^T A^T A d2 - d1^T d2| / (|d1| |d2|)` with `d1 = G(x) - G(y)` and
/// `d2 = G(z) - G(w)`, skipping quadruples where either difference nearly
/// vanishes. Quadruple 0 is aligned (`z = x`, `w = y`), which pins the
/// Cauchy-Schwarz endpoint: for `A = 0` the ratio there is exactly 1.
pub fn rric_deviation(
    a: &DMatrix<f64>,
    net: &GenerativeNetwork,
    quadruples: usize,
    seed: u64,
) -> Result<RricReport, RecoverError> {
    if quadruples == 0 {
        return Err(RecoverError::NoQuadruples);
    }
    if a.ncols() != net.output_dim() {
        return Err(RecoverError::DimensionMismatch {
            expected: net.output_dim(),
            got: a.ncols(),
        });
    }
    let k = net.latent_dim();
    let ratios: Vec<Option<f64>> = (0..quadruples)
        .into_par_iter()
        .map(|q| -> Result<Option<f64>, RecoverError> {
            let mut rng = rng_from_seed(derive_seed(seed, TAG_RRIC, q as u64));
            let (x, y, z, w) = if q == 0 {
                let x = gaussian_vector(k, &mut rng);
                let y = gaussian_vector(k, &mut rng);
                (x.clone(), y.clone(), x, y)
            } else {
                (
                    gaussian_vector(k, &mut rng),
                    gaussian_vector(k, &mut rng),
                    gaussian_vector(k, &mut rng),
                    gaussian_vector(k, &mut rng),
                )
            };
            let d1 = net.forward(&x)? - net.forward(&y)?;
            let d2 = net.forward(&z)? - net.forward(&w)?;
            let n1 = d1.norm();
            let n2 = d2.norm();
            if n1 < DEGENERATE_DIFF || n2 < DEGENERATE_DIFF {
                return Ok(None);
            }
            let lhs = (a * &d1).dot(&(a * &d2));
            let rhs = d1.dot(&d2);
            Ok(Some((lhs - rhs).abs() / (n1 * n2)))
        })
        .collect::<Result<_, _>>()?;
    let tested = ratios.iter().flatten().count();
    if tested == 0 {
        return Err(RecoverError::DegenerateQuadruples);
    }
    let max = ratios.into_iter().flatten().fold(0.0, f64::max);
    Ok(RricReport {
        max_ratio_deviation: max,
        quadruples_tested: tested,
    })
}

/// How landscape starts are produced.
#[derive(Debug, Clone, Copy)]
pub enum ScanMode {
    /// Lattice of `per_axis^k` points on `[-radius, radius]^k`; latent
    /// dimension at most 3.
    Grid { per_axis: usize, radius: f64 },
    /// Independent Gaussian starts on derived seeds.
    Restarts { count: usize },
}

/// One cluster of final iterates.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterSummary {
    /// Representative final iterate (the lowest-loss member encountered
    /// first in the canonical order).
    pub center: Vec<f64>,
    pub size: usize,
    pub min_loss: f64,
}

/// Cluster census of descent endpoints.
#[derive(Debug, Clone, Serialize)]
pub struct LandscapeReport {
    /// Clusters in ascending order of their representative's loss.
    pub clusters: Vec<ClusterSummary>,
    pub starts: usize,
    pub cluster_radius: f64,
}

impl LandscapeReport {
    /// Scaling `c` of a cluster sitting along the negative ray `-c x*`, if
    /// one exists: the representative must point within ~18 degrees of
    /// `-x*`. Reported empirically because no closed form for the scaling
    /// is available.
    pub fn negative_scaling(&self, x_star: &LatentVector) -> Option<f64> {
        let xs = x_star.norm();
        if xs == 0.0 {
            return None;
        }
        for cluster in &self.clusters {
            let v = DVector::from_column_slice(&cluster.center);
            let n = v.norm();
            if n > 0.0 && v.dot(x_star) / (n * xs) < -0.95 {
                return Some(n / xs);
            }
        }
        None
    }
}

/// Runs descent (without the negation check, so both basins stay visible)
/// from every start and clusters the final iterates by distance. The cluster
/// radius is `1e-2 |x*|` when a ground truth is supplied, else `1e-2` times
/// the larger of 1 and the median final iterate norm. Clustering happens in
/// a canonical order (loss, then coordinates), so the report is independent
/// of scheduling.
///
/// Phaseless models descend on `1/2 | |A G(x)| - y |^2`; one-bit models use
/// the sign-vector squared loss, which is locally constant, so every start
/// is already critical and clusters reflect the starts themselves.
pub fn landscape_scan(
    net: &GenerativeNetwork,
    model: &MeasurementModel,
    y: &DVector<f64>,
    mode: ScanMode,
    config: &RecoveryConfig,
    ground_truth: Option<&LatentVector>,
    seed: u64,
) -> Result<LandscapeReport, RecoverError> {
    model.validate(net)?;
    config.validate()?;
    let a = model.matrix();
    if y.len() != a.nrows() {
        return Err(RecoverError::DimensionMismatch {
            expected: a.nrows(),
            got: y.len(),
        });
    }
    let k = net.latent_dim();
    let starts: Vec<LatentVector> = match mode {
        ScanMode::Grid { per_axis, radius } => {
            if k > 3 {
                return Err(RecoverError::InvalidConfig(
                    "grid mode supports latent dimension at most 3",
                ));
            }
            if per_axis == 0 || !(radius > 0.0) {
                return Err(RecoverError::InvalidConfig(
                    "grid mode needs per_axis >= 1 and radius > 0",
                ));
            }
            let total = per_axis.pow(k as u32);
            if total > MAX_GRID_STARTS {
                return Err(RecoverError::GridTooLarge(total));
            }
            let axis: Vec<f64> = (0..per_axis)
                .map(|i| {
                    if per_axis == 1 {
                        0.0
                    } else {
                        -radius + 2.0 * radius * i as f64 / (per_axis - 1) as f64
                    }
                })
                .collect();
            (0..total)
                .map(|mut idx| {
                    DVector::from_fn(k, |_, _| {
                        let v = axis[idx % per_axis];
                        idx /= per_axis;
                        v
                    })
                })
                .collect()
        }
        ScanMode::Restarts { count } => {
            if count == 0 {
                return Err(RecoverError::InvalidConfig(
                    "restart mode needs at least one start",
                ));
            }
            (0..count)
                .map(|r| {
                    let mut rng = rng_from_seed(derive_seed(seed, TAG_LANDSCAPE, r as u64));
                    gaussian_vector(k, &mut rng)
                })
                .collect()
        }
    };
    let step = config.step_size.unwrap_or_else(|| default_step_size(net, a));

    let risk_of = |x: &LatentVector| -> Result<f64, RecoverError> {
        match model {
            MeasurementModel::Phaseless { .. } => {
                let r = (a * net.forward(x)?).map(f64::abs) - y;
                Ok(0.5 * r.norm_squared())
            }
            MeasurementModel::OneBit { tau, xi, .. } => {
                let r = (a * net.forward(x)? + xi + tau).map(sign_plus) - y;
                Ok(0.5 * r.norm_squared())
            }
            _ => empirical_risk(net, a, y, x),
        }
    };
    let grad_of = |x: &LatentVector| -> Result<DVector<f64>, RecoverError> {
        match model {
            MeasurementModel::Phaseless { .. } => {
                let trace = hidden_trace(net, x)?;
                let ag = a * net.forward(x)?;
                let pulled = ag.map(|z| sign_plus(z)) .component_mul(&(ag.map(f64::abs) - y));
                Ok(trace.active_product.transpose() * (a.transpose() * pulled))
            }
            // Sign observations are locally constant: zero almost everywhere.
            MeasurementModel::OneBit { .. } => Ok(DVector::zeros(net.latent_dim())),
            _ => risk_subgradient(net, a, y, x),
        }
    };

    let finals: Vec<(LatentVector, f64)> = starts
        .into_par_iter()
        .map(|start| -> Result<(LatentVector, f64), RecoverError> {
            let outcome = descend_with(
                start,
                step,
                config.max_iterations,
                config.gradient_tolerance,
                false,
                &risk_of,
                &grad_of,
            )?;
            Ok((outcome.x, outcome.loss))
        })
        .collect::<Result<_, _>>()?;

    let radius = match ground_truth {
        Some(t) if t.norm() > 0.0 => 1e-2 * t.norm(),
        _ => {
            let mut norms: Vec<f64> = finals.iter().map(|(x, _)| x.norm()).collect();
            norms.sort_by(f64::total_cmp);
            1e-2 * norms[norms.len() / 2].max(1.0)
        }
    };

    // Canonical order makes the greedy clustering schedule-independent.
    let mut ordered = finals;
    ordered.sort_by(|(xa, la), (xb, lb)| {
        la.total_cmp(lb).then_with(|| {
            for (ca, cb) in xa.iter().zip(xb.iter()) {
                let ord = ca.total_cmp(cb);
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    let starts_count = ordered.len();
    let mut reps: Vec<LatentVector> = Vec::new();
    let mut clusters: Vec<ClusterSummary> = Vec::new();
    for (x, loss) in ordered {
        let mut joined = false;
        for (rep, cluster) in reps.iter().zip(clusters.iter_mut()) {
            if (&x - rep).norm() < radius {
                cluster.size += 1;
                cluster.min_loss = cluster.min_loss.min(loss);
                joined = true;
                break;
            }
        }
        if !joined {
            clusters.push(ClusterSummary {
                center: x.iter().copied().collect(),
                size: 1,
                min_loss: loss,
            });
            reps.push(x);
        }
    }
    Ok(LandscapeReport {
        clusters,
        starts: starts_count,
        cluster_radius: radius,
    })
}
