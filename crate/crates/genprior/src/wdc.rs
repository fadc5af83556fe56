//! The weight distribution condition (WDC) and its building blocks.
//!
//! For a matrix `W` with rows `w_i` and the activation notation of
//! [`crate::network`], the object of interest is the activated Gram matrix
//!
//! ```text
//!     W_{+,x}^T W_{+,y} = sum_i 1{w_i.x > 0} 1{w_i.y > 0} w_i w_i^T .
//! ```
//!
//! When the rows are i.i.d. `N(0, I_k)` its row-wise expectation has the
//! closed form
//!
//! ```text
//!     Q_{x,y} = (pi - theta)/(2 pi) * I_k + sin(theta)/(2 pi) * M_{x,y} ,
//! ```
//!
//! with `theta` the angle between `x` and `y` and `M_{x,y}` the symmetric
//! rank-two operator swapping the unit vectors `x_hat <-> y_hat` and killing
//! their orthogonal complement. `W` satisfies the WDC with constant `eps`
//! when `|| (1/n) W_{+,x}^T W_{+,y} - Q_{x,y} || <= eps` for all nonzero
//! `x, y` (drop the `1/n` for the unnormalized variant used with
//! `N(0, 1/n)` rows — the closed form `Q` is the same). [`wdc_deviation`]
//! estimates the supremum empirically over a caller-supplied pair list.
//!
//! Because the activation indicator is discontinuous, concentration
//! arguments work with one-sided `1/eps`-Lipschitz surrogates
//! [`smoothed_step`] and the corresponding Gram forms [`smoothed_gram`],
//! which bracket the activated Gram in the positive-semidefinite order:
//! `G_{W,eps}(x,y) <= W_{+,x}^T W_{+,y} <= G_{W,-eps}(x,y)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use rayon::prelude::*;

use crate::network::active_submatrix;
use crate::sampling::{rng_from_seed, unit_vector};

/// Start-vector seed for the power iteration. Fixed so that operator norms
/// are a pure function of their input matrix.
const POWER_ITERATION_SEED: u64 = 0x5EED_0001;

/// Maximum power-iteration steps before giving up on further progress.
const POWER_ITERATION_CAP: usize = 10_000;

/// Relative change of successive Rayleigh quotients at which the power
/// iteration is considered converged.
const POWER_ITERATION_RTOL: f64 = 1e-10;

/// Below this `sin(theta)` the pair is treated as parallel/antiparallel and
/// the swap matrix degenerates to `±x_hat x_hat^T`.
const DEGENERATE_SIN: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum WdcError {
    #[error("direction vectors must be nonzero")]
    ZeroVector,
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("deviation estimation needs at least one direction pair")]
    NoPairs,
}

/// Which side of the activation indicator a smoothed step approximates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepSide {
    /// `h_eps`: zero until 0, linear up to `eps`, one afterwards. Sits below
    /// the indicator `1{z > 0}`.
    Lower,
    /// `h_{-eps}`: zero until `-eps`, linear up to 0, one afterwards. Sits
    /// above the indicator.
    Upper,
}

/// Closed-form expected activated Gram direction: the matrix together with
/// the angle it was built from. Symmetric with operator norm at most 1 by
/// construction.
#[derive(Debug, Clone)]
pub struct QMatrix {
    pub matrix: DMatrix<f64>,
    /// Angle between the generating directions, in `[0, pi]`.
    pub angle: f64,
}

/// Result of an empirical WDC deviation sweep.
#[derive(Debug, Clone, Serialize)]
pub struct WdcReport {
    pub max_deviation: f64,
    pub argmax_x: Vec<f64>,
    pub argmax_y: Vec<f64>,
    pub pairs_tested: usize,
    pub normalized: bool,
}

fn unit_of(v: &DVector<f64>) -> Result<DVector<f64>, WdcError> {
    let n = v.norm();
    if n <= 0.0 || !n.is_finite() {
        return Err(WdcError::ZeroVector);
    }
    Ok(v / n)
}

/// The symmetric rank-two operator with `M x_hat = y_hat`, `M y_hat = x_hat`
/// and `M z = 0` on the orthogonal complement of the span. For (anti)parallel
/// inputs it degenerates to `±x_hat x_hat^T`.
pub fn swap_matrix(x: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>, WdcError> {
    if x.len() != y.len() {
        return Err(WdcError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let xh = unit_of(x)?;
    let yh = unit_of(y)?;
    let c = xh.dot(&yh).clamp(-1.0, 1.0);
    let r = &yh - &xh * c;
    let s = r.norm();
    let xx = &xh * xh.transpose();
    if s < DEGENERATE_SIN {
        return Ok(xx * c.signum());
    }
    let u = r / s;
    // In the (x_hat, u) plane M is the reflection [[c, s], [s, -c]].
    Ok((&xx - &u * u.transpose()) * c + (&xh * u.transpose() + &u * xh.transpose()) * s)
}

/// Closed-form `Q_{x,y}`. Scale-invariant in each argument separately; the
/// angle is computed with `atan2`, which stays accurate for nearly parallel
/// directions where `acos` of the inner product loses digits.
pub fn q_matrix(x: &DVector<f64>, y: &DVector<f64>) -> Result<QMatrix, WdcError> {
    if x.len() != y.len() {
        return Err(WdcError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let xh = unit_of(x)?;
    let yh = unit_of(y)?;
    let c = xh.dot(&yh).clamp(-1.0, 1.0);
    let s = (&yh - &xh * c).norm(); // = sin(theta), since x_hat and y_hat are unit
    let theta = s.atan2(c);
    let m = swap_matrix(x, y)?;
    let k = x.len();
    let mut q = m * (s / (2.0 * std::f64::consts::PI));
    let diag = (std::f64::consts::PI - theta) / (2.0 * std::f64::consts::PI);
    for i in 0..k {
        q[(i, i)] += diag;
    }
    Ok(QMatrix { matrix: q, angle: theta })
}

/// `W_{+,x}^T W_{+,y}`, the Gram matrix restricted to rows active at both
/// directions. Symmetric even for `x != y`, since every row contributes a
/// multiple of its own outer product.
pub fn activated_gram(
    w: &DMatrix<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<DMatrix<f64>, WdcError> {
    check_dir(w, x)?;
    check_dir(w, y)?;
    let wx = active_submatrix(w, x).expect("dimensions already checked");
    let wy = active_submatrix(w, y).expect("dimensions already checked");
    Ok(wx.transpose() * wy)
}

fn check_dir(w: &DMatrix<f64>, v: &DVector<f64>) -> Result<(), WdcError> {
    if w.ncols() != v.len() {
        return Err(WdcError::DimensionMismatch {
            expected: w.ncols(),
            got: v.len(),
        });
    }
    Ok(())
}

/// Empirical WDC deviation of `W` over the given direction pairs:
/// the largest operator-norm distance between the (optionally `1/n`-scaled)
/// activated Gram and the closed form `Q`. The reported argmax re-evaluates
/// to the reported maximum, and ties resolve to the earliest pair, so the
/// result does not depend on how the pair list is split across threads.
pub fn wdc_deviation(
    w: &DMatrix<f64>,
    pairs: &[(DVector<f64>, DVector<f64>)],
    normalized: bool,
) -> Result<WdcReport, WdcError> {
    if pairs.is_empty() {
        return Err(WdcError::NoPairs);
    }
    let n = w.nrows() as f64;
    let deviations: Vec<f64> = pairs
        .par_iter()
        .map(|(x, y)| -> Result<f64, WdcError> {
            let mut gram = activated_gram(w, x, y)?;
            if normalized {
                gram /= n;
            }
            let q = q_matrix(x, y)?;
            Ok(operator_norm(&(gram - q.matrix)))
        })
        .collect::<Result<_, _>>()?;
    let (best_idx, best) = deviations
        .iter()
        .copied()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        });
    Ok(WdcReport {
        max_deviation: best,
        argmax_x: pairs[best_idx].0.iter().copied().collect(),
        argmax_y: pairs[best_idx].1.iter().copied().collect(),
        pairs_tested: pairs.len(),
        normalized,
    })
}

/// Seeded direction pairs for deviation sweeps: a fixed adversarial block of
/// equal, antipodal and orthogonal pairs (where the closed form has its
/// kinks), then independent uniform pairs up to `count`.
pub fn sample_direction_pairs(
    k: usize,
    count: usize,
    seed: u64,
) -> Vec<(DVector<f64>, DVector<f64>)> {
    let mut rng = rng_from_seed(seed);
    let mut pairs: Vec<(DVector<f64>, DVector<f64>)> = Vec::with_capacity(count);
    let e1 = DVector::from_fn(k, |i, _| if i == 0 { 1.0 } else { 0.0 });
    pairs.push((e1.clone(), e1.clone()));
    pairs.push((e1.clone(), -&e1));
    if k >= 2 {
        let e2 = DVector::from_fn(k, |i, _| if i == 1 { 1.0 } else { 0.0 });
        pairs.push((e1.clone(), e2));
    }
    let u = unit_vector(k, &mut rng);
    pairs.push((u.clone(), u.clone()));
    pairs.push((u.clone(), -&u));
    if k >= 2 {
        // A unit vector orthogonal to u, deterministic given the stream.
        let mut v = unit_vector(k, &mut rng);
        let c = u.dot(&v);
        v -= &u * c;
        let n = v.norm();
        if n > 1e-9 {
            pairs.push((u.clone(), v / n));
        }
    }
    while pairs.len() < count {
        pairs.push((unit_vector(k, &mut rng), unit_vector(k, &mut rng)));
    }
    pairs.truncate(count);
    pairs
}

/// One-sided piecewise-linear step surrogate; both sides are
/// `1/eps`-Lipschitz and take values in `[0, 1]`.
pub fn smoothed_step(z: f64, eps: f64, side: StepSide) -> Result<f64, WdcError> {
    if !(eps > 0.0) {
        return Err(WdcError::NonPositiveEpsilon(eps));
    }
    Ok(step_raw(z, eps, side))
}

#[inline]
fn step_raw(z: f64, eps: f64, side: StepSide) -> f64 {
    match side {
        StepSide::Lower => (z / eps).clamp(0.0, 1.0),
        StepSide::Upper => (1.0 + z / eps).clamp(0.0, 1.0),
    }
}

/// Smoothed Gram form `G(x, y) = sum_i h(w_i.x) h(w_i.y) w_i w_i^T` for the
/// chosen step side. Built as `S^T S` with `S` the rows scaled by the square
/// roots of their coefficients, so the result is bitwise symmetric and
/// positive semidefinite whenever the coefficients are (they always are).
pub fn smoothed_gram(
    w: &DMatrix<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    eps: f64,
    side: StepSide,
) -> Result<DMatrix<f64>, WdcError> {
    if !(eps > 0.0) {
        return Err(WdcError::NonPositiveEpsilon(eps));
    }
    check_dir(w, x)?;
    check_dir(w, y)?;
    let a = w * x;
    let b = w * y;
    let mut scaled = w.clone();
    for i in 0..w.nrows() {
        let coeff = step_raw(a[i], eps, side) * step_raw(b[i], eps, side);
        let root = coeff.sqrt();
        scaled.row_mut(i).scale_mut(root);
    }
    Ok(scaled.transpose() * scaled)
}

/// Quadratic form `u^T G(x, y) u` of the smoothed Gram, accumulated as a
/// scalar sum — the hot path of the concentration experiments, which never
/// need the full matrix.
pub fn smoothed_quadratic(
    w: &DMatrix<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    u: &DVector<f64>,
    eps: f64,
    side: StepSide,
) -> Result<f64, WdcError> {
    if !(eps > 0.0) {
        return Err(WdcError::NonPositiveEpsilon(eps));
    }
    check_dir(w, x)?;
    check_dir(w, y)?;
    check_dir(w, u)?;
    let a = w * x;
    let b = w * y;
    let wu = w * u;
    let mut acc = 0.0;
    for i in 0..w.nrows() {
        acc += step_raw(a[i], eps, side) * step_raw(b[i], eps, side) * wu[i] * wu[i];
    }
    Ok(acc)
}

/// Membership in the well-conditioned set used by the concentration
/// arguments for `N(0,1)`-entry matrices: operator norm at most `3 sqrt(n)`
/// and every row norm at most `sqrt(2k)`.
pub fn in_theta(w: &DMatrix<f64>) -> bool {
    let (n, k) = w.shape();
    let max_row = (0..n).map(|i| w.row(i).norm()).fold(0.0, f64::max);
    max_row <= (2.0 * k as f64).sqrt() && operator_norm(w) <= 3.0 * (n as f64).sqrt()
}

/// Largest singular value by power iteration on `M^T M`, with a fixed seeded
/// start vector, successive-Rayleigh-quotient stopping at relative `1e-10`,
/// and a 10,000-iteration cap. Returns 0 for the zero matrix.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    let cols = m.ncols();
    if cols == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let scale = gram.amax();
    if scale == 0.0 {
        return 0.0;
    }
    if !scale.is_finite() {
        return f64::INFINITY;
    }
    let mut rng = rng_from_seed(POWER_ITERATION_SEED);
    let mut v = unit_vector(cols, &mut rng);
    let mut lambda = f64::NEG_INFINITY;
    for _ in 0..POWER_ITERATION_CAP {
        let gv = &gram * &v;
        let norm = gv.norm();
        if norm <= scale * 1e-306 {
            // The start vector landed in the null space; re-draw.
            v = unit_vector(cols, &mut rng);
            lambda = f64::NEG_INFINITY;
            continue;
        }
        v = gv / norm;
        let next = v.dot(&(&gram * &v));
        if lambda.is_finite() && (next - lambda).abs() <= POWER_ITERATION_RTOL * next.max(1e-300) {
            return next.max(0.0).sqrt();
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}
