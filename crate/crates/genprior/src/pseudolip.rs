//! Pseudo-balls, wideness certificates, the aspherical net, and uniform
//! concentration experiments for the smoothed activated Gram.
//!
//! A pseudo-ball is a symmetric convex set that stands in for the Euclidean
//! ball in covering arguments. Two variants live here: the slab
//! `{v : |w.v| <= eps}` and the weighted slab
//! `{v : sum_i |M_i.v| (M_i.u)^2 <= t n}` whose geometry adapts to a matrix
//! `M` and a probe direction `u`. A pseudo-ball `B` is `(delta, gamma)`-wide
//! when it captures at least a `gamma` fraction of the volume of the radius-
//! `delta` ball; [`volume_fraction`] estimates that fraction by Monte Carlo
//! and, for weighted slabs, records the closed-form lower bound
//! `max(0, 1 - 72 delta / (t sqrt(pi)))`.
//!
//! [`build_aspherical_net`] covers the unit sphere by translates of
//! `(1/2)(B ∩ delta 𝓑)` around centers picked by scanning a deterministic
//! low-discrepancy sphere sequence, then perturbs each center uniformly
//! inside its own translate. Because the half-set is symmetric and convex,
//! the perturbed translates `{y_j + B}` still cover every scanned point, and
//! the net size is at most `gamma^{-1} (5/delta)^k`.
//!
//! The concentration experiments measure how far the rescaled smoothed Gram
//! quadratic `(1/n) u^T G_{-eps}(x, y) u` sits above its Gaussian limit
//! `u^T Q_{x,y} u`, for Gaussian matrices conditioned by rejection on the
//! well-conditioned set checked by [`crate::wdc::in_theta`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::sampling::{ball_point, derive_seed, gaussian_matrix, rng_from_seed, sphere_sequence, unit_vector};
use crate::wdc::{in_theta, q_matrix, sample_direction_pairs, smoothed_quadratic, StepSide, WdcError};

/// Cap on box-rejection draws when perturbing a single net center.
pub const BOX_REJECTION_CAP: usize = 1_000_000;
/// Cap on net centers; scanning stops with an error beyond this.
pub const NET_CENTER_CAP: usize = 20_000;
/// Cap on rejection draws for one pseudo-Lipschitz perturbation.
pub const PERTURBATION_REJECTION_CAP: usize = 1_000_000;
/// Cap on Gaussian draws when rejection-sampling a well-conditioned matrix.
pub const THETA_SAMPLE_CAP: usize = 500_000;
/// Monte Carlo samples behind the `gamma` stored in an [`AsphericalNet`].
pub const NET_GAMMA_SAMPLES: usize = 20_000;
/// Largest perturbation radius the ray sampler will produce when the weighted
/// gauge nearly vanishes along a direction.
const RAY_RADIUS_CLAMP: f64 = 100.0;
/// Probe directions used to size the rejection ball of the perturbation
/// sampler.
const PROBE_DIRECTIONS: usize = 16;

const TAG_NET_PERTURB: u64 = 0x4E45_5450;
const TAG_NET_GAMMA: u64 = 0x4E45_5447;
const TAG_PL_PROBE: u64 = 0x504C_5052;
const TAG_PL_TRIAL: u64 = 0x504C_5452;
const TAG_CONC_MATRIX: u64 = 0x434F_4D58;
const TAG_CONC_EVAL: u64 = 0x434F_4556;
const TAG_CONC_XY: u64 = 0x434F_5859;
const TAG_CONC_U: u64 = 0x434F_5500;

#[derive(Debug, Error)]
pub enum PseudoLipError {
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("delta must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("net construction needs delta in (0, 1), got {0}")]
    DeltaOutOfRange(f64),
    #[error("net construction supports dimensions 1 through 6, got {0}")]
    DimensionOutOfRange(usize),
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("threshold t must be positive, got {0}")]
    NonPositiveThreshold(f64),
    #[error("u must be a unit vector, got norm {0}")]
    NonUnitVector(f64),
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("need n >= k >= 1 rows, got n = {n}, k = {k}")]
    TooFewRows { n: usize, k: usize },
    #[error("perturbing net center {center} exceeded {cap} box rejections")]
    BoxRejectionCap { center: usize, cap: usize },
    #[error("net scan exceeded {cap} centers with {remaining} test points uncovered")]
    CenterCap { cap: usize, remaining: usize },
    #[error("perturbation sampling exceeded {cap} rejections")]
    PerturbationRejectionCap { cap: usize },
    #[error("rejection sampling of a well-conditioned {n}x{k} matrix exceeded {cap} draws")]
    ThetaRejectionCap { n: usize, k: usize, cap: usize },
    #[error(transparent)]
    Wdc(#[from] WdcError),
}

/// A symmetric convex pseudo-ball. Build through [`PseudoBallSpec::slab`] or
/// [`PseudoBallSpec::weighted_slab`], which validate the parameters.
#[derive(Debug, Clone)]
pub enum PseudoBallSpec {
    /// `{v : |w.v| <= epsilon}`.
    Slab { w: DVector<f64>, epsilon: f64 },
    /// `{v : sum_i |M_i.v| (M_i.u)^2 <= t n}` with `n` the row count of `M`.
    WeightedSlab {
        m: DMatrix<f64>,
        t: f64,
        u: DVector<f64>,
    },
}

impl PseudoBallSpec {
    pub fn slab(w: DVector<f64>, epsilon: f64) -> Result<Self, PseudoLipError> {
        if w.is_empty() {
            return Err(PseudoLipError::DimensionOutOfRange(0));
        }
        if !(epsilon > 0.0) {
            return Err(PseudoLipError::NonPositiveEpsilon(epsilon));
        }
        Ok(Self::Slab { w, epsilon })
    }

    pub fn weighted_slab(
        m: DMatrix<f64>,
        t: f64,
        u: DVector<f64>,
    ) -> Result<Self, PseudoLipError> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(PseudoLipError::DimensionOutOfRange(0));
        }
        if !(t > 0.0) {
            return Err(PseudoLipError::NonPositiveThreshold(t));
        }
        if u.len() != m.ncols() {
            return Err(PseudoLipError::DimensionMismatch {
                expected: m.ncols(),
                got: u.len(),
            });
        }
        let norm = u.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(PseudoLipError::NonUnitVector(norm));
        }
        Ok(Self::WeightedSlab { m, t, u })
    }

    /// Ambient dimension of the pseudo-ball.
    pub fn dim(&self) -> usize {
        match self {
            Self::Slab { w, .. } => w.len(),
            Self::WeightedSlab { m, .. } => m.ncols(),
        }
    }
}

/// Evaluator for the defining inequality of a pseudo-ball. Both variants are
/// gauges: nonnegative, symmetric and positively homogeneous, so membership
/// `gauge(v) <= bound` describes a symmetric convex set.
enum GaugeKind<'a> {
    Slab(&'a DVector<f64>),
    Weighted {
        m: &'a DMatrix<f64>,
        /// `(M_i.u)^2` per row, hoisted out of the per-sample loop.
        weights: DVector<f64>,
    },
}

struct Gauge<'a> {
    kind: GaugeKind<'a>,
    bound: f64,
}

impl<'a> Gauge<'a> {
    fn new(spec: &'a PseudoBallSpec) -> Self {
        match spec {
            PseudoBallSpec::Slab { w, epsilon } => Gauge {
                kind: GaugeKind::Slab(w),
                bound: *epsilon,
            },
            PseudoBallSpec::WeightedSlab { m, t, u } => Gauge {
                kind: GaugeKind::Weighted {
                    m,
                    weights: weighted_slab_weights(m, u),
                },
                bound: t * m.nrows() as f64,
            },
        }
    }

    fn value(&self, v: &DVector<f64>) -> f64 {
        match &self.kind {
            GaugeKind::Slab(w) => w.dot(v).abs(),
            GaugeKind::Weighted { m, weights } => {
                let a = *m * v;
                a.iter()
                    .zip(weights.iter())
                    .map(|(ai, wi)| ai.abs() * wi)
                    .sum()
            }
        }
    }

    fn contains(&self, v: &DVector<f64>) -> bool {
        self.value(v) <= self.bound
    }

    /// Membership of `a - b` in the half-set `(1/2)(B ∩ delta 𝓑)`, i.e.
    /// `|a - b| <= delta/2` and `2(a - b)` in `B`, without allocating. The
    /// net scan calls this for every (candidate, center) pair.
    fn half_contains_diff(&self, a: &DVector<f64>, b: &DVector<f64>, delta: f64) -> bool {
        let k = a.len();
        let mut sumsq = 0.0;
        for d in 0..k {
            let t = a[d] - b[d];
            sumsq += t * t;
        }
        if 4.0 * sumsq > delta * delta {
            return false;
        }
        match &self.kind {
            GaugeKind::Slab(w) => {
                let mut dot = 0.0;
                for d in 0..k {
                    dot += w[d] * (a[d] - b[d]);
                }
                (2.0 * dot).abs() <= self.bound
            }
            GaugeKind::Weighted { m, weights } => {
                let mut acc = 0.0;
                for i in 0..m.nrows() {
                    let mut dot = 0.0;
                    for d in 0..k {
                        dot += m[(i, d)] * (a[d] - b[d]);
                    }
                    acc += (2.0 * dot).abs() * weights[i];
                    if acc > self.bound {
                        return false;
                    }
                }
                acc <= self.bound
            }
        }
    }
}

fn weighted_slab_weights(m: &DMatrix<f64>, u: &DVector<f64>) -> DVector<f64> {
    let mu = m * u;
    mu.map(|z| z * z)
}

/// Exact membership per the defining inequality (non-strict).
pub fn pseudo_ball_contains(
    spec: &PseudoBallSpec,
    v: &DVector<f64>,
) -> Result<bool, PseudoLipError> {
    if v.len() != spec.dim() {
        return Err(PseudoLipError::DimensionMismatch {
            expected: spec.dim(),
            got: v.len(),
        });
    }
    Ok(Gauge::new(spec).contains(v))
}

/// Membership of `v` in the half-set `(1/2)(B ∩ delta 𝓑)` used by the net:
/// `|v| <= delta/2` and `2v` in `B`.
pub fn half_intersection_contains(
    spec: &PseudoBallSpec,
    delta: f64,
    v: &DVector<f64>,
) -> Result<bool, PseudoLipError> {
    if v.len() != spec.dim() {
        return Err(PseudoLipError::DimensionMismatch {
            expected: spec.dim(),
            got: v.len(),
        });
    }
    if !(delta > 0.0) {
        return Err(PseudoLipError::NonPositiveDelta(delta));
    }
    let zero = DVector::zeros(v.len());
    Ok(Gauge::new(spec).half_contains_diff(v, &zero, delta))
}

/// Monte Carlo wideness estimate of a pseudo-ball.
#[derive(Debug, Clone, Serialize)]
pub struct WidenessCertificate {
    pub delta: f64,
    /// Fraction of uniform samples from the radius-`delta` ball inside the
    /// pseudo-ball. In `[0, 1]` by construction.
    pub gamma_estimate: f64,
    pub samples: usize,
    /// Closed-form lower bound `max(0, 1 - 72 delta / (t sqrt(pi)))` for
    /// weighted slabs; recorded as the trivial bound 0 for plain slabs,
    /// which have no such closed form here.
    pub analytic_lower_bound: f64,
}

impl WidenessCertificate {
    /// Binomial standard error of `gamma_estimate`.
    pub fn standard_error(&self) -> f64 {
        let p = self.gamma_estimate;
        (p * (1.0 - p) / self.samples as f64).sqrt()
    }
}

/// Estimates the fraction of the radius-`delta` ball captured by the
/// pseudo-ball from uniform samples. Sample generation is sequential (one
/// seeded stream); counting is parallel and order-independent.
pub fn volume_fraction(
    spec: &PseudoBallSpec,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<WidenessCertificate, PseudoLipError> {
    if !(delta > 0.0) {
        return Err(PseudoLipError::NonPositiveDelta(delta));
    }
    if samples < 1000 {
        return Err(PseudoLipError::TooFewSamples {
            min: 1000,
            got: samples,
        });
    }
    let k = spec.dim();
    let gauge = Gauge::new(spec);
    let mut rng = rng_from_seed(seed);
    let points: Vec<DVector<f64>> = (0..samples).map(|_| ball_point(k, delta, &mut rng)).collect();
    let inside = points.par_iter().filter(|p| gauge.contains(p)).count();
    let analytic_lower_bound = match spec {
        PseudoBallSpec::Slab { .. } => 0.0,
        PseudoBallSpec::WeightedSlab { t, .. } => (1.0 - 72.0 * delta / (t * PI.sqrt())).max(0.0),
    };
    Ok(WidenessCertificate {
        delta,
        gamma_estimate: inside as f64 / samples as f64,
        samples,
        analytic_lower_bound,
    })
}

/// A covering of the unit sphere by perturbed pseudo-ball translates.
#[derive(Debug, Clone)]
pub struct AsphericalNet {
    /// Scanned sphere points; pairwise differences escape the half-set.
    pub centers: Vec<DVector<f64>>,
    /// One uniform draw from `x_j + (1/2)(B ∩ delta 𝓑)` per center; all lie
    /// in the shell of radii `[1 - delta/2, 1 + delta/2]`.
    pub perturbed: Vec<DVector<f64>>,
    pub delta: f64,
    /// Wideness estimate of the generating pseudo-ball at `delta`, from
    /// [`NET_GAMMA_SAMPLES`] Monte Carlo samples.
    pub gamma: f64,
}

impl AsphericalNet {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Whether some perturbed translate `y_j + B` contains `z`.
    pub fn covers(
        &self,
        spec: &PseudoBallSpec,
        z: &DVector<f64>,
    ) -> Result<bool, PseudoLipError> {
        for y in &self.perturbed {
            if pseudo_ball_contains(spec, &(z - y))? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Size bound `gamma^{-1} (5 / delta)^k` for a net built from a
/// `(delta, gamma)`-wide pseudo-ball in dimension `k`.
pub fn net_size_bound(gamma: f64, delta: f64, k: usize) -> f64 {
    (5.0 / delta).powi(k as i32) / gamma
}

/// The deterministic scan sequence for net construction: the first standard
/// basis vector followed by a low-discrepancy sphere sequence. This doubles
/// as the coverage test set, so callers can regenerate exactly the points a
/// net was required to cover.
pub fn net_scan_points(k: usize, count: usize) -> Vec<DVector<f64>> {
    let mut pts = Vec::with_capacity(count);
    if count == 0 {
        return pts;
    }
    pts.push(DVector::from_fn(k, |i, _| if i == 0 { 1.0 } else { 0.0 }));
    pts.extend(sphere_sequence(k, count - 1));
    pts
}

/// Default scan/test set size for a `k`-dimensional net.
pub fn default_scan_size(k: usize) -> usize {
    10_000 * k
}

/// Builds an aspherical net: scans [`net_scan_points`] in order, promotes
/// every point not yet covered by `x_j + (1/2)(B ∩ delta 𝓑)` to a center,
/// then draws one uniform perturbation per center from its half-set by
/// rejection from the bounding box of the radius-`delta/2` ball.
///
/// After the scan every test point is covered by some center's half-set, and
/// therefore by the perturbed translates `{y_j + B}`: for `a`, `b` in the
/// half-set, `a - b` lands in `B ∩ delta 𝓑` by symmetry and convexity.
pub fn build_aspherical_net(
    spec: &PseudoBallSpec,
    delta: f64,
    sphere_test_points: usize,
    seed: u64,
) -> Result<AsphericalNet, PseudoLipError> {
    let k = spec.dim();
    if !(1..=6).contains(&k) {
        return Err(PseudoLipError::DimensionOutOfRange(k));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PseudoLipError::DeltaOutOfRange(delta));
    }
    if sphere_test_points == 0 {
        return Err(PseudoLipError::TooFewSamples { min: 1, got: 0 });
    }
    let gauge = Gauge::new(spec);
    let candidates = net_scan_points(k, sphere_test_points);
    let mut covered = vec![false; candidates.len()];
    let mut centers: Vec<DVector<f64>> = Vec::new();
    for idx in 0..candidates.len() {
        if covered[idx] {
            continue;
        }
        if centers.len() == NET_CENTER_CAP {
            let remaining = covered[idx..].iter().filter(|c| !**c).count();
            return Err(PseudoLipError::CenterCap {
                cap: NET_CENTER_CAP,
                remaining,
            });
        }
        let center = candidates[idx].clone();
        covered[idx] = true;
        for j in (idx + 1)..candidates.len() {
            if !covered[j] && gauge.half_contains_diff(&candidates[j], &center, delta) {
                covered[j] = true;
            }
        }
        centers.push(center);
    }
    let zero = DVector::zeros(k);
    let mut perturbed = Vec::with_capacity(centers.len());
    for (j, center) in centers.iter().enumerate() {
        let mut rng = rng_from_seed(derive_seed(seed, TAG_NET_PERTURB, j as u64));
        let mut accepted = None;
        for _ in 0..BOX_REJECTION_CAP {
            let v = DVector::from_fn(k, |_, _| {
                let r: f64 = rng.random();
                delta * (r - 0.5)
            });
            if gauge.half_contains_diff(&v, &zero, delta) {
                accepted = Some(v);
                break;
            }
        }
        match accepted {
            Some(v) => perturbed.push(center + v),
            None => {
                return Err(PseudoLipError::BoxRejectionCap {
                    center: j,
                    cap: BOX_REJECTION_CAP,
                })
            }
        }
    }
    let cert = volume_fraction(
        spec,
        delta,
        NET_GAMMA_SAMPLES,
        derive_seed(seed, TAG_NET_GAMMA, 0),
    )?;
    Ok(AsphericalNet {
        centers,
        perturbed,
        delta,
        gamma: cert.gamma_estimate,
    })
}

/// Max observed deviation `|f_M(x, y) - f_M(x + p, y + q)|` where
/// `f_M(x, y) = (1/n) u^T G_{M,-eps}(x, y) u` and the perturbations `p`, `q`
/// stay inside the weighted slab with threshold `t = eps^2 / 4`. Since the
/// smoothed step is `1/eps`-Lipschitz and bounded by one, each perturbation
/// moves `f_M` by at most `t n / (eps n) = eps / 4`, so the result is
/// bounded by `eps` with slack to spare.
///
/// Trial 0 uses zero perturbations; odd trials push along a random ray to a
/// uniform fraction of the boundary radius; even trials rejection-sample a
/// ball sized from probe directions. All trials draw from seeds derived per
/// trial index, so the result is independent of thread count.
pub fn pseudo_lipschitz_check(
    m: &DMatrix<f64>,
    u: &DVector<f64>,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<f64, PseudoLipError> {
    if !(epsilon > 0.0) {
        return Err(PseudoLipError::NonPositiveEpsilon(epsilon));
    }
    if u.len() != m.ncols() {
        return Err(PseudoLipError::DimensionMismatch {
            expected: m.ncols(),
            got: u.len(),
        });
    }
    let norm = u.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(PseudoLipError::NonUnitVector(norm));
    }
    if trials == 0 {
        return Err(PseudoLipError::TooFewSamples { min: 1, got: 0 });
    }
    let (n, k) = m.shape();
    let t = epsilon * epsilon / 4.0;
    let bound = t * n as f64;
    let weights = weighted_slab_weights(m, u);
    let gauge_value = |v: &DVector<f64>| -> f64 {
        let a = m * v;
        a.iter()
            .zip(weights.iter())
            .map(|(ai, wi)| ai.abs() * wi)
            .sum()
    };
    // Typical boundary radius along random directions sizes the rejection
    // ball; directions where the gauge vanishes contribute the clamp.
    let mut probe_rng = rng_from_seed(derive_seed(seed, TAG_PL_PROBE, 0));
    let mut acc = 0.0;
    for _ in 0..PROBE_DIRECTIONS {
        let g = unit_vector(k, &mut probe_rng);
        let s = gauge_value(&g);
        acc += if s > 0.0 {
            (bound / s).min(RAY_RADIUS_CLAMP)
        } else {
            RAY_RADIUS_CLAMP
        };
    }
    let rho = (2.0 * acc / PROBE_DIRECTIONS as f64).min(RAY_RADIUS_CLAMP);

    let sample_ray = |rng: &mut rand_chacha::ChaCha8Rng| -> DVector<f64> {
        let g = unit_vector(k, rng);
        let s = gauge_value(&g);
        let r_max = if s > 0.0 {
            (bound / s).min(RAY_RADIUS_CLAMP)
        } else {
            RAY_RADIUS_CLAMP
        };
        let f: f64 = rng.random();
        g * (r_max * (0.5 + 0.5 * f))
    };
    let sample_rejection =
        |rng: &mut rand_chacha::ChaCha8Rng| -> Result<DVector<f64>, PseudoLipError> {
            for _ in 0..PERTURBATION_REJECTION_CAP {
                let v = ball_point(k, rho, rng);
                if gauge_value(&v) <= bound {
                    return Ok(v);
                }
            }
            Err(PseudoLipError::PerturbationRejectionCap {
                cap: PERTURBATION_REJECTION_CAP,
            })
        };
    let f_of = |x: &DVector<f64>, y: &DVector<f64>| -> Result<f64, PseudoLipError> {
        Ok(smoothed_quadratic(m, x, y, u, epsilon, StepSide::Upper)? / n as f64)
    };

    let deviations: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<f64, PseudoLipError> {
            let mut rng = rng_from_seed(derive_seed(seed, TAG_PL_TRIAL, i as u64));
            let x = unit_vector(k, &mut rng);
            let y = unit_vector(k, &mut rng);
            let (p, q) = if i == 0 {
                (DVector::zeros(k), DVector::zeros(k))
            } else if i % 2 == 1 {
                (sample_ray(&mut rng), sample_ray(&mut rng))
            } else {
                (sample_rejection(&mut rng)?, sample_rejection(&mut rng)?)
            };
            let base = f_of(&x, &y)?;
            let moved = f_of(&(&x + &p), &(&y + &q))?;
            Ok((base - moved).abs())
        })
        .collect::<Result<_, _>>()?;
    Ok(deviations.into_iter().fold(0.0, f64::max))
}

/// Draws standard Gaussian `n x k` matrices from the seeded stream until one
/// lands in the well-conditioned set, returning it with the number of draws
/// spent. Errors once [`THETA_SAMPLE_CAP`] draws are exhausted — the set's
/// probability decays exponentially in `n` for fixed `k`, so wide matrices
/// at small `k` are genuinely out of reach of rejection sampling.
pub fn sample_theta_matrix(
    n: usize,
    k: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, usize), PseudoLipError> {
    if k == 0 || n < k {
        return Err(PseudoLipError::TooFewRows { n, k });
    }
    let mut rng = rng_from_seed(seed);
    for attempt in 1..=THETA_SAMPLE_CAP {
        let w = gaussian_matrix(n, k, 1.0, &mut rng);
        if in_theta(&w) {
            return Ok((w, attempt));
        }
    }
    Err(PseudoLipError::ThetaRejectionCap {
        n,
        k,
        cap: THETA_SAMPLE_CAP,
    })
}

/// Largest signed gap `(1/n) u^T G_{-eps}(x, y) u - u^T Q_{x,y} u` over a
/// seeded set of direction pairs. Even-indexed pairs probe `u = x` (the
/// classic witness direction); odd-indexed pairs draw a fresh uniform `u`.
pub fn concentration_for_matrix(
    w: &DMatrix<f64>,
    epsilon: f64,
    pair_trials: usize,
    seed: u64,
) -> Result<f64, PseudoLipError> {
    if !(epsilon > 0.0) {
        return Err(PseudoLipError::NonPositiveEpsilon(epsilon));
    }
    if pair_trials == 0 {
        return Err(PseudoLipError::TooFewSamples { min: 1, got: 0 });
    }
    let (n, k) = w.shape();
    let pairs = sample_direction_pairs(k, pair_trials, derive_seed(seed, TAG_CONC_XY, 0));
    let mut u_rng = rng_from_seed(derive_seed(seed, TAG_CONC_U, 0));
    let mut best = f64::NEG_INFINITY;
    for (idx, (x, y)) in pairs.iter().enumerate() {
        let u = if idx % 2 == 0 {
            x.clone()
        } else {
            unit_vector(k, &mut u_rng)
        };
        let f = smoothed_quadratic(w, x, y, &u, epsilon, StepSide::Upper)? / n as f64;
        let g = (&q_matrix(x, y)?.matrix * &u).dot(&u);
        best = best.max(f - g);
    }
    Ok(best)
}

/// Per-matrix outcome of a concentration experiment.
#[derive(Debug, Clone, Serialize)]
pub struct MatrixDeviation {
    /// Seed of the rejection stream that produced this matrix.
    pub seed: u64,
    /// Gaussian draws spent before a well-conditioned matrix appeared.
    pub theta_draws: usize,
    pub max_deviation: f64,
}

/// Empirical sup-deviation distribution over well-conditioned matrices.
#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub k: usize,
    pub n: usize,
    pub epsilon: f64,
    pub threshold: f64,
    pub per_matrix: Vec<MatrixDeviation>,
    /// Fraction of matrices whose max deviation exceeds `threshold`.
    pub exceed_fraction: f64,
}

impl ConcentrationReport {
    /// One CSV row per matrix trial.
    pub fn csv(&self) -> String {
        let mut out = String::from("seed,n,k,epsilon,max_deviation\n");
        for row in &self.per_matrix {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.seed, self.n, self.k, self.epsilon, row.max_deviation
            ));
        }
        out
    }

    pub fn median_max_deviation(&self) -> f64 {
        let mut devs: Vec<f64> = self.per_matrix.iter().map(|r| r.max_deviation).collect();
        devs.sort_by(f64::total_cmp);
        let mid = devs.len() / 2;
        if devs.len() % 2 == 1 {
            devs[mid]
        } else {
            0.5 * (devs[mid - 1] + devs[mid])
        }
    }
}

/// For each of `matrix_trials` Gaussian matrices conditioned by rejection on
/// the well-conditioned set, estimates the sup over sampled `(x, y, u)` of
/// the smoothed-Gram deviation, and reports the per-matrix maxima plus the
/// fraction exceeding `threshold`. Matrix trials run in parallel on derived
/// seeds, so the report does not depend on thread count.
pub fn uniform_concentration_experiment(
    k: usize,
    n: usize,
    epsilon: f64,
    matrix_trials: usize,
    pair_trials: usize,
    threshold: f64,
    seed: u64,
) -> Result<ConcentrationReport, PseudoLipError> {
    if k == 0 || n < k {
        return Err(PseudoLipError::TooFewRows { n, k });
    }
    if !(epsilon > 0.0) {
        return Err(PseudoLipError::NonPositiveEpsilon(epsilon));
    }
    if matrix_trials == 0 || pair_trials == 0 {
        return Err(PseudoLipError::TooFewSamples { min: 1, got: 0 });
    }
    let per_matrix: Vec<MatrixDeviation> = (0..matrix_trials)
        .into_par_iter()
        .map(|i| -> Result<MatrixDeviation, PseudoLipError> {
            let matrix_seed = derive_seed(seed, TAG_CONC_MATRIX, i as u64);
            let (w, theta_draws) = sample_theta_matrix(n, k, matrix_seed)?;
            let max_deviation = concentration_for_matrix(
                &w,
                epsilon,
                pair_trials,
                derive_seed(seed, TAG_CONC_EVAL, i as u64),
            )?;
            Ok(MatrixDeviation {
                seed: matrix_seed,
                theta_draws,
                max_deviation,
            })
        })
        .collect::<Result<_, _>>()?;
    let exceed = per_matrix
        .iter()
        .filter(|r| r.max_deviation > threshold)
        .count() as f64
        / matrix_trials as f64;
    Ok(ConcentrationReport {
        k,
        n,
        epsilon,
        threshold,
        per_matrix,
        exceed_fraction: exceed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wdc::operator_norm;

    fn dv(vals: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(vals)
    }

    #[test]
    fn slab_membership_matches_hand_computed_examples() {
        let spec = PseudoBallSpec::slab(dv(&[2.0]), 0.5).unwrap();
        assert!(
            pseudo_ball_contains(&spec, &dv(&[0.2])).unwrap(),
            "|2 * 0.2| = 0.4 <= 0.5 should be a member"
        );
        assert!(
            !pseudo_ball_contains(&spec, &dv(&[0.3])).unwrap(),
            "|2 * 0.3| = 0.6 > 0.5 should be outside"
        );
        assert!(
            pseudo_ball_contains(&spec, &dv(&[0.0])).unwrap(),
            "the origin belongs to every pseudo-ball"
        );
    }

    #[test]
    fn weighted_slab_membership_matches_hand_computed_examples() {
        let spec =
            PseudoBallSpec::weighted_slab(DMatrix::from_row_slice(1, 1, &[1.0]), 1.0, dv(&[1.0]))
                .unwrap();
        assert!(
            pseudo_ball_contains(&spec, &dv(&[0.5])).unwrap(),
            "|0.5| * 1 = 0.5 <= 1 * 1 should be a member"
        );
        assert!(
            !pseudo_ball_contains(&spec, &dv(&[2.0])).unwrap(),
            "|2| * 1 = 2 > 1 should be outside"
        );
        assert!(pseudo_ball_contains(&spec, &dv(&[0.0])).unwrap());
    }

    #[test]
    fn membership_is_symmetric_under_negation() {
        let mut rng = rng_from_seed(11);
        let slab = PseudoBallSpec::slab(dv(&[1.5, -0.3, 0.8]), 0.4).unwrap();
        let m = gaussian_matrix(20, 3, 1.0, &mut rng);
        let u = unit_vector(3, &mut rng);
        let weighted = PseudoBallSpec::weighted_slab(m, 0.02, u).unwrap();
        for spec in [&slab, &weighted] {
            for i in 0..300 {
                // Radii straddle the boundary so both outcomes occur.
                let v = unit_vector(3, &mut rng) * (0.001 + 0.02 * i as f64);
                let pos = pseudo_ball_contains(spec, &v).unwrap();
                let neg = pseudo_ball_contains(spec, &(-&v)).unwrap();
                assert_eq!(pos, neg, "membership must be symmetric, point {i}");
            }
        }
    }

    #[test]
    fn midpoint_of_members_is_member() {
        let mut rng = rng_from_seed(12);
        let slab = PseudoBallSpec::slab(dv(&[1.0, 2.0, -1.0, 0.5]), 0.3).unwrap();
        let m = gaussian_matrix(30, 4, 1.0, &mut rng);
        let u = unit_vector(4, &mut rng);
        let weighted = PseudoBallSpec::weighted_slab(m, 0.05, u).unwrap();
        for spec in [&slab, &weighted] {
            let gauge = Gauge::new(spec);
            for i in 0..200 {
                // Scale random directions to strictly interior members.
                let mut member = || loop {
                    let g = unit_vector(4, &mut rng);
                    let s = gauge.value(&g);
                    if s > 1e-12 {
                        let f: f64 = rng.random();
                        return g * (0.95 * f * gauge.bound / s);
                    }
                };
                let a = member();
                let b = member();
                assert!(pseudo_ball_contains(spec, &a).unwrap());
                assert!(pseudo_ball_contains(spec, &b).unwrap());
                let mid = (&a + &b) * 0.5;
                assert!(
                    pseudo_ball_contains(spec, &mid).unwrap(),
                    "midpoint of two members left the set at rep {i}"
                );
            }
        }
    }

    #[test]
    fn constructors_reject_invalid_parameters() {
        assert!(matches!(
            PseudoBallSpec::slab(dv(&[1.0]), 0.0),
            Err(PseudoLipError::NonPositiveEpsilon(_))
        ));
        assert!(matches!(
            PseudoBallSpec::weighted_slab(DMatrix::from_row_slice(1, 1, &[1.0]), -1.0, dv(&[1.0])),
            Err(PseudoLipError::NonPositiveThreshold(_))
        ));
        assert!(matches!(
            PseudoBallSpec::weighted_slab(DMatrix::from_row_slice(1, 1, &[1.0]), 1.0, dv(&[2.0])),
            Err(PseudoLipError::NonUnitVector(_))
        ));
        let spec = PseudoBallSpec::slab(dv(&[1.0, 1.0]), 1.0).unwrap();
        assert!(matches!(
            pseudo_ball_contains(&spec, &dv(&[1.0])),
            Err(PseudoLipError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn volume_fraction_saturates_for_huge_threshold() {
        let spec = PseudoBallSpec::weighted_slab(
            DMatrix::from_row_slice(1, 1, &[1.0]),
            1e12,
            dv(&[1.0]),
        )
        .unwrap();
        let cert = volume_fraction(&spec, 1.0, 2000, 3).unwrap();
        assert_eq!(cert.gamma_estimate, 1.0, "a huge threshold captures everything");
    }

    #[test]
    fn volume_fraction_matches_interval_geometry_in_1d() {
        // |2v| <= 1 inside the radius-1 interval captures exactly half.
        let spec = PseudoBallSpec::slab(dv(&[2.0]), 1.0).unwrap();
        let cert = volume_fraction(&spec, 1.0, 200_000, 4).unwrap();
        let se = cert.standard_error();
        assert!(
            (cert.gamma_estimate - 0.5).abs() <= 5.0 * se,
            "estimate {} is not within 5 standard errors ({}) of 0.5",
            cert.gamma_estimate,
            se
        );
        assert_eq!(cert.analytic_lower_bound, 0.0, "slabs record the trivial bound");
    }

    #[test]
    fn volume_fraction_weighted_slab_meets_analytic_bound() {
        // Conditioned matrix, t = (2 eps)^2 / 4 and delta = eps^2 / 82 with
        // eps = 0.2: the closed form gives 1 - 72/(82 sqrt(pi)) ~ 0.5046.
        let eps = 0.2f64;
        let (m, _) = sample_theta_matrix(100, 4, 21).unwrap();
        let mut rng = rng_from_seed(22);
        let u = unit_vector(4, &mut rng);
        let spec = PseudoBallSpec::weighted_slab(m, eps * eps, u).unwrap();
        let delta = eps * eps / 82.0;
        let cert = volume_fraction(&spec, delta, 100_000, 23).unwrap();
        let expected_bound = 1.0 - 72.0 / (82.0 * PI.sqrt());
        assert!(
            (cert.analytic_lower_bound - expected_bound).abs() < 1e-12,
            "closed-form bound {} should be {}",
            cert.analytic_lower_bound,
            expected_bound
        );
        let se = cert.standard_error();
        assert!(
            cert.gamma_estimate >= 0.5 - 3.0 * se,
            "captured fraction {} fell below 1/2 - 3se (se = {})",
            cert.gamma_estimate,
            se
        );
        assert!(
            cert.gamma_estimate >= cert.analytic_lower_bound - 3.0 * se,
            "captured fraction {} fell below the closed-form bound {} - 3se",
            cert.gamma_estimate,
            cert.analytic_lower_bound
        );
    }

    #[test]
    fn volume_fraction_rejects_bad_inputs() {
        let spec = PseudoBallSpec::slab(dv(&[1.0]), 1.0).unwrap();
        assert!(matches!(
            volume_fraction(&spec, 0.0, 2000, 0),
            Err(PseudoLipError::NonPositiveDelta(_))
        ));
        assert!(matches!(
            volume_fraction(&spec, 1.0, 999, 0),
            Err(PseudoLipError::TooFewSamples { min: 1000, got: 999 })
        ));
    }

    #[test]
    fn net_on_interval_has_exactly_two_centers() {
        // B = [-1, 1] contains the half-set entirely, so {+1, -1} suffices.
        let spec = PseudoBallSpec::slab(dv(&[1.0]), 1.0).unwrap();
        let net = build_aspherical_net(&spec, 0.5, 50, 7).unwrap();
        assert_eq!(net.len(), 2, "the 0-sphere needs exactly two centers");
        assert_eq!(net.centers[0], dv(&[1.0]), "the scan starts at +1");
        assert_eq!(net.centers[1], dv(&[-1.0]));
        for y in &net.perturbed {
            let r = y.norm();
            assert!(
                (0.75..=1.25).contains(&r),
                "perturbed point must stay in the shell, got radius {r}"
            );
        }
    }

    #[test]
    fn net_on_circle_respects_size_bound_and_coverage() {
        let spec = PseudoBallSpec::slab(dv(&[3.0, 1.0]), 0.4).unwrap();
        let delta = 0.5;
        let scan = 20_000;
        let net = build_aspherical_net(&spec, delta, scan, 9).unwrap();
        assert!(!net.is_empty());

        // Size against the wideness bound, shrunk by 3 standard errors.
        let cert = volume_fraction(&spec, delta, 100_000, 10).unwrap();
        let gamma_low = cert.gamma_estimate - 3.0 * cert.standard_error();
        assert!(gamma_low > 0.0);
        let bound = net_size_bound(gamma_low, delta, 2);
        assert!(
            (net.len() as f64) <= bound,
            "net size {} exceeds the covering bound {}",
            net.len(),
            bound
        );

        // Shell membership of every perturbed point.
        for y in &net.perturbed {
            let r = y.norm();
            assert!(
                r >= 1.0 - delta / 2.0 - 1e-12 && r <= 1.0 + delta / 2.0 + 1e-12,
                "perturbed radius {r} left the shell"
            );
        }

        // Every scanned point is covered by a center's half-set and by the
        // perturbed translates of the full pseudo-ball.
        let points = net_scan_points(2, scan);
        for (i, z) in points.iter().enumerate() {
            let by_center = net
                .centers
                .iter()
                .any(|c| half_intersection_contains(&spec, delta, &(z - c)).unwrap());
            assert!(by_center, "scan point {i} not covered by any center half-set");
            assert!(
                net.covers(&spec, z).unwrap(),
                "scan point {i} not covered by any perturbed translate"
            );
        }
    }

    #[test]
    fn net_centers_are_pairwise_separated() {
        let spec = PseudoBallSpec::slab(dv(&[3.0, 1.0]), 0.4).unwrap();
        let delta = 0.5;
        let net = build_aspherical_net(&spec, delta, 5_000, 13).unwrap();
        for j1 in 0..net.len() {
            for j2 in 0..net.len() {
                if j1 == j2 {
                    continue;
                }
                let diff = &net.centers[j1] - &net.centers[j2];
                assert!(
                    !half_intersection_contains(&spec, delta, &diff).unwrap(),
                    "centers {j1} and {j2} are too close: difference in the half-set"
                );
            }
        }
    }

    #[test]
    fn net_rejects_bad_dimension_and_delta() {
        let spec7 = PseudoBallSpec::slab(DVector::from_element(7, 1.0), 1.0).unwrap();
        assert!(matches!(
            build_aspherical_net(&spec7, 0.5, 100, 0),
            Err(PseudoLipError::DimensionOutOfRange(7))
        ));
        let spec = PseudoBallSpec::slab(dv(&[1.0, 1.0]), 1.0).unwrap();
        assert!(matches!(
            build_aspherical_net(&spec, 1.0, 100, 0),
            Err(PseudoLipError::DeltaOutOfRange(_))
        ));
        assert!(matches!(
            build_aspherical_net(&spec, -0.5, 100, 0),
            Err(PseudoLipError::DeltaOutOfRange(_))
        ));
        assert!(matches!(
            build_aspherical_net(&spec, 0.5, 0, 0),
            Err(PseudoLipError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn net_perturbation_rejection_cap_fires_on_degenerate_slab() {
        // A slab of essentially zero width: the scan still succeeds (every
        // point covers itself) but no box draw ever lands in the half-set.
        let spec = PseudoBallSpec::slab(dv(&[1.0, 0.0]), 1e-300).unwrap();
        let err = build_aspherical_net(&spec, 0.5, 40, 17).unwrap_err();
        assert!(
            matches!(err, PseudoLipError::BoxRejectionCap { center: 0, .. }),
            "expected the box rejection cap, got {err:?}"
        );
    }

    #[test]
    fn net_center_cap_fires_when_nothing_covers_anything() {
        // Essentially zero-width slab again, but with more scan points than
        // the center cap: every point needs its own center.
        let spec = PseudoBallSpec::slab(dv(&[1.0, 0.0]), 1e-300).unwrap();
        let err = build_aspherical_net(&spec, 0.01, NET_CENTER_CAP + 5_000, 17).unwrap_err();
        assert!(
            matches!(err, PseudoLipError::CenterCap { .. }),
            "expected the center cap, got {err:?}"
        );
    }

    #[test]
    fn half_set_membership_is_the_doubled_full_set_test() {
        let spec = PseudoBallSpec::slab(dv(&[2.0, 1.0]), 0.5).unwrap();
        let mut rng = rng_from_seed(19);
        for _ in 0..200 {
            let v = unit_vector(2, &mut rng) * (0.3 * rng.random::<f64>());
            let expected = v.norm() <= 0.25 && pseudo_ball_contains(&spec, &(&v * 2.0)).unwrap();
            assert_eq!(
                half_intersection_contains(&spec, 0.5, &v).unwrap(),
                expected
            );
        }
    }

    #[test]
    fn pl_check_zero_matrix_and_zero_perturbations_give_zero() {
        let m = DMatrix::zeros(10, 3);
        let mut rng = rng_from_seed(31);
        let u = unit_vector(3, &mut rng);
        let dev = pseudo_lipschitz_check(&m, &u, 0.2, 50, 5).unwrap();
        assert_eq!(dev, 0.0, "the zero matrix has identically zero quadratic");

        let (m, _) = sample_theta_matrix(20, 3, 32).unwrap();
        let u = unit_vector(3, &mut rng);
        // A single trial runs with zero perturbations only.
        let dev = pseudo_lipschitz_check(&m, &u, 0.2, 1, 6).unwrap();
        assert_eq!(dev, 0.0, "zero perturbations cannot move the quadratic");
    }

    #[test]
    fn pl_check_stays_below_epsilon_at_reference_scale() {
        let (m, _) = sample_theta_matrix(100, 4, 41).unwrap();
        let mut rng = rng_from_seed(42);
        let u = unit_vector(4, &mut rng);
        let eps = 0.2;
        let dev = pseudo_lipschitz_check(&m, &u, eps, 1000, 43).unwrap();
        assert!(
            dev <= eps + 1e-9,
            "observed deviation {dev} exceeds the contract {eps}"
        );
        assert!(
            dev > 1e-4,
            "boundary perturbations should move the quadratic measurably, got {dev}"
        );
    }

    #[test]
    fn pl_check_bound_holds_across_epsilons_and_seeds() {
        let mut rng = rng_from_seed(51);
        for eps in [0.05, 0.2, 0.5] {
            for seed in [1u64, 2] {
                let m = gaussian_matrix(40, 3, 1.0, &mut rng);
                let u = unit_vector(3, &mut rng);
                let dev = pseudo_lipschitz_check(&m, &u, eps, 100, seed).unwrap();
                assert!(
                    dev <= eps + 1e-9,
                    "deviation {dev} exceeded {eps} at seed {seed}"
                );
            }
        }
    }

    #[test]
    fn pl_check_rejects_bad_inputs() {
        let m = DMatrix::zeros(5, 3);
        let unit = dv(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            pseudo_lipschitz_check(&m, &unit, 0.0, 10, 0),
            Err(PseudoLipError::NonPositiveEpsilon(_))
        ));
        assert!(matches!(
            pseudo_lipschitz_check(&m, &dv(&[2.0, 0.0, 0.0]), 0.1, 10, 0),
            Err(PseudoLipError::NonUnitVector(_))
        ));
        assert!(matches!(
            pseudo_lipschitz_check(&m, &dv(&[1.0]), 0.1, 10, 0),
            Err(PseudoLipError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            pseudo_lipschitz_check(&m, &unit, 0.1, 0, 0),
            Err(PseudoLipError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn theta_sampling_returns_members_and_respects_the_cap() {
        let (w, draws) = sample_theta_matrix(30, 3, 61).unwrap();
        assert!(in_theta(&w), "returned matrix must be well-conditioned");
        assert!(draws >= 1);

        // At k = 1 the row cap sqrt(2) fails per row with probability ~0.16,
        // so 200 rows pass together with probability ~e^{-34}: hopeless.
        let err = sample_theta_matrix(200, 1, 62).unwrap_err();
        assert!(
            matches!(err, PseudoLipError::ThetaRejectionCap { n: 200, k: 1, .. }),
            "expected the rejection cap, got {err:?}"
        );
    }

    #[test]
    fn concentration_of_scalar_identity_is_one_half() {
        let w = DMatrix::from_row_slice(1, 1, &[1.0]);
        let dev = concentration_for_matrix(&w, 0.1, 16, 63).unwrap();
        assert!(
            (dev - 0.5).abs() <= 1e-15,
            "scalar deviation should be exactly 1/2, got {dev}"
        );
    }

    #[test]
    fn concentration_deviation_invariant_under_saturated_scaling() {
        // With every |w_i.x| and |w_i.y| at least eps, the smoothed step
        // saturates to exact 0/1 values, so positive rescalings >= 1 change
        // nothing: power-of-two scalings are bitwise invariant.
        let eps = 0.05;
        let mut rng = rng_from_seed(71);
        let (w, x, y) = loop {
            let w = gaussian_matrix(30, 3, 1.0, &mut rng);
            let x = unit_vector(3, &mut rng);
            let y = unit_vector(3, &mut rng);
            let wx = &w * &x;
            let wy = &w * &y;
            let margin = wx
                .iter()
                .chain(wy.iter())
                .fold(f64::INFINITY, |m, z| m.min(z.abs()));
            if margin >= eps {
                break (w, x, y);
            }
        };
        let u = unit_vector(3, &mut rng);
        let n = w.nrows() as f64;
        let dev_at = |x: &DVector<f64>, y: &DVector<f64>| -> f64 {
            let f = smoothed_quadratic(&w, x, y, &u, eps, StepSide::Upper).unwrap() / n;
            let g = (&q_matrix(x, y).unwrap().matrix * &u).dot(&u);
            f - g
        };
        let base = dev_at(&x, &y);
        for c in [2.0, 4.0] {
            let scaled = dev_at(&(&x * c), &(&y * c));
            assert_eq!(
                scaled.to_bits(),
                base.to_bits(),
                "saturated deviation must be bitwise invariant under x{c}"
            );
        }
        let tripled = dev_at(&(&x * 3.0), &(&y * 3.0));
        assert!(
            (tripled - base).abs() <= 1e-12,
            "saturated deviation drifted under x3: {tripled} vs {base}"
        );
    }

    #[test]
    fn concentration_median_shrinks_with_more_rows() {
        let narrow = uniform_concentration_experiment(8, 80, 0.1, 5, 300, 1.0, 81).unwrap();
        let wide = uniform_concentration_experiment(8, 240, 0.1, 5, 300, 1.0, 81).unwrap();
        assert!(
            wide.median_max_deviation() < narrow.median_max_deviation(),
            "median deviation should shrink with more rows: {} !< {}",
            wide.median_max_deviation(),
            narrow.median_max_deviation()
        );
        for report in [&narrow, &wide] {
            for row in &report.per_matrix {
                assert!(row.theta_draws >= 1);
                assert!(row.max_deviation.is_finite());
            }
        }
    }

    #[test]
    fn concentration_report_is_deterministic_and_csv_shaped() {
        let a = uniform_concentration_experiment(2, 10, 0.2, 3, 50, 0.3, 91).unwrap();
        let b = uniform_concentration_experiment(2, 10, 0.2, 3, 50, 0.3, 91).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap(),
            "identical seeds must reproduce the report exactly"
        );
        let csv = a.csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 3, "header plus one row per matrix");
        assert_eq!(lines[0], "seed,n,k,epsilon,max_deviation");
        assert!(
            (0.0..=1.0).contains(&a.exceed_fraction),
            "exceed fraction is a probability"
        );
    }

    #[test]
    fn concentration_rejects_invalid_sizes() {
        assert!(matches!(
            uniform_concentration_experiment(5, 4, 0.1, 1, 1, 1.0, 0),
            Err(PseudoLipError::TooFewRows { n: 4, k: 5 })
        ));
        assert!(matches!(
            uniform_concentration_experiment(0, 4, 0.1, 1, 1, 1.0, 0),
            Err(PseudoLipError::TooFewRows { .. })
        ));
        assert!(matches!(
            uniform_concentration_experiment(2, 4, -0.1, 1, 1, 1.0, 0),
            Err(PseudoLipError::NonPositiveEpsilon(_))
        ));
        assert!(matches!(
            uniform_concentration_experiment(2, 4, 0.1, 0, 1, 1.0, 0),
            Err(PseudoLipError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn scan_points_start_at_the_first_basis_vector_and_are_unit() {
        let pts = net_scan_points(3, 500);
        assert_eq!(pts.len(), 500);
        assert_eq!(pts[0], dv(&[1.0, 0.0, 0.0]));
        for p in &pts {
            assert!((p.norm() - 1.0).abs() < 1e-12, "scan points live on the sphere");
        }
        assert_eq!(default_scan_size(3), 30_000);
    }

    #[test]
    fn gauge_and_operator_norm_agree_on_weighted_slab_scale() {
        // Sanity link between modules: a weighted slab built from a matrix
        // with tiny operator norm accepts proportionally larger vectors.
        let m = DMatrix::from_row_slice(2, 2, &[0.01, 0.0, 0.0, 0.01]);
        assert!(operator_norm(&m) < 0.02);
        let spec =
            PseudoBallSpec::weighted_slab(m, 1.0, dv(&[1.0, 0.0])).unwrap();
        // gauge(v) = sum_i |M_i v| (M_i u)^2 = |0.01 v_1| * 1e-4 <= 2.
        assert!(pseudo_ball_contains(&spec, &dv(&[1000.0, 1000.0])).unwrap());
    }
}
