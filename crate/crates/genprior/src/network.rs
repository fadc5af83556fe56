//! Expansive ReLU networks and their activation-pattern algebra.
//!
//! A generative network here is a fixed composition of affine-free layers
//! `G(x) = relu(W^(d) ... relu(W^(2) relu(W^(1) x)))` with `W^(i)` of shape
//! `n_i x n_{i-1}` and `n_0 = k` latent dimensions. Because the ReLU is
//! piecewise linear, `G` is linear on each activation region: writing
//! `W_{+,z}` for `W` with every row `i` zeroed unless `w_i . z > 0` strictly,
//! the network satisfies
//!
//! ```text
//!     G(x) = W^(d)_{+,x^(d)} ... W^(1)_{+,x^(1)} x ,
//! ```
//!
//! where `x^(1) = x` and `x^(i+1) = relu(W^(i) x^(i))` is the input reaching
//! layer `i+1`. The accumulated product on the right is the local linearity
//! of `G` and the transpose chain of the risk subgradient, so it is exposed
//! directly by [`hidden_trace`].
//!
//! The module also provides the negative result that motivates expansion:
//! [`construct_collision`] builds, for any single layer with `m <= 2k - 1`
//! rows, two latent points `x != y` with `relu(W x) = relu(W y)` and
//! separation `||x - y|| >= 1/B`, `B` the largest row norm. No amount of
//! measurement cleverness can undo such a collision, which is why all
//! recovery experiments in this crate run at expansion `m >= 2k`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::sampling::{self, rng_from_seed};

/// Latent code: a real vector of length `n_0 = k`.
pub type LatentVector = DVector<f64>;

/// Rows of a spanning subset are accepted while their residual norm exceeds
/// this multiple of the largest row norm; below it the row is dependent.
const RANK_TOL: f64 = 1e-10;

/// A `lambda` below this is treated as an exact rank deficiency in the
/// collision construction.
const LAMBDA_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("a network needs at least one weight matrix")]
    EmptyNetwork,
    #[error("layer {layer} expects input of length {expected}, previous layer produces {got}")]
    LayerChainMismatch {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("layer {layer} contains a non-finite entry")]
    NonFiniteWeight { layer: usize },
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dims must list an input width and at least one layer width, all positive")]
    BadDims,
    #[error("collision construction needs m <= 2k - 1 rows, got m = {m} with k = {k}")]
    TooManyRows { m: usize, k: usize },
    #[error("matrix file I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("matrix file parse: {0}")]
    Parse(String),
}

/// How layer entries are scaled when sampling a Gaussian network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceRule {
    /// Entries are standard normal, `N(0, 1)`.
    Unit,
    /// Entries of an `n_i x n_{i-1}` layer are `N(0, 1/n_i)`, which keeps
    /// `E||relu(W z)||^2 = ||z||^2 / 2` layer over layer.
    OneOverRows,
}

/// Feed-forward ReLU network with validated layer chain.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeNetwork {
    weights: Vec<DMatrix<f64>>,
}

impl GenerativeNetwork {
    /// Wraps the given layers, checking that consecutive shapes compose and
    /// every entry is finite.
    pub fn new(weights: Vec<DMatrix<f64>>) -> Result<Self, NetworkError> {
        if weights.is_empty() {
            return Err(NetworkError::EmptyNetwork);
        }
        for (i, w) in weights.iter().enumerate() {
            if w.nrows() == 0 || w.ncols() == 0 {
                return Err(NetworkError::BadDims);
            }
            if i > 0 && w.ncols() != weights[i - 1].nrows() {
                return Err(NetworkError::LayerChainMismatch {
                    layer: i + 1,
                    expected: w.ncols(),
                    got: weights[i - 1].nrows(),
                });
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(NetworkError::NonFiniteWeight { layer: i + 1 });
            }
        }
        Ok(Self { weights })
    }

    /// Number of layers `d`.
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    /// Widths `n_0, n_1, ..., n_d`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.weights[0].ncols()];
        dims.extend(self.weights.iter().map(DMatrix::nrows));
        dims
    }

    /// Latent dimension `k = n_0`.
    pub fn latent_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    /// Output dimension `n = n_d`.
    pub fn output_dim(&self) -> usize {
        self.weights[self.weights.len() - 1].nrows()
    }

    /// Layer matrices in order of application.
    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    /// Evaluates `G(x)`.
    pub fn forward(&self, x: &LatentVector) -> Result<DVector<f64>, NetworkError> {
        self.check_input(x)?;
        let mut state = x.clone();
        for w in &self.weights {
            state = relu(&(w * state));
        }
        Ok(state)
    }

    /// Smallest absolute pre-activation over all layers and rows; a large
    /// margin means `x` sits well inside one linear region of `G`, so finite
    /// differences of the risk see no kink.
    pub fn activation_margin(&self, x: &LatentVector) -> Result<f64, NetworkError> {
        self.check_input(x)?;
        let mut state = x.clone();
        let mut margin = f64::INFINITY;
        for w in &self.weights {
            let pre = w * state;
            margin = pre.iter().fold(margin, |acc, z| acc.min(z.abs()));
            state = relu(&pre);
        }
        Ok(margin)
    }

    fn check_input(&self, x: &LatentVector) -> Result<(), NetworkError> {
        if x.len() != self.latent_dim() {
            return Err(NetworkError::DimensionMismatch {
                expected: self.latent_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Per-layer inputs and the accumulated activation-pattern product at `x`.
#[derive(Debug, Clone)]
pub struct HiddenTrace {
    /// `states[i]` is `x^(i+1)`, the vector entering layer `i+1`; in
    /// particular `states[0]` is `x` itself.
    pub states: Vec<DVector<f64>>,
    /// `W^(d)_{+,x^(d)} ... W^(1)_{+,x^(1)}`, an `n x k` matrix with
    /// `active_product * x = G(x)` up to floating-point reassociation.
    pub active_product: DMatrix<f64>,
}

/// `relu` applied entrywise.
fn relu(v: &DVector<f64>) -> DVector<f64> {
    v.map(|z| z.max(0.0))
}

/// `W` with row `i` zeroed unless `w_i . x > 0` strictly; a zero
/// pre-activation deactivates the row, matching `relu'(0) = 0`.
pub fn active_submatrix(w: &DMatrix<f64>, x: &DVector<f64>) -> Result<DMatrix<f64>, NetworkError> {
    if w.ncols() != x.len() {
        return Err(NetworkError::DimensionMismatch {
            expected: w.ncols(),
            got: x.len(),
        });
    }
    let pre = w * x;
    let mut out = w.clone();
    for (i, z) in pre.iter().enumerate() {
        if *z <= 0.0 {
            out.row_mut(i).fill(0.0);
        }
    }
    Ok(out)
}

/// Runs the forward pass once, recording every layer input and the
/// accumulated activation-pattern product.
pub fn hidden_trace(net: &GenerativeNetwork, x: &LatentVector) -> Result<HiddenTrace, NetworkError> {
    net.check_input(x)?;
    let mut states = Vec::with_capacity(net.depth());
    let mut state = x.clone();
    let mut product: Option<DMatrix<f64>> = None;
    for w in net.weights() {
        states.push(state.clone());
        let active = active_submatrix(w, &state)?;
        product = Some(match product {
            None => active.clone(),
            Some(p) => &active * p,
        });
        state = relu(&(w * state));
    }
    Ok(HiddenTrace {
        states,
        active_product: product.expect("networks have at least one layer"),
    })
}

/// Samples a network with independent Gaussian layers from `dims`
/// (latent width first). Deterministic in `seed`; layers consume the stream
/// in order, entries in row-major order.
pub fn sample_gaussian_network(
    dims: &[usize],
    rule: VarianceRule,
    seed: u64,
) -> Result<GenerativeNetwork, NetworkError> {
    if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
        return Err(NetworkError::BadDims);
    }
    let mut rng = rng_from_seed(seed);
    let mut weights = Vec::with_capacity(dims.len() - 1);
    for i in 1..dims.len() {
        let (rows, cols) = (dims[i], dims[i - 1]);
        let variance = match rule {
            VarianceRule::Unit => 1.0,
            VarianceRule::OneOverRows => 1.0 / rows as f64,
        };
        weights.push(sampling::gaussian_matrix(rows, cols, variance, &mut rng));
    }
    GenerativeNetwork::new(weights)
}

/// For a single layer with too few rows (`m <= 2k - 1`), produces distinct
/// latent points `x != y` with `relu(W x) = relu(W y)`.
///
/// The construction splits the rows into a spanning set `S` (chosen by
/// column-pivoted elimination on `W^T`) and the rest `T`, which then has at
/// most `k - 1` rows. `x` solves `W_S x = (-1, ..., -1)^T`, `v` is a unit
/// null vector of `W_T`, and `y = x + v / lambda` with
/// `lambda = ||W_S v||_inf`: rows in `S` stay non-positive at both points
/// while rows in `T` cannot tell `x` and `y` apart at all. The separation is
/// `||x - y|| = 1/lambda >= 1/B` for `B` the largest row norm. If `W` does
/// not span `R^k` at all (or `lambda` underflows), the pair degenerates to
/// `x = 0` and a unit null vector of the full matrix.
pub fn construct_collision(
    w: &DMatrix<f64>,
) -> Result<(LatentVector, LatentVector), NetworkError> {
    let (m, k) = (w.nrows(), w.ncols());
    if m >= 2 * k {
        return Err(NetworkError::TooManyRows { m, k });
    }
    let rows: Vec<DVector<f64>> = (0..m).map(|i| w.row(i).transpose()).collect();
    let pivots = pivoted_spanning_rows(&rows);

    if pivots.len() < k {
        // W has a nontrivial null space: x = 0 and y in null(W) collide.
        let y = orthonormal_complement_vector(&rows, k);
        return Ok((DVector::zeros(k), y));
    }

    let w_s = DMatrix::from_fn(k, k, |i, j| rows[pivots[i]][j]);
    let rest: Vec<DVector<f64>> = (0..m)
        .filter(|i| !pivots.contains(i))
        .map(|i| rows[i].clone())
        .collect();
    let x = w_s
        .clone()
        .lu()
        .solve(&DVector::from_element(k, -1.0))
        .ok_or_else(|| NetworkError::Parse("spanning block unexpectedly singular".into()))?;

    // |T| = m - k <= k - 1, so W_T always has a unit null vector.
    let v = orthonormal_complement_vector(&rest, k);
    let lambda = (&w_s * &v).amax();
    if lambda < LAMBDA_TOL {
        // v is numerically in null(W_S) as well, hence in null(W).
        return Ok((DVector::zeros(k), v));
    }
    let y = &x + &v / lambda;
    Ok((x, y))
}

/// Column-pivoted elimination on `W^T`: greedily picks the row with the
/// largest residual after orthogonalizing against the rows already picked.
/// Returns the chosen row indices; their count is the numerical rank.
fn pivoted_spanning_rows(rows: &[DVector<f64>]) -> Vec<usize> {
    let mut residuals: Vec<DVector<f64>> = rows.to_vec();
    let scale = residuals.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let mut pivots = Vec::new();
    let k = rows.first().map_or(0, |r| r.len());
    let mut taken = vec![false; rows.len()];
    while pivots.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in residuals.iter().enumerate() {
            if !taken[i] {
                let n = r.norm();
                if best.map_or(true, |(_, bn)| n > bn) {
                    best = Some((i, n));
                }
            }
        }
        let Some((idx, norm)) = best else { break };
        if norm <= RANK_TOL * scale.max(1e-300) {
            break;
        }
        taken[idx] = true;
        pivots.push(idx);
        let q = &residuals[idx] / norm;
        for (i, r) in residuals.iter_mut().enumerate() {
            if !taken[i] {
                let c = q.dot(r);
                *r -= &q * c;
            }
        }
    }
    pivots
}

/// Deterministic unit vector orthogonal to every row in `rows` (which must
/// span a proper subspace of `R^k`). Orthonormalizes the rows, then projects
/// the standard basis vector with the largest residual and re-orthogonalizes
/// twice for a clean `~1e-16` residual.
fn orthonormal_complement_vector(rows: &[DVector<f64>], k: usize) -> DVector<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let scale = rows.iter().map(|r| r.norm()).fold(0.0, f64::max).max(1e-300);
    for r in rows {
        let mut v = r.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v -= q * c;
            }
        }
        let n = v.norm();
        if n > RANK_TOL * scale {
            basis.push(v / n);
        }
    }
    debug_assert!(basis.len() < k, "rows already span R^k; no complement exists");
    let mut best = DVector::zeros(k);
    let mut best_norm = -1.0;
    for j in 0..k {
        let mut v = DVector::zeros(k);
        v[j] = 1.0;
        for q in &basis {
            let c = q.dot(&v);
            v -= q * c;
        }
        let n = v.norm();
        if n > best_norm {
            best_norm = n;
            best = v;
        }
    }
    for _ in 0..2 {
        for q in &basis {
            let c = q.dot(&best);
            best -= q * c;
        }
    }
    let n = best.norm();
    best / n
}

// ---------------------------------------------------------------------------
// Matrix persistence
// ---------------------------------------------------------------------------

/// Writes `rows cols seed_or_zero` followed by row-major entries, one matrix
/// row per line. Entries use the shortest decimal form that parses back to
/// the same `f64`, so a write/read round trip is exact.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>, seed: u64) -> Result<(), NetworkError> {
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), seed);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}", m[(i, j)]);
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a matrix written by [`write_matrix`], returning the entries and the
/// recorded seed (`0` means "none recorded").
pub fn read_matrix(path: &Path) -> Result<(DMatrix<f64>, u64), NetworkError> {
    let text = std::fs::read_to_string(path)?;
    let mut tokens = text.split_whitespace();
    let mut header = |name: &str| -> Result<u64, NetworkError> {
        tokens
            .next()
            .ok_or_else(|| NetworkError::Parse(format!("missing {name} in header")))?
            .parse::<u64>()
            .map_err(|e| NetworkError::Parse(format!("bad {name}: {e}")))
    };
    let rows = header("row count")? as usize;
    let cols = header("column count")? as usize;
    let seed = header("seed")?;
    if rows == 0 || cols == 0 {
        return Err(NetworkError::Parse("matrix dimensions must be positive".into()));
    }
    let mut entries = Vec::with_capacity(rows * cols);
    for tok in tokens {
        let v: f64 = tok
            .parse()
            .map_err(|e| NetworkError::Parse(format!("bad entry {tok:?}: {e}")))?;
        entries.push(v);
    }
    if entries.len() != rows * cols {
        return Err(NetworkError::Parse(format!(
            "expected {} entries, found {}",
            rows * cols,
            entries.len()
        )));
    }
    Ok((DMatrix::from_row_slice(rows, cols, &entries), seed))
}
