//! Numerical experiments for compressed sensing under deep generative priors.
//!
//! The object of study is an expansive feed-forward ReLU network
//! `G(x) = relu(W^(d) ... relu(W^(1) x))` used as a signal prior: one observes
//! `y = A G(x*) + e` for a known measurement matrix `A` and tries to recover
//! the latent code `x*` by descending the empirical risk
//! `f(x) = 1/2 ||A G(x) - y||^2`.
//!
//! The crate is organised around the deterministic quantities that make (or
//! break) that program:
//!
//! * [`network`] — network containers, forward evaluation, activation-pattern
//!   submatrices, Gaussian weight sampling, and an explicit collision
//!   construction showing that a one-layer network with fewer than `2k` rows
//!   is never injective.
//! * [`wdc`] — the weight distribution condition: closed-form Gaussian
//!   expectations of activated Gram matrices `W_{+,x}^T W_{+,y}`, smoothed
//!   one-sided surrogates, and seeded deviation sweeps.
//! * [`pseudolip`] — pseudo-balls, wideness certificates, aspherical nets on
//!   the sphere, and pseudo-Lipschitz concentration experiments that drive
//!   the uniform-over-the-sphere argument at small expansion factors.
//! * [`recover`] — measurement models, subgradient descent with a negation
//!   check, restricted isometry deviations over network range differences,
//!   and landscape scans that census the basins of the empirical risk.
//! * [`harness`] — seeded, grid-structured experiment sweeps with
//!   deterministic CSV/JSON reports, shared by the `genprior` command-line
//!   binary.
//!
//! Everything that draws randomness takes an explicit `u64` seed and routes
//! it through [`sampling::derive_seed`], so reports are reproducible bit for
//! bit regardless of thread count.

pub mod harness;
pub mod network;
pub mod pseudolip;
pub mod recover;
pub mod sampling;
pub mod wdc;
