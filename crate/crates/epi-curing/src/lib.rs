//! SIS epidemics on weighted directed networks: mean-field simulation,
//! equitable-partition model reduction, exact small-system oracles, and
//! cost-optimal curing allocation.
//!
//! The pieces, bottom up:
//!
//! * [`netmodel`] — contact networks (rate matrices), curing vectors, the
//!   star / bipartite / interconnected-star generators, JSON/CSV interchange.
//! * [`partition`] — equitable partitions, the quotient model (C_out, Q^T,
//!   lifting map), and their serialization.
//! * [`spectral`] — stability modulus, symmetric eigensolvers, log-determinant
//!   and negative-definiteness certificates.
//! * [`nimfa`] — the mean-field ODE system dp/dt = (1−p)∘(Wp) − δ∘p on full
//!   and reduced state spaces: adaptive integration, threshold reports,
//!   steady states.
//! * [`exactsis`] — the exact 2^N Markov chain for small N: transient
//!   marginals by uniformization, quasi-stationary distributions, and a
//!   Gillespie sampler. Used as the ground-truth oracle for the mean-field
//!   bounds.
//! * [`curing`] — the feasibility region Q − diag(Δ) ⪯ 0 and three solvers:
//!   two-level bisection, per-community descent, uniform baseline; plus the
//!   closed forms for stars, two-hub graphs, and complete bipartite graphs.
//! * [`cli`] — the `epi-curing` binary: gen / threshold / simulate /
//!   optimize / sweep with reproducible manifests.
//!
//! Each major capability has a runnable demonstration under `examples/`:
//! `star_closed_forms`, `reduction_equivalence`, `threshold_dichotomy`,
//! `exact_oracle_bounds`, `gillespie_vs_master`, `two_level_bisection`,
//! `general_vs_two_level`, and `curing_sweep`.

pub mod cli;
pub mod curing;
pub mod error;
pub mod exactsis;
pub mod netmodel;
pub mod nimfa;
pub mod partition;
pub mod spectral;

pub use error::{Error, Result};
