//! Counting `psi`-approximations, the block identity with the Siegel
//! transform, and the Monte Carlo experiments built on them.

pub mod count;
pub mod experiment;
pub mod psi;

pub use count::{
    count_sk_direct, count_sk_plus, count_sk_siegel, count_tn, scale_params, CountResult, Hit,
    Normalization, Real, ScaleParams, Side,
};
pub use experiment::{khintchine_experiment, khintchine_experiment_at, precise_draw, variance_probe, KhintchineReport, VarianceReport};
pub use psi::{eval_psi, sum_psi, ApproxFn, Extension};
