//! The homogeneous space `X = SL2(R)/SL2(Z)` of unimodular planar lattices.

pub mod group;
pub mod horocycle;
pub mod lattice;

pub use group::{diag_a, shear_u, GroupElement, Mat2, PElement};
pub use horocycle::{snap_to_integer, translate_point, CountInterval, TranslatePoint};
pub use lattice::{
    act, act_p, gauss_reduce, haar_sample, hermite_bound, primitive_points_in_rect, siegel_count,
    siegel_count_with_budget, systole, zeta2_inv, Rect, UnimodularLattice, DEFAULT_BUDGET,
};
