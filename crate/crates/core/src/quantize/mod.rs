//! Quantization of symbols: toroidal operators and Fourier multipliers,
//! Kohn–Nirenberg and Weyl operators on truncated Euclidean boxes, and the
//! Moyal product.

mod euclidean;
mod moyal;
mod toroidal;

pub use euclidean::{
    kn_apply_euclidean, weyl_apply, weyl_matrix, DenseMatrix, EuclideanGrid, EuclideanSamples,
    OperatorOutput, BOUNDARY_MASS_LIMIT,
};
pub use moyal::{
    composition_identity_residual, moyal_product, CompositionResidual, MoyalProduct, PhaseGrid,
    MOYAL_COST_LIMIT,
};
pub use toroidal::{
    apply_multiplier, apply_multiplier_spectral, apply_toroidal, apply_toroidal_direct,
    apply_toroidal_spectral, freeze, freeze_node,
};
