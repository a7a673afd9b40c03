//! Fields on the 2-torus, Fourier multipliers and norms.

mod calculus;
mod cutoff;
pub(crate) mod fft;
mod field;
mod modulated;
mod multiplier;
mod norms;
pub mod tfld;

pub use calculus::{grad, invert_gradient, perp_flux, perp_grad, product, product_grid};
pub use cutoff::{
    freq_truncate, lp_block, lp_decompose, lp_max_index, lp_symbol, psi, LPDecomposition,
};
pub use field::{
    from_physical_pair, grid_for, grid_for_band, index, physical_on, physical_pair, wavenumber,
    TorusField, AREA,
};
pub use modulated::{Envelope, Modulated};
pub use multiplier::{apply_multiplier, apply_symbol, riesz_odd_1, riesz_odd_2, Multiplier};
pub use norms::{
    block_norms, linf, norm, norm_with, sampling_grid, xnorm_parts, NormKind, NormOpts,
};
