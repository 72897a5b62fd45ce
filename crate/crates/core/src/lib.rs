//! Second- and higher-order tensor pooling with eigenvalue power
//! normalization (EPN).
//!
//! The crate covers the whole numeric pipeline:
//!
//! * [`tensor`]: dense tensors, weighted outer-product pooling, mode products
//!   and unfoldings;
//! * [`spectral`]: symmetric eigendecomposition, the scalar EPN family
//!   (Gamma, MaxExp, AsinhE, SigmE, HDP), matrix EPN, Grassmann projectors,
//!   precision/Laplacian inversion and the heat kernel;
//! * [`hosvd`]: HOSVD of super-symmetric order-3 tensors, the κ-normalized
//!   spectral detector, EPN on the core tensor and the Tensor Power
//!   Euclidean dot product and distance;
//! * [`analysis`]: parametrizations between MaxExp, Gamma and the heat
//!   diffusion process, bound certification, ODE residuals and figure data;
//! * [`gradients`]: analytic derivatives through eigendecompositions, matrix
//!   EPN and HOSVD factors, with a finite-difference oracle;
//! * [`sketch`]: count-sketch dimensionality reduction;
//! * [`io`]: the `HOTP1` binary tensor format and CSV readers/writers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod gradients;
pub mod hosvd;
pub mod io;
pub mod sketch;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
pub use hosvd::HosvdFactors;
pub use spectral::{EigenDecomposition, PnKind, PnSpec};
pub use tensor::{DenseTensor, FeatureSet};

/// Name of the pseudo-random generator behind every seeded routine.
pub const RNG_NAME: &str = "ChaCha8Rng";

/// Seeded generator used across the crate.
pub fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
