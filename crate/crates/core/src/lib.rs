//! Fully-discrete complex Ginzburg-Landau system with dynamic boundary
//! conditions on a staggered interval mesh.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: meshes, node-set tagged grid functions and the discrete calculus.
//! - [`weights`]: Carleman weight family and its parameter regime.
//! - [`dynamics`]: implicit forward and adjoint solvers with exact discrete duality.
//! - [`carleman`]: term-by-term evaluation of the weighted estimate.
//! - [`control`]: energy estimate, observability quotient and penalized HUM.

pub mod carleman;
pub mod control;
pub mod dynamics;
pub mod grid;
pub mod weights;

use thiserror::Error;

pub use num_complex::Complex64;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Grid(#[from] grid::GridError),
    #[error(transparent)]
    Weights(#[from] weights::WeightError),
    #[error(transparent)]
    Dynamics(#[from] dynamics::DynamicsError),
    #[error(transparent)]
    Carleman(#[from] carleman::CarlemanError),
    #[error(transparent)]
    Control(#[from] control::ControlError),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Deterministic generator used for every random field in the crate.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}

/// SplitMix64 finaliser; derives independent per-cell seeds from one root seed.
pub fn derive_seed(root: u64, index: u64) -> u64 {
    let mut z = root.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
