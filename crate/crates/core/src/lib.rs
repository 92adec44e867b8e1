//! Cubature of the biharmonic potential `∫ |x-y|^{4-n} f(y) dy` in `n` dimensions
//! with Gaussian-type basis functions.
//!
//! Small `n` can use the direct radial lattice sum ([`kernels::direct_cubature`]).
//! For separated densities the [`engine`] reduces the n-dimensional sum to
//! one-dimensional convolutions and a one-dimensional quadrature
//! ([`quad::DEQuadrature`]), which scales to very high dimension.

pub mod cli;
pub mod engine;
pub mod error;
pub mod kernels;
pub mod quad;
pub mod specfun;

pub use engine::{
    build_test_density, conv1d, evaluate, evaluate_symmetric, saturation_epsilon0, AxisPoint,
    IsotropicGaussianPolyDensity, SaturationReport, SeparatedDensity, SeparatedTerm,
};
pub use error::{Error, Result};
pub use kernels::{direct_cubature, phi2, phi2m, BasisOrder, Dimension, GridSpec, Method, PotentialSample};
pub use quad::{integral_phi2, DENode, DEQuadrature};
