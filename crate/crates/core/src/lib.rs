//! Transfer-operator calculus for transcendental entire maps
//! `f = P1 + P2(sin(P3))`.
//!
//! The crate is organised bottom-up:
//!
//! * [`map`], [`critical`], [`orbit`] model the map, its critical data and
//!   forward orbits with chain-rule derivatives.
//! * [`gamma`] and [`quadrature`] provide the rational kernels
//!   `γ_a(z) = a(a−1)/(z(z−1)(z−a))`, their finite combinations and plane L1
//!   quadrature.
//! * [`ruelle`] applies the transfer operator in closed form on the γ span and
//!   by direct inverse-branch summation.
//! * [`series`], [`summability`] and [`relation`] build the Poincaré series,
//!   classify critical values and compute the Ψ relation.
//! * [`harness`] packages the plane-integration checks.

pub mod critical;
pub mod error;
pub mod gamma;
pub mod gauss;
pub mod harness;
pub mod map;
pub mod orbit;
pub mod poly;
pub mod presets;
pub mod quadrature;
pub mod relation;
pub mod ruelle;
pub mod series;
pub mod serde_complex;
pub mod sum;
pub mod summability;

pub use num_complex::Complex64;

pub use critical::{CriticalData, CriticalEntry, ValueClass};
pub use error::{Error, Result};
pub use gamma::{GammaCombination, GammaTerm};
pub use map::{EntireMap, Normalization};
pub use orbit::{Boundedness, OrbitData};
pub use quadrature::QuadratureConfig;

