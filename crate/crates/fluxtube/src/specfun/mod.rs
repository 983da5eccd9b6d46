//! Numeric substrate: modified Bessel functions of real order and adaptive
//! quadrature. Everything here is a pure function of its arguments.

pub mod bessel;
pub mod quad;

pub use bessel::{
    bessel_i, bessel_k, bessel_k_logderiv, bessel_k_scaled, ln_bessel_i, ln_bessel_k, KScaled,
};
pub use quad::{
    integrate, integrate_piecewise, integrate_piecewise_rel, integrate_rel, integrate_to_infinity,
    QuadratureResult,
};
