//! Exact-arithmetic toolkit for the circle method over F_q(t).
//!
//! The crate provides, at desk scale and with every identity checkable
//! exactly:
//!
//! * [`field`], [`poly`], [`laurent`], [`cyclo`], [`matrix`] — arithmetic for
//!   F_q, O = F_q[t], the completion K_inf, the cyclotomic integers
//!   Z[zeta_{4p}] holding character-sum values, and Smith normal forms.
//! * [`farey`] — generalised lines in T^2, the two-dimensional Farey
//!   dissection of T^2 into ultrametric balls, and exhaustive verifiers for
//!   its Diophantine spacing properties.
//! * [`quadpair`] — the pencil spanned by a pair of quadratic forms:
//!   determinant form, bad pairs, Smith-reduced forms, dual forms, the dual
//!   variety and the bad-prime divisor.
//! * [`expsum`] — complete quadratic exponential sums: brute-force oracles,
//!   closed-form evaluations, Gauss/Kloosterman/Salie sums, multiplicativity
//!   and bound-margin checks.
//! * [`charsum`] — Hecke characters at infinity, Dirichlet characters modulo
//!   a polynomial, L-polynomials with their degree/root-magnitude
//!   verification, and square-free twisted sums.
//! * [`circle`] — the counting pipeline: lattice counts, theta-style sums
//!   S(alpha), exact exponential integrals, the per-cell Poisson identity,
//!   singular series and singular integral, and the computable minor-arc
//!   sums.

pub mod binform;
pub mod charsum;
pub mod circle;
pub mod config;
pub mod cyclo;
pub mod error;
pub mod expsum;
pub mod farey;
pub mod field;
pub mod laurent;
pub mod matrix;
pub mod poly;
pub mod quadpair;

pub use error::{Error, Result};
