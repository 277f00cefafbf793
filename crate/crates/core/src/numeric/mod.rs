//! Monte-Carlo accumulation and adaptive quadrature shared by the checks.

pub mod mc;
pub mod quad;
