//! Numerical building blocks: cylinder functions, quadrature rules, damped least squares, and
//! bracketed root refinement.

pub mod least_squares;
pub mod quadrature;
pub mod roots;
pub mod special;
