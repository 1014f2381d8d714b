//! Exact-arithmetic engine for quantum-group R-matrices, q-twistor
//! differential calculus, and machine verification of deformed instanton
//! identities (t'Hooft and ADHM families).
//!
//! All computations are exact: coefficients live in the field of rational
//! functions of `s` (with `q = s^2`) over the rationals, optionally extended
//! by multiplicative parameters `r(a,b)`. Every identity checked by this
//! crate reduces to an exact zero, never a numerical tolerance.

pub mod coeff;
pub mod harmonic;
pub mod ncalg;
pub mod tensor;
pub mod twistor;
