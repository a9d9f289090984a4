//! Shared test oracles. Each one takes a different computational route from
//! the library code it checks.
#![allow(dead_code)]

pub mod fixtures;
pub mod fuzz;
pub mod power_mc;
pub mod quadrature;
pub mod rational;
