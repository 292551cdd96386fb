//! Chart-based exterior calculus and verification of Vaisman structures.

pub mod calculus;
pub mod chart;
pub mod expr;
pub mod form;
pub mod parse;
pub mod tensor;
pub mod complex;
pub mod deformation;
pub mod grid;
pub mod report;
pub mod suite;
pub mod vaisman;
pub mod hopf;
pub mod mutation;
