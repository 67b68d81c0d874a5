//! Command-line front end for the coupled thermomechanical solver:
//! mesh generation and refinement, quality reports, steady and transient
//! runs, and a refinement-sweep solver benchmark.

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod meshio;
pub mod report;
pub mod vtk;
