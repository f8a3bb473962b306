//! Front tracking with shifted shock speeds for the isentropic Euler
//! equations, Glimm functionals, the interaction weight `a(t, x)` and
//! weighted relative-entropy diagnostics against a Godunov reference.

pub mod certify;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod engine;
pub mod frontsolvers;
pub mod numerics;
pub mod run;
pub mod system;
pub mod wavecurves;
pub mod weight;
pub mod wild;

pub use error::{Error, Result};
pub use system::{Family, IsentropicEuler, State, StateBox, System2x2, SystemParams};
