//! Evolving surface finite elements for quasilinear parabolic equations
//! `∂•u + u ∇_Γ·v − ∇_Γ·(𝒜(u)∇_Γu) = f` on moving closed surfaces,
//! discretized in time by Radau IIA and (linearly) implicit BDF methods.

pub mod assembly;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod timestepping;
pub mod vec3;

pub use error::{EsfemError, Result};
