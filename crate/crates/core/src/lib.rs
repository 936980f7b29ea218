//! Semi-flat Calabi-Yau mirror pairs built from convex solutions of the real
//! Monge-Ampère equation, with numerical checks of the identities relating the
//! two sides.

pub mod automorphisms;
pub mod connections;
pub mod exterior;
pub mod forms;
pub mod geometry;
pub mod grid;
pub mod hyperkahler;
pub mod jet;
pub mod linalg;
pub mod mirror;
pub mod poly;
pub mod quadrature;
pub mod scalar;
pub mod solver;

pub use geometry::{
    complexified_residual, jet, legendre_dual, ma_residual, shrink_volume_check, structures, ComplexifiedPotential,
    Domain, GeometryError, JetFrame, LegendreDual, Potential, PotentialKind, ScalarField, StructureTensors,
};
pub use grid::GridFunction;
pub use jet::Jet3;
pub use linalg::Mat;
pub use scalar::{Field, Real};
pub use mirror::MirrorContext;

/// Double-precision aliases.
pub type Potential64 = Potential<f64>;
pub type Domain64 = Domain<f64>;
pub type JetFrame64 = JetFrame<f64>;
pub type MirrorContext64 = MirrorContext<f64>;
pub type Mat64 = Mat<f64>;

/// Single-precision aliases.
pub type Potential32 = Potential<f32>;
pub type Domain32 = Domain<f32>;
pub type JetFrame32 = JetFrame<f32>;
pub type MirrorContext32 = MirrorContext<f32>;
pub type Mat32 = Mat<f32>;
