//! Strong-coupling Hopf solitons and baby skyrmions on compact lattices.
//!
//! Fields of unit 3-vectors live on lattice discretizations of S³, T³, S²×S¹
//! (Hopf solitons) and S², T² (baby skyrmions). The energy is the quartic
//! term alone, normalized so that `E ≥ |Q|` in three dimensions and
//! `E ≥ Q²` in two.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix `f64`.

// `!(x > 0)` is how NaN gets rejected throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity, clippy::needless_range_loop)]

pub mod ansatz1d;
pub mod energy;
pub mod error;
pub mod field;
pub mod geometry;
pub mod io;
pub mod optimize;
pub mod scalar;
pub mod topology;

pub use error::{HopfError, Result};
pub use geometry::ManifoldKind;
pub use scalar::{Real, Vec3};

pub type Field64 = field::Field<f64>;
pub type Field32 = field::Field<f32>;
pub type ManifoldSpec64 = geometry::ManifoldSpec<f64>;
pub type ManifoldSpec32 = geometry::ManifoldSpec<f32>;
pub type LatticeGeometry64 = geometry::LatticeGeometry<f64>;
pub type LatticeGeometry32 = geometry::LatticeGeometry<f32>;
pub type EnergyReport64 = energy::EnergyReport<f64>;
pub type ProfileSolution64 = ansatz1d::ProfileSolution<f64>;
pub type RelaxConfig64 = optimize::RelaxConfig<f64>;
pub type RelaxResult64 = optimize::RelaxResult<f64>;
