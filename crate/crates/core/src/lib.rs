//! Geodesic stability analysis for semi-Riemannian metrics.
//!
//! The crate works with Morse-Sturm systems `J'' = R(t) J` on `[0, 1]`, where
//! `R` is a curve of endomorphisms symmetric with respect to a fixed
//! nondegenerate form `g` of arbitrary signature. It provides:
//!
//! - symmetric bilinear-form algebra: inertia, B-orthogonal complements,
//!   relative dimension and relative index, and the spectral flow of paths of
//!   symmetric matrices ([`bilinear`]);
//! - integration of the associated symplectic flow and localization of
//!   conjugate instants with multiplicity and signature ([`morse_sturm`]);
//! - crossing forms and Maslov indices, in the fixed-endpoint and the
//!   initial-submanifold (focal) variants ([`maslov`], [`focal`]);
//! - Galerkin discretization of the rescaled second-variation path, whose
//!   spectral flow is the negative of the Maslov index ([`index_form`]);
//! - a scenario library with closed-form ground truth and a nonlinear
//!   geodesic-shooting verifier on surfaces of revolution ([`scenarios`]).
//!
//! All numerics are generic over the scalar type through the [`Scalar`]
//! trait; the crate root re-exports `f64` aliases for the common types.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub mod bilinear;
pub mod focal;
pub mod index_form;
pub mod linalg;
pub mod maslov;
pub mod morse_sturm;
pub mod scenarios;

/// Floating-point scalar usable throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + std::ops::AddAssign
        + std::ops::SubAssign
        + std::ops::MulAssign
        + Sum
        + Debug
        + Display
        + LowerExp
        + 'static
{
}

/// Shorthand for converting an `f64` constant into the working scalar.
pub(crate) fn cast<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("constant not representable in scalar type")
}

/// Default tolerances shared by the modules.
pub mod tol {
    /// Relative singular-value threshold for rank decisions.
    pub const RANK: f64 = 1e-8;
    /// Relative asymmetry accepted when ingesting a symmetric matrix.
    pub const SYMMETRY: f64 = 1e-12;
    /// Absolute tolerance on the g-symmetry defect of a curvature curve.
    pub const G_SYMMETRY: f64 = 1e-10;
    /// Relative tolerance on `frame^T Omega frame` for Lagrangian frames.
    pub const ISOTROPY: f64 = 1e-10;
    /// Largest acceptable symplectic defect of an integrated flow.
    pub const SYMPLECTIC_DEFECT: f64 = 1e-6;
    /// Width to which conjugate/focal instants are refined in `t`.
    pub const INSTANT_REFINE: f64 = 1e-12;
    /// Instants inside `[0, STARTUP_ZONE]` are treated as spurious: the
    /// curve of Lagrangians starts on the singular variety, and the first
    /// genuine crossing cannot sit at the very beginning of the interval.
    pub const STARTUP_ZONE: f64 = 0.01;
    /// Absolute tolerance on entry changes when quadrature points double.
    pub const QUADRATURE: f64 = 1e-10;
}

/// Default number of fixed RK4 steps for flow integration.
pub const DEFAULT_FLOW_STEPS: usize = 2048;
/// Default Galerkin basis size per coordinate direction.
pub const DEFAULT_BASIS_SIZE: usize = 32;
/// Default number of intervals in the parameter grid of the Galerkin path.
pub const DEFAULT_S_GRID: usize = 256;

// Concrete `f64` aliases for the main vocabulary types.
pub type Mat = linalg::Mat<f64>;
pub type SymForm = bilinear::SymForm<f64>;
pub type Subspace = bilinear::Subspace<f64>;
pub type MatrixPath = bilinear::MatrixPath<f64>;
pub type MetricForm = morse_sturm::MetricForm<f64>;
pub type CurvatureCurve = morse_sturm::CurvatureCurve<f64>;
pub type MorseSturmSystem = morse_sturm::MorseSturmSystem<f64>;
pub type Flow = morse_sturm::Flow<f64>;
pub type KernelInstant = morse_sturm::KernelInstant<f64>;
pub type ConjugateInstant = morse_sturm::ConjugateInstant<f64>;
pub type LagrangianFrame = maslov::LagrangianFrame<f64>;
pub type CrossingReport = maslov::CrossingReport<f64>;
pub type FocalBoundary = focal::FocalBoundary<f64>;
pub type BasisSpec = index_form::BasisSpec;
pub type GalerkinPath = index_form::GalerkinPath<f64>;
pub type Scenario = scenarios::Scenario<f64>;
pub type SurfaceOfRevolution = scenarios::SurfaceOfRevolution<f64>;
pub type GeodesicCurve = scenarios::GeodesicCurve<f64>;
pub type BifurcationWitness = scenarios::BifurcationWitness<f64>;
