//! Least-squares ReLU neural network solver for linear advection-reaction
//! problems
//!
//! ```text
//!     u_β + γ̂ u = f   in Ω,        u = g   on Γ₋,
//! ```
//!
//! whose solutions jump across the streamlines leaving discontinuities of the
//! inflow data. The solver minimizes a midpoint-quadrature least-squares
//! functional over the parameters of a ReLU multilayer perceptron. Because the
//! breaking lines of the network are free, they move onto the interface
//! during training instead of smearing or oscillating around it.
//!
//! Layout:
//!
//! - [`geometry`]: rectangular domains, uniform integration meshes and the
//!   inflow-boundary partition.
//! - [`velocity`]: advection fields, including piecewise-constant sector
//!   approximations of the rotational field.
//! - [`network`]: ReLU networks (forward pass, parameter gradients, analytic
//!   constructions, breaking lines, checkpoints).
//! - [`loss`]: the discrete least-squares functional and its gradient.
//! - [`init`]: hyperplane placement and Galerkin solve for output weights.
//! - [`train`]: Adam, learning-rate schedules, seeded restarts.
//! - [`continuation`]: training through a sequence of sector fields.
//! - [`problems`] and [`metrics`]: benchmark problems and error norms.

pub mod continuation;
pub mod error;
pub mod geometry;
pub mod init;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod problems;
pub mod reduce;
pub mod train;
pub mod velocity;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{BoundaryEdge, Cell, Domain, IntegrationMesh, Point};
pub use loss::{LossConfig, LossValue, LeastSquares};
pub use network::{Architecture, Network};
pub use problems::{BenchmarkProblem, ProblemKind};
pub use train::{Schedule, TrainingReport};
pub use velocity::VelocityField;
