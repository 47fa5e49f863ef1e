//! Texture recognition through a pseudo-parabolic scale space.
//!
//! The pipeline filters an image with an implicit pseudo-parabolic diffusion
//! operator (five-point stencil, preconditioned conjugate gradient), encodes
//! every evolved image with rotation-invariant uniform local binary patterns,
//! concatenates the normalized code histograms into one multiscale
//! descriptor, reduces it with a Karhunen-Loeve transform and classifies with
//! a linear discriminant. The `bench` module reproduces the standard
//! texture-database evaluation protocols on top of that pipeline.
//!
//! All numeric code is generic over the scalar type through [`scalar::Real`];
//! the aliases below pin `f64`, which is what the command-line tools use.

pub mod bench;
pub mod config;
pub mod descriptor;
pub mod diffusion;
pub mod error;
pub mod features;
pub mod grid;
pub mod image_io;
pub mod lbp;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` image, the shipped pipeline's working type.
pub type Image = grid::GrayImage<f64>;
/// `f64` mesh parameters.
pub type Mesh = grid::MeshParams<f64>;
/// `f64` solver parameters.
pub type SolverOptions = diffusion::SolverParams<f64>;
/// `f64` descriptor configuration.
pub type DescriptorOptions = descriptor::DescriptorConfig<f64>;
/// `f64` descriptor vector.
pub type Descriptor = descriptor::Descriptor<f64>;
/// `f64` Karhunen-Loeve transform.
pub type KlTransform = features::KlTransform<f64>;
/// `f64` linear discriminant model.
pub type LdaModel = features::LdaModel<f64>;
