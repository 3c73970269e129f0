//! Single-view point cloud reconstruction by latent embedding matching.
//!
//! A point cloud auto-encoder is trained first; an image encoder is then
//! trained to land on the auto-encoder's latent space, either
//! deterministically or as a Gaussian whose spread depends on how much of
//! the object the view hides. Everything, from the autodiff engine to the
//! synthetic data and the evaluation protocol, lives in this crate.
//!
//! The numeric layers ([`autodiff`], [`geometry`], [`metrics`]) are generic
//! over [`Real`]; the aliases below fix the scalar type.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod interface;
pub mod metrics;
pub mod models;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Tensor32 = autodiff::Tensor<f32>;
pub type Tensor64 = autodiff::Tensor<f64>;
pub type Graph32 = autodiff::Graph<f32>;
pub type Graph64 = autodiff::Graph<f64>;
pub type PointCloud32 = geometry::PointCloud<f32>;
pub type PointCloud64 = geometry::PointCloud<f64>;
pub type TriangleMesh32 = geometry::TriangleMesh<f32>;
pub type TriangleMesh64 = geometry::TriangleMesh<f64>;
pub type RigidTransform32 = geometry::RigidTransform<f32>;
pub type RigidTransform64 = geometry::RigidTransform<f64>;
