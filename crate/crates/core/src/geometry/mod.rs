//! Point clouds, meshes and the geometric operations on them.

mod cloud;
mod icp;
mod mesh;
mod normalize;
pub mod nn;
mod primitives;
mod render;
mod sampling;
mod transform;

pub use cloud::PointCloud;
pub use icp::{best_rigid_transform, icp_align, IcpResult};
pub use mesh::TriangleMesh;
pub use normalize::renormalize_unit_box;
pub use primitives::{
    box_mesh, generate_primitive, generate_random_primitive, normalize_mesh, ChairParams, PrimitiveKind,
    PrimitiveSpec, TableParams,
};
pub use render::{camera_direction, render_view, RenderedView, RESOLUTION};
pub use sampling::{
    farthest_point_indices, farthest_point_sample, farthest_point_sample_mesh, sample_mesh_uniform,
    MESH_CANDIDATE_FACTOR,
};
pub use transform::RigidTransform;
