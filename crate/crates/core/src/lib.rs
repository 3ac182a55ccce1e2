//! Hybrid voxel formats: hierarchical compositions of raw grids, distance
//! fields, sparse voxel octrees, and sparse voxel DAGs over one
//! word-addressable buffer, with out-of-core Morton-order construction from
//! triangle meshes, CPU ray tracing, and a size-vs-speed benchmark harness.

pub mod bench;
pub mod buffer;
pub mod construct;
pub mod format;
pub mod intersect;
pub mod math;
pub mod morton;
pub mod voxelizer;

pub use buffer::{load_hvox, save_hvox, Voxel, VolumeBuffer};
pub use construct::{construct_volume, ConstructOptions};
pub use format::{compile_plan, format_to_string, parse_format, plan_from_signature, FormatPlan};
pub use intersect::{intersect_root, point_query, Hit, Ray, TraversalOptions};
