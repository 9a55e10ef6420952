//! Ray-transfer-matrix lens model and ghost geometry.

mod coating;
mod ghost;
mod lens;
mod matrix;

pub use coating::{interface_reflectance, interface_reflectance_with_index, DEFAULT_COATING_INDEX};
pub use ghost::{
    direct_system_matrix, enumerate_ghosts, focal_scale_for_field, ghost_geometry,
    ghost_system_matrix, ghost_table, incidence_angle, interface_reflectance_rgb, GhostDescriptor,
    GhostOptions, GhostPair, OpticalPath, PathFactor, DEFAULT_PARAXIAL_CAP,
};
pub use lens::{ApertureShape, LensInterface, LensPrescription};
pub use matrix::{
    compose, reflection_matrix, refraction_matrix, trace_ray, translation_matrix, Curvature,
    RayState, RayTransferMatrix,
};
