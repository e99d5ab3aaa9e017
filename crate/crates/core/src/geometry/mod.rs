//! Domains, meshes, pixel grids and region overlaps.

pub mod domain;
pub mod mesh;
pub mod overlap;
pub mod pixel;
pub mod polygon;

pub use domain::{
    displace_electrodes, make_chest_phantom, make_circle_domain, ChestSpec, Domain2D, ElectrodeArc, FourierTerm,
};
pub use mesh::{generate_mesh, BoundaryEdge, Mesh};
pub use overlap::{domain_error, region_overlap_areas, OverlapAreas};
pub use pixel::{make_pixel_grid, PixelGrid};
pub use polygon::{Point, Polyline};
