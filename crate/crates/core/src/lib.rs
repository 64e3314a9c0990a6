//! Core engine for sketch-guided reconstruction of 3D models from sparse point clouds.
//!
//! A user sketches over a point cloud; the sketch is matched against contour
//! images of a mesh corpus, the chosen mesh is aligned to the cloud with ICP,
//! and the aligned mesh's contour is handed back as an editable sketch.

pub mod geometry;
pub mod icp;
pub mod contour;
pub mod dataset;
pub mod raster;
pub mod render;
pub mod retrieval;
pub mod synth;
