//! moatline: outline extraction and measurement of moated earthwork
//! sites from map-tile imagery.
//!
//! The processing chain stitches a georeferenced mosaic from an XYZ tile
//! endpoint (or loads a file, or renders a synthetic scene), converts it
//! to luminance, runs two edge operators from the same source — a
//! Grünwald–Letnikov fractional-gradient enhancement and the Sobel
//! magnitude — merges the two layers, and turns the merged edge image
//! into measurable vector outlines: threshold, morphological cleanup,
//! connected components, boundary tracing, metric measurement and
//! GeoJSON export.
//!
//! Modules:
//! - [`raster`]: the `f64` raster type, grayscale conversion, percentile
//!   stretch, PNG/PGM I/O.
//! - [`kernels`]: fractional-derivative coefficient sequences and Sobel
//!   kernels.
//! - [`convolve`]: direct, separable and directional convolution with
//!   explicit boundary policies.
//! - [`operators`]: fractional-gradient magnitude, Sobel magnitude,
//!   layer merging.
//! - [`geo`]: Web Mercator math, georeferencing, metric distances.
//! - [`tiles`]: XYZ tile client with disk cache, mosaic stitching.
//! - [`outline`]: binarize, morphology, labeling, contour tracing,
//!   measurement, GeoJSON.
//! - [`synth`]: parametric synthetic fortress scenes with exact ground
//!   truth.
//! - [`pipeline`]: end-to-end orchestration with artifact output.

pub mod convolve;
pub mod error;
pub mod geo;
pub mod kernels;
pub mod operators;
pub mod outline;
pub mod pipeline;
pub mod raster;
pub mod synth;
pub mod tiles;

pub use convolve::{convolve2d, convolve_separable, directional_conv1d, BoundaryPolicy, Direction};
pub use error::{Error, ErrorClass, Result};
pub use geo::{
    global_pixel_to_latlon, ground_resolution, latlon_to_global_pixel, measure_distance, GeoRef,
};
pub use kernels::{gl_coefficients, sobel_kernels, zero_dc, CoeffVector, Kernel2D};
pub use operators::{
    enhance, frac_gradient_magnitude, merge_layers, sobel_magnitude, BlendKind, BlendMode,
    DirectionScheme, FracParams,
};
pub use outline::{
    binarize, connected_components, export_geojson, measure_polygons, morph, trace_contours,
    BitMask, LabelMap, MorphOp, PixelRing, SitePolygon, ThresholdMethod,
};
pub use pipeline::{
    run_pipeline, run_pipeline_with_transport, InputSource, Manifest, OutputPaths, PipelineConfig,
};
pub use raster::{read_image, stretch, to_gray, write_image, ImageData, ImageFormat, Raster, RgbImage};
pub use synth::{default_spec, render, SceneSpec};
pub use tiles::{fetch_region, fetch_tile, stitch, LatLonBbox, TileBbox, TileCoord, TileSource};
