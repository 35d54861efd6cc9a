//! Full pipeline orchestration: acquire -> gray -> (fractional enhance
//! parallel with Sobel) -> merge -> binarize -> morph -> components ->
//! trace -> measure -> export.
//!
//! Both operator branches start from the same gray raster and are
//! normalized with the same percentile stretch before merging, mirroring
//! how the two processed images are combined as display layers.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::Result;
use crate::geo::GeoRef;
use crate::operators::{enhance, merge_layers, sobel_magnitude, BlendMode, FracParams};
use crate::outline::{
    binarize, connected_components, export_geojson, measure_polygons, morph, otsu_level,
    trace_contours, MorphOp, SitePolygon, ThresholdMethod,
};
use crate::raster::{read_image, stretch, write_image, ImageData, ImageFormat, Raster};
use crate::synth::SceneSpec;
use crate::tiles::{default_cache_dir, fetch_region, LatLonBbox, TileSource, Transport};

/// Georeference for plain image files that carry none of their own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoRefSpec {
    pub zoom: f64,
    pub center_lat: f64,
    pub center_lon: f64,
}

/// Exactly one acquisition source per run.
#[derive(Debug, Clone)]
pub enum InputSource {
    File {
        path: PathBuf,
        georef: Option<GeoRefSpec>,
    },
    Tiles {
        endpoint: String,
        bbox: LatLonBbox,
        zoom: u8,
        cache_dir: Option<PathBuf>,
    },
    Synth {
        spec: SceneSpec,
        seed: u64,
    },
}

/// Optional artifact paths; absent stages are simply not written.
#[derive(Debug, Clone, Default)]
pub struct OutputPaths {
    pub enhanced: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub merged: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub geojson: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub input: InputSource,
    pub frac: FracParams,
    pub stretch_lo: f64,
    pub stretch_hi: f64,
    pub blend: BlendMode,
    pub threshold: ThresholdMethod,
    pub morph: Option<(MorphOp, u32)>,
    pub min_area: usize,
    pub outputs: OutputPaths,
}

impl PipelineConfig {
    /// The documented defaults, calibrated on the synthetic corpus (see
    /// README): fractional order 0.5 with window 8 and DC compensation,
    /// both branches stretched over the 1st..99.9th percentiles,
    /// max-merge at opacity 1, fixed threshold 0.78, closing radius 1,
    /// minimum traced area 50 px.
    pub fn with_input(input: InputSource) -> Self {
        Self {
            input,
            frac: FracParams::default(),
            stretch_lo: 1.0,
            stretch_hi: 99.9,
            blend: BlendMode::default(),
            threshold: ThresholdMethod::Fixed(0.78),
            morph: Some((MorphOp::Close, 1)),
            min_area: 50,
            outputs: OutputPaths::default(),
        }
    }
}

/// One measured site plus its relation to the principal (largest) site.
#[derive(Debug, Clone)]
pub struct SiteReport {
    pub polygon: SitePolygon,
    /// Metric distance from the principal site's centroid.
    pub distance_m: f64,
    /// Bearing from the principal centroid, degrees counterclockwise
    /// from east in [0, 360).
    pub bearing_deg: f64,
}

/// Everything a pipeline run produced.
#[derive(Debug, Clone)]
pub struct Manifest {
    /// Executed stages, in order.
    pub stages: Vec<&'static str>,
    pub width: u32,
    pub height: u32,
    pub georef: GeoRef,
    /// Threshold level actually applied (fixed value or the Otsu pick).
    pub threshold_level: f64,
    /// Number of labeled components before the area filter.
    pub component_count: usize,
    /// Index into `sites` of the principal (largest-area) site.
    pub principal: Option<usize>,
    pub sites: Vec<SiteReport>,
    /// Artifact kind and path for every file written.
    pub written: Vec<(&'static str, PathBuf)>,
}

impl Manifest {
    /// Line-oriented key=value rendering for stdout.
    pub fn key_values(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (i, stage) in self.stages.iter().enumerate() {
            out.push((format!("stage.{}", i + 1), stage.to_string()));
        }
        out.push(("raster.width".into(), self.width.to_string()));
        out.push(("raster.height".into(), self.height.to_string()));
        out.push(("threshold.level".into(), format!("{:.6}", self.threshold_level)));
        out.push(("components".into(), self.component_count.to_string()));
        out.push(("sites".into(), self.sites.len().to_string()));
        for (i, site) in self.sites.iter().enumerate() {
            let p = &site.polygon;
            let key = |name: &str| format!("site.{}.{name}", i + 1);
            out.push((key("label"), p.label.to_string()));
            out.push((key("area_m2"), format!("{:.1}", p.area_m2)));
            out.push((key("perimeter_m"), format!("{:.1}", p.perimeter_m)));
            out.push((key("extent_m"), format!("{:.1}", p.extent_m)));
            out.push((key("width_m"), format!("{:.1}", p.width_m)));
            out.push((
                key("centroid_px"),
                format!("{:.1},{:.1}", p.centroid_px.0, p.centroid_px.1),
            ));
            out.push((key("distance_m"), format!("{:.1}", site.distance_m)));
            out.push((key("bearing_deg"), format!("{:.1}", site.bearing_deg)));
        }
        for (kind, path) in &self.written {
            out.push((format!("output.{kind}"), path.display().to_string()));
        }
        out
    }
}

/// Runs the full pipeline with the default HTTP transport.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Manifest> {
    run_pipeline_with_transport(cfg, None)
}

/// Runs the full pipeline, optionally injecting a tile transport (used
/// by tests to stay offline).
pub fn run_pipeline_with_transport(
    cfg: &PipelineConfig,
    transport: Option<Arc<dyn Transport>>,
) -> Result<Manifest> {
    let mut written: Vec<(&'static str, PathBuf)> = Vec::new();
    match run_inner(cfg, transport, &mut written) {
        Ok(manifest) => Ok(manifest),
        Err(e) => {
            // A failed run leaves no partial artifacts behind.
            for (_, path) in &written {
                let _ = std::fs::remove_file(path);
            }
            Err(e)
        }
    }
}

fn format_for(path: &Path) -> ImageFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("pgm") => ImageFormat::Pgm,
        _ => ImageFormat::Png,
    }
}

fn run_inner(
    cfg: &PipelineConfig,
    transport: Option<Arc<dyn Transport>>,
    written: &mut Vec<(&'static str, PathBuf)>,
) -> Result<Manifest> {
    let mut stages: Vec<&'static str> = Vec::new();
    let emit = |kind: &'static str,
                    target: &Option<PathBuf>,
                    raster: &Raster,
                    written: &mut Vec<(&'static str, PathBuf)>|
     -> Result<()> {
        if let Some(path) = target {
            write_image(raster, path, format_for(path)).map_err(|e| e.at_stage(kind))?;
            written.push((kind, path.clone()));
        }
        Ok(())
    };

    // acquire
    stages.push("acquire");
    let (image, georef) = acquire(cfg, transport).map_err(|e| e.at_stage("acquire"))?;

    // gray
    stages.push("gray");
    let gray = image.into_gray();

    // enhance and sobel, in parallel from the same gray raster
    stages.push("enhance");
    stages.push("sobel");
    let (lo, hi) = (cfg.stretch_lo, cfg.stretch_hi);
    let (enhanced, edges) = std::thread::scope(|scope| {
        let enhance_branch = scope.spawn(|| enhance(&gray, &cfg.frac, lo, hi));
        let sobel_branch = sobel_magnitude(&gray, cfg.frac.boundary).map(|m| stretch(&m, lo, hi));
        let enhanced = enhance_branch.join().expect("enhance branch panicked");
        (enhanced, sobel_branch)
    });
    let enhanced = enhanced.map_err(|e| e.at_stage("enhance"))?;
    let edges = edges.map_err(|e| e.at_stage("sobel"))?;
    emit("enhanced", &cfg.outputs.enhanced, &enhanced, written)?;
    emit("edges", &cfg.outputs.edges, &edges, written)?;

    // merge: the Sobel layer is the base, the fractional layer is the
    // opacity-scaled second layer.
    stages.push("merge");
    let merged = merge_layers(&edges, &enhanced, cfg.blend).map_err(|e| e.at_stage("merge"))?;
    emit("merged", &cfg.outputs.merged, &merged, written)?;

    // binarize
    stages.push("binarize");
    let threshold_level = match cfg.threshold {
        ThresholdMethod::Fixed(level) => level,
        ThresholdMethod::Otsu => otsu_level(&merged).unwrap_or(f64::INFINITY),
    };
    let mut mask = binarize(&merged, cfg.threshold);

    // morph
    if let Some((op, radius)) = cfg.morph {
        stages.push("morph");
        mask = morph(&mask, op, radius);
    }
    emit("mask", &cfg.outputs.mask, &mask.to_raster(), written)?;

    // components
    stages.push("components");
    let labels = connected_components(&mask);

    // trace
    stages.push("trace");
    let rings = trace_contours(&labels, cfg.min_area);

    // measure
    stages.push("measure");
    let polygons = measure_polygons(&rings, &georef).map_err(|e| e.at_stage("measure"))?;

    // export
    stages.push("export");
    if let Some(path) = &cfg.outputs.geojson {
        export_geojson(&polygons, path).map_err(|e| e.at_stage("export"))?;
        written.push(("geojson", path.clone()));
    }

    let principal = polygons
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.area_m2.total_cmp(&b.area_m2))
        .map(|(i, _)| i);
    let origin = principal.map(|i| polygons[i].centroid_px);
    let sites = polygons
        .into_iter()
        .map(|polygon| {
            let (distance_m, bearing_deg) = match origin {
                Some(h) => {
                    let d = crate::geo::measure_distance(h, polygon.centroid_px, &georef)
                        .unwrap_or(f64::NAN);
                    let east = polygon.centroid_px.0 - h.0;
                    let north = h.1 - polygon.centroid_px.1;
                    let bearing = north.atan2(east).to_degrees().rem_euclid(360.0);
                    (d, bearing)
                }
                None => (f64::NAN, f64::NAN),
            };
            SiteReport {
                polygon,
                distance_m,
                bearing_deg,
            }
        })
        .collect::<Vec<_>>();

    Ok(Manifest {
        stages,
        width: georef.width(),
        height: georef.height(),
        georef,
        threshold_level,
        component_count: labels.component_count(),
        principal,
        sites,
        written: std::mem::take(written),
    })
}

fn acquire(
    cfg: &PipelineConfig,
    transport: Option<Arc<dyn Transport>>,
) -> Result<(ImageData, GeoRef)> {
    match &cfg.input {
        InputSource::File { path, georef } => {
            let image = read_image(path)?;
            let (w, h) = match &image {
                ImageData::Gray(r) => (r.width(), r.height()),
                ImageData::Rgb(img) => (img.width(), img.height()),
            };
            let g = match georef {
                Some(spec) => GeoRef::centered(spec.zoom, spec.center_lat, spec.center_lon, w, h)?,
                // Without a georeference, use the zoom where one pixel is
                // one meter at the equator, so distances read as meters.
                None => {
                    let zoom = (2.0 * std::f64::consts::PI * crate::geo::EARTH_RADIUS_M / 256.0)
                        .log2();
                    GeoRef::centered(zoom, 0.0, 0.0, w, h)?
                }
            };
            Ok((image, g))
        }
        InputSource::Tiles {
            endpoint,
            bbox,
            zoom,
            cache_dir,
        } => {
            let cache = cache_dir.clone().unwrap_or_else(default_cache_dir);
            let mut source = TileSource::new(endpoint.clone(), cache);
            if let Some(t) = transport {
                source = source.with_transport(t);
            }
            let (raster, g) = fetch_region(&source, *bbox, *zoom)?;
            Ok((ImageData::Gray(raster), g))
        }
        InputSource::Synth { spec, seed } => {
            let scene = crate::synth::render(spec, *seed)?;
            Ok((ImageData::Gray(scene.raster), scene.georef))
        }
    }
}
