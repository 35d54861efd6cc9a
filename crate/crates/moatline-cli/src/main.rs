//! moatline CLI: full-pipeline runs plus one subcommand per pipeline
//! operation. Manifests print as line-oriented key=value on stdout;
//! binary data only ever goes to files. Exit codes: 0 success,
//! 1 validation, 2 I/O, 3 network.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{build_pipeline_config, build_scene_spec, scene_spec_to_config, ConfigMap};
use moatline::operators::{BlendMode, DirectionScheme, FracParams};
use moatline::outline::ThresholdMethod;
use moatline::pipeline::run_pipeline;
use moatline::raster::{read_image, stretch, write_image, ImageFormat};
use moatline::tiles::{fetch_region, TileSource, CACHE_ENV_VAR};
use moatline::{BoundaryPolicy, ErrorClass, GeoRef};

#[derive(Parser)]
#[command(
    name = "moatline",
    version,
    about = "Outline and measure moated earthwork sites from map-tile imagery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a config file and/or key=value overrides.
    Run(RunArgs),
    /// Fractional-gradient enhancement of one image.
    Enhance(EnhanceArgs),
    /// Sobel edge magnitude of one image (stretched for display).
    Edges(EdgesArgs),
    /// Merge two images as layers.
    Merge(MergeArgs),
    /// Fetch and stitch a tile region into one image.
    Stitch(StitchArgs),
    /// Metric distance between two pixel positions.
    Measure(MeasureArgs),
    /// Trace a binary mask into measured GeoJSON outlines.
    Vectorize(VectorizeArgs),
    /// Render the synthetic fortress scene.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file (flat key=value lines, dotted prefixes).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Additional key=value overrides, applied after the file.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    frac_nu: Option<f64>,
    #[arg(long)]
    frac_window: Option<usize>,
    /// two | four
    #[arg(long)]
    frac_directions: Option<String>,
    /// reflect | replicate | zero
    #[arg(long)]
    frac_boundary: Option<String>,
    #[arg(long)]
    frac_dc_compensate: Option<bool>,
    #[arg(long)]
    stretch_lo: Option<f64>,
    #[arg(long)]
    stretch_hi: Option<f64>,
    /// max | mean | screen | multiply
    #[arg(long)]
    blend_mode: Option<String>,
    #[arg(long)]
    blend_opacity: Option<f64>,
    /// fixed | otsu
    #[arg(long)]
    threshold_method: Option<String>,
    #[arg(long)]
    threshold_level: Option<f64>,
    /// open | close | none
    #[arg(long)]
    morph_op: Option<String>,
    #[arg(long)]
    morph_radius: Option<usize>,
    #[arg(long)]
    min_area: Option<usize>,
    /// Seed for synthetic input.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EnhanceArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    nu: f64,
    #[arg(long, default_value_t = 8)]
    window: usize,
    /// two | four
    #[arg(long, default_value = "two")]
    directions: String,
    /// reflect | replicate | zero
    #[arg(long, default_value = "reflect")]
    boundary: String,
    /// Disable the zero-sum compensator tap.
    #[arg(long)]
    no_dc: bool,
    #[arg(long, default_value_t = 1.0)]
    lo: f64,
    #[arg(long, default_value_t = 99.0)]
    hi: f64,
}

#[derive(Args)]
struct EdgesArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// reflect | replicate | zero
    #[arg(long, default_value = "reflect")]
    boundary: String,
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 100.0)]
    hi: f64,
}

#[derive(Args)]
struct MergeArgs {
    /// Base layer image.
    #[arg(long)]
    base: PathBuf,
    /// Second layer image (scaled by --opacity).
    #[arg(long)]
    overlay: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// max | mean | screen | multiply
    #[arg(long, default_value = "max")]
    mode: String,
    #[arg(long, default_value_t = 1.0)]
    opacity: f64,
}

#[derive(Args)]
struct StitchArgs {
    /// URL template with {z}/{x}/{y} placeholders.
    #[arg(long)]
    endpoint: String,
    /// min_lat,min_lon,max_lat,max_lon
    #[arg(long)]
    bbox: String,
    #[arg(long)]
    zoom: u8,
    #[arg(long)]
    output: PathBuf,
    /// Tile cache directory (default: $MOATLINE_CACHE_DIR or the
    /// system temp directory).
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct MeasureArgs {
    /// First pixel position: x,y
    #[arg(long)]
    a: String,
    /// Second pixel position: x,y
    #[arg(long)]
    b: String,
    #[arg(long)]
    zoom: f64,
    /// Latitude the raster is centered on.
    #[arg(long)]
    lat: f64,
    /// Longitude the raster is centered on.
    #[arg(long, default_value_t = 0.0)]
    lon: f64,
    /// Raster extent in pixels (bounds checking).
    #[arg(long, default_value_t = 4096)]
    extent: u32,
}

#[derive(Args)]
struct VectorizeArgs {
    /// Mask or edge image to threshold and trace.
    #[arg(long)]
    input: PathBuf,
    /// GeoJSON output path.
    #[arg(long)]
    output: PathBuf,
    /// Threshold level in [0,1]; "otsu" picks one from the histogram.
    #[arg(long, default_value = "0.5")]
    threshold: String,
    #[arg(long, default_value_t = 50)]
    min_area: usize,
    #[arg(long)]
    zoom: Option<f64>,
    #[arg(long)]
    lat: Option<f64>,
    #[arg(long)]
    lon: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    /// Rendered scene image output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scene config file (synth.* keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Additional key=value scene overrides.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Write the effective scene spec as a config file.
    #[arg(long)]
    write_spec: Option<PathBuf>,
}

enum CliError {
    Validation(String),
    Lib(moatline::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "{msg}"),
            CliError::Lib(e) => {
                write!(f, "{e}")?;
                let mut source = std::error::Error::source(e);
                while let Some(inner) = source {
                    write!(f, ": {inner}")?;
                    source = inner.source();
                }
                Ok(())
            }
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Lib(e) => match e.class() {
                ErrorClass::Validation => 1,
                ErrorClass::Io => 2,
                ErrorClass::Network => 3,
            },
        }
    }
}

impl From<moatline::Error> for CliError {
    fn from(e: moatline::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Enhance(args) => cmd_enhance(args),
        Command::Edges(args) => cmd_edges(args),
        Command::Merge(args) => cmd_merge(args),
        Command::Stitch(args) => cmd_stitch(args),
        Command::Measure(args) => cmd_measure(args),
        Command::Vectorize(args) => cmd_vectorize(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn parse_directions(text: &str) -> Result<DirectionScheme, CliError> {
    match text {
        "two" => Ok(DirectionScheme::Two),
        "four" => Ok(DirectionScheme::Four),
        other => Err(CliError::Validation(format!(
            "directions {other:?} (expected two or four)"
        ))),
    }
}

fn parse_boundary(text: &str) -> Result<BoundaryPolicy, CliError> {
    match text {
        "reflect" => Ok(BoundaryPolicy::Reflect),
        "replicate" => Ok(BoundaryPolicy::Replicate),
        "zero" => Ok(BoundaryPolicy::Zero),
        other => Err(CliError::Validation(format!(
            "boundary {other:?} (expected reflect, replicate or zero)"
        ))),
    }
}

fn parse_point(text: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Validation(format!(
            "point {text:?} is not of the form x,y"
        )));
    }
    let x = parts[0].trim().parse().map_err(|_| {
        CliError::Validation(format!("point {text:?}: {} is not a number", parts[0]))
    })?;
    let y = parts[1].trim().parse().map_err(|_| {
        CliError::Validation(format!("point {text:?}: {} is not a number", parts[1]))
    })?;
    Ok((x, y))
}

fn format_for(path: &std::path::Path) -> ImageFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("pgm") => ImageFormat::Pgm,
        _ => ImageFormat::Png,
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::default(),
    };
    cfg.apply_overrides(&args.overrides)?;

    // Named flags override config keys one-to-one.
    let mut flag = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            cfg.set(key, &v);
        }
    };
    flag("frac.nu", args.frac_nu.map(|v| v.to_string()));
    flag("frac.window", args.frac_window.map(|v| v.to_string()));
    flag("frac.directions", args.frac_directions);
    flag("frac.boundary", args.frac_boundary);
    flag(
        "frac.dc_compensate",
        args.frac_dc_compensate.map(|v| v.to_string()),
    );
    flag("stretch.lo", args.stretch_lo.map(|v| v.to_string()));
    flag("stretch.hi", args.stretch_hi.map(|v| v.to_string()));
    flag("blend.mode", args.blend_mode);
    flag("blend.opacity", args.blend_opacity.map(|v| v.to_string()));
    flag("threshold.method", args.threshold_method);
    flag(
        "threshold.level",
        args.threshold_level.map(|v| v.to_string()),
    );
    flag("morph.op", args.morph_op);
    flag("morph.radius", args.morph_radius.map(|v| v.to_string()));
    flag("outline.min_area", args.min_area.map(|v| v.to_string()));
    flag("synth.seed", args.seed.map(|v| v.to_string()));

    let pipeline_cfg = build_pipeline_config(&cfg)?;
    let manifest = run_pipeline(&pipeline_cfg)?;
    for (key, value) in manifest.key_values() {
        println!("{key}={value}");
    }
    Ok(())
}

fn cmd_enhance(args: EnhanceArgs) -> Result<(), CliError> {
    let gray = read_image(&args.input)?.into_gray();
    let params = FracParams {
        nu: args.nu,
        window: args.window,
        directions: parse_directions(&args.directions)?,
        boundary: parse_boundary(&args.boundary)?,
        dc_compensate: !args.no_dc,
    };
    let out = moatline::enhance(&gray, &params, args.lo, args.hi)?;
    write_image(&out, &args.output, format_for(&args.output))?;
    println!("output={}", args.output.display());
    Ok(())
}

fn cmd_edges(args: EdgesArgs) -> Result<(), CliError> {
    let gray = read_image(&args.input)?.into_gray();
    let magnitude = moatline::sobel_magnitude(&gray, parse_boundary(&args.boundary)?)?;
    let out = stretch(&magnitude, args.lo, args.hi);
    write_image(&out, &args.output, format_for(&args.output))?;
    println!("output={}", args.output.display());
    Ok(())
}

fn cmd_merge(args: MergeArgs) -> Result<(), CliError> {
    let base = read_image(&args.base)?.into_gray();
    let overlay = read_image(&args.overlay)?.into_gray();
    let mode = BlendMode {
        kind: match args.mode.as_str() {
            "max" => moatline::BlendKind::Max,
            "mean" => moatline::BlendKind::Mean,
            "screen" => moatline::BlendKind::Screen,
            "multiply" => moatline::BlendKind::Multiply,
            other => {
                return Err(CliError::Validation(format!(
                    "mode {other:?} (expected max, mean, screen or multiply)"
                )))
            }
        },
        opacity: args.opacity,
    };
    let out = moatline::merge_layers(&base, &overlay, mode)?;
    write_image(&out, &args.output, format_for(&args.output))?;
    println!("output={}", args.output.display());
    Ok(())
}

fn cmd_stitch(args: StitchArgs) -> Result<(), CliError> {
    let bbox = config::parse_bbox(&args.bbox)?;
    let cache = args
        .cache
        .or_else(|| std::env::var_os(CACHE_ENV_VAR).map(PathBuf::from))
        .unwrap_or_else(moatline::tiles::default_cache_dir);
    let source = TileSource::new(args.endpoint, cache);
    let (raster, georef) = fetch_region(&source, bbox, args.zoom)?;
    write_image(&raster, &args.output, format_for(&args.output))?;
    println!("output={}", args.output.display());
    println!("raster.width={}", raster.width());
    println!("raster.height={}", raster.height());
    println!(
        "georef.origin_px={:.1},{:.1}",
        georef.origin_px().0,
        georef.origin_px().1
    );
    println!("georef.zoom={}", georef.zoom());
    Ok(())
}

fn cmd_measure(args: MeasureArgs) -> Result<(), CliError> {
    let a = parse_point(&args.a)?;
    let b = parse_point(&args.b)?;
    let georef = GeoRef::centered(args.zoom, args.lat, args.lon, args.extent, args.extent)?;
    let d = moatline::measure_distance(a, b, &georef)?;
    println!("distance_m={d:.3}");
    Ok(())
}

fn cmd_vectorize(args: VectorizeArgs) -> Result<(), CliError> {
    let gray = read_image(&args.input)?.into_gray();
    let method = if args.threshold == "otsu" {
        ThresholdMethod::Otsu
    } else {
        let level: f64 = args.threshold.parse().map_err(|_| {
            CliError::Validation(format!(
                "threshold {:?} is neither a level nor \"otsu\"",
                args.threshold
            ))
        })?;
        ThresholdMethod::Fixed(level)
    };
    let georef = match (args.zoom, args.lat) {
        (Some(zoom), Some(lat)) => {
            GeoRef::centered(zoom, lat, args.lon.unwrap_or(0.0), gray.width(), gray.height())?
        }
        _ => {
            // One pixel reads as one meter at the equator.
            let zoom =
                (2.0 * std::f64::consts::PI * moatline::geo::EARTH_RADIUS_M / 256.0).log2();
            GeoRef::centered(zoom, 0.0, 0.0, gray.width(), gray.height())?
        }
    };
    let mask = moatline::binarize(&gray, method);
    let labels = moatline::connected_components(&mask);
    let rings = moatline::trace_contours(&labels, args.min_area);
    let polygons = moatline::measure_polygons(&rings, &georef)?;
    moatline::export_geojson(&polygons, &args.output)?;
    println!("output={}", args.output.display());
    println!("sites={}", polygons.len());
    for (i, p) in polygons.iter().enumerate() {
        println!("site.{}.label={}", i + 1, p.label);
        println!("site.{}.area_m2={:.1}", i + 1, p.area_m2);
        println!("site.{}.extent_m={:.1}", i + 1, p.extent_m);
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::default(),
    };
    cfg.apply_overrides(&args.overrides)?;
    let spec = build_scene_spec(&cfg)?;
    if let Some(path) = &args.write_spec {
        std::fs::write(path, scene_spec_to_config(&spec, args.seed)).map_err(|e| {
            CliError::Lib(moatline::Error::Io {
                path: path.clone(),
                source: e,
            })
        })?;
        println!("spec={}", path.display());
    }
    if let Some(output) = &args.output {
        let scene = moatline::render(&spec, args.seed)?;
        write_image(&scene.raster, output, format_for(output))?;
        println!("output={}", output.display());
        println!("raster.width={}", scene.raster.width());
        println!("raster.height={}", scene.raster.height());
        println!("georef.zoom={:.6}", scene.georef.zoom());
    }
    Ok(())
}
