//! Flat key=value configuration with dotted section prefixes
//! (`frac.nu=0.5`). Later assignments win, `#` starts a comment.
//! Command-line flags override file keys one-to-one.

use std::collections::HashMap;
use std::path::PathBuf;

use moatline::operators::{BlendKind, DirectionScheme, FracParams};
use moatline::outline::{MorphOp, ThresholdMethod};
use moatline::pipeline::{GeoRefSpec, InputSource, OutputPaths, PipelineConfig};
use moatline::synth::{SatShape, SatelliteSite, SceneSpec};
use moatline::tiles::LatLonBbox;
use moatline::BoundaryPolicy;

/// Validation failure with the offending key(s) in the message.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

#[derive(Debug, Default, Clone)]
pub struct ConfigMap {
    values: HashMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError(format!(
                    "line {}: expected key=value, got {line:?}",
                    lineno + 1
                )));
            };
            map.set(key.trim(), value.trim());
        }
        Ok(map)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    /// Applies `key=value` override arguments.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), ConfigError> {
        for item in overrides {
            let Some((key, value)) = item.split_once('=') else {
                return Err(ConfigError(format!(
                    "override {item:?} is not of the form key=value"
                )));
            };
            self.set(key.trim(), value.trim());
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse_with<T>(
        &self,
        key: &str,
        parse: impl Fn(&str) -> Option<T>,
        what: &str,
    ) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(text) => parse(text)
                .map(Some)
                .ok_or_else(|| ConfigError(format!("{key}={text} is not {what}"))),
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parse_with(key, |s| s.parse().ok().filter(|v: &f64| v.is_finite()), "a number")
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.parse_with(key, |s| s.parse().ok(), "a non-negative integer")
    }

    fn u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.parse_with(key, |s| s.parse().ok(), "a non-negative integer")
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.parse_with(
            key,
            |s| match s {
                "true" | "1" | "yes" | "on" => Some(true),
                "false" | "0" | "no" | "off" => Some(false),
                _ => None,
            },
            "a boolean (true/false)",
        )
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }
}

/// Builds the full pipeline configuration, enforcing exactly one input
/// source and validating every numeric field.
pub fn build_pipeline_config(cfg: &ConfigMap) -> Result<PipelineConfig, ConfigError> {
    let input = build_input(cfg)?;
    let mut pipeline = PipelineConfig::with_input(input);

    if let Some(nu) = cfg.f64("frac.nu")? {
        pipeline.frac.nu = nu;
    }
    if let Some(window) = cfg.usize("frac.window")? {
        pipeline.frac.window = window;
    }
    if let Some(directions) = cfg.get("frac.directions") {
        pipeline.frac.directions = match directions {
            "two" => DirectionScheme::Two,
            "four" => DirectionScheme::Four,
            other => {
                return Err(ConfigError(format!(
                    "frac.directions={other} (expected two or four)"
                )))
            }
        };
    }
    if let Some(boundary) = cfg.get("frac.boundary") {
        pipeline.frac.boundary = parse_boundary(boundary)?;
    }
    if let Some(dc) = cfg.bool("frac.dc_compensate")? {
        pipeline.frac.dc_compensate = dc;
    }
    validate_frac(&pipeline.frac)?;

    if let Some(lo) = cfg.f64("stretch.lo")? {
        pipeline.stretch_lo = lo;
    }
    if let Some(hi) = cfg.f64("stretch.hi")? {
        pipeline.stretch_hi = hi;
    }
    if !(0.0..=100.0).contains(&pipeline.stretch_lo)
        || !(0.0..=100.0).contains(&pipeline.stretch_hi)
        || pipeline.stretch_lo >= pipeline.stretch_hi
    {
        return Err(ConfigError(format!(
            "stretch.lo={} / stretch.hi={} must satisfy 0 <= lo < hi <= 100",
            pipeline.stretch_lo, pipeline.stretch_hi
        )));
    }

    if let Some(mode) = cfg.get("blend.mode") {
        pipeline.blend.kind = parse_blend(mode)?;
    }
    if let Some(opacity) = cfg.f64("blend.opacity")? {
        if !(0.0..=1.0).contains(&opacity) {
            return Err(ConfigError(format!(
                "blend.opacity={opacity} outside [0, 1]"
            )));
        }
        pipeline.blend.opacity = opacity;
    }

    match cfg.get("threshold.method") {
        None => {
            if let Some(level) = cfg.f64("threshold.level")? {
                pipeline.threshold = ThresholdMethod::Fixed(level);
            }
        }
        Some("otsu") => pipeline.threshold = ThresholdMethod::Otsu,
        Some("fixed") => {
            let level = cfg
                .f64("threshold.level")?
                .ok_or_else(|| ConfigError("threshold.method=fixed needs threshold.level".into()))?;
            pipeline.threshold = ThresholdMethod::Fixed(level);
        }
        Some(other) => {
            return Err(ConfigError(format!(
                "threshold.method={other} (expected fixed or otsu)"
            )))
        }
    }

    match cfg.get("morph.op") {
        None => {
            if let Some(radius) = cfg.usize("morph.radius")? {
                pipeline.morph = pipeline
                    .morph
                    .map(|(op, _)| (op, radius as u32))
                    .or(Some((MorphOp::Close, radius as u32)));
            }
        }
        Some("none") => pipeline.morph = None,
        Some(op) => {
            let op = match op {
                "open" => MorphOp::Open,
                "close" => MorphOp::Close,
                other => {
                    return Err(ConfigError(format!(
                        "morph.op={other} (expected open, close or none)"
                    )))
                }
            };
            let radius = cfg.usize("morph.radius")?.unwrap_or(1) as u32;
            if radius == 0 {
                return Err(ConfigError("morph.radius must be >= 1".into()));
            }
            pipeline.morph = Some((op, radius));
        }
    }

    if let Some(min_area) = cfg.usize("outline.min_area")? {
        pipeline.min_area = min_area;
    }

    pipeline.outputs = OutputPaths {
        enhanced: cfg.path("output.enhanced"),
        edges: cfg.path("output.edges"),
        merged: cfg.path("output.merged"),
        mask: cfg.path("output.mask"),
        geojson: cfg.path("output.geojson"),
    };
    Ok(pipeline)
}

fn validate_frac(frac: &FracParams) -> Result<(), ConfigError> {
    if !(frac.nu > 0.0 && frac.nu <= 2.0) {
        return Err(ConfigError(format!("frac.nu={} outside (0, 2]", frac.nu)));
    }
    if frac.window < 1 {
        return Err(ConfigError("frac.window must be >= 1".into()));
    }
    Ok(())
}

fn parse_boundary(text: &str) -> Result<BoundaryPolicy, ConfigError> {
    match text {
        "reflect" => Ok(BoundaryPolicy::Reflect),
        "replicate" => Ok(BoundaryPolicy::Replicate),
        "zero" => Ok(BoundaryPolicy::Zero),
        other => Err(ConfigError(format!(
            "boundary {other:?} (expected reflect, replicate or zero)"
        ))),
    }
}

fn parse_blend(text: &str) -> Result<BlendKind, ConfigError> {
    match text {
        "max" => Ok(BlendKind::Max),
        "mean" => Ok(BlendKind::Mean),
        "screen" => Ok(BlendKind::Screen),
        "multiply" => Ok(BlendKind::Multiply),
        other => Err(ConfigError(format!(
            "blend.mode={other} (expected max, mean, screen or multiply)"
        ))),
    }
}

fn build_input(cfg: &ConfigMap) -> Result<InputSource, ConfigError> {
    let mut sources: Vec<&str> = Vec::new();
    if cfg.get("input.file").is_some() {
        sources.push("input.file");
    }
    if cfg.get("input.endpoint").is_some() {
        sources.push("input.endpoint");
    }
    if cfg.bool("input.synth")?.unwrap_or(false) {
        sources.push("input.synth");
    }
    match sources.as_slice() {
        [] => Err(ConfigError(
            "no input source; set one of input.file, input.endpoint or input.synth".into(),
        )),
        [one] => Ok(match *one {
            "input.file" => InputSource::File {
                path: cfg.path("input.file").unwrap(),
                georef: build_georef(cfg)?,
            },
            "input.endpoint" => {
                let bbox_text = cfg
                    .get("input.bbox")
                    .ok_or_else(|| ConfigError("input.endpoint needs input.bbox".into()))?;
                let zoom = cfg
                    .u64("input.zoom")?
                    .ok_or_else(|| ConfigError("input.endpoint needs input.zoom".into()))?;
                if zoom > 22 {
                    return Err(ConfigError(format!("input.zoom={zoom} > 22")));
                }
                InputSource::Tiles {
                    endpoint: cfg.get("input.endpoint").unwrap().to_string(),
                    bbox: parse_bbox(bbox_text)?,
                    zoom: zoom as u8,
                    cache_dir: cfg.path("input.cache_dir"),
                }
            }
            _ => InputSource::Synth {
                spec: build_scene_spec(cfg)?,
                seed: cfg.u64("synth.seed")?.unwrap_or(0),
            },
        }),
        several => Err(ConfigError(format!(
            "multiple input sources set: {}",
            several.join(", ")
        ))),
    }
}

fn build_georef(cfg: &ConfigMap) -> Result<Option<GeoRefSpec>, ConfigError> {
    let zoom = cfg.f64("georef.zoom")?;
    let lat = cfg.f64("georef.center_lat")?;
    let lon = cfg.f64("georef.center_lon")?;
    match (zoom, lat, lon) {
        (None, None, None) => Ok(None),
        (Some(zoom), Some(center_lat), Some(center_lon)) => Ok(Some(GeoRefSpec {
            zoom,
            center_lat,
            center_lon,
        })),
        _ => Err(ConfigError(
            "georef needs all of georef.zoom, georef.center_lat, georef.center_lon".into(),
        )),
    }
}

pub fn parse_bbox(text: &str) -> Result<LatLonBbox, ConfigError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| ConfigError(format!("bbox {text:?} is not min_lat,min_lon,max_lat,max_lon")))?;
    if parts.len() != 4 {
        return Err(ConfigError(format!(
            "bbox {text:?} needs exactly 4 comma-separated values"
        )));
    }
    LatLonBbox::new(parts[0], parts[1], parts[2], parts[3])
        .map_err(|e| ConfigError(e.to_string()))
}

/// Scene parameters under the `synth.` prefix; unset keys keep the
/// documented defaults.
pub fn build_scene_spec(cfg: &ConfigMap) -> Result<SceneSpec, ConfigError> {
    let mut spec = moatline::default_spec();
    if let Some(v) = cfg.f64("synth.resolution_m")? {
        if v <= 0.0 {
            return Err(ConfigError(format!("synth.resolution_m={v} must be > 0")));
        }
        spec.resolution_m = v;
    }
    if let Some(v) = cfg.f64("synth.extent_m")? {
        spec.extent_m = v;
    }
    if let Some(v) = cfg.f64("synth.center_lat")? {
        spec.center_lat = v;
    }
    if let Some(v) = cfg.f64("synth.center_lon")? {
        spec.center_lon = v;
    }
    if let Some(v) = cfg.f64("synth.sand.intensity")? {
        spec.sand_intensity = v;
    }
    if let Some(v) = cfg.f64("synth.hill.major_m")? {
        spec.hill.major_m = v;
    }
    if let Some(v) = cfg.f64("synth.hill.minor_m")? {
        spec.hill.minor_m = v;
    }
    if let Some(v) = cfg.f64("synth.hill.intensity")? {
        spec.hill.intensity = v;
    }
    if let Some(v) = cfg.f64("synth.moat.width_m")? {
        spec.moat.width_m = v;
    }
    if let Some(v) = cfg.f64("synth.moat.intensity")? {
        spec.moat.intensity = v;
    }
    if let Some(v) = cfg.f64("synth.satellite_ring_m")? {
        spec.satellite_ring_m = v;
    }
    if let Some(v) = cfg.f64("synth.satellite_phase_deg")? {
        spec.satellite_phase_deg = v;
    }
    if let Some(v) = cfg.bool("synth.trench.enabled")? {
        spec.trench.enabled = v;
    }
    if let Some(v) = cfg.f64("synth.trench.amplitude_m")? {
        spec.trench.amplitude_m = v;
    }
    if let Some(v) = cfg.f64("synth.trench.wavelength_m")? {
        spec.trench.wavelength_m = v;
    }
    if let Some(v) = cfg.f64("synth.trench.width_m")? {
        spec.trench.width_m = v;
    }
    if let Some(v) = cfg.f64("synth.trench.intensity")? {
        spec.trench.intensity = v;
    }
    if let Some(v) = cfg.bool("synth.flag")? {
        spec.flag = v;
    }
    if let Some(v) = cfg.f64("synth.noise.amplitude")? {
        if v < 0.0 {
            return Err(ConfigError("synth.noise.amplitude must be >= 0".into()));
        }
        spec.noise_amplitude = v;
    }

    // An explicit satellite list replaces the default one; indices must
    // be dense from 0.
    let mut sites = Vec::new();
    for i in 0.. {
        let prefix = format!("synth.satellite.{i}");
        let shape = cfg.get(&format!("{prefix}.shape"));
        let size = cfg.f64(&format!("{prefix}.size_m"))?;
        let intensity = cfg.f64(&format!("{prefix}.intensity"))?;
        if shape.is_none() && size.is_none() && intensity.is_none() {
            break;
        }
        let shape = match shape.unwrap_or("triangle") {
            "triangle" => SatShape::Triangle,
            "quad" => SatShape::Quad,
            other => {
                return Err(ConfigError(format!(
                    "{prefix}.shape={other} (expected triangle or quad)"
                )))
            }
        };
        sites.push(SatelliteSite {
            shape,
            size_m: size.unwrap_or(140.0),
            intensity: intensity.unwrap_or(0.15),
        });
    }
    if !sites.is_empty() {
        spec.satellites = sites;
    }
    Ok(spec)
}

/// Serializes a scene spec back into the config format.
pub fn scene_spec_to_config(spec: &SceneSpec, seed: u64) -> String {
    let mut out = String::new();
    let mut push = |key: &str, value: String| {
        out.push_str(key);
        out.push('=');
        out.push_str(&value);
        out.push('\n');
    };
    push("input.synth", "true".into());
    push("synth.seed", seed.to_string());
    push("synth.resolution_m", spec.resolution_m.to_string());
    push("synth.extent_m", spec.extent_m.to_string());
    push("synth.center_lat", spec.center_lat.to_string());
    push("synth.center_lon", spec.center_lon.to_string());
    push("synth.sand.intensity", spec.sand_intensity.to_string());
    push("synth.hill.major_m", spec.hill.major_m.to_string());
    push("synth.hill.minor_m", spec.hill.minor_m.to_string());
    push("synth.hill.intensity", spec.hill.intensity.to_string());
    push("synth.moat.width_m", spec.moat.width_m.to_string());
    push("synth.moat.intensity", spec.moat.intensity.to_string());
    push("synth.satellite_ring_m", spec.satellite_ring_m.to_string());
    push(
        "synth.satellite_phase_deg",
        spec.satellite_phase_deg.to_string(),
    );
    for (i, site) in spec.satellites.iter().enumerate() {
        let shape = match site.shape {
            SatShape::Triangle => "triangle",
            SatShape::Quad => "quad",
        };
        push(&format!("synth.satellite.{i}.shape"), shape.into());
        push(
            &format!("synth.satellite.{i}.size_m"),
            site.size_m.to_string(),
        );
        push(
            &format!("synth.satellite.{i}.intensity"),
            site.intensity.to_string(),
        );
    }
    push("synth.trench.enabled", spec.trench.enabled.to_string());
    push(
        "synth.trench.amplitude_m",
        spec.trench.amplitude_m.to_string(),
    );
    push(
        "synth.trench.wavelength_m",
        spec.trench.wavelength_m.to_string(),
    );
    push("synth.trench.width_m", spec.trench.width_m.to_string());
    push("synth.trench.intensity", spec.trench.intensity.to_string());
    push("synth.flag", spec.flag.to_string());
    push("synth.noise.amplitude", spec.noise_amplitude.to_string());
    out
}
