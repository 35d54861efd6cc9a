//! XYZ tile client with a disk cache, plus mosaic stitching.
//!
//! The endpoint is a URL template with `{z}/{x}/{y}` placeholders; any
//! XYZ-compatible server (or a local stub) works. Fetched bytes are
//! cached under `cache_dir/<endpoint-hash>/<z>/<x>/<y>.bin`, written
//! atomically, and replayed without network access on later runs. The
//! transport is a trait so tests inject canned responses.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::error::{Error, Result};
use crate::geo::{latlon_to_global_pixel, GeoRef, TILE_SIZE};
use crate::raster::{decode_image, Raster};

/// A tile address in the slippy-map scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileCoord {
    pub z: u8,
    pub x: u32,
    pub y: u32,
}

impl TileCoord {
    /// Validated constructor: zoom 0..=22 and indices within `2^z`.
    pub fn new(z: u8, x: u32, y: u32) -> Result<Self> {
        let span = 1u64 << z.min(32);
        if z > 22 || x as u64 >= span || y as u64 >= span {
            return Err(Error::InvalidParameter(format!(
                "tile {z}/{x}/{y} outside zoom bounds"
            )));
        }
        Ok(Self { z, x, y })
    }
}

/// Inclusive rectangle of tile indices at one zoom level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileBbox {
    pub z: u8,
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl TileBbox {
    pub fn cols(&self) -> u32 {
        self.x1 - self.x0 + 1
    }

    pub fn rows(&self) -> u32 {
        self.y1 - self.y0 + 1
    }

    pub fn coords(&self) -> impl Iterator<Item = TileCoord> + '_ {
        let z = self.z;
        (self.y0..=self.y1)
            .flat_map(move |y| (self.x0..=self.x1).map(move |x| TileCoord { z, x, y }))
    }
}

/// Raw HTTP response as seen by the tile client.
#[derive(Debug, Clone)]
pub struct TransportResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

/// Connection-level failure (DNS, refused, timeout); retried with
/// backoff, unlike HTTP status errors which are final.
#[derive(Debug, Clone)]
pub struct TransportFailure(pub String);

pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> std::result::Result<TransportResponse, TransportFailure>;
}

/// Blocking HTTP transport backed by ureq.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new() -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build();
        Self {
            agent: config.into(),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> std::result::Result<TransportResponse, TransportFailure> {
        let mut response = self
            .agent
            .get(url)
            .call()
            .map_err(|e| TransportFailure(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_vec()
            .map_err(|e| TransportFailure(e.to_string()))?;
        Ok(TransportResponse { status, body })
    }
}

/// Environment variable that overrides the cache root directory.
pub const CACHE_ENV_VAR: &str = "MOATLINE_CACHE_DIR";

/// Cache root: `$MOATLINE_CACHE_DIR`, else `<tmp>/moatline-tiles`.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("moatline-tiles"))
}

/// A tile endpoint plus fetch policy and cache location.
pub struct TileSource {
    template: String,
    cache_dir: PathBuf,
    max_concurrent: usize,
    retries: u32,
    backoff: Duration,
    transport: Arc<dyn Transport>,
    temp_counter: AtomicUsize,
}

impl TileSource {
    pub fn new(template: impl Into<String>, cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            template: template.into(),
            cache_dir: cache_dir.into(),
            max_concurrent: 4,
            retries: 2,
            backoff: Duration::from_millis(250),
            transport: Arc::new(HttpTransport::new()),
            temp_counter: AtomicUsize::new(0),
        }
    }

    pub fn with_transport(mut self, transport: Arc<dyn Transport>) -> Self {
        self.transport = transport;
        self
    }

    pub fn with_max_concurrent(mut self, n: usize) -> Self {
        self.max_concurrent = n.max(1);
        self
    }

    pub fn with_retries(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    pub fn url_for(&self, t: TileCoord) -> String {
        self.template
            .replace("{z}", &t.z.to_string())
            .replace("{x}", &t.x.to_string())
            .replace("{y}", &t.y.to_string())
    }

    fn cache_path(&self, t: TileCoord) -> PathBuf {
        self.cache_dir
            .join(endpoint_hash(&self.template))
            .join(t.z.to_string())
            .join(t.x.to_string())
            .join(format!("{}.bin", t.y))
    }

    /// Raw tile bytes: cache hit short-circuits the network; a miss
    /// fetches with retries and stores the bytes only after they decode,
    /// so failures never poison the cache.
    fn fetch_bytes(&self, t: TileCoord) -> Result<Vec<u8>> {
        let path = self.cache_path(t);
        if let Ok(bytes) = std::fs::read(&path) {
            return Ok(bytes);
        }

        let url = self.url_for(t);
        let mut last_failure = String::new();
        let mut attempts = 0;
        let response = loop {
            attempts += 1;
            match self.transport.get(&url) {
                Ok(resp) => break Some(resp),
                Err(TransportFailure(detail)) => {
                    last_failure = detail;
                    if attempts > self.retries {
                        break None;
                    }
                    std::thread::sleep(self.backoff * attempts);
                }
            }
        };
        let response = response.ok_or(Error::Network {
            z: t.z,
            x: t.x,
            y: t.y,
            attempts,
            detail: last_failure,
        })?;
        match response.status {
            200 => {}
            404 => {
                return Err(Error::TileMissing {
                    z: t.z,
                    x: t.x,
                    y: t.y,
                })
            }
            status => {
                return Err(Error::HttpStatus {
                    status,
                    z: t.z,
                    x: t.x,
                    y: t.y,
                })
            }
        }
        // Validate before caching.
        decode_image(&response.body, Path::new(&url)).map_err(|e| Error::BadPayload {
            z: t.z,
            x: t.x,
            y: t.y,
            detail: e.to_string(),
        })?;
        self.store_atomically(&path, &response.body)?;
        Ok(response.body)
    }

    fn store_atomically(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let parent = path.parent().expect("cache paths have parents");
        std::fs::create_dir_all(parent).map_err(io_err)?;
        let n = self.temp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = parent.join(format!(
            ".tmp-{}-{n}",
            std::process::id(),
        ));
        std::fs::write(&tmp, bytes).map_err(io_err)?;
        std::fs::rename(&tmp, path).map_err(io_err)?;
        Ok(())
    }
}

fn endpoint_hash(template: &str) -> String {
    // FNV-1a, hex; only needs to separate cache namespaces per endpoint.
    let mut hash = 0xcbf29ce484222325u64;
    for b in template.bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

/// Fetches one tile as a grayscale raster.
pub fn fetch_tile(src: &TileSource, t: TileCoord) -> Result<Raster> {
    let bytes = src.fetch_bytes(t)?;
    let url = src.url_for(t);
    let image = decode_image(&bytes, Path::new(&url)).map_err(|e| Error::BadPayload {
        z: t.z,
        x: t.x,
        y: t.y,
        detail: e.to_string(),
    })?;
    let raster = image.into_gray();
    if raster.width() != TILE_SIZE || raster.height() != TILE_SIZE {
        return Err(Error::BadTileSize {
            z: t.z,
            x: t.x,
            y: t.y,
            width: raster.width(),
            height: raster.height(),
            expected: TILE_SIZE,
        });
    }
    Ok(raster)
}

/// Assembles a mosaic from per-coordinate tiles covering `bbox`. Tile
/// `(x, y)` lands at block `(x - x0, y - y0)`; the GeoRef origin is the
/// global pixel of tile `(x0, y0)`.
pub fn stitch(tiles: &HashMap<TileCoord, Raster>, bbox: TileBbox) -> Result<(Raster, GeoRef)> {
    let ts = TILE_SIZE as usize;
    let width = bbox.cols() * TILE_SIZE;
    let height = bbox.rows() * TILE_SIZE;
    let mut data = vec![0.0; width as usize * height as usize];
    for coord in bbox.coords() {
        let tile = tiles.get(&coord).ok_or(Error::TileNotProvided {
            z: coord.z,
            x: coord.x,
            y: coord.y,
        })?;
        if tile.width() != TILE_SIZE || tile.height() != TILE_SIZE {
            return Err(Error::BadTileSize {
                z: coord.z,
                x: coord.x,
                y: coord.y,
                width: tile.width(),
                height: tile.height(),
                expected: TILE_SIZE,
            });
        }
        let bx = (coord.x - bbox.x0) as usize * ts;
        let by = (coord.y - bbox.y0) as usize * ts;
        for row in 0..ts {
            let src = &tile.data()[row * ts..(row + 1) * ts];
            let offset = (by + row) * width as usize + bx;
            data[offset..offset + ts].copy_from_slice(src);
        }
    }
    let georef = GeoRef::new(
        bbox.z as f64,
        (
            bbox.x0 as f64 * TILE_SIZE as f64,
            bbox.y0 as f64 * TILE_SIZE as f64,
        ),
        width,
        height,
    );
    Ok((Raster::new(width, height, data), georef))
}

/// Geographic bounding box, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLonBbox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl LatLonBbox {
    pub fn new(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Result<Self> {
        if !(min_lat < max_lat && min_lon < max_lon) {
            return Err(Error::EmptyRegion(format!(
                "bbox [{min_lat},{min_lon}] .. [{max_lat},{max_lon}] has no area"
            )));
        }
        Ok(Self {
            min_lat,
            min_lon,
            max_lat,
            max_lon,
        })
    }
}

/// Tile rectangle covering a pixel span `[min, max)` along one axis.
fn covering_range(min_px: f64, max_px: f64, max_index: u32) -> (u32, u32) {
    let lo = (min_px.floor() / TILE_SIZE as f64).floor().max(0.0) as u32;
    let hi_px = max_px.ceil() - 1.0;
    let hi = (hi_px.max(0.0) / TILE_SIZE as f64).floor() as u32;
    (lo.min(max_index), hi.min(max_index).max(lo))
}

/// Fetches every tile covering the bbox (bounded concurrency), stitches
/// them, and crops to the exact pixel bbox.
pub fn fetch_region(
    src: &TileSource,
    bbox: LatLonBbox,
    zoom: u8,
) -> Result<(Raster, GeoRef)> {
    if zoom > 22 {
        return Err(Error::InvalidParameter(format!("zoom {zoom} > 22")));
    }
    // North edge has the smaller global y.
    let (px_w, py_n) = latlon_to_global_pixel(bbox.max_lat, bbox.min_lon, zoom as f64)?;
    let (px_e, py_s) = latlon_to_global_pixel(bbox.min_lat, bbox.max_lon, zoom as f64)?;
    let max_index = (1u32 << zoom) - 1;
    let (tx0, tx1) = covering_range(px_w, px_e, max_index);
    let (ty0, ty1) = covering_range(py_n, py_s, max_index);
    let tile_bbox = TileBbox {
        z: zoom,
        x0: tx0,
        y0: ty0,
        x1: tx1,
        y1: ty1,
    };

    let coords: Vec<TileCoord> = tile_bbox.coords().collect();
    let fetched: Mutex<HashMap<TileCoord, Raster>> = Mutex::new(HashMap::new());
    let failures: Mutex<Vec<(u8, u32, u32)>> = Mutex::new(Vec::new());
    let next: AtomicUsize = AtomicUsize::new(0);
    let workers = src.max_concurrent.min(coords.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&coord) = coords.get(i) else { break };
                match fetch_tile(src, coord) {
                    Ok(raster) => {
                        fetched.lock().unwrap().insert(coord, raster);
                    }
                    Err(_) => failures.lock().unwrap().push((coord.z, coord.x, coord.y)),
                }
            });
        }
    });
    let mut failures = failures.into_inner().unwrap();
    if !failures.is_empty() {
        failures.sort_unstable();
        return Err(Error::RegionFetch { failures });
    }
    let tiles = fetched.into_inner().unwrap();
    let (mosaic, _) = stitch(&tiles, tile_bbox)?;

    // Crop to the exact pixel bbox.
    let origin_x = px_w.floor();
    let origin_y = py_n.floor();
    let crop_x = (origin_x - tx0 as f64 * TILE_SIZE as f64) as u32;
    let crop_y = (origin_y - ty0 as f64 * TILE_SIZE as f64) as u32;
    let crop_w = ((px_e.ceil() - origin_x) as u32)
        .max(1)
        .min(mosaic.width() - crop_x);
    let crop_h = ((py_s.ceil() - origin_y) as u32)
        .max(1)
        .min(mosaic.height() - crop_y);
    let cropped = mosaic.crop(crop_x, crop_y, crop_w, crop_h);
    let georef = GeoRef::new(zoom as f64, (origin_x, origin_y), crop_w, crop_h);
    Ok((cropped, georef))
}
