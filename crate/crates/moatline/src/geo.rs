//! Web Mercator projection math, raster georeferencing and metric
//! measurement.
//!
//! Global pixel coordinates follow the slippy-map convention: at zoom z
//! the world is a square of `256 * 2^z` pixels, x grows east from
//! lon = -180 and y grows south from the top Mercator latitude. The zoom
//! is carried as `f64`: tile work always uses integer levels, but
//! synthetic scenes georeference exact metric resolutions through
//! fractional zooms.

use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_378_137.0;
pub const TILE_SIZE: u32 = 256;
/// Largest latitude representable in Web Mercator.
pub const MAX_MERCATOR_LAT: f64 = 85.05113;

/// World edge length in pixels at a zoom level.
pub fn world_pixels(zoom: f64) -> f64 {
    TILE_SIZE as f64 * zoom.exp2()
}

fn check_latlon(lat: f64, lon: f64) -> Result<()> {
    if !(lat.is_finite() && lat.abs() <= MAX_MERCATOR_LAT) {
        return Err(Error::LatitudeOutOfRange(lat));
    }
    if !(lon.is_finite() && lon.abs() <= 180.0) {
        return Err(Error::LongitudeOutOfRange(lon));
    }
    Ok(())
}

/// WGS84 lat/lon (degrees) to global Mercator pixels.
pub fn latlon_to_global_pixel(lat: f64, lon: f64, zoom: f64) -> Result<(f64, f64)> {
    check_latlon(lat, lon)?;
    let world = world_pixels(zoom);
    let px = (lon + 180.0) / 360.0 * world;
    let phi = lat.to_radians();
    let py = (1.0 - (phi.tan() + 1.0 / phi.cos()).ln() / std::f64::consts::PI) / 2.0 * world;
    Ok((px, py))
}

/// Inverse of [`latlon_to_global_pixel`].
pub fn global_pixel_to_latlon(px: f64, py: f64, zoom: f64) -> Result<(f64, f64)> {
    let world = world_pixels(zoom);
    if !(0.0..=world).contains(&px) || !(0.0..=world).contains(&py) {
        return Err(Error::OutOfExtent {
            x: px,
            y: py,
            width: world,
            height: world,
        });
    }
    let lon = px / world * 360.0 - 180.0;
    let n = std::f64::consts::PI * (1.0 - 2.0 * py / world);
    let lat = n.sinh().atan().to_degrees();
    Ok((lat, lon))
}

/// Meters of terrain per pixel: `cos(lat) * 2πR / (256 * 2^zoom)`.
pub fn ground_resolution(lat: f64, zoom: f64) -> Result<f64> {
    if !(lat.is_finite() && lat.abs() <= MAX_MERCATOR_LAT) {
        return Err(Error::LatitudeOutOfRange(lat));
    }
    let circumference = 2.0 * std::f64::consts::PI * EARTH_RADIUS_M;
    Ok(lat.to_radians().cos() * circumference / world_pixels(zoom))
}

/// Affine link between raster pixels and the globe: raster pixel (0,0)
/// sits at `origin_px` in global Mercator pixels at `zoom`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoRef {
    zoom: f64,
    origin_px: (f64, f64),
    width: u32,
    height: u32,
}

impl GeoRef {
    pub fn new(zoom: f64, origin_px: (f64, f64), width: u32, height: u32) -> Self {
        Self {
            zoom,
            origin_px,
            width,
            height,
        }
    }

    /// GeoRef whose raster center sits at the given lat/lon.
    pub fn centered(
        zoom: f64,
        center_lat: f64,
        center_lon: f64,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let (cx, cy) = latlon_to_global_pixel(center_lat, center_lon, zoom)?;
        Ok(Self::new(
            zoom,
            (cx - width as f64 / 2.0, cy - height as f64 / 2.0),
            width,
            height,
        ))
    }

    pub fn zoom(&self) -> f64 {
        self.zoom
    }

    pub fn origin_px(&self) -> (f64, f64) {
        self.origin_px
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn tile_size(&self) -> u32 {
        TILE_SIZE
    }

    pub fn contains(&self, px: f64, py: f64) -> bool {
        (0.0..=self.width as f64).contains(&px) && (0.0..=self.height as f64).contains(&py)
    }

    /// Raster pixel (continuous) to lat/lon.
    pub fn pixel_to_latlon(&self, px: f64, py: f64) -> Result<(f64, f64)> {
        global_pixel_to_latlon(self.origin_px.0 + px, self.origin_px.1 + py, self.zoom)
    }

    /// Lat/lon to raster pixel (continuous, may fall outside the raster).
    pub fn latlon_to_pixel(&self, lat: f64, lon: f64) -> Result<(f64, f64)> {
        let (gx, gy) = latlon_to_global_pixel(lat, lon, self.zoom)?;
        Ok((gx - self.origin_px.0, gy - self.origin_px.1))
    }

    /// Ground resolution at the latitude of a raster pixel.
    pub fn resolution_at(&self, px: f64, py: f64) -> Result<f64> {
        let (lat, _) = self.pixel_to_latlon(px, py)?;
        ground_resolution(lat, self.zoom)
    }
}

/// Metric distance between two raster pixel positions: Euclidean pixel
/// distance scaled by the ground resolution at the midpoint latitude.
pub fn measure_distance(p1: (f64, f64), p2: (f64, f64), g: &GeoRef) -> Result<f64> {
    for p in [p1, p2] {
        if !g.contains(p.0, p.1) {
            return Err(Error::OutOfExtent {
                x: p.0,
                y: p.1,
                width: g.width() as f64,
                height: g.height() as f64,
            });
        }
    }
    let mid = ((p1.0 + p2.0) / 2.0, (p1.1 + p2.1) / 2.0);
    let res = g.resolution_at(mid.0, mid.1)?;
    let (dx, dy) = (p2.0 - p1.0, p2.1 - p1.1);
    Ok(dx.hypot(dy) * res)
}

#[cfg(test)]
mod tests {
    use super::*;

    // The site coordinates used throughout the measurement tests.
    const SITE_LAT: f64 = 41.766927;
    const SITE_LON: f64 = 100.73733;

    #[test]
    fn world_center_and_edges() {
        assert_eq!(latlon_to_global_pixel(0.0, 0.0, 1.0).unwrap(), (256.0, 256.0));
        assert_eq!(latlon_to_global_pixel(0.0, 180.0, 0.0).unwrap(), (256.0, 128.0));
    }

    #[test]
    fn site_coordinates_at_zoom_16() {
        let (px, py) = latlon_to_global_pixel(SITE_LAT, SITE_LON, 16.0).unwrap();
        assert!((px - 13_083_307.846314667).abs() < 1e-6, "{px}");
        assert!((py - 6_242_577.97594841).abs() < 1e-6, "{py}");
    }

    #[test]
    fn inverse_of_world_center() {
        let (lat, lon) = global_pixel_to_latlon(128.0, 128.0, 0.0).unwrap();
        assert_eq!((lat, lon), (0.0, 0.0));
    }

    #[test]
    fn round_trip_at_site() {
        let (px, py) = latlon_to_global_pixel(SITE_LAT, SITE_LON, 16.0).unwrap();
        let (lat, lon) = global_pixel_to_latlon(px, py, 16.0).unwrap();
        assert!((lat - SITE_LAT).abs() < 1e-9);
        assert!((lon - SITE_LON).abs() < 1e-9);
    }

    #[test]
    fn round_trip_over_random_points() {
        let mut state = 0x853C49E6748FEA9Bu64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let lat = (next() * 2.0 - 1.0) * MAX_MERCATOR_LAT;
            let lon = (next() * 2.0 - 1.0) * 180.0;
            let zoom = (next() * 22.0).floor();
            let (px, py) = latlon_to_global_pixel(lat, lon, zoom).unwrap();
            let (lat2, lon2) = global_pixel_to_latlon(px, py, zoom).unwrap();
            assert!((lat - lat2).abs() < 1e-9, "lat {lat} z{zoom}");
            assert!((lon - lon2).abs() < 1e-9, "lon {lon} z{zoom}");
        }
    }

    #[test]
    fn rejects_out_of_range_coordinates() {
        assert!(matches!(
            latlon_to_global_pixel(86.0, 0.0, 4.0),
            Err(Error::LatitudeOutOfRange(_))
        ));
        assert!(matches!(
            latlon_to_global_pixel(0.0, 181.0, 4.0),
            Err(Error::LongitudeOutOfRange(_))
        ));
        assert!(matches!(
            global_pixel_to_latlon(-1.0, 0.0, 0.0),
            Err(Error::OutOfExtent { .. })
        ));
    }

    #[test]
    fn ground_resolution_values() {
        let equator = ground_resolution(0.0, 0.0).unwrap();
        assert!((equator - 156_543.03392804097).abs() < 1e-6, "{equator}");

        let site = ground_resolution(SITE_LAT, 16.0).unwrap();
        assert!((site - 1.7816052904667936).abs() < 1e-12, "{site}");

        let at60 = ground_resolution(60.0, 5.0).unwrap();
        let at0 = ground_resolution(0.0, 5.0).unwrap();
        assert!((at60 - at0 / 2.0).abs() < 1e-6);
    }

    #[test]
    fn resolution_halves_per_zoom_and_decreases_with_latitude() {
        for z in 0..21 {
            let a = ground_resolution(30.0, z as f64).unwrap();
            let b = ground_resolution(30.0, (z + 1) as f64).unwrap();
            assert!((a / b - 2.0).abs() < 1e-12);
        }
        let mut prev = f64::INFINITY;
        for lat in [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 85.0] {
            let r = ground_resolution(lat, 10.0).unwrap();
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn measured_site_length() {
        let g = GeoRef::centered(16.0, SITE_LAT, SITE_LON, 1024, 1024).unwrap();
        let d = measure_distance((100.0, 100.0), (437.0, 100.0), &g).unwrap();
        assert!((d - 600.0).abs() <= 6.0, "337 px should span ~600 m, got {d}");

        assert_eq!(measure_distance((5.0, 5.0), (5.0, 5.0), &g).unwrap(), 0.0);
        let ab = measure_distance((10.0, 20.0), (400.0, 900.0), &g).unwrap();
        let ba = measure_distance((400.0, 900.0), (10.0, 20.0), &g).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn measure_rejects_out_of_raster_points() {
        let g = GeoRef::centered(16.0, SITE_LAT, SITE_LON, 64, 64).unwrap();
        assert!(matches!(
            measure_distance((0.0, 0.0), (65.0, 0.0), &g),
            Err(Error::OutOfExtent { .. })
        ));
    }
}
