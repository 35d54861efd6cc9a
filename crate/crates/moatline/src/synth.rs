//! Parametric synthetic fortress scenes with exact ground truth.
//!
//! Stands in for non-redistributable commercial imagery: a moated
//! elliptical hill, a pentagon of satellite earthworks linked to the
//! moat by undulating trenches, an optional flag motif, and seeded
//! noise. Geometry is evaluated analytically per pixel center, so the
//! ground-truth masks correspond exactly to the rendered regions when
//! the noise amplitude is zero.
//!
//! Default intensities are chosen so the edge contrast ladder descends
//! hill/moat interface > satellite boundaries > moat/sand boundary >
//! trenches > noise; one fixed threshold on the merged edge image then
//! isolates the hill outline and the five satellite outlines and
//! nothing else.

use crate::error::{Error, Result};
use crate::geo::{GeoRef, EARTH_RADIUS_M};
use crate::outline::BitMask;
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillSpec {
    /// Full major/minor axes of the hill ellipse, in meters.
    pub major_m: f64,
    pub minor_m: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoatSpec {
    /// Radial width of the annulus, measured along the axes.
    pub width_m: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatShape {
    Triangle,
    Quad,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteSite {
    pub shape: SatShape,
    /// Edge length of the polygon, in meters.
    pub size_m: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrenchSpec {
    pub enabled: bool,
    pub amplitude_m: f64,
    pub wavelength_m: f64,
    pub width_m: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    /// Meters per pixel.
    pub resolution_m: f64,
    /// Square scene edge length, in meters.
    pub extent_m: f64,
    pub center_lat: f64,
    pub center_lon: f64,
    pub sand_intensity: f64,
    pub hill: HillSpec,
    pub moat: MoatSpec,
    /// Distance of satellite centers from the scene center.
    pub satellite_ring_m: f64,
    /// Bearing of the first satellite, degrees counterclockwise from east.
    pub satellite_phase_deg: f64,
    pub satellites: Vec<SatelliteSite>,
    pub trench: TrenchSpec,
    pub flag: bool,
    /// Standard deviation of the per-pixel Gaussian noise; the sand
    /// value-noise texture is scaled to three times this amplitude.
    pub noise_amplitude: f64,
}

/// The documented default scene: 600 x 500 m hill in a 40 m moat, five
/// satellites on a 1 km ring spaced 72 degrees starting at 90, four
/// triangles of 140 m side plus one quad, sinusoidal trenches
/// (amplitude 30 m, wavelength 120 m), 2 m/px over a 2.6 km extent.
pub fn default_spec() -> SceneSpec {
    let triangle = |intensity| SatelliteSite {
        shape: SatShape::Triangle,
        size_m: 140.0,
        intensity,
    };
    SceneSpec {
        resolution_m: 2.0,
        extent_m: 2600.0,
        center_lat: 41.766927,
        center_lon: 100.73733,
        sand_intensity: 0.70,
        hill: HillSpec {
            major_m: 600.0,
            minor_m: 500.0,
            intensity: 0.90,
        },
        moat: MoatSpec {
            width_m: 40.0,
            intensity: 0.35,
        },
        satellite_ring_m: 1000.0,
        satellite_phase_deg: 90.0,
        satellites: vec![
            triangle(0.15),
            triangle(0.15),
            triangle(0.15),
            triangle(0.15),
            SatelliteSite {
                shape: SatShape::Quad,
                size_m: 120.0,
                intensity: 0.15,
            },
        ],
        trench: TrenchSpec {
            enabled: true,
            amplitude_m: 30.0,
            wavelength_m: 120.0,
            width_m: 8.0,
            intensity: 0.35,
        },
        flag: true,
        noise_amplitude: 0.004,
    }
}

/// Exact per-feature masks and derived dimensions for a rendered scene.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub hill: BitMask,
    pub moat: BitMask,
    pub satellites: Vec<BitMask>,
    /// Trenches plus the flag motif.
    pub trenches: BitMask,
    pub hill_centroid_px: (f64, f64),
    pub satellite_centroids_px: Vec<(f64, f64)>,
    /// Counterclockwise-from-east bearings, degrees in [0, 360).
    pub satellite_bearings_deg: Vec<f64>,
    /// (major, minor) caliper extents of the hill, meters.
    pub hill_extent_m: (f64, f64),
    /// Caliper extent per satellite, meters.
    pub satellite_extent_m: Vec<f64>,
    pub satellite_ring_m: f64,
}

/// A rendered scene: raster, exact ground truth, and georeference.
#[derive(Debug, Clone)]
pub struct Scene {
    pub raster: Raster,
    pub truth: GroundTruth,
    pub georef: GeoRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Feature {
    Sand,
    Hill,
    Moat,
    Satellite(usize),
    Trench,
}

struct Geometry {
    hill_a: f64,
    hill_b: f64,
    moat_a: f64,
    moat_b: f64,
    satellites: Vec<SatGeometry>,
    trench_half_width: f64,
    trench_amplitude: f64,
    trench_wavelength: f64,
    trenches_enabled: bool,
    flag: Option<FlagGeometry>,
}

struct SatGeometry {
    center: (f64, f64),
    vertices: Vec<(f64, f64)>,
    /// Trench axis: start on the moat outer boundary, end at the center.
    trench_start: (f64, f64),
}

struct FlagGeometry {
    /// Pole segment endpoints.
    pole_a: (f64, f64),
    pole_b: (f64, f64),
    pole_half_width: f64,
    /// Banner rectangle: center, unit axes, half extents.
    banner_center: (f64, f64),
    banner_u: (f64, f64),
    banner_v: (f64, f64),
    banner_half: (f64, f64),
}

impl Geometry {
    fn build(spec: &SceneSpec) -> Result<Self> {
        let hill_a = spec.hill.major_m / 2.0;
        let hill_b = spec.hill.minor_m / 2.0;
        let moat_a = hill_a + spec.moat.width_m;
        let moat_b = hill_b + spec.moat.width_m;
        let half_extent = spec.extent_m / 2.0;
        let reach = spec.satellite_ring_m
            + spec
                .satellites
                .iter()
                .map(|s| s.size_m)
                .fold(0.0, f64::max);
        if moat_a.max(moat_b) > half_extent || reach > half_extent {
            return Err(Error::InvalidParameter(format!(
                "scene geometry overflows the {} m extent",
                spec.extent_m
            )));
        }

        let count = spec.satellites.len();
        let mut satellites = Vec::with_capacity(count);
        for (i, site) in spec.satellites.iter().enumerate() {
            let theta = (spec.satellite_phase_deg + i as f64 * 360.0 / count as f64).to_radians();
            let dir = (theta.cos(), theta.sin());
            let center = (spec.satellite_ring_m * dir.0, spec.satellite_ring_m * dir.1);
            let vertices = match site.shape {
                SatShape::Triangle => {
                    // Equilateral, apex pointing outward along the ring bearing.
                    let rc = site.size_m / 3f64.sqrt();
                    (0..3)
                        .map(|j| {
                            let a = theta + j as f64 * 120f64.to_radians();
                            (center.0 + rc * a.cos(), center.1 + rc * a.sin())
                        })
                        .collect()
                }
                SatShape::Quad => {
                    let rc = site.size_m / 2f64.sqrt();
                    (0..4)
                        .map(|j| {
                            let a = theta + (45.0 + j as f64 * 90.0).to_radians();
                            (center.0 + rc * a.cos(), center.1 + rc * a.sin())
                        })
                        .collect()
                }
            };
            // Moat outer boundary point along this bearing.
            let denom = ((moat_b * dir.0).powi(2) + (moat_a * dir.1).powi(2)).sqrt();
            let r_outer = moat_a * moat_b / denom;
            satellites.push(SatGeometry {
                center,
                vertices,
                trench_start: (r_outer * dir.0, r_outer * dir.1),
            });
        }

        let flag = if spec.flag && spec.trench.enabled && !satellites.is_empty() {
            let sat = &satellites[0];
            let (sx, sy) = sat.trench_start;
            let (ex, ey) = sat.center;
            let len = (ex - sx).hypot(ey - sy);
            let u = ((ex - sx) / len, (ey - sy) / len);
            let n = (-u.1, u.0);
            let mid_along = len / 2.0;
            let sine = spec.trench.amplitude_m
                * (2.0 * std::f64::consts::PI * mid_along / spec.trench.wavelength_m).sin();
            let mid = (
                sx + u.0 * mid_along + n.0 * sine,
                sy + u.1 * mid_along + n.1 * sine,
            );
            let pole_len = 80.0;
            let pole_b = (mid.0 + n.0 * pole_len, mid.1 + n.1 * pole_len);
            Some(FlagGeometry {
                pole_a: mid,
                pole_b,
                pole_half_width: 3.0,
                banner_center: (pole_b.0 + u.0 * 30.0, pole_b.1 + u.1 * 30.0),
                banner_u: u,
                banner_v: n,
                banner_half: (30.0, 20.0),
            })
        } else {
            None
        };

        Ok(Self {
            hill_a,
            hill_b,
            moat_a,
            moat_b,
            satellites,
            trench_half_width: spec.trench.width_m / 2.0,
            trench_amplitude: spec.trench.amplitude_m,
            trench_wavelength: spec.trench.wavelength_m,
            trenches_enabled: spec.trench.enabled,
            flag,
        })
    }

    /// Feature at a scene point (meters east/north of center). Priority:
    /// hill over moat over satellites over trench over sand.
    fn classify(&self, x: f64, y: f64) -> Feature {
        if (x / self.hill_a).powi(2) + (y / self.hill_b).powi(2) <= 1.0 {
            return Feature::Hill;
        }
        if (x / self.moat_a).powi(2) + (y / self.moat_b).powi(2) <= 1.0 {
            return Feature::Moat;
        }
        for (i, sat) in self.satellites.iter().enumerate() {
            if point_in_convex(&sat.vertices, x, y) {
                return Feature::Satellite(i);
            }
        }
        if self.trenches_enabled {
            for sat in &self.satellites {
                if self.in_trench(sat, x, y) {
                    return Feature::Trench;
                }
            }
            if let Some(flag) = &self.flag {
                if flag.contains(x, y) {
                    return Feature::Trench;
                }
            }
        }
        Feature::Sand
    }

    fn in_trench(&self, sat: &SatGeometry, x: f64, y: f64) -> bool {
        let (sx, sy) = sat.trench_start;
        let (ex, ey) = sat.center;
        let len = (ex - sx).hypot(ey - sy);
        if len < 1e-9 {
            return false;
        }
        let u = ((ex - sx) / len, (ey - sy) / len);
        let along = (x - sx) * u.0 + (y - sy) * u.1;
        if !(0.0..=len).contains(&along) {
            return false;
        }
        let lateral = -(x - sx) * u.1 + (y - sy) * u.0;
        let sine = self.trench_amplitude
            * (2.0 * std::f64::consts::PI * along / self.trench_wavelength).sin();
        (lateral - sine).abs() <= self.trench_half_width
    }
}

impl FlagGeometry {
    fn contains(&self, x: f64, y: f64) -> bool {
        // Pole: distance to the segment.
        let (ax, ay) = self.pole_a;
        let (bx, by) = self.pole_b;
        let (dx, dy) = (bx - ax, by - ay);
        let len2 = dx * dx + dy * dy;
        let t = (((x - ax) * dx + (y - ay) * dy) / len2).clamp(0.0, 1.0);
        let (px, py) = (ax + t * dx, ay + t * dy);
        if (x - px).hypot(y - py) <= self.pole_half_width {
            return true;
        }
        // Banner rectangle in its local frame.
        let (rx, ry) = (x - self.banner_center.0, y - self.banner_center.1);
        let lu = rx * self.banner_u.0 + ry * self.banner_u.1;
        let lv = rx * self.banner_v.0 + ry * self.banner_v.1;
        lu.abs() <= self.banner_half.0 && lv.abs() <= self.banner_half.1
    }
}

fn point_in_convex(vertices: &[(f64, f64)], x: f64, y: f64) -> bool {
    let n = vertices.len();
    let mut sign = 0.0f64;
    for i in 0..n {
        let (ax, ay) = vertices[i];
        let (bx, by) = vertices[(i + 1) % n];
        let cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax);
        if cross.abs() < 1e-12 {
            continue;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return false;
        }
    }
    true
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58476D1CE4E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn hash_unit(seed: u64, tag: u64, a: u64, b: u64) -> f64 {
    let h = splitmix64(
        seed ^ splitmix64(tag ^ splitmix64(a).rotate_left(17) ^ splitmix64(b).rotate_left(41)),
    );
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Spatially correlated sand texture: bilinear value noise on a 32 px
/// lattice with smoothstep weights, in [-1, 1].
fn value_noise(seed: u64, px: u32, py: u32) -> f64 {
    const CELL: u32 = 32;
    let (gx, gy) = (px / CELL, py / CELL);
    let fx = (px % CELL) as f64 / CELL as f64;
    let fy = (py % CELL) as f64 / CELL as f64;
    let sx = fx * fx * (3.0 - 2.0 * fx);
    let sy = fy * fy * (3.0 - 2.0 * fy);
    let corner = |cx: u32, cy: u32| 2.0 * hash_unit(seed, 0x56414C55, cx as u64, cy as u64) - 1.0;
    let top = corner(gx, gy) * (1.0 - sx) + corner(gx + 1, gy) * sx;
    let bottom = corner(gx, gy + 1) * (1.0 - sx) + corner(gx + 1, gy + 1) * sx;
    top * (1.0 - sy) + bottom * sy
}

/// Standard-normal deviate for a pixel index, Box-Muller over hashed
/// uniforms. Fully determined by (seed, index).
fn gaussian(seed: u64, index: u64) -> f64 {
    let u1 = (splitmix64(seed ^ splitmix64(index)) >> 11) as f64 / (1u64 << 53) as f64;
    let u2 = (splitmix64(seed ^ splitmix64(index ^ 0x5A5A5A5A5A5A5A5A)) >> 11) as f64
        / (1u64 << 53) as f64;
    let r = (-2.0 * (1.0 - u1).max(f64::MIN_POSITIVE).ln()).sqrt();
    r * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Renders a scene deterministically from `(spec, seed)`.
pub fn render(spec: &SceneSpec, seed: u64) -> Result<Scene> {
    let geometry = Geometry::build(spec)?;
    let size_px = (spec.extent_m / spec.resolution_m).round() as u32;
    if size_px < 8 {
        return Err(Error::InvalidParameter(
            "scene smaller than 8 pixels across".into(),
        ));
    }
    let (w, h) = (size_px, size_px);
    let half = size_px as f64 / 2.0;

    let mut data = Vec::with_capacity(w as usize * h as usize);
    let mut hill = BitMask::new(w, h);
    let mut moat = BitMask::new(w, h);
    let mut satellites = vec![BitMask::new(w, h); spec.satellites.len()];
    let mut trenches = BitMask::new(w, h);

    for py in 0..h {
        // Pixel centers; y grows south, scene y grows north.
        let y_m = (half - (py as f64 + 0.5)) * spec.resolution_m;
        for px in 0..w {
            let x_m = ((px as f64 + 0.5) - half) * spec.resolution_m;
            let feature = geometry.classify(x_m, y_m);
            let mut v = match feature {
                Feature::Sand => {
                    spec.sand_intensity
                        + 3.0 * spec.noise_amplitude * value_noise(seed, px, py)
                }
                Feature::Hill => {
                    hill.set(px, py, true);
                    spec.hill.intensity
                }
                Feature::Moat => {
                    moat.set(px, py, true);
                    spec.moat.intensity
                }
                Feature::Satellite(i) => {
                    satellites[i].set(px, py, true);
                    spec.satellites[i].intensity
                }
                Feature::Trench => {
                    trenches.set(px, py, true);
                    spec.trench.intensity
                }
            };
            if spec.noise_amplitude > 0.0 {
                let index = py as u64 * w as u64 + px as u64;
                v += spec.noise_amplitude * gaussian(seed, index);
            }
            data.push(v.clamp(0.0, 1.0));
        }
    }

    // Zoom with this exact metric resolution at the scene latitude.
    let circumference = 2.0 * std::f64::consts::PI * EARTH_RADIUS_M;
    let zoom = (spec.center_lat.to_radians().cos() * circumference
        / (256.0 * spec.resolution_m))
        .log2();
    let georef = GeoRef::centered(zoom, spec.center_lat, spec.center_lon, w, h)?;

    let to_px = |p: (f64, f64)| (half + p.0 / spec.resolution_m, half - p.1 / spec.resolution_m);
    let count = spec.satellites.len();
    let truth = GroundTruth {
        hill,
        moat,
        satellites,
        trenches,
        hill_centroid_px: (half, half),
        satellite_centroids_px: geometry.satellites.iter().map(|s| to_px(s.center)).collect(),
        satellite_bearings_deg: (0..count)
            .map(|i| {
                (spec.satellite_phase_deg + i as f64 * 360.0 / count as f64).rem_euclid(360.0)
            })
            .collect(),
        hill_extent_m: (spec.hill.major_m, spec.hill.minor_m),
        satellite_extent_m: spec
            .satellites
            .iter()
            .map(|s| match s.shape {
                SatShape::Triangle => s.size_m,
                SatShape::Quad => s.size_m * 2f64.sqrt(),
            })
            .collect(),
        satellite_ring_m: spec.satellite_ring_m,
    };

    Ok(Scene {
        raster: Raster::new(w, h, data),
        truth,
        georef,
    })
}
