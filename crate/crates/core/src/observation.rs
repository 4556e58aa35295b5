//! Pinhole geometry, the quality model and per-frame feature observations.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::{Modality, SensorRecord};
use crate::rng::{hash_str, stream, Purpose};

/// Width of the full-frame reference sensor used to convert focal length
/// into pixels.
pub const REFERENCE_SENSOR_WIDTH_MM: f64 = 36.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeometryError {
    NonPositiveDistance(f64),
    FocalOutOfRange { focal_mm: f64, min_mm: f64, max_mm: f64 },
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::NonPositiveDistance(d) => write!(f, "distance must be positive, got {d}"),
            GeometryError::FocalOutOfRange { focal_mm, min_mm, max_mm } => write!(
                f,
                "focal length {focal_mm} mm outside lens range {min_mm}-{max_mm} mm"
            ),
        }
    }
}

impl core::error::Error for GeometryError {}

/// Focal length in pixels for a sensor of the given width.
pub fn focal_px(sensor: &SensorRecord, focal_mm: f64) -> f64 {
    focal_mm / REFERENCE_SENSOR_WIDTH_MM * f64::from(sensor.resolution_px.0)
}

/// Projected height in pixels of an object `size_m` tall at `distance_m`.
pub fn projected_px(
    sensor: &SensorRecord,
    focal_mm: f64,
    distance_m: f64,
    size_m: f64,
) -> Result<f64, GeometryError> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(GeometryError::NonPositiveDistance(distance_m));
    }
    let lens = sensor.focal_length_mm;
    if !(focal_mm >= lens.min_mm && focal_mm <= lens.max_mm) {
        return Err(GeometryError::FocalOutOfRange {
            focal_mm,
            min_mm: lens.min_mm,
            max_mm: lens.max_mm,
        });
    }
    Ok(focal_px(sensor, focal_mm) * size_m / distance_m)
}

pub fn head_pixel_height(
    sensor: &SensorRecord,
    focal_mm: f64,
    distance_m: f64,
    head_size_m: f64,
) -> Result<f64, GeometryError> {
    projected_px(sensor, focal_mm, distance_m, head_size_m)
}

/// Quality model constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityModel {
    /// Pixel height at which each modality reaches full resolution quality.
    /// Face uses head height, body and gait use body height.
    pub reference_px: [f64; 3],
    /// Turbulence attenuation per modality, m^(-1/3).
    pub kappa: [f64; 3],
    pub floor: f64,
}

impl Default for QualityModel {
    fn default() -> Self {
        Self {
            reference_px: [60.0, 120.0, 120.0],
            kappa: [3e11, 3e10, 1e10],
            floor: 0.05,
        }
    }
}

impl QualityModel {
    /// `clamp(px / ref, floor, 1) * exp(-kappa * cn2 * distance)`.
    pub fn quality(&self, modality: Modality, px: f64, cn2: f64, distance_m: f64) -> f64 {
        let i = modality.index();
        let resolution = (px / self.reference_px[i]).clamp(self.floor, 1.0);
        resolution * libm::exp(-self.kappa[i] * cn2 * distance_m)
    }
}

/// Identity-bearing unit vectors of one subject plus clothing appearance,
/// which never reaches any payload.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityLatent {
    pub modality: [Vec<f64>; 3],
    pub clothing: [Vec<f64>; 2],
}

fn gaussian_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

pub fn identity_latent(seed: u64, subject_id: &str, dims: [usize; 3]) -> IdentityLatent {
    let key = hash_str(subject_id);
    let modality = [0, 1, 2].map(|m| {
        let mut rng = stream(seed, Purpose::IdentityLatent, &[key, m as u64]);
        gaussian_unit(&mut rng, dims[m])
    });
    let clothing = [1u64, 2].map(|c| {
        let mut rng = stream(seed, Purpose::ClothingLatent, &[key, c]);
        gaussian_unit(&mut rng, dims[1])
    });
    IdentityLatent { modality, clothing }
}

/// Keys of one observation draw.
#[derive(Debug, Clone, Copy)]
pub struct ObservationKey<'a> {
    pub subject_id: &'a str,
    pub segment_id: &'a str,
    pub frame: u32,
    pub modality: Modality,
}

/// `normalize(mu + (sigma0 / q) * eps)` with `eps` drawn from the stream
/// keyed by the observation's identifiers. `sigma0 = 0` returns `mu`.
pub fn observe(seed: u64, key: ObservationKey<'_>, mu: &[f64], sigma0: f64, q: f64) -> Vec<f32> {
    if sigma0 == 0.0 {
        return mu.iter().map(|&x| x as f32).collect();
    }
    let mut rng = stream(
        seed,
        Purpose::Observation,
        &[
            hash_str(key.subject_id),
            hash_str(key.segment_id),
            u64::from(key.frame),
            key.modality.index() as u64,
        ],
    );
    let scale = sigma0 / q;
    let v: Vec<f64> = mu
        .iter()
        .map(|&m| m + scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let n = norm(&v);
    v.into_iter().map(|x| (x / n) as f32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FocalRange, Platform, SensorConfiguration, Site};
    use alloc::string::String;

    fn sensor(width: u32, focal: f64) -> SensorRecord {
        SensorRecord {
            sensor_id: String::from("s"),
            station_id: String::from("st"),
            make: String::new(),
            model: String::new(),
            serial: String::new(),
            resolution_px: (width, width * 9 / 16),
            focal_length_mm: FocalRange { min_mm: focal, max_mm: focal },
            platform: Platform::Ground,
            site: Site::Field,
            distance_m: 10.0,
            pitch_deg: 0.0,
            configuration: SensorConfiguration::FaceConfigured,
        }
    }

    #[test]
    fn pinhole_proportionality() {
        let s = sensor(3840, 200.0);
        let a = head_pixel_height(&s, 200.0, 100.0, 0.24).unwrap();
        let b = head_pixel_height(&s, 200.0, 200.0, 0.24).unwrap();
        assert_eq!(a, 2.0 * b);
        // 200/36*3840 px focal
        assert!((a - 200.0 / 36.0 * 3840.0 * 0.24 / 100.0).abs() < 1e-12);
    }

    #[test]
    fn face_camera_at_250m_clears_twenty_pixels() {
        // focal_px >= 20 * 250 / 0.24 = 20833.3
        let needed_mm = 20.0 * 250.0 / 0.24 / 3840.0 * 36.0;
        let s = sensor(3840, 200.0);
        assert!(head_pixel_height(&s, 200.0, 250.0, 0.24).unwrap() >= 20.0);
        assert!(needed_mm < 200.0);
        let short = sensor(3840, 100.0);
        assert!(head_pixel_height(&short, 100.0, 500.0, 0.24).unwrap() < 20.0);
    }

    #[test]
    fn geometry_errors() {
        let s = sensor(1920, 50.0);
        assert_eq!(
            head_pixel_height(&s, 50.0, 0.0, 0.24),
            Err(GeometryError::NonPositiveDistance(0.0))
        );
        assert!(matches!(
            head_pixel_height(&s, 60.0, 10.0, 0.24),
            Err(GeometryError::FocalOutOfRange { .. })
        ));
    }

    #[test]
    fn quality_monotone() {
        let q = QualityModel::default();
        let base = q.quality(Modality::Face, 40.0, 1e-15, 300.0);
        assert!(q.quality(Modality::Face, 40.0, 1e-14, 300.0) < base);
        assert!(q.quality(Modality::Face, 40.0, 1e-15, 400.0) < base);
        assert_eq!(q.quality(Modality::Face, 600.0, 0.0, 3.0), 1.0);
        assert_eq!(q.quality(Modality::Face, 0.1, 0.0, 3.0), 0.05);
    }

    #[test]
    fn latents_are_unit_and_keyed() {
        let a = identity_latent(1, "S1", [64, 64, 32]);
        for v in a.modality.iter().chain(a.clothing.iter()) {
            assert!((norm(v) - 1.0).abs() < 1e-12);
        }
        assert_eq!(a.modality[2].len(), 32);
        assert_eq!(a, identity_latent(1, "S1", [64, 64, 32]));
        assert_ne!(a.modality[0], identity_latent(1, "S2", [64, 64, 32]).modality[0]);
        assert_ne!(a.clothing[0], a.clothing[1]);
    }

    #[test]
    fn noiseless_observation_is_mu() {
        let lat = identity_latent(3, "S1", [8, 8, 8]);
        let key = ObservationKey { subject_id: "S1", segment_id: "x", frame: 0, modality: Modality::Face };
        let o = observe(3, key, &lat.modality[0], 0.0, 0.5);
        let expected: Vec<f32> = lat.modality[0].iter().map(|&x| x as f32).collect();
        assert_eq!(o, expected);
    }

    #[test]
    fn noisy_observation_is_keyed_and_unit() {
        let lat = identity_latent(3, "S1", [16, 16, 16]);
        let key = ObservationKey { subject_id: "S1", segment_id: "x", frame: 4, modality: Modality::Body };
        let a = observe(3, key, &lat.modality[1], 0.3, 0.5);
        let b = observe(3, key, &lat.modality[1], 0.3, 0.5);
        assert_eq!(a, b);
        let n: f32 = a.iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-5);
        let c = observe(3, ObservationKey { frame: 5, ..key }, &lat.modality[1], 0.3, 0.5);
        assert_ne!(a, c);
    }
}
