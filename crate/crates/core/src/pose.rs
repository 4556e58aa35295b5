//! Head pose recovery.
//!
//! Observed 3D head landmarks are aligned to a canonical zero-pose head with
//! the Kabsch-Umeyama least-squares fit; the resulting rotation is then
//! decomposed into yaw, pitch and roll relative to the camera.
//!
//! Angle convention: the canonical head looks along +z (towards the camera),
//! +y is up. A pose is `R = Ry(yaw) * Rx(pitch) * Rz(roll)`. From a rotation,
//! the forward vector `f = R * [0, 0, 1]` gives `yaw = atan2(f_x, f_z)` and
//! `pitch = atan2(-f_y, sqrt(f_x^2 + f_z^2))`; roll is read from the residual
//! of the up vector `R * [0, 1, 0]` once yaw and pitch are removed.

use crate::model::Point3;
use core::fmt;
use nalgebra::{Matrix3, Vector3};

/// Canonical zero-pose head landmarks in metres: nose tip, chin, eyes,
/// ears and crown.
pub const CANONICAL_HEAD: [Point3; 7] = [
    Point3::new(0.0, 0.0, 0.105),
    Point3::new(0.0, -0.095, 0.065),
    Point3::new(-0.032, 0.032, 0.075),
    Point3::new(0.032, 0.032, 0.075),
    Point3::new(-0.076, 0.0, 0.0),
    Point3::new(0.076, 0.0, 0.0),
    Point3::new(0.0, 0.115, -0.01),
];

/// Relative threshold on the second singular value below which a point
/// configuration is treated as rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

/// Pitch band near +/-90 degrees where roll is reported as zero.
const GIMBAL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignmentError {
    TooFewPoints(usize),
    CountMismatch { source: usize, target: usize },
    NonFinite,
    /// Collinear or coincident points: the rotation is not unique.
    Degenerate,
}

impl fmt::Display for AlignmentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlignmentError::TooFewPoints(n) => {
                write!(f, "need at least 3 point pairs, got {n}")
            }
            AlignmentError::CountMismatch { source, target } => {
                write!(f, "point count mismatch: {source} source vs {target} target")
            }
            AlignmentError::NonFinite => f.write_str("non-finite coordinate"),
            AlignmentError::Degenerate => f.write_str("degenerate point configuration"),
        }
    }
}

impl core::error::Error for AlignmentError {}

/// Similarity transform `p -> scale * rotation * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        let v = self.rotation * to_vector(p) * self.scale + self.translation;
        Point3::new(v.x, v.y, v.z)
    }

    /// Sum of squared distances between transformed `source` and `target`.
    pub fn residual(&self, source: &[Point3], target: &[Point3]) -> f64 {
        source
            .iter()
            .zip(target)
            .map(|(s, t)| (to_vector(t) - to_vector(&self.apply(s))).norm_squared())
            .sum()
    }

    /// `R^T R = I` within `tol` (max abs entry) and `det(R) = +1`.
    pub fn is_proper_rotation(&self, tol: f64) -> bool {
        let err = self.rotation.transpose() * self.rotation - Matrix3::identity();
        err.amax() <= tol && (self.rotation.determinant() - 1.0).abs() <= tol
    }
}

fn to_vector(p: &Point3) -> Vector3<f64> {
    Vector3::new(p.x, p.y, p.z)
}

fn centroid(points: &[Point3]) -> Vector3<f64> {
    let sum = points
        .iter()
        .fold(Vector3::zeros(), |acc: Vector3<f64>, p| acc + to_vector(p));
    sum / points.len() as f64
}

/// Least-squares similarity fit of `source` onto `target`.
///
/// Minimises `sum |target_i - (s R source_i + t)|^2` over proper rotations
/// `R`, translations `t` and, when `with_scale` is set, a positive scale `s`
/// (otherwise `s = 1`). Reflections are never returned: the smallest
/// singular direction is flipped when `det(U V^T) < 0`.
pub fn kabsch_umeyama(
    source: &[Point3],
    target: &[Point3],
    with_scale: bool,
) -> Result<RigidTransform, AlignmentError> {
    if source.len() != target.len() {
        return Err(AlignmentError::CountMismatch {
            source: source.len(),
            target: target.len(),
        });
    }
    if source.len() < 3 {
        return Err(AlignmentError::TooFewPoints(source.len()));
    }
    let finite = |p: &Point3| p.x.is_finite() && p.y.is_finite() && p.z.is_finite();
    if !source.iter().chain(target).all(finite) {
        return Err(AlignmentError::NonFinite);
    }

    let n = source.len() as f64;
    let mu_src = centroid(source);
    let mu_dst = centroid(target);

    let mut cross = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    let mut src_var = 0.0;
    for (s, t) in source.iter().zip(target) {
        let sc = to_vector(s) - mu_src;
        let tc = to_vector(t) - mu_dst;
        cross += tc * sc.transpose();
        scatter += sc * sc.transpose();
        src_var += sc.norm_squared();
    }
    cross /= n;
    src_var /= n;

    // Collinear sources leave rotation about their line undetermined.
    let scatter_sv = scatter.singular_values();
    if !rank_at_least_two(&scatter_sv) {
        return Err(AlignmentError::Degenerate);
    }

    let svd = nalgebra::SVD::try_new(cross, true, true, f64::EPSILON, 0)
        .ok_or(AlignmentError::Degenerate)?;
    if !rank_at_least_two(&svd.singular_values) {
        return Err(AlignmentError::Degenerate);
    }
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(AlignmentError::Degenerate),
    };

    // Singular values are sorted descending, so the last axis is the one
    // to flip.
    let sign = if (u * v_t).determinant() < 0.0 { -1.0 } else { 1.0 };
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign));
    let rotation = u * correction * v_t;

    let scale = if with_scale {
        let sigma = &svd.singular_values;
        (sigma[0] + sigma[1] + sign * sigma[2]) / src_var
    } else {
        1.0
    };
    let translation = mu_dst - rotation * mu_src * scale;

    Ok(RigidTransform {
        rotation,
        translation,
        scale,
    })
}

fn rank_at_least_two(sorted_desc: &Vector3<f64>) -> bool {
    let top = sorted_desc[0];
    top > 0.0 && sorted_desc[1] > RANK_TOLERANCE * top
}

/// Head orientation relative to the camera, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseAngles {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

impl PoseAngles {
    pub const ZERO: PoseAngles = PoseAngles {
        yaw_deg: 0.0,
        pitch_deg: 0.0,
        roll_deg: 0.0,
    };

    pub fn new(yaw_deg: f64, pitch_deg: f64, roll_deg: f64) -> Self {
        Self {
            yaw_deg,
            pitch_deg,
            roll_deg,
        }
    }
}

/// Maps an angle into (-180, 180].
pub fn wrap_degrees(deg: f64) -> f64 {
    let mut d = libm::fmod(deg, 360.0);
    if d <= -180.0 {
        d += 360.0;
    } else if d > 180.0 {
        d -= 360.0;
    }
    // normalise -0.0
    d + 0.0
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = (libm::sin(a), libm::cos(a));
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = (libm::sin(a), libm::cos(a));
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = (libm::sin(a), libm::cos(a));
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation for the given pose: `Ry(yaw) * Rx(pitch) * Rz(roll)`.
pub fn rotation_from_angles(angles: &PoseAngles) -> Matrix3<f64> {
    rot_y(angles.yaw_deg.to_radians())
        * rot_x(angles.pitch_deg.to_radians())
        * rot_z(angles.roll_deg.to_radians())
}

/// Decomposes a proper rotation into yaw, pitch and roll.
pub fn pose_angles(transform: &RigidTransform) -> PoseAngles {
    rotation_angles(&transform.rotation)
}

pub fn rotation_angles(r: &Matrix3<f64>) -> PoseAngles {
    let f = r.column(2);
    let (fx, fy, fz) = (f[0], f[1], f[2]);
    let yaw = libm::atan2(fx, fz);
    let pitch = libm::atan2(-fy, libm::sqrt(fx * fx + fz * fz));

    let roll = if fy.abs() > 1.0 - GIMBAL_EPS {
        0.0
    } else {
        let (sy, cy) = (libm::sin(yaw), libm::cos(yaw));
        let (sp, cp) = (libm::sin(pitch), libm::cos(pitch));
        // Up and right vectors of the zero-roll frame with this yaw/pitch.
        let up0 = Vector3::new(sy * sp, cp, cy * sp);
        let right0 = Vector3::new(cy, 0.0, -sy);
        let up = r.column(1);
        libm::atan2(-up.dot(&right0), up.dot(&up0))
    };

    PoseAngles {
        yaw_deg: wrap_degrees(yaw.to_degrees()),
        pitch_deg: pitch.to_degrees() + 0.0,
        roll_deg: wrap_degrees(roll.to_degrees()),
    }
}

/// Pose of a head from landmarks index-matched to [`CANONICAL_HEAD`].
pub fn head_pose(keypoints: &[Point3]) -> Result<PoseAngles, AlignmentError> {
    if keypoints.len() != CANONICAL_HEAD.len() {
        return Err(AlignmentError::CountMismatch {
            source: CANONICAL_HEAD.len(),
            target: keypoints.len(),
        });
    }
    let fit = kabsch_umeyama(&CANONICAL_HEAD, keypoints, false)?;
    Ok(pose_angles(&fit))
}

/// Canonical landmarks posed by `angles` and shifted by `offset`.
pub fn posed_head(angles: &PoseAngles, offset: Point3) -> [Point3; 7] {
    let r = rotation_from_angles(angles);
    let t = to_vector(&offset);
    CANONICAL_HEAD.map(|p| {
        let v = r * to_vector(&p) + t;
        Point3::new(v.x, v.y, v.z)
    })
}
