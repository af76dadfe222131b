//! Rigid-body transforms and distance queries between segments and capsules.
//!
//! Everything downstream (kinematics, cable geometry, collision checks) is
//! built on the two types here: [`Pose`] for SE(3) transforms and [`Segment`]
//! for straight line pieces. Lengths are millimetres, angles degrees.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

/// Maximum tolerated orthonormality drift before a composed rotation is
/// re-orthonormalized.
const ROTATION_DRIFT_TOL: f64 = 1e-12;

/// Rigid transform: orthonormal rotation plus translation in mm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    rotation: Rotation3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation,
        }
    }

    /// Rotation of `angle_deg` about the given axis, no translation.
    pub fn from_axis_angle_deg(axis: &Unit<Vector3<f64>>, angle_deg: f64) -> Self {
        Self {
            rotation: Rotation3::from_axis_angle(axis, angle_deg.to_radians()),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation_x_deg(angle_deg: f64) -> Self {
        Self::from_axis_angle_deg(&Vector3::x_axis(), angle_deg)
    }

    pub fn rotation_y_deg(angle_deg: f64) -> Self {
        Self::from_axis_angle_deg(&Vector3::y_axis(), angle_deg)
    }

    pub fn rotation_z_deg(angle_deg: f64) -> Self {
        Self::from_axis_angle_deg(&Vector3::z_axis(), angle_deg)
    }

    /// Roll-pitch-yaw (x, then y, then z) in degrees plus a translation.
    pub fn from_rpy_deg(translation: Vector3<f64>, rpy_deg: [f64; 3]) -> Self {
        Self {
            rotation: Rotation3::from_euler_angles(
                rpy_deg[0].to_radians(),
                rpy_deg[1].to_radians(),
                rpy_deg[2].to_radians(),
            ),
            translation,
        }
    }

    pub fn rotation(&self) -> &Rotation3<f64> {
        &self.rotation
    }

    pub fn rotation_matrix(&self) -> &Matrix3<f64> {
        self.rotation.matrix()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    /// `self` applied after `other`: the result maps a point p to
    /// `self * (other * p)`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let mut rotation = self.rotation * other.rotation;
        if orthonormality_drift(rotation.matrix()) > ROTATION_DRIFT_TOL {
            rotation = reorthonormalize(rotation.matrix());
        }
        Pose {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn transform_segment(&self, s: &Segment) -> Segment {
        Segment {
            a: self.transform_point(&s.a),
            b: self.transform_point(&s.b),
        }
    }

    /// Geodesic angle in degrees between the two rotations.
    pub fn rotation_angle_to(&self, other: &Pose) -> f64 {
        let rel = self.rotation.inverse() * other.rotation;
        rel.angle().to_degrees()
    }

    pub fn translation_distance_to(&self, other: &Pose) -> f64 {
        (self.translation - other.translation).norm()
    }
}

impl std::ops::Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

fn orthonormality_drift(m: &Matrix3<f64>) -> f64 {
    let residual = m.transpose() * m - Matrix3::identity();
    residual.abs().max()
}

/// Gram-Schmidt on the columns, preserving column 0's direction.
fn reorthonormalize(m: &Matrix3<f64>) -> Rotation3<f64> {
    let c0 = Unit::new_normalize(m.column(0).into_owned());
    let c1_raw = m.column(1).into_owned();
    let c1 = Unit::new_normalize(c1_raw - c0.as_ref() * c0.dot(&c1_raw));
    let c2 = Unit::new_normalize(c0.cross(&c1));
    Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[
        c0.into_inner(),
        c1.into_inner(),
        c2.into_inner(),
    ]))
}

/// Rotation from a matrix that is expected to be orthonormal already
/// (deserialized data): kept bit-exact when within drift tolerance,
/// re-orthonormalized otherwise.
pub fn rotation_from_matrix(m: &Matrix3<f64>) -> Rotation3<f64> {
    if orthonormality_drift(m) <= 1e-9 {
        Rotation3::from_matrix_unchecked(*m)
    } else {
        reorthonormalize(m)
    }
}

/// serde adapter for [`Pose`]: rotation as nine row-major entries plus a
/// translation triple.
pub mod pose_serde {
    use super::*;
    use serde::ser::SerializeStruct;

    #[derive(serde::Deserialize)]
    struct Raw {
        r: [f64; 9],
        t: [f64; 3],
    }

    pub fn serialize<S: serde::Serializer>(pose: &Pose, s: S) -> Result<S::Ok, S::Error> {
        let m = pose.rotation_matrix();
        let mut r = [0.0; 9];
        for row in 0..3 {
            for col in 0..3 {
                r[row * 3 + col] = m[(row, col)];
            }
        }
        let t = pose.translation();
        let mut st = s.serialize_struct("Pose", 2)?;
        st.serialize_field("r", &r)?;
        st.serialize_field("t", &[t.x, t.y, t.z])?;
        st.end()
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Pose, D::Error> {
        let raw = Raw::deserialize(d)?;
        let m = Matrix3::new(
            raw.r[0], raw.r[1], raw.r[2], raw.r[3], raw.r[4], raw.r[5], raw.r[6], raw.r[7],
            raw.r[8],
        );
        Ok(Pose::new(
            super::rotation_from_matrix(&m),
            Vector3::new(raw.t[0], raw.t[1], raw.t[2]),
        ))
    }
}

/// serde adapter for `Option<Pose>`.
pub mod pose_serde_opt {
    use super::*;

    #[derive(serde::Serialize)]
    struct Wrap<'a>(#[serde(with = "pose_serde")] &'a Pose);

    #[derive(serde::Deserialize)]
    struct WrapOwned(#[serde(with = "pose_serde")] Pose);

    pub fn serialize<S: serde::Serializer>(
        pose: &Option<Pose>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        match pose {
            Some(p) => s.serialize_some(&Wrap(p)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(
        d: D,
    ) -> Result<Option<Pose>, D::Error> {
        let opt: Option<WrapOwned> = serde::Deserialize::deserialize(d)?;
        Ok(opt.map(|w| w.0))
    }
}

/// Straight segment between two points (mm). May be degenerate (a == b).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
}

impl Segment {
    pub fn new(a: Vector3<f64>, b: Vector3<f64>) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn point_at(&self, t: f64) -> Vector3<f64> {
        self.a + (self.b - self.a) * t
    }
}

/// Capsule: a segment swept by a sphere of the given radius (mm).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Capsule {
    pub axis: Segment,
    pub radius: f64,
}

impl Capsule {
    pub fn new(axis: Segment, radius: f64) -> Self {
        Self { axis, radius }
    }
}

/// Result of a segment-segment closest-point query.
#[derive(Clone, Copy, Debug)]
pub struct SegmentDistance {
    pub distance: f64,
    /// Closest point on the first segment.
    pub point_a: Vector3<f64>,
    /// Closest point on the second segment.
    pub point_b: Vector3<f64>,
}

/// Global minimum distance between two segments with a witness point pair.
///
/// Degenerate segments are treated as points. Clamped two-parameter
/// minimization after Ericson's closest-point construction.
pub fn segment_segment_distance(s1: &Segment, s2: &Segment) -> SegmentDistance {
    const EPS: f64 = 1e-12;

    let d1 = s1.b - s1.a;
    let d2 = s2.b - s2.a;
    let r = s1.a - s2.a;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);

    let (s, t) = if a <= EPS && e <= EPS {
        (0.0, 0.0)
    } else if a <= EPS {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom.abs() > EPS {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };

    let point_a = s1.point_at(s);
    let point_b = s2.point_at(t);
    SegmentDistance {
        distance: (point_a - point_b).norm(),
        point_a,
        point_b,
    }
}

/// Signed clearance between a segment and a capsule: axis distance minus
/// radius. Negative means penetration.
pub fn segment_capsule_clearance(s: &Segment, capsule: &Capsule) -> f64 {
    segment_segment_distance(s, &capsule.axis).distance - capsule.radius
}

/// Signed clearance between two capsules.
pub fn capsule_capsule_clearance(c1: &Capsule, c2: &Capsule) -> f64 {
    segment_segment_distance(&c1.axis, &c2.axis).distance - c1.radius - c2.radius
}
