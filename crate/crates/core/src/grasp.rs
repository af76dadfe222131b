//! Grasp candidates for primitive-composed objects and the grasp database.
//!
//! Candidates are antipodal parallel-gripper grasps computed offline in the
//! object's local frame, then mapped into the robot frame with the object
//! pose. The database is a plain CSV file keyed by object name so it can be
//! regenerated, inspected, and diffed.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use thiserror::Error;

use crate::se3::{Pose, Segment};

#[derive(Debug, Error)]
pub enum GraspDbError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown object '{0}' in grasp database")]
    UnknownObject(String),
}

/// Solid primitive in an object's local frame.
#[derive(Clone, Debug)]
pub enum PrimitiveShape {
    /// Axis-aligned box given by half-extents (mm).
    Box { half_extents: Vector3<f64> },
    /// Cylinder along local +z (mm).
    Cylinder { radius: f64, half_length: f64 },
}

/// An object composed of posed primitives.
#[derive(Clone, Debug)]
pub struct ShapeModel {
    pub name: String,
    pub parts: Vec<(Pose, PrimitiveShape)>,
}

impl ShapeModel {
    pub fn single_box(name: &str, half_extents: Vector3<f64>) -> Self {
        Self {
            name: name.to_string(),
            parts: vec![(Pose::identity(), PrimitiveShape::Box { half_extents })],
        }
    }

    /// Conservative enclosing capsules, one per part, in the object frame.
    pub fn enclosing_capsules(&self) -> Vec<crate::se3::Capsule> {
        self.parts
            .iter()
            .map(|(pose, shape)| match shape {
                PrimitiveShape::Box { half_extents } => {
                    let h = *half_extents;
                    let (axis, r) = if h.x >= h.y && h.x >= h.z {
                        (Vector3::new(h.x, 0.0, 0.0), (h.y * h.y + h.z * h.z).sqrt())
                    } else if h.y >= h.z {
                        (Vector3::new(0.0, h.y, 0.0), (h.x * h.x + h.z * h.z).sqrt())
                    } else {
                        (Vector3::new(0.0, 0.0, h.z), (h.x * h.x + h.y * h.y).sqrt())
                    };
                    crate::se3::Capsule::new(
                        pose.transform_segment(&Segment::new(-axis, axis)),
                        r,
                    )
                }
                PrimitiveShape::Cylinder {
                    radius,
                    half_length,
                } => crate::se3::Capsule::new(
                    pose.transform_segment(&Segment::new(
                        Vector3::new(0.0, 0.0, -half_length),
                        Vector3::new(0.0, 0.0, *half_length),
                    )),
                    *radius,
                ),
            })
            .collect()
    }
}

/// One parallel-gripper grasp in the object's local frame.
///
/// The hand frame convention: +z is the approach direction (into the
/// object), the gripper closes along +/-x, and the tool center point sits
/// between the fingertips.
#[derive(Clone, Debug)]
pub struct GraspCandidate {
    pub hand_pose_local: Pose,
    pub width_mm: f64,
    pub approach_local: Unit<Vector3<f64>>,
}

/// Sampler settings; enumeration is deterministic.
#[derive(Clone, Copy, Debug)]
pub struct GraspSampler {
    pub gripper_min: f64,
    pub gripper_max: f64,
    /// Hand rotations about the closing axis per graspable face pair.
    pub yaw_steps: usize,
}

impl Default for GraspSampler {
    fn default() -> Self {
        Self {
            gripper_min: 10.0,
            gripper_max: 80.0,
            yaw_steps: 4,
        }
    }
}

/// Antipodal side grasps on every graspable face pair of every part.
///
/// For a box, each axis whose face separation fits the gripper produces
/// `yaw_steps` grasps closing along that axis, repeated at up to three
/// stations along the box's long axis when it is long enough for two hands
/// (handover needs non-overlapping grasps). For a cylinder the closing axis
/// sweeps around the barrel. Objects with no pair inside the gripper range
/// yield an empty list.
pub fn generate_grasps(object: &ShapeModel, sampler: &GraspSampler) -> Vec<GraspCandidate> {
    let mut grasps = Vec::new();
    for (part_pose, shape) in &object.parts {
        match shape {
            PrimitiveShape::Box { half_extents } => {
                let h = *half_extents;
                let axes = [
                    (Vector3::x_axis(), 2.0 * h.x),
                    (Vector3::y_axis(), 2.0 * h.y),
                    (Vector3::z_axis(), 2.0 * h.z),
                ];
                for (closing, width) in axes {
                    if width < sampler.gripper_min || width > sampler.gripper_max {
                        continue;
                    }
                    for sign in [1.0, -1.0] {
                        let closing = Unit::new_unchecked(closing.into_inner() * sign);
                        for (lateral, offset) in grasp_stations(&h, &closing) {
                            for step in 0..sampler.yaw_steps {
                                let yaw = 360.0 * step as f64 / sampler.yaw_steps as f64;
                                let mut g = make_grasp(part_pose, &closing, yaw, width);
                                let shift =
                                    part_pose.transform_vector(&(lateral * offset));
                                g.hand_pose_local = Pose::new(
                                    *g.hand_pose_local.rotation(),
                                    g.hand_pose_local.translation() + shift,
                                );
                                grasps.push(g);
                            }
                        }
                    }
                }
            }
            PrimitiveShape::Cylinder { radius, .. } => {
                let width = 2.0 * radius;
                if width < sampler.gripper_min || width > sampler.gripper_max {
                    continue;
                }
                for step in 0..sampler.yaw_steps {
                    let angle = (360.0 * step as f64 / sampler.yaw_steps as f64).to_radians();
                    let closing = Unit::new_normalize(Vector3::new(
                        angle.cos(),
                        angle.sin(),
                        0.0,
                    ));
                    grasps.push(make_grasp(part_pose, &closing, 0.0, width));
                    grasps.push(make_grasp(part_pose, &closing, 180.0, width));
                }
            }
        }
    }
    grasps
}

/// Grasp stations along a box axis: the center, plus two hand-width-spaced
/// outboard stations when the box is long enough to host two grippers.
fn grasp_stations(
    half: &Vector3<f64>,
    closing: &Unit<Vector3<f64>>,
) -> Vec<(Vector3<f64>, f64)> {
    let candidates = [
        (Vector3::x(), half.x),
        (Vector3::y(), half.y),
        (Vector3::z(), half.z),
    ];
    let lateral = candidates
        .iter()
        .filter(|(axis, _)| axis.dot(closing).abs() < 0.5)
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .copied();
    match lateral {
        Some((axis, h)) if h >= 50.0 => {
            let off = h - 30.0;
            vec![(axis, -off), (axis, 0.0), (axis, off)]
        }
        Some((axis, _)) => vec![(axis, 0.0)],
        None => vec![(Vector3::x(), 0.0)],
    }
}

/// Build the hand frame: x along the closing axis, z (approach) chosen
/// perpendicular, then yawed about the closing axis.
fn make_grasp(
    part_pose: &Pose,
    closing: &Unit<Vector3<f64>>,
    yaw_deg: f64,
    width: f64,
) -> GraspCandidate {
    let x = *closing;
    let helper = if x.as_ref().dot(&Vector3::z()).abs() < 0.9 {
        Vector3::z()
    } else {
        Vector3::y()
    };
    let z0 = Unit::new_normalize(helper.cross(&x));
    let spin = Rotation3::from_axis_angle(&x, yaw_deg.to_radians());
    let z = spin * z0.into_inner();
    let y = z.cross(&x);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x.into_inner(), y, z]));
    let hand_in_part = Pose::new(rot, Vector3::zeros());
    let hand_pose_local = part_pose.compose(&hand_in_part);
    GraspCandidate {
        approach_local: Unit::new_normalize(hand_pose_local.transform_vector(&Vector3::z())),
        hand_pose_local,
        width_mm: width,
    }
}

/// End-effector target in the robot frame for a grasp of an object at
/// `object_pose`: the local hand pose carried by the object transform.
pub fn grasp_world_pose(grasp: &GraspCandidate, object_pose: &Pose) -> Pose {
    object_pose.compose(&grasp.hand_pose_local)
}

/// Positions of the two gripper pads for a grasp at an object pose.
pub fn gripper_pads(grasp: &GraspCandidate, object_pose: &Pose) -> (Vector3<f64>, Vector3<f64>) {
    let world = grasp_world_pose(grasp, object_pose);
    let closing = world.transform_vector(&Vector3::x());
    let center = world.translation();
    (
        center + closing * (grasp.width_mm / 2.0),
        center - closing * (grasp.width_mm / 2.0),
    )
}

/// Grasp candidates keyed by object name. Immutable after load.
#[derive(Clone, Debug, Default)]
pub struct GraspDatabase {
    entries: BTreeMap<String, Vec<GraspCandidate>>,
}

impl GraspDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, object: &str, grasps: Vec<GraspCandidate>) {
        self.entries.insert(object.to_string(), grasps);
    }

    pub fn grasps(&self, object: &str) -> Result<&[GraspCandidate], GraspDbError> {
        self.entries
            .get(object)
            .map(|v| v.as_slice())
            .ok_or_else(|| GraspDbError::UnknownObject(object.to_string()))
    }

    pub fn objects(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    /// CSV schema: object, r00..r22 (rotation row-major), tx, ty, tz (mm),
    /// width (mm), ax, ay, az (approach direction).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), GraspDbError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "object", "r00", "r01", "r02", "r10", "r11", "r12", "r20", "r21", "r22", "tx",
            "ty", "tz", "width", "ax", "ay", "az",
        ])?;
        for (name, grasps) in &self.entries {
            for g in grasps {
                let m = g.hand_pose_local.rotation_matrix();
                let t = g.hand_pose_local.translation();
                let a = g.approach_local.as_ref();
                let mut record = vec![name.clone()];
                for row in 0..3 {
                    for col in 0..3 {
                        record.push(format!("{}", m[(row, col)]));
                    }
                }
                for v in [t.x, t.y, t.z, g.width_mm, a.x, a.y, a.z] {
                    record.push(format!("{v}"));
                }
                w.write_record(&record)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, GraspDbError> {
        let mut db = GraspDatabase::new();
        let mut r = csv::Reader::from_reader(reader);
        for record in r.records() {
            let record = record?;
            let name = record[0].to_string();
            let f = |i: usize| record[i].parse::<f64>().unwrap_or(f64::NAN);
            let m = Matrix3::new(f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8), f(9));
            let grasp = GraspCandidate {
                hand_pose_local: Pose::new(
                    crate::se3::rotation_from_matrix(&m),
                    Vector3::new(f(10), f(11), f(12)),
                ),
                width_mm: f(13),
                approach_local: Unit::new_normalize(Vector3::new(f(14), f(15), f(16))),
            };
            db.entries.entry(name).or_default().push(grasp);
        }
        Ok(db)
    }

    pub fn save(&self, path: &Path) -> Result<(), GraspDbError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(file)
    }

    pub fn load(path: &Path) -> Result<Self, GraspDbError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn box_grasps_close_on_parallel_faces() {
        let object = ShapeModel::single_box("cube", Vector3::new(20.0, 20.0, 20.0));
        let sampler = GraspSampler {
            gripper_min: 0.1,
            gripper_max: 80.0,
            yaw_steps: 4,
        };
        let grasps = generate_grasps(&object, &sampler);
        assert_eq!(grasps.len(), 24); // 3 face pairs x 2 hand mirrors x 4 yaws
        for g in &grasps {
            assert_relative_eq!(g.width_mm, 40.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn oversized_cylinder_yields_nothing() {
        let object = ShapeModel {
            name: "drum".into(),
            parts: vec![(
                Pose::identity(),
                PrimitiveShape::Cylinder {
                    radius: 100.0,
                    half_length: 100.0,
                },
            )],
        };
        assert!(generate_grasps(&object, &GraspSampler::default()).is_empty());
    }

    #[test]
    fn default_slider_body_has_at_least_eight_grasps() {
        let slider = ShapeModel::single_box("slider", Vector3::new(30.0, 20.0, 15.0));
        let grasps = generate_grasps(&slider, &GraspSampler::default());
        assert!(grasps.len() >= 8, "got {}", grasps.len());
        // Enumerated candidates must be pairwise distinct.
        for (i, a) in grasps.iter().enumerate() {
            for b in grasps.iter().skip(i + 1) {
                let same_rot = a.hand_pose_local.rotation_angle_to(&b.hand_pose_local) < 1e-6;
                let same_t = a
                    .hand_pose_local
                    .translation_distance_to(&b.hand_pose_local)
                    < 1e-6;
                assert!(!(same_rot && same_t && (a.width_mm - b.width_mm).abs() < 1e-9));
            }
        }
    }

    #[test]
    fn pads_touch_the_object_at_identity_pose() {
        let slider = ShapeModel::single_box("slider", Vector3::new(30.0, 20.0, 15.0));
        let grasps = generate_grasps(&slider, &GraspSampler::default());
        for g in &grasps {
            let (p1, p2) = gripper_pads(g, &Pose::identity());
            for p in [p1, p2] {
                // Gap between a pad and the box surface along the closing axis.
                let h = Vector3::new(30.0, 20.0, 15.0);
                let gap = (p.x.abs() - h.x).max(p.y.abs() - h.y).max(p.z.abs() - h.z);
                assert!(gap.abs() <= 1.0, "pad {p:?} gap {gap}");
            }
        }
    }

    #[test]
    fn world_pose_at_identity_is_local_pose() {
        let g = GraspCandidate {
            hand_pose_local: Pose::from_rpy_deg(Vector3::new(5.0, -3.0, 8.0), [10.0, 20.0, 30.0]),
            width_mm: 40.0,
            approach_local: Vector3::z_axis(),
        };
        let world = grasp_world_pose(&g, &Pose::identity());
        assert_relative_eq!(
            world.rotation_matrix(),
            g.hand_pose_local.rotation_matrix(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn translated_object_translates_grasp() {
        let g = GraspCandidate {
            hand_pose_local: Pose::from_rpy_deg(Vector3::new(5.0, -3.0, 8.0), [0.0, 0.0, 45.0]),
            width_mm: 40.0,
            approach_local: Vector3::z_axis(),
        };
        let shifted = Pose::from_translation(Vector3::new(100.0, 0.0, 0.0));
        let world = grasp_world_pose(&g, &shifted);
        assert_relative_eq!(
            world.translation(),
            g.hand_pose_local.translation() + Vector3::new(100.0, 0.0, 0.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn rotated_object_moves_grasp_marker_consistently() {
        let g = GraspCandidate {
            hand_pose_local: Pose::from_translation(Vector3::new(50.0, 0.0, 0.0)),
            width_mm: 40.0,
            approach_local: Vector3::z_axis(),
        };
        let object_pose = Pose::rotation_z_deg(90.0);
        // A marker point expressed through the grasp frame, transformed two
        // ways, must agree.
        let marker_local = Vector3::new(1.0, 2.0, 3.0);
        let via_world = grasp_world_pose(&g, &object_pose).transform_point(&marker_local);
        let via_object =
            object_pose.transform_point(&g.hand_pose_local.transform_point(&marker_local));
        assert_relative_eq!(via_world, via_object, epsilon = 1e-12);
    }

    #[test]
    fn csv_roundtrip_preserves_grasps() {
        let slider = ShapeModel::single_box("slider", Vector3::new(30.0, 20.0, 15.0));
        let mut db = GraspDatabase::new();
        db.insert("slider", generate_grasps(&slider, &GraspSampler::default()));
        let mut buf = Vec::new();
        db.write_csv(&mut buf).unwrap();
        let restored = GraspDatabase::read_csv(buf.as_slice()).unwrap();
        let a = db.grasps("slider").unwrap();
        let b = restored.grasps("slider").unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            let rot_diff = (x.hand_pose_local.rotation_matrix()
                - y.hand_pose_local.rotation_matrix())
            .abs()
            .max();
            assert!(rot_diff < 1e-9);
            assert!(x.hand_pose_local.translation_distance_to(&y.hand_pose_local) < 1e-9);
            assert!((x.width_mm - y.width_mm).abs() < 1e-12);
        }
    }

    proptest! {
        /// Equivariance: grasping a displaced object equals displacing the
        /// world grasp pose.
        #[test]
        fn grasp_world_pose_is_equivariant(
            tx in -200.0..200.0f64, ty in -200.0..200.0f64, tz in -200.0..200.0f64,
            roll in -180.0..180.0f64, pitch in -90.0..90.0f64, yaw in -180.0..180.0f64,
        ) {
            let g = GraspCandidate {
                hand_pose_local: Pose::from_rpy_deg(
                    Vector3::new(12.0, -7.0, 30.0),
                    [15.0, -40.0, 75.0],
                ),
                width_mm: 40.0,
                approach_local: Vector3::z_axis(),
            };
            let object = Pose::from_rpy_deg(Vector3::new(400.0, 50.0, 1000.0), [5.0, 10.0, -20.0]);
            let d = Pose::from_rpy_deg(Vector3::new(tx, ty, tz), [roll, pitch, yaw]);

            let lhs = grasp_world_pose(&g, &d.compose(&object));
            let rhs = d.compose(&grasp_world_pose(&g, &object));
            let rot_diff = (lhs.rotation_matrix() - rhs.rotation_matrix()).abs().max();
            prop_assert!(rot_diff < 1e-9, "rotation entries differ by {rot_diff}");
            prop_assert!(lhs.translation_distance_to(&rhs) < 1e-9);
        }
    }
}
