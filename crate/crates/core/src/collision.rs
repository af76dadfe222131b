//! Scene-level collision and clearance queries.
//!
//! Robot links are capsules, obstacles are oriented boxes, the cable is one
//! or two straight segments. A query fails when any checked pair's signed
//! clearance does not exceed the scene margin; the first offending pair is
//! reported by name.

use nalgebra::Vector3;

use crate::cable::{cable_segments, CableState};
use crate::grasp::ShapeModel;
use crate::kinematics::{
    forward_kinematics, link_capsules_world, ArmSide, DualArmRobot, JointVector,
};
use crate::se3::{
    capsule_capsule_clearance, segment_capsule_clearance, Capsule, Pose, Segment,
};

/// Oriented box: pose of the box frame plus half-extents (mm).
#[derive(Clone, Debug)]
pub struct ObstacleBox {
    pub pose: Pose,
    pub half_extents: Vector3<f64>,
}

impl ObstacleBox {
    pub fn axis_aligned(center: Vector3<f64>, half_extents: Vector3<f64>) -> Self {
        Self {
            pose: Pose::from_translation(center),
            half_extents,
        }
    }
}

/// Static obstacle set for a scene.
#[derive(Clone, Debug)]
pub struct SceneObstacles {
    pub boxes: Vec<ObstacleBox>,
    pub table: ObstacleBox,
    /// Required clearance margin (mm).
    pub margin_mm: f64,
}

/// Signed distance from a point to a box given in the box's local frame.
/// Negative inside; exact for faces, edges, and corners.
fn point_box_signed_distance(p: &Vector3<f64>, half: &Vector3<f64>) -> f64 {
    let d = Vector3::new(p.x.abs() - half.x, p.y.abs() - half.y, p.z.abs() - half.z);
    let outside = Vector3::new(d.x.max(0.0), d.y.max(0.0), d.z.max(0.0)).norm();
    let inside = d.x.max(d.y).max(d.z).min(0.0);
    outside + inside
}

/// Signed clearance between a segment and an oriented box. Negative means
/// the segment enters the box; the magnitude is the deepest penetration.
///
/// The signed point-box distance is convex along the segment, so a ternary
/// search over the parameter finds the global minimum.
pub fn segment_box_clearance(seg: &Segment, obb: &ObstacleBox) -> f64 {
    let inv = obb.pose.inverse();
    let a = inv.transform_point(&seg.a);
    let b = inv.transform_point(&seg.b);
    let eval = |t: f64| point_box_signed_distance(&(a + (b - a) * t), &obb.half_extents);

    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if eval(m1) <= eval(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    eval(0.5 * (lo + hi)).min(eval(0.0)).min(eval(1.0))
}

/// Signed clearance between a capsule and an oriented box.
pub fn capsule_box_clearance(c: &Capsule, obb: &ObstacleBox) -> f64 {
    segment_box_clearance(&c.axis, obb) - c.radius
}

/// First offending pair of a collision query.
#[derive(Clone, Debug)]
pub struct Violation {
    pub first: String,
    pub second: String,
    pub clearance_mm: f64,
}

/// Which arm holds an object, and where the object is.
#[derive(Clone, Debug)]
pub struct HeldObject<'a> {
    pub shape: &'a ShapeModel,
    pub pose: Pose,
    pub held_by: ArmSide,
    /// An extra arm whose end-effector link is allowed to touch the object
    /// (a second gripper closing on it during a handover exchange).
    pub also_exempt_ee: Option<ArmSide>,
}

impl<'a> HeldObject<'a> {
    pub fn new(shape: &'a ShapeModel, pose: Pose, held_by: ArmSide) -> Self {
        Self {
            shape,
            pose,
            held_by,
            also_exempt_ee: None,
        }
    }
}

/// A full dual-arm configuration to collision-check.
#[derive(Clone, Debug)]
pub struct RobotPosture<'a> {
    pub robot: &'a DualArmRobot,
    pub q_right: &'a JointVector,
    pub q_left: &'a JointVector,
    pub held: Vec<HeldObject<'a>>,
}

struct NamedCapsule {
    side: ArmSide,
    link: usize,
    capsule: Capsule,
}

fn arm_capsules(posture: &RobotPosture<'_>) -> Option<Vec<NamedCapsule>> {
    let mut out = Vec::new();
    for (side, q) in [
        (ArmSide::Right, posture.q_right),
        (ArmSide::Left, posture.q_left),
    ] {
        let arm = posture.robot.arm(side);
        let fk = forward_kinematics(arm, q).ok()?;
        for (link, capsule) in link_capsules_world(arm, &fk).into_iter().enumerate() {
            out.push(NamedCapsule {
                side,
                link,
                capsule,
            });
        }
    }
    Some(out)
}

fn side_name(side: ArmSide) -> &'static str {
    match side {
        ArmSide::Right => "right",
        ArmSide::Left => "left",
    }
}

/// True (i.e. `None`) iff every checked pair clears the margin: inter-arm
/// links, non-adjacent same-arm links, links and held objects against the
/// obstacle boxes and the table, and held objects against the opposite arm.
pub fn robot_collision_free(
    posture: &RobotPosture<'_>,
    obstacles: &SceneObstacles,
) -> Option<Violation> {
    let margin = obstacles.margin_mm;
    let Some(capsules) = arm_capsules(posture) else {
        return Some(Violation {
            first: "arm".into(),
            second: "joint vector".into(),
            clearance_mm: f64::NAN,
        });
    };

    // Link vs link: different arms always, same arm when non-adjacent.
    for (i, a) in capsules.iter().enumerate() {
        for b in capsules.iter().skip(i + 1) {
            let adjacent = a.side == b.side && b.link.abs_diff(a.link) <= 1;
            if adjacent {
                continue;
            }
            let clearance = capsule_capsule_clearance(&a.capsule, &b.capsule);
            if clearance <= margin {
                return Some(Violation {
                    first: format!("{}/link{}", side_name(a.side), a.link),
                    second: format!("{}/link{}", side_name(b.side), b.link),
                    clearance_mm: clearance,
                });
            }
        }
    }

    // Links vs environment boxes.
    let boxes: Vec<(String, &ObstacleBox)> = posture_boxes(obstacles);
    for c in &capsules {
        for (name, obb) in &boxes {
            let clearance = capsule_box_clearance(&c.capsule, obb);
            if clearance <= margin {
                return Some(Violation {
                    first: format!("{}/link{}", side_name(c.side), c.link),
                    second: name.clone(),
                    clearance_mm: clearance,
                });
            }
        }
    }

    // Held objects vs environment, opposite arm, and each other.
    for (hi, held) in posture.held.iter().enumerate() {
        let held_capsules: Vec<Capsule> = held
            .shape
            .enclosing_capsules()
            .into_iter()
            .map(|c| Capsule::new(held.pose.transform_segment(&c.axis), c.radius))
            .collect();
        for hc in &held_capsules {
            for (name, obb) in &boxes {
                let clearance = capsule_box_clearance(hc, obb);
                if clearance <= margin {
                    return Some(Violation {
                        first: format!("held/{}", held.shape.name),
                        second: name.clone(),
                        clearance_mm: clearance,
                    });
                }
            }
            for c in capsules.iter().filter(|c| c.side != held.held_by) {
                if let Some(exempt_side) = held.also_exempt_ee {
                    let ee_link = posture.robot.arm(exempt_side).link_capsules.len() - 1;
                    if c.side == exempt_side && c.link == ee_link {
                        continue;
                    }
                }
                let clearance = capsule_capsule_clearance(hc, &c.capsule);
                if clearance <= margin {
                    return Some(Violation {
                        first: format!("held/{}", held.shape.name),
                        second: format!("{}/link{}", side_name(c.side), c.link),
                        clearance_mm: clearance,
                    });
                }
            }
            for other in posture.held.iter().skip(hi + 1) {
                for oc in other.shape.enclosing_capsules() {
                    let oc = Capsule::new(other.pose.transform_segment(&oc.axis), oc.radius);
                    let clearance = capsule_capsule_clearance(hc, &oc);
                    if clearance <= margin {
                        return Some(Violation {
                            first: format!("held/{}", held.shape.name),
                            second: format!("held/{}", other.shape.name),
                            clearance_mm: clearance,
                        });
                    }
                }
            }
        }
    }

    None
}

fn posture_boxes<'a>(obstacles: &'a SceneObstacles) -> Vec<(String, &'a ObstacleBox)> {
    let mut boxes: Vec<(String, &ObstacleBox)> = obstacles
        .boxes
        .iter()
        .enumerate()
        .map(|(i, b)| (format!("obstacle{i}"), b))
        .collect();
    boxes.push(("table".to_string(), &obstacles.table));
    boxes
}

/// Cable clearance verdict: every cable segment against the link capsules
/// (minus the exempt links), the obstacle boxes, and the table.
///
/// `exempt` names links whose contact is scored by angle accumulation
/// instead: the tool arm's end-effector link always, plus the cable arm's
/// end-effector link while it holds the slider (the cable passes through
/// the slider inside that gripper).
pub fn cable_clear(
    state: &CableState,
    posture: &RobotPosture<'_>,
    obstacles: &SceneObstacles,
    exempt: &[(ArmSide, usize)],
) -> (bool, f64) {
    let segments = cable_segments(state);
    let mut min_clearance = f64::INFINITY;

    if let Some(capsules) = arm_capsules(posture) {
        for c in &capsules {
            if exempt.contains(&(c.side, c.link)) {
                continue;
            }
            for seg in &segments {
                let clearance = segment_capsule_clearance(seg, &c.capsule);
                min_clearance = min_clearance.min(clearance);
            }
        }
    }
    for (_, obb) in posture_boxes(obstacles) {
        for seg in &segments {
            let clearance = segment_box_clearance(seg, obb);
            min_clearance = min_clearance.min(clearance);
        }
    }
    (min_clearance > obstacles.margin_mm, min_clearance)
}
