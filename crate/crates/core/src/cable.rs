//! Straight-line cable geometry and the angle-accumulation metric.
//!
//! The cable is approximated by one straight segment (tool tail to anchor)
//! or two (tool tail to slider to anchor) when a slider is held. Bending is
//! measured at the tool tail in the tool's local x-y plane, against the
//! reference tail direction -x: the direction the cable leaves the tool when
//! unbent.
//!
//! Accumulation tracks how far the cable has rotated past a permissible
//! bend. Beyond the grasp angle beta on the counter-clockwise side, the
//! cable starts snarling around the grasping end-effector; beyond 90 degrees
//! on the clockwise side, around the tool. A quadrant-dependent sign keeps
//! each sum growing when the cable wraps past the half-turn mark, and
//! engagement flags give the metric hysteresis: once a sum drains back to
//! zero it stays there until the threshold is crossed again.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::se3::{Pose, Segment};

/// Projection is declared degenerate when the cable direction is within one
/// degree of the bending-plane normal.
const PROJECTION_DEGENERATE_SIN: f64 = 0.017452406437283512; // sin(1 deg)

/// Snapshot of the cable polyline and the tool frame it is measured in.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CableState {
    /// Connection point between cable and tool, robot frame (mm).
    pub tool_tail: Vector3<f64>,
    /// Far cable end: balancer hook or table-corner fixture (mm).
    pub anchor: Vector3<f64>,
    /// Slider position when the slider is held, else `None`.
    pub slider: Option<Vector3<f64>>,
    /// Tool frame in the robot frame; bending is measured in its x-y plane.
    #[serde(with = "crate::se3::pose_serde")]
    pub tool_frame: Pose,
}

impl CableState {
    /// First cable waypoint seen from the tool: slider if held, else anchor.
    pub fn first_waypoint(&self) -> Vector3<f64> {
        self.slider.unwrap_or(self.anchor)
    }
}

/// Cable polyline as straight segments, in order from the tool tail.
pub fn cable_segments(state: &CableState) -> Vec<Segment> {
    match state.slider {
        Some(slider) => vec![
            Segment::new(state.tool_tail, slider),
            Segment::new(slider, state.anchor),
        ],
        None => vec![Segment::new(state.tool_tail, state.anchor)],
    }
}

/// Bending measurement in the tool's x-y plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BendingAngle {
    Measured {
        /// Unsigned planar angle from the reference tail direction, 0..=180.
        angle_deg: f64,
        /// Quadrant of the projected cable direction, counter-clockwise from
        /// the reference direction.
        quadrant: u8,
    },
    /// Cable direction within 1 degree of the plane normal; the planar angle
    /// carries no information. Callers keep the previous quadrant.
    Indeterminate,
}

/// Planar bending angle and quadrant of the cable at the tool tail.
///
/// The cable direction (tail toward the first waypoint) is expressed in the
/// tool frame and projected onto the tool x-y plane. The angle is measured
/// from the reference direction -x; quadrant 1 starts at the reference and
/// quadrants advance counter-clockwise (about +z).
pub fn bending_angle(state: &CableState) -> BendingAngle {
    let dir_world = state.first_waypoint() - state.tool_tail;
    let norm = dir_world.norm();
    if norm < 1e-9 {
        return BendingAngle::Indeterminate;
    }
    let dir_tool = state.tool_frame.rotation().inverse() * (dir_world / norm);
    let planar = Vector3::new(dir_tool.x, dir_tool.y, 0.0);
    if planar.norm() < PROJECTION_DEGENERATE_SIN {
        return BendingAngle::Indeterminate;
    }
    // Signed angle from the reference direction (-x), counter-clockwise
    // positive about +z.
    let phi = (-dir_tool.y).atan2(-dir_tool.x).to_degrees();
    BendingAngle::Measured {
        angle_deg: phi.abs(),
        quadrant: quadrant_of(phi),
    }
}

/// Quadrant from the signed planar angle, counter-clockwise from the
/// reference: 1 for [0, 90), 2 for [90, 180], 4 for (-90, 0), 3 otherwise.
fn quadrant_of(phi: f64) -> u8 {
    if phi >= 0.0 {
        if phi < 90.0 {
            1
        } else {
            2
        }
    } else if phi > -90.0 {
        4
    } else {
        3
    }
}

fn signed_angle(angle_deg: f64, quadrant: u8) -> f64 {
    match quadrant {
        1 | 2 => angle_deg,
        _ => -angle_deg,
    }
}

/// Shortest signed rotation taking `from` to `to`, in (-180, 180].
fn wrap_delta(from: f64, to: f64) -> f64 {
    let mut d = (to - from) % 360.0;
    if d <= -180.0 {
        d += 360.0;
    } else if d > 180.0 {
        d -= 360.0;
    }
    d
}

/// Running angle-accumulation state for one planned trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AccumulationTracker {
    /// Grasp angle beta: the permissible bend before end-effector contact.
    pub beta_deg: f64,
    /// Accumulation around the end-effector (degrees, never negative).
    pub acc_ee: f64,
    /// Accumulation around the tool (degrees, never negative).
    pub acc_tool: f64,
    /// Previous bending angle.
    pub prev_angle: f64,
    /// Previous quadrant, 1..=4.
    pub prev_quadrant: u8,
    pub engaged_ee: bool,
    pub engaged_tool: bool,
}

const TOOL_THRESHOLD_DEG: f64 = 90.0;

impl AccumulationTracker {
    /// Fresh tracker at the reference state (cable unbent).
    pub fn new(beta_deg: f64) -> Self {
        Self {
            beta_deg,
            acc_ee: 0.0,
            acc_tool: 0.0,
            prev_angle: 0.0,
            prev_quadrant: 1,
            engaged_ee: false,
            engaged_tool: false,
        }
    }

    /// Advance the recursion by one cable state.
    ///
    /// Consecutive calls must be temporally adjacent (in-plane change below
    /// 45 degrees), which the planners guarantee through interpolation
    /// density. A step that straddles the quadrant-sign boundary is split
    /// there, so the signed differential sum is exact.
    pub fn update(&mut self, state: &CableState) {
        let (angle, quadrant) = match bending_angle(state) {
            BendingAngle::Measured {
                angle_deg,
                quadrant,
            } => (angle_deg, quadrant),
            BendingAngle::Indeterminate => {
                // Quadrant held from the previous step; no accumulation
                // update is meaningful without a planar direction.
                return;
            }
        };

        let phi_prev = signed_angle(self.prev_angle, self.prev_quadrant);
        let phi_now = signed_angle(angle, quadrant);
        let delta = wrap_delta(phi_prev, phi_now);

        // --- end-effector accumulation: threshold beta, counter-clockwise ---
        if self.engaged_ee {
            self.acc_ee += delta;
            if self.acc_ee <= 0.0 {
                self.acc_ee = 0.0;
                self.engaged_ee = false;
            }
        } else if delta > 0.0 {
            // Engagement: the swept arc crosses the grasp angle upward on
            // the counter-clockwise side (entering quadrants 1/2).
            for level in [self.beta_deg - 360.0, self.beta_deg, self.beta_deg + 360.0] {
                if phi_prev < level && level <= phi_prev + delta {
                    self.engaged_ee = true;
                    self.acc_ee = phi_prev + delta - level;
                    break;
                }
            }
        }

        // --- tool accumulation: threshold 90, clockwise (quadrants 4/3) ---
        if self.engaged_tool {
            self.acc_tool -= delta;
            if self.acc_tool <= 0.0 {
                self.acc_tool = 0.0;
                self.engaged_tool = false;
            }
        } else if delta < 0.0 {
            for level in [
                -TOOL_THRESHOLD_DEG + 360.0,
                -TOOL_THRESHOLD_DEG,
                -TOOL_THRESHOLD_DEG - 360.0,
            ] {
                if phi_prev > level && level >= phi_prev + delta {
                    self.engaged_tool = true;
                    self.acc_tool = level - (phi_prev + delta);
                    break;
                }
            }
        }

        self.prev_angle = angle;
        self.prev_quadrant = quadrant;
    }
}
