//! Scene configuration: robot description, tool and slider, anchors,
//! benchmark fixtures, and planner parameters.
//!
//! A scene is loaded from a single TOML file (see `scenes/default.toml`,
//! embedded as the default) and resolved into runtime types. Every protocol
//! constant lives here as a named, overridable field.

use nalgebra::{Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cable::CableState;
use crate::collision::{ObstacleBox, SceneObstacles};
use crate::grasp::{generate_grasps, GraspDatabase, GraspSampler, ShapeModel};
use crate::kinematics::{
    ArmModel, ArmSide, DualArmRobot, GripperSpec, IkTolerance, JointVector, LinkCapsule,
    RevoluteJoint,
};
use crate::se3::{Pose, Segment};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scene: {0}")]
    Invalid(String),
}

/// The embedded default scene.
pub const DEFAULT_SCENE_TOML: &str = include_str!("../scenes/default.toml");

// ---------------------------------------------------------------------------
// serde schema
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoseConfig {
    pub pos: [f64; 3],
    pub rpy_deg: [f64; 3],
}

impl PoseConfig {
    pub fn to_pose(&self) -> Pose {
        Pose::from_rpy_deg(Vector3::from(self.pos), self.rpy_deg)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RobotConfig {
    pub mount_right: [f64; 3],
    pub mount_left: [f64; 3],
    /// Outward yaw of each arm's mount (degrees): the right arm's base
    /// turns toward -y, the left toward +y.
    pub mount_yaw_deg: f64,
    /// Six link lengths from mount to end-effector (mm).
    pub link_lengths: [f64; 6],
    pub joint_limits_deg: [[f64; 2]; 6],
    pub capsule_radii: [f64; 6],
    pub home_right: [f64; 6],
    pub home_left: [f64; 6],
    pub gripper_min_mm: f64,
    pub gripper_max_mm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnchorConfig {
    /// "balancer" or "table-corner"; exactly one mode is active.
    pub mode: String,
    pub balancer: [f64; 3],
    pub table_corner: [f64; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ToolConfig {
    pub body_half_extents: [f64; 3],
    /// Cable connection point in the tool frame (mm).
    pub tail_local: [f64; 3],
    /// Grasp angle: permissible cable bend before end-effector contact.
    pub beta_deg: f64,
    pub start: PoseConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SliderConfig {
    pub half_extents: [f64; 3],
    /// Height of the slider's rest position on the hanging cable (mm).
    pub rest_height_mm: f64,
    pub orientation_rpy_deg: [f64; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableConfig {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Angle-accumulation threshold for CMMS planning (degrees).
    pub acc_deg: f64,
    pub margin_mm: f64,
    /// Slider projection distance behind the tool (mm).
    pub alpha_s_mm: f64,
    pub min_slider_height_mm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorkspaceConfig {
    pub bounds_min: [f64; 3],
    pub bounds_max: [f64; 3],
    pub spacing_mm: f64,
    pub sphere_reference: [f64; 3],
    pub sphere_m_fraction: f64,
    pub sphere_g_fraction: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IkConfig {
    pub restarts: usize,
    pub tol_pos_mm: f64,
    pub tol_rot_deg: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RrtConfig {
    pub step_deg: f64,
    pub goal_bias: f64,
    pub max_iters: usize,
    pub shortcut_iters: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObstacleTrialConfig {
    pub start: PoseConfig,
    pub goals: Vec<PoseConfig>,
    pub box_half_min_mm: f64,
    pub box_half_max_mm: f64,
    /// Region of the table the random box center is drawn from (x, y).
    pub region_min: [f64; 2],
    pub region_max: [f64; 2],
    /// Start/goal footprint radius the box must stay out of (mm).
    pub footprint_mm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneConfig {
    pub seed: u64,
    pub robot: RobotConfig,
    pub anchor: AnchorConfig,
    pub tool: ToolConfig,
    pub slider: SliderConfig,
    pub table: TableConfig,
    pub thresholds: ThresholdConfig,
    pub goals: Vec<PoseConfig>,
    pub exchange: PoseConfig,
    pub workspace: WorkspaceConfig,
    pub ik: IkConfig,
    pub rrt: RrtConfig,
    pub obstacle_trials: ObstacleTrialConfig,
}

impl SceneConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SceneError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, SceneError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

// ---------------------------------------------------------------------------
// runtime scene
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnchorMode {
    Balancer,
    TableCorner,
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub config: SceneConfig,
    pub robot: DualArmRobot,
    pub tool_shape: ShapeModel,
    pub slider_shape: ShapeModel,
    pub anchor_mode: AnchorMode,
    pub obstacles: SceneObstacles,
    pub grasp_db: GraspDatabase,
    pub goals: Vec<Pose>,
    pub start: Pose,
    pub exchange: Pose,
    pub slider_orientation: Rotation3<f64>,
    pub ik_tol: IkTolerance,
}

/// The arm that manipulates the tool; the opposite arm maneuvers the cable.
pub const TOOL_ARM: ArmSide = ArmSide::Right;
/// The arm that holds the cable slider.
pub const CABLE_ARM: ArmSide = ArmSide::Left;

pub const TOOL_OBJECT: &str = "tool";
pub const SLIDER_OBJECT: &str = "slider";

impl Scene {
    /// The embedded default scene.
    pub fn default_scene() -> Scene {
        Self::from_config(
            SceneConfig::from_toml_str(DEFAULT_SCENE_TOML)
                .expect("embedded default scene must parse"),
        )
        .expect("embedded default scene must validate")
    }

    pub fn from_toml_str(text: &str) -> Result<Scene, SceneError> {
        Self::from_config(SceneConfig::from_toml_str(text)?)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Scene, SceneError> {
        Self::from_config(SceneConfig::from_path(path)?)
    }

    pub fn from_config(config: SceneConfig) -> Result<Scene, SceneError> {
        let anchor_mode = match config.anchor.mode.as_str() {
            "balancer" => AnchorMode::Balancer,
            "table-corner" => AnchorMode::TableCorner,
            other => {
                return Err(SceneError::Invalid(format!(
                    "anchor.mode must be 'balancer' or 'table-corner', got '{other}'"
                )))
            }
        };
        for (i, [lo, hi]) in config.robot.joint_limits_deg.iter().enumerate() {
            if lo >= hi {
                return Err(SceneError::Invalid(format!(
                    "joint {i}: min limit {lo} must be below max {hi}"
                )));
            }
        }
        if config.goals.len() != 7 {
            return Err(SceneError::Invalid(format!(
                "exactly 7 benchmark goal poses required, got {}",
                config.goals.len()
            )));
        }
        if config.thresholds.alpha_s_mm <= 0.0 {
            return Err(SceneError::Invalid("alpha_s must be positive".into()));
        }

        let robot = build_robot(&config.robot);
        let tool_shape =
            ShapeModel::single_box(TOOL_OBJECT, Vector3::from(config.tool.body_half_extents));
        let slider_shape =
            ShapeModel::single_box(SLIDER_OBJECT, Vector3::from(config.slider.half_extents));

        let sampler = GraspSampler {
            gripper_min: config.robot.gripper_min_mm,
            gripper_max: config.robot.gripper_max_mm,
            yaw_steps: 4,
        };
        let mut grasp_db = GraspDatabase::new();
        grasp_db.insert(TOOL_OBJECT, generate_grasps(&tool_shape, &sampler));
        grasp_db.insert(SLIDER_OBJECT, generate_grasps(&slider_shape, &sampler));
        for name in [TOOL_OBJECT, SLIDER_OBJECT] {
            if grasp_db.grasps(name).map(|g| g.is_empty()).unwrap_or(true) {
                return Err(SceneError::Invalid(format!(
                    "object '{name}' has no grasp within the gripper range"
                )));
            }
        }

        let obstacles = SceneObstacles {
            boxes: Vec::new(),
            table: ObstacleBox::axis_aligned(
                Vector3::from(config.table.center),
                Vector3::from(config.table.half_extents),
            ),
            margin_mm: config.thresholds.margin_mm,
        };

        let scene = Scene {
            robot,
            tool_shape,
            slider_shape,
            anchor_mode,
            obstacles,
            grasp_db,
            goals: config.goals.iter().map(PoseConfig::to_pose).collect(),
            start: config.tool.start.to_pose(),
            exchange: config.exchange.to_pose(),
            slider_orientation: *Pose::from_rpy_deg(
                Vector3::zeros(),
                config.slider.orientation_rpy_deg,
            )
            .rotation(),
            ik_tol: IkTolerance {
                position_mm: config.ik.tol_pos_mm,
                rotation_deg: config.ik.tol_rot_deg,
            },
            config,
        };
        Ok(scene)
    }

    /// Replace the generated grasp database, e.g. with one loaded from disk.
    /// Fails when a required object is missing from the new database.
    pub fn with_grasp_db(mut self, db: GraspDatabase) -> Result<Scene, SceneError> {
        for name in [TOOL_OBJECT, SLIDER_OBJECT] {
            if db.grasps(name).is_err() {
                return Err(SceneError::Invalid(format!(
                    "grasp database has no entry for '{name}'"
                )));
            }
        }
        self.grasp_db = db;
        Ok(self)
    }

    /// Switch anchor mode (obstacle trials require the table corner).
    pub fn with_anchor_mode(mut self, mode: AnchorMode) -> Scene {
        self.anchor_mode = mode;
        self
    }

    pub fn anchor_point(&self) -> Vector3<f64> {
        match self.anchor_mode {
            AnchorMode::Balancer => Vector3::from(self.config.anchor.balancer),
            AnchorMode::TableCorner => Vector3::from(self.config.anchor.table_corner),
        }
    }

    /// Reference cable direction in the tool frame (the direction the cable
    /// leaves the tail when unbent).
    pub fn tail_dir_local(&self) -> Unit<Vector3<f64>> {
        Unit::new_normalize(Vector3::new(-1.0, 0.0, 0.0))
    }

    pub fn tool_tail_world(&self, tool_pose: &Pose) -> Vector3<f64> {
        tool_pose.transform_point(&Vector3::from(self.config.tool.tail_local))
    }

    /// Cable state for a tool pose and an optionally held slider.
    pub fn cable_state(&self, tool_pose: &Pose, slider: Option<Vector3<f64>>) -> CableState {
        CableState {
            tool_tail: self.tool_tail_world(tool_pose),
            anchor: self.anchor_point(),
            slider,
            tool_frame: *tool_pose,
        }
    }

    /// Slider rest pose: on the straight cable between the hanging tool's
    /// tail and the anchor, at the configured rest height.
    pub fn slider_rest_pose(&self) -> Pose {
        let tail = self.tool_tail_world(&self.start);
        let anchor = self.anchor_point();
        let seg = Segment::new(tail, anchor);
        let dz = anchor.z - tail.z;
        let t = if dz.abs() < 1e-9 {
            0.5
        } else {
            ((self.config.slider.rest_height_mm - tail.z) / dz).clamp(0.05, 0.95)
        };
        Pose::new(self.slider_orientation, seg.point_at(t))
    }

    pub fn acc_threshold_deg(&self) -> f64 {
        self.config.thresholds.acc_deg
    }

    pub fn beta_deg(&self) -> f64 {
        self.config.tool.beta_deg
    }

    pub fn alpha_s_mm(&self) -> f64 {
        self.config.thresholds.alpha_s_mm
    }

    pub fn min_slider_height_mm(&self) -> f64 {
        self.config.thresholds.min_slider_height_mm
    }
}

fn build_robot(cfg: &RobotConfig) -> DualArmRobot {
    let axes: [Unit<Vector3<f64>>; 6] = [
        Vector3::z_axis(),
        Vector3::y_axis(),
        Vector3::y_axis(),
        Vector3::x_axis(),
        Vector3::y_axis(),
        Vector3::x_axis(),
    ];
    let build_arm = |mount: [f64; 3], yaw_deg: f64| -> ArmModel {
        let mut joints = Vec::with_capacity(6);
        for (i, axis) in axes.iter().enumerate() {
            // Link i-1 ends at joint i; the first joint sits on the mount.
            let offset = if i == 0 {
                Vector3::zeros()
            } else {
                Vector3::new(cfg.link_lengths[i - 1], 0.0, 0.0)
            };
            joints.push(RevoluteJoint {
                offset,
                axis: *axis,
                min_deg: cfg.joint_limits_deg[i][0],
                max_deg: cfg.joint_limits_deg[i][1],
            });
        }
        let ee_offset = Vector3::new(cfg.link_lengths[5], 0.0, 0.0);
        let link_capsules = (0..6)
            .map(|i| {
                let span = if i < 5 { joints[i + 1].offset } else { ee_offset };
                LinkCapsule {
                    axis: Segment::new(Vector3::zeros(), span),
                    radius: cfg.capsule_radii[i],
                }
            })
            .collect();
        ArmModel {
            base: Pose::from_rpy_deg(Vector3::from(mount), [0.0, 0.0, yaw_deg]),
            joints,
            ee_offset,
            link_capsules,
        }
    };
    DualArmRobot {
        right: build_arm(cfg.mount_right, -cfg.mount_yaw_deg),
        left: build_arm(cfg.mount_left, cfg.mount_yaw_deg),
        gripper: GripperSpec {
            min_width: cfg.gripper_min_mm,
            max_width: cfg.gripper_max_mm,
        },
        home_right: JointVector::new(cfg.home_right.to_vec()),
        home_left: JointVector::new(cfg.home_left.to_vec()),
    }
}
