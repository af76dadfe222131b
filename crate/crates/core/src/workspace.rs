//! Workspace analyses: reachability grids, the dual-arm region, vertical
//! column scoring for balancer placement, and the grasp-based manipulability
//! field with its threshold sphere.

use nalgebra::{Rotation3, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::collision::{robot_collision_free, HeldObject, RobotPosture, SceneObstacles};
use crate::derive_seed;
use crate::grasp::{grasp_world_pose, GraspCandidate, ShapeModel};
use crate::kinematics::{manipulability, solve_ik, ArmSide, DualArmRobot, IkTolerance};
use crate::se3::Pose;

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("reference point has no feasible grasps")]
    InfeasibleReference,
}

/// Per-point record of a [`ReachGrid`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GridCell {
    pub reach_right: bool,
    pub reach_left: bool,
    /// Average manipulability over feasible grasps (0 when `g == 0`).
    pub m: f64,
    /// Count of IK-feasible, collision-free grasps.
    pub g: u32,
}

/// Regular grid over a box of the workspace.
#[derive(Clone, Debug, PartialEq)]
pub struct ReachGrid {
    pub origin: Vector3<f64>,
    pub spacing_mm: f64,
    pub dims: [usize; 3],
    pub cells: Vec<GridCell>,
}

impl ReachGrid {
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.dims[0] * (iy + self.dims[1] * iz)
    }

    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let ix = idx % self.dims[0];
        let iy = (idx / self.dims[0]) % self.dims[1];
        let iz = idx / (self.dims[0] * self.dims[1]);
        (ix, iy, iz)
    }

    pub fn point(&self, idx: usize) -> Vector3<f64> {
        let (ix, iy, iz) = self.coords(idx);
        self.origin
            + Vector3::new(
                ix as f64 * self.spacing_mm,
                iy as f64 * self.spacing_mm,
                iz as f64 * self.spacing_mm,
            )
    }

    /// Dual-arm reachability: the intersection of both arm regions.
    pub fn omega(&self, idx: usize) -> bool {
        self.cells[idx].reach_right && self.cells[idx].reach_left
    }

    /// Index of the grid point nearest to `p`.
    pub fn nearest_index(&self, p: &Vector3<f64>) -> usize {
        let rel = (p - self.origin) / self.spacing_mm;
        let clamp = |v: f64, n: usize| (v.round().max(0.0) as usize).min(n - 1);
        self.index(
            clamp(rel.x, self.dims[0]),
            clamp(rel.y, self.dims[1]),
            clamp(rel.z, self.dims[2]),
        )
    }
}

/// Parameters for grid construction.
#[derive(Clone, Copy, Debug)]
pub struct ReachParams {
    pub ik_restarts: usize,
    pub ik_tol: IkTolerance,
    pub seed: u64,
}

impl Default for ReachParams {
    fn default() -> Self {
        Self {
            ik_restarts: 4,
            ik_tol: IkTolerance::default(),
            seed: 0,
        }
    }
}

/// The six canonical end-effector orientations used by the reachability
/// test: the arm's pointing axis sent to +/-x, +/-y, +/-z.
pub fn canonical_orientations() -> [Rotation3<f64>; 6] {
    let deg = |a: f64| a.to_radians();
    [
        Rotation3::identity(),
        Rotation3::from_axis_angle(&Vector3::z_axis(), deg(180.0)),
        Rotation3::from_axis_angle(&Vector3::z_axis(), deg(90.0)),
        Rotation3::from_axis_angle(&Vector3::z_axis(), deg(-90.0)),
        Rotation3::from_axis_angle(&Vector3::y_axis(), deg(-90.0)),
        Rotation3::from_axis_angle(&Vector3::y_axis(), deg(90.0)),
    ]
}

fn point_reachable(
    robot: &DualArmRobot,
    side: ArmSide,
    point: &Vector3<f64>,
    params: &ReachParams,
    salt: u64,
) -> bool {
    let arm = robot.arm(side);
    if (point - arm.mount_point()).norm() > arm.max_reach() {
        return false;
    }
    for (k, rot) in canonical_orientations().iter().enumerate() {
        let target = Pose::new(*rot, *point);
        let sols = solve_ik(
            arm,
            &target,
            params.ik_restarts,
            params.ik_tol,
            derive_seed(params.seed, salt * 16 + k as u64),
        );
        if !sols.is_empty() {
            return true;
        }
    }
    false
}

/// Build the reachability grid over `bounds` at the given spacing.
///
/// A point is arm-reachable when the IK solver reaches it in at least one
/// canonical orientation. Cells are computed in parallel; per-point RNG
/// seeds are derived from the master seed and the point index, so the
/// result is identical regardless of scheduling.
pub fn build_reach_grid(
    robot: &DualArmRobot,
    bounds_min: Vector3<f64>,
    bounds_max: Vector3<f64>,
    spacing_mm: f64,
    params: &ReachParams,
) -> ReachGrid {
    assert!(spacing_mm > 0.0, "grid spacing must be positive");
    let dims = [
        ((bounds_max.x - bounds_min.x) / spacing_mm).floor() as usize + 1,
        ((bounds_max.y - bounds_min.y) / spacing_mm).floor() as usize + 1,
        ((bounds_max.z - bounds_min.z) / spacing_mm).floor() as usize + 1,
    ];
    let mut grid = ReachGrid {
        origin: bounds_min,
        spacing_mm,
        dims,
        cells: Vec::new(),
    };
    let template = grid.clone();
    grid.cells = (0..template.len())
        .into_par_iter()
        .map(|idx| {
            let p = template.point(idx);
            GridCell {
                reach_right: point_reachable(
                    robot,
                    ArmSide::Right,
                    &p,
                    params,
                    idx as u64 * 2,
                ),
                reach_left: point_reachable(
                    robot,
                    ArmSide::Left,
                    &p,
                    params,
                    idx as u64 * 2 + 1,
                ),
                m: 0.0,
                g: 0,
            }
        })
        .collect();
    grid
}

/// Vertical-column score used for balancer placement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnScore {
    pub x: f64,
    pub y: f64,
    /// Number of dual-arm-reachable z levels above (x, y).
    pub count: usize,
}

/// Count dual-arm-reachable points along each vertical axis and rank the
/// columns: highest count first, ties broken toward larger x (farther from
/// the robot body), then smaller |y|.
pub fn score_balancer_columns(grid: &ReachGrid) -> Vec<ColumnScore> {
    let mut scores = Vec::with_capacity(grid.dims[0] * grid.dims[1]);
    for iy in 0..grid.dims[1] {
        for ix in 0..grid.dims[0] {
            let count = (0..grid.dims[2])
                .filter(|&iz| grid.omega(grid.index(ix, iy, iz)))
                .count();
            let p = grid.point(grid.index(ix, iy, 0));
            scores.push(ColumnScore {
                x: p.x,
                y: p.y,
                count,
            });
        }
    }
    scores.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(b.x.partial_cmp(&a.x).unwrap())
            .then(a.y.abs().partial_cmp(&b.y.abs()).unwrap())
    });
    scores
}

/// Inputs for the grasp-based manipulability field.
pub struct FieldContext<'a> {
    pub robot: &'a DualArmRobot,
    /// Arm that grasps the slider (the cable arm).
    pub arm: ArmSide,
    pub slider_shape: &'a ShapeModel,
    pub grasps: &'a [GraspCandidate],
    /// The slider orientation is fixed to a single value across the field.
    pub orientation: Rotation3<f64>,
    pub obstacles: &'a SceneObstacles,
}

/// Fill per-point average manipulability M and feasible-grasp count G.
///
/// The slider is placed at every grid point in the fixed orientation; each
/// database grasp contributes when some IK solution for it is within limits
/// and collision-free, scoring the best manipulability among its solutions.
/// M is the arithmetic mean over contributing grasps and 0 where G = 0.
pub fn manipulability_field(grid: &mut ReachGrid, ctx: &FieldContext<'_>, params: &ReachParams) {
    let template = grid.clone();
    let arm_model = ctx.robot.arm(ctx.arm);
    let reach_bound = arm_model.max_reach() + 150.0;
    let results: Vec<(f64, u32)> = (0..template.len())
        .into_par_iter()
        .map(|idx| {
            let p = template.point(idx);
            if (p - arm_model.mount_point()).norm() > reach_bound {
                return (0.0, 0);
            }
            let slider_pose = Pose::new(ctx.orientation, p);
            let mut sum = 0.0;
            let mut count = 0u32;
            for (gi, grasp) in ctx.grasps.iter().enumerate() {
                let target = grasp_world_pose(grasp, &slider_pose);
                let sols = solve_ik(
                    arm_model,
                    &target,
                    params.ik_restarts,
                    params.ik_tol,
                    derive_seed(params.seed, (idx as u64) << 8 | gi as u64),
                );
                let mut best: Option<f64> = None;
                for q in &sols {
                    let (q_right, q_left) = match ctx.arm {
                        ArmSide::Right => (q, &ctx.robot.home_left),
                        ArmSide::Left => (&ctx.robot.home_right, q),
                    };
                    let posture = RobotPosture {
                        robot: ctx.robot,
                        q_right,
                        q_left,
                        held: vec![HeldObject::new(ctx.slider_shape, slider_pose, ctx.arm)],
                    };
                    if robot_collision_free(&posture, ctx.obstacles).is_none() {
                        let m = manipulability(arm_model, q).unwrap_or(0.0);
                        best = Some(best.map_or(m, |b: f64| b.max(m)));
                    }
                }
                if let Some(m) = best {
                    sum += m;
                    count += 1;
                }
            }
            if count > 0 {
                (sum / count as f64, count)
            } else {
                (0.0, 0)
            }
        })
        .collect();
    for (cell, (m, g)) in grid.cells.iter_mut().zip(results) {
        cell.m = m;
        cell.g = g;
    }
}

/// Manipulability-sphere result around a reference point.
#[derive(Clone, Copy, Debug)]
pub struct SphereReport {
    pub reference: Vector3<f64>,
    pub ref_m: f64,
    pub ref_g: u32,
    /// Largest grid-quantized radius whose interior satisfies both
    /// threshold fractions.
    pub radius_mm: f64,
    pub min_m: f64,
    pub min_g: u32,
}

/// Grow a sphere around `p_ref` in grid-spacing steps while every interior
/// point keeps M >= m_frac * M_ref and G >= g_frac * G_ref. The radius is
/// capped where the sphere would leave the grid bounds.
pub fn manipulability_sphere(
    grid: &ReachGrid,
    p_ref: Vector3<f64>,
    m_frac: f64,
    g_frac: f64,
) -> Result<SphereReport, WorkspaceError> {
    let ref_idx = grid.nearest_index(&p_ref);
    let ref_cell = grid.cells[ref_idx];
    if ref_cell.g == 0 {
        return Err(WorkspaceError::InfeasibleReference);
    }
    let reference = grid.point(ref_idx);
    let m_floor = m_frac * ref_cell.m;
    let g_floor = g_frac * ref_cell.g as f64;

    // Radius cap: stay inside the grid so every interior point is known.
    let span = Vector3::new(
        (grid.dims[0] - 1) as f64,
        (grid.dims[1] - 1) as f64,
        (grid.dims[2] - 1) as f64,
    ) * grid.spacing_mm;
    let max_radius = [
        reference.x - grid.origin.x,
        grid.origin.x + span.x - reference.x,
        reference.y - grid.origin.y,
        grid.origin.y + span.y - reference.y,
        reference.z - grid.origin.z,
        grid.origin.z + span.z - reference.z,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);

    let mut radius = 0.0;
    let mut min_m = ref_cell.m;
    let mut min_g = ref_cell.g;
    'grow: loop {
        let candidate = radius + grid.spacing_mm;
        if candidate > max_radius + 1e-9 {
            break;
        }
        let mut shell_min_m = f64::INFINITY;
        let mut shell_min_g = u32::MAX;
        for idx in 0..grid.len() {
            let d = (grid.point(idx) - reference).norm();
            if d > radius + 1e-9 && d <= candidate + 1e-9 {
                let cell = grid.cells[idx];
                if cell.m < m_floor || (cell.g as f64) < g_floor {
                    break 'grow;
                }
                shell_min_m = shell_min_m.min(cell.m);
                shell_min_g = shell_min_g.min(cell.g);
            }
        }
        radius = candidate;
        if shell_min_m < min_m {
            min_m = shell_min_m;
        }
        if shell_min_g < min_g {
            min_g = shell_min_g;
        }
    }
    Ok(SphereReport {
        reference,
        ref_m: ref_cell.m,
        ref_g: ref_cell.g,
        radius_mm: radius,
        min_m,
        min_g,
    })
}

/// Grid CSV export: one row per point, index order.
pub fn write_grid_csv<W: std::io::Write>(
    grid: &ReachGrid,
    writer: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "y", "z", "reach_r", "reach_l", "omega", "M", "G"])?;
    for idx in 0..grid.len() {
        let p = grid.point(idx);
        let c = grid.cells[idx];
        w.write_record([
            format!("{}", p.x),
            format!("{}", p.y),
            format!("{}", p.z),
            format!("{}", c.reach_right as u8),
            format!("{}", c.reach_left as u8),
            format!("{}", grid.omega(idx) as u8),
            format!("{}", c.m),
            format!("{}", c.g),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Scene;

    fn small_grid(scene: &Scene, spacing: f64) -> ReachGrid {
        build_reach_grid(
            &scene.robot,
            Vector3::new(200.0, -300.0, 1000.0),
            Vector3::new(600.0, 300.0, 1600.0),
            spacing,
            &ReachParams {
                seed: 3,
                ..Default::default()
            },
        )
    }

    #[test]
    fn omega_is_intersection_of_arm_regions() {
        let scene = Scene::default_scene();
        let grid = small_grid(&scene, 200.0);
        for idx in 0..grid.len() {
            assert_eq!(
                grid.omega(idx),
                grid.cells[idx].reach_right && grid.cells[idx].reach_left
            );
            if grid.omega(idx) {
                assert!(grid.cells[idx].reach_right);
                assert!(grid.cells[idx].reach_left);
            }
        }
    }

    #[test]
    fn distant_point_is_unreachable() {
        let scene = Scene::default_scene();
        assert!(!point_reachable(
            &scene.robot,
            ArmSide::Right,
            &Vector3::new(10_000.0, 0.0, 0.0),
            &ReachParams::default(),
            0,
        ));
    }

    #[test]
    fn workspace_core_point_is_reachable() {
        let scene = Scene::default_scene();
        assert!(point_reachable(
            &scene.robot,
            ArmSide::Right,
            &Vector3::new(450.0, 0.0, 1400.0),
            &ReachParams::default(),
            0,
        ));
    }

    #[test]
    fn grid_build_is_deterministic() {
        let scene = Scene::default_scene();
        let a = small_grid(&scene, 200.0);
        let b = small_grid(&scene, 200.0);
        assert_eq!(a, b);
    }

    #[test]
    fn column_ranking_is_consistent() {
        let scene = Scene::default_scene();
        let grid = small_grid(&scene, 200.0);
        let ranked = score_balancer_columns(&grid);
        assert_eq!(ranked.len(), grid.dims[0] * grid.dims[1]);
        for pair in ranked.windows(2) {
            assert!(pair[0].count >= pair[1].count);
        }
        // Counting is independent of evaluation order by construction; the
        // top column count must match a direct recount.
        let top = ranked[0];
        let ix = ((top.x - grid.origin.x) / grid.spacing_mm).round() as usize;
        let iy = ((top.y - grid.origin.y) / grid.spacing_mm).round() as usize;
        let recount = (0..grid.dims[2])
            .filter(|&iz| grid.omega(grid.index(ix, iy, iz)))
            .count();
        assert_eq!(top.count, recount);
    }

    #[test]
    fn sphere_radius_shrinks_with_stricter_fractions() {
        let scene = Scene::default_scene();
        let mut grid = build_reach_grid(
            &scene.robot,
            Vector3::new(300.0, -100.0, 1350.0),
            Vector3::new(500.0, 100.0, 1550.0),
            100.0,
            &ReachParams {
                seed: 5,
                ..Default::default()
            },
        );
        let ctx = FieldContext {
            robot: &scene.robot,
            arm: crate::scene::CABLE_ARM,
            slider_shape: &scene.slider_shape,
            grasps: scene.grasp_db.grasps(crate::scene::SLIDER_OBJECT).unwrap(),
            orientation: scene.slider_orientation,
            obstacles: &scene.obstacles,
        };
        manipulability_field(
            &mut grid,
            &ctx,
            &ReachParams {
                seed: 5,
                ..Default::default()
            },
        );
        let reference = Vector3::new(400.0, 0.0, 1450.0);
        let loose = manipulability_sphere(&grid, reference, 0.5, 0.25).unwrap();
        let tight = manipulability_sphere(&grid, reference, 0.95, 0.95).unwrap();
        assert!(tight.radius_mm <= loose.radius_mm);
        // Reported minima must honor the fractions by construction.
        assert!(loose.min_m >= 0.5 * loose.ref_m - 1e-9);
        assert!(loose.min_g as f64 >= 0.25 * loose.ref_g as f64 - 1e-9);
    }

    #[test]
    fn field_mean_matches_independent_recomputation() {
        let scene = Scene::default_scene();
        let mut grid = build_reach_grid(
            &scene.robot,
            Vector3::new(400.0, 0.0, 1450.0),
            Vector3::new(400.0, 0.0, 1450.0),
            50.0,
            &ReachParams {
                seed: 9,
                ..Default::default()
            },
        );
        let grasps = scene.grasp_db.grasps(crate::scene::SLIDER_OBJECT).unwrap();
        let ctx = FieldContext {
            robot: &scene.robot,
            arm: crate::scene::CABLE_ARM,
            slider_shape: &scene.slider_shape,
            grasps,
            orientation: scene.slider_orientation,
            obstacles: &scene.obstacles,
        };
        let params = ReachParams {
            seed: 9,
            ..Default::default()
        };
        manipulability_field(&mut grid, &ctx, &params);
        let cell = grid.cells[0];
        assert!(cell.g > 0, "reference point must have feasible grasps");

        // Second route: sum per-grasp best manipulability / G, written
        // independently of the field code path.
        let slider_pose = Pose::new(scene.slider_orientation, grid.point(0));
        let arm = scene.robot.arm(crate::scene::CABLE_ARM);
        let mut per_grasp: Vec<f64> = Vec::new();
        for (gi, grasp) in grasps.iter().enumerate() {
            let target = grasp_world_pose(grasp, &slider_pose);
            let sols = solve_ik(
                arm,
                &target,
                params.ik_restarts,
                params.ik_tol,
                derive_seed(params.seed, 0 << 8 | gi as u64),
            );
            let feasible: Vec<f64> = sols
                .iter()
                .filter(|q| {
                    let posture = RobotPosture {
                        robot: &scene.robot,
                        q_right: &scene.robot.home_right,
                        q_left: q,
                        held: vec![HeldObject::new(
                            &scene.slider_shape,
                            slider_pose,
                            crate::scene::CABLE_ARM,
                        )],
                    };
                    robot_collision_free(&posture, &scene.obstacles).is_none()
                })
                .map(|q| manipulability(arm, q).unwrap())
                .collect();
            if let Some(best) = feasible.into_iter().reduce(f64::max) {
                per_grasp.push(best);
            }
        }
        let expected_g = per_grasp.len() as u32;
        let expected_m = per_grasp.iter().sum::<f64>() / expected_g as f64;
        assert_eq!(cell.g, expected_g);
        assert!((cell.m - expected_m).abs() < 1e-9);
    }

    #[test]
    fn single_point_grid_unreachable_has_zero_stats() {
        let scene = Scene::default_scene();
        let mut grid = build_reach_grid(
            &scene.robot,
            Vector3::new(5000.0, 0.0, 0.0),
            Vector3::new(5000.0, 0.0, 0.0),
            50.0,
            &ReachParams::default(),
        );
        let ctx = FieldContext {
            robot: &scene.robot,
            arm: crate::scene::CABLE_ARM,
            slider_shape: &scene.slider_shape,
            grasps: scene.grasp_db.grasps(crate::scene::SLIDER_OBJECT).unwrap(),
            orientation: scene.slider_orientation,
            obstacles: &scene.obstacles,
        };
        manipulability_field(&mut grid, &ctx, &ReachParams::default());
        assert_eq!(grid.cells[0].g, 0);
        assert_eq!(grid.cells[0].m, 0.0);
        assert!(matches!(
            manipulability_sphere(&grid, Vector3::new(5000.0, 0.0, 0.0), 0.8, 0.5),
            Err(WorkspaceError::InfeasibleReference)
        ));
    }
}
