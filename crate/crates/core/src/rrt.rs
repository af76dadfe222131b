//! RRT-connect in joint space with shortcut smoothing.
//!
//! Bidirectional tree search between a start configuration and a set of
//! goal configurations, followed by randomized shortcutting. Budgets are
//! iteration counts, not wall time, so identical seeds give identical paths.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::kinematics::{ArmModel, JointVector};

#[derive(Clone, Copy, Debug)]
pub struct RrtParams {
    /// Extension step and edge-validation resolution (degrees per joint).
    pub step_deg: f64,
    /// Probability of sampling a goal configuration instead of uniform.
    pub goal_bias: f64,
    pub max_iters: usize,
    pub shortcut_iters: usize,
}

impl Default for RrtParams {
    fn default() -> Self {
        Self {
            step_deg: 5.0,
            goal_bias: 0.1,
            max_iters: 30_000,
            shortcut_iters: 200,
        }
    }
}

struct Tree {
    nodes: Vec<JointVector>,
    parents: Vec<usize>,
}

impl Tree {
    fn new(roots: &[JointVector]) -> Self {
        Tree {
            nodes: roots.to_vec(),
            parents: (0..roots.len()).collect(),
        }
    }

    fn nearest(&self, q: &JointVector) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = joint_distance(n, q);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn push(&mut self, q: JointVector, parent: usize) -> usize {
        self.nodes.push(q);
        self.parents.push(parent);
        self.nodes.len() - 1
    }

    fn path_to_root(&self, mut idx: usize) -> Vec<JointVector> {
        let mut path = vec![self.nodes[idx].clone()];
        while self.parents[idx] != idx {
            idx = self.parents[idx];
            path.push(self.nodes[idx].clone());
        }
        path
    }
}

fn joint_distance(a: &JointVector, b: &JointVector) -> f64 {
    a.angles
        .iter()
        .zip(&b.angles)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Step from `from` toward `to` by at most `step_deg` per joint.
fn steer(from: &JointVector, to: &JointVector, step_deg: f64) -> JointVector {
    let span = from.max_abs_diff(to);
    if span <= step_deg {
        to.clone()
    } else {
        from.lerp(to, step_deg / span)
    }
}

/// Check the straight joint-space edge at `step` resolution (both ends
/// included).
pub fn edge_valid(
    from: &JointVector,
    to: &JointVector,
    step_deg: f64,
    valid: &mut dyn FnMut(&JointVector) -> bool,
) -> bool {
    let span = from.max_abs_diff(to);
    let n = (span / step_deg).ceil().max(1.0) as usize;
    for i in 0..=n {
        if !valid(&from.lerp(to, i as f64 / n as f64)) {
            return false;
        }
    }
    true
}

enum ExtendOutcome {
    Reached(usize),
    Advanced(usize),
    Trapped,
}

fn extend(
    tree: &mut Tree,
    target: &JointVector,
    params: &RrtParams,
    valid: &mut dyn FnMut(&JointVector) -> bool,
) -> ExtendOutcome {
    let near_idx = tree.nearest(target);
    let near = tree.nodes[near_idx].clone();
    let q_new = steer(&near, target, params.step_deg);
    // Validate the short edge at half resolution.
    if !edge_valid(&near, &q_new, params.step_deg * 0.5, valid) {
        return ExtendOutcome::Trapped;
    }
    let idx = tree.push(q_new.clone(), near_idx);
    if joint_distance(&q_new, target) < 1e-9 {
        ExtendOutcome::Reached(idx)
    } else {
        ExtendOutcome::Advanced(idx)
    }
}

/// Bidirectional RRT-connect between `start` and any of `goals`.
///
/// Returns a joint path from start to one goal; configurations along the
/// path are validated at half-step resolution. Fails after the iteration
/// budget is spent.
pub fn plan_joint_path(
    arm: &ArmModel,
    start: &JointVector,
    goals: &[JointVector],
    params: &RrtParams,
    rng: &mut ChaCha8Rng,
    valid: &mut dyn FnMut(&JointVector) -> bool,
) -> Option<Vec<JointVector>> {
    if goals.is_empty() || !valid(start) {
        return None;
    }
    let reachable_goals: Vec<JointVector> =
        goals.iter().filter(|g| valid(g)).cloned().collect();
    if reachable_goals.is_empty() {
        return None;
    }
    // Trivial connections first.
    for g in &reachable_goals {
        if edge_valid(start, g, params.step_deg * 0.5, valid) {
            return Some(smooth(
                vec![start.clone(), g.clone()],
                params,
                rng,
                valid,
            ));
        }
    }

    let mut tree_a = Tree::new(std::slice::from_ref(start));
    let mut tree_b = Tree::new(&reachable_goals);
    let mut a_is_start = true;

    for _ in 0..params.max_iters {
        let sample = if rng.gen_bool(params.goal_bias) {
            reachable_goals[rng.gen_range(0..reachable_goals.len())].clone()
        } else {
            arm.random_joints(rng)
        };
        match extend(&mut tree_a, &sample, params, valid) {
            ExtendOutcome::Trapped => {}
            ExtendOutcome::Reached(new_idx) | ExtendOutcome::Advanced(new_idx) => {
                let q_new = tree_a.nodes[new_idx].clone();
                // Greedily connect the other tree toward the new node.
                let mut reached = None;
                loop {
                    match extend(&mut tree_b, &q_new, params, valid) {
                        ExtendOutcome::Reached(idx) => {
                            reached = Some(idx);
                            break;
                        }
                        ExtendOutcome::Advanced(_) => {}
                        ExtendOutcome::Trapped => break,
                    }
                }
                if let Some(b_idx) = reached {
                    // The junction configuration is a node of both trees.
                    let via_a = tree_a.path_to_root(new_idx); // [junction .. root_a]
                    let via_b = tree_b.path_to_root(b_idx); // [junction .. root_b]
                    let (to_start, to_goal) = if a_is_start {
                        (via_a, via_b)
                    } else {
                        (via_b, via_a)
                    };
                    let mut path: Vec<JointVector> = to_start.into_iter().rev().collect();
                    path.extend(to_goal.into_iter().skip(1));
                    return Some(smooth(path, params, rng, valid));
                }
            }
        }
        std::mem::swap(&mut tree_a, &mut tree_b);
        a_is_start = !a_is_start;
    }
    None
}

/// Randomized shortcutting: try to replace random sub-paths with straight
/// valid edges.
fn smooth(
    mut path: Vec<JointVector>,
    params: &RrtParams,
    rng: &mut ChaCha8Rng,
    valid: &mut dyn FnMut(&JointVector) -> bool,
) -> Vec<JointVector> {
    for _ in 0..params.shortcut_iters {
        if path.len() < 3 {
            break;
        }
        let i = rng.gen_range(0..path.len() - 2);
        let j = rng.gen_range(i + 2..path.len());
        if edge_valid(&path[i], &path[j], params.step_deg * 0.5, valid) {
            path.drain(i + 1..j);
        }
    }
    path
}
