use tetherplan::cmms::{filter_candidates, project_slider_goal, GoalStatus};
use tetherplan::omms::plan_omms;
use tetherplan::scene::Scene;

#[test]
fn debug_cmms_discards() {
    let scene = Scene::default_scene();
    let goal_ids = [2usize, 1, 3];
    let goals: Vec<_> = goal_ids.iter().map(|&g| scene.goals[g - 1]).collect();
    let omms = plan_omms(&scene, &scene.start, &goals, 9).expect("omms");
    println!("omms states: {}", omms.len());
    let slider_goals: Vec<_> = omms
        .states
        .iter()
        .map(|s| {
            project_slider_goal(
                &s.tool_pose,
                &scene.tail_dir_local(),
                scene.alpha_s_mm(),
                scene.min_slider_height_mm(),
                s.step,
            )
        })
        .collect();
    match filter_candidates(&slider_goals, &omms, &scene, 30.0, 9) {
        Ok(annotated) => {
            let mut runs: Vec<(usize, usize, String)> = Vec::new();
            for (i, g) in annotated.iter().enumerate() {
                let label = format!("{:?}", g.status);
                match runs.last_mut() {
                    Some((_, end, l)) if *l == label && *end == i - 1 => *end = i,
                    _ => runs.push((i, i, label)),
                }
            }
            for (a, b, l) in runs {
                println!("steps {a:>4}..{b:<4} {l}");
            }
        }
        Err(e) => println!("filter failed: {e}"),
    }
}
