mod common;

use common::fixture;
use navharness_core::navsim::execute_goals;
use navharness_core::task::load_tasks;
use navharness_core::world::load_world_file;

#[test]
fn hospital_map_loads() {
    let map = load_world_file(fixture("hospital.world")).unwrap();
    assert_eq!((map.rows(), map.cols()), (40, 60));
    assert_eq!(map.landmarks().len(), 20);

    let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fixture("hospital.world")).unwrap()).unwrap();
    let dots: usize = raw["grid"].as_array().unwrap().iter().map(|r| r.as_str().unwrap().matches('.').count()).sum();
    assert_eq!(map.free_cell_count(), dots);

    for lm in map.landmarks() {
        let cell = map.world_to_cell(lm.position).unwrap();
        assert!(map.is_free(cell), "{} sits on an obstacle", lm.name);
        assert_eq!(map.cell_center(cell), lm.position);
    }
}

#[test]
fn every_task_is_reachable() {
    let map = load_world_file(fixture("hospital.world")).unwrap();
    let start = map.landmark_position("reception").unwrap();
    for task in load_tasks(fixture("tasks.jsonl")).unwrap() {
        for g in &task.goals {
            assert!(map.landmark_at(*g, 1e-9).is_some());
        }
        let outcome = execute_goals(&map, start, &task.goals, 0.5);
        assert!(outcome.all_reached, "{}", task.id);
        assert!(outcome.motion_duration > 0.0);
    }
}
