mod common;

use common::fixture;
use navharness_core::backend::{make_backend, BackendConfig, ScriptTable};
use navharness_core::dataset::{
    export_dataset, generate_candidates, ingest_scores, CurationSession, SessionStatus, SessionStore, TrainingRecord,
};
use navharness_core::output::parse_model_output;
use navharness_core::task::{load_tasks, DifficultyBucket};
use navharness_core::world::{load_world_file, WorldMap};
use serde_json::json;

/// Generator output holding `counts[i]` tasks with `i + 1` goals (index 3
/// gives four goals). Landmarks cycle so every text is unique.
fn generator_text(map: &WorldMap, counts: [usize; 4], tag: &str) -> String {
    let names: Vec<_> = map.landmarks_sorted().into_iter().cloned().collect();
    let mut tasks = Vec::new();
    let mut k = 0;
    for (b, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            let picked: Vec<_> = (0..b + 1).map(|j| &names[(k + j * 3) % names.len()]).collect();
            let text = format!(
                "[{tag} {k}] Visit {}.",
                picked.iter().map(|l| l.name.as_str()).collect::<Vec<_>>().join(" then ")
            );
            let goals: Vec<_> = picked.iter().map(|l| [l.position.x, l.position.y]).collect();
            tasks.push(json!({"task": text, "goals": goals}));
            k += 1;
        }
    }
    json!({ "tasks": tasks }).to_string()
}

fn complete_session(map: &WorldMap) -> CurationSession {
    let seeds = load_tasks(fixture("tasks.jsonl")).unwrap();
    let mut session = CurationSession::new("ward28", map, 28, 7.0, seeds).unwrap();
    // round 1: everything needed plus two low scorers
    let text = generator_text(map, [5, 12, 8, 5], "r1");
    let generator = make_backend(&BackendConfig::scripted(ScriptTable::new(vec![], text, 0.0))).unwrap();
    let report = generate_candidates(&mut session, map, &*generator, 30).unwrap();
    assert_eq!(report.candidate_ids.len(), 30);
    let scores: Vec<(String, f64)> = session
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| (c.task.id.clone(), if i == 0 || i == 29 { 3.0 } else { 8.0 }))
        .collect();
    ingest_scores(&mut session, map, &scores).unwrap();
    assert_eq!(session.status, SessionStatus::Complete);
    session
}

#[test]
fn curated_counts_follow_ratio() {
    let map = load_world_file(fixture("hospital.world")).unwrap();
    let session = complete_session(&map);
    assert_eq!(session.accepted_counts().to_array(), [4, 12, 8, 4]);
    assert!(session.seeds.iter().all(|s| !session.accepted.contains(&s.task.id)));
}

#[test]
fn export_split_is_stratified_and_seeded() {
    let map = load_world_file(fixture("hospital.world")).unwrap();
    let session = complete_session(&map);
    let dir = tempfile::tempdir().unwrap();
    let paths = export_dataset(&session, &map, dir.path(), 0.25, 11).unwrap();
    assert_eq!((paths.n_train, paths.n_test), (21, 7));

    let test = load_tasks(&paths.test).unwrap();
    let mut per_bucket = [0; 4];
    for t in &test {
        per_bucket[t.difficulty_bucket.index()] += 1;
    }
    assert_eq!(per_bucket, [1, 3, 2, 1]);

    let train_text = std::fs::read_to_string(&paths.train).unwrap();
    let train: Vec<TrainingRecord> = train_text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(train.len(), 21);
    for rec in &train {
        assert_eq!(rec.messages.len(), 3);
        assert!(!rec.messages[1].content.contains("## Environment"));
        let (answer, _) = parse_model_output(&rec.messages[2].content).unwrap();
        let cand = session.candidate(&rec.id).unwrap();
        assert_eq!(answer.positions, cand.task.goals);
        assert!(test.iter().all(|t| t.id != rec.id));
    }

    let again = tempfile::tempdir().unwrap();
    let p2 = export_dataset(&session, &map, again.path(), 0.25, 11).unwrap();
    assert_eq!(std::fs::read(&paths.test).unwrap(), std::fs::read(&p2.test).unwrap());
    assert_eq!(std::fs::read(&paths.train).unwrap(), std::fs::read(&p2.train).unwrap());
}

#[test]
fn export_requires_completion() {
    let map = load_world_file(fixture("hospital.world")).unwrap();
    let session = CurationSession::new("early", &map, 7, 7.0, vec![]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    assert!(export_dataset(&session, &map, dir.path(), 0.25, 1).is_err());
    let done = complete_session(&map);
    assert!(export_dataset(&done, &map, dir.path(), 1.0, 1).is_err());
}

#[test]
fn session_survives_store_round_trip() {
    let map = load_world_file(fixture("hospital.world")).unwrap();
    let session = complete_session(&map);
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::open(dir.path()).unwrap();
    store.save(&session).unwrap();
    let reopened = SessionStore::open(dir.path()).unwrap();
    assert_eq!(reopened.load("ward28").unwrap(), session);
    assert_eq!(
        session.summary().buckets.iter().map(|b| (b.bucket, b.accepted)).collect::<Vec<_>>(),
        vec![
            (DifficultyBucket::One, 4),
            (DifficultyBucket::Two, 12),
            (DifficultyBucket::Three, 8),
            (DifficultyBucket::FourPlus, 4)
        ]
    );
}
