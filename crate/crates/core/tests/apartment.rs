use ovigo_core::config::PipelineConfig;
use ovigo_core::eval::{parse_benchmark, run_benchmark};
use ovigo_core::fixture::{generate, spec::FixtureSpec, BENCHMARK, CONFIG, MANIFEST, TRANSCRIPT};
use ovigo_core::llm::{CallLog, ScriptedClient};
use ovigo_core::pipeline::{build_scene_graph, load_manifest};

#[test]
fn apartment_scene_is_recovered_and_grounded_from_its_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let s = generate(&FixtureSpec::apartment(7), p).unwrap();
    assert_eq!(s.recovered, s.ground_truth);
    assert_eq!((s.ground_truth.floors, s.ground_truth.rooms, s.ground_truth.locations, s.ground_truth.objects), (2, 5, 3, 40));

    let read = |name: &str| std::fs::read_to_string(p.join(name)).unwrap();
    let cfg: PipelineConfig = serde_json::from_str(&read(CONFIG)).unwrap();
    let llm = ScriptedClient::from_jsonl(&read(TRANSCRIPT)).unwrap();
    let (graph, _) = build_scene_graph(&load_manifest(&p.join(MANIFEST)).unwrap(), p, &cfg, &llm, &CallLog::new(), 2).unwrap();
    let items = parse_benchmark(&read(BENCHMARK)).unwrap();
    assert_eq!(items.len(), 20);
    assert_eq!(items[0].query, "find a vase near the window");
    let report = run_benchmark(&graph, &items, &llm, &cfg.reasoning).unwrap();
    assert!(report.accuracy.iter().all(|&(_, a)| a == 1.0), "{}", report.table());
}

#[test]
fn seeds_change_the_layout_but_not_the_schema() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = generate(&FixtureSpec::apartment(1), a.path()).unwrap();
    let sb = generate(&FixtureSpec::apartment(2), b.path()).unwrap();
    assert_eq!(sa.ground_truth, sb.ground_truth);
    let names = |d: &std::path::Path| {
        let mut v: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    assert_eq!(names(a.path()), names(b.path()));
    let gt = |d: &std::path::Path| std::fs::read_to_string(d.join("ground_truth.json")).unwrap();
    assert_ne!(gt(a.path()), gt(b.path()));
}
