mod common;

use common::fixture;
use sketchloop::session::{Action, SessionError, SessionState, Workbench};
use sketchloop_core::contour::sketch_from_png;
use sketchloop_core::geometry::{parse_obj, Vec3};
use sketchloop_core::raster::BinaryImage;

const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

fn teacup() -> u32 {
    fixture().model_id("teacup")
}

/// New session advanced to `target` along the cloud path.
fn session_in(bench: &Workbench, target: SessionState) -> String {
    let f = fixture();
    let id = bench.create_session(512, 512, 0).unwrap().id;
    let steps: &[SessionState] = match target {
        SessionState::Empty => &[],
        SessionState::CloudLoaded => &[SessionState::CloudLoaded],
        SessionState::Retrieved => &[SessionState::CloudLoaded, SessionState::Retrieved],
        SessionState::Aligned => &[SessionState::CloudLoaded, SessionState::Retrieved, SessionState::Aligned],
        SessionState::ContourReady => &[
            SessionState::CloudLoaded,
            SessionState::Retrieved,
            SessionState::Aligned,
            SessionState::ContourReady,
        ],
        SessionState::Exported => &[
            SessionState::CloudLoaded,
            SessionState::Retrieved,
            SessionState::Aligned,
            SessionState::Exported,
        ],
    };
    for s in steps {
        match s {
            SessionState::CloudLoaded => {
                bench.load_cloud(&id, &f.cloud_xyz(teacup(), 300, 1), None).unwrap();
            }
            SessionState::Retrieved => {
                bench.submit_sketch(&id, &f.image(teacup(), 0), 10).unwrap();
            }
            SessionState::Aligned => {
                bench.select_and_align(&id, teacup()).unwrap();
            }
            SessionState::ContourReady => {
                bench.extract_contour(&id, Z).unwrap();
            }
            SessionState::Exported => {
                bench.export_model(&id).unwrap();
            }
            SessionState::Empty => unreachable!(),
        }
    }
    assert_eq!(bench.get_session(&id).unwrap().state, target);
    id
}

fn attempt(bench: &Workbench, id: &str, action: Action) -> Result<(), SessionError> {
    let f = fixture();
    match action {
        Action::Create => unreachable!(),
        Action::LoadCloud => bench.load_cloud(id, &f.cloud_xyz(teacup(), 300, 1), None).map(drop),
        Action::SubmitSketch => bench.submit_sketch(id, &f.image(teacup(), 0), 10).map(drop),
        Action::SelectAndAlign => bench.select_and_align(id, teacup()).map(drop),
        Action::ExtractContour => bench.extract_contour(id, Z).map(drop),
        Action::Export => bench.export_model(id).map(drop),
    }
}

#[test]
fn transition_matrix_is_exhaustive() {
    let bench = fixture().bench();
    for state in SessionState::ALL {
        for action in Action::ALL.into_iter().filter(|a| *a != Action::Create) {
            let id = session_in(&bench, state);
            let before = bench.get_session(&id).unwrap().history.len();
            let result = attempt(&bench, &id, action);
            let after = bench.get_session(&id).unwrap();
            if state.allows(action) {
                assert!(result.is_ok(), "{state} {action}: {result:?}");
                assert_eq!(after.history.len(), before + 1);
            } else {
                match result {
                    Err(SessionError::StateConflict { state: s, action: a }) => {
                        assert_eq!(s, state);
                        assert_eq!(a, action.name());
                        let message = SessionError::StateConflict { state: s, action: a }.to_string();
                        assert!(message.contains(state.name()) && message.contains(action.name()));
                    }
                    other => panic!("{state} {action}: {other:?}"),
                }
                assert_eq!(after.state, state);
                assert_eq!(after.history.len(), before);
            }
        }
    }
}

#[test]
fn create_validates_and_ids_differ() {
    let bench = fixture().bench();
    let a = bench.create_session(512, 512, 0).unwrap();
    let b = bench.create_session(512, 512, 0).unwrap();
    assert_ne!(a.id, b.id);
    assert_eq!((a.canvas_w, a.canvas_h, a.state), (512, 512, SessionState::Empty));
    assert!(matches!(bench.create_session(0, 512, 0), Err(SessionError::Validation(_))));
    assert!(matches!(bench.get_session("nope"), Err(SessionError::NotFound(_))));
}

#[test]
fn cloud_is_counted_and_parse_errors_name_the_line() {
    let bench = fixture().bench();
    let id = bench.create_session(512, 512, 0).unwrap().id;
    match bench.load_cloud(&id, b"0 0 0\n1 1 1\n1 two 3\n", None) {
        Err(SessionError::Validation(m)) => assert!(m.contains("line 3"), "{m}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(bench.get_session(&id).unwrap().state, SessionState::Empty);
    let doc = bench.load_cloud(&id, &fixture().cloud_xyz(teacup(), 300, 1), Some("xyz")).unwrap();
    assert_eq!((doc.state, doc.cloud_points), (SessionState::CloudLoaded, Some(300)));
}

#[test]
fn cube_corners_project_symmetrically() {
    let bench = fixture().bench();
    let id = bench.create_session(512, 512, 0).unwrap().id;
    let mut xyz = String::new();
    for i in 0..8 {
        xyz += &format!("{} {} {}\n", i & 1, (i >> 1) & 1, (i >> 2) & 1);
    }
    bench.load_cloud(&id, xyz.as_bytes(), None).unwrap();
    let view = bench.get_view(&id, Z, None).unwrap();
    assert_eq!((view.width, view.height, view.points.len()), (512, 512, 8));
    for p in &view.points {
        let mirrored = [512.0 - p[0], 512.0 - p[1]];
        assert!(view
            .points
            .iter()
            .any(|q| (q[0] - mirrored[0]).abs() < 1e-9 && (q[1] - mirrored[1]).abs() < 1e-9));
    }
    // Axis view: corners stack in pairs onto a square.
    let mut distinct: Vec<[i64; 2]> = view.points.iter().map(|p| [p[0].round() as i64, p[1].round() as i64]).collect();
    distinct.sort();
    distinct.dedup();
    assert_eq!(distinct.len(), 4);
    assert!(matches!(bench.get_view(&id, Vec3::zeros(), None), Err(SessionError::Validation(_))));
}

#[test]
fn view_needs_a_cloud() {
    let bench = fixture().bench();
    let id = bench.create_session(512, 512, 0).unwrap().id;
    assert!(matches!(bench.get_view(&id, Z, None), Err(SessionError::StateConflict { .. })));
}

#[test]
fn bad_sketches_are_rejected_without_side_effects() {
    let bench = fixture().bench();
    let id = bench.create_session(512, 512, 0).unwrap().id;
    let blank = BinaryImage::new(512, 512).unwrap().to_png().unwrap();
    assert!(matches!(bench.submit_sketch(&id, &blank, 10), Err(SessionError::Validation(_))));
    assert!(matches!(bench.submit_sketch(&id, b"not a png", 10), Err(SessionError::Validation(_))));
    let small = BinaryImage::from_fn(64, 64, |x, _| x == 10).unwrap().to_png().unwrap();
    assert!(matches!(bench.submit_sketch(&id, &small, 10), Err(SessionError::Validation(_))));
    let doc = bench.get_session(&id).unwrap();
    assert_eq!((doc.state, doc.metrics.sketch_count, doc.history.len()), (SessionState::Empty, 0, 1));
}

#[test]
fn sketch_only_session_skips_alignment() {
    let f = fixture();
    let bench = f.bench();
    let id = bench.create_session(512, 512, 0).unwrap().id;
    let hits = bench.submit_sketch(&id, &f.image(teacup(), 3), 10).unwrap();
    assert_eq!(hits.hits[0].model_id, teacup());
    let aligned = bench.select_and_align(&id, teacup()).unwrap();
    assert_eq!(aligned.state, SessionState::Aligned);
    assert!(aligned.alignment.is_none() && aligned.alignment_error.is_none());
    let png = bench.extract_contour(&id, Z).unwrap();
    assert!(!sketch_from_png(&png, 128).unwrap().is_blank());
    assert!(bench.export_model(&id).unwrap().vertex_count > 1000);
}

#[test]
fn selection_must_be_a_current_hit() {
    let f = fixture();
    let bench = f.bench();
    let id = session_in(&bench, SessionState::Retrieved);
    assert!(matches!(bench.select_and_align(&id, 999), Err(SessionError::NotFound(_))));
    bench.submit_sketch(&id, &f.image(teacup(), 0), 10).unwrap_err();
    let doc = bench.get_session(&id).unwrap();
    assert_eq!(doc.state, SessionState::Retrieved);
}

#[test]
fn full_loop_tracks_metrics_and_exports_the_model() {
    let f = fixture();
    let bench = f.bench();
    let id = bench.create_session(512, 512, 5).unwrap().id;
    bench.load_cloud(&id, &f.cloud_xyz(teacup(), 300, 2), None).unwrap();
    let hits = bench.submit_sketch(&id, &f.image(teacup(), 0), 3).unwrap();
    assert_eq!(hits.hits.len(), 3);
    assert_eq!(hits.hits[0].model_id, teacup());
    assert_eq!(hits.hits[0].category, "teacup");

    // Self-alignment: the cloud was sampled from this model.
    let aligned = bench.select_and_align(&id, teacup()).unwrap();
    let a = aligned.alignment.unwrap();
    assert!(a.error < 0.01, "{}", a.error);
    assert_eq!(aligned.metrics.last_icp_error, Some(a.error));

    // Extracting from a lattice view and resubmitting keeps the model on top.
    let d = sketchloop_core::geometry::fibonacci_viewpoints(40).unwrap()[5].direction;
    let png = bench.extract_contour(&id, d).unwrap();
    let contour = sketch_from_png(&png, 128).unwrap();
    assert_eq!((contour.width(), contour.height()), (512, 512));
    let again = bench.submit_sketch(&id, &png, 10).unwrap();
    assert_eq!(again.hits[0].model_id, teacup());
    assert_eq!((again.metrics.sketch_count, again.metrics.retrieval_count), (2, 2));

    bench.select_and_align(&id, teacup()).unwrap();
    let export = bench.export_model(&id).unwrap();
    let mesh = parse_obj(export.obj.as_bytes()).unwrap();
    let original = sketchloop_core::geometry::load_mesh(&f.mesh_path(teacup())).unwrap();
    assert_eq!(mesh.vertices.len(), original.vertices.len());
    assert_eq!(export.metrics.sketch_count, 2);
    // Exported in the cloud's own units: near the original mesh.
    let centroid = |v: &[Vec3]| v.iter().sum::<Vec3>() / v.len() as f64;
    assert!((centroid(&mesh.vertices) - centroid(&original.vertices)).norm() < 0.05);

    let doc = bench.get_session(&id).unwrap();
    assert_eq!(doc.state, SessionState::Exported);
    assert_eq!(doc.history.len(), 8);
    let counts: Vec<u32> = doc.history.iter().map(|h| h.metrics.sketch_count).collect();
    assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    assert!(matches!(bench.export_model(&id), Err(SessionError::StateConflict { .. })));
}

#[test]
fn journal_restores_sessions() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let bench = f.bench().with_journal(dir.path()).unwrap();
        let id = bench.create_session(512, 512, 3).unwrap().id;
        bench.load_cloud(&id, &f.cloud_xyz(teacup(), 300, 4), None).unwrap();
        bench.submit_sketch(&id, &f.image(teacup(), 2), 10).unwrap();
        // Failed calls leave no trace.
        bench.extract_contour(&id, Z).unwrap_err();
        bench.select_and_align(&id, teacup()).unwrap();
        id
    };
    let lines = std::fs::read_to_string(dir.path().join(format!("{id}.jsonl"))).unwrap();
    assert_eq!(lines.lines().count(), 4);

    let restored = f.bench().with_journal(dir.path()).unwrap();
    let doc = restored.get_session(&id).unwrap();
    assert_eq!(doc.state, SessionState::Aligned);
    assert_eq!(doc.history.len(), 4);
    assert!(doc.alignment.unwrap().error < 0.01);
    restored.extract_contour(&id, Z).unwrap();
    let lines = std::fs::read_to_string(dir.path().join(format!("{id}.jsonl"))).unwrap();
    assert_eq!(lines.lines().count(), 5);
}
