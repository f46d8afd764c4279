use vsloc_demo::{cost_table, Demo};

fn small_scene() -> Demo {
    Demo::new("box-room", 300.0, 0.25, 3).expect("scene builds")
}

#[test]
fn renders_are_full_rgba_frames() {
    let demo = small_scene();
    assert_eq!(demo.camera_count(), 10);
    assert!(demo.landmark_count() > 50);
    let len = 4 * demo.width() as usize * demo.height() as usize;
    for mode in ["labels", "votes"] {
        let img = demo.render(0, mode).unwrap();
        assert_eq!(img.len(), len);
        assert!(img.chunks_exact(4).all(|p| p[3] == 255));
        assert!(img.chunks_exact(4).any(|p| p[..3] != [0, 0, 0]));
    }
    assert!(demo.render(0, "depth").is_err());
    assert!(demo.render(10, "labels").is_err());
}

#[test]
fn clean_maps_localize_exactly() {
    let demo = small_scene();
    let r = demo.localize(2, 0.0, 0.0, 0.0, 7).unwrap();
    assert!(r.success);
    assert!(r.position_error < 1e-3, "{}", r.position_error);
    assert!(r.angular_error < 0.01, "{}", r.angular_error);
    assert!(r.mean_detection_error < 0.5);
    assert_eq!(r.image().len(), 4 * demo.width() as usize * demo.height() as usize);
}

#[test]
fn occlusion_drops_landmarks_and_is_seeded() {
    let demo = small_scene();
    let a = demo.localize(1, 0.0, 2.0, 0.6, 11).unwrap();
    let b = demo.localize(1, 0.0, 2.0, 0.6, 11).unwrap();
    assert!(a.dropped > 0);
    assert_eq!(a.image(), b.image());
    assert_eq!(a.position_error.to_bits(), b.position_error.to_bits());
    assert!(demo.localize(1, 1.5, 0.0, 0.0, 0).is_err());
}

#[test]
fn cost_table_matches_the_reference_sizes() {
    let table = cost_table(640, 480, 5000, 12, 100).unwrap();
    for needle in ["36.9 GFLOPS", "5.7 GiB", "1.91 MiB"] {
        assert!(table.contains(needle), "missing {needle} in\n{table}");
    }
    assert!(cost_table(640, 480, 10, 12, 100).is_err());
    assert!(cost_table(0, 480, 10, 12, 1).is_err());
}

#[test]
fn unknown_shapes_are_rejected() {
    assert!(Demo::new("torus", 300.0, 0.25, 0).is_err());
    assert!(Demo::new("box-room", -1.0, 0.25, 0).is_err());
}
