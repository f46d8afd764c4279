use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vsloc::geometry::{project, CameraIntrinsics, Pose};
use vsloc::landmark::{landmarks_from_patches, oversegment, render_view, SurfaceCloud};

fn random_cloud(n: usize, seed: u64) -> SurfaceCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            // Points on a plane z = 0 plus a bump, in a 2 m square.
            let (x, y): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            Vector3::new(x, y, 0.3 * (-(x * x + y * y) * 3.0).exp())
        })
        .collect();
    SurfaceCloud::new(points).unwrap()
}

fn camera() -> CameraIntrinsics {
    CameraIntrinsics::new(60.0, 60.0, 32.0, 24.0, 64, 48).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rendered_maps_satisfy_their_invariants(
        n in 200usize..1500,
        size in 0.2f64..0.8,
        seed in any::<u64>(),
        eye in prop::array::uniform2(-0.8f64..0.8),
        height in 1.5f64..3.0,
        radius in 1u32..3,
    ) {
        let cloud = random_cloud(n, seed);
        let patches = oversegment(&cloud, size, seed).unwrap();
        let lms = landmarks_from_patches(&cloud, &patches).unwrap();
        let k = camera();
        let pose = Pose::look_at(
            Vector3::new(eye[0], eye[1], height),
            Vector3::zeros(),
            Vector3::new(0.0, 1.0, 0.0),
        ).unwrap();
        let Ok(view) = render_view(&cloud, &patches, &lms, &k, &pose, radius) else {
            return Ok(());
        };
        let maps = &view.maps;
        prop_assert!(maps.labels.iter().all(|&l| l <= patches.patch_count));
        let fg = maps.foreground_fraction();
        let bg = maps.labels.iter().filter(|&&l| l == 0).count() as f64 / maps.len() as f64;
        prop_assert!((fg + bg - 1.0).abs() < 1e-12);
        prop_assert!(maps.check_invariants().is_ok());
        for (i, (&l, vote)) in maps.labels.iter().zip(&maps.votes).enumerate() {
            if l == 0 {
                prop_assert_eq!(*vote, [0.0, 0.0]);
                continue;
            }
            prop_assert_eq!(cloud.points.len() > view.point_index[i] as usize, true);
            prop_assert_eq!(patches.labels[view.point_index[i] as usize], l);
            let Some(target) = view.projections[l as usize - 1] else { continue };
            let (d0, d1) = (vote[0] as f64, vote[1] as f64);
            let norm = d0.hypot(d1);
            if norm == 0.0 {
                continue;
            }
            prop_assert!((norm - 1.0).abs() < 1e-6);
            // Perpendicular distance of the target from the vote ray; the f32
            // direction limits precision to ~1e-7 relative to the distance.
            let p = maps.pixel(i);
            let (dx, dy) = (target.u - p.u, target.v - p.v);
            let perp = (dx * d1 - dy * d0).abs();
            prop_assert!(perp <= 1e-6 + 2e-7 * dx.hypot(dy), "perp {perp}");
            prop_assert!(dx * d0 + dy * d1 > 0.0);
        }
    }

    #[test]
    fn landmarks_are_viewpoint_invariant(seed in any::<u64>(), a in -0.6f64..0.6, b in -0.6f64..0.6) {
        let cloud = random_cloud(800, seed);
        let patches = oversegment(&cloud, 0.4, seed).unwrap();
        let lms = landmarks_from_patches(&cloud, &patches).unwrap();
        let k = camera();
        let up = Vector3::new(0.0, 1.0, 0.0);
        let p1 = Pose::look_at(Vector3::new(a, b, 2.5), Vector3::zeros(), up).unwrap();
        let p2 = Pose::look_at(Vector3::new(-a, b, 2.0), Vector3::zeros(), up).unwrap();
        let v1 = render_view(&cloud, &patches, &lms, &k, &p1, 2).unwrap();
        let v2 = render_view(&cloud, &patches, &lms, &k, &p2, 2).unwrap();
        // A pixel showing the same surface point carries the same landmark id.
        let mut label_of_point = std::collections::HashMap::new();
        for (i, &pt) in v1.point_index.iter().enumerate() {
            if pt != u32::MAX {
                label_of_point.insert(pt, v1.maps.labels[i]);
            }
        }
        for (i, &pt) in v2.point_index.iter().enumerate() {
            if let Some(&l) = label_of_point.get(&pt) {
                prop_assert_eq!(l, v2.maps.labels[i]);
            }
        }
        for (j, lm) in lms.landmarks.iter().enumerate() {
            if let Some(px) = v1.projections[j] {
                prop_assert_eq!(px, project(&lm.position, &k, &p1).0);
            }
        }
    }
}

#[test]
fn planar_patch_sizes_are_roughly_uniform() {
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..20_000)
            .map(|_| Vector3::new(rng.random_range(0.0..4.0), rng.random_range(0.0..4.0), 0.0))
            .collect();
        let cloud = SurfaceCloud::new(points).unwrap();
        let patches = oversegment(&cloud, 0.25, seed).unwrap();
        let sizes: Vec<f64> = patches.sizes().into_iter().map(|s| s as f64).collect();
        let mean = sizes.iter().sum::<f64>() / sizes.len() as f64;
        let var = sizes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / sizes.len() as f64;
        let cv = var.sqrt() / mean;
        assert!(cv < 0.5, "seed {seed}: cv {cv}");
    }
}
