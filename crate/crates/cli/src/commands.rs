use std::fmt::Write as _;
use std::path::Path;

use vsloc::cost::{cost_model, format_cost_table, CostParams};
use vsloc::detect::detect_landmarks_report;
use vsloc::geometry::pose_error;
use vsloc::gradcheck::{run_gradient_check, GradCheckParams};
use vsloc::io::{
    load_maps, load_text, read_camera, read_detections, read_landmarks, read_patches, read_ply, save_maps,
    save_prototypes, save_text, write_camera, write_detections, write_landmarks, write_patches, write_ply, write_pose,
    Prototypes,
};
use vsloc::landmark::{landmarks_from_patches, oversegment, render_view};
use vsloc::pnp::{ransac_pnp, Correspondence};
use vsloc::sim::{
    calibrate_dense, dense_baseline, experiment_noise_sweep, experiment_patch_sweep, format_trial_row, generate_scene,
    run_pipeline, toy_label_map, trial_seeds, DenseParams, NoiseSpec, NoiseSweepConfig, PatchSweepConfig, Scene,
    SettingSummary, SweepTable, CSV_HEADER,
};
use vsloc::triplet::{fit_toy_segmentation, NegativeMining, TripletConfig};

use crate::config::{resolve, Settings};
use crate::error::CliError;
use crate::{Command, Experiment, Mining};

fn input(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "input file '{}' does not exist",
            path.display()
        )))
    }
}

fn output(path: &Path) -> Result<(), CliError> {
    if path.is_dir() {
        return Err(CliError::Usage(format!("output '{}' is a directory", path.display())));
    }
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(CliError::Usage(format!(
            "output directory '{}' does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn positive(name: &str, v: usize) -> Result<(), CliError> {
    if v == 0 {
        return Err(CliError::Usage(format!("{name} must be positive")));
    }
    Ok(())
}

fn build_scene(s: &Settings, seed: u64) -> Result<Scene, CliError> {
    let spec = vsloc::sim::SceneSpec { seed, ..s.scene };
    Ok(Scene::build(&spec, s.patch_size, s.splat_radius)?)
}

pub fn dispatch(command: Command, seed: u64) -> Result<(), CliError> {
    match command {
        Command::GenScene { out, config, scene } => {
            let s = resolve(&config, &[&scene])?;
            if out.exists() && !out.is_dir() {
                return Err(CliError::Usage(format!("'{}' is not a directory", out.display())));
            }
            output(&out)?;
            let spec = vsloc::sim::SceneSpec { seed, ..s.scene };
            let (cloud, cameras) = generate_scene(&spec)?;
            std::fs::create_dir_all(&out).map_err(|e| CliError::Input(e.into()))?;
            save_text(&out.join("cloud.ply"), &write_ply(&cloud))?;
            for (i, (k, pose)) in cameras.iter().enumerate() {
                save_text(&out.join(format!("camera_{i:02}.txt")), &write_camera(k, Some(pose)))?;
            }
            println!("points {}\ncameras {}", cloud.len(), cameras.len());
            Ok(())
        }
        Command::GenLandmarks {
            cloud,
            patches,
            landmarks,
            config,
            patch,
        } => {
            let s = resolve(&config, &[&patch])?;
            input(&cloud)?;
            output(&patches)?;
            output(&landmarks)?;
            let cloud = read_ply(&load_text(&cloud)?)?;
            let p = oversegment(&cloud, s.patch_size, seed)?;
            let lms = landmarks_from_patches(&cloud, &p)?;
            save_text(&patches, &write_patches(&p))?;
            save_text(&landmarks, &write_landmarks(&lms))?;
            println!("points {}\nlandmarks {}", cloud.len(), lms.len());
            Ok(())
        }
        Command::RenderMaps {
            cloud,
            patches,
            landmarks,
            camera,
            out,
            config,
            splat,
        } => {
            let s = resolve(&config, &[&splat])?;
            for p in [&cloud, &patches, &landmarks, &camera] {
                input(p)?;
            }
            output(&out)?;
            let cloud = read_ply(&load_text(&cloud)?)?;
            let patches = read_patches(&load_text(&patches)?)?;
            let lms = read_landmarks(&load_text(&landmarks)?)?;
            let (k, pose) = read_camera(&load_text(&camera)?)?;
            let pose = pose.ok_or_else(|| CliError::Usage("camera file has no pose".into()))?;
            let view = render_view(&cloud, &patches, &lms, &k, &pose, s.splat_radius)?;
            save_maps(&out, &view.maps)?;
            println!(
                "size {}x{}\nforeground {:.4}\nactive_labels {}",
                view.maps.width,
                view.maps.height,
                view.maps.foreground_fraction(),
                view.maps.active_labels().len()
            );
            Ok(())
        }
        Command::Detect {
            maps,
            out,
            config,
            detect,
        } => {
            let s = resolve(&config, &[&detect])?;
            input(&maps)?;
            output(&out)?;
            let maps = load_maps(&maps)?;
            let report = detect_landmarks_report(&maps, &s.detect, seed);
            if report.landmarks.is_empty() {
                return Err(CliError::Pipeline("no landmarks detected".into()));
            }
            save_text(&out, &write_detections(&report.landmarks))?;
            println!(
                "accepted {}\ndropped {}\ntoo_small {}",
                report.landmarks.len(),
                report.dropped(),
                report.rejected.len() - report.dropped()
            );
            Ok(())
        }
        Command::Localize {
            detections,
            landmarks,
            camera,
            out,
            truth,
            config,
            pnp,
        } => {
            let s = resolve(&config, &[&pnp])?;
            for p in [&detections, &landmarks, &camera] {
                input(p)?;
            }
            if let Some(t) = &truth {
                input(t)?;
            }
            output(&out)?;
            let dets = read_detections(&load_text(&detections)?)?;
            let lms = read_landmarks(&load_text(&landmarks)?)?;
            let (k, _) = read_camera(&load_text(&camera)?)?;
            let corrs: Vec<Correspondence> = dets
                .iter()
                .filter_map(|d| {
                    lms.get(d.landmark_id).map(|lm| Correspondence {
                        image: d.location,
                        world: lm.position,
                        landmark_id: d.landmark_id,
                    })
                })
                .collect();
            if corrs.len() < s.pnp.min_inliers {
                return Err(CliError::Pipeline(format!(
                    "only {} correspondences, {} required",
                    corrs.len(),
                    s.pnp.min_inliers
                )));
            }
            let est = ransac_pnp(&corrs, &k, &s.pnp, seed).map_err(|e| CliError::Pipeline(e.to_string()))?;
            let text = write_pose(&est);
            save_text(&out, &text)?;
            print!("{text}");
            if let Some(t) = truth {
                let (_, pose) = read_camera(&load_text(&t)?)?;
                let pose = pose.ok_or_else(|| CliError::Usage("truth camera file has no pose".into()))?;
                let (pos, ang) = pose_error(&est.pose, &pose);
                println!("pos_err_m {pos:e}\nang_err_deg {ang:e}");
            }
            Ok(())
        }
        Command::Simulate {
            trials,
            camera,
            dense,
            dense_noise_scale,
            out,
            config,
            scene,
            patch,
            splat,
            noise,
            detect,
            pnp,
        } => {
            let s = resolve(&config, &[&scene, &patch, &splat, &noise, &detect, &pnp])?;
            positive("trials", trials)?;
            if let Some(o) = &out {
                output(o)?;
            }
            if let Some(c) = camera {
                if c >= s.scene.camera_count {
                    return Err(CliError::Usage(format!(
                        "camera {c} out of range for {} cameras",
                        s.scene.camera_count
                    )));
                }
            }
            let scene = build_scene(&s, seed)?;
            let dense_params = match (dense, dense_noise_scale) {
                (false, _) => None,
                (true, Some(scale)) => Some(DenseParams {
                    noise_scale: scale,
                    ..Default::default()
                }),
                (true, None) => Some(calibrate_dense(&scene, &s.noise, &s.detect, &s.pnp, trials, seed)?),
            };
            let frac = s.noise.occlusion_block_frac;
            let mut csv = format!("{CSV_HEADER}\n");
            let mut dense_rows = String::new();
            for t in 0..trials {
                let (noise_seed, trial_seed) = trial_seeds(seed, 0, t);
                let cam = camera.unwrap_or(t % scene.cameras.len());
                let noise = NoiseSpec {
                    seed: noise_seed,
                    ..s.noise
                };
                let r = run_pipeline(&scene, cam, &noise, &s.detect, &s.pnp, trial_seed)?;
                csv.push_str(&format_trial_row(&format!("lm@{frac}"), t, &r));
                csv.push('\n');
                if let Some(d) = &dense_params {
                    let r = dense_baseline(&scene, cam, &noise, &s.pnp, d, trial_seed)?;
                    dense_rows.push_str(&format_trial_row(&format!("dense@{frac}"), t, &r));
                    dense_rows.push('\n');
                }
            }
            csv.push_str(&dense_rows);
            match out {
                Some(path) => save_text(&path, &csv)?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Sweep {
            experiment,
            fracs,
            sizes,
            trials,
            no_dense,
            dense_noise_scale,
            out,
            plot,
            config,
            scene,
            patch,
            splat,
            noise,
            detect,
            pnp,
        } => {
            let s = resolve(&config, &[&scene, &patch, &splat, &noise, &detect, &pnp])?;
            positive("trials", trials)?;
            output(&out)?;
            if let Some(p) = &plot {
                output(p)?;
            }
            let scene = build_scene(&s, seed)?;
            let table = match experiment {
                Experiment::Noise => {
                    if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
                        return Err(CliError::Usage("fracs must lie in [0, 1]".into()));
                    }
                    let dense = match (no_dense, dense_noise_scale) {
                        (true, _) => None,
                        (false, Some(scale)) => Some(DenseParams {
                            noise_scale: scale,
                            ..Default::default()
                        }),
                        (false, None) => Some(calibrate_dense(&scene, &s.noise, &s.detect, &s.pnp, trials, seed)?),
                    };
                    let cfg = NoiseSweepConfig {
                        fracs,
                        trials,
                        base: s.noise,
                        detect: s.detect,
                        pnp: s.pnp,
                        dense,
                        seed,
                    };
                    experiment_noise_sweep(&scene, &cfg)?
                }
                Experiment::Patch => {
                    if sizes.iter().any(|v| !(*v > 0.0)) {
                        return Err(CliError::Usage("sizes must be positive".into()));
                    }
                    let cfg = PatchSweepConfig {
                        sizes,
                        trials,
                        noise: s.noise,
                        detect: s.detect,
                        pnp: s.pnp,
                        seed,
                    };
                    experiment_patch_sweep(&scene, &cfg)?
                }
            };
            save_text(&out, &table.to_csv())?;
            if let Some(p) = plot {
                save_text(&p, &table.to_plot_data())?;
            }
            print!("{}", summary_table(&table));
            Ok(())
        }
        Command::BenchLoss {
            height,
            width,
            classes,
            dim,
            active,
        } => {
            let p = CostParams {
                height,
                width,
                classes,
                dim,
                active,
            };
            if [height, width, classes, dim, active].contains(&0) || active > classes {
                return Err(CliError::Usage(
                    "all sizes must be positive and active ≤ classes".into(),
                ));
            }
            let (ce, triplet) = cost_model(&p);
            print!("{}", format_cost_table(&p, &ce, &triplet));
            Ok(())
        }
        Command::Losscheck {
            instances,
            max_side,
            labels,
            dim,
            tol,
        } => {
            positive("instances", instances)?;
            positive("max-side", max_side)?;
            positive("dim", dim)?;
            if labels < 2 {
                return Err(CliError::Usage("labels must be at least 2".into()));
            }
            let params = GradCheckParams {
                instances,
                max_side,
                labels,
                dim,
                seed,
            };
            let r = run_gradient_check(&params)?;
            println!(
                "instances {}\ncomponents {}\nmax_rel_err_embedding {:e}\nmax_rel_err_prototype {:e}\nmax_rel_err_vote {:e}",
                r.instances, r.components_checked, r.max_rel_err_embedding, r.max_rel_err_prototype, r.max_rel_err_vote
            );
            if !(r.max_rel_err() < tol) {
                return Err(CliError::Pipeline(format!(
                    "max relative error {:e} exceeds {tol:e}",
                    r.max_rel_err()
                )));
            }
            Ok(())
        }
        Command::FitToy {
            side,
            toy_patch_size,
            steps,
            lr,
            mining,
            out,
            trace,
            config,
            loss,
        } => {
            let s = resolve(&config, &[&loss])?;
            positive("steps", steps)?;
            if side < 8 || !(toy_patch_size > 0.0) || !(lr > 0.0) {
                return Err(CliError::Usage("side must be ≥ 8; patch size and lr positive".into()));
            }
            output(&out)?;
            if let Some(t) = &trace {
                output(t)?;
            }
            let gt = toy_label_map(side, toy_patch_size, seed)?;
            let cfg = TripletConfig {
                seed,
                mining: match mining {
                    Mining::Knn => NegativeMining::Knn,
                    Mining::Uniform => NegativeMining::Uniform,
                },
                ..s.triplet
            };
            let fit = fit_toy_segmentation(&gt, s.dim, &cfg, steps, lr)?;
            save_prototypes(&out, &Prototypes::from_bank(&fit.bank))?;
            if let Some(t) = trace {
                let mut text = String::from("step,accuracy\n");
                for (i, a) in fit.accuracy_trace.iter().enumerate() {
                    let _ = writeln!(text, "{},{a}", i + 1);
                }
                save_text(&t, &text)?;
            }
            let steps_to = |x: f64| fit.steps_to(x).map_or("never".to_string(), |s| s.to_string());
            println!(
                "labels {}\nfinal_accuracy {:.4}\nsteps_to_95 {}\nsteps_to_99 {}",
                gt.active_labels().len(),
                fit.accuracy_trace.last().copied().unwrap_or(0.0),
                steps_to(0.95),
                steps_to(0.99)
            );
            Ok(())
        }
    }
}

fn summary_table(table: &SweepTable) -> String {
    let mut out = format!(
        "{:<14} {:>6} {:>8} {:>14} {:>14} {:>10} {:>10} {:>10}\n",
        "setting", "trials", "failures", "med_pos_err_m", "med_ang_err_deg", "dropped", "det_err_px", "landmarks"
    );
    for s in &table.summaries {
        let SettingSummary {
            setting,
            trials,
            failures,
            median_pos_err,
            median_ang_err,
            mean_dropped,
            ..
        } = s;
        let det = s.mean_detection_error_px.map_or("-".into(), |d| format!("{d:.4}"));
        let lms = s.landmark_count.map_or("-".into(), |n| n.to_string());
        let _ = writeln!(
            out,
            "{setting:<14} {trials:>6} {failures:>8} {median_pos_err:>14.4e} {median_ang_err:>14.4e} {mean_dropped:>10.2} {det:>10} {lms:>10}"
        );
    }
    out
}
