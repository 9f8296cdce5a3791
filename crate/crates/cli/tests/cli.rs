use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use splat4d::io::sidecar::read_separation;
use splat4d::io::synth::read_ground_truth;
use splat4d::io::{read_rgb_png, read_scene, read_trajectory, write_rgb_png, write_scene, write_trajectory};
use splat4d::trajectory::Trajectory;
use splat4d::{CameraPose, Gaussian4D, Grid, Intrinsics, KeyframeField, Quat, Scene, Vec3};

fn splat4d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splat4d"))
        .args(args)
        .env_remove("SPLAT4D_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = splat4d(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    splat4d(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Value of `key=` in a key=value summary line.
fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no `{key}` in `{line}`"))
        .parse()
        .unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

const SMALL: &[&str] = &[
    "--width",
    "32",
    "--height",
    "24",
    "--focal",
    "30",
    "--grid",
    "5",
    "--keyframes",
    "4",
];

fn synth(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["synth", "--out", s(&out)];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    ok(&args);
    out
}

fn keyframe_path(dir: &Path, scene: &Path) -> PathBuf {
    let traj = dir.join("kf_traj.json");
    ok(&["path", "--scene", s(scene), "--kind", "keyframes", "--out", s(&traj)]);
    traj
}

#[test]
fn synth_writes_scene_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth(tmp.path(), "a", &[]);
    let b = synth(tmp.path(), "b", &[]);
    assert!(a.join("scene.json").is_file());
    for i in 0..4 {
        assert!(a.join(format!("kf_{i:04}.ply")).is_file());
    }
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
    let c = tmp.path().join("c");
    let mut args = vec!["--seed", "9", "synth", "--out", s(&c)];
    args.extend_from_slice(SMALL);
    ok(&args);
    assert_ne!(dir_bytes(&a), dir_bytes(&c));

    let none = synth(tmp.path(), "none", &["--dynamic", "0"]);
    let truth = read_ground_truth(&none.join("ground_truth.json")).unwrap();
    assert_eq!(truth.dynamic_objects(), 0);

    assert_eq!(
        code(&["synth", "--keyframes", "0", "--out", s(&tmp.path().join("bad"))]),
        2
    );
    assert_eq!(
        code(&["synth", "--motion", "wobble", "--out", s(&tmp.path().join("bad"))]),
        2
    );
}

#[test]
fn synth_accepts_a_spec_file() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"keyframes": 3, "grid": 3, "background": false, "width": 20, "height": 16, "focal": 18.0}"#,
    )
    .unwrap();
    let out = tmp.path().join("scene");
    let line = ok(&["synth", "--spec", s(&spec), "--out", s(&out)]);
    assert_eq!(field(&line, "keyframes"), 3.0);
    assert_eq!(read_scene(&out).unwrap().intrinsics.width, 20);
    assert_eq!(code(&["synth", "--spec", s(&spec), "--grid", "4", "--out", s(&out)]), 2);
    std::fs::write(&spec, r#"{"grids": 3}"#).unwrap();
    assert_eq!(code(&["synth", "--spec", s(&spec), "--out", s(&out)]), 2);
}

#[test]
fn render_along_keyframes_reproduces_keyframe_renders() {
    let tmp = tempfile::tempdir().unwrap();
    let scene_dir = synth(tmp.path(), "scene", &[]);
    let traj = keyframe_path(tmp.path(), &scene_dir);
    let out = tmp.path().join("frames");
    let line = ok(&["render", "--scene", s(&scene_dir), "--traj", s(&traj), "--out", s(&out)]);
    assert_eq!(field(&line, "frames"), 4.0);

    let scene = read_scene(&scene_dir).unwrap();
    let expected = tmp.path().join("expected");
    std::fs::create_dir(&expected).unwrap();
    for (i, kf) in scene.keyframes.iter().enumerate() {
        let opts = splat4d::raster::RenderOptions::for_intrinsics(&scene.intrinsics);
        let target = splat4d::raster::render(&kf.gaussians, &kf.camera, &scene.intrinsics, &opts).unwrap();
        splat4d::io::pack::write_render_frame(&expected, i, &target).unwrap();
    }
    assert_eq!(dir_bytes(&out), dir_bytes(&expected));

    let single = tmp.path().join("single");
    ok(&[
        "--threads",
        "1",
        "render",
        "--scene",
        s(&scene_dir),
        "--traj",
        s(&traj),
        "--out",
        s(&single),
    ]);
    assert_eq!(dir_bytes(&out), dir_bytes(&single));

    let big = tmp.path().join("big");
    ok(&[
        "render",
        "--scene",
        s(&scene_dir),
        "--traj",
        s(&traj),
        "--width",
        "64",
        "--height",
        "48",
        "--out",
        s(&big),
    ]);
    let img = read_rgb_png(&big.join("frame_0000_rgb.png")).unwrap();
    assert_eq!(img.dims(), (64, 48));
    let depth = splat4d::io::read_depth_pfm(&big.join("frame_0000_depth.pfm")).unwrap();
    assert_eq!(depth.dims(), (64, 48));
}

#[test]
fn render_rejects_out_of_range_times() {
    let tmp = tempfile::tempdir().unwrap();
    let scene_dir = synth(tmp.path(), "scene", &[]);
    let scene = read_scene(&scene_dir).unwrap();
    let poses = vec![CameraPose::identity(1.0), CameraPose::identity(42.5)];
    let traj = tmp.path().join("far.json");
    write_trajectory(&traj, &Trajectory::new(poses, scene.intrinsics).unwrap()).unwrap();
    let out = splat4d(&[
        "render",
        "--scene",
        s(&scene_dir),
        "--traj",
        s(&traj),
        "--out",
        s(&tmp.path().join("f")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("42.5"));
    assert!(!tmp.path().join("f").join("frame_0000_rgb.png").exists());
    assert_eq!(
        code(&[
            "render",
            "--scene",
            s(&tmp.path().join("missing")),
            "--traj",
            s(&traj),
            "--out",
            s(&tmp.path().join("f"))
        ]),
        2
    );
}

const STILL: &[&str] = &["--max-translation", "0", "--max-rotation", "0", "--lookat-blend", "0"];

#[test]
fn degrade_cull_without_perturbation_matches_clean_render() {
    let tmp = tempfile::tempdir().unwrap();
    let scene_dir = synth(
        tmp.path(),
        "scene",
        &["--static", "1", "--dynamic", "0", "--no-background"],
    );
    let traj = keyframe_path(tmp.path(), &scene_dir);
    let clean = tmp.path().join("clean");
    ok(&[
        "render",
        "--scene",
        s(&scene_dir),
        "--traj",
        s(&traj),
        "--out",
        s(&clean),
    ]);
    let pack = tmp.path().join("pack");
    let mut args = vec![
        "degrade",
        "--scene",
        s(&scene_dir),
        "--traj",
        s(&traj),
        "--mode",
        "cull",
        "--out",
        s(&pack),
    ];
    args.extend_from_slice(STILL);
    let line = ok(&args);
    assert_eq!(field(&line, "culled"), 0.0);
    for i in 0..4 {
        let name = format!("frame_{i:04}_rgb.png");
        assert_eq!(
            std::fs::read(clean.join(&name)).unwrap(),
            std::fs::read(pack.join(&name)).unwrap()
        );
    }
    assert!(pack.join("pack.json").is_file());
    assert!(pack.join("novel_trajectory.json").is_file());
    assert_eq!(
        read_trajectory(&pack.join("novel_trajectory.json")).unwrap(),
        read_trajectory(&traj).unwrap()
    );
}

#[test]
fn degrade_kernel_size_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let scene_dir = synth(tmp.path(), "scene", &[]);
    let traj = keyframe_path(tmp.path(), &scene_dir);
    let run = |kernel: &str, name: &str, extra: &[&str]| {
        let out = tmp.path().join(name);
        let mut args = vec![
            "degrade",
            "--scene",
            s(&scene_dir),
            "--traj",
            s(&traj),
            "--mode",
            "filter",
            "--kernel",
            kernel,
            "--out",
            s(&out),
        ];
        args.extend_from_slice(extra);
        (ok(&args), out)
    };
    let (small, _) = run("3", "k3", STILL);
    let (large, _) = run("9", "k9", STILL);
    assert!(
        field(&large, "mean_displacement") > field(&small, "mean_displacement"),
        "{small} / {large}"
    );

    let (_, a) = run("3", "s1", &[]);
    let (_, b) = run("3", "s2", &[]);
    assert_eq!(dir_bytes(&a), dir_bytes(&b));

    assert_eq!(
        code(&[
            "degrade",
            "--scene",
            s(&scene_dir),
            "--traj",
            s(&traj),
            "--kernel",
            "4",
            "--out",
            s(&tmp.path().join("x"))
        ]),
        2
    );
    assert_eq!(
        code(&[
            "degrade",
            "--scene",
            s(&scene_dir),
            "--traj",
            s(&traj),
            "--mode",
            "smear",
            "--out",
            s(&tmp.path().join("x"))
        ]),
        2
    );
}

#[test]
fn degrade_with_camera_at_scene_center_is_a_domain_error() {
    let tmp = tempfile::tempdir().unwrap();
    let k = Intrinsics::centered(20.0, 16, 12);
    let c = Vec3::repeat(0.5);
    let gs = [(-1.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 0.0, -3.0), (0.0, 0.0, 3.0)]
        .iter()
        .map(|&(x, y, z)| Gaussian4D::isotropic(Vec3::new(x, y, z), 0.2, c, 0.8))
        .collect();
    let scene = Scene::new(k, vec![KeyframeField::new(CameraPose::identity(0.0), gs).unwrap()]).unwrap();
    let scene_dir = tmp.path().join("scene");
    write_scene(&scene_dir, &scene).unwrap();
    let traj = tmp.path().join("t.json");
    write_trajectory(&traj, &Trajectory::new(vec![CameraPose::identity(0.0)], k).unwrap()).unwrap();
    assert_eq!(
        code(&[
            "degrade",
            "--scene",
            s(&scene_dir),
            "--traj",
            s(&traj),
            "--out",
            s(&tmp.path().join("p"))
        ]),
        3
    );
}

#[test]
fn separate_reports_and_writes_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    let still = synth(tmp.path(), "still", &["--dynamic", "0"]);
    let sidecar = tmp.path().join("still.sep");
    let line = ok(&["separate", "--scene", s(&still), "--out", s(&sidecar)]);
    assert_eq!(field(&line, "static_pct"), 100.0);
    assert_eq!(field(&line, "dynamic"), 0.0);

    let half = synth(
        tmp.path(),
        "half",
        &[
            "--static",
            "0",
            "--dynamic",
            "1",
            "--motion",
            "half-static",
            "--speed",
            "1.0",
        ],
    );
    let sidecar = tmp.path().join("half.sep");
    ok(&["separate", "--scene", s(&half), "--out", s(&sidecar)]);
    let result = read_separation(&sidecar).unwrap();
    let truth = read_ground_truth(&half.join("ground_truth.json")).unwrap();
    for k in 0..4 {
        for i in (0..truth.gaussian_count()).filter(|&i| truth.is_dynamic(i)) {
            assert!(result.is_dynamic(k, i), "keyframe {k} gaussian {i}");
        }
    }

    let line = ok(&["separate", "--scene", s(&half), "--eta", "1e9", "--out", s(&sidecar)]);
    assert_eq!(field(&line, "dynamic"), 0.0);
    assert_eq!(
        code(&["separate", "--scene", s(&half), "--eta", "-1", "--out", s(&sidecar)]),
        2
    );
}

#[test]
fn track_links_constant_velocity_particles() {
    let tmp = tempfile::tempdir().unwrap();
    let scene_dir = synth(
        tmp.path(),
        "lin",
        &[
            "--static",
            "0",
            "--dynamic",
            "2",
            "--motion",
            "linear",
            "--no-background",
        ],
    );
    let out = tmp.path().join("tracks.txt");
    let line = ok(&["track", "--scene", s(&scene_dir), "--radius", "0.05", "--out", s(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count() as f64, field(&line, "points"));
    let scene = read_scene(&scene_dir).unwrap();
    assert_eq!(field(&line, "tracks"), scene.keyframes[0].gaussians.len() as f64);
    let mut by_track: std::collections::BTreeMap<usize, Vec<(usize, usize)>> = Default::default();
    for l in text.lines() {
        let v: Vec<&str> = l.split_whitespace().collect();
        assert_eq!(v.len(), 6);
        by_track
            .entry(v[0].parse().unwrap())
            .or_default()
            .push((v[1].parse().unwrap(), v[2].parse().unwrap()));
    }
    for entries in by_track.values() {
        assert_eq!(entries.len(), 4);
        assert!(entries
            .iter()
            .enumerate()
            .all(|(f, &(frame, idx))| frame == f && idx == entries[0].1));
    }
}

#[test]
fn track_radius_and_keyframe_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let k = Intrinsics::centered(20.0, 16, 12);
    let c = Vec3::repeat(0.5);
    let field_at = |t: f64| {
        let gs = (0..5)
            .map(|i| Gaussian4D::isotropic(Vec3::new(i as f64 * 0.3 + 0.01 * t, 0.0, 4.0), 0.1, c, 0.8))
            .collect();
        KeyframeField::new(CameraPose::identity(t), gs).unwrap()
    };
    let drifting = tmp.path().join("drift");
    write_scene(
        &drifting,
        &Scene::new(k, (0..3).map(|t| field_at(t as f64)).collect()).unwrap(),
    )
    .unwrap();
    let out = tmp.path().join("t.txt");
    let line = ok(&["track", "--scene", s(&drifting), "--radius", "1e-12", "--out", s(&out)]);
    assert_eq!(field(&line, "tracks"), 15.0);
    assert_eq!(field(&line, "longest"), 1.0);

    let single = tmp.path().join("single");
    write_scene(&single, &Scene::new(k, vec![field_at(0.0)]).unwrap()).unwrap();
    assert_eq!(
        code(&["track", "--scene", s(&single), "--radius", "0.1", "--out", s(&out)]),
        2
    );
    assert_eq!(
        code(&["track", "--scene", s(&drifting), "--radius", "0", "--out", s(&out)]),
        2
    );
}

fn write_path(path: &Path, jitter: f64) {
    let k = Intrinsics::centered(20.0, 16, 12);
    let poses = (0..30)
        .map(|i| {
            let wobble = jitter * ((i * 7919 % 13) as f64 / 6.0 - 1.0);
            CameraPose::from_center(Quat::IDENTITY, Vec3::new(0.1 * i as f64, wobble, 0.0), i as f64)
        })
        .collect();
    write_trajectory(path, &Trajectory::new(poses, k).unwrap()).unwrap();
}

#[test]
fn stabilize_smooths_jitter() {
    let tmp = tempfile::tempdir().unwrap();
    let shaky = tmp.path().join("shaky.json");
    write_path(&shaky, 0.05);
    let out = tmp.path().join("smooth.json");
    let line = ok(&["stabilize", "--traj", s(&shaky), "--window", "5", "--out", s(&out)]);
    assert!(field(&line, "jerk_reduction_pct") >= 50.0, "{line}");

    ok(&["stabilize", "--traj", s(&shaky), "--window", "1", "--out", s(&out)]);
    assert_eq!(read_trajectory(&out).unwrap(), read_trajectory(&shaky).unwrap());

    let line_path = tmp.path().join("line.json");
    write_path(&line_path, 0.0);
    let line = ok(&["stabilize", "--traj", s(&line_path), "--window", "5", "--out", s(&out)]);
    assert!(field(&line, "jerk_reduction_pct").abs() < 1e-6, "{line}");

    assert_eq!(
        code(&["stabilize", "--traj", s(&shaky), "--window", "4", "--out", s(&out)]),
        2
    );
}

fn write_flat(dir: &Path, names: &[&str], byte: u8) {
    std::fs::create_dir_all(dir).unwrap();
    let v = byte as f64 / 255.0;
    let img = Grid::new(16, 12, Vec3::repeat(v));
    for n in names {
        write_rgb_png(&dir.join(n), &img).unwrap();
    }
}

#[test]
fn eval_pairs_frames_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    write_flat(&a, &["f0.png", "f1.png"], 51);
    write_flat(&b, &["f0.png", "f1.png"], 76);
    let out = ok(&["eval", "--ref", s(&a), "--test", s(&a)]);
    let mean = out.lines().last().unwrap();
    assert!(mean.starts_with("eval mean"));
    assert_eq!(field(mean, "psnr"), 100.0);
    assert!((field(mean, "ssim") - 1.0).abs() < 1e-12);

    let out = ok(&["eval", "--ref", s(&a), "--test", s(&b)]);
    assert_eq!(out.lines().filter(|l| l.starts_with("eval frame=")).count(), 2);
    let offset: f64 = 25.0 / 255.0;
    let expected = -20.0 * offset.log10();
    assert!((field(out.lines().last().unwrap(), "psnr") - expected).abs() < 1e-9);

    write_flat(&b, &["extra.png"], 0);
    let fail = splat4d(&["eval", "--ref", s(&a), "--test", s(&b)]);
    assert_eq!(fail.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&fail.stderr).contains("extra.png"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["render", "--bogus"]), 2);
    assert_eq!(code(&["--threads", "0", "stabilize", "--traj", "x", "--out", "y"]), 2);
    assert_eq!(code(&["path", "--scene", "/nonexistent", "--out", "/tmp/none.json"]), 2);
}
