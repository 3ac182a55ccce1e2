//! End-to-end checks of the `hvox` binary.

mod common;

use std::fs;
use std::process::Command;

fn hvox() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hvox"))
}

#[test]
fn validate_construct_query_render_bench() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("sphere.obj");
    fs::write(&mesh, common::sphere_obj(12, 24)).unwrap();

    let out = hvox().args(["validate", "D(4^3, 6) G(5)"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("D(4, 4, 4, 6) G(5)"));
    assert!(text.contains("512 x 512 x 512"));

    let out = hvox().args(["validate", "G(0)"]).output().unwrap();
    assert!(!out.status.success());

    let volume = dir.path().join("sphere.hvox");
    let out = hvox()
        .args(["construct"])
        .arg(&mesh)
        .args(["R(2, 2, 2) G(4)", "-o"])
        .arg(&volume)
        .args(["--whole-level-dedup", "--chunk-exp", "5"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(volume.exists());

    // the mesh is centered, so the middle of the volume is inside the shell
    let out = hvox()
        .arg("query")
        .arg(&volume)
        .args(["32", "32", "32"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("voxel (32, 32, 32)"));

    for flag in [None, Some("--restart-sv")] {
        let image = dir.path().join("sphere.ppm");
        let mut cmd = hvox();
        cmd.arg("render")
            .arg(&volume)
            .arg("-o")
            .arg(&image)
            .args(["--width", "64", "--height", "48"]);
        if let Some(flag) = flag {
            cmd.arg(flag);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let ppm = fs::read(&image).unwrap();
        assert!(ppm.starts_with(b"P6\n64 48\n255\n"));
        assert_eq!(ppm.len(), "P6\n64 48\n255\n".len() + 64 * 48 * 3);
    }

    let manifest = dir.path().join("bench.toml");
    fs::write(
        &manifest,
        r#"
[settings]
width = 32
height = 32
frames = 2
chunk_exp = 5

[[model]]
name = "sphere"
mesh = "sphere.obj"

[[run]]
format = "S(5)"

[[run]]
format = "G(5)"
whole_level_dedup = true
restart_sv = true
"#,
    )
    .unwrap();
    let csv = dir.path().join("results.csv");
    let out = hvox()
        .arg("bench")
        .arg(&manifest)
        .arg("-o")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "model,format,flags,size_bytes,frame_ms_mean,frame_ms_std,peak_mem_bytes"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("sphere,\"S(5)\",\"\","));
    assert!(lines[2].starts_with("sphere,\"G(5)\","));
    assert!(lines[2].contains("whole-level-dedup"));
}
