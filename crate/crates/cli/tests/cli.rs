mod common;

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use common::*;
use serde_json::{json, Value};
use trajex_core::annot::{Direction, Mode, ObjectKind};
use trajex_core::scaling::{RatioModel, TrajectoryPoint};
use trajex_core::trace::{TraceOutput, TrajectoryRecord};

fn p(s: &Path) -> &str {
    s.to_str().unwrap()
}

#[test]
fn rectify_identity_reproduces_frames() {
    let dir = tempfile::tempdir().unwrap();
    let f = fronto(dir.path(), 6, None);
    let out = dir.path().join("out");
    let o = trajex(["rectify", p(&f.project), p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for i in 1..=6 {
        let name = format!("frame_{i:04}.png");
        assert_eq!(std::fs::read(out.join(&name)).unwrap(), std::fs::read(dir.path().join("frames").join(&name)).unwrap());
    }
}

#[test]
fn rectify_frame_range() {
    let dir = tempfile::tempdir().unwrap();
    let f = fronto(dir.path(), 6, None);
    let out = dir.path().join("out");
    let o = trajex(["rectify", p(&f.project), p(&out), "--frames", "5..5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let names: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, ["frame_0005.png"]);

    let o = trajex(["rectify", p(&f.project), p(&out), "--frames", "5..9"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn rectify_warps_with_the_lane_quad() {
    let dir = tempfile::tempdir().unwrap();
    let f = fronto(dir.path(), 2, None);
    let mut doc = read_json(&f.project);
    // Shift the view 10 px to the left: target x = source x − 10.
    doc["rectify_dst_rect"] = json!([[-10, 0], [90, 0], [90, 300], [-10, 300]]);
    write_json(&f.project, &doc);
    let out = dir.path().join("out");
    let o = trajex(["rectify", p(&f.project), p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let src = trajex_core::warp::Image::load(&dir.path().join("frames/frame_0002.png")).unwrap();
    let dst = trajex_core::warp::Image::load(&out.join("frame_0002.png")).unwrap();
    assert_eq!((dst.width(), dst.height()), (100, 300));
    assert_eq!(dst.pixel(0, 7), src.pixel(10, 7));
    assert_eq!(dst.pixel(95, 7), &[0]);
}

#[test]
fn rectify_rejects_degenerate_quad() {
    let dir = tempfile::tempdir().unwrap();
    let f = fronto(dir.path(), 3, None);
    let mut doc = read_json(&f.project);
    doc["rectify_src_quad"] = json!([[0, 0], [50, 0], [100, 0], [0, 300]]);
    write_json(&f.project, &doc);
    let o = trajex(["rectify", p(&f.project), p(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("rectify_src_quad") && err.contains("collinear"), "{err}");
}

#[test]
fn io_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.json");
    assert_eq!(trajex(["trace", p(&missing), p(&dir.path().join("t.json"))]).status.code(), Some(2));
    assert_eq!(trajex(["export", p(&missing), p(&dir.path().join("t.csv"))]).status.code(), Some(2));
    assert_eq!(trajex(["plot", p(&missing), p(&dir.path().join("t.svg"))]).status.code(), Some(2));

    let f = fronto(dir.path(), 3, None);
    std::fs::remove_dir_all(dir.path().join("frames")).unwrap();
    assert_eq!(trajex(["trace", p(&f.project), p(&dir.path().join("t.json"))]).status.code(), Some(2));
}

#[test]
fn trace_fronto_parallel_matches_constant_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let f = fronto(dir.path(), 40, Some((40, "car")));
    let out = dir.path().join("trace.json");
    let o = trajex(["trace", p(&f.project), p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = read_json(&out);
    assert_eq!(t["hit_frame"], 40);
    assert_eq!(t["hit_frame_inferred"], false);
    let ids: Vec<&str> = t["trajectories"].as_array().unwrap().iter().map(|r| r["object_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["car", "ped"]);

    let car = &t["trajectories"][0]["points"];
    let last = *f.car_y_px.last().unwrap();
    for (i, pt) in car.as_array().unwrap().iter().enumerate() {
        let expected = FRONTO_M_PER_PX * (last - f.car_y_px[i]);
        let y = pt["y_m"].as_f64().unwrap();
        assert!((y - expected).abs() <= 1e-9 * expected.abs().max(1.0), "frame {}: {y} vs {expected}", i + 1);
        assert_eq!(pt["x_m"].as_f64().unwrap(), 0.0);
    }
    let ped = &t["trajectories"][1]["points"];
    let (_, ped_last_x, _) = *f.ped.last().unwrap();
    for (pt, &(frame, x, _)) in ped.as_array().unwrap().iter().zip(&f.ped) {
        assert_eq!(pt["frame_index"], frame);
        let expected = FRONTO_M_PER_PX * (x - ped_last_x);
        assert!((pt["x_m"].as_f64().unwrap() - expected).abs() <= 1e-9 * expected.abs().max(1.0));
    }
}

#[test]
fn trace_infers_hit_when_absent() {
    let dir = tempfile::tempdir().unwrap();
    let f = fronto(dir.path(), 40, None);
    let out = dir.path().join("trace.json");
    assert!(trajex(["trace", p(&f.project), p(&out)]).status.success());
    let t = read_json(&out);
    assert_eq!(t["hit_frame_inferred"], true);
    let argmin = f
        .ped
        .iter()
        .map(|&(frame, x, y)| ((x - f.car_x_px).hypot(y - f.car_y_px[frame as usize - 1]), frame))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .unwrap()
        .1;
    assert_eq!(t["hit_frame"], argmin);
}

#[test]
fn trace_reports_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let f = fronto(dir.path(), 5, None);
    let mut doc = read_json(&f.project);
    doc["annotations"][2]["marks"][0]["x"] = json!(250);
    write_json(&f.project, &doc);
    let out = dir.path().join("trace.json");
    let o = trajex(["trace", p(&f.project), p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mark_out_of_bounds"), "{}", stderr(&o));
    assert!(!out.exists());
}

fn record(id: &str, pts: &[(f64, f64)], approximate: bool) -> TrajectoryRecord {
    TrajectoryRecord {
        object_id: id.into(),
        kind: ObjectKind::Vehicle,
        primary_direction: Direction::Longitudinal,
        approximate,
        points: pts
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| TrajectoryPoint { frame_index: i as u32 + 1, time_s: i as f64 / 10.0, x_m: x, y_m: y })
            .collect(),
        speeds_mps: vec![1.0; pts.len()],
        headings_rad: vec![0.0; pts.len()],
    }
}

fn trace_file(dir: &Path, trajectories: Vec<TrajectoryRecord>) -> std::path::PathBuf {
    let t = TraceOutput {
        project_id: "x".into(),
        mode: Mode::Surveillance,
        fps: 10.0,
        hit_frame: 1,
        hit_frame_inferred: false,
        lateral_ratio_m_per_px: 0.1,
        ratio_model: RatioModel::constant(0.1, 10),
        trajectories,
        events: vec![],
    };
    let path = dir.join("trace.json");
    std::fs::write(&path, t.to_json()).unwrap();
    path
}

#[test]
fn export_csv() {
    let dir = tempfile::tempdir().unwrap();
    let pts: Vec<(f64, f64)> = (0..10).map(|i| (0.0, i as f64)).collect();
    let t = trace_file(dir.path(), vec![record("a", &pts, false), record("b", &pts, false)]);
    let csv = dir.path().join("out.csv");
    assert!(trajex(["export", p(&t), p(&csv)]).status.success());
    let first = std::fs::read(&csv).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(text.lines().count(), 21);
    assert_eq!(text.lines().nth(1).unwrap(), "a,1,0.000000,0.000000,0.000000,1.000000,0.000000");
    assert!(text.lines().nth(11).unwrap().starts_with("b,1,"));
    assert!(trajex(["export", p(&t), p(&csv)]).status.success());
    assert_eq!(std::fs::read(&csv).unwrap(), first);

    let empty = trace_file(dir.path(), vec![]);
    assert!(trajex(["export", p(&empty), p(&csv)]).status.success());
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), "object_id,frame_index,time_s,x_m,y_m,speed_mps,heading_rad\n");

    std::fs::write(dir.path().join("junk.json"), "{}").unwrap();
    assert_eq!(trajex(["export", p(&dir.path().join("junk.json")), p(&csv)]).status.code(), Some(1));
}

fn glyphs(svg: &str) -> Vec<(f64, f64)> {
    svg.lines()
        .filter(|l| l.contains(r#"class="glyph""#))
        .map(|l| {
            let attr = |name: &str| -> f64 {
                let k = format!(" {name}=\"");
                let r = &l[l.find(&k).unwrap() + k.len()..];
                r[..r.find('"').unwrap()].parse().unwrap()
            };
            (attr("cx"), attr("cy"))
        })
        .collect()
}

#[test]
fn plot_svg() {
    let dir = tempfile::tempdir().unwrap();
    let still = trace_file(dir.path(), vec![record("s", &[(0.0, 0.0); 5], false)]);
    let svg = dir.path().join("out.svg");
    assert!(trajex(["plot", p(&still), p(&svg), "--style", "points"]).status.success());
    let g = glyphs(&std::fs::read_to_string(&svg).unwrap());
    assert_eq!(g.len(), 5);
    assert!(g.iter().all(|&q| q == g[0]));

    // Constant speed: 1.3 m per frame along a diagonal.
    let pts: Vec<(f64, f64)> = (0..12).map(|i| (i as f64 * 0.5, i as f64 * 1.2)).collect();
    let moving = trace_file(dir.path(), vec![record("m", &pts, false)]);
    assert!(trajex(["plot", p(&moving), p(&svg)]).status.success());
    let first = std::fs::read(&svg).unwrap();
    let g = glyphs(std::str::from_utf8(&first).unwrap());
    let gaps: Vec<f64> = g.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).collect();
    for gap in &gaps {
        assert!((gap - gaps[0]).abs() < 1e-6, "{gaps:?}");
    }
    assert!(trajex(["plot", p(&moving), p(&svg)]).status.success());
    assert_eq!(std::fs::read(&svg).unwrap(), first);
}

fn free_port() -> SocketAddr {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap()
}

fn http_get(addr: SocketAddr, path: &str) -> std::io::Result<String> {
    let mut s = TcpStream::connect(addr)?;
    write!(s, "GET {path} HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n")?;
    let mut out = String::new();
    s.read_to_string(&mut out)?;
    Ok(out)
}

#[test]
fn serve_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    fronto(dir.path(), 3, None);
    let addr = free_port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_trajex"))
        .args(["serve", p(dir.path()), "--bind", &addr.to_string()])
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(10);
    let res = loop {
        match http_get(addr, "/healthz") {
            Ok(r) => break r,
            Err(_) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(50)),
            Err(e) => panic!("server did not start: {e}"),
        }
    };
    assert!(res.starts_with("HTTP/1.1 200") && res.ends_with("ok"), "{res}");
    let list = http_get(addr, "/projects").unwrap();
    let body: Value = serde_json::from_str(list.split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body[0]["id"], "fronto");

    // A second server on the same port cannot bind.
    let o = trajex(["serve", p(dir.path()), "--bind", &addr.to_string()]);
    assert_eq!(o.status.code(), Some(2));

    let kill = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(kill.success());
    let status = child.wait().unwrap();
    assert!(status.success(), "{status:?}");
    assert!(TcpStream::connect(addr).is_err());
}
