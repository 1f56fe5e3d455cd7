#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use trajex_core::warp::Image;

pub fn trajex<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_trajex")).args(args).output().expect("spawn trajex")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn write_frames(dir: &Path, n: u32, w: usize, h: usize, f: impl Fn(u32, usize, usize) -> u8) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 1..=n {
        Image::from_fn_gray(w, h, |x, y| f(i, x, y)).unwrap().save_png(&dir.join(format!("frame_{i:04}.png"))).unwrap();
    }
}

pub fn write_json(path: &Path, v: &Value) {
    std::fs::write(path, serde_json::to_vec_pretty(v).unwrap()).unwrap();
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// Fronto-parallel scene at 0.1 m/px: a car receding up a 100×300 px view
/// with a constant 18 px (1.8 m) reference width, and a pedestrian crossing
/// laterally in the second half.
pub struct Fronto {
    pub project: PathBuf,
    pub frames: u32,
    /// Car pixel rows per frame, eighth-pixel exact.
    pub car_y_px: Vec<f64>,
    pub car_x_px: f64,
    pub ped: Vec<(u32, f64, f64)>,
}

pub const FRONTO_M_PER_PX: f64 = 0.1;

pub fn fronto(dir: &Path, frames: u32, hit: Option<(u32, &str)>) -> Fronto {
    write_frames(&dir.join("frames"), frames, 100, 300, |i, x, y| ((x + 2 * y + i as usize) % 251) as u8);
    let fps = 20.0;
    let car_y_px: Vec<f64> = (1..=frames)
        .map(|i| {
            let t = (i - 1) as f64 / fps;
            let y_m = 2.5 * t - 0.05 * t * t;
            280.0 - (8.0 * y_m / FRONTO_M_PER_PX).round() / 8.0
        })
        .collect();
    let car_x_px = 30.0;
    let ped: Vec<(u32, f64, f64)> =
        (frames / 2..=frames).map(|i| (i, 90.0 - ((i - frames / 2) as f64 * 50.0 / (frames / 2) as f64 * 8.0).round() / 8.0, 120.0)).collect();
    let annotations: Vec<Value> = (1..=frames)
        .map(|i| {
            let mut marks = vec![json!({"object_id": "car", "x": car_x_px, "y": car_y_px[(i - 1) as usize]})];
            if let Some(&(_, x, y)) = ped.iter().find(|p| p.0 == i) {
                marks.push(json!({"object_id": "ped", "x": x, "y": y}));
            }
            json!({"frame_index": i, "marks": marks, "ref_width_px": 18})
        })
        .collect();
    let rect = json!([[0, 0], [100, 0], [100, 300], [0, 300]]);
    let mut doc = json!({
        "id": "fronto",
        "mode": "surveillance",
        "fps": fps,
        "frame_dir": "frames",
        "real_reference_width_m": 1.8,
        "real_road_width_m": 10,
        "rectify_src_quad": rect,
        "rectify_dst_rect": rect,
        "objects": [
            {"id": "car", "kind": "vehicle", "primary_direction": "longitudinal"},
            {"id": "ped", "kind": "pedestrian", "primary_direction": "lateral"}
        ],
        "annotations": annotations
    });
    if let Some((frame, object)) = hit {
        doc["hit"] = json!({"frame_index": frame, "object_id": object});
    }
    let project = dir.join("fronto.json");
    write_json(&project, &doc);
    Fronto { project, frames, car_y_px, car_x_px, ped }
}
