//! Target generation: walks an annotation directory and writes, per image,
//! a 16-bit heat-map PGM, a theta-map CSV, and the anchors decoded back out
//! of the generated maps, plus one summary JSON for the whole run.

use std::path::{Path, PathBuf};

use laneforge::config::RunConfig;
use laneforge::dataio::{parse_culane_lines, parse_tusimple_json};
use laneforge::geometry::{lane_start_and_theta, resample_polyline, Anchor, SliceScheme};
use laneforge::targets::{decode_anchors, make_target_maps, TargetMaps};
use rayon::prelude::*;

use crate::{io_err, CliError};

/// One image's worth of parsed annotation: artifact base name + polylines.
struct ImageAnnotation {
    name: String,
    polylines: Vec<Vec<(f64, f64)>>,
}

struct ImageArtifacts {
    lanes: usize,
    skipped_lanes: usize,
    files: Vec<(String, Vec<u8>)>,
}

fn sanitize(rel: &str) -> String {
    rel.replace(['/', '\\'], "_")
}

/// Files one annotation file expands to. Text annotations hold one image;
/// JSON-lines files hold one image per record.
fn load_annotation_file(root: &Path, path: &Path) -> Result<Vec<ImageAnnotation>, String> {
    let rel = path
        .strip_prefix(root)
        .unwrap_or(path)
        .to_string_lossy()
        .into_owned();
    let text = std::fs::read_to_string(path).map_err(|e| format!("{rel}: {e}"))?;
    let name = path
        .file_name()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned();

    if name.ends_with(".lines.txt") {
        let polylines = parse_culane_lines(&text).map_err(|e| format!("{rel}: {e}"))?;
        let base = sanitize(rel.trim_end_matches(".lines.txt"));
        return Ok(vec![ImageAnnotation {
            name: base,
            polylines,
        }]);
    }

    // JSON lines: one record per nonblank line.
    let stem = sanitize(rel.trim_end_matches(".jsonl").trim_end_matches(".json"));
    let mut images = Vec::new();
    for (li, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_tusimple_json(line).map_err(|e| format!("{rel} line {}: {e}", li + 1))?;
        let polylines: Vec<Vec<(f64, f64)>> = rec
            .lanes
            .iter()
            .map(|xs| {
                xs.iter()
                    .enumerate()
                    .filter_map(|(i, x)| x.map(|x| (x, rec.h_samples[i])))
                    .collect()
            })
            .collect();
        let base = if rec.raw_file.is_empty() {
            format!("{stem}_line{}", li + 1)
        } else {
            format!("{stem}_{}", sanitize(&rec.raw_file))
        };
        images.push(ImageAnnotation {
            name: base,
            polylines,
        });
    }
    Ok(images)
}

fn render_pgm(maps: &TargetMaps) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", maps.grid_w, maps.grid_h).into_bytes();
    for &v in &maps.hm {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

fn render_theta_csv(maps: &TargetMaps) -> Vec<u8> {
    let mut out = String::new();
    for y in 0..maps.grid_h {
        let row: Vec<String> = (0..maps.grid_w)
            .map(|x| format!("{}", maps.theta_at(y, x)))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

fn render_anchors_csv(decoded: &[(Anchor, f64)]) -> Vec<u8> {
    let mut out = String::from("s_x,s_y,theta,score\n");
    for (a, score) in decoded {
        out.push_str(&format!("{},{},{},{}\n", a.s_x, a.s_y, a.theta, score));
    }
    out.into_bytes()
}

fn process_image(
    img: &ImageAnnotation,
    cfg: &RunConfig,
    scheme: &SliceScheme,
) -> Result<ImageArtifacts, String> {
    let mut anchors = Vec::new();
    let mut skipped = 0usize;
    for poly in &img.polylines {
        let lane = match resample_polyline(poly, scheme) {
            Ok(l) if l.present_count() >= 2 => l,
            // Too short to define a start and direction on this canvas.
            _ => {
                skipped += 1;
                continue;
            }
        };
        let (s_x, s_y, theta) =
            lane_start_and_theta(&lane, scheme).map_err(|e| format!("{}: {e}", img.name))?;
        anchors.push(Anchor::new(s_x, s_y, theta));
    }

    let (grid_w, grid_h) = cfg.grid_size();
    let tc = cfg.target_config().map_err(|e| e.to_string())?;
    let maps = make_target_maps(&anchors, &tc, grid_h, grid_w)
        .map_err(|e| format!("{}: {e}", img.name))?;
    let decoded = decode_anchors(
        &maps.hm,
        &maps.theta_map,
        grid_h,
        grid_w,
        anchors.len(),
        cfg.downsample,
    );

    Ok(ImageArtifacts {
        lanes: anchors.len(),
        skipped_lanes: skipped,
        files: vec![
            (format!("{}.hm.pgm", img.name), render_pgm(&maps)),
            (format!("{}.theta.csv", img.name), render_theta_csv(&maps)),
            (
                format!("{}.anchors.csv", img.name),
                render_anchors_csv(&decoded),
            ),
        ],
    })
}

pub fn run(annotations: &Path, out: Option<&Path>, cfg: &RunConfig) -> Result<(), CliError> {
    if !annotations.is_dir() {
        return Err(CliError::Usage(format!(
            "annotation directory {} does not exist",
            annotations.display()
        )));
    }
    let out_dir: PathBuf = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| "targets".into());
    std::fs::create_dir_all(&out_dir).map_err(|e| io_err("creating output directory", e))?;
    let scheme = cfg.scheme().map_err(|e| CliError::Usage(e.to_string()))?;

    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(annotations)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| {
            let name = p.file_name().unwrap_or_default().to_string_lossy();
            name.ends_with(".lines.txt") || name.ends_with(".json") || name.ends_with(".jsonl")
        })
        .collect();
    files.sort();

    // Parse and render in parallel; write and summarize in path order.
    let outcomes: Vec<Result<Vec<ImageArtifacts>, String>> = files
        .par_iter()
        .map(|path| {
            let images = load_annotation_file(annotations, path)?;
            images
                .iter()
                .map(|img| process_image(img, cfg, &scheme))
                .collect()
        })
        .collect();

    let mut images = 0usize;
    let mut lanes = 0usize;
    let mut skipped_lanes = 0usize;
    let mut failures: Vec<String> = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(artifacts) => {
                for art in artifacts {
                    for (name, bytes) in &art.files {
                        std::fs::write(out_dir.join(name), bytes)
                            .map_err(|e| io_err("writing artifact", e))?;
                    }
                    images += 1;
                    lanes += art.lanes;
                    skipped_lanes += art.skipped_lanes;
                }
            }
            Err(msg) => {
                eprintln!("error: {msg}");
                failures.push(msg);
            }
        }
    }

    let summary = serde_json::json!({
        "images": images,
        "lanes": lanes,
        "skipped_lanes": skipped_lanes,
        "failed_files": failures.len(),
        "failures": failures,
    });
    let mut text = serde_json::to_string_pretty(&summary).expect("summary is plain data");
    text.push('\n');
    std::fs::write(out_dir.join("summary.json"), text).map_err(|e| io_err("writing summary", e))?;
    println!(
        "gen-targets: {images} image(s), {lanes} lane(s), {} failure(s) -> {}",
        failures.len(),
        out_dir.display()
    );

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "{} annotation file(s) failed",
            failures.len()
        )))
    }
}
