//! Synthetic scenes with known ground truth.
//!
//! `generate` writes a complete input set for the build and query commands:
//! scene cloud, rendered depth frames with detections, a manifest, the
//! configuration, ground truth, benchmark items and a scripted transcript.
//! The transcript holds tag answers derived from ground truth and the
//! reasoning answers of [`oracle::Oracle`] recorded while the generated
//! scene is built and queried once.

pub mod oracle;
pub mod plan;
pub mod queries;
pub mod render;
pub mod scene;
pub mod spec;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::eval::{items_to_jsonl, BenchmarkItem};
use crate::geometry::io::save_ply;
use crate::geometry::rle::Rle;
use crate::geometry::PointCloud;
use crate::llm::{request_digest, CallLog, ScriptedClient, TranscriptEntry};
use crate::objects::{save_depth_png, DepthImage, Detection, FrameDetections, Pose};
use crate::pipeline::{build_scene_graph, FrameEntry, Manifest};
use crate::reasoning::run_pipeline;
use crate::tagging::content_listing;

use oracle::Oracle;
use queries::make_queries;
use render::{detected_mask, intrinsics, render, room_cameras, storey_primitives};
use scene::{layout, scene_cloud, GroundTruth};
use spec::{FixtureSpec, SpecError};

pub const DEPTH_SCALE: f64 = 0.001;
/// Fewest visible pixels for an object to be detected in a frame.
pub const MIN_DETECTION_PIXELS: usize = 30;
/// The simulated detector misses instances with less of their outline in view.
pub const MIN_VISIBLE_FRACTION: f64 = 0.6;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.json";
pub const GROUND_TRUTH: &str = "ground_truth.json";
pub const BENCHMARK: &str = "benchmark.jsonl";
pub const TRANSCRIPT: &str = "transcript.jsonl";
pub const SUMMARY: &str = "fixture.json";

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{0}")]
    Io(String),
    #[error("building the generated scene: {0}")]
    Build(String),
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> FixtureError + '_ {
    move |e| FixtureError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub floors: usize,
    pub rooms: usize,
    pub locations: usize,
    pub objects: usize,
}

/// What was generated, and what the pipeline recovered from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSummary {
    pub seed: u64,
    pub frames: usize,
    pub cloud_points: usize,
    pub ground_truth: Counts,
    pub recovered: Counts,
    pub matched_objects: usize,
    pub queries: usize,
    pub transcript_entries: usize,
}

/// Tag answers keyed by the request the build will send for each ground
/// truth room and location, assuming their contents are recovered exactly.
pub fn tag_transcript(gt: &GroundTruth, cfg: &PipelineConfig) -> Vec<TranscriptEntry> {
    let prompts = &cfg.reasoning.prompts;
    let mut out = Vec::new();
    let mut push = |template: &str, contents: &[String], answer: &str| {
        let listing = content_listing(contents);
        if listing.is_empty() {
            return;
        }
        let m = prompts.conversation(template, &[("contents", &listing)]);
        out.push(TranscriptEntry {
            request_digest: request_digest(&m),
            response_text: answer.to_owned(),
        });
    };
    for l in &gt.locations {
        let tags: Vec<String> = l.objects.iter().map(|&o| gt.objects[o as usize].tag.clone()).collect();
        push(&prompts.location_tag, &tags, &l.tag);
    }
    for r in &gt.rooms {
        let mut contents: Vec<String> = gt.objects.iter().filter(|o| o.room == r.id).map(|o| o.tag.clone()).collect();
        contents.extend(gt.locations.iter().filter(|l| l.room == r.id).map(|l| l.tag.clone()));
        push(&prompts.room_tag, &contents, &r.tag);
    }
    out
}

fn camera_positions(gt: &GroundTruth, spec: &FixtureSpec) -> Vec<(usize, Pose)> {
    gt.rooms
        .iter()
        .flat_map(|room| {
            let z = gt.storeys[room.storey].z_floor;
            room_cameras(&room.interior, z, &spec.camera).into_iter().map(move |p| (room.storey, p))
        })
        .collect()
}

/// Renders every camera and turns the id buffer into detections. The flags
/// mark objects detected in at least one frame.
fn frames<R: Rng>(gt: &GroundTruth, spec: &FixtureSpec, rng: &mut R) -> (Vec<(FrameDetections, DepthImage)>, Vec<bool>) {
    let cam = &spec.camera;
    let intr = intrinsics(cam);
    let prims: Vec<_> = (0..gt.storeys.len()).map(|s| storey_primitives(gt, s)).collect();
    let (w, h) = (cam.width, cam.height);
    let n = (w * h) as usize;
    let tags: Vec<&str> = gt.objects.iter().map(|o| o.tag.as_str()).collect();
    let mut out = Vec::new();
    let mut seen = vec![false; gt.objects.len()];
    for (frame_id, (storey, pose)) in camera_positions(gt, spec).into_iter().enumerate() {
        let img = render(&prims[storey], &intr, &pose, w, h);
        let data: Vec<u16> = img
            .depth
            .iter()
            .map(|d| d.map_or(0, |z| (z / DEPTH_SCALE).round().clamp(0.0, u16::MAX as f64) as u16))
            .collect();
        let mut detections = Vec::new();
        for o in &gt.objects {
            let Some(mask) = detected_mask(&img, o.id, &o.bbox, &intr, &pose, w, h) else {
                continue;
            };
            seen[o.id as usize] = true;
            let (mut u0, mut v0, mut u1, mut v1) = (w, h, 0, 0);
            for (idx, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
                let (u, v) = (idx as u32 % w, idx as u32 / w);
                u0 = u0.min(u);
                v0 = v0.min(v);
                u1 = u1.max(u);
                v1 = v1.max(v);
            }
            detections.push(Detection {
                tag: o.tag.clone(),
                score: rng.random_range(0.6..0.98),
                box2d: [u0, v0, u1 - u0 + 1, v1 - v0 + 1],
                mask: Rle::encode(&mask),
            });
        }
        // a low-confidence false positive that ingestion has to drop
        if rng.random_bool(0.3) {
            let (pw, ph) = (8.min(w), 8.min(h));
            let (u0, v0) = (rng.random_range(0..=w - pw), rng.random_range(0..=h - ph));
            let mut mask = vec![false; n];
            for v in v0..v0 + ph {
                for u in u0..u0 + pw {
                    mask[(v * w + u) as usize] = true;
                }
            }
            detections.push(Detection {
                tag: tags[rng.random_range(0..tags.len())].to_owned(),
                score: rng.random_range(0.05..0.25),
                box2d: [u0, v0, pw, ph],
                mask: Rle::encode(&mask),
            });
        }
        out.push((
            FrameDetections {
                frame_id: frame_id as u32,
                width: w,
                height: h,
                intrinsics: intr,
                pose,
                depth_scale: DEPTH_SCALE,
                detections,
            },
            DepthImage { width: w, height: h, data },
        ));
    }
    (out, seen)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), FixtureError> {
    let mut text = serde_json::to_string_pretty(v).expect("serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

/// Generates the scene described by `spec` into `out_dir`.
pub fn generate(spec: &FixtureSpec, out_dir: &Path) -> Result<FixtureSummary, FixtureError> {
    spec.validate()?;
    let cfg = PipelineConfig::patched(&spec.config).map_err(|e| SpecError {
        path: "config".into(),
        msg: e.to_string(),
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gt = layout(spec, &mut rng)?;
    let (frames, seen) = frames(&gt, spec, &mut rng);
    if let Some(o) = seen.iter().position(|&s| !s) {
        return Err(FixtureError::Build(format!("object {o} is not detected in any frame")));
    }
    let cloud = PointCloud::new(scene_cloud(&gt, spec.surface_density, spec.noise_fraction, &mut rng)).map_err(|e| FixtureError::Build(e.to_string()))?;

    std::fs::create_dir_all(out_dir.join("frames")).map_err(io_err(out_dir))?;
    let cloud_path = out_dir.join("scene.ply");
    save_ply(&cloud_path, &cloud).map_err(|e| FixtureError::Io(e.to_string()))?;
    let mut entries = Vec::new();
    for (det, depth) in &frames {
        let depth_rel = format!("frames/{:04}.depth.png", det.frame_id);
        let det_rel = format!("frames/{:04}.json", det.frame_id);
        save_depth_png(&out_dir.join(&depth_rel), depth).map_err(|e| FixtureError::Io(e.to_string()))?;
        write_json(&out_dir.join(&det_rel), det)?;
        entries.push(FrameEntry {
            frame_id: det.frame_id,
            rgb_path: None,
            depth_path: depth_rel,
            detections_path: det_rel,
        });
    }
    let manifest = Manifest {
        cloud_path: Some("scene.ply".into()),
        frames: entries,
        location_masks: Vec::new(),
    };
    write_json(&out_dir.join(MANIFEST), &manifest)?;
    write_json(&out_dir.join(CONFIG), &cfg)?;
    write_json(&out_dir.join(GROUND_TRUTH), &gt)?;

    let queries = make_queries(&gt, spec.queries, &mut rng)?;
    let items: Vec<BenchmarkItem> = queries
        .iter()
        .map(|q| BenchmarkItem {
            query: q.text.clone(),
            gt_box: gt.objects[q.target as usize].bbox,
        })
        .collect();
    let bench_path = out_dir.join(BENCHMARK);
    std::fs::write(&bench_path, items_to_jsonl(&items)).map_err(io_err(&bench_path))?;

    // Build once with the tag answers, then record the oracle's reasoning.
    let mut transcript = tag_transcript(&gt, &cfg);
    let tagger = ScriptedClient::new(transcript.clone()).map_err(|e| FixtureError::Build(e.to_string()))?;
    let (graph, _) = build_scene_graph(&manifest, out_dir, &cfg, &tagger, &CallLog::new(), 1).map_err(|e| FixtureError::Build(e.to_string()))?;
    let oracle = Oracle::new(&gt, &graph);
    for q in &queries {
        oracle.set_query(q, &gt.objects[q.target as usize].tag);
        let log = CallLog::new();
        if let Err(e) = run_pipeline(&graph, &q.text, &oracle, &log, &cfg.reasoning) {
            log::warn!("oracle run of {:?} failed: {e}", q.text);
        }
        for r in log.records() {
            if let Some(text) = r.response_text {
                transcript.push(TranscriptEntry {
                    request_digest: r.request_digest,
                    response_text: text,
                });
            }
        }
    }
    let scripted = ScriptedClient::new(transcript).map_err(|e| FixtureError::Build(e.to_string()))?;
    let t_path = out_dir.join(TRANSCRIPT);
    std::fs::write(&t_path, scripted.to_jsonl()).map_err(io_err(&t_path))?;

    let matched = queries.iter().filter(|q| oracle.node_of(q.target).is_some()).count();
    let summary = FixtureSummary {
        seed: spec.seed,
        frames: frames.len(),
        cloud_points: cloud.len(),
        ground_truth: Counts {
            floors: gt.storeys.len(),
            rooms: gt.rooms.len(),
            locations: gt.locations.len(),
            objects: gt.objects.len(),
        },
        recovered: Counts {
            floors: graph.floors.len(),
            rooms: graph.rooms.len(),
            locations: graph.locations.len(),
            objects: graph.objects.len(),
        },
        matched_objects: oracle::match_objects(&gt, &graph).len(),
        queries: queries.len(),
        transcript_entries: scripted.len(),
    };
    if summary.recovered != summary.ground_truth || matched < queries.len() {
        log::warn!("recovered scene differs from ground truth: {:?} vs {:?}", summary.recovered, summary.ground_truth);
    }
    write_json(&out_dir.join(SUMMARY), &summary)?;
    Ok(summary)
}
