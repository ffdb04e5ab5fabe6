//! Synthetic sequences for integration and acceptance tests: deterministic
//! worlds of moving boxes with known ground truth.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtmot::io::ParsedDetections;
use rtmot::{BoundingBox, Detection, GroundTruthTrack, SequenceInfo};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub struct WorldConfig {
    pub objects: usize,
    pub frames: u64,
    pub width: f64,
    pub height: f64,
    pub box_w: f64,
    pub box_h: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Per-frame Gaussian position jitter (sigma, pixels).
    pub jitter: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            objects: 10,
            frames: 300,
            width: 1920.0,
            height: 1080.0,
            box_w: 36.0,
            box_h: 72.0,
            speed_min: 2.0,
            speed_max: 3.0,
            jitter: 0.3,
            seed: 42,
        }
    }
}

fn gauss(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    // Box-Muller keeps the dev-dependency list short
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random::<f64>();
    sigma * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

struct Mover {
    cx: f64,
    cy: f64,
    vx: f64,
    vy: f64,
}

fn simulate(movers: Vec<Mover>, cfg: &WorldConfig) -> Vec<GroundTruthTrack> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED);
    let mut movers = movers;
    let mut tracks: Vec<GroundTruthTrack> = (0..movers.len())
        .map(|i| GroundTruthTrack::new(i as u64 + 1))
        .collect();
    let margin = cfg.box_w.max(cfg.box_h);
    for frame in 1..=cfg.frames {
        for (i, m) in movers.iter_mut().enumerate() {
            let jx = gauss(&mut rng, cfg.jitter);
            let jy = gauss(&mut rng, cfg.jitter);
            let bbox = BoundingBox::new(
                m.cx - cfg.box_w / 2.0 + jx,
                m.cy - cfg.box_h / 2.0 + jy,
                cfg.box_w,
                cfg.box_h,
            );
            tracks[i].boxes.insert(frame, bbox);
            m.cx += m.vx;
            m.cy += m.vy;
            // bounce to stay on the canvas
            if m.cx < margin || m.cx > cfg.width - margin {
                m.vx = -m.vx;
                m.cx = m.cx.clamp(margin, cfg.width - margin);
            }
            if m.cy < margin || m.cy > cfg.height - margin {
                m.vy = -m.vy;
                m.cy = m.cy.clamp(margin, cfg.height - margin);
            }
        }
    }
    tracks
}

/// Objects in well-separated horizontal lanes moving with constant
/// velocity plus mild jitter. Paths never intersect.
pub fn parallel_lanes(cfg: &WorldConfig) -> Vec<GroundTruthTrack> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lane_gap = cfg.height / (cfg.objects as f64 + 1.0);
    let movers = (0..cfg.objects)
        .map(|i| {
            let speed = cfg.speed_min + rng.random::<f64>() * (cfg.speed_max - cfg.speed_min);
            Mover {
                cx: cfg.box_w + rng.random::<f64>() * 200.0,
                cy: lane_gap * (i as f64 + 1.0),
                vx: speed,
                vy: 0.0,
            }
        })
        .collect();
    simulate(movers, cfg)
}

/// Half the objects cross the canvas horizontally, half vertically, so
/// their paths intersect repeatedly.
pub fn crossing_paths(cfg: &WorldConfig) -> Vec<GroundTruthTrack> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let horizontal = cfg.objects / 2;
    let vertical = cfg.objects - horizontal;
    let mut movers = Vec::new();
    let lane_gap = cfg.height / (horizontal as f64 + 1.0);
    for i in 0..horizontal {
        let speed = cfg.speed_min + rng.random::<f64>() * (cfg.speed_max - cfg.speed_min);
        movers.push(Mover {
            cx: cfg.box_w * 2.0 + rng.random::<f64>() * 100.0,
            cy: lane_gap * (i as f64 + 1.0),
            vx: speed,
            vy: 0.0,
        });
    }
    let col_gap = cfg.width / (vertical as f64 + 1.0);
    for j in 0..vertical {
        let speed = cfg.speed_min + rng.random::<f64>() * (cfg.speed_max - cfg.speed_min);
        movers.push(Mover {
            cx: col_gap * (j as f64 + 1.0),
            cy: cfg.box_h * 2.0 + rng.random::<f64>() * 100.0,
            vx: 0.0,
            vy: speed,
        });
    }
    simulate(movers, cfg)
}

/// Perfect detections: every ground-truth box with confidence 1.0.
pub fn detections_from_gt(tracks: &[GroundTruthTrack]) -> BTreeMap<u64, Vec<Detection>> {
    rtmot::io::gt_as_detections(tracks).by_frame
}

pub fn sequence_info(name: &str, cfg: &WorldConfig) -> SequenceInfo {
    SequenceInfo::new(
        name,
        cfg.width as u32,
        cfg.height as u32,
        30.0,
        cfg.frames,
    )
}

/// Write a ground-truth file, a detection file (the ground truth with unit
/// confidence) and a sequence config into `dir`; returns the config path.
pub fn materialize_sequence(
    dir: &Path,
    name: &str,
    tracks: &[GroundTruthTrack],
    info: &SequenceInfo,
) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let gt_path = dir.join(format!("{name}_gt.txt"));
    let mut gt_rows = String::new();
    for t in tracks {
        for (frame, b) in &t.boxes {
            gt_rows.push_str(&format!(
                "{},{},{},{},{},{},1,-1,-1,-1\n",
                frame, t.id, b.x, b.y, b.w, b.h
            ));
        }
    }
    std::fs::write(&gt_path, gt_rows).unwrap();

    let det_path = dir.join(format!("{name}_det.txt"));
    let mut det_rows = String::new();
    let dets: ParsedDetections = rtmot::io::gt_as_detections(tracks);
    for (frame, list) in &dets.by_frame {
        for d in list {
            det_rows.push_str(&format!(
                "{},-1,{},{},{},{},1\n",
                frame, d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h
            ));
        }
    }
    std::fs::write(&det_path, det_rows).unwrap();

    let cfg_path = dir.join(format!("{name}.ini"));
    std::fs::write(
        &cfg_path,
        format!(
            "name={}\nimWidth={}\nimHeight={}\nframeRate={}\nseqLength={}\ndetFile={}\ngtFile={}\n",
            info.name,
            info.image_width,
            info.image_height,
            info.frame_rate,
            info.frame_count,
            det_path.file_name().unwrap().to_str().unwrap(),
            gt_path.file_name().unwrap().to_str().unwrap(),
        ),
    )
    .unwrap();
    cfg_path
}

/// Temp directory that cleans up after itself.
pub struct TempDir(pub PathBuf);

impl TempDir {
    pub fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!(
            "rtmot-{tag}-{}-{}",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap()
                .as_nanos()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        Self(dir)
    }

    pub fn path(&self) -> &Path {
        &self.0
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}
