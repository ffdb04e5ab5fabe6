//! Reading and writing the text formats used around the tracker: detection
//! files, ground-truth files, tracker result files, and per-sequence
//! key=value config files.
//!
//! Rows are comma separated: frame, id, x, y, w, h, confidence, with any
//! trailing fields ignored. Result rows are written as
//! `frame,id,x,y,w,h,1,-1,-1,-1` with coordinates serialized to at most six
//! fractional digits.

use crate::assoc::SequenceInfo;
use crate::geom::{BoundingBox, Detection};
use crate::metrics::GroundTruthTrack;
use crate::tracker::TrackedBox;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: expected at least {expected} fields, found {found}")]
    TooFewFields {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: field {field} is not a number: {value:?}")]
    InvalidNumber {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: frame index must be a positive integer")]
    BadFrame { line: usize },
    #[error("line {line}: id must be a positive integer")]
    BadId { line: usize },
    #[error("line {line}: duplicate box for id {id} in frame {frame}")]
    DuplicateEntry { line: usize, id: u64, frame: u64 },
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Invalid {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: missing required key {key}")]
    MissingKey { path: String, key: &'static str },
    #[error("referenced file does not exist: {0}")]
    MissingFile(String),
}

/// Parsed detection file: detections grouped by frame (ascending), plus
/// the number of rows dropped for having a degenerate box.
#[derive(Debug, Default)]
pub struct ParsedDetections {
    pub by_frame: BTreeMap<u64, Vec<Detection>>,
    pub dropped: usize,
}

impl ParsedDetections {
    pub fn total(&self) -> usize {
        self.by_frame.values().map(Vec::len).sum()
    }

    /// Detections of one frame; empty when the frame has none.
    pub fn frame(&self, frame: u64) -> &[Detection] {
        self.by_frame.get(&frame).map(Vec::as_slice).unwrap_or(&[])
    }
}

struct Row {
    frame: u64,
    id: i64,
    bbox: BoundingBox,
    confidence: f64,
}

/// Split one CSV row into the seven leading fields, ignoring the rest.
/// Never panics: any malformed content becomes a structured error.
fn parse_row(line_no: usize, line: &str) -> Result<Row, ParseError> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() < 7 {
        return Err(ParseError::TooFewFields {
            line: line_no,
            expected: 7,
            found: fields.len(),
        });
    }
    let num = |field: &'static str, raw: &str| -> Result<f64, ParseError> {
        raw.parse::<f64>().map_err(|_| ParseError::InvalidNumber {
            line: line_no,
            field,
            value: raw.to_string(),
        })
    };
    let frame_raw = num("frame", fields[0])?;
    if frame_raw < 1.0 || frame_raw.fract() != 0.0 {
        return Err(ParseError::BadFrame { line: line_no });
    }
    let id_raw = num("id", fields[1])?;
    Ok(Row {
        frame: frame_raw as u64,
        id: id_raw as i64,
        bbox: BoundingBox::new(
            num("x", fields[2])?,
            num("y", fields[3])?,
            num("w", fields[4])?,
            num("h", fields[5])?,
        ),
        confidence: num("confidence", fields[6])?,
    })
}

fn read_lossy_lines<R: BufRead>(mut reader: R) -> Result<Vec<String>, ParseError> {
    let mut lines = Vec::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        let text = String::from_utf8_lossy(&buf);
        lines.push(text.trim_end_matches(['\n', '\r']).to_string());
    }
    Ok(lines)
}

/// Parse a detection file. The id field is ignored; rows whose box has a
/// non-positive width or height are dropped and counted.
pub fn parse_detections<R: BufRead>(reader: R) -> Result<ParsedDetections, ParseError> {
    let mut out = ParsedDetections::default();
    for (idx, line) in read_lossy_lines(reader)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_row(idx + 1, line)?;
        if !row.bbox.is_valid() {
            out.dropped += 1;
            continue;
        }
        out.by_frame
            .entry(row.frame)
            .or_default()
            .push(Detection::new(row.frame, row.bbox, row.confidence));
    }
    Ok(out)
}

pub fn parse_detections_file(path: &Path) -> Result<ParsedDetections, ParseError> {
    let file = std::fs::File::open(path)?;
    parse_detections(std::io::BufReader::new(file))
}

/// Parsed ground-truth file: rows grouped into per-id tracks, plus the
/// count of rows dropped for degenerate boxes.
#[derive(Debug, Default)]
pub struct ParsedGroundTruth {
    pub tracks: Vec<GroundTruthTrack>,
    pub dropped: usize,
}

/// Parse a ground-truth (or tracker result) file. Ids must be positive and
/// at most one box may exist per (id, frame).
pub fn parse_ground_truth<R: BufRead>(reader: R) -> Result<ParsedGroundTruth, ParseError> {
    let mut by_id: BTreeMap<u64, GroundTruthTrack> = BTreeMap::new();
    let mut dropped = 0usize;
    for (idx, line) in read_lossy_lines(reader)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let row = parse_row(line_no, line)?;
        if row.id <= 0 {
            return Err(ParseError::BadId { line: line_no });
        }
        if !row.bbox.is_valid() {
            dropped += 1;
            continue;
        }
        let id = row.id as u64;
        let track = by_id.entry(id).or_insert_with(|| GroundTruthTrack::new(id));
        if track.boxes.insert(row.frame, row.bbox).is_some() {
            return Err(ParseError::DuplicateEntry {
                line: line_no,
                id,
                frame: row.frame,
            });
        }
    }
    Ok(ParsedGroundTruth {
        tracks: by_id.into_values().collect(),
        dropped,
    })
}

pub fn parse_ground_truth_file(path: &Path) -> Result<ParsedGroundTruth, ParseError> {
    let file = std::fs::File::open(path)?;
    parse_ground_truth(std::io::BufReader::new(file))
}

/// Turn ground truth into detector output: every box becomes a detection
/// with confidence 1.0 and its identity discarded.
pub fn gt_as_detections(tracks: &[GroundTruthTrack]) -> ParsedDetections {
    let mut out = ParsedDetections::default();
    for track in tracks {
        for (&frame, &bbox) in &track.boxes {
            out.by_frame
                .entry(frame)
                .or_default()
                .push(Detection::new(frame, bbox, 1.0));
        }
    }
    out
}

/// Serialize a coordinate with at most six fractional digits, trimming
/// trailing zeros so files are byte-stable.
fn fmt_coord(v: f64) -> String {
    let s = format!("{v:.6}");
    let trimmed = s.trim_end_matches('0').trim_end_matches('.');
    if trimmed == "-0" {
        "0".to_string()
    } else {
        trimmed.to_string()
    }
}

/// Write tracker output in the submission row format, frames ascending and
/// ids ascending within each frame.
pub fn write_results<W: Write>(mut writer: W, boxes: &[TrackedBox]) -> std::io::Result<()> {
    let mut sorted: Vec<&TrackedBox> = boxes.iter().collect();
    sorted.sort_by_key(|b| (b.frame, b.id));
    for b in sorted {
        writeln!(
            writer,
            "{},{},{},{},{},{},1,-1,-1,-1",
            b.frame,
            b.id,
            fmt_coord(b.bbox.x),
            fmt_coord(b.bbox.y),
            fmt_coord(b.bbox.w),
            fmt_coord(b.bbox.h),
        )?;
    }
    Ok(())
}

pub fn write_results_file(path: &Path, boxes: &[TrackedBox]) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = std::io::BufWriter::new(file);
    write_results(&mut writer, boxes)?;
    writer.flush()
}

/// Parse a tracker result file back into a flat box stream (frames
/// ascending, ids ascending within frames).
pub fn parse_results<R: BufRead>(reader: R) -> Result<Vec<TrackedBox>, ParseError> {
    let parsed = parse_ground_truth(reader)?;
    let mut out = Vec::new();
    for track in &parsed.tracks {
        for (&frame, &bbox) in &track.boxes {
            out.push(TrackedBox {
                frame,
                id: track.id,
                bbox,
            });
        }
    }
    out.sort_by_key(|b| (b.frame, b.id));
    Ok(out)
}

/// Everything needed to run one sequence: static metadata plus where its
/// detection and ground-truth files live.
#[derive(Debug, Clone)]
pub struct SequenceConfig {
    pub info: SequenceInfo,
    pub det_path: Option<PathBuf>,
    pub gt_path: Option<PathBuf>,
    /// Feed the ground truth (ids erased) to the tracker instead of the
    /// detection file.
    pub use_gt_as_detections: bool,
}

impl SequenceConfig {
    /// Load the detections this sequence is configured to track.
    pub fn load_detections(&self) -> Result<ParsedDetections, ParseError> {
        if self.use_gt_as_detections {
            let gt = self.load_ground_truth()?;
            Ok(gt_as_detections(&gt.tracks))
        } else {
            let path = self.det_path.as_ref().ok_or_else(|| {
                std::io::Error::new(std::io::ErrorKind::NotFound, "no detection file configured")
            })?;
            parse_detections_file(path)
        }
    }

    pub fn load_ground_truth(&self) -> Result<ParsedGroundTruth, ParseError> {
        let path = self.gt_path.as_ref().ok_or_else(|| {
            std::io::Error::new(std::io::ErrorKind::NotFound, "no ground-truth file configured")
        })?;
        parse_ground_truth_file(path)
    }
}

/// Load a sequence config: `key=value` lines with keys name, imWidth,
/// imHeight, frameRate, seqLength, detFile, gtFile and optional useGt.
/// Lines starting with `#` or `[` (ini section headers) are skipped, so
/// MOTChallenge `seqinfo.ini` files parse directly; in that case missing
/// det/gt paths fall back to the conventional `det/det.txt` and
/// `gt/gt.txt` next to the config.
pub fn load_sequence_config(path: &Path) -> Result<SequenceConfig, ConfigError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: display.clone(),
        source,
    })?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));

    let mut values: BTreeMap<String, String> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('[') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                values.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => {
                return Err(ConfigError::Invalid {
                    path: display.clone(),
                    line: idx + 1,
                    message: format!("expected key=value, got {line:?}"),
                })
            }
        }
    }

    let require = |key: &'static str| -> Result<&String, ConfigError> {
        values.get(key).ok_or(ConfigError::MissingKey {
            path: display.clone(),
            key,
        })
    };
    let parse_num = |key: &'static str, raw: &str| -> Result<f64, ConfigError> {
        raw.parse::<f64>().map_err(|_| ConfigError::Invalid {
            path: display.clone(),
            line: 0,
            message: format!("{key} is not a number: {raw:?}"),
        })
    };

    let name = require("name")?.clone();
    let width = parse_num("imWidth", require("imWidth")?)? as u32;
    let height = parse_num("imHeight", require("imHeight")?)? as u32;
    let frame_rate = parse_num("frameRate", require("frameRate")?)?;
    let frame_count = parse_num("seqLength", require("seqLength")?)? as u64;
    if width == 0 || height == 0 || frame_rate <= 0.0 || frame_count == 0 {
        return Err(ConfigError::Invalid {
            path: display.clone(),
            line: 0,
            message: "image dims, frame rate and seqLength must be positive".into(),
        });
    }

    let resolve = |raw: &str| -> PathBuf {
        let p = Path::new(raw);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            dir.join(p)
        }
    };
    let det_path = match values.get("detFile") {
        Some(raw) => Some(resolve(raw)),
        None => {
            let fallback = dir.join("det").join("det.txt");
            fallback.exists().then_some(fallback)
        }
    };
    let gt_path = match values.get("gtFile") {
        Some(raw) => Some(resolve(raw)),
        None => {
            let fallback = dir.join("gt").join("gt.txt");
            fallback.exists().then_some(fallback)
        }
    };
    for p in [&det_path, &gt_path].into_iter().flatten() {
        if !p.exists() {
            return Err(ConfigError::MissingFile(p.display().to_string()));
        }
    }

    let use_gt_as_detections = values
        .get("useGt")
        .map(|v| v == "1" || v.eq_ignore_ascii_case("true"))
        .unwrap_or(false);

    Ok(SequenceConfig {
        info: SequenceInfo::new(&name, width, height, frame_rate, frame_count),
        det_path,
        gt_path,
        use_gt_as_detections,
    })
}
