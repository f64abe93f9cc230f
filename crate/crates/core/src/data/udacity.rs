//! Udacity-style CSV ingestion and export.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{FrameRecord, FrameSequence, Image, Role};
use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 12] = [
    "index",
    "timestamp",
    "width",
    "height",
    "frame_id",
    "filename",
    "angle",
    "torque",
    "speed",
    "latitude",
    "longitude",
    "altitude",
];

/// Default decoded-frame cache budget (1 GiB).
pub const DEFAULT_CACHE_BYTES: usize = 1 << 30;

/// File name used for exported datasets and looked up inside dataset directories.
pub const DATASET_CSV: &str = "interpolated.csv";

// Short names used by the public Udacity dumps.
fn aliases(column: &str) -> &'static [&'static str] {
    match column {
        "latitude" => &["lat"],
        "longitude" => &["long", "lon"],
        "altitude" => &["alt"],
        _ => &[],
    }
}

fn is_side_camera(frame_id: &str) -> bool {
    matches!(frame_id, "left_camera" | "right_camera")
}

pub(crate) fn decode_image(path: &Path) -> std::result::Result<Image, String> {
    let rgb = image::open(path).map_err(|e| e.to_string())?.to_rgb8();
    let (width, height) = rgb.dimensions();
    Ok(Image {
        height: height as usize,
        width: width as usize,
        pixels: rgb.into_raw(),
    })
}

/// CSV path and image root for a dataset given as a directory or a CSV file.
pub fn resolve_dataset(path: &Path) -> (PathBuf, PathBuf) {
    if path.is_dir() {
        (path.join(DATASET_CSV), path.to_path_buf())
    } else {
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        (path.to_path_buf(), root)
    }
}

struct Row {
    line: u64,
    record: FrameRecord,
}

fn parse_rows(path: &Path) -> Result<Vec<Row>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Format(format!("{}: {other:?}", path.display())),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("{}: unreadable header: {e}", path.display())))?
        .clone();
    let mut pos = [0usize; CSV_COLUMNS.len()];
    for (slot, column) in pos.iter_mut().zip(CSV_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == column || aliases(column).contains(&h))
            .ok_or_else(|| Error::MissingColumn(column.to_string()))?;
    }

    let mut rows = Vec::new();
    for result in reader.records() {
        let rec = result.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |k: usize| rec.get(pos[k]).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            let s = field(k);
            if s.is_empty() && CSV_COLUMNS[k] != "angle" {
                return Ok(f64::NAN);
            }
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("line {line}: column `{}` is not a number: {s:?}", CSV_COLUMNS[k])))
        };
        let int = |k: usize| -> Result<i64> {
            let s = field(k);
            s.parse::<i64>()
                .or_else(|_| s.parse::<f64>().map(|v| v as i64))
                .map_err(|_| Error::Format(format!("line {line}: column `{}` is not an integer: {s:?}", CSV_COLUMNS[k])))
        };
        let angle = num(6)?;
        if !angle.is_finite() {
            return Err(Error::Format(format!("line {line}: angle {angle} is not finite")));
        }
        let (width, height) = (int(2)?, int(3)?);
        if width <= 0 || height <= 0 {
            return Err(Error::Format(format!("line {line}: image size {width}x{height} is not positive")));
        }
        rows.push(Row {
            line,
            record: FrameRecord {
                index: int(0)? as u64,
                timestamp: int(1)?,
                width: width as u32,
                height: height as u32,
                frame_id: field(4).to_string(),
                filename: field(5).to_string(),
                angle,
                torque: num(7)?,
                speed: num(8)?,
                latitude: num(9)?,
                longitude: num(10)?,
                altitude: num(11)?,
            },
        });
    }
    Ok(rows)
}

/// Read a center-camera sequence, sorted by timestamp.
///
/// Every referenced image is probed up front; all unreadable rows are
/// reported together instead of being skipped.
pub fn load_udacity_csv(path: &Path, image_root: &Path, cache_bytes: usize) -> Result<FrameSequence> {
    let mut rows = parse_rows(path)?;
    rows.retain(|r| !is_side_camera(&r.record.frame_id));
    rows.sort_by_key(|r| r.record.timestamp);
    if let Some(pair) = rows.windows(2).find(|p| p[0].record.timestamp == p[1].record.timestamp) {
        return Err(Error::Format(format!(
            "lines {} and {} share timestamp {}",
            pair[0].line, pair[1].line, pair[0].record.timestamp
        )));
    }
    let Some(first) = rows.first() else {
        return Err(Error::Format(format!("{}: no center-camera rows", path.display())));
    };
    let (width, height) = (first.record.width, first.record.height);

    let mut bad: Vec<(usize, String)> = rows
        .par_iter()
        .filter_map(|row| {
            let file = image_root.join(&row.record.filename);
            let why = match image::image_dimensions(&file) {
                Err(e) => format!("{}: {e}", file.display()),
                Ok(dims) if dims != (row.record.width, row.record.height) => format!(
                    "{} is {}x{}, row says {}x{}",
                    file.display(),
                    dims.0,
                    dims.1,
                    row.record.width,
                    row.record.height
                ),
                Ok(_) if (row.record.width, row.record.height) != (width, height) => {
                    format!("frame size {}x{} differs from the sequence's {width}x{height}", row.record.width, row.record.height)
                }
                Ok(_) => return None,
            };
            Some((row.line as usize, why))
        })
        .collect();
    if !bad.is_empty() {
        bad.sort();
        return Err(Error::Ingestion { rows: bad });
    }

    let records: Vec<FrameRecord> = rows.into_iter().map(|r| r.record).collect();
    let seq = FrameSequence::from_disk(records, image_root.to_path_buf(), height as usize, width as usize, cache_bytes);
    log::info!(
        "loaded {} frames ({:.1} s, {}x{}) from {}",
        seq.len(),
        seq.duration_secs(),
        width,
        height,
        path.display()
    );
    Ok(seq)
}

/// Write `seq` as `<dir>/interpolated.csv` plus one PNG per frame.
///
/// Frames are written as the lead vehicle sees them, so an ego-only glare
/// mask is not part of the export.
pub fn export_csv_dataset(seq: &FrameSequence, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(DATASET_CSV);
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&csv_path)
        .map_err(|e| Error::Format(format!("{}: {e}", csv_path.display())))?;
    writer
        .write_record(CSV_COLUMNS)
        .map_err(|e| Error::Format(e.to_string()))?;
    for rec in seq.records() {
        writer.serialize(rec).map_err(|e| Error::Format(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(&csv_path, e))?;

    seq.records()
        .par_iter()
        .enumerate()
        .try_for_each(|(i, rec)| -> Result<()> {
            let img = seq.frame(super::FrameRef { index: i, role: Role::Lead })?;
            let file = dir.join(&rec.filename);
            if let Some(parent) = file.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            image::save_buffer_with_format(
                &file,
                &img.pixels,
                img.width as u32,
                img.height as u32,
                image::ExtendedColorType::Rgb8,
                image::ImageFormat::Png,
            )
            .map_err(|e| Error::Format(format!("{}: {e}", file.display())))
        })?;
    Ok(csv_path)
}
