//! ETH/UCY annotation readers.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationFormat {
    /// Whitespace-separated `frame id pos_x pos_z pos_y v_x v_z v_y`.
    Obsmat,
    /// `frame<TAB>ped_id<TAB>x<TAB>y`; lines starting with `#` are skipped.
    Tsv,
}

impl FromStr for AnnotationFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "obsmat" => Ok(AnnotationFormat::Obsmat),
            "tsv" => Ok(AnnotationFormat::Tsv),
            other => Err(Error::Parameter(format!("unknown annotation format `{other}` (expected obsmat or tsv)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub frame: i64,
    pub x: f64,
    pub y: f64,
}

/// One regularly sampled trajectory of a single pedestrian, in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTrack {
    pub pedestrian_id: i64,
    pub samples: Vec<TrackPoint>,
}

impl RawTrack {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub fn parse_annotations(path: &Path, format: AnnotationFormat) -> Result<Vec<RawTrack>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_annotations_str(&text, format, &path.display().to_string())
}

fn integral(value: f64, what: &str) -> std::result::Result<i64, String> {
    if value.fract() != 0.0 || !value.is_finite() {
        return Err(format!("{what} `{value}` is not an integer"));
    }
    Ok(value as i64)
}

fn parse_row(line: &str, format: AnnotationFormat) -> std::result::Result<(i64, i64, f64, f64), String> {
    let fields: Vec<&str> = match format {
        AnnotationFormat::Obsmat => line.split_whitespace().collect(),
        AnnotationFormat::Tsv => line.split('\t').map(str::trim).collect(),
    };
    let want = match format {
        AnnotationFormat::Obsmat => 8,
        AnnotationFormat::Tsv => 4,
    };
    if fields.len() != want {
        return Err(format!("expected {want} columns, found {}", fields.len()));
    }
    let num = |i: usize| -> std::result::Result<f64, String> {
        let v: f64 = fields[i]
            .parse()
            .map_err(|_| format!("column {} is not a number: `{}`", i + 1, fields[i]))?;
        if !v.is_finite() {
            return Err(format!("column {} is not finite", i + 1));
        }
        Ok(v)
    };
    let frame = integral(num(0)?, "frame")?;
    let id = integral(num(1)?, "pedestrian id")?;
    let (x, y) = match format {
        AnnotationFormat::Obsmat => (num(2)?, num(4)?),
        AnnotationFormat::Tsv => (num(2)?, num(3)?),
    };
    Ok((frame, id, x, y))
}

/// Most frequent positive gap between consecutive frames of the same pedestrian;
/// ties go to the smaller gap.
fn dominant_frame_step(groups: &BTreeMap<i64, Vec<TrackPoint>>) -> Option<i64> {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for points in groups.values() {
        for pair in points.windows(2) {
            *counts.entry(pair[1].frame - pair[0].frame).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(gap, _)| gap)
}

/// Parse annotation text. `origin` names the source in error messages.
///
/// Rows are grouped by pedestrian id. Within an id, frames must strictly increase in
/// file order. A pedestrian whose frames skip the dataset's dominant frame step is
/// split into separate tracks at each irregular gap, so every track is regularly sampled.
pub fn parse_annotations_str(text: &str, format: AnnotationFormat, origin: &str) -> Result<Vec<RawTrack>> {
    let mut groups: BTreeMap<i64, Vec<TrackPoint>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (frame, id, x, y) = parse_row(line, format).map_err(|message| Error::Parse {
            path: origin.to_string(),
            line: idx + 1,
            message,
        })?;
        let points = groups.entry(id).or_default();
        if let Some(last) = points.last() {
            if frame <= last.frame {
                return Err(Error::Data(format!(
                    "{origin}:{}: frame {frame} of pedestrian {id} does not follow frame {}",
                    idx + 1,
                    last.frame
                )));
            }
        }
        points.push(TrackPoint { frame, x, y });
    }

    let step = dominant_frame_step(&groups);
    let mut tracks = Vec::new();
    for (id, points) in groups {
        let mut current: Vec<TrackPoint> = Vec::new();
        for p in points {
            if let (Some(last), Some(step)) = (current.last(), step) {
                if p.frame - last.frame != step {
                    tracks.push(RawTrack { pedestrian_id: id, samples: std::mem::take(&mut current) });
                }
            }
            current.push(p);
        }
        if !current.is_empty() {
            tracks.push(RawTrack { pedestrian_id: id, samples: current });
        }
    }
    Ok(tracks)
}
