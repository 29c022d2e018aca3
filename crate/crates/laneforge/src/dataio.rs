//! Annotation and prediction file formats.
//!
//! Two formats are supported: plain text with one lane polyline per line
//! ("x y x y ..." pairs), and JSON lines where each record carries per-row
//! x-arrays sampled at shared `h_samples` with -2 marking absent rows.
//! Parsers accept LF or CRLF and reject anything non-finite; serializers
//! emit LF and round coordinates to 4 decimal places.

use crate::geometry::Lane;

/// Errors from parsing or serializing annotation data. Line and column
/// numbers are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum DataError {
    /// A polyline line held an odd number of tokens.
    OddTokenCount { line: usize },
    /// A token failed to parse as a finite number.
    NonNumericToken { line: usize, col: usize },
    /// Structurally broken record (bad JSON, wrong value type).
    Malformed { msg: String },
    /// A required JSON key is absent.
    MissingKey { key: &'static str },
    /// A lane's x-array length disagrees with `h_samples`.
    LengthMismatch {
        lane: usize,
        got: usize,
        expected: usize,
    },
    /// Unknown prediction format name.
    UnsupportedFormat { got: String },
}

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DataError::OddTokenCount { line } => {
                write!(f, "line {line}: odd number of coordinate tokens")
            }
            DataError::NonNumericToken { line, col } => {
                write!(f, "line {line}, token {col}: not a finite number")
            }
            DataError::Malformed { msg } => write!(f, "malformed record: {msg}"),
            DataError::MissingKey { key } => write!(f, "missing key \"{key}\""),
            DataError::LengthMismatch {
                lane,
                got,
                expected,
            } => {
                write!(f, "lane {lane}: {got} x-values for {expected} h_samples")
            }
            DataError::UnsupportedFormat { got } => {
                write!(f, "unsupported prediction format \"{got}\"")
            }
        }
    }
}

impl std::error::Error for DataError {}

/// One annotated image: source path, lane polylines in pixels, image size.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedImage {
    pub image_path: String,
    pub lanes: Vec<Vec<(f64, f64)>>,
    pub width: u32,
    pub height: u32,
}

/// One JSON-line record: shared sample rows, per-lane x-arrays (absent rows
/// as `None`), and the image path.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledRecord {
    pub h_samples: Vec<f64>,
    pub lanes: Vec<Vec<Option<f64>>>,
    pub raw_file: String,
}

impl SampledRecord {
    /// Lane views of the x-arrays. Slice index follows `h_samples` order.
    pub fn to_lanes(&self) -> Vec<Lane> {
        self.lanes.iter().map(|xs| Lane::new(xs.clone())).collect()
    }
}

/// Parses polyline text: one lane per nonblank line, whitespace-separated
/// x y pairs in file order.
pub fn parse_culane_lines(text: &str) -> Result<Vec<Vec<(f64, f64)>>, DataError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if !tokens.len().is_multiple_of(2) {
            return Err(DataError::OddTokenCount { line: li + 1 });
        }
        let mut vals = Vec::with_capacity(tokens.len());
        for (ti, tok) in tokens.iter().enumerate() {
            match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => vals.push(v),
                _ => {
                    return Err(DataError::NonNumericToken {
                        line: li + 1,
                        col: ti + 1,
                    })
                }
            }
        }
        out.push(vals.chunks(2).map(|p| (p[0], p[1])).collect());
    }
    Ok(out)
}

const ABSENT_X: f64 = -2.0;

fn finite_number(v: &serde_json::Value, what: &str) -> Result<f64, DataError> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(DataError::Malformed {
            msg: format!("{what} is not a finite number"),
        }),
    }
}

/// Parses one JSON-line record with keys `lanes`, `h_samples`, `raw_file`.
/// Entries of -2 in a lane's x-array become absent rows.
pub fn parse_tusimple_json(line: &str) -> Result<SampledRecord, DataError> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| DataError::Malformed { msg: e.to_string() })?;
    let obj = value.as_object().ok_or_else(|| DataError::Malformed {
        msg: "record is not a JSON object".into(),
    })?;

    let h_raw = obj
        .get("h_samples")
        .ok_or(DataError::MissingKey { key: "h_samples" })?
        .as_array()
        .ok_or_else(|| DataError::Malformed {
            msg: "h_samples is not an array".into(),
        })?;
    let mut h_samples = Vec::with_capacity(h_raw.len());
    for v in h_raw {
        h_samples.push(finite_number(v, "h_samples entry")?);
    }

    let lanes_raw = obj
        .get("lanes")
        .ok_or(DataError::MissingKey { key: "lanes" })?
        .as_array()
        .ok_or_else(|| DataError::Malformed {
            msg: "lanes is not an array".into(),
        })?;
    let mut lanes = Vec::with_capacity(lanes_raw.len());
    for (i, lane) in lanes_raw.iter().enumerate() {
        let xs_raw = lane.as_array().ok_or_else(|| DataError::Malformed {
            msg: format!("lane {} is not an array", i + 1),
        })?;
        if xs_raw.len() != h_samples.len() {
            return Err(DataError::LengthMismatch {
                lane: i + 1,
                got: xs_raw.len(),
                expected: h_samples.len(),
            });
        }
        let mut xs = Vec::with_capacity(xs_raw.len());
        for v in xs_raw {
            let x = finite_number(v, "lane entry")?;
            xs.push(if x == ABSENT_X { None } else { Some(x) });
        }
        lanes.push(xs);
    }

    let raw_file = obj
        .get("raw_file")
        .ok_or(DataError::MissingKey { key: "raw_file" })?
        .as_str()
        .ok_or_else(|| DataError::Malformed {
            msg: "raw_file is not a string".into(),
        })?
        .to_string();

    Ok(SampledRecord {
        h_samples,
        lanes,
        raw_file,
    })
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

/// Serializes polylines in the plain text format: one line per lane,
/// "x y x y ..." with 4 decimal places, LF-terminated.
pub fn serialize_culane_polylines(polylines: &[Vec<(f64, f64)>]) -> String {
    let mut out = String::new();
    for poly in polylines {
        let line: Vec<String> = poly
            .iter()
            .flat_map(|&(x, y)| [format!("{:.4}", x), format!("{:.4}", y)])
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Serializes a sampled record as one JSON line (LF-terminated), absent
/// rows as -2, coordinates rounded to 4 decimal places.
pub fn serialize_tusimple_record(rec: &SampledRecord) -> String {
    let lanes: Vec<serde_json::Value> = rec
        .lanes
        .iter()
        .map(|xs| {
            serde_json::Value::from(
                xs.iter()
                    .map(|x| round4(x.unwrap_or(ABSENT_X)))
                    .collect::<Vec<f64>>(),
            )
        })
        .collect();
    let record = serde_json::json!({
        "lanes": lanes,
        "h_samples": rec.h_samples.iter().map(|&y| round4(y)).collect::<Vec<f64>>(),
        "raw_file": rec.raw_file,
    });
    let mut out = record.to_string();
    out.push('\n');
    out
}

/// Prediction output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredFormat {
    /// Plain text polylines.
    Culane,
    /// JSON lines with h_samples.
    Tusimple,
}

impl PredFormat {
    pub fn from_name(name: &str) -> Result<Self, DataError> {
        match name {
            "culane" => Ok(PredFormat::Culane),
            "tusimple" => Ok(PredFormat::Tusimple),
            other => Err(DataError::UnsupportedFormat {
                got: other.to_string(),
            }),
        }
    }
}

/// Serializes lanes sampled at rows `ys` in the chosen format. The text
/// format writes only present points; the JSON format writes -2 at absent
/// rows and needs `raw_file` for the record.
pub fn serialize_predictions(
    lanes: &[Lane],
    ys: &[f64],
    raw_file: &str,
    format: PredFormat,
) -> Result<String, DataError> {
    for (i, lane) in lanes.iter().enumerate() {
        if lane.len() != ys.len() {
            return Err(DataError::LengthMismatch {
                lane: i + 1,
                got: lane.len(),
                expected: ys.len(),
            });
        }
    }
    match format {
        PredFormat::Culane => {
            let polylines: Vec<Vec<(f64, f64)>> = lanes
                .iter()
                .map(|lane| lane.iter_present().map(|(i, x)| (x, ys[i])).collect())
                .collect();
            Ok(serialize_culane_polylines(&polylines))
        }
        PredFormat::Tusimple => {
            let rec = SampledRecord {
                h_samples: ys.to_vec(),
                lanes: lanes
                    .iter()
                    .map(|lane| (0..lane.len()).map(|i| lane.get(i)).collect())
                    .collect(),
                raw_file: raw_file.to_string(),
            };
            Ok(serialize_tusimple_record(&rec))
        }
    }
}
