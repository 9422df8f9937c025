use std::io::{BufRead, Write};
use std::path::Path;

use super::ImagingError;
use crate::qgan::{Image8, IMAGE_PIXELS};

/// Largest pixel intensity in the digits table.
pub const DIGIT_MAX: u8 = 16;

static BUNDLED: &str = include_str!("../../data/digits.csv");

/// One row of the 8×8 handwritten digits table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitsRecord {
    pub pixels: [u8; IMAGE_PIXELS],
    pub label: u8,
}

impl DigitsRecord {
    /// Pixels scaled to `[0, 1]` by `/16`.
    pub fn to_image(&self) -> Image8 {
        Image8::new(self.pixels.iter().map(|&p| f64::from(p) / f64::from(DIGIT_MAX)).collect()).expect("pixels in range")
    }
}

fn parse_row(line: &str, lineno: usize, source: &str) -> Result<DigitsRecord, ImagingError> {
    let err = |message: String| ImagingError::Parse {
        source_name: source.to_string(),
        line: lineno,
        message,
    };
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != IMAGE_PIXELS + 1 {
        return Err(err(format!("expected {} columns, found {}", IMAGE_PIXELS + 1, fields.len())));
    }
    let mut pixels = [0u8; IMAGE_PIXELS];
    for (i, f) in fields[..IMAGE_PIXELS].iter().enumerate() {
        let v: u8 = f.parse().map_err(|_| err(format!("pixel {i}: {f:?} is not an integer")))?;
        if v > DIGIT_MAX {
            return Err(err(format!("pixel {i}: {v} exceeds {DIGIT_MAX}")));
        }
        pixels[i] = v;
    }
    let label: u8 = fields[IMAGE_PIXELS]
        .parse()
        .map_err(|_| err(format!("label {:?} is not an integer", fields[IMAGE_PIXELS])))?;
    if label > 9 {
        return Err(err(format!("label {label} is not a digit")));
    }
    Ok(DigitsRecord { pixels, label })
}

/// Parses 65-column rows (64 pixels, then the label). Blank lines are skipped.
pub fn read_digits<R: BufRead>(r: R, source: &str) -> Result<Vec<DigitsRecord>, ImagingError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| ImagingError::Io {
            path: source.to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_row(&line, i + 1, source)?);
    }
    Ok(out)
}

pub fn write_digits<W: Write>(mut w: W, records: &[DigitsRecord]) -> std::io::Result<()> {
    for r in records {
        let cols: Vec<String> = r.pixels.iter().map(u8::to_string).collect();
        writeln!(w, "{},{}", cols.join(","), r.label)?;
    }
    Ok(())
}

fn select(records: Vec<DigitsRecord>, label: Option<u8>) -> Vec<Image8> {
    records
        .into_iter()
        .filter(|r| label.is_none_or(|l| r.label == l))
        .map(|r| r.to_image())
        .collect()
}

/// Loads a digits file, keeping only `label` when given.
pub fn load_digits(path: &Path, label: Option<u8>) -> Result<Vec<Image8>, ImagingError> {
    let f = std::fs::File::open(path).map_err(|e| ImagingError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let recs = read_digits(std::io::BufReader::new(f), &path.display().to_string())?;
    Ok(select(recs, label))
}

/// The 1,797-image digits table shipped with the crate.
pub fn bundled_digits(label: Option<u8>) -> Vec<Image8> {
    let recs = read_digits(BUNDLED.as_bytes(), "bundled digits").expect("bundled table parses");
    select(recs, label)
}
