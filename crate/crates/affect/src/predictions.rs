//! Prediction CSV files.

use std::fs;
use std::path::Path;

use affect_core::data::NUM_CLASSES;
use affect_core::predictions::{PredictionRow, PredictionTable};

use crate::error::{Error, Result};

pub const HEADER: [&str; 11] = [
    "video", "frame", "p0", "p1", "p2", "p3", "p4", "p5", "p6", "arousal", "valence",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Rows in `(video, frame)` order; floats in shortest round-trip form.
pub fn render_predictions(table: &PredictionTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for ((video, frame), row) in table.iter() {
        let mut rec = vec![video.clone(), frame.to_string()];
        rec.extend(row.probs.iter().map(f64::to_string));
        rec.push(opt(row.va.map(|(a, _)| a)));
        rec.push(opt(row.va.map(|(_, v)| v)));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

pub fn write_predictions(path: &Path, table: &PredictionTable) -> Result<()> {
    fs::write(path, render_predictions(table)).map_err(|e| Error::io(path, e))
}

pub fn parse_predictions(text: &str, path: &Path) -> Result<PredictionTable> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if header.iter().ne(HEADER) {
        return Err(parse_err(1, format!("expected header `{}`", HEADER.join(","))));
    }
    let mut table: Option<PredictionTable> = None;
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        let num = |j: usize| -> Result<f64> {
            rec[j]
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("column `{}`: bad number `{}`", HEADER[j], &rec[j])))
        };
        let frame = rec[1]
            .trim()
            .parse::<u32>()
            .map_err(|_| parse_err(line, format!("bad frame index `{}`", &rec[1])))?;
        let mut probs = [0.0; NUM_CLASSES];
        for (c, p) in probs.iter_mut().enumerate() {
            *p = num(2 + c)?;
        }
        let va = match (rec[9].trim().is_empty(), rec[10].trim().is_empty()) {
            (true, true) => None,
            (false, false) => Some((num(9)?, num(10)?)),
            _ => return Err(parse_err(line, "arousal and valence must both be present or both empty".into())),
        };
        table
            .get_or_insert_with(|| PredictionTable::new(va.is_some()))
            .insert(rec[0].to_string(), frame, PredictionRow { probs, va })
            .map_err(|e| parse_err(line, e.to_string()))?;
    }
    Ok(table.unwrap_or_else(|| PredictionTable::new(false)))
}

pub fn load_predictions(path: &Path) -> Result<PredictionTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text, path)
}
