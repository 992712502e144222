//! Plain-text rendering of metrics and training progress.

use std::fmt::Write;

use affect_core::metrics::MetricsReport;
use affect_core::train::EpochRecord;

/// Flat `key = value` lines; the confusion matrix follows as seven
/// comma-separated rows (truth by row, prediction by column).
pub fn render_report(report: &MetricsReport) -> String {
    let mut out = String::new();
    if let Some(e) = &report.expression {
        let _ = writeln!(out, "expression_frames = {}", e.frames);
        let _ = writeln!(out, "accuracy = {}", e.accuracy);
        let _ = writeln!(out, "macro_f1 = {}", e.macro_f1);
        let _ = writeln!(out, "expression_score = {}", e.expression_score);
    }
    if let Some(va) = &report.va {
        let _ = writeln!(out, "va_frames = {}", va.frames);
        let _ = writeln!(out, "ccc_arousal = {}", va.ccc_arousal);
        let _ = writeln!(out, "ccc_valence = {}", va.ccc_valence);
        let _ = writeln!(out, "va_score = {}", va.va_score);
    }
    if let Some(e) = &report.expression {
        for row in &e.confusion.counts {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
    }
    out
}

pub fn render_epoch(record: &EpochRecord) -> String {
    let mut line = format!(
        "epoch {:>4}  loss {:.6}  ce {:.6}",
        record.epoch, record.total, record.terms.class
    );
    if let Some(va) = record.terms.va {
        let _ = write!(
            line,
            "  ccc_a {:.6}  ccc_v {:.6}  mse {:.6}",
            va.arousal_ccc, va.valence_ccc, va.mse
        );
    }
    if let Some(v) = &record.validation {
        if let Some(e) = &v.expression {
            let _ = write!(line, "  val_expr {:.4}", e.expression_score);
        }
        if let Some(va) = &v.va {
            let _ = write!(line, "  val_va {:.4}", va.va_score);
        }
    }
    line
}
