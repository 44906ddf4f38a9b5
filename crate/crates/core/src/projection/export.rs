//! Comma-separated projection output: `label,x,y` with a header row.

use std::borrow::Cow;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::LabeledPoints;

fn csv_field(s: &str) -> Cow<'_, str> {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        Cow::Owned(format!("\"{}\"", s.replace('"', "\"\"")))
    } else {
        Cow::Borrowed(s)
    }
}

/// Write projected points to `destination`. Coordinates print in Rust's
/// shortest round-trip form, so parsing them back is lossless.
pub fn export_projection(points: &LabeledPoints, destination: &Path) -> std::io::Result<()> {
    assert_eq!(points.dim(), 2, "export expects projected 2D points, got {}D", points.dim());
    let mut w = BufWriter::new(File::create(destination)?);
    writeln!(w, "label,x,y")?;
    for (i, label) in points.labels().iter().enumerate() {
        let row = points.row(i);
        writeln!(w, "{},{},{}", csv_field(label), row[0], row[1])?;
    }
    w.flush()
}
