//! File writers: CSV tables, raw little-endian samples and 16-bit PGM images.
//!
//! Floats are written in Rust's shortest round-trip form, so identical
//! inputs give byte-identical files.

use std::io::Write;

use crate::isar::IsarImage;
use crate::profile::{to_db, RangeProfile};
use crate::{Error, Result};

/// Default dynamic range of exported images, dB.
pub const DEFAULT_IMAGE_FLOOR_DB: f64 = 40.0;

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// Writes a header row and rows of already formatted fields.
pub fn table_csv<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    for r in rows {
        out.write_record(r).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// `freq_hz,range_m,mag_db,re,im`, one row per bin.
pub fn profile_csv<W: Write>(w: W, profile: &RangeProfile) -> Result<()> {
    let db = profile.magnitude_db();
    let rows: Vec<Vec<String>> = (0..profile.len())
        .map(|i| {
            let c = profile.spectrum[i];
            vec![
                profile.freq(i).to_string(),
                profile.range(i).to_string(),
                db[i].to_string(),
                c.re.to_string(),
                c.im.to_string(),
            ]
        })
        .collect();
    table_csv(w, &["freq_hz", "range_m", "mag_db", "re", "im"], &rows)
}

pub fn raw_f64<W: Write>(mut w: W, data: &[f64]) -> Result<()> {
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Binary 16-bit PGM of the dB magnitude, clipped `floor_db` below the peak.
///
/// Columns run along increasing cross-range; the top row is the farthest range.
pub fn pgm16<W: Write>(mut w: W, image: &IsarImage, floor_db: f64) -> Result<()> {
    if !(floor_db > 0.0) {
        return Err(Error::invalid(format!("dynamic range must be positive, got {floor_db}")));
    }
    let db = to_db(&image.magnitude());
    write!(w, "P5\n{} {}\n65535\n", image.n_cross, image.n_range)?;
    let mut bytes = Vec::with_capacity(2 * db.len());
    for r in (0..image.n_range).rev() {
        for c in 0..image.n_cross {
            let v = db[r * image.n_cross + c].max(-floor_db);
            let level = ((v + floor_db) / floor_db * 65535.0).round() as u16;
            bytes.extend_from_slice(&level.to_be_bytes());
        }
    }
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// `axis,index,value_m` rows for both image axes.
pub fn axes_csv<W: Write>(w: W, image: &IsarImage) -> Result<()> {
    let mut rows = Vec::with_capacity(image.n_range + image.n_cross);
    for (i, v) in image.range_axis.iter().enumerate() {
        rows.push(vec!["range".to_string(), i.to_string(), v.to_string()]);
    }
    for (i, v) in image.crossrange_axis.iter().enumerate() {
        rows.push(vec!["crossrange".to_string(), i.to_string(), v.to_string()]);
    }
    table_csv(w, &["axis", "index", "value_m"], &rows)
}
