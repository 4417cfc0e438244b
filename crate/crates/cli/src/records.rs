//! Per-epoch CSV rows.

use std::io::{Read, Write};

use ofgnss_core::EpochRecord;
use serde::{Deserialize, Serialize};

/// One CSV line; field order is the column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub epoch: f64,
    pub truth_lat: f64,
    pub truth_lon: f64,
    pub truth_alt: f64,
    pub est_lat: f64,
    pub est_lon: f64,
    pub est_alt: f64,
    pub err_east: f64,
    pub err_north: f64,
    pub err_up: f64,
    pub nis: f64,
    pub n_sats: usize,
    pub flagged: bool,
}

pub const COLUMNS: [&str; 13] = [
    "epoch", "truth_lat", "truth_lon", "truth_alt", "est_lat", "est_lon", "est_alt", "err_east", "err_north",
    "err_up", "nis", "n_sats", "flagged",
];

impl From<&EpochRecord> for RecordRow {
    fn from(r: &EpochRecord) -> Self {
        Self {
            epoch: r.epoch,
            truth_lat: r.truth.lat_deg(),
            truth_lon: r.truth.lon_deg(),
            truth_alt: r.truth.alt(),
            est_lat: r.estimate.lat_deg(),
            est_lon: r.estimate.lon_deg(),
            est_alt: r.estimate.alt(),
            err_east: r.err_enu.east,
            err_north: r.err_enu.north,
            err_up: r.err_enu.up,
            nis: r.nis,
            n_sats: r.n_sats,
            flagged: r.flagged,
        }
    }
}

impl RecordRow {
    pub fn horizontal_error(&self) -> f64 {
        self.err_east.hypot(self.err_north)
    }
}

pub fn rows_from_records(records: &[EpochRecord]) -> Vec<RecordRow> {
    records.iter().map(RecordRow::from).collect()
}

pub fn write_rows<W: Write>(out: W, rows: &[RecordRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(COLUMNS)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> csv::Result<Vec<RecordRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(epoch: f64) -> RecordRow {
        RecordRow {
            epoch,
            truth_lat: 28.6139,
            truth_lon: 77.209,
            truth_alt: 216.0,
            est_lat: 28.61391,
            est_lon: 77.20899,
            est_alt: 218.5,
            err_east: -0.97,
            err_north: 1.11,
            err_up: 2.5,
            nis: 3.25,
            n_sats: 7,
            flagged: epoch > 1.0,
        }
    }

    #[test]
    fn header_matches_column_order() {
        let mut buf = Vec::new();
        write_rows(&mut buf, &[row(0.0)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
        let mut empty = Vec::new();
        write_rows(&mut empty, &[]).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim_end(), COLUMNS.join(","));
    }

    #[test]
    fn rows_round_trip_exactly() {
        let rows = vec![row(0.0), row(1.0), row(2.0)];
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        assert_eq!(read_rows(buf.as_slice()).unwrap(), rows);
    }
}
