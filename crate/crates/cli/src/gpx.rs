//! GPX 1.1 track import and export.
//!
//! Simulation time zero maps to 2020-01-01T00:00:00Z; times are written
//! with millisecond resolution and coordinates with nine decimals.

use std::fmt::Write as _;

use chrono::{DateTime, Duration, NaiveDate, SecondsFormat, Utc};
use ofgnss_core::GeodeticCoord;
use quick_xml::escape::{escape, resolve_predefined_entity};
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

use crate::track::{Track, TrackError, TrackPoint, TrackSource};

#[derive(Debug, Error, PartialEq)]
pub enum GpxError {
    #[error("track has no points")]
    EmptyTrack,
    #[error("malformed GPX: {0}")]
    MalformedGpx(String),
    #[error("track point {index} is not later than its predecessor")]
    NonMonotonicTime { index: usize },
}

fn malformed(msg: impl Into<String>) -> GpxError {
    GpxError::MalformedGpx(msg.into())
}

pub fn epoch_zero() -> DateTime<Utc> {
    NaiveDate::from_ymd_opt(2020, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date")
        .and_utc()
}

pub fn format_time(t: f64) -> String {
    let ms = (t * 1000.0).round() as i64;
    (epoch_zero() + Duration::milliseconds(ms)).to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn parse_time(s: &str) -> Result<f64, GpxError> {
    let dt = DateTime::parse_from_rfc3339(s.trim()).map_err(|e| malformed(format!("bad time `{s}`: {e}")))?;
    let delta = dt.with_timezone(&Utc) - epoch_zero();
    let micros = delta
        .num_microseconds()
        .ok_or_else(|| malformed(format!("time `{s}` out of range")))?;
    Ok(micros as f64 * 1e-6)
}

pub fn export_gpx(track: &Track) -> Result<String, GpxError> {
    if track.is_empty() {
        return Err(GpxError::EmptyTrack);
    }
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(
        "<gpx version=\"1.1\" creator=\"ofgnss\" xmlns=\"http://www.topografix.com/GPX/1/1\" \
         xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" \
         xsi:schemaLocation=\"http://www.topografix.com/GPX/1/1 http://www.topografix.com/GPX/1/1/gpx.xsd\">\n",
    );
    out.push_str("  <trk>\n");
    let _ = writeln!(out, "    <name>{}</name>", escape(track.name.as_str()));
    out.push_str("    <trkseg>\n");
    for p in track.points() {
        let _ = writeln!(
            out,
            "      <trkpt lat=\"{:.9}\" lon=\"{:.9}\"><ele>{:.3}</ele><time>{}</time></trkpt>",
            p.position.lat_deg(),
            p.position.lon_deg(),
            p.position.alt(),
            format_time(p.time)
        );
    }
    out.push_str("    </trkseg>\n  </trk>\n</gpx>\n");
    Ok(out)
}

#[derive(Default)]
struct PendingPoint {
    lat: f64,
    lon: f64,
    ele: Option<f64>,
    time: Option<f64>,
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    None,
    Ele,
    Time,
    Name,
}

fn coordinate(e: &BytesStart, key: &[u8]) -> Result<f64, GpxError> {
    for attr in e.attributes() {
        let attr = attr.map_err(|err| malformed(err.to_string()))?;
        if attr.key.local_name().as_ref() == key {
            let text = std::str::from_utf8(&attr.value).map_err(|err| malformed(err.to_string()))?;
            return text
                .trim()
                .parse()
                .map_err(|_| malformed(format!("bad {} `{text}`", String::from_utf8_lossy(key))));
        }
    }
    Err(malformed(format!(
        "trkpt without `{}` attribute",
        String::from_utf8_lossy(key)
    )))
}

fn finish(p: PendingPoint, index: usize) -> Result<TrackPoint, GpxError> {
    let time = p.time.ok_or_else(|| malformed(format!("track point {index} has no <time>")))?;
    let position = GeodeticCoord::from_degrees(p.lat, p.lon, p.ele.unwrap_or(0.0))
        .map_err(|e| malformed(format!("track point {index}: {e}")))?;
    Ok(TrackPoint { position, time })
}

/// Reads every `<trkpt>` in document order.
pub fn import_gpx(document: &str) -> Result<Track, GpxError> {
    let mut reader = Reader::from_str(document);
    let mut points = Vec::new();
    let mut pending: Option<PendingPoint> = None;
    let mut field = Field::None;
    let mut text = String::new();
    let mut name: Option<String> = None;
    let mut saw_gpx = false;
    loop {
        let event = reader
            .read_event()
            .map_err(|e| malformed(format!("at byte {}: {e}", reader.error_position())))?;
        match event {
            Event::Start(e) => {
                match e.local_name().as_ref() {
                    b"gpx" => saw_gpx = true,
                    b"trkpt" => {
                        pending = Some(PendingPoint {
                            lat: coordinate(&e, b"lat")?,
                            lon: coordinate(&e, b"lon")?,
                            ..Default::default()
                        })
                    }
                    b"ele" if pending.is_some() => field = Field::Ele,
                    b"time" if pending.is_some() => field = Field::Time,
                    b"name" if pending.is_none() && name.is_none() => field = Field::Name,
                    _ => {}
                }
                text.clear();
            }
            Event::Empty(e) if e.local_name().as_ref() == b"trkpt" => {
                let p = PendingPoint {
                    lat: coordinate(&e, b"lat")?,
                    lon: coordinate(&e, b"lon")?,
                    ..Default::default()
                };
                points.push(finish(p, points.len())?);
            }
            Event::Text(t) if field != Field::None => {
                text.push_str(&String::from_utf8_lossy(&t));
            }
            Event::GeneralRef(r) if field != Field::None => {
                let entity = String::from_utf8_lossy(&r).into_owned();
                match resolve_predefined_entity(&entity) {
                    Some(s) => text.push_str(s),
                    None => return Err(malformed(format!("unknown entity &{entity};"))),
                }
            }
            Event::End(e) => {
                match (e.local_name().as_ref(), field) {
                    (b"ele", Field::Ele) => {
                        let v = text.trim().parse().map_err(|_| malformed(format!("bad elevation `{text}`")))?;
                        if let Some(p) = pending.as_mut() {
                            p.ele = Some(v);
                        }
                    }
                    (b"time", Field::Time) => {
                        let t = parse_time(&text)?;
                        if let Some(p) = pending.as_mut() {
                            p.time = Some(t);
                        }
                    }
                    (b"name", Field::Name) => name = Some(text.trim().to_string()),
                    (b"trkpt", _) => {
                        let p = pending.take().ok_or_else(|| malformed("unbalanced </trkpt>"))?;
                        points.push(finish(p, points.len())?);
                    }
                    _ => {}
                }
                field = Field::None;
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !saw_gpx {
        return Err(malformed("no <gpx> root element"));
    }
    Track::new(name.unwrap_or_default(), TrackSource::Imported, points).map_err(|e| match e {
        TrackError::NonMonotonicTime { index } => GpxError::NonMonotonicTime { index },
        other => malformed(other.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_POINTS: &str = r#"<?xml version="1.0"?>
<gpx version="1.1" creator="hand" xmlns="http://www.topografix.com/GPX/1/1">
  <trk><name>Walk &amp; talk</name><trkseg>
    <trkpt lat="42.28245" lon="-71.34305"><ele>40.5</ele><time>2020-01-01T00:00:00Z</time></trkpt>
    <trkpt lat="42.28255" lon="-71.34295"><ele>63</ele><time>2020-01-01T00:12:00.250Z</time></trkpt>
  </trkseg></trk>
</gpx>"#;

    #[test]
    fn handwritten_two_points() {
        let t = import_gpx(TWO_POINTS).unwrap();
        assert_eq!(t.name, "Walk & talk");
        assert_eq!(t.len(), 2);
        let p = t.points();
        assert_eq!((p[0].position.lat_deg(), p[0].position.lon_deg(), p[0].position.alt()), (42.28245, -71.34305, 40.5));
        assert_eq!((p[1].position.lat_deg(), p[1].position.lon_deg(), p[1].position.alt()), (42.28255, -71.34295, 63.0));
        assert_eq!((p[0].time, p[1].time), (0.0, 720.25));
    }

    #[test]
    fn out_of_order_times() {
        let doc = TWO_POINTS.replace("00:12:00.250Z", "00:00:00.000Z");
        assert_eq!(import_gpx(&doc), Err(GpxError::NonMonotonicTime { index: 1 }));
    }

    #[test]
    fn missing_time_or_attribute() {
        let no_time = TWO_POINTS.replace("<time>2020-01-01T00:00:00Z</time>", "");
        assert!(matches!(import_gpx(&no_time), Err(GpxError::MalformedGpx(_))));
        let no_lat = TWO_POINTS.replacen("lat=\"42.28245\"", "", 1);
        assert!(matches!(import_gpx(&no_lat), Err(GpxError::MalformedGpx(_))));
        assert!(matches!(import_gpx("not xml at all"), Err(GpxError::MalformedGpx(_))));
    }

    #[test]
    fn empty_track_is_not_exported() {
        let t = Track::new("none", TrackSource::Estimate, vec![]).unwrap();
        assert_eq!(export_gpx(&t), Err(GpxError::EmptyTrack));
    }

    #[test]
    fn export_import_round_trip() {
        let t = import_gpx(TWO_POINTS).unwrap();
        let back = import_gpx(&export_gpx(&t).unwrap()).unwrap();
        assert_eq!(back.name, t.name);
        for (a, b) in t.points().iter().zip(back.points()) {
            assert!((a.position.lat_deg() - b.position.lat_deg()).abs() < 1e-7);
            assert!((a.time - b.time).abs() < 1e-3);
        }
    }

    #[test]
    fn time_formatting() {
        assert_eq!(format_time(0.0), "2020-01-01T00:00:00.000Z");
        assert_eq!(format_time(3661.5), "2020-01-01T01:01:01.500Z");
        assert_eq!(parse_time("2020-01-01T01:01:01.500Z").unwrap(), 3661.5);
    }
}
