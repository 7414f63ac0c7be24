//! Trip and geodetic CSV files.
//!
//! Trip files carry the header `t,x,y,speed,heading,accel`; the last three
//! columns are optional and derived from positions when any is missing.
//! Geodetic files carry `t,lat,lon,alt`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::kinematics::{is_uniform, resample_columns, unwrap_angles};
use super::{derive_kinematics, GeoSample, TimedPoint, Trip, VehicleState, SAMPLE_PERIOD};
use crate::error::{Error, Result};

const TRIP_COLUMNS: [&str; 6] = ["t", "x", "y", "speed", "heading", "accel"];

fn read_table(path: &Path, required: &[&str], optional: &[&str]) -> Result<Vec<Vec<Option<f64>>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers =
        reader.headers().map_err(|e| Error::CsvFormat { path: path.to_path_buf(), reason: e.to_string() })?.clone();
    let index_of = |name: &str| headers.iter().position(|h| h == name);
    let mut columns = Vec::new();
    for &name in required {
        let idx = index_of(name).ok_or_else(|| Error::CsvFormat {
            path: path.to_path_buf(),
            reason: format!("missing required column `{name}`"),
        })?;
        columns.push(Some(idx));
    }
    for &name in optional {
        columns.push(index_of(name));
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::CsvRow { path: path.to_path_buf(), row, reason: e.to_string() })?;
        let mut values = Vec::with_capacity(columns.len());
        for (c, idx) in columns.iter().enumerate() {
            let Some(idx) = idx else {
                values.push(None);
                continue;
            };
            let name = if c < required.len() { required[c] } else { optional[c - required.len()] };
            let field = record.get(*idx).ok_or_else(|| Error::CsvRow {
                path: path.to_path_buf(),
                row,
                reason: format!("missing field `{name}`"),
            })?;
            let v: f64 = field.parse().map_err(|_| Error::CsvRow {
                path: path.to_path_buf(),
                row,
                reason: format!("`{name}` is not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::CsvRow { path: path.to_path_buf(), row, reason: format!("`{name}` is not finite") });
            }
            values.push(Some(v));
        }
        if let (Some(Some(t)), Some(prev)) = (values.first(), rows.last().map(|r: &Vec<Option<f64>>| r[0])) {
            if *t <= prev.unwrap_or(f64::NEG_INFINITY) {
                return Err(Error::CsvRow {
                    path: path.to_path_buf(),
                    row,
                    reason: format!("time {t} does not increase"),
                });
            }
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::CsvFormat { path: path.to_path_buf(), reason: "no data rows".into() });
    }
    Ok(rows)
}

/// Loads a trip. The vehicle id is the file stem.
///
/// Rows off the 100 ms grid are linearly resampled onto it.
pub fn load_trip_csv(path: impl AsRef<Path>) -> Result<Trip> {
    let path = path.as_ref();
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trip").trim_end_matches(".trip").to_owned();
    let rows = read_table(path, &TRIP_COLUMNS[..3], &TRIP_COLUMNS[3..])?;
    let has_all = rows[0][3..].iter().all(Option::is_some);
    if !has_all {
        let pts: Vec<TimedPoint> =
            rows.iter().map(|r| TimedPoint { t: r[0].unwrap(), x: r[1].unwrap(), y: r[2].unwrap() }).collect();
        return derive_kinematics(&id, &pts);
    }

    let col = |c: usize| -> Vec<f64> { rows.iter().map(|r| r[c].unwrap()).collect() };
    let times = col(0);
    let mut cols: Vec<Vec<f64>> = (1..6).map(col).collect();
    cols[3] = unwrap_angles(&cols[3]);
    let (times, cols) = if is_uniform(&times, SAMPLE_PERIOD) || times.len() == 1 {
        (times, cols)
    } else {
        resample_columns(&times, &cols, SAMPLE_PERIOD)
    };
    let states: Vec<VehicleState> = (0..times.len())
        .map(|k| VehicleState {
            t: times[k],
            x: cols[0][k],
            y: cols[1][k],
            speed: cols[2][k],
            heading: cols[3][k],
            accel: cols[4][k],
        })
        .collect();
    if let Some((k, _)) = states.iter().enumerate().find(|(_, s)| s.speed < 0.0) {
        return Err(Error::CsvRow { path: path.to_path_buf(), row: k + 1, reason: "negative speed".into() });
    }
    Trip::new(id, states, SAMPLE_PERIOD)
}

/// Writes a trip with full-precision (round-trip exact) numbers.
pub fn save_trip_csv(trip: &Trip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", TRIP_COLUMNS.join(",")).map_err(io)?;
    for s in trip.states() {
        writeln!(w, "{},{},{},{},{},{}", s.t, s.x, s.y, s.speed, s.heading, s.accel).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_geo_csv(path: impl AsRef<Path>) -> Result<Vec<GeoSample>> {
    let path = path.as_ref();
    let rows = read_table(path, &["t", "lat", "lon", "alt"], &[])?;
    Ok(rows
        .iter()
        .map(|r| GeoSample { t: r[0].unwrap(), lat: r[1].unwrap(), lon: r[2].unwrap(), alt: r[3].unwrap() })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{generate_synthetic_trip, InitialState, ManeuverScript, Segment};

    fn sample_trip() -> Trip {
        let script = ManeuverScript::new(
            InitialState { x: 1.0, y: -2.0, speed: 12.0, heading: 0.4 },
            vec![Segment::Turn { duration: 2.0, yaw_rate: 0.3 }, Segment::Brake { duration: 1.0, accel: -2.5 }],
        );
        generate_synthetic_trip(&script, 0).unwrap().trip
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rv.csv");
        let trip = sample_trip();
        save_trip_csv(&trip, &path).unwrap();
        let back = load_trip_csv(&path).unwrap();
        assert_eq!(back.vehicle_id, "rv");
        assert_eq!(back.states(), trip.states());
    }

    #[test]
    fn missing_heading_derives_kinematics() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let mut text = String::from("t,x,y,speed\n");
        for k in 0..10 {
            text += &format!("{},{},0,5\n", k as f64 * 0.1, k as f64 * 0.5);
        }
        std::fs::write(&path, text).unwrap();
        let trip = load_trip_csv(&path).unwrap();
        assert_eq!(trip.len(), 10);
        assert!(trip.states().iter().all(|s| (s.speed - 5.0).abs() < 1e-9));
    }

    #[test]
    fn decreasing_time_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t,x,y\n0,0,0\n0.1,1,0\n0.05,2,0\n").unwrap();
        let err = load_trip_csv(&path).unwrap_err();
        assert!(matches!(err, Error::CsvRow { row: 3, .. }), "{err}");
    }

    #[test]
    fn missing_column_and_nan_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t,x\n0,0\n").unwrap();
        let err = load_trip_csv(&path).unwrap_err();
        assert!(err.to_string().contains("missing required column `y`"));
        std::fs::write(&path, "t,x,y\n0,0,0\n0.1,NaN,0\n0.2,1,1\n").unwrap();
        let err = load_trip_csv(&path).unwrap_err();
        assert!(matches!(err, Error::CsvRow { row: 2, .. }), "{err}");
    }

    #[test]
    fn geo_csv_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        std::fs::write(&path, "t,lat,lon,alt\n0,42.0,-83.0,200\n0.1,42.00001,-83.0,200\n").unwrap();
        let g = load_geo_csv(&path).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[1].lat, 42.00001);
    }
}
