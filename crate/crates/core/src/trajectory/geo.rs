use serde::{Deserialize, Serialize};

use super::TimedPoint;
use crate::error::{Error, Result};

/// WGS-84 semi-major axis, metres.
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;

/// Geodetic fix: degrees, degrees, metres above the ellipsoid, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoSample {
    pub t: f64,
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
}

impl GeoSample {
    fn check(&self, index: usize) -> Result<()> {
        let bad = |reason: String| Error::InvalidGeoSample { index, reason };
        if !(self.lat.is_finite() && (-90.0..=90.0).contains(&self.lat)) {
            return Err(bad(format!("latitude {} outside [-90, 90]", self.lat)));
        }
        if !(self.lon.is_finite() && (-180.0..=180.0).contains(&self.lon)) {
            return Err(bad(format!("longitude {} outside [-180, 180]", self.lon)));
        }
        if !self.alt.is_finite() || !self.t.is_finite() {
            return Err(bad("non-finite altitude or time".into()));
        }
        Ok(())
    }

    fn to_ecef(self) -> [f64; 3] {
        let e2 = WGS84_F * (2.0 - WGS84_F);
        let (sin_lat, cos_lat) = self.lat.to_radians().sin_cos();
        let (sin_lon, cos_lon) = self.lon.to_radians().sin_cos();
        let n = WGS84_A / (1.0 - e2 * sin_lat * sin_lat).sqrt();
        [(n + self.alt) * cos_lat * cos_lon, (n + self.alt) * cos_lat * sin_lon, (n * (1.0 - e2) + self.alt) * sin_lat]
    }
}

/// Converts geodetic fixes to the East-North plane tangent at `origin`.
///
/// The chain is geodetic to ECEF to ENU on WGS-84; the up component is
/// dropped. Vehicles are treated as points, so no body offset is applied.
pub fn geo_to_enu(samples: &[GeoSample], origin: &GeoSample) -> Result<Vec<TimedPoint>> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    origin.check(0).map_err(|e| match e {
        Error::InvalidGeoSample { reason, .. } => Error::InvalidArgument(format!("invalid origin: {reason}")),
        other => other,
    })?;
    for (i, s) in samples.iter().enumerate() {
        s.check(i)?;
    }

    let o = origin.to_ecef();
    let (sin_lat, cos_lat) = origin.lat.to_radians().sin_cos();
    let (sin_lon, cos_lon) = origin.lon.to_radians().sin_cos();

    Ok(samples
        .iter()
        .map(|s| {
            let p = s.to_ecef();
            let (dx, dy, dz) = (p[0] - o[0], p[1] - o[1], p[2] - o[2]);
            let east = -sin_lon * dx + cos_lon * dy;
            let north = -sin_lat * cos_lon * dx - sin_lat * sin_lon * dy + cos_lat * dz;
            TimedPoint { t: s.t, x: east, y: north }
        })
        .collect())
}
