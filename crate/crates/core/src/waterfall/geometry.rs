//! Slant-range geometry and per-ping ground-range resampling.

use thiserror::Error;

use crate::xtf::Side;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum GeometryError {
    /// The slant distance is shorter than the altitude, i.e. the sample is in the water column.
    #[error("slant distance {slant} m is inside the water column (altitude {altitude} m)")]
    WaterColumnSample { slant: f64, altitude: f64 },
    #[error("depression angle {0} deg is outside (0, 90)")]
    DegenerateGeometry(f64),
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

/// Horizontal distance from nadir to a seafloor point seen at slant `d_slant`.
pub fn slant_to_ground(d_slant: f64, h: f64) -> Result<f64, GeometryError> {
    if !(h >= 0.0) {
        return Err(GeometryError::InvalidInput("altitude must be >= 0"));
    }
    if d_slant < h {
        return Err(GeometryError::WaterColumnSample {
            slant: d_slant,
            altitude: h,
        });
    }
    Ok(((d_slant - h) * (d_slant + h)).sqrt())
}

/// Slant distance from sound speed and two-way travel time.
pub fn slant_from_twtt(c: f64, t_twtt: f64) -> Result<f64, GeometryError> {
    if !(c > 0.0) {
        return Err(GeometryError::InvalidInput("sound speed must be > 0"));
    }
    if !(t_twtt >= 0.0) {
        return Err(GeometryError::InvalidInput("travel time must be >= 0"));
    }
    Ok(c * t_twtt / 2.0)
}

/// Altitude from the first bottom return and the beam depression angle.
///
/// `tilt` is the depression below horizontal in degrees. `roll` is the roll that
/// raises this channel's side (see [`roll_toward_side`]); it reduces the
/// effective depression.
pub fn altitude_from_geometry(
    d_slant_first_return: f64,
    tilt: f64,
    roll: Option<f64>,
) -> Result<f64, GeometryError> {
    let theta = tilt - roll.unwrap_or(0.0);
    if !(theta > 0.0 && theta < 90.0) {
        return Err(GeometryError::DegenerateGeometry(theta));
    }
    Ok(d_slant_first_return * theta.to_radians().sin())
}

/// Converts a vehicle roll (positive = starboard side down) into the roll that
/// raises the given channel's side.
pub fn roll_toward_side(side: Side, roll: f64) -> Option<f64> {
    match side {
        Side::Port => Some(roll),
        Side::Starboard => Some(-roll),
        Side::Other => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlantGeometry {
    /// Altitude above the seafloor at nadir, meters.
    pub h: f64,
    pub slant_max: f64,
    /// Sound speed, m/s.
    pub c: f64,
    pub n_samples: usize,
}

impl SlantGeometry {
    pub fn is_degenerate(&self) -> bool {
        !(self.slant_max > self.h) || self.n_samples == 0
    }

    /// Total ground range covered by the ping.
    pub fn ground_range(&self) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            ((self.slant_max - self.h) * (self.slant_max + self.h)).sqrt()
        }
    }

    pub fn ground_range_per_col(&self) -> f64 {
        self.ground_range() / self.n_samples as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedPing {
    pub values: Vec<u8>,
    pub ground_range_per_col: f64,
    pub degenerate: bool,
}

/// Resamples one ping from slant range onto a uniform ground-range grid.
///
/// Output bin `k` sits at ground range `k * step`. `step` defaults to the ping's
/// own ground range divided by its sample count. Bins whose slant lies beyond
/// the recorded range are zero.
pub fn resample_to_ground(samples: &[u8], geom: &SlantGeometry, step: f64, out_len: usize) -> Vec<u8> {
    let n = samples.len();
    let mut out = vec![0u8; out_len];
    if geom.is_degenerate() || n == 0 {
        return out;
    }
    let own_step = geom.ground_range_per_col();
    // Expressed in sample units so that step == own_step and h == 0 give exact integers.
    let rho = if step == own_step { 1.0 } else { step / own_step };
    let r = geom.h / geom.slant_max;
    let across = 1.0 - r * r;
    let nr = n as f64 * r;
    let nr2 = nr * nr;
    for (k, o) in out.iter_mut().enumerate() {
        let kr = k as f64 * rho;
        let x = (kr * kr * across + nr2).sqrt();
        let i0 = x.floor() as usize;
        if i0 >= n {
            break;
        }
        let frac = x - i0 as f64;
        let a = samples[i0] as f64;
        *o = if frac == 0.0 || i0 + 1 >= n {
            samples[i0]
        } else {
            let b = samples[i0 + 1] as f64;
            (a + (b - a) * frac).round() as u8
        };
    }
    out
}

/// Slant-range correction of one ping onto `n_samples` ground bins.
pub fn correct_ping(samples: &[u8], geom: &SlantGeometry) -> CorrectedPing {
    let degenerate = geom.is_degenerate() || samples.len() != geom.n_samples;
    if degenerate {
        return CorrectedPing {
            values: vec![0; geom.n_samples],
            ground_range_per_col: 0.0,
            degenerate: true,
        };
    }
    let step = geom.ground_range_per_col();
    CorrectedPing {
        values: resample_to_ground(samples, geom, step, geom.n_samples),
        ground_range_per_col: step,
        degenerate: false,
    }
}
