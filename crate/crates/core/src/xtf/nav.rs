use thiserror::Error;

use super::{NavFix, NavSource, SonarPing};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NavError {
    #[error("need at least two navigation fixes, found {found}")]
    InsufficientNav { found: usize },
}

/// Shortest signed angular difference `b - a`, in `(-180, 180]`.
pub(crate) fn heading_delta(a: f64, b: f64) -> f64 {
    let d = (b - a).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

fn wrap_heading(h: f64) -> f32 {
    let w = h.rem_euclid(360.0) as f32;
    // rem_euclid can round up to exactly 360 after the f32 cast
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

fn lerp_within(a: f64, b: f64, f: f64) -> f64 {
    (a + (b - a) * f).clamp(a.min(b), a.max(b))
}

fn blend(prev: &NavFix, next: &NavFix, target: chrono::DateTime<chrono::Utc>) -> NavFix {
    let span = (next.fix_time - prev.fix_time).num_microseconds().unwrap_or(0) as f64;
    let f = if span > 0.0 {
        let off = (target - prev.fix_time).num_microseconds().unwrap_or(0) as f64;
        (off / span).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let h0 = prev.heading as f64;
    NavFix {
        latitude: lerp_within(prev.latitude, next.latitude, f),
        longitude: lerp_within(prev.longitude, next.longitude, f),
        heading: wrap_heading(h0 + heading_delta(h0, next.heading as f64) * f),
        fix_time: target,
        source: NavSource::Interpolated,
    }
}

/// Anything carrying a timestamp and an optional navigation fix.
pub trait NavTrack {
    fn time(&self) -> chrono::DateTime<chrono::Utc>;
    fn nav(&self) -> Option<&NavFix>;
    fn set_nav(&mut self, fix: NavFix);
}

impl NavTrack for SonarPing {
    fn time(&self) -> chrono::DateTime<chrono::Utc> {
        self.timestamp
    }
    fn nav(&self) -> Option<&NavFix> {
        self.nav.as_ref()
    }
    fn set_nav(&mut self, fix: NavFix) {
        self.nav = Some(fix);
    }
}

/// Fills every ping's navigation from the measured fixes around it.
///
/// Latitude and longitude are interpolated linearly in time, heading along the
/// shortest arc. Pings outside the measured span copy the nearest fix and are
/// marked [`NavSource::Extrapolated`]. Only measured fixes act as anchors, so
/// running this twice gives the same result.
pub fn interpolate_nav<T: NavTrack>(pings: &mut [T]) -> Result<(), NavError> {
    let anchors: Vec<usize> = pings
        .iter()
        .enumerate()
        .filter(|(_, p)| matches!(p.nav(), Some(n) if n.source == NavSource::Measured))
        .map(|(i, _)| i)
        .collect();
    if anchors.len() < 2 {
        return Err(NavError::InsufficientNav {
            found: anchors.len(),
        });
    }

    let first = anchors[0];
    let last = *anchors.last().unwrap();
    let mut next_anchor = 0usize;
    for i in 0..pings.len() {
        while next_anchor < anchors.len() && anchors[next_anchor] < i {
            next_anchor += 1;
        }
        if next_anchor < anchors.len() && anchors[next_anchor] == i {
            continue;
        }
        let t = pings[i].time();
        let fix = if i < first {
            let mut n = pings[first].nav().cloned().unwrap();
            n.fix_time = t;
            n.source = NavSource::Extrapolated;
            n
        } else if i > last {
            let mut n = pings[last].nav().cloned().unwrap();
            n.fix_time = t;
            n.source = NavSource::Extrapolated;
            n
        } else {
            let prev = pings[anchors[next_anchor - 1]].nav().unwrap();
            let next = pings[anchors[next_anchor]].nav().unwrap();
            blend(prev, next, t)
        };
        pings[i].set_nav(fix);
    }
    Ok(())
}
