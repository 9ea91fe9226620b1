//! XTF (eXtended Triton Format) ingestion.
//!
//! Only the sidescan sonar (type 0) and attitude (type 3) packets are decoded.
//! Every other packet type is skipped and counted. Byte streams are allowed to
//! be damaged: the reader scans forward to the next packet magic number when a
//! packet fails to validate.

mod bytes;
mod header;
mod nav;
mod packet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use header::{encode_file_header, parse_file_header, FILE_FORMAT_ID, HEADER_BLOCK_LEN};
pub use nav::{interpolate_nav, NavError, NavTrack};
pub use packet::{
    AttitudeRecord, Packet, PacketReader, ReaderStats, XtfWriter, HEADER_TYPE_ATTITUDE,
    HEADER_TYPE_SONAR, PACKET_MAGIC,
};

#[derive(Debug, Error)]
pub enum XtfError {
    #[error("unrecognized file format identifier {found:#04x}")]
    UnrecognizedFormat { found: u8 },
    #[error("file header declares no sonar channels")]
    EmptyChannelLayout,
    #[error("need {needed} bytes, only {available} available")]
    NeedMoreData { needed: usize, available: usize },
    #[error("channel {channel} has unsupported sample width of {bytes} bytes")]
    UnsupportedSampleWidth { channel: usize, bytes: u16 },
    #[error("packet truncated at byte offset {offset}")]
    TruncatedPacket { offset: u64 },
    #[error("ping batch is inconsistent: {0}")]
    InconsistentBatch(&'static str),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Which side of the vehicle a channel looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Port,
    Starboard,
    Other,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Port => "port",
            Side::Starboard => "starboard",
            Side::Other => "other",
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "port" => Ok(Side::Port),
            "starboard" | "stbd" => Ok(Side::Starboard),
            "other" => Ok(Side::Other),
            other => Err(format!("unknown channel side `{other}`")),
        }
    }
}

/// Per-channel layout from the file header.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelInfo {
    pub side: Side,
    /// 1 or 2.
    pub bytes_per_sample: u8,
    pub samples_per_ping_hint: u32,
    /// Beam depression below horizontal, degrees.
    pub tilt_angle: Option<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct XtfFileHeader {
    pub format_version: u8,
    pub system_type: u8,
    pub channel_count: u16,
    pub channel_infos: Vec<ChannelInfo>,
}

impl XtfFileHeader {
    pub fn new(channel_infos: Vec<ChannelInfo>) -> Self {
        Self {
            format_version: FILE_FORMAT_ID,
            system_type: 1,
            channel_count: channel_infos.len() as u16,
            channel_infos,
        }
    }
}

/// Where a ping's navigation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NavSource {
    Measured,
    Interpolated,
    Extrapolated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavFix {
    pub latitude: f64,
    pub longitude: f64,
    /// Degrees clockwise from north in `[0, 360)`.
    pub heading: f32,
    pub fix_time: DateTime<Utc>,
    pub source: NavSource,
}

impl NavFix {
    pub fn measured(latitude: f64, longitude: f64, heading: f32, fix_time: DateTime<Utc>) -> Self {
        Self {
            latitude,
            longitude,
            heading,
            fix_time,
            source: NavSource::Measured,
        }
    }

    /// `(0, 0)` is the acquisition-software placeholder for "no fix".
    pub fn is_placeholder(latitude: f64, longitude: f64) -> bool {
        latitude == 0.0 && longitude == 0.0
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.latitude)
            && (-180.0..=180.0).contains(&self.longitude)
            && (0.0..360.0).contains(&self.heading)
            && !Self::is_placeholder(self.latitude, self.longitude)
    }
}

/// One channel's return for one acoustic ping.
#[derive(Debug, Clone, PartialEq)]
pub struct SonarPing {
    pub ping_number: u32,
    pub timestamp: DateTime<Utc>,
    /// Index into [`XtfFileHeader::channel_infos`].
    pub channel: u16,
    pub side: Side,
    pub bytes_per_sample: u8,
    /// Samples ordered from nadir outward, sample `k` at slant `k * slant_range_max / n`.
    pub samples: Vec<u16>,
    pub slant_range_max: f32,
    pub sensor_altitude: Option<f32>,
    pub sound_velocity: f32,
    pub nav: Option<NavFix>,
    pub tilt_angle: Option<f32>,
    pub roll_angle: Option<f32>,
}

impl SonarPing {
    /// True when the whole ping lies inside the water column.
    pub fn is_degenerate(&self) -> bool {
        match self.sensor_altitude {
            Some(h) => self.slant_range_max <= h,
            None => false,
        }
    }

    /// Samples rescaled to 8 bits (`v * 255 / 65535` for 16-bit data).
    pub fn samples_u8(&self) -> Vec<u8> {
        if self.bytes_per_sample == 2 {
            self.samples
                .iter()
                .map(|&v| ((v as u32 * 255 + 32767) / 65535) as u8)
                .collect()
        } else {
            self.samples.iter().map(|&v| v.min(255) as u8).collect()
        }
    }
}
