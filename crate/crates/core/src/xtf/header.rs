use super::bytes::{LeReader, LeWriter};
use super::{ChannelInfo, Side, XtfError, XtfFileHeader};

/// First byte of every XTF file.
pub const FILE_FORMAT_ID: u8 = 0x7b;
/// The file header is a whole number of these blocks.
pub const HEADER_BLOCK_LEN: usize = 1024;

const FIXED_LEN: usize = 256;
const CHANINFO_LEN: usize = 128;
const CHANINFO_SLOTS_IN_FIRST_BLOCK: usize = 6;

fn header_len(channels: usize) -> usize {
    let raw = FIXED_LEN + channels.max(CHANINFO_SLOTS_IN_FIRST_BLOCK) * CHANINFO_LEN;
    raw.div_ceil(HEADER_BLOCK_LEN) * HEADER_BLOCK_LEN
}

fn opt_f32(v: f32) -> Option<f32> {
    (!v.is_nan()).then_some(v)
}

/// Decodes the file header. Returns the header and the number of bytes it occupies.
pub fn parse_file_header(bytes: &[u8]) -> Result<(XtfFileHeader, usize), XtfError> {
    if bytes.is_empty() {
        return Err(XtfError::NeedMoreData {
            needed: HEADER_BLOCK_LEN,
            available: 0,
        });
    }
    if bytes[0] != FILE_FORMAT_ID {
        return Err(XtfError::UnrecognizedFormat { found: bytes[0] });
    }
    if bytes.len() < FIXED_LEN {
        return Err(XtfError::NeedMoreData {
            needed: HEADER_BLOCK_LEN,
            available: bytes.len(),
        });
    }

    let mut r = LeReader::new(bytes);
    let format_version = r.u8();
    let system_type = r.u8();
    // recording program name/version, sonar name, sonar type, note, file name, nav units
    r.skip(8 + 8 + 16 + 2 + 64 + 64 + 2);
    let sonar = r.u16() as usize;
    let bathy = r.u16() as usize;
    let snippet = r.u8() as usize;
    let forward = r.u8() as usize;
    let echo = r.u16() as usize;
    let interferometry = r.u8() as usize;
    let channel_count = sonar + bathy + snippet + forward + echo + interferometry;
    if channel_count == 0 {
        return Err(XtfError::EmptyChannelLayout);
    }

    let total = header_len(channel_count);
    if bytes.len() < total {
        return Err(XtfError::NeedMoreData {
            needed: total,
            available: bytes.len(),
        });
    }

    let mut channel_infos = Vec::with_capacity(channel_count);
    for ch in 0..channel_count {
        let mut c = LeReader::at(bytes, FIXED_LEN + ch * CHANINFO_LEN);
        let side = match c.u8() {
            1 => Side::Port,
            2 => Side::Starboard,
            _ => Side::Other,
        };
        c.skip(1 + 2 + 2); // sub channel, correction flags, unipolar
        let bps = c.u16();
        if bps != 1 && bps != 2 {
            return Err(XtfError::UnsupportedSampleWidth {
                channel: ch,
                bytes: bps,
            });
        }
        let samples_per_ping_hint = c.u32();
        c.skip(16 + 4 + 4 + 4); // name, volt scale, frequency, horizontal beam angle
        let tilt_angle = opt_f32(c.f32());
        channel_infos.push(ChannelInfo {
            side,
            bytes_per_sample: bps as u8,
            samples_per_ping_hint,
            tilt_angle,
        });
    }

    Ok((
        XtfFileHeader {
            format_version,
            system_type,
            channel_count: channel_count as u16,
            channel_infos,
        },
        total,
    ))
}

pub fn encode_file_header(header: &XtfFileHeader) -> Vec<u8> {
    let n = header.channel_infos.len();
    let total = header_len(n);
    let mut w = LeWriter::with_capacity(total);
    w.u8(header.format_version);
    w.u8(header.system_type);
    w.fixed_str("sidescan", 8);
    w.fixed_str(env!("CARGO_PKG_VERSION"), 8);
    w.fixed_str("synthetic", 16);
    w.u16(0); // sonar type
    w.zeros(64); // note
    w.zeros(64); // file name
    w.u16(3); // nav units: lat/long
    w.u16(n as u16);
    w.u16(0);
    w.u8(0);
    w.u8(0);
    w.u16(0);
    w.u8(0);
    w.pad_to(FIXED_LEN);

    for info in &header.channel_infos {
        let start = w.len();
        w.u8(match info.side {
            Side::Port => 1,
            Side::Starboard => 2,
            Side::Other => 0,
        });
        w.u8(0);
        w.u16(0);
        w.u16(0);
        w.u16(info.bytes_per_sample as u16);
        w.u32(info.samples_per_ping_hint);
        w.fixed_str(
            match info.side {
                Side::Port => "PORT",
                Side::Starboard => "STBD",
                Side::Other => "OTHER",
            },
            16,
        );
        w.f32(1.0);
        w.f32(0.0);
        w.f32(0.0);
        w.f32(info.tilt_angle.unwrap_or(f32::NAN));
        w.pad_to(start + CHANINFO_LEN);
    }
    w.pad_to(total);
    w.into_inner()
}
