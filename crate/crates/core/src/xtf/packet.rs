use std::io::{Read, Write};

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Timelike, Utc};

use super::bytes::{LeReader, LeWriter};
use super::header::{encode_file_header, parse_file_header, HEADER_BLOCK_LEN};
use super::{NavFix, SonarPing, XtfError, XtfFileHeader};

/// Every packet starts with this little-endian `u16`.
pub const PACKET_MAGIC: u16 = 0xFACE;
pub const HEADER_TYPE_SONAR: u8 = 0;
pub const HEADER_TYPE_ATTITUDE: u8 = 3;

const MAGIC_BYTES: [u8; 2] = PACKET_MAGIC.to_le_bytes();
const COMMON_LEN: usize = 14;
const PING_HEADER_LEN: usize = 256;
const CHAN_HEADER_LEN: usize = 64;
const ATTITUDE_LEN: usize = 64;
const RECORD_ALIGN: usize = 64;
const MAX_RECORD_LEN: usize = 64 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct AttitudeRecord {
    pub pitch: f32,
    pub roll: f32,
    pub heave: f32,
    pub yaw: f32,
    pub heading: f32,
    pub time_tag: u32,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Packet {
    /// One ping per channel carried by the packet, in packet order.
    Pings(Vec<SonarPing>),
    Attitude(AttitudeRecord),
    EndOfStream,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReaderStats {
    pub packets: u64,
    pub skipped_unknown: u64,
    pub resyncs: u64,
    pub discarded_bytes: u64,
}

fn decode_time(y: u16, mo: u8, d: u8, h: u8, mi: u8, s: u8, millis: u32) -> Option<DateTime<Utc>> {
    let date = NaiveDate::from_ymd_opt(y as i32, mo as u32, d as u32)?;
    let t = date.and_hms_milli_opt(h as u32, mi as u32, s as u32, millis)?;
    Some(Utc.from_utc_datetime(&t))
}

fn hundredths(t: &DateTime<Utc>) -> u8 {
    (t.timestamp_subsec_millis() / 10) as u8
}

/// Fix times only carry a time of day; attach it to the ping's date, choosing the
/// calendar day that puts it closest to the ping.
fn fix_time_near(ping: DateTime<Utc>, h: u8, m: u8, s: u8, hs: u8) -> Option<DateTime<Utc>> {
    let t = decode_time(
        ping.year() as u16,
        ping.month() as u8,
        ping.day() as u8,
        h,
        m,
        s,
        hs as u32 * 10,
    )?;
    let diff = t - ping;
    Some(if diff > Duration::hours(12) {
        t - Duration::days(1)
    } else if diff < Duration::hours(-12) {
        t + Duration::days(1)
    } else {
        t
    })
}

fn opt_f32(v: f32) -> Option<f32> {
    (!v.is_nan()).then_some(v)
}

fn decode_sonar(rec: &[u8], header: &XtfFileHeader) -> Option<Vec<SonarPing>> {
    if rec.len() < PING_HEADER_LEN {
        return None;
    }
    let mut r = LeReader::at(rec, 4);
    let nchans = r.u16() as usize;

    let mut r = LeReader::at(rec, 14);
    let (y, mo, d, h, mi, s, hs) = (r.u16(), r.u8(), r.u8(), r.u8(), r.u8(), r.u8(), r.u8());
    let timestamp = decode_time(y, mo, d, h, mi, s, hs as u32 * 10)?;
    let mut r = LeReader::at(rec, 28);
    let ping_number = r.u32();
    let sound_velocity = r.f32();
    let mut r = LeReader::at(rec, 148);
    let (fh, fm, fs, fhs) = (r.u8(), r.u8(), r.u8(), r.u8());
    let mut r = LeReader::at(rec, 160);
    let lat = r.f64();
    let lon = r.f64();
    let altitude = opt_f32(LeReader::at(rec, 196).f32()).filter(|a| *a >= 0.0);
    let roll = opt_f32(LeReader::at(rec, 208).f32());
    let heading = LeReader::at(rec, 212).f32();

    let nav = if NavFix::is_placeholder(lat, lon) {
        None
    } else {
        let fix_time = fix_time_near(timestamp, fh, fm, fs, fhs)?;
        let fix = NavFix::measured(lat, lon, heading, fix_time);
        fix.is_valid().then_some(fix)
    };

    if !(sound_velocity > 0.0) {
        return None;
    }

    let mut pings = Vec::with_capacity(nchans);
    let mut pos = PING_HEADER_LEN;
    for _ in 0..nchans {
        if rec.len() < pos + CHAN_HEADER_LEN {
            return None;
        }
        let mut c = LeReader::at(rec, pos);
        let channel = c.u16();
        let info = header.channel_infos.get(channel as usize)?;
        let slant_range_max = LeReader::at(rec, pos + 4).f32();
        let n = LeReader::at(rec, pos + 42).u32() as usize;
        if n == 0 || !(slant_range_max > 0.0) {
            return None;
        }
        let bps = info.bytes_per_sample as usize;
        let data_start = pos + CHAN_HEADER_LEN;
        let data_len = n.checked_mul(bps)?;
        if rec.len() < data_start + data_len {
            return None;
        }
        let mut d = LeReader::at(rec, data_start);
        let samples = if bps == 1 {
            d.bytes(n).iter().map(|&b| b as u16).collect()
        } else {
            (0..n).map(|_| d.u16()).collect()
        };
        pos = data_start + data_len;
        pings.push(SonarPing {
            ping_number,
            timestamp,
            channel,
            side: info.side,
            bytes_per_sample: info.bytes_per_sample,
            samples,
            slant_range_max,
            sensor_altitude: altitude,
            sound_velocity,
            nav: nav.clone(),
            tilt_angle: info.tilt_angle,
            roll_angle: roll,
        });
    }
    Some(pings)
}

fn decode_attitude(rec: &[u8]) -> Option<AttitudeRecord> {
    if rec.len() < ATTITUDE_LEN {
        return None;
    }
    let mut r = LeReader::at(rec, 22);
    let pitch = r.f32();
    let roll = r.f32();
    let heave = r.f32();
    let yaw = r.f32();
    let time_tag = r.u32();
    let heading = r.f32();
    let (y, mo, d, h, mi, s) = (r.u16(), r.u8(), r.u8(), r.u8(), r.u8(), r.u8());
    let ms = r.u16();
    let timestamp = decode_time(y, mo, d, h, mi, s, ms as u32)?;
    Some(AttitudeRecord {
        pitch,
        roll,
        heave,
        yaw,
        heading,
        time_tag,
        timestamp,
    })
}

/// Sequential packet decoder over any byte source.
pub struct PacketReader<R> {
    inner: R,
    header: XtfFileHeader,
    buf: Vec<u8>,
    start: usize,
    /// Stream offset of `buf[0]`.
    base: u64,
    eof: bool,
    stats: ReaderStats,
}

impl<R: Read> PacketReader<R> {
    /// Reads and validates the file header, leaving the stream at the first packet.
    pub fn new(inner: R) -> Result<Self, XtfError> {
        let mut reader = Self {
            inner,
            header: XtfFileHeader::new(vec![]),
            buf: Vec::with_capacity(1 << 16),
            start: 0,
            base: 0,
            eof: false,
            stats: ReaderStats::default(),
        };
        let mut want = HEADER_BLOCK_LEN;
        loop {
            reader.fill(want)?;
            match parse_file_header(reader.available()) {
                Ok((header, used)) => {
                    reader.header = header;
                    reader.consume(used);
                    return Ok(reader);
                }
                Err(XtfError::NeedMoreData { needed, .. }) if !reader.eof && needed > want => {
                    want = needed;
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn header(&self) -> &XtfFileHeader {
        &self.header
    }

    pub fn stats(&self) -> ReaderStats {
        self.stats
    }

    /// Stream offset of the next unread byte.
    pub fn offset(&self) -> u64 {
        self.base + self.start as u64
    }

    fn available(&self) -> &[u8] {
        &self.buf[self.start..]
    }

    fn consume(&mut self, n: usize) {
        self.start += n;
    }

    /// Tries to make `n` bytes available. Returns false at end of stream.
    fn fill(&mut self, n: usize) -> Result<bool, XtfError> {
        while self.buf.len() - self.start < n {
            if self.eof {
                return Ok(false);
            }
            if self.start > 0 && self.start >= self.buf.len() / 2 {
                self.buf.drain(..self.start);
                self.base += self.start as u64;
                self.start = 0;
            }
            let old = self.buf.len();
            let want = (n - (old - self.start)).max(1 << 16);
            self.buf.resize(old + want, 0);
            let got = loop {
                match self.inner.read(&mut self.buf[old..]) {
                    Ok(k) => break k,
                    Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
                    Err(e) => {
                        self.buf.truncate(old);
                        return Err(e.into());
                    }
                }
            };
            self.buf.truncate(old + got);
            if got == 0 {
                self.eof = true;
            }
        }
        Ok(true)
    }

    /// Drops bytes until the next packet magic number. Returns false if the
    /// stream ends first.
    fn resync(&mut self, skip_first: bool) -> Result<bool, XtfError> {
        let from = self.offset();
        let mut dropped = 0u64;
        if skip_first && !self.available().is_empty() {
            self.consume(1);
            dropped += 1;
        }
        let found = loop {
            if let Some(i) = self.available().windows(2).position(|w| w == MAGIC_BYTES) {
                self.consume(i);
                dropped += i as u64;
                break true;
            }
            let keep = usize::from(self.available().last() == Some(&MAGIC_BYTES[0]));
            let drop = self.available().len() - keep;
            self.consume(drop);
            dropped += drop as u64;
            if !self.fill(2)? {
                dropped += self.available().len() as u64;
                let rest = self.available().len();
                self.consume(rest);
                break false;
            }
        };
        self.stats.resyncs += 1;
        self.stats.discarded_bytes += dropped;
        tracing::warn!(
            event = "xtf_resync",
            offset = from,
            discarded = dropped,
            recovered = found,
            "discarded corrupt bytes"
        );
        Ok(found)
    }

    /// Decodes the next sonar or attitude packet, skipping anything else.
    pub fn next_packet(&mut self) -> Result<Packet, XtfError> {
        loop {
            if !self.fill(COMMON_LEN)? {
                let rest = self.available();
                if rest.is_empty() {
                    return Ok(Packet::EndOfStream);
                }
                if rest.starts_with(&MAGIC_BYTES) {
                    return Err(XtfError::TruncatedPacket {
                        offset: self.offset(),
                    });
                }
                if !self.resync(false)? {
                    return Ok(Packet::EndOfStream);
                }
                continue;
            }
            if !self.available().starts_with(&MAGIC_BYTES) {
                if !self.resync(false)? {
                    return Ok(Packet::EndOfStream);
                }
                continue;
            }

            let mut r = LeReader::new(self.available());
            r.skip(2);
            let header_type = r.u8();
            r.skip(1 + 2 + 4);
            let len = r.u32() as usize;
            if !(COMMON_LEN..=MAX_RECORD_LEN).contains(&len) {
                self.resync(true)?;
                continue;
            }

            if !self.fill(len)? {
                // Either a real truncation or a false magic inside trailing garbage.
                let has_later_magic = self.available()[1..]
                    .windows(2)
                    .any(|w| w == MAGIC_BYTES);
                if has_later_magic {
                    self.resync(true)?;
                    continue;
                }
                return Err(XtfError::TruncatedPacket {
                    offset: self.offset(),
                });
            }

            let rec = &self.available()[..len];
            let decoded = match header_type {
                HEADER_TYPE_SONAR => decode_sonar(rec, &self.header).map(Packet::Pings),
                HEADER_TYPE_ATTITUDE => decode_attitude(rec).map(Packet::Attitude),
                other => {
                    tracing::warn!(
                        event = "xtf_unknown_packet",
                        offset = self.offset(),
                        header_type = other,
                        len,
                        "skipping unsupported packet type"
                    );
                    self.consume(len);
                    self.stats.skipped_unknown += 1;
                    continue;
                }
            };
            match decoded {
                Some(packet) => {
                    self.consume(len);
                    self.stats.packets += 1;
                    return Ok(packet);
                }
                None => {
                    tracing::warn!(
                        event = "xtf_corrupt_packet",
                        offset = self.offset(),
                        header_type,
                        "packet failed validation"
                    );
                    self.resync(true)?;
                }
            }
        }
    }

    /// Collects every ping in the stream, in stream order.
    pub fn read_all_pings(&mut self) -> Result<Vec<SonarPing>, XtfError> {
        let mut out = Vec::new();
        loop {
            match self.next_packet()? {
                Packet::Pings(batch) => out.extend(batch),
                Packet::Attitude(_) => {}
                Packet::EndOfStream => return Ok(out),
            }
        }
    }
}

fn write_common(w: &mut LeWriter, header_type: u8, nchans: u16) {
    w.u16(PACKET_MAGIC);
    w.u8(header_type);
    w.u8(0);
    w.u16(nchans);
    w.u16(0);
    w.u16(0);
    w.u32(0); // patched with the record length
}

fn finish_record(mut w: LeWriter) -> Vec<u8> {
    let len = w.len().div_ceil(RECORD_ALIGN) * RECORD_ALIGN;
    w.pad_to(len);
    w.patch_u32(10, len as u32);
    w.into_inner()
}

/// Encodes one ping batch (all channels of one ping) as a sonar packet.
pub fn encode_ping_batch(pings: &[SonarPing]) -> Result<Vec<u8>, XtfError> {
    let first = pings
        .first()
        .ok_or(XtfError::InconsistentBatch("empty batch"))?;
    for p in &pings[1..] {
        if p.ping_number != first.ping_number
            || p.timestamp != first.timestamp
            || p.sound_velocity.to_bits() != first.sound_velocity.to_bits()
            || p.sensor_altitude.map(f32::to_bits) != first.sensor_altitude.map(f32::to_bits)
            || p.roll_angle.map(f32::to_bits) != first.roll_angle.map(f32::to_bits)
            || p.nav != first.nav
        {
            return Err(XtfError::InconsistentBatch(
                "pings in one packet must share ping-level fields",
            ));
        }
    }
    if pings.iter().any(|p| p.samples.is_empty()) {
        return Err(XtfError::InconsistentBatch("ping without samples"));
    }

    let data: usize = pings
        .iter()
        .map(|p| CHAN_HEADER_LEN + p.samples.len() * p.bytes_per_sample as usize)
        .sum();
    let mut w = LeWriter::with_capacity(PING_HEADER_LEN + data + RECORD_ALIGN);
    write_common(&mut w, HEADER_TYPE_SONAR, pings.len() as u16);

    let t = first.timestamp;
    w.u16(t.year() as u16);
    w.u8(t.month() as u8);
    w.u8(t.day() as u8);
    w.u8(t.hour() as u8);
    w.u8(t.minute() as u8);
    w.u8(t.second() as u8);
    w.u8(hundredths(&t));
    w.u16(t.ordinal() as u16);
    w.u32(first.ping_number); // event number
    w.u32(first.ping_number);
    w.f32(first.sound_velocity);
    w.pad_to(148);
    match &first.nav {
        Some(nav) => {
            w.u8(nav.fix_time.hour() as u8);
            w.u8(nav.fix_time.minute() as u8);
            w.u8(nav.fix_time.second() as u8);
            w.u8(hundredths(&nav.fix_time));
        }
        None => w.zeros(4),
    }
    w.pad_to(160);
    let (lat, lon, heading) = first
        .nav
        .as_ref()
        .map(|n| (n.latitude, n.longitude, n.heading))
        .unwrap_or((0.0, 0.0, 0.0));
    w.f64(lat);
    w.f64(lon);
    w.pad_to(196);
    w.f32(first.sensor_altitude.unwrap_or(f32::NAN));
    w.f32(0.0);
    w.f32(0.0);
    w.f32(first.roll_angle.unwrap_or(f32::NAN));
    w.f32(heading);
    w.pad_to(PING_HEADER_LEN);

    for p in pings {
        let start = w.len();
        w.u16(p.channel);
        w.u16(0);
        w.f32(p.slant_range_max);
        w.pad_to(start + 42);
        w.u32(p.samples.len() as u32);
        w.pad_to(start + CHAN_HEADER_LEN);
        if p.bytes_per_sample == 1 {
            for &s in &p.samples {
                w.u8(s as u8);
            }
        } else {
            for &s in &p.samples {
                w.u16(s);
            }
        }
    }
    Ok(finish_record(w))
}

pub fn encode_attitude(a: &AttitudeRecord) -> Vec<u8> {
    let mut w = LeWriter::with_capacity(ATTITUDE_LEN);
    write_common(&mut w, HEADER_TYPE_ATTITUDE, 0);
    w.u32(0);
    w.u32(0);
    w.f32(a.pitch);
    w.f32(a.roll);
    w.f32(a.heave);
    w.f32(a.yaw);
    w.u32(a.time_tag);
    w.f32(a.heading);
    let t = a.timestamp;
    w.u16(t.year() as u16);
    w.u8(t.month() as u8);
    w.u8(t.day() as u8);
    w.u8(t.hour() as u8);
    w.u8(t.minute() as u8);
    w.u8(t.second() as u8);
    w.u16(t.timestamp_subsec_millis() as u16);
    finish_record(w)
}

/// Encodes a packet of arbitrary type with an opaque payload.
pub fn encode_raw(header_type: u8, payload: &[u8]) -> Vec<u8> {
    let mut w = LeWriter::with_capacity(COMMON_LEN + payload.len() + RECORD_ALIGN);
    write_common(&mut w, header_type, 0);
    for &b in payload {
        w.u8(b);
    }
    finish_record(w)
}

/// Streaming XTF encoder. Ping batches become sonar packets; consecutive pings
/// sharing a ping number are grouped into one packet.
pub struct XtfWriter<W: Write> {
    out: W,
}

impl<W: Write> XtfWriter<W> {
    pub fn new(mut out: W, header: &XtfFileHeader) -> Result<Self, XtfError> {
        out.write_all(&encode_file_header(header))?;
        Ok(Self { out })
    }

    pub fn write_batch(&mut self, pings: &[SonarPing]) -> Result<(), XtfError> {
        self.out.write_all(&encode_ping_batch(pings)?)?;
        Ok(())
    }

    pub fn write_pings(&mut self, pings: &[SonarPing]) -> Result<(), XtfError> {
        for batch in pings.chunk_by(|a, b| a.ping_number == b.ping_number) {
            self.write_batch(batch)?;
        }
        Ok(())
    }

    pub fn write_attitude(&mut self, a: &AttitudeRecord) -> Result<(), XtfError> {
        self.out.write_all(&encode_attitude(a))?;
        Ok(())
    }

    pub fn write_raw(&mut self, header_type: u8, payload: &[u8]) -> Result<(), XtfError> {
        self.out.write_all(&encode_raw(header_type, payload))?;
        Ok(())
    }

    /// Writes bytes verbatim, e.g. to simulate line noise.
    pub fn write_garbage(&mut self, bytes: &[u8]) -> Result<(), XtfError> {
        self.out.write_all(bytes)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, XtfError> {
        self.out.flush()?;
        Ok(self.out)
    }
}
