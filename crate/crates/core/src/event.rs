//! Time-stamped detection events and their on-disk formats.
//!
//! Timestamps are integer picoseconds from the start of a run. Two formats
//! are supported: a human-readable CSV (`timestamp_ps,channel`) and a compact
//! binary layout for multi-gigabyte runs. Both round-trip exactly, including
//! run metadata.

use serde::{Deserialize, Serialize};

/// Detector channel: station A or B, analyzer gate 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    A0,
    A1,
    B0,
    B1,
}

/// Measurement station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Station {
    A,
    B,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::A0, Channel::A1, Channel::B0, Channel::B1];

    pub fn station(self) -> Station {
        match self {
            Channel::A0 | Channel::A1 => Station::A,
            Channel::B0 | Channel::B1 => Station::B,
        }
    }

    /// Analyzer gate: 0 for `A0`/`B0`, 1 for `A1`/`B1`.
    pub fn gate(self) -> u8 {
        match self {
            Channel::A0 | Channel::B0 => 0,
            Channel::A1 | Channel::B1 => 1,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Channel::A0 => 0,
            Channel::A1 => 1,
            Channel::B0 => 2,
            Channel::B1 => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Channel> {
        match code {
            0 => Some(Channel::A0),
            1 => Some(Channel::A1),
            2 => Some(Channel::B0),
            3 => Some(Channel::B1),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::A0 => "A0",
            Channel::A1 => "A1",
            Channel::B0 => "B0",
            Channel::B1 => "B1",
        }
    }

    pub fn parse(token: &str) -> Option<Channel> {
        match token {
            "A0" => Some(Channel::A0),
            "A1" => Some(Channel::A1),
            "B0" => Some(Channel::B0),
            "B1" => Some(Channel::B1),
            _ => None,
        }
    }
}

/// One photon detection: TDC timestamp plus the channel it fired on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub timestamp_ps: u64,
    pub channel: Channel,
}

/// Run-level metadata carried alongside the events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    /// Nominal entanglement parameter of the run, in [0, 2√2].
    pub nominal_s_chsh: f64,
    /// Run duration in seconds.
    pub duration_s: f64,
    /// TDC resolution in picoseconds.
    pub resolution_ps: u64,
    pub label: String,
}

impl Default for RunMetadata {
    fn default() -> Self {
        Self {
            nominal_s_chsh: 0.0,
            duration_s: 0.0,
            resolution_ps: 10,
            label: String::new(),
        }
    }
}

impl RunMetadata {
    pub fn validate(&self) -> Result<(), EventError> {
        let max = 2.0 * std::f64::consts::SQRT_2;
        if !(0.0..=max + 1e-12).contains(&self.nominal_s_chsh) {
            return Err(EventError::InvalidMetadata(format!(
                "nominal_s_chsh {} outside [0, 2*sqrt(2)]",
                self.nominal_s_chsh
            )));
        }
        if self.resolution_ps == 0 {
            return Err(EventError::InvalidMetadata("resolution must be > 0".into()));
        }
        Ok(())
    }
}

/// A time-ordered sequence of detections from one run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventStream {
    pub events: Vec<DetectionEvent>,
    pub meta: RunMetadata,
}

#[derive(Debug, thiserror::Error)]
pub enum EventError {
    #[error("malformed record at line {line}: {detail}")]
    MalformedRecord { line: usize, detail: String },
    #[error("non-monotonic timestamp at record {index}: {prev} then {curr}")]
    NonMonotonic { index: usize, prev: u64, curr: u64 },
    #[error("invalid metadata: {0}")]
    InvalidMetadata(String),
    #[error("binary format error: {0}")]
    BadBinary(String),
}

/// Serialization format for timetag files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimetagFormat {
    Csv,
    Binary,
}

pub const CSV_HEADER: &str = "timestamp_ps,channel";
pub const BINARY_MAGIC: &[u8; 4] = b"BTG1";

impl EventStream {
    pub fn new(events: Vec<DetectionEvent>, meta: RunMetadata) -> Result<Self, EventError> {
        meta.validate()?;
        for (i, w) in events.windows(2).enumerate() {
            if w[1].timestamp_ps < w[0].timestamp_ps {
                return Err(EventError::NonMonotonic {
                    index: i + 1,
                    prev: w[0].timestamp_ps,
                    curr: w[1].timestamp_ps,
                });
            }
        }
        Ok(Self { events, meta })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events of one station as `(timestamp, gate)` pairs, file order preserved.
    pub fn station_split(&self, station: Station) -> Vec<(u64, u8)> {
        self.events
            .iter()
            .filter(|e| e.channel.station() == station)
            .map(|e| (e.timestamp_ps, e.channel.gate()))
            .collect()
    }
}

/// Parses a timetag file, auto-detecting binary (magic `BTG1`) vs CSV.
pub fn parse_timetag(data: &[u8]) -> Result<EventStream, EventError> {
    if data.len() >= 4 && &data[..4] == BINARY_MAGIC {
        parse_binary(data)
    } else {
        parse_csv(data)
    }
}

/// Serializes a stream in the requested format. `parse_timetag(write_timetag(s)) == s`.
pub fn write_timetag(stream: &EventStream, format: TimetagFormat) -> Vec<u8> {
    match format {
        TimetagFormat::Csv => write_csv(stream),
        TimetagFormat::Binary => write_binary(stream),
    }
}

fn parse_csv(data: &[u8]) -> Result<EventStream, EventError> {
    let text = std::str::from_utf8(data).map_err(|e| EventError::MalformedRecord {
        line: 0,
        detail: format!("not UTF-8: {e}"),
    })?;
    let mut meta = RunMetadata::default();
    let mut events = Vec::new();
    let mut prev: Option<u64> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        // An optional leading comment line carries the run metadata as JSON.
        if let Some(rest) = line.strip_prefix('#') {
            if events.is_empty() {
                if let Ok(m) = serde_json::from_str::<RunMetadata>(rest.trim()) {
                    meta = m;
                }
            }
            continue;
        }
        if line == CSV_HEADER {
            continue;
        }
        let (ts_tok, ch_tok) = line.split_once(',').ok_or(EventError::MalformedRecord {
            line: lineno + 1,
            detail: "expected two comma-separated fields".into(),
        })?;
        let timestamp_ps: u64 = ts_tok.trim().parse().map_err(|_| EventError::MalformedRecord {
            line: lineno + 1,
            detail: format!("non-integer timestamp {ts_tok:?}"),
        })?;
        let channel = Channel::parse(ch_tok.trim()).ok_or(EventError::MalformedRecord {
            line: lineno + 1,
            detail: format!("invalid channel {ch_tok:?}"),
        })?;
        if let Some(p) = prev {
            if timestamp_ps < p {
                return Err(EventError::NonMonotonic {
                    index: events.len(),
                    prev: p,
                    curr: timestamp_ps,
                });
            }
        }
        prev = Some(timestamp_ps);
        events.push(DetectionEvent {
            timestamp_ps,
            channel,
        });
    }
    Ok(EventStream { events, meta })
}

fn write_csv(stream: &EventStream) -> Vec<u8> {
    let mut out = String::new();
    if stream.meta != RunMetadata::default() {
        out.push_str("# ");
        out.push_str(&serde_json::to_string(&stream.meta).expect("metadata serializes"));
        out.push('\n');
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for e in &stream.events {
        out.push_str(&format!("{},{}\n", e.timestamp_ps, e.channel.as_str()));
    }
    out.into_bytes()
}

fn parse_binary(data: &[u8]) -> Result<EventStream, EventError> {
    let need = |cond: bool, msg: &str| -> Result<(), EventError> {
        if cond {
            Ok(())
        } else {
            Err(EventError::BadBinary(msg.into()))
        }
    };
    need(data.len() >= 12, "truncated header")?;
    let count = u64::from_le_bytes(data[4..12].try_into().unwrap()) as usize;
    let rec_end = 12 + count * 9;
    need(data.len() >= rec_end + 4, "truncated record block")?;
    let mut events = Vec::with_capacity(count);
    let mut prev: Option<u64> = None;
    for i in 0..count {
        let off = 12 + i * 9;
        let timestamp_ps = u64::from_le_bytes(data[off..off + 8].try_into().unwrap());
        let code = data[off + 8];
        let channel = Channel::from_code(code).ok_or(EventError::MalformedRecord {
            line: i + 1,
            detail: format!("invalid channel code {code}"),
        })?;
        if let Some(p) = prev {
            if timestamp_ps < p {
                return Err(EventError::NonMonotonic {
                    index: i,
                    prev: p,
                    curr: timestamp_ps,
                });
            }
        }
        prev = Some(timestamp_ps);
        events.push(DetectionEvent {
            timestamp_ps,
            channel,
        });
    }
    let json_len = u32::from_le_bytes(data[rec_end..rec_end + 4].try_into().unwrap()) as usize;
    need(data.len() == rec_end + 4 + json_len, "metadata length mismatch")?;
    let meta: RunMetadata = serde_json::from_slice(&data[rec_end + 4..])
        .map_err(|e| EventError::BadBinary(format!("bad metadata JSON: {e}")))?;
    Ok(EventStream { events, meta })
}

fn write_binary(stream: &EventStream) -> Vec<u8> {
    let meta_json = serde_json::to_vec(&stream.meta).expect("metadata serializes");
    let mut out = Vec::with_capacity(16 + stream.events.len() * 9 + meta_json.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(stream.events.len() as u64).to_le_bytes());
    for e in &stream.events {
        out.extend_from_slice(&e.timestamp_ps.to_le_bytes());
        out.push(e.channel.code());
    }
    out.extend_from_slice(&(meta_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta_json);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(ts: u64, ch: Channel) -> DetectionEvent {
        DetectionEvent {
            timestamp_ps: ts,
            channel: ch,
        }
    }

    #[test]
    fn parses_two_records() {
        let s = parse_timetag(b"timestamp_ps,channel\n0,A0\n1200,B1").unwrap();
        assert_eq!(s.events, vec![ev(0, Channel::A0), ev(1200, Channel::B1)]);
    }

    #[test]
    fn rejects_decreasing_timestamps() {
        let err = parse_timetag(b"timestamp_ps,channel\n500,A0\n300,A1").unwrap_err();
        assert!(matches!(err, EventError::NonMonotonic { .. }));
    }

    #[test]
    fn rejects_bad_channel() {
        let err = parse_timetag(b"timestamp_ps,channel\n100,C7").unwrap_err();
        assert!(matches!(err, EventError::MalformedRecord { .. }));
    }

    #[test]
    fn rejects_bad_timestamp() {
        let err = parse_timetag(b"timestamp_ps,channel\nxyz,A0").unwrap_err();
        assert!(matches!(err, EventError::MalformedRecord { .. }));
    }

    #[test]
    fn empty_input_is_empty_stream() {
        assert!(parse_timetag(b"").unwrap().is_empty());
        assert!(parse_timetag(b"timestamp_ps,channel\n").unwrap().is_empty());
    }

    #[test]
    fn empty_stream_writes_header_only_csv() {
        let s = EventStream::default();
        assert_eq!(write_timetag(&s, TimetagFormat::Csv), b"timestamp_ps,channel\n");
    }

    #[test]
    fn equal_timestamps_keep_file_order() {
        let s = parse_timetag(b"timestamp_ps,channel\n7,B0\n7,A1\n7,B1").unwrap();
        let chans: Vec<_> = s.events.iter().map(|e| e.channel).collect();
        assert_eq!(chans, vec![Channel::B0, Channel::A1, Channel::B1]);
    }

    #[test]
    fn station_split_examples() {
        let s = parse_timetag(b"timestamp_ps,channel\n0,A0\n10,B1\n20,A1").unwrap();
        assert_eq!(s.station_split(Station::A), vec![(0, 0), (20, 1)]);
        assert_eq!(s.station_split(Station::B), vec![(10, 1)]);
        let all_b = parse_timetag(b"timestamp_ps,channel\n0,B0\n10,B1").unwrap();
        assert!(all_b.station_split(Station::A).is_empty());
    }

    #[test]
    fn split_partitions_stream() {
        let s = parse_timetag(b"timestamp_ps,channel\n0,A0\n1,B0\n2,A1\n3,B1\n4,A0").unwrap();
        let a = s.station_split(Station::A).len();
        let b = s.station_split(Station::B).len();
        assert_eq!(a + b, s.len());
    }

    fn arb_stream() -> impl Strategy<Value = EventStream> {
        (
            proptest::collection::vec((0u64..5_000, 0u8..4), 0..300),
            0.0f64..2.8,
            "[a-z]{0,8}",
        )
            .prop_map(|(raw, s_chsh, label)| {
                let mut t = 0u64;
                let events = raw
                    .into_iter()
                    .map(|(dt, code)| {
                        t += dt;
                        ev(t, Channel::from_code(code).unwrap())
                    })
                    .collect();
                EventStream {
                    events,
                    meta: RunMetadata {
                        nominal_s_chsh: s_chsh,
                        duration_s: 1.0,
                        resolution_ps: 10,
                        label,
                    },
                }
            })
    }

    proptest! {
        #[test]
        fn roundtrip_both_formats(stream in arb_stream()) {
            for fmt in [TimetagFormat::Csv, TimetagFormat::Binary] {
                let bytes = write_timetag(&stream, fmt);
                let back = parse_timetag(&bytes).unwrap();
                prop_assert_eq!(&back, &stream);
            }
        }
    }
}
