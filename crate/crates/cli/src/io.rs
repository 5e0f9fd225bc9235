//! Event files (text and raw binary), track files and truth files.

use std::collections::VecDeque;
use std::io::{BufRead, Read, Write};

use evline_core::{Event, LineState, Micros, Polarity, SensorSize, TrackSnapshot};
use evline_synth::TrackRecord;
use thiserror::Error;

/// Disorder up to this much is sorted away; more is an error.
pub const REORDER_WINDOW_US: Micros = 1000;

pub const BINARY_MAGIC: &[u8; 8] = b"EVLINEB1";
const BINARY_RECORD: usize = 13;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("{0}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn malformed(line: u64, msg: impl Into<String>) -> InputError {
    InputError::Malformed {
        line,
        msg: msg.into(),
    }
}

/// Parses `# evline v1 width=<W> height=<H>`.
pub fn parse_header(line: &str) -> Result<SensorSize, InputError> {
    let rest = line
        .trim_end()
        .strip_prefix("# evline v1")
        .ok_or_else(|| InputError::Header("missing `# evline v1 width=W height=H` header".into()))?;
    let mut width = None;
    let mut height = None;
    for kv in rest.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| InputError::Header(format!("bad header field {kv:?}")))?;
        let v: u16 = v
            .parse()
            .map_err(|_| InputError::Header(format!("bad header value {kv:?}")))?;
        match k {
            "width" => width = Some(v),
            "height" => height = Some(v),
            _ => return Err(InputError::Header(format!("unknown header field {k:?}"))),
        }
    }
    match (width, height) {
        (Some(w), Some(h)) if w > 0 && h > 0 => Ok(SensorSize::new(w, h)),
        _ => Err(InputError::Header("header needs non-zero width and height".into())),
    }
}

pub fn format_header(size: SensorSize) -> String {
    format!("# evline v1 width={} height={}", size.width, size.height)
}

fn check_bounds(e: &Event, size: SensorSize, record: u64) -> Result<(), InputError> {
    if !size.contains(e.x, e.y) {
        return Err(malformed(
            record,
            format!("pixel ({}, {}) outside {}x{}", e.x, e.y, size.width, size.height),
        ));
    }
    if e.t < 0 {
        return Err(malformed(record, "negative timestamp"));
    }
    Ok(())
}

/// Parses one `t_us,x,y,p` record.
pub fn parse_record(text: &str, line: u64) -> Result<Event, InputError> {
    let mut f = text.trim_end().split(',');
    let mut next = |name: &str| f.next().ok_or_else(|| malformed(line, format!("missing {name}")));
    let t: Micros = next("t_us")?
        .trim()
        .parse()
        .map_err(|_| malformed(line, "bad t_us"))?;
    let x: u16 = next("x")?.trim().parse().map_err(|_| malformed(line, "bad x"))?;
    let y: u16 = next("y")?.trim().parse().map_err(|_| malformed(line, "bad y"))?;
    let p: u8 = next("p")?.trim().parse().map_err(|_| malformed(line, "bad p"))?;
    if f.next().is_some() {
        return Err(malformed(line, "too many fields"));
    }
    let polarity = Polarity::from_bit(p).ok_or_else(|| malformed(line, "p must be 0 or 1"))?;
    Ok(Event::new(x, y, t, polarity))
}

/// Releases events in time order, stably sorting disorder within
/// [`REORDER_WINDOW_US`].
#[derive(Debug, Default)]
struct Reorder {
    pending: VecDeque<Event>,
    max_t: Option<Micros>,
    reordered: u64,
}

impl Reorder {
    fn push(&mut self, e: Event, record: u64) -> Result<(), InputError> {
        match self.max_t {
            Some(m) if e.t < m => {
                if m - e.t > REORDER_WINDOW_US {
                    return Err(malformed(
                        record,
                        format!("timestamp {} is {} us before {}", e.t, m - e.t, m),
                    ));
                }
                self.reordered += 1;
                let pos = self.pending.partition_point(|p| p.t <= e.t);
                self.pending.insert(pos, e);
            }
            _ => {
                self.max_t = Some(e.t);
                self.pending.push_back(e);
            }
        }
        Ok(())
    }

    fn pop_ready(&mut self) -> Option<Event> {
        let limit = self.max_t? - REORDER_WINDOW_US;
        match self.pending.front() {
            Some(f) if f.t <= limit => self.pending.pop_front(),
            _ => None,
        }
    }

    fn pop_any(&mut self) -> Option<Event> {
        self.pending.pop_front()
    }
}

enum Format<R> {
    Text { reader: R, buf: String },
    Binary { reader: R },
}

/// Streaming reader for either event file format.
pub struct EventReader<R> {
    format: Format<R>,
    size: SensorSize,
    record: u64,
    reorder: Reorder,
    done: bool,
}

impl<R: BufRead> EventReader<R> {
    /// Detects the format from the first bytes.
    pub fn new(mut reader: R) -> Result<Self, InputError> {
        let head = reader.fill_buf()?;
        if head.starts_with(BINARY_MAGIC) {
            let mut hdr = [0u8; 12];
            reader.read_exact(&mut hdr)?;
            let width = u16::from_le_bytes([hdr[8], hdr[9]]);
            let height = u16::from_le_bytes([hdr[10], hdr[11]]);
            if width == 0 || height == 0 {
                return Err(InputError::Header("binary header has zero size".into()));
            }
            return Ok(Self::with(Format::Binary { reader }, SensorSize::new(width, height), 0));
        }
        let mut first = String::new();
        if reader.read_line(&mut first)? == 0 {
            return Err(InputError::Header("empty event file".into()));
        }
        let size = parse_header(&first)?;
        Ok(Self::with(
            Format::Text {
                reader,
                buf: String::new(),
            },
            size,
            1,
        ))
    }

    fn with(format: Format<R>, size: SensorSize, record: u64) -> Self {
        Self {
            format,
            size,
            record,
            reorder: Reorder::default(),
            done: false,
        }
    }

    pub fn size(&self) -> SensorSize {
        self.size
    }

    /// Events that arrived out of order and were sorted back.
    pub fn reordered(&self) -> u64 {
        self.reorder.reordered
    }

    fn read_raw(&mut self) -> Result<Option<Event>, InputError> {
        loop {
            self.record += 1;
            let record = self.record;
            let e = match &mut self.format {
                Format::Text { reader, buf } => {
                    buf.clear();
                    if reader.read_line(buf)? == 0 {
                        return Ok(None);
                    }
                    let line = buf.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    parse_record(line, record)?
                }
                Format::Binary { reader } => {
                    let mut rec = [0u8; BINARY_RECORD];
                    match read_full(reader, &mut rec)? {
                        0 => return Ok(None),
                        BINARY_RECORD => {}
                        _ => return Err(malformed(record, "truncated binary record")),
                    }
                    let t = u64::from_le_bytes(rec[0..8].try_into().expect("8 bytes"));
                    let t = Micros::try_from(t).map_err(|_| malformed(record, "timestamp overflow"))?;
                    let x = u16::from_le_bytes([rec[8], rec[9]]);
                    let y = u16::from_le_bytes([rec[10], rec[11]]);
                    let p = Polarity::from_bit(rec[12]).ok_or_else(|| malformed(record, "p must be 0 or 1"))?;
                    Event::new(x, y, t, p)
                }
            };
            check_bounds(&e, self.size, record)?;
            return Ok(Some(e));
        }
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(n)
}

impl<R: BufRead> Iterator for EventReader<R> {
    type Item = Result<Event, InputError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(e) = self.reorder.pop_ready() {
                return Some(Ok(e));
            }
            if self.done {
                return self.reorder.pop_any().map(Ok);
            }
            match self.read_raw() {
                Ok(Some(e)) => {
                    let record = self.record;
                    if let Err(err) = self.reorder.push(e, record) {
                        self.done = true;
                        self.reorder.pending.clear();
                        return Some(Err(err));
                    }
                }
                Ok(None) => self.done = true,
                Err(err) => {
                    self.done = true;
                    self.reorder.pending.clear();
                    return Some(Err(err));
                }
            }
        }
    }
}

pub fn write_events_text<W: Write>(mut w: W, size: SensorSize, events: &[Event]) -> std::io::Result<()> {
    writeln!(w, "{}", format_header(size))?;
    for e in events {
        writeln!(w, "{},{},{},{}", e.t, e.x, e.y, e.polarity.bit())?;
    }
    w.flush()
}

pub fn write_events_binary<W: Write>(mut w: W, size: SensorSize, events: &[Event]) -> std::io::Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&size.width.to_le_bytes())?;
    w.write_all(&size.height.to_le_bytes())?;
    for e in events {
        let t = u64::try_from(e.t).map_err(|_| {
            std::io::Error::new(std::io::ErrorKind::InvalidInput, "negative timestamp")
        })?;
        w.write_all(&t.to_le_bytes())?;
        w.write_all(&e.x.to_le_bytes())?;
        w.write_all(&e.y.to_le_bytes())?;
        w.write_all(&[e.polarity.bit()])?;
    }
    w.flush()
}

pub const TRACK_HEADER: &str = "# evline tracks v1";

pub fn write_track_header<W: Write>(mut w: W) -> std::io::Result<()> {
    writeln!(w, "{TRACK_HEADER}")
}

/// One TrackFile block for a snapshot.
pub fn write_snapshot<W: Write>(mut w: W, snap: &TrackSnapshot<f64>) -> std::io::Result<()> {
    for l in &snap.lines {
        writeln!(
            w,
            "{},{},{},{:.3},{:.3},{:.3},{:.3},{}",
            snap.t,
            l.track_id(),
            l.state.as_str(),
            l.midpoint[0],
            l.midpoint[1],
            l.angle_deg,
            l.length,
            l.n_events
        )?;
    }
    Ok(())
}

pub fn snapshot_records(snap: &TrackSnapshot<f64>) -> impl Iterator<Item = TrackRecord> + '_ {
    snap.lines.iter().map(move |l| TrackRecord {
        t: snap.t,
        line_id: l.track_id(),
        state: l.state,
        midpoint: l.midpoint,
        angle_deg: l.angle_deg,
        length: l.length,
        n_events: l.n_events,
    })
}

pub fn read_tracks<R: BufRead>(r: R) -> Result<Vec<TrackRecord>, InputError> {
    let mut out = Vec::new();
    let mut lines = r.lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    if first.trim_end() != TRACK_HEADER {
        return Err(InputError::Header(format!("missing `{TRACK_HEADER}` header")));
    }
    for (i, line) in lines.enumerate() {
        let lineno = i as u64 + 2;
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(malformed(lineno, "expected 8 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| malformed(lineno, format!("bad number {s:?}")));
        out.push(TrackRecord {
            t: f[0].parse().map_err(|_| malformed(lineno, "bad t_us"))?,
            line_id: f[1].parse().map_err(|_| malformed(lineno, "bad line_id"))?,
            state: LineState::parse(f[2]).ok_or_else(|| malformed(lineno, "bad state"))?,
            midpoint: [num(f[3])?, num(f[4])?],
            angle_deg: num(f[5])?,
            length: num(f[6])?,
            n_events: f[7].parse().map_err(|_| malformed(lineno, "bad n_events"))?,
        });
    }
    Ok(out)
}
