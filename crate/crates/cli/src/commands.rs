//! The subcommands as library functions.

use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::sync::mpsc::sync_channel;
use std::time::{Duration, Instant};

use evline_core::engine::IngestStats;
use evline_core::{Event, Micros, SensorSize, Tracker64, TrackerConfig};
use evline_synth::{generate, score, GroundTruth, Metrics, SceneError, SceneSpec, TruthError};
use image::RgbImage;
use serde_json::json;
use thiserror::Error;

use crate::io::{self, EventReader, InputError};
use crate::overlay;

/// Events per chunk handed from the reader thread to the tracker.
pub const FEED_CHUNK: usize = 1024;
/// Chunks in flight between reader and tracker.
pub const FEED_CHUNKS: usize = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input: {0}")]
    Input(#[from] InputError),
    #[error("config: {0}")]
    Config(#[from] evline_core::Error),
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("truth: {0}")]
    Truth(#[from] TruthError),
    #[error("{0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    /// 1 for bad input or environment, 2 for failures of the tool itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 2,
            _ => 1,
        }
    }
}

pub struct OverlayOptions {
    pub dir: PathBuf,
    pub background: Option<RgbImage>,
}

pub struct TrackOptions {
    pub config: TrackerConfig,
    pub snapshot_interval_us: Micros,
    /// Maintenance inline; output depends only on the input.
    pub deterministic: bool,
    pub overlay: Option<OverlayOptions>,
}

impl TrackOptions {
    pub fn new(config: TrackerConfig) -> Self {
        Self {
            config,
            snapshot_interval_us: 10_000,
            deterministic: false,
            overlay: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackSummary {
    pub sensor: SensorSize,
    pub stats: IngestStats,
    pub reordered: u64,
    pub snapshots: u64,
    pub lines_published: u64,
    pub elapsed: Duration,
}

impl TrackSummary {
    pub fn report(&self) -> String {
        let s = &self.stats;
        let rate = s.events as f64 / self.elapsed.as_secs_f64().max(1e-9);
        format!(
            "events {} ({:.0} ev/s), suppressed {}, to lines {}, ambiguous {}, to clusters {}, \
             new clusters {}, unassigned {}, out of bounds {}, promotions {}, reordered {}, \
             snapshots {}, lines with ids {}",
            s.events,
            rate,
            s.suppressed,
            s.to_lines,
            s.ambiguous,
            s.to_clusters,
            s.new_clusters,
            s.unassigned,
            s.out_of_bounds,
            s.promotions,
            self.reordered,
            self.snapshots,
            self.lines_published
        )
    }
}

enum Feed {
    Chunk(Vec<Event>),
    Done { reordered: u64 },
    Failed(InputError),
}

/// Tracks an event stream, writing a TrackFile block at every snapshot
/// boundary and one after the last event. The header sets the sensor size.
pub fn track<R, W>(input: R, out: W, opts: TrackOptions) -> Result<TrackSummary, CliError>
where
    R: BufRead + Send + 'static,
    W: Write,
{
    if opts.snapshot_interval_us <= 0 {
        return Err(CliError::Usage("snapshot interval must be positive".into()));
    }
    let reader = EventReader::new(input)?;
    let sensor = reader.size();
    let mut cfg = opts.config;
    cfg.sensor = sensor;
    if let Some(bg) = opts.overlay.as_ref().and_then(|o| o.background.as_ref()) {
        if bg.dimensions() != (sensor.width as u32, sensor.height as u32) {
            log::warn!(
                "overlay background is {}x{}, sensor is {}x{}; using a plain backdrop",
                bg.width(),
                bg.height(),
                sensor.width,
                sensor.height
            );
        }
    }
    let mut tracker = if opts.deterministic {
        Tracker64::new(cfg)?
    } else {
        Tracker64::with_background_maintenance(cfg)?
    };

    let (tx, rx) = sync_channel::<Feed>(FEED_CHUNKS);
    let feeder = std::thread::Builder::new()
        .name("evline-reader".into())
        .spawn(move || {
            let mut chunk = Vec::with_capacity(FEED_CHUNK);
            let mut reader = reader;
            for item in reader.by_ref() {
                match item {
                    Ok(e) => {
                        chunk.push(e);
                        if chunk.len() == FEED_CHUNK {
                            let full = std::mem::replace(&mut chunk, Vec::with_capacity(FEED_CHUNK));
                            if tx.send(Feed::Chunk(full)).is_err() {
                                return;
                            }
                        }
                    }
                    Err(err) => {
                        let _ = tx.send(Feed::Failed(err));
                        return;
                    }
                }
            }
            if !chunk.is_empty() && tx.send(Feed::Chunk(chunk)).is_err() {
                return;
            }
            let _ = tx.send(Feed::Done {
                reordered: reader.reordered(),
            });
        })?;

    let mut out = std::io::BufWriter::new(out);
    io::write_track_header(&mut out)?;
    let step = opts.snapshot_interval_us;
    let mut next_snapshot: Option<Micros> = None;
    let mut snapshots = 0u64;
    let mut max_id = 0i64;
    let mut recent: Vec<Event> = Vec::new();
    let mut reordered = 0;

    let mut emit = |tracker: &mut Tracker64,
                    t: Micros,
                    recent: &mut Vec<Event>,
                    out: &mut std::io::BufWriter<W>|
     -> Result<(), CliError> {
        tracker.advance_to(t);
        let snap = tracker.snapshot(t);
        io::write_snapshot(&mut *out, &snap)?;
        snapshots += 1;
        for l in &snap.lines {
            max_id = max_id.max(l.track_id());
        }
        if let Some(ov) = &opts.overlay {
            let img = overlay::render(sensor, ov.background.as_ref(), recent, &snap);
            img.save(ov.dir.join(format!("frame_{t:012}.png")))
                .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
            recent.clear();
        }
        Ok(())
    };

    let start = Instant::now();
    let mut failure = None;
    for msg in rx {
        match msg {
            Feed::Chunk(chunk) => {
                for e in &chunk {
                    let boundary = *next_snapshot.get_or_insert((e.t / step + 1) * step);
                    if e.t >= boundary {
                        let mut b = boundary;
                        while e.t >= b {
                            emit(&mut tracker, b, &mut recent, &mut out)?;
                            b += step;
                        }
                        next_snapshot = Some(b);
                    }
                    tracker.process(e);
                    if opts.overlay.is_some() {
                        recent.push(*e);
                    }
                }
            }
            Feed::Done { reordered: r } => reordered = r,
            Feed::Failed(err) => {
                failure = Some(err);
                break;
            }
        }
    }
    feeder
        .join()
        .map_err(|_| CliError::Internal("event reader thread panicked".into()))?;
    if let Some(err) = failure {
        return Err(err.into());
    }
    if reordered > 0 {
        log::warn!("{reordered} events arrived out of order and were re-sorted");
    }
    if let Some(b) = next_snapshot {
        emit(&mut tracker, b, &mut recent, &mut out)?;
    }
    let elapsed = start.elapsed();
    out.flush()?;
    tracker.stop_background();
    Ok(TrackSummary {
        sensor,
        stats: tracker.stats(),
        reordered,
        snapshots,
        lines_published: max_id.max(0) as u64,
        elapsed,
    })
}

/// Generates events and ground truth for a scene.
pub fn synth<W1: Write, W2: Write>(
    scene_text: &str,
    seed: u64,
    events_out: W1,
    truth_out: W2,
    binary: bool,
    with_labels: bool,
) -> Result<usize, CliError> {
    let scene = SceneSpec::parse(scene_text)?;
    let g = generate(&scene, seed);
    let size = SensorSize::new(scene.width, scene.height);
    let events_out = std::io::BufWriter::new(events_out);
    if binary {
        io::write_events_binary(events_out, size, &g.events)?;
    } else {
        io::write_events_text(events_out, size, &g.events)?;
    }
    let mut truth_out = std::io::BufWriter::new(truth_out);
    g.truth.write(&mut truth_out, with_labels)?;
    truth_out.flush()?;
    Ok(g.events.len())
}

pub fn eval<R1: BufRead, R2: BufRead>(tracks: R1, truth: R2) -> Result<Metrics, CliError> {
    let records = io::read_tracks(tracks)?;
    let truth = GroundTruth::read(truth)?;
    Ok(score(&records, &truth))
}

pub fn metrics_report(m: &Metrics) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "match: midpoint < {} px, angle < {} deg, in > {:.0}% of overlapping snapshots",
        evline_synth::score::MATCH_DISTANCE_PX,
        evline_synth::score::MATCH_ANGLE_DEG,
        evline_synth::score::MATCH_FRACTION * 100.0
    );
    let _ = writeln!(s, "lines scored       {}", m.lines.len());
    let _ = writeln!(s, "matched lines      {}", m.matched_lines);
    let _ = writeln!(s, "false lines        {}", m.false_lines);
    let _ = writeln!(s, "mean lifetime      {:.3} s (matched)", m.mean_lifetime_s);
    let _ = writeln!(s, "mean lifetime all  {:.3} s", m.mean_lifetime_all_s);
    let _ = writeln!(s, "id switches        {} {:?}", m.total_id_switches(), m.id_switches);
    let _ = writeln!(s, "midpoint rms       {:.3} px", m.midpoint_rms_px);
    let _ = writeln!(s, "direction rms      {:.3} deg", m.direction_rms_deg);
    s
}

pub fn metrics_json(m: &Metrics) -> serde_json::Value {
    json!({
        "lines_scored": m.lines.len(),
        "matched_lines": m.matched_lines,
        "false_lines": m.false_lines,
        "mean_lifetime_s": m.mean_lifetime_s,
        "mean_lifetime_all_s": m.mean_lifetime_all_s,
        "id_switches": m.id_switches,
        "total_id_switches": m.total_id_switches(),
        "midpoint_rms_px": m.midpoint_rms_px,
        "direction_rms_deg": m.direction_rms_deg,
        "lines": m.lines.iter().map(|l| json!({
            "line_id": l.line_id,
            "track": l.track,
            "first_us": l.first,
            "last_us": l.last,
            "lifetime_s": l.lifetime_s,
            "match_fraction": l.match_fraction,
        })).collect::<Vec<_>>(),
    })
}
