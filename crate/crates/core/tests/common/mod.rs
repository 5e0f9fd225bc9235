//! Synthetic streams built from straight edges, without a scene generator.

#![allow(dead_code)]

use evline_core::{Event, Micros, Polarity, TrackSnapshot, Tracker64, TrackerConfig};

/// An axis-aligned edge of `len` pixels moving perpendicular to itself.
#[derive(Debug, Clone, Copy)]
pub struct Edge {
    pub vertical: bool,
    /// Position across the edge at `start_ms`.
    pub pos: f64,
    /// Start of the edge along itself.
    pub from: u16,
    pub len: u16,
    pub speed_px_ms: f64,
    pub start_ms: u32,
    pub dur_ms: u32,
}

/// Every pixel of every edge fires once per `period_us`, phase-shifted by
/// pixel so that events spread over the period.
pub fn edge_stream(edges: &[Edge], period_us: Micros, width: u16, height: u16) -> Vec<Event> {
    let mut out = Vec::new();
    for (k, e) in edges.iter().enumerate() {
        let t0 = e.start_ms as Micros * 1000;
        let t1 = t0 + e.dur_ms as Micros * 1000;
        let mut base = t0;
        while base < t1 {
            for i in 0..e.len {
                let along = e.from + i;
                let t = base + (along as Micros * 131 + k as Micros * 17) % period_us;
                let across = (e.pos + e.speed_px_ms * (t - t0) as f64 / 1000.0).round();
                let (x, y) = if e.vertical { (across, along as f64) } else { (along as f64, across) };
                if x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 {
                    continue;
                }
                let p = if e.speed_px_ms >= 0.0 { Polarity::On } else { Polarity::Off };
                out.push(Event::new(x as u16, y as u16, t, p));
            }
            base += period_us;
        }
    }
    out.sort_by_key(|e| (e.t, e.y, e.x));
    out
}

/// Snapshots taken right after each maintenance boundary, in deterministic
/// mode.
pub fn run_with_boundaries(cfg: TrackerConfig, events: &[Event]) -> (Tracker64, Vec<TrackSnapshot<f64>>) {
    let iv = cfg.maintenance_interval_us;
    let mut tr = Tracker64::new(cfg).expect("valid config");
    let mut snaps = Vec::new();
    let mut next: Option<Micros> = None;
    for e in events {
        let b = next.get_or_insert((e.t / iv + 1) * iv);
        while e.t >= *b {
            tr.advance_to(*b);
            snaps.push(tr.snapshot(*b));
            *b += iv;
        }
        tr.process(e);
    }
    (tr, snaps)
}
