//! Scoring tracker output against ground truth.

use std::collections::BTreeMap;

use evline_core::{LineState, Micros};

use crate::truth::GroundTruth;

/// A tracked line is near a truth track when both hold.
pub const MATCH_DISTANCE_PX: f64 = 5.0;
pub const MATCH_ANGLE_DEG: f64 = 10.0;
/// Fraction of overlapping snapshots that must be near for a match.
pub const MATCH_FRACTION: f64 = 0.5;

/// One line in one snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRecord {
    pub t: Micros,
    /// Public ID, or a negative provisional key while initializing.
    pub line_id: i64,
    pub state: LineState,
    pub midpoint: [f64; 2],
    pub angle_deg: f64,
    pub length: f64,
    pub n_events: usize,
}

/// Difference of two undirected angles in degrees, `[0, 90]`.
pub fn angle_diff_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineScore {
    pub line_id: i64,
    pub track: Option<usize>,
    pub first: Micros,
    pub last: Micros,
    pub lifetime_s: f64,
    /// Best fraction of overlapping snapshots near one track.
    pub match_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    pub lines: Vec<LineScore>,
    /// Mean lifetime of lines matched to a track.
    pub mean_lifetime_s: f64,
    /// Mean lifetime of every scored line.
    pub mean_lifetime_all_s: f64,
    pub id_switches: Vec<usize>,
    pub midpoint_rms_px: f64,
    pub direction_rms_deg: f64,
    pub false_lines: usize,
    pub matched_lines: usize,
}

impl Metrics {
    pub fn total_id_switches(&self) -> usize {
        self.id_switches.iter().sum()
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (n, s) = v.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Scores Active and Hibernated records. Lifetimes extend the observed span
/// by one snapshot interval, so a line seen in every snapshot of a run lives
/// as long as the run.
pub fn score(records: &[TrackRecord], truth: &GroundTruth) -> Metrics {
    let rows: Vec<&TrackRecord> = records
        .iter()
        .filter(|r| r.line_id > 0 && r.state != LineState::Initializing)
        .collect();
    if rows.is_empty() {
        return Metrics {
            id_switches: vec![0; truth.num_tracks()],
            ..Metrics::default()
        };
    }
    let mut times: Vec<Micros> = rows.iter().map(|r| r.t).collect();
    times.sort_unstable();
    times.dedup();
    let step = times.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(0);

    let mut by_line: BTreeMap<i64, Vec<&TrackRecord>> = BTreeMap::new();
    for r in &rows {
        by_line.entry(r.line_id).or_default().push(r);
    }

    let near = |r: &TrackRecord, k: usize| -> Option<bool> {
        let s = truth.at(k, r.t)?;
        let d = (r.midpoint[0] - s.midpoint[0]).hypot(r.midpoint[1] - s.midpoint[1]);
        Some(d < MATCH_DISTANCE_PX && angle_diff_deg(r.angle_deg, s.angle_deg) < MATCH_ANGLE_DEG)
    };

    let mut lines = Vec::with_capacity(by_line.len());
    let mut sq_mid = Vec::new();
    let mut sq_dir = Vec::new();
    for (&id, recs) in &by_line {
        let first = recs.iter().map(|r| r.t).min().expect("non-empty");
        let last = recs.iter().map(|r| r.t).max().expect("non-empty");
        let mut best: Option<(usize, f64)> = None;
        for k in 0..truth.num_tracks() {
            let (overlap, hits) = recs.iter().fold((0usize, 0usize), |(o, h), r| match near(r, k) {
                Some(true) => (o + 1, h + 1),
                Some(false) => (o + 1, h),
                None => (o, h),
            });
            if overlap == 0 {
                continue;
            }
            let frac = hits as f64 / overlap as f64;
            if best.is_none_or(|(_, f)| frac > f) {
                best = Some((k, frac));
            }
        }
        let match_fraction = best.map_or(0.0, |b| b.1);
        let track = best.filter(|b| b.1 > MATCH_FRACTION).map(|b| b.0);
        if let Some(k) = track {
            for r in recs {
                if let Some(s) = truth.at(k, r.t) {
                    sq_mid.push((r.midpoint[0] - s.midpoint[0]).powi(2) + (r.midpoint[1] - s.midpoint[1]).powi(2));
                    sq_dir.push(angle_diff_deg(r.angle_deg, s.angle_deg).powi(2));
                }
            }
        }
        lines.push(LineScore {
            line_id: id,
            track,
            first,
            last,
            lifetime_s: (last - first + step) as f64 / 1e6,
            match_fraction,
        });
    }

    let mut id_switches = vec![0; truth.num_tracks()];
    for (k, switches) in id_switches.iter_mut().enumerate() {
        let assigned: Vec<&LineScore> = lines.iter().filter(|l| l.track == Some(k)).collect();
        let mut seq: Vec<i64> = Vec::new();
        for &t in &times {
            let current = assigned
                .iter()
                .filter(|l| by_line[&l.line_id].iter().any(|r| r.t == t))
                .min_by_key(|l| (l.first, l.line_id))
                .map(|l| l.line_id);
            if let Some(id) = current {
                if seq.last() != Some(&id) {
                    seq.push(id);
                }
            }
        }
        *switches = seq.len().saturating_sub(1);
    }

    let matched: Vec<&LineScore> = lines.iter().filter(|l| l.track.is_some()).collect();
    Metrics {
        mean_lifetime_s: mean(matched.iter().map(|l| l.lifetime_s)),
        mean_lifetime_all_s: mean(lines.iter().map(|l| l.lifetime_s)),
        midpoint_rms_px: mean(sq_mid.into_iter()).sqrt(),
        direction_rms_deg: mean(sq_dir.into_iter()).sqrt(),
        false_lines: lines.len() - matched.len(),
        matched_lines: matched.len(),
        id_switches,
        lines,
    }
}
