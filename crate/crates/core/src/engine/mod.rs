//! The streaming tracker: per-event ingest plus periodic maintenance, either
//! inline at stream-time boundaries or on a separate thread.

mod instrument;
mod shared;

use std::sync::mpsc::{sync_channel, SyncSender, TrySendError};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Instant;

use parking_lot::MutexGuard;

use crate::cluster::{grow_chain, resolve_candidates, try_create_cluster, Cluster};
use crate::config::{PolarityMode, PromotionPath, TrackerConfig};
use crate::error::Result;
use crate::event::{Event, Micros, Polarity, Sae};
use crate::filter::EventFilter;
use crate::line::{Line, LineHistory, LineId};
use crate::scalar::Scalar;

pub use instrument::{linear_fit, Bucket, Instrumentation, LinearFit, Stage, StageTiming};
pub use shared::{LineSnapshot, MaintenanceReport, TrackSnapshot};

use shared::Shared;

/// What happened to one input event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    /// Removed by the filter, or outside the sensor.
    Suppressed,
    Line { key: u64, id: Option<LineId> },
    /// Close to two or more lines; not used.
    Ambiguous,
    Cluster { key: u64 },
    NewCluster { key: u64 },
    Unassigned,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub events: u64,
    pub out_of_bounds: u64,
    pub suppressed: u64,
    pub to_lines: u64,
    pub ambiguous: u64,
    pub to_clusters: u64,
    pub new_clusters: u64,
    pub unassigned: u64,
    pub promotions: u64,
}

struct Worker {
    tx: SyncSender<Micros>,
    handle: JoinHandle<()>,
}

/// Read-only access to a tracker's state from other threads.
pub struct TrackerHandle<T: Scalar> {
    shared: Arc<Shared<T>>,
}

impl<T: Scalar> Clone for TrackerHandle<T> {
    fn clone(&self) -> Self {
        Self {
            shared: Arc::clone(&self.shared),
        }
    }
}

impl<T: Scalar> TrackerHandle<T> {
    pub fn snapshot(&self, t: Micros) -> TrackSnapshot<T> {
        self.shared.snapshot(t)
    }

    pub fn histories(&self) -> Vec<LineHistory> {
        self.shared.histories()
    }
}

pub struct Tracker<T: Scalar> {
    shared: Arc<Shared<T>>,
    filter: EventFilter,
    /// Split mode: indexed by polarity. Merged mode: a single map.
    unassigned: Vec<Sae>,
    clock: Option<Micros>,
    next_boundary: Micros,
    worker: Option<Worker>,
    stats: IngestStats,
    instrument: Option<Instrumentation>,
}

/// Pending boundaries beyond which maintenance skips ahead to the latest one.
const MAX_CATCH_UP: i64 = 4096;

impl<T: Scalar> Tracker<T> {
    /// A tracker running maintenance inline, so that output depends only on
    /// the input stream.
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        let maps = match cfg.polarity_mode {
            PolarityMode::Split => 2,
            PolarityMode::Merged => 1,
        };
        Ok(Self {
            filter: EventFilter::new(cfg.sensor, cfg.filter.clone()),
            unassigned: (0..maps).map(|_| Sae::new(cfg.sensor)).collect(),
            shared: Arc::new(Shared::new(cfg)),
            clock: None,
            next_boundary: 0,
            worker: None,
            stats: IngestStats::default(),
            instrument: None,
        })
    }

    /// A tracker whose maintenance runs on its own thread, triggered at
    /// stream-time boundaries. A trigger is dropped while the previous one is
    /// still pending.
    pub fn with_background_maintenance(cfg: TrackerConfig) -> Result<Self> {
        let mut tracker = Self::new(cfg)?;
        let (tx, rx) = sync_channel::<Micros>(1);
        let shared = Arc::clone(&tracker.shared);
        let handle = std::thread::Builder::new()
            .name("evline-maintenance".into())
            .spawn(move || {
                while let Ok(t) = rx.recv() {
                    shared.maintain(t);
                }
            })
            .expect("spawning the maintenance thread");
        tracker.worker = Some(Worker { tx, handle });
        Ok(tracker)
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.shared.cfg
    }

    pub fn handle(&self) -> TrackerHandle<T> {
        TrackerHandle {
            shared: Arc::clone(&self.shared),
        }
    }

    pub fn is_background(&self) -> bool {
        self.worker.is_some()
    }

    pub fn enable_instrumentation(&mut self) {
        self.instrument.get_or_insert_with(Instrumentation::default);
    }

    pub fn instrumentation(&self) -> Option<&Instrumentation> {
        self.instrument.as_ref()
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    /// Latest event time seen.
    pub fn clock(&self) -> Option<Micros> {
        self.clock
    }

    pub fn maintenance_passes(&self) -> u64 {
        self.shared.maintenance_passes()
    }

    pub fn last_maintenance(&self) -> Option<Micros> {
        self.shared.last_maintenance()
    }

    pub fn snapshot(&self, t: Micros) -> TrackSnapshot<T> {
        self.shared.snapshot(t)
    }

    /// Histories of every line created so far.
    pub fn histories(&self) -> Vec<LineHistory> {
        self.shared.histories()
    }

    pub fn num_lines(&self) -> usize {
        self.shared.lines.read().len()
    }

    pub fn num_clusters(&self) -> usize {
        self.shared.clusters.read().len()
    }

    /// Runs one maintenance pass now, in the calling thread.
    pub fn run_maintenance(&self, t_now: Micros) -> MaintenanceReport {
        self.shared.maintain(t_now)
    }

    /// Advances stream time to `t`, triggering maintenance at every boundary
    /// `<= t` not yet handled.
    pub fn advance_to(&mut self, t: Micros) {
        let iv = self.shared.cfg.maintenance_interval_us;
        match self.clock {
            None => {
                self.next_boundary = (t.div_euclid(iv) + 1) * iv;
                self.clock = Some(t);
            }
            Some(c) if t > c => self.clock = Some(t),
            Some(_) => {}
        }
        let clock = self.clock.expect("set above");
        if clock < self.next_boundary {
            return;
        }
        if (clock - self.next_boundary) / iv > MAX_CATCH_UP {
            self.next_boundary = clock.div_euclid(iv) * iv;
        }
        while clock >= self.next_boundary {
            let b = self.next_boundary;
            self.next_boundary += iv;
            match &self.worker {
                None => {
                    self.shared.maintain(b);
                }
                Some(w) => {
                    // only the latest boundary matters to a lagging worker
                    if clock < self.next_boundary {
                        match w.tx.try_send(b) {
                            Ok(()) | Err(TrySendError::Full(_)) => {}
                            Err(TrySendError::Disconnected(_)) => {
                                panic!("maintenance thread terminated")
                            }
                        }
                    }
                }
            }
        }
    }

    /// Stops the maintenance thread after it drains its pending trigger.
    pub fn stop_background(&mut self) {
        if let Some(w) = self.worker.take() {
            drop(w.tx);
            if let Err(panic) = w.handle.join() {
                std::panic::resume_unwind(panic);
            }
        }
    }

    pub fn process_all<'a, I: IntoIterator<Item = &'a Event>>(&mut self, events: I) {
        for e in events {
            self.process(e);
        }
    }

    /// Runs one event through filter, line addition, cluster addition and
    /// cluster creation.
    pub fn process(&mut self, e: &Event) -> Disposition {
        self.stats.events += 1;
        if self.shared.cfg.sensor.check(e).is_err() {
            self.stats.out_of_bounds += 1;
            self.stats.suppressed += 1;
            return Disposition::Suppressed;
        }
        self.advance_to(e.t);

        let counts = self.instrument.is_some().then(|| (self.num_lines(), self.num_clusters()));
        let mut timer = counts.map(|_| Instant::now());
        let mut lap = |ins: &mut Option<Instrumentation>, stage: Stage| {
            if let (Some(ins), Some(start), Some((nl, nc))) = (ins.as_mut(), timer.as_mut(), counts) {
                let now = Instant::now();
                ins.record(stage, now - *start, nl, nc);
                *start = now;
            }
        };

        let passed = self.filter.filter_event(e).passed();
        lap(&mut self.instrument, Stage::Filter);
        if !passed {
            self.stats.suppressed += 1;
            return Disposition::Suppressed;
        }

        let line_result = self.add_to_lines(e);
        lap(&mut self.instrument, Stage::LineAddition);
        match line_result {
            LineOutcome::Added(key, id) => {
                self.stats.to_lines += 1;
                return Disposition::Line { key, id };
            }
            LineOutcome::Ambiguous => {
                self.stats.ambiguous += 1;
                return Disposition::Ambiguous;
            }
            LineOutcome::None => {}
        }

        let cluster_result = self.add_to_clusters(e);
        lap(&mut self.instrument, Stage::ClusterAddition);
        if let Some(key) = cluster_result {
            self.stats.to_clusters += 1;
            return Disposition::Cluster { key };
        }

        let created = self.create_cluster(e);
        lap(&mut self.instrument, Stage::ClusterCreation);
        match created {
            Some(key) => {
                self.stats.new_clusters += 1;
                Disposition::NewCluster { key }
            }
            None => {
                self.stats.unassigned += 1;
                Disposition::Unassigned
            }
        }
    }

    fn add_to_lines(&mut self, e: &Event) -> LineOutcome {
        let cfg = &self.shared.cfg.line;
        let registry = self.shared.lines.read();
        let mut found: Option<MutexGuard<'_, Line<T>>> = None;
        for ent in registry.iter() {
            let l = ent.inner.lock();
            if !ent.is_alive() || l.qualifies(e, cfg).is_none() {
                continue;
            }
            if found.is_some() {
                return LineOutcome::Ambiguous;
            }
            found = Some(l);
        }
        match found {
            Some(mut l) => {
                l.add(*e, cfg);
                LineOutcome::Added(l.key(), l.id())
            }
            None => LineOutcome::None,
        }
    }

    fn add_to_clusters(&mut self, e: &Event) -> Option<u64> {
        let cfg = &self.shared.cfg;
        let mut promoted = None;
        let mut merged = false;
        let target_key = {
            let registry = self.shared.clusters.read();
            let mut guards: Vec<MutexGuard<'_, Cluster<T>>> = Vec::new();
            let mut owners = Vec::new();
            for ent in registry.iter() {
                let c = ent.inner.lock();
                if ent.is_alive() && c.candidate_distance(e, &cfg.cluster).is_some() {
                    guards.push(c);
                    owners.push(ent);
                }
            }
            let mut refs: Vec<&mut Cluster<T>> = guards.iter_mut().map(|g| &mut **g).collect();
            let (target, absorbed) = resolve_candidates(e, &mut refs, &cfg.cluster)?;
            for &i in &absorbed {
                owners[i].kill();
                merged = true;
            }
            let target_cluster = &mut *refs[target];
            let key = target_cluster.key();
            if cfg.promotion_path == PromotionPath::Ingest
                && target_cluster.len() >= cfg.line.promotion_num_events
            {
                let line_key = self.shared.next_key();
                if let Some(line) = Line::promote(target_cluster, line_key, e.t, &cfg.line) {
                    owners[target].kill();
                    promoted = Some(line);
                }
            }
            key
        };
        if let Some(line) = promoted {
            self.stats.promotions += 1;
            self.shared.insert_line(line);
            merged = true;
        }
        if merged {
            self.shared.prune_clusters();
        }
        Some(target_key)
    }

    fn unassigned_map(&self, p: Polarity) -> &Sae {
        match self.unassigned.len() {
            1 => &self.unassigned[0],
            _ => &self.unassigned[p.index()],
        }
    }

    fn create_cluster(&mut self, e: &Event) -> Option<u64> {
        let cfg = &self.shared.cfg;
        let sae = self.unassigned_map(e.polarity);
        sae.update(e).ok()?;
        let chain = grow_chain(e, sae, &cfg.cluster);
        if chain.len() < cfg.cluster.creation_num_events {
            return None;
        }
        let key = self.shared.next_key();
        let cluster = try_create_cluster(&chain, key, e.t, cfg.time_scale, &cfg.cluster)?;
        // chain events now belong to the cluster
        for c in &chain.elements {
            sae.clear(c.x, c.y);
        }
        self.shared.push_cluster(cluster);
        Some(key)
    }
}

enum LineOutcome {
    Added(u64, Option<LineId>),
    Ambiguous,
    None,
}

impl<T: Scalar> Drop for Tracker<T> {
    fn drop(&mut self) {
        if let Some(w) = self.worker.take() {
            drop(w.tx);
            let _ = w.handle.join();
        }
    }
}

pub type Tracker64 = Tracker<f64>;
pub type Tracker32 = Tracker<f32>;
