//! State shared between the ingest context and the maintenance context.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};

use crate::cluster::Cluster;
use crate::config::{PromotionPath, TrackerConfig};
use crate::event::Micros;
use crate::geometry::PlaneFit;
use crate::line::{merge_lines, Line, LineHistory, LineId, LineMaintenanceReport, LineState};
use crate::scalar::Scalar;

/// A registry entry. `alive` only changes while `inner` is locked, and a
/// dead entity is never revived.
pub(crate) struct Entity<X> {
    pub(crate) alive: AtomicBool,
    pub(crate) inner: Mutex<X>,
}

impl<X> Entity<X> {
    pub(crate) fn new(x: X) -> Arc<Self> {
        Arc::new(Self {
            alive: AtomicBool::new(true),
            inner: Mutex::new(x),
        })
    }

    #[inline]
    pub(crate) fn is_alive(&self) -> bool {
        self.alive.load(Ordering::Acquire)
    }

    pub(crate) fn kill(&self) {
        self.alive.store(false, Ordering::Release);
    }
}

/// Entities ordered by ascending creation key. Several entity locks are only
/// ever taken in that order.
pub(crate) type Registry<X> = RwLock<Vec<Arc<Entity<X>>>>;

/// Counts from one maintenance pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MaintenanceReport {
    pub t: Micros,
    pub clusters_deleted: usize,
    pub clusters_promoted: usize,
    pub cluster_events_dropped: usize,
    pub lines: LineMaintenanceReport,
}

impl MaintenanceReport {
    /// Nothing changed.
    pub fn is_empty(&self) -> bool {
        self.clusters_deleted == 0
            && self.clusters_promoted == 0
            && self.cluster_events_dropped == 0
            && self.lines == LineMaintenanceReport::default()
    }
}

/// Published view of one line.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSnapshot<T> {
    pub key: u64,
    pub id: Option<LineId>,
    pub state: LineState,
    pub midpoint: [T; 2],
    /// Degrees in `[0, 180)`.
    pub angle_deg: T,
    pub length: T,
    pub n_events: usize,
    pub oldest_event: Option<Micros>,
    pub fit: PlaneFit<T>,
}

impl<T> LineSnapshot<T> {
    /// Public ID, or the negated creation key while still initializing.
    pub fn track_id(&self) -> i64 {
        match self.id {
            Some(id) => id as i64,
            None => -(self.key as i64),
        }
    }
}

/// All lines at one instant, ordered by creation key.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSnapshot<T> {
    pub t: Micros,
    pub lines: Vec<LineSnapshot<T>>,
    pub n_clusters: usize,
}

#[derive(Debug, Default)]
struct MaintenanceLog {
    passes: u64,
    last_t: Option<Micros>,
}

pub(crate) struct Shared<T> {
    pub(crate) cfg: TrackerConfig,
    pub(crate) clusters: Registry<Cluster<T>>,
    pub(crate) lines: Registry<Line<T>>,
    next_key: AtomicU64,
    next_id: AtomicU64,
    log: Mutex<MaintenanceLog>,
    retired: Mutex<Vec<LineHistory>>,
}

fn prune<X>(registry: &Registry<X>) {
    let mut w = registry.write();
    w.retain(|e| e.is_alive());
}

impl<T: Scalar> Shared<T> {
    pub(crate) fn new(cfg: TrackerConfig) -> Self {
        Self {
            cfg,
            clusters: RwLock::new(Vec::new()),
            lines: RwLock::new(Vec::new()),
            next_key: AtomicU64::new(1),
            next_id: AtomicU64::new(1),
            log: Mutex::new(MaintenanceLog::default()),
            retired: Mutex::new(Vec::new()),
        }
    }

    pub(crate) fn next_key(&self) -> u64 {
        self.next_key.fetch_add(1, Ordering::Relaxed)
    }

    fn next_id(&self) -> LineId {
        self.next_id.fetch_add(1, Ordering::Relaxed)
    }

    /// Inserts keeping the registry ordered by key.
    pub(crate) fn insert_line(&self, line: Line<T>) {
        let key = line.key();
        let mut w = self.lines.write();
        let pos = w.partition_point(|e| e.inner.lock().key() < key);
        w.insert(pos, Entity::new(line));
    }

    pub(crate) fn push_cluster(&self, cluster: Cluster<T>) {
        let key = cluster.key();
        let mut w = self.clusters.write();
        let pos = w.partition_point(|e| e.inner.lock().key() < key);
        w.insert(pos, Entity::new(cluster));
    }

    pub(crate) fn prune_clusters(&self) {
        prune(&self.clusters);
    }

    pub(crate) fn retire(&self, history: LineHistory) {
        self.retired.lock().push(history);
    }

    pub(crate) fn maintenance_passes(&self) -> u64 {
        self.log.lock().passes
    }

    pub(crate) fn last_maintenance(&self) -> Option<Micros> {
        self.log.lock().last_t
    }

    /// One maintenance pass at stream time `t_now`. Passes are serialized;
    /// cluster and line locks are never held at the same time.
    pub(crate) fn maintain(&self, t_now: Micros) -> MaintenanceReport {
        let mut log = self.log.lock();
        let mut report = MaintenanceReport {
            t: t_now,
            ..Default::default()
        };
        let cfg = &self.cfg;

        let mut promoted = Vec::new();
        let clusters: Vec<_> = self.clusters.read().clone();
        for ent in &clusters {
            let mut c = ent.inner.lock();
            if !ent.is_alive() {
                continue;
            }
            let (keep, dropped) = c.maintain(t_now, &cfg.cluster);
            report.cluster_events_dropped += dropped;
            if !keep {
                ent.kill();
                report.clusters_deleted += 1;
            } else if cfg.promotion_path == PromotionPath::Maintenance
                && c.len() >= cfg.line.promotion_num_events
            {
                if let Some(line) = Line::promote(&mut c, self.next_key(), t_now, &cfg.line) {
                    ent.kill();
                    report.clusters_promoted += 1;
                    promoted.push(line);
                }
            }
        }
        drop(clusters);
        prune(&self.clusters);

        let lines: Vec<_> = self.lines.read().clone();
        let mut next_id = || self.next_id();
        for ent in &lines {
            let mut l = ent.inner.lock();
            if !ent.is_alive() {
                continue;
            }
            let before = l.history().len();
            let r = l.maintain(t_now, &cfg.line, cfg.hibernation_enabled, &mut next_id);
            report.lines.events_dropped += r.events_dropped;
            report.lines.count_transitions(&l.history()[before..]);
            if !r.alive {
                ent.kill();
                self.retire(l.history_record());
            }
        }
        {
            let mut guards = Vec::with_capacity(lines.len());
            let mut owners = Vec::with_capacity(lines.len());
            for ent in &lines {
                let g = ent.inner.lock();
                if ent.is_alive() {
                    guards.push(g);
                    owners.push(ent);
                }
            }
            let mut refs: Vec<&mut Line<T>> = guards.iter_mut().map(|g| &mut **g).collect();
            let merges = merge_lines(&mut refs, t_now, &cfg.line);
            report.lines.merged += merges.len();
            for &(_, victim) in &merges {
                owners[victim].kill();
                self.retire(refs[victim].history_record());
            }
        }
        drop(lines);
        for line in promoted {
            self.insert_line(line);
        }
        prune(&self.lines);

        log.passes += 1;
        log.last_t = Some(t_now);
        report
    }

    pub(crate) fn snapshot(&self, t: Micros) -> TrackSnapshot<T> {
        let lines: Vec<_> = self.lines.read().clone();
        let mut out = Vec::with_capacity(lines.len());
        for ent in &lines {
            let l = ent.inner.lock();
            if !ent.is_alive() {
                continue;
            }
            out.push(LineSnapshot {
                key: l.key(),
                id: l.id(),
                state: l.state(),
                midpoint: l.midpoint_at(t),
                angle_deg: l.angle_deg(),
                length: l.length(),
                n_events: l.len(),
                oldest_event: l.events().oldest(),
                fit: *l.fit(),
            });
        }
        TrackSnapshot {
            t,
            lines: out,
            n_clusters: self.clusters.read().len(),
        }
    }

    /// Histories of deleted lines followed by those of live ones.
    pub(crate) fn histories(&self) -> Vec<LineHistory> {
        let mut all = self.retired.lock().clone();
        let lines: Vec<_> = self.lines.read().clone();
        for ent in &lines {
            let l = ent.inner.lock();
            if ent.is_alive() {
                all.push(l.history_record());
            }
        }
        all
    }
}
