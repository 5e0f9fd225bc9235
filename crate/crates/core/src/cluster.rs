//! Chain-growth cluster creation, cluster addition with merging, and
//! cluster maintenance.

use crate::error::{Error, Result};
use crate::event::{ms_to_us, Event, Micros, Polarity, Sae, TimeScale};
use crate::geometry::{angle_between_deg, EventWindow, InferredLine};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    /// Minimum chain length that becomes a cluster.
    pub creation_num_events: usize,
    /// Maximum distance of an event to a cluster's inferred line.
    pub addition_threshold_px: f64,
    /// Clusters closer than this in angle are merged.
    pub merge_angle_deg: f64,
    pub cleanup_event_age_us: Micros,
    /// Clusters without a new event for this long are deleted.
    pub deletion_no_events_us: Micros,
    /// Lower bound of the along-line acceptance distance for short clusters.
    pub min_midpoint_threshold_px: f64,
    /// Oldest SAE entry a chain may step onto, relative to the seed.
    pub chain_seed_max_age_us: Micros,
    pub chain_max_length: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            creation_num_events: 7,
            addition_threshold_px: 1.3,
            merge_angle_deg: 15.0,
            cleanup_event_age_us: ms_to_us(50.0),
            deletion_no_events_us: ms_to_us(40.0),
            min_midpoint_threshold_px: 10.0,
            chain_seed_max_age_us: ms_to_us(70.0),
            chain_max_length: 20,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.creation_num_events > 0
            && self.addition_threshold_px > 0.0
            && self.merge_angle_deg > 0.0
            && self.cleanup_event_age_us > 0
            && self.deletion_no_events_us > 0
            && self.min_midpoint_threshold_px > 0.0
            && self.chain_seed_max_age_us > 0
            && self.chain_max_length > 0;
        if positive {
            Ok(())
        } else {
            Err(Error::Config("cluster parameters must be positive".into()))
        }
    }
}

/// The eight neighbor offsets in angular order, 45 degrees apart.
pub const COMPASS: [(i8, i8); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

fn compass_index(step: (i8, i8)) -> usize {
    COMPASS
        .iter()
        .position(|&c| c == step)
        .expect("step is a unit neighbor offset")
}

/// Cells searched first after a step in direction `step`: the step itself and
/// its two 45-degree neighbors.
pub fn primary_pattern(step: (i8, i8)) -> [(i8, i8); 3] {
    let k = compass_index(step);
    [COMPASS[(k + 7) % 8], COMPASS[k], COMPASS[(k + 1) % 8]]
}

/// Cells searched when the primary pattern is empty: the two cells at 90
/// degrees to the step.
pub fn extended_pattern(step: (i8, i8)) -> [(i8, i8); 2] {
    let k = compass_index(step);
    [COMPASS[(k + 6) % 8], COMPASS[(k + 2) % 8]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainElement {
    pub x: u16,
    pub y: u16,
    pub t: Micros,
}

/// Connected events of one polarity.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub polarity: Polarity,
    pub elements: Vec<ChainElement>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn last_step(&self) -> Option<(i8, i8)> {
        let n = self.elements.len();
        (n >= 2).then(|| {
            let a = self.elements[n - 2];
            let b = self.elements[n - 1];
            ((b.x as i32 - a.x as i32) as i8, (b.y as i32 - a.y as i32) as i8)
        })
    }

    pub fn events(&self) -> impl Iterator<Item = Event> + '_ {
        self.elements
            .iter()
            .map(|c| Event::new(c.x, c.y, c.t, self.polarity))
    }
}

/// Youngest eligible cell among `offsets` around `(x, y)`. Ties go to the
/// smaller y, then the smaller x.
fn youngest_in(
    sae: &Sae,
    x: u16,
    y: u16,
    offsets: &[(i8, i8)],
    min_t: Micros,
    visited: &[ChainElement],
) -> Option<ChainElement> {
    let mut best: Option<ChainElement> = None;
    for &(dx, dy) in offsets {
        let nx = x as i32 + dx as i32;
        let ny = y as i32 + dy as i32;
        if nx < 0 || ny < 0 || nx > u16::MAX as i32 || ny > u16::MAX as i32 {
            continue;
        }
        let (nx, ny) = (nx as u16, ny as u16);
        let Some(t) = sae.get(nx, ny) else { continue };
        if t < min_t || visited.iter().any(|c| c.x == nx && c.y == ny) {
            continue;
        }
        let cand = ChainElement { x: nx, y: ny, t };
        best = match best {
            None => Some(cand),
            Some(b) => {
                let better = cand.t > b.t || (cand.t == b.t && (cand.y, cand.x) < (b.y, b.x));
                Some(if better { cand } else { b })
            }
        };
    }
    best
}

/// Grows a chain from `seed` through `sae` (the seed's polarity SAE, or a
/// polarity-merged one).
pub fn grow_chain(seed: &Event, sae: &Sae, cfg: &ClusterConfig) -> Chain {
    let min_t = seed.t.saturating_sub(cfg.chain_seed_max_age_us);
    let mut elements = Vec::with_capacity(cfg.chain_max_length.min(64));
    elements.push(ChainElement {
        x: seed.x,
        y: seed.y,
        t: seed.t,
    });
    let mut chain = Chain {
        polarity: seed.polarity,
        elements,
    };
    if cfg.chain_max_length <= 1 {
        return chain;
    }
    match youngest_in(sae, seed.x, seed.y, &COMPASS, min_t, &chain.elements) {
        Some(second) => chain.elements.push(second),
        None => return chain,
    }
    while chain.len() < cfg.chain_max_length {
        let step = chain.last_step().expect("at least two elements");
        let cur = *chain.elements.last().expect("non-empty");
        let next = youngest_in(sae, cur.x, cur.y, &primary_pattern(step), min_t, &chain.elements)
            .or_else(|| {
                youngest_in(sae, cur.x, cur.y, &extended_pattern(step), min_t, &chain.elements)
            });
        match next {
            Some(n) => chain.elements.push(n),
            None => break,
        }
    }
    chain
}

/// A provisional group of events with an inferred image line.
#[derive(Debug, Clone)]
pub struct Cluster<T> {
    key: u64,
    created: Micros,
    newest: Micros,
    events: EventWindow<T>,
    line: InferredLine<T>,
}

impl<T: Scalar> Cluster<T> {
    pub fn from_events<I: IntoIterator<Item = Event>>(
        key: u64,
        created: Micros,
        time_scale: TimeScale,
        events: I,
    ) -> Option<Self> {
        let events = EventWindow::from_events(time_scale, events);
        let line = InferredLine::from_accumulator(events.accumulator())?;
        let newest = events.newest()?;
        Some(Self {
            key,
            created,
            newest,
            events,
            line,
        })
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn created(&self) -> Micros {
        self.created
    }

    /// Timestamp of the newest event ever added.
    pub fn newest(&self) -> Micros {
        self.newest
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &EventWindow<T> {
        &self.events
    }

    pub fn inferred_line(&self) -> &InferredLine<T> {
        &self.line
    }

    pub(crate) fn take_events(&mut self) -> EventWindow<T> {
        let ts = self.events.accumulator().time_scale();
        std::mem::replace(&mut self.events, EventWindow::new(ts))
    }

    /// Distance to the inferred line if the event is an addition candidate.
    pub fn candidate_distance(&self, e: &Event, cfg: &ClusterConfig) -> Option<T> {
        let (a, b) = self
            .line
            .distances(T::lit(e.x as f64), T::lit(e.y as f64));
        let extent = self.line.length.max(T::lit(cfg.min_midpoint_threshold_px));
        (a <= T::lit(cfg.addition_threshold_px) && b <= extent).then_some(a)
    }

    fn refresh(&mut self) {
        if let Some(line) = InferredLine::from_accumulator(self.events.accumulator()) {
            self.line = line;
        }
    }

    pub fn add(&mut self, e: Event) {
        self.events.push(e);
        self.newest = self.newest.max(e.t);
        self.refresh();
    }

    pub fn absorb(&mut self, mut other: Cluster<T>) {
        self.absorb_window(other.take_events(), other.newest);
    }

    fn absorb_window(&mut self, events: EventWindow<T>, newest: Micros) {
        self.events.absorb(events);
        self.newest = self.newest.max(newest);
        self.refresh();
    }

    /// Periodic check: drops old events and refits the inferred line.
    /// Returns `false` when the cluster should be deleted.
    pub fn maintain(&mut self, t_now: Micros, cfg: &ClusterConfig) -> (bool, usize) {
        let dropped = self
            .events
            .drop_older_than(t_now.saturating_sub(cfg.cleanup_event_age_us));
        let stale = t_now - self.newest > cfg.deletion_no_events_us;
        if stale || self.events.len() < 3 {
            return (false, dropped);
        }
        self.refresh();
        (true, dropped)
    }
}

/// Result of offering an event to the clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClusterAddition {
    Added { key: u64 },
    Merged { key: u64, absorbed: Vec<u64> },
    Rejected,
}

/// Merges and adds `e` among candidate clusters ordered oldest first.
///
/// Each candidate is merged into the first surviving candidate whose inferred
/// line is within the merge angle; the event then goes to the survivor
/// nearest to it. Returns `(target, absorbed)` as indices into `candidates`.
pub fn resolve_candidates<T: Scalar>(
    e: &Event,
    candidates: &mut [&mut Cluster<T>],
    cfg: &ClusterConfig,
) -> Option<(usize, Vec<usize>)> {
    if candidates.is_empty() {
        return None;
    }
    let merge_angle = T::lit(cfg.merge_angle_deg);
    let mut survivors: Vec<usize> = Vec::with_capacity(candidates.len());
    let mut absorbed = Vec::new();
    for i in 0..candidates.len() {
        let dir_i = candidates[i].line.direction;
        let into = survivors
            .iter()
            .copied()
            .find(|&s| angle_between_deg(candidates[s].line.direction, dir_i) < merge_angle);
        match into {
            Some(s) => {
                let events = candidates[i].take_events();
                let newest = candidates[i].newest;
                candidates[s].absorb_window(events, newest);
                absorbed.push(i);
            }
            None => survivors.push(i),
        }
    }
    let (px, py) = (T::lit(e.x as f64), T::lit(e.y as f64));
    let target = survivors
        .iter()
        .copied()
        .min_by(|&a, &b| {
            let da = candidates[a].line.distances(px, py).0;
            let db = candidates[b].line.distances(px, py).0;
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("at least one survivor");
    candidates[target].add(*e);
    Some((target, absorbed))
}

/// Offers `e` to `clusters` (ordered oldest first), merging and removing
/// absorbed clusters.
pub fn try_add_to_cluster<T: Scalar>(
    e: &Event,
    clusters: &mut Vec<Cluster<T>>,
    cfg: &ClusterConfig,
) -> ClusterAddition {
    let mut refs: Vec<&mut Cluster<T>> = clusters
        .iter_mut()
        .filter(|c| c.candidate_distance(e, cfg).is_some())
        .collect();
    let Some((target, absorbed)) = resolve_candidates(e, &mut refs, cfg) else {
        return ClusterAddition::Rejected;
    };
    let key = refs[target].key;
    let absorbed_keys: Vec<u64> = absorbed.iter().map(|&i| refs[i].key).collect();
    drop(refs);
    clusters.retain(|c| !absorbed_keys.contains(&c.key));
    if absorbed_keys.is_empty() {
        ClusterAddition::Added { key }
    } else {
        ClusterAddition::Merged {
            key,
            absorbed: absorbed_keys,
        }
    }
}

/// Creates a cluster from a chain that is long enough.
pub fn try_create_cluster<T: Scalar>(
    chain: &Chain,
    key: u64,
    t_now: Micros,
    time_scale: TimeScale,
    cfg: &ClusterConfig,
) -> Option<Cluster<T>> {
    if chain.len() < cfg.creation_num_events {
        return None;
    }
    Cluster::from_events(key, t_now, time_scale, chain.events())
}

/// Counts from one cluster maintenance pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClusterMaintenance {
    pub deleted: usize,
    pub events_dropped: usize,
}

/// Ages out events, deletes stale or depleted clusters and refits the rest.
pub fn cluster_maintenance<T: Scalar>(
    clusters: &mut Vec<Cluster<T>>,
    t_now: Micros,
    cfg: &ClusterConfig,
) -> ClusterMaintenance {
    let mut report = ClusterMaintenance::default();
    clusters.retain_mut(|c| {
        let (keep, dropped) = c.maintain(t_now, cfg);
        report.events_dropped += dropped;
        if !keep {
            report.deleted += 1;
        }
        keep
    });
    report
}
