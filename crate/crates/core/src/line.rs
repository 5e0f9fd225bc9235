//! Line hypotheses: promotion from clusters, event addition, the
//! initializing/active/hibernated life cycle and merging.

use crate::cluster::Cluster;
use crate::error::{Error, Result};
use crate::event::{ms_to_us, Event, Micros};
use crate::geometry::{
    angle_between_deg, connected_length, direction_angle_deg, line_direction, line_length,
    point_line_distances, EventWindow, LengthModel, LineGeometry, PlaneFit,
};
use crate::geometry::plane::DEGENERATE_NXY2;
use crate::scalar::Scalar;

/// Public identifier, assigned when a line first becomes active.
pub type LineId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LineState {
    Initializing,
    Active,
    Hibernated,
}

impl LineState {
    pub fn as_str(self) -> &'static str {
        match self {
            LineState::Initializing => "INIT",
            LineState::Active => "ACTIVE",
            LineState::Hibernated => "HIBER",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "INIT" => Some(LineState::Initializing),
            "ACTIVE" => Some(LineState::Active),
            "HIBER" => Some(LineState::Hibernated),
            _ => None,
        }
    }
}

/// When a hibernated line wakes up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WakeRule {
    /// Density back at or above the hibernation threshold times the hysteresis.
    #[default]
    Density,
    /// Any added event.
    AnyEvent,
}

/// Quantity compared against the promotion threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PromotionCompare {
    /// `sqrt(lambda_3)` in pixels.
    #[default]
    StdDev,
    /// `lambda_3` directly.
    Variance,
}

/// Along-line acceptance range for event addition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdditionExtent {
    /// `b < l`.
    #[default]
    Length,
    /// `b < l / 2`.
    HalfLength,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineConfig {
    pub promotion_threshold_px: f64,
    pub promotion_num_events: usize,
    /// Connected length needed at the end of initialization.
    pub initialization_length_px: f64,
    pub initialization_period_us: Micros,
    pub addition_threshold_px: f64,
    pub merge_angle_deg: f64,
    pub merge_distance_px: f64,
    /// Events per pixel and millisecond below which an active line hibernates.
    pub hibernation_density: f64,
    pub density_window_us: Micros,
    pub cleanup_event_age_us: Micros,
    /// Active lines without a new event for this long are deleted.
    pub deletion_no_events_us: Micros,
    pub hibernation_timeout_us: Micros,
    pub min_active_length_px: f64,
    /// Wake threshold factor over `hibernation_density`, at least 1.
    pub hibernation_hysteresis: f64,
    pub connected_bin_px: f64,
    pub wake_rule: WakeRule,
    pub promotion_compare: PromotionCompare,
    pub length_model: LengthModel,
    pub addition_extent: AdditionExtent,
}

impl Default for LineConfig {
    fn default() -> Self {
        Self {
            promotion_threshold_px: 1.2,
            promotion_num_events: 35,
            initialization_length_px: 70.0,
            initialization_period_us: ms_to_us(90.0),
            addition_threshold_px: 1.8,
            merge_angle_deg: 8.0,
            merge_distance_px: 3.5,
            hibernation_density: 0.08,
            density_window_us: ms_to_us(25.0),
            cleanup_event_age_us: ms_to_us(50.0),
            deletion_no_events_us: ms_to_us(200.0),
            hibernation_timeout_us: ms_to_us(1000.0),
            min_active_length_px: 35.0,
            hibernation_hysteresis: 1.0,
            connected_bin_px: 2.0,
            wake_rule: WakeRule::Density,
            promotion_compare: PromotionCompare::StdDev,
            length_model: LengthModel::Variance,
            addition_extent: AdditionExtent::Length,
        }
    }
}

impl LineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.promotion_threshold_px > 0.0
            && self.promotion_num_events >= 3
            && self.initialization_length_px >= 0.0
            && self.initialization_period_us > 0
            && self.addition_threshold_px > 0.0
            && self.merge_angle_deg >= 0.0
            && self.merge_distance_px >= 0.0
            && self.hibernation_density >= 0.0
            && self.density_window_us > 0
            && self.cleanup_event_age_us > 0
            && self.deletion_no_events_us > 0
            && self.hibernation_timeout_us > 0
            && self.min_active_length_px >= 0.0
            && self.connected_bin_px > 0.0;
        if !positive {
            return Err(Error::Config("line parameters out of range".into()));
        }
        if !(self.hibernation_hysteresis >= 1.0) {
            return Err(Error::Config("line.hibernation_hysteresis must be >= 1".into()));
        }
        Ok(())
    }
}

/// Why a line changed state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionReason {
    Promoted,
    Initialized,
    InitializationFailed,
    Hibernated,
    Woken,
    Starved,
    TooShort,
    TooFewEvents,
    HibernationTimeout,
    Merged,
    DegenerateFit,
}

/// One state change; `None` stands for "not existing".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub t: Micros,
    pub from: Option<LineState>,
    pub to: Option<LineState>,
    pub reason: TransitionReason,
}

/// Complete life cycle of one line.
#[derive(Debug, Clone, PartialEq)]
pub struct LineHistory {
    pub key: u64,
    pub id: Option<LineId>,
    pub transitions: Vec<Transition>,
}

fn edge_allowed(from: Option<LineState>, to: Option<LineState>) -> bool {
    use LineState::*;
    matches!(
        (from, to),
        (None, Some(Initializing))
            | (Some(Initializing), Some(Active))
            | (Some(Initializing), None)
            | (Some(Active), Some(Hibernated))
            | (Some(Hibernated), Some(Active))
            | (Some(Active), None)
            | (Some(Hibernated), None)
    )
}

/// Checks that a history only uses permitted edges, is contiguous and
/// ordered in time, and ends at most once in deletion.
pub fn audit_history(history: &[Transition]) -> std::result::Result<(), String> {
    let mut current: Option<LineState> = None;
    let mut last_t = Micros::MIN;
    for (i, tr) in history.iter().enumerate() {
        if i > 0 && current.is_none() {
            return Err(format!("transition {i} after deletion"));
        }
        if tr.from != current {
            return Err(format!("transition {i} starts from {:?}, line was {:?}", tr.from, current));
        }
        if !edge_allowed(tr.from, tr.to) {
            return Err(format!("transition {i}: {:?} -> {:?} not permitted", tr.from, tr.to));
        }
        if tr.t < last_t {
            return Err(format!("transition {i} goes back in time"));
        }
        last_t = tr.t;
        current = tr.to;
    }
    Ok(())
}

/// Fit and direction accepted for promotion.
fn promotion_fit<T: Scalar>(
    events: &EventWindow<T>,
    cfg: &LineConfig,
) -> Option<(PlaneFit<T>, [T; 2])> {
    if events.len() < cfg.promotion_num_events {
        return None;
    }
    let fit = PlaneFit::fit(events.accumulator()).ok()?;
    let thr = T::lit(cfg.promotion_threshold_px);
    let ok = match cfg.promotion_compare {
        PromotionCompare::StdDev => fit.plane_std_dev() < thr,
        PromotionCompare::Variance => fit.eigenvalues[2] < thr,
    };
    if !ok {
        return None;
    }
    let d = line_direction(fit.normal).ok()?;
    Some((fit, d))
}

/// A line hypothesis backed by a spatio-temporal plane fit.
#[derive(Debug, Clone)]
pub struct Line<T> {
    key: u64,
    id: Option<LineId>,
    state: LineState,
    state_since: Micros,
    created: Micros,
    newest: Micros,
    events: EventWindow<T>,
    fit: PlaneFit<T>,
    direction: [T; 2],
    length: T,
    /// Midpoint shift per scaled time unit.
    velocity: [T; 2],
    frozen_midpoint: Option<[T; 2]>,
    history: Vec<Transition>,
}

impl<T: Scalar> Line<T> {
    /// Promotes `cluster` if it holds enough events that lie close to a
    /// plane. On success the cluster is left empty.
    pub fn promote(cluster: &mut Cluster<T>, key: u64, t_now: Micros, cfg: &LineConfig) -> Option<Self> {
        let (fit, direction) = promotion_fit(cluster.events(), cfg)?;
        let newest = cluster.newest();
        let events = cluster.take_events();
        let mut line = Self {
            key,
            id: None,
            state: LineState::Initializing,
            state_since: t_now,
            created: t_now,
            newest,
            events,
            fit,
            direction,
            length: T::zero(),
            velocity: [T::zero(); 2],
            frozen_midpoint: None,
            history: Vec::with_capacity(4),
        };
        line.set_geometry(fit, direction, cfg);
        line.history.push(Transition {
            t: t_now,
            from: None,
            to: Some(LineState::Initializing),
            reason: TransitionReason::Promoted,
        });
        Some(line)
    }

    /// Whether `cluster` would be promoted.
    pub fn promotable(cluster: &Cluster<T>, cfg: &LineConfig) -> bool {
        promotion_fit(cluster.events(), cfg).is_some()
    }

    fn set_geometry(&mut self, fit: PlaneFit<T>, direction: [T; 2], cfg: &LineConfig) {
        let n = fit.normal;
        let nxy2 = n[0] * n[0] + n[1] * n[1];
        self.velocity = if nxy2 > T::lit(DEGENERATE_NXY2) {
            let k = -T::one() / nxy2;
            [k * n[0] * n[2], k * n[1] * n[2]]
        } else {
            [T::zero(); 2]
        };
        self.length = line_length(&fit, direction, cfg.length_model);
        self.fit = fit;
        self.direction = direction;
    }

    fn refit(&mut self, cfg: &LineConfig) -> Result<()> {
        let fit = PlaneFit::fit(self.events.accumulator())?;
        let d = line_direction(fit.normal)?;
        self.set_geometry(fit, d, cfg);
        Ok(())
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn id(&self) -> Option<LineId> {
        self.id
    }

    pub fn state(&self) -> LineState {
        self.state
    }

    pub fn state_since(&self) -> Micros {
        self.state_since
    }

    pub fn created(&self) -> Micros {
        self.created
    }

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

    pub fn fit(&self) -> &PlaneFit<T> {
        &self.fit
    }

    pub fn direction(&self) -> [T; 2] {
        self.direction
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn history(&self) -> &[Transition] {
        &self.history
    }

    pub fn into_history(self) -> LineHistory {
        LineHistory {
            key: self.key,
            id: self.id,
            transitions: self.history,
        }
    }

    pub fn history_record(&self) -> LineHistory {
        LineHistory {
            key: self.key,
            id: self.id,
            transitions: self.history.clone(),
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen_midpoint.is_some()
    }

    /// Midpoint at `t`: transported along the plane, or the value frozen at
    /// hibernation.
    #[inline]
    pub fn midpoint_at(&self, t: Micros) -> [T; 2] {
        if let Some(p) = self.frozen_midpoint {
            return p;
        }
        let g = self.fit.centroid_xy();
        let dt = self.fit.scaled_time(t) - self.fit.centroid[2];
        [g[0] + dt * self.velocity[0], g[1] + dt * self.velocity[1]]
    }

    pub fn geometry_at(&self, t: Micros) -> LineGeometry<T> {
        LineGeometry {
            direction: self.direction,
            midpoint: self.midpoint_at(t),
            length: self.length,
        }
    }

    pub fn angle_deg(&self) -> T {
        direction_angle_deg(self.direction)
    }

    /// Perpendicular distance if `e` may be added to this line.
    #[inline]
    pub fn qualifies(&self, e: &Event, cfg: &LineConfig) -> Option<T> {
        let p = self.midpoint_at(e.t);
        let (a, b) = point_line_distances(p, self.direction, T::lit(e.x as f64), T::lit(e.y as f64));
        let extent = match cfg.addition_extent {
            AdditionExtent::Length => self.length,
            AdditionExtent::HalfLength => self.length / T::lit(2.0),
        };
        (a < T::lit(cfg.addition_threshold_px) && b < extent).then_some(a)
    }

    /// Events per pixel and millisecond over the density window.
    pub fn density(&self, t_now: Micros, cfg: &LineConfig) -> T {
        if !(self.length > T::zero()) {
            return T::zero();
        }
        let n = self
            .events
            .count_newer_than(t_now.saturating_sub(cfg.density_window_us));
        let window_ms = T::lit(cfg.density_window_us as f64 / 1000.0);
        T::lit(n as f64) / (self.length * window_ms)
    }

    pub fn connected_length(&self, cfg: &LineConfig) -> T {
        connected_length(self.events.iter(), &self.fit, self.direction, T::lit(cfg.connected_bin_px))
    }

    fn transition(&mut self, t: Micros, to: Option<LineState>, reason: TransitionReason) {
        self.history.push(Transition {
            t,
            from: Some(self.state),
            to,
            reason,
        });
        if let Some(s) = to {
            self.state = s;
            self.state_since = t;
        }
    }

    fn delete(&mut self, t: Micros, reason: TransitionReason) -> bool {
        self.transition(t, None, reason);
        false
    }

    fn hibernate(&mut self, t: Micros) {
        self.frozen_midpoint = Some(self.fit.centroid_xy());
        self.transition(t, Some(LineState::Hibernated), TransitionReason::Hibernated);
    }

    /// Leaves hibernation: drops stale events and refits. A failed refit
    /// keeps the previous fit until the next maintenance decides.
    fn wake(&mut self, t: Micros, cfg: &LineConfig) -> usize {
        self.frozen_midpoint = None;
        self.transition(t, Some(LineState::Active), TransitionReason::Woken);
        let dropped = self
            .events
            .drop_older_than(t.saturating_sub(cfg.cleanup_event_age_us));
        let _ = self.refit(cfg);
        dropped
    }

    fn wake_due(&self, t_now: Micros, cfg: &LineConfig, on_event: bool) -> bool {
        match cfg.wake_rule {
            WakeRule::AnyEvent => on_event || self.newest > self.state_since,
            WakeRule::Density => {
                let thr = T::lit(cfg.hibernation_density * cfg.hibernation_hysteresis);
                self.density(t_now, cfg) >= thr
            }
        }
    }

    /// Adds an event that passed [`Line::qualifies`]. A hibernated line keeps
    /// its fit and may wake up.
    pub fn add(&mut self, e: Event, cfg: &LineConfig) {
        self.events.push(e);
        self.newest = self.newest.max(e.t);
        if self.state == LineState::Hibernated && self.wake_due(e.t, cfg, true) {
            self.wake(e.t, cfg);
        }
    }

    /// Periodic update. Returns `false` once the line has been deleted; the
    /// deletion is recorded in the history.
    pub fn maintain(
        &mut self,
        t_now: Micros,
        cfg: &LineConfig,
        hibernation_enabled: bool,
        next_id: &mut dyn FnMut() -> LineId,
    ) -> LineMaintenance {
        let mut out = LineMaintenance {
            alive: true,
            events_dropped: 0,
        };
        if self.state == LineState::Hibernated {
            if t_now - self.state_since > cfg.hibernation_timeout_us {
                out.alive = self.delete(t_now, TransitionReason::HibernationTimeout);
            } else if !hibernation_enabled || self.wake_due(t_now, cfg, false) {
                out.events_dropped = self.wake(t_now, cfg);
            }
            return out;
        }
        out.events_dropped = self
            .events
            .drop_older_than(t_now.saturating_sub(cfg.cleanup_event_age_us));
        if self.events.len() < 3 {
            out.alive = self.delete(t_now, TransitionReason::TooFewEvents);
            return out;
        }
        if self.refit(cfg).is_err() {
            out.alive = self.delete(t_now, TransitionReason::DegenerateFit);
            return out;
        }
        match self.state {
            LineState::Initializing => {
                if t_now - self.created >= cfg.initialization_period_us {
                    if self.connected_length(cfg) >= T::lit(cfg.initialization_length_px) {
                        self.id = Some(next_id());
                        self.transition(t_now, Some(LineState::Active), TransitionReason::Initialized);
                    } else {
                        out.alive = self.delete(t_now, TransitionReason::InitializationFailed);
                    }
                }
            }
            LineState::Active => {
                if t_now - self.newest > cfg.deletion_no_events_us {
                    out.alive = self.delete(t_now, TransitionReason::Starved);
                } else if self.length < T::lit(cfg.min_active_length_px) {
                    out.alive = self.delete(t_now, TransitionReason::TooShort);
                } else if hibernation_enabled
                    && self.density(t_now, cfg) < T::lit(cfg.hibernation_density)
                {
                    self.hibernate(t_now);
                }
            }
            LineState::Hibernated => unreachable!("handled above"),
        }
        out
    }

    /// Takes over the events of a merged line. Hibernated receivers keep
    /// their fit; others keep only events within the cleanup age.
    fn absorb(&mut self, other: &mut Line<T>, t_now: Micros, cfg: &LineConfig) {
        let ts = other.events.accumulator().time_scale();
        let events = std::mem::replace(&mut other.events, EventWindow::new(ts));
        self.events.absorb(events);
        self.newest = self.newest.max(other.newest);
        other.transition(t_now, None, TransitionReason::Merged);
        if self.state != LineState::Hibernated {
            // a hibernated victim still holds events past the cleanup age
            self.events.drop_older_than(t_now.saturating_sub(cfg.cleanup_event_age_us));
            let _ = self.refit(cfg);
        }
    }

    /// Ordering among lines merging into one: public IDs first (lowest
    /// wins), then creation order.
    fn merge_rank(&self) -> (bool, LineId, u64) {
        (self.id.is_none(), self.id.unwrap_or(0), self.key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineMaintenance {
    pub alive: bool,
    pub events_dropped: usize,
}

/// Whether two lines describe the same edge at `t`.
pub fn should_merge<T: Scalar>(a: &Line<T>, b: &Line<T>, t: Micros, cfg: &LineConfig) -> bool {
    if angle_between_deg(a.direction, b.direction) >= T::lit(cfg.merge_angle_deg) {
        return false;
    }
    let ga = a.geometry_at(t);
    let gb = b.geometry_at(t);
    let limit = T::lit(cfg.merge_distance_px);
    ga.distances(gb.midpoint[0], gb.midpoint[1]).0 < limit
        && gb.distances(ga.midpoint[0], ga.midpoint[1]).0 < limit
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Merges every connected group of mutually close lines into its
/// best-ranked member. The pairing is decided on the geometry before any
/// merge, so the result does not depend on the order of `lines`. Returns
/// `(receiver, merged)` index pairs; merged lines are left deleted and empty.
pub fn merge_lines<T: Scalar>(
    lines: &mut [&mut Line<T>],
    t_now: Micros,
    cfg: &LineConfig,
) -> Vec<(usize, usize)> {
    let n = lines.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if should_merge(lines[i], lines[j], t_now, cfg) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        groups[r].push(i);
    }
    let mut merges = Vec::new();
    for group in groups.into_iter().filter(|g| g.len() > 1) {
        let receiver = *group
            .iter()
            .min_by_key(|&&i| lines[i].merge_rank())
            .expect("non-empty group");
        for &victim in group.iter().filter(|&&i| i != receiver) {
            let (r, v) = pair_mut(lines, receiver, victim);
            r.absorb(v, t_now, cfg);
            merges.push((receiver, victim));
        }
    }
    merges
}

fn pair_mut<'a, T>(
    lines: &'a mut [&mut Line<T>],
    a: usize,
    b: usize,
) -> (&'a mut Line<T>, &'a mut Line<T>) {
    assert_ne!(a, b);
    if a < b {
        let (lo, hi) = lines.split_at_mut(b);
        (&mut *lo[a], &mut *hi[0])
    } else {
        let (lo, hi) = lines.split_at_mut(a);
        (&mut *hi[0], &mut *lo[b])
    }
}

/// Result of offering an event to the lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineAddition {
    Added { index: usize },
    Ambiguous,
    Rejected,
}

/// Adds `e` to the single qualifying line; two or more qualifying lines
/// leave the event unused.
pub fn try_add_to_line<T: Scalar>(e: &Event, lines: &mut [Line<T>], cfg: &LineConfig) -> LineAddition {
    let mut found = None;
    for (i, l) in lines.iter().enumerate() {
        if l.qualifies(e, cfg).is_some() {
            if found.is_some() {
                return LineAddition::Ambiguous;
            }
            found = Some(i);
        }
    }
    match found {
        Some(index) => {
            lines[index].add(*e, cfg);
            LineAddition::Added { index }
        }
        None => LineAddition::Rejected,
    }
}

/// Counts from one line maintenance pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LineMaintenanceReport {
    pub activated: usize,
    pub hibernated: usize,
    pub woken: usize,
    pub deleted: usize,
    pub merged: usize,
    pub events_dropped: usize,
}

impl LineMaintenanceReport {
    pub fn count_transitions(&mut self, transitions: &[Transition]) {
        for tr in transitions {
            match (tr.to, tr.reason) {
                (None, TransitionReason::Merged) => self.merged += 1,
                (None, _) => self.deleted += 1,
                (Some(LineState::Active), TransitionReason::Initialized) => self.activated += 1,
                (Some(LineState::Active), _) => self.woken += 1,
                (Some(LineState::Hibernated), _) => self.hibernated += 1,
                _ => {}
            }
        }
    }
}

/// Maintenance over a plain vector of lines: per-line update, then merging.
/// Removed lines' histories are appended to `retired`.
pub fn line_maintenance<T: Scalar>(
    lines: &mut Vec<Line<T>>,
    t_now: Micros,
    cfg: &LineConfig,
    hibernation_enabled: bool,
    next_id: &mut dyn FnMut() -> LineId,
    retired: &mut Vec<LineHistory>,
) -> LineMaintenanceReport {
    let mut report = LineMaintenanceReport::default();
    let mut alive = vec![true; lines.len()];
    for (i, l) in lines.iter_mut().enumerate() {
        let before = l.history.len();
        let r = l.maintain(t_now, cfg, hibernation_enabled, next_id);
        report.events_dropped += r.events_dropped;
        report.count_transitions(&l.history[before..]);
        alive[i] = r.alive;
    }
    let mut keep = alive.iter();
    let mut gone = Vec::new();
    let mut kept = Vec::with_capacity(lines.len());
    for l in lines.drain(..) {
        if *keep.next().expect("same length") {
            kept.push(l);
        } else {
            gone.push(l);
        }
    }
    *lines = kept;
    retired.extend(gone.into_iter().map(Line::into_history));

    let mut refs: Vec<&mut Line<T>> = lines.iter_mut().collect();
    let merges = merge_lines(&mut refs, t_now, cfg);
    drop(refs);
    report.merged += merges.len();
    if !merges.is_empty() {
        let victims: Vec<usize> = merges.iter().map(|&(_, v)| v).collect();
        let mut out = Vec::with_capacity(lines.len());
        for (idx, l) in lines.drain(..).enumerate() {
            if victims.contains(&idx) {
                retired.push(l.into_history());
            } else {
                out.push(l);
            }
        }
        *lines = out;
    }
    report
}
