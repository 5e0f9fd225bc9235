//! Running first and second moments of events in the scaled (x, y, t) space.

use std::collections::VecDeque;

use super::eigen::Sym3;
use crate::event::{Event, Micros, TimeScale};
use crate::scalar::Scalar;

/// Anchor the moments are accumulated relative to. Keeping the sums close to
/// the data bounds the cancellation in the covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Origin {
    pub x: u16,
    pub y: u16,
    pub t: Micros,
}

impl Origin {
    pub fn of(e: &Event) -> Self {
        Self {
            x: e.x,
            y: e.y,
            t: e.t,
        }
    }
}

/// Incremental mean and covariance of events.
#[derive(Debug, Clone)]
pub struct EventAccumulator<T> {
    time_scale: TimeScale,
    origin: Option<Origin>,
    n: usize,
    sum: [T; 3],
    // xx, xy, xt, yy, yt, tt
    sum_sq: [T; 6],
}

impl<T: Scalar> EventAccumulator<T> {
    pub fn new(time_scale: TimeScale) -> Self {
        Self {
            time_scale,
            origin: None,
            n: 0,
            sum: [T::zero(); 3],
            sum_sq: [T::zero(); 6],
        }
    }

    pub fn time_scale(&self) -> TimeScale {
        self.time_scale
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn origin(&self) -> Option<Origin> {
        self.origin
    }

    /// Coordinates of an event relative to the origin.
    #[inline]
    pub fn relative(&self, origin: Origin, e: &Event) -> [T; 3] {
        [
            T::lit(e.x as f64 - origin.x as f64),
            T::lit(e.y as f64 - origin.y as f64),
            self.time_scale.scale(e.t - origin.t),
        ]
    }

    #[inline]
    fn apply(&mut self, p: [T; 3], sign: T) {
        for (s, v) in self.sum.iter_mut().zip(p) {
            *s = *s + sign * v;
        }
        let products = [
            p[0] * p[0],
            p[0] * p[1],
            p[0] * p[2],
            p[1] * p[1],
            p[1] * p[2],
            p[2] * p[2],
        ];
        for (s, v) in self.sum_sq.iter_mut().zip(products) {
            *s = *s + sign * v;
        }
    }

    pub fn add(&mut self, e: &Event) {
        let origin = *self.origin.get_or_insert_with(|| Origin::of(e));
        let p = self.relative(origin, e);
        self.apply(p, T::one());
        self.n += 1;
    }

    /// Removes a previously added event. Removing an event that was never
    /// added corrupts the moments.
    pub fn remove(&mut self, e: &Event) {
        let Some(origin) = self.origin else {
            return;
        };
        if self.n <= 1 {
            self.clear();
            return;
        }
        let p = self.relative(origin, e);
        self.apply(p, -T::one());
        self.n -= 1;
    }

    pub fn clear(&mut self) {
        self.origin = None;
        self.n = 0;
        self.sum = [T::zero(); 3];
        self.sum_sq = [T::zero(); 6];
    }

    /// Recomputes the moments from scratch, re-anchored at `anchor` (or the
    /// first event).
    pub fn rebuild<'a, I>(&mut self, events: I, anchor: Option<&Event>)
    where
        I: IntoIterator<Item = &'a Event>,
    {
        self.clear();
        self.origin = anchor.map(Origin::of);
        for e in events {
            self.add(e);
        }
    }

    /// Mean relative to the origin.
    pub fn centroid(&self) -> Option<[T; 3]> {
        if self.n == 0 {
            return None;
        }
        let n = T::lit(self.n as f64);
        Some([self.sum[0] / n, self.sum[1] / n, self.sum[2] / n])
    }

    /// Sample covariance `X^T X / (N - 1)` over centered coordinates.
    pub fn covariance(&self) -> Option<Sym3<T>> {
        if self.n < 2 {
            return None;
        }
        let n = T::lit(self.n as f64);
        let nm1 = T::lit((self.n - 1) as f64);
        let s = self.sum;
        let c = |k: usize, i: usize, j: usize| {
            let v = (self.sum_sq[k] - s[i] * s[j] / n) / nm1;
            if i == j {
                v.max(T::zero())
            } else {
                v
            }
        };
        Some(Sym3 {
            a00: c(0, 0, 0),
            a01: c(1, 0, 1),
            a02: c(2, 0, 2),
            a11: c(3, 1, 1),
            a12: c(4, 1, 2),
            a22: c(5, 2, 2),
        })
    }
}

/// Number of mutations after which [`EventWindow`] rebuilds its moments.
pub const REBUILD_EVERY: u32 = 256;

/// Time-ordered events together with their running moments.
#[derive(Debug, Clone)]
pub struct EventWindow<T> {
    events: VecDeque<Event>,
    acc: EventAccumulator<T>,
    mutations: u32,
}

impl<T: Scalar> EventWindow<T> {
    pub fn new(time_scale: TimeScale) -> Self {
        Self {
            events: VecDeque::new(),
            acc: EventAccumulator::new(time_scale),
            mutations: 0,
        }
    }

    pub fn from_events<I: IntoIterator<Item = Event>>(time_scale: TimeScale, events: I) -> Self {
        let mut w = Self::new(time_scale);
        for e in events {
            w.push(e);
        }
        w.rebuild();
        w
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn accumulator(&self) -> &EventAccumulator<T> {
        &self.acc
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Event> + '_ {
        self.events.iter()
    }

    pub fn oldest(&self) -> Option<Micros> {
        self.events.front().map(|e| e.t)
    }

    pub fn newest(&self) -> Option<Micros> {
        self.events.back().map(|e| e.t)
    }

    /// Inserts keeping time order; events arrive almost sorted.
    pub fn push(&mut self, e: Event) {
        match self.events.back() {
            Some(last) if last.t > e.t => {
                let pos = self.events.partition_point(|x| x.t <= e.t);
                self.events.insert(pos, e);
            }
            _ => self.events.push_back(e),
        }
        self.acc.add(&e);
        self.touch(1);
    }

    /// Drops every event with `t < min_t`; returns how many were dropped.
    pub fn drop_older_than(&mut self, min_t: Micros) -> usize {
        let mut dropped = 0;
        while let Some(front) = self.events.front() {
            if front.t >= min_t {
                break;
            }
            let e = self.events.pop_front().expect("front exists");
            self.acc.remove(&e);
            dropped += 1;
        }
        if dropped > 0 {
            self.touch(dropped as u32);
        }
        dropped
    }

    /// Number of events with `t > after`.
    pub fn count_newer_than(&self, after: Micros) -> usize {
        self.events.len() - self.events.partition_point(|e| e.t <= after)
    }

    /// Moves all events of `other` into `self`.
    pub fn absorb(&mut self, other: EventWindow<T>) {
        let mut merged = VecDeque::with_capacity(self.events.len() + other.events.len());
        let mut a = std::mem::take(&mut self.events).into_iter().peekable();
        let mut b = other.events.into_iter().peekable();
        loop {
            let take_a = match (a.peek(), b.peek()) {
                (Some(x), Some(y)) => x.t <= y.t,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            let next = if take_a { a.next() } else { b.next() };
            merged.push_back(next.expect("peeked"));
        }
        self.events = merged;
        self.rebuild();
    }

    pub fn rebuild(&mut self) {
        let anchor = self.events.get(self.events.len() / 2).copied();
        self.acc.rebuild(self.events.iter(), anchor.as_ref());
        self.mutations = 0;
    }

    fn touch(&mut self, n: u32) {
        self.mutations += n;
        if self.mutations >= REBUILD_EVERY {
            self.rebuild();
        }
    }
}
