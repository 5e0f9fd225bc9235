//! Two-stage event gate: refractory suppression, then neighborhood support.

use crate::error::{Error, Result};
use crate::event::{ms_to_us, Event, Micros, Polarity, Sae, SensorSize};

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub refractory_same_polarity_us: Micros,
    pub refractory_opposite_polarity_us: Micros,
    /// 2 means a 5x5 window.
    pub neighborhood_half_extent: u16,
    pub neighborhood_age_us: Micros,
    pub neighborhood_min_support: usize,
    /// Write suppressed events into the SAEs as well.
    pub update_sae_on_suppress: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            refractory_same_polarity_us: ms_to_us(8.0),
            refractory_opposite_polarity_us: ms_to_us(1.0),
            neighborhood_half_extent: 2,
            neighborhood_age_us: ms_to_us(70.0),
            neighborhood_min_support: 3,
            update_sae_on_suppress: true,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.refractory_same_polarity_us <= 0
            || self.refractory_opposite_polarity_us <= 0
            || self.neighborhood_age_us <= 0
        {
            return Err(Error::Config("filter durations must be positive".into()));
        }
        if self.neighborhood_min_support == 0 {
            return Err(Error::Config("neighborhood_min_support must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of [`EventFilter::filter_event`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterOutcome {
    Pass,
    Refractory,
    NoSupport,
    OutOfBounds,
}

impl FilterOutcome {
    pub fn passed(self) -> bool {
        self == FilterOutcome::Pass
    }
}

/// `true` iff enough time elapsed since the last same- and opposite-polarity
/// firing at the event's pixel. Pixels that never fired pass.
pub fn refractory_pass(e: &Event, same: &Sae, opposite: &Sae, cfg: &FilterConfig) -> bool {
    let elapsed_ok = |sae: &Sae, period: Micros| match sae.get(e.x, e.y) {
        None => true,
        Some(t) => e.t.saturating_sub(t) >= period,
    };
    elapsed_ok(same, cfg.refractory_same_polarity_us)
        && elapsed_ok(opposite, cfg.refractory_opposite_polarity_us)
}

/// `true` iff at least `min_support` other pixels in the window fired within
/// the neighborhood age.
pub fn neighborhood_pass(e: &Event, merged: &Sae, cfg: &FilterConfig) -> bool {
    let min_t = e.t.saturating_sub(cfg.neighborhood_age_us);
    merged.query_window(e.x, e.y, cfg.neighborhood_half_extent, min_t)
        >= cfg.neighborhood_min_support
}

/// Filter state: one SAE per polarity plus a polarity-merged SAE.
#[derive(Debug)]
pub struct EventFilter {
    cfg: FilterConfig,
    by_polarity: [Sae; 2],
    merged: Sae,
}

impl EventFilter {
    pub fn new(size: SensorSize, cfg: FilterConfig) -> Self {
        Self {
            cfg,
            by_polarity: [Sae::new(size), Sae::new(size)],
            merged: Sae::new(size),
        }
    }

    pub fn config(&self) -> &FilterConfig {
        &self.cfg
    }

    pub fn sae(&self, polarity: Polarity) -> &Sae {
        &self.by_polarity[polarity.index()]
    }

    pub fn merged_sae(&self) -> &Sae {
        &self.merged
    }

    /// Refractory check, then neighborhood check. The event is written to the
    /// SAEs afterwards (also when suppressed, unless configured otherwise).
    pub fn filter_event(&mut self, e: &Event) -> FilterOutcome {
        if self.merged.size().check(e).is_err() {
            return FilterOutcome::OutOfBounds;
        }
        let same = &self.by_polarity[e.polarity.index()];
        let opposite = &self.by_polarity[e.polarity.opposite().index()];
        let outcome = if !refractory_pass(e, same, opposite, &self.cfg) {
            FilterOutcome::Refractory
        } else if !neighborhood_pass(e, &self.merged, &self.cfg) {
            FilterOutcome::NoSupport
        } else {
            FilterOutcome::Pass
        };
        if outcome.passed() || self.cfg.update_sae_on_suppress {
            self.by_polarity[e.polarity.index()].update_unchecked(e.x, e.y, e.t);
            self.merged.update_unchecked(e.x, e.y, e.t);
        }
        outcome
    }
}
