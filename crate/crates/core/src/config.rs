//! Tracker configuration and its flat `key = value` text form.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::cluster::ClusterConfig;
use crate::error::{Error, Result};
use crate::event::{ms_to_us, Micros, SensorSize, TimeScale};
use crate::filter::FilterConfig;
use crate::geometry::LengthModel;
use crate::line::{AdditionExtent, LineConfig, PromotionCompare, WakeRule};

/// Which unassigned-event map chain growth walks on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolarityMode {
    /// One map per polarity; chains never mix polarities.
    #[default]
    Split,
    /// A single map for both polarities.
    Merged,
}

/// Where clusters get promoted to lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PromotionPath {
    /// On every cluster addition once the cluster is large enough.
    #[default]
    Ingest,
    /// Only during periodic maintenance.
    Maintenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub sensor: SensorSize,
    pub time_scale: TimeScale,
    pub maintenance_interval_us: Micros,
    pub hibernation_enabled: bool,
    pub polarity_mode: PolarityMode,
    pub promotion_path: PromotionPath,
    pub filter: FilterConfig,
    pub cluster: ClusterConfig,
    pub line: LineConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            sensor: SensorSize::DAVIS346,
            time_scale: TimeScale::default(),
            maintenance_interval_us: ms_to_us(10.0),
            hibernation_enabled: true,
            polarity_mode: PolarityMode::Split,
            promotion_path: PromotionPath::Ingest,
            filter: FilterConfig::default(),
            cluster: ClusterConfig::default(),
            line: LineConfig::default(),
        }
    }
}

/// Every key understood by [`TrackerConfig::set`], in dump order.
pub const KEYS: &[&str] = &[
    "engine.width_px",
    "engine.height_px",
    "engine.pixels_per_ms",
    "engine.maintenance_interval_ms",
    "engine.hibernation_enabled",
    "engine.polarity_mode",
    "engine.promotion_path",
    "filter.refractory_same_polarity_ms",
    "filter.refractory_opposite_polarity_ms",
    "filter.neighborhood_half_extent_px",
    "filter.neighborhood_age_ms",
    "filter.neighborhood_min_support",
    "filter.update_sae_on_suppress",
    "cluster.creation_num_events",
    "cluster.addition_threshold_px",
    "cluster.merge_angle_deg",
    "cluster.cleanup_event_age_ms",
    "cluster.deletion_no_events_ms",
    "cluster.min_midpoint_threshold_px",
    "cluster.chain_seed_max_age_ms",
    "cluster.chain_max_length",
    "line.promotion_threshold_px",
    "line.promotion_num_events",
    "line.promotion_compare",
    "line.initialization_length_px",
    "line.initialization_period_ms",
    "line.addition_threshold_px",
    "line.addition_extent",
    "line.merge_angle_deg",
    "line.merge_distance_px",
    "line.hibernation_density",
    "line.hibernation_hysteresis",
    "line.density_window_ms",
    "line.wake_rule",
    "line.cleanup_event_age_ms",
    "line.deletion_no_events_ms",
    "line.hibernation_timeout_ms",
    "line.min_active_length_px",
    "line.connected_bin_px",
    "line.length_model",
];

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_ms(key: &str, value: &str) -> Result<Micros> {
    let ms: f64 = parse(key, value)?;
    if !ms.is_finite() {
        return Err(Error::Config(format!("{key}: not finite")));
    }
    Ok(ms_to_us(ms))
}

fn us_to_ms(us: Micros) -> f64 {
    us as f64 / 1000.0
}

fn choice<V: Copy>(key: &str, value: &str, options: &[(&str, V)]) -> Result<V> {
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|&(_, v)| v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            Error::Config(format!("{key}: expected one of {}", names.join("|")))
        })
}

const POLARITY_MODES: &[(&str, PolarityMode)] =
    &[("split", PolarityMode::Split), ("merged", PolarityMode::Merged)];
const PROMOTION_PATHS: &[(&str, PromotionPath)] = &[
    ("ingest", PromotionPath::Ingest),
    ("maintenance", PromotionPath::Maintenance),
];
const PROMOTION_COMPARES: &[(&str, PromotionCompare)] = &[
    ("std_dev", PromotionCompare::StdDev),
    ("variance", PromotionCompare::Variance),
];
const ADDITION_EXTENTS: &[(&str, AdditionExtent)] = &[
    ("length", AdditionExtent::Length),
    ("half_length", AdditionExtent::HalfLength),
];
const WAKE_RULES: &[(&str, WakeRule)] = &[("density", WakeRule::Density), ("any_event", WakeRule::AnyEvent)];
const LENGTH_MODELS: &[(&str, LengthModel)] = &[
    ("variance", LengthModel::Variance),
    ("std_dev_sum", LengthModel::StdDevSum),
];

fn name_of<V: PartialEq>(options: &[(&'static str, V)], v: &V) -> &'static str {
    options
        .iter()
        .find(|(_, o)| o == v)
        .map(|(n, _)| *n)
        .expect("every variant is listed")
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.cluster.validate()?;
        self.line.validate()?;
        if self.sensor.width == 0 || self.sensor.height == 0 {
            return Err(Error::Config("sensor size must be non-zero".into()));
        }
        // maintenance must run at least as often as the shortest age threshold
        let shortest = self
            .cluster
            .deletion_no_events_us
            .min(self.cluster.cleanup_event_age_us)
            .min(self.line.cleanup_event_age_us)
            .min(self.line.density_window_us);
        if self.maintenance_interval_us <= 0 || self.maintenance_interval_us > shortest {
            return Err(Error::Config(format!(
                "engine.maintenance_interval_ms must be in (0, {}]",
                us_to_ms(shortest)
            )));
        }
        Ok(())
    }

    /// Sets one parameter from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "engine.width_px" => self.sensor.width = parse(key, v)?,
            "engine.height_px" => self.sensor.height = parse(key, v)?,
            "engine.pixels_per_ms" => self.time_scale = TimeScale::new(parse(key, v)?)?,
            "engine.maintenance_interval_ms" => self.maintenance_interval_us = parse_ms(key, v)?,
            "engine.hibernation_enabled" => self.hibernation_enabled = parse(key, v)?,
            "engine.polarity_mode" => self.polarity_mode = choice(key, v, POLARITY_MODES)?,
            "engine.promotion_path" => self.promotion_path = choice(key, v, PROMOTION_PATHS)?,
            "filter.refractory_same_polarity_ms" => self.filter.refractory_same_polarity_us = parse_ms(key, v)?,
            "filter.refractory_opposite_polarity_ms" => {
                self.filter.refractory_opposite_polarity_us = parse_ms(key, v)?
            }
            "filter.neighborhood_half_extent_px" => self.filter.neighborhood_half_extent = parse(key, v)?,
            "filter.neighborhood_age_ms" => self.filter.neighborhood_age_us = parse_ms(key, v)?,
            "filter.neighborhood_min_support" => self.filter.neighborhood_min_support = parse(key, v)?,
            "filter.update_sae_on_suppress" => self.filter.update_sae_on_suppress = parse(key, v)?,
            "cluster.creation_num_events" => self.cluster.creation_num_events = parse(key, v)?,
            "cluster.addition_threshold_px" => self.cluster.addition_threshold_px = parse(key, v)?,
            "cluster.merge_angle_deg" => self.cluster.merge_angle_deg = parse(key, v)?,
            "cluster.cleanup_event_age_ms" => self.cluster.cleanup_event_age_us = parse_ms(key, v)?,
            "cluster.deletion_no_events_ms" => self.cluster.deletion_no_events_us = parse_ms(key, v)?,
            "cluster.min_midpoint_threshold_px" => self.cluster.min_midpoint_threshold_px = parse(key, v)?,
            "cluster.chain_seed_max_age_ms" => self.cluster.chain_seed_max_age_us = parse_ms(key, v)?,
            "cluster.chain_max_length" => self.cluster.chain_max_length = parse(key, v)?,
            "line.promotion_threshold_px" => self.line.promotion_threshold_px = parse(key, v)?,
            "line.promotion_num_events" => self.line.promotion_num_events = parse(key, v)?,
            "line.promotion_compare" => self.line.promotion_compare = choice(key, v, PROMOTION_COMPARES)?,
            "line.initialization_length_px" => self.line.initialization_length_px = parse(key, v)?,
            "line.initialization_period_ms" => self.line.initialization_period_us = parse_ms(key, v)?,
            "line.addition_threshold_px" => self.line.addition_threshold_px = parse(key, v)?,
            "line.addition_extent" => self.line.addition_extent = choice(key, v, ADDITION_EXTENTS)?,
            "line.merge_angle_deg" => self.line.merge_angle_deg = parse(key, v)?,
            "line.merge_distance_px" => self.line.merge_distance_px = parse(key, v)?,
            "line.hibernation_density" => self.line.hibernation_density = parse(key, v)?,
            "line.hibernation_hysteresis" => self.line.hibernation_hysteresis = parse(key, v)?,
            "line.density_window_ms" => self.line.density_window_us = parse_ms(key, v)?,
            "line.wake_rule" => self.line.wake_rule = choice(key, v, WAKE_RULES)?,
            "line.cleanup_event_age_ms" => self.line.cleanup_event_age_us = parse_ms(key, v)?,
            "line.deletion_no_events_ms" => self.line.deletion_no_events_us = parse_ms(key, v)?,
            "line.hibernation_timeout_ms" => self.line.hibernation_timeout_us = parse_ms(key, v)?,
            "line.min_active_length_px" => self.line.min_active_length_px = parse(key, v)?,
            "line.connected_bin_px" => self.line.connected_bin_px = parse(key, v)?,
            "line.length_model" => self.line.length_model = choice(key, v, LENGTH_MODELS)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Current value of one parameter in the form accepted by [`Self::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        let s = match key {
            "engine.width_px" => self.sensor.width.to_string(),
            "engine.height_px" => self.sensor.height.to_string(),
            "engine.pixels_per_ms" => self.time_scale.pixels_per_ms().to_string(),
            "engine.maintenance_interval_ms" => us_to_ms(self.maintenance_interval_us).to_string(),
            "engine.hibernation_enabled" => self.hibernation_enabled.to_string(),
            "engine.polarity_mode" => name_of(POLARITY_MODES, &self.polarity_mode).into(),
            "engine.promotion_path" => name_of(PROMOTION_PATHS, &self.promotion_path).into(),
            "filter.refractory_same_polarity_ms" => us_to_ms(self.filter.refractory_same_polarity_us).to_string(),
            "filter.refractory_opposite_polarity_ms" => {
                us_to_ms(self.filter.refractory_opposite_polarity_us).to_string()
            }
            "filter.neighborhood_half_extent_px" => self.filter.neighborhood_half_extent.to_string(),
            "filter.neighborhood_age_ms" => us_to_ms(self.filter.neighborhood_age_us).to_string(),
            "filter.neighborhood_min_support" => self.filter.neighborhood_min_support.to_string(),
            "filter.update_sae_on_suppress" => self.filter.update_sae_on_suppress.to_string(),
            "cluster.creation_num_events" => self.cluster.creation_num_events.to_string(),
            "cluster.addition_threshold_px" => self.cluster.addition_threshold_px.to_string(),
            "cluster.merge_angle_deg" => self.cluster.merge_angle_deg.to_string(),
            "cluster.cleanup_event_age_ms" => us_to_ms(self.cluster.cleanup_event_age_us).to_string(),
            "cluster.deletion_no_events_ms" => us_to_ms(self.cluster.deletion_no_events_us).to_string(),
            "cluster.min_midpoint_threshold_px" => self.cluster.min_midpoint_threshold_px.to_string(),
            "cluster.chain_seed_max_age_ms" => us_to_ms(self.cluster.chain_seed_max_age_us).to_string(),
            "cluster.chain_max_length" => self.cluster.chain_max_length.to_string(),
            "line.promotion_threshold_px" => self.line.promotion_threshold_px.to_string(),
            "line.promotion_num_events" => self.line.promotion_num_events.to_string(),
            "line.promotion_compare" => name_of(PROMOTION_COMPARES, &self.line.promotion_compare).into(),
            "line.initialization_length_px" => self.line.initialization_length_px.to_string(),
            "line.initialization_period_ms" => us_to_ms(self.line.initialization_period_us).to_string(),
            "line.addition_threshold_px" => self.line.addition_threshold_px.to_string(),
            "line.addition_extent" => name_of(ADDITION_EXTENTS, &self.line.addition_extent).into(),
            "line.merge_angle_deg" => self.line.merge_angle_deg.to_string(),
            "line.merge_distance_px" => self.line.merge_distance_px.to_string(),
            "line.hibernation_density" => self.line.hibernation_density.to_string(),
            "line.hibernation_hysteresis" => self.line.hibernation_hysteresis.to_string(),
            "line.density_window_ms" => us_to_ms(self.line.density_window_us).to_string(),
            "line.wake_rule" => name_of(WAKE_RULES, &self.line.wake_rule).into(),
            "line.cleanup_event_age_ms" => us_to_ms(self.line.cleanup_event_age_us).to_string(),
            "line.deletion_no_events_ms" => us_to_ms(self.line.deletion_no_events_us).to_string(),
            "line.hibernation_timeout_ms" => us_to_ms(self.line.hibernation_timeout_us).to_string(),
            "line.min_active_length_px" => self.line.min_active_length_px.to_string(),
            "line.connected_bin_px" => self.line.connected_bin_px.to_string(),
            "line.length_model" => name_of(LENGTH_MODELS, &self.line.length_model).into(),
            _ => return None,
        };
        Some(s)
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        self.validate()
    }

    /// Defaults overridden by `text`.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Every parameter, one `key = value` line each, in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = self.get(key).expect("listed keys are known");
            writeln!(out, "{key} = {value}").expect("writing to a String");
        }
        out
    }
}
