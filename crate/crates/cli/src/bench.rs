//! Cost sweeps: per-stage timing against the number of live lines or
//! clusters, and end-to-end throughput.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use evline_core::engine::{linear_fit, Bucket, Instrumentation, LinearFit, Stage};
use evline_core::{Event, Tracker64, TrackerConfig};
use evline_synth::{generate, presets, SceneSpec};

/// Buckets with fewer samples are left out of fits.
pub const MIN_BUCKET_SAMPLES: u64 = 1000;
/// Chain creation only runs for events nothing else took, so its buckets
/// are thin.
pub const MIN_CREATION_BUCKET_SAMPLES: u64 = 200;
/// Per-run bucket size needed before points use the median over runs.
pub const MIN_RUN_BUCKET_SAMPLES: u64 = 200;

pub fn min_samples(stage: Stage) -> u64 {
    match stage {
        Stage::ClusterCreation => MIN_CREATION_BUCKET_SAMPLES,
        _ => MIN_BUCKET_SAMPLES,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Static parallel lines, hibernation off so none goes idle.
    Lines,
    /// Static short segments, promotion off so clusters never become lines.
    Clusters,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Lines => "lines",
            SweepKind::Clusters => "clusters",
        }
    }

    /// Stage whose cost should grow with the swept count.
    pub fn scaling_stage(self) -> Stage {
        match self {
            SweepKind::Lines => Stage::LineAddition,
            SweepKind::Clusters => Stage::ClusterAddition,
        }
    }

    pub fn config(self) -> TrackerConfig {
        let mut cfg = TrackerConfig::default();
        match self {
            SweepKind::Lines => cfg.hibernation_enabled = false,
            SweepKind::Clusters => cfg.line.promotion_num_events = usize::MAX,
        }
        cfg
    }

    /// Segments emit far fewer events than long lines, so they get longer.
    pub fn default_stagger_ms(self) -> f64 {
        match self {
            SweepKind::Lines => 300.0,
            SweepKind::Clusters => 1000.0,
        }
    }

    /// `n` entities appearing one every `stagger_ms`, the last one held for
    /// `stagger_ms` as well.
    pub fn scene(self, n: usize, stagger_ms: f64) -> SceneSpec {
        let duration = n as f64 * stagger_ms;
        match self {
            SweepKind::Lines => presets::parallel_lines(n, stagger_ms, duration),
            SweepKind::Clusters => presets::short_segments(n, stagger_ms, duration),
        }
    }

    fn buckets(self, timing: &Instrumentation, stage: Stage) -> &[Bucket] {
        let s = timing.stage(stage);
        match self {
            SweepKind::Lines => &s.by_lines,
            SweepKind::Clusters => &s.by_clusters,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub seed: u64,
    pub events: usize,
    pub elapsed: Duration,
    pub timing: Instrumentation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub kind: SweepKind,
    /// Entities in the scene; fits cover live counts `1..=n`.
    pub n: usize,
    pub runs: Vec<SweepRun>,
    pub timing: Instrumentation,
}

impl Sweep {
    /// Bucket mean of `stage` at `count` in `timing`, rescaled for clock
    /// drift.
    ///
    /// The machine drifts between speeds for stretches longer than one count
    /// lasts, shifting every stage alike. The filter does fixed work per
    /// event, so other stages are rescaled by the filter cost in the same
    /// bucket relative to the sweep's mean filter cost. The filter itself is
    /// left as measured.
    fn rescaled(&self, timing: &Instrumentation, stage: Stage, count: usize) -> Option<f64> {
        let mean = self.kind.buckets(timing, stage).get(count)?.mean_ns()?;
        if stage == Stage::Filter {
            return Some(mean);
        }
        let reference = self.timing.stage(Stage::Filter).mean_ns()?;
        let filter = self.kind.buckets(timing, Stage::Filter).get(count)?.mean_ns()?;
        Some(mean * reference / filter)
    }

    /// Cost of `stage` in one run at `count`, if that run's bucket holds at
    /// least [`MIN_RUN_BUCKET_SAMPLES`].
    pub fn run_cost(&self, run: &SweepRun, stage: Stage, count: usize) -> Option<f64> {
        let b = self.kind.buckets(&run.timing, stage).get(count)?;
        if b.samples < MIN_RUN_BUCKET_SAMPLES {
            return None;
        }
        self.rescaled(&run.timing, stage, count)
    }

    /// Cost of `stage` at `count` live entities: the median over runs of
    /// [`Sweep::run_cost`] when every run has it, otherwise the rescaled
    /// pooled bucket. `None` if the pooled bucket is thin.
    pub fn cost_at(&self, stage: Stage, count: usize) -> Option<f64> {
        let pooled = self.kind.buckets(&self.timing, stage).get(count)?;
        if pooled.samples < min_samples(stage) {
            return None;
        }
        let mut means: Vec<f64> = self.runs.iter().map_while(|r| self.run_cost(r, stage, count)).collect();
        if means.len() < self.runs.len().max(3) {
            return self.rescaled(&self.timing, stage, count);
        }
        means.sort_by(f64::total_cmp);
        let mid = means.len() / 2;
        Some(if means.len() % 2 == 1 {
            means[mid]
        } else {
            0.5 * (means[mid - 1] + means[mid])
        })
    }

    /// One fit per run over its well-populated buckets. Their spread
    /// measures run-to-run noise.
    pub fn run_fits(&self, stage: Stage) -> Vec<LinearFit> {
        self.runs
            .iter()
            .filter_map(|r| {
                let pts: Vec<(f64, f64)> = (1..=self.n)
                    .filter_map(|n| self.run_cost(r, stage, n).map(|c| (n as f64, c)))
                    .collect();
                linear_fit(&pts)
            })
            .collect()
    }

    /// `(count, cost)` for every count in `1..=n` with a populated bucket.
    pub fn points(&self, stage: Stage) -> Vec<(f64, f64)> {
        (1..=self.n)
            .filter_map(|n| self.cost_at(stage, n).map(|c| (n as f64, c)))
            .collect()
    }

    pub fn fit(&self, stage: Stage) -> Option<LinearFit> {
        linear_fit(&self.points(stage))
    }

    /// One row per stage: mean cost, then the fit against the swept count.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "sweep over 1..={} {}: {} runs, {} events",
            self.n,
            self.kind.name(),
            self.runs.len(),
            self.runs.iter().map(|r| r.events).sum::<usize>()
        );
        let _ = writeln!(
            s,
            "{:<18} {:>10} {:>12} {:>12} {:>12} {:>8}",
            "stage", "samples", "mean_ns", "slope_ns", "intercept", "r2"
        );
        for stage in Stage::ALL {
            let t = self.timing.stage(stage);
            let mean = t.mean_ns().map_or("-".into(), |m| format!("{m:.1}"));
            let (slope, icpt, r2) = match self.fit(stage) {
                Some(f) => (
                    format!("{:.2}", f.slope),
                    format!("{:.1}", f.intercept),
                    format!("{:.3}", f.r2),
                ),
                None => ("-".into(), "-".into(), "-".into()),
            };
            let _ = writeln!(
                s,
                "{:<18} {:>10} {:>12} {:>12} {:>12} {:>8}",
                stage.name(),
                t.samples,
                mean,
                slope,
                icpt,
                r2
            );
        }
        let _ = writeln!(
            s,
            "{:<10} {:>18} {:>18} {:>18}",
            self.kind.name(),
            self.kind.scaling_stage().name(),
            "filter",
            "cluster_creation"
        );
        let cell = |stage: Stage, n: usize| self.cost_at(stage, n).map_or("-".to_string(), |m| format!("{m:.1}"));
        for n in 1..=self.n {
            let _ = writeln!(
                s,
                "{:<10} {:>18} {:>18} {:>18}",
                n,
                cell(self.kind.scaling_stage(), n),
                cell(Stage::Filter, n),
                cell(Stage::ClusterCreation, n)
            );
        }
        s
    }
}

    /// Fitted change of a stage's cost across the swept range, relative to
/// its mean cost.
pub fn relative_change(pts: &[(f64, f64)]) -> Option<f64> {
    let fit = linear_fit(pts)?;
    let lo = pts.first()?.0;
    let hi = pts.last()?.0;
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    Some((fit.slope * (hi - lo)).abs() / mean)
}

/// Runs the staggered scene `repeats` times with different seeds, timing
/// every stage by the number of live entities.
pub fn sweep(kind: SweepKind, n: usize, stagger_ms: f64, repeats: usize, seed: u64) -> Sweep {
    let scene = kind.scene(n, stagger_ms);
    let mut timing = Instrumentation::default();
    let mut runs = Vec::new();
    for rep in 0..repeats.max(1) as u64 {
        let seed = seed.wrapping_add(rep);
        let events = generate(&scene, seed).events;
        let mut tracker = Tracker64::new(kind.config()).expect("sweep config is valid");
        tracker.enable_instrumentation();
        let start = Instant::now();
        tracker.process_all(&events);
        let elapsed = start.elapsed();
        let run_timing = tracker.instrumentation().cloned().unwrap_or_default();
        timing.merge(&run_timing);
        runs.push(SweepRun {
            seed,
            events: events.len(),
            elapsed,
            timing: run_timing,
        });
    }
    Sweep {
        kind,
        n,
        runs,
        timing,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throughput {
    pub events: usize,
    pub elapsed: Duration,
}

impl Throughput {
    pub fn ns_per_event(&self) -> f64 {
        self.elapsed.as_nanos() as f64 / self.events.max(1) as f64
    }

    pub fn events_per_s(&self) -> f64 {
        self.events as f64 / self.elapsed.as_secs_f64().max(f64::MIN_POSITIVE)
    }
}

/// Wall time to process in-memory events, maintenance on its own thread
/// when `background`.
pub fn throughput(cfg: TrackerConfig, events: &[Event], background: bool) -> Throughput {
    let mut tracker = if background {
        Tracker64::with_background_maintenance(cfg)
    } else {
        Tracker64::new(cfg)
    }
    .expect("valid config");
    let start = Instant::now();
    tracker.process_all(events);
    let elapsed = start.elapsed();
    Throughput {
        events: events.len(),
        elapsed,
    }
}
