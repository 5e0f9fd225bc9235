//! Per-stage timing, bucketed by how many lines and clusters existed when
//! the event was processed.

use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Filter,
    LineAddition,
    ClusterAddition,
    ClusterCreation,
}

impl Stage {
    pub const ALL: [Stage; 4] = [
        Stage::Filter,
        Stage::LineAddition,
        Stage::ClusterAddition,
        Stage::ClusterCreation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Filter => "filter",
            Stage::LineAddition => "line_addition",
            Stage::ClusterAddition => "cluster_addition",
            Stage::ClusterCreation => "cluster_creation",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Bucket {
    pub samples: u64,
    pub total_ns: u64,
}

impl Bucket {
    pub fn mean_ns(&self) -> Option<f64> {
        (self.samples > 0).then(|| self.total_ns as f64 / self.samples as f64)
    }
}

/// Samples longer than this are taken to include a preemption and are
/// counted in [`StageTiming::discarded`] instead of the buckets.
pub const PREEMPTION_NS: u64 = 50_000;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageTiming {
    pub samples: u64,
    pub discarded: u64,
    pub total_ns: u64,
    /// Index: number of lines.
    pub by_lines: Vec<Bucket>,
    /// Index: number of clusters.
    pub by_clusters: Vec<Bucket>,
}

fn bump(buckets: &mut Vec<Bucket>, i: usize, ns: u64) {
    if buckets.len() <= i {
        buckets.resize(i + 1, Bucket::default());
    }
    buckets[i].samples += 1;
    buckets[i].total_ns += ns;
}

impl StageTiming {
    fn record(&mut self, ns: u64, n_lines: usize, n_clusters: usize) {
        if ns > PREEMPTION_NS {
            self.discarded += 1;
            return;
        }
        self.samples += 1;
        self.total_ns += ns;
        bump(&mut self.by_lines, n_lines, ns);
        bump(&mut self.by_clusters, n_clusters, ns);
    }

    pub fn mean_ns(&self) -> Option<f64> {
        (self.samples > 0).then(|| self.total_ns as f64 / self.samples as f64)
    }

    /// `(count, mean ns)` for buckets with at least `min_samples` samples.
    pub fn means(buckets: &[Bucket], min_samples: u64) -> Vec<(f64, f64)> {
        buckets
            .iter()
            .enumerate()
            .filter(|(_, b)| b.samples >= min_samples.max(1))
            .map(|(i, b)| (i as f64, b.total_ns as f64 / b.samples as f64))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Instrumentation {
    pub stages: [StageTiming; 4],
}

impl Instrumentation {
    pub fn record(&mut self, stage: Stage, elapsed: Duration, n_lines: usize, n_clusters: usize) {
        let ns = u64::try_from(elapsed.as_nanos()).unwrap_or(u64::MAX);
        self.stages[stage.index()].record(ns, n_lines, n_clusters);
    }

    pub fn stage(&self, stage: Stage) -> &StageTiming {
        &self.stages[stage.index()]
    }

    /// Adds another run's samples, bucket by bucket.
    pub fn merge(&mut self, other: &Instrumentation) {
        for (mine, theirs) in self.stages.iter_mut().zip(&other.stages) {
            mine.samples += theirs.samples;
            mine.discarded += theirs.discarded;
            mine.total_ns += theirs.total_ns;
            merge_buckets(&mut mine.by_lines, &theirs.by_lines);
            merge_buckets(&mut mine.by_clusters, &theirs.by_clusters);
        }
    }
}

fn merge_buckets(into: &mut Vec<Bucket>, from: &[Bucket]) {
    if into.len() < from.len() {
        into.resize(from.len(), Bucket::default());
    }
    for (a, b) in into.iter_mut().zip(from) {
        a.samples += b.samples;
        a.total_ns += b.total_ns;
    }
}

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 when `y` is constant and fitted exactly.
    pub r2: f64,
    /// Standard error of the slope; infinite with two points.
    pub slope_stderr: f64,
}

pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    let slope_stderr = if points.len() > 2 {
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Some(LinearFit {
        slope,
        intercept,
        r2,
        slope_stderr,
    })
}
