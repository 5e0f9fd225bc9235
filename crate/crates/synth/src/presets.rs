//! Ready-made scenes for experiments and acceptance runs.

use evline_core::{ms_to_us, Micros};

use crate::scene::{Keyframe, Motion, SceneSpec, TrackSpec};

const WIDTH: u16 = 346;
const HEIGHT: u16 = 260;

fn key(t_ms: f64, a: [f64; 2], b: [f64; 2]) -> Keyframe {
    Keyframe {
        t_us: ms_to_us(t_ms),
        a,
        b,
    }
}

/// Layout of the oscillating reversal scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Oscillation {
    pub x_left: f64,
    pub x_right: f64,
    pub y_top: f64,
    pub y_bottom: f64,
    pub speed_px_ms: f64,
    pub sweeps: usize,
    pub dwell_ms: f64,
    pub rate_per_px_ms: f64,
    pub noise_rate_per_ms: f64,
}

impl Default for Oscillation {
    fn default() -> Self {
        Self {
            x_left: 52.0,
            x_right: 292.0,
            y_top: 55.0,
            y_bottom: 205.0,
            speed_px_ms: 0.15,
            sweeps: 7,
            dwell_ms: 120.0,
            rate_per_px_ms: 1.0,
            noise_rate_per_ms: 0.5,
        }
    }
}

/// A motion stop before a reversal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reversal {
    /// Motion stops here ...
    pub stop_us: Micros,
    /// ... and resumes in the opposite direction here.
    pub resume_us: Micros,
    pub x: f64,
    /// +1 when the line was moving towards larger x before the stop.
    pub direction: f64,
}

impl Oscillation {
    fn sweep_ms(&self) -> f64 {
        (self.x_right - self.x_left) / self.speed_px_ms
    }

    pub fn reversals(&self) -> Vec<Reversal> {
        let sweep = self.sweep_ms();
        (0..self.sweeps.saturating_sub(1))
            .map(|i| {
                let stop = (i + 1) as f64 * sweep + i as f64 * self.dwell_ms;
                let rightwards = i % 2 == 0;
                Reversal {
                    stop_us: ms_to_us(stop),
                    resume_us: ms_to_us(stop + self.dwell_ms),
                    x: if rightwards { self.x_right } else { self.x_left },
                    direction: if rightwards { 1.0 } else { -1.0 },
                }
            })
            .collect()
    }

    /// A vertical line sweeping left and right, silent while it dwells at
    /// each end.
    pub fn scene(&self) -> SceneSpec {
        let sweep = self.sweep_ms();
        let at = |x: f64| ([x, self.y_top], [x, self.y_bottom]);
        let mut keys = Vec::new();
        let mut t = 0.0;
        let (a, b) = at(self.x_left);
        keys.push(key(t, a, b));
        for i in 0..self.sweeps {
            let x = if i % 2 == 0 { self.x_right } else { self.x_left };
            let (a, b) = at(x);
            t += sweep;
            keys.push(key(t, a, b));
            if i + 1 < self.sweeps {
                t += self.dwell_ms;
                keys.push(key(t, a, b));
            }
        }
        let mut scene = SceneSpec::new(WIDTH, HEIGHT, ms_to_us(t));
        scene.noise_rate_per_ms = self.noise_rate_per_ms;
        let mut track = TrackSpec::new(Motion::Keyframes(keys));
        track.rate_per_px_ms = self.rate_per_px_ms;
        track.emit_when_static = false;
        scene.tracks.push(track);
        scene
    }
}

/// A vertical line translating at constant speed.
pub fn translating(speed_px_ms: f64, duration_ms: f64, length_px: f64, rate_per_px_ms: f64) -> SceneSpec {
    let x0 = 40.0;
    let x1 = x0 + speed_px_ms * duration_ms;
    let y0 = (HEIGHT as f64 - length_px) / 2.0;
    let y1 = y0 + length_px;
    let mut scene = SceneSpec::new(WIDTH, HEIGHT, ms_to_us(duration_ms));
    scene.noise_rate_per_ms = 0.5;
    let mut track = TrackSpec::new(Motion::Keyframes(vec![
        key(0.0, [x0, y0], [x0, y1]),
        key(duration_ms, [x1, y0], [x1, y1]),
    ]));
    track.rate_per_px_ms = rate_per_px_ms;
    scene.tracks.push(track);
    scene
}

/// Per-pixel rate that maximizes the events surviving refractory
/// suppression on a pixel that fires continuously.
pub const STATIC_RATE_PER_PX_MS: f64 = 0.25;

fn static_track(a: [f64; 2], b: [f64; 2], start_ms: f64, end_ms: f64) -> TrackSpec {
    let mut t = TrackSpec::new(Motion::Keyframes(vec![key(start_ms, a, b), key(end_ms, a, b)]));
    t.rate_per_px_ms = STATIC_RATE_PER_PX_MS;
    t
}

/// `n` static horizontal lines, 260 px long and 22 px apart. Line `i`
/// appears at `i * stagger_ms` and all last until `duration_ms`.
pub fn parallel_lines(n: usize, stagger_ms: f64, duration_ms: f64) -> SceneSpec {
    let mut scene = SceneSpec::new(WIDTH, HEIGHT, ms_to_us(duration_ms));
    for i in 0..n {
        let y = 20.0 + 22.0 * i as f64;
        let start = (i as f64 * stagger_ms).min(duration_ms);
        scene.tracks.push(static_track([40.0, y], [300.0, y], start, duration_ms));
    }
    scene
}

/// `n` static 16 px segments on a 4-column grid, appearing one every
/// `stagger_ms`.
pub fn short_segments(n: usize, stagger_ms: f64, duration_ms: f64) -> SceneSpec {
    let mut scene = SceneSpec::new(WIDTH, HEIGHT, ms_to_us(duration_ms));
    for i in 0..n {
        let x = 40.0 + 70.0 * (i % 4) as f64;
        let y = 40.0 + 60.0 * (i / 4) as f64;
        let start = (i as f64 * stagger_ms).min(duration_ms);
        scene.tracks.push(static_track([x, y], [x + 16.0, y], start, duration_ms));
    }
    scene
}

/// Low enough that a 10 px segment gathers fewer events within the cluster
/// age limit than promotion needs, so it stays a cluster.
pub const CLUSTER_RATE_PER_PX_MS: f64 = 0.05;

/// Three long oscillating lines plus four sparse static segments that remain
/// clusters.
pub fn steady_mix(duration_ms: f64) -> SceneSpec {
    let mut scene = SceneSpec::new(WIDTH, HEIGHT, ms_to_us(duration_ms));
    scene.noise_rate_per_ms = 1.0;
    let end = ms_to_us(duration_ms);
    // peak speeds near 0.3 px/ms keep the slow phase at each turnaround
    // shorter than the time a hibernated line can still be found again
    let lines = [
        ([70.0, 20.0], [70.0, 120.0], [40.0, 0.0], 800.0, 0.0),
        ([170.0, 20.0], [250.0, 110.0], [40.0, 0.0], 850.0, 60.0),
        ([40.0, 150.0], [200.0, 250.0], [40.0, 0.0], 900.0, 140.0),
    ];
    for (a, b, offset, period_ms, phase_deg) in lines {
        scene.tracks.push(TrackSpec::new(Motion::Sinusoid {
            a,
            b,
            offset,
            period_us: ms_to_us(period_ms),
            phase_rad: f64::to_radians(phase_deg),
            start_us: 0,
            end_us: end,
        }));
    }
    for (x, y) in [(280.0, 150.0), (320.0, 190.0), (270.0, 230.0), (230.0, 140.0)] {
        let mut t = static_track([x, y], [x + 10.0, y], 0.0, duration_ms);
        t.rate_per_px_ms = CLUSTER_RATE_PER_PX_MS;
        scene.tracks.push(t);
    }
    scene
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillation_layout() {
        let o = Oscillation::default();
        let s = o.scene();
        s.validate().unwrap();
        let rev = o.reversals();
        assert_eq!(rev.len(), 6);
        // 7 sweeps of 1600 ms and 6 dwells of 120 ms
        assert_eq!(s.duration_us, ms_to_us(7.0 * 1600.0 + 6.0 * 120.0));
        let m = &s.tracks[0].motion;
        for r in &rev {
            let at_stop = m.state_at(r.stop_us as f64).unwrap();
            assert!((at_stop.a[0] - r.x).abs() < 1e-9);
            let mid = m.state_at((r.stop_us + r.resume_us) as f64 / 2.0).unwrap();
            assert_eq!(mid.va, [0.0, 0.0]);
        }
    }

    #[test]
    fn presets_are_valid_and_inside_the_sensor() {
        for s in [
            translating(0.05, 5000.0, 120.0, 1.0),
            parallel_lines(10, 20.0, 500.0),
            short_segments(12, 20.0, 500.0),
            steady_mix(1000.0),
        ] {
            s.validate().unwrap();
            for t in &s.tracks {
                let (a, b) = t.motion.span();
                for i in 0..=20 {
                    let st = t.motion.state_at(a as f64 + (b - a) as f64 * i as f64 / 20.0).unwrap();
                    for p in [st.a, st.b] {
                        assert!(p[0] >= 0.0 && p[0] < WIDTH as f64 && p[1] >= 0.0 && p[1] < HEIGHT as f64, "{p:?}");
                    }
                }
            }
        }
    }
}
