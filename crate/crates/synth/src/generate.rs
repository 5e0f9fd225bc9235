//! Poisson event sampling along the scene's segments.

use evline_core::{Event, Micros, Polarity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::scene::{SceneSpec, SegmentState, TrackSpec};
use crate::truth::{GroundTruth, TruthSample};

/// Interval between ground-truth geometry samples.
pub const TRUTH_INTERVAL_US: Micros = 1000;

/// Speeds below this (px/µs) count as at rest.
const REST_SPEED: f64 = 1e-9;

/// Events sorted by time, with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub events: Vec<Event>,
    pub truth: GroundTruth,
}

struct Sample {
    t: Micros,
    event: Event,
    label: Option<u32>,
}

/// Unit normal of the segment, oriented along the motion at parameter `u`,
/// and whether the segment moves there.
fn motion_normal(st: &SegmentState, u: f64) -> ([f64; 2], bool) {
    let d = [st.b[0] - st.a[0], st.b[1] - st.a[1]];
    let len = d[0].hypot(d[1]);
    let n = if len > 0.0 { [-d[1] / len, d[0] / len] } else { [1.0, 0.0] };
    let v = [
        st.va[0] + u * (st.vb[0] - st.va[0]),
        st.va[1] + u * (st.vb[1] - st.va[1]),
    ];
    let vn = n[0] * v[0] + n[1] * v[1];
    if vn.abs() < REST_SPEED {
        (n, false)
    } else if vn > 0.0 {
        (n, true)
    } else {
        ([-n[0], -n[1]], true)
    }
}

fn sample_track(
    idx: u32,
    track: &TrackSpec,
    scene: &SceneSpec,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<Sample>,
) {
    let rate_max_per_us = track.rate_per_px_ms * track.motion.max_length() / 1000.0;
    if !(rate_max_per_us > 0.0) {
        return;
    }
    let (start, end) = track.motion.span();
    let end = end.min(scene.duration_us);
    let gaps = Exp::new(rate_max_per_us).expect("positive rate");
    let jitter = (track.jitter_px > 0.0).then(|| Normal::new(0.0, track.jitter_px).expect("finite"));
    let mut t = start as f64;
    loop {
        t += gaps.sample(rng);
        if t >= end as f64 {
            break;
        }
        let Some(st) = track.motion.state_at(t) else { continue };
        let u: f64 = rng.random();
        let (n, moving) = motion_normal(&st, u);
        let accept_p = if moving || track.emit_when_static {
            track.rate_per_px_ms * st.length() / 1000.0 / rate_max_per_us
        } else {
            0.0
        };
        let accept: f64 = rng.random();
        let (polarity, offset) = if moving {
            if rng.random_bool(0.5) {
                (Polarity::On, track.edge_offset_px)
            } else {
                (Polarity::Off, -track.edge_offset_px)
            }
        } else {
            (Polarity::from_bit(rng.random_range(0..2)).expect("0 or 1"), 0.0)
        };
        let noise = jitter.map_or(0.0, |j| j.sample(rng));
        if accept >= accept_p {
            continue;
        }
        let k = offset + noise;
        let x = st.a[0] + u * (st.b[0] - st.a[0]) + k * n[0];
        let y = st.a[1] + u * (st.b[1] - st.a[1]) + k * n[1];
        let (xr, yr) = (x.round(), y.round());
        if xr < 0.0 || yr < 0.0 || xr >= scene.width as f64 || yr >= scene.height as f64 {
            continue;
        }
        let ti = t.floor() as Micros;
        out.push(Sample {
            t: ti,
            event: Event::new(xr as u16, yr as u16, ti, polarity),
            label: Some(idx),
        });
    }
}

fn sample_noise(scene: &SceneSpec, rng: &mut ChaCha8Rng, out: &mut Vec<Sample>) {
    if !(scene.noise_rate_per_ms > 0.0) {
        return;
    }
    let gaps = Exp::new(scene.noise_rate_per_ms / 1000.0).expect("positive rate");
    let mut t = 0.0;
    loop {
        t += gaps.sample(rng);
        if t >= scene.duration_us as f64 {
            break;
        }
        let x = rng.random_range(0..scene.width);
        let y = rng.random_range(0..scene.height);
        let p = Polarity::from_bit(rng.random_range(0..2)).expect("0 or 1");
        let ti = t.floor() as Micros;
        out.push(Sample {
            t: ti,
            event: Event::new(x, y, ti, p),
            label: None,
        });
    }
}

/// Samples the scene. The same scene and seed always give the same output.
pub fn generate(scene: &SceneSpec, seed: u64) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for (i, track) in scene.tracks.iter().enumerate() {
        sample_track(i as u32, track, scene, &mut rng, &mut samples);
    }
    sample_noise(scene, &mut rng, &mut samples);
    samples.sort_by_key(|s| s.t);

    let labels = samples.iter().map(|s| s.label).collect();
    let events = samples.into_iter().map(|s| s.event).collect();
    Generated {
        events,
        truth: GroundTruth {
            interval_us: TRUTH_INTERVAL_US,
            duration_us: scene.duration_us,
            tracks: truth_samples(scene),
            labels,
        },
    }
}

/// Geometry of every track at every truth sample time.
pub fn truth_samples(scene: &SceneSpec) -> Vec<Vec<Option<TruthSample>>> {
    let n = (scene.duration_us / TRUTH_INTERVAL_US + 1).max(0) as usize;
    scene
        .tracks
        .iter()
        .map(|track| {
            (0..n)
                .map(|i| {
                    let t = (i as Micros * TRUTH_INTERVAL_US) as f64;
                    track.motion.state_at(t).map(|st| TruthSample {
                        midpoint: st.midpoint(),
                        angle_deg: st.angle_deg(),
                        length: st.length(),
                    })
                })
                .collect()
        })
        .collect()
}
