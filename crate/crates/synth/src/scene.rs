//! Scene description: sensor, duration, background noise and moving line
//! segments.

use std::f64::consts::PI;

use evline_core::{ms_to_us, Micros};

use crate::error::SceneError;

/// Segment endpoints at a keyframe; linear interpolation in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keyframe {
    pub t_us: Micros,
    pub a: [f64; 2],
    pub b: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    /// Piecewise-linear; the track exists from the first to the last key.
    Keyframes(Vec<Keyframe>),
    /// Segment `a`-`b` translated by `offset * sin(2 pi t / period + phase)`.
    Sinusoid {
        a: [f64; 2],
        b: [f64; 2],
        offset: [f64; 2],
        period_us: Micros,
        phase_rad: f64,
        start_us: Micros,
        end_us: Micros,
    },
}

/// A segment's endpoints and their velocities (px per µs) at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentState {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub va: [f64; 2],
    pub vb: [f64; 2],
}

impl SegmentState {
    pub fn length(&self) -> f64 {
        (self.b[0] - self.a[0]).hypot(self.b[1] - self.a[1])
    }

    pub fn midpoint(&self) -> [f64; 2] {
        [(self.a[0] + self.b[0]) / 2.0, (self.a[1] + self.b[1]) / 2.0]
    }

    /// Undirected angle in degrees, `[0, 180)`.
    pub fn angle_deg(&self) -> f64 {
        let mut a = (self.b[1] - self.a[1]).atan2(self.b[0] - self.a[0]).to_degrees();
        if a < 0.0 {
            a += 180.0;
        }
        if a >= 180.0 {
            a -= 180.0;
        }
        a
    }
}

fn lerp(a: [f64; 2], b: [f64; 2], s: f64) -> [f64; 2] {
    [a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s]
}

impl Motion {
    pub fn span(&self) -> (Micros, Micros) {
        match self {
            Motion::Keyframes(k) => (
                k.first().map_or(0, |f| f.t_us),
                k.last().map_or(0, |f| f.t_us),
            ),
            Motion::Sinusoid { start_us, end_us, .. } => (*start_us, *end_us),
        }
    }

    /// Geometry at `t` (µs), `None` outside the track's span.
    pub fn state_at(&self, t: f64) -> Option<SegmentState> {
        let (s, e) = self.span();
        if t < s as f64 || t > e as f64 {
            return None;
        }
        match self {
            Motion::Keyframes(keys) => {
                if keys.len() == 1 {
                    let k = keys[0];
                    return Some(SegmentState {
                        a: k.a,
                        b: k.b,
                        va: [0.0; 2],
                        vb: [0.0; 2],
                    });
                }
                let i = keys
                    .partition_point(|k| (k.t_us as f64) <= t)
                    .clamp(1, keys.len() - 1);
                let (k0, k1) = (keys[i - 1], keys[i]);
                let dt = (k1.t_us - k0.t_us) as f64;
                let s = ((t - k0.t_us as f64) / dt).clamp(0.0, 1.0);
                let vel = |p0: [f64; 2], p1: [f64; 2]| [(p1[0] - p0[0]) / dt, (p1[1] - p0[1]) / dt];
                Some(SegmentState {
                    a: lerp(k0.a, k1.a, s),
                    b: lerp(k0.b, k1.b, s),
                    va: vel(k0.a, k1.a),
                    vb: vel(k0.b, k1.b),
                })
            }
            Motion::Sinusoid {
                a,
                b,
                offset,
                period_us,
                phase_rad,
                ..
            } => {
                let w = 2.0 * PI / *period_us as f64;
                let arg = w * t + phase_rad;
                let (sin, cos) = arg.sin_cos();
                let d = [offset[0] * sin, offset[1] * sin];
                let v = [offset[0] * w * cos, offset[1] * w * cos];
                Some(SegmentState {
                    a: [a[0] + d[0], a[1] + d[1]],
                    b: [b[0] + d[0], b[1] + d[1]],
                    va: v,
                    vb: v,
                })
            }
        }
    }

    /// Upper bound of the segment length over the span.
    pub fn max_length(&self) -> f64 {
        match self {
            Motion::Keyframes(keys) => keys
                .iter()
                .map(|k| (k.b[0] - k.a[0]).hypot(k.b[1] - k.a[1]))
                .fold(0.0, f64::max),
            Motion::Sinusoid { a, b, .. } => (b[0] - a[0]).hypot(b[1] - a[1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackSpec {
    pub motion: Motion,
    /// Events per pixel of segment length per millisecond.
    pub rate_per_px_ms: f64,
    /// Distance of the ON (leading) and OFF (trailing) edges from the segment
    /// while it moves.
    pub edge_offset_px: f64,
    /// Standard deviation of the perpendicular position noise.
    pub jitter_px: f64,
    /// Whether a segment at rest emits events.
    pub emit_when_static: bool,
}

impl TrackSpec {
    pub fn new(motion: Motion) -> Self {
        Self {
            motion,
            rate_per_px_ms: 1.0,
            edge_offset_px: 0.5,
            jitter_px: 0.0,
            emit_when_static: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: u16,
    pub height: u16,
    pub duration_us: Micros,
    /// Uniform background events per millisecond over the whole sensor.
    pub noise_rate_per_ms: f64,
    pub tracks: Vec<TrackSpec>,
}

impl SceneSpec {
    pub fn new(width: u16, height: u16, duration_us: Micros) -> Self {
        Self {
            width,
            height,
            duration_us,
            noise_rate_per_ms: 0.0,
            tracks: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |msg: String| Err(SceneError::Invalid(msg));
        if self.width == 0 || self.height == 0 {
            return bad("sensor size must be non-zero".into());
        }
        if self.duration_us < 0 {
            return bad("duration must be non-negative".into());
        }
        if !(self.noise_rate_per_ms >= 0.0) {
            return bad("noise rate must be >= 0".into());
        }
        for (i, t) in self.tracks.iter().enumerate() {
            if !(t.rate_per_px_ms >= 0.0) || !(t.jitter_px >= 0.0) || !t.edge_offset_px.is_finite() {
                return bad(format!("track {i}: rates and jitter must be >= 0"));
            }
            match &t.motion {
                Motion::Keyframes(k) => {
                    if k.is_empty() {
                        return bad(format!("track {i}: no keyframes"));
                    }
                    if k.windows(2).any(|w| w[1].t_us <= w[0].t_us) {
                        return bad(format!("track {i}: keyframe times must increase"));
                    }
                }
                Motion::Sinusoid {
                    period_us,
                    start_us,
                    end_us,
                    ..
                } => {
                    if *period_us <= 0 || end_us < start_us {
                        return bad(format!("track {i}: bad sinusoid timing"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Parses the `key = value` scene format:
    ///
    /// ```text
    /// width = 346
    /// height = 260
    /// duration_ms = 2000
    /// noise_rate_per_ms = 0.5
    ///
    /// [track]
    /// rate_per_px_ms = 1
    /// key = 0 50 55 50 205        # t_ms x0 y0 x1 y1
    /// key = 1000 200 55 200 205
    ///
    /// [track]
    /// sinusoid = 100 40 250 40 0 30 800 0   # x0 y0 x1 y1 dx dy period_ms phase_deg
    /// ```
    pub fn parse(text: &str) -> Result<Self, SceneError> {
        let mut scene = SceneSpec::new(346, 260, 0);
        let mut duration_set = false;
        let mut current: Option<(TrackDraft, usize)> = None;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| SceneError::Parse { line: lineno, msg };
            if line == "[track]" {
                if let Some((draft, at)) = current.take() {
                    scene.tracks.push(draft.finish(at)?);
                }
                current = Some((TrackDraft::default(), lineno));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err("expected key = value or [track]".into()))?;
            let num = |v: &str| v.parse::<f64>().map_err(|_| err(format!("{key}: bad number {v:?}")));
            match &mut current {
                None => match key {
                    "width" => scene.width = value.parse().map_err(|_| err("bad width".into()))?,
                    "height" => scene.height = value.parse().map_err(|_| err("bad height".into()))?,
                    "duration_ms" => {
                        scene.duration_us = ms_to_us(num(value)?);
                        duration_set = true;
                    }
                    "noise_rate_per_ms" => scene.noise_rate_per_ms = num(value)?,
                    _ => return Err(err(format!("unknown scene key {key:?}"))),
                },
                Some((draft, _)) => match key {
                    "rate_per_px_ms" => draft.spec.rate_per_px_ms = num(value)?,
                    "edge_offset_px" => draft.spec.edge_offset_px = num(value)?,
                    "jitter_px" => draft.spec.jitter_px = num(value)?,
                    "emit_when_static" => {
                        draft.spec.emit_when_static =
                            value.parse().map_err(|_| err("emit_when_static: true|false".into()))?
                    }
                    "key" => {
                        let v = numbers(value, 5).ok_or_else(|| err("key = t_ms x0 y0 x1 y1".into()))?;
                        draft.keys.push(Keyframe {
                            t_us: ms_to_us(v[0]),
                            a: [v[1], v[2]],
                            b: [v[3], v[4]],
                        });
                    }
                    "sinusoid" => {
                        let v = numbers(value, 8).ok_or_else(|| {
                            err("sinusoid = x0 y0 x1 y1 dx dy period_ms phase_deg".into())
                        })?;
                        draft.sinusoid = Some(v);
                    }
                    "start_ms" => draft.start_us = Some(ms_to_us(num(value)?)),
                    "end_ms" => draft.end_us = Some(ms_to_us(num(value)?)),
                    _ => return Err(err(format!("unknown track key {key:?}"))),
                },
            }
        }
        if let Some((draft, at)) = current.take() {
            scene.tracks.push(draft.finish(at)?);
        }
        if !duration_set {
            scene.duration_us = scene
                .tracks
                .iter()
                .map(|t| t.motion.span().1)
                .filter(|&end| end != Micros::MAX)
                .max()
                .unwrap_or(0);
        }
        for t in &mut scene.tracks {
            if let Motion::Sinusoid { end_us, .. } = &mut t.motion {
                if *end_us == Micros::MAX {
                    *end_us = scene.duration_us;
                }
            }
        }
        scene.validate()?;
        Ok(scene)
    }

    /// Inverse of [`SceneSpec::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "width = {}\nheight = {}\nduration_ms = {}\nnoise_rate_per_ms = {}\n",
            self.width,
            self.height,
            self.duration_us as f64 / 1000.0,
            self.noise_rate_per_ms
        );
        for t in &self.tracks {
            out.push_str(&format!(
                "\n[track]\nrate_per_px_ms = {}\nedge_offset_px = {}\njitter_px = {}\nemit_when_static = {}\n",
                t.rate_per_px_ms, t.edge_offset_px, t.jitter_px, t.emit_when_static
            ));
            match &t.motion {
                Motion::Keyframes(keys) => {
                    for k in keys {
                        out.push_str(&format!(
                            "key = {} {} {} {} {}\n",
                            k.t_us as f64 / 1000.0,
                            k.a[0],
                            k.a[1],
                            k.b[0],
                            k.b[1]
                        ));
                    }
                }
                Motion::Sinusoid {
                    a,
                    b,
                    offset,
                    period_us,
                    phase_rad,
                    start_us,
                    end_us,
                } => {
                    out.push_str(&format!(
                        "sinusoid = {} {} {} {} {} {} {} {}\nstart_ms = {}\nend_ms = {}\n",
                        a[0],
                        a[1],
                        b[0],
                        b[1],
                        offset[0],
                        offset[1],
                        *period_us as f64 / 1000.0,
                        phase_rad.to_degrees(),
                        *start_us as f64 / 1000.0,
                        *end_us as f64 / 1000.0
                    ));
                }
            }
        }
        out
    }
}

fn numbers(value: &str, n: usize) -> Option<Vec<f64>> {
    let v: Vec<f64> = value
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .ok()?;
    (v.len() == n).then_some(v)
}

#[derive(Default)]
struct TrackDraft {
    spec: Partial,
    keys: Vec<Keyframe>,
    sinusoid: Option<Vec<f64>>,
    start_us: Option<Micros>,
    end_us: Option<Micros>,
}

struct Partial {
    rate_per_px_ms: f64,
    edge_offset_px: f64,
    jitter_px: f64,
    emit_when_static: bool,
}

impl Default for Partial {
    fn default() -> Self {
        let t = TrackSpec::new(Motion::Keyframes(Vec::new()));
        Self {
            rate_per_px_ms: t.rate_per_px_ms,
            edge_offset_px: t.edge_offset_px,
            jitter_px: t.jitter_px,
            emit_when_static: t.emit_when_static,
        }
    }
}

impl TrackDraft {
    fn finish(self, line: usize) -> Result<TrackSpec, SceneError> {
        let motion = match (self.sinusoid, self.keys.is_empty()) {
            (Some(v), true) => Motion::Sinusoid {
                a: [v[0], v[1]],
                b: [v[2], v[3]],
                offset: [v[4], v[5]],
                period_us: ms_to_us(v[6]),
                phase_rad: v[7].to_radians(),
                start_us: self.start_us.unwrap_or(0),
                end_us: self.end_us.unwrap_or(Micros::MAX),
            },
            (None, false) => Motion::Keyframes(self.keys),
            _ => {
                return Err(SceneError::Parse {
                    line,
                    msg: "a track needs either keys or one sinusoid".into(),
                })
            }
        };
        Ok(TrackSpec {
            motion,
            rate_per_px_ms: self.spec.rate_per_px_ms,
            edge_offset_px: self.spec.edge_offset_px,
            jitter_px: self.spec.jitter_px,
            emit_when_static: self.spec.emit_when_static,
        })
    }
}
