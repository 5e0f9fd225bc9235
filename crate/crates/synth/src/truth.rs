//! Ground truth: sampled track geometry and per-event labels.

use std::io::{BufRead, Write};

use evline_core::Micros;

use crate::error::TruthError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    pub midpoint: [f64; 2],
    /// Degrees in `[0, 180)`.
    pub angle_deg: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub interval_us: Micros,
    pub duration_us: Micros,
    /// `tracks[k][i]`: track `k` at `i * interval_us`, `None` while absent.
    pub tracks: Vec<Vec<Option<TruthSample>>>,
    /// Per generated event: source track, `None` for noise.
    pub labels: Vec<Option<u32>>,
}

impl GroundTruth {
    /// Geometry of `track` at the sample nearest to `t`.
    pub fn at(&self, track: usize, t: Micros) -> Option<TruthSample> {
        if t < 0 || self.interval_us <= 0 {
            return None;
        }
        let i = ((t + self.interval_us / 2) / self.interval_us) as usize;
        self.tracks.get(track)?.get(i).copied().flatten()
    }

    pub fn num_tracks(&self) -> usize {
        self.tracks.len()
    }

    /// Writes the text form; labels only when `with_labels`.
    pub fn write<W: Write>(&self, mut w: W, with_labels: bool) -> std::io::Result<()> {
        writeln!(
            w,
            "# evline truth v1 duration_us={} interval_us={} tracks={}",
            self.duration_us,
            self.interval_us,
            self.tracks.len()
        )?;
        for (k, samples) in self.tracks.iter().enumerate() {
            for (i, s) in samples.iter().enumerate() {
                if let Some(s) = s {
                    writeln!(
                        w,
                        "G,{},{},{:.4},{:.4},{:.4},{:.4}",
                        i as Micros * self.interval_us,
                        k,
                        s.midpoint[0],
                        s.midpoint[1],
                        s.angle_deg,
                        s.length
                    )?;
                }
            }
        }
        if with_labels {
            for (i, l) in self.labels.iter().enumerate() {
                match l {
                    Some(k) => writeln!(w, "E,{i},{k}")?,
                    None => writeln!(w, "E,{i},-1")?,
                }
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, TruthError> {
        let mut lines = r.lines().enumerate();
        let err = |line: usize, msg: &str| TruthError::Parse {
            line,
            msg: msg.to_string(),
        };
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty truth file"))?;
        let header = header?;
        let rest = header
            .strip_prefix("# evline truth v1")
            .ok_or_else(|| err(1, "missing `# evline truth v1` header"))?;
        let mut duration_us = None;
        let mut interval_us = None;
        let mut n_tracks = None;
        for kv in rest.split_whitespace() {
            let (k, v) = kv.split_once('=').ok_or_else(|| err(1, "bad header field"))?;
            let v: i64 = v.parse().map_err(|_| err(1, "bad header value"))?;
            match k {
                "duration_us" => duration_us = Some(v),
                "interval_us" => interval_us = Some(v),
                "tracks" => n_tracks = Some(v as usize),
                _ => return Err(err(1, "unknown header field")),
            }
        }
        let (Some(duration_us), Some(interval_us), Some(n_tracks)) = (duration_us, interval_us, n_tracks) else {
            return Err(err(1, "header needs duration_us, interval_us and tracks"));
        };
        if interval_us <= 0 || duration_us < 0 {
            return Err(err(1, "bad header values"));
        }
        let n = (duration_us / interval_us + 1) as usize;
        let mut tracks = vec![vec![None; n]; n_tracks];
        let mut labels = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            match f[0] {
                "G" if f.len() == 7 => {
                    let t: Micros = f[1].parse().map_err(|_| err(lineno, "bad time"))?;
                    let k: usize = f[2].parse().map_err(|_| err(lineno, "bad track"))?;
                    let num = |s: &str| s.parse::<f64>().map_err(|_| err(lineno, "bad number"));
                    let sample = TruthSample {
                        midpoint: [num(f[3])?, num(f[4])?],
                        angle_deg: num(f[5])?,
                        length: num(f[6])?,
                    };
                    let idx = (t / interval_us) as usize;
                    let slot = tracks
                        .get_mut(k)
                        .and_then(|tr| tr.get_mut(idx))
                        .ok_or_else(|| err(lineno, "sample outside the declared range"))?;
                    *slot = Some(sample);
                }
                "E" if f.len() == 3 => {
                    let idx: usize = f[1].parse().map_err(|_| err(lineno, "bad index"))?;
                    if idx != labels.len() {
                        return Err(err(lineno, "labels must be consecutive"));
                    }
                    let k: i64 = f[2].parse().map_err(|_| err(lineno, "bad track"))?;
                    labels.push(u32::try_from(k).ok());
                }
                _ => return Err(err(lineno, "expected a G or E record")),
            }
        }
        Ok(Self {
            interval_us,
            duration_us,
            tracks,
            labels,
        })
    }
}
