//! Events, timestamps and the Surface of Active Events.
//!
//! Timestamps are integer microseconds. Millisecond parameters are converted
//! once, at configuration time, via [`ms_to_us`].

use std::sync::atomic::{AtomicI64, Ordering};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Microsecond timestamp.
pub type Micros = i64;

/// Converts a (possibly fractional) millisecond value to whole microseconds.
#[inline]
pub fn ms_to_us(ms: f64) -> Micros {
    (ms * 1000.0).round() as Micros
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Polarity::Off => 0,
            Polarity::On => 1,
        }
    }

    #[inline]
    pub fn opposite(self) -> Polarity {
        match self {
            Polarity::Off => Polarity::On,
            Polarity::On => Polarity::Off,
        }
    }

    /// File encoding: 1 for ON, 0 for OFF.
    #[inline]
    pub fn from_bit(bit: u8) -> Option<Polarity> {
        match bit {
            0 => Some(Polarity::Off),
            1 => Some(Polarity::On),
            _ => None,
        }
    }

    #[inline]
    pub fn bit(self) -> u8 {
        self.index() as u8
    }
}

/// One camera event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: Micros,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(x: u16, y: u16, t: Micros, polarity: Polarity) -> Self {
        Self { x, y, t, polarity }
    }

    pub fn on(x: u16, y: u16, t: Micros) -> Self {
        Self::new(x, y, t, Polarity::On)
    }

    pub fn off(x: u16, y: u16, t: Micros) -> Self {
        Self::new(x, y, t, Polarity::Off)
    }
}

/// Sensor dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensorSize {
    pub width: u16,
    pub height: u16,
}

impl SensorSize {
    pub const DAVIS346: SensorSize = SensorSize {
        width: 346,
        height: 260,
    };

    pub fn new(width: u16, height: u16) -> Self {
        Self { width, height }
    }

    #[inline]
    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }

    pub fn check(&self, e: &Event) -> Result<()> {
        if self.contains(e.x, e.y) && e.t >= 0 {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                x: e.x,
                y: e.y,
                width: self.width,
                height: self.height,
            })
        }
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Conversion of time onto a pixel-commensurate axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeScale {
    pixels_per_ms: f64,
}

impl TimeScale {
    pub fn new(pixels_per_ms: f64) -> Result<Self> {
        if pixels_per_ms.is_finite() && pixels_per_ms > 0.0 {
            Ok(Self { pixels_per_ms })
        } else {
            Err(Error::Config(format!(
                "pixels_per_ms must be positive and finite, got {pixels_per_ms}"
            )))
        }
    }

    pub fn pixels_per_ms(&self) -> f64 {
        self.pixels_per_ms
    }

    /// Scaled length of a microsecond interval.
    #[inline]
    pub fn scale<T: Scalar>(&self, dt_us: Micros) -> T {
        T::lit(dt_us as f64 * self.pixels_per_ms / 1000.0)
    }

    /// Inverse of [`TimeScale::scale`].
    #[inline]
    pub fn unscale<T: Scalar>(&self, scaled: T) -> f64 {
        scaled.as_f64() * 1000.0 / self.pixels_per_ms
    }
}

impl Default for TimeScale {
    fn default() -> Self {
        Self { pixels_per_ms: 1.0 }
    }
}

/// Surface of Active Events: the newest timestamp seen at each pixel.
///
/// One writer, any number of readers. A reader sees some timestamp that was
/// stored at or after the start of its read.
#[derive(Debug)]
pub struct Sae {
    size: SensorSize,
    newest: Vec<AtomicI64>,
}

impl Sae {
    /// Sentinel for pixels that never fired.
    pub const NEVER: Micros = Micros::MIN;

    pub fn new(size: SensorSize) -> Self {
        let newest = (0..size.pixel_count())
            .map(|_| AtomicI64::new(Self::NEVER))
            .collect();
        Self { size, newest }
    }

    pub fn size(&self) -> SensorSize {
        self.size
    }

    #[inline]
    fn index(&self, x: u16, y: u16) -> usize {
        y as usize * self.size.width as usize + x as usize
    }

    /// Newest timestamp at a pixel, `None` if it never fired or lies outside.
    #[inline]
    pub fn get(&self, x: u16, y: u16) -> Option<Micros> {
        if !self.size.contains(x, y) {
            return None;
        }
        let t = self.newest[self.index(x, y)].load(Ordering::Relaxed);
        (t != Self::NEVER).then_some(t)
    }

    /// Stores `max(previous, e.t)` at the event's pixel.
    pub fn update(&self, e: &Event) -> Result<()> {
        self.size.check(e)?;
        self.update_unchecked(e.x, e.y, e.t);
        Ok(())
    }

    #[inline]
    pub(crate) fn update_unchecked(&self, x: u16, y: u16, t: Micros) {
        let cell = &self.newest[self.index(x, y)];
        if cell.load(Ordering::Relaxed) < t {
            cell.store(t, Ordering::Relaxed);
        }
    }

    /// Resets a pixel to "never fired".
    pub fn clear(&self, x: u16, y: u16) {
        if self.size.contains(x, y) {
            self.newest[self.index(x, y)].store(Self::NEVER, Ordering::Relaxed);
        }
    }

    /// Number of pixels in the window of half size `half_extent` around
    /// `(cx, cy)`, clipped at the sensor border and excluding the center, whose
    /// newest timestamp is at least `min_t`.
    pub fn query_window(&self, cx: u16, cy: u16, half_extent: u16, min_t: Micros) -> usize {
        debug_assert!(self.size.contains(cx, cy));
        let x0 = cx.saturating_sub(half_extent);
        let y0 = cy.saturating_sub(half_extent);
        let x1 = cx.saturating_add(half_extent).min(self.size.width - 1);
        let y1 = cy.saturating_add(half_extent).min(self.size.height - 1);
        let w = self.size.width as usize;
        let mut count = 0;
        for y in y0..=y1 {
            let row = y as usize * w;
            for x in x0..=x1 {
                let t = self.newest[row + x as usize].load(Ordering::Relaxed);
                if t != Self::NEVER && t >= min_t && !(x == cx && y == cy) {
                    count += 1;
                }
            }
        }
        count
    }
}
