//! PNG overlays of tracked lines on recent events.

use evline_core::{Event, LineState, Polarity, SensorSize, TrackSnapshot};
use image::{Rgb, RgbImage};

const BACKDROP: Rgb<u8> = Rgb([16, 16, 16]);
const ON: Rgb<u8> = Rgb([90, 140, 255]);
const OFF: Rgb<u8> = Rgb([170, 170, 170]);

pub fn state_color(state: LineState) -> Rgb<u8> {
    match state {
        LineState::Active => Rgb([255, 0, 0]),
        LineState::Hibernated => Rgb([255, 220, 0]),
        LineState::Initializing => Rgb([128, 128, 128]),
    }
}

/// Pixels from `p0` to `p1` inclusive, unclipped.
pub fn bresenham(p0: [i64; 2], p1: [i64; 2]) -> Vec<[i64; 2]> {
    let [mut x, mut y] = p0;
    let dx = (p1[0] - x).abs();
    let dy = -(p1[1] - y).abs();
    let sx = if x < p1[0] { 1 } else { -1 };
    let sy = if y < p1[1] { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy + 1) as usize);
    loop {
        out.push([x, y]);
        if x == p1[0] && y == p1[1] {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

/// Events as dots, then every line of `snap` as a segment of its length
/// centred on its midpoint.
pub fn render(
    size: SensorSize,
    background: Option<&RgbImage>,
    events: &[Event],
    snap: &TrackSnapshot<f64>,
) -> RgbImage {
    let mut img = match background {
        Some(bg) if bg.dimensions() == (size.width as u32, size.height as u32) => bg.clone(),
        _ => RgbImage::from_pixel(size.width as u32, size.height as u32, BACKDROP),
    };
    for e in events {
        let c = match e.polarity {
            Polarity::On => ON,
            Polarity::Off => OFF,
        };
        put(&mut img, e.x as i64, e.y as i64, c);
    }
    for l in &snap.lines {
        let (s, c) = l.angle_deg.to_radians().sin_cos();
        let h = l.length / 2.0;
        let [mx, my] = l.midpoint;
        if !(mx.is_finite() && my.is_finite() && h.is_finite()) {
            continue;
        }
        let p0 = [(mx - c * h).round() as i64, (my - s * h).round() as i64];
        let p1 = [(mx + c * h).round() as i64, (my + s * h).round() as i64];
        let color = state_color(l.state);
        for [x, y] in bresenham(p0, p1) {
            put(&mut img, x, y, color);
        }
    }
    img
}
