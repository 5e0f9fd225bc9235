//! Plane fitting in the spatio-temporal event volume and the line geometry
//! obtained by intersecting that plane with the image plane.

use super::accumulator::{EventAccumulator, Origin};
use super::eigen::{dot3, symmetric_eigen3, Sym3};
use crate::error::{Error, Result};
use crate::event::{Event, Micros, TimeScale};
use crate::scalar::Scalar;

/// Threshold on `n_x^2 + n_y^2` below which the plane is treated as parallel
/// to the image plane.
pub const DEGENERATE_NXY2: f64 = 1e-9;

/// Plane through the event centroid, normal to the smallest-variance axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFit<T> {
    pub origin: Origin,
    pub time_scale: TimeScale,
    /// Centroid relative to `origin`, time axis scaled.
    pub centroid: [T; 3],
    /// Unit normal in canonical sign (see [`canonical_normal`]).
    pub normal: [T; 3],
    /// Descending, clamped at zero.
    pub eigenvalues: [T; 3],
    pub eigenvectors: [[T; 3]; 3],
    pub count: usize,
}

impl<T: Scalar> PlaneFit<T> {
    pub fn fit(acc: &EventAccumulator<T>) -> Result<Self> {
        if acc.len() < 3 {
            return Err(Error::InsufficientData(acc.len()));
        }
        let cov = acc.covariance().expect("n >= 3");
        Self::from_moments(
            acc.origin().expect("non-empty"),
            acc.time_scale(),
            acc.centroid().expect("non-empty"),
            &cov,
            acc.len(),
        )
    }

    pub fn from_moments(
        origin: Origin,
        time_scale: TimeScale,
        centroid: [T; 3],
        cov: &Sym3<T>,
        count: usize,
    ) -> Result<Self> {
        if cov.frobenius_norm() == T::zero() {
            return Err(Error::DegenerateCovariance);
        }
        let eig = symmetric_eigen3(cov);
        let eigenvalues = eig.values.map(|v| v.max(T::zero()));
        Ok(Self {
            origin,
            time_scale,
            centroid,
            normal: canonical_normal(eig.vectors[2]),
            eigenvalues,
            eigenvectors: eig.vectors,
            count,
        })
    }

    /// Centroid in absolute pixel coordinates.
    pub fn centroid_xy(&self) -> [T; 2] {
        [
            T::lit(self.origin.x as f64) + self.centroid[0],
            T::lit(self.origin.y as f64) + self.centroid[1],
        ]
    }

    /// Scaled time of `t` relative to the origin.
    #[inline]
    pub fn scaled_time(&self, t: Micros) -> T {
        self.time_scale.scale(t - self.origin.t)
    }

    /// Root of the smallest eigenvalue: spread off the plane, in pixels.
    pub fn plane_std_dev(&self) -> T {
        self.eigenvalues[2].sqrt()
    }

    /// Spatial velocity of the line along its normal direction in the image,
    /// in pixels per scaled time unit; `None` for planes parallel to the image.
    pub fn image_velocity(&self) -> Option<[T; 2]> {
        let n = self.normal;
        let nxy2 = n[0] * n[0] + n[1] * n[1];
        if nxy2 <= T::lit(DEGENERATE_NXY2) {
            return None;
        }
        // d p / d t from p = g + (t - t_bar) / (-|n_xy|^2) * s
        let k = -T::one() / nxy2;
        Some([k * n[0] * n[2], k * n[1] * n[2]])
    }
}

/// Normal sign convention: `n_t <= 0`; ties broken by `n_x >= 0`, then `n_y >= 0`.
pub fn canonical_normal<T: Scalar>(n: [T; 3]) -> [T; 3] {
    let flip = if n[2] != T::zero() {
        n[2] > T::zero()
    } else if n[0] != T::zero() {
        n[0] < T::zero()
    } else {
        n[1] < T::zero()
    };
    if flip {
        [-n[0], -n[1], -n[2]]
    } else {
        n
    }
}

/// Direction of the intersection of the plane with the image plane:
/// `d = n x e_t = (n_y, -n_x, 0)`, normalized, with `n` in canonical sign so
/// that `n` and `-n` give the same direction.
pub fn line_direction<T: Scalar>(n: [T; 3]) -> Result<[T; 2]> {
    let n = canonical_normal(n);
    let nxy2 = n[0] * n[0] + n[1] * n[1];
    if !(nxy2 > T::lit(DEGENERATE_NXY2)) {
        return Err(Error::DegenerateDirection);
    }
    let inv = T::one() / nxy2.sqrt();
    Ok([n[1] * inv, -n[0] * inv])
}

/// How the midpoint is obtained from the fitted plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MidpointMode {
    /// Transport the centroid inside the fitted plane to the evaluation time.
    AlongPlane,
    /// Orthogonal projection of the centroid onto the image plane.
    Orthogonal,
}

/// Midpoint of the line at time `t_now`.
pub fn line_midpoint<T: Scalar>(fit: &PlaneFit<T>, t_now: Micros, mode: MidpointMode) -> Result<[T; 2]> {
    let g = fit.centroid_xy();
    match mode {
        MidpointMode::Orthogonal => Ok(g),
        MidpointMode::AlongPlane => {
            let n = fit.normal;
            let nxy2 = n[0] * n[0] + n[1] * n[1];
            if !(nxy2 > T::lit(DEGENERATE_NXY2)) {
                return Err(Error::DegeneratePlane);
            }
            let factor = (fit.scaled_time(t_now) - fit.centroid[2]) / (-nxy2);
            // s = n x d = (n_x n_t, n_y n_t, -n_x^2 - n_y^2)
            Ok([g[0] + factor * n[0] * n[2], g[1] + factor * n[1] * n[2]])
        }
    }
}

/// How the along-line spread is composed from the two in-plane eigenpairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LengthModel {
    /// `sigma^2 = sum lambda_i (q_i . d)^2`, the variance along `d`.
    #[default]
    Variance,
    /// `sigma = sum sqrt(lambda_i) |q_i . d|`.
    StdDevSum,
}

/// Line length under a uniform distribution of events along the line:
/// `l = sqrt(12) * sigma`.
pub fn line_length<T: Scalar>(fit: &PlaneFit<T>, d: [T; 2], model: LengthModel) -> T {
    let d3 = [d[0], d[1], T::zero()];
    let p1 = dot3(fit.eigenvectors[0], d3);
    let p2 = dot3(fit.eigenvectors[1], d3);
    let (l1, l2) = (fit.eigenvalues[0], fit.eigenvalues[1]);
    let sigma = match model {
        LengthModel::Variance => (l1 * p1 * p1 + l2 * p2 * p2).sqrt(),
        LengthModel::StdDevSum => l1.sqrt() * p1.abs() + l2.sqrt() * p2.abs(),
    };
    T::lit(12.0).sqrt() * sigma
}

/// Direction, midpoint and length of a line in the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineGeometry<T> {
    pub direction: [T; 2],
    pub midpoint: [T; 2],
    pub length: T,
}

impl<T: Scalar> LineGeometry<T> {
    /// Distance `a` to the infinite line and distance `b` from the midpoint
    /// along the line.
    #[inline]
    pub fn distances(&self, px: T, py: T) -> (T, T) {
        point_line_distances(self.midpoint, self.direction, px, py)
    }

    /// Direction angle in degrees, in `[0, 180)`.
    pub fn angle_deg(&self) -> T {
        direction_angle_deg(self.direction)
    }
}

/// `(a, b)`: perpendicular offset from the line through `p` with direction
/// `d`, and offset along `d` from `p`.
#[inline]
pub fn point_line_distances<T: Scalar>(p: [T; 2], d: [T; 2], px: T, py: T) -> (T, T) {
    let dx = px - p[0];
    let dy = py - p[1];
    let a = (dx * d[1] - dy * d[0]).abs();
    let b = (dx * d[0] + dy * d[1]).abs();
    (a, b)
}

/// Angle of an undirected direction in degrees, in `[0, 180)`.
pub fn direction_angle_deg<T: Scalar>(d: [T; 2]) -> T {
    let mut a = d[1].atan2(d[0]).to_degrees();
    let half_turn = T::lit(180.0);
    if a < T::zero() {
        a = a + half_turn;
    }
    if a >= half_turn {
        a = a - half_turn;
    }
    a
}

/// Angle between two undirected lines, in degrees `[0, 90]`.
pub fn angle_between_deg<T: Scalar>(d1: [T; 2], d2: [T; 2]) -> T {
    let c = (d1[0] * d2[0] + d1[1] * d2[1]).abs().min(T::one());
    c.acos().to_degrees()
}

/// Longest chain of occupied bins along the line, allowing single empty bins
/// inside the chain; returned as `bins * bin_size` pixels.
///
/// Every event is projected along the fitted plane onto the line at the
/// evaluation time. That transport moves along `s = n x d`, which is
/// orthogonal to `d`, so the coordinate along `d` equals the direct projection
/// of the event's image position.
pub fn connected_length<'a, T, I>(events: I, fit: &PlaneFit<T>, d: [T; 2], bin_size: T) -> T
where
    T: Scalar,
    I: IntoIterator<Item = &'a Event>,
{
    let g = fit.centroid_xy();
    let mut bins: Vec<i64> = events
        .into_iter()
        .map(|e| {
            let u = (T::lit(e.x as f64) - g[0]) * d[0] + (T::lit(e.y as f64) - g[1]) * d[1];
            (u / bin_size).floor().to_i64().unwrap_or(0)
        })
        .collect();
    T::lit(longest_bin_chain(&mut bins) as f64) * bin_size
}

/// Span in bins of the longest run of occupied bins whose internal gaps are
/// at most one empty bin. Sorts `bins` in place.
pub fn longest_bin_chain(bins: &mut [i64]) -> usize {
    if bins.is_empty() {
        return 0;
    }
    bins.sort_unstable();
    let mut best = 1;
    let mut start = bins[0];
    let mut prev = bins[0];
    for &b in &bins[1..] {
        if b - prev > 2 {
            start = b;
        }
        prev = b;
        best = best.max((prev - start + 1) as usize);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Polarity;
    use crate::geometry::accumulator::EventAccumulator;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    fn fit_of(events: &[Event]) -> PlaneFit<f64> {
        let mut acc = EventAccumulator::new(TimeScale::default());
        for e in events {
            acc.add(e);
        }
        PlaneFit::fit(&acc).unwrap()
    }

    #[test]
    fn static_vertical_line_has_x_normal() {
        let events: Vec<Event> = (0..40)
            .map(|i| Event::new(20, (i * 7 % 50) as u16, i as i64 * 1300, Polarity::On))
            .collect();
        let fit = fit_of(&events);
        approx(fit.normal[0].abs(), 1.0, 1e-12);
        approx(fit.eigenvalues[2], 0.0, 1e-12);
    }

    #[test]
    fn too_few_events() {
        let mut acc = EventAccumulator::<f64>::new(TimeScale::default());
        acc.add(&Event::on(1, 1, 0));
        acc.add(&Event::on(2, 1, 0));
        assert_eq!(PlaneFit::fit(&acc).unwrap_err(), Error::InsufficientData(2));
    }

    #[test]
    fn coincident_events_are_degenerate() {
        let mut acc = EventAccumulator::<f64>::new(TimeScale::default());
        for _ in 0..5 {
            acc.add(&Event::on(4, 4, 100));
        }
        assert_eq!(PlaneFit::fit(&acc).unwrap_err(), Error::DegenerateCovariance);
    }

    #[test]
    fn direction_axis_cases() {
        assert_eq!(line_direction([1.0, 0.0, 0.0]).unwrap(), [0.0, -1.0]);
        assert_eq!(line_direction([0.0, 1.0, 0.0]).unwrap(), [1.0, 0.0]);
        let s = 1.0 / 3f64.sqrt();
        let d = line_direction([s, s, -s]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        approx(d[0], h, 1e-15);
        approx(d[1], -h, 1e-15);
    }

    #[test]
    fn direction_invariant_under_normal_flip() {
        for n in [[0.3, -0.4, 0.866], [1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [-0.6, 0.8, 0.0]] {
            let m = [-n[0], -n[1], -n[2]];
            assert_eq!(line_direction(n).unwrap(), line_direction(m).unwrap());
        }
    }

    #[test]
    fn direction_parallel_to_time_axis_fails() {
        assert_eq!(line_direction([0.0, 0.0, 1.0]).unwrap_err(), Error::DegenerateDirection);
    }

    fn synthetic_fit(normal: [f64; 3], centroid: [f64; 3]) -> PlaneFit<f64> {
        PlaneFit {
            origin: Origin { x: 0, y: 0, t: 0 },
            time_scale: TimeScale::default(),
            centroid,
            normal: canonical_normal(normal),
            eigenvalues: [1.0, 0.5, 0.0],
            eigenvectors: [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]],
            count: 10,
        }
    }

    #[test]
    fn midpoint_of_static_line_is_centroid() {
        let fit = synthetic_fit([1.0, 0.0, 0.0], [3.0, 4.0, 10.0]);
        let p = line_midpoint(&fit, 99_000, MidpointMode::AlongPlane).unwrap();
        assert_eq!(p, [3.0, 4.0]);
    }

    #[test]
    fn midpoint_of_moving_line() {
        // plane x = t (1 px per scaled unit), centroid at the origin
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let fit = synthetic_fit([h, 0.0, -h], [0.0, 0.0, 0.0]);
        let p = line_midpoint(&fit, 2000, MidpointMode::AlongPlane).unwrap();
        approx(p[0], 2.0, 1e-12);
        approx(p[1], 0.0, 1e-12);
        // independent evaluation: intersect n . (q - g) = 0 with t = 2 along x
        let q_x = (h * 2.0) / h;
        approx(p[0], q_x, 1e-12);
        let o = line_midpoint(&fit, 2000, MidpointMode::Orthogonal).unwrap();
        assert_eq!(o, [0.0, 0.0]);
    }

    #[test]
    fn along_plane_rejects_image_parallel_plane() {
        let fit = synthetic_fit([0.0, 0.0, 1.0], [0.0; 3]);
        assert_eq!(
            line_midpoint(&fit, 0, MidpointMode::AlongPlane).unwrap_err(),
            Error::DegeneratePlane
        );
    }

    #[test]
    fn distances_to_vertical_line() {
        let (a, b) = point_line_distances([10.0, 10.0], [0.0, 1.0], 13.0, 25.0);
        assert_eq!((a, b), (3.0, 15.0));
        let (a2, b2) = point_line_distances([10.0, 10.0], [0.0, -1.0], 13.0, 25.0);
        assert_eq!((a2, b2), (3.0, 15.0));
        assert_eq!(point_line_distances([1.0, 2.0], [1.0, 0.0], 1.0, 2.0), (0.0, 0.0));
    }

    #[test]
    fn bin_chain_examples() {
        let mut every_px: Vec<i64> = (0..100).map(|u| u / 2).collect();
        assert_eq!(longest_bin_chain(&mut every_px), 50);
        assert_eq!(longest_bin_chain(&mut [7]), 1);
        assert_eq!(longest_bin_chain(&mut [0, 1, 3, 4]), 5);
        assert_eq!(longest_bin_chain(&mut [0, 1, 4, 5, 6]), 3);
        assert_eq!(longest_bin_chain(&mut []), 0);
    }

    #[test]
    fn length_of_point_cluster_is_zero() {
        let mut fit = synthetic_fit([1.0, 0.0, 0.0], [0.0; 3]);
        fit.eigenvalues = [0.0; 3];
        assert_eq!(line_length(&fit, [0.0, 1.0], LengthModel::Variance), 0.0);
    }

    #[test]
    fn angle_helpers() {
        approx(direction_angle_deg([0.0, -1.0]), 90.0, 1e-12);
        approx(direction_angle_deg([-1.0, 0.0]), 0.0, 1e-12);
        approx(angle_between_deg([1.0, 0.0], [0.0, 1.0]), 90.0, 1e-12);
        approx(angle_between_deg([1.0, 0.0], [-1.0, 0.0]), 0.0, 1e-6);
    }
}
