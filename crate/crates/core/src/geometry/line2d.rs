//! Total-least-squares line through event positions in the image plane.

use super::accumulator::EventAccumulator;
use crate::scalar::Scalar;

/// Line inferred from the image positions of a cluster's events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferredLine<T> {
    pub centroid: [T; 2],
    /// Unit principal direction, angle in `[0, 180)`.
    pub direction: [T; 2],
    /// `sqrt(12 * lambda_max)`.
    pub length: T,
}

impl<T: Scalar> InferredLine<T> {
    pub fn from_accumulator(acc: &EventAccumulator<T>) -> Option<Self> {
        let origin = acc.origin()?;
        let c = acc.centroid()?;
        let centroid = [T::lit(origin.x as f64) + c[0], T::lit(origin.y as f64) + c[1]];
        let Some(cov) = acc.covariance() else {
            return Some(Self {
                centroid,
                direction: [T::one(), T::zero()],
                length: T::zero(),
            });
        };
        let (sxx, sxy, syy) = (cov.a00, cov.a01, cov.a11);
        let two = T::lit(2.0);
        let half_diff = (sxx - syy) / two;
        let lambda_max = (sxx + syy) / two + (half_diff * half_diff + sxy * sxy).sqrt();
        let theta = (two * sxy).atan2(sxx - syy) / two;
        let mut direction = [theta.cos(), theta.sin()];
        if direction[1] < T::zero() || (direction[1] == T::zero() && direction[0] < T::zero()) {
            direction = [-direction[0], -direction[1]];
        }
        Some(Self {
            centroid,
            direction,
            length: (T::lit(12.0) * lambda_max.max(T::zero())).sqrt(),
        })
    }

    #[inline]
    pub fn distances(&self, px: T, py: T) -> (T, T) {
        super::plane::point_line_distances(self.centroid, self.direction, px, py)
    }
}
