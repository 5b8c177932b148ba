use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean and 1/N covariance of the predicted positions at one step, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub mean: [f64; 2],
    /// `[[Σxx, Σxy], [Σyx, Σyy]]`.
    pub covariance: [[f64; 2]; 2],
    pub sigma: [f64; 2],
}

impl GaussianState {
    pub fn variance(&self) -> [f64; 2] {
        [self.covariance[0][0], self.covariance[1][1]]
    }
}

/// Two-pass mean and population moments of a point cloud. Shared by every
/// statistic in this module so diagonals agree bit for bit.
///
/// Deviations are taken from the first point, so a cloud of identical points has a
/// mean equal to that point and a covariance of exactly zero.
pub(crate) fn moments<'a, I>(points: I) -> Option<GaussianState>
where
    I: Iterator<Item = &'a [f64; 2]> + Clone,
{
    let origin = *points.clone().next()?;
    let n = points.clone().count();
    let inv = 1.0 / n as f64;
    let (sx, sy) = points.clone().fold((0.0, 0.0), |(a, b), p| (a + (p[0] - origin[0]), b + (p[1] - origin[1])));
    let shift = [sx * inv, sy * inv];
    let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
    for p in points {
        let dx = p[0] - origin[0] - shift[0];
        let dy = p[1] - origin[1] - shift[1];
        xx += dx * dx;
        yy += dy * dy;
        xy += dx * dy;
    }
    let (xx, yy) = (xx * inv, yy * inv);
    let bound = (xx * yy).sqrt();
    let xy = (xy * inv).clamp(-bound, bound);
    Some(GaussianState {
        mean: [origin[0] + shift[0], origin[1] + shift[1]],
        covariance: [[xx, xy], [xy, yy]],
        sigma: [xx.sqrt(), yy.sqrt()],
    })
}

/// Sample mean and 1/N covariance of the points predicted for one step.
pub fn fit_bivariate_gaussian(points: &[[f64; 2]]) -> Result<GaussianState> {
    if points.len() < 2 {
        return Err(Error::Data(format!("a covariance needs at least 2 points, got {}", points.len())));
    }
    Ok(moments(points.iter()).expect("non-empty"))
}
