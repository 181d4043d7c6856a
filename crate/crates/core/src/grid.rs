//! Regular 2-D evaluation grids and weighted Gaussian product kernels.

use std::f64::consts::PI;

/// A regular grid of `nx * ny` cells over a rectangle. Values attached to
/// the grid are stored row-major by x index: `idx = i * ny + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2 {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2 {
    pub fn new(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Self {
        assert!(nx > 0 && ny > 0, "grid needs at least one cell per axis");
        assert!(x.1 > x.0 && y.1 > y.0, "grid extents must be non-empty");
        Grid2 {
            x_lo: x.0,
            x_hi: x.1,
            y_lo: y.0,
            y_hi: y.1,
            nx,
            ny,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_hi - self.y_lo) / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    /// Centre of cell `idx`.
    pub fn center(&self, idx: usize) -> (f64, f64) {
        let (i, j) = (idx / self.ny, idx % self.ny);
        (
            self.x_lo + (i as f64 + 0.5) * self.dx(),
            self.y_lo + (j as f64 + 0.5) * self.dy(),
        )
    }

    pub fn centers(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(|idx| self.center(idx))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi && y >= self.y_lo && y <= self.y_hi
    }

    /// Cell holding `(x, y)`, or the nearest cell when the point lies
    /// outside. The flag is `true` when the point was outside.
    pub fn nearest_cell(&self, x: f64, y: f64) -> (usize, bool) {
        let clamp = |v: f64, lo: f64, d: f64, n: usize| -> usize {
            let k = ((v - lo) / d).floor();
            if k.is_nan() || k < 0.0 {
                0
            } else {
                (k as usize).min(n - 1)
            }
        };
        let i = clamp(x, self.x_lo, self.dx(), self.nx);
        let j = clamp(y, self.y_lo, self.dy(), self.ny);
        (self.index(i, j), !self.contains(x, y))
    }

    /// Maps a point to unit-square coordinates of the grid extent.
    pub fn normalize(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.x_lo) / (self.x_hi - self.x_lo),
            (y - self.y_lo) / (self.y_hi - self.y_lo),
        )
    }

    /// Riemann sum of `values * cell_area`.
    pub fn mass(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.cell_area()
    }

    /// Grid spanning the points plus `pad` on each axis.
    pub fn around(points: &[(f64, f64)], pad: (f64, f64), nx: usize, ny: usize) -> Self {
        let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in points {
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
        Grid2::new(
            (x_lo - pad.0, x_hi + pad.0),
            (y_lo - pad.1, y_hi + pad.1),
            nx,
            ny,
        )
    }
}

pub fn gaussian_kernel(dx: f64, dy: f64, h: (f64, f64)) -> f64 {
    let (u, v) = (dx / h.0, dy / h.1);
    (-0.5 * (u * u + v * v)).exp() / (2.0 * PI * h.0 * h.1)
}

/// Weighted mean and standard deviation (weights need not be normalised).
pub fn weighted_moments(values: &[f64], weights: &[f64]) -> (f64, f64) {
    let total: f64 = weights.iter().sum();
    let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
    let var = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v - mean).powi(2))
        .sum::<f64>()
        / total;
    (mean, var.max(0.0).sqrt())
}

/// Effective sample size `(sum w)^2 / sum w^2`.
pub fn effective_n(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    s * s / s2
}

/// Weighted Silverman rule for a 2-D product kernel:
/// `h_k = sigma_k * n_eff^(-1/6)`.
pub fn silverman_bandwidth(points: &[(f64, f64)], weights: &[f64]) -> (f64, f64) {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let factor = effective_n(weights).powf(-1.0 / 6.0);
    (
        weighted_moments(&xs, weights).1 * factor,
        weighted_moments(&ys, weights).1 * factor,
    )
}

/// Weighted Gaussian product-kernel density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKde {
    points: Vec<(f64, f64)>,
    weights: Vec<f64>,
    bandwidth: (f64, f64),
}

impl GaussianKde {
    /// Weights are normalised to sum to one. Callers validate inputs.
    pub fn new(points: Vec<(f64, f64)>, weights: &[f64], bandwidth: (f64, f64)) -> Self {
        let total: f64 = weights.iter().sum();
        GaussianKde {
            points,
            weights: weights.iter().map(|w| w / total).collect(),
            bandwidth,
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bandwidth(&self) -> (f64, f64) {
        self.bandwidth
    }

    pub fn density(&self, x: f64, y: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&(px, py), w)| w * gaussian_kernel(x - px, y - py, self.bandwidth))
            .sum()
    }

    pub fn evaluate(&self, grid: &Grid2) -> Vec<f64> {
        grid.centers().map(|(x, y)| self.density(x, y)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_geometry() {
        let g = Grid2::new((0.0, 4.0), (0.0, 2.0), 4, 2);
        assert_eq!(g.len(), 8);
        assert_eq!(g.cell_area(), 1.0);
        assert_eq!(g.center(0), (0.5, 0.5));
        assert_eq!(g.center(g.index(3, 1)), (3.5, 1.5));
        assert_eq!(g.nearest_cell(3.9, 0.1), (g.index(3, 0), false));
        assert_eq!(g.nearest_cell(4.0, 2.0), (g.index(3, 1), false));
        assert_eq!(g.nearest_cell(-5.0, 9.0), (g.index(0, 1), true));
    }

    #[test]
    fn kernel_peak() {
        let kde = GaussianKde::new(vec![(0.0, 0.0)], &[3.0], (1.0, 1.0));
        assert!((kde.density(0.0, 0.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn silverman_equal_weights() {
        let pts = [(0.0, 0.0), (2.0, 4.0)];
        let (hx, hy) = silverman_bandwidth(&pts, &[1.0, 1.0]);
        let f = 2f64.powf(-1.0 / 6.0);
        assert!((hx - f).abs() < 1e-12);
        assert!((hy - 2.0 * f).abs() < 1e-12);
    }

    #[test]
    fn effective_n_is_scale_free() {
        assert!((effective_n(&[1.0, 1.0, 1.0]) - 3.0).abs() < 1e-12);
        assert!((effective_n(&[5.0, 5.0]) - 2.0).abs() < 1e-12);
        assert!((effective_n(&[1.0, 0.0]) - 1.0).abs() < 1e-12);
    }
}
