use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scene::Point;

/// `N` equidistant unit directions `(cos phi_n, sin phi_n)`, `phi_n = 2 pi n / N`,
/// carrying the trapezoidal weight `2 pi / N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DirectionGrid {
    n: usize,
}

impl DirectionGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 directions, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn weight(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn angle(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.n as f64
    }

    pub fn direction(&self, i: usize) -> Point {
        let (s, c) = self.angle(i).sin_cos();
        Point::new(c, s)
    }

    pub fn directions(&self) -> Vec<Point> {
        (0..self.n).map(|i| self.direction(i)).collect()
    }

    /// Index of `-theta_i`; only defined for even `N`.
    pub fn opposite(&self, i: usize) -> Option<usize> {
        self.n.is_multiple_of(2).then(|| (i + self.n / 2) % self.n)
    }
}
