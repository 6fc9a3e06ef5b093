//! Finite lattices standing in for continuous position coordinates.
//!
//! Points carry integer lattice coordinates; the physical coordinate of a
//! point is `spacing * lattice`. Distances are computed from integer
//! differences, so translating two points by the same lattice vector never
//! changes their distance, not even in the last bit.

use std::fmt;
use std::ops::{Add, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hilbert::HilbertSpace;

/// Whether a point at exactly the interaction radius is in range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// `|ζ − ξ| ≤ a`.
    #[default]
    Closed,
    /// `|ζ − ξ| < a`.
    Open,
}

/// Relative slack within which a distance counts as equal to the radius.
const BOUNDARY_SLACK: f64 = 1e-12;

impl Boundary {
    /// Range test for a distance against a radius.
    pub fn contains(self, distance: f64, radius: f64) -> bool {
        let slack = BOUNDARY_SLACK * radius.abs().max(1.0);
        if (distance - radius).abs() <= slack {
            return self == Boundary::Closed;
        }
        distance < radius
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn zero(d: usize) -> Self {
        LatticePoint(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sqr(&self) -> i64 {
        self.0.iter().map(|c| c * c).sum()
    }

    /// Euclidean length in physical units.
    pub fn length(&self, spacing: f64) -> f64 {
        (self.norm_sqr() as f64).sqrt() * spacing
    }
}

impl Add for &LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: &LatticePoint) -> LatticePoint {
        assert_eq!(self.dim(), rhs.dim(), "lattice dimension mismatch");
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &LatticePoint {
    type Output = LatticePoint;
    fn sub(self, rhs: &LatticePoint) -> LatticePoint {
        assert_eq!(self.dim(), rhs.dim(), "lattice dimension mismatch");
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// `n^d` lattice points, axis-major order, starting at `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    d: usize,
    n: usize,
    spacing: f64,
    origin: Vec<i64>,
}

impl SpatialGrid {
    pub fn new(d: usize, n: usize, spacing: f64) -> Result<Self> {
        Self::with_origin(d, n, spacing, vec![0; d])
    }

    /// `origin` is the lattice coordinate of point 0, per axis.
    pub fn with_origin(d: usize, n: usize, spacing: f64, origin: Vec<i64>) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidParameter {
                field: "grid.d",
                reason: format!("spatial dimension must be 1, 2 or 3, got {d}"),
            });
        }
        if n == 0 {
            return Err(Error::InvalidParameter {
                field: "grid.n",
                reason: "need at least one point per axis".into(),
            });
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidParameter {
                field: "grid.spacing",
                reason: format!("spacing must be positive, got {spacing}"),
            });
        }
        if origin.len() != d {
            return Err(Error::InvalidParameter {
                field: "grid.origin",
                reason: format!("expected {d} coordinates, found {}", origin.len()),
            });
        }
        Ok(Self { d, n, spacing, origin })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> &[i64] {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, mut k: usize) -> LatticePoint {
        debug_assert!(k < self.len());
        let mut coords = vec![0; self.d];
        for axis in (0..self.d).rev() {
            coords[axis] = self.origin[axis] + (k % self.n) as i64;
            k /= self.n;
        }
        LatticePoint(coords)
    }

    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        if p.dim() != self.d {
            return None;
        }
        let mut k = 0usize;
        for (axis, &c) in p.0.iter().enumerate() {
            let offset = c - self.origin[axis];
            if offset < 0 || offset >= self.n as i64 {
                return None;
            }
            k = k * self.n + offset as usize;
        }
        Some(k)
    }

    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }

    /// Physical coordinates of point `k`.
    pub fn coords(&self, k: usize) -> Vec<f64> {
        self.point(k).0.iter().map(|&c| c as f64 * self.spacing).collect()
    }

    /// Largest distance between two points of this grid.
    pub fn diameter(&self) -> f64 {
        ((self.d * (self.n - 1) * (self.n - 1)) as f64).sqrt() * self.spacing
    }

    /// Basis space with one vector per lattice point.
    pub fn space(&self, name: &str) -> Arc<HilbertSpace> {
        HilbertSpace::new(name, self.points().map(|p| p.to_string()).collect()).expect("lattice points are distinct")
    }

    /// Distance between two lattice points in physical units.
    pub fn distance(&self, a: &LatticePoint, b: &LatticePoint) -> f64 {
        (a - b).length(self.spacing)
    }
}

/// Grids that share a lattice: same dimension and spacing.
pub fn check_compatible(a: &SpatialGrid, b: &SpatialGrid) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidParameter {
            field: "grid_z.d",
            reason: format!("grids have different dimensions ({} vs {})", a.dim(), b.dim()),
        });
    }
    if a.spacing() != b.spacing() {
        return Err(Error::InvalidParameter {
            field: "grid_z.spacing",
            reason: format!("grids must share a spacing ({} vs {})", a.spacing(), b.spacing()),
        });
    }
    Ok(())
}
