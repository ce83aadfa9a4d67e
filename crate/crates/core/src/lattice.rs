//! Points and unit steps of the integer lattice Z^d.
//!
//! Directions are indexed `2j` for `+e_j` and `2j + 1` for `-e_j` (axes are
//! zero-based). That index order is the canonical "lexicographic by
//! direction" order used everywhere a deterministic ordering is required.

use std::fmt;

use crate::error::{Error, Result};

/// Largest supported lattice dimension. Direction sets fit in a `u16` mask.
pub const MAX_DIM: usize = 8;

/// A signed unit vector `±e_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Direction(u8);

impl Direction {
    pub fn positive(axis: usize) -> Self {
        debug_assert!(axis < MAX_DIM);
        Direction((2 * axis) as u8)
    }

    pub fn negative(axis: usize) -> Self {
        debug_assert!(axis < MAX_DIM);
        Direction((2 * axis + 1) as u8)
    }

    pub fn from_index(index: usize) -> Self {
        debug_assert!(index < 2 * MAX_DIM);
        Direction(index as u8)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn axis(self) -> usize {
        (self.0 >> 1) as usize
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    #[inline]
    pub fn sign(self) -> i64 {
        if self.is_positive() {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn opposite(self) -> Self {
        Direction(self.0 ^ 1)
    }

    #[inline]
    pub fn bit(self) -> u16 {
        1 << self.0
    }

    /// `e · v` for a real vector `v`.
    #[inline]
    pub fn dot(self, v: &[f64]) -> f64 {
        self.sign() as f64 * v[self.axis()]
    }

    /// All `2d` directions in canonical order.
    pub fn all(dim: usize) -> impl Iterator<Item = Direction> {
        (0..2 * dim).map(Direction::from_index)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.is_positive() { '+' } else { '-' };
        write!(f, "{}e{}", s, self.axis() + 1)
    }
}

/// A point of Z^d, `2 <= d <= MAX_DIM`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticePoint {
    coords: [i64; MAX_DIM],
    dim: u8,
}

impl LatticePoint {
    pub fn origin(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM, "dimension {dim} out of range");
        LatticePoint {
            coords: [0; MAX_DIM],
            dim: dim as u8,
        }
    }

    pub fn new(coords: &[i64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::Dimension(coords.len()));
        }
        let mut p = LatticePoint::origin(coords.len());
        p.coords[..coords.len()].copy_from_slice(coords);
        Ok(p)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim()]
    }

    /// First coordinate, the `e_1` level.
    #[inline]
    pub fn level(&self) -> i64 {
        self.coords[0]
    }

    #[inline]
    pub fn step(&self, dir: Direction) -> Self {
        let mut p = *self;
        p.coords[dir.axis()] += dir.sign();
        p
    }

    pub fn translate(&self, z: &LatticePoint) -> Self {
        let mut p = *self;
        for (a, b) in p.coords.iter_mut().zip(z.coords()) {
            *a += *b;
        }
        p
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.coords().iter().zip(v).map(|(&a, &b)| a as f64 * b).sum()
    }

    /// Componentwise maximum `x ∨ y`.
    pub fn join(&self, other: &LatticePoint) -> Self {
        let mut p = *self;
        for (a, b) in p.coords.iter_mut().zip(other.coords()) {
            *a = (*a).max(*b);
        }
        p
    }

    pub fn l1_distance(&self, other: &LatticePoint) -> i64 {
        self.coords().iter().zip(other.coords()).map(|(a, b)| (a - b).abs()).sum()
    }

    /// The direction `e` with `other = self + e`, if the points are adjacent.
    pub fn direction_to(&self, other: &LatticePoint) -> Option<Direction> {
        if self.dim != other.dim || self.l1_distance(other) != 1 {
            return None;
        }
        let axis = (0..self.dim())
            .find(|&j| self.coords[j] != other.coords[j])
            .expect("adjacent points differ on one axis");
        Some(if other.coords[axis] > self.coords[axis] {
            Direction::positive(axis)
        } else {
            Direction::negative(axis)
        })
    }
}

impl serde::Serialize for LatticePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.coords().iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_encoding() {
        let e2 = Direction::positive(1);
        assert_eq!(e2.index(), 2);
        assert_eq!(e2.axis(), 1);
        assert_eq!(e2.opposite(), Direction::negative(1));
        assert_eq!(e2.to_string(), "+e2");
        let names: Vec<String> = Direction::all(2).map(|d| d.to_string()).collect();
        assert_eq!(names, ["+e1", "-e1", "+e2", "-e2"]);
    }

    #[test]
    fn adjacency_and_join() {
        let x = LatticePoint::new(&[1, -2]).unwrap();
        let y = x.step(Direction::negative(1));
        assert_eq!(y.coords(), &[1, -3]);
        assert_eq!(x.direction_to(&y), Some(Direction::negative(1)));
        assert_eq!(x.direction_to(&x), None);
        assert_eq!(x.join(&y).coords(), &[1, -2]);
        let z = LatticePoint::new(&[3, 3]).unwrap();
        assert_eq!(x.direction_to(&z), None);
    }
}
