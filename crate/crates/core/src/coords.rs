//! Pixel coordinates. The whole crate uses the 1-based convention
//! x in 1..=w (column), y in 1..=h (row); pixel centers sit at integer
//! coordinates. Raveled indices are 0-based row-major:
//! `(y - 1) * w + (x - 1)`.

use crate::error::{Error, Result};

/// A 1-based integer pixel coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pixel {
    /// Row (1..=h). Ordered first so the derived `Ord` is row-major.
    pub y: u32,
    /// Column (1..=w).
    pub x: u32,
}

impl Pixel {
    pub fn new(x: u32, y: u32) -> Self {
        Pixel { y, x }
    }

    pub fn in_bounds(&self, w: u32, h: u32) -> bool {
        self.x >= 1 && self.x <= w && self.y >= 1 && self.y <= h
    }

    pub fn checked(self, w: u32, h: u32) -> Result<Self> {
        if self.in_bounds(w, h) {
            Ok(self)
        } else {
            Err(Error::OutOfBounds {
                context: format!("pixel ({}, {}) outside 1..={} x 1..={}", self.x, self.y, w, h),
            })
        }
    }

    /// 0-based row-major raveled index.
    pub fn ravel(&self, w: u32) -> usize {
        (self.y as usize - 1) * w as usize + (self.x as usize - 1)
    }

    pub fn unravel(index: usize, w: u32) -> Self {
        Pixel { x: (index % w as usize) as u32 + 1, y: (index / w as usize) as u32 + 1 }
    }

    /// In-bounds 4-neighbors (left, right, up, down).
    pub fn neighbors4(&self, w: u32, h: u32) -> impl Iterator<Item = Pixel> {
        let (x, y) = (self.x as i64, self.y as i64);
        [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]
            .into_iter()
            .filter(move |&(nx, ny)| nx >= 1 && nx <= w as i64 && ny >= 1 && ny <= h as i64)
            .map(|(nx, ny)| Pixel::new(nx as u32, ny as u32))
    }

    /// In-bounds 8-neighbors.
    pub fn neighbors8(&self, w: u32, h: u32) -> impl Iterator<Item = Pixel> {
        let (x, y) = (self.x as i64, self.y as i64);
        let mut out = Vec::with_capacity(8);
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 1 && nx <= w as i64 && ny >= 1 && ny <= h as i64 {
                    out.push(Pixel::new(nx as u32, ny as u32));
                }
            }
        }
        out.into_iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ravel_roundtrip() {
        let w = 7;
        for idx in 0..35 {
            assert_eq!(Pixel::unravel(idx, w).ravel(w), idx);
        }
    }

    #[test]
    fn ravel_is_row_major() {
        // (x=1, y=1) -> 0; (x=2, y=1) -> 1; (x=1, y=2) -> w.
        assert_eq!(Pixel::new(1, 1).ravel(5), 0);
        assert_eq!(Pixel::new(2, 1).ravel(5), 1);
        assert_eq!(Pixel::new(1, 2).ravel(5), 5);
    }

    #[test]
    fn corner_has_two_neighbors() {
        let n: Vec<_> = Pixel::new(1, 1).neighbors4(4, 4).collect();
        assert_eq!(n.len(), 2);
    }
}
