//! Points of Z^d, shells `C_k = {x : |x|_inf = k}`, balls, face-interior
//! sets and nearest-neighbour iteration.

use serde::{Deserialize, Serialize};
use std::fmt;

pub const MAX_DIM: usize = 8;

/// A point of Z^d with `d <= MAX_DIM`. Unused coordinates are kept at zero so
/// that derived equality and hashing only see the live part.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    d: u8,
    c: [i32; MAX_DIM],
}

impl Point {
    pub fn origin(d: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&d), "dimension {d} out of range");
        Point {
            d: d as u8,
            c: [0; MAX_DIM],
        }
    }

    pub fn new(coords: &[i32]) -> Self {
        let mut p = Point::origin(coords.len());
        p.c[..coords.len()].copy_from_slice(coords);
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i32] {
        &self.c[..self.d as usize]
    }

    #[inline]
    pub fn coord(&self, i: usize) -> i32 {
        self.c[i]
    }

    /// `|x|_inf`, written x̄ in the docs.
    #[inline]
    pub fn norm(&self) -> u32 {
        self.coords().iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
    }

    /// Neighbour obtained by moving `sign` (±1) along axis `axis`.
    #[inline]
    pub fn step(&self, axis: usize, sign: i32) -> Self {
        let mut p = *self;
        p.c[axis] += sign;
        p
    }

    /// The 2d nearest neighbours in the fixed order `+e_1, -e_1, +e_2, ...`.
    pub fn neighbors(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.dim()).flat_map(move |i| [self.step(i, 1), self.step(i, -1)])
    }

    /// Number of coordinates attaining the sup norm.
    pub fn saturated(&self) -> usize {
        let k = self.norm();
        self.coords().iter().filter(|v| v.unsigned_abs() == k).count()
    }

    /// True when exactly one coordinate attains the norm, i.e. `x` lies in
    /// the interior of a face of its shell.
    pub fn is_face_interior(&self) -> bool {
        self.norm() > 0 && self.saturated() == 1
    }

    pub fn as_i64(&self) -> smallvec::SmallVec<[i64; MAX_DIM]> {
        self.coords().iter().map(|&v| v as i64).collect()
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords().iter().map(|v| v.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: Vec<i32> = Vec::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom(format!(
                "point dimension {} out of range 1..={MAX_DIM}",
                v.len()
            )));
        }
        Ok(Point::new(&v))
    }
}

/// `|C_k| = (2k+1)^d - (2k-1)^d` for `k >= 1`, and 1 for `k = 0`.
pub fn shell_size(d: usize, k: u32) -> u64 {
    if k == 0 {
        return 1;
    }
    let outer = (2 * k as u64 + 1).pow(d as u32);
    let inner = (2 * k as u64 - 1).pow(d as u32);
    outer - inner
}

/// `|B_k| = (2k+1)^d`.
pub fn ball_size(d: usize, k: u32) -> u64 {
    (2 * k as u64 + 1).pow(d as u32)
}

/// Face-interior count `2d (2k-1)^(d-1)` for `k >= 1`.
pub fn face_interior_size(d: usize, k: u32) -> u64 {
    if k == 0 {
        return 0;
    }
    2 * d as u64 * (2 * k as u64 - 1).pow(d as u32 - 1)
}

/// Iterator over the points of the box `[-k, k]^d` in lexicographic order.
pub struct BallPoints {
    d: usize,
    k: i32,
    cur: Option<Point>,
}

impl Iterator for BallPoints {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        let out = self.cur?;
        let mut nxt = out;
        let mut i = self.d;
        loop {
            if i == 0 {
                self.cur = None;
                break;
            }
            i -= 1;
            if nxt.c[i] < self.k {
                nxt.c[i] += 1;
                self.cur = Some(nxt);
                break;
            }
            nxt.c[i] = -self.k;
        }
        Some(out)
    }
}

pub fn ball(d: usize, k: u32) -> BallPoints {
    let mut start = Point::origin(d);
    for i in 0..d {
        start.c[i] = -(k as i32);
    }
    BallPoints {
        d,
        k: k as i32,
        cur: Some(start),
    }
}

/// Iterator over `C_k`. Points are produced without scanning the interior:
/// the first saturated axis `i` and its sign are fixed, axes before `i` range
/// over `(-k, k)` and axes after `i` over `[-k, k]`.
pub struct ShellPoints {
    d: usize,
    k: i32,
    axis: usize,
    sign: i32,
    cur: Option<Point>,
}

impl ShellPoints {
    fn first_for(d: usize, k: i32, axis: usize, sign: i32) -> Option<Point> {
        if k == 0 {
            return None;
        }
        let mut p = Point::origin(d);
        for j in 0..d {
            p.c[j] = match j.cmp(&axis) {
                std::cmp::Ordering::Less => -k + 1,
                std::cmp::Ordering::Equal => sign * k,
                std::cmp::Ordering::Greater => -k,
            };
        }
        Some(p)
    }

    fn advance_group(&mut self) {
        loop {
            if self.sign == 1 {
                self.sign = -1;
            } else {
                self.sign = 1;
                self.axis += 1;
            }
            if self.axis >= self.d {
                self.cur = None;
                return;
            }
            if let Some(p) = Self::first_for(self.d, self.k, self.axis, self.sign) {
                self.cur = Some(p);
                return;
            }
        }
    }
}

impl Iterator for ShellPoints {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        let out = self.cur?;
        let mut nxt = out;
        let mut j = self.d;
        loop {
            if j == 0 {
                self.advance_group();
                break;
            }
            j -= 1;
            if j == self.axis {
                continue;
            }
            let (hi, lo) = if j < self.axis {
                (self.k - 1, -self.k + 1)
            } else {
                (self.k, -self.k)
            };
            if nxt.c[j] < hi {
                nxt.c[j] += 1;
                self.cur = Some(nxt);
                break;
            }
            nxt.c[j] = lo;
        }
        Some(out)
    }
}

pub fn shell(d: usize, k: u32) -> Box<dyn Iterator<Item = Point>> {
    if k == 0 {
        return Box::new(std::iter::once(Point::origin(d)));
    }
    let k = k as i32;
    let cur = ShellPoints::first_for(d, k, 0, 1);
    Box::new(ShellPoints {
        d,
        k,
        axis: 0,
        sign: 1,
        cur,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn shell_and_ball_sizes() {
        assert_eq!(shell_size(2, 3), 24);
        assert_eq!(shell_size(1, 5), 2);
        assert_eq!(shell_size(3, 1), 26);
        assert_eq!(ball_size(2, 3), 49);
        assert_eq!(face_interior_size(2, 3), 20);
        assert_eq!(face_interior_size(3, 2), 54);
    }

    #[test]
    fn norm_and_faces() {
        let x = Point::new(&[3, -1]);
        assert_eq!(x.norm(), 3);
        assert!(x.is_face_interior());
        assert!(!Point::new(&[3, -3]).is_face_interior());
        assert!(!Point::origin(2).is_face_interior());
        let nb: Vec<Point> = x.neighbors().collect();
        assert_eq!(
            nb,
            vec![
                Point::new(&[4, -1]),
                Point::new(&[2, -1]),
                Point::new(&[3, 0]),
                Point::new(&[3, -2]),
            ]
        );
    }

    #[test]
    fn ball_enumerates_box() {
        let pts: Vec<Point> = ball(2, 1).collect();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], Point::new(&[-1, -1]));
        assert_eq!(pts[8], Point::new(&[1, 1]));
    }

    proptest! {
        #[test]
        fn shell_iterator_matches_filtered_ball(d in 1usize..=4, k in 0u32..=4) {
            let fast: Vec<Point> = shell(d, k).collect();
            let slow: HashSet<Point> = ball(d, k).filter(|p| p.norm() == k).collect();
            prop_assert_eq!(fast.len() as u64, shell_size(d, k));
            let fast_set: HashSet<Point> = fast.iter().copied().collect();
            prop_assert_eq!(fast_set.len(), fast.len());
            prop_assert_eq!(fast_set, slow);
            let faces = fast.iter().filter(|p| p.is_face_interior()).count() as u64;
            prop_assert_eq!(faces, face_interior_size(d, k));
        }

        #[test]
        fn neighbours_change_norm_by_at_most_one(coords in prop::collection::vec(-6i32..=6, 1..=4)) {
            let x = Point::new(&coords);
            let k = x.norm() as i64;
            for y in x.neighbors() {
                prop_assert!((y.norm() as i64 - k).abs() <= 1);
            }
            prop_assert_eq!(x.neighbors().count(), 2 * coords.len());
        }
    }
}
