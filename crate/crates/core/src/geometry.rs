//! Binary masks and the visual half of the consistency check.
//!
//! Masks are stored as packed row-major bit grids. Polygons coming out of a
//! segmentation model are rasterized with even-odd fill sampled at pixel
//! centers; fixture files may instead carry a column-major, zero-first
//! run-length encoding.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("mask dimensions must be at least 1x1, got {height}x{width}")]
    EmptyGrid { height: usize, width: usize },
    #[error("invalid polygon: {0}")]
    InvalidPolygon(&'static str),
    #[error("malformed rle: counts sum to {sum}, expected {expected}")]
    MalformedRle { sum: u64, expected: u64 },
    #[error("mask shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("at least two masks are required, got {0}")]
    InsufficientMasks(usize),
    #[error("iou threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
}

const WORD_BITS: usize = 64;

/// A binary segmentation mask over a `height × width` pixel grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitMask {
    height: usize,
    width: usize,
    words: Vec<u64>,
}

impl BitMask {
    /// An all-zero mask.
    pub fn zeros(height: usize, width: usize) -> Result<Self, GeometryError> {
        if height == 0 || width == 0 {
            return Err(GeometryError::EmptyGrid { height, width });
        }
        let n = height * width;
        Ok(Self {
            height,
            width,
            words: vec![0; n.div_ceil(WORD_BITS)],
        })
    }

    /// Build a mask by evaluating `f(row, col)` for every pixel.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, GeometryError> {
        let mut mask = Self::zeros(height, width)?;
        for r in 0..height {
            for c in 0..width {
                if f(r, c) {
                    mask.set(r, c, true);
                }
            }
        }
        Ok(mask)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// # Panics
    /// If `(row, col)` lies outside the grid.
    pub fn get(&self, row: usize, col: usize) -> bool {
        assert!(row < self.height && col < self.width, "pixel out of range");
        let i = row * self.width + col;
        self.words[i / WORD_BITS] >> (i % WORD_BITS) & 1 == 1
    }

    /// # Panics
    /// If `(row, col)` lies outside the grid.
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        assert!(row < self.height && col < self.width, "pixel out of range");
        let i = row * self.width + col;
        let bit = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= bit;
        } else {
            self.words[i / WORD_BITS] &= !bit;
        }
    }

    /// Number of set pixels.
    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Set pixels as `(row, col)` pairs in row-major order.
    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height * self.width)
            .filter(move |&i| self.words[i / WORD_BITS] >> (i % WORD_BITS) & 1 == 1)
            .map(move |i| (i / self.width, i % self.width))
    }

    fn check_shape(&self, other: &Self) -> Result<(), GeometryError> {
        if self.shape() != other.shape() {
            return Err(GeometryError::ShapeMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }
}

/// A closed polygon in continuous pixel coordinates, `(x, y)` with x along
/// columns and y along rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Polygon {
    vertices: Vec<(f64, f64)>,
}

impl Polygon {
    /// Requires at least three finite vertices that are not all collinear.
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidPolygon("fewer than 3 vertices"));
        }
        if vertices
            .iter()
            .any(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(GeometryError::InvalidPolygon("non-finite coordinate"));
        }
        let (x0, y0) = vertices[0];
        let collinear = vertices.windows(2).all(|w| {
            let (ax, ay) = (w[0].0 - x0, w[0].1 - y0);
            let (bx, by) = (w[1].0 - x0, w[1].1 - y0);
            ax * by - ay * bx == 0.0
        });
        if collinear {
            return Err(GeometryError::InvalidPolygon("zero-area polygon"));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }
}

impl TryFrom<Vec<(f64, f64)>> for Polygon {
    type Error = GeometryError;

    fn try_from(vertices: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Self::new(vertices)
    }
}

impl From<Polygon> for Vec<(f64, f64)> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

/// Rasterize with even-odd fill: pixel `(r, c)` is set iff its center
/// `(c + 0.5, r + 0.5)` lies inside the polygon. Anything outside the grid
/// is clipped.
pub fn rasterize_polygon(
    poly: &Polygon,
    height: usize,
    width: usize,
) -> Result<BitMask, GeometryError> {
    let mut mask = BitMask::zeros(height, width)?;
    let mut crossings: Vec<f64> = Vec::new();
    for r in 0..height {
        let py = r as f64 + 0.5;
        crossings.clear();
        for ((x0, y0), (x1, y1)) in poly.edges() {
            // half-open in y so shared vertices are counted once
            if (y0 > py) != (y1 > py) {
                crossings.push(x0 + (py - y0) * (x1 - x0) / (y1 - y0));
            }
        }
        crossings.sort_by(f64::total_cmp);
        // inside iff an odd number of crossings lie strictly right of the center,
        // i.e. crossings[2j] <= center < crossings[2j + 1]
        for span in crossings.chunks_exact(2) {
            let (xa, xb) = (span[0], span[1]);
            let lo = libm::floor(xa - 0.5).max(0.0) as usize;
            let hi = ((libm::ceil(xb - 0.5) + 1.0).max(0.0) as usize).min(width);
            for c in lo..hi {
                let px = c as f64 + 0.5;
                if xa <= px && px < xb {
                    mask.set(r, c, true);
                }
            }
        }
    }
    Ok(mask)
}

/// Column-major run-length encoding, runs alternating 0,1,0,… starting with zeros.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub height: usize,
    pub width: usize,
    pub counts: Vec<u64>,
}

impl RleMask {
    pub fn encode(mask: &BitMask) -> Self {
        let (h, w) = mask.shape();
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u64;
        for c in 0..w {
            for r in 0..h {
                let v = mask.get(r, c);
                if v != current {
                    counts.push(run);
                    run = 0;
                    current = v;
                }
                run += 1;
            }
        }
        counts.push(run);
        Self {
            height: h,
            width: w,
            counts,
        }
    }

    /// Total number of pixels covered by the runs.
    pub fn total(&self) -> u64 {
        self.counts
            .iter()
            .fold(0u64, |acc, &c| acc.saturating_add(c))
    }
}

pub fn decode_rle(rle: &RleMask) -> Result<BitMask, GeometryError> {
    let mut mask = BitMask::zeros(rle.height, rle.width)?;
    let expected = (rle.height as u64) * (rle.width as u64);
    let sum = rle.total();
    if sum != expected {
        return Err(GeometryError::MalformedRle { sum, expected });
    }
    let h = rle.height;
    let mut pos = 0usize;
    for (i, &run) in rle.counts.iter().enumerate() {
        let run = run as usize;
        if i % 2 == 1 {
            for p in pos..pos + run {
                mask.set(p % h, p / h, true);
            }
        }
        pos += run;
    }
    Ok(mask)
}

/// Raw intersection and union pixel counts of two masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overlap {
    pub intersection: u64,
    pub union: u64,
}

impl Overlap {
    /// `intersection / union`; two empty masks agree (1.0).
    pub fn ratio(&self) -> f64 {
        if self.union == 0 {
            1.0
        } else {
            self.intersection as f64 / self.union as f64
        }
    }
}

pub fn overlap(a: &BitMask, b: &BitMask) -> Result<Overlap, GeometryError> {
    a.check_shape(b)?;
    let (mut intersection, mut union) = (0u64, 0u64);
    for (x, y) in a.words.iter().zip(&b.words) {
        intersection += u64::from((x & y).count_ones());
        union += u64::from((x | y).count_ones());
    }
    Ok(Overlap {
        intersection,
        union,
    })
}

/// Intersection-over-union. Both empty gives 1.0, exactly one empty gives 0.0.
pub fn iou(a: &BitMask, b: &BitMask) -> Result<f64, GeometryError> {
    overlap(a, b).map(|o| o.ratio())
}

fn check_same_shape(masks: &[BitMask]) -> Result<(), GeometryError> {
    if let Some(first) = masks.first() {
        for m in &masks[1..] {
            first.check_shape(m)?;
        }
    }
    Ok(())
}

/// Symmetric pairwise IoU matrix with unit diagonal.
pub fn iou_matrix(masks: &[BitMask]) -> Result<Vec<Vec<f64>>, GeometryError> {
    check_same_shape(masks)?;
    let n = masks.len();
    let mut m = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = iou(&masks[i], &masks[j])?;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(m)
}

pub(crate) fn min_off_diagonal(m: &[Vec<f64>]) -> Option<f64> {
    let n = m.len();
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| m[i][j])
        .reduce(f64::min)
}

pub fn min_pairwise_iou(masks: &[BitMask]) -> Result<f64, GeometryError> {
    if masks.len() < 2 {
        return Err(GeometryError::InsufficientMasks(masks.len()));
    }
    let m = iou_matrix(masks)?;
    Ok(min_off_diagonal(&m).expect("at least one pair"))
}

pub(crate) fn check_tau_iou(tau_iou: f64) -> Result<(), GeometryError> {
    if !(0.0..=1.0).contains(&tau_iou) {
        return Err(GeometryError::InvalidThreshold(tau_iou));
    }
    Ok(())
}

/// `C_V`: every pair of masks overlaps by at least `tau_iou` (inclusive).
pub fn visual_agreement(masks: &[BitMask], tau_iou: f64) -> Result<bool, GeometryError> {
    check_tau_iou(tau_iou)?;
    Ok(min_pairwise_iou(masks)? >= tau_iou)
}
