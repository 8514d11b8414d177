//! Boxes, box partitions, cell indices and coordinate projections.
//!
//! Cells are addressed by half-open intervals `[cut_k, cut_{k+1})`, except the
//! last cell of every dimension which is closed so that the partition covers
//! its closed domain exactly.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension {dim}: lower bound {lo} exceeds upper bound {hi}")]
    InvertedBounds { dim: usize, lo: f64, hi: f64 },
    #[error("dimension {dim}: cell count must be positive")]
    ZeroCount { dim: usize },
    #[error("dimension {dim}: cuts must be strictly increasing and span the domain")]
    BadCuts { dim: usize },
    #[error("point coordinate {value} outside [{lo}, {hi}] in dimension {dim}")]
    PointOutside { dim: usize, value: f64, lo: f64, hi: f64 },
    #[error("dimension {dim}: index {index} out of range (count {count})")]
    IndexOutOfRange { dim: usize, index: usize, count: usize },
    #[error("rectangle lies outside the domain in dimension {dim}")]
    OutOfDomain { dim: usize },
    #[error("projection dimension {dim} invalid for a space of dimension {space}")]
    BadProjection { dim: usize, space: usize },
}

/// Closed axis-aligned hyper-rectangle `[lo_1, hi_1] × … × [lo_d, hi_d]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Rect {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for (dim, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if l.is_nan() || h.is_nan() || l > h {
                return Err(GeometryError::InvertedBounds { dim, lo: l, hi: h });
            }
        }
        Ok(Rect { lo, hi })
    }

    /// Degenerate rectangle containing one point.
    pub fn point(p: &[f64]) -> Self {
        Rect {
            lo: p.to_vec(),
            hi: p.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (h - l)).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| l <= x && x <= h)
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }

    /// Keeps only the listed dimensions, in the listed order.
    pub fn project(&self, dims: &[usize]) -> Rect {
        Rect {
            lo: dims.iter().map(|&d| self.lo[d]).collect(),
            hi: dims.iter().map(|&d| self.hi[d]).collect(),
        }
    }
}

/// Per-dimension grid of intervals covering a [`Rect`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxPartition {
    domain: Rect,
    cuts: Vec<Vec<f64>>,
    uniform: Vec<bool>,
}

impl BoxPartition {
    /// Equally spaced cells; `counts[i]` cells along dimension `i`.
    pub fn uniform(domain: Rect, counts: &[usize]) -> Result<Self, GeometryError> {
        if counts.len() != domain.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: domain.dim(),
                got: counts.len(),
            });
        }
        let mut cuts = Vec::with_capacity(counts.len());
        for (dim, &count) in counts.iter().enumerate() {
            if count == 0 {
                return Err(GeometryError::ZeroCount { dim });
            }
            let (lo, hi) = (domain.lo[dim], domain.hi[dim]);
            if count > 1 && lo >= hi {
                return Err(GeometryError::BadCuts { dim });
            }
            let width = (hi - lo) / count as f64;
            let mut c: Vec<f64> = (0..count).map(|k| lo + k as f64 * width).collect();
            c.push(hi);
            cuts.push(c);
        }
        Ok(BoxPartition {
            uniform: vec![true; counts.len()],
            domain,
            cuts,
        })
    }

    /// Cells bounded by explicit cut lists; each list must start at the
    /// domain's lower bound, end at its upper bound and increase strictly.
    pub fn from_cuts(cuts: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        let mut lo = Vec::with_capacity(cuts.len());
        let mut hi = Vec::with_capacity(cuts.len());
        for (dim, c) in cuts.iter().enumerate() {
            if c.len() < 2 {
                return Err(GeometryError::ZeroCount { dim });
            }
            if c.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(GeometryError::BadCuts { dim });
            }
            lo.push(c[0]);
            hi.push(c[c.len() - 1]);
        }
        let domain = Rect::new(lo, hi)?;
        Ok(BoxPartition {
            uniform: vec![false; cuts.len()],
            domain,
            cuts,
        })
    }

    pub fn dim(&self) -> usize {
        self.cuts.len()
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    pub fn cuts(&self, dim: usize) -> &[f64] {
        &self.cuts[dim]
    }

    pub fn count(&self, dim: usize) -> usize {
        self.cuts[dim].len() - 1
    }

    pub fn counts(&self) -> Vec<usize> {
        (0..self.dim()).map(|d| self.count(d)).collect()
    }

    /// Total number of cells (saturating).
    pub fn len(&self) -> usize {
        (0..self.dim()).fold(1usize, |acc, d| acc.saturating_mul(self.count(d)))
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell of a coordinate under the half-open rule, without range checks:
    /// values below the domain map to 0 and values above to the last cell.
    pub fn locate(&self, dim: usize, value: f64) -> usize {
        let cuts = &self.cuts[dim];
        let last = cuts.len() - 2;
        if value <= cuts[0] {
            return 0;
        }
        if value >= cuts[last + 1] {
            return last;
        }
        if self.uniform[dim] {
            let width = (cuts[last + 1] - cuts[0]) / (last + 1) as f64;
            let mut k = (((value - cuts[0]) / width).floor() as usize).min(last);
            // floor arithmetic can be off by one next to a cut
            while k > 0 && value < cuts[k] {
                k -= 1;
            }
            while k < last && value >= cuts[k + 1] {
                k += 1;
            }
            k
        } else {
            (cuts.partition_point(|&c| c <= value) - 1).min(last)
        }
    }

    pub fn index_of(&self, point: &[f64]) -> Result<Vec<usize>, GeometryError> {
        self.check_dim(point.len())?;
        point
            .iter()
            .enumerate()
            .map(|(dim, &v)| {
                let (lo, hi) = (self.domain.lo[dim], self.domain.hi[dim]);
                if v.is_nan() || v < lo || v > hi {
                    Err(GeometryError::PointOutside { dim, value: v, lo, hi })
                } else {
                    Ok(self.locate(dim, v))
                }
            })
            .collect()
    }

    pub fn box_of(&self, idx: &[usize]) -> Result<Rect, GeometryError> {
        self.check_dim(idx.len())?;
        let mut lo = Vec::with_capacity(idx.len());
        let mut hi = Vec::with_capacity(idx.len());
        for (dim, &k) in idx.iter().enumerate() {
            self.check_index(dim, k)?;
            lo.push(self.cuts[dim][k]);
            hi.push(self.cuts[dim][k + 1]);
        }
        Ok(Rect { lo, hi })
    }

    /// Interval `[lo, hi]` of cell `k` along one dimension.
    #[inline]
    pub fn cell_bounds(&self, dim: usize, k: usize) -> (f64, f64) {
        (self.cuts[dim][k], self.cuts[dim][k + 1])
    }

    /// Inclusive index range of cells meeting `[lo, hi]` along one dimension,
    /// clamped to the domain. `None` if the interval misses the domain.
    pub fn intersecting_1d(&self, dim: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let (dlo, dhi) = (self.domain.lo[dim], self.domain.hi[dim]);
        if hi < dlo || lo > dhi || lo.is_nan() || hi.is_nan() {
            return None;
        }
        Some((self.locate(dim, lo), self.locate(dim, hi)))
    }

    /// Like [`intersecting_1d`](Self::intersecting_1d), but a cell touched
    /// only at its lower cut by the upper end of a nondegenerate interval is
    /// left out.
    pub fn interior_1d(&self, dim: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let (a, mut b) = self.intersecting_1d(dim, lo, hi)?;
        if b > a && hi > lo && hi <= self.cuts[dim][b] {
            b -= 1;
        }
        Some((a, b))
    }

    /// All cells whose half-open region meets the closed rectangle, as one
    /// inclusive index range per dimension.
    pub fn cells_intersecting(&self, rect: &Rect) -> Result<CellRange, GeometryError> {
        self.check_dim(rect.dim())?;
        let ranges = (0..self.dim())
            .map(|dim| {
                self.intersecting_1d(dim, rect.lo[dim], rect.hi[dim])
                    .map(|(a, b)| a..=b)
                    .ok_or(GeometryError::OutOfDomain { dim })
            })
            .collect::<Result<_, _>>()?;
        Ok(CellRange { ranges })
    }

    pub fn project(&self, dims: &[usize]) -> Result<BoxPartition, GeometryError> {
        if let Some(&dim) = dims.iter().find(|&&d| d >= self.dim()) {
            return Err(GeometryError::BadProjection {
                dim,
                space: self.dim(),
            });
        }
        Ok(BoxPartition {
            domain: self.domain.project(dims),
            cuts: dims.iter().map(|&d| self.cuts[d].clone()).collect(),
            uniform: dims.iter().map(|&d| self.uniform[d]).collect(),
        })
    }

    /// Row-major linear index (last dimension fastest).
    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .enumerate()
            .fold(0, |acc, (d, &k)| acc * self.count(d) + k)
    }

    pub fn unravel(&self, mut linear: usize, out: &mut [usize]) {
        for d in (0..self.dim()).rev() {
            let c = self.count(d);
            out[d] = linear % c;
            linear /= c;
        }
    }

    fn check_dim(&self, got: usize) -> Result<(), GeometryError> {
        if got != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    fn check_index(&self, dim: usize, index: usize) -> Result<(), GeometryError> {
        let count = self.count(dim);
        if index >= count {
            return Err(GeometryError::IndexOutOfRange { dim, index, count });
        }
        Ok(())
    }
}

/// Cartesian product of inclusive index ranges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellRange {
    pub ranges: Vec<RangeInclusive<usize>>,
}

impl CellRange {
    pub fn len(&self) -> usize {
        self.ranges
            .iter()
            .map(|r| r.end() + 1 - r.start())
            .product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, idx: &[usize]) -> bool {
        idx.len() == self.ranges.len() && self.ranges.iter().zip(idx).all(|(r, k)| r.contains(k))
    }

    /// Index vectors in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let total = if self.ranges.is_empty() { 1 } else { self.len() };
        (0..total).map(move |mut linear| {
            let mut out = vec![0; self.ranges.len()];
            for (d, r) in self.ranges.iter().enumerate().rev() {
                let width = r.end() + 1 - r.start();
                out[d] = r.start() + linear % width;
                linear /= width;
            }
            out
        })
    }
}

/// Selection of the state and input dimensions one coordinate update reads.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Projection {
    state_dims: Vec<usize>,
    input_dims: Vec<usize>,
}

impl Projection {
    pub fn new(
        state_dims: Vec<usize>,
        input_dims: Vec<usize>,
        n: usize,
        m: usize,
    ) -> Result<Self, GeometryError> {
        for (dims, space) in [(&state_dims, n), (&input_dims, m)] {
            if let Some(&dim) = dims.iter().find(|&&d| d >= space) {
                return Err(GeometryError::BadProjection { dim, space });
            }
            if let Some(w) = dims.windows(2).find(|w| w[0] >= w[1]) {
                return Err(GeometryError::BadProjection { dim: w[1], space });
            }
        }
        Ok(Projection {
            state_dims,
            input_dims,
        })
    }

    pub fn identity(n: usize, m: usize) -> Self {
        Projection {
            state_dims: (0..n).collect(),
            input_dims: (0..m).collect(),
        }
    }

    pub fn state_dims(&self) -> &[usize] {
        &self.state_dims
    }

    pub fn input_dims(&self) -> &[usize] {
        &self.input_dims
    }

    pub fn project_state_index(&self, idx: &[usize]) -> Vec<usize> {
        self.state_dims.iter().map(|&d| idx[d]).collect()
    }

    pub fn project_input_index(&self, idx: &[usize]) -> Vec<usize> {
        self.input_dims.iter().map(|&d| idx[d]).collect()
    }

    pub fn project_state_point(&self, x: &[f64]) -> Vec<f64> {
        self.state_dims.iter().map(|&d| x[d]).collect()
    }
}
