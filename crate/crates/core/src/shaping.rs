//! Intermediate rewards for target stacking: change of overlap ratio and
//! change of distance-transform mass.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Raster, RasterError};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShapingError {
    #[error("target raster has no foreground cells")]
    EmptyTarget,
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Which shaping term is added to the task reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shaping {
    #[default]
    None,
    /// Sign of the change in overlap ratio (placed cells only).
    Overlap,
    /// Sign of the decrease in summed distance to the target (placed and active cells).
    Distance,
}

/// `|s ∩ g| / |g|`.
pub fn overlap_ratio(s: &Raster, g: &Raster) -> Result<f64, ShapingError> {
    let inter = s.intersection_count(g)?;
    let total = g.count();
    if total == 0 {
        return Err(ShapingError::EmptyTarget);
    }
    Ok(inter as f64 / total as f64)
}

fn sign_reward(delta: std::cmp::Ordering) -> i8 {
    match delta {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Equal => 0,
    }
}

/// +1 if the overlap ratio grew, -1 if it shrank, 0 otherwise.
pub fn overlap_reward(prev: &Raster, next: &Raster, g: &Raster) -> Result<i8, ShapingError> {
    // |g| is common to both ratios, so comparing intersection counts is exact
    if g.count() == 0 {
        return Err(ShapingError::EmptyTarget);
    }
    let before = prev.intersection_count(g)?;
    let after = next.intersection_count(g)?;
    Ok(sign_reward(after.cmp(&before)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Manhattan,
    Euclidean,
}

/// Per-cell distance to the nearest target foreground cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap<T> {
    width: usize,
    height: usize,
    metric: Metric,
    values: Vec<T>,
}

impl<T: Scalar> DistanceMap<T> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }
}

/// Exact distance transform of `g`'s foreground.
///
/// Manhattan distances come from a multi-source breadth-first search over
/// 4-neighbours. Euclidean distances use the separable lower-envelope
/// algorithm on squared integer distances (column pass, then row pass).
pub fn distance_transform<T: Scalar>(g: &Raster, metric: Metric) -> Result<DistanceMap<T>, ShapingError> {
    if g.count() == 0 {
        return Err(ShapingError::EmptyTarget);
    }
    let (w, h) = (g.width(), g.height());
    let values = match metric {
        Metric::Manhattan => manhattan(g).into_iter().map(|d| T::lit(d as f64)).collect(),
        Metric::Euclidean => squared_euclidean(g).into_iter().map(|d| T::lit(d as f64).sqrt()).collect(),
    };
    Ok(DistanceMap { width: w, height: h, metric, values })
}

fn manhattan(g: &Raster) -> Vec<u32> {
    let (w, h) = (g.width(), g.height());
    let mut dist = vec![u32::MAX; w * h];
    let mut queue = VecDeque::new();
    for (x, y) in g.foreground() {
        dist[y * w + x] = 0;
        queue.push_back((x, y));
    }
    while let Some((x, y)) = queue.pop_front() {
        let d = dist[y * w + x] + 1;
        let mut visit = |nx: usize, ny: usize| {
            let i = ny * w + nx;
            if dist[i] == u32::MAX {
                dist[i] = d;
                queue.push_back((nx, ny));
            }
        };
        if x > 0 {
            visit(x - 1, y);
        }
        if x + 1 < w {
            visit(x + 1, y);
        }
        if y > 0 {
            visit(x, y - 1);
        }
        if y + 1 < h {
            visit(x, y + 1);
        }
    }
    dist
}

const FAR: i64 = i64::MAX / 4;

fn squared_euclidean(g: &Raster) -> Vec<i64> {
    let (w, h) = (g.width(), g.height());
    let mut out = vec![FAR; w * h];
    let mut column = vec![0i64; h];
    let mut buf = vec![0i64; h.max(w)];
    for x in 0..w {
        for (y, c) in column.iter_mut().enumerate() {
            *c = if g.get(x, y) { 0 } else { FAR };
        }
        lower_envelope(&column, &mut buf[..h]);
        for y in 0..h {
            out[y * w + x] = buf[y];
        }
    }
    let mut row = vec![0i64; w];
    for y in 0..h {
        row.copy_from_slice(&out[y * w..(y + 1) * w]);
        lower_envelope(&row, &mut buf[..w]);
        out[y * w..(y + 1) * w].copy_from_slice(&buf[..w]);
    }
    out
}

/// `out[q] = min_p (q - p)^2 + f[p]` over the finite entries of `f`.
fn lower_envelope(f: &[i64], out: &mut [i64]) {
    let n = f.len();
    let mut sites: Vec<usize> = Vec::with_capacity(n);
    let mut bounds: Vec<f64> = Vec::with_capacity(n + 1);
    let key = |p: usize| f[p] + (p * p) as i64;
    for q in (0..n).filter(|&q| f[q] < FAR) {
        loop {
            match sites.last() {
                None => {
                    sites.push(q);
                    bounds.clear();
                    bounds.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&v) => {
                    let s = (key(q) - key(v)) as f64 / (2.0 * (q as f64 - v as f64));
                    if s <= *bounds.last().unwrap() {
                        sites.pop();
                        bounds.pop();
                        continue;
                    }
                    sites.push(q);
                    bounds.push(s);
                    break;
                }
            }
        }
    }
    if sites.is_empty() {
        out.iter_mut().for_each(|o| *o = FAR);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < sites.len() && bounds[k + 1] < q as f64 {
            k += 1;
        }
        let p = sites[k];
        let d = q as i64 - p as i64;
        *o = d * d + f[p];
    }
}

/// Sum of `D` over the foreground of `s`.
pub fn distance_sum<T: Scalar>(s: &Raster, map: &DistanceMap<T>) -> Result<T, ShapingError> {
    if s.width() != map.width || s.height() != map.height {
        return Err(RasterError::DimMismatch(s.width(), s.height(), map.width, map.height).into());
    }
    Ok(s.foreground().map(|(x, y)| map.get(x, y)).sum())
}

/// +1 if the summed distance shrank, -1 if it grew, 0 otherwise.
pub fn distance_reward<T: Scalar>(prev: &Raster, next: &Raster, map: &DistanceMap<T>) -> Result<i8, ShapingError> {
    let before = distance_sum(prev, map)?;
    let after = distance_sum(next, map)?;
    Ok(sign_reward(before.partial_cmp(&after).unwrap_or(std::cmp::Ordering::Equal)))
}
