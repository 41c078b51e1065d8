//! Binary occupancy images, `x` rightward and `y` downward, row-major.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RasterError {
    #[error("raster dimensions differ: {0}x{1} vs {2}x{3}")]
    DimMismatch(usize, usize, usize, usize),
    #[error("malformed raster row {row}: {reason}")]
    Malformed { row: usize, reason: String },
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Raster {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl Raster {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, cells: vec![false; width * height] }
    }

    pub fn from_cells(width: usize, height: usize, cells: Vec<bool>) -> Self {
        assert_eq!(cells.len(), width * height, "cell count does not match {width}x{height}");
        Self { width, height, cells }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.cells[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn same_dims(&self, other: &Raster) -> Result<(), RasterError> {
        if self.width != other.width || self.height != other.height {
            return Err(RasterError::DimMismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }

    /// Number of cells set in both rasters.
    pub fn intersection_count(&self, other: &Raster) -> Result<usize, RasterError> {
        self.same_dims(other)?;
        Ok(self.cells.iter().zip(&other.cells).filter(|(a, b)| **a && **b).count())
    }

    /// Iterator over `(x, y)` of set cells.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.cells.iter().enumerate().filter(|(_, &c)| c).map(move |(i, _)| (i % w, i / w))
    }

    /// One string per row, `#` for set cells and `.` otherwise.
    pub fn to_rows(&self) -> Vec<String> {
        self.cells
            .chunks(self.width.max(1))
            .map(|row| row.iter().map(|&c| if c { '#' } else { '.' }).collect())
            .collect()
    }

    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self, RasterError> {
        let height = rows.len();
        let width = rows.first().map(|r| r.as_ref().chars().count()).unwrap_or(0);
        let mut cells = Vec::with_capacity(width * height);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.chars().count() != width {
                return Err(RasterError::Malformed { row: i, reason: format!("expected {width} cells") });
            }
            for c in row.chars() {
                match c {
                    '#' => cells.push(true),
                    '.' => cells.push(false),
                    other => return Err(RasterError::Malformed { row: i, reason: format!("unexpected {other:?}") }),
                }
            }
        }
        Ok(Self { width, height, cells })
    }
}

impl fmt::Debug for Raster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Raster {}x{}", self.width, self.height)?;
        for row in self.to_rows() {
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let mut r = Raster::new(4, 3);
        r.set(0, 0, true);
        r.set(3, 2, true);
        let rows = r.to_rows();
        assert_eq!(rows, vec!["#...", "....", "...#"]);
        assert_eq!(Raster::from_rows(&rows).unwrap(), r);
        assert_eq!(r.foreground().collect::<Vec<_>>(), vec![(0, 0), (3, 2)]);
    }

    #[test]
    fn malformed_rows_rejected() {
        assert!(Raster::from_rows(&["#.", "#"]).is_err());
        assert!(Raster::from_rows(&["#x"]).is_err());
    }

    #[test]
    fn intersection_requires_same_dims() {
        let a = Raster::new(2, 2);
        let b = Raster::new(3, 2);
        assert!(a.intersection_count(&b).is_err());
    }
}
