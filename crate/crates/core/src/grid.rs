//! Uniform axis-aligned Cartesian grids.

use crate::error::{Error, Result};

/// A uniform box grid in `D` dimensions with per-axis cell counts and
/// periodicity flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianGrid<const D: usize> {
    lo: [f64; D],
    hi: [f64; D],
    cells: [usize; D],
    periodic: [bool; D],
}

impl<const D: usize> CartesianGrid<D> {
    pub fn new(lo: [f64; D], hi: [f64; D], cells: [usize; D], periodic: [bool; D]) -> Result<Self> {
        if D == 0 || D > 3 {
            return Err(Error::Config(format!("dimension {D} not in 1..=3")));
        }
        for k in 0..D {
            if !(hi[k] > lo[k]) || !lo[k].is_finite() || !hi[k].is_finite() {
                return Err(Error::Config(format!(
                    "axis {k}: upper bound {} must exceed lower bound {}",
                    hi[k], lo[k]
                )));
            }
            if cells[k] == 0 {
                return Err(Error::Config(format!("axis {k}: zero cells")));
            }
        }
        Ok(Self { lo, hi, cells, periodic })
    }

    /// Grid of the unit box `(0,1)^D` with `cells` cells per axis.
    pub fn unit(cells: usize, periodic: bool) -> Result<Self> {
        Self::new([0.0; D], [1.0; D], [cells; D], [periodic; D])
    }

    /// Grid of spacing `h` covering `[lo, hi]`. Fails unless `h` divides
    /// every axis length into an integer number of cells.
    pub fn with_spacing(lo: [f64; D], hi: [f64; D], h: f64, periodic: [bool; D]) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Config(format!("spacing {h} must be positive")));
        }
        let mut cells = [0usize; D];
        for k in 0..D {
            let len = hi[k] - lo[k];
            let count = (len / h).round();
            if count < 1.0 || ((count * h - len) / len).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "spacing {h} does not divide axis {k} of length {len}"
                )));
            }
            cells[k] = count as usize;
        }
        Self::new(lo, hi, cells, periodic)
    }

    pub fn lo(&self) -> [f64; D] {
        self.lo
    }

    pub fn hi(&self) -> [f64; D] {
        self.hi
    }

    pub fn cells(&self) -> [usize; D] {
        self.cells
    }

    pub fn periodic(&self) -> [bool; D] {
        self.periodic
    }

    pub fn width(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.cells[axis] as f64
    }

    pub fn widths(&self) -> [f64; D] {
        std::array::from_fn(|k| self.width(k))
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..D).map(|k| self.width(k)).product()
    }

    pub fn volume(&self) -> f64 {
        (0..D).map(|k| self.hi[k] - self.lo[k]).product()
    }

    /// Linear cell index, axis 0 varying fastest.
    pub fn cell_index(&self, multi: [usize; D]) -> usize {
        let mut idx = 0;
        for k in (0..D).rev() {
            idx = idx * self.cells[k] + multi[k];
        }
        idx
    }

    pub fn cell_multi_index(&self, mut idx: usize) -> [usize; D] {
        let mut multi = [0; D];
        for k in 0..D {
            multi[k] = idx % self.cells[k];
            idx /= self.cells[k];
        }
        multi
    }

    pub fn cell_lo(&self, multi: [usize; D]) -> [f64; D] {
        std::array::from_fn(|k| self.lo[k] + multi[k] as f64 * self.width(k))
    }

    pub fn cell_center(&self, multi: [usize; D]) -> [f64; D] {
        std::array::from_fn(|k| self.lo[k] + (multi[k] as f64 + 0.5) * self.width(k))
    }

    /// Whether `x` lies in the closed box, ignoring periodic axes.
    pub fn contains(&self, x: &[f64; D]) -> bool {
        (0..D).all(|k| self.periodic[k] || (x[k] >= self.lo[k] && x[k] <= self.hi[k]))
    }

    /// Wraps periodic coordinates into `[lo, hi)`.
    pub fn wrap(&self, x: &mut [f64; D]) {
        for k in 0..D {
            if self.periodic[k] {
                let len = self.hi[k] - self.lo[k];
                let mut t = (x[k] - self.lo[k]).rem_euclid(len);
                if t >= len {
                    t = 0.0;
                }
                x[k] = self.lo[k] + t;
            }
        }
    }

    /// Index of the cell containing `x` (half-open cells, last cell closed).
    pub fn locate(&self, x: &[f64; D]) -> Option<[usize; D]> {
        let mut multi = [0; D];
        for k in 0..D {
            let mut u = (x[k] - self.lo[k]) / self.width(k);
            if self.periodic[k] {
                u = u.rem_euclid(self.cells[k] as f64);
            } else if u < 0.0 || u > self.cells[k] as f64 {
                return None;
            }
            multi[k] = (u.floor() as usize).min(self.cells[k] - 1);
        }
        Some(multi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_index_roundtrip() {
        let g = CartesianGrid::<3>::new([0.0; 3], [1.0, 2.0, 3.0], [3, 4, 5], [false; 3]).unwrap();
        for idx in 0..g.cell_count() {
            assert_eq!(g.cell_index(g.cell_multi_index(idx)), idx);
        }
        assert_eq!(g.cell_count(), 60);
    }

    #[test]
    fn spacing_must_divide() {
        assert!(CartesianGrid::<2>::with_spacing([0.0; 2], [1.0; 2], 0.25, [false; 2]).is_ok());
        assert!(CartesianGrid::<2>::with_spacing([0.0; 2], [1.0; 2], 0.3, [false; 2]).is_err());
        let g = CartesianGrid::<2>::with_spacing([-2.0; 2], [2.0; 2], 0.005, [false; 2]).unwrap();
        assert_eq!(g.cells(), [800, 800]);
    }

    #[test]
    fn rejects_degenerate_axes() {
        assert!(CartesianGrid::<1>::new([1.0], [1.0], [4], [false]).is_err());
        assert!(CartesianGrid::<1>::new([0.0], [1.0], [0], [false]).is_err());
    }

    #[test]
    fn wrap_and_locate() {
        let g = CartesianGrid::<2>::unit(4, true).unwrap();
        let mut x = [1.1, -0.1];
        g.wrap(&mut x);
        assert!((x[0] - 0.1).abs() < 1e-15 && (x[1] - 0.9).abs() < 1e-15);
        assert_eq!(g.locate(&[0.3, 0.99]), Some([1, 3]));
        let c = CartesianGrid::<1>::unit(4, false).unwrap();
        assert_eq!(c.locate(&[1.0]), Some([3]));
        assert_eq!(c.locate(&[1.01]), None);
    }
}
