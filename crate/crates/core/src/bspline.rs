//! One-dimensional uniform B-spline bases (clamped or periodic).
//!
//! Knots live in scaled units: knot `i` of an order-`n` basis on `cells` cells
//! sits at `i - (n-1)`, clamped to `[0, cells]` for open knot vectors. Basis
//! function `j` is supported on cells `j-(n-1) ..= j`, so a point in cell `c`
//! sees exactly the functions `c ..= c+n-1` (wrapped for periodic axes).

use crate::error::{Error, Result};

/// Largest supported spline order (degree + 1).
pub const MAX_ORDER: usize = 12;
/// Highest derivative order evaluated per axis.
pub const MAX_DERIV: usize = 2;

/// Values and derivatives of the `n` basis functions that do not vanish at a
/// point, together with the index of the first of them.
#[derive(Debug, Clone, Copy)]
pub struct AxisBasis {
    /// Unwrapped index of the first nonzero function (equals the cell index).
    pub first: usize,
    /// `ders[k][a]` is the `k`-th derivative of function `first + a`.
    pub ders: [[f64; MAX_ORDER]; MAX_DERIV + 1],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    lo: f64,
    width: f64,
    cells: usize,
    order: usize,
    periodic: bool,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, cells: usize, order: usize, periodic: bool) -> Result<Self> {
        if !(2..=MAX_ORDER).contains(&order) {
            return Err(Error::Config(format!(
                "spline order {order} outside supported range 2..={MAX_ORDER}"
            )));
        }
        if periodic && cells < order {
            return Err(Error::Config(format!(
                "periodic axis needs at least {order} cells for order {order}, got {cells}"
            )));
        }
        if cells == 0 || !(hi > lo) {
            return Err(Error::Config("degenerate axis".into()));
        }
        Ok(Self { lo, width: (hi - lo) / cells as f64, cells, order, periodic })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.width * self.cells as f64
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn dofs(&self) -> usize {
        if self.periodic {
            self.cells
        } else {
            self.cells + self.order - 1
        }
    }

    /// Global index of local function `a` for a point whose first function is `first`.
    #[inline]
    pub fn dof(&self, first: usize, a: usize) -> usize {
        if self.periodic {
            (first + a) % self.cells
        } else {
            first + a
        }
    }

    /// Cells in the support of function `j`, in increasing unwrapped order.
    pub fn support_cells(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.order as isize;
        let j = j as isize;
        let (start, end) = if self.periodic {
            (j - (n - 1), j)
        } else {
            ((j - (n - 1)).max(0), j.min(self.cells as isize - 1))
        };
        let cells = self.cells as isize;
        (start..=end).map(move |c| c.rem_euclid(cells) as usize)
    }

    #[inline]
    fn knot(&self, i: isize) -> f64 {
        let t = i - (self.order as isize - 1);
        if self.periodic {
            t as f64
        } else {
            t.clamp(0, self.cells as isize) as f64
        }
    }

    /// Cell containing `x` and the scaled coordinate `(x - lo)/width`.
    /// Points on an interior knot belong to the lower cell.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let cells = self.cells as f64;
        let mut u = (x - self.lo) / self.width;
        if !u.is_finite() {
            return None;
        }
        if self.periodic {
            u = u.rem_euclid(cells);
            let c = u.ceil() as isize - 1;
            if c < 0 {
                return Some((self.cells - 1, u + cells));
            }
            return Some(((c as usize).min(self.cells - 1), u));
        }
        let tol = 1e-10 * cells.max(1.0);
        if u < -tol || u > cells + tol {
            return None;
        }
        let u = u.clamp(0.0, cells);
        let c = (u.ceil() as isize - 1).clamp(0, self.cells as isize - 1) as usize;
        Some((c, u))
    }

    /// Nonzero basis values and derivatives up to order `nder` at `x`.
    pub fn eval(&self, x: f64, nder: usize) -> Option<AxisBasis> {
        let (cell, u) = self.locate(x)?;
        let mut out = AxisBasis { first: cell, ders: [[0.0; MAX_ORDER]; MAX_DERIV + 1] };
        self.ders_in_cell(cell, u, nder.min(MAX_DERIV), &mut out.ders);
        Some(out)
    }

    /// Cox–de Boor recursion with derivatives (Piegl & Tiller, A2.3) on the
    /// scaled knot vector; derivatives are rescaled to physical units.
    fn ders_in_cell(&self, cell: usize, u: f64, nder: usize, out: &mut [[f64; MAX_ORDER]; MAX_DERIV + 1]) {
        let p = self.order - 1;
        let span = (cell + p) as isize;
        let mut ndu = [[0.0f64; MAX_ORDER]; MAX_ORDER];
        let mut left = [0.0f64; MAX_ORDER];
        let mut right = [0.0f64; MAX_ORDER];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = u - self.knot(span + 1 - j as isize);
            right[j] = self.knot(span + j as isize) - u;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        for j in 0..=p {
            out[0][j] = ndu[j][p];
        }
        let nd = nder.min(p);
        let mut a = [[0.0f64; MAX_ORDER]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=nd {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                out[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut fac = p as f64;
        let mut scale = 1.0 / self.width;
        for k in 1..=nd {
            for v in out[k].iter_mut().take(p + 1) {
                *v *= fac * scale;
            }
            fac *= (p - k) as f64;
            scale /= self.width;
        }
        for row in out.iter_mut().skip(nd + 1) {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}
