//! Node-sampled 2D fields and their zero level set by marching squares.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::CartesianGrid;
use crate::space::SplineFunction;

/// Values on the nodes of a uniform grid, axis 0 fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeField {
    pub lo: [f64; 2],
    pub spacing: [f64; 2],
    pub nodes: [usize; 2],
    pub values: Vec<f64>,
}

impl NodeField {
    pub fn from_fn(grid: &CartesianGrid<2>, f: impl Fn(&[f64; 2]) -> Result<f64>) -> Result<Self> {
        let nodes = [grid.cells()[0] + 1, grid.cells()[1] + 1];
        let spacing = grid.widths();
        let lo = grid.lo();
        let mut values = Vec::with_capacity(nodes[0] * nodes[1]);
        for j in 0..nodes[1] {
            for i in 0..nodes[0] {
                // clamp the last node onto the box to avoid rounding past `hi`
                let x = [
                    (lo[0] + i as f64 * spacing[0]).min(grid.hi()[0]),
                    (lo[1] + j as f64 * spacing[1]).min(grid.hi()[1]),
                ];
                values.push(f(&x)?);
            }
        }
        Ok(Self { lo, spacing, nodes, values })
    }

    /// Samples a spline on the nodes of its own grid.
    pub fn from_spline(f: &SplineFunction<2>) -> Result<Self> {
        Self::from_fn(f.space.grid(), |x| f.value(x))
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i + self.nodes[0] * j]
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.lo[0] + i as f64 * self.spacing[0], self.lo[1] + j as f64 * self.spacing[1]]
    }

    /// Corners of cell `(i, j)` counter-clockwise with their values.
    fn corners(&self, i: usize, j: usize) -> [([f64; 2], f64); 4] {
        [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)].map(|(a, b)| (self.point(a, b), self.value(a, b)))
    }

    /// Writes `x,y,value` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(["x", "y", "value"]).map_err(|e| Error::Io(e.to_string()))?;
        for j in 0..self.nodes[1] {
            for i in 0..self.nodes[0] {
                let p = self.point(i, j);
                w.write_record([p[0].to_string(), p[1].to_string(), self.value(i, j).to_string()])
                    .map_err(|e| Error::Io(e.to_string()))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn crossing(a: ([f64; 2], f64), b: ([f64; 2], f64)) -> [f64; 2] {
    let t = a.1 / (a.1 - b.1);
    [a.0[0] + t * (b.0[0] - a.0[0]), a.0[1] + t * (b.0[1] - a.0[1])]
}

/// Area of `{u > 0}` with `u` linearly interpolated along cell edges.
pub fn positive_area(field: &NodeField) -> f64 {
    let mut total = 0.0;
    for j in 0..field.nodes[1] - 1 {
        for i in 0..field.nodes[0] - 1 {
            let c = field.corners(i, j);
            let inside = c.iter().filter(|p| p.1 > 0.0).count();
            if inside == 0 {
                continue;
            }
            if inside == 4 {
                total += field.spacing[0] * field.spacing[1];
                continue;
            }
            // clip the square against u > 0
            let mut poly: Vec<[f64; 2]> = Vec::with_capacity(8);
            for k in 0..4 {
                let a = c[k];
                let b = c[(k + 1) % 4];
                if a.1 > 0.0 {
                    poly.push(a.0);
                }
                if (a.1 > 0.0) != (b.1 > 0.0) {
                    poly.push(crossing(a, b));
                }
            }
            let mut twice = 0.0;
            for k in 0..poly.len() {
                let p = poly[k];
                let q = poly[(k + 1) % poly.len()];
                twice += p[0] * q[1] - q[0] * p[1];
            }
            total += 0.5 * twice.abs();
        }
    }
    total
}

/// Zero-contour segments; saddle cells are resolved by the cell average.
pub fn zero_contour(field: &NodeField) -> Vec<[[f64; 2]; 2]> {
    let mut segs = Vec::new();
    for j in 0..field.nodes[1] - 1 {
        for i in 0..field.nodes[0] - 1 {
            let c = field.corners(i, j);
            let mut pts = Vec::with_capacity(4);
            for k in 0..4 {
                let a = c[k];
                let b = c[(k + 1) % 4];
                if (a.1 > 0.0) != (b.1 > 0.0) {
                    pts.push(crossing(a, b));
                }
            }
            match pts.len() {
                2 => segs.push([pts[0], pts[1]]),
                4 => {
                    let mean = c.iter().map(|p| p.1).sum::<f64>() / 4.0;
                    // crossing k sits on edge k' after corner k'; pair so the
                    // centre keeps the sign of the mean
                    if (mean > 0.0) == (c[0].1 > 0.0) {
                        segs.push([pts[0], pts[1]]);
                        segs.push([pts[2], pts[3]]);
                    } else {
                        segs.push([pts[3], pts[0]]);
                        segs.push([pts[1], pts[2]]);
                    }
                }
                _ => {}
            }
        }
    }
    segs
}

/// Writes contour segments as `x0,y0,x1,y1` rows.
pub fn write_segments_csv(segments: &[[[f64; 2]; 2]], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(["x0", "y0", "x1", "y1"]).map_err(|e| Error::Io(e.to_string()))?;
    for [a, b] in segments {
        w.write_record([a[0], a[1], b[0], b[1]].map(|v| v.to_string())).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Sign changes of `f` at `samples + 1` equispaced points on the segment `a`–`b`.
pub fn segment_crossings(a: [f64; 2], b: [f64; 2], samples: usize, f: impl Fn(&[f64; 2]) -> Result<f64>) -> Result<usize> {
    let mut count = 0;
    let mut prev = None;
    for s in 0..=samples {
        let t = s as f64 / samples as f64;
        let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        let pos = f(&x)? > 0.0;
        if prev.is_some_and(|p| p != pos) {
            count += 1;
        }
        prev = Some(pos);
    }
    Ok(count)
}

/// Number of sign changes of `u` along the grid row at height `y`,
/// restricted to `x ∈ [x_min, x_max]`.
pub fn row_crossings(field: &NodeField, y: f64, x_min: f64, x_max: f64) -> Result<usize> {
    let jf = (y - field.lo[1]) / field.spacing[1];
    let j = jf.round();
    if (jf - j).abs() > 1e-6 || j < 0.0 || j as usize >= field.nodes[1] {
        return Err(Error::Usage(format!("y = {y} is not a grid row")));
    }
    let j = j as usize;
    let mut count = 0;
    let mut prev: Option<bool> = None;
    for i in 0..field.nodes[0] {
        let x = field.point(i, j)[0];
        if x < x_min - 1e-12 || x > x_max + 1e-12 {
            continue;
        }
        let s = field.value(i, j) > 0.0;
        if let Some(p) = prev {
            if p != s {
                count += 1;
            }
        }
        prev = Some(s);
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(cells: usize, r: f64) -> NodeField {
        let g = CartesianGrid::<2>::new([-1.0; 2], [1.0; 2], [cells; 2], [false; 2]).unwrap();
        NodeField::from_fn(&g, |x| Ok(r - x[0].hypot(x[1]))).unwrap()
    }

    #[test]
    fn circle_area_converges() {
        let r = 0.5;
        let exact = std::f64::consts::PI * r * r;
        let e1 = (positive_area(&circle(40, r)) - exact).abs();
        let e2 = (positive_area(&circle(80, r)) - exact).abs();
        assert!(e2 < 2e-3 * exact && e2 < e1);
    }

    #[test]
    fn half_plane_area_is_exact() {
        let g = CartesianGrid::<2>::unit(7, false).unwrap();
        let f = NodeField::from_fn(&g, |x| Ok(0.3 - x[0] + 0.2 * x[1])).unwrap();
        // region x < 0.3 + 0.2 y on the unit square
        assert!((positive_area(&f) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn contour_segments_lie_on_circle() {
        let f = circle(40, 0.5);
        let segs = zero_contour(&f);
        assert!(segs.len() > 40);
        for s in &segs {
            for p in s {
                assert!((p[0].hypot(p[1]) - 0.5).abs() < 5e-3);
            }
        }
    }

    #[test]
    fn crossings_along_a_row() {
        let f = circle(40, 0.5);
        assert_eq!(row_crossings(&f, 0.0, -1.0, 1.0).unwrap(), 2);
        assert_eq!(row_crossings(&f, 0.0, 0.0, 1.0).unwrap(), 1);
        assert!(row_crossings(&f, 0.0123, -1.0, 1.0).is_err());
    }
}
