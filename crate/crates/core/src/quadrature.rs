//! Gauss–Legendre rules and composite cell quadrature.

use crate::grid::CartesianGrid;

/// Gauss–Legendre rule with `q` points on the unit interval `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(q: usize) -> Self {
        assert!(q >= 1, "a Gauss rule needs at least one point");
        let mut nodes = vec![0.0; q];
        let mut weights = vec![0.0; q];
        let qf = q as f64;
        for i in 0..(q + 1) / 2 {
            // Newton iteration on P_q starting from the Tricomi estimate
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(q, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(q, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = 0.5 * (1.0 - x);
            nodes[q - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[q - 1 - i] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Legendre polynomial `P_q(x)` and its derivative.
fn legendre(q: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if q == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=q {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = q as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor Gauss nodes and weights for one grid cell, cached in reference
/// coordinates and mapped on demand.
#[derive(Debug, Clone)]
pub struct CellQuadrature<const D: usize> {
    rule: GaussRule,
    widths: [f64; D],
}

impl<const D: usize> CellQuadrature<D> {
    pub fn new(grid: &CartesianGrid<D>, q: usize) -> Self {
        Self { rule: GaussRule::new(q), widths: grid.widths() }
    }

    pub fn order(&self) -> usize {
        self.rule.len()
    }

    pub fn points_per_cell(&self) -> usize {
        self.rule.len().pow(D as u32)
    }

    /// Calls `f(x, weight)` for each node of the cell with lower corner `lo`.
    pub fn for_each(&self, lo: [f64; D], mut f: impl FnMut(&[f64; D], f64)) {
        let q = self.rule.len();
        let mut idx = [0usize; D];
        for _ in 0..self.points_per_cell() {
            let mut x = [0.0; D];
            let mut w = 1.0;
            for k in 0..D {
                x[k] = lo[k] + self.rule.nodes[idx[k]] * self.widths[k];
                w *= self.rule.weights[idx[k]] * self.widths[k];
            }
            f(&x, w);
            for k in 0..D {
                idx[k] += 1;
                if idx[k] < q {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

/// Sum in a fixed pairwise tree order, independent of how the terms were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        len => {
            let (a, b) = values.split_at(len / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_positive_and_sum_to_one() {
        for q in 1..=12 {
            let r = GaussRule::new(q);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn exact_for_degree_two_q_minus_one() {
        for q in 1..=10 {
            let r = GaussRule::new(q);
            for deg in 0..2 * q {
                let approx: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!((approx - exact).abs() < 1e-14, "q={q} deg={deg}");
            }
        }
    }

    #[test]
    fn cell_weights_sum_to_cell_volume() {
        let g = CartesianGrid::<3>::new([0.0; 3], [1.0, 2.0, 0.5], [4, 4, 4], [false; 3]).unwrap();
        let cq = CellQuadrature::new(&g, 3);
        let mut sum = 0.0;
        cq.for_each(g.cell_lo([1, 2, 3]), |_, w| sum += w);
        assert!((sum - g.cell_volume()).abs() < 1e-15);
    }

    #[test]
    fn pairwise_sum_matches_naive_for_small_sets() {
        let v: Vec<f64> = (0..37).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&v), v.iter().sum::<f64>());
    }
}
