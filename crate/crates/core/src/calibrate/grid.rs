//! Coefficient sensitivity grids for the bilinear model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fused_correlation, FitPoint};
use crate::error::{Error, Result};
use crate::fusion::FusionEquation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefPair {
    AB,
    AC,
    BC,
}

impl CoefPair {
    pub const ALL: [CoefPair; 3] = [CoefPair::AB, CoefPair::AC, CoefPair::BC];

    /// Indices of the (row, column, fixed) coefficients within `[a, b, c]`.
    pub fn indices(self) -> (usize, usize, usize) {
        match self {
            CoefPair::AB => (0, 1, 2),
            CoefPair::AC => (0, 2, 1),
            CoefPair::BC => (1, 2, 0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CoefPair::AB => "a_b",
            CoefPair::AC => "a_c",
            CoefPair::BC => "b_c",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityGrid {
    pub pair: CoefPair,
    pub fixed_value: f64,
    pub row_values: Vec<f64>,
    pub col_values: Vec<f64>,
    /// `r[i][j]` for row value i and column value j; `None` where undefined.
    pub r: Vec<Vec<Option<f64>>>,
    pub max_cell: Option<(usize, usize)>,
    pub max_r: Option<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Pearson r of the bilinear model over a `rows × cols` grid spanning the
/// coefficient box, with the remaining coefficient held at `fixed_value`.
pub fn sensitivity_grid(
    points: &[FitPoint],
    pair: CoefPair,
    fixed_value: f64,
    rows: usize,
    cols: usize,
) -> Result<SensitivityGrid> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidParameter(format!(
            "sensitivity grid must be at least 2x2, got {rows}x{cols}"
        )));
    }
    let eq = FusionEquation::ConstrainedPolynomial;
    let bounds = eq.bounds();
    let (ri, ci, fi) = pair.indices();
    let row_values = linspace(bounds[ri][0], bounds[ri][1], rows);
    let col_values = linspace(bounds[ci][0], bounds[ci][1], cols);
    let r: Vec<Vec<Option<f64>>> = row_values
        .par_iter()
        .map(|&rv| {
            col_values
                .iter()
                .map(|&cv| {
                    let mut p = [0.0; 3];
                    p[ri] = rv;
                    p[ci] = cv;
                    p[fi] = fixed_value;
                    fused_correlation(eq, &p, points, None)
                })
                .collect()
        })
        .collect();
    let mut max_cell = None;
    let mut max_r: Option<f64> = None;
    for (i, row) in r.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if let Some(v) = v {
                if max_r.is_none_or(|m| *v > m) {
                    max_r = Some(*v);
                    max_cell = Some((i, j));
                }
            }
        }
    }
    Ok(SensitivityGrid {
        pair,
        fixed_value,
        row_values,
        col_values,
        r,
        max_cell,
        max_r,
    })
}

impl SensitivityGrid {
    /// The cell closest to the given (row, column) coefficient values.
    pub fn nearest_cell(&self, row_value: f64, col_value: f64) -> (usize, usize) {
        let nearest = |vals: &[f64], x: f64| {
            (0..vals.len())
                .min_by(|&i, &j| (vals[i] - x).abs().total_cmp(&(vals[j] - x).abs()))
                .expect("grid is non-empty")
        };
        (nearest(&self.row_values, row_value), nearest(&self.col_values, col_value))
    }

    /// Connected components (4-neighbourhood) of cells with r ≥ `threshold`.
    pub fn components_above(&self, threshold: f64) -> Vec<Vec<(usize, usize)>> {
        let (h, w) = (self.r.len(), self.r[0].len());
        let above = |i: usize, j: usize| self.r[i][j].is_some_and(|v| v >= threshold);
        let mut seen = vec![vec![false; w]; h];
        let mut comps = Vec::new();
        for i in 0..h {
            for j in 0..w {
                if seen[i][j] || !above(i, j) {
                    continue;
                }
                let mut comp = vec![];
                let mut stack = vec![(i, j)];
                seen[i][j] = true;
                while let Some((y, x)) = stack.pop() {
                    comp.push((y, x));
                    let mut nbrs = Vec::with_capacity(4);
                    if y > 0 {
                        nbrs.push((y - 1, x));
                    }
                    if y + 1 < h {
                        nbrs.push((y + 1, x));
                    }
                    if x > 0 {
                        nbrs.push((y, x - 1));
                    }
                    if x + 1 < w {
                        nbrs.push((y, x + 1));
                    }
                    for (ny, nx) in nbrs {
                        if !seen[ny][nx] && above(ny, nx) {
                            seen[ny][nx] = true;
                            stack.push((ny, nx));
                        }
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
        comps
    }

    /// Components of the region reaching `fraction` of the grid maximum.
    pub fn plateau(&self, fraction: f64) -> Vec<Vec<(usize, usize)>> {
        match self.max_r {
            Some(m) => self.components_above(fraction * m),
            None => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::fit::fit_fusion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planted() -> Vec<FitPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        (0..15)
            .map(|_| {
                let g: f64 = rng.gen_range(-1.5..1.5);
                let a: f64 = rng.gen_range(-1.5..1.5);
                FitPoint { g_hat: g, a_hat: a, y: 0.6 * g + 0.4 * a + 1.0 * g * a + rng.gen_range(-0.02..0.02) }
            })
            .collect()
    }

    #[test]
    fn shape_and_sentinel() {
        let g = sensitivity_grid(&planted(), CoefPair::AB, 0.0, 4, 7).unwrap();
        assert_eq!(g.r.len(), 4);
        assert!(g.r.iter().all(|row| row.len() == 7));
        assert_eq!(g.r[0][0], None);
        assert!(sensitivity_grid(&planted(), CoefPair::AB, 0.0, 1, 7).is_err());
    }

    #[test]
    fn consistent_with_fit() {
        let pts = planted();
        let fit = fit_fusion(FusionEquation::ConstrainedPolynomial, &pts, 40, 2).unwrap();
        let best = fit.model.fitted_corr.unwrap();
        let p = &fit.model.params;
        for pair in CoefPair::ALL {
            let (ri, ci, fi) = pair.indices();
            let grid = sensitivity_grid(&pts, pair, p[fi], 50, 50).unwrap();
            assert!(grid.max_r.unwrap() <= best + 1e-6);
            let (i, j) = grid.nearest_cell(p[ri], p[ci]);
            let at = grid.r[i][j].unwrap();
            assert!(best - at < 0.01, "{pair:?}: {at} vs {best}");
            let comps = grid.plateau(0.99);
            assert_eq!(comps.len(), 1, "{pair:?}");
            assert!(comps[0].contains(&(i, j)) || comps[0].contains(&grid.max_cell.unwrap()));
        }
    }

    #[test]
    fn flood_fill_counts_islands() {
        let r = vec![
            vec![Some(1.0), Some(0.0), Some(1.0)],
            vec![Some(1.0), None, Some(0.0)],
            vec![Some(0.0), Some(1.0), Some(1.0)],
        ];
        let g = SensitivityGrid {
            pair: CoefPair::AB,
            fixed_value: 0.0,
            row_values: vec![0.0, 1.0, 2.0],
            col_values: vec![0.0, 1.0, 2.0],
            r,
            max_cell: Some((0, 0)),
            max_r: Some(1.0),
        };
        let comps = g.plateau(0.99);
        assert_eq!(comps.len(), 3);
        assert_eq!(comps[0], vec![(0, 0), (1, 0)]);
    }
}
