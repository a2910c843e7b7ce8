//! Pointwise 3x3 matrix fields.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::spectral::{GridSpec, RealField};

pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    grid: GridSpec,
    data: Vec<Mat3>,
}

impl MatrixField {
    pub fn constant(grid: GridSpec, m: Mat3) -> Self {
        Self {
            grid,
            data: vec![m; grid.len()],
        }
    }

    pub fn identity(grid: GridSpec, scale: f64) -> Self {
        Self::constant(grid, scale_mat(&IDENTITY, scale))
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut([f64; 3]) -> Mat3) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self { grid, data }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn at(&self, i: usize) -> &Mat3 {
        &self.data[i]
    }

    pub fn data(&self) -> &[Mat3] {
        &self.data
    }

    /// `self += w * s s^T` for a 3-component field `s`.
    pub fn add_outer(&mut self, s: &RealField, w: f64) {
        assert_eq!(s.grid(), self.grid);
        assert_eq!(s.components(), 3);
        let n = self.grid.len();
        let v = s.values();
        for (i, m) in self.data.iter_mut().enumerate() {
            let x = [v[i], v[n + i], v[2 * n + i]];
            for r in 0..3 {
                for c in 0..3 {
                    m[r][c] += w * x[r] * x[c];
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &MatrixField, w: f64) {
        assert_eq!(other.grid, self.grid);
        for (m, o) in self.data.iter_mut().zip(&other.data) {
            for r in 0..3 {
                for c in 0..3 {
                    m[r][c] += w * o[r][c];
                }
            }
        }
    }

    pub fn scale(&mut self, w: f64) {
        for m in &mut self.data {
            *m = scale_mat(m, w);
        }
    }

    /// The common value when the field is constant.
    pub fn as_constant(&self) -> Option<Mat3> {
        let first = self.data[0];
        self.data.iter().all(|m| *m == first).then_some(first)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.data
            .iter()
            .all(|m| (0..3).all(|r| (0..3).all(|c| (m[r][c] - m[c][r]).abs() <= tol)))
    }

    /// Smallest eigenvalue over the grid of the leading `dim x dim` block.
    pub fn min_eigenvalue(&self, dim: usize) -> f64 {
        self.data
            .iter()
            .map(|m| min_eigenvalue(m, dim))
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn scale_mat(m: &Mat3, w: f64) -> Mat3 {
    let mut out = *m;
    for row in &mut out {
        for x in row.iter_mut() {
            *x *= w;
        }
    }
    out
}

pub fn min_eigenvalue(m: &Mat3, dim: usize) -> f64 {
    match dim {
        1 => m[0][0],
        2 => {
            let (a, b, d) = (m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]);
            let mean = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            mean - rad
        }
        _ => {
            let mat = Matrix3::from_fn(|r, c| 0.5 * (m[r][c] + m[c][r]));
            SymmetricEigen::new(mat).eigenvalues.min()
        }
    }
}
