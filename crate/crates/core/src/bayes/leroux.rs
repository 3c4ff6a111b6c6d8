use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::spatial::SpatialGrid;

/// Sparse symmetric Leroux precision `Q(ρ) = ρ(diag(W1) − W) + (1 − ρ)I`,
/// stored row-wise as (diagonal, off-diagonal value, neighbor lists).
#[derive(Debug, Clone)]
pub struct LerouxPrecision {
    rho: f64,
    diag: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
}

/// Builds the Leroux precision for `grid`.
pub fn leroux_precision(rho: f64, grid: &SpatialGrid) -> Result<LerouxPrecision> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!("rho = {rho} outside [0, 1]")));
    }
    let n = grid.n_locations();
    Ok(LerouxPrecision {
        rho,
        diag: (0..n).map(|i| rho * grid.degree(i) as f64 + 1.0 - rho).collect(),
        neighbors: (0..n).map(|i| grid.neighbors(i).to_vec()).collect(),
    })
}

impl LerouxPrecision {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if self.neighbors[i].binary_search(&j).is_ok() {
            -self.rho
        } else {
            0.0
        }
    }

    pub fn nnz(&self) -> usize {
        self.diag.len() + self.neighbors.iter().map(Vec::len).sum::<usize>()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.diag[i] * x[i] - self.rho * self.neighbors[i].iter().map(|&j| x[j]).sum::<f64>())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.mul_vec(&vec![1.0; self.dim()])
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.get(i, j))
    }
}

/// Eigendecomposition of the graph Laplacian `L = diag(W1) − W = V Λ Vᵀ`.
///
/// Every Leroux precision shares the eigenvectors `V`, with eigenvalues
/// `ρλ_k + 1 − ρ`, so one decomposition serves all values of ρ.
#[derive(Debug, Clone)]
pub struct SpatialBasis {
    lambda: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl SpatialBasis {
    pub fn new(grid: &SpatialGrid) -> Self {
        let laplacian = leroux_precision(1.0, grid).expect("rho = 1 is valid").to_dense();
        let eig = SymmetricEigen::new(laplacian);
        // Laplacian is PSD; clamp round-off below zero.
        let lambda = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        SpatialBasis {
            lambda,
            vectors: eig.eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn laplacian_eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    /// Orthonormal eigenvectors as columns.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Eigenvalues of `Q(ρ)` in basis order.
    pub fn precision_eigenvalues(&self, rho: f64) -> Vec<f64> {
        self.lambda.iter().map(|l| rho * l + 1.0 - rho).collect()
    }

    /// `log det Q(ρ)`; `-inf` when singular.
    pub fn log_det(&self, rho: f64) -> f64 {
        self.precision_eigenvalues(rho).iter().map(|m| m.ln()).sum()
    }

    /// Coordinates in the eigenbasis: `Vᵀ x` for each column of `x`.
    pub fn to_spectral(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.vectors.tr_mul(x)
    }

    pub fn from_spectral(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.vectors * x
    }

    pub fn to_spectral_vec(&self, x: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(x);
        self.vectors.tr_mul(&v).as_slice().to_vec()
    }

    pub fn from_spectral_vec(&self, x: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(x);
        (&self.vectors * v).as_slice().to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rho_zero_is_identity() {
        let g = SpatialGrid::queen(3, 4).unwrap();
        let q = leroux_precision(0.0, &g).unwrap().to_dense();
        assert_eq!(q, DMatrix::identity(12, 12));
    }

    #[test]
    fn rho_one_is_laplacian() {
        let g = SpatialGrid::queen(3, 3).unwrap();
        let q = leroux_precision(1.0, &g).unwrap();
        let w = g.adjacency_matrix();
        for i in 0..9 {
            for j in 0..9 {
                let expected = if i == j { g.degree(i) as f64 } else { -w[i * 9 + j] };
                assert_eq!(q.get(i, j), expected);
            }
        }
    }

    #[test]
    fn two_cells_half() {
        let g = SpatialGrid::queen(1, 2).unwrap();
        let q = leroux_precision(0.5, &g).unwrap().to_dense();
        assert_eq!(q, DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]));
    }

    #[test]
    fn out_of_range_rho() {
        let g = SpatialGrid::queen(2, 2).unwrap();
        assert!(leroux_precision(-0.1, &g).is_err());
        assert!(leroux_precision(1.1, &g).is_err());
    }

    #[test]
    fn definiteness() {
        let g = SpatialGrid::queen(3, 3).unwrap();
        let b = SpatialBasis::new(&g);
        assert!(b.precision_eigenvalues(0.99).iter().all(|&m| m > 0.0));
        let at_one = b.precision_eigenvalues(1.0);
        assert!(at_one.iter().all(|&m| m >= 0.0));
        assert!(at_one.iter().any(|&m| m.abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn row_sums_equal_one_minus_rho(rows in 1usize..8, cols in 1usize..8, rho in 0.0f64..=1.0) {
            let g = SpatialGrid::queen(rows, cols).unwrap();
            let q = leroux_precision(rho, &g).unwrap();
            for s in q.row_sums() {
                prop_assert!((s - (1.0 - rho)).abs() <= 1e-12);
            }
        }

        #[test]
        fn spectral_route_matches_sparse(rows in 1usize..5, cols in 1usize..5, rho in 0.0f64..1.0) {
            let g = SpatialGrid::queen(rows, cols).unwrap();
            let n = g.n_locations();
            let q = leroux_precision(rho, &g).unwrap();
            let b = SpatialBasis::new(&g);
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
            let mu = b.precision_eigenvalues(rho);
            let xs = b.to_spectral_vec(&x);
            let scaled: Vec<f64> = xs.iter().zip(&mu).map(|(a, m)| a * m).collect();
            let via_basis = b.from_spectral_vec(&scaled);
            for (u, v) in via_basis.iter().zip(q.mul_vec(&x)) {
                prop_assert!((u - v).abs() < 1e-10);
            }
            let dense_det = q.to_dense().determinant().ln();
            prop_assert!((b.log_det(rho) - dense_det).abs() < 1e-8);
        }
    }
}
