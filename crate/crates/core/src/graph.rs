//! Directed weighted communication topology.
//!
//! Agent `i` receives data from agent `j` iff `a_ij > 0`. The in-neighbor set of
//! `i` is `{ j : a_ij > 0 }`, always iterated in ascending index order.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("adjacency matrix is not square: {rows} rows x {cols} columns")]
    NotSquare { rows: usize, cols: usize },
    #[error("adjacency matrix is empty")]
    Empty,
    #[error("negative adjacency weight a[{row}][{col}] = {value}")]
    NegativeWeight { row: usize, col: usize, value: f64 },
    #[error("non-finite adjacency weight a[{row}][{col}]")]
    NonFiniteWeight { row: usize, col: usize },
    #[error("self-loop: diagonal entry a[{index}][{index}] = {value} must be zero")]
    SelfLoop { index: usize, value: f64 },
    #[error("agent index {index} out of range for {n} agents")]
    IndexOutOfRange { index: usize, n: usize },
}

/// Immutable topology: adjacency `A`, in-degrees `d_i = sum_j a_ij` and Laplacian `L = D - A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology<T: Scalar> {
    adjacency: DMatrix<T>,
    in_degree: DVector<T>,
    laplacian: DMatrix<T>,
    neighbors: Vec<Vec<usize>>,
    out_neighbors: Vec<Vec<usize>>,
}

impl<T: Scalar> Topology<T> {
    /// Builds and validates a topology from row-major adjacency rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, GraphError> {
        let n = rows.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(GraphError::NotSquare { rows: n, cols: bad.len() });
        }
        let adjacency = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        build_topology(adjacency)
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<T> {
        &self.adjacency
    }

    pub fn in_degree(&self) -> &DVector<T> {
        &self.in_degree
    }

    pub fn laplacian(&self) -> &DMatrix<T> {
        &self.laplacian
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> T {
        self.adjacency[(i, j)]
    }

    /// `l_ii`, the weighted in-degree of agent `i`.
    #[inline]
    pub fn l_ii(&self, i: usize) -> T {
        self.in_degree[i]
    }

    /// In-neighbors of `i` (agents whose data `i` receives), ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Out-neighbors of `j` (agents that receive `j`'s broadcasts), ascending.
    pub fn out_neighbors(&self, j: usize) -> &[usize] {
        &self.out_neighbors[j]
    }

    pub fn check_index(&self, i: usize) -> Result<(), GraphError> {
        if i < self.n() {
            Ok(())
        } else {
            Err(GraphError::IndexOutOfRange { index: i, n: self.n() })
        }
    }

    /// Converts every weight to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Topology<U> {
        let rows: Vec<Vec<U>> = (0..self.n())
            .map(|i| (0..self.n()).map(|j| U::lit(self.weight(i, j).as_f64())).collect())
            .collect();
        Topology::from_rows(&rows).expect("casting a valid topology keeps it valid")
    }
}

/// Validates `adjacency` and derives the in-degree vector and Laplacian.
pub fn build_topology<T: Scalar>(adjacency: DMatrix<T>) -> Result<Topology<T>, GraphError> {
    let (rows, cols) = adjacency.shape();
    if rows != cols {
        return Err(GraphError::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(GraphError::Empty);
    }
    let n = rows;
    for i in 0..n {
        for j in 0..n {
            let a = adjacency[(i, j)];
            if !a.is_finite() {
                return Err(GraphError::NonFiniteWeight { row: i, col: j });
            }
            if a < T::zero() {
                return Err(GraphError::NegativeWeight { row: i, col: j, value: a.as_f64() });
            }
        }
        let d = adjacency[(i, i)];
        if d != T::zero() {
            return Err(GraphError::SelfLoop { index: i, value: d.as_f64() });
        }
    }

    let in_degree = DVector::from_fn(n, |i, _| adjacency.row(i).iter().fold(T::zero(), |s, &a| s + a));
    // Diagonal computed as the negated sum of the off-diagonal entries so rows cancel exactly.
    let mut laplacian = -adjacency.clone();
    for i in 0..n {
        let off: T = (0..n).filter(|&j| j != i).fold(T::zero(), |s, j| s + laplacian[(i, j)]);
        laplacian[(i, i)] = -off;
    }
    let neighbors = (0..n)
        .map(|i| (0..n).filter(|&j| adjacency[(i, j)] > T::zero()).collect())
        .collect();
    let out_neighbors = (0..n)
        .map(|j| (0..n).filter(|&i| adjacency[(i, j)] > T::zero()).collect())
        .collect();
    Ok(Topology { adjacency, in_degree, laplacian, neighbors, out_neighbors })
}

/// True iff every agent reaches every other agent along edges `j -> i` with `a_ij > 0`.
///
/// Forward and backward reachability sweeps from agent 0.
pub fn is_strongly_connected<T: Scalar>(t: &Topology<T>) -> bool {
    let n = t.n();
    let sweep = |next: &dyn Fn(usize) -> Vec<usize>| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for w in next(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    sweep(&|v| t.out_neighbors(v).to_vec()) && sweep(&|v| t.neighbors(v).to_vec())
}
