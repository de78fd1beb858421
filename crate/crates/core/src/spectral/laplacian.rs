//! Combinatorial Laplacian `L = D - A` of a relational multigraph.

use crate::graph::RelationalGraph;
use crate::scalar::Real;

/// Sparse symmetric Laplacian in CSR form. Multi-edges accumulate into the
/// off-diagonal weight and the degree.
#[derive(Debug, Clone)]
pub struct Laplacian<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
    diag: Vec<T>,
}

impl<T: Real> Laplacian<T> {
    pub fn from_graph(g: &RelationalGraph) -> Self {
        let n = g.n_vertices();
        let mut nbrs: Vec<Vec<usize>> = g.adjacency_lists();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in nbrs.iter_mut() {
            row.sort_unstable();
            let mut k = 0;
            while k < row.len() {
                let c = row[k];
                let mut mult = 0usize;
                while k < row.len() && row[k] == c {
                    mult += 1;
                    k += 1;
                }
                cols.push(c);
                vals.push(-T::from_count(mult));
            }
            row_ptr.push(cols.len());
        }
        let diag = g.degrees().iter().map(|&d| T::from_count(d as usize)).collect();
        Self { n, row_ptr, cols, vals, diag }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn diagonal(&self) -> &[T] {
        &self.diag
    }

    /// `out = L x`
    pub fn apply(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = self.diag[i] * x[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc = acc + self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }

    /// Entry `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> T {
        if i == j {
            return self.diag[i];
        }
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.vals[self.row_ptr[i] + k],
            Err(_) => T::zero(),
        }
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<T> {
        let n = self.n;
        let mut m = vec![T::zero(); n * n];
        for i in 0..n {
            m[i * n + i] = self.diag[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[i * n + self.cols[k]] = self.vals[k];
            }
        }
        m
    }

    /// Largest eigenvalue bound from Gershgorin discs (`2 · max degree`).
    pub fn gershgorin_bound(&self) -> T {
        self.diag.iter().fold(T::zero(), |acc, &d| acc.max(d + d))
    }
}
