//! Symmetric positive definite matrices in variable-band (profile) storage with
//! a reverse Cuthill–McKee ordering, and their Cholesky factorization.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Reverse Cuthill–McKee permutation (`perm[new] = old`) of an undirected graph.
pub fn reverse_cuthill_mckee(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let seed = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v))
            .unwrap();
        let start = pseudo_peripheral(adjacency, &degree, seed);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adjacency[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| (degree[w], w));
            for w in nb {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adjacency: &[Vec<usize>], start: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; adjacency.len()];
    seen[start] = true;
    let mut levels = vec![vec![start]];
    loop {
        let mut next = Vec::new();
        for &v in levels.last().unwrap() {
            for &w in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return levels;
        }
        levels.push(next);
    }
}

fn pseudo_peripheral(adjacency: &[Vec<usize>], degree: &[usize], seed: usize) -> usize {
    let mut v = seed;
    let mut ecc = bfs_levels(adjacency, v).len();
    for _ in 0..8 {
        let levels = bfs_levels(adjacency, v);
        let cand = *levels
            .last()
            .unwrap()
            .iter()
            .min_by_key(|&&w| (degree[w], w))
            .unwrap();
        let e = bfs_levels(adjacency, cand).len();
        if e <= ecc {
            break;
        }
        ecc = e;
        v = cand;
    }
    v
}

/// Lower triangle of a symmetric matrix, row-wise from the first nonzero
/// column to the diagonal, in permuted numbering. Public indices are original.
#[derive(Clone, Debug)]
pub struct ProfileMatrix {
    n: usize,
    /// new -> old
    perm: Vec<usize>,
    /// old -> new
    iperm: Vec<usize>,
    first: Vec<usize>,
    row_start: Vec<usize>,
    values: Vec<f64>,
}

impl ProfileMatrix {
    /// Zero matrix whose sparsity covers the graph (plus the diagonal).
    pub fn from_graph(adjacency: &[Vec<usize>]) -> Self {
        let n = adjacency.len();
        let perm = reverse_cuthill_mckee(adjacency);
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (old, nbrs) in adjacency.iter().enumerate() {
            let i = iperm[old];
            for &w in nbrs {
                let j = iperm[w];
                if j < i && j < first[i] {
                    first[i] = j;
                }
            }
        }
        let mut row_start = Vec::with_capacity(n + 1);
        let mut acc = 0;
        for i in 0..n {
            row_start.push(acc);
            acc += i - first[i] + 1;
        }
        row_start.push(acc);
        ProfileMatrix {
            n,
            perm,
            iperm,
            first,
            row_start,
            values: vec![0.0; acc],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries.
    pub fn profile_size(&self) -> usize {
        self.values.len()
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    fn slot(&self, i_old: usize, j_old: usize) -> Option<usize> {
        let (mut i, mut j) = (self.iperm[i_old], self.iperm[j_old]);
        if j > i {
            std::mem::swap(&mut i, &mut j);
        }
        (j >= self.first[i]).then(|| self.row_start[i] + j - self.first[i])
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`).
    ///
    /// Panics if the entry lies outside the profile.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside the matrix profile"));
        self.values[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.values[s])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let oi = self.perm[i];
            let row = &self.values[self.row_start[i]..self.row_start[i + 1]];
            for (c, &a) in row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let oj = self.perm[self.first[i] + c];
                y[oi] += a * x[oj];
                if oj != oi {
                    y[oj] += a * x[oi];
                }
            }
        }
        y
    }

    /// In-place Cholesky `A = L Lᵀ` within the profile.
    pub fn factor(mut self) -> Result<ProfileCholesky> {
        let n = self.n;
        for i in 0..n {
            let fi = self.first[i];
            let ri = self.row_start[i];
            for j in fi..=i {
                let fj = self.first[j];
                let rj = self.row_start[j];
                let k0 = fi.max(fj);
                let (head, tail) = self.values.split_at_mut(ri);
                let row_i = &tail[..i - fi + 1];
                let dot: f64 = if j == i {
                    row_i[k0 - fi..j - fi].iter().map(|x| x * x).sum()
                } else {
                    let row_j = &head[rj..rj + (j - fj)];
                    row_i[k0 - fi..j - fi]
                        .iter()
                        .zip(&row_j[k0 - fj..])
                        .map(|(a, b)| a * b)
                        .sum()
                };
                let s = tail[j - fi] - dot;
                if j == i {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite {
                            pivot: self.perm[i],
                            value: s,
                        });
                    }
                    tail[j - fi] = s.sqrt();
                } else {
                    let djj = head[rj + (j - fj)];
                    tail[j - fi] = s / djj;
                }
            }
        }
        Ok(ProfileCholesky { m: self })
    }
}

/// Cholesky factor in profile storage.
#[derive(Clone, Debug)]
pub struct ProfileCholesky {
    m: ProfileMatrix,
}

impl ProfileCholesky {
    pub fn dim(&self) -> usize {
        self.m.n
    }

    /// Solves `A x = b` in place (`b` in original numbering).
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        let mut z: Vec<f64> = (0..n).map(|i| b[m.perm[i]]).collect();
        for i in 0..n {
            let fi = m.first[i];
            let row = &m.values[m.row_start[i]..m.row_start[i + 1]];
            let dot: f64 = row[..i - fi].iter().zip(&z[fi..i]).map(|(a, b)| a * b).sum();
            z[i] = (z[i] - dot) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = m.first[i];
            let row = &m.values[m.row_start[i]..m.row_start[i + 1]];
            z[i] /= row[i - fi];
            let zi = z[i];
            for (zk, a) in z[fi..i].iter_mut().zip(&row[..i - fi]) {
                *zk -= a * zi;
            }
        }
        for i in 0..n {
            b[m.perm[i]] = z[i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
