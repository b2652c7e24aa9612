use std::collections::BTreeMap;

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Assembles from triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for &(i, j, v) in triplets {
            *rows[i].entry(j).or_insert(0.0) += v;
        }
        Self::from_rows(rows)
    }

    fn from_rows(rows: Vec<BTreeMap<usize, f64>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (j, v) in row {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().cloned().zip(self.vals[r].iter().cloned())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).find(|&(j, _)| j == i).map_or(0.0, |(_, v)| v)).collect()
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n).flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j))).max().unwrap_or(0)
    }

    /// `self + s * I`.
    pub fn add_identity(&self, s: f64) -> Self {
        let mut rows: Vec<BTreeMap<usize, f64>> = (0..self.n).map(|i| self.row(i).collect()).collect();
        for (i, row) in rows.iter_mut().enumerate() {
            *row.entry(i).or_insert(0.0) += s;
        }
        Self::from_rows(rows)
    }

    /// `self + s * diag(d)`.
    pub fn add_diagonal(&self, s: f64, d: &[f64]) -> Self {
        let mut rows: Vec<BTreeMap<usize, f64>> = (0..self.n).map(|i| self.row(i).collect()).collect();
        for (i, row) in rows.iter_mut().enumerate() {
            *row.entry(i).or_insert(0.0) += s * d[i];
        }
        Self::from_rows(rows)
    }
}

/// A quadratic form `E(f) = sum c (f_i - f_j)^2 + sum c (f_a - f_b)(f_c - f_d)`
/// over node masses. Every form of this kind annihilates constants.
#[derive(Debug, Clone)]
pub struct FormBuilder {
    n: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl FormBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, triplets: Vec::new() }
    }

    /// Adds `c (f_i - f_j)^2`.
    pub fn edge(&mut self, i: usize, j: usize, c: f64) {
        self.triplets.push((i, i, c));
        self.triplets.push((j, j, c));
        self.triplets.push((i, j, -c));
        self.triplets.push((j, i, -c));
    }

    /// Adds `c (f_a - f_b)(f_c - f_d)` as a symmetric bilinear term.
    pub fn cross(&mut self, a: usize, b: usize, c_: usize, d: usize, c: f64) {
        let h = 0.5 * c;
        for &(p, sp) in &[(a, 1.0), (b, -1.0)] {
            for &(q, sq) in &[(c_, 1.0), (d, -1.0)] {
                self.triplets.push((p, q, h * sp * sq));
                self.triplets.push((q, p, h * sp * sq));
            }
        }
    }

    /// Symmetric stiffness matrix of the form.
    pub fn stiffness(&self) -> Csr {
        Csr::from_triplets(self.n, &self.triplets)
    }
}

/// Form entries stored relative to per-node log masses so that the row
/// scaled operator `W^{-1} A` never under- or overflows.
#[derive(Debug, Clone)]
pub struct LogFormBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64, f64)>,
    crosses: Vec<([usize; 4], f64, f64)>,
}

impl LogFormBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new(), crosses: Vec::new() }
    }

    /// Adds `exp(log_c) * geom * (f_i - f_j)^2`.
    pub fn edge(&mut self, i: usize, j: usize, log_c: f64, geom: f64) {
        self.entries.push((i, j, log_c, geom));
    }

    /// Adds `exp(log_c) * coef * (f_a - f_b)(f_c - f_d)` as a symmetric bilinear term.
    pub fn cross(&mut self, a: usize, b: usize, c: usize, d: usize, log_c: f64, coef: f64) {
        self.crosses.push(([a, b, c, d], log_c, coef));
    }

    /// Builds `L = W^{-1} A` where `W = diag(exp(log_mass))`. Rows of `L`
    /// sum to zero by construction.
    pub fn row_scaled(&self, log_mass: &[f64]) -> Csr {
        let mut triplets = Vec::with_capacity(4 * self.entries.len());
        for &(i, j, lc, g) in &self.entries {
            let a = (lc - log_mass[i]).exp() * g;
            let b = (lc - log_mass[j]).exp() * g;
            triplets.push((i, j, -a));
            triplets.push((i, i, a));
            triplets.push((j, i, -b));
            triplets.push((j, j, b));
        }
        for &([a, b, c, d], lc, coef) in &self.crosses {
            for &(p, sp) in &[(a, 1.0), (b, -1.0)] {
                for &(q, sq) in &[(c, 1.0), (d, -1.0)] {
                    let h = 0.5 * coef * sp * sq;
                    triplets.push((p, q, (lc - log_mass[p]).exp() * h));
                    triplets.push((q, p, (lc - log_mass[q]).exp() * h));
                }
            }
        }
        Csr::from_triplets(self.n, &triplets)
    }
}
