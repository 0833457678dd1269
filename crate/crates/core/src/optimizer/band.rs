//! Symmetric matrices that are banded except for one dense trailing row and column,
//! the Gauss-Newton structure of a time-ordered transcription with a shared timestep.

#[derive(Debug, Clone)]
pub(crate) struct ArrowBand {
    n: usize,
    bw: usize,
    /// Lower band of the leading `n - 1` block: entry `(i, j)` with `i - bw <= j <= i`
    /// lives at `i * (bw + 1) + (i - j)`.
    band: Vec<f64>,
    /// Couplings between the leading block and the last variable.
    edge: Vec<f64>,
    corner: f64,
}

impl ArrowBand {
    pub(crate) fn new(n: usize, bw: usize) -> Self {
        assert!(n >= 1);
        Self {
            n,
            bw,
            band: vec![0.0; (n - 1) * (bw + 1)],
            edge: vec![0.0; n - 1],
            corner: 0.0,
        }
    }

    pub(crate) fn clear(&mut self) {
        self.band.fill(0.0);
        self.edge.fill(0.0);
        self.corner = 0.0;
    }

    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let last = self.n - 1;
        if i == last {
            if j == last {
                self.corner += v;
            } else {
                self.edge[j] += v;
            }
            return;
        }
        debug_assert!(i - j <= self.bw, "entry ({i}, {j}) outside band {}", self.bw);
        self.band[i * (self.bw + 1) + (i - j)] += v;
    }

    /// Adds `s * row^T row` for a sparse row with distinct columns.
    pub(crate) fn add_outer(&mut self, row: &[(usize, f64)], s: f64) {
        for (a, &(i, vi)) in row.iter().enumerate() {
            for &(j, vj) in &row[..=a] {
                self.add(i, j, s * vi * vj);
            }
        }
    }

    pub(crate) fn diag(&self, i: usize) -> f64 {
        if i == self.n - 1 {
            self.corner
        } else {
            self.band[i * (self.bw + 1)]
        }
    }

    pub(crate) fn add_diag(&mut self, i: usize, v: f64) {
        self.add(i, i, v);
    }

    /// `x^T A x` for the symmetric matrix.
    pub(crate) fn quad(&self, x: &[f64]) -> f64 {
        let last = self.n - 1;
        let mut s = self.corner * x[last] * x[last];
        for i in 0..last {
            s += 2.0 * self.edge[i] * x[i] * x[last];
            let row = &self.band[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            s += row[0] * x[i] * x[i];
            for (d, &v) in row.iter().enumerate().skip(1) {
                if d > i {
                    break;
                }
                s += 2.0 * v * x[i] * x[i - d];
            }
        }
        s
    }

    /// Solves `A x = b` by banded Cholesky of the leading block and a Schur complement
    /// on the last variable. Returns `None` when the matrix is not positive definite.
    pub(crate) fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        let last = n - 1;
        if last == 0 {
            return (self.corner > 0.0).then(|| vec![b[0] / self.corner]);
        }
        let w = self.bw + 1;
        let mut l = self.band.clone();
        for i in 0..last {
            let j0 = i.saturating_sub(self.bw);
            for j in j0..=i {
                let mut s = l[i * w + (i - j)];
                let k0 = j0.max(j.saturating_sub(self.bw));
                for k in k0..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        let solve = |rhs: &[f64]| -> Vec<f64> {
            let mut y = rhs.to_vec();
            for i in 0..last {
                let mut s = y[i];
                for k in i.saturating_sub(self.bw)..i {
                    s -= l[i * w + (i - k)] * y[k];
                }
                y[i] = s / l[i * w];
            }
            for i in (0..last).rev() {
                let mut s = y[i];
                for k in i + 1..last.min(i + self.bw + 1) {
                    s -= l[k * w + (k - i)] * y[k];
                }
                y[i] = s / l[i * w];
            }
            y
        };
        let y = solve(&b[..last]);
        let v = solve(&self.edge);
        let schur = self.corner - self.edge.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        if !(schur > 0.0) {
            return None;
        }
        let t = (b[last] - self.edge.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>()) / schur;
        let mut x: Vec<f64> = y.iter().zip(&v).map(|(yi, vi)| yi - vi * t).collect();
        x.push(t);
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_cholesky() {
        let n = 23;
        let bw = 4;
        let mut a = ArrowBand::new(n, bw);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        let mut seed = 1u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for r in 0..60 {
            let start = (r * 3) % (n - bw);
            let mut row: Vec<(usize, f64)> = (start..start + bw).map(|c| (c, next())).collect();
            row.push((n - 1, next()));
            a.add_outer(&row, 1.0);
            for &(i, vi) in &row {
                for &(j, vj) in &row {
                    dense[(i, j)] += vi * vj;
                }
            }
        }
        for i in 0..n {
            a.add_diag(i, 0.1);
            dense[(i, i)] += 0.1;
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = a.solve(&b).unwrap();
        let expect = dense.clone().cholesky().unwrap().solve(&DVector::from_vec(b.clone()));
        for i in 0..n {
            assert!((x[i] - expect[i]).abs() < 1e-9, "{i}: {} vs {}", x[i], expect[i]);
        }
        let q = a.quad(&b);
        let v = DVector::from_vec(b);
        assert!((q - v.dot(&(&dense * &v))).abs() < 1e-9);
    }
}
