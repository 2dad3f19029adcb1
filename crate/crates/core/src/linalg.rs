//! Linear solvers for the per-time-level implicit systems: banded LU with
//! partial pivoting for 1D stencil matrices, and ILU(0)-preconditioned
//! BiCGSTAB for the sparse nonsymmetric 2D systems.

use crate::error::{Error, Result};

/// Band matrix in LAPACK-style storage with room for pivoting fill-in.
///
/// Entry `(i, j)` is stored when `-(ku) <= i - j <= kl`; factorization can
/// fill up to `ku + kl` superdiagonals.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; width * n],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        // Row index inside the band column j.
        let r = self.kl + self.ku + i - j;
        j * self.width + r
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + self.kl + self.ku < j || j + self.kl < i {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
     }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            i + self.ku >= j && j + self.kl >= i,
            "entry ({i},{j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            i + self.ku >= j && j + self.kl >= i,
            "entry ({i},{j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// LU factorization with partial pivoting, in place. Returns the pivot
    /// vector. Fails on an exactly singular pivot.
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let kl = self.kl;
        let ku_eff = self.ku + kl;
        let mut pivots = vec![0usize; n];
        for j in 0..n {
            let i_max = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.data[self.slot(j, j)].abs();
            for i in (j + 1)..=i_max {
                let v = self.data[self.slot(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::LinearSolve {
                    level: 0,
                    reason: format!("singular band matrix at column {j}"),
                });
            }
            pivots[j] = p;
            if p != j {
                let c_max = (j + ku_eff).min(n - 1);
                for c in j..=c_max {
                    let sj = self.slot(j, c);
                    let sp = self.slot(p, c);
                    self.data.swap(sj, sp);
                }
            }
            let diag = self.data[self.slot(j, j)];
            for i in (j + 1)..=i_max {
                let s_ij = self.slot(i, j);
                let m = self.data[s_ij] / diag;
                self.data[s_ij] = m;
                if m != 0.0 {
                    let c_max = (j + ku_eff).min(n - 1);
                    for c in (j + 1)..=c_max {
                        let s_jc = self.slot(j, c);
                        let s_ic = self.slot(i, c);
                        self.data[s_ic] -= m * self.data[s_jc];
                    }
                }
            }
        }
        Ok(BandedLu {
            mat: self,
            pivots,
        })
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let j_lo = i.saturating_sub(self.kl);
            let j_hi = (i + self.ku).min(self.n - 1);
            let mut acc = 0.0;
            for j in j_lo..=j_hi {
                acc += self.get(i, j) * x[j];
            }
            out[i] = acc;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    mat: BandedMatrix,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.mat.n;
        let kl = self.mat.kl;
        let ku_eff = self.mat.ku + kl;
        let mut x = b.to_vec();
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                x.swap(j, p);
            }
            let i_max = (j + kl).min(n - 1);
            for i in (j + 1)..=i_max {
                x[i] -= self.mat.data[self.mat.slot(i, j)] * x[j];
            }
        }
        for j in (0..n).rev() {
            let c_max = (j + ku_eff).min(n - 1);
            let mut acc = x[j];
            for c in (j + 1)..=c_max {
                acc -= self.mat.data[self.mat.slot(j, c)] * x[c];
            }
            x[j] = acc / self.mat.data[self.mat.slot(j, j)];
        }
        x
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    /// Build from triplets; duplicate entries are summed, columns sorted.
    pub fn from_triplets(n: usize, triplets: &mut Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::with_capacity(triplets.len());
        let mut val = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in triplets.iter() {
            if last == Some((i, j)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(j);
                val.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr {
            n,
            row_ptr,
            col,
            val,
        }
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.val[idx] * x[self.col[idx]];
            }
            out[i] = acc;
        }
    }

    fn find(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col[lo..hi]
            .binary_search(&j)
            .ok()
            .map(|off| lo + off)
    }
}

/// Zero-fill incomplete LU factorization on the sparsity pattern of `a`.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: Csr,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &Csr) -> Result<Self> {
        let mut lu = a.clone();
        let n = lu.n;
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            diag[i] = lu.find(i, i).ok_or_else(|| Error::LinearSolve {
                level: 0,
                reason: format!("missing diagonal in row {i}"),
            })?;
        }
        for i in 0..n {
            let row_start = lu.row_ptr[i];
            let row_end = lu.row_ptr[i + 1];
            let mut idx = row_start;
            while idx < row_end && lu.col[idx] < i {
                let k = lu.col[idx];
                let pivot = lu.val[diag[k]];
                if pivot == 0.0 {
                    return Err(Error::LinearSolve {
                        level: 0,
                        reason: format!("zero ILU pivot in row {k}"),
                    });
                }
                let m = lu.val[idx] / pivot;
                lu.val[idx] = m;
                if m != 0.0 {
                    // Subtract m * (row k, columns > k) on the shared pattern.
                    for kk in diag[k] + 1..lu.row_ptr[k + 1] {
                        let j = lu.col[kk];
                        if let Some(pos) = lu.find(i, j) {
                            lu.val[pos] -= m * lu.val[kk];
                        }
                    }
                }
                idx += 1;
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.lu.n;
        // Forward solve with unit-lower part.
        for i in 0..n {
            let mut acc = r[i];
            let mut idx = self.lu.row_ptr[i];
            let end = self.lu.row_ptr[i + 1];
            while idx < end && self.lu.col[idx] < i {
                acc -= self.lu.val[idx] * z[self.lu.col[idx]];
                idx += 1;
            }
            z[i] = acc;
        }
        // Backward solve with upper part.
        for i in (0..n).rev() {
            let mut acc = z[i];
            for idx in self.diag[i] + 1..self.lu.row_ptr[i + 1] {
                acc -= self.lu.val[idx] * z[self.lu.col[idx]];
            }
            z[i] = acc / self.lu.val[self.diag[i]];
        }
    }
}

/// Preconditioned BiCGSTAB. Returns the solution and iteration count.
pub fn bicgstab(
    a: &Csr,
    b: &[f64],
    precond: &Ilu0,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let mut rho = 1.0f64;
    let mut alpha = 1.0f64;
    let mut omega = 1.0f64;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];

    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            return Err(Error::LinearSolve {
                level: 0,
                reason: "BiCGSTAB breakdown (rho = 0)".into(),
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond.apply(&p, &mut p_hat);
        a.matvec(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            return Err(Error::LinearSolve {
                level: 0,
                reason: "BiCGSTAB breakdown (r_hat . v = 0)".into(),
            });
        }
        alpha = rho / denom;
        let mut s = r.clone();
        for i in 0..n {
            s[i] -= alpha * v[i];
        }
        if norm2(&s) <= rel_tol * b_norm {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return Ok((x, it));
        }
        precond.apply(&s, &mut s_hat);
        a.matvec(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::LinearSolve {
                level: 0,
                reason: "BiCGSTAB breakdown (t = 0)".into(),
            });
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= rel_tol * b_norm {
            return Ok((x, it));
        }
        if omega == 0.0 {
            return Err(Error::LinearSolve {
                level: 0,
                reason: "BiCGSTAB breakdown (omega = 0)".into(),
            });
        }
    }
    Err(Error::LinearSolve {
        level: 0,
        reason: format!("BiCGSTAB did not reach rel_tol {rel_tol} in {max_iter} iterations"),
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_solve_matches_known_solution() {
        // Tridiagonal system with known solution via manufactured rhs.
        let n = 12;
        let mut a = BandedMatrix::zeros(n, 2, 2);
        for i in 0..n {
            a.set(i, i, 2.5 + (i as f64) * 0.1);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.set(i, i + 1, -0.7);
            }
            if i > 1 {
                a.set(i, i - 2, 0.2);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 1.0).collect();
        let b = a.matvec(&x_true);
        let lu = a.factor().unwrap();
        let x = lu.solve(&b);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-11, "i={i}: {} vs {}", x[i], x_true[i]);
        }
    }

    #[test]
    fn banded_pivoting_handles_small_diagonal() {
        let n = 4;
        let mut a = BandedMatrix::zeros(n, 1, 1);
        a.set(0, 0, 1e-14);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 1.0);
        a.set(1, 2, 0.5);
        a.set(2, 1, 0.3);
        a.set(2, 2, 2.0);
        a.set(2, 3, 0.1);
        a.set(3, 2, 0.4);
        a.set(3, 3, 1.5);
        let x_true = vec![1.0, -2.0, 3.0, 0.5];
        let b = a.matvec(&x_true);
        let x = a.factor().unwrap().solve(&b);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-9);
        }
    }

    fn laplacian_2d(nx: usize) -> Csr {
        // Nonsymmetric convection-diffusion stencil on an nx x nx grid.
        let n = nx * nx;
        let mut trips = Vec::new();
        for j in 0..nx {
            for i in 0..nx {
                let k = j * nx + i;
                trips.push((k, k, 4.0 + 0.01 * k as f64));
                if i > 0 {
                    trips.push((k, k - 1, -1.1));
                }
                if i + 1 < nx {
                    trips.push((k, k + 1, -0.9));
                }
                if j > 0 {
                    trips.push((k, k - nx, -1.05));
                }
                if j + 1 < nx {
                    trips.push((k, k + nx, -0.95));
                }
            }
        }
        Csr::from_triplets(n, &mut trips)
    }

    #[test]
    fn bicgstab_with_ilu_converges() {
        let a = laplacian_2d(16);
        let n = a.n;
        let x_true: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37).cos()).collect();
        let mut b = vec![0.0; n];
        a.matvec(&x_true, &mut b);
        let ilu = Ilu0::new(&a).unwrap();
        let (x, iters) = bicgstab(&a, &b, &ilu, 1e-12, 400).unwrap();
        assert!(iters < 200, "iters = {iters}");
        let err: f64 = x
            .iter()
            .zip(&x_true)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn csr_duplicate_triplets_are_summed() {
        let mut trips = vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0), (0, 1, 0.5)];
        let a = Csr::from_triplets(2, &mut trips);
        let mut out = vec![0.0; 2];
        a.matvec(&[1.0, 1.0], &mut out);
        assert!((out[0] - 3.5).abs() < 1e-15);
        assert!((out[1] - 1.0).abs() < 1e-15);
    }
}
