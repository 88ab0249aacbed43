//! Dense real linear algebra: Kronecker products, nonsymmetric eigenvalues
//! (Hessenberg reduction + Francis double-shift QR), symmetric eigenvalues
//! (cyclic Jacobi), LU solves and vectorized Lyapunov/Stein solvers.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Largest number of entries any assembled matrix may have.
pub const MAX_ENTRIES: usize = 1 << 26;

/// Largest dimension accepted by the vectorized Lyapunov/Stein solvers.
/// The vectorized system has `dim^2` unknowns and is solved densely.
pub const MAX_CERTIFICATE_DIM: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    DimensionMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{op} requires a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("{op}: result would have {entries} entries, cap is {cap}")]
    TooLarge {
        op: &'static str,
        entries: usize,
        cap: usize,
    },
    #[error("matrix is empty")]
    Empty,
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("QR iteration did not converge within {budget} iterations")]
    NoConvergence { budget: usize },
    #[error("matrix is numerically singular (pivot {pivot:e} at column {col})")]
    Singular { col: usize, pivot: f64 },
    #[error("matrix is not Hurwitz (max real part {max_real:e})")]
    NotHurwitz { max_real: f64 },
    #[error("matrix is not Schur stable (spectral radius {radius:e})")]
    NotSchur { radius: f64 },
    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not positive stable (min real part {min_real:e})")]
    NotPositiveStable { min_real: f64 },
    #[error("{op}: residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual {
        op: &'static str,
        residual: f64,
        tolerance: f64,
    },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                write!(f, "{:>12.6} ", self[(r, c)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong;
    /// use [`Matrix::try_from_vec`] for untrusted input.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Self::try_from_vec(rows, cols, data).expect("invalid matrix data")
    }

    pub fn try_from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                op: "from_vec",
                lhs: (rows, cols),
                rhs: (data.len(), 1),
            });
        }
        let m = Self { rows, cols, data };
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self::from_vec(r, c, data)
    }

    pub fn column(v: &[f64]) -> Self {
        Self::from_vec(v.len(), 1, v.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(idx) => Err(LinalgError::NonFinite {
                row: idx / self.cols.max(1),
                col: idx % self.cols.max(1),
            }),
            None => Ok(()),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    /// `(A + Aᵀ)/2`.
    pub fn sym(&self) -> Self {
        assert!(self.is_square(), "sym of non-square matrix");
        let mut s = self.clone();
        for r in 0..self.rows {
            for c in 0..r {
                let avg = 0.5 * (self[(r, c)] + self[(c, r)]);
                s[(r, c)] = avg;
                s[(c, r)] = avg;
            }
        }
        s
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Spectral norm `sqrt(λ_max(AᵀA))`.
    pub fn norm2(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let gram = if self.rows >= self.cols {
            &self.transpose() * self
        } else {
            self * &self.transpose()
        };
        symmetric_eigenvalues(&gram)
            .map(|ev| ev.last().copied().unwrap_or(0.0).max(0.0).sqrt())
            .unwrap_or(f64::NAN)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Writes `self * x` into `out` without allocating.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row(r).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn try_mul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch {
                op: "mul",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    fn zip_with(&self, rhs: &Matrix, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != rhs.shape() {
            return Err(LinalgError::DimensionMismatch {
                op,
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn try_add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    pub fn try_sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, "sub", |a, b| a - b)
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for r in 0..block.rows {
            for c in 0..block.cols {
                self[(r0 + r, c0 + c)] = block[(r, c)];
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                out[(r, c)] = self[(r0 + r, c0 + c)];
            }
        }
        out
    }

    /// Block-diagonal matrix from a list of blocks.
    pub fn block_diag(blocks: &[Matrix]) -> Matrix {
        let rows = blocks.iter().map(Matrix::rows).sum();
        let cols = blocks.iter().map(Matrix::cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            out.set_block(r0, c0, b);
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }

    /// Relative asymmetry `‖A − Aᵀ‖_F / ‖A‖_F` (0 for the zero matrix).
    pub fn asymmetry(&self) -> f64 {
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let d = self[(r, c)] - self[(c, r)];
                acc += d * d;
            }
        }
        acc.sqrt() / norm
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.try_mul(rhs).expect("matrix product dimension mismatch")
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        self.try_add(rhs).expect("matrix sum dimension mismatch")
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        self.try_sub(rhs).expect("matrix difference dimension mismatch")
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

/// Eigenvalues of a real square matrix with summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub max_real_part: f64,
    pub min_real_part: f64,
    pub spectral_radius: f64,
}

impl Spectrum {
    fn from_eigenvalues(eigenvalues: Vec<Complex64>) -> Self {
        let max_real_part = eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        let min_real_part = eigenvalues.iter().map(|l| l.re).fold(f64::INFINITY, f64::min);
        let spectral_radius = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
        Self {
            eigenvalues,
            max_real_part,
            min_real_part,
            spectral_radius,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn is_hurwitz(&self, margin: f64) -> bool {
        self.max_real_part < -margin
    }

    pub fn is_schur(&self, margin: f64) -> bool {
        self.spectral_radius < 1.0 - margin
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.data.is_empty() || b.data.is_empty() {
        return Err(LinalgError::Empty);
    }
    let rows = a.rows.checked_mul(b.rows);
    let cols = a.cols.checked_mul(b.cols);
    let entries = rows.zip(cols).and_then(|(r, c)| r.checked_mul(c));
    match entries {
        Some(e) if e <= MAX_ENTRIES => {}
        _ => {
            return Err(LinalgError::TooLarge {
                op: "kron",
                entries: entries.unwrap_or(usize::MAX),
                cap: MAX_ENTRIES,
            })
        }
    }
    let mut out = Matrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for r in 0..b.rows {
                for c in 0..b.cols {
                    out[(i * b.rows + r, j * b.cols + c)] = aij * b[(r, c)];
                }
            }
        }
    }
    Ok(out)
}

fn require_square(a: &Matrix, op: &'static str) -> Result<()> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            op,
            rows: a.rows,
            cols: a.cols,
        });
    }
    if a.data.is_empty() {
        return Err(LinalgError::Empty);
    }
    Ok(())
}

/// All eigenvalues of a real square matrix.
///
/// Balancing, reduction to upper Hessenberg form by stabilized elementary
/// similarity transforms, then Francis double-shift QR with deflation. The
/// total iteration budget is `100·n`; exceeding it is an error.
pub fn eigenvalues(a: &Matrix) -> Result<Spectrum> {
    require_square(a, "eigenvalues")?;
    a.check_finite()?;
    let n = a.rows;
    let mut h: Vec<Vec<f64>> = (0..n).map(|r| a.row(r).to_vec()).collect();
    balance(&mut h);
    to_hessenberg(&mut h);
    let ev = hessenberg_qr(&mut h, 100 * n.max(1))?;
    Ok(Spectrum::from_eigenvalues(ev))
}

const RADIX: f64 = 2.0;

fn balance(a: &mut [Vec<f64>]) {
    let n = a.len();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[i][j] *= g;
                    }
                    for row in a.iter_mut() {
                        row[i] *= f;
                    }
                }
            }
        }
    }
}

fn to_hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    if n < 3 {
        return;
    }
    for m in 1..n - 1 {
        let mut x: f64 = 0.0;
        let mut i = m;
        for j in m..n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                i = j;
            }
        }
        if i != m {
            a.swap(i, m);
            for row in a.iter_mut() {
                row.swap(i, m);
            }
        }
        if x != 0.0 {
            for i in m + 1..n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..n {
                        a[i][j] -= y * a[m][j];
                    }
                    for row in a.iter_mut() {
                        row[m] += y * row[i];
                    }
                }
            }
        }
    }
    // clear the multipliers stored below the subdiagonal
    for i in 2..n {
        for j in 0..i - 1 {
            a[i][j] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

fn hessenberg_qr(a: &mut [Vec<f64>], budget: usize) -> Result<Vec<Complex64>> {
    let n = a.len() as isize;
    let mut wr = vec![0.0; n as usize];
    let mut wi = vec![0.0; n as usize];
    let at = |a: &[Vec<f64>], i: isize, j: isize| a[i as usize][j as usize];

    let mut anorm = 0.0;
    for i in 0..n {
        for j in (i - 1).max(0)..n {
            anorm += at(a, i, j).abs();
        }
    }
    let mut nn = n - 1;
    let mut t = 0.0;
    let mut total_its = 0usize;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 1 {
                let mut s = at(a, l - 1, l - 1).abs() + at(a, l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if at(a, l, l - 1).abs() + s == s {
                    a[l as usize][(l - 1) as usize] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = at(a, nn, nn);
            if l == nn {
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = at(a, nn - 1, nn - 1);
            let mut w = at(a, nn, nn - 1) * at(a, nn - 1, nn);
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += t;
                let (a1, a2) = ((nn - 1) as usize, nn as usize);
                if q >= 0.0 {
                    let z = p + sign(z, p);
                    wr[a1] = x + z;
                    wr[a2] = x + z;
                    if z != 0.0 {
                        wr[a2] = x - w / z;
                    }
                    wi[a1] = 0.0;
                    wi[a2] = 0.0;
                } else {
                    wr[a1] = x + p;
                    wr[a2] = x + p;
                    wi[a1] = -z;
                    wi[a2] = z;
                }
                nn -= 2;
                break;
            }
            if total_its >= budget {
                return Err(LinalgError::NoConvergence { budget });
            }
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 0..=nn {
                    a[i as usize][i as usize] -= x;
                }
                let s = at(a, nn, nn - 1).abs() + at(a, nn - 1, nn - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            total_its += 1;

            let mut m = nn - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = at(a, m, m);
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / at(a, m + 1, m) + at(a, m, m + 1);
                q = at(a, m + 1, m + 1) - z - rr - ss;
                r = at(a, m + 2, m + 1);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = at(a, m, m - 1).abs() * (q.abs() + r.abs());
                let v = p.abs() * (at(a, m - 1, m - 1).abs() + z.abs() + at(a, m + 1, m + 1).abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a[i as usize][(i - 2) as usize] = 0.0;
                if i != m + 2 {
                    a[i as usize][(i - 3) as usize] = 0.0;
                }
            }
            let mut k = m;
            while k <= nn - 1 {
                if k != m {
                    p = at(a, k, k - 1);
                    q = at(a, k + 1, k - 1);
                    r = if k != nn - 1 { at(a, k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k as usize][(k - 1) as usize] = -at(a, k, k - 1);
                        }
                    } else {
                        a[k as usize][(k - 1) as usize] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let (ku, ju) = (k as usize, j as usize);
                        let mut pp = a[ku][ju] + q * a[ku + 1][ju];
                        if k != nn - 1 {
                            pp += r * a[ku + 2][ju];
                            a[ku + 2][ju] -= pp * z;
                        }
                        a[ku + 1][ju] -= pp * y;
                        a[ku][ju] -= pp * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        let (iu, ku) = (i as usize, k as usize);
                        let mut pp = x * a[iu][ku] + y * a[iu][ku + 1];
                        if k != nn - 1 {
                            pp += z * a[iu][ku + 2];
                            a[iu][ku + 2] -= pp * r;
                        }
                        a[iu][ku + 1] -= pp * q;
                        a[iu][ku] -= pp;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    let mut ev: Vec<Complex64> = wr.into_iter().zip(wi).map(|(re, im)| Complex64::new(re, im)).collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(ev)
}

/// Eigenvector for a known eigenvalue by complex inverse iteration on the
/// original matrix. The returned vector has unit Euclidean norm.
pub fn eigenvector(a: &Matrix, lambda: Complex64) -> Result<Vec<Complex64>> {
    require_square(a, "eigenvector")?;
    let n = a.rows;
    let scale = a.max_abs().max(1.0);
    // tiny offset keeps the shifted matrix invertible in floating point
    let shift = lambda + Complex64::new(scale * 1e-10, scale * 1e-10);
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    let v = Complex64::new(a[(r, c)], 0.0);
                    if r == c {
                        v - shift
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let perm = complex_lu(&mut m, scale * 1e-300)?;
    let mut v: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0, (i as f64) * 0.1)).collect();
    for _ in 0..3 {
        v = complex_lu_solve(&m, &perm, &v);
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|c| *c /= norm);
    }
    Ok(v)
}

fn complex_lu(m: &mut [Vec<Complex64>], floor: f64) -> Result<Vec<usize>> {
    let n = m.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| m[i][k].norm().total_cmp(&m[j][k].norm()))
            .unwrap_or(k);
        if m[piv][k].norm() <= floor {
            m[piv][k] = Complex64::new(floor.max(f64::MIN_POSITIVE), 0.0);
        }
        m.swap(k, piv);
        perm.swap(k, piv);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            m[i][k] = f;
            for j in k + 1..n {
                let t = m[k][j];
                m[i][j] -= f * t;
            }
        }
    }
    Ok(perm)
}

fn complex_lu_solve(lu: &[Vec<Complex64>], perm: &[usize], b: &[Complex64]) -> Vec<Complex64> {
    let n = lu.len();
    let mut x: Vec<Complex64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for j in 0..i {
            let t = lu[i][j] * x[j];
            x[i] -= t;
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            let t = lu[i][j] * x[j];
            x[i] -= t;
        }
        x[i] /= lu[i][i];
    }
    x
}

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
/// Only the lower triangle's mirror image is assumed; callers symmetrize.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    require_square(a, "symmetric_eigenvalues")?;
    a.check_finite()?;
    let n = a.rows;
    let mut m = a.sym();
    let norm = m.frobenius_norm();
    if norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= 1e-17 * norm {
            let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
            ev.sort_by(f64::total_cmp);
            return Ok(ev);
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = sign(1.0, theta) / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(LinalgError::NoConvergence { budget: 100 })
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Self> {
        require_square(a, "lu")?;
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tol = a.max_abs() * f64::EPSILON * n as f64;
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                if lu[(i, k)].abs() > best {
                    best = lu[(i, k)].abs();
                    piv = i;
                }
            }
            if best <= tol || best == 0.0 {
                return Err(LinalgError::Singular { col: k, pivot: best });
            }
            if piv != k {
                for c in 0..n {
                    lu.data.swap(k * n + c, piv * n + c);
                }
                perm.swap(k, piv);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                if f == 0.0 {
                    continue;
                }
                lu[(i, k)] = f;
                for j in k + 1..n {
                    let t = lu[(k, j)];
                    lu[(i, j)] -= f * t;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(b.rows, b.cols);
        for c in 0..b.cols {
            let col: Vec<f64> = (0..b.rows).map(|r| b[(r, c)]).collect();
            let x = self.solve(&col);
            for (r, v) in x.into_iter().enumerate() {
                out[(r, c)] = v;
            }
        }
        out
    }
}

/// Column-major vectorization.
fn vec_col(a: &Matrix) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.rows * a.cols);
    for c in 0..a.cols {
        for r in 0..a.rows {
            v.push(a[(r, c)]);
        }
    }
    v
}

fn unvec_col(v: &[f64], n: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for c in 0..n {
        for r in 0..n {
            m[(r, c)] = v[c * n + r];
        }
    }
    m
}

fn check_spd_input(q: &Matrix, n: usize, op: &'static str) -> Result<()> {
    if q.shape() != (n, n) {
        return Err(LinalgError::DimensionMismatch {
            op,
            lhs: (n, n),
            rhs: q.shape(),
        });
    }
    if !is_positive_definite(q)? {
        return Err(LinalgError::NotPositiveDefinite);
    }
    Ok(())
}

fn check_certificate_dim(n: usize, op: &'static str) -> Result<()> {
    if n > MAX_CERTIFICATE_DIM {
        return Err(LinalgError::TooLarge {
            op,
            entries: n * n,
            cap: MAX_CERTIFICATE_DIM * MAX_CERTIFICATE_DIM,
        });
    }
    Ok(())
}

fn finish_certificate(p: Matrix) -> Result<Matrix> {
    let asym = p.asymmetry();
    if asym > 1e-6 {
        return Err(LinalgError::NotSymmetric { asymmetry: asym });
    }
    Ok(p.sym())
}

/// Solves `hᵀP + Ph = −q` for `P = Pᵀ ≻ 0`. Requires `h` Hurwitz and `q ≻ 0`.
pub fn solve_lyapunov_continuous(h: &Matrix, q: &Matrix) -> Result<Matrix> {
    require_square(h, "solve_lyapunov_continuous")?;
    let n = h.rows;
    check_certificate_dim(n, "solve_lyapunov_continuous")?;
    check_spd_input(q, n, "solve_lyapunov_continuous")?;
    let spec = eigenvalues(h)?;
    if spec.max_real_part >= 0.0 {
        return Err(LinalgError::NotHurwitz {
            max_real: spec.max_real_part,
        });
    }
    let ht = h.transpose();
    let eye = Matrix::identity(n);
    let op = &kron(&eye, &ht)? + &kron(&ht, &eye)?;
    let rhs: Vec<f64> = vec_col(q).into_iter().map(|v| -v).collect();
    let sol = Lu::factor(&op)?.solve(&rhs);
    let p = finish_certificate(unvec_col(&sol, n))?;
    let residual = (&(&(&ht * &p) + &(&p * h)) + q).frobenius_norm();
    let tolerance = 1e-8 * q.frobenius_norm();
    if residual > tolerance {
        return Err(LinalgError::Residual {
            op: "solve_lyapunov_continuous",
            residual,
            tolerance,
        });
    }
    Ok(p)
}

/// Solves `sᵀPs − P = −q` for `P = Pᵀ ≻ 0`. Requires `ρ(s) < 1` and `q ≻ 0`.
pub fn solve_stein(s: &Matrix, q: &Matrix) -> Result<Matrix> {
    require_square(s, "solve_stein")?;
    let n = s.rows;
    check_certificate_dim(n, "solve_stein")?;
    check_spd_input(q, n, "solve_stein")?;
    let spec = eigenvalues(s)?;
    if spec.spectral_radius >= 1.0 {
        return Err(LinalgError::NotSchur {
            radius: spec.spectral_radius,
        });
    }
    let st = s.transpose();
    let op = &kron(&st, &st)? - &Matrix::identity(n * n);
    let rhs: Vec<f64> = vec_col(q).into_iter().map(|v| -v).collect();
    let sol = Lu::factor(&op)?.solve(&rhs);
    let p = finish_certificate(unvec_col(&sol, n))?;
    let residual = (&(&(&(&st * &p) * s) - &p) + q).frobenius_norm();
    let tolerance = 1e-8 * q.frobenius_norm();
    if residual > tolerance {
        return Err(LinalgError::Residual {
            op: "solve_stein",
            residual,
            tolerance,
        });
    }
    Ok(p)
}

/// True iff every eigenvalue of `(a + aᵀ)/2` exceeds `1e-10·‖a‖_F`.
/// Rejects inputs whose asymmetry exceeds `1e-10·‖a‖_F`.
pub fn is_positive_definite(a: &Matrix) -> Result<bool> {
    require_square(a, "is_positive_definite")?;
    let norm = a.frobenius_norm();
    let mut skew = 0.0;
    for r in 0..a.rows {
        for c in 0..r {
            let d = a[(r, c)] - a[(c, r)];
            skew += 2.0 * d * d;
        }
    }
    if skew.sqrt() > 1e-10 * norm {
        return Err(LinalgError::NotSymmetric {
            asymmetry: skew.sqrt() / norm.max(f64::MIN_POSITIVE),
        });
    }
    let ev = symmetric_eigenvalues(a)?;
    Ok(ev[0] > 1e-10 * norm)
}

/// `(lᵀl)⁻¹lᵀ` for a positive-stable square `l` (equal to `l⁻¹`).
pub fn left_inverse_laplacian(l: &Matrix) -> Result<Matrix> {
    require_square(l, "left_inverse_laplacian")?;
    let m = l.rows;
    let spec = eigenvalues(l)?;
    if spec.min_real_part <= 0.0 {
        return Err(LinalgError::NotPositiveStable {
            min_real: spec.min_real_part,
        });
    }
    let lt = l.transpose();
    let gram = &lt * l;
    let inv = Lu::factor(&gram)?.solve_matrix(&lt);
    let residual = (&(&inv * l) - &Matrix::identity(m)).frobenius_norm();
    let tolerance = 1e-10 * m as f64;
    if residual > tolerance {
        return Err(LinalgError::Residual {
            op: "left_inverse_laplacian",
            residual,
            tolerance,
        });
    }
    Ok(inv)
}
