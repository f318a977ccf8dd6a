//! Sparse linear-algebra services: CSR storage, Jacobi-preconditioned
//! conjugate-gradient and stabilized bi-conjugate solvers, a dense direct
//! fallback for oracle testing, and a kernel-deflated solver for the
//! pure-Neumann pressure system.
//!
//! All reductions run in a fixed order so repeated solves are bit-identical.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

/// Accumulates (row, col, value) triplets; duplicates are summed.
pub struct CsrBuilder {
    n: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl CsrBuilder {
    pub fn new(n: usize) -> Self {
        CsrBuilder { n, triplets: Vec::new() }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        if value != 0.0 {
            self.triplets.push((row, col, value));
        }
    }

    pub fn build(mut self) -> CsrMatrix {
        self.triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx: Vec<usize> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &self.triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        // prefix sums
        for r in 0..self.n {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { n: self.n, row_ptr, col_idx, values }
    }
}

impl CsrMatrix {
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for r in 0..self.n {
            let mut acc = 0.0;
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[i] * x[self.col_idx[i]];
            }
            y[r] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[i] == r {
                    d[r] = self.values[i];
                }
            }
        }
        d
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.n * self.n];
        for r in 0..self.n {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                dense[r * self.n + self.col_idx[i]] = self.values[i];
            }
        }
        dense
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMethod {
    ConjugateGradient,
    BiCgStab,
    Direct,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Relative residual tolerance.
    pub tol: f64,
    /// Iteration cap; `None` means 10 * dimension.
    pub max_iter: Option<usize>,
}

impl SolverConfig {
    pub fn cg() -> Self {
        SolverConfig { method: SolverMethod::ConjugateGradient, tol: 1e-10, max_iter: None }
    }

    pub fn bicgstab() -> Self {
        SolverConfig { method: SolverMethod::BiCgStab, tol: 1e-10, max_iter: None }
    }

    pub fn direct() -> Self {
        SolverConfig { method: SolverMethod::Direct, tol: 1e-10, max_iter: None }
    }

    fn cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(10 * n.max(1))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    pub stats: SolveStats,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LinalgError {
    NoConvergence { iterations: usize, residual: f64 },
    Breakdown,
    /// Right-hand side has a kernel component beyond tolerance.
    IncompatibleData { kernel_fraction: f64 },
    DimensionMismatch,
    DirectTooLarge { n: usize },
    SingularMatrix,
    BadConfig(&'static str),
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NoConvergence { iterations, residual } => {
                write!(f, "solver did not converge in {iterations} iterations (residual {residual:e})")
            }
            LinalgError::Breakdown => write!(f, "solver breakdown (zero curvature direction)"),
            LinalgError::IncompatibleData { kernel_fraction } => {
                write!(f, "right-hand side incompatible with singular system (kernel fraction {kernel_fraction:e})")
            }
            LinalgError::DimensionMismatch => write!(f, "dimension mismatch"),
            LinalgError::DirectTooLarge { n } => {
                write!(f, "direct factorization limited to dimension 2000, got {n}")
            }
            LinalgError::SingularMatrix => write!(f, "matrix is singular to working precision"),
            LinalgError::BadConfig(what) => write!(f, "bad solver config: {what}"),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

fn validate(m: &CsrMatrix, b: &[f64], cfg: &SolverConfig) -> Result<(), LinalgError> {
    if b.len() != m.n {
        return Err(LinalgError::DimensionMismatch);
    }
    if !(cfg.tol > 0.0 && cfg.tol < 1.0) {
        return Err(LinalgError::BadConfig("tolerance must lie in (0, 1)"));
    }
    if cfg.max_iter == Some(0) {
        return Err(LinalgError::BadConfig("iteration cap must be positive"));
    }
    Ok(())
}

fn jacobi(m: &CsrMatrix) -> Vec<f64> {
    m.diagonal().iter().map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 }).collect()
}

/// Solve `M x = b` with the configured method.
pub fn solve(m: &CsrMatrix, b: &[f64], cfg: &SolverConfig) -> Result<Solution, LinalgError> {
    validate(m, b, cfg)?;
    match cfg.method {
        SolverMethod::ConjugateGradient => cg(m, b, cfg, None),
        SolverMethod::BiCgStab => bicgstab(m, b, cfg),
        SolverMethod::Direct => dense_solve(m, b),
    }
}

/// Solve a symmetric positive semidefinite system whose kernel is spanned by
/// `kernel`. The right-hand side is orthogonalized against the kernel; the
/// returned solution is kernel-orthogonal.
pub fn solve_singular_neumann(
    m: &CsrMatrix,
    b: &[f64],
    kernel: &[f64],
    cfg: &SolverConfig,
) -> Result<Solution, LinalgError> {
    validate(m, b, cfg)?;
    if kernel.len() != m.n {
        return Err(LinalgError::DimensionMismatch);
    }
    let kk = dot(kernel, kernel);
    if kk == 0.0 {
        return Err(LinalgError::BadConfig("kernel vector must be nonzero"));
    }
    let bk = dot(b, kernel);
    let b_norm = norm(b);
    let mut b_proj: Vec<f64> = b.iter().zip(kernel).map(|(&bi, &ki)| bi - bk / kk * ki).collect();
    let kernel_fraction = if b_norm > 0.0 { bk.abs() / (libm::sqrt(kk) * b_norm) } else { 0.0 };
    if kernel_fraction > 1e-8 {
        return Err(LinalgError::IncompatibleData { kernel_fraction });
    }
    let mut sol = match cfg.method {
        SolverMethod::Direct => {
            // deflate by pinning the kernel via a rank-one augmentation
            let mut dense = m.to_dense();
            let scale = m.values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
            for i in 0..m.n {
                for j in 0..m.n {
                    dense[i * m.n + j] += scale * kernel[i] * kernel[j] / kk;
                }
            }
            dense_solve_raw(m.n, dense, &b_proj)?
        }
        _ => cg(m, &b_proj, cfg, Some(kernel))?,
    };
    // enforce kernel-orthogonality of the returned solution
    let xk = dot(&sol.x, kernel);
    for (xi, &ki) in sol.x.iter_mut().zip(kernel) {
        *xi -= xk / kk * ki;
    }
    // report the residual against the projected right-hand side
    let mut r = vec![0.0; m.n];
    m.mul_vec(&sol.x, &mut r);
    for (ri, bi) in r.iter_mut().zip(&mut b_proj) {
        *ri -= *bi;
    }
    sol.stats.residual = norm(&r);
    Ok(sol)
}

fn cg(m: &CsrMatrix, b: &[f64], cfg: &SolverConfig, deflate: Option<&[f64]>) -> Result<Solution, LinalgError> {
    let n = m.n;
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(Solution { x: vec![0.0; n], stats: SolveStats::default() });
    }
    let inv_diag = jacobi(m);
    let kk = deflate.map(|k| dot(k, k));
    let project = |v: &mut Vec<f64>| {
        if let (Some(k), Some(kk)) = (deflate, kk) {
            let vk = dot(v, k);
            for (vi, &ki) in v.iter_mut().zip(k) {
                *vi -= vk / kk * ki;
            }
        }
    };

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];

    let cap = cfg.cap(n);
    for it in 1..=cap {
        m.mul_vec(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(LinalgError::Breakdown);
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let res = norm(&r);
        if res <= cfg.tol * b_norm {
            return Ok(Solution { x, stats: SolveStats { iterations: it, residual: res } });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinalgError::NoConvergence { iterations: cap, residual: norm(&r) / b_norm })
}

fn bicgstab(m: &CsrMatrix, b: &[f64], cfg: &SolverConfig) -> Result<Solution, LinalgError> {
    let n = m.n;
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(Solution { x: vec![0.0; n], stats: SolveStats::default() });
    }
    let inv_diag = jacobi(m);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut r0 = r.clone();
    let mut r0_norm = b_norm;
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut fresh_restart = true;

    let cap = cfg.cap(n);
    for it in 1..=cap {
        let rho_new = dot(&r0, &r);
        // near-orthogonal shadow residual stalls the recurrence; restart from
        // the true residual with a fresh shadow vector
        if rho_new.abs() <= 1e-12 * r0_norm * norm(&r) || omega == 0.0 {
            if fresh_restart {
                return Err(LinalgError::Breakdown);
            }
            m.mul_vec(&x, &mut t);
            for i in 0..n {
                r[i] = b[i] - t[i];
            }
            let res = norm(&r);
            if res <= cfg.tol * b_norm {
                return Ok(Solution { x, stats: SolveStats { iterations: it, residual: res } });
            }
            r0.copy_from_slice(&r);
            r0_norm = res;
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            fresh_restart = true;
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        for i in 0..n {
            y[i] = p[i] * inv_diag[i];
        }
        m.mul_vec(&y, &mut v);
        let r0v = dot(&r0, &v);
        if r0v == 0.0 {
            return Err(LinalgError::Breakdown);
        }
        alpha = rho / r0v;
        fresh_restart = false;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        let s_norm = norm(&s);
        if s_norm <= cfg.tol * b_norm {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            m.mul_vec(&x, &mut t);
            for i in 0..n {
                r[i] = b[i] - t[i];
            }
            let res = norm(&r);
            if res <= cfg.tol * b_norm {
                return Ok(Solution { x, stats: SolveStats { iterations: it, residual: res } });
            }
            // recurrence drifted from the true residual; restart
            r0.copy_from_slice(&r);
            r0_norm = res;
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            fresh_restart = true;
            continue;
        }
        for i in 0..n {
            z[i] = s[i] * inv_diag[i];
        }
        m.mul_vec(&z, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(LinalgError::Breakdown);
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        let res = norm(&r);
        if res <= cfg.tol * b_norm {
            m.mul_vec(&x, &mut t);
            for i in 0..n {
                r[i] = b[i] - t[i];
            }
            let true_res = norm(&r);
            if true_res <= cfg.tol * b_norm {
                return Ok(Solution { x, stats: SolveStats { iterations: it, residual: true_res } });
            }
            r0.copy_from_slice(&r);
            r0_norm = true_res;
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            fresh_restart = true;
        }
    }
    Err(LinalgError::NoConvergence { iterations: cap, residual: norm(&r) / b_norm })
}

fn dense_solve(m: &CsrMatrix, b: &[f64]) -> Result<Solution, LinalgError> {
    if m.n > 2000 {
        return Err(LinalgError::DirectTooLarge { n: m.n });
    }
    dense_solve_raw(m.n, m.to_dense(), b)
}

// Gaussian elimination with partial pivoting.
fn dense_solve_raw(n: usize, mut a: Vec<f64>, b: &[f64]) -> Result<Solution, LinalgError> {
    let mut x = b.to_vec();
    for col in 0..n {
        let mut pivot = col;
        for r in (col + 1)..n {
            if a[r * n + col].abs() > a[pivot * n + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * n + col].abs() < 1e-300 {
            return Err(LinalgError::SingularMatrix);
        }
        if pivot != col {
            for c in 0..n {
                a.swap(col * n + c, pivot * n + c);
            }
            x.swap(col, pivot);
        }
        let d = a[col * n + col];
        for r in (col + 1)..n {
            let factor = a[r * n + col] / d;
            if factor != 0.0 {
                for c in col..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
                x[r] -= factor * x[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for c in (col + 1)..n {
            acc -= a[col * n + c] * x[c];
        }
        x[col] = acc / a[col * n + col];
    }
    Ok(Solution { x, stats: SolveStats { iterations: 1, residual: 0.0 } })
}
