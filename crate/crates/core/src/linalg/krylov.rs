use crate::error::{Error, Result};

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Estimate of `|A|`; when positive, convergence is measured by `|r| / (|b| + |A| |x|)`.
    pub op_norm: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000, op_norm: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    /// Final `|b - Ax| / (|b| + op_norm |x|)`, recomputed from scratch.
    pub residual: f64,
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn scale(bnorm: f64, x: &[f64], opts: KrylovOptions) -> f64 {
    if opts.op_norm > 0.0 {
        bnorm + opts.op_norm * norm(x)
    } else {
        bnorm
    }
}

fn true_residual(op: &dyn LinearOperator, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    op.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm(r)
}

/// Preconditioned conjugate gradients for symmetric positive definite operators.
pub fn pcg(
    op: &dyn LinearOperator,
    pc: &dyn Preconditioner,
    b: &[f64],
    x: &mut [f64],
    opts: KrylovOptions,
) -> Result<KrylovStats> {
    let n = op.dim();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(KrylovStats { iterations: 0, residual: 0.0 });
    }
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut iterations = 0;
    // Outer loop restarts from the true residual if recurrence drift fakes convergence.
    loop {
        let rel = true_residual(op, b, x, &mut r) / scale(bnorm, x, opts);
        if rel <= opts.tol {
            return Ok(KrylovStats { iterations, residual: rel });
        }
        if iterations >= opts.max_iter {
            return Err(Error::SolverDivergence { iterations, residual: rel });
        }
        pc.apply(&r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while iterations < opts.max_iter {
            iterations += 1;
            op.apply(&p, &mut q);
            let pq = dot(&p, &q);
            if pq <= 0.0 || !pq.is_finite() {
                return Err(Error::SolverDivergence { iterations, residual: norm(&r) / scale(bnorm, x, opts) });
            }
            let alpha = rz / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            if norm(&r) / scale(bnorm, x, opts) <= 0.5 * opts.tol {
                break;
            }
            pc.apply(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}

/// Right-preconditioned BiCGSTAB for general nonsingular operators.
pub fn bicgstab(
    op: &dyn LinearOperator,
    pc: &dyn Preconditioner,
    b: &[f64],
    x: &mut [f64],
    opts: KrylovOptions,
) -> Result<KrylovStats> {
    let n = op.dim();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(KrylovStats { iterations: 0, residual: 0.0 });
    }
    let mut r = vec![0.0; n];
    let mut rhat = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut iterations = 0;
    loop {
        let rel = true_residual(op, b, x, &mut r) / scale(bnorm, x, opts);
        if rel <= opts.tol {
            return Ok(KrylovStats { iterations, residual: rel });
        }
        if iterations >= opts.max_iter {
            return Err(Error::SolverDivergence { iterations, residual: rel });
        }
        rhat.copy_from_slice(&r);
        p.fill(0.0);
        v.fill(0.0);
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        while iterations < opts.max_iter {
            iterations += 1;
            let rho_new = dot(&rhat, &r);
            if rho_new.abs() < 1e-300 || !rho_new.is_finite() {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            pc.apply(&p, &mut phat);
            op.apply(&phat, &mut v);
            let rv = dot(&rhat, &v);
            if rv == 0.0 || !rv.is_finite() {
                break;
            }
            alpha = rho / rv;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm(&s) / scale(bnorm, x, opts) <= 0.5 * opts.tol {
                for i in 0..n {
                    x[i] += alpha * phat[i];
                }
                break;
            }
            pc.apply(&s, &mut shat);
            op.apply(&shat, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            for i in 0..n {
                x[i] += alpha * phat[i] + omega * shat[i];
                r[i] = s[i] - omega * t[i];
            }
            if norm(&r) / scale(bnorm, x, opts) <= 0.5 * opts.tol || omega == 0.0 {
                break;
            }
        }
    }
}
