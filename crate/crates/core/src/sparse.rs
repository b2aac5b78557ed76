//! Compressed sparse row matrices and a Jacobi-preconditioned conjugate
//! gradient solver for symmetric positive (semi)definite systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

/// Triplet accumulator; duplicates are summed on conversion.
#[derive(Debug, Default)]
pub(crate) struct Triplets {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n: usize) -> Self {
        Triplets {
            n,
            entries: Vec::new(),
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.entries.push((i, j, v));
    }

    pub fn into_csr(mut self) -> Csr {
        self.entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; self.n + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr {
            n: self.n,
            row_ptr,
            cols,
            vals,
        }
    }
}

impl Csr {
    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[i] = s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.cols[k] == i)
                    .map_or(0.0, |k| self.vals[k])
            })
            .collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` to relative residual `tol`.
///
/// With `singular` set, `A` is assumed to have the constants as its kernel:
/// the right-hand side must be orthogonal to them and the iterate is kept
/// mean-free.
pub(crate) fn pcg(a: &Csr, b: &[f64], tol: f64, singular: bool) -> Result<(Vec<f64>, CgReport)> {
    let n = a.n;
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Configuration(
            "stiffness matrix has a non-positive diagonal entry".into(),
        ));
    }
    let project = |v: &mut [f64]| {
        if singular {
            let m = v.iter().sum::<f64>() / n as f64;
            v.iter_mut().for_each(|x| *x -= m);
        }
    };
    let mut r = b.to_vec();
    project(&mut r);
    let bnorm = dot(&r, &r).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            CgReport {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let max_iter = 20 * n + 100;
    for it in 1..=max_iter {
        a.mul(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Configuration(
                "system matrix is not positive definite".into(),
            ));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol {
            project(&mut x);
            // confirm with a true residual
            let ax = a.apply(&x);
            let mut res: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            project(&mut res);
            let true_rel = dot(&res, &res).sqrt() / bnorm;
            if true_rel <= 10.0 * tol {
                return Ok((
                    x,
                    CgReport {
                        iterations: it,
                        relative_residual: true_rel,
                    },
                ));
            }
            r = res;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rel = dot(&r, &r).sqrt() / bnorm;
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: rel,
    })
}
