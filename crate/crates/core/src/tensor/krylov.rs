//! Local Krylov solvers for sweep algorithms: lowest eigenpair of an
//! effective Hamiltonian and short-time Lanczos exponentials.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::linalg::eigh;
use crate::error::{Error, Result};

/// Lowest eigenpair of a symmetric operator given through `matvec`, with a
/// warm start. Residual target is relative to the Ritz value scale.
pub(crate) fn lanczos_ground(
    matvec: &mut dyn FnMut(&[f64], &mut [f64]),
    v0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(f64, Vec<f64>)> {
    let dim = v0.len();
    let m_max = max_iter.min(dim).max(2);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m_max);
    let mut v = v0.to_vec();
    let n0 = norm(&v);
    if n0 == 0.0 {
        return Err(Error::numerical("Lanczos started from the zero vector"));
    }
    v.iter_mut().for_each(|x| *x /= n0);
    basis.push(v);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];

    loop {
        let j = basis.len() - 1;
        matvec(&basis[j], &mut w);
        let alpha = dot(&basis[j], &w);
        alphas.push(alpha);
        for q in &basis {
            let c = dot(q, &w);
            w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
        }
        let beta = norm(&w);
        let m = alphas.len();

        // Ritz extraction on the tridiagonal projection.
        let mut t = Array2::<f64>::zeros((m, m));
        for i in 0..m {
            t[[i, i]] = alphas[i];
            if i > 0 {
                t[[i, i - 1]] = betas[i - 1];
                t[[i - 1, i]] = betas[i - 1];
            }
        }
        let (vals, vecs) = eigh(t.view())?;
        let theta = vals[0];
        let resid = beta * vecs[[m - 1, 0]].abs();
        let scale = theta.abs().max(1.0);
        if resid < tol * scale || beta < 1e-14 * scale || m == m_max {
            let mut y = vec![0.0; dim];
            for (i, q) in basis.iter().enumerate() {
                let c = vecs[[i, 0]];
                y.iter_mut().zip(q).for_each(|(yi, qi)| *yi += c * qi);
            }
            let n = norm(&y);
            y.iter_mut().for_each(|x| *x /= n);
            return Ok((theta, y));
        }
        betas.push(beta);
        let mut q = std::mem::replace(&mut w, vec![0.0; dim]);
        q.iter_mut().for_each(|x| *x /= beta);
        basis.push(q);
    }
}

/// `exp(−i H dt) v` for a Hermitian effective operator, Lanczos with
/// tolerance `tol` on the residual estimate.
pub(crate) fn lanczos_expm(
    matvec: &mut dyn FnMut(&[C64], &mut [C64]),
    v0: &[C64],
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<C64>> {
    let dim = v0.len();
    let beta0 = cnorm(v0);
    if beta0 == 0.0 {
        return Ok(v0.to_vec());
    }
    let m_max = max_iter.min(dim).max(2);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m_max);
    basis.push(v0.iter().map(|x| x / beta0).collect());
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); dim];

    loop {
        let j = basis.len() - 1;
        matvec(&basis[j], &mut w);
        let alpha = basis[j].iter().zip(&w).map(|(q, x)| (q.conj() * x).re).sum::<f64>();
        alphas.push(alpha);
        for q in &basis {
            let c: C64 = q.iter().zip(&w).map(|(qi, wi)| qi.conj() * wi).sum();
            w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
        }
        let beta = cnorm(&w);
        let m = alphas.len();

        let mut t = Array2::<f64>::zeros((m, m));
        for i in 0..m {
            t[[i, i]] = alphas[i];
            if i > 0 {
                t[[i, i - 1]] = betas[i - 1];
                t[[i - 1, i]] = betas[i - 1];
            }
        }
        let (vals, vecs) = eigh(t.view())?;
        let mut u = vec![C64::new(0.0, 0.0); m];
        for (col, &lam) in vals.iter().enumerate() {
            let phase = C64::from_polar(1.0, -lam * dt);
            let w0 = vecs[[0, col]];
            for (i, ui) in u.iter_mut().enumerate() {
                *ui += vecs[[i, col]] * w0 * phase;
            }
        }
        let tail = beta * u[m - 1].norm() * dt.abs();
        if tail < tol || beta < 1e-14 || m == m_max {
            let mut out = vec![C64::new(0.0, 0.0); dim];
            for (i, q) in basis.iter().enumerate() {
                let c = u[i] * beta0;
                out.iter_mut().zip(q).for_each(|(o, qi)| *o += c * qi);
            }
            return Ok(out);
        }
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn cnorm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
