//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the library's numeric routines.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(r: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(r)).collect()
}

pub fn unit_vec(r: &mut impl Rng, n: usize) -> Vec<f64> {
    let v = gaussian_vec(r, n);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

pub fn gaussian_vectors(r: &mut impl Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| gaussian_vec(r, d)).collect()
}

/// Random orthogonal matrix by Gram-Schmidt on Gaussian columns.
pub fn random_rotation(r: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let mut q = DMatrix::<f64>::zeros(d, d);
    for j in 0..d {
        let mut v = gaussian_vec(r, d);
        for k in 0..j {
            let dot: f64 = (0..d).map(|i| v[i] * q[(i, k)]).sum();
            for i in 0..d {
                v[i] -= dot * q[(i, k)];
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for i in 0..d {
            q[(i, j)] = v[i] / n;
        }
    }
    q
}

/// SPD matrix `Q diag(values) Qᵀ`.
pub fn spd_with_spectrum(r: &mut impl Rng, values: &[f64]) -> DMatrix<f64> {
    let q = random_rotation(r, values.len());
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(values));
    let x = &q * d * q.transpose();
    (&x + x.transpose()) * 0.5
}

pub fn random_symmetric(r: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(r));
    (&a + a.transpose()) * 0.5
}

/// Cyclic Jacobi eigenvalue iteration. Returns eigenvalues sorted descending
/// and eigenvectors as columns, with each column's largest-magnitude entry
/// made positive.
pub fn jacobi_eig(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = v.column(src);
        let pivot = (0..n).fold(0, |b, k| if col[k].abs() > col[b].abs() { k } else { b });
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            vectors[(k, dst)] = sign * col[k];
        }
    }
    (values, vectors)
}

/// `V diag(g) Vᵀ` from explicit columns.
pub fn spectral_apply(values: &[f64], vectors: &DMatrix<f64>, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = values.len();
    DMatrix::from_fn(n, n, |i, j| (0..n).map(|k| vectors[(i, k)] * g(values[k]) * vectors[(j, k)]).sum())
}

/// Row-major flat index for a cube of side `d`.
pub fn idx3(d: usize, i: usize, j: usize, k: usize) -> usize {
    (i * d + j) * d + k
}

/// Direct loop `(1/N) Σ w_n^3 (φ_n − μ)_i (φ_n − μ)_j (φ_n − μ)_k`.
pub fn naive_pool3(vectors: &[Vec<f64>], weights: &[f64], mean: &[f64]) -> Vec<f64> {
    let d = mean.len();
    let mut out = vec![0.0; d * d * d];
    for (v, w) in vectors.iter().zip(weights) {
        let p: Vec<f64> = v.iter().zip(mean).map(|(a, m)| a - m).collect();
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    out[idx3(d, i, j, k)] += w.powi(3) * p[i] * p[j] * p[k];
                }
            }
        }
    }
    let n = vectors.len() as f64;
    out.iter_mut().for_each(|x| *x /= n);
    out
}

/// `Σ_i t_{i j k} v_i` style contraction along `mode` of a cube.
pub fn naive_mode3(t: &[f64], d: usize, v: &[f64], mode: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let (c, a, b) = match mode {
                    0 => (i, j, k),
                    1 => (j, i, k),
                    _ => (k, i, j),
                };
                out[a * d + b] += t[idx3(d, i, j, k)] * v[c];
            }
        }
    }
    out
}

/// `core_{abc} = Σ t_{ijk} U_{ia} U_{jb} U_{kc}` by direct summation.
pub fn naive_core(t: &[f64], d: usize, u: &DMatrix<f64>) -> Vec<f64> {
    let r = u.ncols();
    let mut out = vec![0.0; r * r * r];
    for a in 0..r {
        for b in 0..r {
            for c in 0..r {
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        for k in 0..d {
                            s += t[idx3(d, i, j, k)] * u[(i, a)] * u[(j, b)] * u[(k, c)];
                        }
                    }
                }
                out[idx3(r, a, b, c)] = s;
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
