//! Analytic derivatives through symmetric eigendecompositions, matrix EPN
//! and HOSVD pieces, plus a central-difference oracle to check them.
//!
//! Derivatives with respect to a symmetric input use the symmetric
//! convention: the entry `(c, e)` of a gradient is the rate of change when
//! `X_ce` and `X_ec` each move by half of the step.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::spectral::{pn_derivative, pn_scalar, symmetrize, sym_eig, EigenDecomposition, PnKind, PnSpec};
use crate::tensor::{refold, unfold, DenseTensor, FeatureSet};

/// Eigenvalues closer than this fraction of `λ_max` count as repeated.
pub const EIGENGAP_TOL: f64 = 1e-6;

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Full Jacobian of a matrix-to-matrix map, `G[a,b,c,e] = ∂Y_ab/∂X_ce`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixGradient {
    dim: usize,
    data: Vec<f64>,
}

impl MatrixGradient {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim.pow(4)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn idx(&self, a: usize, b: usize, c: usize, e: usize) -> usize {
        ((a * self.dim + b) * self.dim + c) * self.dim + e
    }

    pub fn get(&self, a: usize, b: usize, c: usize, e: usize) -> f64 {
        self.data[self.idx(a, b, c, e)]
    }

    pub fn set(&mut self, a: usize, b: usize, c: usize, e: usize, v: f64) {
        let i = self.idx(a, b, c, e);
        self.data[i] = v;
    }

    /// Input sensitivity `Σ_ab upstream_ab G[a,b,·,·]`.
    pub fn vjp(&self, upstream: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let d = self.dim;
        if upstream.shape() != (d, d) {
            return shape(format!("upstream is {:?}, expected {d}x{d}", upstream.shape()));
        }
        Ok(DMatrix::from_fn(d, d, |c, e| {
            let mut s = 0.0;
            for a in 0..d {
                for b in 0..d {
                    s += upstream[(a, b)] * self.get(a, b, c, e);
                }
            }
            s
        }))
    }

    /// The slice `∂Y_ab/∂X` as a matrix.
    pub fn output_slice(&self, a: usize, b: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |c, e| self.get(a, b, c, e))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖self − other‖ / ‖other‖` (absolute when `other` vanishes).
    pub fn rel_err(&self, other: &MatrixGradient) -> Result<f64> {
        if self.dim != other.dim {
            return shape(format!("gradient dims {} vs {}", self.dim, other.dim));
        }
        let diff = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        Ok(rel(diff, other.frobenius_norm()))
    }
}

fn rel(diff: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        diff / reference
    } else {
        diff
    }
}

/// `‖a − b‖_F / ‖b‖_F`, absolute when `b` vanishes.
pub fn matrix_rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return shape(format!("{:?} vs {:?}", a.shape(), b.shape()));
    }
    Ok(rel((a - b).norm(), b.norm()))
}

fn check_square(x: &DMatrix<f64>) -> Result<usize> {
    if !x.is_square() || x.nrows() == 0 {
        return shape(format!("expected a non-empty square matrix, got {:?}", x.shape()));
    }
    Ok(x.nrows())
}

fn sym_perturbation(d: usize, c: usize, e: usize, h: f64) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(d, d);
    p[(c, e)] += h / 2.0;
    p[(e, c)] += h / 2.0;
    p
}

/// Central-difference Jacobian of `f` at `x` under symmetric perturbations.
pub fn finite_diff_oracle<F>(f: F, x: &DMatrix<f64>, h: f64) -> Result<MatrixGradient>
where
    F: Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    let d = check_square(x)?;
    if !(h > 0.0) {
        return invalid(format!("step must be positive, got {h}"));
    }
    let mut g = MatrixGradient::zeros(d);
    for c in 0..d {
        for e in 0..d {
            let p = sym_perturbation(d, c, e, h);
            let plus = f(&(x + &p))?;
            let minus = f(&(x - &p))?;
            if plus.shape() != (d, d) || minus.shape() != (d, d) {
                return shape("oracle map must return a matrix of the input's shape");
            }
            for a in 0..d {
                for b in 0..d {
                    let v = (plus[(a, b)] - minus[(a, b)]) / (2.0 * h);
                    if !v.is_finite() {
                        return invalid(format!("non-finite difference at input ({c}, {e})"));
                    }
                    g.set(a, b, c, e, v);
                }
            }
        }
    }
    Ok(g)
}

/// Central-difference gradient of a scalar function under symmetric
/// perturbations.
pub fn finite_diff_scalar<F>(f: F, x: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DMatrix<f64>) -> Result<f64>,
{
    let d = check_square(x)?;
    let mut g = DMatrix::zeros(d, d);
    for c in 0..d {
        for e in 0..d {
            let p = sym_perturbation(d, c, e, h);
            let v = (f(&(x + &p))? - f(&(x - &p))?) / (2.0 * h);
            if !v.is_finite() {
                return invalid(format!("non-finite difference at input ({c}, {e})"));
            }
            g[(c, e)] = v;
        }
    }
    Ok(g)
}

fn lambda_max(eig: &EigenDecomposition) -> f64 {
    eig.values.iter().fold(0.0f64, |m, l| m.max(l.abs()))
}

/// Smallest gap between `λ_i` and the rest of the spectrum.
fn gap_of(eig: &EigenDecomposition, i: usize) -> f64 {
    eig.values
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, l)| (l - eig.values[i]).abs())
        .fold(f64::INFINITY, f64::min)
}

fn require_simple(eig: &EigenDecomposition, indices: impl IntoIterator<Item = usize>) -> Result<()> {
    let tol = EIGENGAP_TOL * lambda_max(eig);
    for i in indices {
        let gap = gap_of(eig, i);
        if !(gap > tol) {
            return Err(Error::Degenerate(format!(
                "eigenvalue {i} ({}) has gap {gap:e} <= {tol:e}",
                eig.values[i]
            )));
        }
    }
    Ok(())
}

/// Smallest gap across the whole spectrum.
pub fn min_eigengap(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| (w[0] - w[1]).abs())
        .fold(f64::INFINITY, f64::min)
}

/// `(λ_j I − X)†` built from the spectrum: `Σ_{k≠j} u_k u_kᵀ / (λ_j − λ_k)`.
pub fn shifted_pinv(eig: &EigenDecomposition, j: usize) -> DMatrix<f64> {
    let d = eig.dim();
    let mut p = DMatrix::zeros(d, d);
    for k in (0..d).filter(|&k| k != j) {
        let u = eig.vectors.column(k);
        p += (u * u.transpose()) / (eig.values[j] - eig.values[k]);
    }
    p
}

/// `∂λ_i/∂X = u_i u_iᵀ`.
pub fn eig_value_grad(x: &DMatrix<f64>, i: usize) -> Result<DMatrix<f64>> {
    let d = check_square(x)?;
    if i >= d {
        return invalid(format!("eigen index {i} out of range for dim {d}"));
    }
    let eig = sym_eig(x)?;
    require_simple(&eig, [i])?;
    let u = eig.vectors.column(i);
    Ok(u * u.transpose())
}

/// `∂u_ij/∂X` for component `i` of eigenvector `j`:
/// `½ (P_ic u_ej + P_ie u_cj)` with `P = (λ_j I − X)†`.
pub fn eig_vector_grad(x: &DMatrix<f64>, i: usize, j: usize) -> Result<DMatrix<f64>> {
    let d = check_square(x)?;
    if i >= d || j >= d {
        return invalid(format!("indices ({i}, {j}) out of range for dim {d}"));
    }
    let eig = sym_eig(x)?;
    require_simple(&eig, [j])?;
    let p = shifted_pinv(&eig, j);
    let u = eig.vectors.column(j);
    Ok(DMatrix::from_fn(d, d, |c, e| 0.5 * (p[(i, c)] * u[e] + p[(i, e)] * u[c])))
}

/// Vector-Jacobian product of `X ↦ U g(Λ) Uᵀ` (unnormalized spectrum).
///
/// `X̄ = sym(2 Σ_j g_j P_j Ḡ u_j u_jᵀ + Σ_j g′_j (u_jᵀ Ḡ u_j) u_j u_jᵀ)` with
/// `Ḡ` the symmetrized upstream and `P_j = (λ_j I − X)†`.
pub fn epn_matrix_vjp(x: &DMatrix<f64>, spec: &PnSpec, upstream: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = check_square(x)?;
    if spec.kind() == PnKind::Grassmann {
        return invalid("the Grassmann map has no gradient");
    }
    if upstream.shape() != (d, d) {
        return shape(format!("upstream is {:?}, expected {d}x{d}", upstream.shape()));
    }
    let eig = sym_eig(x)?;
    require_simple(&eig, 0..d)?;
    let gs = symmetrize(upstream);
    let mut out = DMatrix::zeros(d, d);
    for j in 0..d {
        let l = eig.values[j];
        let g = pn_scalar(l, spec)?;
        let dg = pn_derivative(l, spec)?;
        let u = eig.vectors.column(j).into_owned();
        let uut = &u * u.transpose();
        if g != 0.0 {
            out += (shifted_pinv(&eig, j) * &gs * &uut) * (2.0 * g);
        }
        out += uut * (dg * (u.transpose() * &gs * &u)[(0, 0)]);
    }
    Ok(symmetrize(&out))
}

/// `U g(Λ) Uᵀ` on the raw spectrum, the forward map behind [`epn_matrix_vjp`].
pub fn epn_matrix_raw(x: &DMatrix<f64>, spec: &PnSpec) -> Result<DMatrix<f64>> {
    let eig = sym_eig(x)?;
    let g = eig
        .values
        .iter()
        .map(|&l| pn_scalar(l, spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(eig.with_spectrum(&g))
}

/// Eigenvectors of `M₁M₁ᵀ` for the mode-1 unfolding of `t`, the shared HOSVD
/// factor before rank truncation.
pub fn unfolded_factor(t: &DenseTensor) -> Result<DMatrix<f64>> {
    let m = unfold(t, 0)?;
    Ok(sym_eig(&symmetrize(&(&m * m.transpose())))?.vectors)
}

/// Pull a sensitivity on the factor `U` of `M₁M₁ᵀ` back to the tensor:
/// `S̄ = Σ_j P_j ū_j u_jᵀ`, `M̄ = (S̄ + S̄ᵀ) M₁`, refolded along mode 1.
pub fn unfolded_factor_vjp(t: &DenseTensor, upstream: &DMatrix<f64>) -> Result<DenseTensor> {
    if t.order() != 3 {
        return invalid(format!("expected an order-3 tensor, got order {}", t.order()));
    }
    let m = unfold(t, 0)?;
    let d = m.nrows();
    if upstream.shape() != (d, d) {
        return shape(format!("upstream is {:?}, expected {d}x{d}", upstream.shape()));
    }
    let eig = sym_eig(&symmetrize(&(&m * m.transpose())))?;
    require_simple(&eig, 0..d)?;
    let mut sbar = DMatrix::zeros(d, d);
    for j in 0..d {
        let ubar = upstream.column(j);
        if ubar.iter().all(|&v| v == 0.0) {
            continue;
        }
        sbar += shifted_pinv(&eig, j) * ubar * eig.vectors.column(j).transpose();
    }
    let mbar = (&sbar + sbar.transpose()) * m;
    refold(&mbar, t.dims(), 0)
}

/// Average of an order-3 tensor over the six index permutations.
pub fn symmetrize3(t: &DenseTensor) -> Result<DenseTensor> {
    if t.order() != 3 || t.dims().iter().any(|&n| n != t.dims()[0]) {
        return invalid("expected a cubical order-3 tensor");
    }
    let d = t.dims()[0];
    let mut out = DenseTensor::zeros(vec![d; 3])?;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let s = t.get(&[i, j, k])
                    + t.get(&[i, k, j])
                    + t.get(&[j, i, k])
                    + t.get(&[j, k, i])
                    + t.get(&[k, i, j])
                    + t.get(&[k, j, i]);
                out.set(&[i, j, k], s / 6.0);
            }
        }
    }
    Ok(out)
}

/// `∂λ_{u,v,w}/∂φ_n` for every feature vector, with `u, v, w`, the weights
/// and the mean held fixed:
/// `(w_n³/N)[⟨p,v⟩⟨p,w⟩u + ⟨p,u⟩⟨p,w⟩v + ⟨p,u⟩⟨p,v⟩w]`, `p = φ_n − μ`.
pub fn core_coefficient_grad(fs: &FeatureSet, u: &[f64], v: &[f64], w: &[f64]) -> Result<Vec<Vec<f64>>> {
    // reuses the unit-norm checks
    crate::hosvd::core_coefficient(fs, u, v, w)?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let n = fs.len() as f64;
    Ok(fs
        .vectors()
        .iter()
        .zip(fs.weights())
        .map(|(phi, &wt)| {
            let p: Vec<f64> = phi.iter().zip(fs.mean()).map(|(a, m)| a - m).collect();
            let (pu, pv, pw) = (dot(&p, u), dot(&p, v), dot(&p, w));
            let c = wt.powi(3) / n;
            (0..p.len())
                .map(|k| c * (pv * pw * u[k] + pu * pw * v[k] + pu * pv * w[k]))
                .collect()
        })
        .collect())
}

/// Outcome of one gradient check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub op: String,
    pub d: usize,
    pub seed: u64,
    pub rel_err: f64,
    pub pass: bool,
}

/// Ops known to [`gradcheck`], with their pass thresholds.
pub const GRADCHECK_OPS: &[(&str, f64)] = &[
    ("eig_value_grad", 1e-6),
    ("eig_vector_grad", 1e-5),
    ("epn_vjp", 1e-5),
    ("unfolded_factor_vjp", 1e-4),
    ("core_coefficient_grad", 1e-7),
];

/// Minimum eigengap of [`random_spd`] draws (for `d ≤ 6`).
pub const RANDOM_SPD_GAP: f64 = 0.05;

/// Random SPD matrix `Q diag(λ) Qᵀ` with a random orthogonal `Q` and
/// eigenvalues in `(0, 1]` spaced by at least [`RANDOM_SPD_GAP`] when
/// `d ≤ 6` (larger `d` shrinks the spacing to stay in `(0, 1]`).
pub fn random_spd(d: usize, seed: u64) -> DMatrix<f64> {
    use rand::Rng;
    let mut rng = crate::seeded_rng(seed);
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let q = a.qr().q();
    let mut level = RANDOM_SPD_GAP;
    let mut values: Vec<f64> = (0..d)
        .map(|_| {
            level += RANDOM_SPD_GAP + 0.1 * rng.random::<f64>();
            level
        })
        .collect();
    let top = values[d - 1].max(1.0);
    values.iter_mut().for_each(|l| *l /= top);
    let mut scaled = q.clone();
    for (mut col, &l) in scaled.column_iter_mut().zip(&values) {
        col *= l;
    }
    symmetrize(&(scaled * q.transpose()))
}

/// Random super-symmetric order-3 tensor pooled from `2d` Gaussian vectors.
pub fn random_supersym(d: usize, seed: u64) -> Result<DenseTensor> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = crate::seeded_rng(seed);
    let vectors = (0..2 * d)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    crate::tensor::pool(&FeatureSet::new(vectors)?, 3)
}

fn random_upstream(d: usize, seed: u64) -> DMatrix<f64> {
    use rand::Rng;
    let mut rng = crate::seeded_rng(seed ^ 0x5eed_u64);
    DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0))
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Compare an analytic gradient against finite differences on a seeded
/// random input. `spec` is used by `epn_vjp` only (default `sigme:4`).
///
/// Degenerate draws surface as [`Error::Degenerate`].
pub fn gradcheck(op: &str, d: usize, seed: u64, spec: Option<&PnSpec>) -> Result<GradCheckReport> {
    let threshold = GRADCHECK_OPS
        .iter()
        .find(|(name, _)| *name == op)
        .map(|&(_, t)| t)
        .ok_or_else(|| Error::InvalidInput(format!("unknown gradient op {op:?}")))?;
    if d < 2 {
        return invalid(format!("dimension must be at least 2, got {d}"));
    }
    let h = FD_STEP;
    let rel_err = match op {
        "eig_value_grad" => {
            let x = random_spd(d, seed);
            let mut worst = 0.0f64;
            for i in 0..d {
                let an = eig_value_grad(&x, i)?;
                let fd = finite_diff_scalar(|y| Ok(sym_eig(y)?.values[i]), &x, h)?;
                worst = worst.max(matrix_rel_err(&an, &fd)?);
            }
            worst
        }
        "eig_vector_grad" => {
            let x = random_spd(d, seed);
            let mut worst = 0.0f64;
            for j in 0..d {
                for i in 0..d {
                    let an = eig_vector_grad(&x, i, j)?;
                    let fd = finite_diff_scalar(|y| Ok(sym_eig(y)?.vectors[(i, j)]), &x, h)?;
                    worst = worst.max(matrix_rel_err(&an, &fd)?);
                }
            }
            worst
        }
        "epn_vjp" => {
            let default = PnSpec::sigme(4.0)?;
            let spec = spec.unwrap_or(&default);
            let x = random_spd(d, seed);
            let up = random_upstream(d, seed);
            let an = epn_matrix_vjp(&x, spec, &up)?;
            let fd = finite_diff_scalar(
                |y| Ok(epn_matrix_raw(y, spec)?.component_mul(&up).sum()),
                &x,
                h,
            )?;
            matrix_rel_err(&an, &fd)?
        }
        "unfolded_factor_vjp" => {
            let t = random_supersym(d, seed)?;
            let up = random_upstream(d, seed);
            let an = unfolded_factor_vjp(&t, &up)?;
            let f = |tt: &DenseTensor| -> Result<f64> { Ok(unfolded_factor(tt)?.component_mul(&up).sum()) };
            let mut diff = 0.0;
            let mut norm = 0.0;
            for k in 0..t.data().len() {
                let mut plus = t.data().to_vec();
                let mut minus = t.data().to_vec();
                plus[k] += h;
                minus[k] -= h;
                let fd = (f(&DenseTensor::new(t.dims().to_vec(), plus)?)?
                    - f(&DenseTensor::new(t.dims().to_vec(), minus)?)?)
                    / (2.0 * h);
                diff += (an.data()[k] - fd).powi(2);
                norm += fd * fd;
            }
            rel(diff.sqrt(), norm.sqrt())
        }
        "core_coefficient_grad" => {
            use rand_distr::{Distribution, StandardNormal};
            let mut rng = crate::seeded_rng(seed);
            let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
            let vectors: Vec<Vec<f64>> = (0..2 * d).map(|_| draw(d)).collect();
            let (u, v, w) = (unit(draw(d)), unit(draw(d)), unit(draw(d)));
            let fs = FeatureSet::new(vectors.clone())?;
            let an = core_coefficient_grad(&fs, &u, &v, &w)?;
            let mut diff = 0.0;
            let mut norm = 0.0;
            for n in 0..vectors.len() {
                for k in 0..d {
                    let mut plus = vectors.clone();
                    let mut minus = vectors.clone();
                    plus[n][k] += h;
                    minus[n][k] -= h;
                    let fd = (crate::hosvd::core_coefficient(&FeatureSet::new(plus)?, &u, &v, &w)?
                        - crate::hosvd::core_coefficient(&FeatureSet::new(minus)?, &u, &v, &w)?)
                        / (2.0 * h);
                    diff += (an[n][k] - fd).powi(2);
                    norm += fd * fd;
                }
            }
            rel(diff.sqrt(), norm.sqrt())
        }
        _ => unreachable!(),
    };
    Ok(GradCheckReport {
        op: op.to_string(),
        d,
        seed,
        rel_err,
        pass: rel_err < threshold,
    })
}
