//! Symmetric eigendecomposition and the spectral (eigenvalue-wise) power
//! normalization operators.
//!
//! Every matrix operator here has the form `U diag(g(λ)) Uᵀ` for a scalar
//! function `g` chosen by a [`PnSpec`], so all of them commute with
//! orthogonal conjugation.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, shape, Error, Result};

/// Largest tolerated asymmetry `|X − Xᵀ|`, relative to `max(1, max|X|)`.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Negative eigenvalues down to this value are clamped to zero for operators
/// that need a positive semi-definite input; anything lower is an error.
pub const NEGATIVE_CLAMP: f64 = -1e-10;

/// Minimal gap between the q-th and (q+1)-th eigenvalue for a Grassmann
/// projector to be well defined.
pub const GRASSMANN_SEPARATION: f64 = 1e-8;

/// Eigenvalues sorted in descending order with their orthonormal
/// eigenvectors stored column-wise.
///
/// Each eigenvector is oriented so that its largest-magnitude component is
/// positive (the first such component on ties).
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `U diag(f(λ_i)) Uᵀ`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let g: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        self.with_spectrum(&g)
    }

    /// `U diag(g) Uᵀ` for an explicit spectrum.
    pub fn with_spectrum(&self, g: &[f64]) -> DMatrix<f64> {
        let u = &self.vectors;
        let mut scaled = u.clone();
        for (mut col, &gi) in scaled.column_iter_mut().zip(g) {
            col *= gi;
        }
        symmetrize(&(scaled * u.transpose()))
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.with_spectrum(&self.values)
    }

    /// Pseudo-inverse cutoff `d · ε · λ_max`.
    pub fn rcut(&self) -> f64 {
        let lmax = self.values.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        self.dim() as f64 * f64::EPSILON * lmax
    }
}

/// `(A + Aᵀ)/2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn check_symmetric(x: &DMatrix<f64>) -> Result<()> {
    if !x.is_square() {
        return shape(format!("expected a square matrix, got {}x{}", x.nrows(), x.ncols()));
    }
    if x.nrows() == 0 {
        return invalid("empty matrix");
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    let scale = x.amax().max(1.0);
    let asym = (x - x.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return invalid(format!("matrix is not symmetric (max |X - Xᵀ| = {asym:e})"));
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix with a deterministic ordering
/// and sign convention.
pub fn sym_eig(x: &DMatrix<f64>) -> Result<EigenDecomposition> {
    check_symmetric(x)?;
    let eig = SymmetricEigen::new(symmetrize(x));
    let d = x.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    // stable: ties keep the solver's column order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for (k, v) in col.iter().enumerate() {
            if v.abs() > col[pivot].abs() {
                pivot = k;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(dst, &(col * sign));
    }
    Ok(EigenDecomposition { values, vectors })
}

/// The family of spectral power normalizers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PnKind {
    /// `λ^γ`, γ ∈ (0, 1].
    Gamma,
    /// `1 − (1 − λ)^η`, η ≥ 1.
    MaxExp,
    /// `asinh(γ′ λ)`, γ′ ∈ (0, 1].
    AsinhE,
    /// `2 / (1 + e^{−η′ λ}) − 1`, η′ ≥ 1.
    SigmE,
    /// Heat diffusion on the covariance side, `e^{−t/λ}`, t > 0.
    Hdp,
    /// Rank-q spectral step function, integer q ≥ 1.
    Grassmann,
}

impl PnKind {
    pub const ALL: [PnKind; 6] = [
        PnKind::Gamma,
        PnKind::MaxExp,
        PnKind::AsinhE,
        PnKind::SigmE,
        PnKind::Hdp,
        PnKind::Grassmann,
    ];

    /// Kinds defined only on a non-negative spectrum.
    pub fn requires_psd(self) -> bool {
        matches!(self, PnKind::Gamma | PnKind::MaxExp | PnKind::Hdp | PnKind::Grassmann)
    }

    pub fn name(self) -> &'static str {
        match self {
            PnKind::Gamma => "gamma",
            PnKind::MaxExp => "maxexp",
            PnKind::AsinhE => "asinhe",
            PnKind::SigmE => "sigme",
            PnKind::Hdp => "hdp",
            PnKind::Grassmann => "grassmann",
        }
    }
}

/// An operator kind together with its validated parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PnSpec {
    kind: PnKind,
    param: f64,
}

impl PnSpec {
    pub fn new(kind: PnKind, param: f64) -> Result<Self> {
        let ok = param.is_finite()
            && match kind {
                PnKind::Gamma | PnKind::AsinhE => param > 0.0 && param <= 1.0,
                PnKind::MaxExp | PnKind::SigmE => param >= 1.0,
                PnKind::Hdp => param > 0.0,
                PnKind::Grassmann => param >= 1.0 && param.fract() == 0.0,
            };
        if !ok {
            return invalid(format!("parameter {param} out of range for {}", kind.name()));
        }
        Ok(Self { kind, param })
    }

    pub fn gamma(gamma: f64) -> Result<Self> {
        Self::new(PnKind::Gamma, gamma)
    }

    pub fn maxexp(eta: f64) -> Result<Self> {
        Self::new(PnKind::MaxExp, eta)
    }

    pub fn asinhe(gamma: f64) -> Result<Self> {
        Self::new(PnKind::AsinhE, gamma)
    }

    pub fn sigme(eta: f64) -> Result<Self> {
        Self::new(PnKind::SigmE, eta)
    }

    pub fn hdp(t: f64) -> Result<Self> {
        Self::new(PnKind::Hdp, t)
    }

    pub fn grassmann(q: usize) -> Result<Self> {
        Self::new(PnKind::Grassmann, q as f64)
    }

    pub fn kind(&self) -> PnKind {
        self.kind
    }

    pub fn param(&self) -> f64 {
        self.param
    }
}

impl fmt::Display for PnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.name(), self.param)
    }
}

impl FromStr for PnSpec {
    type Err = Error;

    /// Parses `kind:param`, e.g. `maxexp:20`, `sigme:4`, `gamma:0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("expected kind:param, got {s:?}")))?;
        let kind = match name.to_ascii_lowercase().as_str() {
            "gamma" => PnKind::Gamma,
            "maxexp" => PnKind::MaxExp,
            "asinhe" => PnKind::AsinhE,
            "sigme" => PnKind::SigmE,
            "hdp" => PnKind::Hdp,
            "grassmann" => PnKind::Grassmann,
            other => return invalid(format!("unknown operator {other:?}")),
        };
        let param: f64 = param
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad parameter {param:?}")))?;
        PnSpec::new(kind, param)
    }
}

/// Scalar operator `g(λ)`.
pub fn pn_scalar(lambda: f64, spec: &PnSpec) -> Result<f64> {
    if !lambda.is_finite() {
        return invalid(format!("non-finite eigenvalue {lambda}"));
    }
    let p = spec.param;
    match spec.kind {
        PnKind::Gamma => {
            if lambda < 0.0 {
                return domain(format!("Gamma needs λ >= 0, got {lambda}"));
            }
            Ok(lambda.powf(p))
        }
        PnKind::MaxExp => {
            if !(0.0..=1.0).contains(&lambda) {
                return domain(format!("MaxExp needs λ in [0, 1], got {lambda}"));
            }
            Ok(1.0 - (1.0 - lambda).powf(p))
        }
        PnKind::AsinhE => Ok((p * lambda).asinh()),
        PnKind::SigmE => Ok((0.5 * p * lambda).tanh()),
        PnKind::Hdp => {
            if lambda < 0.0 {
                return domain(format!("HDP needs λ >= 0, got {lambda}"));
            }
            if lambda == 0.0 {
                return Ok(0.0);
            }
            Ok((-p / lambda).exp())
        }
        PnKind::Grassmann => {
            invalid("the Grassmann map is rank-based and has no pointwise form")
        }
    }
}

/// Derivative `g′(λ)`.
pub fn pn_derivative(lambda: f64, spec: &PnSpec) -> Result<f64> {
    let p = spec.param;
    match spec.kind {
        PnKind::Gamma => {
            if lambda < 0.0 || (lambda == 0.0 && p < 1.0) {
                return domain(format!("Gamma derivative undefined at λ = {lambda}"));
            }
            Ok(if p == 1.0 { 1.0 } else { p * lambda.powf(p - 1.0) })
        }
        PnKind::MaxExp => {
            if !(0.0..=1.0).contains(&lambda) {
                return domain(format!("MaxExp needs λ in [0, 1], got {lambda}"));
            }
            Ok(p * (1.0 - lambda).powf(p - 1.0))
        }
        PnKind::AsinhE => Ok(p / (1.0 + (p * lambda).powi(2)).sqrt()),
        PnKind::SigmE => {
            let s = 1.0 / (1.0 + (-p * lambda).exp());
            Ok(2.0 * p * s * (1.0 - s))
        }
        PnKind::Hdp => {
            if lambda < 0.0 {
                return domain(format!("HDP needs λ >= 0, got {lambda}"));
            }
            if lambda == 0.0 {
                return Ok(0.0);
            }
            Ok((-p / lambda).exp() * p / (lambda * lambda))
        }
        PnKind::Grassmann => invalid("the Grassmann map is not differentiable"),
    }
}

/// Divide a spectrum by `Σ|λ_i|`.
pub fn normalize_spectrum(values: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = values.iter().map(|v| v.abs()).sum();
    if total == 0.0 || !total.is_finite() {
        return invalid("cannot normalize an all-zero or non-finite spectrum");
    }
    Ok(values.iter().map(|v| v / total).collect())
}

/// Spectrum passed to `g` by [`epn_matrix`]: clamped for PSD-only kinds,
/// optionally normalized, and range-checked for MaxExp.
pub fn prepared_spectrum(eig: &EigenDecomposition, spec: &PnSpec, normalize: bool) -> Result<Vec<f64>> {
    let mut values = eig.values.clone();
    if spec.kind.requires_psd() {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < NEGATIVE_CLAMP {
            return domain(format!(
                "{} needs a positive semi-definite input, smallest eigenvalue is {min:e}",
                spec.kind.name()
            ));
        }
        values.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    if normalize {
        values = normalize_spectrum(&values)?;
    }
    if spec.kind == PnKind::MaxExp {
        if let Some(v) = values.iter().find(|v| **v > 1.0) {
            return domain(format!(
                "MaxExp needs eigenvalues <= 1 (got {v}); enable spectrum normalization"
            ));
        }
    }
    Ok(values)
}

/// Matrix EPN `𝓖(X) = U diag(g(λ)) Uᵀ`, with the spectrum optionally
/// normalized by `Σ|λ_i|` first. The Grassmann kind routes to
/// [`grassmann_map`] and ignores `normalize`.
pub fn epn_matrix(x: &DMatrix<f64>, spec: &PnSpec, normalize: bool) -> Result<DMatrix<f64>> {
    if spec.kind == PnKind::Grassmann {
        return grassmann_map(x, spec.param as usize);
    }
    let eig = sym_eig(x)?;
    let values = prepared_spectrum(&eig, spec, normalize)?;
    let g = values
        .iter()
        .map(|&l| pn_scalar(l, spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(eig.with_spectrum(&g))
}

/// Projector onto the top-`q` eigenvectors, `U_{:,1:q} U_{:,1:q}ᵀ`.
pub fn grassmann_map(x: &DMatrix<f64>, q: usize) -> Result<DMatrix<f64>> {
    let eig = sym_eig(x)?;
    let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < NEGATIVE_CLAMP {
        return domain(format!("Grassmann map needs an SPSD input, smallest eigenvalue {min:e}"));
    }
    let rcut = eig.rcut();
    let rank = eig.values.iter().filter(|&&l| l > rcut).count();
    if q == 0 || q >= rank {
        return domain(format!("Grassmann rank q = {q} must satisfy 1 <= q < rank = {rank}"));
    }
    let gap = eig.values[q - 1] - eig.values[q];
    if gap <= GRASSMANN_SEPARATION {
        return Err(Error::Degenerate(format!(
            "eigenvalues {q} and {} are separated by only {gap:e}",
            q + 1
        )));
    }
    let g: Vec<f64> = (0..eig.dim()).map(|i| if i < q { 1.0 } else { 0.0 }).collect();
    Ok(eig.with_spectrum(&g))
}

/// Precision matrix `Q = X⁻¹` (the loopy graph Laplacian of a Gaussian
/// Markov random field with covariance `X`).
///
/// Eigenvalues at or below `d · ε · λ_max` are treated as zero: an error
/// unless `pseudo_inverse` is set, in which case they are dropped.
pub fn precision_laplacian(x: &DMatrix<f64>, pseudo_inverse: bool) -> Result<DMatrix<f64>> {
    let eig = sym_eig(x)?;
    let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < NEGATIVE_CLAMP {
        return domain(format!("precision needs an SPSD input, smallest eigenvalue {min:e}"));
    }
    let rcut = eig.rcut();
    let deficient = eig.values.iter().filter(|&&l| l <= rcut).count();
    if deficient > 0 && !pseudo_inverse {
        return domain(format!(
            "matrix is rank-deficient ({deficient} eigenvalues <= {rcut:e}); request a pseudo-inverse"
        ));
    }
    Ok(eig.map_spectrum(|l| if l > rcut { 1.0 / l } else { 0.0 }))
}

/// Heat kernel `K_t(Q) = expm(−tQ)` of a symmetric PSD Laplacian.
pub fn heat_kernel(q: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !(t > 0.0) || !t.is_finite() {
        return invalid(format!("heat kernel time must be positive, got {t}"));
    }
    let eig = sym_eig(q)?;
    let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < NEGATIVE_CLAMP {
        return domain(format!("Laplacian must be PSD, smallest eigenvalue {min:e}"));
    }
    Ok(eig.map_spectrum(|l| (-t * l.max(0.0)).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v))
    }

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).amax() <= tol
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = sym_eig(&DMatrix::identity(4, 4)).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(close(&(e.vectors.transpose() * &e.vectors), &DMatrix::identity(4, 4), 1e-14));

        let e = sym_eig(&diag(&[1.0, 3.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert!(close(&e.vectors, &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), 0.0));
    }

    #[test]
    fn eig_sign_convention() {
        let x = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let e = sym_eig(&x).unwrap();
        for col in e.vectors.column_iter() {
            let pivot = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(pivot > 0.0);
        }
        assert!(close(&e.reconstruct(), &x, 1e-14));
    }

    #[test]
    fn eig_rejects_asymmetric_and_nan() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(sym_eig(&x).is_err());
        let x = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert!(sym_eig(&x).is_err());
        assert!(sym_eig(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn scalar_examples() {
        let v = |l, s: PnSpec| pn_scalar(l, &s).unwrap();
        assert_eq!(v(0.5, PnSpec::maxexp(2.0).unwrap()), 0.75);
        assert_eq!(v(0.25, PnSpec::gamma(0.5).unwrap()), 0.5);
        assert!((v(0.3, PnSpec::hdp(0.3).unwrap()) - (-1.0f64).exp()).abs() < 1e-16);
        assert_eq!(v(0.0, PnSpec::hdp(0.3).unwrap()), 0.0);
        let s = PnSpec::sigme(7.0).unwrap();
        assert_eq!(v(0.0, s), 0.0);
        assert_eq!(v(-0.4, s), -v(0.4, s));
        assert!(pn_scalar(0.5, &PnSpec::grassmann(1).unwrap()).is_err());
        assert!(pn_scalar(1.5, &PnSpec::maxexp(2.0).unwrap()).is_err());
        assert!(pn_scalar(-0.1, &PnSpec::gamma(0.5).unwrap()).is_err());
        assert!(pn_scalar(-0.1, &PnSpec::hdp(0.5).unwrap()).is_err());
    }

    #[test]
    fn spec_ranges_and_parsing() {
        assert!(PnSpec::gamma(0.0).is_err());
        assert!(PnSpec::gamma(1.5).is_err());
        assert!(PnSpec::maxexp(0.5).is_err());
        assert!(PnSpec::sigme(0.9).is_err());
        assert!(PnSpec::hdp(0.0).is_err());
        assert!(PnSpec::new(PnKind::Grassmann, 1.5).is_err());
        let s: PnSpec = "sigme:4".parse().unwrap();
        assert_eq!(s, PnSpec::sigme(4.0).unwrap());
        assert_eq!(s.to_string().parse::<PnSpec>().unwrap(), s);
        assert!("maxexp".parse::<PnSpec>().is_err());
        assert!("foo:1".parse::<PnSpec>().is_err());
    }

    #[test]
    fn derivatives_match_central_differences() {
        let specs = [
            PnSpec::gamma(0.5).unwrap(),
            PnSpec::maxexp(5.0).unwrap(),
            PnSpec::asinhe(0.7).unwrap(),
            PnSpec::sigme(4.0).unwrap(),
            PnSpec::hdp(0.2).unwrap(),
        ];
        for s in &specs {
            for &l in &[0.1, 0.35, 0.8] {
                let h = 1e-6;
                let fd = (pn_scalar(l + h, s).unwrap() - pn_scalar(l - h, s).unwrap()) / (2.0 * h);
                let an = pn_derivative(l, s).unwrap();
                assert!((fd - an).abs() < 1e-7 * an.abs().max(1.0), "{s} at {l}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_spectrum(&[2.0, 2.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(normalize_spectrum(&[3.0, -1.0]).unwrap(), vec![0.75, -0.25]);
        assert!(normalize_spectrum(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn epn_matrix_examples() {
        let y = epn_matrix(&diag(&[0.5, 0.5]), &PnSpec::maxexp(2.0).unwrap(), false).unwrap();
        assert!(close(&y, &diag(&[0.75, 0.75]), 1e-15));

        let x = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let y = epn_matrix(&x, &PnSpec::gamma(1.0).unwrap(), false).unwrap();
        assert!(close(&y, &x, 1e-14));
    }

    #[test]
    fn epn_matrix_domain_errors() {
        let indefinite = diag(&[0.5, -0.2]);
        assert!(matches!(
            epn_matrix(&indefinite, &PnSpec::gamma(0.5).unwrap(), false),
            Err(Error::Domain(_))
        ));
        assert!(epn_matrix(&indefinite, &PnSpec::sigme(2.0).unwrap(), false).is_ok());
        let big = diag(&[3.0, 1.0]);
        assert!(matches!(
            epn_matrix(&big, &PnSpec::maxexp(2.0).unwrap(), false),
            Err(Error::Domain(_))
        ));
        assert!(epn_matrix(&big, &PnSpec::maxexp(2.0).unwrap(), true).is_ok());
        // tiny negative eigenvalue is clamped
        assert!(epn_matrix(&diag(&[0.5, -1e-12]), &PnSpec::gamma(0.5).unwrap(), false).is_ok());
    }

    #[test]
    fn grassmann_examples() {
        let p = grassmann_map(&diag(&[3.0, 2.0, 1.0]), 1).unwrap();
        assert!(close(&p, &diag(&[1.0, 0.0, 0.0]), 1e-15));
        assert!(grassmann_map(&diag(&[3.0, 2.0, 0.0]), 2).is_err());
        assert!(matches!(
            grassmann_map(&diag(&[3.0, 2.0, 2.0]), 2),
            Err(Error::Degenerate(_))
        ));
        assert!(grassmann_map(&diag(&[3.0, 2.0, 1.0]), 0).is_err());
    }

    #[test]
    fn precision_and_heat_examples() {
        assert!(close(&precision_laplacian(&DMatrix::identity(3, 3), false).unwrap(), &DMatrix::identity(3, 3), 1e-15));
        let q = precision_laplacian(&diag(&[0.5, 0.25]), false).unwrap();
        assert!(close(&q, &diag(&[2.0, 4.0]), 1e-14));
        assert!(precision_laplacian(&diag(&[1.0, 0.0]), false).is_err());
        let q = precision_laplacian(&diag(&[1.0, 0.0]), true).unwrap();
        assert!(close(&q, &diag(&[1.0, 0.0]), 1e-15));

        let k = heat_kernel(&diag(&[1.0, 2.0]), 1.0).unwrap();
        assert!(close(&k, &diag(&[(-1.0f64).exp(), (-2.0f64).exp()]), 1e-15));
        assert!(heat_kernel(&diag(&[1.0, 2.0]), 0.0).is_err());
        let k = heat_kernel(&diag(&[1.0, 2.0]), 1e-9).unwrap();
        assert!(close(&k, &DMatrix::identity(2, 2), 3e-9));
    }
}
