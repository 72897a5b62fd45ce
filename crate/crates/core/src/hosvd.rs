//! HOSVD of super-symmetric tensors, EPN on the core tensor, and the Tensor
//! Power Euclidean (TPE) dot product and distance.
//!
//! For a super-symmetric tensor every mode unfolding has the same column
//! space, so a single factor matrix `U`, the eigenvectors of `M₁M₁ᵀ` for the
//! mode-1 unfolding `M₁`, serves all modes. The core is
//! `𝓧 ×₁ Uᵀ ×₂ Uᵀ ⋯ ×_r Uᵀ` and the reconstruction is
//! `𝝀̂ ×₁ U ×₂ U ⋯ ×_r U`.

use log::warn;
use nalgebra::DMatrix;

use crate::error::{domain, invalid, shape, Result};
use crate::spectral::{epn_matrix, sym_eig, PnKind, PnSpec};
use crate::tensor::{
    frobenius_norm, inner, mode_matrix_product, unfold, DenseTensor, FeatureSet,
    SUPER_SYMMETRY_TOL,
};

/// Core coefficients may exceed κ by this much before the signed MaxExp
/// detector rejects them; smaller excesses are clamped.
pub const KAPPA_EXCESS_TOL: f64 = 1e-9;

/// Tolerance on `‖u‖ = 1` for projection directions.
pub const UNIT_NORM_TOL: f64 = 1e-8;

/// Core tensor and shared factor matrix of a super-symmetric tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct HosvdFactors {
    /// Core tensor `𝝀`, `d′ × ⋯ × d′`.
    pub core: DenseTensor,
    /// `d × d′` factor with orthonormal columns, shared by all modes.
    pub factor: DMatrix<f64>,
    /// `κ = (1/√r)^r`, the largest coefficient a unit vector can produce in a
    /// subspace spanned by `r` orthonormal directions.
    pub kappa: f64,
}

impl HosvdFactors {
    pub fn order(&self) -> usize {
        self.core.order()
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }
}

/// `κ = (1/√r)^r`.
pub fn kappa(order: usize) -> f64 {
    (order as f64).powf(-(order as f64) / 2.0)
}

/// HOSVD of a super-symmetric tensor of order ≥ 2.
///
/// The rank `d′` is the number of eigenvalues of `M₁M₁ᵀ` above
/// `d · ε · max`; the zero tensor keeps the full basis and a zero core.
pub fn hosvd_supersym(t: &DenseTensor) -> Result<HosvdFactors> {
    if t.order() < 2 {
        return invalid("HOSVD needs a tensor of order >= 2");
    }
    if !t.is_super_symmetric() {
        let scale = t.data().iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let defect = t.super_symmetry_defect();
        if defect > SUPER_SYMMETRY_TOL * scale {
            return invalid(format!("tensor is not super-symmetric (defect {defect:e})"));
        }
    }
    let d = t.dims()[0];
    let m1 = unfold(t, 0)?;
    let gram = &m1 * m1.transpose();
    let eig = sym_eig(&gram)?;
    let lmax = eig.values[0].max(0.0);
    let cut = d as f64 * f64::EPSILON * lmax;
    let mut rank = eig.values.iter().filter(|&&l| l > cut).count();
    if rank == 0 {
        rank = d;
    }
    let factor = eig.vectors.columns(0, rank).into_owned();
    let core = project_core(t, &factor)?;
    Ok(HosvdFactors {
        core,
        factor,
        kappa: kappa(t.order()),
    })
}

/// `𝓧 ×₁ Uᵀ ⋯ ×_r Uᵀ`.
fn project_core(t: &DenseTensor, factor: &DMatrix<f64>) -> Result<DenseTensor> {
    let ut = factor.transpose();
    let mut core = t.clone();
    for mode in 0..t.order() {
        core = mode_matrix_product(&core, &ut, mode)?;
    }
    Ok(core)
}

/// `𝝀̂ ×₁ U ⋯ ×_r U`.
pub fn reconstruct(f: &HosvdFactors) -> Result<DenseTensor> {
    if f.core.dims().iter().any(|&k| k != f.factor.ncols()) {
        return shape(format!(
            "core dims {:?} do not match factor with {} columns",
            f.core.dims(),
            f.factor.ncols()
        ));
    }
    let mut out = f.core.clone();
    for mode in 0..f.core.order() {
        out = mode_matrix_product(&out, &f.factor, mode)?;
    }
    Ok(out)
}

fn check_unit(name: &str, v: &[f64], d: usize) -> Result<()> {
    if v.len() != d {
        return shape(format!("{name} has length {} but features have dimension {d}", v.len()));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return invalid(format!("{name} must be unit-norm, has norm {norm}"));
    }
    Ok(())
}

/// Core coefficient along three unit directions computed straight from the
/// features: `(1/N) Σ_n w_n³ ⟨φ_n − μ, u⟩⟨φ_n − μ, v⟩⟨φ_n − μ, w⟩`.
///
/// With unit weights and zero mean this is the plain average of the three
/// projections' product, and it equals the HOSVD core entry of the pooled
/// order-3 tensor whenever `u, v, w` are columns of its factor.
pub fn core_coefficient(fs: &FeatureSet, u: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    let d = fs.dim();
    check_unit("u", u, d)?;
    check_unit("v", v, d)?;
    check_unit("w", w, d)?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let total: f64 = fs
        .scaled_centered()
        .iter()
        .map(|p| dot(p, u) * dot(p, v) * dot(p, w))
        .sum();
    Ok(total / fs.len() as f64)
}

/// Signed κ-normalized MaxExp detector
/// `sgn(λ) (1 − (1 − |λ|/κ)^N)`: for `λ ≥ 0` the probability of at least
/// one projection event in `N` Bernoulli trials with success rate `λ/κ`.
///
/// `|λ| > κ` is clamped to κ, with a warning when the excess is above
/// [`KAPPA_EXCESS_TOL`].
pub fn detector_likelihood(lambda: f64, kappa: f64, trials: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return invalid(format!("κ must be positive, got {kappa}"));
    }
    if !(trials >= 1.0) {
        return invalid(format!("trial count must be >= 1, got {trials}"));
    }
    if !lambda.is_finite() {
        return invalid(format!("non-finite coefficient {lambda}"));
    }
    let mut a = lambda.abs();
    if a > kappa {
        if a - kappa > KAPPA_EXCESS_TOL {
            warn!("coefficient {lambda} exceeds κ = {kappa}; clamping");
        }
        a = kappa;
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    Ok(lambda.signum() * (1.0 - (1.0 - a / kappa).powf(trials)))
}

/// SigmE steepness matched to a MaxExp power: `η′ = 2η` gives both the same
/// slope at zero.
pub fn sigme_matching_maxexp(eta: f64) -> Result<PnSpec> {
    PnSpec::sigme(2.0 * eta)
}

/// Element-wise EPN of the κ-normalized core; the factor is unchanged.
///
/// Supported kinds are MaxExp (applied in its signed form) and SigmE. Cores
/// of odd order are indefinite, so PSD-only kinds are rejected.
pub fn apply_epn_core(f: &HosvdFactors, spec: &PnSpec) -> Result<HosvdFactors> {
    let k = f.kappa;
    let data: Vec<f64> = match spec.kind() {
        PnKind::MaxExp => f
            .core
            .data()
            .iter()
            .map(|&l| {
                if l.abs() > k + KAPPA_EXCESS_TOL {
                    return domain(format!(
                        "core coefficient {l} exceeds κ = {k}; signed MaxExp is undefined there (use SigmE)"
                    ));
                }
                let a = (l.abs() / k).min(1.0);
                Ok(if l == 0.0 {
                    0.0
                } else {
                    l.signum() * (1.0 - (1.0 - a).powf(spec.param()))
                })
            })
            .collect::<Result<_>>()?,
        PnKind::SigmE => f
            .core
            .data()
            .iter()
            .map(|&l| (0.5 * spec.param() * l / k).tanh())
            .collect(),
        other => {
            return domain(format!(
                "{} is not supported on indefinite core tensors; use maxexp or sigme",
                other.name()
            ))
        }
    };
    Ok(HosvdFactors {
        core: DenseTensor::new(f.core.dims().to_vec(), data)?,
        factor: f.factor.clone(),
        kappa: k,
    })
}

/// Full EPN of a pooled tensor: matrix EPN for order 2, and
/// HOSVD → core EPN → reconstruction for order 3.
pub fn epn_tensor(t: &DenseTensor, spec: &PnSpec, normalize: bool) -> Result<DenseTensor> {
    match t.order() {
        2 => {
            let x = t.to_matrix()?;
            DenseTensor::from_matrix(&epn_matrix(&x, spec, normalize)?)
        }
        3 => {
            let f = hosvd_supersym(t)?;
            reconstruct(&apply_epn_core(&f, spec)?)
        }
        r => invalid(format!("EPN is supported for orders 2 and 3, got {r}")),
    }
}

/// TPE dot product of two EPN-normalized tensors: their Frobenius inner product.
pub fn tpe_dot(gx: &DenseTensor, gy: &DenseTensor) -> Result<f64> {
    inner(gx, gy)
}

/// TPE distance `‖𝓖(𝓧) − 𝓖(𝓨)‖_F`.
pub fn tpe_distance(gx: &DenseTensor, gy: &DenseTensor) -> Result<f64> {
    Ok(frobenius_norm(&gx.sub(gy)?))
}

/// TPE dot product expanded over subspaces:
/// `Σ λ̂_{abc} λ̂′_{a′b′c′} ⟨u_a,u′_{a′}⟩⟨v_b,v′_{b′}⟩⟨w_c,w′_{c′}⟩`,
/// with one factor matrix per mode on each side.
///
/// Evaluated by contracting the second core with the cross-Gram matrices
/// `U_kᵀ U′_k` mode by mode.
pub fn tpe_subspace_expansion(
    x_core: &DenseTensor,
    x_factors: &[&DMatrix<f64>],
    y_core: &DenseTensor,
    y_factors: &[&DMatrix<f64>],
) -> Result<f64> {
    let r = x_core.order();
    if y_core.order() != r || x_factors.len() != r || y_factors.len() != r {
        return shape("cores and factor lists must share one order");
    }
    let mut moved = y_core.clone();
    for mode in 0..r {
        let (ux, uy) = (x_factors[mode], y_factors[mode]);
        if ux.nrows() != uy.nrows() {
            return shape(format!("mode {mode} factors live in different ambient dimensions"));
        }
        if ux.ncols() != x_core.dims()[mode] || uy.ncols() != y_core.dims()[mode] {
            return shape(format!("mode {mode} factor does not match its core"));
        }
        moved = mode_matrix_product(&moved, &(ux.transpose() * uy), mode)?;
    }
    inner(x_core, &moved)
}

/// [`tpe_subspace_expansion`] for two shared-factor decompositions.
pub fn tpe_dot_factored(fx: &HosvdFactors, fy: &HosvdFactors) -> Result<f64> {
    let r = fx.order();
    let xf = vec![&fx.factor; r];
    let yf = vec![&fy.factor; fy.order()];
    tpe_subspace_expansion(&fx.core, &xf, &fy.core, &yf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{outer_power, pool};

    #[test]
    fn rank_one_core() {
        let x = [0.48, -0.6, 0.64];
        let f = hosvd_supersym(&outer_power(&x, 3).unwrap()).unwrap();
        assert_eq!(f.rank(), 1);
        assert!((f.core.get(&[0, 0, 0]) - 1.0).abs() < 1e-14);
        let col = f.factor.column(0);
        let s = col[0].signum() * x[0].signum();
        for i in 0..3 {
            assert!((col[i] - s * x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_tensor_has_zero_core() {
        let z = DenseTensor::zeros(vec![3, 3, 3]).unwrap();
        let f = hosvd_supersym(&z).unwrap();
        assert!(f.core.data().iter().all(|&c| c == 0.0));
        assert!(reconstruct(&f).unwrap().data().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn rejects_non_symmetric() {
        let mut t = outer_power(&[1.0, 2.0], 3).unwrap();
        t.set(&[0, 0, 1], 7.0);
        assert!(hosvd_supersym(&t).is_err());
    }

    #[test]
    fn kappa_values() {
        assert!((kappa(2) - 0.5).abs() < 1e-16);
        assert!((kappa(3) - 3f64.powf(-1.5)).abs() < 1e-16);
    }

    #[test]
    fn core_coefficient_trivial_cases() {
        let u = [0.6, 0.8, 0.0];
        let fs = FeatureSet::new(vec![u.to_vec()]).unwrap();
        assert!((core_coefficient(&fs, &u, &u, &u).unwrap() - 1.0).abs() < 1e-15);
        let fs = FeatureSet::new(vec![vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(core_coefficient(&fs, &u, &u, &u).unwrap(), 0.0);
        assert!(core_coefficient(&fs, &[1.0, 1.0, 0.0], &u, &u).is_err());
    }

    #[test]
    fn detector_examples() {
        let k = kappa(3);
        assert_eq!(detector_likelihood(0.0, k, 5.0).unwrap(), 0.0);
        assert_eq!(detector_likelihood(k, k, 5.0).unwrap(), 1.0);
        assert!((detector_likelihood(0.5 * k, k, 2.0).unwrap() - 0.75).abs() < 1e-15);
        assert!((detector_likelihood(-0.5 * k, k, 2.0).unwrap() + 0.75).abs() < 1e-15);
        assert_eq!(detector_likelihood(2.0 * k, k, 3.0).unwrap(), 1.0);
        assert!(detector_likelihood(0.1, 0.0, 3.0).is_err());
        assert!(detector_likelihood(0.1, 1.0, 0.5).is_err());
    }

    #[test]
    fn apply_epn_core_examples() {
        let k = kappa(3);
        let mut core = DenseTensor::zeros(vec![2, 2, 2]).unwrap();
        let f0 = HosvdFactors {
            core: core.clone(),
            factor: DMatrix::identity(2, 2),
            kappa: k,
        };
        for spec in [PnSpec::maxexp(7.0).unwrap(), PnSpec::sigme(3.0).unwrap()] {
            let g = apply_epn_core(&f0, &spec).unwrap();
            assert!(g.core.data().iter().all(|&c| c == 0.0));
        }

        core.set(&[0, 0, 0], k);
        let f = HosvdFactors { core, ..f0.clone() };
        for eta in [1.0, 4.0, 30.0] {
            let g = apply_epn_core(&f, &PnSpec::maxexp(eta).unwrap()).unwrap();
            assert_eq!(g.core.get(&[0, 0, 0]), 1.0);
            assert_eq!(g.factor, f.factor);
        }

        for spec in [PnSpec::gamma(0.5).unwrap(), PnSpec::hdp(0.1).unwrap()] {
            assert!(matches!(apply_epn_core(&f, &spec), Err(crate::Error::Domain(_))));
        }

        let mut big = f.clone();
        big.core.set(&[1, 1, 1], -2.0 * k);
        assert!(matches!(
            apply_epn_core(&big, &PnSpec::maxexp(3.0).unwrap()),
            Err(crate::Error::Domain(_))
        ));
        let s = apply_epn_core(&big, &PnSpec::sigme(3.0).unwrap()).unwrap();
        assert!(s.core.get(&[1, 1, 1]) < 0.0);

        let mut edge = f.clone();
        edge.core.set(&[1, 0, 0], k + 5e-10);
        let g = apply_epn_core(&edge, &PnSpec::maxexp(3.0).unwrap()).unwrap();
        assert_eq!(g.core.get(&[1, 0, 0]), 1.0);
    }

    #[test]
    fn single_core_entry_expands_to_rank_one() {
        let q = nalgebra::Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        let u = q.matrix().clone_owned();
        let factor = DMatrix::from_iterator(3, 3, u.iter().copied());
        let mut core = DenseTensor::zeros(vec![3, 3, 3]).unwrap();
        core.set(&[0, 2, 1], 1.7);
        let t = reconstruct(&HosvdFactors {
            core,
            factor: factor.clone(),
            kappa: kappa(3),
        })
        .unwrap();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let e = 1.7 * factor[(a, 0)] * factor[(b, 2)] * factor[(c, 1)];
                    assert!((t.get(&[a, b, c]) - e).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn epn_tensor_routes_by_order() {
        let fs = FeatureSet::new(vec![vec![0.2, 0.1], vec![-0.1, 0.3]]).unwrap();
        let x = pool(&fs, 2).unwrap();
        let g = epn_tensor(&x, &PnSpec::gamma(1.0).unwrap(), false).unwrap();
        for (a, b) in g.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-15);
        }
        let t4 = outer_power(&[0.5, 0.5], 4).unwrap();
        assert!(epn_tensor(&t4, &PnSpec::sigme(2.0).unwrap(), false).is_err());
    }

    #[test]
    fn tpe_disjoint_blocks_and_self() {
        let a = outer_power(&[0.6, 0.8, 0.0, 0.0], 3).unwrap();
        let b = outer_power(&[0.0, 0.0, 0.8, -0.6], 3).unwrap();
        assert_eq!(tpe_dot(&a, &b).unwrap(), 0.0);
        let n = frobenius_norm(&a);
        assert!((tpe_dot(&a, &a).unwrap() - n * n).abs() < 1e-15);
        assert_eq!(tpe_distance(&a, &a).unwrap(), 0.0);
        assert!(tpe_distance(&a, &outer_power(&[1.0, 0.0], 3).unwrap()).is_err());
    }
}
