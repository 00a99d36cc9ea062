//! Closed-form arithmetic for Kronecker duality and the projective-plane and
//! projective-space examples, plus the data instances that realize them.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exactla::{kernel_basis, Field, Mat};
use crate::rs_spec::{binomial, multiplication_map, sym_spec, DimVector, RsSpec};
use crate::stability::Polarization;

fn q(v: i64) -> BigRational {
    BigRational::from_integer(v.into())
}

fn frac(a: i64, b: i64) -> BigRational {
    BigRational::new(a.into(), b.into())
}

// ---------------------------------------------------------------------------
// Kronecker modules

/// Maps `L ⊗ M → N` with `dim L = q`, `dim M = m`, `dim N = n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KroneckerData {
    pub q: usize,
    pub m: usize,
    pub n: usize,
}

impl KroneckerData {
    pub fn new(q: usize, m: usize, n: usize) -> Result<KroneckerData> {
        if q < 3 {
            return Err(Error::Precondition(format!("need dim L ≥ 3, got {q}")));
        }
        if m == 0 || n == 0 {
            return Err(Error::Precondition("m and n must be positive".into()));
        }
        Ok(KroneckerData { q, m, n })
    }
}

/// The dual problem `L* ⊗ M* → ker(f)*`: same `q` and `m`, target `q·m − n`.
pub fn kronecker_dual_dims(k: KroneckerData) -> Result<KroneckerData> {
    let qm = k.q * k.m;
    if qm <= k.n {
        return Err(Error::Precondition(format!("q·m − n = {} is not positive", qm as i64 - k.n as i64)));
    }
    KroneckerData::new(k.q, k.m, qm - k.n)
}

/// `(1,1)` data with `dim H = q` and no compositions.
pub fn kronecker_spec(field: Field, q: usize) -> RsSpec {
    RsSpec::skeleton(field, 1, 1, vec![vec![q]])
}

/// For surjective `f` (`n × q·m`, columns `(h, x)`), the transpose of the
/// kernel inclusion, an `(q·m − n) × q·m` matrix with the same column layout.
pub fn kronecker_dual_point(f: &Mat) -> Result<Mat> {
    if f.rank() != f.rows() {
        return Err(Error::Precondition("f is not surjective".into()));
    }
    let k = kernel_basis(f);
    if k.dim() == 0 {
        return Err(Error::Precondition("ker f is zero".into()));
    }
    Ok(k.basis().clone())
}

// ---------------------------------------------------------------------------
// Extremal families on the projective plane

/// Maps `(Q*⊗C^m1) ⊕ (Q2*⊗C^m2) → O⊗C^n` with weight ratio `ρ = λ2/λ1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct P2Family {
    pub m1: u64,
    pub m2: u64,
    pub n: u64,
    pub rho: BigRational,
}

impl P2Family {
    pub fn new(m1: u64, m2: u64, n: u64, rho: BigRational) -> Result<P2Family> {
        if m1 == 0 || m2 == 0 || n == 0 {
            return Err(Error::Precondition("m1, m2, n must be positive".into()));
        }
        if n >= 3 * m1 + 6 * m2 {
            return Err(Error::Precondition(format!("need n < 3·m1 + 6·m2 = {}", 3 * m1 + 6 * m2)));
        }
        if rho <= BigRational::zero() {
            return Err(Error::Precondition("ρ must be positive".into()));
        }
        Ok(P2Family { m1, m2, n, rho })
    }

    /// Multiplicity of the source after mutation.
    pub fn mutated_source(&self) -> u64 {
        3 * self.m1 + 6 * self.m2 - self.n
    }

    /// `(λ1, λ2; μ)` normalized so that `λ1 m1 + λ2 m2 = μ n = 1`.
    pub fn polarization(&self) -> Polarization {
        let (m1, m2, n) = (q(self.m1 as i64), q(self.m2 as i64), q(self.n as i64));
        let l1 = BigRational::one() / (&m1 + &self.rho * &m2);
        let l2 = &self.rho * &l1;
        Polarization { lambda: vec![l1, l2], mu: vec![BigRational::one() / n] }
    }
}

/// `β1/β2` of the transported polarization as a function of `ρ`.
pub fn rho_prime(fam: &P2Family) -> Result<BigRational> {
    let (m1, m2, n) = (q(fam.m1 as i64), q(fam.m2 as i64), q(fam.n as i64));
    let den = (q(6) * &m2 - &n) * &fam.rho + q(6) * &m1;
    if den.is_zero() {
        return Err(Error::Precondition("ρ' has a zero denominator".into()));
    }
    Ok((q(3) * &m2 * &fam.rho + q(3) * m1 - n) / den)
}

/// Inverse of [`rho_prime`] for fixed `m1, m2, n`.
pub fn rho_from_rho_prime(m1: u64, m2: u64, n: u64, rho_p: &BigRational) -> Result<BigRational> {
    let (m1, m2, n) = (q(m1 as i64), q(m2 as i64), q(n as i64));
    let den = rho_p * (q(6) * &m2 - &n) - q(3) * m2;
    if den.is_zero() {
        return Err(Error::Precondition("ρ' is not in the image".into()));
    }
    Ok((q(3) * &m1 - n - q(6) * m1 * rho_p) / den)
}

/// First family: `m1 = 1`, `m2 = 5m+2`, `n = 29m+14`, `ρ = 29/12 + ε`.
pub fn family_first(m: u64, eps: &BigRational) -> Result<P2Family> {
    P2Family::new(1, 5 * m + 2, 29 * m + 14, frac(29, 12) + eps)
}

/// Closed form of `ρ' − 3` for [`family_first`].
pub fn family_first_excess(m: u64, eps: &BigRational) -> BigRational {
    let m = q(m as i64);
    q(144) * eps * (&m + q(1)) / (q(29) * &m + q(14) + eps * (q(12) * m - q(24)))
}

/// Second family: `m1 = 1`, `m2 = 17m+8`, `n = 99m+49`, `ρ = 99/41 + ε`.
pub fn family_second(m: u64, eps: &BigRational) -> Result<P2Family> {
    P2Family::new(1, 17 * m + 8, 99 * m + 49, frac(99, 41) + eps)
}

/// Type-(2,1) data with `dim H = (3, 6)` and `dim A = 3`: the composition
/// `S²V* ⊗ V → V*` is contraction, dual to multiplication of linear forms.
pub fn p2_family_spec(field: Field) -> RsSpec {
    let mult = multiplication_map(field, 3, 1, 1);
    let comp = Mat::from_fn(field, 3, 18, |k, col| mult.get(col / 3, (col % 3) * 3 + k));
    let mut spec = RsSpec::skeleton(field, 2, 1, vec![vec![3, 6]]);
    spec.dim_a.insert((1, 0), 3);
    spec.comp_ha.insert((0, 1, 0), comp);
    spec
}

pub fn p2_family_dims(fam: &P2Family) -> DimVector {
    DimVector::new(vec![fam.m1 as usize, fam.m2 as usize], vec![fam.n as usize])
}

// ---------------------------------------------------------------------------
// Maps O(-2) ⊕ O(-1) → O ⊗ C^(n+2) on projective n-space

fn need_n(n: i64) -> Result<()> {
    if n < 2 {
        return Err(Error::Precondition(format!("need n ≥ 2, got {n}")));
    }
    Ok(())
}

/// Values of `ρ` where semistability does not imply stability: `k/(n+2−k)`, `1 ≤ k ≤ n+1`.
pub fn pn_singular_rhos(n: i64) -> Result<Vec<BigRational>> {
    need_n(n)?;
    Ok((1..=n + 1).map(|k| frac(k, n + 2 - k)).collect())
}

/// Quotient dimensions and the number of distinct nonempty quotients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PnQuotients {
    pub generic_dim: BigRational,
    pub special_dim: BigRational,
    pub count: i64,
    pub singular: i64,
}

pub fn pn_quotient_dims(n: i64) -> Result<PnQuotients> {
    need_n(n)?;
    Ok(PnQuotients {
        generic_dim: frac((n + 2) * (n * n + 3 * n - 2), 2),
        special_dim: frac(n * (n + 3), 2),
        count: 2 * (n / 2) + 2,
        singular: n / 2,
    })
}

/// The type-(2,1) data on projective `n`-space and the multiplicities `(1,1)`, `n+2`.
pub fn pn_spec(field: Field, n: usize) -> Result<(RsSpec, DimVector)> {
    need_n(n as i64)?;
    Ok((sym_spec(field, n, &[-2, -1], &[0])?, DimVector::new(vec![1, 1], vec![n + 2])))
}

/// `dim H⁰(O(d))` on projective `n`-space.
pub fn line_bundle_hom_dim(n: u64, d: i64) -> u64 {
    if d < 0 {
        0
    } else {
        binomial(n + d as u64, n)
    }
}

/// Exact integer value of a rational, if it is one.
pub fn as_integer(x: &BigRational) -> Option<BigInt> {
    x.is_integer().then(|| x.to_integer())
}
