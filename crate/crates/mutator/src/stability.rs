//! Polarizations and semistability of points of `W`, the Kronecker criterion,
//! the constant `c(τ, k)` and the projective-quotient predicates for type (2,1).
//!
//! Over a prime field the checks are exhaustive. Over ℚ only sampling is
//! possible: a sampled check either finds a destabilizing tuple or reports
//! that none was found, and never certifies semistability.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exactla::{enumerate_all_subspaces, enumerate_subspaces, fmt_ratio, subspace_count, Mat, Subspace};
use crate::groups::{GElem, Groups, Subgroup, DEFAULT_BUDGET};
use crate::rs_spec::{mat_to_json, DimVector, PointW, RsSpec};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polarization {
    pub lambda: Vec<BigRational>,
    pub mu: Vec<BigRational>,
}

impl Polarization {
    /// Checks positivity and `Σ λ_i m_i = Σ μ_l n_l = 1`.
    pub fn new(lambda: Vec<BigRational>, mu: Vec<BigRational>, dims: &DimVector) -> Result<Polarization> {
        if lambda.len() != dims.m.len() || mu.len() != dims.n.len() {
            return Err(Error::Invalid("polarization length does not match (r,s)".into()));
        }
        if lambda.iter().chain(&mu).any(|x| !x.is_positive()) {
            return Err(Error::Invalid("polarization entries must be positive".into()));
        }
        let pol = Polarization { lambda, mu };
        let (sl, sm) = pol.sums(dims);
        if !sl.is_one() || !sm.is_one() {
            return Err(Error::Invalid(format!("need Σλm = Σμn = 1, got {} and {}", fmt_ratio(&sl), fmt_ratio(&sm))));
        }
        Ok(pol)
    }

    pub fn sums(&self, dims: &DimVector) -> (BigRational, BigRational) {
        let dot = |w: &[BigRational], d: &[usize]| w.iter().zip(d).fold(BigRational::zero(), |acc, (x, &k)| acc + x * BigRational::from_integer(k.into()));
        (dot(&self.lambda, &dims.m), dot(&self.mu, &dims.n))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "lambda": self.lambda.iter().map(fmt_ratio).collect::<Vec<_>>(),
            "mu": self.mu.iter().map(fmt_ratio).collect::<Vec<_>>(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    Exhaustive { budget: u64 },
    /// `samples` random subspace tuples per point; the group check visits
    /// `⌈√samples⌉` random unipotent elements besides the identity.
    Sampled { samples: usize, seed: u64 },
}

impl Default for Mode {
    fn default() -> Mode {
        Mode::Exhaustive { budget: DEFAULT_BUDGET }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub m_sub: Vec<Subspace>,
    pub n_sub: Vec<Subspace>,
    /// Element `(g, h)` of the unipotent subgroup moving the point to where the tuple destabilizes.
    pub h: Option<GElem>,
}

impl Witness {
    pub fn to_json(&self) -> Value {
        let subs = |v: &[Subspace]| v.iter().map(|s| mat_to_json(s.basis())).collect::<Vec<_>>();
        let mut v = json!({"M'": subs(&self.m_sub), "N'": subs(&self.n_sub)});
        if let Some(g) = &self.h {
            v["h"] = json!({"left": g.left.to_json(), "right": g.right.to_json()});
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub semistable: bool,
    pub stable: bool,
    /// First tuple violating the strongest property that fails.
    pub witness: Option<Witness>,
    /// False for sampled checks that found no violation.
    pub certified: bool,
}

impl Verdict {
    pub fn to_json(&self) -> Value {
        json!({
            "semistable": self.semistable,
            "stable": self.stable,
            "certified": self.certified,
            "witness": self.witness.as_ref().map(Witness::to_json),
        })
    }
}

// ---------------------------------------------------------------------------
// Reductive check

/// Span of `φ_li^h · M'_i` over all `i` and basis vectors `h` of `H_li`.
pub fn minimal_target(spec: &RsSpec, dims: &DimVector, w: &PointW, m_sub: &[Subspace]) -> Vec<Subspace> {
    (0..spec.s)
        .map(|l| {
            let mut rows = Vec::new();
            for (i, sub) in m_sub.iter().enumerate() {
                if sub.dim() == 0 {
                    continue;
                }
                let mi = dims.m[i];
                let basis_t = sub.inclusion();
                for h in 0..spec.dim_h(l, i) {
                    let img = w.blocks[l][i].block(0, dims.n[l], h * mi, mi).mul(&basis_t);
                    rows.push(img.transpose());
                }
            }
            let refs: Vec<&Mat> = rows.iter().collect();
            Subspace::from_rows(&Mat::vstack(spec.field, dims.n[l], &refs))
        })
        .collect()
}

fn weight(w: &[BigRational], subs: &[Subspace]) -> BigRational {
    w.iter().zip(subs).fold(BigRational::zero(), |acc, (x, s)| acc + x * BigRational::from_integer(s.dim().into()))
}

/// Outcome for a single source tuple: `None` if it imposes nothing,
/// otherwise whether it breaks semistability and whether it breaks stability.
fn judge(spec: &RsSpec, dims: &DimVector, w: &PointW, pol: &Polarization, m_sub: &[Subspace]) -> Option<(bool, bool, Vec<Subspace>)> {
    let n_sub = minimal_target(spec, dims, w, m_sub);
    if n_sub.iter().all(Subspace::is_full) {
        return None;
    }
    let lhs = weight(&pol.lambda, m_sub);
    let rhs = weight(&pol.mu, &n_sub);
    let all_zero = m_sub.iter().all(|s| s.dim() == 0);
    Some((lhs > rhs, !all_zero && lhs >= rhs, n_sub))
}

struct TupleSource {
    lists: Vec<Vec<Subspace>>,
    count: u64,
}

impl TupleSource {
    fn exhaustive(spec: &RsSpec, dims: &DimVector, budget: u64) -> Result<TupleSource> {
        let p = spec.field.order().ok_or_else(|| Error::Field("exhaustive stability check needs a finite field; use sampled mode".into()))? as u64;
        let count = dims.m.iter().fold(1u128, |acc, &m| acc.saturating_mul(subspace_count(m, p)));
        if count > budget as u128 {
            return Err(Error::Budget(format!("{count} subspace tuples exceed budget {budget}")));
        }
        let lists = dims.m.iter().map(|&m| enumerate_all_subspaces(spec.field, m)).collect::<Result<Vec<_>>>()?;
        Ok(TupleSource { lists, count: count as u64 })
    }

    /// Tuple at `idx`; the first factor varies slowest.
    fn get(&self, mut idx: u64) -> Vec<Subspace> {
        let mut out = vec![None; self.lists.len()];
        for (i, list) in self.lists.iter().enumerate().rev() {
            out[i] = Some(list[(idx % list.len() as u64) as usize].clone());
            idx /= list.len() as u64;
        }
        out.into_iter().map(Option::unwrap).collect()
    }
}

fn random_subspace<R: Rng>(spec: &RsSpec, ambient: usize, rng: &mut R) -> Subspace {
    let d = rng.gen_range(0..=ambient);
    Subspace::from_rows(&Mat::random(spec.field, d, ambient, rng))
}

/// Tuples for sampled mode: every choice of `0` or the whole space per
/// factor, followed by `samples` random tuples.
fn sampled_tuples(spec: &RsSpec, dims: &DimVector, samples: usize, seed: u64) -> Vec<Vec<Subspace>> {
    let r = dims.m.len();
    let mut out = Vec::new();
    for mask in 0..(1u64 << r.min(20)) {
        out.push(
            (0..r)
                .map(|i| if mask >> i & 1 == 1 { Subspace::full(spec.field, dims.m[i]) } else { Subspace::zero(spec.field, dims.m[i]) })
                .collect(),
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        out.push(dims.m.iter().map(|&m| random_subspace(spec, m, &mut rng)).collect());
    }
    out
}

fn verdict_from<I: Iterator<Item = Vec<Subspace>>>(spec: &RsSpec, dims: &DimVector, w: &PointW, pol: &Polarization, tuples: I, certified: bool) -> Verdict {
    let mut stable_witness: Option<Witness> = None;
    for m_sub in tuples {
        if let Some((breaks_semi, breaks_stable, n_sub)) = judge(spec, dims, w, pol, &m_sub) {
            if breaks_semi {
                return Verdict { semistable: false, stable: false, witness: Some(Witness { m_sub, n_sub, h: None }), certified: true };
            }
            if breaks_stable && stable_witness.is_none() {
                stable_witness = Some(Witness { m_sub, n_sub, h: None });
            }
        }
    }
    match stable_witness {
        Some(wit) => Verdict { semistable: true, stable: false, witness: Some(wit), certified },
        None => Verdict { semistable: true, stable: true, witness: None, certified },
    }
}

/// Semistability with respect to the reductive part of the group.
///
/// A source tuple `M'` is tested against the smallest invariant target tuple
/// `N'`; tuples whose smallest `N'` is everything impose no condition.
/// Semistable means `Σ λ_i dim M'_i ≤ Σ μ_l dim N'_l` throughout, and stable
/// makes this strict for every nonzero `M'`.
pub fn gred_semistable(spec: &RsSpec, dims: &DimVector, w: &PointW, pol: &Polarization, mode: &Mode) -> Result<Verdict> {
    w.check(spec, dims)?;
    match mode {
        Mode::Exhaustive { budget } => {
            let src = TupleSource::exhaustive(spec, dims, *budget)?;
            Ok(verdict_from(spec, dims, w, pol, (0..src.count).map(|k| src.get(k)), true))
        }
        Mode::Sampled { samples, seed } => {
            let tuples = sampled_tuples(spec, dims, *samples, *seed);
            Ok(verdict_from(spec, dims, w, pol, tuples.into_iter(), false))
        }
    }
}

/// Semistability for the whole group: the reductive check at every point of
/// the orbit of the unipotent subgroup.
pub fn g_semistable(spec: &RsSpec, dims: &DimVector, w: &PointW, pol: &Polarization, mode: &Mode) -> Result<Verdict> {
    w.check(spec, dims)?;
    let groups = Groups::new(spec, dims);
    let elems: Vec<GElem> = match mode {
        Mode::Exhaustive { budget } => {
            let e = groups.enumerate(Subgroup::Unipotent, *budget)?;
            // Subspace tuples are checked at every orbit point; bound the product as well.
            TupleSource::exhaustive(spec, dims, *budget)?;
            e.iter().collect()
        }
        Mode::Sampled { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
            let count = (*samples as f64).sqrt().ceil() as usize;
            std::iter::once(groups.identity()).chain((0..count).map(|_| groups.random(Subgroup::Unipotent, &mut rng))).collect()
        }
    };
    let verdicts: Vec<Verdict> = elems
        .par_iter()
        .map(|h| gred_semistable(spec, dims, &groups.act(h, w), pol, mode))
        .collect::<Result<Vec<_>>>()?;
    let certified = verdicts.iter().all(|v| v.certified);
    let pick = verdicts.iter().position(|v| !v.semistable).or_else(|| verdicts.iter().position(|v| !v.stable));
    Ok(match pick {
        None => Verdict { semistable: true, stable: true, witness: None, certified },
        Some(k) => {
            let v = &verdicts[k];
            let mut wit = v.witness.clone().expect("failed verdict carries a witness");
            wit.h = Some(elems[k].clone());
            Verdict { semistable: v.semistable, stable: false, witness: Some(wit), certified: if v.semistable { certified } else { true } }
        }
    })
}

// ---------------------------------------------------------------------------
// Kronecker modules

/// Semistability of `f : L ⊗ M → N` given as `n × (q·m)` with columns `(h, x)`:
/// for `M' ≠ 0` with `N' = f(L ⊗ M') ≠ N`, need `dim N' / dim M' ≥ n / m`
/// (strictly for stable).
pub fn kronecker_semistable(f: &Mat, q: usize, mode: &Mode) -> Result<Verdict> {
    if q == 0 || !f.cols().is_multiple_of(q) {
        return Err(Error::Shape(format!("{} columns is not a multiple of q = {q}", f.cols())));
    }
    let (n, m) = (f.rows(), f.cols() / q);
    let field = f.field();
    let spec = {
        let mut s = RsSpec::skeleton(field, 1, 1, vec![vec![q]]);
        s.dim_h = vec![vec![q]];
        s
    };
    let dims = DimVector::new(vec![m], vec![n]);
    let w = PointW { blocks: vec![vec![f.clone()]] };
    let one = BigRational::one();
    let pol = Polarization {
        lambda: vec![one.clone() / BigRational::from_integer(m.max(1).into())],
        mu: vec![one / BigRational::from_integer(n.max(1).into())],
    };
    let tuples: Box<dyn Iterator<Item = Vec<Subspace>>> = match mode {
        Mode::Exhaustive { budget } => {
            let p = field.order().ok_or_else(|| Error::Field("exhaustive stability check needs a finite field; use sampled mode".into()))?;
            let count = subspace_count(m, p as u64);
            if count > *budget as u128 {
                return Err(Error::Budget(format!("{count} subspaces exceed budget {budget}")));
            }
            let mut all = Vec::new();
            for d in 1..=m {
                all.extend(enumerate_subspaces(field, m, d)?.map(|s| vec![s]));
            }
            Box::new(all.into_iter())
        }
        Mode::Sampled { samples, seed } => {
            Box::new(sampled_tuples(&spec, &dims, *samples, *seed).into_iter().filter(|t| t[0].dim() > 0))
        }
    };
    Ok(verdict_from(&spec, &dims, &w, &pol, tuples, matches!(mode, Mode::Exhaustive { .. })))
}

// ---------------------------------------------------------------------------
// The constant c(τ, k)

/// `c(τ, k)` for `τ : X ⊗ A → Y` given as `y × (x·a)` with columns `(ξ, α)`.
///
/// The supremum runs over proper `K ⊂ A ⊗ F^k` not contained in `A ⊗ F` for
/// any proper `F ⊂ F^k`, of `codim τ_k(X ⊗ K) / codim K`. It is 0 when no such
/// `K` exists. Over a prime field this is exact for that field only.
pub fn c_const(tau: &Mat, x: usize, a: usize, k: usize, budget: u64) -> Result<BigRational> {
    let field = tau.field();
    let p = field.order().ok_or_else(|| Error::Field("c(τ,k) is computed over a prime field".into()))? as u64;
    if tau.cols() != x * a {
        return Err(Error::Shape(format!("τ has {} columns, expected {x}·{a}", tau.cols())));
    }
    let y = tau.rows();
    let amb = a * k;
    let count = subspace_count(amb, p);
    if count > budget as u128 {
        return Err(Error::Budget(format!("{count} subspaces of dimension {amb} exceed budget {budget}")));
    }
    let blocks: Vec<Mat> = (0..x).map(|xi| tau.block(0, y, xi * a, a)).collect();
    let mut best = BigRational::zero();
    for d in 1..amb {
        for sub in enumerate_subspaces(field, amb, d)? {
            let reshapes: Vec<Mat> = (0..d).map(|b| sub.basis().row(b).reshape(a, k)).collect();
            let refs: Vec<&Mat> = reshapes.iter().collect();
            if Mat::vstack(field, k, &refs).rank() < k {
                continue;
            }
            let mut imgs = Vec::with_capacity(x * d);
            for t in &blocks {
                for v in &reshapes {
                    imgs.push(t.mul(v).reshape(1, y * k));
                }
            }
            let irefs: Vec<&Mat> = imgs.iter().collect();
            let rank = Mat::vstack(field, y * k, &irefs).rank();
            let ratio = BigRational::new(((y * k - rank) as i64).into(), ((amb - d) as i64).into());
            if ratio > best {
                best = ratio;
            }
        }
    }
    Ok(best)
}

fn need_21(spec: &RsSpec) -> Result<()> {
    if (spec.r, spec.s) != (2, 1) {
        return Err(Error::Precondition(format!("needs type (2,1), got ({},{})", spec.r, spec.s)));
    }
    Ok(())
}

/// `c(τ, k)` for `τ : H*_11 ⊗ A_21 → H*_12` induced by composition.
pub fn c_tau(spec: &RsSpec, k: usize, budget: u64) -> Result<BigRational> {
    need_21(spec)?;
    let t = crate::rs_spec::induced_ha_dual(spec, 0, 1, 0);
    c_const(&t, spec.dim_h(0, 0), spec.dim_a(1, 0), k, budget)
}

/// `c(τ*, k)` for the composition `H_12 ⊗ A_21 → H_11` itself.
pub fn c_tau_star(spec: &RsSpec, k: usize, budget: u64) -> Result<BigRational> {
    need_21(spec)?;
    c_const(&spec.comp_ha(0, 1, 0), spec.dim_h(0, 1), spec.dim_a(1, 0), k, budget)
}

fn q(v: usize) -> BigRational {
    BigRational::from_integer(v.into())
}

/// Sufficient condition for a projective good quotient in type (2,1):
/// `λ2/λ1 > dim A_21` and `λ2 ≥ dim A_21 · c(τ, m2) / n1`.
pub fn quotient_condition(pol: &Polarization, spec: &RsSpec, dims: &DimVector, c_val: &BigRational) -> Result<bool> {
    need_21(spec)?;
    let a = q(spec.dim_a(1, 0));
    let (l1, l2) = (&pol.lambda[0], &pol.lambda[1]);
    Ok(l2 / l1 > a && *l2 >= &a * c_val / q(dims.n[0]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuotientCase {
    Case1,
    Case2,
    None,
}

/// The refined condition: the first case is [`quotient_condition`], the second
/// bounds `λ` from above and uses `c(τ*, m1)`.
pub fn quotient_case(pol: &Polarization, spec: &RsSpec, dims: &DimVector, c_tau_val: &BigRational, c_taustar_val: &BigRational) -> Result<QuotientCase> {
    if quotient_condition(pol, spec, dims, c_tau_val)? {
        return Ok(QuotientCase::Case1);
    }
    let (a, h11, h12, n1) = (q(spec.dim_a(1, 0)), q(spec.dim_h(0, 0)), q(spec.dim_h(0, 1)), q(dims.n[0]));
    let (l1, l2) = (&pol.lambda[0], &pol.lambda[1]);
    let case2 = *l1 < &h11 / &n1
        && *l2 < &h12 / &n1
        && l2 * &a - l1 > (&a * &h12 - &h11) / &n1
        && &h11 - l1 * &n1 >= c_taustar_val * &a;
    Ok(if case2 { QuotientCase::Case2 } else { QuotientCase::None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactla::Field;
    use crate::rs_spec::sym_spec;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn zero_map_is_unstable() {
        let spec = sym_spec(Field::Prime(2), 1, &[0], &[1]).unwrap();
        let dims = DimVector::new(vec![1], vec![1]);
        let pol = Polarization::new(vec![r(1, 1)], vec![r(1, 1)], &dims).unwrap();
        let v = gred_semistable(&spec, &dims, &PointW::zero(&spec, &dims), &pol, &Mode::default()).unwrap();
        assert!(!v.semistable && !v.stable);
        assert_eq!(v.witness.unwrap().m_sub[0].dim(), 1);
    }

    #[test]
    fn nonzero_line_map_is_stable() {
        let f = Field::Prime(2);
        let spec = sym_spec(f, 1, &[0], &[1]).unwrap();
        let dims = DimVector::new(vec![1], vec![1]);
        let pol = Polarization::new(vec![r(1, 1)], vec![r(1, 1)], &dims).unwrap();
        let w = PointW { blocks: vec![vec![Mat::from_i64(f, &[vec![1, 0]])]] };
        let v = gred_semistable(&spec, &dims, &w, &pol, &Mode::default()).unwrap();
        assert!(v.semistable && v.stable && v.certified);
    }

    #[test]
    fn kronecker_zero_and_generic() {
        let f = Field::Prime(2);
        let v = kronecker_semistable(&Mat::zeros(f, 2, 3), 3, &Mode::default()).unwrap();
        assert!(!v.semistable);
        // m = 1, n = 2: the image of L ⊗ M is everything, so no proper N'.
        let g = Mat::from_i64(f, &[vec![1, 0, 1], vec![0, 1, 1]]);
        let v = kronecker_semistable(&g, 3, &Mode::default()).unwrap();
        assert!(v.semistable && v.stable);
    }

    #[test]
    fn rationals_need_sampling() {
        let spec = sym_spec(Field::Rationals, 1, &[0], &[1]).unwrap();
        let dims = DimVector::new(vec![1], vec![1]);
        let pol = Polarization::new(vec![r(1, 1)], vec![r(1, 1)], &dims).unwrap();
        let w = PointW::zero(&spec, &dims);
        assert!(matches!(gred_semistable(&spec, &dims, &w, &pol, &Mode::default()), Err(Error::Field(_))));
        let v = gred_semistable(&spec, &dims, &w, &pol, &Mode::Sampled { samples: 5, seed: 0 }).unwrap();
        assert!(!v.semistable && v.certified);
    }

    #[test]
    fn c_empty_class_is_zero() {
        let spec = sym_spec(Field::Prime(2), 0, &[-1, 0], &[1]).unwrap();
        assert_eq!(spec.dim_a(1, 0), 1);
        assert_eq!(c_tau(&spec, 1, DEFAULT_BUDGET).unwrap(), BigRational::zero());
    }

    #[test]
    fn polarization_normalization() {
        let dims = DimVector::new(vec![1, 1], vec![2]);
        assert!(Polarization::new(vec![r(1, 4), r(3, 4)], vec![r(1, 2)], &dims).is_ok());
        assert!(Polarization::new(vec![r(1, 4), r(1, 4)], vec![r(1, 2)], &dims).is_err());
    }
}
