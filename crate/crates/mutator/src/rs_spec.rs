//! Type-(r,s) composition data, the space `W` of its morphisms, and duality.
//!
//! All indices are 0-based in the API and 1-based in JSON. Spaces are
//! `H[l][i]` (source `i`, target `l`), `A[j][i]` for `i ≤ j` and `B[m][l]` for
//! `l ≤ m`; the diagonal spaces `A[i][i]`, `B[l][l]` are one-dimensional and
//! their compositions are identities, so only strictly ordered maps are stored.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde_json::{json, Map, Value};

use crate::error::{shape, Error, Result};
use crate::exactla::{fmt_ratio, kron, parse_ratio, swap_map, Elem, Field, Mat};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RsSpec {
    pub field: Field,
    pub r: usize,
    pub s: usize,
    /// `dim_h[l][i] = dim H_li`.
    pub dim_h: Vec<Vec<usize>>,
    /// `(j, i) ↦ dim A_ji` for `j > i`.
    pub dim_a: BTreeMap<(usize, usize), usize>,
    /// `(m, l) ↦ dim B_ml` for `m > l`.
    pub dim_b: BTreeMap<(usize, usize), usize>,
    /// `(l, j, i)`, `j > i`: `H_lj ⊗ A_ji → H_li`.
    pub comp_ha: BTreeMap<(usize, usize, usize), Mat>,
    /// `(k, j, i)`, `k > j > i`: `A_kj ⊗ A_ji → A_ki`.
    pub comp_aa: BTreeMap<(usize, usize, usize), Mat>,
    /// `(m, l, i)`, `m > l`: `B_ml ⊗ H_li → H_mi`.
    pub comp_bh: BTreeMap<(usize, usize, usize), Mat>,
    /// `(n, m, l)`, `n > m > l`: `B_nm ⊗ B_ml → B_nl`.
    pub comp_bb: BTreeMap<(usize, usize, usize), Mat>,
}

fn missing(what: &str, idx: &[usize]) -> ! {
    panic!("composition {what}{idx:?} missing from spec")
}

impl RsSpec {
    pub fn dim_h(&self, l: usize, i: usize) -> usize {
        self.dim_h[l][i]
    }

    pub fn dim_a(&self, j: usize, i: usize) -> usize {
        assert!(j >= i, "A_{j}{i} needs j >= i");
        if j == i {
            1
        } else {
            self.dim_a[&(j, i)]
        }
    }

    pub fn dim_b(&self, m: usize, l: usize) -> usize {
        assert!(m >= l, "B_{m}{l} needs m >= l");
        if m == l {
            1
        } else {
            self.dim_b[&(m, l)]
        }
    }

    pub fn comp_ha(&self, l: usize, j: usize, i: usize) -> Cow<'_, Mat> {
        if j == i {
            return Cow::Owned(Mat::identity(self.field, self.dim_h(l, i)));
        }
        Cow::Borrowed(self.comp_ha.get(&(l, j, i)).unwrap_or_else(|| missing("HA", &[l, j, i])))
    }

    pub fn comp_aa(&self, k: usize, j: usize, i: usize) -> Cow<'_, Mat> {
        if k == j || j == i {
            return Cow::Owned(Mat::identity(self.field, self.dim_a(k, i)));
        }
        Cow::Borrowed(self.comp_aa.get(&(k, j, i)).unwrap_or_else(|| missing("AA", &[k, j, i])))
    }

    pub fn comp_bh(&self, m: usize, l: usize, i: usize) -> Cow<'_, Mat> {
        if m == l {
            return Cow::Owned(Mat::identity(self.field, self.dim_h(m, i)));
        }
        Cow::Borrowed(self.comp_bh.get(&(m, l, i)).unwrap_or_else(|| missing("BH", &[m, l, i])))
    }

    pub fn comp_bb(&self, n: usize, m: usize, l: usize) -> Cow<'_, Mat> {
        if n == m || m == l {
            return Cow::Owned(Mat::identity(self.field, self.dim_b(n, l)));
        }
        Cow::Borrowed(self.comp_bb.get(&(n, m, l)).unwrap_or_else(|| missing("BB", &[n, m, l])))
    }

    /// Empty spec with the given dimensions and no compositions filled in.
    pub fn skeleton(field: Field, r: usize, s: usize, dim_h: Vec<Vec<usize>>) -> RsSpec {
        RsSpec {
            field,
            r,
            s,
            dim_h,
            dim_a: BTreeMap::new(),
            dim_b: BTreeMap::new(),
            comp_ha: BTreeMap::new(),
            comp_aa: BTreeMap::new(),
            comp_bh: BTreeMap::new(),
            comp_bb: BTreeMap::new(),
        }
    }

    /// Expected shape of every stored composition, keyed by kind and indices.
    fn expected_maps(&self) -> Vec<(&'static str, [usize; 3], (usize, usize))> {
        let mut v = Vec::new();
        for l in 0..self.s {
            for j in 0..self.r {
                for i in 0..j {
                    v.push(("HA", [l, j, i], (self.dim_h(l, i), self.dim_h(l, j) * self.dim_a(j, i))));
                }
            }
        }
        for k in 0..self.r {
            for j in 0..k {
                for i in 0..j {
                    v.push(("AA", [k, j, i], (self.dim_a(k, i), self.dim_a(k, j) * self.dim_a(j, i))));
                }
            }
        }
        for m in 0..self.s {
            for l in 0..m {
                for i in 0..self.r {
                    v.push(("BH", [m, l, i], (self.dim_h(m, i), self.dim_b(m, l) * self.dim_h(l, i))));
                }
            }
        }
        for n in 0..self.s {
            for m in 0..n {
                for l in 0..m {
                    v.push(("BB", [n, m, l], (self.dim_b(n, l), self.dim_b(n, m) * self.dim_b(m, l))));
                }
            }
        }
        v
    }

    fn stored(&self, kind: &str, [a, b, c]: [usize; 3]) -> Option<&Mat> {
        match kind {
            "HA" => self.comp_ha.get(&(a, b, c)),
            "AA" => self.comp_aa.get(&(a, b, c)),
            "BH" => self.comp_bh.get(&(a, b, c)),
            _ => self.comp_bb.get(&(a, b, c)),
        }
    }

    /// Checks dimension tables and that every composition is present with the right shape.
    pub fn check_shapes(&self) -> Result<()> {
        if self.r == 0 || self.s == 0 {
            return Err(Error::Invalid("r and s must be positive".into()));
        }
        if self.dim_h.len() != self.s || self.dim_h.iter().any(|row| row.len() != self.r) {
            return Err(shape(format!("dimH must be {}x{}", self.s, self.r)));
        }
        for j in 0..self.r {
            for i in 0..j {
                if !self.dim_a.contains_key(&(j, i)) {
                    return Err(Error::Invalid(format!("dim A_{},{} missing", j + 1, i + 1)));
                }
            }
        }
        for m in 0..self.s {
            for l in 0..m {
                if !self.dim_b.contains_key(&(m, l)) {
                    return Err(Error::Invalid(format!("dim B_{},{} missing", m + 1, l + 1)));
                }
            }
        }
        for (kind, idx, shp) in self.expected_maps() {
            match self.stored(kind, idx) {
                None => return Err(Error::Invalid(format!("composition {kind}{} missing", one_based(&idx)))),
                Some(m) if m.shape() != shp || m.field() != self.field => {
                    return Err(shape(format!("composition {kind}{}: expected {shp:?}, got {:?}", one_based(&idx), m.shape())))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn one_based(idx: &[usize]) -> String {
    let v: Vec<String> = idx.iter().map(|x| (x + 1).to_string()).collect();
    format!("({})", v.join(","))
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxiomCheck {
    pub axiom: String,
    /// 1-based indices of the instance.
    pub indices: Vec<usize>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub checks: Vec<AxiomCheck>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&AxiomCheck> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn to_json(&self) -> Value {
        let fails: Vec<Value> =
            self.failures().iter().map(|c| json!({"axiom": c.axiom, "indices": c.indices})).collect();
        let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for c in &self.checks {
            let e = counts.entry(c.axiom.as_str()).or_default();
            e.0 += 1;
            e.1 += c.pass as usize;
        }
        let summary: Map<String, Value> =
            counts.into_iter().map(|(k, (n, p))| (k.to_string(), json!({"checked": n, "passed": p}))).collect();
        json!({"valid": self.ok(), "axioms": summary, "failures": fails})
    }
}

fn push(checks: &mut Vec<AxiomCheck>, axiom: &str, idx: &[usize], pass: bool) {
    checks.push(AxiomCheck { axiom: axiom.into(), indices: idx.iter().map(|x| x + 1).collect(), pass });
}

fn surjective(m: &Mat) -> bool {
    m.rank() == m.rows()
}

/// Checks the five associativity diagrams, surjectivity of every composition
/// and of the two induced maps on duals. Shape errors are reported as failures.
pub fn validate(spec: &RsSpec) -> ValidationReport {
    let mut checks = Vec::new();
    if let Err(e) = spec.check_shapes() {
        checks.push(AxiomCheck { axiom: format!("shape: {e}"), indices: vec![], pass: false });
        return ValidationReport { checks };
    }
    let f = spec.field;
    let id = |n: usize| Mat::identity(f, n);
    let (r, s) = (spec.r, spec.s);

    for k in 0..r {
        for j in 0..=k {
            for i in 0..=j {
                for h in 0..=i {
                    let p1 = spec.comp_aa(k, i, h).mul(&kron(&spec.comp_aa(k, j, i), &id(spec.dim_a(i, h))));
                    let p2 = spec.comp_aa(k, j, h).mul(&kron(&id(spec.dim_a(k, j)), &spec.comp_aa(j, i, h)));
                    push(&mut checks, "AAA associativity", &[k, j, i, h], p1 == p2);
                }
            }
        }
    }
    for l in 0..s {
        for k in 0..r {
            for j in 0..=k {
                for i in 0..=j {
                    let p1 = spec.comp_ha(l, j, i).mul(&kron(&spec.comp_ha(l, k, j), &id(spec.dim_a(j, i))));
                    let p2 = spec.comp_ha(l, k, i).mul(&kron(&id(spec.dim_h(l, k)), &spec.comp_aa(k, j, i)));
                    push(&mut checks, "HAA associativity", &[l, k, j, i], p1 == p2);
                }
            }
        }
    }
    for m in 0..s {
        for l in 0..=m {
            for j in 0..r {
                for i in 0..=j {
                    let p1 = spec.comp_ha(m, j, i).mul(&kron(&spec.comp_bh(m, l, j), &id(spec.dim_a(j, i))));
                    let p2 = spec.comp_bh(m, l, i).mul(&kron(&id(spec.dim_b(m, l)), &spec.comp_ha(l, j, i)));
                    push(&mut checks, "BHA associativity", &[m, l, j, i], p1 == p2);
                }
            }
        }
    }
    for n in 0..s {
        for m in 0..=n {
            for l in 0..=m {
                for i in 0..r {
                    let p1 = spec.comp_bh(n, l, i).mul(&kron(&spec.comp_bb(n, m, l), &id(spec.dim_h(l, i))));
                    let p2 = spec.comp_bh(n, m, i).mul(&kron(&id(spec.dim_b(n, m)), &spec.comp_bh(m, l, i)));
                    push(&mut checks, "BBH associativity", &[n, m, l, i], p1 == p2);
                }
            }
        }
    }
    for o in 0..s {
        for n in 0..=o {
            for m in 0..=n {
                for l in 0..=m {
                    let p1 = spec.comp_bb(o, m, l).mul(&kron(&spec.comp_bb(o, n, m), &id(spec.dim_b(m, l))));
                    let p2 = spec.comp_bb(o, n, l).mul(&kron(&id(spec.dim_b(o, n)), &spec.comp_bb(n, m, l)));
                    push(&mut checks, "BBB associativity", &[o, n, m, l], p1 == p2);
                }
            }
        }
    }
    for (kind, idx, _) in spec.expected_maps() {
        let m = spec.stored(kind, idx).unwrap();
        push(&mut checks, &format!("{kind} surjective"), &idx, surjective(m));
    }
    for l in 0..s {
        for j in 0..r {
            for i in 0..j {
                push(&mut checks, "H*A -> H* surjective", &[l, j, i], surjective(&induced_ha_dual(spec, l, j, i)));
            }
        }
    }
    for m in 0..s {
        for l in 0..m {
            for i in 0..r {
                push(&mut checks, "H*B -> H* surjective", &[m, l, i], surjective(&induced_bh_dual(spec, m, l, i)));
            }
        }
    }
    ValidationReport { checks }
}

/// `H*_li ⊗ A_ji → H*_lj` induced by `H_lj ⊗ A_ji → H_li`.
pub fn induced_ha_dual(spec: &RsSpec, l: usize, j: usize, i: usize) -> Mat {
    let c = spec.comp_ha(l, j, i);
    let (hi, hj, a) = (spec.dim_h(l, i), spec.dim_h(l, j), spec.dim_a(j, i));
    let mut t = Mat::zeros(spec.field, hj, hi * a);
    for h in 0..hj {
        for ci in 0..hi {
            for ai in 0..a {
                t.set(h, ci * a + ai, &c.get(ci, h * a + ai));
            }
        }
    }
    t
}

/// `H*_mi ⊗ B_ml → H*_li` induced by `B_ml ⊗ H_li → H_mi`.
pub fn induced_bh_dual(spec: &RsSpec, m: usize, l: usize, i: usize) -> Mat {
    let c = spec.comp_bh(m, l, i);
    let (hm, hl, b) = (spec.dim_h(m, i), spec.dim_h(l, i), spec.dim_b(m, l));
    let mut t = Mat::zeros(spec.field, hl, hm * b);
    for h in 0..hl {
        for ci in 0..hm {
            for bi in 0..b {
                t.set(h, ci * b + bi, &c.get(ci, bi * hl + h));
            }
        }
    }
    t
}

// ---------------------------------------------------------------------------
// Line-bundle instances

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Exponent vectors of degree `d` in `nv` variables, lexicographically descending.
pub fn monomials(nv: usize, d: usize) -> Vec<Vec<usize>> {
    if nv == 0 {
        return if d == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (0..=d).rev() {
        for mut rest in monomials(nv - 1, d - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Multiplication `S^d1 ⊗ S^d2 → S^(d1+d2)` of forms in `nv` variables.
pub fn multiplication_map(field: Field, nv: usize, d1: usize, d2: usize) -> Mat {
    let m1 = monomials(nv, d1);
    let m2 = monomials(nv, d2);
    let target: HashMap<Vec<usize>, usize> =
        monomials(nv, d1 + d2).into_iter().enumerate().map(|(k, e)| (e, k)).collect();
    let mut out = Mat::zeros(field, target.len(), m1.len() * m2.len());
    for (a, e1) in m1.iter().enumerate() {
        for (b, e2) in m2.iter().enumerate() {
            let sum: Vec<usize> = e1.iter().zip(e2).map(|(x, y)| x + y).collect();
            out.set(target[&sum], a * m2.len() + b, &field.one());
        }
    }
    out
}

/// Morphisms `⊕ O(a_i) ⊗ M_i → ⊕ O(b_l) ⊗ N_l` on projective `nvars`-space:
/// every Hom space is a space of forms and every composition is multiplication.
pub fn sym_spec(field: Field, nvars: usize, a: &[i64], b: &[i64]) -> Result<RsSpec> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Precondition("a and b must be nonempty".into()));
    }
    if a.windows(2).any(|w| w[0] > w[1]) || b.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Precondition("a and b must be nondecreasing".into()));
    }
    if a[a.len() - 1] >= b[0] {
        return Err(Error::Precondition("need max(a) < min(b) so that every degree is positive".into()));
    }
    let nv = nvars + 1;
    let (r, s) = (a.len(), b.len());
    let deg = |x: i64, y: i64| (y - x) as usize;
    let dim = |d: usize| monomials(nv, d).len();
    let dim_h = (0..s).map(|l| (0..r).map(|i| dim(deg(a[i], b[l]))).collect()).collect();
    let mut spec = RsSpec::skeleton(field, r, s, dim_h);
    for j in 0..r {
        for i in 0..j {
            spec.dim_a.insert((j, i), dim(deg(a[i], a[j])));
        }
    }
    for m in 0..s {
        for l in 0..m {
            spec.dim_b.insert((m, l), dim(deg(b[l], b[m])));
        }
    }
    for l in 0..s {
        for j in 0..r {
            for i in 0..j {
                spec.comp_ha.insert((l, j, i), multiplication_map(field, nv, deg(a[j], b[l]), deg(a[i], a[j])));
            }
        }
    }
    for k in 0..r {
        for j in 0..k {
            for i in 0..j {
                spec.comp_aa.insert((k, j, i), multiplication_map(field, nv, deg(a[j], a[k]), deg(a[i], a[j])));
            }
        }
    }
    for m in 0..s {
        for l in 0..m {
            for i in 0..r {
                spec.comp_bh.insert((m, l, i), multiplication_map(field, nv, deg(b[l], b[m]), deg(a[i], b[l])));
            }
        }
    }
    for n in 0..s {
        for m in 0..n {
            for l in 0..m {
                spec.comp_bb.insert((n, m, l), multiplication_map(field, nv, deg(b[m], b[n]), deg(b[l], b[m])));
            }
        }
    }
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Duality

/// Transposed problem: sources and targets exchanged and reversed.
pub fn dual_spec(spec: &RsSpec) -> Result<RsSpec> {
    spec.check_shapes()?;
    let (r, s) = (spec.r, spec.s);
    let f = spec.field;
    let dim_h = (0..r).map(|l| (0..s).map(|i| spec.dim_h(s - 1 - i, r - 1 - l)).collect()).collect();
    let mut d = RsSpec::skeleton(f, s, r, dim_h);
    for j in 0..s {
        for i in 0..j {
            d.dim_a.insert((j, i), spec.dim_b(s - 1 - i, s - 1 - j));
        }
    }
    for m in 0..r {
        for l in 0..m {
            d.dim_b.insert((m, l), spec.dim_a(r - 1 - l, r - 1 - m));
        }
    }
    for l in 0..r {
        for j in 0..s {
            for i in 0..j {
                let c = spec.comp_bh(s - 1 - i, s - 1 - j, r - 1 - l);
                let sw = swap_map(f, d.dim_h(l, j), d.dim_a(j, i));
                d.comp_ha.insert((l, j, i), c.mul(&sw));
            }
        }
    }
    for k in 0..s {
        for j in 0..k {
            for i in 0..j {
                let c = spec.comp_bb(s - 1 - i, s - 1 - j, s - 1 - k);
                let sw = swap_map(f, d.dim_a(k, j), d.dim_a(j, i));
                d.comp_aa.insert((k, j, i), c.mul(&sw));
            }
        }
    }
    for m in 0..r {
        for l in 0..m {
            for i in 0..s {
                let c = spec.comp_ha(s - 1 - i, r - 1 - l, r - 1 - m);
                let sw = swap_map(f, d.dim_b(m, l), d.dim_h(l, i));
                d.comp_bh.insert((m, l, i), c.mul(&sw));
            }
        }
    }
    for n in 0..r {
        for m in 0..n {
            for l in 0..m {
                let c = spec.comp_aa(r - 1 - l, r - 1 - m, r - 1 - n);
                let sw = swap_map(f, d.dim_b(n, m), d.dim_b(m, l));
                d.comp_bb.insert((n, m, l), c.mul(&sw));
            }
        }
    }
    Ok(d)
}

// ---------------------------------------------------------------------------
// Points

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DimVector {
    pub m: Vec<usize>,
    pub n: Vec<usize>,
}

impl DimVector {
    pub fn new(m: Vec<usize>, n: Vec<usize>) -> DimVector {
        DimVector { m, n }
    }

    pub fn check(&self, spec: &RsSpec) -> Result<()> {
        if self.m.len() != spec.r || self.n.len() != spec.s {
            return Err(shape(format!("dims ({}, {}) for a ({}, {}) spec", self.m.len(), self.n.len(), spec.r, spec.s)));
        }
        if self.m.iter().chain(&self.n).any(|&x| x == 0) {
            return Err(Error::Invalid("all multiplicities must be positive".into()));
        }
        Ok(())
    }

    pub fn dual(&self) -> DimVector {
        DimVector { m: self.n.iter().rev().copied().collect(), n: self.m.iter().rev().copied().collect() }
    }

    /// `dim W = Σ n_l · dim H_li · m_i`.
    pub fn w_dim(&self, spec: &RsSpec) -> usize {
        let mut t = 0;
        for l in 0..spec.s {
            for i in 0..spec.r {
                t += self.n[l] * spec.dim_h(l, i) * self.m[i];
            }
        }
        t
    }
}

/// A point of `W = ⊕ Hom(H*_li ⊗ M_i, N_l)`; block `[l][i]` is
/// `n_l × (dim H_li · m_i)` with columns indexed `(h, x)`, `h` slow.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PointW {
    pub blocks: Vec<Vec<Mat>>,
}

impl PointW {
    pub fn zero(spec: &RsSpec, dims: &DimVector) -> PointW {
        let blocks = (0..spec.s)
            .map(|l| (0..spec.r).map(|i| Mat::zeros(spec.field, dims.n[l], spec.dim_h(l, i) * dims.m[i])).collect())
            .collect();
        PointW { blocks }
    }

    pub fn random<R: Rng>(spec: &RsSpec, dims: &DimVector, rng: &mut R) -> PointW {
        let blocks = (0..spec.s)
            .map(|l| {
                (0..spec.r).map(|i| Mat::random(spec.field, dims.n[l], spec.dim_h(l, i) * dims.m[i], rng)).collect()
            })
            .collect();
        PointW { blocks }
    }

    pub fn check(&self, spec: &RsSpec, dims: &DimVector) -> Result<()> {
        if self.blocks.len() != spec.s || self.blocks.iter().any(|row| row.len() != spec.r) {
            return Err(shape("point block grid does not match (r,s)"));
        }
        for l in 0..spec.s {
            for i in 0..spec.r {
                let want = (dims.n[l], spec.dim_h(l, i) * dims.m[i]);
                if self.blocks[l][i].shape() != want {
                    return Err(shape(format!("block ({},{}): expected {want:?}, got {:?}", l + 1, i + 1, self.blocks[l][i].shape())));
                }
            }
        }
        Ok(())
    }

    pub fn neg(&self) -> PointW {
        PointW { blocks: self.blocks.iter().map(|row| row.iter().map(Mat::neg).collect()).collect() }
    }

    pub fn add(&self, o: &PointW) -> PointW {
        let blocks = self.blocks.iter().zip(&o.blocks).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.add(y)).collect()).collect();
        PointW { blocks }
    }

    /// All coordinates, blocks in `(l, i)` order, entries row-major.
    pub fn flat(&self) -> Vec<Elem> {
        self.blocks.iter().flatten().flat_map(|b| b.entries()).collect()
    }

    /// Index of the point in base-p digit order (first coordinate most significant).
    pub fn index(&self) -> u64 {
        let mut idx = 0u64;
        let mut p = 0u64;
        for b in self.blocks.iter().flatten() {
            if let Field::Prime(q) = b.field() {
                p = q as u64;
            }
            for &v in b.residues() {
                idx = idx * p + v as u64;
            }
        }
        idx
    }

    pub fn from_index(spec: &RsSpec, dims: &DimVector, mut idx: u64) -> PointW {
        let p = spec.field.order().expect("finite field") as u64;
        let mut pt = PointW::zero(spec, dims);
        let total = dims.w_dim(spec);
        let mut digits = vec![0u32; total];
        for d in digits.iter_mut().rev() {
            *d = (idx % p) as u32;
            idx /= p;
        }
        let mut k = 0;
        for b in pt.blocks.iter_mut().flatten() {
            let n = b.rows() * b.cols();
            *b = Mat::from_residues(spec.field, b.rows(), b.cols(), digits[k..k + n].to_vec());
            k += n;
        }
        pt
    }
}

/// Number of points of `W` over a finite field, if it fits in `u64`.
pub fn point_count(spec: &RsSpec, dims: &DimVector) -> Option<u64> {
    let p = spec.field.order()? as u64;
    p.checked_pow(dims.w_dim(spec) as u32)
}

/// The transposed point in the dual problem; blocks transpose per basis vector of `H`.
pub fn dual_point(spec: &RsSpec, dims: &DimVector, w: &PointW) -> Result<PointW> {
    w.check(spec, dims)?;
    let (r, s) = (spec.r, spec.s);
    let mut blocks = vec![Vec::with_capacity(s); r];
    for (lp, row) in blocks.iter_mut().enumerate() {
        for ip in 0..s {
            let (l, i) = (s - 1 - ip, r - 1 - lp);
            let (h, mi, nl) = (spec.dim_h(l, i), dims.m[i], dims.n[l]);
            let src = &w.blocks[l][i];
            let mut out = Mat::zeros(spec.field, mi, h * nl);
            for hh in 0..h {
                for x in 0..mi {
                    for y in 0..nl {
                        out.set(x, hh * nl + y, &src.get(y, hh * mi + x));
                    }
                }
            }
            row.push(out);
        }
    }
    Ok(PointW { blocks })
}

// ---------------------------------------------------------------------------
// JSON

fn perr(path: &str, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.into(), msg: msg.into() }
}

pub fn field_to_json(f: Field) -> Value {
    match f {
        Field::Rationals => json!({"type": "Q"}),
        Field::Prime(p) => json!({"type": "GF", "p": p}),
    }
}

pub fn field_from_json(v: &Value, path: &str) -> Result<Field> {
    match v.get("type").and_then(Value::as_str) {
        Some("Q") => Ok(Field::Rationals),
        Some("GF") => {
            let p = v.get("p").and_then(Value::as_u64).ok_or_else(|| perr(path, "GF field needs integer p"))?;
            Field::gf(p as u32).map_err(|e| perr(path, e.to_string()))
        }
        _ => Err(perr(path, "field must be {\"type\":\"Q\"} or {\"type\":\"GF\",\"p\":..}")),
    }
}

pub fn elem_to_json(e: &Elem) -> Value {
    match e {
        Elem::Q(q) => Value::String(fmt_ratio(q)),
        Elem::F { v, .. } => json!(v),
    }
}

pub fn elem_from_json(f: Field, v: &Value, path: &str) -> Result<Elem> {
    match f {
        Field::Prime(p) => {
            let x = v.as_u64().ok_or_else(|| perr(path, "GF element must be an integer"))?;
            if x >= p as u64 {
                return Err(perr(path, format!("GF({p}) element {x} not in 0..{p}")));
            }
            Ok(Elem::F { v: x as u32, p })
        }
        Field::Rationals => match v {
            Value::String(s) => parse_ratio(s).map(Elem::Q).map_err(|e| perr(path, e.to_string())),
            Value::Number(n) if n.is_i64() => Ok(f.from_i64(n.as_i64().unwrap())),
            _ => Err(perr(path, "rational must be a string \"a/b\" or an integer")),
        },
    }
}

pub fn mat_to_json(m: &Mat) -> Value {
    Value::Array((0..m.rows()).map(|i| Value::Array((0..m.cols()).map(|j| elem_to_json(&m.get(i, j))).collect())).collect())
}

/// Parses a nested array; `shape` fixes the expected dimensions (needed for empty matrices).
pub fn mat_from_json(f: Field, v: &Value, shp: Option<(usize, usize)>, path: &str) -> Result<Mat> {
    let rows = v.as_array().ok_or_else(|| perr(path, "matrix must be an array of rows"))?;
    let ncols = match (rows.first(), shp) {
        (Some(r0), _) => r0.as_array().ok_or_else(|| perr(path, "row must be an array"))?.len(),
        (None, Some((_, c))) => c,
        (None, None) => 0,
    };
    let mut m = Mat::zeros(f, rows.len(), ncols);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| perr(path, format!("row {i} must be an array")))?;
        if row.len() != ncols {
            return Err(perr(path, format!("row {i} has {} entries, expected {ncols}", row.len())));
        }
        for (j, x) in row.iter().enumerate() {
            m.set(i, j, &elem_from_json(f, x, &format!("{path}[{i}][{j}]"))?);
        }
    }
    if let Some(s) = shp {
        if m.shape() != s {
            return Err(perr(path, format!("expected shape {s:?}, got {:?}", m.shape())));
        }
    }
    Ok(m)
}

fn key(idx: &[usize]) -> String {
    idx.iter().map(|x| (x + 1).to_string()).collect::<Vec<_>>().join(",")
}

fn parse_key(k: &str, n: usize, path: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = k.split(',').collect();
    if parts.len() != n {
        return Err(perr(path, format!("key {k:?} must have {n} indices")));
    }
    parts
        .iter()
        .map(|p| match p.trim().parse::<usize>() {
            Ok(x) if x >= 1 => Ok(x - 1),
            _ => Err(perr(path, format!("key {k:?}: indices are 1-based integers"))),
        })
        .collect()
}

pub fn serialize_spec(spec: &RsSpec) -> Value {
    let maps = |m: &BTreeMap<(usize, usize, usize), Mat>| -> Value {
        Value::Object(m.iter().map(|(&(a, b, c), v)| (key(&[a, b, c]), mat_to_json(v))).collect())
    };
    let dims = |m: &BTreeMap<(usize, usize), usize>| -> Value {
        Value::Object(m.iter().map(|(&(a, b), v)| (key(&[a, b]), json!(v))).collect())
    };
    json!({
        "field": field_to_json(spec.field),
        "r": spec.r,
        "s": spec.s,
        "dimH": spec.dim_h,
        "dimA": dims(&spec.dim_a),
        "dimB": dims(&spec.dim_b),
        "compHA": maps(&spec.comp_ha),
        "compAA": maps(&spec.comp_aa),
        "compBH": maps(&spec.comp_bh),
        "compBB": maps(&spec.comp_bb),
    })
}

fn get_obj<'a>(v: &'a Value, k: &str) -> Result<Option<&'a Map<String, Value>>> {
    match v.get(k) {
        None => Ok(None),
        Some(Value::Object(o)) => Ok(Some(o)),
        Some(_) => Err(perr(k, "must be an object")),
    }
}

fn get_usize(v: &Value, k: &str) -> Result<usize> {
    v.get(k).and_then(Value::as_u64).map(|x| x as usize).ok_or_else(|| perr(k, "missing or not a nonnegative integer"))
}

/// Parses and shape-checks a spec. Diagonal entries (`"i,i"`) are accepted only
/// when they encode the one-dimensional identity.
pub fn parse_spec(v: &Value) -> Result<RsSpec> {
    let field = field_from_json(v.get("field").ok_or_else(|| perr("field", "missing"))?, "field")?;
    let r = get_usize(v, "r")?;
    let s = get_usize(v, "s")?;
    let dh = v.get("dimH").and_then(Value::as_array).ok_or_else(|| perr("dimH", "missing array"))?;
    if dh.len() != s {
        return Err(perr("dimH", format!("expected {s} rows")));
    }
    let mut dim_h = Vec::new();
    for (l, row) in dh.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| perr("dimH", "rows must be arrays"))?;
        if row.len() != r {
            return Err(perr(&format!("dimH[{l}]"), format!("expected {r} entries")));
        }
        dim_h.push(row.iter().map(|x| x.as_u64().map(|y| y as usize)).collect::<Option<Vec<_>>>().ok_or_else(|| perr("dimH", "entries must be nonnegative integers"))?);
    }
    let mut spec = RsSpec::skeleton(field, r, s, dim_h);
    for (name, axiom, bound) in [("dimA", "A_ii", r), ("dimB", "B_ll", s)] {
        if let Some(o) = get_obj(v, name)? {
            for (k, x) in o {
                let path = format!("{name}.{k}");
                let idx = parse_key(k, 2, &path)?;
                let d = x.as_u64().ok_or_else(|| perr(&path, "dimension must be a nonnegative integer"))? as usize;
                if idx[0] >= bound || idx[1] > idx[0] {
                    return Err(perr(&path, "indices out of range (need second ≤ first)"));
                }
                if idx[0] == idx[1] {
                    if d != 1 {
                        return Err(perr(&path, format!("{axiom} must be the one-dimensional base field (dimension 1), got {d}")));
                    }
                    continue;
                }
                let tgt = if name == "dimA" { &mut spec.dim_a } else { &mut spec.dim_b };
                tgt.insert((idx[0], idx[1]), d);
            }
        }
    }
    // Fill in shapes now that dimension tables are known.
    let expected: HashMap<(&str, [usize; 3]), (usize, usize)> = {
        let mut probe = spec.clone();
        for j in 0..r {
            for i in 0..j {
                probe.dim_a.entry((j, i)).or_insert(0);
            }
        }
        for m in 0..s {
            for l in 0..m {
                probe.dim_b.entry((m, l)).or_insert(0);
            }
        }
        probe.expected_maps().into_iter().map(|(k, i, s)| ((k, i), s)).collect()
    };
    for (name, kind) in [("compHA", "HA"), ("compAA", "AA"), ("compBH", "BH"), ("compBB", "BB")] {
        if let Some(o) = get_obj(v, name)? {
            for (k, x) in o {
                let path = format!("{name}.{k}");
                let idx = parse_key(k, 3, &path)?;
                let idx3 = [idx[0], idx[1], idx[2]];
                let diagonal = match kind {
                    "HA" => idx[1] == idx[2],
                    "BH" => idx[0] == idx[1],
                    _ => idx[0] == idx[1] || idx[1] == idx[2],
                };
                if diagonal {
                    let m = mat_from_json(field, x, None, &path)?;
                    if !m.is_identity() {
                        return Err(perr(&path, "composition with a repeated index must be the identity"));
                    }
                    continue;
                }
                let shp = *expected.get(&(kind, idx3)).ok_or_else(|| perr(&path, "indices out of range"))?;
                let m = mat_from_json(field, x, Some(shp), &path)?;
                let tgt = match kind {
                    "HA" => &mut spec.comp_ha,
                    "AA" => &mut spec.comp_aa,
                    "BH" => &mut spec.comp_bh,
                    _ => &mut spec.comp_bb,
                };
                tgt.insert((idx[0], idx[1], idx[2]), m);
            }
        }
    }
    spec.check_shapes()?;
    Ok(spec)
}

pub fn serialize_point(spec: &RsSpec, dims: &DimVector, w: &PointW) -> Value {
    let mut blocks = Map::new();
    for l in 0..spec.s {
        for i in 0..spec.r {
            blocks.insert(key(&[l, i]), mat_to_json(&w.blocks[l][i]));
        }
    }
    json!({"dims": {"m": dims.m, "n": dims.n}, "blocks": blocks})
}

/// Parses a point. Multiplicities come from `"dims"` when present, otherwise
/// from block shapes.
pub fn parse_point(spec: &RsSpec, v: &Value) -> Result<(PointW, DimVector)> {
    let blocks = get_obj(v, "blocks")?.ok_or_else(|| perr("blocks", "missing"))?;
    let dims = match v.get("dims") {
        Some(d) => {
            let arr = |k: &str| -> Result<Vec<usize>> {
                d.get(k)
                    .and_then(Value::as_array)
                    .and_then(|a| a.iter().map(|x| x.as_u64().map(|y| y as usize)).collect())
                    .ok_or_else(|| perr(&format!("dims.{k}"), "must be an array of integers"))
            };
            DimVector::new(arr("m")?, arr("n")?)
        }
        None => {
            let mut m = vec![None; spec.r];
            let mut n = vec![None; spec.s];
            for (k, x) in blocks {
                let idx = parse_key(k, 2, &format!("blocks.{k}"))?;
                let (l, i) = (idx[0], idx[1]);
                if l >= spec.s || i >= spec.r {
                    return Err(perr(&format!("blocks.{k}"), "index out of range"));
                }
                let mat = mat_from_json(spec.field, x, None, &format!("blocks.{k}"))?;
                n[l] = Some(mat.rows());
                if spec.dim_h(l, i) > 0 && mat.rows() > 0 {
                    m[i] = Some(mat.cols() / spec.dim_h(l, i));
                }
            }
            let m = m.into_iter().collect::<Option<Vec<_>>>().ok_or_else(|| perr("dims", "cannot infer source multiplicities; add a \"dims\" entry"))?;
            let n = n.into_iter().collect::<Option<Vec<_>>>().ok_or_else(|| perr("dims", "cannot infer target multiplicities; add a \"dims\" entry"))?;
            DimVector::new(m, n)
        }
    };
    dims.check(spec)?;
    let mut w = PointW::zero(spec, &dims);
    for (k, x) in blocks {
        let path = format!("blocks.{k}");
        let idx = parse_key(k, 2, &path)?;
        if idx[0] >= spec.s || idx[1] >= spec.r {
            return Err(perr(&path, "index out of range"));
        }
        let shp = w.blocks[idx[0]][idx[1]].shape();
        w.blocks[idx[0]][idx[1]] = mat_from_json(spec.field, x, Some(shp), &path)?;
    }
    Ok((w, dims))
}
