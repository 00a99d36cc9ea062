//! The triangular groups `G_L`, `G_R` acting on `W`, their unipotent and
//! reductive parts, and exhaustive enumeration over prime fields.
//!
//! An element is a lower-triangular grid of blocks. Block `(i, j)`, `j ≤ i`,
//! lives in `Hom(A*_ij ⊗ M_j, M_i)` and is stored `m_i × (dim A_ij · m_j)` with
//! columns `(a, x)`, `a` slow; diagonal blocks are plain `m_i × m_i` matrices.

use std::borrow::Cow;

use rand::Rng;
use serde_json::{json, Value};

use crate::error::{shape, Error, Result};
use crate::exactla::{kron, Field, Mat};
use crate::rs_spec::{mat_to_json, DimVector, PointW, RsSpec};

pub const DEFAULT_BUDGET: u64 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    /// Source side: spaces `A`, multiplicities `m`.
    L,
    /// Target side: spaces `B`, multiplicities `n`.
    R,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Subgroup {
    Full,
    /// Identity diagonal.
    Unipotent,
    /// Zero off-diagonal part.
    Reductive,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TriElem {
    /// `blocks[i][j]` for `j ≤ i`.
    pub blocks: Vec<Vec<Mat>>,
}

impl TriElem {
    pub fn diag(&self, i: usize) -> &Mat {
        &self.blocks[i][i]
    }

    pub fn is_unipotent(&self) -> bool {
        (0..self.blocks.len()).all(|i| self.blocks[i][i].is_identity())
    }

    pub fn is_diagonal(&self) -> bool {
        self.blocks.iter().enumerate().all(|(i, row)| row[..i].iter().all(Mat::is_zero))
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self.blocks.iter().map(|row| Value::Array(row.iter().map(mat_to_json).collect())).collect();
        json!(rows)
    }
}

/// `c`-th output block `Σ C[c, (a,b)] · X^a · Y^b` of composing two block rows.
///
/// `x` is `p × (da·q)`, `y` is `q × (db·t)`; `comp` maps `da·db → dc`.
pub fn compose_blocks(comp: &Mat, x: &Mat, y: &Mat, da: usize, db: usize) -> Mat {
    let f = x.field();
    let (p, q) = (x.rows(), y.rows());
    let t = y.cols().checked_div(db).unwrap_or(0);
    let dc = comp.rows();
    let mut out = Mat::zeros(f, p, dc * t);
    if p == 0 || t == 0 {
        return out;
    }
    let xa: Vec<Mat> = (0..da).map(|a| x.block(0, p, a * q, q)).collect();
    let yb: Vec<Mat> = (0..db).map(|b| y.block(0, q, b * t, t)).collect();
    for a in 0..da {
        if xa[a].is_zero() {
            continue;
        }
        for b in 0..db {
            if yb[b].is_zero() {
                continue;
            }
            let mut prod: Option<Mat> = None;
            for c in 0..dc {
                let coeff = comp.get(c, a * db + b);
                if coeff.is_zero() {
                    continue;
                }
                let pr = prod.get_or_insert_with(|| xa[a].mul(&yb[b]));
                let cur = out.block(0, p, c * t, t);
                out.set_block(0, c * t, &cur.add(&pr.scale(&coeff)));
            }
        }
    }
    out
}

/// One of the two triangular groups for fixed spec and multiplicities.
#[derive(Clone, Debug)]
pub struct Tri<'a> {
    pub spec: &'a RsSpec,
    pub side: Side,
    pub mult: Vec<usize>,
}

impl<'a> Tri<'a> {
    pub fn new(spec: &'a RsSpec, side: Side, dims: &DimVector) -> Tri<'a> {
        let mult = match side {
            Side::L => dims.m.clone(),
            Side::R => dims.n.clone(),
        };
        Tri { spec, side, mult }
    }

    pub fn field(&self) -> Field {
        self.spec.field
    }

    pub fn len(&self) -> usize {
        self.mult.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mult.is_empty()
    }

    /// Dimension of the composition space indexing block `(i, j)`.
    pub fn d(&self, i: usize, j: usize) -> usize {
        match self.side {
            Side::L => self.spec.dim_a(i, j),
            Side::R => self.spec.dim_b(i, j),
        }
    }

    /// `S_ik ⊗ S_kj → S_ij`.
    pub fn comp(&self, i: usize, k: usize, j: usize) -> Cow<'a, Mat> {
        match self.side {
            Side::L => self.spec.comp_aa(i, k, j),
            Side::R => self.spec.comp_bb(i, k, j),
        }
    }

    pub fn block_shape(&self, i: usize, j: usize) -> (usize, usize) {
        (self.mult[i], self.d(i, j) * self.mult[j])
    }

    pub fn identity(&self) -> TriElem {
        let f = self.field();
        let blocks = (0..self.len())
            .map(|i| {
                (0..=i)
                    .map(|j| if i == j { Mat::identity(f, self.mult[i]) } else { Mat::zeros(f, self.mult[i], self.d(i, j) * self.mult[j]) })
                    .collect()
            })
            .collect();
        TriElem { blocks }
    }

    pub fn check(&self, g: &TriElem) -> Result<()> {
        if g.blocks.len() != self.len() {
            return Err(shape("group element has the wrong number of block rows"));
        }
        for i in 0..self.len() {
            if g.blocks[i].len() != i + 1 {
                return Err(shape(format!("block row {} must have {} blocks", i + 1, i + 1)));
            }
            for j in 0..=i {
                if g.blocks[i][j].shape() != self.block_shape(i, j) {
                    return Err(shape(format!("block ({},{}) has shape {:?}, expected {:?}", i + 1, j + 1, g.blocks[i][j].shape(), self.block_shape(i, j))));
                }
            }
            if !g.blocks[i][i].is_invertible() {
                return Err(Error::Invalid(format!("diagonal block {} is singular", i + 1)));
            }
        }
        Ok(())
    }

    /// Group product `x·y` (apply `y` first, as maps).
    pub fn mul(&self, x: &TriElem, y: &TriElem) -> TriElem {
        let blocks = (0..self.len())
            .map(|i| {
                (0..=i)
                    .map(|j| {
                        let mut acc = Mat::zeros(self.field(), self.mult[i], self.d(i, j) * self.mult[j]);
                        for k in j..=i {
                            let c = self.comp(i, k, j);
                            acc = acc.add(&compose_blocks(&c, &x.blocks[i][k], &y.blocks[k][j], self.d(i, k), self.d(k, j)));
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        TriElem { blocks }
    }

    /// Inverse by inverting the diagonal and back-substituting along subdiagonals.
    pub fn inv(&self, g: &TriElem) -> TriElem {
        let n = self.len();
        let mut x = self.identity();
        let dinv: Vec<Mat> = (0..n).map(|i| g.blocks[i][i].inverse().expect("diagonal block invertible")).collect();
        for i in 0..n {
            x.blocks[i][i] = dinv[i].clone();
        }
        for gap in 1..n {
            for j in 0..n - gap {
                let i = j + gap;
                let mut acc = Mat::zeros(self.field(), self.mult[i], self.d(i, j) * self.mult[j]);
                for k in j + 1..=i {
                    let c = self.comp(i, k, j);
                    acc = acc.add(&compose_blocks(&c, &x.blocks[i][k], &g.blocks[k][j], self.d(i, k), self.d(k, j)));
                }
                let right = kron(&Mat::identity(self.field(), self.d(i, j)), &dinv[j]);
                x.blocks[i][j] = acc.mul(&right).neg();
            }
        }
        x
    }

    /// `g = u·r` with `u` unipotent and `r` diagonal.
    pub fn decompose(&self, g: &TriElem) -> (TriElem, TriElem) {
        let n = self.len();
        let mut u = self.identity();
        let mut r = self.identity();
        for i in 0..n {
            r.blocks[i][i] = g.blocks[i][i].clone();
            for j in 0..i {
                let dinv = g.blocks[j][j].inverse().expect("diagonal block invertible");
                u.blocks[i][j] = g.blocks[i][j].mul(&kron(&Mat::identity(self.field(), self.d(i, j)), &dinv));
            }
        }
        (u, r)
    }

    pub fn random<R: Rng>(&self, sub: Subgroup, rng: &mut R) -> TriElem {
        let f = self.field();
        let mut g = self.identity();
        for i in 0..self.len() {
            if sub != Subgroup::Unipotent {
                g.blocks[i][i] = loop {
                    let m = Mat::random(f, self.mult[i], self.mult[i], rng);
                    if m.is_invertible() {
                        break m;
                    }
                };
            }
            if sub != Subgroup::Reductive {
                for j in 0..i {
                    let (a, b) = self.block_shape(i, j);
                    g.blocks[i][j] = Mat::random(f, a, b, rng);
                }
            }
        }
        g
    }

    /// Number of coordinates in all off-diagonal slots.
    pub fn unipotent_dim(&self) -> usize {
        (0..self.len()).map(|i| (0..i).map(|j| self.mult[i] * self.d(i, j) * self.mult[j]).sum::<usize>()).sum()
    }

    /// Order over a finite field, if it fits in `u128`.
    pub fn order(&self, sub: Subgroup) -> Option<u128> {
        let p = self.field().order()? as u128;
        let mut total: u128 = 1;
        if sub != Subgroup::Unipotent {
            for &m in &self.mult {
                total = total.checked_mul(gl_order(p, m)?)?;
            }
        }
        if sub != Subgroup::Reductive {
            total = total.checked_mul(p.checked_pow(self.unipotent_dim() as u32)?)?;
        }
        Some(total)
    }

    /// Generators: transvections and a primitive-root scaling per diagonal
    /// block, and one unit entry per off-diagonal coordinate.
    pub fn generators(&self, sub: Subgroup) -> Vec<TriElem> {
        let f = self.field();
        let mut gens = Vec::new();
        if sub != Subgroup::Unipotent {
            let root = f.primitive_root();
            for i in 0..self.len() {
                let m = self.mult[i];
                for a in 0..m {
                    for b in 0..m {
                        if a != b {
                            let mut g = self.identity();
                            g.blocks[i][i].set(a, b, &f.one());
                            gens.push(g);
                        }
                    }
                }
                if let Some(w) = &root {
                    if m > 0 && !w.add(&f.one().neg()).is_zero() {
                        let mut g = self.identity();
                        g.blocks[i][i].set(0, 0, w);
                        gens.push(g);
                    }
                }
            }
        }
        if sub != Subgroup::Reductive {
            for i in 0..self.len() {
                for j in 0..i {
                    let (a, b) = self.block_shape(i, j);
                    for r in 0..a {
                        for c in 0..b {
                            let mut g = self.identity();
                            g.blocks[i][j].set(r, c, &f.one());
                            gens.push(g);
                        }
                    }
                }
            }
        }
        gens
    }

    /// Exhaustive listing in a fixed order: diagonal factors first (each
    /// `GL_m` in lexicographic order of entries), then off-diagonal
    /// coordinates as base-p counters; the last coordinate varies fastest.
    pub fn enumerate(&self, sub: Subgroup, budget: u64) -> Result<TriEnum<'a>> {
        let p = self.field().order().ok_or_else(|| Error::Field("enumeration needs a finite field".into()))?;
        let count = match self.order(sub) {
            Some(c) if c <= budget as u128 => c as u64,
            Some(c) => return Err(Error::Budget(format!("group of order {c} exceeds budget {budget}"))),
            None => return Err(Error::Budget(format!("group order overflows; budget {budget}"))),
        };
        let gl_lists = if sub == Subgroup::Unipotent {
            vec![]
        } else {
            self.mult.iter().map(|&m| gl_list(self.field(), m)).collect()
        };
        Ok(TriEnum { tri: self.clone(), sub, p, count, gl_lists })
    }
}

fn gl_order(p: u128, m: usize) -> Option<u128> {
    let pm = p.checked_pow(m as u32)?;
    let mut t: u128 = 1;
    for k in 0..m {
        t = t.checked_mul(pm - p.pow(k as u32))?;
    }
    Some(t)
}

/// `GL_m(F_p)` in lexicographic order of row-major entries.
pub fn gl_list(f: Field, m: usize) -> Vec<Mat> {
    let p = f.order().expect("finite field") as u64;
    let total = p.pow((m * m) as u32);
    (0..total).map(|idx| Mat::from_residues(f, m, m, digits(idx, p, m * m))).filter(Mat::is_invertible).collect()
}

fn digits(mut idx: u64, p: u64, n: usize) -> Vec<u32> {
    let mut d = vec![0u32; n];
    for x in d.iter_mut().rev() {
        *x = (idx % p) as u32;
        idx /= p;
    }
    d
}

/// Random-access enumeration of a triangular group.
#[derive(Clone, Debug)]
pub struct TriEnum<'a> {
    tri: Tri<'a>,
    sub: Subgroup,
    p: u32,
    count: u64,
    gl_lists: Vec<Vec<Mat>>,
}

impl<'a> TriEnum<'a> {
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn get(&self, mut idx: u64) -> TriElem {
        let f = self.tri.field();
        let p = self.p as u64;
        let mut g = self.tri.identity();
        let udim = if self.sub == Subgroup::Reductive { 0 } else { self.tri.unipotent_dim() };
        let unip = p.pow(udim as u32);
        let mut low = digits(idx % unip, p, udim).into_iter();
        idx /= unip;
        if self.sub != Subgroup::Unipotent {
            for i in (0..self.tri.len()).rev() {
                let list = &self.gl_lists[i];
                g.blocks[i][i] = list[(idx % list.len() as u64) as usize].clone();
                idx /= list.len() as u64;
            }
        }
        if self.sub != Subgroup::Reductive {
            for i in 0..self.tri.len() {
                for j in 0..i {
                    let (a, b) = self.tri.block_shape(i, j);
                    let v: Vec<u32> = low.by_ref().take(a * b).collect();
                    g.blocks[i][j] = Mat::from_residues(f, a, b, v);
                }
            }
        }
        g
    }

    pub fn iter(&self) -> impl Iterator<Item = TriElem> + '_ {
        (0..self.count).map(move |k| self.get(k))
    }
}

/// Composition of two off-diagonal slots `u_kj ∗ u_ji` through `A_kj ⊗ A_ji → A_ki`.
pub fn star(spec: &RsSpec, k: usize, j: usize, i: usize, u_kj: &Mat, u_ji: &Mat) -> Result<Mat> {
    if !(i < j && j < k) {
        return Err(Error::Precondition("star needs i < j < k".into()));
    }
    let (da, db) = (spec.dim_a(k, j), spec.dim_a(j, i));
    if !u_kj.cols().is_multiple_of(da.max(1)) || u_kj.cols() / da.max(1) != u_ji.rows() || !u_ji.cols().is_multiple_of(db.max(1)) {
        return Err(shape("star: block shapes do not chain"));
    }
    Ok(compose_blocks(&spec.comp_aa(k, j, i), u_kj, u_ji, da, db))
}

// ---------------------------------------------------------------------------
// The action on W

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GElem {
    pub left: TriElem,
    pub right: TriElem,
}

/// `G = G_L × G_R` acting by `(g, h)·w = h·w·g⁻¹`.
#[derive(Clone, Debug)]
pub struct Groups<'a> {
    pub spec: &'a RsSpec,
    pub dims: DimVector,
    pub gl: Tri<'a>,
    pub gr: Tri<'a>,
}

impl<'a> Groups<'a> {
    pub fn new(spec: &'a RsSpec, dims: &DimVector) -> Groups<'a> {
        Groups { spec, dims: dims.clone(), gl: Tri::new(spec, Side::L, dims), gr: Tri::new(spec, Side::R, dims) }
    }

    pub fn identity(&self) -> GElem {
        GElem { left: self.gl.identity(), right: self.gr.identity() }
    }

    pub fn mul(&self, a: &GElem, b: &GElem) -> GElem {
        GElem { left: self.gl.mul(&a.left, &b.left), right: self.gr.mul(&a.right, &b.right) }
    }

    pub fn inv(&self, a: &GElem) -> GElem {
        GElem { left: self.gl.inv(&a.left), right: self.gr.inv(&a.right) }
    }

    pub fn check(&self, g: &GElem) -> Result<()> {
        self.gl.check(&g.left)?;
        self.gr.check(&g.right)
    }

    pub fn random<R: Rng>(&self, sub: Subgroup, rng: &mut R) -> GElem {
        GElem { left: self.gl.random(sub, rng), right: self.gr.random(sub, rng) }
    }

    /// `w·g` for `g ∈ G_L`.
    pub fn right_act(&self, w: &PointW, g: &TriElem) -> PointW {
        let spec = self.spec;
        let blocks = (0..spec.s)
            .map(|l| {
                (0..spec.r)
                    .map(|i| {
                        let mut acc = Mat::zeros(spec.field, self.dims.n[l], spec.dim_h(l, i) * self.dims.m[i]);
                        for j in i..spec.r {
                            let c = spec.comp_ha(l, j, i);
                            acc = acc.add(&compose_blocks(&c, &w.blocks[l][j], &g.blocks[j][i], spec.dim_h(l, j), spec.dim_a(j, i)));
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        PointW { blocks }
    }

    /// `h·w` for `h ∈ G_R`.
    pub fn left_act(&self, h: &TriElem, w: &PointW) -> PointW {
        let spec = self.spec;
        let blocks = (0..spec.s)
            .map(|m| {
                (0..spec.r)
                    .map(|i| {
                        let mut acc = Mat::zeros(spec.field, self.dims.n[m], spec.dim_h(m, i) * self.dims.m[i]);
                        for l in 0..=m {
                            let c = spec.comp_bh(m, l, i);
                            acc = acc.add(&compose_blocks(&c, &h.blocks[m][l], &w.blocks[l][i], spec.dim_b(m, l), spec.dim_h(l, i)));
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        PointW { blocks }
    }

    pub fn act(&self, g: &GElem, w: &PointW) -> PointW {
        let ginv = self.gl.inv(&g.left);
        self.right_act(&self.left_act(&g.right, w), &ginv)
    }

    /// Generators of `sub ⊂ G`, one side at a time.
    pub fn generators(&self, sub: Subgroup) -> Vec<GElem> {
        let mut out: Vec<GElem> =
            self.gl.generators(sub).into_iter().map(|g| GElem { left: g, right: self.gr.identity() }).collect();
        out.extend(self.gr.generators(sub).into_iter().map(|h| GElem { left: self.gl.identity(), right: h }));
        out
    }

    pub fn order(&self, sub: Subgroup) -> Option<u128> {
        self.gl.order(sub)?.checked_mul(self.gr.order(sub)?)
    }

    /// All of `sub ⊂ G` as `(left index, right index)` pairs, left slow.
    pub fn enumerate(&self, sub: Subgroup, budget: u64) -> Result<GEnum<'a>> {
        if !self.spec.field.is_finite() {
            return Err(Error::Field("enumeration needs a finite field".into()));
        }
        match self.order(sub) {
            Some(c) if c <= budget as u128 => {}
            Some(c) => return Err(Error::Budget(format!("group of order {c} exceeds budget {budget}"))),
            None => return Err(Error::Budget(format!("group order overflows; budget {budget}"))),
        }
        Ok(GEnum { left: self.gl.enumerate(sub, budget)?, right: self.gr.enumerate(sub, budget)? })
    }
}

#[derive(Clone, Debug)]
pub struct GEnum<'a> {
    pub left: TriEnum<'a>,
    pub right: TriEnum<'a>,
}

impl<'a> GEnum<'a> {
    pub fn count(&self) -> u64 {
        self.left.count() * self.right.count()
    }

    pub fn get(&self, idx: u64) -> GElem {
        let rc = self.right.count();
        GElem { left: self.left.get(idx / rc), right: self.right.get(idx % rc) }
    }

    pub fn iter(&self) -> impl Iterator<Item = GElem> + '_ {
        (0..self.count()).map(move |k| self.get(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rs_spec::sym_spec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gl_counts() {
        let f = Field::Prime(2);
        assert_eq!(gl_list(f, 1).len(), 1);
        assert_eq!(gl_list(f, 2).len(), 6);
        assert_eq!(gl_list(Field::Prime(3), 2).len(), 48);
    }

    #[test]
    fn order_formula() {
        // Over a point every Hom space is one-dimensional.
        let spec = sym_spec(Field::Prime(2), 0, &[0, 1], &[2]).unwrap();
        assert_eq!(spec.dim_a(1, 0), 1);
        let t = Tri::new(&spec, Side::L, &DimVector::new(vec![1, 1], vec![1]));
        assert_eq!(t.enumerate(Subgroup::Full, DEFAULT_BUDGET).unwrap().count(), 2);
        let t = Tri::new(&spec, Side::L, &DimVector::new(vec![2, 1], vec![1]));
        assert_eq!(t.order(Subgroup::Full), Some(24));
        let e = t.enumerate(Subgroup::Full, DEFAULT_BUDGET).unwrap();
        let all: std::collections::HashSet<TriElem> = e.iter().collect();
        assert_eq!(all.len(), 24);
    }

    #[test]
    fn inverse_and_decompose() {
        let spec = sym_spec(Field::Prime(3), 1, &[0, 1, 2], &[3, 4]).unwrap();
        let dims = DimVector::new(vec![1, 2, 1], vec![2, 1]);
        let g = Groups::new(&spec, &dims);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let x = g.random(Subgroup::Full, &mut rng);
            assert!(g.mul(&x, &g.inv(&x)).left.is_unipotent());
            assert_eq!(g.mul(&x, &g.inv(&x)), g.identity());
            assert_eq!(g.mul(&g.inv(&x), &x), g.identity());
            let (u, r) = g.gl.decompose(&x.left);
            assert!(u.is_unipotent() && r.is_diagonal());
            assert_eq!(g.gl.mul(&u, &r), x.left);
        }
    }

    #[test]
    fn two_block_product_has_no_star_terms() {
        let spec = sym_spec(Field::Prime(2), 1, &[0, 1], &[2]).unwrap();
        let t = Tri::new(&spec, Side::L, &DimVector::new(vec![1, 1], vec![1]));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = t.random(Subgroup::Full, &mut rng);
        let y = t.random(Subgroup::Full, &mut rng);
        let z = t.mul(&x, &y);
        let expect = x.blocks[1][0].mul(&kron(&Mat::identity(spec.field, 2), &y.blocks[0][0])).add(&x.blocks[1][1].mul(&y.blocks[1][0]));
        assert_eq!(z.blocks[1][0], expect);
    }

    #[test]
    fn action_is_compatible() {
        let spec = sym_spec(Field::Prime(2), 1, &[0, 1], &[2, 3]).unwrap();
        let dims = DimVector::new(vec![1, 2], vec![1, 1]);
        let g = Groups::new(&spec, &dims);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let w = PointW::random(&spec, &dims, &mut rng);
            let a = g.random(Subgroup::Full, &mut rng);
            let b = g.random(Subgroup::Full, &mut rng);
            assert_eq!(g.act(&a, &g.act(&b, &w)), g.act(&g.mul(&a, &b), &w));
            assert_eq!(g.act(&g.identity(), &w), w);
        }
    }
}
