//! Abstract morphism spaces `Θ`, their mutation `D(Θ)`, the point map
//! `z(w, u, α)`, and the concrete version for type-(r,s) data.
//!
//! Abstract conventions: `γ1 : X2⊗H_L → X1`, `γ2 : X4⊗H_L → X3`,
//! `γ3 : H_R⊗X1 → X3`, `γ4 : H_R⊗X2 → X4`, each a matrix whose columns are
//! indexed by the tensor product with the left factor slow. A point stores
//! `φ1` as an `x1 × m` matrix, `φ2` as `x2 × m`, and `x3`, `x4` as columns.

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::exactla::{kernel_basis, kron, quotient_lift, quotient_map, solve_particular, swap_map, Field, Mat, Subspace};
use crate::rs_spec::{induced_ha_dual, DimVector, PointW, RsSpec};
use crate::stability::Polarization;

fn vec_col(m: &Mat) -> Mat {
    m.reshape(m.rows() * m.cols(), 1)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Theta {
    pub field: Field,
    pub x1: usize,
    pub x2: usize,
    pub x3: usize,
    pub x4: usize,
    pub hl: usize,
    pub hr: usize,
    pub m: usize,
    pub gamma1: Mat,
    pub gamma2: Mat,
    pub gamma3: Mat,
    pub gamma4: Mat,
}

impl Theta {
    /// `γ̄1 : H_L → X2*⊗X1`, rows `(b, h)`.
    pub fn gamma1_bar(&self) -> Mat {
        let mut out = Mat::zeros(self.field, self.x2 * self.x1, self.hl);
        for h in 0..self.x1 {
            for b in 0..self.x2 {
                for a in 0..self.hl {
                    out.set(b * self.x1 + h, a, &self.gamma1.get(h, b * self.hl + a));
                }
            }
        }
        out
    }

    /// `γ̄1(h_L)` as an `x2 × x1` matrix.
    pub fn gamma1_of(&self, h_l: &Mat) -> Mat {
        self.gamma1_bar().mul(h_l).reshape(self.x2, self.x1)
    }

    fn check_shapes(&self) -> Result<()> {
        let want = [
            ("γ1", &self.gamma1, (self.x1, self.x2 * self.hl)),
            ("γ2", &self.gamma2, (self.x3, self.x4 * self.hl)),
            ("γ3", &self.gamma3, (self.x3, self.hr * self.x1)),
            ("γ4", &self.gamma4, (self.x4, self.hr * self.x2)),
        ];
        for (name, m, s) in want {
            if m.shape() != s {
                return Err(Error::Shape(format!("{name}: expected {s:?}, got {:?}", m.shape())));
            }
        }
        Ok(())
    }

    /// Both sides of the commuting square on `H_R⊗X2⊗H_L`.
    pub fn square_sides(&self) -> (Mat, Mat) {
        let f = self.field;
        let left = self.gamma3.mul(&kron(&Mat::identity(f, self.hr), &self.gamma1));
        let right = self.gamma2.mul(&kron(&self.gamma4, &Mat::identity(f, self.hl)));
        (left, right)
    }

    /// Shapes, the commuting square, `γ4` onto, `γ̄1` one-to-one and `dim M < dim X2`.
    pub fn validate(&self) -> Result<()> {
        self.check_shapes()?;
        let (a, b) = self.square_sides();
        if a != b {
            return Err(Error::Invalid("γ3∘(1⊗γ1) ≠ γ2∘(γ4⊗1)".into()));
        }
        if self.gamma4.rank() != self.x4 {
            return Err(Error::Invalid("γ4 is not surjective".into()));
        }
        if self.gamma1_bar().rank() != self.hl {
            return Err(Error::Invalid("γ̄1 is not injective".into()));
        }
        if self.m >= self.x2 {
            return Err(Error::Invalid(format!("dim M = {} must be below dim X2 = {}", self.m, self.x2)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ThetaPoint {
    pub phi1: Mat,
    pub phi2: Mat,
    pub x3: Mat,
    pub x4: Mat,
}

impl ThetaPoint {
    pub fn zero(th: &Theta) -> ThetaPoint {
        let f = th.field;
        ThetaPoint {
            phi1: Mat::zeros(f, th.x1, th.m),
            phi2: Mat::zeros(f, th.x2, th.m),
            x3: Mat::zeros(f, th.x3, 1),
            x4: Mat::zeros(f, th.x4, 1),
        }
    }

    pub fn check(&self, th: &Theta) -> Result<()> {
        let ok = self.phi1.shape() == (th.x1, th.m)
            && self.phi2.shape() == (th.x2, th.m)
            && self.x3.shape() == (th.x3, 1)
            && self.x4.shape() == (th.x4, 1);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("point does not match Θ".into()))
        }
    }

    /// Whether `φ̄2 : X2* → M` is onto.
    pub fn in_w0(&self) -> bool {
        self.phi2.rank() == self.phi2.cols()
    }

    /// Coordinates in `φ1, φ2, x3, x4` order, for exhaustive enumeration.
    pub fn flat(&self) -> Vec<u32> {
        [&self.phi1, &self.phi2, &self.x3, &self.x4].iter().flat_map(|m| m.residues().to_vec()).collect()
    }

    pub fn from_flat(th: &Theta, v: &[u32]) -> ThetaPoint {
        let f = th.field;
        let sizes = [th.x1 * th.m, th.x2 * th.m, th.x3, th.x4];
        let mut k = 0;
        let mut take = |n: usize| {
            let s = v[k..k + n].to_vec();
            k += n;
            s
        };
        ThetaPoint {
            phi1: Mat::from_residues(f, th.x1, th.m, take(sizes[0])),
            phi2: Mat::from_residues(f, th.x2, th.m, take(sizes[1])),
            x3: Mat::from_residues(f, th.x3, 1, take(sizes[2])),
            x4: Mat::from_residues(f, th.x4, 1, take(sizes[3])),
        }
    }

    /// `diag(-1, 1)·w·diag(1, -1)`: negates `φ1` and `x4`.
    pub fn sign_twist(&self) -> ThetaPoint {
        ThetaPoint { phi1: self.phi1.neg(), phi2: self.phi2.clone(), x3: self.x3.clone(), x4: self.x4.neg() }
    }
}

/// `(1 0; ψ 1)·w·(1 0; h_L 1)` with `h_L ∈ H_L` a column and `ψ ∈ M*⊗H_R` an `m × hr` matrix.
pub fn h_act(th: &Theta, w: &ThetaPoint, h_l: &Mat, psi: &Mat) -> ThetaPoint {
    let g = th.gamma1_of(h_l);
    let phi1 = w.phi1.add(&g.transpose().mul(&w.phi2));
    let x3 = w.x3.add(&th.gamma2.mul(&kron(&w.x4, h_l)));
    let x3 = x3.add(&th.gamma3.mul(&vec_col(&phi1.mul(psi).transpose())));
    let x4 = w.x4.add(&th.gamma4.mul(&vec_col(&w.phi2.mul(psi).transpose())));
    ThetaPoint { phi1, phi2: w.phi2.clone(), x3, x4 }
}

// ---------------------------------------------------------------------------
// D(Θ)

/// `D(Θ)` together with the data used to build it.
#[derive(Clone, Debug)]
pub struct Dual {
    pub theta: Theta,
    /// `X2*⊗X1 → coker γ̄1`.
    pub proj: Mat,
    /// A section of `proj`.
    pub lift: Mat,
    /// `ker γ4 ⊂ H_R⊗X2`; its RREF basis is the basis of the new `H_L`.
    pub ker_g4: Subspace,
}

pub fn dual_theta(th: &Theta) -> Result<Dual> {
    th.validate()?;
    let f = th.field;
    let image = Subspace::from_rows(&th.gamma1_bar().transpose());
    let amb = th.x2 * th.x1;
    let proj = quotient_map(amb, &image)?;
    let lift = quotient_lift(amb, &image);
    let x4n = proj.rows();
    let ker_g4 = kernel_basis(&th.gamma4);
    let hln = ker_g4.dim();
    let kb = ker_g4.basis();

    // γ1': X2*⊗ker γ4 → H_R, contraction against the X2 factor.
    let mut g1 = Mat::zeros(f, th.hr, th.x2 * hln);
    for b in 0..th.x2 {
        for a in 0..hln {
            for beta in 0..th.hr {
                g1.set(beta, b * hln + a, &kb.get(a, beta * th.x2 + b));
            }
        }
    }
    let g3 = th.gamma3.mul(&swap_map(f, th.x1, th.hr));
    let g4 = proj.mul(&swap_map(f, th.x1, th.x2));

    // γ2': coker ⊗ ker γ4 → X3 via k ⊗ t ↦ γ3(k·t) on a lifted representative.
    let contract = |k: &Mat, t: &Mat| -> Mat { th.gamma3.mul(&vec_col(&k.mul(t))) };
    let kmats: Vec<Mat> = (0..hln).map(|a| kb.row(a).reshape(th.hr, th.x2)).collect();
    let mut g2 = Mat::zeros(f, th.x3, x4n * hln);
    for q in 0..x4n {
        let t = lift.col(q).reshape(th.x2, th.x1);
        for (a, k) in kmats.iter().enumerate() {
            g2.set_block(0, q * hln + a, &contract(k, &t));
        }
    }
    let gbar = th.gamma1_bar();
    for hcol in 0..th.hl {
        let t = gbar.col(hcol).reshape(th.x2, th.x1);
        for k in &kmats {
            if !contract(k, &t).is_zero() {
                return Err(Error::Descent("γ2' is not well defined on coker γ̄1".into()));
            }
        }
    }
    let theta = Theta {
        field: f,
        x1: th.hr,
        x2: th.x2,
        x3: th.x3,
        x4: x4n,
        hl: hln,
        hr: th.x1,
        m: th.x2 - th.m,
        gamma1: g1,
        gamma2: g2,
        gamma3: g3,
        gamma4: g4,
    };
    theta.check_shapes()?;
    Ok(Dual { theta, proj, lift, ker_g4 })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mutated {
    pub point: ThetaPoint,
    /// `u ∈ H_R⊗X2` as an `hr × x2` matrix.
    pub u: Mat,
    /// `α ∈ X2*⊗X1` as an `x2 × x1` matrix.
    pub alpha: Mat,
}

/// `z(w, u, α)`. Missing choices are filled with the particular solutions
/// that set free variables to zero.
pub fn mutate_point(th: &Theta, d: &Dual, w: &ThetaPoint, u: Option<&Mat>, alpha: Option<&Mat>) -> Result<Mutated> {
    w.check(th)?;
    if !w.in_w0() {
        return Err(Error::Precondition("point is not in W⁰ (φ̄2 not onto)".into()));
    }
    let u = match u {
        Some(u) => {
            if th.gamma4.mul(&vec_col(u)) != w.x4.neg() {
                return Err(Error::Precondition("supplied u does not satisfy γ4(u) = -x4".into()));
            }
            u.clone()
        }
        None => solve_particular(&th.gamma4, &w.x4.neg())?.reshape(th.hr, th.x2),
    };
    let alpha = match alpha {
        Some(a) => {
            if w.phi2.transpose().mul(a) != w.phi1.transpose() {
                return Err(Error::Precondition("supplied α does not satisfy q(φ2)(α) = φ1".into()));
            }
            a.clone()
        }
        None => solve_particular(&w.phi2.transpose(), &w.phi1.transpose())?,
    };
    let k = kernel_basis(&w.phi2.transpose());
    let kb = k.basis();
    let phi2 = kb.transpose();
    let phi1 = u.mul(&phi2);
    let x4 = d.proj.mul(&vec_col(&alpha));
    let x3 = w.x3.add(&th.gamma3.mul(&vec_col(&u.mul(&alpha))));
    Ok(Mutated { point: ThetaPoint { phi1, phi2, x3, x4 }, u, alpha })
}

/// Identifications of `D(D(Θ))` with `Θ`.
#[derive(Clone, Debug)]
pub struct DoubleDual {
    pub dd: Theta,
    /// `X4'' → X4`, induced by `γ4`.
    pub iota4: Mat,
    /// `H_L → H_L''`, induced by `γ̄1`.
    pub iota_l: Mat,
}

pub fn double_dual(th: &Theta) -> Result<(Dual, Dual, DoubleDual)> {
    let d1 = dual_theta(th)?;
    let d2 = dual_theta(&d1.theta)?;
    let f = th.field;
    let iota4 = th.gamma4.mul(&swap_map(f, th.x2, th.hr)).mul(&d2.lift);
    let emb = swap_map(f, th.x2, th.x1).mul(&th.gamma1_bar());
    let k = &d2.ker_g4;
    for a in 0..th.hl {
        if !k.contains_vec(&emb.col(a)) {
            return Err(Error::Descent("γ̄1(H_L) is not inside ker γ4'".into()));
        }
    }
    let iota_l = k.coords(&emb);
    Ok((d1, d2.clone(), DoubleDual { dd: d2.theta, iota4, iota_l }))
}

impl DoubleDual {
    /// Whether `D(D(Θ))` agrees with `Θ` after the identifications.
    pub fn matches(&self, th: &Theta) -> bool {
        let dd = &self.dd;
        let f = th.field;
        if (dd.x1, dd.x2, dd.x3, dd.x4, dd.hl, dd.hr, dd.m) != (th.x1, th.x2, th.x3, th.x4, th.hl, th.hr, th.m) {
            return false;
        }
        let Some(i4inv) = self.iota4.inverse() else { return false };
        if !self.iota_l.is_invertible() {
            return false;
        }
        dd.gamma3 == th.gamma3
            && self.iota4.mul(&dd.gamma4) == th.gamma4
            && dd.gamma1.mul(&kron(&Mat::identity(f, th.x2), &self.iota_l)) == th.gamma1
            && dd.gamma2.mul(&kron(&i4inv, &self.iota_l)) == th.gamma2
    }

    /// Carries a point of `W''` back to `W`, identifying `M''` with `M` through
    /// the unique `D` with `φ̄2 = D·φ̄2''`.
    pub fn pull_back(&self, reference_phi2: &Mat, zz: &ThetaPoint) -> Result<ThetaPoint> {
        let dmat = solve_particular(&zz.phi2, reference_phi2)?;
        let dt = dmat.clone();
        Ok(ThetaPoint {
            phi1: zz.phi1.mul(&dt),
            phi2: zz.phi2.mul(&dt),
            x3: zz.x3.clone(),
            x4: self.iota4.mul(&zz.x4),
        })
    }
}

/// `z(z(w))` with the second choices `u' = -α` and `α' = u`, carried back to `W`.
pub fn round_trip(th: &Theta, w: &ThetaPoint) -> Result<ThetaPoint> {
    let (d1, d2, dd) = double_dual(th)?;
    let z = mutate_point(th, &d1, w, None, None)?;
    let u2 = z.alpha.neg().transpose();
    let a2 = z.u.transpose();
    let zz = mutate_point(&d1.theta, &d2, &z.point, Some(&u2), Some(&a2))?;
    dd.pull_back(&w.phi2, &zz.point)
}

// ---------------------------------------------------------------------------
// Θ_p from type-(r,s) data

/// Offsets of the direct-sum blocks making up the spaces of `Θ_p`.
#[derive(Clone, Debug)]
pub struct RsLayout {
    pub p: usize,
    /// `X1`: `(i < p)` blocks `H_0i⊗M_i*`, entries `(h, x)`.
    pub x1: Vec<usize>,
    /// `X2`: `(j ≥ p)` blocks, indexed by `j - p`.
    pub x2: Vec<usize>,
    /// `X3`: `(l ≥ 1, i < p)` blocks `H_li⊗M_i*⊗N_l`, entries `(c, x, y)`.
    pub x3: Vec<Vec<usize>>,
    /// `X4`: `(l ≥ 1, j ≥ p)` blocks.
    pub x4: Vec<Vec<usize>>,
    /// `H_L`: `(i < p, j ≥ p)` blocks `A_ji⊗M_i*⊗M_j`, entries `(a, x, y)`.
    pub hl: Vec<Vec<usize>>,
    /// `H_R`: `(l ≥ 1)` blocks `B_l0⊗N_l`, entries `(b, y)`.
    pub hr: Vec<usize>,
    pub dims: [usize; 7],
}

fn offsets(sizes: impl Iterator<Item = usize>) -> (Vec<usize>, usize) {
    let mut out = Vec::new();
    let mut t = 0;
    for s in sizes {
        out.push(t);
        t += s;
    }
    (out, t)
}

pub fn rs_layout(spec: &RsSpec, dims: &DimVector, p: usize) -> Result<RsLayout> {
    spec.check_shapes()?;
    dims.check(spec)?;
    let (r, s) = (spec.r, spec.s);
    if p >= r {
        return Err(Error::Precondition(format!("mutation index p = {p} needs p < r = {r}")));
    }
    let (m, n) = (&dims.m, &dims.n);
    let (x1, t1) = offsets((0..p).map(|i| spec.dim_h(0, i) * m[i]));
    let (x2, t2) = offsets((p..r).map(|j| spec.dim_h(0, j) * m[j]));
    if n[0] >= t2 {
        return Err(Error::Precondition(format!("need n_1 = {} < Σ_(j>p) dim H_1j·m_j = {t2}", n[0])));
    }
    let mut t3 = 0;
    let mut x3 = vec![vec![]; s];
    let mut t4 = 0;
    let mut x4 = vec![vec![]; s];
    for l in 1..s {
        for i in 0..p {
            x3[l].push(t3);
            t3 += spec.dim_h(l, i) * m[i] * n[l];
        }
        for j in p..r {
            x4[l].push(t4);
            t4 += spec.dim_h(l, j) * m[j] * n[l];
        }
    }
    let mut tl = 0;
    let mut hl = vec![vec![]; p];
    for (i, row) in hl.iter_mut().enumerate() {
        for j in p..r {
            row.push(tl);
            tl += spec.dim_a(j, i) * m[i] * m[j];
        }
    }
    let mut hr = vec![0; s];
    let mut tr = 0;
    for l in 1..s {
        hr[l] = tr;
        tr += spec.dim_b(l, 0) * n[l];
    }
    Ok(RsLayout { p, x1, x2, x3, x4, hl, hr, dims: [t1, t2, t3, t4, tl, tr, n[0]] })
}

/// The abstract space attached to splitting sources at `p` and singling out the first target.
pub fn theta_from_rs(spec: &RsSpec, dims: &DimVector, p: usize) -> Result<(Theta, RsLayout)> {
    let lay = rs_layout(spec, dims, p)?;
    let f = spec.field;
    let (r, s) = (spec.r, spec.s);
    let (m, n) = (&dims.m, &dims.n);
    let [t1, t2, t3, t4, tl, tr, tm] = lay.dims;
    let mut g1 = Mat::zeros(f, t1, t2 * tl);
    let mut g2 = Mat::zeros(f, t3, t4 * tl);
    let mut g3 = Mat::zeros(f, t3, tr * t1);
    let mut g4 = Mat::zeros(f, t4, tr * t2);
    for i in 0..p {
        for j in p..r {
            let (a_dim, hl0) = (spec.dim_a(j, i), lay.hl[i][j - p]);
            let hl_idx = |a: usize, x: usize, y: usize| hl0 + (a * m[i] + x) * m[j] + y;
            let c = spec.comp_ha(0, j, i);
            for ci in 0..spec.dim_h(0, i) {
                for h in 0..spec.dim_h(0, j) {
                    for a in 0..a_dim {
                        let v = c.get(ci, h * a_dim + a);
                        if v.is_zero() {
                            continue;
                        }
                        for x in 0..m[i] {
                            for y in 0..m[j] {
                                let row = lay.x1[i] + ci * m[i] + x;
                                let col = (lay.x2[j - p] + h * m[j] + y) * tl + hl_idx(a, x, y);
                                g1.set(row, col, &v);
                            }
                        }
                    }
                }
            }
            for l in 1..s {
                let c = spec.comp_ha(l, j, i);
                for ci in 0..spec.dim_h(l, i) {
                    for cj in 0..spec.dim_h(l, j) {
                        for a in 0..a_dim {
                            let v = c.get(ci, cj * a_dim + a);
                            if v.is_zero() {
                                continue;
                            }
                            for x in 0..m[i] {
                                for y in 0..m[j] {
                                    for z in 0..n[l] {
                                        let row = lay.x3[l][i] + (ci * m[i] + x) * n[l] + z;
                                        let x4i = lay.x4[l][j - p] + (cj * m[j] + y) * n[l] + z;
                                        g2.set(row, x4i * tl + hl_idx(a, x, y), &v);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    for l in 1..s {
        let bd = spec.dim_b(l, 0);
        for src in 0..r {
            let c = spec.comp_bh(l, 0, src);
            let h0 = spec.dim_h(0, src);
            for ci in 0..spec.dim_h(l, src) {
                for b in 0..bd {
                    for h in 0..h0 {
                        let v = c.get(ci, b * h0 + h);
                        if v.is_zero() {
                            continue;
                        }
                        for x in 0..m[src] {
                            for y in 0..n[l] {
                                let hr_i = lay.hr[l] + b * n[l] + y;
                                if src < p {
                                    let row = lay.x3[l][src] + (ci * m[src] + x) * n[l] + y;
                                    g3.set(row, hr_i * t1 + lay.x1[src] + h * m[src] + x, &v);
                                } else {
                                    let row = lay.x4[l][src - p] + (ci * m[src] + x) * n[l] + y;
                                    g4.set(row, hr_i * t2 + lay.x2[src - p] + h * m[src] + x, &v);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let th = Theta { field: f, x1: t1, x2: t2, x3: t3, x4: t4, hl: tl, hr: tr, m: tm, gamma1: g1, gamma2: g2, gamma3: g3, gamma4: g4 };
    th.validate()?;
    Ok((th, lay))
}

/// Regroups the blocks of `w` into `(φ1, φ2, x3, x4)`.
pub fn point_to_theta(spec: &RsSpec, dims: &DimVector, lay: &RsLayout, w: &PointW) -> Result<ThetaPoint> {
    w.check(spec, dims)?;
    let f = spec.field;
    let [t1, t2, t3, t4, _, _, tm] = lay.dims;
    let p = lay.p;
    let (m, n) = (&dims.m, &dims.n);
    let mut phi1 = Mat::zeros(f, t1, tm);
    let mut phi2 = Mat::zeros(f, t2, tm);
    let mut x3 = Mat::zeros(f, t3, 1);
    let mut x4 = Mat::zeros(f, t4, 1);
    for src in 0..spec.r {
        for h in 0..spec.dim_h(0, src) {
            for x in 0..m[src] {
                for mu in 0..tm {
                    let v = w.blocks[0][src].get(mu, h * m[src] + x);
                    if src < p {
                        phi1.set(lay.x1[src] + h * m[src] + x, mu, &v);
                    } else {
                        phi2.set(lay.x2[src - p] + h * m[src] + x, mu, &v);
                    }
                }
            }
        }
        for l in 1..spec.s {
            for c in 0..spec.dim_h(l, src) {
                for x in 0..m[src] {
                    for y in 0..n[l] {
                        let v = w.blocks[l][src].get(y, c * m[src] + x);
                        if src < p {
                            x3.set(lay.x3[l][src] + (c * m[src] + x) * n[l] + y, 0, &v);
                        } else {
                            x4.set(lay.x4[l][src - p] + (c * m[src] + x) * n[l] + y, 0, &v);
                        }
                    }
                }
            }
        }
    }
    Ok(ThetaPoint { phi1, phi2, x3, x4 })
}

/// Inverse of [`point_to_theta`].
pub fn theta_to_point(spec: &RsSpec, dims: &DimVector, lay: &RsLayout, t: &ThetaPoint) -> PointW {
    let p = lay.p;
    let (m, n) = (&dims.m, &dims.n);
    let mut w = PointW::zero(spec, dims);
    for src in 0..spec.r {
        for h in 0..spec.dim_h(0, src) {
            for x in 0..m[src] {
                for mu in 0..n[0] {
                    let v = if src < p { t.phi1.get(lay.x1[src] + h * m[src] + x, mu) } else { t.phi2.get(lay.x2[src - p] + h * m[src] + x, mu) };
                    w.blocks[0][src].set(mu, h * m[src] + x, &v);
                }
            }
        }
        for l in 1..spec.s {
            for c in 0..spec.dim_h(l, src) {
                for x in 0..m[src] {
                    for y in 0..n[l] {
                        let v = if src < p {
                            t.x3.get(lay.x3[l][src] + (c * m[src] + x) * n[l] + y, 0)
                        } else {
                            t.x4.get(lay.x4[l][src - p] + (c * m[src] + x) * n[l] + y, 0)
                        };
                        w.blocks[l][src].set(y, c * m[src] + x, &v);
                    }
                }
            }
        }
    }
    w
}

/// `Σ_(j ≥ p) φ_0j` as an `n_0 × Σ dim H_0j·m_j` matrix.
fn phi_bar2(spec: &RsSpec, w: &PointW, p: usize) -> Mat {
    let parts: Vec<&Mat> = (p..spec.r).map(|j| &w.blocks[0][j]).collect();
    Mat::hstack(spec.field, w.blocks[0][0].rows(), &parts)
}

/// Whether the blocks from sources `j ≥ p` map onto the first target.
pub fn in_w0_rs(spec: &RsSpec, w: &PointW, p: usize) -> bool {
    let m = phi_bar2(spec, w, p);
    m.rank() == m.rows()
}

// ---------------------------------------------------------------------------
// The mutated type-(p+1, r+s-p-1) data

/// A space given as a quotient or a subspace of an ambient coordinate space.
#[derive(Clone, Debug)]
struct Space {
    dim: usize,
    /// Coordinates → ambient.
    emb: Mat,
    /// Ambient → coordinates (only meaningful on the image of `emb` for subspaces).
    proj: Mat,
    /// For quotients: basis (as columns) of the subspace divided out.
    divided: Option<Mat>,
    /// For subspaces: the map whose kernel the space is.
    constraint: Option<Mat>,
}

impl Space {
    fn plain(f: Field, n: usize) -> Space {
        Space { dim: n, emb: Mat::identity(f, n), proj: Mat::identity(f, n), divided: None, constraint: None }
    }

    fn quotient(amb: usize, sub_cols: Mat) -> Result<Space> {
        let sub = Subspace::from_rows(&sub_cols.transpose());
        let proj = quotient_map(amb, &sub)?;
        Ok(Space { dim: proj.rows(), emb: quotient_lift(amb, &sub), proj, divided: Some(sub_cols), constraint: None })
    }

    fn kernel(map: Mat) -> Space {
        let k = kernel_basis(&map);
        let f = map.field();
        let sel = Mat::identity(f, map.cols()).select_rows(k.pivots());
        Space { dim: k.dim(), emb: k.inclusion(), proj: sel, divided: None, constraint: Some(map) }
    }

    fn amb(&self) -> usize {
        self.emb.rows()
    }

    /// Ambient values that represent zero in this space.
    fn reduce(&self, x: &Mat) -> Mat {
        if self.divided.is_some() {
            self.proj.mul(x)
        } else {
            x.clone()
        }
    }
}

/// Map `in1 ⊗ in2 → out` induced by the ambient bilinear map `t`, after
/// checking that it descends to quotients and lands in subspaces.
fn induced(t: &Mat, out: &Space, in1: &Space, in2: &Space, what: &str) -> Result<Mat> {
    if t.shape() != (out.amb(), in1.amb() * in2.amb()) {
        return Err(Error::Shape(format!("{what}: ambient map has shape {:?}", t.shape())));
    }
    let img = t.mul(&kron(&in1.emb, &in2.emb));
    if let Some(c) = &out.constraint {
        if !c.mul(&img).is_zero() {
            return Err(Error::Descent(format!("{what}: image leaves the kernel")));
        }
    }
    if let Some(d) = &in1.divided {
        if !out.reduce(&t.mul(&kron(d, &in2.emb))).is_zero() {
            return Err(Error::Descent(format!("{what}: not constant on classes of the first factor")));
        }
    }
    if let Some(d) = &in2.divided {
        if !out.reduce(&t.mul(&kron(&in1.emb, d))).is_zero() {
            return Err(Error::Descent(format!("{what}: not constant on classes of the second factor")));
        }
    }
    Ok(out.proj.mul(&img))
}

/// Result of mutating the type-(r,s) data at `p`.
#[derive(Clone, Debug)]
pub struct MutatedSpec {
    pub spec: RsSpec,
    pub dims: DimVector,
    pub p: usize,
    /// Number of targets that were sources `j ≥ p`; they come first.
    pub moved: usize,
    /// `(H_0i ⊗ H*_0J) → H'_(l',i)` for `l' < r - p`, `i < p`, indexed `[l'][i]`.
    pub quotient_maps: Vec<Vec<Mat>>,
}

/// `Σ_(j ≥ p) m_j·dim H_0j − n_0`, the multiplicity of the new source.
pub fn new_source_dim(spec: &RsSpec, dims: &DimVector, p: usize) -> i64 {
    (p..spec.r).map(|j| (dims.m[j] * spec.dim_h(0, j)) as i64).sum::<i64>() - dims.n[0] as i64
}

/// Builds the type-(p+1, r+s−p−1) data whose morphism spaces receive `z`.
///
/// Sources are the old sources `i < p` followed by the first old target
/// with multiplicity [`new_source_dim`]. Targets are the old sources
/// `j ≥ p` followed by the old targets `l ≥ 1`. Hom spaces between an old
/// source `i < p` and a moved source `J` are `(H_0i ⊗ H*_0J)/A_Ji`, and
/// compositions from a moved source to an old target `L` are
/// `ker(B_L0 ⊗ H_0J → H_LJ)`.
pub fn mutate_rs_spec(spec: &RsSpec, dims: &DimVector, p: usize) -> Result<MutatedSpec> {
    let _ = rs_layout(spec, dims, p)?;
    let f = spec.field;
    let (r, s) = (spec.r, spec.s);
    let rr = r - p;
    let (r2, s2) = (p + 1, r + s - p - 1);
    let jj = |l: usize| l + p;
    let ll = |l: usize| l - rr + 1;
    let new_m = new_source_dim(spec, dims, p) as usize;

    let plain = |n: usize| Space::plain(f, n);
    // H'_(l', i') as a space.
    let mut hsp: Vec<Vec<Space>> = Vec::with_capacity(s2);
    for l in 0..s2 {
        let mut row = Vec::with_capacity(r2);
        for i in 0..r2 {
            let sp = match (l < rr, i < p) {
                (true, true) => {
                    let (j, hi, hj, a) = (jj(l), spec.dim_h(0, i), spec.dim_h(0, jj(l)), spec.dim_a(jj(l), i));
                    let c = spec.comp_ha(0, j, i);
                    let sub = Mat::from_fn(f, hi * hj, a, |row, col| c.get(row / hj, (row % hj) * a + col));
                    Space::quotient(hi * hj, sub)?
                }
                (false, true) => plain(spec.dim_h(ll(l), i)),
                (true, false) => plain(spec.dim_h(0, jj(l))),
                (false, false) => plain(spec.dim_b(ll(l), 0)),
            };
            row.push(sp);
        }
        hsp.push(row);
    }
    // A'_(j', i') for j' > i'.
    let asp = |j: usize, i: usize| -> Space {
        if j < p {
            plain(spec.dim_a(j, i))
        } else {
            plain(spec.dim_h(0, i))
        }
    };
    // B'_(m', l') for m' > l'.
    let bsp = |m: usize, l: usize| -> Space {
        match (m < rr, l < rr) {
            (true, true) => plain(spec.dim_a(jj(m), jj(l))),
            (false, false) => plain(spec.dim_b(ll(m), ll(l))),
            _ => Space::kernel(spec.comp_bh(ll(m), 0, jj(l)).into_owned()),
        }
    };

    let dim_h = hsp.iter().map(|row| row.iter().map(|sp| sp.dim).collect()).collect();
    let mut out = RsSpec::skeleton(f, r2, s2, dim_h);
    for j in 0..r2 {
        for i in 0..j {
            out.dim_a.insert((j, i), asp(j, i).dim);
        }
    }
    for m in 0..s2 {
        for l in 0..m {
            out.dim_b.insert((m, l), bsp(m, l).dim);
        }
    }

    // compAA'
    for k in 0..r2 {
        for j in 0..k {
            for i in 0..j {
                let c = if k < p { spec.comp_aa(k, j, i).into_owned() } else { spec.comp_ha(0, j, i).into_owned() };
                out.comp_aa.insert((k, j, i), c);
            }
        }
    }

    // compHA'
    for l in 0..s2 {
        for j in 0..r2 {
            for i in 0..j {
                let (o, a, b) = (&hsp[l][i], &hsp[l][j], asp(j, i));
                let what = format!("HA'({},{},{})", l + 1, j + 1, i + 1);
                let m = match (l < rr, j < p) {
                    (true, true) => {
                        let hj = spec.dim_h(0, jj(l));
                        let (hi_j, hi_i, ad) = (spec.dim_h(0, j), spec.dim_h(0, i), spec.dim_a(j, i));
                        let c = spec.comp_ha(0, j, i);
                        let t = Mat::from_fn(f, hi_i * hj, hi_j * hj * ad, |row, col| {
                            let (xp, eta) = (row / hj, row % hj);
                            let (xe, av) = (col / ad, col % ad);
                            let (x, e2) = (xe / hj, xe % hj);
                            if e2 == eta { c.get(xp, x * ad + av) } else { f.zero() }
                        });
                        induced(&t, o, a, &b, &what)?
                    }
                    (false, true) => spec.comp_ha(ll(l), j, i).into_owned(),
                    (true, false) => {
                        let hj = spec.dim_h(0, jj(l));
                        let hi = spec.dim_h(0, i);
                        let t = Mat::from_fn(f, hi * hj, hj * hi, |row, col| {
                            let (x, eta) = (row / hj, row % hj);
                            if col == eta * hi + x { f.one() } else { f.zero() }
                        });
                        induced(&t, o, a, &b, &what)?
                    }
                    (false, false) => spec.comp_bh(ll(l), 0, i).into_owned(),
                };
                out.comp_ha.insert((l, j, i), m);
            }
        }
    }

    // compBH'
    for m in 0..s2 {
        for l in 0..m {
            for i in 0..r2 {
                let (o, b, h) = (&hsp[m][i], bsp(m, l), &hsp[l][i]);
                let what = format!("BH'({},{},{})", m + 1, l + 1, i + 1);
                let mat = match (m < rr, l < rr) {
                    (true, true) => {
                        // a ⊗ (x, η) ↦ Σ_h C_(0,M,L)[η, (h, a)] (x, h)
                        let (mj, lj) = (jj(m), jj(l));
                        let c = spec.comp_ha(0, mj, lj);
                        let (hm, hl, ad) = (spec.dim_h(0, mj), spec.dim_h(0, lj), spec.dim_a(mj, lj));
                        let xs = if i < p { spec.dim_h(0, i) } else { 1 };
                        let t = Mat::from_fn(f, xs * hm, ad * xs * hl, |row, col| {
                            let (xp, hh) = (row / hm, row % hm);
                            let (av, rest) = (col / (xs * hl), col % (xs * hl));
                            let (x, eta) = (rest / hl, rest % hl);
                            if x == xp { c.get(eta, hh * ad + av) } else { f.zero() }
                        });
                        induced(&t, o, &b, h, &what)?
                    }
                    (false, false) => {
                        if i < p {
                            spec.comp_bh(ll(m), ll(l), i).into_owned()
                        } else {
                            spec.comp_bb(ll(m), ll(l), 0).into_owned()
                        }
                    }
                    (false, true) => {
                        let (mm, j) = (ll(m), jj(l));
                        let (bd, hj) = (spec.dim_b(mm, 0), spec.dim_h(0, j));
                        let t = if i < p {
                            let c = spec.comp_bh(mm, 0, i);
                            let hi = spec.dim_h(0, i);
                            Mat::from_fn(f, spec.dim_h(mm, i), bd * hj * hi * hj, |row, col| {
                                let (k, xe) = (col / (hi * hj), col % (hi * hj));
                                let (beta, y) = (k / hj, k % hj);
                                let (x, eta) = (xe / hj, xe % hj);
                                if y == eta { c.get(row, beta * hi + x) } else { f.zero() }
                            })
                        } else {
                            Mat::from_fn(f, bd, bd * hj * hj, |row, col| {
                                let (k, eta) = (col / hj, col % hj);
                                let (beta, y) = (k / hj, k % hj);
                                if y == eta && beta == row { f.one() } else { f.zero() }
                            })
                        };
                        induced(&t, o, &b, h, &what)?
                    }
                    (true, false) => return Err(Error::Invalid("target order violated in mutated data".into())),
                };
                out.comp_bh.insert((m, l, i), mat);
            }
        }
    }

    // compBB'
    for n in 0..s2 {
        for m in 0..n {
            for l in 0..m {
                let (o, b1, b2) = (bsp(n, l), bsp(n, m), bsp(m, l));
                let what = format!("BB'({},{},{})", n + 1, m + 1, l + 1);
                let mat = match (n < rr, m < rr, l < rr) {
                    (true, _, _) => spec.comp_aa(jj(n), jj(m), jj(l)).into_owned(),
                    (false, false, false) => spec.comp_bb(ll(n), ll(m), ll(l)).into_owned(),
                    (false, true, true) => {
                        // (β, h) ⊗ a ↦ Σ_η C_(0,M,L)[η, (h, a)] (β, η)
                        let (mj, lj) = (jj(m), jj(l));
                        let c = spec.comp_ha(0, mj, lj);
                        let bd = spec.dim_b(ll(n), 0);
                        let (hm, hl, ad) = (spec.dim_h(0, mj), spec.dim_h(0, lj), spec.dim_a(mj, lj));
                        let t = Mat::from_fn(f, bd * hl, bd * hm * ad, |row, col| {
                            let (bp, eta) = (row / hl, row % hl);
                            let (k, av) = (col / ad, col % ad);
                            let (beta, h) = (k / hm, k % hm);
                            if beta == bp { c.get(eta, h * ad + av) } else { f.zero() }
                        });
                        induced(&t, &o, &b1, &b2, &what)?
                    }
                    (false, false, true) => {
                        // b ⊗ (β, y) ↦ Σ_β' C_(N,M,0)[β', (b, β)] (β', y)
                        let (nn, mm, j) = (ll(n), ll(m), jj(l));
                        let c = spec.comp_bb(nn, mm, 0);
                        let (bnm, bm0, bn0, hj) = (spec.dim_b(nn, mm), spec.dim_b(mm, 0), spec.dim_b(nn, 0), spec.dim_h(0, j));
                        let t = Mat::from_fn(f, bn0 * hj, bnm * bm0 * hj, |row, col| {
                            let (bp, yp) = (row / hj, row % hj);
                            let (bv, k) = (col / (bm0 * hj), col % (bm0 * hj));
                            let (beta, y) = (k / hj, k % hj);
                            if y == yp { c.get(bp, bv * bm0 + beta) } else { f.zero() }
                        });
                        induced(&t, &o, &b1, &b2, &what)?
                    }
                    (false, true, false) => return Err(Error::Invalid("target order violated in mutated data".into())),
                };
                out.comp_bb.insert((n, m, l), mat);
            }
        }
    }

    let mut m2: Vec<usize> = dims.m[..p].to_vec();
    m2.push(new_m);
    let n2: Vec<usize> = (0..s2).map(|l| if l < rr { dims.m[jj(l)] } else { dims.n[ll(l)] }).collect();
    let quotient_maps = (0..rr).map(|l| (0..p).map(|i| hsp[l][i].proj.clone()).collect()).collect();
    out.check_shapes()?;
    Ok(MutatedSpec { spec: out, dims: DimVector::new(m2, n2), p, moved: rr, quotient_maps })
}

/// `z(w)` for type-(r,s) data together with the choices used.
#[derive(Clone, Debug)]
pub struct RsMutated {
    pub point: PointW,
    /// For each old target `L ≥ 1` (index 0 is empty): rows `(β, y)` over
    /// `B_L0 ⊗ N_L`, columns matching the stacked sources `j ≥ p`.
    pub u: Vec<Mat>,
    /// Rows as the stacked sources `j ≥ p`, columns as the stacked sources `i < p`.
    pub alpha: Mat,
}

/// The point `z(w)` of the mutated data, with the particular choices of `u` and `α`.
pub fn mutate_rs_point(spec: &RsSpec, dims: &DimVector, ms: &MutatedSpec, w: &PointW) -> Result<PointW> {
    Ok(mutate_rs_point_with_choices(spec, dims, ms, w)?.point)
}

pub fn mutate_rs_point_with_choices(spec: &RsSpec, dims: &DimVector, ms: &MutatedSpec, w: &PointW) -> Result<RsMutated> {
    w.check(spec, dims)?;
    let p = ms.p;
    if !in_w0_rs(spec, w, p) {
        return Err(Error::Precondition(format!("point is not in W⁰ for p = {p}")));
    }
    let f = spec.field;
    let (r, s) = (spec.r, spec.s);
    let rr = r - p;
    let (m, n) = (&dims.m, &dims.n);
    let phi2 = phi_bar2(spec, w, p);
    let kb = kernel_basis(&phi2);
    let k = kb.basis();
    let mnew = k.rows();
    let off: Vec<usize> = {
        let mut v = vec![0; r];
        let mut t = 0;
        for j in p..r {
            v[j] = t;
            t += spec.dim_h(0, j) * m[j];
        }
        v
    };
    let total2 = phi2.cols();

    // u: for each old target L ≥ 1, U_L has rows (β, y) and columns matching φ̄2.
    let mut u_maps: Vec<Mat> = vec![Mat::zeros(f, 0, 0); s];
    for (l, ul) in u_maps.iter_mut().enumerate().skip(1) {
        let bd = spec.dim_b(l, 0);
        let mut mat = Mat::zeros(f, bd * n[l], total2);
        for j in p..r {
            let (h0, hl) = (spec.dim_h(0, j), spec.dim_h(l, j));
            let c = spec.comp_bh(l, 0, j);
            // V[(h, β, x), (c, x')] = C[c, (β, h)] δ_(x x')
            let v = Mat::from_fn(f, h0 * bd * m[j], hl * m[j], |row, col| {
                let (hb, x) = (row / m[j], row % m[j]);
                let (h, beta) = (hb / bd, hb % bd);
                let (cc, xp) = (col / m[j], col % m[j]);
                if x == xp { c.get(cc, beta * h0 + h) } else { f.zero() }
            });
            let t = solve_particular(&v.transpose(), &w.blocks[l][j].neg().transpose())?.transpose();
            for y in 0..n[l] {
                for h in 0..h0 {
                    for beta in 0..bd {
                        for x in 0..m[j] {
                            let val = t.get(y, (h * bd + beta) * m[j] + x);
                            mat.set(beta * n[l] + y, off[j] + h * m[j] + x, &val);
                        }
                    }
                }
            }
        }
        *ul = mat;
    }
    // α solves φ̄2·α = φ̄1.
    let phi1_parts: Vec<&Mat> = (0..p).map(|i| &w.blocks[0][i]).collect();
    let phi1 = Mat::hstack(f, n[0], &phi1_parts);
    let alpha = solve_particular(&phi2, &phi1)?;
    let off1: Vec<usize> = {
        let mut v = vec![0; p];
        let mut t = 0;
        for (i, o) in v.iter_mut().enumerate() {
            *o = t;
            t += spec.dim_h(0, i) * m[i];
        }
        v
    };

    let mut out = PointW::zero(&ms.spec, &ms.dims);
    for l2 in 0..ms.spec.s {
        if l2 < rr {
            let j = l2 + p;
            let hj = spec.dim_h(0, j);
            // Inclusion of the kernel.
            for y in 0..m[j] {
                for eta in 0..hj {
                    for kap in 0..mnew {
                        out.blocks[l2][p].set(y, eta * mnew + kap, &k.get(kap, off[j] + eta * m[j] + y));
                    }
                }
            }
            // Class of α in the quotient.
            for i in 0..p {
                let pm = &ms.quotient_maps[l2][i];
                let hi = spec.dim_h(0, i);
                let amb = Mat::from_fn(f, hi * hj, m[i] * m[j], |row, col| {
                    let (x, eta) = (row / hj, row % hj);
                    let (xi, y) = (col / m[j], col % m[j]);
                    alpha.get(off[j] + eta * m[j] + y, off1[i] + x * m[i] + xi)
                });
                let red = pm.mul(&amb);
                let q = pm.rows();
                for rho in 0..q {
                    for xi in 0..m[i] {
                        for y in 0..m[j] {
                            out.blocks[l2][i].set(y, rho * m[i] + xi, &red.get(rho, xi * m[j] + y));
                        }
                    }
                }
            }
        } else {
            let l = l2 - rr + 1;
            let bd = spec.dim_b(l, 0);
            let ul = &u_maps[l];
            // u restricted to the kernel.
            let uk = ul.mul(&k.transpose());
            for y in 0..n[l] {
                for beta in 0..bd {
                    for kap in 0..mnew {
                        out.blocks[l2][p].set(y, beta * mnew + kap, &uk.get(beta * n[l] + y, kap));
                    }
                }
            }
            // x3 + compBH applied to u∘α.
            let ua = ul.mul(&alpha);
            for i in 0..p {
                let c = spec.comp_bh(l, 0, i);
                let (hi, hli) = (spec.dim_h(0, i), spec.dim_h(l, i));
                let mut blk = w.blocks[l][i].clone();
                for y in 0..n[l] {
                    for cc in 0..hli {
                        for xi in 0..m[i] {
                            let mut acc = f.zero();
                            for beta in 0..bd {
                                for x in 0..hi {
                                    let cv = c.get(cc, beta * hi + x);
                                    if !cv.is_zero() {
                                        acc = acc.add(&cv.mul(&ua.get(beta * n[l] + y, off1[i] + x * m[i] + xi)));
                                    }
                                }
                            }
                            blk.add_at(y, cc * m[i] + xi, &acc);
                        }
                    }
                }
                out.blocks[l2][i] = blk;
            }
        }
    }
    Ok(RsMutated { point: out, u: u_maps, alpha })
}

/// Whether a point of the mutated data lies in the image open set: the new
/// source maps injectively into the moved targets.
pub fn in_w0_mutated(ms: &MutatedSpec, w: &PointW) -> bool {
    let p = ms.p;
    let mnew = ms.dims.m[p];
    let mut rows = Vec::new();
    for l in 0..ms.moved {
        let h = ms.spec.dim_h(l, p);
        let b = &w.blocks[l][p];
        for eta in 0..h {
            rows.push(b.block(0, b.rows(), eta * mnew, mnew));
        }
    }
    let refs: Vec<&Mat> = rows.iter().collect();
    Mat::vstack(ms.spec.field, mnew, &refs).rank() == mnew
}

// ---------------------------------------------------------------------------
// Polarizations and windows

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransportedPolarization {
    pub alpha: Vec<BigRational>,
    pub beta: Vec<BigRational>,
    pub c: BigRational,
}

impl TransportedPolarization {
    pub fn polarization(&self) -> Polarization {
        Polarization { lambda: self.alpha.clone(), mu: self.beta.clone() }
    }
}

fn q(v: usize) -> BigRational {
    BigRational::from_integer(v.into())
}

/// Unnormalized weights for the mutated data, in the order of its sources and targets.
pub fn transported_weights(pol: &Polarization, spec: &RsSpec, p: usize) -> (Vec<BigRational>, Vec<BigRational>) {
    let (r, s) = (spec.r, spec.s);
    let mut alpha: Vec<BigRational> = pol.lambda[..p].to_vec();
    alpha.push(pol.mu[0].clone());
    let mut beta = Vec::with_capacity(r + s - p - 1);
    for j in p..r {
        beta.push(&pol.mu[0] * q(spec.dim_h(0, j)) - &pol.lambda[j]);
    }
    beta.extend(pol.mu[1..].iter().cloned());
    (alpha, beta)
}

/// The polarization of the mutated data attached to `pol`; rejects
/// nonpositive entries.
pub fn transport_polarization(pol: &Polarization, spec: &RsSpec, dims: &DimVector, p: usize) -> Result<TransportedPolarization> {
    if p >= spec.r {
        return Err(Error::Precondition(format!("p = {p} needs p < r")));
    }
    let c = (0..p).fold(BigRational::zero(), |acc, i| acc + &pol.lambda[i] * q(dims.m[i]))
        + &pol.mu[0] * BigRational::from_integer(new_source_dim(spec, dims, p).into());
    if !c.is_positive() {
        return Err(Error::Precondition("normalizing constant is not positive".into()));
    }
    let (a, b) = transported_weights(pol, spec, p);
    let alpha: Vec<BigRational> = a.iter().map(|x| x / &c).collect();
    let beta: Vec<BigRational> = b.iter().map(|x| x / &c).collect();
    if alpha.iter().chain(&beta).any(|x| !x.is_positive()) {
        return Err(Error::Precondition("transported polarization has a nonpositive entry".into()));
    }
    Ok(TransportedPolarization { alpha, beta, c })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Windows {
    /// `Σ_(i<p) λ_i m_i ≤ μ_1`: instability passes to the mutated side.
    pub instability_forward: bool,
    /// `μ_1 ≥ 1/(n_1+1)`: instability passes back.
    pub instability_back: bool,
    /// `μ_1 < Σ_(j≥p) λ_j m_j/(n_1−1)`: semistable points lie in `W⁰_p`.
    pub semistable_in_open_set: bool,
    /// `μ_1 > Σ_(j≥p) λ_j m_j/(n_1+1)`: mutated semistable points lie in the mutated open set.
    pub mutated_semistable_in_open_set: bool,
    /// Both quotients exist together and agree.
    pub quotients_agree: bool,
}

/// Evaluates the comparison conditions; with `n_1 = 1` the upper bound is infinite.
pub fn window_predicates(pol: &Polarization, dims: &DimVector, p: usize) -> Windows {
    let mu = &pol.mu[0];
    let n1 = dims.n[0];
    let low = (0..p).fold(BigRational::zero(), |acc, i| acc + &pol.lambda[i] * q(dims.m[i]));
    let high = (p..dims.m.len()).fold(BigRational::zero(), |acc, j| acc + &pol.lambda[j] * q(dims.m[j]));
    let one = BigRational::from_integer(1.into());
    let below_upper = n1 <= 1 || *mu < &high / q(n1 - 1);
    let instability_back = *mu >= &one / q(n1 + 1);
    let max_low = if &one / q(n1 + 1) > &one - &high { &one / q(n1 + 1) } else { &one - &high };
    Windows {
        instability_forward: low <= *mu,
        instability_back,
        semistable_in_open_set: below_upper,
        mutated_semistable_in_open_set: *mu > &high / q(n1 + 1),
        quotients_agree: *mu >= max_low && below_upper,
    }
}

/// `τ : H*_11 ⊗ A_21 → H*_12` for type (2,1).
pub fn tau_map(spec: &RsSpec) -> Result<Mat> {
    if (spec.r, spec.s) != (2, 1) {
        return Err(Error::Precondition("τ needs type (2,1)".into()));
    }
    Ok(induced_ha_dual(spec, 0, 1, 0))
}

/// `τ* : H_12 ⊗ A_21 → H_11`, the composition itself.
pub fn tau_star_map(spec: &RsSpec) -> Result<Mat> {
    if (spec.r, spec.s) != (2, 1) {
        return Err(Error::Precondition("τ* needs type (2,1)".into()));
    }
    Ok(spec.comp_ha(0, 1, 0).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rs_spec::{sym_spec, validate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cases() -> Vec<(RsSpec, DimVector, usize)> {
        let f = Field::gf(3).unwrap();
        vec![
            (sym_spec(f, 1, &[-2, -1], &[0]).unwrap(), DimVector::new(vec![1, 1], vec![2]), 0),
            (sym_spec(f, 1, &[-2, -1], &[0]).unwrap(), DimVector::new(vec![1, 1], vec![1]), 1),
            (sym_spec(f, 1, &[0], &[1, 2]).unwrap(), DimVector::new(vec![2], vec![1, 1]), 0),
            (sym_spec(f, 1, &[-1, 0], &[1, 2]).unwrap(), DimVector::new(vec![1, 1], vec![1, 1]), 1),
            (sym_spec(f, 2, &[-1, 0], &[1]).unwrap(), DimVector::new(vec![1, 1], vec![2]), 0),
            (sym_spec(f, 1, &[-1, 0, 0], &[1, 2]).unwrap(), DimVector::new(vec![1, 1, 1], vec![2, 1]), 1),
        ]
    }

    #[test]
    fn mutated_data_satisfies_axioms() {
        for (spec, dims, p) in cases() {
            let ms = mutate_rs_spec(&spec, &dims, p).unwrap();
            let rep = validate(&ms.spec);
            assert!(rep.ok(), "{:?}", rep.failures());
            assert_eq!(ms.dims.m[p] as i64, new_source_dim(&spec, &dims, p));
            assert_eq!((ms.spec.r, ms.spec.s), (p + 1, spec.r + spec.s - p - 1));
        }
    }

    #[test]
    fn theta_from_rs_is_valid_and_round_trips_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (spec, dims, p) in cases() {
            let (_, lay) = theta_from_rs(&spec, &dims, p).unwrap();
            for _ in 0..5 {
                let w = PointW::random(&spec, &dims, &mut rng);
                let t = point_to_theta(&spec, &dims, &lay, &w).unwrap();
                assert_eq!(theta_to_point(&spec, &dims, &lay, &t), w);
                assert_eq!(t.in_w0(), in_w0_rs(&spec, &w, p));
            }
        }
    }

    #[test]
    fn double_dual_identifications_hold() {
        for (spec, dims, p) in cases() {
            let (th, _) = theta_from_rs(&spec, &dims, p).unwrap();
            let (_, _, dd) = double_dual(&th).unwrap();
            assert!(dd.matches(&th));
        }
    }

    #[test]
    fn second_mutation_returns_twisted_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (spec, dims, p) in cases() {
            let (th, lay) = theta_from_rs(&spec, &dims, p).unwrap();
            let mut hits = 0;
            for _ in 0..40 {
                let w = point_to_theta(&spec, &dims, &lay, &PointW::random(&spec, &dims, &mut rng)).unwrap();
                if !w.in_w0() {
                    continue;
                }
                hits += 1;
                assert_eq!(round_trip(&th, &w).unwrap(), w.sign_twist());
            }
            assert!(hits > 0);
        }
    }

    #[test]
    fn z_is_invariant_under_matching_choice_shifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (spec, dims, p) in cases() {
            let (th, lay) = theta_from_rs(&spec, &dims, p).unwrap();
            let d = dual_theta(&th).unwrap();
            for _ in 0..20 {
                let w = point_to_theta(&spec, &dims, &lay, &PointW::random(&spec, &dims, &mut rng)).unwrap();
                if !w.in_w0() {
                    continue;
                }
                let z = mutate_point(&th, &d, &w, None, None).unwrap();
                let hl = Mat::random(th.field, th.hl, 1, &mut rng);
                let psi = Mat::random(th.field, th.m, th.hr, &mut rng);
                let w1 = h_act(&th, &w, &hl, &Mat::zeros(th.field, th.m, th.hr));
                let a1 = z.alpha.add(&th.gamma1_of(&hl));
                assert_eq!(mutate_point(&th, &d, &w1, Some(&z.u), Some(&a1)).unwrap().point, z.point);
                let w2 = h_act(&th, &w, &Mat::zeros(th.field, th.hl, 1), &psi);
                let u2 = z.u.sub(&w.phi2.mul(&psi).transpose());
                assert_eq!(mutate_point(&th, &d, &w2, Some(&u2), Some(&z.alpha)).unwrap().point, z.point);
            }
        }
    }

    #[test]
    fn rs_mutation_lands_in_open_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (spec, dims, p) in cases() {
            let ms = mutate_rs_spec(&spec, &dims, p).unwrap();
            for _ in 0..20 {
                let w = PointW::random(&spec, &dims, &mut rng);
                if !in_w0_rs(&spec, &w, p) {
                    continue;
                }
                let z = mutate_rs_point(&spec, &dims, &ms, &w).unwrap();
                z.check(&ms.spec, &ms.dims).unwrap();
                assert!(in_w0_mutated(&ms, &z));
            }
        }
    }

    #[test]
    fn transported_polarization_example() {
        let f = Field::gf(3).unwrap();
        let spec = sym_spec(f, 1, &[-2, -1], &[0]).unwrap();
        let dims = DimVector::new(vec![1, 1], vec![2]);
        let r = |a: i64, b: i64| BigRational::new(a.into(), b.into());
        let pol = Polarization::new(vec![r(1, 4), r(3, 4)], vec![r(1, 2)], &dims).unwrap();
        let t = transport_polarization(&pol, &spec, &dims, 0).unwrap();
        assert_eq!(t.alpha, vec![r(1, 3)]);
        assert_eq!(t.beta, vec![r(5, 6), r(1, 6)]);
        let w = window_predicates(&pol, &dims, 0);
        assert!(w.instability_forward && w.instability_back && w.semistable_in_open_set && w.mutated_semistable_in_open_set && w.quotients_agree);
    }
}
