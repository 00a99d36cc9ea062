//! Exact dense linear algebra over the rationals and small prime fields.
//!
//! Tensor products use one global index convention: the composite index of
//! `(i, j)` in `U ⊗ V` is `i * dim V + j` (left factor slow). [`kron`] and
//! [`tensor_index`] are the only places that encode it.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{shape, Error, Result};

pub const PRIMES: [u32; 6] = [2, 3, 5, 7, 11, 13];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    Rationals,
    Prime(u32),
}

impl Field {
    pub fn gf(p: u32) -> Result<Field> {
        if PRIMES.contains(&p) {
            Ok(Field::Prime(p))
        } else {
            Err(Error::Field(format!("GF({p}) not supported; use one of {PRIMES:?}")))
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Field::Prime(_))
    }

    /// Number of elements, `None` for ℚ.
    pub fn order(self) -> Option<u32> {
        match self {
            Field::Prime(p) => Some(p),
            Field::Rationals => None,
        }
    }

    fn modulus(self) -> u32 {
        match self {
            Field::Prime(p) => p,
            Field::Rationals => panic!("modulus of the rationals"),
        }
    }

    pub fn zero(self) -> Elem {
        self.from_i64(0)
    }

    pub fn one(self) -> Elem {
        self.from_i64(1)
    }

    pub fn from_i64(self, v: i64) -> Elem {
        match self {
            Field::Rationals => Elem::Q(BigRational::from_integer(BigInt::from(v))),
            Field::Prime(p) => Elem::F { v: v.rem_euclid(p as i64) as u32, p },
        }
    }

    pub fn from_ratio(self, q: &BigRational) -> Result<Elem> {
        match self {
            Field::Rationals => Ok(Elem::Q(q.clone())),
            Field::Prime(p) => {
                let pn = BigInt::from(p);
                let n = (q.numer() % &pn + &pn) % &pn;
                let d = (q.denom() % &pn + &pn) % &pn;
                if d.is_zero() {
                    return Err(Error::Field(format!("{q} has no image in GF({p})")));
                }
                let n = n.to_u32().unwrap();
                let d = d.to_u32().unwrap();
                Ok(Elem::F { v: n * inv_mod(d, p) % p, p })
            }
        }
    }

    /// All elements in increasing residue order. Finite fields only.
    pub fn elements(self) -> Vec<Elem> {
        let p = self.modulus();
        (0..p).map(|v| Elem::F { v, p }).collect()
    }

    /// A generator of the multiplicative group.
    pub fn primitive_root(self) -> Option<Elem> {
        let p = self.order()?;
        (1..p)
            .find(|&g| {
                let mut x = 1u32;
                (1..p - 1).all(|_| {
                    x = x * g % p;
                    x != 1
                })
            })
            .map(|v| Elem::F { v, p })
    }

    pub fn random_elem<R: Rng>(self, rng: &mut R) -> Elem {
        match self {
            Field::Prime(p) => Elem::F { v: rng.gen_range(0..p), p },
            Field::Rationals => {
                let n: i64 = rng.gen_range(-3..=3);
                let d: i64 = if rng.gen_bool(0.25) { rng.gen_range(1..=3) } else { 1 };
                Elem::Q(BigRational::new(n.into(), d.into()))
            }
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Rationals => write!(f, "Q"),
            Field::Prime(p) => write!(f, "GF:{p}"),
        }
    }
}

fn inv_mod(a: u32, p: u32) -> u32 {
    let (mut t, mut nt) = (0i64, 1i64);
    let (mut r, mut nr) = (p as i64, a as i64);
    while nr != 0 {
        let q = r / nr;
        (t, nt) = (nt, t - q * nt);
        (r, nr) = (nr, r - q * nr);
    }
    assert!(r == 1, "{a} not invertible mod {p}");
    t.rem_euclid(p as i64) as u32
}

/// A single field element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Elem {
    Q(BigRational),
    F { v: u32, p: u32 },
}

impl Elem {
    pub fn is_zero(&self) -> bool {
        match self {
            Elem::Q(q) => q.is_zero(),
            Elem::F { v, .. } => *v == 0,
        }
    }

    pub fn field(&self) -> Field {
        match self {
            Elem::Q(_) => Field::Rationals,
            Elem::F { p, .. } => Field::Prime(*p),
        }
    }

    pub fn add(&self, o: &Elem) -> Elem {
        match (self, o) {
            (Elem::Q(a), Elem::Q(b)) => Elem::Q(a + b),
            (Elem::F { v: a, p }, Elem::F { v: b, .. }) => Elem::F { v: (a + b) % p, p: *p },
            _ => panic!("field mismatch"),
        }
    }

    pub fn neg(&self) -> Elem {
        match self {
            Elem::Q(a) => Elem::Q(-a),
            Elem::F { v, p } => Elem::F { v: (p - v) % p, p: *p },
        }
    }

    pub fn sub(&self, o: &Elem) -> Elem {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Elem) -> Elem {
        match (self, o) {
            (Elem::Q(a), Elem::Q(b)) => Elem::Q(a * b),
            (Elem::F { v: a, p }, Elem::F { v: b, .. }) => Elem::F { v: a * b % p, p: *p },
            _ => panic!("field mismatch"),
        }
    }

    pub fn inv(&self) -> Option<Elem> {
        if self.is_zero() {
            return None;
        }
        Some(match self {
            Elem::Q(a) => Elem::Q(a.recip()),
            Elem::F { v, p } => Elem::F { v: inv_mod(*v, *p), p: *p },
        })
    }

    /// The rational value; residues map to their representative in `[0,p)`.
    pub fn to_ratio(&self) -> BigRational {
        match self {
            Elem::Q(q) => q.clone(),
            Elem::F { v, .. } => BigRational::from_integer(BigInt::from(*v)),
        }
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Elem::Q(q) => write!(f, "{}", fmt_ratio(q)),
            Elem::F { v, .. } => write!(f, "{v}"),
        }
    }
}

/// `a` for integers, `a/b` otherwise (lowest terms, positive denominator).
pub fn fmt_ratio(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parses `a`, `-a` or `a/b`; rejects non-reduced fractions and zero denominators.
pub fn parse_ratio(s: &str) -> Result<BigRational> {
    let bad = |m: &str| Error::Invalid(format!("rational literal {s:?}: {m}"));
    let s = s.trim();
    match s.split_once('/') {
        None => s.parse::<BigInt>().map(BigRational::from_integer).map_err(|_| bad("not an integer")),
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad("bad numerator"))?;
            let d: BigInt = d.trim().parse().map_err(|_| bad("bad denominator"))?;
            if !d.is_positive() {
                return Err(bad("denominator must be positive"));
            }
            let q = BigRational::new(n.clone(), d.clone());
            if q.numer() != &n || q.denom() != &d {
                return Err(bad("not in lowest terms"));
            }
            Ok(q)
        }
    }
}

// ---------------------------------------------------------------------------
// Ring kernels shared by both storage kinds.

trait Ring {
    type T: Clone + PartialEq;
    fn zero(&self) -> Self::T;
    fn add(&self, a: &Self::T, b: &Self::T) -> Self::T;
    fn mul(&self, a: &Self::T, b: &Self::T) -> Self::T;
    fn neg(&self, a: &Self::T) -> Self::T;
    fn inv(&self, a: &Self::T) -> Self::T;
    fn is_zero(&self, a: &Self::T) -> bool;
}

struct QR;
struct FR(u32);

impl Ring for QR {
    type T = BigRational;
    fn zero(&self) -> BigRational {
        BigRational::zero()
    }
    fn add(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a + b
    }
    fn mul(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a * b
    }
    fn neg(&self, a: &BigRational) -> BigRational {
        -a
    }
    fn inv(&self, a: &BigRational) -> BigRational {
        a.recip()
    }
    fn is_zero(&self, a: &BigRational) -> bool {
        a.is_zero()
    }
}

impl Ring for FR {
    type T = u32;
    fn zero(&self) -> u32 {
        0
    }
    fn add(&self, a: &u32, b: &u32) -> u32 {
        (a + b) % self.0
    }
    fn mul(&self, a: &u32, b: &u32) -> u32 {
        a * b % self.0
    }
    fn neg(&self, a: &u32) -> u32 {
        (self.0 - a) % self.0
    }
    fn inv(&self, a: &u32) -> u32 {
        inv_mod(*a, self.0)
    }
    fn is_zero(&self, a: &u32) -> bool {
        *a == 0
    }
}

fn k_mul<R: Ring>(r: &R, a: &[R::T], b: &[R::T], n: usize, k: usize, m: usize) -> Vec<R::T> {
    let mut out = vec![r.zero(); n * m];
    for i in 0..n {
        for t in 0..k {
            let x = &a[i * k + t];
            if r.is_zero(x) {
                continue;
            }
            for j in 0..m {
                let y = &b[t * m + j];
                if !r.is_zero(y) {
                    out[i * m + j] = r.add(&out[i * m + j], &r.mul(x, y));
                }
            }
        }
    }
    out
}

/// Gauss–Jordan elimination; returns (reduced data, pivot columns).
fn k_rref<R: Ring>(r: &R, data: &[R::T], rows: usize, cols: usize) -> (Vec<R::T>, Vec<usize>) {
    let mut a = data.to_vec();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        let Some(piv) = (row..rows).find(|&i| !r.is_zero(&a[i * cols + col])) else {
            continue;
        };
        if piv != row {
            for j in 0..cols {
                a.swap(piv * cols + j, row * cols + j);
            }
        }
        let inv = r.inv(&a[row * cols + col]);
        for j in col..cols {
            a[row * cols + j] = r.mul(&a[row * cols + j], &inv);
        }
        for i in 0..rows {
            if i == row || r.is_zero(&a[i * cols + col]) {
                continue;
            }
            let f = r.neg(&a[i * cols + col]);
            for j in col..cols {
                let t = r.mul(&f, &a[row * cols + j]);
                a[i * cols + j] = r.add(&a[i * cols + j], &t);
            }
        }
        pivots.push(col);
        row += 1;
    }
    (a, pivots)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Store {
    Q(Vec<BigRational>),
    F(Vec<u32>),
}

macro_rules! unary {
    ($m:expr, |$r:ident, $v:ident| $body:expr) => {
        match &$m.data {
            Store::Q($v) => {
                let $r = QR;
                Store::Q($body)
            }
            Store::F($v) => {
                let $r = FR($m.field.modulus());
                Store::F($body)
            }
        }
    };
}

macro_rules! binary {
    ($a:expr, $b:expr, |$r:ident, $x:ident, $y:ident| $body:expr) => {
        match (&$a.data, &$b.data) {
            (Store::Q($x), Store::Q($y)) => {
                let $r = QR;
                Store::Q($body)
            }
            (Store::F($x), Store::F($y)) if $a.field == $b.field => {
                let $r = FR($a.field.modulus());
                Store::F($body)
            }
            _ => panic!("field mismatch: {} vs {}", $a.field, $b.field),
        }
    };
}

/// Dense row-major matrix over a [`Field`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mat {
    field: Field,
    rows: usize,
    cols: usize,
    data: Store,
}

impl Mat {
    pub fn zeros(field: Field, rows: usize, cols: usize) -> Mat {
        let data = match field {
            Field::Rationals => Store::Q(vec![BigRational::zero(); rows * cols]),
            Field::Prime(_) => Store::F(vec![0; rows * cols]),
        };
        Mat { field, rows, cols, data }
    }

    pub fn identity(field: Field, n: usize) -> Mat {
        let mut m = Mat::zeros(field, n, n);
        for i in 0..n {
            m.set(i, i, &field.one());
        }
        m
    }

    pub fn from_i64(field: Field, rows: &[Vec<i64>]) -> Mat {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Mat::zeros(field, r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, &field.from_i64(v));
            }
        }
        m
    }

    pub fn from_fn(field: Field, rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Elem) -> Mat {
        let mut m = Mat::zeros(field, rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let e = f(i, j);
                m.set(i, j, &e);
            }
        }
        m
    }

    /// Builds a matrix over GF(p) from residues (each taken mod p).
    pub fn from_residues(field: Field, rows: usize, cols: usize, v: Vec<u32>) -> Mat {
        assert_eq!(v.len(), rows * cols);
        let p = field.modulus();
        Mat { field, rows, cols, data: Store::F(v.into_iter().map(|x| x % p).collect()) }
    }

    /// Residues in row-major order. Finite fields only.
    pub fn residues(&self) -> &[u32] {
        match &self.data {
            Store::F(v) => v,
            Store::Q(_) => panic!("residues of a rational matrix"),
        }
    }

    pub fn random<R: Rng>(field: Field, rows: usize, cols: usize, rng: &mut R) -> Mat {
        Mat::from_fn(field, rows, cols, |_, _| field.random_elem(rng))
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> Elem {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of {}x{}", self.rows, self.cols);
        let k = i * self.cols + j;
        match &self.data {
            Store::Q(v) => Elem::Q(v[k].clone()),
            Store::F(v) => Elem::F { v: v[k], p: self.field.modulus() },
        }
    }

    pub fn set(&mut self, i: usize, j: usize, e: &Elem) {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of {}x{}", self.rows, self.cols);
        let k = i * self.cols + j;
        match (&mut self.data, e) {
            (Store::Q(v), Elem::Q(q)) => v[k] = q.clone(),
            (Store::F(v), Elem::F { v: x, p }) if *p == self.field.modulus() => v[k] = *x,
            _ => panic!("field mismatch in set"),
        }
    }

    /// Adds `e` to entry `(i, j)`.
    pub fn add_at(&mut self, i: usize, j: usize, e: &Elem) {
        let cur = self.get(i, j);
        self.set(i, j, &cur.add(e));
    }

    pub fn is_zero(&self) -> bool {
        match &self.data {
            Store::Q(v) => v.iter().all(|x| x.is_zero()),
            Store::F(v) => v.iter().all(|&x| x == 0),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols && *self == Mat::identity(self.field, self.rows)
    }

    pub fn add(&self, o: &Mat) -> Mat {
        assert_eq!(self.shape(), o.shape(), "add shape mismatch");
        let data = binary!(self, o, |r, x, y| x.iter().zip(y).map(|(a, b)| r.add(a, b)).collect());
        Mat { data, ..*self.header() }
    }

    pub fn neg(&self) -> Mat {
        let data = unary!(self, |r, x| x.iter().map(|a| r.neg(a)).collect());
        Mat { data, ..*self.header() }
    }

    pub fn sub(&self, o: &Mat) -> Mat {
        self.add(&o.neg())
    }

    pub fn scale(&self, e: &Elem) -> Mat {
        let s = Mat::from_fn(self.field, 1, 1, |_, _| e.clone());
        let data = binary!(self, s, |r, x, y| x.iter().map(|a| r.mul(a, &y[0])).collect());
        Mat { data, ..*self.header() }
    }

    pub fn mul(&self, o: &Mat) -> Mat {
        assert_eq!(self.cols, o.rows, "mul shape mismatch {:?} * {:?}", self.shape(), o.shape());
        let (n, k, m) = (self.rows, self.cols, o.cols);
        let data = binary!(self, o, |r, x, y| k_mul(&r, x, y, n, k, m));
        Mat { field: self.field, rows: n, cols: m, data }
    }

    pub fn try_mul(&self, o: &Mat) -> Result<Mat> {
        if self.cols != o.rows {
            return Err(shape(format!("{:?} * {:?}", self.shape(), o.shape())));
        }
        Ok(self.mul(o))
    }

    pub fn transpose(&self) -> Mat {
        let (r, c) = (self.rows, self.cols);
        let data = unary!(self, |_r, x| (0..r * c).map(|k| x[(k % r) * c + k / r].clone()).collect());
        Mat { field: self.field, rows: c, cols: r, data }
    }

    /// Rows `rs` and columns `cs` in the given order.
    pub fn select(&self, rs: &[usize], cs: &[usize]) -> Mat {
        let c = self.cols;
        let data = unary!(self, |_r, x| {
            let mut out = Vec::with_capacity(rs.len() * cs.len());
            for &i in rs {
                for &j in cs {
                    out.push(x[i * c + j].clone());
                }
            }
            out
        });
        Mat { field: self.field, rows: rs.len(), cols: cs.len(), data }
    }

    pub fn block(&self, r0: usize, nr: usize, c0: usize, nc: usize) -> Mat {
        let rs: Vec<usize> = (r0..r0 + nr).collect();
        let cs: Vec<usize> = (c0..c0 + nc).collect();
        self.select(&rs, &cs)
    }

    pub fn select_cols(&self, cs: &[usize]) -> Mat {
        let rs: Vec<usize> = (0..self.rows).collect();
        self.select(&rs, cs)
    }

    pub fn select_rows(&self, rs: &[usize]) -> Mat {
        let cs: Vec<usize> = (0..self.cols).collect();
        self.select(rs, &cs)
    }

    pub fn row(&self, i: usize) -> Mat {
        self.select_rows(&[i])
    }

    pub fn col(&self, j: usize) -> Mat {
        self.select_cols(&[j])
    }

    /// Writes `b` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Mat) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self.set(r0 + i, c0 + j, &b.get(i, j));
            }
        }
    }

    pub fn hstack(field: Field, rows: usize, parts: &[&Mat]) -> Mat {
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut out = Mat::zeros(field, rows, cols);
        let mut c0 = 0;
        for p in parts {
            assert_eq!(p.rows, rows, "hstack row mismatch");
            out.set_block(0, c0, p);
            c0 += p.cols;
        }
        out
    }

    pub fn vstack(field: Field, cols: usize, parts: &[&Mat]) -> Mat {
        let rows = parts.iter().map(|p| p.rows).sum();
        let mut out = Mat::zeros(field, rows, cols);
        let mut r0 = 0;
        for p in parts {
            assert_eq!(p.cols, cols, "vstack column mismatch");
            out.set_block(r0, 0, p);
            r0 += p.rows;
        }
        out
    }

    /// Reshapes a row-major matrix (same entry order).
    pub fn reshape(&self, rows: usize, cols: usize) -> Mat {
        assert_eq!(rows * cols, self.rows * self.cols);
        Mat { rows, cols, ..self.clone() }
    }

    fn header(&self) -> &Mat {
        self
    }

    pub fn rank(&self) -> usize {
        rref(self).1
    }

    pub fn inverse(&self) -> Option<Mat> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        let aug = Mat::hstack(self.field, n, &[self, &Mat::identity(self.field, n)]);
        let (red, rank, _) = rref(&aug);
        if rank < n || !red.block(0, n, 0, n).is_identity() {
            return None;
        }
        Some(red.block(0, n, n, n))
    }

    pub fn is_invertible(&self) -> bool {
        self.rows == self.cols && self.rank() == self.rows
    }

    /// Column span, as a subspace of the target space.
    pub fn image(&self) -> Subspace {
        Subspace::from_rows(&self.transpose())
    }

    pub fn entries(&self) -> Vec<Elem> {
        (0..self.rows).flat_map(|i| (0..self.cols).map(move |j| (i, j))).map(|(i, j)| self.get(i, j)).collect()
    }
}

/// Reduced row-echelon form, rank and pivot columns.
pub fn rref(m: &Mat) -> (Mat, usize, Vec<usize>) {
    let (rows, cols) = m.shape();
    let pivots: Vec<usize>;
    let data = unary!(m, |r, x| {
        let (d, p) = k_rref(&r, x, rows, cols);
        pivots = p;
        d
    });
    let rank = pivots.len();
    (Mat { field: m.field, rows, cols, data }, rank, pivots)
}

pub fn kernel_basis(m: &Mat) -> Subspace {
    let (red, rank, pivots) = rref(m);
    let n = m.cols;
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    let mut basis = Mat::zeros(m.field, free.len(), n);
    for (k, &f) in free.iter().enumerate() {
        basis.set(k, f, &m.field.one());
        for (i, &pc) in pivots.iter().enumerate().take(rank) {
            basis.set(k, pc, &red.get(i, f).neg());
        }
    }
    Subspace::from_rows(&basis)
}

/// Some `x` with `m·x = b`; free variables are set to zero.
pub fn solve_particular(m: &Mat, b: &Mat) -> Result<Mat> {
    if m.rows != b.rows {
        return Err(shape(format!("solve: {:?} vs rhs {:?}", m.shape(), b.shape())));
    }
    let (n, k) = (m.cols, b.cols);
    let aug = Mat::hstack(m.field, m.rows, &[m, b]);
    let (red, _, pivots) = rref(&aug);
    if pivots.iter().any(|&c| c >= n) {
        return Err(Error::NoSolution);
    }
    let mut x = Mat::zeros(m.field, n, k);
    for (i, &pc) in pivots.iter().enumerate() {
        for j in 0..k {
            x.set(pc, j, &red.get(i, n + j));
        }
    }
    Ok(x)
}

/// Canonical surjection with kernel `sub`: rows `e_k` for every non-pivot coordinate `k`.
pub fn quotient_map(ambient_dim: usize, sub: &Subspace) -> Result<Mat> {
    if sub.ambient != ambient_dim {
        return Err(shape(format!("quotient: ambient {ambient_dim} vs subspace in {}", sub.ambient)));
    }
    let rest: Vec<usize> = (0..ambient_dim).filter(|c| !sub.pivots.contains(c)).collect();
    let mut p = Mat::zeros(sub.field, rest.len(), ambient_dim);
    for (i, &c) in rest.iter().enumerate() {
        p.set(i, c, &sub.field.one());
    }
    // Reduce along the subspace so that the kernel is exactly `sub`.
    for (i, &c) in rest.iter().enumerate() {
        for (b, &pc) in sub.pivots.iter().enumerate() {
            let coeff = sub.basis.get(b, c);
            if !coeff.is_zero() {
                p.set(i, pc, &coeff.neg());
            }
        }
    }
    Ok(p)
}

/// Section of [`quotient_map`]: columns `e_k` for the non-pivot coordinates, so `P·L = I`.
pub fn quotient_lift(ambient_dim: usize, sub: &Subspace) -> Mat {
    let rest: Vec<usize> = (0..ambient_dim).filter(|c| !sub.pivots.contains(c)).collect();
    let mut l = Mat::zeros(sub.field, ambient_dim, rest.len());
    for (i, &c) in rest.iter().enumerate() {
        l.set(c, i, &sub.field.one());
    }
    l
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ar, ac, br, bc) = (a.rows, a.cols, b.rows, b.cols);
    let data = binary!(a, b, |r, x, y| {
        let mut out = vec![r.zero(); ar * br * ac * bc];
        let cols = ac * bc;
        for i in 0..ar {
            for j in 0..ac {
                let s = &x[i * ac + j];
                if r.is_zero(s) {
                    continue;
                }
                for k in 0..br {
                    for l in 0..bc {
                        out[(i * br + k) * cols + j * bc + l] = r.mul(s, &y[k * bc + l]);
                    }
                }
            }
        }
        out
    });
    Mat { field: a.field, rows: ar * br, cols: ac * bc, data }
}

/// Composite index of `(i, j)` in a tensor product whose right factor has dimension `inner`.
pub fn tensor_index(i: usize, j: usize, inner: usize) -> usize {
    i * inner + j
}

/// Permutation matrix `U ⊗ V → V ⊗ U`.
pub fn swap_map(field: Field, u: usize, v: usize) -> Mat {
    let mut m = Mat::zeros(field, u * v, u * v);
    for i in 0..u {
        for j in 0..v {
            m.set(tensor_index(j, i, u), tensor_index(i, j, v), &field.one());
        }
    }
    m
}

// ---------------------------------------------------------------------------

/// Subspace stored by its canonical RREF basis.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Subspace {
    field: Field,
    ambient: usize,
    basis: Mat,
    pivots: Vec<usize>,
}

impl Subspace {
    /// Row span of `rows`.
    pub fn from_rows(rows: &Mat) -> Subspace {
        let (red, rank, pivots) = rref(rows);
        let idx: Vec<usize> = (0..rank).collect();
        let cs: Vec<usize> = (0..rows.cols).collect();
        Subspace { field: rows.field, ambient: rows.cols, basis: red.select(&idx, &cs), pivots }
    }

    pub fn zero(field: Field, ambient: usize) -> Subspace {
        Subspace::from_rows(&Mat::zeros(field, 0, ambient))
    }

    pub fn full(field: Field, ambient: usize) -> Subspace {
        Subspace::from_rows(&Mat::identity(field, ambient))
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.rows
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.ambient
    }

    /// Basis rows (`dim × ambient_dim`, reduced row-echelon form).
    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Whether the column vector `v` lies in the subspace.
    pub fn contains_vec(&self, v: &Mat) -> bool {
        let stacked = Mat::vstack(self.field, self.ambient, &[&self.basis, &v.transpose()]);
        stacked.rank() == self.dim()
    }

    pub fn contains(&self, o: &Subspace) -> bool {
        let stacked = Mat::vstack(self.field, self.ambient, &[&self.basis, &o.basis]);
        stacked.rank() == self.dim()
    }

    pub fn join(&self, o: &Subspace) -> Subspace {
        Subspace::from_rows(&Mat::vstack(self.field, self.ambient, &[&self.basis, &o.basis]))
    }

    /// Coordinates (column vector) of a member `v` in the RREF basis.
    pub fn coords(&self, v: &Mat) -> Mat {
        v.select_rows(&self.pivots)
    }

    /// Inclusion map (ambient × dim).
    pub fn inclusion(&self) -> Mat {
        self.basis.transpose()
    }
}

/// Number of `k`-dimensional subspaces of `F_q^n`, saturating at `u128::MAX`.
pub fn gaussian_binomial(n: usize, k: usize, q: u64) -> u128 {
    if k > n {
        return 0;
    }
    // Pascal-type recurrence: [n,k] = [n-1,k-1] + q^k [n-1,k].
    let mut row = vec![1u128; 1];
    for m in 1..=n {
        let mut next = vec![1u128; m + 1];
        for j in 1..m {
            let qk = (q as u128).saturating_pow(j as u32);
            next[j] = row[j - 1].saturating_add(qk.saturating_mul(row[j]));
        }
        row = next;
    }
    row[k]
}

/// Number of subspaces of `F_q^n` of all dimensions, saturating.
pub fn subspace_count(n: usize, q: u64) -> u128 {
    (0..=n).fold(0u128, |acc, k| acc.saturating_add(gaussian_binomial(n, k, q)))
}

pub const MAX_SUBSPACE_AMBIENT: usize = 16;

/// Every `dim`-dimensional subspace of `F_p^ambient`, in canonical order:
/// pivot sets lexicographically, then free entries as base-p counters.
pub fn enumerate_subspaces(field: Field, ambient: usize, dim: usize) -> Result<SubspaceIter> {
    if !field.is_finite() {
        return Err(Error::Field("subspace enumeration needs a finite field".into()));
    }
    if ambient > MAX_SUBSPACE_AMBIENT {
        return Err(Error::Budget(format!("subspace enumeration in dimension {ambient} > {MAX_SUBSPACE_AMBIENT}")));
    }
    if dim > ambient {
        return Err(shape(format!("subspace of dimension {dim} in {ambient}")));
    }
    let mut it = SubspaceIter { field, ambient, dim, pivots: (0..dim).collect(), free: Vec::new(), digits: Vec::new(), done: false };
    it.reset_free();
    Ok(it)
}

/// All subspaces of every dimension, dimension ascending.
pub fn enumerate_all_subspaces(field: Field, ambient: usize) -> Result<Vec<Subspace>> {
    let mut out = Vec::new();
    for d in 0..=ambient {
        out.extend(enumerate_subspaces(field, ambient, d)?);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SubspaceIter {
    field: Field,
    ambient: usize,
    dim: usize,
    pivots: Vec<usize>,
    free: Vec<(usize, usize)>,
    digits: Vec<u32>,
    done: bool,
}

impl SubspaceIter {
    fn reset_free(&mut self) {
        self.free.clear();
        for (r, &pc) in self.pivots.iter().enumerate() {
            for c in pc + 1..self.ambient {
                if !self.pivots.contains(&c) {
                    self.free.push((r, c));
                }
            }
        }
        self.digits = vec![0; self.free.len()];
    }

    fn advance_pivots(&mut self) -> bool {
        let k = self.dim;
        let n = self.ambient;
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.pivots[i] < n - k + i {
                self.pivots[i] += 1;
                for t in i + 1..k {
                    self.pivots[t] = self.pivots[t - 1] + 1;
                }
                return true;
            }
        }
        false
    }
}

impl Iterator for SubspaceIter {
    type Item = Subspace;

    fn next(&mut self) -> Option<Subspace> {
        if self.done {
            return None;
        }
        let p = self.field.modulus();
        let mut b = Mat::zeros(self.field, self.dim, self.ambient);
        for (r, &pc) in self.pivots.iter().enumerate() {
            b.set(r, pc, &self.field.one());
        }
        for (&(r, c), &d) in self.free.iter().zip(&self.digits) {
            b.set(r, c, &Elem::F { v: d, p });
        }
        let out = Subspace { field: self.field, ambient: self.ambient, basis: b, pivots: self.pivots.clone() };
        // Advance the counter: last free entry fastest.
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                if !self.advance_pivots() {
                    self.done = true;
                } else {
                    self.reset_free();
                }
                break;
            }
            i -= 1;
            self.digits[i] += 1;
            if self.digits[i] < p {
                break;
            }
            self.digits[i] = 0;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf2() -> Field {
        Field::Prime(2)
    }

    #[test]
    fn rref_examples() {
        let i3 = Mat::identity(Field::Rationals, 3);
        let (r, k, _) = rref(&i3);
        assert_eq!((r, k), (i3, 3));
        let z = Mat::zeros(Field::Rationals, 2, 2);
        assert_eq!(rref(&z).1, 0);
        let m = Mat::from_i64(gf2(), &[vec![1, 0, 1], vec![0, 1, 1]]);
        let (r, k, p) = rref(&m);
        assert_eq!((r, k, p), (m, 2, vec![0, 1]));
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_basis(&Mat::identity(gf2(), 4)).dim(), 0);
        let m = Mat::from_i64(gf2(), &[vec![1, 0, 1], vec![0, 1, 1]]);
        let k = kernel_basis(&m);
        assert_eq!(k.basis(), &Mat::from_i64(gf2(), &[vec![1, 1, 1]]));
        assert!(kernel_basis(&Mat::zeros(gf2(), 2, 3)).is_full());
    }

    #[test]
    fn solve_examples() {
        let f = gf2();
        let b = Mat::from_i64(f, &[vec![1], vec![0]]);
        assert_eq!(solve_particular(&Mat::identity(f, 2), &b).unwrap(), b);
        assert_eq!(solve_particular(&Mat::zeros(f, 2, 2), &b), Err(Error::NoSolution));
        let x = solve_particular(&Mat::from_i64(f, &[vec![1, 1]]), &Mat::from_i64(f, &[vec![1]])).unwrap();
        assert_eq!(x, Mat::from_i64(f, &[vec![1], vec![0]]));
    }

    #[test]
    fn quotient_examples() {
        let q = Field::Rationals;
        assert!(quotient_map(3, &Subspace::zero(q, 3)).unwrap().is_identity());
        assert_eq!(quotient_map(3, &Subspace::full(q, 3)).unwrap().shape(), (0, 3));
        let sub = Subspace::from_rows(&Mat::from_i64(q, &[vec![1, 0, 0]]));
        let p = quotient_map(3, &sub).unwrap();
        assert_eq!(p, Mat::from_i64(q, &[vec![0, 1, 0], vec![0, 0, 1]]));
        let sub = Subspace::from_rows(&Mat::from_i64(q, &[vec![1, 2, 3]]));
        let p = quotient_map(3, &sub).unwrap();
        assert!(p.mul(&sub.inclusion()).is_zero());
        assert_eq!(p.rank(), 2);
    }

    #[test]
    fn kron_examples() {
        let q = Field::Rationals;
        assert!(kron(&Mat::identity(q, 2), &Mat::identity(q, 3)).is_identity());
        let a = Mat::from_i64(q, &[vec![1, 2], vec![3, 4]]);
        assert_eq!(kron(&a, &Mat::from_i64(q, &[vec![1]])), a);
        let k = kron(&Mat::from_i64(q, &[vec![1, 1]]), &Mat::identity(q, 2));
        assert_eq!(k, Mat::from_i64(q, &[vec![1, 0, 1, 0], vec![0, 1, 0, 1]]));
    }

    #[test]
    fn subspace_counts() {
        assert_eq!(enumerate_subspaces(gf2(), 2, 1).unwrap().count(), 3);
        assert_eq!(enumerate_subspaces(Field::Prime(3), 3, 1).unwrap().count(), 13);
        let z: Vec<_> = enumerate_subspaces(Field::Prime(5), 3, 0).unwrap().collect();
        assert_eq!(z.len(), 1);
        assert_eq!(z[0].dim(), 0);
        assert!(enumerate_subspaces(gf2(), MAX_SUBSPACE_AMBIENT + 1, 1).is_err());
        assert!(enumerate_subspaces(Field::Rationals, 2, 1).is_err());
    }

    #[test]
    fn ratio_literals() {
        assert_eq!(fmt_ratio(&parse_ratio("-3/4").unwrap()), "-3/4");
        assert_eq!(fmt_ratio(&parse_ratio("5").unwrap()), "5");
        assert!(parse_ratio("2/4").is_err());
        assert!(parse_ratio("1/0").is_err());
        assert!(parse_ratio("1/-2").is_err());
    }

    #[test]
    fn inverse_and_roots() {
        let f = Field::Prime(7);
        let m = Mat::from_i64(f, &[vec![2, 1], vec![1, 1]]);
        assert!(m.mul(&m.inverse().unwrap()).is_identity());
        assert!(Mat::from_i64(f, &[vec![1, 1], vec![1, 1]]).inverse().is_none());
        assert_eq!(f.primitive_root(), Some(f.from_i64(3)));
        assert_eq!(Field::Prime(2).primitive_root(), Some(Field::Prime(2).one()));
    }

    #[test]
    fn swap_map_permutes_factors() {
        let q = Field::Rationals;
        let a = Mat::from_i64(q, &[vec![1, 2]]);
        let b = Mat::from_i64(q, &[vec![5], vec![6], vec![7]]);
        let ab = kron(&a.transpose(), &b);
        let ba = kron(&b, &a.transpose());
        assert_eq!(swap_map(q, 2, 3).mul(&ab), ba);
    }
}
