mod common;

use common::{cached_cases, field_of, frac, gf, q, Case};
use mutator::calculators::{
    kronecker_dual_dims, kronecker_spec, line_bundle_hom_dim, pn_quotient_dims, rho_from_rho_prime, rho_prime, KroneckerData,
    P2Family,
};
use mutator::exactla::{
    enumerate_all_subspaces, gaussian_binomial, kernel_basis, kron, quotient_lift, quotient_map, solve_particular, subspace_count,
    swap_map, Field, Mat, Subspace,
};
use mutator::groups::{Groups, Subgroup};
use mutator::mutation::{
    double_dual, in_w0_mutated, in_w0_rs, mutate_rs_point, mutate_rs_spec, point_to_theta, round_trip, theta_from_rs,
    transported_weights, window_predicates,
};
use mutator::rs_spec::{
    dual_point, dual_spec, parse_point, parse_spec, serialize_point, serialize_spec, sym_spec, validate, DimVector, PointW,
};
use mutator::stability::{gred_semistable, kronecker_semistable, Mode, Polarization};
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn field_strategy() -> impl Strategy<Value = Field> {
    prop_oneof![Just(gf(2)), Just(gf(3)), Just(gf(5)), Just(Field::Rationals)]
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pick(field: Field, k: usize) -> &'static Case {
    let cases = cached_cases(field);
    &cases[k % cases.len()]
}

/// Positive weights with `Σ λ m = Σ μ n = 1` drawn from small integers.
fn random_polarization(dims: &DimVector, rng: &mut ChaCha8Rng) -> Polarization {
    let side = |d: &[usize], rng: &mut ChaCha8Rng| -> Vec<BigRational> {
        let w: Vec<i64> = d.iter().map(|_| rng.gen_range(1..=6)).collect();
        let total: i64 = w.iter().zip(d).map(|(x, &k)| x * k as i64).sum();
        w.iter().map(|&x| frac(x, total)).collect()
    };
    let lambda = side(&dims.m, rng);
    let mu = side(&dims.n, rng);
    Polarization::new(lambda, mu, dims).unwrap()
}

fn dot(w: &[BigRational], d: &[usize]) -> BigRational {
    w.iter().zip(d).fold(BigRational::zero(), |acc, (x, &k)| acc + x * q(k as i64))
}

/// All tuples `t` with `0 ≤ t_i ≤ bound_i`.
fn boxes(bound: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &b in bound {
        out = out.into_iter().flat_map(|t| (0..=b).map(move |x| [t.clone(), vec![x]].concat())).collect();
    }
    out
}

// ---------------------------------------------------------------------------
// Linear algebra

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_plus_nullity(field in field_strategy(), rows in 0usize..6, cols in 0usize..6, seed: u64) {
        let m = Mat::random(field, rows, cols, &mut rng(seed));
        let k = kernel_basis(&m);
        prop_assert_eq!(m.rank() + k.dim(), cols);
        prop_assert!(m.mul(&k.inclusion()).is_zero());
    }

    #[test]
    fn solve_recovers_consistent_systems(field in field_strategy(), rows in 1usize..6, cols in 1usize..6, seed: u64) {
        let mut g = rng(seed);
        let m = Mat::random(field, rows, cols, &mut g);
        let x = Mat::random(field, cols, 2, &mut g);
        let b = m.mul(&x);
        let y = solve_particular(&m, &b).unwrap();
        prop_assert_eq!(m.mul(&y), b);
    }

    #[test]
    fn quotient_map_has_the_right_kernel(field in field_strategy(), n in 1usize..7, k in 0usize..5, seed: u64) {
        let gens = Mat::random(field, k, n, &mut rng(seed));
        let sub = Subspace::from_rows(&gens);
        let p = quotient_map(n, &sub).unwrap();
        let l = quotient_lift(n, &sub);
        prop_assert!(p.mul(&l).is_identity());
        prop_assert_eq!(p.rows(), n - sub.dim());
        prop_assert!(p.mul(&sub.inclusion()).is_zero());
    }

    #[test]
    fn kron_mixed_product(field in field_strategy(), d in proptest::collection::vec(1usize..4, 6), seed: u64) {
        let mut g = rng(seed);
        let a = Mat::random(field, d[0], d[1], &mut g);
        let b = Mat::random(field, d[2], d[3], &mut g);
        let c = Mat::random(field, d[1], d[4], &mut g);
        let e = Mat::random(field, d[3], d[5], &mut g);
        prop_assert_eq!(kron(&a, &b).mul(&kron(&c, &e)), kron(&a.mul(&c), &b.mul(&e)));
    }

    #[test]
    fn swap_map_exchanges_factors(field in field_strategy(), u in 1usize..4, v in 1usize..4, seed: u64) {
        let mut g = rng(seed);
        let x = Mat::random(field, u, 1, &mut g);
        let y = Mat::random(field, v, 1, &mut g);
        prop_assert_eq!(swap_map(field, u, v).mul(&kron(&x, &y)), kron(&y, &x));
        prop_assert!(swap_map(field, v, u).mul(&swap_map(field, u, v)).is_identity());
    }

    #[test]
    fn inverse_is_two_sided(field in field_strategy(), n in 1usize..6, seed: u64) {
        let m = Mat::random(field, n, n, &mut rng(seed));
        match m.inverse() {
            Some(inv) => {
                prop_assert!(m.mul(&inv).is_identity());
                prop_assert!(inv.mul(&m).is_identity());
            }
            None => prop_assert!(m.rank() < n),
        }
    }
}

#[test]
fn subspace_enumeration_matches_gaussian_binomials() {
    for p in [2u32, 3] {
        for n in 0..=4 {
            let all = enumerate_all_subspaces(gf(p), n).unwrap();
            assert_eq!(all.len() as u128, subspace_count(n, p as u64));
            for k in 0..=n {
                let c = all.iter().filter(|s| s.dim() == k).count() as u128;
                assert_eq!(c, gaussian_binomial(n, k, p as u64));
                assert_eq!(gaussian_binomial(n, k, p as u64), gaussian_binomial(n, n - k, p as u64));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Groups and actions

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn group_laws(fk in 0usize..3, k: usize, seed: u64) {
        let c = pick(field_of(fk), k);
        let g = Groups::new(&c.spec, &c.dims);
        let mut r = rng(seed);
        let (a, b, e) = (g.random(Subgroup::Full, &mut r), g.random(Subgroup::Full, &mut r), g.random(Subgroup::Full, &mut r));
        prop_assert!(g.check(&a).is_ok());
        prop_assert_eq!(g.mul(&g.mul(&a, &b), &e), g.mul(&a, &g.mul(&b, &e)));
        prop_assert_eq!(g.mul(&a, &g.identity()), a.clone());
        prop_assert_eq!(g.mul(&g.identity(), &a), a.clone());
        prop_assert_eq!(g.mul(&a, &g.inv(&a)), g.identity());
        prop_assert_eq!(g.mul(&g.inv(&a), &a), g.identity());
    }

    #[test]
    fn action_is_a_left_action(fk in 0usize..3, k: usize, seed: u64) {
        let c = pick(field_of(fk), k);
        let g = Groups::new(&c.spec, &c.dims);
        let mut r = rng(seed);
        let w = PointW::random(&c.spec, &c.dims, &mut r);
        let (a, b) = (g.random(Subgroup::Full, &mut r), g.random(Subgroup::Full, &mut r));
        prop_assert_eq!(g.act(&a, &g.act(&b, &w)), g.act(&g.mul(&a, &b), &w));
        prop_assert_eq!(g.act(&g.identity(), &w), w.clone());
        prop_assert_eq!(g.left_act(&a.right, &g.right_act(&w, &a.left)), g.right_act(&g.left_act(&a.right, &w), &a.left));
    }

    #[test]
    fn unipotent_and_reductive_parts(fk in 0usize..3, k: usize, seed: u64) {
        let c = pick(field_of(fk), k);
        let g = Groups::new(&c.spec, &c.dims);
        let mut r = rng(seed);
        let x = g.random(Subgroup::Full, &mut r);
        let (u, d) = g.gl.decompose(&x.left);
        prop_assert!(u.is_unipotent() && d.is_diagonal());
        prop_assert_eq!(g.gl.mul(&u, &d), x.left);
        prop_assert!(g.random(Subgroup::Unipotent, &mut r).right.is_unipotent());
        prop_assert!(g.random(Subgroup::Reductive, &mut r).left.is_diagonal());
    }
}

// ---------------------------------------------------------------------------
// Specs, points and duality

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn json_round_trips(fk in 0usize..3, k: usize, seed: u64) {
        let c = pick(field_of(fk), k);
        let v = serialize_spec(&c.spec);
        prop_assert_eq!(&parse_spec(&v).unwrap(), &c.spec);
        let w = PointW::random(&c.spec, &c.dims, &mut rng(seed));
        let (w2, d2) = parse_point(&c.spec, &serialize_point(&c.spec, &c.dims, &w)).unwrap();
        prop_assert_eq!(w2, w);
        prop_assert_eq!(&d2, &c.dims);
    }

    #[test]
    fn point_index_is_a_bijection(k: usize, seed: u64) {
        let c = pick(gf(2), k);
        let w = PointW::random(&c.spec, &c.dims, &mut rng(seed));
        prop_assert_eq!(PointW::from_index(&c.spec, &c.dims, w.index()), w);
    }

    #[test]
    fn duality_is_an_involution(fk in 0usize..3, k: usize, seed: u64) {
        let c = pick(field_of(fk), k);
        let d = dual_spec(&c.spec).unwrap();
        prop_assert!(validate(&d).ok());
        prop_assert_eq!(&dual_spec(&d).unwrap(), &c.spec);
        let w = PointW::random(&c.spec, &c.dims, &mut rng(seed));
        let dw = dual_point(&c.spec, &c.dims, &w).unwrap();
        prop_assert!(dw.check(&d, &c.dims.dual()).is_ok());
        prop_assert_eq!(dual_point(&d, &c.dims.dual(), &dw).unwrap(), w);
    }
}

// ---------------------------------------------------------------------------
// Mutation

type PairDims = Vec<((usize, usize), usize)>;

/// Dimensions of the mutated data computed directly from ranks of the
/// composition tensors.
fn expected_mutated(c: &Case) -> (DimVector, Vec<Vec<usize>>, PairDims, PairDims) {
    let (spec, dims, p) = (&c.spec, &c.dims, c.p);
    let (r, s) = (spec.r, spec.s);
    let rr = r - p;
    let f = spec.field;
    let new_m: usize = (p..r).map(|j| dims.m[j] * spec.dim_h(0, j)).sum::<usize>() - dims.n[0];
    let mut m2: Vec<usize> = dims.m[..p].to_vec();
    m2.push(new_m);
    let n2: Vec<usize> = dims.m[p..].iter().chain(&dims.n[1..]).copied().collect();
    let quotient_dim = |i: usize, jj: usize| {
        let (hi, hj, a) = (spec.dim_h(0, i), spec.dim_h(0, jj), spec.dim_a(jj, i));
        let c = spec.comp_ha(0, jj, i);
        let emb = Mat::from_fn(f, hi * hj, a, |row, col| c.get(row / hj, (row % hj) * a + col));
        hi * hj - emb.rank()
    };
    let mut h = vec![vec![0; p + 1]; r + s - p - 1];
    for (l, row) in h.iter_mut().enumerate() {
        for (i, x) in row.iter_mut().enumerate() {
            *x = match (l < rr, i < p) {
                (true, true) => quotient_dim(i, l + p),
                (false, true) => spec.dim_h(l - rr + 1, i),
                (true, false) => spec.dim_h(0, l + p),
                (false, false) => spec.dim_b(l - rr + 1, 0),
            };
        }
    }
    let mut a = Vec::new();
    for j in 0..=p {
        for i in 0..j {
            a.push(((j, i), if j < p { spec.dim_a(j, i) } else { spec.dim_h(0, i) }));
        }
    }
    let mut b = Vec::new();
    for m in 0..r + s - p - 1 {
        for l in 0..m {
            let d = match (m < rr, l < rr) {
                (true, true) => spec.dim_a(m + p, l + p),
                (false, false) => spec.dim_b(m - rr + 1, l - rr + 1),
                _ => {
                    let t = spec.comp_bh(m - rr + 1, 0, l + p);
                    t.cols() - t.rank()
                }
            };
            b.push(((m, l), d));
        }
    }
    (DimVector::new(m2, n2), h, a, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mutated_spec_is_valid_with_expected_dimensions(fk in 0usize..3, k: usize) {
        let c = pick(field_of(fk), k);
        let ms = mutate_rs_spec(&c.spec, &c.dims, c.p).unwrap();
        prop_assert!(validate(&ms.spec).ok());
        let (dims, h, a, b) = expected_mutated(c);
        prop_assert_eq!(&ms.dims, &dims);
        prop_assert_eq!(&ms.spec.dim_h, &h);
        for ((j, i), d) in a {
            prop_assert_eq!(ms.spec.dim_a(j, i), d);
        }
        for ((m, l), d) in b {
            prop_assert_eq!(ms.spec.dim_b(m, l), d);
        }
    }

    #[test]
    fn double_dual_is_canonically_the_original(fk in 0usize..3, k: usize) {
        let c = pick(field_of(fk), k);
        let (th, _) = theta_from_rs(&c.spec, &c.dims, c.p).unwrap();
        prop_assert!(th.validate().is_ok());
        let (d1, _, dd) = double_dual(&th).unwrap();
        prop_assert!(d1.theta.validate().is_ok());
        prop_assert!(dd.matches(&th));
    }

    #[test]
    fn second_mutation_is_the_sign_twist(fk in 0usize..3, k: usize, seed: u64) {
        let c = pick(field_of(fk), k);
        let (th, lay) = theta_from_rs(&c.spec, &c.dims, c.p).unwrap();
        let mut r = rng(seed);
        for _ in 0..8 {
            let w = PointW::random(&c.spec, &c.dims, &mut r);
            let t = point_to_theta(&c.spec, &c.dims, &lay, &w).unwrap();
            if t.in_w0() {
                prop_assert_eq!(round_trip(&th, &t).unwrap(), t.sign_twist());
            }
        }
    }

    #[test]
    fn mutated_points_lie_in_the_mutated_open_set(fk in 0usize..3, k: usize, seed: u64) {
        let c = pick(field_of(fk), k);
        let ms = mutate_rs_spec(&c.spec, &c.dims, c.p).unwrap();
        let mut r = rng(seed);
        for _ in 0..4 {
            let w = PointW::random(&c.spec, &c.dims, &mut r);
            if in_w0_rs(&c.spec, &w, c.p) {
                let z = mutate_rs_point(&c.spec, &c.dims, &ms, &w).unwrap();
                prop_assert!(z.check(&ms.spec, &ms.dims).is_ok());
                prop_assert!(in_w0_mutated(&ms, &z));
            } else {
                prop_assert!(mutate_rs_point(&c.spec, &c.dims, &ms, &w).is_err());
            }
        }
    }

    #[test]
    fn open_sets_form_a_chain(k: usize, seed: u64) {
        let c = pick(gf(2), k);
        let mut r = rng(seed);
        for _ in 0..16 {
            let w = PointW::random(&c.spec, &c.dims, &mut r);
            for p in 1..c.spec.r {
                if in_w0_rs(&c.spec, &w, p) {
                    prop_assert!(in_w0_rs(&c.spec, &w, p - 1));
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Polarizations

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// `Σλm' − Σμn'` is unchanged when the subspace dimensions and weights
    /// are carried to the mutated side, for every dimension tuple below `dims`.
    #[test]
    fn transported_weights_preserve_the_slope(k: usize, seed: u64) {
        let c = pick(gf(2), k);
        let (spec, dims, p) = (&c.spec, &c.dims, c.p);
        let pol = random_polarization(dims, &mut rng(seed));
        let (alpha, beta) = transported_weights(&pol, spec, p);
        let r = spec.r;
        for mp in boxes(&dims.m) {
            for np in boxes(&dims.n) {
                let lhs = dot(&pol.lambda, &mp) - dot(&pol.mu, &np);
                let new_src = (p..r).fold(BigRational::zero(), |acc, j| acc + q((mp[j] * spec.dim_h(0, j)) as i64)) - q(np[0] as i64);
                let rhs = dot(&alpha[..p], &mp[..p]) + &alpha[p] * new_src - dot(&beta, &[&mp[p..], &np[1..]].concat());
                prop_assert_eq!(lhs, rhs);
            }
        }
        let ms = mutate_rs_spec(spec, dims, p).unwrap();
        if let Ok(tp) = mutator::mutation::transport_polarization(&pol, spec, dims, p) {
            let (a, b) = tp.polarization().sums(&ms.dims);
            prop_assert!(a.is_one() && b.is_one());
            prop_assert!(Polarization::new(tp.alpha.clone(), tp.beta.clone(), &ms.dims).is_ok());
        }
    }

    #[test]
    fn window_special_cases(k: usize, seed: u64) {
        let c = pick(gf(2), k);
        let pol = random_polarization(&c.dims, &mut rng(seed));
        for p in 0..c.spec.r {
            let w = window_predicates(&pol, &c.dims, p);
            if p == 0 {
                prop_assert_eq!(w.quotients_agree, w.instability_back);
            }
            if c.spec.s == 1 {
                let n1 = c.dims.n[0] as i64;
                let high = dot(&pol.lambda[p..], &c.dims.m[p..]);
                prop_assert_eq!(w.quotients_agree, high > frac(n1 - 1, n1));
            }
            prop_assert!(!w.quotients_agree || (w.instability_back && w.semistable_in_open_set));
        }
    }
}

// ---------------------------------------------------------------------------
// Kronecker modules

/// Semistability by the slope condition over every subspace of the source.
fn kronecker_oracle(f: &Mat, qd: usize) -> (bool, bool) {
    let (n, m) = (f.rows(), f.cols() / qd);
    let field = f.field();
    let (mut ss, mut st) = (true, true);
    for sub in enumerate_all_subspaces(field, m).unwrap() {
        let d = sub.dim();
        if d == 0 {
            continue;
        }
        let img = f.mul(&kron(&Mat::identity(field, qd), &sub.inclusion())).rank();
        let (lhs, rhs) = (d * n, img * m);
        if lhs > rhs {
            ss = false;
        }
        if lhs >= rhs && !(d == m && img == n) {
            st = false;
        }
    }
    (ss, ss && st)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kronecker_criterion_matches_slope_oracle(qd in 1usize..4, m in 1usize..4, n in 1usize..5, seed: u64) {
        let field = gf(2);
        let mut r = rng(seed);
        let spec = kronecker_spec(field, qd);
        let dims = DimVector::new(vec![m], vec![n]);
        let w = PointW::random(&spec, &dims, &mut r);
        let f = &w.blocks[0][0];
        let mode = Mode::default();
        let kv = kronecker_semistable(f, qd, &mode).unwrap();
        let pol = Polarization::new(vec![frac(1, m as i64)], vec![frac(1, n as i64)], &dims).unwrap();
        let gv = gred_semistable(&spec, &dims, &w, &pol, &mode).unwrap();
        let (ss, st) = kronecker_oracle(f, qd);
        prop_assert_eq!((kv.semistable, kv.stable), (ss, st));
        prop_assert_eq!((gv.semistable, gv.stable), (ss, st));
    }
}

// ---------------------------------------------------------------------------
// Closed forms

proptest! {
    #[test]
    fn rho_prime_is_invertible(m1 in 1u64..6, m2 in 1u64..6, rn in 1i64..50, rd in 1i64..20, n_off in 1u64..30) {
        let top = 3 * m1 + 6 * m2;
        let n = top.saturating_sub(n_off).max(1);
        let rho = frac(rn, rd);
        let fam = P2Family::new(m1, m2, n, rho.clone()).unwrap();
        if let Ok(rp) = rho_prime(&fam) {
            if let Ok(back) = rho_from_rho_prime(m1, m2, n, &rp) {
                prop_assert_eq!(back, rho);
            }
        }
    }

    #[test]
    fn kronecker_dimension_duality_is_an_involution(qd in 3usize..6, m in 1usize..6, n in 1usize..20) {
        if let Ok(k) = KroneckerData::new(qd, m, n) {
            if let Ok(d) = kronecker_dual_dims(k) {
                prop_assert_eq!(d.n, qd * m - n);
                prop_assert_eq!(kronecker_dual_dims(d).unwrap(), k);
            }
        }
    }
}

#[test]
fn projective_space_numbers_are_integral() {
    for n in 2..40i64 {
        let pq = pn_quotient_dims(n).unwrap();
        assert!(pq.generic_dim.is_integer() && pq.special_dim.is_integer());
        assert_eq!(pq.count % 2, 0);
    }
}

#[test]
fn hom_dimensions_match_symmetric_powers() {
    for nv in 1..4 {
        for d in 1..5 {
            let spec = sym_spec(Field::Rationals, nv, &[0], &[d]).unwrap();
            assert_eq!(spec.dim_h(0, 0) as u64, line_bundle_hom_dim(nv as u64, d));
        }
    }
    assert_eq!(line_bundle_hom_dim(3, -1), 0);
}

#[test]
fn example_values() {
    let fam = P2Family::new(1, 2, 10, q(3)).unwrap();
    assert_eq!(rho_prime(&fam).unwrap(), frac(11, 12));
    assert_eq!(fam.mutated_source(), 5);
}
