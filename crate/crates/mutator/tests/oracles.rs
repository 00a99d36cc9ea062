//! Orbit counts recomputed by Burnside's lemma and compared with the
//! union-find census.

mod common;

use common::gf;
use mutator::calculators::kronecker_spec;
use mutator::census::{kronecker_census, mutation_census, orbit_census, MAX_POINTS};
use mutator::groups::{GElem, Groups, Subgroup};
use mutator::mutation::{in_w0_mutated, in_w0_rs};
use mutator::rs_spec::{point_count, sym_spec, DimVector, PointW, RsSpec};
use rayon::prelude::*;

/// Number of orbits on the selected points: the average number of fixed points.
fn burnside(spec: &RsSpec, dims: &DimVector, keep: impl Fn(&PointW) -> bool) -> u64 {
    let g = Groups::new(spec, dims);
    let elems: Vec<GElem> = g.enumerate(Subgroup::Full, 1 << 16).unwrap().iter().collect();
    let total = point_count(spec, dims).unwrap();
    let pts: Vec<PointW> = (0..total).map(|k| PointW::from_index(spec, dims, k)).filter(|w| keep(w)).collect();
    let fixed: u64 = elems.par_iter().map(|e| pts.iter().filter(|w| g.act(e, w) == **w).count() as u64).sum();
    let order = elems.len() as u64;
    assert_eq!(fixed % order, 0, "fixed point total is not divisible by |G|");
    fixed / order
}

fn surjective(w: &PointW) -> bool {
    let f = &w.blocks[0][0];
    f.rank() == f.rows()
}

#[test]
fn whole_space_orbits() {
    let cases = [
        (sym_spec(gf(2), 1, &[0], &[1]).unwrap(), DimVector::new(vec![1], vec![2])),
        (sym_spec(gf(2), 1, &[0], &[2]).unwrap(), DimVector::new(vec![1], vec![1])),
        (sym_spec(gf(3), 1, &[0], &[1]).unwrap(), DimVector::new(vec![1], vec![2])),
        (sym_spec(gf(2), 0, &[0, 1], &[2]).unwrap(), DimVector::new(vec![1, 1], vec![2])),
        (kronecker_spec(gf(2), 2), DimVector::new(vec![2], vec![2])),
    ];
    for (spec, dims) in cases {
        let c = orbit_census(&spec, &dims, None, MAX_POINTS).unwrap();
        assert!(c.ok(), "{:?}", c.violations);
        assert_eq!(c.orbit_count, burnside(&spec, &dims, |_| true));
    }
}

#[test]
fn two_sources_fixture_has_53_orbits_on_each_side() {
    let spec = sym_spec(gf(2), 1, &[-2, -1], &[0]).unwrap();
    let dims = DimVector::new(vec![1, 1], vec![2]);
    let mc = mutation_census(&spec, &dims, 0, MAX_POINTS).unwrap();
    assert!(mc.ok(), "{:?}", mc.violations);
    let expected = burnside(&spec, &dims, |w| in_w0_rs(&spec, w, 0));
    assert_eq!(expected, 53);
    assert_eq!(mc.source.orbit_count, expected);
    assert_eq!(mc.target.orbit_count, expected);
}

#[test]
fn two_targets_fixture_matches_on_both_sides() {
    let spec = sym_spec(gf(2), 1, &[0], &[1, 2]).unwrap();
    let dims = DimVector::new(vec![1], vec![1, 2]);
    let mc = mutation_census(&spec, &dims, 0, MAX_POINTS).unwrap();
    assert!(mc.ok(), "{:?}", mc.violations);
    let src = burnside(&spec, &dims, |w| in_w0_rs(&spec, w, 0));
    let ms = &mc.mutated;
    let tgt = burnside(&ms.spec, &ms.dims, |w| in_w0_mutated(ms, w));
    assert_eq!(mc.source.orbit_count, src);
    assert_eq!(mc.target.orbit_count, tgt);
    assert_eq!(src, tgt);
}

#[test]
fn kronecker_orbits_of_surjections() {
    let kc = kronecker_census(gf(2), 3, 1, 2, MAX_POINTS).unwrap();
    assert!(kc.ok(), "{:?}", kc.violations);
    let spec = kronecker_spec(gf(2), 3);
    // Surjections F^3 → F^2 up to GL_2 are classified by their kernel line.
    assert_eq!(burnside(&spec, &DimVector::new(vec![1], vec![2]), surjective), 7);
    assert_eq!(kc.source.orbit_count, 7);
    assert_eq!(kc.target.orbit_count, burnside(&spec, &DimVector::new(vec![1], vec![1]), surjective));
}
