#![allow(dead_code)]

use std::sync::OnceLock;

use mutator::exactla::Field;
use mutator::mutation::theta_from_rs;
use mutator::rs_spec::{sym_spec, DimVector, RsSpec};
use num_rational::BigRational;

pub fn gf(p: u32) -> Field {
    Field::gf(p).unwrap()
}

pub fn q(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

pub fn frac(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Degree patterns `(variables, sources, targets)` for line bundle data.
pub const PATTERNS: &[(usize, &[i64], &[i64])] = &[
    (1, &[-2, -1], &[0]),
    (1, &[0], &[1, 2]),
    (1, &[-1, 0], &[1, 2]),
    (1, &[-1, 0, 0], &[1, 2]),
    (1, &[0], &[1]),
    (1, &[0], &[2]),
    (1, &[0, 1], &[2, 3]),
    (2, &[-1, 0], &[1]),
    (2, &[-2, -1], &[0]),
    (2, &[0], &[1]),
    (2, &[0], &[1, 2]),
];

#[derive(Clone, Debug)]
pub struct Case {
    pub spec: RsSpec,
    pub dims: DimVector,
    pub p: usize,
}

fn tuples(len: usize, hi: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out.into_iter().flat_map(|t| (1..=hi).map(move |x| [t.clone(), vec![x]].concat())).collect();
    }
    out
}

/// Every pattern, multiplicity choice and index `p` accepted by `theta_from_rs`
/// with `dim W ≤ max_w`.
pub fn mutation_cases(field: Field, max_w: usize) -> Vec<Case> {
    let mut out = Vec::new();
    for &(nv, a, b) in PATTERNS {
        let spec = sym_spec(field, nv, a, b).unwrap();
        for m in tuples(a.len(), 2) {
            for n in tuples(b.len(), 3) {
                let dims = DimVector::new(m.clone(), n);
                if dims.w_dim(&spec) > max_w {
                    continue;
                }
                for p in 0..spec.r {
                    if theta_from_rs(&spec, &dims, p).is_ok() {
                        out.push(Case { spec: spec.clone(), dims: dims.clone(), p });
                    }
                }
            }
        }
    }
    out
}

pub fn cached_cases(field: Field) -> &'static [Case] {
    static GF2: OnceLock<Vec<Case>> = OnceLock::new();
    static GF3: OnceLock<Vec<Case>> = OnceLock::new();
    static QQ: OnceLock<Vec<Case>> = OnceLock::new();
    let cell = match field {
        Field::Prime(2) => &GF2,
        Field::Prime(3) => &GF3,
        Field::Rationals => &QQ,
        _ => panic!("no cached cases for {field:?}"),
    };
    cell.get_or_init(|| mutation_cases(field, 40))
}

pub fn field_of(k: usize) -> Field {
    [gf(2), gf(3), Field::Rationals][k % 3]
}
