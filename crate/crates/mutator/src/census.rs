//! Exhaustive experiments over small prime fields: orbit partitions of point
//! sets, orbit correspondence under mutation, and stability transfer.

use std::collections::HashSet;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::calculators::{kronecker_dual_point, kronecker_spec};
use crate::error::{Error, Result};
use crate::exactla::{kernel_basis, Field, Mat};
use crate::groups::{GElem, Groups, Subgroup};
use crate::mutation::{
    dual_theta, h_act, in_w0_mutated, in_w0_rs, mutate_point, mutate_rs_point, mutate_rs_spec, transport_polarization,
    window_predicates, MutatedSpec, Theta, ThetaPoint,
};
use crate::rs_spec::{serialize_spec, DimVector, PointW, RsSpec};
use crate::stability::{g_semistable, kronecker_semistable, Mode, Polarization};

/// Largest point set enumerated by default.
pub const MAX_POINTS: u64 = 1 << 18;

const NONE: u32 = u32::MAX;

/// A group element as a matrix on the coordinates of `W`, over a prime field.
#[derive(Clone, Debug)]
struct LinearAction {
    p: u32,
    dim: usize,
    /// Row-major `dim × dim`.
    entries: Vec<u32>,
}

impl LinearAction {
    fn of(groups: &Groups, g: &GElem, spec: &RsSpec, dims: &DimVector) -> LinearAction {
        let p = spec.field.order().expect("finite field");
        let dim = dims.w_dim(spec);
        let mut entries = vec![0u32; dim * dim];
        for c in 0..dim {
            let e = PointW::from_index(spec, dims, (p as u64).pow((dim - 1 - c) as u32));
            let img = groups.act(g, &e);
            let flat: Vec<u32> = img.blocks.iter().flatten().flat_map(|b| b.residues().to_vec()).collect();
            for (r, v) in flat.into_iter().enumerate() {
                entries[r * dim + c] = v;
            }
        }
        LinearAction { p, dim, entries }
    }

    fn apply(&self, idx: u64, scratch: &mut Vec<u32>) -> u64 {
        let p = self.p as u64;
        scratch.clear();
        scratch.resize(self.dim, 0);
        let mut x = idx;
        for d in scratch.iter_mut().rev() {
            *d = (x % p) as u32;
            x /= p;
        }
        let mut out = 0u64;
        for r in 0..self.dim {
            let row = &self.entries[r * self.dim..(r + 1) * self.dim];
            let s: u64 = row.iter().zip(scratch.iter()).map(|(&a, &b)| a as u64 * b as u64).sum();
            out = out * p + s % p;
        }
        out
    }
}

/// Orbit partition of a `G`-stable subset of `W`.
#[derive(Clone, Debug)]
pub struct Partition {
    /// Smallest point index of the orbit, or `u32::MAX` outside the subset.
    pub root: Vec<u32>,
}

impl Partition {
    pub fn orbit_of(&self, idx: u64) -> Option<u32> {
        let r = self.root[idx as usize];
        (r != NONE).then_some(r)
    }

    /// Orbit representatives and sizes, ordered by representative.
    pub fn orbits(&self) -> Vec<(u32, u64)> {
        let mut counts = std::collections::BTreeMap::new();
        for &r in &self.root {
            if r != NONE {
                *counts.entry(r).or_insert(0u64) += 1;
            }
        }
        counts.into_iter().collect()
    }

    pub fn size(&self) -> u64 {
        self.root.iter().filter(|&&r| r != NONE).count() as u64
    }
}

fn point_total(spec: &RsSpec, dims: &DimVector, max_points: u64) -> Result<u64> {
    let p = spec.field.order().ok_or_else(|| Error::Field("census needs a finite field".into()))? as u64;
    let d = dims.w_dim(spec) as u32;
    match p.checked_pow(d) {
        Some(n) if n <= max_points && n < NONE as u64 => Ok(n),
        _ => Err(Error::Budget(format!("{p}^{d} points exceed the limit {max_points}"))),
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let next = parent[x as usize];
        parent[x as usize] = parent[next as usize];
        x = next;
    }
    x
}

/// Orbits of the subset selected by `keep`, by union-find over the images of
/// every point under a generating set of `G`.
pub fn orbit_partition<F>(spec: &RsSpec, dims: &DimVector, keep: F, max_points: u64) -> Result<Partition>
where
    F: Fn(&PointW) -> bool + Sync,
{
    let total = point_total(spec, dims, max_points)?;
    let groups = Groups::new(spec, dims);
    let actions: Vec<LinearAction> =
        groups.generators(Subgroup::Full).iter().map(|g| LinearAction::of(&groups, g, spec, dims)).collect();
    let inside: Vec<bool> = (0..total).into_par_iter().map(|k| keep(&PointW::from_index(spec, dims, k))).collect();
    let edges: Vec<Vec<u64>> = (0..total)
        .into_par_iter()
        .map_init(Vec::new, |scratch, k| {
            if inside[k as usize] {
                actions.iter().map(|a| a.apply(k, scratch)).collect()
            } else {
                Vec::new()
            }
        })
        .collect();
    let mut parent: Vec<u32> = (0..total as u32).collect();
    for (k, imgs) in edges.iter().enumerate() {
        for &t in imgs {
            if !inside[t as usize] {
                return Err(Error::Invalid("the selected subset is not stable under the group".into()));
            }
            let (a, b) = (find(&mut parent, k as u32), find(&mut parent, t as u32));
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi as usize] = lo;
        }
    }
    let root = (0..total as u32).map(|k| if inside[k as usize] { find(&mut parent, k) } else { NONE }).collect();
    Ok(Partition { root })
}

/// Same partition computed by applying every group element to every point.
pub fn orbit_partition_full<F>(spec: &RsSpec, dims: &DimVector, keep: F, max_points: u64, budget: u64) -> Result<Partition>
where
    F: Fn(&PointW) -> bool + Sync,
{
    let total = point_total(spec, dims, max_points)?;
    let groups = Groups::new(spec, dims);
    let elems = groups.enumerate(Subgroup::Full, budget)?;
    let actions: Vec<LinearAction> = elems.iter().map(|g| LinearAction::of(&groups, &g, spec, dims)).collect();
    let mut root = vec![NONE; total as usize];
    let mut scratch = Vec::new();
    for k in 0..total {
        if root[k as usize] != NONE || !keep(&PointW::from_index(spec, dims, k)) {
            continue;
        }
        let orbit: Vec<u64> = actions.iter().map(|a| a.apply(k, &mut scratch)).collect();
        for t in orbit {
            root[t as usize] = k as u32;
        }
    }
    Ok(Partition { root })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CensusReport {
    pub instance: Value,
    pub points: u64,
    pub selected: u64,
    pub group_order: Option<u128>,
    pub orbit_count: u64,
    /// `(representative index, size)`, ordered by representative.
    pub orbits: Vec<(u32, u64)>,
    pub semistable: Option<u64>,
    pub stable: Option<u64>,
    pub violations: Vec<String>,
}

impl CensusReport {
    fn new(instance: Value, points: u64, part: &Partition, group_order: Option<u128>) -> CensusReport {
        let orbits = part.orbits();
        let mut violations = Vec::new();
        if orbits.iter().map(|o| o.1).sum::<u64>() != part.size() {
            violations.push("orbit sizes do not sum to the size of the point set".into());
        }
        if let Some(g) = group_order {
            for (rep, size) in &orbits {
                if g % (*size as u128) != 0 {
                    violations.push(format!("orbit of {rep} has size {size} not dividing |G| = {g}"));
                }
            }
        }
        CensusReport {
            instance,
            points,
            selected: part.size(),
            group_order,
            orbit_count: orbits.len() as u64,
            orbits,
            semistable: None,
            stable: None,
            violations,
        }
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "instance": self.instance,
            "points": self.points,
            "selected": self.selected,
            "group_order": self.group_order.map(|g| g.to_string()),
            "orbit_count": self.orbit_count,
            "orbit_sizes": self.orbits.iter().map(|o| o.1).collect::<Vec<_>>(),
            "orbit_representatives": self.orbits.iter().map(|o| o.0).collect::<Vec<_>>(),
            "semistable": self.semistable,
            "stable": self.stable,
            "violations": self.violations,
        })
    }
}

fn instance(spec: &RsSpec, dims: &DimVector, p: Option<usize>) -> Value {
    json!({ "spec": serialize_spec(spec), "m": dims.m, "n": dims.n, "p": p })
}

/// Orbits of `G_L × G_R` on `W`, or on `W⁰_p` when `p` is given.
pub fn orbit_census(spec: &RsSpec, dims: &DimVector, p: Option<usize>, max_points: u64) -> Result<CensusReport> {
    let part = match p {
        Some(p) => orbit_partition(spec, dims, |w| in_w0_rs(spec, w, p), max_points)?,
        None => orbit_partition(spec, dims, |_| true, max_points)?,
    };
    let total = point_total(spec, dims, max_points)?;
    Ok(CensusReport::new(instance(spec, dims, p), total, &part, Groups::new(spec, dims).order(Subgroup::Full)))
}

/// Orbit census on both sides of a mutation together with the induced map on orbits.
#[derive(Clone, Debug)]
pub struct MutationCensus {
    pub source: CensusReport,
    pub target: CensusReport,
    pub mutated: MutatedSpec,
    /// Orbit of `W'⁰` hit by each orbit of `W⁰_p`, in the order of `source.orbits`.
    pub image: Vec<u32>,
    pub violations: Vec<String>,
}

impl MutationCensus {
    pub fn ok(&self) -> bool {
        self.violations.is_empty() && self.source.ok() && self.target.ok()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "source": self.source.to_json(),
            "target": self.target.to_json(),
            "image": self.image,
            "bijection": self.ok(),
            "violations": self.violations,
        })
    }
}

/// Checks that `z` sends each orbit of `W⁰_p` into a single orbit of `W'⁰`
/// and that the induced map on orbits is a bijection.
pub fn mutation_census(spec: &RsSpec, dims: &DimVector, p: usize, max_points: u64) -> Result<MutationCensus> {
    let ms = mutate_rs_spec(spec, dims, p)?;
    let source = orbit_census(spec, dims, Some(p), max_points)?;
    let tpart = orbit_partition(&ms.spec, &ms.dims, |w| in_w0_mutated(&ms, w), max_points)?;
    let ttotal = point_total(&ms.spec, &ms.dims, max_points)?;
    let target = CensusReport::new(
        instance(&ms.spec, &ms.dims, None),
        ttotal,
        &tpart,
        Groups::new(&ms.spec, &ms.dims).order(Subgroup::Full),
    );
    let total = source.points;
    let sroot: Vec<u32> = (0..total)
        .into_par_iter()
        .map(|k| {
            let w = PointW::from_index(spec, dims, k);
            if in_w0_rs(spec, &w, p) {
                let z = mutate_rs_point(spec, dims, &ms, &w)?;
                Ok(tpart.orbit_of(z.index()).unwrap_or(NONE))
            } else {
                Ok(NONE)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let spart = orbit_partition(spec, dims, |w| in_w0_rs(spec, w, p), max_points)?;
    let mut violations = Vec::new();
    let mut image = Vec::with_capacity(source.orbits.len());
    let mut image_of = std::collections::BTreeMap::new();
    for (k, &t) in sroot.iter().enumerate() {
        let Some(o) = spart.orbit_of(k as u64) else { continue };
        if t == NONE {
            violations.push(format!("z(point {k}) is outside W'⁰"));
            continue;
        }
        match image_of.get(&o) {
            None => {
                image_of.insert(o, t);
            }
            Some(&prev) if prev != t => violations.push(format!("orbit {o} meets target orbits {prev} and {t}")),
            _ => {}
        }
    }
    let mut hit = HashSet::new();
    for (rep, _) in &source.orbits {
        let t = image_of.get(rep).copied().unwrap_or(NONE);
        if !hit.insert(t) {
            violations.push(format!("target orbit {t} is hit twice"));
        }
        image.push(t);
    }
    if source.orbit_count != target.orbit_count {
        violations.push(format!("{} source orbits but {} target orbits", source.orbit_count, target.orbit_count));
    }
    Ok(MutationCensus { source, target, mutated: ms, image, violations })
}

/// Outcome of comparing semistability before and after mutation.
#[derive(Clone, Debug)]
pub struct TransferReport {
    pub source: CensusReport,
    pub target: CensusReport,
    pub transported: Polarization,
    pub violations: Vec<String>,
}

impl TransferReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "source": self.source.to_json(),
            "target": self.target.to_json(),
            "transported_polarization": self.transported.to_json(),
            "violations": self.violations,
        })
    }
}

/// Compares (semi)stability of `w` and `z(w)` over all of `W⁰_p`.
///
/// Always checks that instability is carried forward; inside the two-sided
/// window also that it is carried back, that semistable points of `W` lie in
/// `W⁰_p`, and that semistable points of the mutated space lie in `W'⁰`.
pub fn transfer_check(spec: &RsSpec, dims: &DimVector, p: usize, pol: &Polarization, max_points: u64, mode: &Mode) -> Result<TransferReport> {
    let win = window_predicates(pol, dims, p);
    if !win.instability_forward {
        return Err(Error::Precondition("Σ_(i<p) λ_i m_i ≤ μ_1 fails; nothing to check".into()));
    }
    let ms = mutate_rs_spec(spec, dims, p)?;
    let tp = transport_polarization(pol, spec, dims, p)?.polarization();
    let total = point_total(spec, dims, max_points)?;
    let ttotal = point_total(&ms.spec, &ms.dims, max_points)?;
    let spart = orbit_partition(spec, dims, |w| in_w0_rs(spec, w, p), max_points)?;
    let tpart = orbit_partition(&ms.spec, &ms.dims, |w| in_w0_mutated(&ms, w), max_points)?;

    // Semistability is constant on orbits; evaluate at representatives.
    let all_src = orbit_partition(spec, dims, |_| true, max_points)?;
    let all_tgt = orbit_partition(&ms.spec, &ms.dims, |_| true, max_points)?;
    let verdicts = |sp: &RsSpec, dv: &DimVector, part: &Partition, pl: &Polarization| -> Result<std::collections::BTreeMap<u32, (bool, bool)>> {
        let reps: Vec<u32> = part.orbits().into_iter().map(|o| o.0).collect();
        let vs = reps
            .par_iter()
            .map(|&r| g_semistable(sp, dv, &PointW::from_index(sp, dv, r as u64), pl, mode).map(|v| (r, (v.semistable, v.stable))))
            .collect::<Result<Vec<_>>>()?;
        Ok(vs.into_iter().collect())
    };
    let vsrc = verdicts(spec, dims, &all_src, pol)?;
    let vtgt = verdicts(&ms.spec, &ms.dims, &all_tgt, &tp)?;
    let src_v = |k: u64| vsrc[&all_src.root[k as usize]];
    let tgt_v = |k: u64| vtgt[&all_tgt.root[k as usize]];

    let mut violations = Vec::new();
    let mut source = CensusReport::new(instance(spec, dims, Some(p)), total, &spart, Groups::new(spec, dims).order(Subgroup::Full));
    let mut target = CensusReport::new(instance(&ms.spec, &ms.dims, None), ttotal, &tpart, Groups::new(&ms.spec, &ms.dims).order(Subgroup::Full));
    let (mut ss, mut st) = (0, 0);
    for k in 0..total {
        let (a, b) = src_v(k);
        ss += a as u64;
        st += b as u64;
        let w = PointW::from_index(spec, dims, k);
        let inside = in_w0_rs(spec, &w, p);
        if win.semistable_in_open_set && a && !inside {
            violations.push(format!("semistable point {k} is outside W⁰_p"));
        }
        if !inside {
            continue;
        }
        let z = mutate_rs_point(spec, dims, &ms, &w)?;
        let (a2, b2) = tgt_v(z.index());
        if !a && a2 {
            violations.push(format!("point {k}: unstable but z(w) semistable"));
        }
        if !b && b2 {
            violations.push(format!("point {k}: not stable but z(w) stable"));
        }
        if win.instability_back && a && !a2 {
            violations.push(format!("point {k}: semistable but z(w) unstable"));
        }
        if win.instability_back && b && !b2 {
            violations.push(format!("point {k}: stable but z(w) not stable"));
        }
    }
    source.semistable = Some(ss);
    source.stable = Some(st);
    let (mut ss2, mut st2) = (0, 0);
    for k in 0..ttotal {
        let (a, b) = tgt_v(k);
        ss2 += a as u64;
        st2 += b as u64;
        if win.mutated_semistable_in_open_set && a && tpart.orbit_of(k).is_none() {
            violations.push(format!("semistable mutated point {k} is outside W'⁰"));
        }
    }
    target.semistable = Some(ss2);
    target.stable = Some(st2);
    Ok(TransferReport { source, target, transported: tp, violations })
}

// ---------------------------------------------------------------------------
// Abstract checks over a prime field

/// Every vector of length `n`, as columns, first coordinate most significant.
pub fn all_vectors(field: Field, n: usize, limit: u64) -> Result<Vec<Mat>> {
    let p = field.order().ok_or_else(|| Error::Field("enumeration needs a finite field".into()))? as u64;
    let count = p.checked_pow(n as u32).filter(|&c| c <= limit).ok_or_else(|| Error::Budget(format!("{p}^{n} vectors exceed {limit}")))?;
    Ok((0..count)
        .map(|mut k| {
            let mut d = vec![0u32; n];
            for x in d.iter_mut().rev() {
                *x = (k % p) as u32;
                k /= p;
            }
            Mat::from_residues(field, n, 1, d)
        })
        .collect())
}

/// All combinations of the rows of `basis`.
fn span(basis: &Mat, limit: u64) -> Result<Vec<Mat>> {
    let coeffs = all_vectors(basis.field(), basis.rows(), limit)?;
    Ok(coeffs.iter().map(|c| c.transpose().mul(basis)).collect())
}

/// The orbit of `z` under the unipotent group of `th`.
pub fn h_orbit(th: &Theta, z: &ThetaPoint, limit: u64) -> Result<HashSet<ThetaPoint>> {
    let hls = all_vectors(th.field, th.hl, limit)?;
    let psis = all_vectors(th.field, th.m * th.hr, limit)?;
    if (hls.len() as u64).saturating_mul(psis.len() as u64) > limit {
        return Err(Error::Budget("unipotent group too large".into()));
    }
    let mut out = HashSet::new();
    for hl in &hls {
        for psi in &psis {
            out.insert(h_act(th, z, hl, &psi.reshape(th.m, th.hr)));
        }
    }
    Ok(out)
}

/// All `z(w, u, α)` as `u` and `α` range over their solution sets.
pub fn choice_set(th: &Theta, w: &ThetaPoint, limit: u64) -> Result<HashSet<ThetaPoint>> {
    let d = dual_theta(th)?;
    let base = mutate_point(th, &d, w, None, None)?;
    let ku = span(kernel_basis(&th.gamma4).basis(), limit)?;
    // α + a with a having every column in ker φ̄2.
    let ka = kernel_basis(&w.phi2.transpose());
    let cols = span(ka.basis(), limit)?;
    let per = cols.len() as u64;
    let count = per.checked_pow(th.x1 as u32).filter(|&c| c.saturating_mul(ku.len() as u64) <= limit).ok_or_else(|| Error::Budget("choice set too large".into()))?;
    let mut out = HashSet::new();
    for k in &ku {
        let u = base.u.add(&k.reshape(th.hr, th.x2));
        for mut idx in 0..count {
            let mut a = base.alpha.clone();
            for c in 0..th.x1 {
                let v = &cols[(idx % per) as usize];
                idx /= per;
                for r in 0..th.x2 {
                    a.add_at(r, c, &v.get(0, r));
                }
            }
            out.insert(mutate_point(th, &d, w, Some(&u), Some(&a))?.point);
        }
    }
    Ok(out)
}

/// Whether the choice set of `w` is exactly one orbit of the unipotent group of `D(Θ)`.
pub fn choice_set_is_orbit(th: &Theta, w: &ThetaPoint, limit: u64) -> Result<bool> {
    let d = dual_theta(th)?;
    let z = mutate_point(th, &d, w, None, None)?;
    Ok(choice_set(th, w, limit)? == h_orbit(&d.theta, &z.point, limit)?)
}

/// For every unipotent `(h_L, ψ)`: `z` of the translate lies in the unipotent
/// orbit of `z(w)`, and for pure translates the adjusted choices
/// reproduce `z(w)` exactly. Returns the failures.
pub fn shift_check(th: &Theta, w: &ThetaPoint, limit: u64) -> Result<Vec<String>> {
    let d = dual_theta(th)?;
    let z = mutate_point(th, &d, w, None, None)?;
    let orbit = h_orbit(&d.theta, &z.point, limit)?;
    let f = th.field;
    let hls = all_vectors(f, th.hl, limit)?;
    let psis: Vec<Mat> = all_vectors(f, th.m * th.hr, limit)?.into_iter().map(|v| v.reshape(th.m, th.hr)).collect();
    let (zh, zp) = (Mat::zeros(f, th.hl, 1), Mat::zeros(f, th.m, th.hr));
    let mut bad = Vec::new();
    for (a, hl) in hls.iter().enumerate() {
        for (b, psi) in psis.iter().enumerate() {
            let ws = h_act(th, w, hl, psi);
            if !orbit.contains(&mutate_point(th, &d, &ws, None, None)?.point) {
                bad.push(format!("shift ({a}, {b}) leaves the orbit"));
            }
        }
        let ws = h_act(th, w, hl, &zp);
        let a2 = z.alpha.add(&th.gamma1_of(hl));
        if mutate_point(th, &d, &ws, Some(&z.u), Some(&a2))?.point != z.point {
            bad.push(format!("h_L shift {a}: α + γ̄1(h_L) does not reproduce z(w)"));
        }
    }
    for (b, psi) in psis.iter().enumerate() {
        let ws = h_act(th, w, &zh, psi);
        let u2 = z.u.sub(&w.phi2.mul(psi).transpose());
        if mutate_point(th, &d, &ws, Some(&u2), Some(&z.alpha))?.point != z.point {
            bad.push(format!("ψ shift {b}: u − ψ(φ2) does not reproduce z(w)"));
        }
    }
    Ok(bad)
}

// ---------------------------------------------------------------------------
// Kronecker modules

/// Orbit correspondence and semistability comparison for Kronecker duality.
#[derive(Clone, Debug)]
pub struct KroneckerCensus {
    pub source: CensusReport,
    pub target: CensusReport,
    pub violations: Vec<String>,
}

impl KroneckerCensus {
    pub fn ok(&self) -> bool {
        self.violations.is_empty() && self.source.ok() && self.target.ok()
    }

    pub fn to_json(&self) -> Value {
        json!({ "source": self.source.to_json(), "target": self.target.to_json(), "violations": self.violations })
    }
}

pub fn kronecker_census(field: Field, q: usize, m: usize, n: usize, max_points: u64) -> Result<KroneckerCensus> {
    if q * m <= n {
        return Err(Error::Precondition(format!("need q·m > n, got {q}·{m} ≤ {n}")));
    }
    let spec = kronecker_spec(field, q);
    let dims = DimVector::new(vec![m], vec![n]);
    let ddims = DimVector::new(vec![m], vec![q * m - n]);
    let onto = |w: &PointW| w.blocks[0][0].rank() == w.blocks[0][0].rows();
    let spart = orbit_partition(&spec, &dims, onto, max_points)?;
    let tpart = orbit_partition(&spec, &ddims, onto, max_points)?;
    let order = |d: &DimVector| Groups::new(&spec, d).order(Subgroup::Full);
    let src = CensusReport::new(instance(&spec, &dims, None), point_total(&spec, &dims, max_points)?, &spart, order(&dims));
    let tgt = CensusReport::new(instance(&spec, &ddims, None), point_total(&spec, &ddims, max_points)?, &tpart, order(&ddims));
    let mode = Mode::default();
    let mut violations = Vec::new();
    let mut image_of = std::collections::BTreeMap::new();
    for k in 0..src.points {
        let Some(o) = spart.orbit_of(k) else { continue };
        let f = PointW::from_index(&spec, &dims, k).blocks[0][0].clone();
        let g = kronecker_dual_point(&f)?;
        let t = tpart.orbit_of(PointW { blocks: vec![vec![g.clone()]] }.index()).unwrap_or(NONE);
        if *image_of.entry(o).or_insert(t) != t {
            violations.push(format!("orbit {o} meets several dual orbits"));
        }
        if o as u64 == k {
            let a = kronecker_semistable(&f, q, &mode)?;
            let b = kronecker_semistable(&g, q, &mode)?;
            if (a.semistable, a.stable) != (b.semistable, b.stable) {
                violations.push(format!("orbit {o}: (semi)stability differs from its dual"));
            }
        }
    }
    let hit: HashSet<u32> = image_of.values().copied().collect();
    if hit.len() != image_of.len() || hit.contains(&NONE) || hit.len() as u64 != tgt.orbit_count {
        violations.push("dual map on orbits is not a bijection".into());
    }
    Ok(KroneckerCensus { source: src, target: tgt, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mutation::{point_to_theta, theta_from_rs};
    use crate::rs_spec::sym_spec;

    fn gf(p: u32) -> Field {
        Field::gf(p).unwrap()
    }

    #[test]
    fn single_line_has_two_orbits() {
        let spec = kronecker_spec(gf(2), 1);
        let dims = DimVector::new(vec![1], vec![1]);
        let all = orbit_census(&spec, &dims, None, MAX_POINTS).unwrap();
        assert_eq!((all.points, all.orbit_count), (2, 2));
        let w0 = orbit_census(&spec, &dims, Some(0), MAX_POINTS).unwrap();
        assert_eq!((w0.selected, w0.orbit_count), (1, 1));
    }

    #[test]
    fn generator_orbits_match_full_enumeration() {
        let spec = sym_spec(gf(2), 1, &[-2, -1], &[0]).unwrap();
        let dims = DimVector::new(vec![1, 1], vec![2]);
        let a = orbit_partition(&spec, &dims, |_| true, MAX_POINTS).unwrap();
        let b = orbit_partition_full(&spec, &dims, |_| true, MAX_POINTS, 1 << 12).unwrap();
        assert_eq!(a.root, b.root);
    }

    #[test]
    fn small_mutation_census_is_bijective() {
        let spec = sym_spec(gf(2), 1, &[0], &[1, 2]).unwrap();
        let dims = DimVector::new(vec![1], vec![1, 2]);
        let mc = mutation_census(&spec, &dims, 0, MAX_POINTS).unwrap();
        assert!(mc.ok(), "{:?}", mc.violations);
        assert_eq!((mc.source.points, mc.target.points), (1 << 8, 1 << 6));
    }

    #[test]
    fn choice_sets_are_unipotent_orbits() {
        let spec = sym_spec(gf(2), 1, &[-1, 0], &[1, 2]).unwrap();
        let dims = DimVector::new(vec![1, 1], vec![1, 1]);
        let (th, lay) = theta_from_rs(&spec, &dims, 1).unwrap();
        let mut seen = 0;
        for k in (0..1 << 12).step_by(97) {
            let w = point_to_theta(&spec, &dims, &lay, &PointW::from_index(&spec, &dims, k)).unwrap();
            if w.in_w0() {
                seen += 1;
                assert!(choice_set_is_orbit(&th, &w, 1 << 16).unwrap());
                assert!(shift_check(&th, &w, 1 << 16).unwrap().is_empty());
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn kronecker_duality_on_orbits() {
        let kc = kronecker_census(gf(2), 3, 1, 2, MAX_POINTS).unwrap();
        assert!(kc.ok(), "{:?}", kc.violations);
        assert_eq!(kc.source.orbit_count, 7);
    }
}
