//! Energy functionals: `I_{Γ,Ω}`, `B_Γ`, the restricted Hamiltonian
//! `H_Γ = I_{Γ,Γ} + 2·I_{Γ,ℤ^d∖Γ} + B_Γ`, the periodic functional
//! `G^{A,B}_{m,ω} = I_{F,ℤ^d} + B_{F^{A,B}}` and incremental differences.
//!
//! Infinite sums over `ℤ^d` are truncated at `|j − i|_∞ ≤ ρ` and carry the
//! certificate `4·|Γ|·σ(ρ + 1)`. Finite-range couplings need no certificate.

use crate::configuration::{Closure, Configuration, SpinField};
use crate::error::{Error, Result};
use crate::kernels::{for_each_in_box, CouplingSpec, CouplingTable, FieldSpec};
use crate::lattice::{Endpoints, QuotientLattice, Site, SlabSpec};
use crate::scalar::{KahanSum, Scalar};
use serde::Serialize;
use std::collections::HashSet;

pub use crate::configuration::{max_config, min_config, translate_config};

/// Result of an energy evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport<T: Scalar = f64> {
    pub interaction: T,
    pub magnetic: T,
    pub total: T,
    /// Upper bound on the truncated remainder.
    pub tail_bound: T,
    pub pair_count: u64,
}

/// Truncation radius for infinite sums.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvalOptions {
    /// `None` selects `max(8τ, 32)`.
    pub radius: Option<i64>,
}

impl EvalOptions {
    pub fn with_radius(r: i64) -> Self {
        Self { radius: Some(r) }
    }
}

/// `ρ = max(8τ, 32)`.
pub fn default_radius<T: Scalar>(spec: &CouplingSpec<T>) -> i64 {
    (8 * spec.period().max(1)).max(32)
}

/// Effective ℓ∞ radius of explicit summation and whether a tail remains.
pub fn effective_radius<T: Scalar>(spec: &CouplingSpec<T>, opts: &EvalOptions) -> (i64, bool) {
    let rho = opts.radius.unwrap_or_else(|| default_radius(spec));
    match spec.range() {
        Some(r) if r <= rho => (r, false),
        _ => (rho, true),
    }
}

fn tail_certificate<T: Scalar>(spec: &CouplingSpec<T>, dim: usize, n: usize, rho: i64, has_tail: bool) -> Result<T> {
    if !has_tail || n == 0 {
        return Ok(T::zero());
    }
    Ok(T::c(4.0 * n as f64) * spec.sigma(dim, rho + 1)?)
}

/// Second argument of `I_{Γ,Ω}`.
#[derive(Clone, Copy, Debug)]
pub enum Region<'a> {
    Sites(&'a [Site]),
    /// `ℤ^d ∖ S`.
    Complement(&'a [Site]),
    All,
}

fn ensure_dim<T: Scalar>(spec: &CouplingSpec<T>, dim: usize) -> Result<()> {
    match spec.fixed_dim() {
        Some(fd) if fd != dim => Err(Error::Precondition(format!("spec is {fd}-dimensional, configuration is {dim}"))),
        _ => Ok(()),
    }
}

/// Pair evaluator: a coupling table when the coupling is periodic, direct calls otherwise.
struct Couplings<'a, T: Scalar> {
    spec: &'a CouplingSpec<T>,
    table: Option<CouplingTable<T>>,
}

impl<'a, T: Scalar> Couplings<'a, T> {
    fn new(spec: &'a CouplingSpec<T>, dim: usize, radius: i64) -> Self {
        let table = CouplingTable::new(spec, dim, radius).ok();
        Self { spec, table }
    }

    #[inline]
    fn j(&self, i: &Site, j: &Site) -> T {
        match &self.table {
            Some(t) => {
                let k = *j - *i;
                if t.offset_index(&k).is_some() {
                    t.get(i, &k)
                } else {
                    self.spec.coupling(i, j)
                }
            }
            None => self.spec.coupling(i, j),
        }
    }
}

/// Calls `f(j, J_ij)` for every `j ≠ i` with `|j − i|_∞ ≤ ρ` and `J_ij ≠ 0`.
fn for_each_partner<T: Scalar, F: FnMut(Site, T)>(
    spec: &CouplingSpec<T>,
    table: Option<&CouplingTable<T>>,
    i: &Site,
    d: usize,
    rho: i64,
    mut f: F,
) {
    match table {
        Some(t) => {
            let c = if t.period() == 1 { 0 } else { i.class_index(t.period()) };
            let row = t.row(c);
            let mut o = 0usize;
            for_each_in_box(d, t.radius(), |k| {
                let jv = row[o];
                o += 1;
                if jv != T::zero() && !k.is_zero() {
                    f(*i + *k, jv);
                }
            });
        }
        None => {
            let r = spec.range().map_or(rho, |x| x.min(rho));
            for_each_in_box(d, r, |k| {
                if k.is_zero() {
                    return;
                }
                let j = *i + *k;
                let jv = spec.coupling(i, &j);
                if jv != T::zero() {
                    f(j, jv);
                }
            });
        }
    }
}

/// Visits the sites of the box `[a, b]` clipped to the field, with their dense index.
fn scan_box<F: FnMut(usize, &Site)>(sf: &SpinField, a: Site, b: Site, mut f: F) {
    let d = sf.lo.dim();
    let mut lo = a;
    let mut hi = b;
    for n in 0..d {
        lo.set(n, a.get(n).max(sf.lo.get(n)));
        hi.set(n, b.get(n).min(sf.lo.get(n) + sf.dims[n] as i64 - 1));
        if lo.get(n) > hi.get(n) {
            return;
        }
    }
    let mut cur = lo;
    loop {
        let mut idx = 0usize;
        for n in 0..d {
            idx = idx * sf.dims[n] + (cur.get(n) - sf.lo.get(n)) as usize;
        }
        f(idx, &cur);
        let mut n = d;
        loop {
            if n == 0 {
                return;
            }
            n -= 1;
            if cur.get(n) < hi.get(n) {
                cur.set(n, cur.get(n) + 1);
                break;
            }
            cur.set(n, lo.get(n));
        }
    }
}

fn bbox(sites: &[Site]) -> (Site, Site) {
    let d = sites[0].dim();
    let mut lo = sites[0];
    let mut hi = sites[0];
    for s in sites {
        for n in 0..d {
            lo.set(n, lo.get(n).min(s.get(n)));
            hi.set(n, hi.get(n).max(s.get(n)));
        }
    }
    (lo, hi)
}

fn grow(s: Site, r: i64) -> Site {
    let mut out = s;
    for n in 0..s.dim() {
        out.set(n, s.get(n) + r);
    }
    out
}

/// Dense membership mask of a finite site set.
struct Mask {
    field: SpinField,
}

impl Mask {
    fn new(sites: &[Site], lo: Site, hi: Site) -> Self {
        let d = lo.dim();
        let dims: Vec<usize> = (0..d).map(|n| (hi.get(n) - lo.get(n) + 1) as usize).collect();
        let mut field = SpinField { lo, dims: dims.clone(), values: vec![0; dims.iter().product()] };
        for s in sites {
            if let Some(k) = field.index(s) {
                field.values[k] = 1;
            }
        }
        Self { field }
    }

    #[inline]
    fn contains(&self, s: &Site) -> bool {
        self.field.get(s) == Some(1)
    }
}

fn check_finite(gamma: &[Site]) -> Result<()> {
    let set: HashSet<&Site> = gamma.iter().collect();
    if set.len() != gamma.len() {
        return Err(Error::Precondition("site set contains duplicates".into()));
    }
    Ok(())
}

/// `I_{Γ,Ω}(u) = Σ_{i∈Γ, j∈Ω} J_ij (1 − u_i u_j)`.
pub fn interaction_energy<T: Scalar>(
    u: &Configuration,
    gamma: &[Site],
    omega: Region<'_>,
    spec: &CouplingSpec<T>,
    opts: &EvalOptions,
) -> Result<EnergyReport<T>> {
    check_finite(gamma)?;
    ensure_dim(spec, u.dim())?;
    let zero = EnergyReport { interaction: T::zero(), magnetic: T::zero(), total: T::zero(), tail_bound: T::zero(), pair_count: 0 };
    if gamma.is_empty() {
        return Ok(zero);
    }
    let d = u.dim();
    let mut acc = KahanSum::new();
    let mut pairs = 0u64;
    match omega {
        Region::Sites(om) => {
            if om.is_empty() {
                return Ok(zero);
            }
            let (lo, hi) = bbox(&[gamma, om].concat());
            let diam = (hi - lo).linf_norm();
            let reach = spec.range().map_or(diam, |r| r.min(diam));
            let cp = Couplings::new(spec, d, reach);
            let sf = SpinField::new(u, lo, hi);
            let mask = Mask::new(om, lo, hi);
            let mut g_sorted = gamma.to_vec();
            g_sorted.sort();
            for i in &g_sorted {
                let ui = sf.get(i).unwrap();
                scan_box(&sf, grow(*i, -reach), grow(*i, reach), |idx, j| {
                    if mask.field.values[idx] == 1 && sf.values[idx] != ui {
                        acc.add(T::c(2.0) * cp.j(i, j));
                        pairs += 1;
                    }
                });
            }
            let v = acc.value();
            Ok(EnergyReport { interaction: v, magnetic: T::zero(), total: v, tail_bound: T::zero(), pair_count: pairs })
        }
        Region::Complement(_) | Region::All => {
            let excluded: &[Site] = if let Region::Complement(s) = omega { s } else { &[] };
            let (rho, has_tail) = effective_radius(spec, opts);
            let (glo, ghi) = bbox(gamma);
            let sf = SpinField::new(u, grow(glo, -rho), grow(ghi, rho));
            let ex = if excluded.is_empty() { None } else { Some(Mask::new(excluded, grow(glo, -rho), grow(ghi, rho))) };
            let table = CouplingTable::new(spec, d, rho).ok();
            let mut g_sorted = gamma.to_vec();
            g_sorted.sort();
            for i in &g_sorted {
                let ui = sf.get(i).unwrap();
                for_each_partner(spec, table.as_ref(), i, d, rho, |j, jv| {
                    if ex.as_ref().is_some_and(|m| m.contains(&j)) {
                        return;
                    }
                    if sf.get(&j).unwrap() != ui {
                        acc.add(T::c(2.0) * jv);
                        pairs += 1;
                    }
                });
            }
            let v = acc.value();
            let tail = tail_certificate(spec, d, gamma.len(), rho, has_tail)? / T::c(2.0);
            Ok(EnergyReport { interaction: v, magnetic: T::zero(), total: v, tail_bound: tail, pair_count: pairs })
        }
    }
}

/// `B_Γ(u) = Σ_{i∈Γ} h_i u_i`.
pub fn magnetic_energy<T: Scalar>(u: &Configuration, gamma: &[Site], field: &FieldSpec<T>) -> Result<T> {
    check_finite(gamma)?;
    let mut sorted = gamma.to_vec();
    sorted.sort();
    let mut acc = KahanSum::new();
    for i in &sorted {
        acc.add(field.field(i) * T::int(u.spin(i) as i64));
    }
    Ok(acc.value())
}

/// `H_Γ(u) = I_{Γ,Γ} + 2·I_{Γ,ℤ^d∖Γ} + B_Γ`. Pairs inside Γ are summed exactly;
/// pairs leaving Γ are truncated at ρ.
pub fn restricted_hamiltonian<T: Scalar>(
    u: &Configuration,
    gamma: &[Site],
    spec: &CouplingSpec<T>,
    field: &FieldSpec<T>,
    opts: &EvalOptions,
) -> Result<EnergyReport<T>> {
    check_finite(gamma)?;
    ensure_dim(spec, u.dim())?;
    if gamma.is_empty() {
        return Ok(EnergyReport { interaction: T::zero(), magnetic: T::zero(), total: T::zero(), tail_bound: T::zero(), pair_count: 0 });
    }
    let d = u.dim();
    let (rho, has_tail) = effective_radius(spec, opts);
    let (glo, ghi) = bbox(gamma);
    let diam = (ghi - glo).linf_norm();
    let reach = match spec.range() {
        Some(r) => r.min(diam.max(rho)),
        None => diam.max(rho),
    };
    let lo = grow(glo, -rho);
    let hi = grow(ghi, rho);
    let sf = SpinField::new(u, lo, hi);
    let mask = Mask::new(gamma, lo, hi);
    let cp = Couplings::new(spec, d, reach);
    let mut sorted = gamma.to_vec();
    sorted.sort();
    let mut acc = KahanSum::new();
    let mut pairs = 0u64;
    let two = T::c(2.0);
    let four = T::c(4.0);
    // Inside Γ any distance, outside within ρ.
    let scan = reach.max(rho);
    for i in &sorted {
        let ui = sf.get(i).unwrap();
        scan_box(&sf, grow(*i, -scan), grow(*i, scan), |idx, j| {
            if sf.values[idx] == ui {
                return;
            }
            let k = (*j - *i).linf_norm();
            if mask.field.values[idx] == 1 {
                if k > reach {
                    return;
                }
                acc.add(two * cp.j(i, j));
            } else {
                if k > rho {
                    return;
                }
                acc.add(four * cp.j(i, j));
            }
            pairs += 1;
        });
    }
    let interaction = acc.value();
    let magnetic = magnetic_energy(u, gamma, field)?;
    let tail = tail_certificate(spec, d, gamma.len(), rho, has_tail)?;
    Ok(EnergyReport { interaction, magnetic, total: interaction + magnetic, tail_bound: tail, pair_count: pairs })
}

/// `H_Γ(u') − H_Γ(u)` where `u'` flips `flips ⊆ Γ`, under the same truncation as
/// `restricted_hamiltonian`.
pub fn energy_delta<T: Scalar>(
    u: &Configuration,
    flips: &[Site],
    gamma: &[Site],
    spec: &CouplingSpec<T>,
    field: &FieldSpec<T>,
    opts: &EvalOptions,
) -> Result<T> {
    if flips.is_empty() {
        return Ok(T::zero());
    }
    check_finite(flips)?;
    let gset: HashSet<Site> = gamma.iter().copied().collect();
    if let Some(f) = flips.iter().find(|f| !gset.contains(f)) {
        return Err(Error::Precondition(format!("flip site {f} is not in Gamma")));
    }
    let d = u.dim();
    let (rho, _) = effective_radius(spec, opts);
    let (glo, ghi) = bbox(gamma);
    let diam = (ghi - glo).linf_norm();
    let reach = match spec.range() {
        Some(r) => r.min(diam.max(rho)),
        None => diam.max(rho),
    };
    let cp = Couplings::new(spec, d, reach.max(rho));
    let fset: HashSet<Site> = flips.iter().copied().collect();
    let mut sorted = flips.to_vec();
    sorted.sort();
    let mut acc = KahanSum::new();
    let four = T::c(4.0);
    for f in &sorted {
        let uf = u.spin(f) as i64;
        // Γ partners at any distance.
        let mut gs: Vec<&Site> = gamma.iter().filter(|j| !fset.contains(j)).collect();
        gs.sort();
        for j in gs {
            if (*j - *f).linf_norm() > reach {
                continue;
            }
            acc.add(four * cp.j(f, j) * T::int(uf * u.spin(j) as i64));
        }
        for_each_in_box(d, rho, |k| {
            let j = *f + *k;
            if k.is_zero() || gset.contains(&j) {
                return;
            }
            if spec.range().is_some_and(|r| k.l1_norm() > r) {
                return;
            }
            acc.add(four * cp.j(f, &j) * T::int(uf * u.spin(&j) as i64));
        });
        acc.add(-T::c(2.0) * field.field(f) * T::int(uf));
    }
    Ok(acc.value())
}

/// `G^{A,B}_{m,ω}(u) = I_{F,ℤ^d}(u) + B_{F^{A,B}}(u)` for an admissible periodic `u`.
/// Pairs are truncated at ℓ∞ distance ρ (exact for finite range ≤ ρ). The free
/// region is `A < (ω/|ω|)·i ≤ B`; `+1` is fixed at heights `≤ A`, `−1` above `B`.
pub fn periodic_functional<T: Scalar>(
    u: &Configuration,
    q: &QuotientLattice,
    slab: &SlabSpec,
    spec: &CouplingSpec<T>,
    field: &FieldSpec<T>,
    opts: &EvalOptions,
) -> Result<EnergyReport<T>> {
    check_admissible(u, q, slab)?;
    ensure_dim(spec, u.dim())?;
    let d = u.dim();
    let (rho, has_tail) = effective_radius(spec, opts);
    let band = SlabSpec::new(slab.a - rho, slab.b + rho)?;
    let reps = q.fundamental_domain(&band, Endpoints::Closed);
    let table = CouplingTable::new(spec, d, rho).ok();
    let mut acc = KahanSum::new();
    let mut pairs = 0u64;
    for i in &reps {
        let ui = u.spin(i);
        for_each_partner(spec, table.as_ref(), i, d, rho, |j, jv| {
            if u.spin(&j) != ui {
                acc.add(T::c(2.0) * jv);
                pairs += 1;
            }
        });
    }
    let free = q.fundamental_domain(slab, Endpoints::LeftOpen);
    let magnetic = magnetic_energy(u, &free, field)?;
    let interaction = acc.value();
    let tail = tail_certificate(spec, d, free.len(), rho, has_tail)?;
    Ok(EnergyReport { interaction, magnetic, total: interaction + magnetic, tail_bound: tail, pair_count: pairs })
}

/// Rejects configurations outside the admissible class `A^{A,B}_{m,ω}`.
pub fn check_admissible(u: &Configuration, q: &QuotientLattice, slab: &SlabSpec) -> Result<()> {
    match u.closure() {
        Closure::Periodic { lattice, slab: s } if **lattice == *q && s == slab => {}
        _ => {
            return Err(Error::Precondition(
                "configuration is not (m,omega)-periodic with the admissible closure of this slab".into(),
            ))
        }
    }
    let dir = &q.direction;
    for k in 0..u.window().len() {
        let s = u.window().site_at(k);
        if !slab.contains(dir, &s, Endpoints::LeftOpen) || q.representative(&s) != s {
            return Err(Error::Precondition(format!("window site {s} is not a free representative of the slab")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Cube;

    fn s2(a: i64, b: i64) -> Site {
        Site::new(&[a, b])
    }

    #[test]
    fn single_minus_site_costs_eight_lambda() {
        let cube = Cube::new(s2(0, 0), 2);
        let u = Configuration::from_fn(cube, Closure::Constant(1), |s| if *s == s2(0, 0) { -1 } else { 1 });
        let j = CouplingSpec::<f64>::nearest_neighbor(1.5);
        let r = interaction_energy(&u, &[s2(0, 0)], Region::All, &j, &EvalOptions::default()).unwrap();
        assert_eq!(r.total, 8.0 * 1.5);
        assert_eq!(r.tail_bound, 0.0);
    }

    #[test]
    fn single_flip_delta_is_sixteen_lambda() {
        let cube = Cube::new(s2(0, 0), 2);
        let u = Configuration::constant(cube, 1);
        let j = CouplingSpec::<f64>::nearest_neighbor(1.0);
        let gamma: Vec<Site> = cube.sites().collect();
        let dl = energy_delta(&u, &[s2(0, 0)], &gamma, &j, &FieldSpec::zero(2), &EvalOptions::default()).unwrap();
        assert_eq!(dl, 16.0);
    }
}
