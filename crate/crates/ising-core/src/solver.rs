//! Exact minimization of the ferromagnetic spin energies.
//!
//! Every instance is reduced to a pseudo-Boolean energy on the free sites
//! with integer coefficients: couplings are rounded to multiples of a quantum
//! `q` once per `(class, offset)` key, so equal couplings stay equal and ties
//! between configurations are decided exactly. Brute force and min-cut work on
//! the same integers.

use crate::configuration::{Closure, Configuration, SpinField, Window};
use crate::error::{Error, Result};
use crate::hamiltonian::{effective_radius, EvalOptions};
use crate::kernels::{for_each_in_box, CouplingSpec, CouplingTable, FieldSpec};
use crate::lattice::{Direction, Endpoints, QuotientLattice, Site, SlabSpec};
use crate::scalar::Scalar;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::Arc;

/// Default coupling quantum.
pub const DEFAULT_QUANTUM: f64 = 1e-12;
/// Largest number of free sites accepted by [`brute_force`].
pub const BRUTE_FORCE_LIMIT: usize = 24;

/// Which energy the instance encodes.
#[derive(Clone, Debug)]
pub enum Objective {
    /// `H_Γ` with the exterior spins fixed.
    RestrictedH,
    /// `G^{A,B}_{m,ω}` over the admissible class.
    PeriodicG { lattice: Arc<QuotientLattice>, slab: SlabSpec },
}

/// Integer pseudo-Boolean energy
/// `E(x) = c + Σ_a θ_a(x_a) + Σ_{a<b} w_ab·[x_a ≠ x_b]`, in units of `quantum`.
#[derive(Clone, Debug)]
pub struct Instance<T: Scalar = f64> {
    free_sites: Vec<Site>,
    dim: usize,
    exterior: Option<Arc<Configuration>>,
    objective: Objective,
    spec: CouplingSpec<T>,
    field: FieldSpec<T>,
    quantum: f64,
    /// Cost of `x_a = +1` and of `x_a = −1`.
    unary: Vec<(i64, i64)>,
    pairs: Vec<(u32, u32, i64)>,
    constant: i128,
    tail_bound: f64,
    radius: i64,
}

/// Structured dump of an instance for reproduction.
#[derive(Clone, Debug, Serialize)]
pub struct InstanceDump {
    pub objective: String,
    pub coupling: String,
    pub field_mu: f64,
    pub radius: i64,
    pub quantum: f64,
    pub tail_bound: f64,
    pub free_sites: Vec<Site>,
    pub unary_plus: Vec<i64>,
    pub unary_minus: Vec<i64>,
    pub pairs: Vec<(u32, u32, i64)>,
    pub constant: String,
}

/// How optimality was established.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Certificate {
    BruteForce { states: u64 },
    /// Max-flow value equals the cut part of the energy, in energy units.
    MinCut { max_flow: f64, quantum: f64, tail_bound: f64 },
}

/// A minimizer with its energy.
#[derive(Clone, Debug)]
pub struct Minimizer<T: Scalar = f64> {
    pub config: Configuration,
    /// Spins of the free sites, in instance order.
    pub spins: Vec<i8>,
    pub value: T,
    pub certificate: Certificate,
}

fn quantize(x: f64, q: f64) -> i64 {
    (x / q).round() as i64
}

/// Capacities stay below this bound so no flow or energy sum overflows.
const CAPACITY_BUDGET: f64 = (1u64 << 61) as f64;

struct Builder {
    unary: Vec<(i64, i64)>,
    pairs: Vec<(u32, u32, i64)>,
    constant: i128,
}

impl Builder {
    fn new(n: usize) -> Self {
        Self { unary: vec![(0, 0); n], pairs: Vec::new(), constant: 0 }
    }

    /// Cost `w` when free `a` disagrees with a fixed spin.
    fn boundary(&mut self, a: usize, fixed: i8, w: i64) {
        if fixed == 1 {
            self.unary[a].1 += w;
        } else {
            self.unary[a].0 += w;
        }
    }

    fn field(&mut self, a: usize, hq: i64) {
        self.unary[a].0 += hq;
        self.unary[a].1 -= hq;
    }
}

fn integer_table<T: Scalar>(table: &CouplingTable<T>, q: f64) -> Result<Vec<i64>> {
    let classes = (table.period().max(1) as usize).pow(table.dim() as u32);
    let mut out = Vec::new();
    for c in 0..classes {
        for &v in table.row(c) {
            let v = v.f64();
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Precondition(format!(
                    "coupling value {v} is negative or non-finite; only ferromagnetic instances are supported"
                )));
            }
            out.push(quantize(v, q));
        }
    }
    Ok(out)
}

fn pick_quantum(q0: f64, budget_units: f64) -> f64 {
    q0.max(budget_units / CAPACITY_BUDGET)
}

fn row_of(table: &CouplingTable<impl Scalar>, s: &Site) -> usize {
    if table.period() == 1 {
        0
    } else {
        s.class_index(table.period())
    }
}

impl<T: Scalar> Instance<T> {
    /// `H_Γ` on `free_sites` with the rest of `ℤ^d` fixed to `exterior`.
    /// Pairs inside Γ are exact; pairs leaving Γ are truncated at ρ.
    pub fn restricted(
        free_sites: Vec<Site>,
        exterior: &Configuration,
        spec: &CouplingSpec<T>,
        field: &FieldSpec<T>,
        opts: &EvalOptions,
    ) -> Result<Self> {
        Self::restricted_with_quantum(free_sites, exterior, spec, field, opts, DEFAULT_QUANTUM)
    }

    pub fn restricted_with_quantum(
        mut free_sites: Vec<Site>,
        exterior: &Configuration,
        spec: &CouplingSpec<T>,
        field: &FieldSpec<T>,
        opts: &EvalOptions,
        q0: f64,
    ) -> Result<Self> {
        spec.validate()?;
        let dim = exterior.dim();
        check_dims(spec, field, dim)?;
        free_sites.sort();
        free_sites.dedup();
        let n = free_sites.len();
        if free_sites.iter().any(|s| s.dim() != dim) {
            return Err(Error::Precondition("free site dimension mismatch".into()));
        }
        let (rho, has_tail) = effective_radius(spec, opts);
        let ext = Arc::new(exterior.clone());
        if n == 0 {
            return Ok(Self::empty(dim, Some(ext), Objective::RestrictedH, spec, field, q0, rho));
        }
        let (lo, hi) = Window::from_sites(free_sites.clone()).bounds().unwrap();
        let diam = (hi - lo).linf_norm();
        let reach = match spec.range() {
            Some(r) => r.min(diam.max(rho)),
            None => diam.max(rho),
        };
        let table = CouplingTable::new(spec, dim, reach)?;
        let bound = table.max_row_sum().f64() * 8.0 * n as f64 + 2.0 * field.mu().f64() * n as f64;
        let q = pick_quantum(q0, bound);
        let jq = integer_table(&table, q)?;
        let block = jq.len() / (table.period().max(1) as usize).pow(dim as u32);

        let glo = shift_all(lo, -rho);
        let ghi = shift_all(hi, rho);
        let spins = SpinField::new(exterior, glo, ghi);
        let mut index = vec![u32::MAX; spins.values.len()];
        for (a, s) in free_sites.iter().enumerate() {
            index[spins.index(s).unwrap()] = a as u32;
        }
        let mut b = Builder::new(n);
        for (a, s) in free_sites.iter().enumerate() {
            let row = &jq[row_of(&table, s) * block..][..block];
            let mut o = 0usize;
            for_each_in_box(dim, table.radius(), |k| {
                let w = row[o];
                o += 1;
                if w == 0 || k.is_zero() {
                    return;
                }
                let j = *s + *k;
                let in_box = k.linf_norm() <= rho;
                match spins.index(&j) {
                    Some(ix) if index[ix] != u32::MAX => {
                        let bi = index[ix] as usize;
                        if bi > a {
                            b.pairs.push((a as u32, bi as u32, 4 * w));
                        }
                    }
                    Some(ix) if in_box => b.boundary(a, spins.values[ix], 4 * w),
                    _ => {}
                }
            });
            b.field(a, quantize(field.field(s).f64(), q));
        }
        let tail = if has_tail { 4.0 * n as f64 * spec.sigma(dim, rho + 1)?.f64() } else { 0.0 };
        Ok(Self {
            free_sites,
            dim,
            exterior: Some(ext),
            objective: Objective::RestrictedH,
            spec: spec.clone(),
            field: field.clone(),
            quantum: q,
            unary: b.unary,
            pairs: b.pairs,
            constant: b.constant,
            tail_bound: tail,
            radius: rho,
        })
    }

    /// The folded instance of `G^{A,B}_{m,ω}` on the free representatives.
    pub fn periodic(
        lattice: Arc<QuotientLattice>,
        slab: SlabSpec,
        spec: &CouplingSpec<T>,
        field: &FieldSpec<T>,
        opts: &EvalOptions,
    ) -> Result<Self> {
        Self::periodic_with_quantum(lattice, slab, spec, field, opts, DEFAULT_QUANTUM)
    }

    pub fn periodic_with_quantum(
        lattice: Arc<QuotientLattice>,
        slab: SlabSpec,
        spec: &CouplingSpec<T>,
        field: &FieldSpec<T>,
        opts: &EvalOptions,
        q0: f64,
    ) -> Result<Self> {
        spec.validate()?;
        let dim = lattice.dim();
        check_dims(spec, field, dim)?;
        if spec.period() > 0 && lattice.tau % spec.period() != 0 {
            return Err(Error::Precondition(format!(
                "coupling period {} does not divide tau = {}",
                spec.period(),
                lattice.tau
            )));
        }
        if field.tau() > 1 && lattice.tau % field.tau() != 0 {
            return Err(Error::Precondition(format!("field period {} does not divide tau = {}", field.tau(), lattice.tau)));
        }
        let dir = lattice.direction.clone();
        let free = lattice.fundamental_domain(&slab, Endpoints::LeftOpen);
        if free.is_empty() {
            return Err(Error::Precondition("the slab contains no free sites".into()));
        }
        let n = free.len();
        let (rho, has_tail) = effective_radius(spec, opts);
        let band = SlabSpec::new(slab.a - rho, slab.b + rho)?;
        let fixed: Vec<Site> = lattice
            .fundamental_domain(&band, Endpoints::Closed)
            .into_iter()
            .filter(|s| !slab.contains(&dir, s, Endpoints::LeftOpen))
            .collect();
        let table = CouplingTable::new(spec, dim, rho)?;
        let bound = table.max_row_sum().f64() * 8.0 * (n + fixed.len()) as f64 + 2.0 * field.mu().f64() * n as f64;
        let q = pick_quantum(q0, bound);
        let jq = integer_table(&table, q)?;
        let block = jq.len() / (table.period().max(1) as usize).pow(dim as u32);
        let index: HashMap<Site, u32> = free.iter().enumerate().map(|(a, s)| (*s, a as u32)).collect();
        let fixed_spin = |s: &Site| if dir.height(s) <= slab.a { 1i8 } else { -1i8 };

        let mut b = Builder::new(n);
        let mut scratch = vec![0i64; n];
        let mut touched: Vec<u32> = Vec::new();
        for (a, s) in free.iter().enumerate() {
            let row = &jq[row_of(&table, s) * block..][..block];
            let mut o = 0usize;
            for_each_in_box(dim, table.radius(), |k| {
                let w = row[o];
                o += 1;
                if w == 0 || k.is_zero() {
                    return;
                }
                let j = *s + *k;
                if slab.contains(&dir, &j, Endpoints::LeftOpen) {
                    let r = lattice.representative(&j);
                    let bi = index[&r];
                    // Self-images never disagree; each unordered pair is kept from its lower end.
                    if bi as usize > a {
                        if scratch[bi as usize] == 0 {
                            touched.push(bi);
                        }
                        scratch[bi as usize] += w;
                    }
                } else {
                    b.boundary(a, fixed_spin(&j), 4 * w);
                }
            });
            touched.sort_unstable();
            for &bi in &touched {
                b.pairs.push((a as u32, bi, 4 * scratch[bi as usize]));
                scratch[bi as usize] = 0;
            }
            touched.clear();
            b.field(a, quantize(field.field(s).f64(), q));
        }
        for s in &fixed {
            let us = fixed_spin(s);
            let row = &jq[row_of(&table, s) * block..][..block];
            let mut o = 0usize;
            let mut acc = 0i128;
            for_each_in_box(dim, table.radius(), |k| {
                let w = row[o];
                o += 1;
                if w == 0 {
                    return;
                }
                let j = *s + *k;
                if !slab.contains(&dir, &j, Endpoints::LeftOpen) && fixed_spin(&j) != us {
                    acc += 2 * w as i128;
                }
            });
            b.constant += acc;
        }
        let tail = if has_tail { 4.0 * n as f64 * spec.sigma(dim, rho + 1)?.f64() } else { 0.0 };
        Ok(Self {
            free_sites: free,
            dim,
            exterior: None,
            objective: Objective::PeriodicG { lattice, slab },
            spec: spec.clone(),
            field: field.clone(),
            quantum: q,
            unary: b.unary,
            pairs: b.pairs,
            constant: b.constant,
            tail_bound: tail,
            radius: rho,
        })
    }

    fn empty(
        dim: usize,
        exterior: Option<Arc<Configuration>>,
        objective: Objective,
        spec: &CouplingSpec<T>,
        field: &FieldSpec<T>,
        q: f64,
        rho: i64,
    ) -> Self {
        Self {
            free_sites: Vec::new(),
            dim,
            exterior,
            objective,
            spec: spec.clone(),
            field: field.clone(),
            quantum: q,
            unary: Vec::new(),
            pairs: Vec::new(),
            constant: 0,
            tail_bound: 0.0,
            radius: rho,
        }
    }

    pub fn free_sites(&self) -> &[Site] {
        &self.free_sites
    }

    pub fn len(&self) -> usize {
        self.free_sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free_sites.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn spec(&self) -> &CouplingSpec<T> {
        &self.spec
    }

    pub fn field(&self) -> &FieldSpec<T> {
        &self.field
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn pairs(&self) -> &[(u32, u32, i64)] {
        &self.pairs
    }

    /// Integer energy of an assignment of the free sites.
    pub fn energy_units(&self, x: &[i8]) -> i128 {
        assert_eq!(x.len(), self.len(), "assignment length");
        let mut e = self.constant;
        for (a, &(p, m)) in self.unary.iter().enumerate() {
            e += if x[a] == 1 { p as i128 } else { m as i128 };
        }
        for &(a, b, w) in &self.pairs {
            if x[a as usize] != x[b as usize] {
                e += w as i128;
            }
        }
        e
    }

    /// Energy of an assignment in the units of the couplings.
    pub fn energy(&self, x: &[i8]) -> T {
        T::c(self.energy_units(x) as f64 * self.quantum)
    }

    /// Energy of a configuration read on the free sites.
    pub fn energy_of(&self, u: &Configuration) -> T {
        let x: Vec<i8> = self.free_sites.iter().map(|s| u.spin(s)).collect();
        self.energy(&x)
    }

    /// The configuration with the given free spins and the instance's fixed spins elsewhere.
    pub fn configuration(&self, x: &[i8]) -> Result<Configuration> {
        let window = Window::from_sites(self.free_sites.clone());
        let closure = match (&self.objective, &self.exterior) {
            (Objective::PeriodicG { lattice, slab }, _) => Closure::Periodic { lattice: lattice.clone(), slab: *slab },
            (Objective::RestrictedH, Some(ext)) => match ext.closure() {
                Closure::Constant(v) if ext.window().is_empty() || ext.spins().iter().all(|s| s == v) => {
                    Closure::Constant(*v)
                }
                _ => Closure::Extend { base: ext.clone(), shift: Site::zero(self.dim) },
            },
            (Objective::RestrictedH, None) => Closure::Constant(1),
        };
        Configuration::new(self.dim, window, x.to_vec(), closure)
    }

    pub fn dump(&self) -> InstanceDump {
        InstanceDump {
            objective: match &self.objective {
                Objective::RestrictedH => "restricted_hamiltonian".into(),
                Objective::PeriodicG { lattice, slab } => format!(
                    "periodic_functional omega={} tau={} m={} A={} B={}",
                    lattice.direction,
                    lattice.tau,
                    lattice.m,
                    crate::lattice::format_ratio(&slab.a),
                    crate::lattice::format_ratio(&slab.b)
                ),
            },
            coupling: self.spec.describe(),
            field_mu: self.field.mu().f64(),
            radius: self.radius,
            quantum: self.quantum,
            tail_bound: self.tail_bound,
            free_sites: self.free_sites.clone(),
            unary_plus: self.unary.iter().map(|u| u.0).collect(),
            unary_minus: self.unary.iter().map(|u| u.1).collect(),
            pairs: self.pairs.clone(),
            constant: self.constant.to_string(),
        }
    }

    fn minimizer(&self, x: Vec<i8>, certificate: Certificate) -> Result<Minimizer<T>> {
        Ok(Minimizer { config: self.configuration(&x)?, value: self.energy(&x), spins: x, certificate })
    }
}

fn shift_all(s: Site, r: i64) -> Site {
    let mut o = s;
    for n in 0..s.dim() {
        o.set(n, s.get(n) + r);
    }
    o
}

fn check_dims<T: Scalar>(spec: &CouplingSpec<T>, field: &FieldSpec<T>, dim: usize) -> Result<()> {
    if !(2..=crate::lattice::MAX_DIM).contains(&dim) {
        return Err(Error::Dimension(dim));
    }
    if let Some(fd) = spec.fixed_dim() {
        if fd != dim {
            return Err(Error::Precondition(format!("coupling is {fd}-dimensional, instance is {dim}-dimensional")));
        }
    }
    if !field.is_zero() && field.dim() != dim {
        return Err(Error::Precondition(format!("field is {}-dimensional, instance is {dim}-dimensional", field.dim())));
    }
    Ok(())
}

/// Result of exhaustive enumeration.
#[derive(Clone, Debug)]
pub struct BruteForce<T: Scalar = f64> {
    pub value: T,
    pub value_units: i128,
    /// All minimizers, sorted lexicographically by their free spins.
    pub minimizers: Vec<Minimizer<T>>,
}

/// Enumerates all `2^n` assignments (Gray code) and keeps every minimizer.
pub fn brute_force<T: Scalar>(inst: &Instance<T>) -> Result<BruteForce<T>> {
    let n = inst.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::Guard(n, BRUTE_FORCE_LIMIT));
    }
    let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
    for &(a, b, w) in &inst.pairs {
        adj[a as usize].push((b as usize, w));
        adj[b as usize].push((a as usize, w));
    }
    let mut x = vec![-1i8; n];
    let mut e = inst.energy_units(&x);
    let mut best = e;
    let mut winners: Vec<u64> = vec![0];
    let total: u64 = 1u64 << n;
    let mut code: u64 = 0;
    for step in 1..total {
        let a = step.trailing_zeros() as usize;
        // Flip bit a: x_a goes −1 → +1 or back.
        let (p, m) = inst.unary[a];
        let old = x[a];
        let new = -old;
        e += if new == 1 { (p - m) as i128 } else { (m - p) as i128 };
        for &(b, w) in &adj[a] {
            let was = old != x[b];
            let now = new != x[b];
            if was != now {
                e += if now { w as i128 } else { -(w as i128) };
            }
        }
        x[a] = new;
        code ^= 1u64 << a;
        if e < best {
            best = e;
            winners.clear();
            winners.push(code);
        } else if e == best {
            winners.push(code);
        }
    }
    let spins_of = |c: u64| -> Vec<i8> { (0..n).map(|a| if c >> a & 1 == 1 { 1 } else { -1 }).collect() };
    let mut all: Vec<Vec<i8>> = winners.into_iter().map(spins_of).collect();
    all.sort();
    let minimizers = all
        .into_iter()
        .map(|x| inst.minimizer(x, Certificate::BruteForce { states: total }))
        .collect::<Result<Vec<_>>>()?;
    Ok(BruteForce { value: T::c(best as f64 * inst.quantum), value_units: best, minimizers })
}

/// Pointwise minimum of the free spins of a nonempty list.
pub fn pointwise_min(list: &[Vec<i8>]) -> Vec<i8> {
    let mut out = list[0].clone();
    for x in &list[1..] {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = (*o).min(v);
        }
    }
    out
}

/// Flow network in compressed adjacency form with paired reverse arcs.
struct Network {
    start: Vec<usize>,
    to: Vec<u32>,
    cap: Vec<i64>,
    rev: Vec<u32>,
}

impl Network {
    fn build(nodes: usize, edges: &[(u32, u32, i64, i64)]) -> Self {
        let mut deg = vec![0usize; nodes + 1];
        for &(u, v, _, _) in edges {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        let mut start = vec![0usize; nodes + 1];
        for k in 0..nodes {
            start[k + 1] = start[k] + deg[k];
        }
        let m = start[nodes];
        let mut fill = start.clone();
        let mut to = vec![0u32; m];
        let mut cap = vec![0i64; m];
        let mut rev = vec![0u32; m];
        for &(u, v, c, rc) in edges {
            let (u, v) = (u as usize, v as usize);
            let eu = fill[u];
            let ev = fill[v];
            fill[u] += 1;
            fill[v] += 1;
            to[eu] = v as u32;
            cap[eu] = c;
            rev[eu] = ev as u32;
            to[ev] = u as u32;
            cap[ev] = rc;
            rev[ev] = eu as u32;
        }
        Self { start, to, cap, rev }
    }

    fn bfs(&self, s: usize, level: &mut [i32], queue: &mut Vec<usize>) {
        level.iter_mut().for_each(|l| *l = -1);
        queue.clear();
        level[s] = 0;
        queue.push(s);
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for e in self.start[u]..self.start[u + 1] {
                let v = self.to[e] as usize;
                if self.cap[e] > 0 && level[v] < 0 {
                    level[v] = level[u] + 1;
                    queue.push(v);
                }
            }
        }
    }

    /// Dinic's algorithm; returns the max-flow value.
    fn max_flow(&mut self, s: usize, t: usize) -> i128 {
        let nodes = self.start.len() - 1;
        let mut level = vec![-1i32; nodes];
        let mut queue = Vec::with_capacity(nodes);
        let mut it = vec![0usize; nodes];
        let mut path: Vec<usize> = Vec::new();
        let mut flow: i128 = 0;
        loop {
            self.bfs(s, &mut level, &mut queue);
            if level[t] < 0 {
                return flow;
            }
            it.copy_from_slice(&self.start[..nodes]);
            path.clear();
            let mut u = s;
            loop {
                if u == t {
                    let f = path.iter().map(|&e| self.cap[e]).min().unwrap();
                    flow += f as i128;
                    let mut cut = path.len();
                    for (k, &e) in path.iter().enumerate() {
                        self.cap[e] -= f;
                        self.cap[self.rev[e] as usize] += f;
                        if self.cap[e] == 0 && cut == path.len() {
                            cut = k;
                        }
                    }
                    path.truncate(cut);
                    u = match path.last() {
                        Some(&e) => self.to[e] as usize,
                        None => s,
                    };
                    continue;
                }
                let mut advanced = false;
                while it[u] < self.start[u + 1] {
                    let e = it[u];
                    let v = self.to[e] as usize;
                    if self.cap[e] > 0 && level[v] == level[u] + 1 {
                        path.push(e);
                        u = v;
                        advanced = true;
                        break;
                    }
                    it[u] += 1;
                }
                if !advanced {
                    if u == s {
                        break;
                    }
                    level[u] = -1;
                    path.pop();
                    u = match path.last() {
                        Some(&e) => self.to[e] as usize,
                        None => s,
                    };
                    it[u] += 1;
                }
            }
        }
    }

    /// Nodes reachable from `s` in the residual graph.
    fn source_side(&self, s: usize) -> Vec<bool> {
        let nodes = self.start.len() - 1;
        let mut seen = vec![false; nodes];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            for e in self.start[u]..self.start[u + 1] {
                let v = self.to[e] as usize;
                if self.cap[e] > 0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

/// Min-cut minimizer with the inclusion-minimal `{x = +1}`: the source side of
/// the residual graph after a maximum flow.
pub fn minimal_minimizer<T: Scalar>(inst: &Instance<T>) -> Result<Minimizer<T>> {
    let n = inst.len();
    if n == 0 {
        return inst.minimizer(Vec::new(), Certificate::MinCut { max_flow: 0.0, quantum: inst.quantum, tail_bound: inst.tail_bound });
    }
    let (s, t) = (n, n + 1);
    let mut edges: Vec<(u32, u32, i64, i64)> = Vec::with_capacity(2 * n + inst.pairs.len());
    // x = +1 is the source side: cutting a→t pays θ(+1), cutting s→a pays θ(−1).
    for (a, &(p, m)) in inst.unary.iter().enumerate() {
        let base = p.min(m);
        if p > base {
            edges.push((a as u32, t as u32, p - base, 0));
        }
        if m > base {
            edges.push((s as u32, a as u32, m - base, 0));
        }
    }
    for &(a, b, w) in &inst.pairs {
        if w > 0 {
            edges.push((a, b, w, w));
        }
    }
    let mut net = Network::build(n + 2, &edges);
    let flow = net.max_flow(s, t);
    let side = net.source_side(s);
    let x: Vec<i8> = (0..n).map(|a| if side[a] { 1 } else { -1 }).collect();
    let offset: i128 = inst.constant + inst.unary.iter().map(|&(p, m)| p.min(m) as i128).sum::<i128>();
    let e = inst.energy_units(&x);
    if e != offset + flow {
        return Err(Error::Solver(format!("cut value {} does not match the max flow {}", e - offset, flow)));
    }
    inst.minimizer(
        x,
        Certificate::MinCut { max_flow: flow as f64 * inst.quantum, quantum: inst.quantum, tail_bound: inst.tail_bound },
    )
}

/// An exact minimizer via max-flow/min-cut (the minimal one).
pub fn mincut_solve<T: Scalar>(inst: &Instance<T>) -> Result<Minimizer<T>> {
    minimal_minimizer(inst)
}

/// `u^{A,B}_{m,ω}`: the minimal minimizer of `G^{A,B}_{m,ω}`.
pub fn solve_constrained<T: Scalar>(
    omega: &Direction,
    tau: i64,
    m: i64,
    slab: &SlabSpec,
    spec: &CouplingSpec<T>,
    field: &FieldSpec<T>,
    opts: &EvalOptions,
) -> Result<Minimizer<T>> {
    let q = Arc::new(QuotientLattice::new(omega.clone(), tau, m)?);
    let inst = Instance::periodic(q, *slab, spec, field, opts)?;
    minimal_minimizer(&inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Cube;

    #[test]
    fn column_has_four_minimizers() {
        let dir = Direction::new(&[0, 1]).unwrap();
        let q = Arc::new(QuotientLattice::new(dir, 1, 1).unwrap());
        let slab = SlabSpec::from_ints(0, 3).unwrap();
        let spec = CouplingSpec::<f64>::nearest_neighbor(1.0);
        let inst = Instance::periodic(q, slab, &spec, &FieldSpec::zero(2), &EvalOptions::default()).unwrap();
        assert_eq!(inst.len(), 3);
        let bf = brute_force(&inst).unwrap();
        assert_eq!(bf.minimizers.len(), 4);
        let mm = minimal_minimizer(&inst).unwrap();
        assert_eq!(mm.spins, vec![-1, -1, -1]);
        assert!((mm.value - bf.value).abs() < 1e-12);
    }

    #[test]
    fn all_plus_boundary_gives_all_plus() {
        let cube = Cube::new(Site::new(&[0, 0]), 2);
        let ext = Configuration::constant(Cube::new(Site::new(&[0, 0]), 0), 1);
        let spec = CouplingSpec::<f64>::power_like(1.0, 1.0, 0.5).truncated(4);
        let inst = Instance::restricted(cube.sites().collect(), &ext, &spec, &FieldSpec::zero(2), &EvalOptions::default()).unwrap();
        let mm = mincut_solve(&inst).unwrap();
        assert!(mm.spins.iter().all(|&s| s == 1));
        assert_eq!(mm.value, 0.0);
    }
}
