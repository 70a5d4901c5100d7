//! Continuum side: `L_K`, `Per_K`, `𝒦_K`, the coarea identity, extensions of
//! configurations and resolution sweeps.
//!
//! Cells are `Q_{ε/2}(εi)`. Every integral over a pair of cells is
//! `ε^{d−s}·J^(ε)_ij`, read from the same tables that define `H^(ε)`, so the
//! discrete and continuum sides agree up to summation order.
//!
//! Sums over `ℝ^d ∖ Ω` are truncated at ℓ∞ cell distance ρ (default eight
//! times the longest side of Ω) and report the remainder bound
//! `Λ·|S^{d−1}|·ε^d·(ρε)^{−s}/s` per cell of Ω, times `|u(x) − u(y)| ≤ 2`.

use crate::configuration::{Closure, Configuration, Window};
use crate::error::{Error, Result};
use crate::hamiltonian::{restricted_hamiltonian, EvalOptions};
use crate::kernels::{discretize, ContinuumKernel, CouplingSpec, CouplingTable, FieldSpec, Quadrature};
use crate::lattice::{Cube, Site};
use crate::scalar::KahanSum;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// `J^(ε)` together with the cell scale `ε^{d−s}`.
pub struct CellKernel {
    pub kernel: ContinuumKernel,
    pub eps: f64,
    pub quad: Quadrature,
    spec: CouplingSpec<f64>,
    scale: f64,
}

impl CellKernel {
    pub fn new(kernel: &ContinuumKernel, eps: f64, quad: Quadrature) -> Result<Self> {
        let spec = discretize::<f64>(kernel, eps, quad)?;
        let scale = eps.powf(kernel.dim as f64 - kernel.s);
        Ok(Self { kernel: kernel.clone(), eps, quad, spec, scale })
    }

    /// The coupling `J^(ε)` shared with the Hamiltonian.
    pub fn spec(&self) -> &CouplingSpec<f64> {
        &self.spec
    }

    /// `ε^{d−s}`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim
    }

    /// `∫_{Q_{ε/2}(εi)} ∫_{Q_{ε/2}(εj)} K`; zero for `i = j`.
    pub fn cell_pair(&self, i: &Site, j: &Site) -> f64 {
        self.scale * self.spec.coupling(i, j)
    }

    /// Bound on `∫_{cell} ∫_{|y−x|_∞ > ρ cells} K`.
    pub fn outer_tail(&self, rho: i64) -> f64 {
        let d = self.kernel.dim;
        let sphere = match d {
            2 => 2.0 * std::f64::consts::PI,
            3 => 4.0 * std::f64::consts::PI,
            _ => 2.0 * std::f64::consts::PI * std::f64::consts::PI,
        };
        let r = rho as f64 * self.eps;
        self.kernel.upper * sphere * self.eps.powi(d as i32) * r.powf(-self.kernel.s) / self.kernel.s
    }
}

/// Axis-aligned box of cells `lo ≤ i ≤ hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellBox {
    pub lo: Site,
    pub hi: Site,
}

impl CellBox {
    pub fn new(lo: Site, hi: Site) -> Result<Self> {
        if lo.dim() != hi.dim() || (0..lo.dim()).any(|n| lo.get(n) > hi.get(n)) {
            return Err(Error::Precondition(format!("empty or inconsistent cell box {lo}..{hi}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn from_cube(c: &Cube) -> Self {
        let h = Site::new(&vec![c.half_side; c.dim()]);
        Self { lo: c.center - h, hi: c.center + h }
    }

    /// The box `[lo, hi] ⊂ ℝ^d`, which must be a union of ε-cells.
    pub fn commensurate(lo: &[f64], hi: &[f64], eps: f64) -> Result<Self> {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (x, y) in lo.iter().zip(hi) {
            let p = x / eps + 0.5;
            let q = y / eps - 0.5;
            if (p - p.round()).abs() > 1e-9 || (q - q.round()).abs() > 1e-9 {
                return Err(Error::Precondition(format!(
                    "box [{x}, {y}] is not a union of cells of side {eps}"
                )));
            }
            a.push(p.round() as i64);
            b.push(q.round() as i64);
        }
        Self::new(Site::new(&a), Site::new(&b))
    }

    /// Cells meeting the open box `(lo, hi)`.
    pub fn covering(lo: &[f64], hi: &[f64], eps: f64) -> Result<Self> {
        let a: Vec<i64> = lo.iter().map(|x| (x / eps - 0.5).floor() as i64 + 1).collect();
        let b: Vec<i64> = hi.iter().map(|y| (y / eps + 0.5).ceil() as i64 - 1).collect();
        Self::new(Site::new(&a), Site::new(&b))
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn extent(&self, n: usize) -> usize {
        (self.hi.get(n) - self.lo.get(n) + 1) as usize
    }

    pub fn len(&self) -> usize {
        (0..self.dim()).map(|n| self.extent(n)).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, s: &Site) -> bool {
        (0..self.dim()).all(|n| s.get(n) >= self.lo.get(n) && s.get(n) <= self.hi.get(n))
    }

    pub fn longest_side(&self) -> i64 {
        (0..self.dim()).map(|n| self.extent(n) as i64).max().unwrap()
    }

    pub fn grown(&self, r: i64) -> Self {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for n in 0..self.dim() {
            lo.set(n, lo.get(n) - r);
            hi.set(n, hi.get(n) + r);
        }
        Self { lo, hi }
    }

    /// Row-major, last axis fastest.
    pub fn sites(&self) -> Vec<Site> {
        let d = self.dim();
        let mut out = Vec::with_capacity(self.len());
        let mut cur = self.lo;
        loop {
            out.push(cur);
            let mut n = d;
            loop {
                if n == 0 {
                    return out;
                }
                n -= 1;
                if cur.get(n) < self.hi.get(n) {
                    cur.set(n, cur.get(n) + 1);
                    break;
                }
                cur.set(n, self.lo.get(n));
            }
        }
    }
}

/// A function of the cells with values in `[−1, 1]`.
pub trait CellFunction: Sync {
    fn eps(&self) -> f64;
    fn dim(&self) -> usize;
    fn value(&self, i: &Site) -> f64;
}

/// Union of closed cells `E = ∪_{u_i = +1} Q_{ε/2}(εi)`, stored as the configuration
/// `χ_E − χ_{ℝ^d∖E}`; may be unbounded through the closure.
#[derive(Clone, Debug)]
pub struct PixelSet {
    eps: f64,
    config: Configuration,
}

impl PixelSet {
    /// The finite set of the given cells.
    pub fn from_cells(eps: f64, dim: usize, cells: Vec<Site>) -> Result<Self> {
        check_eps(eps)?;
        let w = Window::from_sites(cells);
        let n = w.len();
        Ok(Self { eps, config: Configuration::new(dim, w, vec![1; n], Closure::Constant(-1))? })
    }

    /// `E(u, ε) = {ū_ε = 1}`.
    pub fn from_configuration(u: &Configuration, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        Ok(Self { eps, config: u.clone() })
    }

    pub fn empty(eps: f64, dim: usize) -> Result<Self> {
        Self::from_cells(eps, dim, Vec::new())
    }

    pub fn complement(&self) -> Self {
        Self { eps: self.eps, config: self.config.negated() }
    }

    pub fn contains(&self, i: &Site) -> bool {
        self.config.spin(i) == 1
    }

    pub fn configuration(&self) -> &Configuration {
        &self.config
    }

    /// Cells of a bounded set; `None` when the closure adds cells.
    pub fn cells(&self) -> Option<Vec<Site>> {
        match self.config.closure() {
            Closure::Constant(-1) => Some(
                (0..self.config.window().len())
                    .filter(|&k| self.config.spins()[k] == 1)
                    .map(|k| self.config.window().site_at(k))
                    .collect(),
            ),
            _ => None,
        }
    }
}

impl CellFunction for PixelSet {
    fn eps(&self) -> f64 {
        self.eps
    }
    fn dim(&self) -> usize {
        self.config.dim()
    }
    fn value(&self, i: &Site) -> f64 {
        self.config.spin(i) as f64
    }
}

type CellRule = Arc<dyn Fn(&Site) -> f64 + Send + Sync>;

/// Values outside the window of a [`PiecewiseConstant`].
#[derive(Clone)]
pub enum Exterior {
    Config(Arc<Configuration>),
    Rule(CellRule),
}

/// An element of `𝕏_ε`: one value in `[−1, 1]` per cell of a window, plus an exterior rule.
#[derive(Clone)]
pub struct PiecewiseConstant {
    eps: f64,
    window: Cube,
    values: Vec<f64>,
    exterior: Exterior,
}

impl std::fmt::Debug for PiecewiseConstant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PiecewiseConstant(eps={}, window={:?})", self.eps, self.window)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Precondition(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

impl PiecewiseConstant {
    pub fn new(eps: f64, window: Cube, values: Vec<f64>, exterior: Exterior) -> Result<Self> {
        check_eps(eps)?;
        if values.len() != window.len() {
            return Err(Error::Precondition("value count does not match the window".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || v.abs() > 1.0 + 1e-12) {
            return Err(Error::Precondition(format!("value {v} is outside [-1, 1]")));
        }
        Ok(Self { eps, window, values, exterior })
    }

    /// `ū_ε` with explicit values on `window` and `u` elsewhere.
    pub fn from_configuration(u: &Configuration, eps: f64, window: Cube) -> Result<Self> {
        let values = u.sample(&window).into_iter().map(f64::from).collect();
        Self::new(eps, window, values, Exterior::Config(Arc::new(u.clone())))
    }

    pub fn window(&self) -> &Cube {
        &self.window
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Back to spins; fails unless every window value is `±1` and the exterior is a configuration.
    pub fn to_configuration(&self) -> Result<Configuration> {
        let spins: Vec<i8> = self
            .values
            .iter()
            .map(|&v| if v == 1.0 { Ok(1) } else if v == -1.0 { Ok(-1) } else { Err(Error::Precondition(format!("value {v} is not a spin"))) })
            .collect::<Result<_>>()?;
        let closure = match &self.exterior {
            Exterior::Config(c) => Closure::Extend { base: c.clone(), shift: Site::zero(self.window.dim()) },
            Exterior::Rule(_) => return Err(Error::Precondition("exterior is not a configuration".into())),
        };
        Configuration::new(self.window.dim(), Window::Cube(self.window), spins, closure)
    }
}

impl CellFunction for PiecewiseConstant {
    fn eps(&self) -> f64 {
        self.eps
    }
    fn dim(&self) -> usize {
        self.window.dim()
    }
    fn value(&self, i: &Site) -> f64 {
        match self.window.index_of(i) {
            Some(k) => self.values[k],
            None => match &self.exterior {
                Exterior::Config(c) => c.spin(i) as f64,
                Exterior::Rule(f) => f(i),
            },
        }
    }
}

/// `ū_ε` of a configuration on the cube `window`.
pub fn extension(u: &Configuration, eps: f64, window: Cube) -> Result<PiecewiseConstant> {
    PiecewiseConstant::from_configuration(u, eps, window)
}

/// Tabulated sums of `J^(ε)` along the last axis of the offset box.
struct Engine {
    table: CouplingTable<f64>,
    /// Per class: prefix sums along the last axis, `(2ρ+2)` entries per row.
    prefix: Vec<f64>,
    rho: i64,
    omega: CellBox,
}

impl Engine {
    fn new(ck: &CellKernel, omega: CellBox, rho: i64) -> Result<Self> {
        if omega.dim() != ck.dim() {
            return Err(Error::Precondition("region and kernel dimensions differ".into()));
        }
        let table = CouplingTable::new(&ck.spec, ck.dim(), rho.max(omega.longest_side())).map_err(|_| {
            Error::Precondition("kernel modulation is not commensurate with eps; tables need a lattice period".into())
        })?;
        let rho = table.radius();
        let side = (2 * rho + 1) as usize;
        let d = ck.dim();
        let rows = side.pow(d as u32 - 1);
        let classes = (table.period() as usize).pow(d as u32);
        let mut prefix = Vec::with_capacity(classes * rows * (side + 1));
        for c in 0..classes {
            let row = table.row(c);
            for r in 0..rows {
                let mut acc = 0.0;
                prefix.push(0.0);
                for t in 0..side {
                    acc += row[r * side + t];
                    prefix.push(acc);
                }
            }
        }
        Ok(Self { table, prefix, rho, omega })
    }

    fn class(&self, i: &Site) -> usize {
        if self.table.period() == 1 {
            0
        } else {
            i.class_index(self.table.period())
        }
    }

    /// `Σ_{a<b in Ω} w(v_a, v_b)·J_ab` (unscaled), with `v` in Ω's row-major order.
    fn inner<W: Fn(f64, f64) -> f64>(&self, vals: &[f64], w: W) -> f64 {
        let sites = self.omega.sites();
        let mut acc = KahanSum::new();
        for (a, sa) in sites.iter().enumerate() {
            for (b, sb) in sites.iter().enumerate().skip(a + 1) {
                let f = w(vals[a], vals[b]);
                if f != 0.0 {
                    acc.add(f * self.table.get(sa, &(*sb - *sa)));
                }
            }
        }
        acc.value()
    }

    /// Calls `f(k, v_i, v_run, Σ_{j ∈ run} J_ij)` for every cell `i` of Ω (index
    /// `k`) and every maximal run of equal exterior values in each row within ρ.
    fn exterior<F: FnMut(usize, f64, f64, f64)>(&self, u: &dyn CellFunction, vals: &[f64], mut f: F) {
        let d = self.omega.dim();
        let big = self.omega.grown(self.rho);
        let side = (2 * self.rho + 1) as usize;
        let row_len = big.extent(d - 1);
        // Runs of each row of the big box, Ω cells excluded: (start, end, value), inclusive.
        let nrows: usize = (0..d - 1).map(|n| big.extent(n)).product();
        let mut runs: Vec<Vec<(i64, i64, f64)>> = vec![Vec::new(); nrows];
        let mut r = 0usize;
        for_each_lead(&big.lo.coords()[..d - 1], &big.hi.coords()[..d - 1], |lc| {
            let mut cur: Option<(i64, i64, f64)> = None;
            let mut s = Site::zero(d);
            for n in 0..d - 1 {
                s.set(n, lc[n]);
            }
            for t in 0..row_len as i64 {
                let x = big.lo.get(d - 1) + t;
                s.set(d - 1, x);
                if self.omega.contains(&s) {
                    if let Some(c) = cur.take() {
                        runs[r].push(c);
                    }
                    continue;
                }
                let v = u.value(&s);
                match &mut cur {
                    Some(c) if c.2 == v => c.1 = x,
                    _ => {
                        if let Some(c) = cur.take() {
                            runs[r].push(c);
                        }
                        cur = Some((x, x, v));
                    }
                }
            }
            if let Some(c) = cur.take() {
                runs[r].push(c);
            }
            r += 1;
        });
        let rows_per_class = side.pow(d as u32 - 1);
        for (k, i) in self.omega.sites().iter().enumerate() {
            let c = self.class(i);
            let il = i.get(d - 1);
            let dlo = vec![-self.rho; d - 1];
            let dhi = vec![self.rho; d - 1];
            for_each_lead(&dlo, &dhi, |delta| {
                let mut row = 0usize;
                let mut off_row = 0usize;
                for n in 0..d - 1 {
                    row = row * big.extent(n) + (i.get(n) + delta[n] - big.lo.get(n)) as usize;
                    off_row = off_row * side + (delta[n] + self.rho) as usize;
                }
                let rr = &runs[row];
                let base = (c * rows_per_class + off_row) * (side + 1);
                let lo = il - self.rho;
                let hi = il + self.rho;
                let start = rr.partition_point(|run| run.1 < lo);
                for run in &rr[start..] {
                    if run.0 > hi {
                        break;
                    }
                    let a = run.0.max(lo) - lo;
                    let b = run.1.min(hi) - lo;
                    let sum = self.prefix[base + b as usize + 1] - self.prefix[base + a as usize];
                    f(k, vals[k], run.2, sum);
                }
            });
        }
    }
}

/// Calls `f` on every integer point of `[lo, hi]`, last axis fastest; any length.
fn for_each_lead<F: FnMut(&[i64])>(lo: &[i64], hi: &[i64], mut f: F) {
    let d = lo.len();
    let mut cur: Vec<i64> = lo.to_vec();
    loop {
        f(&cur);
        let mut n = d;
        loop {
            if n == 0 {
                return;
            }
            n -= 1;
            if cur[n] < hi[n] {
                cur[n] += 1;
                break;
            }
            cur[n] = lo[n];
        }
    }
}

/// Truncation of the unbounded integrals.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PerimeterOptions {
    /// Outer ℓ∞ radius in cells; `None` selects eight times the longest side of Ω.
    pub outer_radius: Option<i64>,
}

impl PerimeterOptions {
    fn radius(&self, omega: &CellBox) -> i64 {
        self.outer_radius.unwrap_or(8 * omega.longest_side())
    }
}

/// `𝒦_K(u; Ω) = 𝒦_K(u; Ω, Ω) + 2·𝒦_K(u; Ω, ℝ^d∖Ω)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KEnergy {
    pub inner: f64,
    /// Truncated `𝒦_K(u; Ω, ℝ^d∖Ω)`.
    pub outer: f64,
    pub total: f64,
    /// Bound on what the truncation dropped from `total`.
    pub remainder: f64,
    pub radius: i64,
}

fn omega_values(u: &dyn CellFunction, omega: &CellBox) -> Vec<f64> {
    omega.sites().iter().map(|s| u.value(s)).collect()
}

fn check_function(u: &dyn CellFunction, ck: &CellKernel) -> Result<()> {
    if (u.eps() - ck.eps).abs() > 1e-12 * ck.eps {
        return Err(Error::Precondition(format!("function resolution {} differs from kernel resolution {}", u.eps(), ck.eps)));
    }
    if u.dim() != ck.dim() {
        return Err(Error::Precondition("function and kernel dimensions differ".into()));
    }
    Ok(())
}

/// `𝒦_K(u; Ω)` for `Ω` a box of cells.
pub fn k_energy(u: &dyn CellFunction, omega: &CellBox, ck: &CellKernel, opts: &PerimeterOptions) -> Result<KEnergy> {
    check_function(u, ck)?;
    let eng = Engine::new(ck, *omega, opts.radius(omega))?;
    let vals = omega_values(u, omega);
    // Ordered pairs inside Ω: twice the unordered sum.
    let inner = 2.0 * ck.scale * eng.inner(&vals, |a, b| (a - b).abs());
    let mut acc = KahanSum::new();
    eng.exterior(u, &vals, |_, vi, vj, j| acc.add((vi - vj).abs() * j));
    let outer = ck.scale * acc.value();
    let remainder = 2.0 * 2.0 * omega.len() as f64 * ck.outer_tail(eng.rho);
    Ok(KEnergy { inner, outer, total: inner + 2.0 * outer, remainder, radius: eng.rho })
}

/// Second argument of [`k_energy_pair`].
#[derive(Clone, Copy, Debug)]
pub enum CellRegion<'a> {
    Cells(&'a [Site]),
    /// `ℝ^d ∖ Ω`, truncated at the outer radius.
    OutsideOf(&'a CellBox),
}

/// `𝒦_K(u; A, B) = ∫_A ∫_B |u(x) − u(y)| K`.
pub fn k_energy_pair(
    u: &dyn CellFunction,
    a: &CellBox,
    b: CellRegion<'_>,
    ck: &CellKernel,
    opts: &PerimeterOptions,
) -> Result<(f64, f64)> {
    check_function(u, ck)?;
    match b {
        CellRegion::Cells(bs) => {
            let mut acc = KahanSum::new();
            for i in a.sites() {
                let vi = u.value(&i);
                for j in bs {
                    let w = (vi - u.value(j)).abs();
                    if w != 0.0 {
                        acc.add(w * ck.cell_pair(&i, j));
                    }
                }
            }
            Ok((acc.value(), 0.0))
        }
        CellRegion::OutsideOf(om) if om == a => {
            let eng = Engine::new(ck, *a, opts.radius(a))?;
            let vals = omega_values(u, a);
            let mut acc = KahanSum::new();
            eng.exterior(u, &vals, |_, vi, vj, j| acc.add((vi - vj).abs() * j));
            Ok((ck.scale * acc.value(), 2.0 * a.len() as f64 * ck.outer_tail(eng.rho)))
        }
        CellRegion::OutsideOf(_) => Err(Error::Precondition("OutsideOf must name the first region".into())),
    }
}

/// `L_K(A, B)` for bounded, cell-disjoint pixel sets.
pub fn l_k(a: &PixelSet, b: &PixelSet, ck: &CellKernel) -> Result<f64> {
    let (ca, cb) = match (a.cells(), b.cells()) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(Error::Precondition("L_K needs bounded pixel sets".into())),
    };
    if ca.iter().any(|c| b.contains(c)) {
        return Err(Error::Precondition("pixel sets overlap".into()));
    }
    let mut acc = KahanSum::new();
    for i in &ca {
        for j in &cb {
            acc.add(ck.cell_pair(i, j));
        }
    }
    Ok(acc.value())
}

/// `Per_K(E; Ω)` term by term, with the `¼·𝒦_K` cross-check.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PerimeterReport {
    /// `L_K(E∩Ω, Ω∖E)`, `L_K(E∩Ω, ℝ^d∖(E∪Ω))`, `L_K(E∖Ω, Ω∖E)`.
    pub terms: [f64; 3],
    pub value: f64,
    pub quarter_k: f64,
    pub relative_gap: f64,
    pub remainder: f64,
    pub radius: i64,
}

/// Relative agreement demanded between `Per_K` and `¼·𝒦_K`.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

/// `Per_K(E; Ω)`; fails with an invariant error if it differs from `¼·𝒦_K(χ_E − χ_{ℝ^d∖E}; Ω)`.
pub fn per_k(e: &PixelSet, omega: &CellBox, ck: &CellKernel, opts: &PerimeterOptions) -> Result<PerimeterReport> {
    check_function(e, ck)?;
    let eng = Engine::new(ck, *omega, opts.radius(omega))?;
    let vals = omega_values(e, omega);
    let t1 = eng.inner(&vals, |a, b| if a != b { 1.0 } else { 0.0 });
    let mut t2 = KahanSum::new();
    let mut t3 = KahanSum::new();
    let mut kx = KahanSum::new();
    eng.exterior(e, &vals, |_, vi, vj, j| {
        if vi > 0.0 && vj < 0.0 {
            t2.add(j);
        } else if vi < 0.0 && vj > 0.0 {
            t3.add(j);
        }
        kx.add((vi - vj).abs() * j);
    });
    let terms = [ck.scale * t1, ck.scale * t2.value(), ck.scale * t3.value()];
    let value = terms[0] + terms[1] + terms[2];
    let k_inner = 2.0 * eng.inner(&vals, |a, b| (a - b).abs());
    let quarter_k = 0.25 * ck.scale * (k_inner + 2.0 * kx.value());
    let relative_gap = (value - quarter_k).abs() / value.abs().max(f64::MIN_POSITIVE);
    if value != 0.0 && relative_gap > IDENTITY_TOLERANCE {
        return Err(Error::Invariant(format!("Per_K = {value} but K/4 = {quarter_k} (relative gap {relative_gap:e})")));
    }
    let remainder = omega.len() as f64 * ck.outer_tail(eng.rho);
    Ok(PerimeterReport { terms, value, quarter_k, relative_gap: if value == 0.0 { 0.0 } else { relative_gap }, remainder, radius: eng.rho })
}

/// Both sides of the finite coarea formula on `Ω × Ω`.
#[derive(Clone, Debug, Serialize)]
pub struct CoareaReport {
    pub lhs: f64,
    pub rhs: f64,
    pub levels: Vec<f64>,
    pub relative_gap: f64,
}

/// `𝒦_K(u; Ω, Ω) = Σ_j (t_{j+1} − t_j)·𝒦_K(χ_{u > t_j}; Ω, Ω)` over the distinct values `t_1 < … < t_k`.
pub fn coarea_check(u: &dyn CellFunction, omega: &CellBox, ck: &CellKernel) -> Result<CoareaReport> {
    check_function(u, ck)?;
    let eng = Engine::new(ck, *omega, omega.longest_side())?;
    let vals = omega_values(u, omega);
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("u takes non-finite values".into()));
    }
    let mut levels = vals.clone();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    let lhs = 2.0 * ck.scale * eng.inner(&vals, |a, b| (a - b).abs());
    let mut rhs = KahanSum::new();
    for w in levels.windows(2) {
        let t = w[0];
        let chi: Vec<f64> = vals.iter().map(|&v| if v > t { 1.0 } else { 0.0 }).collect();
        let k = 2.0 * ck.scale * eng.inner(&chi, |a, b| (a - b).abs());
        rhs.add((w[1] - w[0]) * k);
    }
    let rhs = rhs.value();
    let gap = if lhs == 0.0 { rhs.abs() } else { (lhs - rhs).abs() / lhs };
    Ok(CoareaReport { lhs, rhs, levels, relative_gap: gap })
}

/// Both sides of `ε^{d−s}·H^(ε)_{Q_ℓ}(u) = 𝒦_K(ū_ε; Q_R)`, `R = (ℓ + 1/2)ε`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    /// `Per_K(E(u,ε); Q_R)`, which equals `rhs / 4`.
    pub per_k: f64,
    pub radius: i64,
    pub remainder: f64,
}

/// Evaluates both sides with the same coupling table and outer radius.
pub fn hamiltonian_perimeter_identity(
    u: &Configuration,
    ck: &CellKernel,
    ell: i64,
    opts: &PerimeterOptions,
) -> Result<IdentityReport> {
    if ell < 0 {
        return Err(Error::Precondition(format!("ell must be nonnegative, got {ell}")));
    }
    let cube = Cube::new(Site::zero(u.dim()), ell);
    let omega = CellBox::from_cube(&cube);
    let rho = opts.radius(&omega).max(omega.longest_side());
    let gamma: Vec<Site> = cube.sites().collect();
    let h = restricted_hamiltonian(u, &gamma, &ck.spec, &FieldSpec::zero(u.dim()), &EvalOptions::with_radius(rho))?;
    let lhs = ck.scale * h.total;
    let ext = extension(u, ck.eps, cube)?;
    let o = PerimeterOptions { outer_radius: Some(rho) };
    let k = k_energy(&ext, &omega, ck, &o)?;
    let e = PixelSet::from_configuration(u, ck.eps)?;
    let per = per_k(&e, &omega, ck, &o)?;
    Ok(IdentityReport { lhs, rhs: k.total, gap: (lhs - k.total).abs(), per_k: per.value, radius: rho, remainder: k.remainder })
}

/// Test sets of the resolution sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestSet {
    /// `{x : normal·x < offset}`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    /// Open cube.
    Cube { center: Vec<f64>, half_side: f64 },
}

impl TestSet {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            TestSet::HalfSpace { normal, offset } => normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() < *offset,
            TestSet::Ball { center, radius } => {
                center.iter().zip(x).map(|(c, y)| (c - y) * (c - y)).sum::<f64>() < radius * radius
            }
            TestSet::Cube { center, half_side } => center.iter().zip(x).all(|(c, y)| (c - y).abs() < *half_side),
        }
    }

    pub fn name(&self) -> String {
        match self {
            TestSet::HalfSpace { .. } => "half_space".into(),
            TestSet::Ball { radius, .. } => format!("ball_r{radius}"),
            TestSet::Cube { half_side, .. } => format!("cube_h{half_side}"),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TestSet::HalfSpace { normal, .. } => normal.len(),
            TestSet::Ball { center, .. } | TestSet::Cube { center, .. } => center.len(),
        }
    }
}

type Predicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// `+1` if every sample of the cell lies in `E`, else `−1`.
fn inf_value(pred: &Predicate, eps: f64, samples: usize, i: &Site) -> f64 {
    let d = i.dim();
    let total = samples.pow(d as u32);
    let mut x = [0.0f64; 4];
    for k in 0..total {
        let mut r = k;
        for n in (0..d).rev() {
            let t = (r % samples) as f64;
            r /= samples;
            x[n] = eps * (i.get(n) as f64 - 0.5 + (t + 0.5) / samples as f64);
        }
        if !pred(&x[..d]) {
            return -1.0;
        }
    }
    1.0
}

/// Cellwise infimum of `χ_E − χ_{ℝ^d∖E}` sampled on `samples^d` points per cell.
/// Values on `window` are stored; other cells are evaluated on demand.
pub fn pixelize_inf(
    pred: Arc<dyn Fn(&[f64]) -> bool + Send + Sync>,
    dim: usize,
    eps: f64,
    window: Cube,
    samples: usize,
) -> Result<PiecewiseConstant> {
    if samples == 0 || window.dim() != dim {
        return Err(Error::Precondition("need at least one sample per axis and a matching window".into()));
    }
    let values = window.sites().map(|i| inf_value(&pred, eps, samples, &i)).collect();
    let p2 = pred.clone();
    let rule: CellRule = Arc::new(move |i: &Site| inf_value(&p2, eps, samples, i));
    PiecewiseConstant::new(eps, window, values, Exterior::Rule(rule))
}

/// One row of the resolution sweep.
#[derive(Clone, Debug, Serialize)]
pub struct GammaRow {
    pub set: String,
    pub eps: f64,
    pub ell: i64,
    pub g_eps: f64,
    pub symmetric_difference: f64,
    pub symmetric_difference_fraction: f64,
    pub reference: f64,
    pub relative_gap: f64,
    pub remainder: f64,
}

/// Settings of [`gamma_experiment`].
#[derive(Clone, Debug)]
pub struct GammaOptions {
    pub quad: Quadrature,
    pub samples: usize,
    /// Resolution of the reference value; `None` halves the finest ε of the schedule.
    pub eps_ref: Option<f64>,
    /// Outer radius as a multiple of the longest side of `Ω`, so every ε truncates at the same distance.
    pub radius_factor: f64,
}

impl Default for GammaOptions {
    fn default() -> Self {
        Self { quad: Quadrature::default(), samples: 8, eps_ref: None, radius_factor: 4.0 }
    }
}

/// `G^(ε)_K(u_ε; Ω) = 𝒦_K(u_ε; Ω_ε)` with `u_ε` the cellwise infimum of `E` and
/// `Ω_ε` the cells meeting the box `Ω = (lo, hi)`.
pub fn gamma_experiment(
    sets: &[TestSet],
    eps_schedule: &[f64],
    kernel: &ContinuumKernel,
    lo: &[f64],
    hi: &[f64],
    gopts: &GammaOptions,
) -> Result<Vec<GammaRow>> {
    if eps_schedule.is_empty() {
        return Err(Error::Precondition("empty eps schedule".into()));
    }
    let d = kernel.dim;
    if lo.len() != d || hi.len() != d || sets.iter().any(|s| s.dim() != d) {
        return Err(Error::Precondition("test sets, box and kernel must share the dimension".into()));
    }
    let eps_min = eps_schedule.iter().cloned().fold(f64::INFINITY, f64::min);
    let eps_ref = gopts.eps_ref.unwrap_or(eps_min / 2.0);
    let volume: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    let eval = |set: &TestSet, eps: f64| -> Result<(f64, f64, i64, f64)> {
        let ck = CellKernel::new(kernel, eps, gopts.quad)?;
        let omega = CellBox::covering(lo, hi, eps)?;
        let center = Site::new(&(0..d).map(|n| (omega.lo.get(n) + omega.hi.get(n)).div_euclid(2)).collect::<Vec<_>>());
        let half = (0..d).map(|n| (omega.hi.get(n) - center.get(n)).max(center.get(n) - omega.lo.get(n))).max().unwrap();
        let window = Cube::new(center, half);
        let s2 = set.clone();
        let pred: Predicate = Arc::new(move |x: &[f64]| s2.contains(x));
        let u = pixelize_inf(pred.clone(), d, eps, window, gopts.samples)?;
        let reach = lo.iter().zip(hi).map(|(a, b)| b - a).fold(0.0, f64::max) * gopts.radius_factor;
        let opts = PerimeterOptions { outer_radius: Some((reach / eps).round() as i64) };
        let k = k_energy(&u, &omega, &ck, &opts)?;
        let sd = symmetric_difference(&u, &pred, &omega, lo, hi, 2 * gopts.samples);
        Ok((k.total, sd, omega.extent(0) as i64 / 2, k.remainder))
    };
    let mut rows = Vec::new();
    for set in sets {
        let (reference, _, _, _) = eval(set, eps_ref)?;
        for &eps in eps_schedule {
            let (g, sd, ell, rem) = eval(set, eps)?;
            rows.push(GammaRow {
                set: set.name(),
                eps,
                ell,
                g_eps: g,
                symmetric_difference: sd,
                symmetric_difference_fraction: sd / volume,
                reference,
                relative_gap: (g - reference).abs() / reference.abs().max(f64::MIN_POSITIVE),
                remainder: rem,
            });
        }
    }
    Ok(rows)
}

/// `|{u = 1} Δ E| ∩ Ω` on a sample grid of `samples^d` points per cell.
fn symmetric_difference(u: &PiecewiseConstant, pred: &Predicate, omega: &CellBox, lo: &[f64], hi: &[f64], samples: usize) -> f64 {
    let d = omega.dim();
    let eps = u.eps();
    let per = samples.pow(d as u32);
    let w = eps.powi(d as i32) / per as f64;
    let mut acc = KahanSum::new();
    let mut x = [0.0f64; 4];
    for i in omega.sites() {
        let inside_u = u.value(&i) > 0.0;
        let mut count = 0usize;
        for k in 0..per {
            let mut r = k;
            for n in (0..d).rev() {
                let t = (r % samples) as f64;
                r /= samples;
                x[n] = eps * (i.get(n) as f64 - 0.5 + (t + 0.5) / samples as f64);
            }
            let in_omega = (0..d).all(|n| x[n] > lo[n] && x[n] < hi[n]);
            if in_omega && pred(&x[..d]) != inside_u {
                count += 1;
            }
        }
        acc.add(count as f64 * w);
    }
    acc.value()
}
