//! Plane-like minimizers: unconstraining search, doubling and Birkhoff
//! checks, interface geometry, density and clean-ball estimates, energy growth
//! and the oscillating-interface sweep.
//!
//! Heights are `(ω/|ω|₁)·i`, so widths are in ℓ¹ units.

use crate::configuration::{Closure, Configuration};
use crate::error::{Error, Result};
use crate::hamiltonian::{interaction_energy, restricted_hamiltonian, EvalOptions, Region};
use crate::kernels::{mu0, CouplingSpec, FieldSpec};
use crate::lattice::{Cube, Direction, Endpoints, QuotientLattice, Site, SlabSpec};
use crate::scalar::Scalar;
use crate::solver::{minimal_minimizer, solve_constrained, Instance, Minimizer};
use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Outcome of [`unconstrained_search`].
#[derive(Clone, Debug, Serialize)]
pub struct WidthReport {
    pub omega: Direction,
    pub tau: i64,
    pub m_used: f64,
    pub width: f64,
    pub interface_empty: bool,
    pub unconstrained: bool,
    pub m_over_tau: f64,
    /// Every `M` tried, in order.
    pub tried: Vec<i64>,
}

/// Outcome of [`density_estimate`].
#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub ell_values: Vec<i64>,
    pub minority_counts: Vec<u64>,
    pub fitted_cbar: f64,
    pub fitted_exponent: f64,
}

fn neighbors(s: &Site) -> impl Iterator<Item = Site> + '_ {
    (0..s.dim()).flat_map(move |n| {
        let e = Site::unit(s.dim(), n);
        [*s + e, *s - e]
    })
}

fn on_interface(u: &Configuration, i: &Site) -> bool {
    u.spin(i) == 1 && neighbors(i).any(|j| u.spin(&j) == -1)
}

/// Sites to scan: the window, or for a periodic configuration the
/// representatives of the band one level below the free region.
fn scan_sites(u: &Configuration) -> Vec<Site> {
    match u.closure() {
        Closure::Periodic { lattice, slab } => {
            let band = SlabSpec { a: slab.a - 1, b: slab.b };
            lattice.fundamental_domain(&band, Endpoints::LeftOpen)
        }
        _ => u.window().sites(),
    }
}

/// `∂u = {i : u_i = 1, some nearest neighbour has u_j = −1}`, among the window
/// sites (for periodic configurations: among representatives of one period).
/// Neighbours outside the window are read from the closure.
pub fn interface(u: &Configuration) -> Vec<Site> {
    let mut out: Vec<Site> = scan_sites(u).into_iter().filter(|i| on_interface(u, i)).collect();
    out.sort();
    out
}

/// Spread `max − min` of the heights over `∂u`; `(0, true)` when `∂u` is empty.
pub fn interface_width(u: &Configuration, omega: &Direction) -> (f64, bool) {
    let pts = interface(u);
    if pts.is_empty() {
        return (0.0, true);
    }
    let hs = pts.iter().map(|p| omega.height(p));
    let (lo, hi) = hs.fold((None::<Ratio<i64>>, None::<Ratio<i64>>), |(lo, hi), h| {
        (Some(lo.map_or(h, |l| l.min(h))), Some(hi.map_or(h, |x| x.max(h))))
    });
    let w = hi.unwrap() - lo.unwrap();
    (*w.numer() as f64 / *w.denom() as f64, false)
}

/// Result of a monotonicity check.
#[derive(Clone, Debug, Serialize)]
pub struct BirkhoffReport {
    pub ok: bool,
    /// `(k, i)` with the inequality failing at site `i` for translation `k`.
    pub violations: Vec<(Site, Site)>,
}

/// `T_k u ≤ u` when `ω·k ≤ 0` and `T_k u ≥ u` when `ω·k ≥ 0`, checked on the
/// window and its image under each `k`.
pub fn birkhoff_check(u: &Configuration, omega: &Direction, tau: i64, ks: &[Site]) -> Result<BirkhoffReport> {
    let sites = scan_sites(u);
    let mut violations = Vec::new();
    for k in ks {
        if k.coords().iter().any(|c| c.rem_euclid(tau) != 0) {
            return Err(Error::Precondition(format!("translation {k} is not in tau*Z^d (tau = {tau})")));
        }
        let wk = omega.level(k);
        let mut check = |i: Site| {
            let t = u.spin(&(i - *k));
            let v = u.spin(&i);
            if (wk <= 0 && t > v) || (wk >= 0 && t < v) {
                violations.push((*k, i));
            }
        };
        for i in &sites {
            check(*i);
            check(*i + *k);
        }
    }
    violations.sort();
    violations.dedup();
    Ok(BirkhoffReport { ok: violations.is_empty(), violations })
}

/// All `k ∈ τℤ^d` with `|k|_∞ ≤ reach·τ`.
pub fn lattice_translations(dim: usize, tau: i64, reach: i64) -> Vec<Site> {
    let mut out = Vec::new();
    crate::kernels::for_each_in_box(dim, reach, |k| out.push(*k * tau));
    out
}

/// Outcome of [`doubling_check`].
#[derive(Clone, Debug)]
pub struct DoublingReport<T: Scalar = f64> {
    pub equal: bool,
    pub m_list: Vec<i64>,
    pub minimizers: Vec<Minimizer<T>>,
    /// First `(m, site)` where a pattern differs from the first one.
    pub mismatch: Option<(i64, Site)>,
}

/// Solves for every `m` and compares the patterns on the free region of the
/// largest fold.
pub fn doubling_check<T: Scalar>(
    omega: &Direction,
    tau: i64,
    slab: &SlabSpec,
    spec: &CouplingSpec<T>,
    field: &FieldSpec<T>,
    m_list: &[i64],
    opts: &EvalOptions,
) -> Result<DoublingReport<T>> {
    if m_list.is_empty() {
        return Err(Error::Precondition("m_list is empty".into()));
    }
    let sols = m_list
        .par_iter()
        .map(|&m| solve_constrained(omega, tau, m, slab, spec, field, opts))
        .collect::<Result<Vec<_>>>()?;
    let m_max = *m_list.iter().max().unwrap();
    let big = QuotientLattice::new(*omega, tau, m_max)?;
    let region = big.fundamental_domain(slab, Endpoints::LeftOpen);
    let mut mismatch = None;
    'outer: for (m, sol) in m_list.iter().zip(&sols).skip(1) {
        for i in &region {
            if sol.config.spin(i) != sols[0].config.spin(i) {
                mismatch = Some((*m, *i));
                break 'outer;
            }
        }
    }
    Ok(DoublingReport { equal: mismatch.is_none(), m_list: m_list.to_vec(), minimizers: sols, mismatch })
}

/// Rejects fields above `μ₀ = λτ^{−d}`.
pub fn check_mu<T: Scalar>(spec: &CouplingSpec<T>, field: &FieldSpec<T>, tau: i64, dim: usize) -> Result<()> {
    let bound = mu0(spec.nn_floor(), tau, dim);
    if field.mu() > bound * T::c(1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "mu exceeds lambda*tau^-d: mu = {} > mu0 = {} (lambda = {}, tau = {tau}, d = {dim})",
            field.mu(),
            bound,
            spec.nn_floor()
        )));
    }
    Ok(())
}

/// `M ∈ {τ, 2τ, 4τ, …}` with `count` entries.
pub fn default_schedule(tau: i64, count: usize) -> Vec<i64> {
    (0..count).map(|k| tau << k).collect()
}

/// First `M` of the schedule with `u^M_ω = u^{M+τ}_ω` on the free region of
/// `S^{0,M}_ω` plus a collar of width τ on each side.
pub fn unconstrained_search<T: Scalar>(
    omega: &Direction,
    tau: i64,
    spec: &CouplingSpec<T>,
    field: &FieldSpec<T>,
    schedule: &[i64],
    opts: &EvalOptions,
) -> Result<(WidthReport, Minimizer<T>)> {
    check_mu(spec, field, tau, omega.dim())?;
    if schedule.is_empty() {
        return Err(Error::Precondition("empty M schedule".into()));
    }
    let lattice = Arc::new(QuotientLattice::new(*omega, tau, 1)?);
    let solve = |m: i64| -> Result<Minimizer<T>> {
        let inst = Instance::periodic(lattice.clone(), SlabSpec::from_ints(0, m)?, spec, field, opts)?;
        minimal_minimizer(&inst)
    };
    let mut tried = Vec::new();
    let mut last = None;
    for &m in schedule {
        tried.push(m);
        let (u, v) = rayon::join(|| solve(m), || solve(m + tau));
        let (u, v) = (u?, v?);
        let region = lattice.fundamental_domain(&SlabSpec::from_ints(-tau, m + tau)?, Endpoints::LeftOpen);
        let same = region.iter().all(|i| u.config.spin(i) == v.config.spin(i));
        let (width, empty) = interface_width(&u.config, omega);
        let report = WidthReport {
            omega: *omega,
            tau,
            m_used: m as f64,
            width,
            interface_empty: empty,
            unconstrained: same,
            m_over_tau: m as f64 / tau as f64,
            tried: tried.clone(),
        };
        if same {
            return Ok((report, u));
        }
        last = Some((report, u));
    }
    Ok(last.unwrap())
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 when `y` is constant and fitted exactly.
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Precondition("a linear fit needs at least two (x, y) pairs".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition("a linear fit needs two distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept: my - slope * mx, r_squared })
}

/// Least-squares fit of `log y = log c + e·log x`; returns `(c, e)`.
pub fn power_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Precondition("a power fit needs at least two positive points".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition("a power fit needs two distinct abscissae".into()));
    }
    let e = sxy / sxx;
    Ok(((my - e * mx).exp(), e))
}

fn require_interface(u: &Configuration, q: &Site) -> Result<()> {
    if !on_interface(u, q) {
        return Err(Error::Precondition(format!("q = {q} is not on the interface of u")));
    }
    Ok(())
}

/// Minority counts in `Q_ℓ(q)` and the fit `count ≈ c̄·ℓ^e` over `ℓ ≥ 1`.
pub fn density_estimate(u: &Configuration, q: &Site, ell_list: &[i64]) -> Result<DensityReport> {
    require_interface(u, q)?;
    let mut counts = Vec::new();
    for &l in ell_list {
        if l < 0 {
            return Err(Error::Precondition(format!("negative ell {l}")));
        }
        let plus = u.sample(&Cube::new(*q, l)).iter().filter(|&&s| s == 1).count() as u64;
        let total = (2 * l + 1).pow(q.dim() as u32) as u64;
        counts.push(plus.min(total - plus));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        ell_list.iter().zip(&counts).filter(|(l, _)| **l >= 1).map(|(l, c)| (*l as f64, *c as f64)).unzip();
    let (c, e) = if xs.len() >= 2 { power_fit(&xs, &ys)? } else { (f64::NAN, f64::NAN) };
    Ok(DensityReport { ell_values: ell_list.to_vec(), minority_counts: counts, fitted_cbar: c, fitted_exponent: e })
}

/// Outcome of [`isoperimetric_check`].
#[derive(Clone, Debug, Serialize)]
pub struct IsoperimetricReport {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub tail_bound: f64,
    pub holds: bool,
}

/// `Σ_{k ∈ ℤ^d, |k|_∞ > r} |k|_∞^{−d−s}`, exact shells up to a cutoff plus an integral tail.
pub fn linf_tail(dim: usize, s: f64, r: i64) -> f64 {
    let cutoff = (100 * r).max(1000);
    let d = dim as i32;
    let shell = |n: i64| ((2 * n + 1) as f64).powi(d) - ((2 * n - 1) as f64).powi(d);
    let mut acc = 0.0;
    for n in (r + 1..=cutoff).rev() {
        acc += shell(n) * (n as f64).powf(-(dim as f64) - s);
    }
    // shell(n) ≤ 2d(2n+1)^{d−1} ≤ 2d·3^{d−1}·n^{d−1}; ∫_N^∞ n^{−1−s} = N^{−s}/s.
    acc + 2.0 * dim as f64 * 3f64.powi(d - 1) * (cutoff as f64).powf(-s) / s
}

/// `Σ_{i∈Γ, j∉Γ} |i − j|_∞^{−d−s}` against `c·(#Γ)^{(d−s)/d}` with the provable
/// constant `c = 2^{−(d+s)/d}`: each `i` sees at least `#Γ` outside sites within
/// the ℓ∞ ball of `(2r+1)^d ≥ 2#Γ` sites.
pub fn isoperimetric_check(gamma: &[Site], s: f64, opts: &EvalOptions) -> Result<IsoperimetricReport> {
    if gamma.is_empty() {
        return Err(Error::Precondition("Gamma must be nonempty".into()));
    }
    if gamma.len() > 10_000 {
        return Err(Error::Precondition(format!("Gamma has {} sites; the limit is 10000", gamma.len())));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Precondition(format!("s must lie in (0,1), got {s}")));
    }
    let d = gamma[0].dim();
    let n = gamma.len();
    let mut r_need = 0i64;
    while ((2 * r_need + 1) as f64).powi(d as i32) < 2.0 * n as f64 {
        r_need += 1;
    }
    let rho = opts.radius.unwrap_or(32).max(r_need);
    let set: std::collections::HashSet<Site> = gamma.iter().copied().collect();
    let mut sorted = gamma.to_vec();
    sorted.sort();
    let mut acc = crate::scalar::KahanSum::<f64>::new();
    for i in &sorted {
        crate::kernels::for_each_in_box(d, rho, |k| {
            if k.is_zero() {
                return;
            }
            if !set.contains(&(*i + *k)) {
                acc.add((k.linf_norm() as f64).powf(-(d as f64) - s));
            }
        });
    }
    let c = 2f64.powf(-(d as f64 + s) / d as f64);
    let lhs = acc.value();
    let rhs = c * (n as f64).powf((d as f64 - s) / d as f64);
    Ok(IsoperimetricReport { lhs, rhs, constant: c, tail_bound: n as f64 * linf_tail(d, s, rho), holds: lhs >= rhs })
}

/// Outcome of [`energy_growth`].
#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub ell_values: Vec<i64>,
    pub energies: Vec<f64>,
    /// `I_{Q_ℓ,Q_ℓ}` of the same configurations.
    pub inner: Vec<f64>,
    pub slope: f64,
    pub lower_slope: f64,
    pub center: Site,
}

/// Options for [`energy_growth`].
#[derive(Clone, Debug)]
pub struct GrowthOptions {
    /// ℓ¹ range of the coupling used for the cube solves (`None`: the coupling itself).
    pub solve_range: Option<i64>,
    /// Exterior radius as a multiple of ℓ.
    pub exterior_factor: i64,
    /// Thickness of the periodic ground state slab, in units of τ.
    pub slab_periods: i64,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        Self { solve_range: Some(4), exterior_factor: 1, slab_periods: 4 }
    }
}

/// Fits `log H_{Q_ℓ(q)}(u) ~ slope·log ℓ` where `u` minimizes `H` on `Q_ℓ(q)`
/// with the plane-like ground state outside, `q` on its interface.
pub fn energy_growth<T: Scalar>(
    omega: &Direction,
    spec: &CouplingSpec<T>,
    field: &FieldSpec<T>,
    ell_list: &[i64],
    gopts: &GrowthOptions,
    opts: &EvalOptions,
) -> Result<GrowthReport> {
    if ell_list.len() < 3 {
        return Err(Error::Precondition("energy_growth needs at least three values of ell".into()));
    }
    let tau = spec.period().max(field.tau()).max(1);
    let slab = SlabSpec::from_ints(0, gopts.slab_periods * tau)?;
    let ground = solve_constrained(omega, tau, 1, &slab, spec, field, opts)?;
    let pts = interface(&ground.config);
    let q = *pts
        .iter()
        .min_by_key(|p| (p.l1_norm(), **p))
        .ok_or_else(|| Error::Precondition("the ground state has no interface".into()))?;
    let solve_spec = match (gopts.solve_range, spec.range()) {
        (Some(r), Some(rr)) if rr <= r => spec.clone(),
        (Some(r), _) => spec.clone().truncated(r),
        (None, _) => spec.clone(),
    };
    let mut energies = Vec::new();
    let mut inner = Vec::new();
    for &l in ell_list {
        let cube = Cube::new(q, l);
        let sites: Vec<Site> = cube.sites().collect();
        let inst = Instance::restricted(sites.clone(), &ground.config, &solve_spec, field, opts)?;
        let sol = minimal_minimizer(&inst)?;
        let eval = EvalOptions::with_radius((gopts.exterior_factor * l).max(1));
        let h = restricted_hamiltonian(&sol.config, &sites, spec, field, &eval)?;
        let ii = interaction_energy(&sol.config, &sites, Region::Sites(&sites), spec, &eval)?;
        energies.push(h.total.f64());
        inner.push(ii.total.f64());
    }
    let xs: Vec<f64> = ell_list.iter().map(|&l| l as f64).collect();
    let (_, slope) = power_fit(&xs, &energies)?;
    let (_, lower_slope) = power_fit(&xs, &inner)?;
    Ok(GrowthReport { ell_values: ell_list.to_vec(), energies, inner, slope, lower_slope, center: q })
}

/// Outcome of [`clean_ball`].
#[derive(Clone, Debug, Serialize)]
pub struct CleanBall {
    pub q_minus: Site,
    pub q_plus: Site,
    pub side_minus: i64,
    pub side_plus: i64,
    /// `min over phases of ⌈side/2⌉ / ℓ`.
    pub kappa_observed: f64,
}

/// Largest monochromatic subcube of each phase inside `Q_ℓ(q)`.
pub fn clean_ball(u: &Configuration, q: &Site, ell: i64) -> Result<CleanBall> {
    require_interface(u, q)?;
    if ell < 1 {
        return Err(Error::Precondition("ell must be at least 1".into()));
    }
    let cube = Cube::new(*q, ell);
    let vals = u.sample(&cube);
    let (sm, cm) = largest_cube(&cube, &vals, -1);
    let (sp, cp) = largest_cube(&cube, &vals, 1);
    let k = |side: i64| ((side + 1) / 2) as f64 / ell as f64;
    Ok(CleanBall { q_minus: cm, q_plus: cp, side_minus: sm, side_plus: sp, kappa_observed: k(sm).min(k(sp)) })
}

/// Side and centre of the largest subcube of `cube` where `vals == phase`.
fn largest_cube(cube: &Cube, vals: &[i8], phase: i8) -> (i64, Site) {
    let d = cube.dim();
    let side = cube.side() as usize;
    let mut dp = vec![0u32; vals.len()];
    let mut best = (0u32, cube.center);
    let strides: Vec<usize> = (0..d).map(|n| side.pow((d - 1 - n) as u32)).collect();
    for idx in 0..vals.len() {
        if vals[idx] != phase {
            continue;
        }
        let coords: Vec<usize> = (0..d).map(|n| idx / strides[n] % side).collect();
        let mut m = u32::MAX;
        if coords.iter().any(|&c| c == 0) {
            m = 0;
        } else {
            for mask in 1..(1usize << d) {
                let mut j = idx;
                for n in 0..d {
                    if mask >> n & 1 == 1 {
                        j -= strides[n];
                    }
                }
                m = m.min(dp[j]);
            }
        }
        dp[idx] = m + 1;
        if dp[idx] > best.0 {
            let s = dp[idx] as i64;
            let corner = cube.site_at(idx);
            let mut c = corner;
            for n in 0..d {
                c.set(n, corner.get(n) - (s - 1) / 2);
            }
            best = (dp[idx], c);
        }
    }
    (best.0 as i64, best.1)
}

/// One row of the oscillation sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub tau: i64,
    pub width: f64,
    pub width_over_tau: f64,
    pub m_used: f64,
    pub unconstrained: bool,
}

/// Outcome of [`appendix_b_sweep`].
#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub lambda_big: f64,
    pub s: f64,
    pub omega: Direction,
    pub min_width_over_tau: f64,
    pub strictly_increasing: bool,
    /// Width against τ; `None` for a single τ.
    pub fit: Option<LinearFit>,
}

/// Unconstrained search with the block-defect coupling for each τ ∈ 4ℕ+1.
pub fn appendix_b_sweep(
    tau_list: &[i64],
    lambda_big: f64,
    s: f64,
    omega: &Direction,
    schedule_len: usize,
    radius_periods: Option<i64>,
) -> Result<SweepReport> {
    if omega.dim() != 2 {
        return Err(Error::Dimension(omega.dim()));
    }
    if let Some(t) = tau_list.iter().find(|t| **t < 5 || **t % 4 != 1) {
        return Err(Error::Precondition(format!("tau = {t} is not of the form 4n+1 with n >= 1")));
    }
    let rows = tau_list
        .par_iter()
        .map(|&tau| {
            let spec = CouplingSpec::<f64>::appendix_b(tau, lambda_big, s);
            let opts = EvalOptions { radius: radius_periods.map(|p| p * tau) };
            let (rep, _) =
                unconstrained_search(omega, tau, &spec, &FieldSpec::zero(2), &default_schedule(tau, schedule_len), &opts)?;
            Ok(SweepRow {
                tau,
                width: rep.width,
                width_over_tau: rep.width / tau as f64,
                m_used: rep.m_used,
                unconstrained: rep.unconstrained,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let min_ratio = rows.iter().map(|r| r.width_over_tau).fold(f64::INFINITY, f64::min);
    let inc = rows.windows(2).all(|w| w[1].width > w[0].width);
    let xs: Vec<f64> = rows.iter().map(|r| r.tau as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.width).collect();
    let fit = linear_fit(&xs, &ys).ok();
    Ok(SweepReport { rows, lambda_big, s, omega: *omega, min_width_over_tau: min_ratio, strictly_increasing: inc, fit })
}
