//! Seeded invariant suite behind `ising verify`.
//!
//! Random instances are two-dimensional and cover all four coupling families;
//! the configured coupling and direction drive the doubling and monotonicity rows.

use crate::config::RunConfig;
use crate::{solver_err, CliError};
use ising_core::hamiltonian::{interaction_energy, max_config, min_config, EvalOptions, Region};
use ising_core::kernels::{discretize, lambda_star};
use ising_core::perimeter::{
    coarea_check, hamiltonian_perimeter_identity, CellBox, CellKernel, Exterior, PerimeterOptions, PiecewiseConstant,
};
use ising_core::planelike::{birkhoff_check, doubling_check, lattice_translations};
use ising_core::solver::{brute_force, minimal_minimizer, pointwise_min, Instance};
use ising_core::{
    Closure, Configuration, ContinuumKernel, CouplingSpec, Cube, Direction, FieldSpec, QuotientLattice, Site, SlabSpec,
    Window,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

#[derive(Clone, Debug, Serialize)]
pub struct VerifyRow {
    pub invariant: String,
    pub instances: usize,
    /// Largest violation observed (0 when none); compared against `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn row(name: &str, instances: usize, worst: f64, tolerance: f64) -> VerifyRow {
    VerifyRow { invariant: name.into(), instances, worst, tolerance, pass: worst <= tolerance }
}

fn s2(a: i64, b: i64) -> Site {
    Site::new(&[a, b])
}

fn random_spec(rng: &mut ChaCha8Rng, variant: usize) -> CouplingSpec<f64> {
    let s = rng.gen_range(0.1..0.9);
    match variant % 4 {
        0 => {
            let l = rng.gen_range(0.5..2.0);
            CouplingSpec::power_like(l, l * rng.gen_range(1.0..3.0), s)
        }
        1 => CouplingSpec::power_like(rng.gen_range(0.5..2.0), 2.0, s).truncated(rng.gen_range(1..=4)),
        2 => {
            let mut table = vec![0.0; 16];
            for a in 0..4 {
                for b in a..4 {
                    let v = rng.gen_range(0.5..3.0);
                    table[a * 4 + b] = v;
                    table[b * 4 + a] = v;
                }
            }
            CouplingSpec::PeriodicTable { tau: 2, dim: 2, s, range: rng.gen_range(1..=3), table }
        }
        _ => CouplingSpec::appendix_b(5, rng.gen_range(1.0..100.0), s),
    }
}

fn random_config(rng: &mut ChaCha8Rng, ell: i64, outside: i8) -> Configuration {
    let cube = Cube::new(Site::zero(2), ell);
    let spins = (0..cube.len()).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
    Configuration::new(2, Window::Cube(cube), spins, Closure::Constant(outside)).expect("spins match the window")
}

fn random_instance(rng: &mut ChaCha8Rng, spec: &CouplingSpec<f64>, n_max: usize) -> Result<Instance<f64>, CliError> {
    let opts = EvalOptions::with_radius(8);
    if rng.gen_bool(0.5) {
        let mut cells: Vec<Site> = Cube::new(Site::zero(2), 2).sites().collect();
        for k in (1..cells.len()).rev() {
            cells.swap(k, rng.gen_range(0..=k));
        }
        cells.truncate(rng.gen_range(1..=n_max.min(cells.len())));
        let outside = if rng.gen_bool(0.5) { 1 } else { -1 };
        let ext = random_config(rng, 4, outside);
        return Instance::restricted(cells, &ext, spec, &FieldSpec::zero(2), &opts).map_err(solver_err);
    }
    let dirs = [[0i64, 1], [1, 1], [1, 2], [2, -1]];
    let tau = spec.period().max(1);
    loop {
        let w = Direction::new(&dirs[rng.gen_range(0..dirs.len())]).map_err(solver_err)?;
        let q = Arc::new(QuotientLattice::new(w, tau, 1).map_err(solver_err)?);
        let slab = SlabSpec::from_ints(0, rng.gen_range(1..=4)).map_err(solver_err)?;
        let inst = Instance::periodic(q, slab, spec, &FieldSpec::zero(2), &opts).map_err(solver_err)?;
        if !inst.is_empty() && inst.len() <= n_max {
            return Ok(inst);
        }
    }
}

fn solver_rows(rng: &mut ChaCha8Rng, n: usize) -> Result<Vec<VerifyRow>, CliError> {
    let (mut gap, mut pattern, mut closure) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..n {
        let spec = random_spec(rng, k);
        let inst = random_instance(rng, &spec, 14)?;
        let bf = brute_force(&inst).map_err(solver_err)?;
        let mm = minimal_minimizer(&inst).map_err(solver_err)?;
        gap = gap.max((mm.value - bf.value).abs());
        let spins: Vec<Vec<i8>> = bf.minimizers.iter().map(|m| m.spins.clone()).collect();
        if mm.spins != pointwise_min(&spins) {
            pattern += 1.0;
        }
        for a in &spins {
            for b in &spins {
                let lo: Vec<i8> = a.iter().zip(b).map(|(x, y)| *x.min(y)).collect();
                let hi: Vec<i8> = a.iter().zip(b).map(|(x, y)| *x.max(y)).collect();
                if inst.energy_units(&lo) != bf.value_units || inst.energy_units(&hi) != bf.value_units {
                    closure += 1.0;
                }
            }
        }
    }
    Ok(vec![
        row("min-cut value equals brute force", n, gap, 1e-9),
        row("minimal minimizer is the pointwise min", n, pattern, 0.0),
        row("minimizers closed under min and max", n, closure, 0.0),
    ])
}

fn submodularity_row(rng: &mut ChaCha8Rng, n: usize) -> Result<VerifyRow, CliError> {
    let cube = Cube::new(Site::zero(2), 3);
    let mut worst = 0.0f64;
    for k in 0..n {
        let spec = random_spec(rng, k);
        let outside = if rng.gen_bool(0.5) { 1 } else { -1 };
        let u = random_config(rng, 3, outside);
        let v = random_config(rng, 3, outside);
        let gamma: Vec<Site> = cube.sites().filter(|_| rng.gen_bool(0.4)).collect();
        let e = |c: &Configuration| -> Result<f64, CliError> {
            Ok(interaction_energy(c, &gamma, Region::All, &spec, &EvalOptions::with_radius(4)).map_err(solver_err)?.total)
        };
        let lo = min_config(&u, &v).map_err(solver_err)?;
        let hi = max_config(&u, &v).map_err(solver_err)?;
        worst = worst.max(e(&lo)? + e(&hi)? - e(&u)? - e(&v)?);
    }
    Ok(row("min/max do not increase interaction", n, worst, 1e-10))
}

fn coupling_row(rng: &mut ChaCha8Rng, n: usize) -> VerifyRow {
    let mut bad = 0.0;
    for k in 0..n {
        let spec = random_spec(rng, k);
        let tau = spec.period();
        let i = s2(rng.gen_range(-30..30), rng.gen_range(-30..30));
        let j = i + s2(rng.gen_range(-6..=6), rng.gen_range(-6..=6));
        let c = spec.coupling(&i, &j);
        if c != spec.coupling(&j, &i) || c != spec.coupling(&(i + s2(tau, 0)), &(j + s2(tau, 0))) || c < 0.0 {
            bad += 1.0;
        }
    }
    row("couplings symmetric, periodic, ferromagnetic", n, bad, 0.0)
}

fn discretization_row() -> Result<VerifyRow, CliError> {
    let mut bad = 0.0;
    let mut count = 0;
    for kernel in [ContinuumKernel::fractional(2, 0.5, 1.0), ContinuumKernel::periodic_cosine(2, 0.5, 1.0, 2.0)] {
        let lam = lambda_star(kernel.lambda, 2, 0.5);
        let mut upper = None;
        for eps in [1.0, 0.5, 0.25] {
            let spec = discretize::<f64>(&kernel, eps, Default::default()).map_err(solver_err)?;
            let big = match &spec {
                CouplingSpec::Discretized(k) => *upper.get_or_insert(k.upper_constant()),
                _ => return Err(CliError::Solver("discretize returned a non-discretized spec".into())),
            };
            let cells = (1.0 / eps).round() as i64;
            for c in 0..cells * cells {
                let i = s2(c / cells, c % cells);
                for a in -8..=8i64 {
                    for b in -8..=8i64 {
                        let k = s2(a, b);
                        if k.is_zero() {
                            continue;
                        }
                        let v = spec.coupling(&i, &(i + k));
                        let p = (k.l1_norm() as f64).powf(-2.5);
                        count += 1;
                        if v < lam * p || v > big * p {
                            bad += 1.0;
                        }
                    }
                }
            }
        }
    }
    Ok(row("discretized couplings within power-law bounds", count, bad, 0.0))
}

fn perimeter_rows(rng: &mut ChaCha8Rng, n: usize) -> Result<Vec<VerifyRow>, CliError> {
    let kernel = ContinuumKernel::fractional(2, 0.5, 1.0);
    let (mut id, mut four) = (0.0f64, 0.0f64);
    for k in 0..n {
        let eps = if k % 2 == 0 { 0.5 } else { 0.25 };
        let ck = CellKernel::new(&kernel, eps, Default::default()).map_err(solver_err)?;
        let outside = if rng.gen_bool(0.5) { 1 } else { -1 };
        let u = random_config(rng, 2, outside);
        let r = hamiltonian_perimeter_identity(&u, &ck, 2, &PerimeterOptions::default()).map_err(solver_err)?;
        let scale = r.lhs.abs().max(r.rhs.abs());
        if scale > 0.0 {
            id = id.max(r.gap / scale);
            four = four.max((4.0 * r.per_k - r.rhs).abs() / scale);
        }
    }
    let ck = CellKernel::new(&kernel, 0.5, Default::default()).map_err(solver_err)?;
    let cube = Cube::new(Site::zero(2), 3);
    let mut co = 0.0f64;
    for k in 0..n {
        let levels = 1 + k % 5;
        let ts: Vec<f64> = (0..levels).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let vals: Vec<f64> = (0..cube.len()).map(|_| ts[rng.gen_range(0..levels)]).collect();
        let u = PiecewiseConstant::new(0.5, cube, vals, Exterior::Rule(Arc::new(|_: &Site| 0.0))).map_err(solver_err)?;
        co = co.max(coarea_check(&u, &CellBox::from_cube(&cube), &ck).map_err(solver_err)?.relative_gap);
    }
    Ok(vec![
        row("scaled Hamiltonian equals nonlocal energy", n, id, 1e-9),
        row("nonlocal energy is four times the perimeter", n, four, 1e-9),
        row("coarea formula", n, co, 1e-9),
    ])
}

fn planelike_rows(cfg: &RunConfig) -> Result<Vec<VerifyRow>, CliError> {
    let spec = cfg.coupling()?;
    let field = cfg.field()?;
    let dir = cfg.direction()?;
    let tau = cfg.run.tau;
    let slab = SlabSpec::from_ints(0, 2 * tau).map_err(solver_err)?;
    let opts = EvalOptions { radius: cfg.run.radius };
    let r = doubling_check(&dir, tau, &slab, &spec, &field, &[1, 2, 3], &opts).map_err(solver_err)?;
    let mut violations = 0usize;
    for sol in &r.minimizers {
        violations += birkhoff_check(&sol.config, &dir, tau, &lattice_translations(dir.dim(), tau, 2))
            .map_err(solver_err)?
            .violations
            .len();
    }
    Ok(vec![
        row("doubling: equal patterns for m = 1, 2, 3", 3, if r.equal { 0.0 } else { 1.0 }, 0.0),
        row("monotonicity under lattice translations", r.minimizers.len(), violations as f64, 0.0),
    ])
}

/// Runs every invariant; a failing row does not stop the suite.
pub fn run_suite(cfg: &RunConfig) -> Result<Vec<VerifyRow>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.run.instances.max(1);
    let mut rows = solver_rows(&mut rng, n)?;
    rows.push(submodularity_row(&mut rng, 5 * n)?);
    rows.push(coupling_row(&mut rng, 50 * n));
    rows.push(discretization_row()?);
    rows.extend(perimeter_rows(&mut rng, (n / 4).max(4))?);
    rows.extend(planelike_rows(cfg)?);
    Ok(rows)
}
