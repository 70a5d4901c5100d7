//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use ising_core::configuration::{Closure, Configuration};
use ising_core::hamiltonian::EvalOptions;
use ising_core::solver::Instance;
use ising_core::{CouplingSpec, Cube, Direction, FieldSpec, QuotientLattice, Site, SlabSpec, Window};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub fn s2(a: i64, b: i64) -> Site {
    Site::new(&[a, b])
}

/// Variant names in the order used by [`random_spec`].
pub const VARIANTS: [&str; 4] = ["power_like", "truncated", "periodic_table", "block_defect"];

/// A random coupling of the given variant (index into [`VARIANTS`]), d = 2.
pub fn random_spec(rng: &mut ChaCha8Rng, variant: usize) -> CouplingSpec<f64> {
    let s = rng.gen_range(0.1..0.9);
    match variant {
        0 => {
            let lambda = rng.gen_range(0.5..2.0);
            CouplingSpec::power_like(lambda, lambda * rng.gen_range(1.0..3.0), s)
        }
        1 => CouplingSpec::power_like(rng.gen_range(0.5..2.0), 2.0, s).truncated(rng.gen_range(1..=4)),
        2 => {
            let n = 4usize;
            let mut table = vec![0.0; n * n];
            for a in 0..n {
                for b in a..n {
                    let v = rng.gen_range(0.5..3.0);
                    table[a * n + b] = v;
                    table[b * n + a] = v;
                }
            }
            CouplingSpec::PeriodicTable { tau: 2, dim: 2, s, range: rng.gen_range(1..=3), table }
        }
        _ => CouplingSpec::appendix_b(5, rng.gen_range(1.0..100.0), s),
    }
}

/// A zero-flux field of period `tau` with `sup|h| ≤ mu`.
pub fn random_field(rng: &mut ChaCha8Rng, tau: i64, mu: f64) -> FieldSpec<f64> {
    let n = (tau as usize).pow(2);
    let mut t: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = t.iter().sum::<f64>() / n as f64;
    t.iter_mut().for_each(|v| *v -= mean);
    let m = t.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    t.iter_mut().for_each(|v| *v *= mu / m);
    FieldSpec::new(tau, 2, t, mu).unwrap()
}

/// Random ±1 spins on `Q_ell(0)` with a constant closure.
pub fn random_config(rng: &mut ChaCha8Rng, ell: i64, outside: i8) -> Configuration {
    let cube = Cube::new(Site::zero(2), ell);
    let spins = (0..cube.len()).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
    Configuration::new(2, Window::Cube(cube), spins, Closure::Constant(outside)).unwrap()
}

/// `H_Γ` with `Γ` a random subset of `Q_2(0)` of at most `n_max` sites and a random exterior.
pub fn random_restricted(rng: &mut ChaCha8Rng, spec: &CouplingSpec<f64>, n_max: usize) -> Instance<f64> {
    let mut cells: Vec<Site> = Cube::new(Site::zero(2), 2).sites().collect();
    for k in (1..cells.len()).rev() {
        cells.swap(k, rng.gen_range(0..=k));
    }
    let n = rng.gen_range(1..=n_max.min(cells.len()));
    cells.truncate(n);
    let outside = if rng.gen_bool(0.5) { 1 } else { -1 };
    let ext = random_config(rng, 4, outside);
    let tau = spec.period().max(1);
    let mu = rng.gen_range(0.0..0.5);
    let field = if rng.gen_bool(0.5) { FieldSpec::zero(2) } else { random_field(rng, tau, mu) };
    Instance::restricted(cells, &ext, spec, &field, &EvalOptions::with_radius(8)).unwrap()
}

/// The folded periodic problem for a random direction and a thin slab, at most `n_max` free sites.
pub fn random_periodic(rng: &mut ChaCha8Rng, spec: &CouplingSpec<f64>, n_max: usize) -> Instance<f64> {
    let dirs: [[i64; 2]; 4] = [[0, 1], [1, 1], [1, 2], [2, -1]];
    let tau = spec.period().max(1);
    loop {
        let w = dirs[rng.gen_range(0..dirs.len())];
        let dir = Direction::new(&w).unwrap();
        let q = Arc::new(QuotientLattice::new(dir, tau, 1).unwrap());
        let b = rng.gen_range(1..=4);
        let slab = SlabSpec::from_ints(0, b).unwrap();
        let mu = ising_core::kernels::mu0(spec.nn_floor(), tau, 2);
        let field = if rng.gen_bool(0.5) { FieldSpec::zero(2) } else { random_field(rng, tau, mu) };
        let inst = Instance::periodic(q, slab, spec, &field, &EvalOptions::with_radius(8)).unwrap();
        if !inst.is_empty() && inst.len() <= n_max {
            return inst;
        }
    }
}
