mod common;

use common::*;
use ising_core::configuration::{Closure, Configuration};
use ising_core::hamiltonian::*;
use ising_core::solver::solve_constrained;
use ising_core::{CouplingSpec, Cube, Direction, Endpoints, FieldSpec, QuotientLattice, Site, SlabSpec, Window};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn opts8() -> EvalOptions {
    EvalOptions::with_radius(8)
}

fn random_subset(rng: &mut ChaCha8Rng, cube: &Cube, p: f64) -> Vec<Site> {
    cube.sites().filter(|_| rng.gen_bool(p)).collect()
}

fn psi_explicit(ell: i64) -> Configuration {
    let cube = Cube::new(Site::zero(2), ell);
    Configuration::new(2, Window::Cube(cube), vec![-1; cube.len()], Closure::Constant(1)).unwrap()
}

#[test]
fn plus_configuration_has_zero_energy() {
    let u = Configuration::constant(Cube::new(Site::zero(2), 3), 1);
    let gamma: Vec<Site> = Cube::new(Site::zero(2), 3).sites().collect();
    let spec = CouplingSpec::<f64>::power_like(1.0, 2.0, 0.5);
    assert_eq!(interaction_energy(&u, &gamma, Region::All, &spec, &opts8()).unwrap().total, 0.0);
    assert_eq!(restricted_hamiltonian(&u, &gamma, &spec, &FieldSpec::zero(2), &opts8()).unwrap().total, 0.0);
}

#[test]
fn single_minus_site_in_plus_sea() {
    let lambda = 0.7;
    let spec = CouplingSpec::<f64>::nearest_neighbor(lambda);
    let u = Configuration::new(2, Window::from_sites(vec![Site::zero(2)]), vec![-1], Closure::Constant(1)).unwrap();
    let g = [Site::zero(2)];
    let i = interaction_energy(&u, &g, Region::All, &spec, &EvalOptions::default()).unwrap();
    assert!((i.total - 8.0 * lambda).abs() < 1e-12);
    assert_eq!(i.tail_bound, 0.0);
    // Both orderings of each boundary pair count in H, once in I.
    let h = restricted_hamiltonian(&u, &g, &spec, &FieldSpec::zero(2), &EvalOptions::default()).unwrap();
    assert!((h.total - 16.0 * lambda).abs() < 1e-12);
    let plus = Configuration::constant(Cube::new(Site::zero(2), 0), 1);
    let d = energy_delta(&plus, &g, &g, &spec, &FieldSpec::zero(2), &EvalOptions::default()).unwrap();
    assert!((d - 16.0 * lambda).abs() < 1e-12);
    assert_eq!(energy_delta(&plus, &[], &g, &spec, &FieldSpec::zero(2), &EvalOptions::default()).unwrap(), 0.0);
}

#[test]
fn min_max_never_increase_interaction() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cube = Cube::new(Site::zero(2), 3);
    let mut worst = f64::INFINITY;
    for v in 0..VARIANTS.len() {
        for n in 0..1000 {
            let spec = random_spec(&mut rng, v);
            let outside = if rng.gen_bool(0.5) { 1 } else { -1 };
            let u = random_config(&mut rng, 3, outside);
            let w = random_config(&mut rng, 3, outside);
            let lo = min_config(&u, &w).unwrap();
            let hi = max_config(&u, &w).unwrap();
            let gamma = random_subset(&mut rng, &cube, 0.4);
            let other = random_subset(&mut rng, &cube, 0.5);
            let region = match n % 3 {
                0 => Region::Sites(&other),
                1 => Region::Complement(&other),
                _ => Region::All,
            };
            let e = |c: &Configuration| interaction_energy(c, &gamma, region, &spec, &EvalOptions::with_radius(4)).unwrap().total;
            let slack = e(&u) + e(&w) - e(&lo) - e(&hi);
            worst = worst.min(slack);
            assert!(slack >= -1e-10, "{}: slack {slack}", VARIANTS[v]);
        }
    }
    assert!(worst.is_finite());
}

#[test]
fn min_max_are_pointwise_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let u = random_config(&mut rng, 4, 1);
        let w = random_config(&mut rng, 4, 1);
        let lo = min_config(&u, &w).unwrap();
        let hi = max_config(&u, &w).unwrap();
        assert_eq!(min_config(&u, &u).unwrap().spins(), u.spins());
        for s in Cube::new(Site::zero(2), 6).sites() {
            assert!(lo.spin(&s) <= u.spin(&s) && u.spin(&s) <= hi.spin(&s));
            assert!(lo.spin(&s) <= w.spin(&s) && w.spin(&s) <= hi.spin(&s));
        }
    }
    let a = random_config(&mut rng, 4, 1);
    let b = random_config(&mut rng, 3, 1);
    assert!(min_config(&a, &b).is_err());
}

#[test]
fn restricted_hamiltonian_is_consistent_with_inclusion() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let cube = Cube::new(Site::zero(2), 3);
    for v in 0..VARIANTS.len() {
        for _ in 0..40 {
            let spec = random_spec(&mut rng, v);
            let tau = spec.period();
            let field = random_field(&mut rng, tau, 0.3);
            let omega_set = random_subset(&mut rng, &cube, 0.6);
            let gamma: Vec<Site> = omega_set.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            let u = random_config(&mut rng, 3, 1);
            let flips: Vec<Site> = gamma.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            let w = u.flipped(&flips).unwrap();
            let h = |c: &Configuration, g: &[Site]| restricted_hamiltonian(c, g, &spec, &field, &opts8()).unwrap().total;
            let big = h(&u, &omega_set) - h(&w, &omega_set);
            let small = h(&u, &gamma) - h(&w, &gamma);
            assert!((big - small).abs() <= 1e-10, "{}: {big} vs {small}", VARIANTS[v]);
        }
    }
}

#[test]
fn energy_delta_matches_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let cube = Cube::new(Site::zero(2), 3);
    for v in 0..VARIANTS.len() {
        for _ in 0..40 {
            let spec = random_spec(&mut rng, v);
            let field = random_field(&mut rng, spec.period(), 0.3);
            let gamma = random_subset(&mut rng, &cube, 0.7);
            let flips: Vec<Site> = gamma.iter().copied().filter(|_| rng.gen_bool(0.3)).collect();
            let u = random_config(&mut rng, 3, -1);
            let d = energy_delta(&u, &flips, &gamma, &spec, &field, &opts8()).unwrap();
            let h0 = restricted_hamiltonian(&u, &gamma, &spec, &field, &opts8()).unwrap().total;
            let h1 = restricted_hamiltonian(&u.flipped(&flips).unwrap(), &gamma, &spec, &field, &opts8()).unwrap().total;
            assert!((d - (h1 - h0)).abs() <= 1e-10, "{}: {d} vs {}", VARIANTS[v], h1 - h0);
        }
    }
}

#[test]
fn tail_certificate_is_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let spec = CouplingSpec::<f64>::power_like(1.0, 1.5, 0.5);
    for _ in 0..5 {
        let u = random_config(&mut rng, 4, 1);
        let gamma: Vec<Site> = Cube::new(Site::zero(2), 4).sites().collect();
        for r in [4i64, 8, 16] {
            let a = restricted_hamiltonian(&u, &gamma, &spec, &FieldSpec::zero(2), &EvalOptions::with_radius(r)).unwrap();
            let b = restricted_hamiltonian(&u, &gamma, &spec, &FieldSpec::zero(2), &EvalOptions::with_radius(2 * r)).unwrap();
            assert!(a.tail_bound > 0.0);
            assert!((b.total - a.total).abs() < a.tail_bound, "radius {r}: change {} vs certificate {}", b.total - a.total, a.tail_bound);
        }
    }
    let t = CouplingSpec::<f64>::power_like(1.0, 1.5, 0.5).truncated(3);
    let u = random_config(&mut rng, 2, 1);
    let gamma: Vec<Site> = Cube::new(Site::zero(2), 2).sites().collect();
    assert_eq!(restricted_hamiltonian(&u, &gamma, &t, &FieldSpec::zero(2), &opts8()).unwrap().tail_bound, 0.0);
}

#[test]
fn zero_flux_field_is_neutral_on_full_periods() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let field = random_field(&mut rng, 2, 0.4);
    let minus = Configuration::constant(Cube::new(Site::zero(2), 0), -1);
    let f: Vec<Site> = Cube::new(Site::new(&[1, 1]), 1).sites().filter(|s| s.get(0) >= 1 && s.get(1) >= 1).collect();
    assert_eq!(f.len(), 4);
    assert!(magnetic_energy(&minus, &f, &field).unwrap().abs() < 1e-15);
    assert_eq!(magnetic_energy(&minus, &f, &FieldSpec::<f64>::zero(2)).unwrap(), 0.0);
    // Appending a constant period block to Γ leaves B unchanged.
    let u = random_config(&mut rng, 3, -1);
    let gamma: Vec<Site> = Cube::new(Site::zero(2), 3).sites().collect();
    let base = magnetic_energy(&u, &gamma, &field).unwrap();
    let block: Vec<Site> = [[10, 10], [10, 11], [11, 10], [11, 11]].iter().map(|c| Site::new(c)).collect();
    let mut bigger = gamma.clone();
    bigger.extend(block);
    assert!((magnetic_energy(&u, &bigger, &field).unwrap() - base).abs() < 1e-14);
}

#[test]
fn magnetic_term_of_psi_is_bounded_by_leftover_sites() {
    let mut rng = ChaCha8Rng::seed_from_u64(59);
    let mu = 0.3;
    let field = random_field(&mut rng, 2, mu);
    for ell in [4i64, 8, 16] {
        let u = psi_explicit(ell);
        let gamma: Vec<Site> = Cube::new(Site::zero(2), ell).sites().collect();
        let b = magnetic_energy(&u, &gamma, &field).unwrap();
        // Side 2ℓ+1: tiling by 2×2 blocks leaves one row and one column.
        let leftover = (2 * ell + 1).pow(2) - (2 * ell).pow(2);
        assert!(b.abs() <= mu * leftover as f64 + 1e-12, "ell {ell}: |B| = {}", b.abs());
        assert!(leftover as f64 <= 2.5 * 2.0 * ell as f64);
    }
}

#[test]
fn psi_energy_bound_has_stable_constant() {
    let spec = CouplingSpec::<f64>::power_like(1.0, 1.0, 0.5);
    let mut cs = Vec::new();
    for ell in [4i64, 8, 16, 32] {
        let u = psi_explicit(ell);
        let gamma: Vec<Site> = Cube::new(Site::zero(2), ell).sites().collect();
        let h = restricted_hamiltonian(&u, &gamma, &spec, &FieldSpec::zero(2), &EvalOptions::default()).unwrap();
        let sig: f64 = (1..=ell + 1).map(|m| spec.sigma(2, m).unwrap()).sum();
        cs.push((h.total + h.tail_bound) / ((ell as f64) * (1.0 + sig)));
    }
    let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), c| (a.min(*c), b.max(*c)));
    assert!(hi / lo < 2.0, "fitted constants {cs:?}");
}

fn periodic_config(q: &Arc<QuotientLattice>, slab: SlabSpec, mut f: impl FnMut(&Site) -> i8) -> Configuration {
    let free = q.fundamental_domain(&slab, Endpoints::LeftOpen);
    let spins = free.iter().map(|s| f(s)).collect();
    Configuration::new(2, Window::from_sites(free), spins, Closure::Periodic { lattice: q.clone(), slab }).unwrap()
}

#[test]
fn flat_jump_matches_fold_and_sum() {
    let spec = CouplingSpec::<f64>::power_like(1.0, 1.0, 0.5).truncated(3);
    let q = Arc::new(QuotientLattice::new(Direction::new(&[0, 1]).unwrap(), 1, 1).unwrap());
    let slab = SlabSpec::from_ints(0, 3).unwrap();
    let u = periodic_config(&q, slab, |_| 1);
    let g = periodic_functional(&u, &q, &slab, &spec, &FieldSpec::zero(2), &opts8()).unwrap();
    // One column against the plane: a gap g is realized by g ordered height
    // pairs on each side of the jump, each costing 2J.
    let mut want = 0.0;
    for gap in 1..=3i64 {
        for x in -3..=3i64 {
            want += 4.0 * gap as f64 * spec.coupling(&Site::zero(2), &s2(x, gap));
        }
    }
    assert!((g.total - want).abs() < 1e-12, "{} vs {want}", g.total);
    assert!(periodic_functional(&Configuration::constant(Cube::new(Site::zero(2), 0), 1), &q, &slab, &spec, &FieldSpec::zero(2), &opts8()).is_err());
}

#[test]
fn periodic_functional_is_independent_of_representatives() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for v in 0..VARIANTS.len() {
        let spec = random_spec(&mut rng, v);
        let tau = spec.period();
        let q = Arc::new(QuotientLattice::new(Direction::new(&[1, 2]).unwrap(), tau, 1).unwrap());
        let slab = SlabSpec::from_ints(0, 3).unwrap();
        let u = periodic_config(&q, slab, |_| if rng.gen_bool(0.5) { 1 } else { -1 });
        let rho = 6;
        let g = periodic_functional(&u, &q, &slab, &spec, &FieldSpec::zero(2), &EvalOptions::with_radius(rho)).unwrap();
        let band = SlabSpec::new(slab.a - rho, slab.b + rho).unwrap();
        let gens = q.generators().to_vec();
        let mut want = 0.0;
        for i in q.fundamental_domain(&band, Endpoints::Closed) {
            let mut k = Site::zero(2);
            for g in &gens {
                let c = rng.gen_range(-3..=3);
                k = k + Site::new(&[g.get(0) * c, g.get(1) * c]);
            }
            let ip = i + k;
            for a in -rho..=rho {
                for b in -rho..=rho {
                    let j = ip + s2(a, b);
                    if j != ip && u.spin(&j) != u.spin(&ip) {
                        want += 2.0 * spec.coupling(&ip, &j);
                    }
                }
            }
        }
        assert!((g.total - want).abs() <= 1e-10 * want.max(1.0), "{}: {} vs {want}", VARIANTS[v], g.total);
    }
}

#[test]
fn periodic_functional_scales_with_period_multiple() {
    let spec = CouplingSpec::<f64>::power_like(1.0, 1.0, 0.5);
    let dir = Direction::new(&[1, 2]).unwrap();
    let slab = SlabSpec::from_ints(0, 3).unwrap();
    let opts = EvalOptions::with_radius(12);
    let v = solve_constrained(&dir, 1, 1, &slab, &spec, &FieldSpec::zero(2), &opts).unwrap().config;
    let q1 = Arc::new(QuotientLattice::new(dir.clone(), 1, 1).unwrap());
    let g1 = periodic_functional(&v, &q1, &slab, &spec, &FieldSpec::zero(2), &opts).unwrap().total;
    for m in [2i64, 3] {
        let qm = Arc::new(QuotientLattice::new(dir.clone(), 1, m).unwrap());
        let vm = periodic_config(&qm, slab, |s| v.spin(s));
        let gm = periodic_functional(&vm, &qm, &slab, &spec, &FieldSpec::zero(2), &opts).unwrap().total;
        assert!((gm - m as f64 * g1).abs() <= 1e-10 * gm, "m {m}: {gm} vs {}", m as f64 * g1);
    }
}

#[test]
fn evaluation_is_bit_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(67);
    let spec = CouplingSpec::<f64>::power_like(1.0, 2.0, 0.3);
    let u = random_config(&mut rng, 6, 1);
    let gamma: Vec<Site> = Cube::new(Site::zero(2), 6).sites().collect();
    let a = restricted_hamiltonian(&u, &gamma, &spec, &FieldSpec::zero(2), &EvalOptions::default()).unwrap();
    let b = restricted_hamiltonian(&u, &gamma, &spec, &FieldSpec::zero(2), &EvalOptions::default()).unwrap();
    assert_eq!(a.total.to_bits(), b.total.to_bits());
    assert_eq!(a.total, a.interaction + a.magnetic);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn submodularity_of_restricted_hamiltonian(seed in any::<u64>(), v in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, v);
        let field = random_field(&mut rng, spec.period(), 0.2);
        let u = random_config(&mut rng, 2, 1);
        let w = random_config(&mut rng, 2, 1);
        let gamma: Vec<Site> = Cube::new(Site::zero(2), 2).sites().collect();
        let h = |c: &Configuration| restricted_hamiltonian(c, &gamma, &spec, &field, &EvalOptions::with_radius(4)).unwrap().total;
        let lo = min_config(&u, &w).unwrap();
        let hi = max_config(&u, &w).unwrap();
        prop_assert!(h(&lo) + h(&hi) <= h(&u) + h(&w) + 1e-10);
    }
}
