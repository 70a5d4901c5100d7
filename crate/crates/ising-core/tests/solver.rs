mod common;

use common::*;
use ising_core::configuration::Closure;
use ising_core::hamiltonian::{energy_delta, periodic_functional, restricted_hamiltonian, EvalOptions};
use ising_core::solver::*;
use ising_core::{CouplingSpec, Cube, Direction, FieldSpec, QuotientLattice, Site, SlabSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn check_against_brute_force(inst: &Instance<f64>) {
    let bf = brute_force(inst).unwrap();
    let mm = minimal_minimizer(inst).unwrap();
    assert!((mm.value - bf.value).abs() <= 1e-9, "min-cut {} vs brute force {}", mm.value, bf.value);
    let spins: Vec<Vec<i8>> = bf.minimizers.iter().map(|m| m.spins.clone()).collect();
    assert_eq!(mm.spins, pointwise_min(&spins));
}

#[test]
fn min_cut_matches_brute_force_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut count = 0;
    for round in 0..64 {
        for v in 0..VARIANTS.len() {
            let spec = random_spec(&mut rng, v);
            let inst = if round % 2 == 0 { random_restricted(&mut rng, &spec, 16) } else { random_periodic(&mut rng, &spec, 16) };
            check_against_brute_force(&inst);
            count += 1;
        }
    }
    assert!(count >= 256);
}

#[test]
fn lattice_of_minimizers_is_closed() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for v in 0..VARIANTS.len() {
        for _ in 0..10 {
            let spec = random_spec(&mut rng, v);
            let inst = random_periodic(&mut rng, &spec, 12);
            let bf = brute_force(&inst).unwrap();
            for a in &bf.minimizers {
                for b in &bf.minimizers {
                    let lo: Vec<i8> = a.spins.iter().zip(&b.spins).map(|(x, y)| *x.min(y)).collect();
                    let hi: Vec<i8> = a.spins.iter().zip(&b.spins).map(|(x, y)| *x.max(y)).collect();
                    assert_eq!(inst.energy_units(&lo), bf.value_units);
                    assert_eq!(inst.energy_units(&hi), bf.value_units);
                }
            }
        }
    }
}

#[test]
fn minimizer_values_match_the_functionals() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for v in 0..VARIANTS.len() {
        let spec = random_spec(&mut rng, v);
        let inst = random_restricted(&mut rng, &spec, 12);
        let mm = minimal_minimizer(&inst).unwrap();
        let h = restricted_hamiltonian(&mm.config, inst.free_sites(), &spec, inst.field(), &EvalOptions::with_radius(8)).unwrap();
        assert!((h.total - mm.value).abs() <= 1e-9 * h.total.abs().max(1.0), "{} vs {}", h.total, mm.value);

        let inst = random_periodic(&mut rng, &spec, 12);
        let mm = minimal_minimizer(&inst).unwrap();
        let (lat, slab) = match inst.objective() {
            Objective::PeriodicG { lattice, slab } => (lattice.clone(), *slab),
            _ => unreachable!(),
        };
        let g = periodic_functional(&mm.config, &lat, &slab, &spec, inst.field(), &EvalOptions::with_radius(8)).unwrap();
        assert!((g.total - mm.value).abs() <= 1e-9 * g.total.abs().max(1.0), "{} vs {}", g.total, mm.value);
    }
}

#[test]
fn every_brute_force_minimizer_attains_the_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let spec = random_spec(&mut rng, 1);
    let inst = random_restricted(&mut rng, &spec, 14);
    let bf = brute_force(&inst).unwrap();
    for m in &bf.minimizers {
        assert_eq!(inst.energy_units(&m.spins), bf.value_units);
        assert_eq!(m.value, bf.value);
    }
    let mut sorted: Vec<Vec<i8>> = bf.minimizers.iter().map(|m| m.spins.clone()).collect();
    sorted.sort();
    assert_eq!(sorted, bf.minimizers.iter().map(|m| m.spins.clone()).collect::<Vec<_>>());
}

#[test]
fn column_has_four_monotone_minimizers() {
    let q = Arc::new(QuotientLattice::new(Direction::new(&[0, 1]).unwrap(), 1, 1).unwrap());
    let inst = Instance::periodic(q, SlabSpec::from_ints(0, 3).unwrap(), &CouplingSpec::nearest_neighbor(1.0), &FieldSpec::zero(2), &EvalOptions::default()).unwrap();
    let bf = brute_force(&inst).unwrap();
    assert_eq!(bf.minimizers.len(), 4);
    for m in &bf.minimizers {
        // Monotone: once −1, −1 above.
        assert!(m.spins.windows(2).all(|w| w[0] >= w[1]), "{:?}", m.spins);
    }
    assert_eq!(minimal_minimizer(&inst).unwrap().spins, vec![-1, -1, -1]);
}

#[test]
fn empty_free_set_gives_the_closure() {
    let ext = ising_core::Configuration::constant(Cube::new(Site::zero(2), 1), -1);
    let inst = Instance::restricted(Vec::new(), &ext, &CouplingSpec::nearest_neighbor(1.0), &FieldSpec::zero(2), &EvalOptions::default()).unwrap();
    let bf = brute_force(&inst).unwrap();
    assert_eq!(bf.minimizers.len(), 1);
    assert_eq!(bf.value, 0.0);
    let mm = minimal_minimizer(&inst).unwrap();
    assert_eq!(mm.config.spin(&Site::zero(2)), -1);
}

#[test]
fn brute_force_guard() {
    let ext = ising_core::Configuration::constant(Cube::new(Site::zero(2), 0), 1);
    let sites: Vec<Site> = Cube::new(Site::zero(2), 2).sites().collect();
    let inst = Instance::restricted(sites, &ext, &CouplingSpec::nearest_neighbor(1.0), &FieldSpec::zero(2), &EvalOptions::default()).unwrap();
    assert_eq!(inst.len(), 25);
    assert!(matches!(brute_force(&inst), Err(ising_core::Error::Guard(25, 24))));
}

#[test]
fn non_ferromagnetic_tables_are_rejected() {
    let spec = CouplingSpec::<f64>::PeriodicTable { tau: 1, dim: 2, s: 0.5, range: 2, table: vec![-1.0] };
    let ext = ising_core::Configuration::constant(Cube::new(Site::zero(2), 0), 1);
    assert!(Instance::restricted(vec![Site::zero(2)], &ext, &spec, &FieldSpec::zero(2), &EvalOptions::default()).is_err());
}

#[test]
fn constrained_solution_is_locally_minimal() {
    let spec = CouplingSpec::<f64>::power_like(1.0, 1.0, 0.5);
    let dir = Direction::new(&[1, 2]).unwrap();
    let slab = SlabSpec::from_ints(0, 4).unwrap();
    let opts = EvalOptions::default();
    let sol = solve_constrained(&dir, 2, 1, &slab, &spec, &FieldSpec::zero(2), &opts).unwrap();
    let q = QuotientLattice::new(dir, 2, 1).unwrap();
    let free = q.fundamental_domain(&slab, ising_core::Endpoints::LeftOpen);
    let mut worst = f64::INFINITY;
    for (a, x) in free.iter().enumerate() {
        for (b, y) in free.iter().enumerate().skip(a) {
            if (*y - *x).linf_norm() > 2 {
                continue;
            }
            for z in free.iter().skip(b) {
                if (*z - *x).linf_norm() > 2 {
                    continue;
                }
                let mut flips = vec![*x, *y, *z];
                flips.sort();
                flips.dedup();
                let d = energy_delta(&sol.config, &flips, &flips, &spec, &FieldSpec::zero(2), &opts).unwrap();
                worst = worst.min(d);
            }
        }
    }
    assert!(worst >= -1e-9, "a flip of at most three sites lowers the energy by {worst}");
}

#[test]
fn large_strip_is_deterministic() {
    let spec = CouplingSpec::<f64>::power_like(1.0, 1.0, 0.5).truncated(8);
    let ext = ising_core::Configuration::from_fn(Cube::new(Site::zero(2), 0), Closure::Planelike {
        dir: Direction::new(&[0, 1]).unwrap(),
        below: num_rational::Ratio::from_integer(0),
        above: num_rational::Ratio::from_integer(1),
    }, |_| 1);
    let sites: Vec<Site> = (-100..100).flat_map(|x| (-20..20).map(move |y| Site::new(&[x, y]))).collect();
    let run = || {
        let inst = Instance::restricted(sites.clone(), &ext, &spec, &FieldSpec::zero(2), &EvalOptions::default()).unwrap();
        minimal_minimizer(&inst).unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.spins, b.spins);
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert!(matches!(a.certificate, Certificate::MinCut { .. }));
}

#[test]
fn instance_dump_serializes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let spec = random_spec(&mut rng, 2);
    let inst = random_periodic(&mut rng, &spec, 10);
    let json = serde_json::to_string(&inst.dump()).unwrap();
    assert!(json.contains("free_sites"));
}
