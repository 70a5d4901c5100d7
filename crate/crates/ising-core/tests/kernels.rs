mod common;

use common::{random_spec, s2, VARIANTS};
use ising_core::kernels::{discretize, lambda_star, mu0};
use ising_core::{ContinuumKernel, CouplingSpec, CouplingTable, FieldSpec, Quadrature, Site};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// ζ(3/2).
const ZETA_3_2: f64 = 2.612_375_348_685_488;

#[test]
fn coupling_examples() {
    let p = CouplingSpec::<f64>::power_like(1.0, 1.0, 0.5);
    assert_eq!(p.coupling(&s2(0, 0), &s2(1, 0)), 1.0);
    assert!((p.coupling(&s2(0, 0), &s2(1, 1)) - 0.176_776_695_3).abs() < 1e-9);
    assert_eq!(p.coupling(&s2(3, 3), &s2(3, 3)), 0.0);
    let b = CouplingSpec::<f64>::appendix_b(5, 100.0, 0.5);
    assert!((b.coupling(&s2(0, 0), &s2(1, 0)) - 100.0).abs() < 1e-12);
    // Sites in different blocks keep the bare power law.
    assert!((b.coupling(&s2(1, 0), &s2(2, 0)) - 1.0).abs() < 1e-12 || (b.coupling(&s2(2, 0), &s2(3, 0)) - 1.0).abs() < 1e-12);
}

#[test]
fn f32_and_f64_agree() {
    let p64 = CouplingSpec::<f64>::power_like(1.0, 1.0, 0.5);
    let p32 = CouplingSpec::<f32>::power_like(1.0, 1.0, 0.5);
    for k in [s2(1, 0), s2(2, 3), s2(-4, 1)] {
        let a = p64.coupling(&Site::zero(2), &k);
        let b = p32.coupling(&Site::zero(2), &k) as f64;
        assert!((a - b).abs() <= 1e-6 * a);
    }
}

#[test]
fn sigma_of_exhausted_truncation_is_zero() {
    let t = CouplingSpec::<f64>::power_like(1.0, 1.0, 0.5).truncated(5);
    assert_eq!(t.sigma(2, 6).unwrap(), 0.0);
    assert!(t.sigma(2, 0).is_err());
}

#[test]
fn sigma_at_two_matches_closed_form() {
    // Σ_{|k|_∞ ≥ 2} |k|₁^{−2.5} = Σ_n 4n·n^{−2.5} − 4·1 − 4·2^{−2.5}.
    let want = 4.0 * ZETA_3_2 - 4.0 - 4.0 * 2f64.powf(-2.5);
    let got = CouplingSpec::<f64>::power_like(1.0, 1.0, 0.5).sigma(2, 2).unwrap();
    assert!(got >= want * (1.0 - 1e-12), "sigma {got} must bound {want} from above");
    assert!((got - want) / want < 1e-3, "sigma {got} vs {want}");
}

#[test]
fn sigma_has_power_decay_bound() {
    for d in [2usize, 3] {
        let c_d = 4.0 * d as f64 * 3f64.powi(d as i32 - 1);
        for s in [0.3, 0.5, 0.8] {
            let p = CouplingSpec::<f64>::power_like(1.0, 2.0, s);
            for r in [1i64, 2, 4, 16, 64] {
                assert!(p.sigma(d, r).unwrap() <= c_d * 2.0 * (r as f64).powf(-s) / s);
            }
        }
    }
}

#[test]
fn sigma_strictly_decreases_on_dyadic_radii() {
    for spec in [
        CouplingSpec::<f64>::power_like(1.0, 1.0, 0.5),
        CouplingSpec::<f64>::power_like(1.0, 1.0, 0.5).truncated(300),
    ] {
        let v: Vec<f64> = (1..=7).map(|k| spec.sigma(2, 1 << k).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
    }
}

#[test]
#[allow(non_snake_case)]
fn Sigma_examples() {
    let p = CouplingSpec::<f64>::power_like(1.0, 1.0, 0.5);
    assert_eq!(p.Sigma(2, 1).unwrap(), p.sigma(2, 1).unwrap());
    for r in [4i64, 8, 16, 32] {
        assert!(p.Sigma(2, 2 * r).unwrap() < p.Sigma(2, r).unwrap());
    }
    let t = CouplingSpec::<f64>::power_like(1.0, 1.0, 0.5).truncated(3);
    let num: f64 = (1..=3).map(|m| t.sigma(2, m).unwrap()).sum();
    let mut last = f64::INFINITY;
    for r in 4..12 {
        let v = t.Sigma(2, r).unwrap();
        assert!((v - num / r as f64).abs() <= 1e-12 * num);
        assert!(v < last);
        last = v;
    }
}

/// σ(m) for PowerLike(1,1,0.5) in d=2 as the full lattice sum minus the
/// finite box |k|_∞ < m, for m = 1..=r.
fn sigma_oracle(r: i64) -> Vec<f64> {
    let total = 4.0 * ZETA_3_2;
    let mut inside = 0.0;
    let mut out = Vec::new();
    for m in 1..=r {
        if m > 1 {
            // Add the shell |k|_∞ = m − 1.
            let n = m - 1;
            for a in -n..=n {
                for b in -n..=n {
                    if a.abs().max(b.abs()) == n {
                        inside += ((a.abs() + b.abs()) as f64).powf(-2.5);
                    }
                }
            }
        }
        out.push(total - inside);
    }
    out
}

#[test]
#[allow(non_snake_case)]
fn Sigma_matches_lattice_sum_oracle() {
    let p = CouplingSpec::<f64>::power_like(1.0, 1.0, 0.5);
    let sig = sigma_oracle(128);
    for r in [1usize, 7, 32, 128] {
        let want: f64 = sig[..r].iter().sum::<f64>() / r as f64;
        let got = p.Sigma(2, r as i64).unwrap();
        assert!(got >= want * (1.0 - 1e-12) && (got - want) / want < 1e-3, "R {r}: {got} vs {want}");
    }
}

#[test]
#[allow(non_snake_case)]
fn Sigma_decays_by_a_factor_ten() {
    // At s = 0.5 the ratio Σ(2^7 τ)/Σ(τ) is about 0.114 (τ = 1) and 0.105
    // (τ = 2), confirmed by the lattice-sum oracle above, so the factor ten
    // is reached one dyadic step later. Faster decay meets it at 2^7 τ.
    for (s, k) in [(0.5, 8), (0.6, 7), (0.75, 7)] {
        let p = CouplingSpec::<f64>::power_like(1.0, 1.0, s);
        for tau in [1i64, 2] {
            let a = p.Sigma(2, tau).unwrap();
            let b = p.Sigma(2, (1 << k) * tau).unwrap();
            assert!(b < 0.1 * a, "s {s}: Sigma({}) = {b} vs Sigma({tau}) = {a}", (1 << k) * tau);
        }
    }
    let p = CouplingSpec::<f64>::power_like(1.0, 1.0, 0.5);
    let r = p.Sigma(2, 128).unwrap() / p.Sigma(2, 1).unwrap();
    assert!((r - 0.1142).abs() < 1e-3, "{r}");
}

#[test]
fn coupling_is_symmetric_and_periodic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for v in 0..VARIANTS.len() {
        let spec = random_spec(&mut rng, v);
        let tau = spec.period();
        for _ in 0..2500 {
            let i = s2(rng.gen_range(-30..30), rng.gen_range(-30..30));
            let j = i + s2(rng.gen_range(-6..=6), rng.gen_range(-6..=6));
            assert_eq!(spec.coupling(&i, &j), spec.coupling(&j, &i));
            for e in [s2(tau, 0), s2(0, tau)] {
                assert_eq!(spec.coupling(&(i + e), &(j + e)), spec.coupling(&i, &j), "{}", VARIANTS[v]);
            }
            assert!(spec.coupling(&i, &j) >= 0.0);
        }
        let i = s2(rng.gen_range(-30..30), rng.gen_range(-30..30));
        for e in [s2(1, 0), s2(0, 1)] {
            assert!(spec.coupling(&i, &(i + e)) >= spec.nn_floor() * (1.0 - 1e-12));
        }
    }
}

#[test]
fn coupling_table_matches_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for v in 0..VARIANTS.len() {
        let spec = random_spec(&mut rng, v);
        let t = CouplingTable::new(&spec, 2, 6).unwrap();
        for _ in 0..500 {
            let i = s2(rng.gen_range(-20..20), rng.gen_range(-20..20));
            let k = s2(rng.gen_range(-6..=6), rng.gen_range(-6..=6));
            assert_eq!(t.get(&i, &k), spec.coupling(&i, &(i + k)));
        }
    }
}

#[test]
fn field_examples() {
    let z = FieldSpec::<f64>::zero(2);
    assert_eq!(z.field(&s2(3, -7)), 0.0);
    let a = 0.25;
    // Row-major class order: (0,0), (0,1), (1,0), (1,1).
    let f = FieldSpec::new(2, 2, vec![a, a, -a, -a], a).unwrap();
    assert_eq!(f.field(&s2(0, 0)), a);
    assert_eq!(f.field(&s2(2, 4)), a);
    assert_eq!(f.field(&s2(1, 0)), -a);
    assert_eq!(f.field(&s2(3, 1)), -a);
    assert!(FieldSpec::new(2, 2, vec![0.1, 0.0, 0.0, 0.0], 1.0).is_err());
    assert!(FieldSpec::new(2, 2, vec![2.0, -2.0, 0.0, 0.0], 1.0).is_err());
}

#[test]
fn mu0_and_lambda_star() {
    assert!((mu0(1.0f64, 2, 2) - 0.25).abs() < 1e-15);
    assert!((lambda_star(1.0, 2, 0.5) - (2.0 * 2f64.sqrt()).powf(-2.5)).abs() < 1e-15);
}

#[test]
fn continuum_kernel_bounds_and_symmetry() {
    let k = ContinuumKernel::periodic_cosine(2, 0.5, 1.0, 3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let y = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        assert_eq!(k.eval(&x, &y), k.eval(&y, &x));
        let r: f64 = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        let base = r.powf(-2.5);
        let v = k.eval(&x, &y);
        assert!(v >= base * (1.0 - 1e-12) && v <= 3.0 * base * (1.0 + 1e-12));
        // ℤ^d-periodic in the pair.
        let v1 = k.eval(&[x[0] + 1.0, x[1] - 2.0], &[y[0] + 1.0, y[1] - 2.0]);
        assert!((v1 - v).abs() <= 1e-9 * v);
    }
}

/// Stratified sampling of `∫∫ |x−y|^{−2.5}` over unit cells at `0` and `c`.
fn sampled_pair(c: [f64; 2], n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let h = 1.0 / n as f64;
    let mut acc = 0.0;
    for a in 0..n * n {
        for b in 0..n * n {
            let x0 = -0.5 + ((a / n) as f64 + rng.gen::<f64>()) * h;
            let x1 = -0.5 + ((a % n) as f64 + rng.gen::<f64>()) * h;
            let y0 = c[0] - 0.5 + ((b / n) as f64 + rng.gen::<f64>()) * h;
            let y1 = c[1] - 0.5 + ((b % n) as f64 + rng.gen::<f64>()) * h;
            acc += ((x0 - y0).powi(2) + (x1 - y1).powi(2)).powf(-1.25);
        }
    }
    acc / (n as f64).powi(4)
}

#[test]
fn discretized_coupling_matches_sampling_oracle() {
    let spec = discretize::<f64>(&ContinuumKernel::fractional(2, 0.5, 1.0), 1.0, Quadrature::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let got = spec.coupling(&Site::zero(2), &s2(2, 0));
    let want = sampled_pair([2.0, 0.0], 32, &mut rng);
    assert!((got - want).abs() / want < 1e-3, "{got} vs {want}");
}

#[test]
fn discretized_coupling_bounds() {
    for kernel in [ContinuumKernel::fractional(2, 0.5, 1.0), ContinuumKernel::periodic_cosine(2, 0.5, 1.0, 2.0)] {
        let lam = lambda_star(kernel.lambda, 2, 0.5);
        let mut upper = None;
        for eps in [1.0, 0.5, 0.25] {
            let spec = discretize::<f64>(&kernel, eps, Quadrature::default()).unwrap();
            let dk = match &spec {
                CouplingSpec::Discretized(k) => k.clone(),
                _ => unreachable!(),
            };
            let big = *upper.get_or_insert(dk.upper_constant());
            assert_eq!(dk.upper_constant(), big, "the upper constant must not depend on eps");
            let cells = (1.0 / eps).round() as i64;
            for c in 0..cells * cells {
                let i = s2(c / cells, c % cells);
                for a in -8..=8i64 {
                    for b in -8..=8i64 {
                        let k = s2(a, b);
                        if k.is_zero() {
                            continue;
                        }
                        let j = i + k;
                        let v = spec.coupling(&i, &j);
                        assert_eq!(v, spec.coupling(&j, &i));
                        let p = (k.l1_norm() as f64).powf(-2.5);
                        assert!(v >= lam * p && v <= big * p, "eps {eps}, i {i}, k {k}: {v} outside [{}, {}]", lam * p, big * p);
                    }
                }
            }
        }
    }
}

#[test]
fn discretize_rejects_bad_eps() {
    let k = ContinuumKernel::fractional(2, 0.5, 1.0);
    assert!(discretize::<f64>(&k, 0.0, Quadrature::default()).is_err());
    assert!(discretize::<f64>(&k, -1.0, Quadrature::default()).is_err());
}

proptest! {
    #[test]
    fn power_like_is_monotone_in_distance(a in -20i64..20, b in -20i64..20, s in 0.05f64..0.95) {
        prop_assume!(a != 0 || b != 0);
        let p = CouplingSpec::<f64>::power_like(1.0, 1.0, s);
        let k = s2(a, b);
        let further = k + s2(a.signum().max(0) * 1 + if a == 0 { 1 } else { 0 }, 0);
        if further.l1_norm() > k.l1_norm() {
            prop_assert!(p.coupling(&Site::zero(2), &further) < p.coupling(&Site::zero(2), &k));
        }
    }
}
