// SPDX-License-Identifier: Apache-2.0

use granular_core::config::parse_with_seed;
use granular_core::dynamics::{drift, simulate, CoupledSimulation, Integrator, Simulation};
use granular_core::experiments::concentration::fit_constant;
use granular_core::experiments::decay::{b_alpha, envelope_poly};
use granular_core::metrics::assignment_exact;
use granular_core::output::OutputDir;
use granular_core::potentials::{check_condition_c, check_convexity_at_infinity, ProbeSpec};
use granular_core::{ParticleEnsemble, Potential, Scheme, SimConfig, StepPolicy};
use proptest::collection::vec;
use proptest::prelude::*;

fn quartic(n: usize, dim: usize, runs: usize, seed: u64) -> SimConfig {
    let text = format!(
        r#"
[system]
n = {n}
dim = {dim}
mode = "projected"
runs = {runs}
[potential.w]
kind = "power_law"
exponent = 4.0
[time]
horizon = 0.2
observation_stride = 0.05
[initial]
kind = "gaussian"
variance = 2.0
[initial_b]
kind = "uniform"
half_width = 2.0
"#
    );
    parse_with_seed(&text, Some(seed)).unwrap()
}

fn ensemble_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (2usize..24, 1usize..4).prop_flat_map(|(n, d)| (Just(n), Just(d), vec(-3.0f64..3.0, n * d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interaction_drift_sums_to_zero((n, d, x) in ensemble_strategy()) {
        let ens = ParticleEnsemble::new(x, n, d, 0).unwrap();
        let b = drift(&ens, &Potential::zero(), &Potential::power_law(4.0)).unwrap();
        let scale: f64 = b.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        for k in 0..d {
            let s: f64 = (0..n).map(|i| b[i * d + k]).sum();
            prop_assert!(s.abs() <= 1e-12 * scale, "{s}");
        }
    }

    /// The difference of two ensembles on one lineage moves by the drift
    /// difference only.
    #[test]
    fn coupled_difference_is_noise_free(
        (n, d, x) in ensemble_strategy(),
        shift in vec(-1.0f64..1.0, 72),
        seed in any::<u64>(),
    ) {
        let y: Vec<f64> = x.iter().zip(shift.iter().cycle()).map(|(a, s)| a + s).collect();
        let v = Potential::quadratic(0.5);
        let w = Potential::power_law(4.0);
        let mut a = ParticleEnsemble::new(x, n, d, seed).unwrap();
        let mut b = ParticleEnsemble::new(y, n, d, seed).unwrap();
        let (da, db) = (drift(&a, &v, &w).unwrap(), drift(&b, &v, &w).unwrap());
        let z0: Vec<f64> = a.positions.iter().zip(&b.positions).map(|(p, q)| p - q).collect();
        let dt = 1e-3;
        let mut integ = Integrator::new(&v, &w, StepPolicy::new(Scheme::EulerMaruyama, dt)).unwrap();
        integ.advance_pair(&mut a, &mut b).unwrap();
        for k in 0..n * d {
            let z1 = a.positions[k] - b.positions[k];
            let expected = z0[k] + dt * (da[k] - db[k]);
            prop_assert!((z1 - expected).abs() <= 1e-12 * (1.0 + expected.abs()), "{z1} vs {expected}");
        }
    }

    #[test]
    fn relabelling_permutes_trajectories(seed in any::<u64>(), rot in 1usize..8) {
        let cfg = quartic(8, 1, 1, seed);
        let e = granular_core::dynamics::initial_ensemble(&cfg, &cfg.initial, 0).unwrap();
        let perm: Vec<usize> = (0..8).map(|k| (k + rot) % 8).collect();
        let p = e.permuted(&perm);
        let a = Simulation::from_ensemble(&cfg, 0, e).unwrap().last().unwrap().unwrap();
        let b = Simulation::from_ensemble(&cfg, 0, p).unwrap().last().unwrap().unwrap();
        for (k, &src) in perm.iter().enumerate() {
            prop_assert!((a.ensemble.positions[src] - b.ensemble.positions[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn canonical_text_is_stable(
        n in 2usize..200,
        dim in 1usize..4,
        runs in 1usize..10,
        stiffness in 0.1f64..5.0,
        horizon in 0.01f64..10.0,
        seed in any::<u64>(),
    ) {
        let text = format!(
            "[system]\nn = {n}\ndim = {dim}\nruns = {runs}\n[potential.w]\nkind = \"quadratic\"\nstiffness = {stiffness}\n[time]\nhorizon = {horizon}\n[initial]\nkind = \"uniform\"\nhalf_width = 1.0\n"
        );
        let cfg = parse_with_seed(&text, Some(seed)).unwrap();
        let canon = cfg.canonical();
        let again = SimConfig::parse(&canon).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.canonical(), canon);
        prop_assert_eq!(again.content_hash(), cfg.content_hash());
    }

    #[test]
    fn output_names_stay_inside(name in "[a-z./\\\\]{0,12}") {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path()).unwrap();
        match out.path(&name) {
            Ok(p) => prop_assert_eq!(p.parent().unwrap(), dir.path()),
            Err(_) => prop_assert!(name.is_empty() || name.contains('/') || name.contains('\\') || name == "." || name == ".."),
        }
    }

    /// The fitted constant makes the bound dominate any non-increasing tail.
    #[test]
    fn fitted_bound_dominates_tail(
        n in 2usize..500,
        mut tail in vec(0.0f64..1.0, 1..20),
        step in 0.01f64..0.5,
    ) {
        tail.sort_by(|a, b| b.total_cmp(a));
        let grid: Vec<f64> = (1..=tail.len()).map(|k| k as f64 * step).collect();
        let c = fit_constant(n, &grid, &tail);
        for (r, p) in grid.iter().zip(&tail) {
            let bound = if c == 0.0 { 0.0 } else { (-(n as f64) * r * r / c).exp() };
            prop_assert!(*p <= bound, "tail {p} above bound {bound} at r = {r}");
        }
    }

    #[test]
    fn polynomial_envelope_decreases(
        xi0 in 1e-3f64..100.0,
        a in 0.1f64..10.0,
        alpha in 0.0f64..4.0,
        t in 0.0f64..50.0,
        dt in 1e-3f64..10.0,
    ) {
        let e0 = envelope_poly(xi0, a, alpha, t);
        let e1 = envelope_poly(xi0, a, alpha, t + dt);
        prop_assert!(e1 <= e0 && e0 <= xi0 * (1.0 + 1e-12));
        prop_assert!(b_alpha(a, alpha) <= a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn thread_count_is_invisible(seed in any::<u64>(), n in 2usize..40, dim in 1usize..3) {
        let cfg = quartic(n, dim, 3, seed);
        let run_on = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| simulate(&cfg).unwrap())
        };
        prop_assert_eq!(run_on(1), run_on(5));
    }

    /// Any coupling upper-bounds the optimal one.
    #[test]
    fn coupled_distance_dominates_exact_w2(seed in any::<u64>(), n in 2usize..12) {
        let cfg = quartic(n, 2, 1, seed);
        let law_b = cfg.initial_b.clone().unwrap();
        let sim = CoupledSimulation::new(&cfg, &cfg.initial, &law_b, cfg.experiment.coupling, 0).unwrap();
        for snap in sim {
            let snap = snap.unwrap();
            let w2 = assignment_exact(&snap.a.positions, &snap.b.positions, 2, 2).unwrap().value;
            prop_assert!(snap.xi.sqrt() >= w2 - 1e-12, "{} < {w2}", snap.xi.sqrt());
        }
    }

    #[test]
    fn condition_reports_are_reproducible(seed in any::<u64>(), dim in 1usize..3) {
        let spec = ProbeSpec::new(64, 3.0, seed);
        let w = Potential::power_law(4.0);
        let grid = [0.1, 0.3, 0.9];
        let first = check_condition_c(&w, dim, w.declared_a, w.declared_alpha, &spec, &grid).unwrap();
        let second = check_condition_c(&w, dim, w.declared_a, w.declared_alpha, &spec, &grid).unwrap();
        prop_assert_eq!(first, second);
    }
}

/// For a quadratic both checkers see the same uniform convexity.
#[test]
fn quadratic_checkers_agree() {
    let w = Potential::quadratic(1.5);
    let spec = ProbeSpec::new(256, 4.0, 3);
    let conv = check_convexity_at_infinity(&w, 2, &spec).unwrap();
    let lambda = conv.fitted_constants["lambda"];
    assert!((lambda - 3.0).abs() < 0.03 * 3.0, "{lambda}");
    let at = check_condition_c(&w, 2, lambda, 0.0, &spec, &[0.1, 0.5]).unwrap();
    assert!(at.satisfied(), "{at:?}");
    let above = check_condition_c(&w, 2, lambda * 1.1, 0.0, &spec, &[0.1, 0.5]).unwrap();
    assert!(!above.satisfied());
}
