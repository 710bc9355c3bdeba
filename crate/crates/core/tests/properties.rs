use latmap::backend::*;
use latmap::engine::{brute_force_log_z, partition_function, EngineOptions};
use latmap::extract::extract_effective_model;
use latmap::geometry::{Boundary, LatticeGeometry};
use latmap::lgt::{build_zq_lgt, check_gauge_invariance_exhaustive};
use latmap::model::{evaluate_energy, Coupling, SpinModel, Term};
use latmap::quantum::{build_incidence, stabilizer_generators};
use latmap::rewrite::{check_fix_set, merge_face, replay, set_coupling, RewriteTrace, Rule};
use latmap::walsh::{energies_to_couplings, fwht, EnergyVector};
use proptest::prelude::*;

fn parity_model(n: usize, terms: Vec<(Vec<usize>, f64)>) -> SpinModel {
    let mut m = SpinModel::binary(n);
    for (mut s, j) in terms {
        s.sort_unstable();
        s.dedup();
        m.push(Term::parity(s, j));
    }
    m
}

fn arb_model(max_spins: usize, max_terms: usize) -> impl Strategy<Value = SpinModel> {
    (2..=max_spins).prop_flat_map(move |n| {
        prop::collection::vec((prop::collection::vec(0..n, 1..=4), -1.5f64..1.5), 1..=max_terms)
            .prop_map(move |terms| parity_model(n, terms))
    })
}

fn small_geometry() -> impl Strategy<Value = LatticeGeometry> {
    prop_oneof![
        Just(([1, 1, 0, 0], Boundary::Open)),
        Just(([2, 1, 0, 0], Boundary::Open)),
        Just(([2, 2, 0, 0], Boundary::Open)),
        Just(([2, 2, 0, 0], Boundary::Periodic)),
        Just(([1, 1, 1, 0], Boundary::Open)),
    ]
    .prop_map(|(d, b)| LatticeGeometry::new(d, b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn closed_forms_match_tables(q in 2u32..=4, k in 1usize..=3, j in -2.0f64..2.0, coef in prop::collection::vec(-2i64..=2, 3)) {
        let mut m = SpinModel::new(vec![q; k]);
        let support: Vec<usize> = (0..k).collect();
        m.push(Term::clock_oriented(support.clone(), coef[..k].to_vec(), j));
        if q == 2 {
            m.push(Term::parity(support.clone(), j));
        }
        let levels = vec![q; k];
        for t in &m.terms {
            let table = t.to_table(&levels).unwrap();
            for (cfg, want) in table.iter().enumerate() {
                let vals: Vec<u32> = (0..k).map(|i| (cfg / (q as usize).pow(i as u32) % q as usize) as u32).collect();
                prop_assert!((t.local_energy(&vals, &levels).unwrap() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pure_gauge_models_are_invariant(g in small_geometry(), seed in 0u64..1000) {
        let js: Vec<f64> = (0..g.num_faces()).map(|f| ((f as u64 * 7919 + seed) % 200) as f64 / 100.0 - 1.0).collect();
        let m = build_zq_lgt(&g, 2, &js).unwrap();
        prop_assert!(check_gauge_invariance_exhaustive(&m, &g).unwrap().invariant);
    }

    #[test]
    fn term_order_does_not_matter(m in arb_model(12, 8), beta in 0.05f64..2.0) {
        let mut rev = m.clone();
        rev.terms.reverse();
        let (a, b) = (partition_function(&m, beta).unwrap().log_z, partition_function(&rev, beta).unwrap().log_z);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        prop_assert!((a - brute_force_log_z(&m, beta).unwrap()).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn constraints_alone_count_solutions(m in arb_model(10, 6), pow in 0i64..4) {
        let mut c = m.clone();
        for t in &mut c.terms {
            t.set_coupling(Coupling::PlusInfinity).unwrap();
        }
        c.push(Term::parity(vec![0], 0.0));
        c.log2_prefactor = pow;
        let mut count = 0u64;
        for cfg in 0u32..1 << c.num_spins {
            let ok = c.terms.iter().filter(|t| t.is_infinite()).all(|t| t.support.iter().map(|&i| cfg >> i & 1).sum::<u32>() % 2 == 0);
            count += ok as u64;
        }
        let lz = partition_function(&c, 0.7).unwrap().log_z;
        prop_assert!((lz - (pow as f64 * std::f64::consts::LN_2 + (count as f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn fwht_twice_scales(n in 0usize..=12, seed in any::<u64>()) {
        let a: Vec<f64> = (0..1usize << n).map(|i| ((i as u64).wrapping_mul(seed | 1) % 1000) as f64 / 500.0 - 1.0).collect();
        let mut b = a.clone();
        fwht(&mut b);
        fwht(&mut b);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x * (1u64 << n) as f64 - y).abs() < 1e-9);
        }
    }

    #[test]
    fn shifting_energies_moves_only_j0(n in 0usize..=6, c in -5.0f64..5.0, seed in any::<u64>()) {
        let lam: Vec<f64> = (0..1usize << n).map(|i| ((i as u64 ^ seed) % 97) as f64 / 10.0).collect();
        let shifted: Vec<f64> = lam.iter().map(|x| x + c).collect();
        let a = energies_to_couplings(&EnergyVector::new(n, lam).unwrap());
        let b = energies_to_couplings(&EnergyVector::new(n, shifted).unwrap());
        prop_assert!((b.values[0] - a.values[0] - c).abs() < 1e-12);
        for (x, y) in a.values.iter().zip(&b.values).skip(1) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn merge_matches_constrained(m in arb_model(14, 6), pick in any::<prop::sample::Index>(), dep in any::<prop::sample::Index>()) {
        let f = pick.index(m.terms.len());
        let d = *dep.get(&m.terms[f].support);
        let merged = merge_face(&m, f, d).unwrap();
        for t in &merged.terms {
            let mut s = t.support.clone();
            s.sort_unstable();
            s.dedup();
            prop_assert_eq!(s.len(), t.support.len());
        }
        let constrained = set_coupling(&m, f, Coupling::PlusInfinity).unwrap();
        for beta in [0.1, 0.25, 0.5, 0.75, 1.0] {
            let (a, b) = (partition_function(&merged, beta).unwrap().log_z, brute_force_log_z(&constrained, beta).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn extraction_is_idempotent(m in arb_model(10, 6), hard in prop::collection::vec(any::<bool>(), 6)) {
        let mut c = m.clone();
        for (t, h) in c.terms.iter_mut().zip(hard) {
            if h {
                t.set_coupling(Coupling::PlusInfinity).unwrap();
            }
        }
        let once = extract_effective_model(&c).unwrap().model;
        let twice = extract_effective_model(&once).unwrap().model;
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn traces_replay_byte_identically(m in arb_model(8, 6), steps in prop::collection::vec((any::<prop::sample::Index>(), 0u8..3, 0.1f64..2.0), 1..5)) {
        let mut trace = RewriteTrace::default();
        for (idx, rule, j) in steps {
            let f = idx.index(m.terms.len());
            match rule {
                0 => trace.push(Rule::Delete, f, serde_json::Value::Null),
                1 => trace.push(Rule::FiniteJ, f, j.into()),
                _ => trace.push(Rule::Couple, f, j.into()),
            }
        }
        let direct = replay(&trace, &m).unwrap();
        let again = replay(&RewriteTrace::from_json_str(&trace.to_json_string()).unwrap(), &m).unwrap();
        prop_assert_eq!(direct.to_json_string(), again.to_json_string());
    }

    #[test]
    fn generator_counts_add_up(g in small_geometry()) {
        let s = stabilizer_generators(&build_incidence(&g)).unwrap();
        prop_assert_eq!(s.x_generators.len() + s.z_generators.len(), g.num_faces());
        prop_assert_eq!(s.x_generators.len(), s.rank);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn direct_targets_compile_and_verify(m in arb_model(5, 5), boundary in any::<bool>()) {
        let backend = if boundary { Backend::Lgt3dBoundary } else { Backend::Lgt4d };
        let inst = compile_target(&m, backend, Mode::Direct).unwrap();
        prop_assert!(check_fix_set(&inst.layout.geometry, &inst.layout.fixed).is_ok());
        let r = verify_instance(&m, &inst, &DEFAULT_BETAS, DEFAULT_TOL, &EngineOptions::default()).unwrap();
        prop_assert!(r.passed, "{}", r.table());
    }

    #[test]
    fn perturbed_couplings_fail(m in arb_model(4, 4), pick in any::<prop::sample::Index>(), up in any::<bool>()) {
        let mut inst = compile_target(&m, Backend::Lgt4d, Mode::Direct).unwrap();
        let finite: Vec<usize> = (0..inst.layout.roles.len()).filter(|&f| matches!(inst.layout.roles[f], FaceRole::Finite(j) if j != 0.0)).collect();
        prop_assume!(!finite.is_empty());
        let f = *pick.get(&finite);
        let FaceRole::Finite(j) = inst.layout.roles[f] else { unreachable!() };
        inst.layout.roles[f] = FaceRole::Finite(j + if up { 1e-3 } else { -1e-3 });
        inst.trace = inst.layout.trace();
        let r = verify_instance(&m, &inst, &DEFAULT_BETAS, DEFAULT_TOL, &EngineOptions::default()).unwrap();
        prop_assert!(!r.passed);
    }
}

#[test]
fn clock_energy_uses_the_cosine() {
    let mut m = SpinModel::new(vec![3, 3]);
    m.push(Term::clock(vec![0, 1], 1.0));
    let e = evaluate_energy(&m, &[1, 1]).unwrap();
    assert!((e + (2.0 * std::f64::consts::PI * 2.0 / 3.0).cos()).abs() < 1e-15);
}
