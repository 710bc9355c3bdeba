use latmap::backend::*;
use latmap::engine::EngineOptions;
use latmap::error::Error;
use latmap::model::{SpinModel, Term};
use latmap::walsh::CouplingVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verify(target: &SpinModel, inst: &CompiledInstance) -> VerifyReport {
    let r = verify_instance(target, inst, &DEFAULT_BETAS, DEFAULT_TOL, &EngineOptions::default()).unwrap();
    assert!(r.passed, "{}", r.table());
    r
}

#[test]
fn ising_grids_verify() {
    for (n, m) in [(1, 1), (3, 1), (2, 2), (3, 3)] {
        let mut rng = ChaCha8Rng::seed_from_u64((n * 10 + m) as u64);
        let mut g = Ising2d::uniform(n, m, 1.0, 0.0);
        for v in g.horizontal.iter_mut().chain(g.vertical.iter_mut()).chain(g.fields.iter_mut()) {
            *v = rng.gen_range(-1.0..1.0);
        }
        let inst = compile_2d_ising(&g).unwrap();
        assert_eq!(inst.dims(), [2 * n, 4, 1, m]);
        verify(&g.target().unwrap(), &inst);
    }
}

#[test]
fn pair_matches_cosh() {
    let mut t = SpinModel::binary(2);
    t.push(Term::parity(vec![0, 1], 0.9));
    let inst = compile_target(&t, Backend::Lgt4d, Mode::Direct).unwrap();
    let r = verify(&t, &inst);
    for row in &r.rows {
        let want = 2f64.ln() + (2.0 * (0.9 * row.beta).cosh()).ln();
        assert!((row.log_z_target - want).abs() < 1e-12);
    }
}

#[test]
fn superclique_layout_counts() {
    for n in 1..=4 {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let j = CouplingVector::new(n, (0..1 << n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let inst = layout_superclique(n, &j).unwrap();
        assert_eq!(inst.dims(), superclique_dims(n));
        let r = verify(&inst.target.clone(), &inst);
        assert!(r.terms_match);
        let eff = latmap::extract::extract_with_keep(&inst.model().unwrap(), &inst.logical_map).unwrap();
        assert_eq!(eff.model.terms.len(), (1 << n) - 1);
        assert!(eff.model.fanout().iter().all(|&f| f == 1 << (n - 1)));
    }
}

#[test]
fn table_target_in_superclique_mode() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut t = SpinModel::binary(3);
    t.push(Term::table(vec![0, 1, 2], (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()));
    for backend in [Backend::Lgt4d, Backend::Lgt3dBoundary] {
        let inst = compile_target(&t, backend, Mode::Superclique).unwrap();
        verify(&t, &inst);
    }
}

#[test]
fn clique4_sizes() {
    let inst = build_4clique(5, 0.5, None).unwrap();
    assert_eq!(inst.dims(), [10, 20, 1, 1]);
    verify(&inst.target.clone(), &inst);
    let eff = latmap::extract::extract_with_keep(&inst.model().unwrap(), &inst.logical_map).unwrap();
    assert_eq!(eff.model.terms.len(), 5);
    assert!(eff.model.fanout().iter().all(|&f| f == 4));
    assert_eq!(build_4clique(4, 1.0, None).unwrap().target.terms.len(), 1);
    assert!(build_4clique(3, 1.0, None).is_err());
    let fj = build_4clique(4, 1.0, Some(20.0)).unwrap();
    assert!(fj.layout.roles.iter().all(|r| *r != FaceRole::Merge));
}

#[test]
fn clock_chain_through_encoding() {
    let mut t = SpinModel::new(vec![3; 3]);
    t.push(Term::clock(vec![0, 1], 1.0));
    t.push(Term::clock(vec![1, 2], -0.5));
    let inst = compile_target(&t, Backend::Lgt4d, Mode::Direct).unwrap();
    assert!(inst.encoding.is_some());
    let r = verify(&t, &inst);
    assert!(r.rows.iter().all(|row| row.penalty.is_some()));
}

#[test]
fn fanout_three_needs_boundary() {
    let mut t = SpinModel::binary(4);
    for k in 1..4 {
        t.push(Term::parity(vec![0, k], 0.3 * k as f64));
    }
    assert!(matches!(compile_target(&t, Backend::Lgt3d, Mode::Direct), Err(Error::EndsBound { fanout: 3 })));
    let inst = compile_target(&t, Backend::Lgt3dBoundary, Mode::Direct).unwrap();
    assert!(inst.layout.fixed.iter().any(|f| f.1 == latmap::rewrite::FixKind::Boundary));
    verify(&t, &inst);
}

#[test]
fn perturbed_face_fails() {
    let g = Ising2d::uniform(2, 2, 0.7, 0.2);
    let mut inst = compile_2d_ising(&g).unwrap();
    let f = inst.layout.roles.iter().position(|r| matches!(r, FaceRole::Finite(j) if *j == 0.7)).unwrap();
    inst.layout.roles[f] = FaceRole::Finite(0.7 + 1e-3);
    inst.trace = inst.layout.trace();
    let r = verify_instance(&g.target().unwrap(), &inst, &DEFAULT_BETAS, DEFAULT_TOL, &EngineOptions::default()).unwrap();
    assert!(!r.passed);
    assert_eq!(r.mismatches.len(), 1);
    assert!(r.max_residual > DEFAULT_TOL);
    assert!(matches!(r.into_result(), Err(Error::Verification(_))));
}

#[test]
fn instance_json_round_trip() {
    let g = Ising2d::uniform(2, 1, 0.4, -0.1);
    let inst = compile_2d_ising(&g).unwrap();
    let text = inst.to_json_string();
    let back = CompiledInstance::from_json_str(&text).unwrap();
    assert_eq!(back.to_json_string(), text);
    assert_eq!(back.model().unwrap().to_json_string(), inst.model().unwrap().to_json_string());
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["dims", "backend", "faces", "fixed_edges", "logical_map", "trace", "accounting"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}
