//! Model builders on lattices and the gauge transformation.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{LatticeGeometry, FACE_SIGNS};
use crate::model::{evaluate_energy, Coupling, Interaction, SpinModel, Term};

/// Z_q lattice gauge theory with one spin per edge and one term per face.
///
/// Term `f` belongs to face `f`. For `q = 2` the face terms are written in
/// parity form, which has the same energies as the clock form.
pub fn build_zq_lgt(geom: &LatticeGeometry, q: u32, couplings: &[f64]) -> Result<SpinModel> {
    let c: Vec<Coupling> = couplings.iter().map(|j| Coupling::Finite(*j)).collect();
    build_zq_lgt_with(geom, q, &c)
}

pub fn build_zq_lgt_with(geom: &LatticeGeometry, q: u32, couplings: &[Coupling]) -> Result<SpinModel> {
    if q < 2 {
        return Err(Error::InvalidArgument(format!("q = {q}")));
    }
    if couplings.len() != geom.num_faces() {
        return Err(Error::InvalidArgument(format!("{} couplings for {} faces", couplings.len(), geom.num_faces())));
    }
    let mut m = SpinModel::new(vec![q; geom.num_edges()]);
    m.terms.reserve(geom.num_faces());
    for (f, c) in geom.faces().iter().zip(couplings) {
        let support = f.edges.to_vec();
        let interaction = if q == 2 {
            Interaction::Parity { coupling: *c }
        } else {
            Interaction::Clock { coupling: *c, coefficients: FACE_SIGNS.to_vec() }
        };
        m.terms.push(Term { support, interaction });
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsingConvention {
    /// `H = -sum J sigma_i sigma_j - sum h sigma_i`, sigma = (-1)^s
    PmOne,
    /// `H = -sum J n_i n_j - sum h n_i`, n = s in {0, 1}
    ZeroOne,
}

/// Ising model stored in parity form. Fields of exactly zero are omitted.
pub fn build_ising_model(
    num_spins: usize,
    adjacency: &[(usize, usize)],
    couplings: &[f64],
    fields: &[f64],
    convention: IsingConvention,
) -> Result<SpinModel> {
    if couplings.len() != adjacency.len() {
        return Err(Error::InvalidArgument("one coupling per edge required".into()));
    }
    if !fields.is_empty() && fields.len() != num_spins {
        return Err(Error::InvalidArgument("one field per spin required".into()));
    }
    let mut seen = HashSet::new();
    for &(a, b) in adjacency {
        if a == b {
            return Err(Error::InvalidArgument(format!("self-loop at {a}")));
        }
        if a >= num_spins || b >= num_spins {
            return Err(Error::InvalidArgument(format!("edge ({a},{b}) out of range")));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(Error::InvalidArgument(format!("duplicate edge ({a},{b})")));
        }
    }
    let mut m = SpinModel::binary(num_spins);
    match convention {
        IsingConvention::PmOne => {
            for (&(a, b), &j) in adjacency.iter().zip(couplings) {
                m.push(Term::parity(vec![a, b], j));
            }
            for (i, &h) in fields.iter().enumerate() {
                if h != 0.0 {
                    m.push(Term::parity(vec![i], h));
                }
            }
        }
        IsingConvention::ZeroOne => {
            // n = (1 - sigma) / 2
            let mut field = vec![0.0; num_spins];
            for (&(a, b), &j) in adjacency.iter().zip(couplings) {
                m.push(Term::parity(vec![a, b], j / 4.0));
                field[a] -= j / 4.0;
                field[b] -= j / 4.0;
                m.energy_offset -= j / 4.0;
            }
            for (i, &h) in fields.iter().enumerate() {
                field[i] -= h / 2.0;
                m.energy_offset -= h / 2.0;
            }
            for (i, h) in field.into_iter().enumerate() {
                if h != 0.0 {
                    m.push(Term::parity(vec![i], h));
                }
            }
        }
    }
    Ok(m)
}

/// LGT with q-level matter on the vertices. Edge spins come first, vertex `v`
/// is spin `num_edges + v`.
#[derive(Debug, Clone)]
pub struct MatterFieldModel {
    pub model: SpinModel,
    pub num_edges: usize,
    pub num_vertices: usize,
}

impl MatterFieldModel {
    pub fn vertex_spin(&self, v: usize) -> usize {
        self.num_edges + v
    }
}

pub fn build_matter_lgt(
    geom: &LatticeGeometry,
    q: u32,
    face_couplings: &[f64],
    edge_couplings: &[f64],
) -> Result<MatterFieldModel> {
    if q < 2 {
        return Err(Error::InvalidArgument(format!("q = {q}")));
    }
    if face_couplings.len() != geom.num_faces() || edge_couplings.len() != geom.num_edges() {
        return Err(Error::InvalidArgument("coupling count mismatch".into()));
    }
    let ne = geom.num_edges();
    let nv = geom.num_vertices();
    let mut m = SpinModel::new(vec![q; ne + nv]);
    for (f, &j) in geom.faces().iter().zip(face_couplings) {
        m.push(Term::clock_oriented(f.edges.to_vec(), FACE_SIGNS.to_vec(), j));
    }
    for (e, &j) in edge_couplings.iter().enumerate() {
        let (t, h) = geom.edge_endpoints(e);
        m.push(Term::clock_oriented(vec![ne + t, e, ne + h], vec![-1, 1, 1], j));
    }
    Ok(MatterFieldModel { model: m, num_edges: ne, num_vertices: nv })
}

/// Gauge transformation at `vertex`: +1 on edges leaving it, -1 on edges
/// entering it, and +1 on the vertex spin when matter is present.
pub fn gauge_transform(geom: &LatticeGeometry, q: u32, vertex: usize, config: &[u32]) -> Result<Vec<u32>> {
    if vertex >= geom.num_vertices() {
        return Err(Error::InvalidArgument(format!("vertex {vertex} out of range")));
    }
    let ne = geom.num_edges();
    let matter = config.len() == ne + geom.num_vertices();
    if config.len() != ne && !matter {
        return Err(Error::InvalidArgument("configuration is not an edge (or edge + vertex) configuration".into()));
    }
    let mut out = config.to_vec();
    let q = q as i64;
    for (e, sign) in geom.incident_edges(vertex) {
        out[e] = (out[e] as i64 + sign).rem_euclid(q) as u32;
    }
    if matter {
        out[ne + vertex] = ((out[ne + vertex] as i64 + 1) % q) as u32;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeCheck {
    pub invariant: bool,
    /// (vertex, configuration) where the energy changed.
    pub witness: Option<(usize, Vec<u32>)>,
}

fn finite_copy(model: &SpinModel) -> SpinModel {
    let mut m = model.clone();
    for t in &mut m.terms {
        if t.is_infinite() {
            let _ = t.set_coupling(Coupling::Finite(1.0));
        }
    }
    m
}

fn check_shape(model: &SpinModel, geom: &LatticeGeometry) -> Result<u32> {
    let ne = geom.num_edges();
    if model.num_spins != ne && model.num_spins != ne + geom.num_vertices() {
        return Err(Error::InvalidArgument("model is not an edge-spin gauge model on this geometry".into()));
    }
    let q = model.levels.first().copied().unwrap_or(2);
    if model.levels.iter().any(|l| *l != q) {
        return Err(Error::InvalidArgument("mixed levels".into()));
    }
    Ok(q)
}

/// Randomised check: energy unchanged by gauge transformations at random vertices.
pub fn check_gauge_invariance(model: &SpinModel, geom: &LatticeGeometry, trials: usize, seed: u64) -> Result<GaugeCheck> {
    let q = check_shape(model, geom)?;
    let m = finite_copy(model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let cfg: Vec<u32> = (0..m.num_spins).map(|_| rng.gen_range(0..q)).collect();
        let v = rng.gen_range(0..geom.num_vertices());
        let moved = gauge_transform(geom, q, v, &cfg)?;
        if evaluate_energy(&m, &cfg)? != evaluate_energy(&m, &moved)? {
            return Ok(GaugeCheck { invariant: false, witness: Some((v, cfg)) });
        }
    }
    Ok(GaugeCheck { invariant: true, witness: None })
}

/// Every vertex, every configuration. Only for tiny models.
pub fn check_gauge_invariance_exhaustive(model: &SpinModel, geom: &LatticeGeometry) -> Result<GaugeCheck> {
    let q = check_shape(model, geom)?;
    let total = (q as f64).powi(model.num_spins as i32);
    if total > 2f64.powi(22) {
        return Err(Error::TooLarge { free: model.num_spins, cap: 22 });
    }
    let m = finite_copy(model);
    let mut cfg = vec![0u32; m.num_spins];
    for _ in 0..total as u64 {
        let e0 = evaluate_energy(&m, &cfg)?;
        for v in 0..geom.num_vertices() {
            let moved = gauge_transform(geom, q, v, &cfg)?;
            if evaluate_energy(&m, &moved)? != e0 {
                return Ok(GaugeCheck { invariant: false, witness: Some((v, cfg)) });
            }
        }
        for d in cfg.iter_mut() {
            *d += 1;
            if *d < q {
                break;
            }
            *d = 0;
        }
    }
    Ok(GaugeCheck { invariant: true, witness: None })
}
