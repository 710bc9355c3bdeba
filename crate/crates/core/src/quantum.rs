//! The face–edge incidence matrix of a Z2 gauge theory, the stabilizer state
//! it defines, and the partition function as an overlap with that state.
//!
//! `|psi> = sum_s |A s>` over all edge configurations `s` is a stabilizer state
//! on one qubit per face. Pairing it with a product of per-face vectors
//! `(e^{beta J_f}, e^{-beta J_f})` gives `Z`.

use serde::Serialize;

use crate::engine::partition_function;
use crate::error::{Error, Result};
use crate::geometry::LatticeGeometry;
use crate::gf2::{Added, ConstraintSet};
use crate::model::{Coupling, Interaction, SpinModel};

/// Largest face count for which the overlap is formed.
pub const MAX_OVERLAP_FACES: usize = 16;

/// Edge configurations are counted directly up to this many edges.
const MAX_COUNTED_EDGES: usize = 22;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IncidenceMatrix {
    pub num_faces: usize,
    pub num_edges: usize,
    /// `(face, edge)` pairs of nonzero entries, row by row.
    pub entries: Vec<(usize, usize)>,
}

impl IncidenceMatrix {
    pub fn row_weights(&self) -> Vec<usize> {
        let mut w = vec![0; self.num_faces];
        for &(f, _) in &self.entries {
            w[f] += 1;
        }
        w
    }

    pub fn column_weights(&self) -> Vec<usize> {
        let mut w = vec![0; self.num_edges];
        for &(_, e) in &self.entries {
            w[e] += 1;
        }
        w
    }

    /// Faces containing each edge.
    pub fn columns(&self) -> Vec<Vec<usize>> {
        let mut c = vec![Vec::new(); self.num_edges];
        for &(f, e) in &self.entries {
            c[e].push(f);
        }
        c
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("matrix serialises")
    }
}

pub fn build_incidence(geom: &LatticeGeometry) -> IncidenceMatrix {
    let mut entries = Vec::with_capacity(4 * geom.num_faces());
    for (f, face) in geom.faces().iter().enumerate() {
        let mut e = face.edges;
        e.sort_unstable();
        entries.extend(e.iter().map(|&x| (f, x)));
    }
    IncidenceMatrix { num_faces: geom.num_faces(), num_edges: geom.num_edges(), entries }
}

/// Incidence of a binary parity model: one row per term.
pub fn model_incidence(model: &SpinModel) -> Result<IncidenceMatrix> {
    let mut entries = Vec::new();
    for (f, t) in model.terms.iter().enumerate() {
        if !matches!(t.interaction, Interaction::Parity { .. }) || t.support.iter().any(|&i| model.levels[i] != 2) {
            return Err(Error::Unsupported("the overlap form needs binary parity terms".into()));
        }
        let mut s = t.support.clone();
        s.sort_unstable();
        entries.extend(s.into_iter().map(|e| (f, e)));
    }
    Ok(IncidenceMatrix { num_faces: model.terms.len(), num_edges: model.num_spins, entries })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct XGenerator {
    /// Edge whose flip generates this element.
    pub edge: usize,
    /// Faces the element acts on.
    pub faces: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StabilizerDescription {
    pub rank: usize,
    pub num_faces: usize,
    pub x_generators: Vec<XGenerator>,
    /// Face sets of the Z-type generators.
    pub z_generators: Vec<Vec<usize>>,
}

impl StabilizerDescription {
    pub fn table(&self) -> String {
        let mut s = format!(
            "faces {}  rank {}  X-type {}  Z-type {}\n",
            self.num_faces,
            self.rank,
            self.x_generators.len(),
            self.z_generators.len()
        );
        for g in &self.x_generators {
            s += &format!("X  edge {:>6}  faces {:?}\n", g.edge, g.faces);
        }
        for z in &self.z_generators {
            s += &format!("Z  faces {z:?}\n");
        }
        s
    }
}

fn column_system(a: &IncidenceMatrix) -> Result<(ConstraintSet, Vec<usize>)> {
    // one equation per column: faces u with sum_{f in column} u_f = 0
    let mut cs = ConstraintSet::new(a.num_faces);
    let mut independent = Vec::new();
    for (e, col) in a.columns().iter().enumerate() {
        if col.is_empty() {
            continue;
        }
        if let Added::Pivot(_) = cs.add(col, false)? {
            independent.push(e);
        }
    }
    Ok((cs, independent))
}

pub fn stabilizer_rank(a: &IncidenceMatrix) -> Result<usize> {
    Ok(column_system(a)?.0.rank())
}

/// X-type generators from a maximal independent set of columns, Z-type ones
/// from a basis of the vectors orthogonal to every column.
pub fn stabilizer_generators(a: &IncidenceMatrix) -> Result<StabilizerDescription> {
    let (cs, independent) = column_system(a)?;
    let cols = a.columns();
    let x_generators = independent.iter().map(|&e| XGenerator { edge: e, faces: cols[e].clone() }).collect();
    let mut z_generators = Vec::new();
    for v in cs.free_vars() {
        let mut faces = vec![v];
        for p in 0..a.num_faces {
            if let Some((expr, _)) = cs.expression(p) {
                if expr.contains(&(v as u32)) {
                    faces.push(p);
                }
            }
        }
        faces.sort_unstable();
        z_generators.push(faces);
    }
    Ok(StabilizerDescription { rank: cs.rank(), num_faces: a.num_faces, x_generators, z_generators })
}

/// Number of edge configurations producing each face-parity pattern (bit `f`
/// of the index is face `f`).
pub fn face_histogram(a: &IncidenceMatrix) -> Result<Vec<f64>> {
    if a.num_faces > MAX_OVERLAP_FACES {
        return Err(Error::TooLarge { free: a.num_faces, cap: MAX_OVERLAP_FACES });
    }
    let cols: Vec<usize> = a.columns().iter().map(|c| c.iter().fold(0, |m, &f| m ^ 1 << f)).collect();
    let mut hist = vec![0f64; 1 << a.num_faces];
    if a.num_edges <= MAX_COUNTED_EDGES {
        // Gray code over edge configurations
        let mut pattern = 0usize;
        hist[0] = 1.0;
        for k in 1..1usize << a.num_edges {
            pattern ^= cols[k.trailing_zeros() as usize];
            hist[pattern] += 1.0;
        }
        return Ok(hist);
    }
    let st = stabilizer_generators(a)?;
    let mult = 2f64.powi((a.num_edges - st.rank) as i32);
    let zmasks: Vec<usize> = st.z_generators.iter().map(|z| z.iter().fold(0, |m, &f| m | 1 << f)).collect();
    for (p, h) in hist.iter_mut().enumerate() {
        if zmasks.iter().all(|z| (z & p).count_ones() % 2 == 0) {
            *h = mult;
        }
    }
    Ok(hist)
}

/// `<alpha|psi>` for a binary parity model, checked against exact
/// enumeration of `Z` to `1e-9` relative.
pub fn inner_product_z(model: &SpinModel, beta: f64) -> Result<f64> {
    if !model.is_binary() {
        return Err(Error::Unsupported("the overlap form is implemented for q = 2".into()));
    }
    let a = model_incidence(model)?;
    let js: Vec<f64> = model
        .terms
        .iter()
        .map(|t| match t.coupling() {
            Some(Coupling::Finite(j)) => Ok(j),
            _ => Err(Error::Unsupported("infinite coupling in the overlap form".into())),
        })
        .collect::<Result<_>>()?;
    let hist = face_histogram(&a)?;
    let mut total = 0.0;
    for (p, &h) in hist.iter().enumerate() {
        if h == 0.0 {
            continue;
        }
        let w: f64 = js.iter().enumerate().map(|(f, j)| if p >> f & 1 == 0 { beta * j } else { -beta * j }).sum();
        total += h * w.exp();
    }
    total *= (-beta * model.energy_offset).exp() * 2f64.powi(model.log2_prefactor as i32);
    let exact = partition_function(model, beta)?.log_z.exp();
    if (total - exact).abs() > 1e-9 * exact.abs() {
        return Err(Error::Verification(format!("overlap {total} differs from Z = {exact}")));
    }
    Ok(total)
}

/// Flips the edges in `edges`: every term with odd overlap has its coupling
/// negated. The partition function is unchanged.
pub fn symmetry_orbit(model: &SpinModel, edges: &[usize]) -> Result<SpinModel> {
    if !model.is_binary() {
        return Err(Error::Unsupported("coupling symmetries need q = 2".into()));
    }
    let mut flip = vec![false; model.num_spins];
    for &e in edges {
        *flip.get_mut(e).ok_or_else(|| Error::InvalidArgument(format!("edge {e} out of range")))? ^= true;
    }
    let mut out = model.clone();
    for t in &mut out.terms {
        let odd = t.support.iter().filter(|&&i| flip[i]).count() % 2 == 1;
        if !odd {
            continue;
        }
        match &mut t.interaction {
            Interaction::Parity { coupling: Coupling::Finite(j) } => *j = -*j,
            Interaction::Parity { coupling: Coupling::PlusInfinity } => {
                return Err(Error::Unsupported("flip would negate an infinite coupling".into()))
            }
            _ => return Err(Error::Unsupported("coupling symmetries need parity terms".into())),
        }
    }
    Ok(out)
}
