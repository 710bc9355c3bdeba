//! Local rewrites on Z2 lattice models: merge, delete, couple, gauge fixing.
//!
//! Term indices never shift. A term that loses its whole support through
//! substitution becomes an empty zero-coupling term and its constant energy
//! moves into the offset.

use serde::{Deserialize, Serialize};

use crate::engine::{partition_function_with, EngineOptions};
use crate::error::{Error, Result};
use crate::geometry::LatticeGeometry;
use crate::model::{Coupling, Interaction, SpinModel, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Constrain a face and substitute the dependent spin everywhere else.
    Merge,
    /// Set the coupling to infinity, nothing else.
    Constrain,
    /// Set a finite coupling.
    Couple,
    Delete,
    /// Pin an edge to zero.
    Fix,
    /// Large finite coupling standing in for a constraint.
    FiniteJ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixKind {
    /// Part of a gauge-fixing forest.
    Gauge,
    /// Boundary condition; exempt from the forest requirement.
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub rule: Rule,
    pub target: usize,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub param: serde_json::Value,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewriteTrace {
    pub steps: Vec<TraceStep>,
}

impl RewriteTrace {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.steps).expect("trace serialises")
    }

    pub fn from_json_str(s: &str) -> Result<RewriteTrace> {
        Ok(RewriteTrace { steps: serde_json::from_str(s)? })
    }

    pub fn push(&mut self, rule: Rule, target: usize, param: serde_json::Value) {
        self.steps.push(TraceStep { rule, target, param });
    }
}

fn term_mut(model: &mut SpinModel, t: usize) -> Result<&mut Term> {
    let n = model.terms.len();
    model.terms.get_mut(t).ok_or_else(|| Error::InvalidArgument(format!("term {t} out of range ({n} terms)")))
}

fn sym_diff(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().filter(|x| !b.contains(x)).chain(b.iter().filter(|x| !a.contains(x))).copied().collect();
    out.sort_unstable();
    out
}

/// Constrain `face` to even parity and write `dependent` as the sum of the
/// other spins of the face in every other term.
pub fn merge_face(model: &SpinModel, face: usize, dependent: usize) -> Result<SpinModel> {
    let mut m = model.clone();
    merge_in(&mut m, face, dependent)?;
    Ok(m)
}

fn merge_in(m: &mut SpinModel, face: usize, dependent: usize) -> Result<()> {
    let f = m.terms.get(face).ok_or_else(|| Error::InvalidArgument(format!("term {face} out of range")))?;
    if !matches!(f.interaction, Interaction::Parity { .. }) || f.support.iter().any(|&i| m.levels[i] != 2) {
        return Err(Error::Unsupported(format!("merge needs a binary parity term, term {face} is {:?}", f.kind())));
    }
    if !f.support.contains(&dependent) {
        return Err(Error::InvalidArgument(format!("spin {dependent} not in the support of term {face}")));
    }
    let rest: Vec<usize> = f.support.iter().copied().filter(|&i| i != dependent).collect();
    for (k, t) in m.terms.iter().enumerate() {
        if k != face && t.support.contains(&dependent) && !matches!(t.interaction, Interaction::Parity { .. }) {
            return Err(Error::Unsupported(format!("term {k} touching spin {dependent} is not a parity term")));
        }
    }
    m.terms[face].set_coupling(Coupling::PlusInfinity)?;
    let mut offset = 0.0;
    for (k, t) in m.terms.iter_mut().enumerate() {
        if k == face || !t.support.contains(&dependent) {
            continue;
        }
        let without: Vec<usize> = t.support.iter().copied().filter(|&i| i != dependent).collect();
        let mut s = sym_diff(&without, &rest);
        if s.is_empty() {
            if let Some(j) = t.coupling().and_then(|c| c.finite()) {
                offset -= j;
            }
            *t = Term::parity(vec![], 0.0);
            continue;
        }
        // keep the original order of surviving spins, new ones appended
        let mut ordered: Vec<usize> = t.support.iter().copied().filter(|i| s.contains(i)).collect();
        s.retain(|i| !ordered.contains(i));
        ordered.extend(s);
        t.support = ordered;
    }
    m.energy_offset += offset;
    Ok(())
}

/// Merge with the lowest-index spin of the face as the dependent one.
pub fn merge_face_default(model: &SpinModel, face: usize) -> Result<SpinModel> {
    let t = model.terms.get(face).ok_or_else(|| Error::InvalidArgument(format!("term {face} out of range")))?;
    let dep = *t.support.iter().min().ok_or_else(|| Error::InvalidArgument("empty term".into()))?;
    merge_face(model, face, dep)
}

pub fn delete_face(model: &SpinModel, face: usize) -> Result<SpinModel> {
    let mut m = model.clone();
    delete_in(&mut m, face)?;
    Ok(m)
}

fn delete_in(m: &mut SpinModel, face: usize) -> Result<()> {
    let t = term_mut(m, face)?;
    match &mut t.interaction {
        Interaction::Parity { coupling } | Interaction::Clock { coupling, .. } => *coupling = Coupling::Finite(0.0),
        Interaction::Table { values } => values.iter_mut().for_each(|v| *v = 0.0),
    }
    Ok(())
}

pub fn set_coupling(model: &SpinModel, term: usize, c: Coupling) -> Result<SpinModel> {
    let mut m = model.clone();
    term_mut(&mut m, term)?.set_coupling(c)?;
    Ok(m)
}

/// A large finite coupling in place of a constraint.
pub fn finite_j_merge(model: &SpinModel, face: usize, j_large: f64) -> Result<SpinModel> {
    if !(j_large >= 0.0 && j_large.is_finite()) {
        return Err(Error::InvalidArgument(format!("J_large = {j_large}")));
    }
    set_coupling(model, face, Coupling::Finite(j_large))
}

/// `|ln Z(J_large) - ln Z(constraint)|` for one face.
pub fn finite_j_deviation(model: &SpinModel, face: usize, j_large: f64, beta: f64, opts: &EngineOptions) -> Result<f64> {
    let fin = finite_j_merge(model, face, j_large)?;
    let inf = set_coupling(model, face, Coupling::PlusInfinity)?;
    // a satisfied constraint carries weight 1, the finite face e^{beta J}
    let a = partition_function_with(&fin, beta, opts)?.log_z - beta * j_large;
    let b = partition_function_with(&inf, beta, opts)?.log_z;
    Ok((a - b).abs())
}

/// Substitute zero for every listed spin in one pass over the terms, then
/// append one pin per spin in the given order.
pub fn pin_all(m: &mut SpinModel, spins: &[usize]) -> Result<()> {
    let mut marked = vec![false; m.num_spins];
    for &s in spins {
        if s >= m.num_spins {
            return Err(Error::InvalidArgument(format!("spin {s} out of range")));
        }
        if m.levels[s] != 2 {
            return Err(Error::Unsupported("fixing a spin with more than two levels".into()));
        }
        marked[s] = true;
    }
    let levels = m.levels.clone();
    let mut offset = 0.0;
    for t in &mut m.terms {
        while let Some(pos) = t.support.iter().position(|&i| marked[i]) {
            match &mut t.interaction {
                Interaction::Parity { .. } => {}
                Interaction::Clock { coefficients, .. } => {
                    coefficients.remove(pos);
                }
                Interaction::Table { values } => {
                    let lv: Vec<u32> = t.support.iter().map(|&i| levels[i]).collect();
                    let stride: usize = lv[..pos].iter().map(|&q| q as usize).product();
                    let q = lv[pos] as usize;
                    *values =
                        values.iter().enumerate().filter(|(k, _)| (k / stride).is_multiple_of(q)).map(|(_, v)| *v).collect();
                }
            }
            t.support.remove(pos);
            if t.support.is_empty() {
                match &t.interaction {
                    Interaction::Parity { coupling } | Interaction::Clock { coupling, .. } => {
                        if let Some(j) = coupling.finite() {
                            offset -= j;
                        }
                    }
                    Interaction::Table { values } => offset += values[0],
                }
                *t = Term::parity(vec![], 0.0);
            }
        }
    }
    m.energy_offset += offset;
    m.terms.extend(spins.iter().map(|&s| Term::constraint(vec![s])));
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFix {
    pub model: SpinModel,
    pub trace: RewriteTrace,
    /// `Z_before = 2^a Z_after` for the gauge-provenance part, measured by
    /// enumeration; `None` when the unfixed model is beyond the cap.
    pub pow2: Option<i64>,
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Edges of the forest path between `a` and `b`.
fn forest_path(geom: &LatticeGeometry, forest: &[usize], a: usize, b: usize) -> Vec<usize> {
    use std::collections::{HashMap, VecDeque};
    let mut adj: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    for &e in forest {
        let (u, v) = geom.edge_endpoints(e);
        adj.entry(u).or_default().push((v, e));
        adj.entry(v).or_default().push((u, e));
    }
    let mut prev: HashMap<usize, (usize, usize)> = HashMap::new();
    let mut q = VecDeque::from([a]);
    prev.insert(a, (a, usize::MAX));
    while let Some(u) = q.pop_front() {
        if u == b {
            break;
        }
        for &(v, e) in adj.get(&u).map(|v| v.as_slice()).unwrap_or(&[]) {
            if let std::collections::hash_map::Entry::Vacant(s) = prev.entry(v) {
                s.insert((u, e));
                q.push_back(v);
            }
        }
    }
    let mut path = Vec::new();
    let mut x = b;
    while x != a {
        let (p, e) = prev[&x];
        path.push(e);
        x = p;
    }
    path
}

/// Checks that the gauge-provenance edges form a forest and that every
/// boundary-provenance edge lies on the lattice boundary.
pub fn check_fix_set(geom: &LatticeGeometry, fixes: &[(usize, FixKind)]) -> Result<()> {
    let mut dsu = Dsu { parent: (0..geom.num_vertices()).collect() };
    let mut forest = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for &(e, kind) in fixes {
        if e >= geom.num_edges() {
            return Err(Error::InvalidArgument(format!("edge {e} out of range")));
        }
        if !seen.insert(e) {
            return Err(Error::InvalidArgument(format!("edge {e} fixed twice")));
        }
        match kind {
            FixKind::Boundary => {
                if !geom.is_boundary_edge(e) {
                    return Err(Error::InvalidArgument(format!("edge {e} is not on the boundary")));
                }
            }
            FixKind::Gauge => {
                let (u, v) = geom.edge_endpoints(e);
                let (ru, rv) = (dsu.find(u), dsu.find(v));
                if ru == rv {
                    let mut cycle = forest_path(geom, &forest, u, v);
                    cycle.push(e);
                    cycle.sort_unstable();
                    return Err(Error::GaugeCycle(cycle));
                }
                dsu.parent[ru] = rv;
                forest.push(e);
            }
        }
    }
    Ok(())
}

fn fix_param(kind: FixKind) -> serde_json::Value {
    serde_json::to_value(kind).expect("kind serialises")
}

/// Pins the given edges to zero. Gauge edges go first so that the measured
/// power of two refers to the gauge-invariant model.
pub fn gauge_fix_edges(model: &SpinModel, geom: &LatticeGeometry, fixes: &[(usize, FixKind)]) -> Result<GaugeFix> {
    gauge_fix_edges_with(model, geom, fixes, &EngineOptions::default())
}

pub fn gauge_fix_edges_with(
    model: &SpinModel,
    geom: &LatticeGeometry,
    fixes: &[(usize, FixKind)],
    opts: &EngineOptions,
) -> Result<GaugeFix> {
    if model.num_spins < geom.num_edges() {
        return Err(Error::InvalidArgument("model has fewer spins than the lattice has edges".into()));
    }
    check_fix_set(geom, fixes)?;
    let mut trace = RewriteTrace::default();
    let ordered: Vec<(usize, FixKind)> = fixes
        .iter()
        .filter(|f| f.1 == FixKind::Gauge)
        .chain(fixes.iter().filter(|f| f.1 == FixKind::Boundary))
        .copied()
        .collect();
    let n_gauge = fixes.iter().filter(|f| f.1 == FixKind::Gauge).count();
    let spins: Vec<usize> = ordered.iter().map(|f| f.0).collect();
    let pow2 = if n_gauge == 0 {
        Some(0)
    } else {
        let mut g = model.clone();
        pin_all(&mut g, &spins[..n_gauge])?;
        measure_pow2(model, &g, opts)?
    };
    let mut m = model.clone();
    pin_all(&mut m, &spins)?;
    for &(e, kind) in &ordered {
        trace.push(Rule::Fix, e, fix_param(kind));
    }
    Ok(GaugeFix { model: m, trace, pow2 })
}

const POW2_BETAS: [f64; 2] = [0.37, 1.21];

fn measure_pow2(before: &SpinModel, after: &SpinModel, opts: &EngineOptions) -> Result<Option<i64>> {
    let mut a = Vec::new();
    for beta in POW2_BETAS {
        let zb = match partition_function_with(before, beta, opts) {
            Ok(r) => r.log_z,
            Err(Error::TooLarge { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let za = partition_function_with(after, beta, opts)?.log_z;
        a.push((zb - za) / std::f64::consts::LN_2);
    }
    let r = a[0].round();
    if a.iter().any(|x| (x - r).abs() > 1e-9) {
        return Err(Error::Verification(format!("gauge fixing ratio is not a fixed power of two: log2 ratios {a:?}")));
    }
    Ok(Some(r as i64))
}

fn param_f64(s: &TraceStep) -> Result<Coupling> {
    serde_json::from_value(s.param.clone()).map_err(|_| Error::InvalidArgument(format!("step {:?} needs a coupling", s.rule)))
}

/// Apply one step. `fix` steps do no geometry checks here.
pub fn apply_step(model: &SpinModel, s: &TraceStep) -> Result<SpinModel> {
    let mut m = model.clone();
    apply_step_in(&mut m, s)?;
    Ok(m)
}

fn apply_step_in(m: &mut SpinModel, s: &TraceStep) -> Result<()> {
    match s.rule {
        Rule::Merge => {
            let dep = s.param.as_u64().ok_or_else(|| Error::InvalidArgument("merge needs a dependent spin".into()))?;
            merge_in(m, s.target, dep as usize)
        }
        Rule::Constrain => term_mut(m, s.target)?.set_coupling(Coupling::PlusInfinity),
        Rule::Couple => term_mut(m, s.target)?.set_coupling(param_f64(s)?),
        Rule::FiniteJ => match param_f64(s)? {
            Coupling::Finite(j) if j >= 0.0 => term_mut(m, s.target)?.set_coupling(Coupling::Finite(j)),
            _ => Err(Error::InvalidArgument("finite_j needs a finite non-negative coupling".into())),
        },
        Rule::Delete => delete_in(m, s.target),
        Rule::Fix => pin_all(m, &[s.target]),
    }
}

/// Replays `trace` on `model`. Consecutive `fix` steps are applied as one
/// batch, which is how every producer of fix steps applies them too.
pub fn replay(trace: &RewriteTrace, model: &SpinModel) -> Result<SpinModel> {
    let mut m = model.clone();
    let steps = &trace.steps;
    let mut k = 0;
    while k < steps.len() {
        if steps[k].rule == Rule::Fix {
            let end = steps[k..].iter().position(|s| s.rule != Rule::Fix).map_or(steps.len(), |p| k + p);
            let spins: Vec<usize> = steps[k..end].iter().map(|s| s.target).collect();
            pin_all(&mut m, &spins)?;
            k = end;
        } else {
            apply_step_in(&mut m, &steps[k])?;
            k += 1;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::partition_function;
    use crate::geometry::Boundary;
    use crate::lgt::build_zq_lgt;

    fn two_faces() -> SpinModel {
        // a b c d | b e f g  sharing b
        let mut m = SpinModel::binary(7);
        m.push(Term::parity(vec![0, 1, 2, 3], 0.7));
        m.push(Term::parity(vec![1, 4, 5, 6], 1.3));
        m
    }

    #[test]
    fn merge_builds_six_body() {
        let m = merge_face(&two_faces(), 0, 1).unwrap();
        let mut s = m.terms[1].support.clone();
        s.sort();
        assert_eq!(s, vec![0, 2, 3, 4, 5, 6]);
        assert_eq!(m.terms[1].coupling(), Some(Coupling::Finite(1.3)));
        assert!(m.terms[0].is_infinite());
        let mut c = two_faces();
        c.terms[0].set_coupling(Coupling::PlusInfinity).unwrap();
        for beta in [0.2, 0.9] {
            let a = partition_function(&m, beta).unwrap().log_z;
            let b = partition_function(&c, beta).unwrap().log_z;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn three_into_three() {
        let mut m = SpinModel::binary(5);
        m.push(Term::parity(vec![0, 1, 2], 1.0));
        m.push(Term::parity(vec![2, 3, 4], 0.5));
        let r = merge_face(&m, 0, 2).unwrap();
        assert_eq!(r.terms[1].support.len(), 4);
    }

    #[test]
    fn merge_errors() {
        let mut m = two_faces();
        assert!(matches!(merge_face(&m, 0, 5), Err(Error::InvalidArgument(_))));
        m.push(Term::table(vec![1], vec![0.0, 1.0]));
        assert!(matches!(merge_face(&m, 0, 1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn merge_empty_support_goes_to_offset() {
        let mut m = SpinModel::binary(2);
        m.push(Term::parity(vec![0, 1], 1.0));
        m.push(Term::parity(vec![0, 1], 0.4));
        let r = merge_face(&m, 0, 0).unwrap();
        assert!(r.terms[1].support.is_empty());
        assert_eq!(r.energy_offset, -0.4);
    }

    #[test]
    fn delete_plaquette() {
        let g = LatticeGeometry::new([1, 1, 0, 0], Boundary::Open).unwrap();
        let m = build_zq_lgt(&g, 2, &[1.0]).unwrap();
        let d = delete_face(&m, 0).unwrap();
        assert!((partition_function(&d, 0.5).unwrap().log_z - 16f64.ln()).abs() < 1e-15);
        let back = set_coupling(&d, 0, Coupling::Finite(0.0)).unwrap();
        assert_eq!(back.to_json_string(), d.to_json_string());
    }

    #[test]
    fn fix_one_edge_and_cycle() {
        let g = LatticeGeometry::new([1, 1, 0, 0], Boundary::Open).unwrap();
        let m = build_zq_lgt(&g, 2, &[1.0]).unwrap();
        let r = gauge_fix_edges(&m, &g, &[(0, FixKind::Gauge)]).unwrap();
        assert_eq!(r.pow2, Some(1));
        assert_eq!(r.model.terms[0].support.len(), 3);
        let all: Vec<_> = (0..4).map(|e| (e, FixKind::Gauge)).collect();
        match gauge_fix_edges(&m, &g, &all) {
            Err(Error::GaugeCycle(c)) => assert_eq!(c, vec![0, 1, 2, 3]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spanning_tree_power_of_two() {
        let g = LatticeGeometry::new([2, 2, 0, 0], Boundary::Open).unwrap();
        let m = build_zq_lgt(&g, 2, &[0.6, -0.3, 1.1, 0.8]).unwrap();
        let mut tree = Vec::new();
        for y in 0..3 {
            tree.push((g.edge([0, y, 0, 0], 0).unwrap(), FixKind::Gauge));
            tree.push((g.edge([1, y, 0, 0], 0).unwrap(), FixKind::Gauge));
        }
        for x in [0] {
            for y in 0..2 {
                tree.push((g.edge([x, y, 0, 0], 1).unwrap(), FixKind::Gauge));
            }
        }
        let r = gauge_fix_edges(&m, &g, &tree).unwrap();
        assert_eq!(r.pow2, Some(8));
    }

    #[test]
    fn boundary_edges_exempt_but_checked() {
        let g = LatticeGeometry::new([1, 1, 0, 0], Boundary::Open).unwrap();
        let m = build_zq_lgt(&g, 2, &[1.0]).unwrap();
        let all: Vec<_> = (0..4).map(|e| (e, FixKind::Boundary)).collect();
        assert!(gauge_fix_edges(&m, &g, &all).is_ok());
        let g2 = LatticeGeometry::new([2, 1, 0, 0], Boundary::Open).unwrap();
        let inner = g2.edge([1, 0, 0, 0], 1).unwrap();
        let m2 = build_zq_lgt(&g2, 2, &[1.0, 1.0]).unwrap();
        assert!(gauge_fix_edges(&m2, &g2, &[(inner, FixKind::Boundary)]).is_err());
    }

    #[test]
    fn trace_replays_byte_identical() {
        let g = LatticeGeometry::new([2, 1, 0, 0], Boundary::Open).unwrap();
        let base = build_zq_lgt(&g, 2, &[0.4, 0.9]).unwrap();
        let fixed = gauge_fix_edges(&base, &g, &[(0, FixKind::Gauge)]).unwrap();
        let mut trace = fixed.trace.clone();
        let mut m = fixed.model.clone();
        let dep = m.terms[0].support[0];
        m = merge_face(&m, 0, dep).unwrap();
        trace.push(Rule::Merge, 0, dep.into());
        m = finite_j_merge(&m, 1, 3.0).unwrap();
        trace.push(Rule::FiniteJ, 1, 3.0.into());
        let text = trace.to_json_string();
        assert!(text.contains("\"rule\": \"fix\"") && text.contains("\"gauge\""));
        let again = replay(&RewriteTrace::from_json_str(&text).unwrap(), &base).unwrap();
        assert_eq!(again.to_json_string(), m.to_json_string());
    }

    #[test]
    fn finite_j_deviation_shrinks() {
        let g = LatticeGeometry::new([2, 1, 0, 0], Boundary::Open).unwrap();
        let m = build_zq_lgt(&g, 2, &[1.0, 0.5]).unwrap();
        let opts = EngineOptions::default();
        let d: Vec<f64> = [5.0, 10.0, 20.0].iter().map(|&j| finite_j_deviation(&m, 0, j, 1.0, &opts).unwrap()).collect();
        assert!(d[0] > d[1] && d[1] > d[2] && d[2] < 1e-6);
        let z = finite_j_merge(&m, 0, 0.0).unwrap();
        assert_eq!(z, delete_face(&m, 0).unwrap());
    }
}
