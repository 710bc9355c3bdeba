//! Concrete Z2 gauge-theory instances that realise binary target models.
//!
//! Every face of an instance has one role: a finite coupling, a hard
//! constraint (merge) or zero (delete). Some edges are pinned to zero, either
//! as part of a gauge-fixing forest or as a boundary condition. Logical spins
//! are single edges; everything else is eliminated by the constraints.

mod bus;
mod compile;
mod gadgets;
mod ising2d;
mod verify;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{extract_with_keep, Accounting};
use crate::geometry::{Boundary, LatticeGeometry};
use crate::lgt::build_zq_lgt;
use crate::model::{Coupling, SpinModel};
use crate::qlevel::QlevelEncoding;
use crate::rewrite::{check_fix_set, replay, FixKind, RewriteTrace, Rule};

pub use compile::{
    build_4clique, compile_target, compile_target_with, layout_superclique, Mode, DEFAULT_BETA_MIN, DEFAULT_GROUP_CAP,
};
pub use gadgets::{gadget_field, gadget_kbody, gadget_pair, propagate, replicate, turn, GadgetBlueprint};
pub use ising2d::{compile_2d_ising, Ising2d};
pub use verify::{verify_instance, BetaRow, VerifyReport, DEFAULT_BETAS, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Lgt4d,
    /// Three dimensions with pinned boundary edges.
    #[serde(rename = "lgt3d-boundary")]
    Lgt3dBoundary,
    /// Three dimensions, no boundary pins. Only replication up to fanout 2.
    Lgt3d,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Backend> {
        match s {
            "lgt4d" => Ok(Backend::Lgt4d),
            "lgt3d-boundary" | "lgt3d_boundary" => Ok(Backend::Lgt3dBoundary),
            "lgt3d" => Ok(Backend::Lgt3d),
            _ => Err(Error::InvalidArgument(format!("unknown backend {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceRole {
    Finite(f64),
    Merge,
    Delete,
}

impl FaceRole {
    pub fn coupling(&self) -> Coupling {
        match self {
            FaceRole::Finite(j) => Coupling::Finite(*j),
            FaceRole::Merge => Coupling::PlusInfinity,
            FaceRole::Delete => Coupling::Finite(0.0),
        }
    }
}

/// Cell extent `A(k)` of a band holding one k-body term.
pub fn band_height(k: usize) -> usize {
    2 * k.div_ceil(4) + 2
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// `(2n, sum_k A(k) C(n,k), 1, 1)`; the sum includes the idle `k = 0` band.
pub fn superclique_dims(n: usize) -> [usize; 4] {
    [2 * n, (0..=n).map(|k| band_height(k) * binom(n, k)).sum(), 1, 1]
}

pub fn clique4_dims(n: usize) -> [usize; 4] {
    [2 * n, 4 * binom(n, 4), 1, 1]
}

pub fn ising2d_dims(n: usize, m: usize) -> [usize; 4] {
    [2 * n, 4, 1, m]
}

/// Faces with roles and pinned edges on one geometry.
#[derive(Debug, Clone)]
pub struct Layout {
    pub geometry: LatticeGeometry,
    pub roles: Vec<FaceRole>,
    /// Gauge edges first, then boundary edges.
    pub fixed: Vec<(usize, FixKind)>,
}

impl Layout {
    /// Blank lattice the trace starts from: every face at zero coupling.
    pub fn base_model(&self) -> SpinModel {
        build_zq_lgt(&self.geometry, 2, &vec![0.0; self.geometry.num_faces()]).expect("q = 2 lattice")
    }

    /// One step per face in face order, then the pins.
    pub fn trace(&self) -> RewriteTrace {
        let mut t = RewriteTrace::default();
        for (f, r) in self.roles.iter().enumerate() {
            match r {
                FaceRole::Finite(j) => t.push(Rule::Couple, f, (*j).into()),
                FaceRole::Merge => t.push(Rule::Constrain, f, serde_json::Value::Null),
                FaceRole::Delete => t.push(Rule::Delete, f, serde_json::Value::Null),
            }
        }
        for &(e, kind) in &self.fixed {
            t.push(Rule::Fix, e, serde_json::to_value(kind).expect("kind serialises"));
        }
        t
    }

    pub fn model(&self) -> Result<SpinModel> {
        replay(&self.trace(), &self.base_model())
    }

    pub fn check(&self, backend: Backend) -> Result<()> {
        if self.roles.len() != self.geometry.num_faces() {
            return Err(Error::InvalidArgument("one role per face required".into()));
        }
        if backend == Backend::Lgt4d && self.fixed.iter().any(|f| f.1 == FixKind::Boundary) {
            return Err(Error::InvalidArgument("boundary pins need a 3D boundary backend".into()));
        }
        check_fix_set(&self.geometry, &self.fixed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    Free,
    Carrier,
    Fixed(FixKind),
}

/// Assigns face roles and edge marks, rejecting conflicting assignments.
pub(crate) struct Builder {
    pub geom: LatticeGeometry,
    roles: Vec<Option<FaceRole>>,
    marks: Vec<Mark>,
    fix_order: Vec<usize>,
}

fn same_role(a: FaceRole, b: FaceRole) -> bool {
    match (a, b) {
        (FaceRole::Finite(x), FaceRole::Finite(y)) => x.to_bits() == y.to_bits(),
        _ => a == b,
    }
}

impl Builder {
    pub fn new(dims: [usize; 4]) -> Result<Builder> {
        let geom = LatticeGeometry::new(dims, Boundary::Open)?;
        Ok(Builder {
            roles: vec![None; geom.num_faces()],
            marks: vec![Mark::Free; geom.num_edges()],
            fix_order: Vec::new(),
            geom,
        })
    }

    pub fn edge(&self, c: [usize; 4], d: usize) -> Result<usize> {
        self.geom.edge(c, d).ok_or_else(|| Error::Overlap(format!("edge {c:?}/{d} outside the layout")))
    }

    pub fn face_id(&self, c: [usize; 4], d1: usize, d2: usize) -> Result<usize> {
        self.geom.face_at(c, d1, d2).ok_or_else(|| Error::Overlap(format!("face {c:?}/({d1},{d2}) outside the layout")))
    }

    pub fn face(&mut self, c: [usize; 4], d1: usize, d2: usize, role: FaceRole) -> Result<()> {
        let f = self.face_id(c, d1, d2)?;
        self.set_face(f, role)
    }

    pub fn set_face(&mut self, f: usize, role: FaceRole) -> Result<()> {
        match self.roles[f] {
            Some(r) if !same_role(r, role) => Err(Error::Overlap(format!("face {f} already {r:?}, asked for {role:?}"))),
            _ => {
                self.roles[f] = Some(role);
                Ok(())
            }
        }
    }

    pub fn carrier(&mut self, c: [usize; 4], d: usize) -> Result<()> {
        let e = self.edge(c, d)?;
        if self.marks[e] != Mark::Free {
            return Err(Error::Overlap(format!("edge {e} already {:?}", self.marks[e])));
        }
        self.marks[e] = Mark::Carrier;
        Ok(())
    }

    pub fn is_carrier(&self, e: usize) -> bool {
        self.marks[e] == Mark::Carrier
    }

    pub fn fix(&mut self, c: [usize; 4], d: usize, kind: FixKind) -> Result<()> {
        let e = self.edge(c, d)?;
        self.fix_edge(e, kind)
    }

    pub fn fix_edge(&mut self, e: usize, kind: FixKind) -> Result<()> {
        match self.marks[e] {
            Mark::Free => {
                self.marks[e] = Mark::Fixed(kind);
                self.fix_order.push(e);
                Ok(())
            }
            Mark::Fixed(k) if k == kind => Ok(()),
            m => Err(Error::Overlap(format!("edge {e} already {m:?}"))),
        }
    }

    /// Unassigned faces become `Delete`.
    pub fn finish(self) -> Layout {
        let roles = self.roles.into_iter().map(|r| r.unwrap_or(FaceRole::Delete)).collect();
        let mut fixed: Vec<(usize, FixKind)> = Vec::with_capacity(self.fix_order.len());
        for kind in [FixKind::Gauge, FixKind::Boundary] {
            fixed.extend(self.fix_order.iter().filter(|&&e| self.marks[e] == Mark::Fixed(kind)).map(|&e| (e, kind)));
        }
        Layout { geometry: self.geom, roles, fixed }
    }
}

/// A lattice instance together with the binary model it realises.
#[derive(Debug, Clone)]
pub struct CompiledInstance {
    pub backend: Backend,
    pub layout: Layout,
    /// Edge carrying each target spin.
    pub logical_map: Vec<usize>,
    pub trace: RewriteTrace,
    /// `Z(instance) = 2^pow2 e^(-beta offset) Z(target)`.
    pub accounting: Accounting,
    /// Binary model the instance realises term by term.
    pub target: SpinModel,
    /// Present when the original target had q-level spins.
    pub encoding: Option<QlevelEncoding>,
}

impl CompiledInstance {
    /// Checks the layout invariants, builds the trace and derives the
    /// accounting from the effective model of the instance.
    pub(crate) fn assemble(
        backend: Backend,
        layout: Layout,
        logical_map: Vec<usize>,
        target: SpinModel,
        encoding: Option<QlevelEncoding>,
    ) -> Result<CompiledInstance> {
        layout.check(backend)?;
        if logical_map.len() != target.num_spins {
            return Err(Error::InvalidArgument("logical map does not cover the target".into()));
        }
        let mut seen = std::collections::HashSet::new();
        let fixed: std::collections::HashSet<usize> = layout.fixed.iter().map(|f| f.0).collect();
        for &e in &logical_map {
            if !seen.insert(e) || fixed.contains(&e) || e >= layout.geometry.num_edges() {
                return Err(Error::InvalidArgument(format!("logical edge {e} repeated, fixed or out of range")));
            }
        }
        let trace = layout.trace();
        let model = replay(&trace, &layout.base_model())?;
        let eff = extract_with_keep(&model, &logical_map)?;
        let accounting = Accounting {
            pow2: eff.accounting.pow2 - target.log2_prefactor,
            offset: eff.accounting.offset - target.energy_offset,
        };
        Ok(CompiledInstance { backend, layout, logical_map, trace, accounting, target, encoding })
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.layout.geometry
    }

    pub fn dims(&self) -> [usize; 4] {
        self.layout.geometry.dims
    }

    /// The instance as a spin model, produced by replaying the trace.
    pub fn model(&self) -> Result<SpinModel> {
        replay(&self.trace, &self.layout.base_model())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let faces: Vec<FaceJson> = self
            .layout
            .roles
            .iter()
            .enumerate()
            .map(|(id, r)| match r {
                FaceRole::Finite(j) => FaceJson { id, role: RoleName::Finite, j: Some(*j) },
                FaceRole::Merge => FaceJson { id, role: RoleName::Merge, j: None },
                FaceRole::Delete => FaceJson { id, role: RoleName::Delete, j: None },
            })
            .collect();
        let doc = InstanceJson {
            dims: self.dims(),
            backend: self.backend,
            faces,
            fixed_edges: self.layout.fixed.iter().map(|&(id, provenance)| FixedJson { id, provenance }).collect(),
            logical_map: self.logical_map.iter().enumerate().map(|(i, &e)| (i.to_string(), e)).collect(),
            trace: self.trace.steps.clone(),
            accounting: self.accounting,
            target: self.target.to_json(),
            encoding: self.encoding.clone(),
        };
        serde_json::to_value(doc).expect("instance serialises")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("instance serialises")
    }

    /// Reads an instance back. The face list is authoritative; the trace
    /// must agree with it.
    pub fn from_json_str(s: &str) -> Result<CompiledInstance> {
        let doc: InstanceJson = serde_json::from_str(s)?;
        let geometry = LatticeGeometry::new(doc.dims, Boundary::Open)?;
        let mut roles = vec![None; geometry.num_faces()];
        for f in doc.faces {
            let slot = roles.get_mut(f.id).ok_or_else(|| Error::InvalidArgument(format!("face {} out of range", f.id)))?;
            if slot.is_some() {
                return Err(Error::InvalidArgument(format!("face {} listed twice", f.id)));
            }
            *slot = Some(match (f.role, f.j) {
                (RoleName::Finite, Some(j)) => FaceRole::Finite(j),
                (RoleName::Finite, None) => return Err(Error::InvalidArgument(format!("face {} needs J", f.id))),
                (RoleName::Merge, _) => FaceRole::Merge,
                (RoleName::Delete, _) => FaceRole::Delete,
            });
        }
        let roles = roles
            .into_iter()
            .enumerate()
            .map(|(f, r)| r.ok_or_else(|| Error::InvalidArgument(format!("face {f} has no role"))))
            .collect::<Result<Vec<_>>>()?;
        let layout = Layout { geometry, roles, fixed: doc.fixed_edges.iter().map(|f| (f.id, f.provenance)).collect() };
        layout.check(doc.backend)?;
        let mut logical_map = vec![usize::MAX; doc.logical_map.len()];
        for (k, e) in doc.logical_map {
            let i: usize = k.parse().map_err(|_| Error::InvalidArgument(format!("logical map key {k:?}")))?;
            *logical_map.get_mut(i).ok_or_else(|| Error::InvalidArgument(format!("logical spin {i} out of range")))? = e;
        }
        let trace = RewriteTrace { steps: doc.trace };
        if trace != layout.trace() {
            return Err(Error::InvalidArgument("trace does not match the face roles".into()));
        }
        Ok(CompiledInstance {
            backend: doc.backend,
            layout,
            logical_map,
            trace,
            accounting: doc.accounting,
            target: SpinModel::from_json_value(doc.target)?,
            encoding: doc.encoding,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RoleName {
    Finite,
    Merge,
    Delete,
}

#[derive(Serialize, Deserialize)]
struct FaceJson {
    id: usize,
    role: RoleName,
    #[serde(rename = "J")]
    j: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct FixedJson {
    id: usize,
    provenance: FixKind,
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    dims: [usize; 4],
    backend: Backend,
    faces: Vec<FaceJson>,
    fixed_edges: Vec<FixedJson>,
    logical_map: BTreeMap<String, usize>,
    trace: Vec<crate::rewrite::TraceStep>,
    accounting: Accounting,
    target: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    encoding: Option<QlevelEncoding>,
}
