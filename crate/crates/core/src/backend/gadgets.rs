//! Stand-alone building blocks: k-body gadgets, wires, turns and replication.

use super::bus::{bus_layout, Row};
use super::{band_height, Backend, Builder, FaceRole, Layout};
use crate::error::{Error, Result};
use crate::extract::{extract_with_keep, Effective};
use crate::rewrite::FixKind;

#[derive(Debug, Clone)]
pub struct GadgetBlueprint {
    /// Number of attachment edges.
    pub k: usize,
    /// Bounding box `[lo, hi]` in vertex coordinates.
    pub bbox: ([usize; 4], [usize; 4]),
    pub layout: Layout,
    pub attachments: Vec<usize>,
}

impl GadgetBlueprint {
    fn new(layout: Layout, attachments: Vec<usize>) -> GadgetBlueprint {
        GadgetBlueprint { k: attachments.len(), bbox: ([0; 4], layout.geometry.dims), layout, attachments }
    }

    /// Effective model over the attachment edges.
    pub fn effective(&self) -> Result<Effective> {
        extract_with_keep(&self.layout.model()?, &self.attachments)
    }
}

/// One k-body parity term on `k` bus spins.
pub fn gadget_kbody(k: usize, j: f64) -> Result<GadgetBlueprint> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let row = Row { y: 0, support: (0..k).collect(), j };
    let (layout, logical) = bus_layout(Backend::Lgt4d, k, band_height(k), &[row], |_, _| Ok(()))?;
    Ok(GadgetBlueprint::new(layout, logical))
}

pub fn gadget_field(j: f64) -> Result<GadgetBlueprint> {
    gadget_kbody(1, j)
}

pub fn gadget_pair(j: f64) -> Result<GadgetBlueprint> {
    gadget_kbody(2, j)
}

fn check_axes(a: usize, b: usize) -> Result<()> {
    if a >= 4 || b >= 4 || a == b {
        return Err(Error::InvalidArgument(format!("axes {a} and {b}")));
    }
    Ok(())
}

fn at(pairs: &[(usize, usize)]) -> [usize; 4] {
    let mut c = [0; 4];
    for &(d, v) in pairs {
        c[d] = v;
    }
    c
}

/// A spin on an edge along `edge_axis` carried `length` cells along `axis`:
/// a ladder of merged faces whose two rails are pinned gauge paths.
pub fn propagate(length: usize, axis: usize, edge_axis: usize) -> Result<GadgetBlueprint> {
    check_axes(axis, edge_axis)?;
    if length == 0 {
        return Err(Error::InvalidArgument("length must be at least 1".into()));
    }
    let mut dims = [0; 4];
    dims[axis] = length;
    dims[edge_axis] = 1;
    let mut b = Builder::new(dims)?;
    for t in 0..length {
        b.face(at(&[(axis, t)]), axis, edge_axis, FaceRole::Merge)?;
        for rail in 0..2 {
            b.fix(at(&[(axis, t), (edge_axis, rail)]), axis, FixKind::Gauge)?;
        }
    }
    let start = b.edge(at(&[]), edge_axis)?;
    let end = b.edge(at(&[(axis, length)]), edge_axis)?;
    Ok(GadgetBlueprint::new(b.finish(), vec![start, end]))
}

/// A spin on an edge along `to` moving along `from`, turned so that it ends
/// on an edge along `from` moving along `to`.
pub fn turn(from: usize, to: usize) -> Result<GadgetBlueprint> {
    check_axes(from, to)?;
    let mut dims = [0; 4];
    dims[from] = 2;
    dims[to] = 2;
    let mut b = Builder::new(dims)?;
    let c = |a: usize, t: usize| at(&[(from, a), (to, t)]);
    // straight cell, corner cell, straight cell
    b.face(c(0, 0), from, to, FaceRole::Merge)?;
    b.fix(c(0, 0), from, FixKind::Gauge)?;
    b.fix(c(0, 1), from, FixKind::Gauge)?;
    b.face(c(1, 0), from, to, FaceRole::Merge)?;
    b.fix(c(1, 0), from, FixKind::Gauge)?;
    b.fix(c(2, 0), to, FixKind::Gauge)?;
    b.face(c(1, 1), from, to, FaceRole::Merge)?;
    b.fix(c(2, 1), to, FixKind::Gauge)?;
    b.fix(c(1, 1), to, FixKind::Gauge)?;
    let start = b.edge(c(0, 0), to)?;
    let end = b.edge(c(1, 2), from)?;
    Ok(GadgetBlueprint::new(b.finish(), vec![start, end]))
}

/// One logical spin and `fanout - 1` copies of it. A line-like object in 3D
/// has two ends, so the pure 3D backend stops at fanout 2.
pub fn replicate(fanout: usize, backend: Backend) -> Result<GadgetBlueprint> {
    if fanout == 0 {
        return Err(Error::InvalidArgument("fanout must be at least 1".into()));
    }
    match backend {
        Backend::Lgt3d => {
            if fanout >= 3 {
                return Err(Error::EndsBound { fanout });
            }
            let mut g = propagate(2, 0, 1)?;
            if fanout == 1 {
                g.attachments.truncate(1);
                g.k = 1;
            }
            Ok(g)
        }
        Backend::Lgt4d | Backend::Lgt3dBoundary => {
            let height = 2 * fanout;
            let mut taps = Vec::new();
            let (layout, logical) = bus_layout(backend, 1, height, &[], |b, w| {
                for t in 1..fanout {
                    taps.push(b.edge([0, 2 * t, 0, w], 0)?);
                }
                Ok(())
            })?;
            let mut att = logical;
            att.extend(taps);
            Ok(GadgetBlueprint::new(layout, att))
        }
    }
}
