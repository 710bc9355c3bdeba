//! Bus layouts: logical spin `i` lives on the x edge at `x = 2i` and is
//! copied along y. Each term occupies one row `y`. A carrier runs along x
//! through the row on z edges, picks up every spin of the support through an
//! xz face and detours around the others through the z = 1 plane. The last
//! xz face of the row is the only finite one.
//!
//! In 4D the bus is the `w = 0` slab and the rows live in `w = 1`, where
//! every edge except the carriers is a copy of its `w = 0` partner. In the
//! 3D variant the rows share the slab with the bus and everything that is not
//! a carrier is pinned.

use super::{Backend, Builder, FaceRole, Layout};
use crate::error::{Error, Result};
use crate::rewrite::FixKind;

const X: usize = 0;
const Y: usize = 1;
const Z: usize = 2;
const W: usize = 3;

/// One k-body term on row `y`.
#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub y: usize,
    pub support: Vec<usize>,
    pub j: f64,
}

/// Lays out `rows` over `n` logical spins; returns the layout and the edge of
/// each logical spin. `extra` adds further faces before defaults are filled.
pub(crate) fn bus_layout(
    backend: Backend,
    n: usize,
    height: usize,
    rows: &[Row],
    extra: impl FnOnce(&mut Builder, usize) -> Result<()>,
) -> Result<(Layout, Vec<usize>)> {
    if n == 0 || height == 0 {
        return Err(Error::InvalidArgument("bus needs at least one spin and one row".into()));
    }
    let (w, dims) = match backend {
        Backend::Lgt4d => (1, [2 * n, height, 1, 1]),
        Backend::Lgt3dBoundary => (0, [2 * n, height, 1, 0]),
        Backend::Lgt3d => return Err(Error::Unsupported("the pure 3D backend has no bus".into())),
    };
    let mut b = Builder::new(dims)?;
    for r in rows {
        place_row(&mut b, n, w, r)?;
    }
    extra(&mut b, w)?;
    match backend {
        Backend::Lgt4d => finish_4d(&mut b, n, height)?,
        _ => finish_3d(&mut b, n, height)?,
    }
    let logical = (0..n).map(|i| b.edge([2 * i, 0, 0, 0], X)).collect::<Result<Vec<_>>>()?;
    Ok((b.finish(), logical))
}

fn place_row(b: &mut Builder, n: usize, w: usize, row: &Row) -> Result<()> {
    let mut s = row.support.clone();
    s.sort_unstable();
    s.dedup();
    if s.len() != row.support.len() || s.is_empty() || *s.last().unwrap() >= n {
        return Err(Error::InvalidArgument(format!("bad term support {:?}", row.support)));
    }
    let y = row.y;
    let (first, last) = (s[0], *s.last().unwrap());
    for x in 2 * first + 1..=2 * last {
        b.carrier([x, y, 0, w], Z)?;
    }
    for i in first..=last {
        if s.binary_search(&i).is_ok() {
            let role = if i == last { FaceRole::Finite(row.j) } else { FaceRole::Merge };
            b.face([2 * i, y, 0, w], X, Z, role)?;
        } else {
            b.face([2 * i, y, 0, w], Y, Z, FaceRole::Merge)?;
            b.face([2 * i, y, 1, w], X, Y, FaceRole::Merge)?;
            b.face([2 * i + 1, y, 0, w], Y, Z, FaceRole::Merge)?;
            b.carrier([2 * i, y, 1, w], Y)?;
            b.carrier([2 * i + 1, y, 1, w], Y)?;
            b.face([2 * i, y, 0, w], X, Z, FaceRole::Delete)?;
        }
        if i != last {
            b.face([2 * i + 1, y, 0, w], X, Z, FaceRole::Merge)?;
        }
    }
    Ok(())
}

/// Gauge tree and copies in `w = 0`, copies into `w = 1`.
fn finish_4d(b: &mut Builder, n: usize, height: usize) -> Result<()> {
    let xs = 2 * n;
    for x in 0..=xs {
        for y in 0..=height {
            for z in 0..2 {
                b.fix([x, y, z, 0], W, FixKind::Gauge)?;
                if y < height {
                    b.fix([x, y, z, 0], Y, FixKind::Gauge)?;
                }
            }
        }
        b.fix([x, 0, 0, 0], Z, FixKind::Gauge)?;
    }
    for i in 0..n {
        b.fix([2 * i, 0, 1, 0], X, FixKind::Gauge)?;
        b.fix([2 * i + 1, 0, 0, 0], X, FixKind::Gauge)?;
        b.face([2 * i + 1, 0, 0, 0], X, Z, FaceRole::Merge)?;
    }
    for y in 0..height {
        for x in 0..=xs {
            b.face([x, y, 0, 0], Y, Z, FaceRole::Merge)?;
            if x < xs {
                for z in 0..2 {
                    b.face([x, y, z, 0], X, Y, FaceRole::Merge)?;
                }
            }
        }
    }
    // w faces: copy unless the upper edge is a carrier
    for x in 0..=xs {
        for y in 0..=height {
            for z in 0..2 {
                for d in [X, Y, Z] {
                    let c = [x, y, z, 0];
                    let (Some(_), Some(up)) = (b.geom.edge(c, d), b.geom.edge([x, y, z, 1], d)) else { continue };
                    let role = if b.is_carrier(up) { FaceRole::Delete } else { FaceRole::Merge };
                    b.face(c, d, W, role)?;
                }
            }
        }
    }
    Ok(())
}

/// Bus copies on `z = 0`; every non-carrier edge is pinned.
fn finish_3d(b: &mut Builder, n: usize, height: usize) -> Result<()> {
    let xs = 2 * n;
    for i in 0..n {
        for y in 0..height {
            b.face([2 * i, y, 0, 0], X, Y, FaceRole::Merge)?;
        }
    }
    for x in 0..=xs {
        for y in 0..=height {
            if let Some(e) = b.geom.edge([x, y, 0, 0], Z) {
                if !b.is_carrier(e) {
                    b.fix_edge(e, FixKind::Gauge)?;
                }
            }
        }
    }
    for x in 0..=xs {
        for y in 0..=height {
            for z in 0..2 {
                for d in [X, Y] {
                    let Some(e) = b.geom.edge([x, y, z, 0], d) else { continue };
                    let logical_line = d == X && z == 0 && x % 2 == 0;
                    if !logical_line && !b.is_carrier(e) {
                        b.fix_edge(e, FixKind::Boundary)?;
                    }
                }
            }
        }
    }
    Ok(())
}
