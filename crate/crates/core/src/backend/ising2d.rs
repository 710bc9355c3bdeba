//! 2D Ising models on `(2n, 4, 1, m)`: one w layer per lattice row.
//!
//! Layer `w = 0` is pinned flat. Layer `b` holds row `b - 1`: spin `a` is the
//! x edge at `x = 2a, y = 0, z = 0`, copied along y. Horizontal bonds use a
//! short carrier on row `y = 0` (even `a`) or `y = 2` (odd `a`), fields use
//! row `y = 1`, and vertical bonds are the w faces of the spin edges at
//! `y = 0`. Every other edge copies its partner one layer down.

use super::{ising2d_dims, Backend, Builder, CompiledInstance, FaceRole};
use crate::error::{Error, Result};
use crate::model::{SpinModel, Term};
use crate::rewrite::FixKind;

const X: usize = 0;
const Y: usize = 1;
const Z: usize = 2;
const W: usize = 3;

/// Nearest-neighbour Ising couplings on an `n` by `m` open grid. Spin
/// `(a, b)` has index `a + n b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ising2d {
    pub n: usize,
    pub m: usize,
    /// Bond `(a, b)-(a+1, b)` at `a + (n-1) b`.
    pub horizontal: Vec<f64>,
    /// Bond `(a, b)-(a, b+1)` at `a + n b`.
    pub vertical: Vec<f64>,
    pub fields: Vec<f64>,
}

impl Ising2d {
    pub fn uniform(n: usize, m: usize, j: f64, h: f64) -> Ising2d {
        Ising2d {
            n,
            m,
            horizontal: vec![j; n.saturating_sub(1) * m],
            vertical: vec![j; n * m.saturating_sub(1)],
            fields: vec![h; n * m],
        }
    }

    fn check(&self) -> Result<()> {
        let (n, m) = (self.n, self.m);
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument("grid needs n, m >= 1".into()));
        }
        if self.horizontal.len() != (n - 1) * m || self.vertical.len() != n * (m - 1) || self.fields.len() != n * m {
            return Err(Error::InvalidArgument("coupling arrays do not match the grid".into()));
        }
        Ok(())
    }

    /// The target model in parity form, zero couplings omitted.
    pub fn target(&self) -> Result<SpinModel> {
        self.check()?;
        let n = self.n;
        let mut t = SpinModel::binary(n * self.m);
        for b in 0..self.m {
            for a in 0..n {
                let s = a + n * b;
                if a + 1 < n && self.horizontal[a + (n - 1) * b] != 0.0 {
                    t.push(Term::parity(vec![s, s + 1], self.horizontal[a + (n - 1) * b]));
                }
                if b + 1 < self.m && self.vertical[s] != 0.0 {
                    t.push(Term::parity(vec![s, s + n], self.vertical[s]));
                }
                if self.fields[s] != 0.0 {
                    t.push(Term::parity(vec![s], self.fields[s]));
                }
            }
        }
        Ok(t)
    }
}

pub fn compile_2d_ising(model: &Ising2d) -> Result<CompiledInstance> {
    let target = model.target()?;
    let (n, m) = (model.n, model.m);
    let dims = ising2d_dims(n, m);
    let mut b = Builder::new(dims)?;
    let xs = 2 * n;

    // pinned flat ground layer
    for x in 0..=xs {
        for y in 0..=4 {
            for z in 0..2 {
                for w in 0..m {
                    b.fix([x, y, z, w], W, FixKind::Gauge)?;
                }
                if y < 4 {
                    b.fix([x, y, z, 0], Y, FixKind::Gauge)?;
                }
            }
        }
        b.fix([x, 0, 0, 0], Z, FixKind::Gauge)?;
    }
    for i in 0..n {
        b.fix([2 * i, 0, 1, 0], X, FixKind::Gauge)?;
        b.fix([2 * i + 1, 0, 0, 0], X, FixKind::Gauge)?;
    }
    for (d1, d2) in [(X, Y), (X, Z), (Y, Z)] {
        for x in 0..=xs {
            for y in 0..=4 {
                for z in 0..2 {
                    if let Some(f) = b.geom.face_at([x, y, z, 0], d1, d2) {
                        b.set_face(f, FaceRole::Merge)?;
                    }
                }
            }
        }
    }

    for layer in 1..=m {
        let row = layer - 1;
        for a in 0..n {
            for y in 0..4 {
                b.face([2 * a, y, 0, layer], X, Y, FaceRole::Merge)?;
            }
            let s = a + n * row;
            b.face([2 * a, 1, 0, layer], X, Z, FaceRole::Finite(model.fields[s]))?;
            if a + 1 < n {
                let r = if a % 2 == 0 { 0 } else { 2 };
                b.carrier([2 * a + 1, r, 0, layer], Z)?;
                b.carrier([2 * a + 2, r, 0, layer], Z)?;
                b.face([2 * a, r, 0, layer], X, Z, FaceRole::Merge)?;
                b.face([2 * a + 1, r, 0, layer], X, Z, FaceRole::Merge)?;
                b.face([2 * a + 2, r, 0, layer], X, Z, FaceRole::Finite(model.horizontal[a + (n - 1) * row]))?;
            }
        }
    }

    // w faces between layer - 1 and layer, named by the upper edge
    for layer in 1..=m {
        for x in 0..=xs {
            for y in 0..=4 {
                for z in 0..2 {
                    for d in [X, Y, Z] {
                        let c = [x, y, z, layer - 1];
                        let Some(up) = b.geom.edge([x, y, z, layer], d) else { continue };
                        let spin_line = d == X && z == 0 && x % 2 == 0;
                        let role = if spin_line {
                            if y == 0 && layer >= 2 {
                                FaceRole::Finite(model.vertical[x / 2 + n * (layer - 2)])
                            } else {
                                FaceRole::Delete
                            }
                        } else if b.is_carrier(up) {
                            FaceRole::Delete
                        } else {
                            FaceRole::Merge
                        };
                        b.face(c, d, W, role)?;
                    }
                }
            }
        }
    }

    let logical = (0..n * m).map(|s| b.edge([2 * (s % n), 0, 0, s / n + 1], X)).collect::<Result<Vec<_>>>()?;
    CompiledInstance::assemble(Backend::Lgt4d, b.finish(), logical, target, None)
}
