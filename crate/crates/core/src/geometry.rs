//! Hypercubic lattice regions with up to four directions.
//!
//! `dims` are cell extents. An open direction of extent `L` has `L + 1`
//! vertex layers, a periodic one has `L`. Extent 0 removes the direction;
//! extent 1 is a slab that still carries edges along that direction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DIRS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
    Periodic,
    /// Same cells as `Open`; the outer boundary is meant to be pinned.
    Fixed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub dims: [usize; DIRS],
    pub boundary: Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub base: usize,
    pub d1: usize,
    pub d2: usize,
    /// Counterclockwise in the (d1, d2) plane.
    pub edges: [usize; 4],
}

/// Orientation signs of `Face::edges` when read counterclockwise.
pub const FACE_SIGNS: [i64; 4] = [1, 1, -1, -1];

#[derive(Debug, Clone)]
pub struct LatticeGeometry {
    pub dims: [usize; DIRS],
    pub boundary: Boundary,
    layers: [usize; DIRS],
    stride: [usize; DIRS],
    num_vertices: usize,
    edge_slot: Vec<u32>,
    /// (tail vertex, direction)
    edges: Vec<(usize, usize)>,
    faces: Vec<Face>,
    face_slot: Vec<u32>,
    edge_faces: Vec<Vec<usize>>,
    boundary_flags: Vec<bool>,
}

const NONE: u32 = u32::MAX;

fn plane_slot(d1: usize, d2: usize) -> usize {
    // (0,1) (0,2) (0,3) (1,2) (1,3) (2,3)
    match (d1, d2) {
        (0, 1) => 0,
        (0, 2) => 1,
        (0, 3) => 2,
        (1, 2) => 3,
        (1, 3) => 4,
        (2, 3) => 5,
        _ => unreachable!("plane ({d1},{d2})"),
    }
}

impl LatticeGeometry {
    pub fn new(dims: [usize; DIRS], boundary: Boundary) -> Result<LatticeGeometry> {
        if dims.iter().all(|d| *d == 0) {
            return Err(Error::InvalidGeometry("all extents are zero".into()));
        }
        if boundary == Boundary::Periodic && dims.contains(&1) {
            return Err(Error::InvalidGeometry("periodic extent 1 would create self-loops".into()));
        }
        let mut layers = [1usize; DIRS];
        for d in 0..DIRS {
            if dims[d] > 0 {
                layers[d] = if boundary == Boundary::Periodic { dims[d] } else { dims[d] + 1 };
            }
        }
        let mut stride = [1usize; DIRS];
        for d in 1..DIRS {
            stride[d] = stride[d - 1] * layers[d - 1];
        }
        let num_vertices = stride[DIRS - 1] * layers[DIRS - 1];
        if num_vertices > 50_000_000 {
            return Err(Error::CapExceeded(format!("{num_vertices} vertices")));
        }
        let mut g = LatticeGeometry {
            dims,
            boundary,
            layers,
            stride,
            num_vertices,
            edge_slot: vec![NONE; num_vertices * DIRS],
            edges: Vec::new(),
            faces: Vec::new(),
            face_slot: vec![NONE; num_vertices * 6],
            edge_faces: Vec::new(),
            boundary_flags: Vec::new(),
        };
        for v in 0..num_vertices {
            let c = g.coords(v);
            for d in 0..DIRS {
                if g.has_edge_at(&c, d) {
                    g.edge_slot[v * DIRS + d] = g.edges.len() as u32;
                    g.edges.push((v, d));
                }
            }
        }
        g.edge_faces = vec![Vec::new(); g.edges.len()];
        for v in 0..num_vertices {
            let c = g.coords(v);
            for d1 in 0..DIRS {
                for d2 in d1 + 1..DIRS {
                    if !(g.has_edge_at(&c, d1) && g.has_edge_at(&c, d2)) {
                        continue;
                    }
                    let a = g.edge_slot[v * DIRS + d1] as usize;
                    let b = g.edge_slot[g.step(v, d1) * DIRS + d2] as usize;
                    let cc = g.edge_slot[g.step(v, d2) * DIRS + d1] as usize;
                    let dd = g.edge_slot[v * DIRS + d2] as usize;
                    let id = g.faces.len();
                    g.face_slot[v * 6 + plane_slot(d1, d2)] = id as u32;
                    g.faces.push(Face { base: v, d1, d2, edges: [a, b, cc, dd] });
                    for e in [a, b, cc, dd] {
                        g.edge_faces[e].push(id);
                    }
                }
            }
        }
        g.boundary_flags = g.edges.iter().map(|&(v, d)| g.edge_on_boundary(v, d)).collect();
        Ok(g)
    }

    pub fn from_spec(spec: &GeometrySpec) -> Result<LatticeGeometry> {
        LatticeGeometry::new(spec.dims, spec.boundary)
    }

    pub fn spec(&self) -> GeometrySpec {
        GeometrySpec { dims: self.dims, boundary: self.boundary }
    }

    fn has_edge_at(&self, c: &[usize; DIRS], d: usize) -> bool {
        if self.dims[d] == 0 {
            return false;
        }
        match self.boundary {
            Boundary::Periodic => true,
            _ => c[d] < self.dims[d],
        }
    }

    fn edge_on_boundary(&self, v: usize, d: usize) -> bool {
        if self.boundary == Boundary::Periodic {
            return false;
        }
        let c = self.coords(v);
        (0..DIRS).any(|k| k != d && self.dims[k] > 0 && (c[k] == 0 || c[k] == self.dims[k]))
    }

    pub fn active_dims(&self) -> usize {
        self.dims.iter().filter(|d| **d > 0).count()
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn layers(&self) -> [usize; DIRS] {
        self.layers
    }

    pub fn coords(&self, v: usize) -> [usize; DIRS] {
        let mut c = [0; DIRS];
        for d in 0..DIRS {
            c[d] = (v / self.stride[d]) % self.layers[d];
        }
        c
    }

    pub fn vertex(&self, c: [usize; DIRS]) -> Option<usize> {
        let mut v = 0;
        for d in 0..DIRS {
            if c[d] >= self.layers[d] {
                return None;
            }
            v += c[d] * self.stride[d];
        }
        Some(v)
    }

    /// Neighbour of `v` one step along `d` (wrapping when periodic).
    pub fn step(&self, v: usize, d: usize) -> usize {
        let c = (v / self.stride[d]) % self.layers[d];
        if c + 1 == self.layers[d] {
            v - c * self.stride[d]
        } else {
            v + self.stride[d]
        }
    }

    pub fn edge(&self, c: [usize; DIRS], d: usize) -> Option<usize> {
        let v = self.vertex(c)?;
        let e = self.edge_slot[v * DIRS + d];
        (e != NONE).then_some(e as usize)
    }

    pub fn face_at(&self, c: [usize; DIRS], d1: usize, d2: usize) -> Option<usize> {
        let (d1, d2) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        if d1 == d2 {
            return None;
        }
        let v = self.vertex(c)?;
        let f = self.face_slot[v * 6 + plane_slot(d1, d2)];
        (f != NONE).then_some(f as usize)
    }

    /// (tail, direction); the head is `step(tail, direction)`.
    pub fn edge_info(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn edge_endpoints(&self, e: usize) -> (usize, usize) {
        let (v, d) = self.edges[e];
        (v, self.step(v, d))
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    pub fn face_boundary(&self, f: usize) -> [usize; 4] {
        self.faces[f].edges
    }

    pub fn faces_of_edge(&self, e: usize) -> &[usize] {
        &self.edge_faces[e]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_flags[e]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary_flags
    }

    /// Edges incident to a vertex with their orientation (+1 tail, -1 head).
    pub fn incident_edges(&self, v: usize) -> Vec<(usize, i64)> {
        let mut out = Vec::new();
        for d in 0..DIRS {
            if self.dims[d] == 0 {
                continue;
            }
            let e = self.edge_slot[v * DIRS + d];
            if e != NONE {
                out.push((e as usize, 1));
            }
            let c = (v / self.stride[d]) % self.layers[d];
            let prev = if c == 0 {
                if self.boundary != Boundary::Periodic {
                    continue;
                }
                v + (self.layers[d] - 1) * self.stride[d]
            } else {
                v - self.stride[d]
            };
            let e = self.edge_slot[prev * DIRS + d];
            if e != NONE {
                out.push((e as usize, -1));
            }
        }
        out
    }

    /// Centre of a face in lattice units.
    pub fn face_center(&self, f: usize) -> [f64; DIRS] {
        let fc = &self.faces[f];
        let c = self.coords(fc.base);
        let mut x = [0.0; DIRS];
        for d in 0..DIRS {
            x[d] = c[d] as f64;
        }
        x[fc.d1] += 0.5;
        x[fc.d2] += 0.5;
        x
    }

    /// Euclidean distance between face centres (minimum image when periodic).
    pub fn face_distance(&self, f1: usize, f2: usize) -> f64 {
        let (a, b) = (self.face_center(f1), self.face_center(f2));
        let mut s = 0.0;
        for d in 0..DIRS {
            let mut dx = (a[d] - b[d]).abs();
            if self.boundary == Boundary::Periodic && self.dims[d] > 0 {
                let l = self.layers[d] as f64;
                dx = dx.min(l - dx);
            }
            s += dx * dx;
        }
        s.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_counts() {
        let g = LatticeGeometry::new([2, 2, 0, 0], Boundary::Open).unwrap();
        assert_eq!((g.num_vertices(), g.num_edges(), g.num_faces()), (9, 12, 4));
        let g = LatticeGeometry::new([1, 1, 0, 0], Boundary::Open).unwrap();
        assert_eq!((g.num_edges(), g.num_faces()), (4, 1));
        let g = LatticeGeometry::new([1, 1, 1, 0], Boundary::Open).unwrap();
        assert_eq!((g.num_edges(), g.num_faces()), (12, 6));
        let g = LatticeGeometry::new([2, 2, 0, 0], Boundary::Periodic).unwrap();
        assert_eq!((g.num_vertices(), g.num_edges(), g.num_faces()), (4, 8, 4));
    }

    #[test]
    fn face_boundaries_close() {
        for (dims, b) in [([2, 3, 1, 0], Boundary::Open), ([2, 2, 2, 1], Boundary::Open), ([3, 2, 2, 0], Boundary::Periodic)] {
            let g = LatticeGeometry::new(dims, b).unwrap();
            for f in 0..g.num_faces() {
                let mut deg = std::collections::HashMap::new();
                for e in g.face_boundary(f) {
                    let (t, h) = g.edge_endpoints(e);
                    *deg.entry(t).or_insert(0) += 1;
                    *deg.entry(h).or_insert(0) += 1;
                }
                assert!(deg.values().all(|d| *d == 2), "face {f} of {dims:?}");
            }
        }
    }

    #[test]
    fn incidence_counts() {
        let g = LatticeGeometry::new([3, 3, 3, 0], Boundary::Open).unwrap();
        let d = g.active_dims();
        let mut total = 0;
        for e in 0..g.num_edges() {
            let k = g.faces_of_edge(e).len();
            total += k;
            if g.is_boundary_edge(e) {
                assert!(k < 2 * (d - 1));
            } else {
                assert_eq!(k, 2 * (d - 1));
            }
        }
        assert_eq!(total, 4 * g.num_faces());
        let p = LatticeGeometry::new([3, 3, 3, 3], Boundary::Periodic).unwrap();
        assert!((0..p.num_edges()).all(|e| p.faces_of_edge(e).len() == 6));
    }

    #[test]
    fn incident_edges_orientation() {
        let g = LatticeGeometry::new([2, 2, 0, 0], Boundary::Open).unwrap();
        let centre = g.vertex([1, 1, 0, 0]).unwrap();
        let inc = g.incident_edges(centre);
        assert_eq!(inc.len(), 4);
        for (e, s) in inc {
            let (t, h) = g.edge_endpoints(e);
            if s == 1 {
                assert_eq!(t, centre);
            } else {
                assert_eq!(h, centre);
            }
        }
    }

    #[test]
    fn face_distance_is_euclidean() {
        let g = LatticeGeometry::new([3, 1, 0, 0], Boundary::Open).unwrap();
        let f0 = g.face_at([0, 0, 0, 0], 0, 1).unwrap();
        let f2 = g.face_at([2, 0, 0, 0], 0, 1).unwrap();
        assert_eq!(g.face_distance(f0, f2), 2.0);
    }
}
