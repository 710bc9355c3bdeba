//! Sparse, incremental, fully reduced GF(2) elimination.
//!
//! Every stored row reads `pivot = rhs + sum(vars)` where no var of any row is
//! itself a pivot. Pivot choice is driven by a priority key: ordinary
//! variables are pivoted lowest index first, protected variables only when a
//! row contains nothing else.

use crate::error::{Certificate, Error, Result};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Row {
    pivot: u32,
    vars: Vec<u32>,
    rhs: bool,
    origins: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Added {
    Pivot(usize),
    /// Linear combination (of equation ids) that reduced to `0 = 0`; empty unless
    /// provenance is tracked.
    Redundant(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct ConstraintSet {
    num_vars: usize,
    rows: Vec<Row>,
    pivot_of: Vec<u32>,
    occ: Vec<Vec<u32>>,
    key: Vec<u64>,
    equations: Vec<(Vec<u32>, bool)>,
    track: bool,
    marks: Vec<bool>,
}

fn sym_diff(a: &[u32], b: &[u32], skip: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let x = if j == b.len() || (i < a.len() && a[i] < b[j]) {
            i += 1;
            a[i - 1]
        } else if i == a.len() || b[j] < a[i] {
            j += 1;
            b[j - 1]
        } else {
            i += 1;
            j += 1;
            continue;
        };
        if x != skip {
            out.push(x);
        }
    }
    out
}

impl ConstraintSet {
    pub fn new(num_vars: usize) -> ConstraintSet {
        ConstraintSet {
            num_vars,
            rows: Vec::new(),
            pivot_of: vec![NONE; num_vars],
            occ: vec![Vec::new(); num_vars],
            key: (0..num_vars as u64).collect(),
            equations: Vec::new(),
            track: false,
            marks: vec![false; num_vars],
        }
    }

    /// Also records, for each row, which input equations it was built from.
    pub fn with_provenance(num_vars: usize) -> ConstraintSet {
        let mut c = ConstraintSet::new(num_vars);
        c.track = true;
        c
    }

    /// Variables in `keep` are pivoted last; among them the later entries first.
    pub fn protect(&mut self, keep: &[usize]) {
        let k = keep.len() as u64;
        for (p, &v) in keep.iter().enumerate() {
            self.key[v] = (1u64 << 40) + (k - p as u64);
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn num_equations(&self) -> usize {
        self.equations.len()
    }

    pub fn is_pivot(&self, v: usize) -> bool {
        self.pivot_of[v] != NONE
    }

    /// `v = rhs + sum(vars)` for a pivot; `None` for a free variable.
    pub fn expression(&self, v: usize) -> Option<(&[u32], bool)> {
        let r = self.pivot_of[v];
        (r != NONE).then(|| {
            let row = &self.rows[r as usize];
            (row.vars.as_slice(), row.rhs)
        })
    }

    pub fn free_vars(&self) -> Vec<usize> {
        (0..self.num_vars).filter(|&v| self.pivot_of[v] == NONE).collect()
    }

    /// Rows as (pivot, vars, rhs), in insertion order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, &[u32], bool)> {
        self.rows.iter().map(|r| (r.pivot as usize, r.vars.as_slice(), r.rhs))
    }

    /// Reduce an arbitrary equation against the current rows; returns the
    /// remaining free variables and the constant.
    pub fn reduce(&mut self, vars: &[usize]) -> (Vec<u32>, bool) {
        let mut touched: Vec<u32> = Vec::with_capacity(vars.len() * 2);
        let mut rhs = false;
        for &v in vars {
            let r = self.pivot_of[v];
            if r == NONE {
                self.toggle(v as u32, &mut touched);
            } else {
                let r = r as usize;
                rhs ^= self.rows[r].rhs;
                for i in 0..self.rows[r].vars.len() {
                    let x = self.rows[r].vars[i];
                    self.toggle(x, &mut touched);
                }
            }
        }
        let mut out: Vec<u32> = touched.into_iter().filter(|&x| self.marks[x as usize]).collect();
        for &x in &out {
            self.marks[x as usize] = false;
        }
        out.sort_unstable();
        out.dedup();
        (out, rhs)
    }

    fn toggle(&mut self, x: u32, touched: &mut Vec<u32>) {
        let m = &mut self.marks[x as usize];
        *m = !*m;
        if *m {
            touched.push(x);
        }
    }

    /// Add `sum(vars) = rhs`. Repeated variables cancel.
    pub fn add(&mut self, vars: &[usize], rhs: bool) -> Result<Added> {
        let id = self.equations.len() as u32;
        self.equations.push((vars.iter().map(|&v| v as u32).collect(), rhs));
        let (mut red, r0) = self.reduce(vars);
        let rhs = rhs ^ r0;
        let mut origins = Vec::new();
        if self.track {
            origins.push(id);
            let mut ov: Vec<u32> = Vec::new();
            for &v in vars {
                let r = self.pivot_of[v];
                if r != NONE {
                    ov = sym_diff(&ov, &self.rows[r as usize].origins, NONE);
                }
            }
            origins = sym_diff(&origins, &ov, NONE);
        }
        if red.is_empty() {
            if rhs {
                let cert = self.certificate();
                self.equations.pop();
                return Err(Error::Frustrated(cert));
            }
            return Ok(Added::Redundant(origins.into_iter().map(|x| x as usize).collect()));
        }
        let (pi, _) = red.iter().enumerate().min_by_key(|(_, &v)| self.key[v as usize]).unwrap();
        let p = red.remove(pi);
        let new_id = self.rows.len() as u32;
        let occ_p = std::mem::take(&mut self.occ[p as usize]);
        for r in occ_p {
            if self.rows[r as usize].vars.binary_search(&p).is_err() {
                continue;
            }
            let old = std::mem::take(&mut self.rows[r as usize].vars);
            let new_vars = sym_diff(&old, &red, p);
            // record new occurrences
            for &x in &new_vars {
                if old.binary_search(&x).is_err() {
                    self.occ[x as usize].push(r);
                }
            }
            let row = &mut self.rows[r as usize];
            row.vars = new_vars;
            row.rhs ^= rhs;
            if self.track {
                row.origins = sym_diff(&row.origins, &origins, NONE);
            }
        }
        for &x in &red {
            self.occ[x as usize].push(new_id);
        }
        self.pivot_of[p as usize] = new_id;
        self.rows.push(Row { pivot: p, vars: red, rhs, origins });
        Ok(Added::Pivot(p as usize))
    }

    /// Replays the stored equations with provenance to name a contradictory subset.
    fn certificate(&self) -> Certificate {
        let mut c = ConstraintSet::with_provenance(self.num_vars);
        for (vars, rhs) in &self.equations {
            let vs: Vec<usize> = vars.iter().map(|&v| v as usize).collect();
            let id = c.equations.len() as u32;
            c.equations.push((vars.clone(), *rhs));
            let (red, r0) = c.reduce(&vs);
            if red.is_empty() && (*rhs ^ r0) {
                let mut ov: Vec<u32> = vec![id];
                for &v in &vs {
                    let r = c.pivot_of[v];
                    if r != NONE {
                        ov = sym_diff(&ov, &c.rows[r as usize].origins, NONE);
                    }
                }
                return Certificate { equations: ov.into_iter().map(|x| x as usize).collect() };
            }
            c.equations.pop();
            let _ = c.add(&vs, *rhs);
        }
        Certificate { equations: Vec::new() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_rank(rows: &[Vec<usize>], n: usize) -> usize {
        let mut m: Vec<Vec<bool>> = rows
            .iter()
            .map(|r| {
                let mut v = vec![false; n];
                for &x in r {
                    v[x] ^= true;
                }
                v
            })
            .collect();
        let mut rank = 0;
        for c in 0..n {
            if let Some(p) = (rank..m.len()).find(|&i| m[i][c]) {
                m.swap(rank, p);
                for i in 0..m.len() {
                    if i != rank && m[i][c] {
                        let src = m[rank].clone();
                        for (a, b) in m[i].iter_mut().zip(src) {
                            *a ^= b;
                        }
                    }
                }
                rank += 1;
            }
        }
        rank
    }

    #[test]
    fn chain_reduces_to_single_free() {
        let mut c = ConstraintSet::new(5);
        for i in 0..4 {
            c.add(&[i, i + 1], false).unwrap();
        }
        assert_eq!(c.rank(), 4);
        assert_eq!(c.free_vars(), vec![4]);
        assert_eq!(c.expression(0).unwrap(), (&[4u32][..], false));
    }

    #[test]
    fn protected_stay_free() {
        let mut c = ConstraintSet::new(4);
        c.protect(&[0]);
        c.add(&[0, 1], false).unwrap();
        c.add(&[1, 2, 3], true).unwrap();
        assert!(!c.is_pivot(0));
        assert!(c.is_pivot(1));
    }

    #[test]
    fn frustration_certificate() {
        let mut c = ConstraintSet::new(3);
        c.add(&[0, 1], false).unwrap();
        c.add(&[2], false).unwrap();
        c.add(&[1, 2], true).unwrap();
        let err = c.add(&[0], false).unwrap_err();
        match err {
            Error::Frustrated(cert) => {
                let mut e = cert.equations.clone();
                e.sort();
                assert_eq!(e, vec![0, 1, 2, 3]);
            }
            other => panic!("{other}"),
        }
        assert_eq!(c.num_equations(), 3);
    }

    #[test]
    fn provenance_gives_dependency() {
        let mut c = ConstraintSet::with_provenance(3);
        c.add(&[0, 1], false).unwrap();
        c.add(&[1, 2], false).unwrap();
        match c.add(&[0, 2], false).unwrap() {
            Added::Redundant(mut d) => {
                d.sort();
                assert_eq!(d, vec![0, 1, 2]);
            }
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn rank_matches_dense(rows in prop::collection::vec(prop::collection::vec(0usize..12, 1..5), 0..20)) {
            let mut c = ConstraintSet::new(12);
            for r in &rows {
                c.add(r, false).unwrap();
            }
            prop_assert_eq!(c.rank(), dense_rank(&rows, 12));
            // every row is fully reduced
            for (p, vars, _) in c.rows() {
                prop_assert!(c.is_pivot(p));
                for &v in vars {
                    prop_assert!(!c.is_pivot(v as usize));
                }
            }
        }

        #[test]
        fn solutions_satisfy_inputs(rows in prop::collection::vec((prop::collection::vec(0usize..10, 1..5), any::<bool>()), 0..12), seed in any::<u16>()) {
            let mut c = ConstraintSet::new(10);
            let mut kept = Vec::new();
            for (r, b) in &rows {
                if c.add(r, *b).is_ok() {
                    kept.push((r.clone(), *b));
                }
            }
            let mut x = vec![false; 10];
            for v in c.free_vars() {
                x[v] = (seed >> (v % 16)) & 1 == 1;
            }
            for v in 0..10 {
                if let Some((vars, rhs)) = c.expression(v) {
                    x[v] = vars.iter().fold(rhs, |a, &u| a ^ x[u as usize]);
                }
            }
            for (r, b) in kept {
                let s = r.iter().fold(false, |a, &u| a ^ x[u]);
                prop_assert_eq!(s, b);
            }
        }
    }
}
