//! From target models to instances.

use std::collections::HashMap;

use super::bus::{bus_layout, Row};
use super::{band_height, superclique_dims, Backend, CompiledInstance, FaceRole};
use crate::engine::parity_form;
use crate::error::{Error, Result};
use crate::model::{SpinModel, Term};
use crate::qlevel::encode_qlevel;
use crate::walsh::{energies_to_couplings, superclique_model, CouplingVector, EnergyVector};

/// Largest interaction group expanded into a superclique.
pub const DEFAULT_GROUP_CAP: usize = 12;

/// Lowest inverse temperature the q-level penalty is sized for.
pub const DEFAULT_BETA_MIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Every nonempty subset of each connected group gets a term.
    Superclique,
    /// One term per distinct parity support of the target.
    Direct,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "superclique" => Ok(Mode::Superclique),
            "direct" => Ok(Mode::Direct),
            _ => Err(Error::InvalidArgument(format!("unknown mode {s:?}"))),
        }
    }
}

fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut c: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(c.clone());
        let Some(i) = (0..k).rev().find(|&i| c[i] != i + n - k) else { return out };
        c[i] += 1;
        for t in i + 1..k {
            c[t] = c[t - 1] + 1;
        }
    }
}

fn mask_of(s: &[usize]) -> usize {
    s.iter().fold(0, |m, &i| m | 1 << i)
}

/// Rows for the superclique of one group, bands ordered by size then
/// lexicographically. `place` maps a group-local subset to its row.
fn superclique_rows(spins: &[usize], j: &CouplingVector, cursor: &mut usize, band: impl Fn(usize) -> usize, rows: &mut Vec<Row>) {
    let g = spins.len();
    for k in 1..=g {
        for s in subsets_of_size(g, k) {
            rows.push(Row { y: *cursor, support: s.iter().map(|&i| spins[i]).collect(), j: -j.values[mask_of(&s)] });
            *cursor += band(k);
        }
    }
}

/// The superclique with couplings `J_S` on `n` logical spins, on
/// `(2n, sum_k A(k) C(n,k), 1, 1)`.
pub fn layout_superclique(n: usize, j: &CouplingVector) -> Result<CompiledInstance> {
    if n == 0 || n > DEFAULT_GROUP_CAP {
        return Err(Error::CapExceeded(format!("superclique on {n} spins, cap {DEFAULT_GROUP_CAP}")));
    }
    let target = superclique_model(n, j)?;
    let mut rows = Vec::new();
    let mut cursor = band_height(0);
    let spins: Vec<usize> = (0..n).collect();
    superclique_rows(&spins, j, &mut cursor, band_height, &mut rows);
    let height = superclique_dims(n)[1];
    debug_assert_eq!(cursor, height);
    let (layout, logical) = bus_layout(Backend::Lgt4d, n, height, &rows, |_, _| Ok(()))?;
    CompiledInstance::assemble(Backend::Lgt4d, layout, logical, target, None)
}

/// One parity term with coupling `j` on every 4-subset of `n` spins, on
/// `(2n, 4 C(n,4), 1, 1)`. With `finite_j`, every constraint face becomes a
/// finite face of that coupling; the accounting stays the constrained one.
pub fn build_4clique(n: usize, j: f64, finite_j: Option<f64>) -> Result<CompiledInstance> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("4-clique needs n >= 4, got {n}")));
    }
    let subsets = subsets_of_size(n, 4);
    let rows: Vec<Row> = subsets.iter().enumerate().map(|(t, s)| Row { y: 4 * t, support: s.clone(), j }).collect();
    let mut target = SpinModel::binary(n);
    for s in &subsets {
        target.push(Term::parity(s.clone(), j));
    }
    let (layout, logical) = bus_layout(Backend::Lgt4d, n, 4 * subsets.len(), &rows, |_, _| Ok(()))?;
    let mut inst = CompiledInstance::assemble(Backend::Lgt4d, layout, logical, target, None)?;
    if let Some(jl) = finite_j {
        if !(jl.is_finite() && jl > 0.0) {
            return Err(Error::InvalidArgument(format!("J_large = {jl}")));
        }
        for r in &mut inst.layout.roles {
            if *r == FaceRole::Merge {
                *r = FaceRole::Finite(jl);
            }
        }
        inst.trace = inst.layout.trace();
    }
    Ok(inst)
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
}

/// Connected groups of spins linked by nonzero terms, each sorted, ordered by
/// smallest member. Spins in no term form singletons.
fn interaction_groups(m: &SpinModel) -> Vec<Vec<usize>> {
    let mut d = Dsu((0..m.num_spins).collect());
    for t in m.terms.iter().filter(|t| !t.is_zero()) {
        for w in t.support.windows(2) {
            let (a, b) = (d.find(w[0]), d.find(w[1]));
            d.0[a] = b;
        }
    }
    let mut by_root: HashMap<usize, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for s in 0..m.num_spins {
        let r = d.find(s);
        let g = *by_root.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(s);
    }
    groups
}

/// Energy table of the terms inside one group over the group's spins.
fn group_table(m: &SpinModel, group: &[usize]) -> Result<EnergyVector> {
    let local: HashMap<usize, usize> = group.iter().enumerate().map(|(k, &s)| (s, k)).collect();
    let terms: Vec<&Term> = m.terms.iter().filter(|t| !t.is_zero() && t.support.iter().all(|s| local.contains_key(s))).collect();
    let mut values = vec![0.0; 1 << group.len()];
    let mut vals = Vec::new();
    for t in terms {
        let lv = m.support_levels(t);
        for (cfg, v) in values.iter_mut().enumerate() {
            vals.clear();
            vals.extend(t.support.iter().map(|s| (cfg >> local[s] & 1) as u32));
            *v += t.local_energy(&vals, &lv)?;
        }
    }
    EnergyVector::new(group.len(), values)
}

/// Compiles a target into an instance on `backend`. Targets with q-level
/// spins go through the binary encoding first, sized for `DEFAULT_BETA_MIN`.
pub fn compile_target(target: &SpinModel, backend: Backend, mode: Mode) -> Result<CompiledInstance> {
    compile_target_with(target, backend, mode, DEFAULT_BETA_MIN)
}

pub fn compile_target_with(target: &SpinModel, backend: Backend, mode: Mode, beta_min: f64) -> Result<CompiledInstance> {
    target.validate()?;
    if target.has_infinite() {
        return Err(Error::Unsupported("targets with hard constraints".into()));
    }
    if backend == Backend::Lgt3d {
        let worst = target.fanout().into_iter().max().unwrap_or(0);
        if worst >= 3 {
            return Err(Error::EndsBound { fanout: worst });
        }
        return Err(Error::Unsupported("the pure 3D backend only builds wires and fanout-2 replication".into()));
    }
    let (binary, encoding) = if target.is_binary() {
        (target.clone(), None)
    } else {
        let (b, e) = encode_qlevel(target, beta_min)?;
        (b, Some(e))
    };
    let band = |k: usize| if backend == Backend::Lgt4d { band_height(k) } else { 2 };
    let n = binary.num_spins;
    if n == 0 {
        return Err(Error::InvalidArgument("target has no spins".into()));
    }
    let mut rows = Vec::new();
    let mut compiled = SpinModel::binary(n);
    compiled.log2_prefactor = binary.log2_prefactor;
    compiled.energy_offset = binary.energy_offset;
    let mut cursor = 0;
    match mode {
        Mode::Superclique => {
            if backend == Backend::Lgt4d {
                cursor = band_height(0);
            }
            for group in interaction_groups(&binary) {
                if group.len() > DEFAULT_GROUP_CAP {
                    return Err(Error::CapExceeded(format!(
                        "interaction group of {} spins, cap {DEFAULT_GROUP_CAP}",
                        group.len()
                    )));
                }
                let table = group_table(&binary, &group)?;
                let scale = table.values.iter().fold(0f64, |m, x| m.max(x.abs()));
                let mut j = energies_to_couplings(&table);
                for v in j.values.iter_mut().skip(1) {
                    if v.abs() <= 1e-13 * scale {
                        *v = 0.0;
                    }
                }
                compiled.energy_offset += j.values[0];
                let first = rows.len();
                superclique_rows(&group, &j, &mut cursor, band, &mut rows);
                for r in &rows[first..] {
                    if r.j != 0.0 {
                        compiled.push(Term::parity(r.support.clone(), r.j));
                    }
                }
            }
        }
        Mode::Direct => {
            let mut order: Vec<Vec<usize>> = Vec::new();
            let mut acc: HashMap<Vec<usize>, f64> = HashMap::new();
            for t in binary.terms.iter().filter(|t| !t.is_zero()) {
                let (parts, c) =
                    parity_form(&binary, t).ok_or_else(|| Error::Unsupported("term without a parity form".into()))?;
                compiled.energy_offset += c;
                for (mut s, j) in parts {
                    s.sort_unstable();
                    if s.is_empty() {
                        compiled.energy_offset -= j;
                        continue;
                    }
                    match acc.get_mut(&s) {
                        Some(x) => *x += j,
                        None => {
                            acc.insert(s.clone(), j);
                            order.push(s);
                        }
                    }
                }
            }
            for s in order {
                let j = acc[&s];
                if j == 0.0 {
                    continue;
                }
                rows.push(Row { y: cursor, support: s.clone(), j });
                cursor += band(s.len());
                compiled.push(Term::parity(s, j));
            }
        }
    }
    let height = cursor.max(2);
    let (layout, logical) = bus_layout(backend, n, height, &rows, |_, _| Ok(()))?;
    CompiledInstance::assemble(backend, layout, logical, compiled, encoding)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_in_order() {
        assert_eq!(subsets_of_size(4, 2), vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(subsets_of_size(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(subsets_of_size(8, 4).len(), 70);
    }

    #[test]
    fn groups() {
        let mut m = SpinModel::binary(5);
        m.push(Term::parity(vec![0, 3], 1.0));
        m.push(Term::parity(vec![3, 4], 1.0));
        m.push(Term::parity(vec![1, 2], 0.0));
        assert_eq!(interaction_groups(&m), vec![vec![0, 3, 4], vec![1], vec![2]]);
    }
}
