//! Effective model of a constrained binary model.
//!
//! All hard terms are solved at once over GF(2); the dependent spins are
//! substituted into every finite term, equal supports are collected, and the
//! discarded degrees of freedom are returned as a power of two and an energy
//! offset: `Z(model) = 2^pow2 e^(-beta offset) Z(effective)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::engine::{constraint_vars, parity_form};
use crate::error::{Error, Result};
use crate::gf2::ConstraintSet;
use crate::model::{SpinModel, Term};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accounting {
    pub pow2: i64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Effective {
    pub model: SpinModel,
    pub accounting: Accounting,
    /// Original spin behind each effective spin.
    pub spins: Vec<usize>,
    /// Rank of the hard-constraint system.
    pub rank: usize,
}

pub fn extract_effective_model(model: &SpinModel) -> Result<Effective> {
    extract_with_keep(model, &[])
}

/// Spins in `keep` survive as effective spins `0..keep.len()` in that order
/// whenever the constraints allow it; constraints left among them come back as
/// infinite parity terms.
pub fn extract_with_keep(model: &SpinModel, keep: &[usize]) -> Result<Effective> {
    model.validate()?;
    if !model.is_binary() {
        return Err(Error::Unsupported("effective model extraction needs binary spins".into()));
    }
    let mut is_keep = vec![false; model.num_spins];
    for &k in keep {
        if k >= model.num_spins {
            return Err(Error::InvalidArgument(format!("keep spin {k} out of range")));
        }
        if is_keep[k] {
            return Err(Error::InvalidArgument(format!("keep spin {k} listed twice")));
        }
        is_keep[k] = true;
    }
    let mut cs = ConstraintSet::new(model.num_spins);
    cs.protect(keep);
    for t in model.terms.iter().filter(|t| t.is_infinite()) {
        cs.add(&constraint_vars(model, t)?, false)?;
    }

    let mut offset = model.energy_offset;
    let mut order: Vec<Vec<u32>> = Vec::new();
    let mut coupling: HashMap<Vec<u32>, f64> = HashMap::new();
    for t in model.terms.iter().filter(|t| !t.is_infinite() && !t.is_zero()) {
        let (parts, c) = parity_form(model, t).ok_or_else(|| Error::Unsupported("term without a parity form".into()))?;
        offset += c;
        for (spins, j) in parts {
            let (vars, flip) = substitute_keeping(&cs, &is_keep, &spins);
            let j = if flip { -j } else { j };
            if vars.is_empty() {
                offset -= j;
                continue;
            }
            match coupling.get_mut(&vars) {
                Some(x) => *x += j,
                None => {
                    coupling.insert(vars.clone(), j);
                    order.push(vars);
                }
            }
        }
    }

    // effective spins: keep list, then any other free spin still in a term
    let mut index: HashMap<u32, usize> = HashMap::new();
    let mut spins: Vec<usize> = Vec::new();
    for &k in keep {
        index.insert(k as u32, spins.len());
        spins.push(k);
    }
    let mut junk: Vec<u32> =
        order.iter().filter(|v| coupling[*v] != 0.0).flat_map(|v| v.iter().copied()).filter(|x| !index.contains_key(x)).collect();
    junk.sort_unstable();
    junk.dedup();
    for x in junk {
        index.insert(x, spins.len());
        spins.push(x as usize);
    }

    let mut eff = SpinModel::binary(spins.len());
    for v in &order {
        let j = coupling[v];
        if j != 0.0 {
            let mut s: Vec<usize> = v.iter().map(|x| index[x]).collect();
            s.sort_unstable();
            eff.push(Term::parity(s, j));
        }
    }
    for (p, vars, _) in cs.rows() {
        if is_keep[p] {
            let mut s: Vec<usize> = std::iter::once(p as u32).chain(vars.iter().copied()).map(|x| index[&x]).collect();
            s.sort_unstable();
            eff.push(Term::constraint(s));
        }
    }
    let unused = cs.free_vars().into_iter().filter(|v| !index.contains_key(&(*v as u32))).count();
    Ok(Effective {
        model: eff,
        accounting: Accounting { pow2: model.log2_prefactor + unused as i64, offset },
        spins,
        rank: cs.rank(),
    })
}

/// Like plain substitution, but pivots that are kept spins stay as they are.
fn substitute_keeping(cs: &ConstraintSet, is_keep: &[bool], spins: &[usize]) -> (Vec<u32>, bool) {
    let mut acc: Vec<u32> = Vec::new();
    let mut flip = false;
    let toggle = |x: u32, acc: &mut Vec<u32>| match acc.binary_search(&x) {
        Ok(i) => {
            acc.remove(i);
        }
        Err(i) => acc.insert(i, x),
    };
    for &s in spins {
        match cs.expression(s) {
            Some((e, rhs)) if !is_keep[s] => {
                flip ^= rhs;
                for &x in e {
                    toggle(x, &mut acc);
                }
            }
            _ => toggle(s as u32, &mut acc),
        }
    }
    (acc, flip)
}
