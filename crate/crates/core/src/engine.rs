//! Exact partition functions by constraint-reduced enumeration.
//!
//! Infinite couplings become GF(2) equations and are eliminated first. What
//! remains is enumerated over the free variables that actually touch a finite
//! term or a requested probe; every other free variable contributes a factor
//! of its level count. Binary instances take a Gray-code path with
//! incremental energies, anything else a mixed-radix path with term tables.

use std::collections::HashMap;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gf2::ConstraintSet;
use crate::model::{Coupling, Interaction, SpinModel};
use crate::walsh::fwht;

pub const DEFAULT_CAP: usize = 26;
const CHUNK_BITS: u32 = 16;
const MAX_TABLE_WALSH: usize = 16;

#[derive(Debug, Clone, Copy)]
pub struct EngineOptions {
    /// Largest enumeration, in bits (log2 of the number of configurations).
    pub cap: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { cap: DEFAULT_CAP }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionResult {
    pub log_z: f64,
    pub beta: f64,
    /// Free variables left after eliminating the hard constraints.
    pub num_free_spins: usize,
    /// The subset of those that was actually enumerated.
    pub num_enumerated: usize,
    /// (log2 prefactor, energy offset) taken from the model.
    pub applied_prefactor: (i64, f64),
}

/// Quantity averaged over the Boltzmann ensemble alongside `Z`.
#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    /// Total energy, offset included.
    Energy,
    /// `(-1)^(sum of s_i)` over the listed spins.
    Parity(Vec<usize>),
    /// Sum of several parities, e.g. a magnetisation.
    ParitySum(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub result: PartitionResult,
    /// One ensemble average per probe, in request order.
    pub averages: Vec<f64>,
}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let n = std::env::var("LATMAP_THREADS").ok().and_then(|s| s.parse::<usize>().ok()).unwrap_or(0);
        rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool")
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    s: f64,
    c: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.s + y;
        self.c = (t - self.s) - y;
        self.s = t;
    }

    #[inline]
    fn scale(&mut self, f: f64) {
        self.s *= f;
        self.c *= f;
    }

    fn value(&self) -> f64 {
        self.s - self.c
    }
}

/// Running sums of `w` and `w * probe` with weights relative to the lowest
/// energy seen so far.
#[derive(Debug, Clone)]
struct Acc {
    min: f64,
    sums: Vec<Kahan>,
}

impl Acc {
    fn new(n: usize) -> Acc {
        Acc { min: f64::INFINITY, sums: vec![Kahan::default(); n + 1] }
    }

    #[inline]
    fn weight(&mut self, beta: f64, e: f64) -> f64 {
        if e < self.min {
            if self.min.is_finite() {
                let f = (-beta * (self.min - e)).exp();
                for k in &mut self.sums {
                    k.scale(f);
                }
            }
            self.min = e;
        }
        let w = (-beta * (e - self.min)).exp();
        self.sums[0].add(w);
        w
    }
}

/// Merge chunk accumulators in chunk order; returns (ln sum w, averages).
fn combine(beta: f64, parts: &[Acc]) -> (f64, Vec<f64>) {
    let m = parts.iter().map(|a| a.min).fold(f64::INFINITY, f64::min);
    let n = parts[0].sums.len();
    let mut tot = vec![Kahan::default(); n];
    for a in parts {
        let f = (-beta * (a.min - m)).exp();
        for (t, s) in tot.iter_mut().zip(&a.sums) {
            t.add(s.value() * f);
        }
    }
    let z = tot[0].value();
    (-beta * m + z.ln(), tot[1..].iter().map(|t| t.value() / z).collect())
}

/// Parity of a subset of active variables plus a constant.
#[derive(Debug, Clone, Copy)]
struct Mask {
    bits: u64,
    flip: bool,
}

#[inline]
fn parity_sign(x: u64, m: Mask) -> f64 {
    if ((x & m.bits).count_ones() & 1 == 1) ^ m.flip {
        -1.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone)]
enum ProbeCode {
    Energy,
    Parity(Vec<Mask>),
}

#[derive(Debug, Clone)]
struct BinaryPlan {
    /// `E = e_const - sum_t j[t] * (-1)^(x . masks[t])`
    masks: Vec<u64>,
    j: Vec<f64>,
    e_const: f64,
    /// terms containing each active bit
    by_bit: Vec<Vec<u32>>,
}

#[derive(Debug, Clone)]
struct TableTerm {
    slots: Vec<usize>,
    strides: Vec<usize>,
    table: Vec<f64>,
}

#[derive(Debug, Clone)]
struct MixedPlan {
    levels: Vec<u32>,
    /// Determined spins: (slot, rhs, active slots whose parity they copy).
    derived: Vec<(usize, bool, Vec<usize>)>,
    num_slots: usize,
    terms: Vec<TableTerm>,
    probes: Vec<Vec<Vec<usize>>>,
    probe_energy: Vec<bool>,
}

#[derive(Debug, Clone)]
enum Plan {
    Binary(BinaryPlan, Vec<ProbeCode>),
    Mixed(MixedPlan),
}

/// A model compiled for repeated evaluation at different temperatures.
#[derive(Debug, Clone)]
pub struct Prepared {
    plan: Plan,
    num_free: usize,
    num_active: usize,
    total: u64,
    /// ln of the factors from unused free spins and the prefactor.
    log_base: f64,
    offset: f64,
    log2_prefactor: i64,
}

fn sym_diff_into(acc: &mut Vec<u32>, other: &[u32]) {
    let mut out = Vec::with_capacity(acc.len() + other.len());
    let (mut i, mut j) = (0, 0);
    while i < acc.len() || j < other.len() {
        if j == other.len() || (i < acc.len() && acc[i] < other[j]) {
            out.push(acc[i]);
            i += 1;
        } else if i == acc.len() || other[j] < acc[i] {
            out.push(other[j]);
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    *acc = out;
}

/// Eliminate hard constraints; returns the reduced system.
fn eliminate(model: &SpinModel) -> Result<ConstraintSet> {
    let mut cs = ConstraintSet::new(model.num_spins);
    for t in &model.terms {
        if !t.is_infinite() {
            continue;
        }
        let vars = constraint_vars(model, t)?;
        cs.add(&vars, false)?;
    }
    Ok(cs)
}

/// Spins whose parity an infinite term pins to even.
pub(crate) fn constraint_vars(model: &SpinModel, t: &crate::model::Term) -> Result<Vec<usize>> {
    if t.support.iter().any(|&i| model.levels[i] != 2) {
        return Err(Error::Unsupported("infinite coupling on a spin with more than two levels".into()));
    }
    match &t.interaction {
        Interaction::Parity { .. } => Ok(t.support.clone()),
        Interaction::Clock { coefficients, .. } => {
            Ok(t.support.iter().zip(coefficients).filter(|(_, c)| *c % 2 != 0).map(|(i, _)| *i).collect())
        }
        Interaction::Table { .. } => Err(Error::InvalidModel("table term cannot be infinite".into())),
    }
}

/// Free-variable expansion of a parity over original spins.
pub(crate) fn substitute(cs: &ConstraintSet, spins: &[usize]) -> (Vec<u32>, bool) {
    let mut vars: Vec<u32> = Vec::new();
    let mut flip = false;
    for &s in spins {
        match cs.expression(s) {
            Some((e, rhs)) => {
                flip ^= rhs;
                sym_diff_into(&mut vars, e);
            }
            None => sym_diff_into(&mut vars, &[s as u32]),
        }
    }
    (vars, flip)
}

/// Parity terms equivalent to a finite term on binary spins: (spins, J).
pub(crate) fn parity_form(model: &SpinModel, t: &crate::model::Term) -> Option<(Vec<(Vec<usize>, f64)>, f64)> {
    if t.support.iter().any(|&i| model.levels[i] != 2) {
        return None;
    }
    match &t.interaction {
        Interaction::Parity { coupling: Coupling::Finite(j) } => Some((vec![(t.support.clone(), *j)], 0.0)),
        Interaction::Clock { coupling: Coupling::Finite(j), coefficients } => {
            let s = t.support.iter().zip(coefficients).filter(|(_, c)| *c % 2 != 0).map(|(i, _)| *i).collect();
            Some((vec![(s, *j)], 0.0))
        }
        Interaction::Table { values } if t.support.len() <= MAX_TABLE_WALSH => {
            let mut w = values.clone();
            fwht(&mut w);
            let n = w.len() as f64;
            let mut out = Vec::new();
            let mut c = 0.0;
            for (mask, lam) in w.into_iter().enumerate() {
                let lam = lam / n;
                if mask == 0 {
                    c = lam;
                } else if lam != 0.0 {
                    let s = (0..t.support.len()).filter(|b| mask >> b & 1 == 1).map(|b| t.support[b]).collect();
                    out.push((s, -lam));
                }
            }
            Some((out, c))
        }
        _ => None,
    }
}

impl Prepared {
    pub fn new(model: &SpinModel, probes: &[Probe], opts: &EngineOptions) -> Result<Prepared> {
        model.validate()?;
        for p in probes {
            let sets: Vec<&Vec<usize>> = match p {
                Probe::Energy => vec![],
                Probe::Parity(s) => vec![s],
                Probe::ParitySum(v) => v.iter().collect(),
            };
            for s in sets {
                if let Some(&i) = s.iter().find(|&&i| i >= model.num_spins) {
                    return Err(Error::InvalidArgument(format!("probe spin {i} out of range")));
                }
            }
        }
        let cs = eliminate(model)?;
        let finite: Vec<_> = model.terms.iter().filter(|t| !t.is_infinite() && !t.is_zero()).collect();

        let mut forms = Vec::with_capacity(finite.len());
        let mut binary = true;
        for t in &finite {
            match parity_form(model, t) {
                Some(f) => forms.push(f),
                None => {
                    binary = false;
                    break;
                }
            }
        }
        let probe_sets = |p: &Probe| -> Vec<Vec<usize>> {
            match p {
                Probe::Energy => vec![],
                Probe::Parity(s) => vec![s.clone()],
                Probe::ParitySum(v) => v.clone(),
            }
        };
        let num_free = model.num_spins - cs.rank();
        let log2_pref = model.log2_prefactor;

        if binary {
            let mut subst: Vec<(Vec<u32>, bool, f64)> = Vec::new();
            let mut e_const = 0.0;
            for (parts, c) in forms {
                e_const += c;
                for (spins, j) in parts {
                    let (v, f) = substitute(&cs, &spins);
                    subst.push((v, f, j));
                }
            }
            let probe_subst: Vec<Vec<Vec<(Vec<u32>, bool)>>> =
                probes.iter().map(|p| probe_sets(p).iter().map(|s| vec![substitute(&cs, s)]).collect()).collect();
            let mut active: Vec<u32> = subst.iter().flat_map(|(v, _, _)| v.iter().copied()).collect();
            for p in &probe_subst {
                for alts in p {
                    for (v, _) in alts {
                        active.extend_from_slice(v);
                    }
                }
            }
            active.sort_unstable();
            active.dedup();
            let n = active.len();
            if n > opts.cap || n > 63 {
                return Err(Error::TooLarge { free: n, cap: opts.cap });
            }
            let slot: HashMap<u32, usize> = active.iter().enumerate().map(|(k, &v)| (v, k)).collect();
            let to_mask = |v: &[u32]| v.iter().fold(0u64, |m, x| m | 1 << slot[x]);

            let mut combined: HashMap<u64, f64> = HashMap::new();
            let mut order = Vec::new();
            for (v, f, j) in &subst {
                let m = to_mask(v);
                let j = if *f { -j } else { *j };
                if m == 0 {
                    e_const -= j;
                    continue;
                }
                let e = combined.entry(m).or_insert_with(|| {
                    order.push(m);
                    0.0
                });
                *e += j;
            }
            let mut masks = Vec::new();
            let mut js = Vec::new();
            for m in order {
                let j = combined[&m];
                if j != 0.0 {
                    masks.push(m);
                    js.push(j);
                }
            }
            let mut by_bit = vec![Vec::new(); n];
            for (t, m) in masks.iter().enumerate() {
                for (b, list) in by_bit.iter_mut().enumerate() {
                    if m >> b & 1 == 1 {
                        list.push(t as u32);
                    }
                }
            }
            let codes = probes
                .iter()
                .zip(&probe_subst)
                .map(|(p, ps)| match p {
                    Probe::Energy => ProbeCode::Energy,
                    _ => ProbeCode::Parity(ps.iter().map(|a| Mask { bits: to_mask(&a[0].0), flip: a[0].1 }).collect()),
                })
                .collect();
            let unused = num_free - n;
            return Ok(Prepared {
                plan: Plan::Binary(BinaryPlan { masks, j: js, e_const, by_bit }, codes),
                num_free,
                num_active: n,
                total: 1u64 << n,
                log_base: (unused as f64 + log2_pref as f64) * std::f64::consts::LN_2,
                offset: model.energy_offset,
                log2_prefactor: log2_pref,
            });
        }

        // mixed radix: enumerate free spins directly, derive pivots on the fly
        let mut needed: Vec<usize> = finite.iter().flat_map(|t| t.support.iter().copied()).collect();
        for p in probes {
            for s in probe_sets(p) {
                needed.extend(s);
            }
        }
        needed.sort_unstable();
        needed.dedup();
        let mut active: Vec<usize> = Vec::new();
        for &s in &needed {
            match cs.expression(s) {
                Some((e, _)) => active.extend(e.iter().map(|&x| x as usize)),
                None => active.push(s),
            }
        }
        active.sort_unstable();
        active.dedup();
        let levels: Vec<u32> = active.iter().map(|&s| model.levels[s]).collect();
        let bits: f64 = levels.iter().map(|&q| (q as f64).log2()).sum();
        if bits > opts.cap as f64 + 1e-9 {
            return Err(Error::TooLarge { free: active.len(), cap: opts.cap });
        }
        let mut slot: HashMap<usize, usize> = active.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut derived = Vec::new();
        for &s in &needed {
            if let Some((e, rhs)) = cs.expression(s) {
                let k = active.len() + derived.len();
                let src = e.iter().map(|x| slot[&(*x as usize)]).collect();
                derived.push((k, rhs, src));
                slot.insert(s, k);
            }
        }
        let num_slots = active.len() + derived.len();
        let mut terms = Vec::with_capacity(finite.len());
        for t in &finite {
            let lv = model.support_levels(t);
            let mut strides = Vec::with_capacity(lv.len());
            let mut st = 1usize;
            for q in &lv {
                strides.push(st);
                st *= *q as usize;
            }
            terms.push(TableTerm { slots: t.support.iter().map(|s| slot[s]).collect(), strides, table: t.to_table(&lv)? });
        }
        let probes_m =
            probes.iter().map(|p| probe_sets(p).iter().map(|s| s.iter().map(|x| slot[x]).collect()).collect()).collect();
        let probe_energy = probes.iter().map(|p| matches!(p, Probe::Energy)).collect();
        let free_set: std::collections::HashSet<usize> = active.iter().copied().collect();
        let log_unused: f64 =
            cs.free_vars().into_iter().filter(|v| !free_set.contains(v)).map(|v| (model.levels[v] as f64).ln()).sum();
        let total = levels.iter().map(|&q| q as u64).product();
        Ok(Prepared {
            plan: Plan::Mixed(MixedPlan { levels, derived, num_slots, terms, probes: probes_m, probe_energy }),
            num_free,
            num_active: active.len(),
            total,
            log_base: log_unused + log2_pref as f64 * std::f64::consts::LN_2,
            offset: model.energy_offset,
            log2_prefactor: log2_pref,
        })
    }

    pub fn num_enumerated(&self) -> usize {
        self.num_active
    }

    pub fn num_free(&self) -> usize {
        self.num_free
    }

    pub fn evaluate(&self, beta: f64) -> Result<Evaluation> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        let chunk = 1u64 << CHUNK_BITS;
        let nchunks = self.total.div_ceil(chunk);
        let parts: Vec<Acc> = pool().install(|| {
            (0..nchunks)
                .into_par_iter()
                .map(|c| {
                    let start = c * chunk;
                    let len = chunk.min(self.total - start);
                    match &self.plan {
                        Plan::Binary(b, codes) => run_binary(b, codes, beta, start, len),
                        Plan::Mixed(m) => run_mixed(m, beta, start, len),
                    }
                })
                .collect()
        });
        let (ln_sum, mut averages) = combine(beta, &parts);
        let energy_probe: Vec<bool> = match &self.plan {
            Plan::Binary(_, codes) => codes.iter().map(|c| matches!(c, ProbeCode::Energy)).collect(),
            Plan::Mixed(m) => m.probe_energy.clone(),
        };
        for (a, e) in averages.iter_mut().zip(energy_probe) {
            if e {
                *a += self.offset;
            }
        }
        Ok(Evaluation {
            result: PartitionResult {
                log_z: self.log_base - beta * self.offset + ln_sum,
                beta,
                num_free_spins: self.num_free,
                num_enumerated: self.num_active,
                applied_prefactor: (self.log2_prefactor, self.offset),
            },
            averages,
        })
    }

    pub fn log_z(&self, beta: f64) -> Result<f64> {
        Ok(self.evaluate(beta)?.result.log_z)
    }
}

fn run_binary(p: &BinaryPlan, codes: &[ProbeCode], beta: f64, start: u64, len: u64) -> Acc {
    let mut acc = Acc::new(codes.len());
    let mut x = start ^ (start >> 1);
    let mut sign: Vec<f64> = p.masks.iter().map(|&m| parity_sign(x, Mask { bits: m, flip: false })).collect();
    let mut e = p.e_const - p.j.iter().zip(&sign).map(|(j, s)| j * s).sum::<f64>();
    for i in start..start + len {
        if i > start {
            let b = i.trailing_zeros() as usize;
            x ^= 1 << b;
            for &t in &p.by_bit[b] {
                let t = t as usize;
                e += 2.0 * p.j[t] * sign[t];
                sign[t] = -sign[t];
            }
        }
        let w = acc.weight(beta, e);
        for (k, c) in codes.iter().enumerate() {
            let v = match c {
                ProbeCode::Energy => e,
                ProbeCode::Parity(ms) => ms.iter().map(|&m| parity_sign(x, m)).sum(),
            };
            acc.sums[k + 1].add(w * v);
        }
    }
    acc
}

fn run_mixed(p: &MixedPlan, beta: f64, start: u64, len: u64) -> Acc {
    let mut acc = Acc::new(p.probes.len());
    let n = p.levels.len();
    let mut vals = vec![0u32; p.num_slots];
    let mut r = start;
    for (k, &q) in p.levels.iter().enumerate() {
        vals[k] = (r % q as u64) as u32;
        r /= q as u64;
    }
    for step in 0..len {
        if step > 0 {
            for k in 0..n {
                vals[k] += 1;
                if vals[k] < p.levels[k] {
                    break;
                }
                vals[k] = 0;
            }
        }
        for (slot, rhs, src) in &p.derived {
            vals[*slot] = src.iter().fold(*rhs as u32, |a, &s| a ^ (vals[s] & 1));
        }
        let mut e = 0.0;
        for t in &p.terms {
            let idx: usize = t.slots.iter().zip(&t.strides).map(|(&s, &st)| vals[s] as usize * st).sum();
            e += t.table[idx];
        }
        let w = acc.weight(beta, e);
        for (k, sets) in p.probes.iter().enumerate() {
            let v = if p.probe_energy[k] {
                e
            } else {
                sets.iter().map(|s| if s.iter().fold(0, |a, &i| a ^ (vals[i] & 1)) == 1 { -1.0 } else { 1.0 }).sum()
            };
            acc.sums[k + 1].add(w * v);
        }
    }
    acc
}

pub fn partition_function(model: &SpinModel, beta: f64) -> Result<PartitionResult> {
    partition_function_with(model, beta, &EngineOptions::default())
}

pub fn partition_function_with(model: &SpinModel, beta: f64, opts: &EngineOptions) -> Result<PartitionResult> {
    Ok(Prepared::new(model, &[], opts)?.evaluate(beta)?.result)
}

/// Plain sum over every configuration. Reference for tests on tiny models.
pub fn brute_force_log_z(model: &SpinModel, beta: f64) -> Result<f64> {
    let total: u64 = model.levels.iter().map(|&q| q as u64).product();
    if total > 1 << 24 {
        return Err(Error::TooLarge { free: model.num_spins, cap: 24 });
    }
    let mut hard = Vec::new();
    let mut soft = model.clone();
    soft.terms.clear();
    for t in &model.terms {
        if t.is_infinite() {
            hard.push(constraint_vars(model, t)?);
        } else {
            soft.terms.push(t.clone());
        }
    }
    let mut cfg = vec![0u32; model.num_spins];
    let mut z = 0.0;
    for _ in 0..total {
        if hard.iter().all(|h| h.iter().fold(0, |a, &i| a ^ cfg[i]) == 0) {
            z += (-beta * crate::model::evaluate_energy(&soft, &cfg)?).exp();
        }
        for (d, q) in cfg.iter_mut().zip(&model.levels) {
            *d += 1;
            if *d < *q {
                break;
            }
            *d = 0;
        }
    }
    Ok(model.log2_prefactor as f64 * std::f64::consts::LN_2 + z.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Boundary, LatticeGeometry};
    use crate::lgt::build_zq_lgt;
    use crate::model::Term;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn single_field() {
        let mut m = SpinModel::binary(1);
        m.push(Term::parity(vec![0], 0.8));
        let r = partition_function(&m, 0.5).unwrap();
        assert!(close(r.log_z, (2.0 * (0.4f64).cosh()).ln(), 1e-14));
    }

    #[test]
    fn plaquette() {
        let g = LatticeGeometry::new([1, 1, 0, 0], Boundary::Open).unwrap();
        let m = build_zq_lgt(&g, 2, &[1.0]).unwrap();
        let want = (8.0 * 0.7f64.exp() + 8.0 * (-0.7f64).exp()).ln();
        assert!(close(partition_function(&m, 0.7).unwrap().log_z, want, 1e-14));
        assert_eq!(partition_function(&m, 0.7).unwrap().num_enumerated, 4);
    }

    #[test]
    fn periodic_ising_2x2() {
        let mut m = SpinModel::binary(4);
        for (a, b) in [(0, 1), (1, 0), (2, 3), (3, 2), (0, 2), (2, 0), (1, 3), (3, 1)] {
            if a < b {
                m.push(Term::parity(vec![a, b], 1.0));
            }
            m.push(Term::parity(vec![a, b], 0.0));
        }
        let bf = brute_force_log_z(&m, 0.5).unwrap();
        assert!(close(partition_function(&m, 0.5).unwrap().log_z, bf, 1e-13));
    }

    #[test]
    fn constraints_count_solutions() {
        let mut m = SpinModel::binary(5);
        m.push(Term::constraint(vec![0, 1, 2]));
        m.push(Term::constraint(vec![2, 3]));
        m.push(Term::parity(vec![4], 0.0));
        m.log2_prefactor = -1;
        let r = partition_function(&m, 1.0).unwrap();
        assert!(close(r.log_z, (8.0f64 / 2.0).ln(), 1e-14));
    }

    #[test]
    fn redundant_constraints_accepted() {
        // hard terms only ever demand even parity, so any set of them is consistent
        let mut m = SpinModel::binary(2);
        m.push(Term::constraint(vec![0, 1]));
        m.push(Term::constraint(vec![0]));
        m.push(Term {
            support: vec![1],
            interaction: Interaction::Clock { coupling: Coupling::PlusInfinity, coefficients: vec![1] },
        });
        m.push(Term::constraint(vec![0, 1]));
        m.push(Term::parity(vec![1], 1.0));
        let r = partition_function(&m, 1.0).unwrap();
        assert!(close(r.log_z, 1.0, 1e-14));
        assert_eq!(r.num_free_spins, 0);
    }

    #[test]
    fn cap_enforced() {
        let mut m = SpinModel::binary(30);
        for i in 0..30 {
            m.push(Term::parity(vec![i], 0.1));
        }
        match partition_function(&m, 1.0) {
            Err(Error::TooLarge { free, cap }) => assert_eq!((free, cap), (30, 26)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mixed_matches_brute_force() {
        let mut m = SpinModel::new(vec![3, 3, 2, 2]);
        m.push(Term::clock(vec![0, 1], 0.7));
        m.push(Term::table(vec![1, 2], vec![0.1, -0.4, 0.3, 0.9, -0.2, 0.5]));
        m.push(Term::constraint(vec![2, 3]));
        m.push(Term::parity(vec![3], -0.6));
        m.energy_offset = 0.25;
        for beta in [0.3, 1.1] {
            let bf = brute_force_log_z(&m, beta).unwrap();
            assert!(close(partition_function(&m, beta).unwrap().log_z, bf, 1e-13));
        }
    }

    #[test]
    fn binary_table_matches_brute_force() {
        let mut m = SpinModel::binary(4);
        m.push(Term::table(vec![0, 2, 3], vec![0.1, -0.4, 0.3, 0.9, -0.2, 0.5, 1.5, 0.0]));
        m.push(Term::clock(vec![1, 2], 0.3));
        m.push(Term::constraint(vec![1, 3]));
        let bf = brute_force_log_z(&m, 0.9).unwrap();
        assert!(close(partition_function(&m, 0.9).unwrap().log_z, bf, 1e-13));
    }

    #[test]
    fn zero_terms_bit_identical() {
        let mut m = SpinModel::binary(6);
        for i in 0..5 {
            m.push(Term::parity(vec![i, i + 1], 0.3 + i as f64 * 0.1));
        }
        let a = partition_function(&m, 0.8).unwrap().log_z;
        m.push(Term::parity(vec![0, 3, 5], 0.0));
        let b = partition_function(&m, 0.8).unwrap().log_z;
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn chunking_consistent_across_sizes() {
        // 20 active bits spans many chunks
        let mut m = SpinModel::binary(20);
        for i in 0..20 {
            m.push(Term::parity(vec![i, (i + 1) % 20], 1.0));
            m.push(Term::parity(vec![i], 0.05 * i as f64));
        }
        let r = partition_function(&m, 0.4).unwrap();
        // 1D ring with fields: transfer-matrix oracle
        let beta = 0.4f64;
        let mut t = [[1.0, 0.0], [0.0, 1.0]];
        for i in 0..20 {
            let h = 0.05 * i as f64;
            let mut step = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    let sa = if a == 0 { 1.0 } else { -1.0 };
                    let sb = if b == 0 { 1.0 } else { -1.0 };
                    step[a][b] = (beta * (sa * sb + h * sa)).exp();
                }
            }
            let mut n = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    n[a][b] = t[a][0] * step[0][b] + t[a][1] * step[1][b];
                }
            }
            t = n;
        }
        assert!(close(r.log_z, (t[0][0] + t[1][1]).ln(), 1e-12));
    }

    #[test]
    fn probes_average() {
        let mut m = SpinModel::binary(2);
        m.push(Term::parity(vec![0, 1], 0.9));
        m.push(Term::constraint(vec![1]));
        let p = Prepared::new(&m, &[Probe::Energy, Probe::Parity(vec![0])], &EngineOptions::default()).unwrap();
        let ev = p.evaluate(0.5).unwrap();
        let t = (0.45f64).tanh();
        assert!(close(ev.averages[0], -0.9 * t, 1e-14));
        assert!(close(ev.averages[1], t, 1e-14));
    }
}
