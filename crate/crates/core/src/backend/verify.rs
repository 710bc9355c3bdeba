//! Exact check of a compiled instance against its target.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use serde::Serialize;

use super::CompiledInstance;
use crate::engine::{parity_form, EngineOptions, Prepared};
use crate::error::{Error, Result};
use crate::extract::extract_with_keep;
use crate::model::SpinModel;

pub const DEFAULT_BETAS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 1.0];
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct BetaRow {
    pub beta: f64,
    pub log_z_instance: f64,
    pub log_z_target: f64,
    pub log_ratio: f64,
    pub predicted: f64,
    /// `|log_ratio - predicted|`, relative to `max(1, |log_z_instance|)`.
    pub residual: f64,
    /// Gap between the binary encoding and a q-level target, with its bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub rows: Vec<BetaRow>,
    pub pow2_fit: f64,
    pub pow2: i64,
    pub offset: f64,
    pub declared_pow2: i64,
    pub declared_offset: f64,
    pub max_residual: f64,
    pub tol: f64,
    pub terms_match: bool,
    /// Supports whose couplings differ, as `(support, instance J, target J)`.
    pub mismatches: Vec<(Vec<usize>, f64, f64)>,
    pub notes: Vec<String>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn table(&self) -> String {
        let mut s = String::from("beta  ln Z_instance  ln Z_target  log ratio  predicted  residual\n");
        for r in &self.rows {
            s += &format!(
                "{:.4}  {:.12}  {:.12}  {:.12}  {:.12}  {:.3e}\n",
                r.beta, r.log_z_instance, r.log_z_target, r.log_ratio, r.predicted, r.residual
            );
        }
        for (sup, a, b) in &self.mismatches {
            s += &format!("term {sup:?}: instance {a} target {b}\n");
        }
        for n in &self.notes {
            s += n;
            s.push('\n');
        }
        s
    }

    pub fn into_result(self) -> Result<VerifyReport> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::Verification(self.table()))
        }
    }
}

/// Parity couplings keyed by sorted support; constants and exact zeros dropped.
fn canonical(model: &SpinModel) -> Result<(BTreeMap<Vec<usize>, f64>, usize)> {
    let mut out: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut hard = 0;
    for t in &model.terms {
        if t.is_infinite() {
            hard += 1;
            continue;
        }
        if t.is_zero() {
            continue;
        }
        let (parts, _) = parity_form(model, t).ok_or_else(|| Error::Unsupported("term without a parity form".into()))?;
        for (mut s, j) in parts {
            s.sort_unstable();
            *out.entry(s).or_insert(0.0) += j;
        }
    }
    out.retain(|_, j| *j != 0.0);
    Ok((out, hard))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Fits `Z(instance) = 2^a e^(-beta c) Z(target)` on the first two betas,
/// checks the rest, compares the effective model with the target term by
/// term and the fit with the declared accounting.
///
/// A target with q-level spins is compared through the instance's binary
/// encoding; the encoding gap is reported per beta against its bound.
pub fn verify_instance(
    target: &SpinModel,
    instance: &CompiledInstance,
    betas: &[f64],
    tol: f64,
    opts: &EngineOptions,
) -> Result<VerifyReport> {
    if betas.len() < 2 {
        return Err(Error::InvalidArgument("need at least two betas".into()));
    }
    let binary = if target.is_binary() {
        target
    } else if instance.encoding.is_some() {
        &instance.target
    } else {
        return Err(Error::InvalidArgument("q-level target but the instance carries no encoding".into()));
    };
    let model = instance.model()?;
    let pi = Prepared::new(&model, &[], opts)?;
    let pt = Prepared::new(binary, &[], opts)?;
    let pq = if target.is_binary() { None } else { Some(Prepared::new(target, &[], opts)?) };

    let mut rows = Vec::with_capacity(betas.len());
    for &beta in betas {
        let li = pi.log_z(beta)?;
        let lt = pt.log_z(beta)?;
        let penalty = match (&pq, &instance.encoding) {
            (Some(p), Some(enc)) => Some((lt - p.log_z(beta)?, enc.penalty_bound(beta))),
            _ => None,
        };
        rows.push(BetaRow {
            beta,
            log_z_instance: li,
            log_z_target: lt,
            log_ratio: li - lt,
            predicted: 0.0,
            residual: 0.0,
            penalty,
        });
    }
    let (r0, r1) = (&rows[0], &rows[1]);
    let c = -(r1.log_ratio - r0.log_ratio) / (r1.beta - r0.beta);
    let a = (r0.log_ratio + r0.beta * c) / LN_2;
    let a_int = a.round();
    let mut notes = Vec::new();
    if (a - a_int).abs() > 1e-6 {
        notes.push(format!("fitted power of two {a} is not an integer"));
    }
    let mut max_residual = 0f64;
    for r in &mut rows {
        r.predicted = a_int * LN_2 - r.beta * c;
        r.residual = (r.log_ratio - r.predicted).abs() / r.log_z_instance.abs().max(1.0);
        max_residual = max_residual.max(r.residual);
        if let Some((gap, bound)) = r.penalty {
            // ln(1 + w) <= w
            if gap < -1e-12 || gap > bound + 1e-12 {
                notes.push(format!("beta {}: encoding gap {gap:e} outside [0, {bound:e}]", r.beta));
            }
        }
    }

    let eff = extract_with_keep(&model, &instance.logical_map)?;
    let mut mismatches = Vec::new();
    if eff.model.num_spins != instance.logical_map.len() {
        notes.push(format!("{} spins besides the logical ones survive", eff.model.num_spins - instance.logical_map.len()));
    }
    let (got, hard) = canonical(&eff.model)?;
    if hard > 0 {
        notes.push(format!("{hard} constraints left among logical spins"));
    }
    let (want, _) = canonical(binary)?;
    for (s, &j) in &got {
        match want.get(s) {
            Some(&w) if close(j, w) => {}
            other => mismatches.push((s.clone(), j, other.copied().unwrap_or(0.0))),
        }
    }
    for (s, &w) in &want {
        if !got.contains_key(s) {
            mismatches.push((s.clone(), 0.0, w));
        }
    }
    let terms_match = mismatches.is_empty() && hard == 0 && eff.model.num_spins == instance.logical_map.len();

    let declared = instance.accounting;
    if declared.pow2 as f64 != a_int || (declared.offset - c).abs() > 1e-7 * c.abs().max(1.0) {
        notes.push(format!("declared accounting ({}, {}) differs from the fit ({a_int}, {c})", declared.pow2, declared.offset));
    }
    let passed = max_residual < tol && terms_match && notes.is_empty();
    Ok(VerifyReport {
        rows,
        pow2_fit: a,
        pow2: a_int as i64,
        offset: c,
        declared_pow2: declared.pow2,
        declared_offset: declared.offset,
        max_residual,
        tol,
        terms_match,
        mismatches,
        notes,
        passed,
    })
}
