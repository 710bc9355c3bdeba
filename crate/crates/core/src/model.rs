//! Spin model intermediate representation.
//!
//! Spins take values in `0..q`. Every term carries its own support; the
//! energy of a configuration is the sum of term energies plus `energy_offset`,
//! and the partition function is additionally scaled by `2^log2_prefactor`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    Finite(f64),
    /// Hard constraint: the term's parity must be even.
    PlusInfinity,
}

impl Coupling {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Coupling::PlusInfinity)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coupling::Finite(j) if *j == 0.0)
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Coupling::Finite(j) => Some(*j),
            Coupling::PlusInfinity => None,
        }
    }
}

impl Serialize for Coupling {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Coupling::Finite(j) => s.serialize_f64(*j),
            Coupling::PlusInfinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Coupling {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(j) => Ok(Coupling::Finite(j)),
            Raw::Str(s) if s == "inf" || s == "+inf" => Ok(Coupling::PlusInfinity),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad coupling {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    ParityIsing,
    ClockCosine,
    GeneralTable,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Interaction {
    /// `-J * (-1)^(sum s)`
    Parity { coupling: Coupling },
    /// `-J * cos(2 pi / q * sum c_k s_k)`; coefficients default to +1.
    Clock { coupling: Coupling, coefficients: Vec<i64> },
    /// Explicit energy per local configuration, first support spin least significant.
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub support: Vec<usize>,
    pub interaction: Interaction,
}

impl Term {
    pub fn parity(support: Vec<usize>, j: f64) -> Term {
        Term { support, interaction: Interaction::Parity { coupling: Coupling::Finite(j) } }
    }

    pub fn constraint(support: Vec<usize>) -> Term {
        Term { support, interaction: Interaction::Parity { coupling: Coupling::PlusInfinity } }
    }

    pub fn clock(support: Vec<usize>, j: f64) -> Term {
        let coefficients = vec![1; support.len()];
        Term { support, interaction: Interaction::Clock { coupling: Coupling::Finite(j), coefficients } }
    }

    pub fn clock_oriented(support: Vec<usize>, coefficients: Vec<i64>, j: f64) -> Term {
        Term { support, interaction: Interaction::Clock { coupling: Coupling::Finite(j), coefficients } }
    }

    pub fn table(support: Vec<usize>, values: Vec<f64>) -> Term {
        Term { support, interaction: Interaction::Table { values } }
    }

    pub fn kind(&self) -> TermKind {
        match self.interaction {
            Interaction::Parity { .. } => TermKind::ParityIsing,
            Interaction::Clock { .. } => TermKind::ClockCosine,
            Interaction::Table { .. } => TermKind::GeneralTable,
        }
    }

    pub fn coupling(&self) -> Option<Coupling> {
        match &self.interaction {
            Interaction::Parity { coupling } | Interaction::Clock { coupling, .. } => Some(*coupling),
            Interaction::Table { .. } => None,
        }
    }

    pub fn set_coupling(&mut self, c: Coupling) -> Result<()> {
        match &mut self.interaction {
            Interaction::Parity { coupling } | Interaction::Clock { coupling, .. } => {
                *coupling = c;
                Ok(())
            }
            Interaction::Table { .. } => Err(Error::InvalidArgument("table terms carry no coupling".into())),
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.coupling().is_some_and(|c| c.is_infinite())
    }

    /// True when the term contributes nothing to any energy.
    pub fn is_zero(&self) -> bool {
        match &self.interaction {
            Interaction::Parity { coupling } | Interaction::Clock { coupling, .. } => coupling.is_zero(),
            Interaction::Table { values } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// Energy for the local spin values (same order as `support`).
    pub fn local_energy(&self, values: &[u32], levels: &[u32]) -> Result<f64> {
        match &self.interaction {
            Interaction::Parity { coupling } => {
                let j = coupling.finite().ok_or(Error::InfiniteCoupling)?;
                let odd = values.iter().fold(0u32, |a, v| a ^ (v & 1));
                Ok(if odd == 0 { -j } else { j })
            }
            Interaction::Clock { coupling, coefficients } => {
                let j = coupling.finite().ok_or(Error::InfiniteCoupling)?;
                let q = levels.first().copied().unwrap_or(2) as i64;
                let m = clock_phase(values, coefficients, q);
                Ok(-j * clock_cos(m, q))
            }
            Interaction::Table { values: table } => {
                let mut idx = 0usize;
                let mut stride = 1usize;
                for (v, q) in values.iter().zip(levels) {
                    idx += *v as usize * stride;
                    stride *= *q as usize;
                }
                Ok(table[idx])
            }
        }
    }

    /// The term written as an explicit table over its support.
    pub fn to_table(&self, levels: &[u32]) -> Result<Vec<f64>> {
        let size: usize = levels.iter().map(|q| *q as usize).product();
        let mut out = Vec::with_capacity(size);
        let mut digits = vec![0u32; levels.len()];
        for _ in 0..size {
            out.push(self.local_energy(&digits, levels)?);
            for (d, q) in digits.iter_mut().zip(levels) {
                *d += 1;
                if *d < *q {
                    break;
                }
                *d = 0;
            }
        }
        Ok(out)
    }
}

pub(crate) fn clock_phase(values: &[u32], coefficients: &[i64], q: i64) -> i64 {
    let s: i64 = values.iter().zip(coefficients).map(|(v, c)| *v as i64 * c).sum();
    s.rem_euclid(q)
}

/// `cos(2 pi m / q)` with the exactly representable cases pinned.
pub(crate) fn clock_cos(m: i64, q: i64) -> f64 {
    let m = m.rem_euclid(q);
    if m == 0 {
        1.0
    } else if 2 * m == q {
        -1.0
    } else if 4 * m == q || 4 * m == 3 * q {
        0.0
    } else {
        (2.0 * PI * m as f64 / q as f64).cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinModel {
    pub num_spins: usize,
    pub levels: Vec<u32>,
    pub terms: Vec<Term>,
    pub energy_offset: f64,
    pub log2_prefactor: i64,
}

impl SpinModel {
    pub fn new(levels: Vec<u32>) -> SpinModel {
        SpinModel { num_spins: levels.len(), levels, terms: Vec::new(), energy_offset: 0.0, log2_prefactor: 0 }
    }

    pub fn binary(n: usize) -> SpinModel {
        SpinModel::new(vec![2; n])
    }

    pub fn push(&mut self, t: Term) -> &mut Self {
        self.terms.push(t);
        self
    }

    pub fn is_binary(&self) -> bool {
        self.levels.iter().all(|q| *q == 2)
    }

    pub fn has_infinite(&self) -> bool {
        self.terms.iter().any(|t| t.is_infinite())
    }

    pub fn support_levels(&self, t: &Term) -> Vec<u32> {
        t.support.iter().map(|&i| self.levels[i]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.len() != self.num_spins {
            return Err(Error::InvalidModel(format!("levels has {} entries for {} spins", self.levels.len(), self.num_spins)));
        }
        if let Some(q) = self.levels.iter().find(|q| **q < 2) {
            return Err(Error::InvalidModel(format!("spin with {q} levels")));
        }
        if !self.energy_offset.is_finite() {
            return Err(Error::InvalidModel("non-finite offset".into()));
        }
        for (k, t) in self.terms.iter().enumerate() {
            let mut seen = t.support.clone();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidModel(format!("term {k} repeats a spin")));
            }
            if let Some(&i) = seen.iter().find(|&&i| i >= self.num_spins) {
                return Err(Error::InvalidModel(format!("term {k} references spin {i}")));
            }
            if let Some(Coupling::Finite(j)) = t.coupling() {
                if !j.is_finite() {
                    return Err(Error::InvalidModel(format!("term {k} has coupling {j}")));
                }
            }
            let lv = self.support_levels(t);
            match &t.interaction {
                Interaction::Parity { .. } => {
                    if lv.iter().any(|q| *q != 2) {
                        return Err(Error::InvalidModel(format!("parity term {k} on non-binary spin")));
                    }
                }
                Interaction::Clock { coupling, coefficients } => {
                    if coefficients.len() != t.support.len() {
                        return Err(Error::InvalidModel(format!("clock term {k} coefficient count")));
                    }
                    if lv.windows(2).any(|w| w[0] != w[1]) {
                        return Err(Error::InvalidModel(format!("clock term {k} mixes levels")));
                    }
                    if coupling.is_infinite() && lv.first().is_some_and(|q| *q != 2) {
                        return Err(Error::Unsupported(format!("infinite clock coupling on q > 2 (term {k})")));
                    }
                }
                Interaction::Table { values } => {
                    let want: usize = lv.iter().map(|q| *q as usize).product();
                    if values.len() != want {
                        return Err(Error::InvalidModel(format!("table term {k} has {} entries, expected {want}", values.len())));
                    }
                    if values.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidModel(format!("table term {k} non-finite")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Spins that appear in at least one term with a nonzero effect.
    pub fn used_spins(&self) -> Vec<bool> {
        let mut used = vec![false; self.num_spins];
        for t in self.terms.iter().filter(|t| !t.is_zero()) {
            for &i in &t.support {
                used[i] = true;
            }
        }
        used
    }

    /// Number of terms each spin participates in (nonzero terms only).
    pub fn fanout(&self) -> Vec<usize> {
        let mut f = vec![0; self.num_spins];
        for t in self.terms.iter().filter(|t| !t.is_zero()) {
            for &i in &t.support {
                f[i] += 1;
            }
        }
        f
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ModelJson::from(self)).expect("model serializes")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ModelJson::from(self)).expect("model serializes")
    }

    pub fn from_json_str(s: &str) -> Result<SpinModel> {
        let raw: ModelJson = serde_json::from_str(s)?;
        let m = raw.into_model()?;
        m.validate()?;
        Ok(m)
    }

    pub fn from_json_value(v: serde_json::Value) -> Result<SpinModel> {
        let raw: ModelJson = serde_json::from_value(v)?;
        let m = raw.into_model()?;
        m.validate()?;
        Ok(m)
    }
}

/// Energy of a configuration including the offset.
pub fn evaluate_energy(model: &SpinModel, config: &[u32]) -> Result<f64> {
    if config.len() != model.num_spins {
        return Err(Error::InvalidArgument(format!("configuration has {} values for {} spins", config.len(), model.num_spins)));
    }
    for (i, (&v, &q)) in config.iter().zip(&model.levels).enumerate() {
        if v >= q {
            return Err(Error::InvalidArgument(format!("spin {i} value {v} outside 0..{q}")));
        }
    }
    if model.has_infinite() {
        return Err(Error::InfiniteCoupling);
    }
    let mut e = model.energy_offset;
    let mut vals = Vec::new();
    let mut lv = Vec::new();
    for t in &model.terms {
        vals.clear();
        lv.clear();
        for &i in &t.support {
            vals.push(config[i]);
            lv.push(model.levels[i]);
        }
        e += t.local_energy(&vals, &lv)?;
    }
    Ok(e)
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    support: Vec<usize>,
    kind: TermKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    coupling: Option<Coupling>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    coefficients: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    table: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    num_spins: usize,
    levels: Vec<u32>,
    terms: Vec<TermJson>,
    #[serde(default)]
    offset: f64,
    #[serde(default)]
    log2_prefactor: i64,
}

impl From<&SpinModel> for ModelJson {
    fn from(m: &SpinModel) -> Self {
        let terms = m
            .terms
            .iter()
            .map(|t| match &t.interaction {
                Interaction::Parity { coupling } => TermJson {
                    support: t.support.clone(),
                    kind: TermKind::ParityIsing,
                    coupling: Some(*coupling),
                    coefficients: None,
                    table: None,
                },
                Interaction::Clock { coupling, coefficients } => TermJson {
                    support: t.support.clone(),
                    kind: TermKind::ClockCosine,
                    coupling: Some(*coupling),
                    coefficients: if coefficients.iter().all(|c| *c == 1) { None } else { Some(coefficients.clone()) },
                    table: None,
                },
                Interaction::Table { values } => TermJson {
                    support: t.support.clone(),
                    kind: TermKind::GeneralTable,
                    coupling: None,
                    coefficients: None,
                    table: Some(values.clone()),
                },
            })
            .collect();
        ModelJson {
            num_spins: m.num_spins,
            levels: m.levels.clone(),
            terms,
            offset: m.energy_offset,
            log2_prefactor: m.log2_prefactor,
        }
    }
}

impl ModelJson {
    fn into_model(self) -> Result<SpinModel> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (k, t) in self.terms.into_iter().enumerate() {
            let need = |c: Option<Coupling>| c.ok_or_else(|| Error::InvalidModel(format!("term {k} missing coupling")));
            let interaction = match t.kind {
                TermKind::ParityIsing => Interaction::Parity { coupling: need(t.coupling)? },
                TermKind::ClockCosine => Interaction::Clock {
                    coupling: need(t.coupling)?,
                    coefficients: t.coefficients.unwrap_or_else(|| vec![1; t.support.len()]),
                },
                TermKind::GeneralTable => {
                    Interaction::Table { values: t.table.ok_or_else(|| Error::InvalidModel(format!("term {k} missing table")))? }
                }
            };
            terms.push(Term { support: t.support, interaction });
        }
        Ok(SpinModel {
            num_spins: self.num_spins,
            levels: self.levels,
            terms,
            energy_offset: self.offset,
            log2_prefactor: self.log2_prefactor,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_parity_field() {
        let mut m = SpinModel::binary(1);
        m.push(Term::parity(vec![0], 1.0));
        assert_eq!(evaluate_energy(&m, &[0]).unwrap(), -1.0);
        assert_eq!(evaluate_energy(&m, &[1]).unwrap(), 1.0);
    }

    #[test]
    fn clock_wraps_mod_q() {
        let mut m = SpinModel::new(vec![3, 3]);
        m.push(Term::clock(vec![0, 1], 1.0));
        assert_eq!(evaluate_energy(&m, &[1, 2]).unwrap(), -1.0);
    }

    #[test]
    fn evaluate_rejects_bad_input() {
        let mut m = SpinModel::binary(2);
        m.push(Term::parity(vec![0, 1], 1.0));
        assert!(evaluate_energy(&m, &[0]).is_err());
        assert!(evaluate_energy(&m, &[0, 2]).is_err());
        m.push(Term::constraint(vec![0]));
        assert!(matches!(evaluate_energy(&m, &[0, 0]), Err(Error::InfiniteCoupling)));
    }

    #[test]
    fn closed_forms_match_tables() {
        for q in 2..6u32 {
            let t = Term::clock_oriented(vec![0, 1, 2], vec![1, -1, 2], 0.7);
            let lv = vec![q; 3];
            let table = t.to_table(&lv).unwrap();
            let tt = Term::table(vec![0, 1, 2], table);
            let mut d = [0u32; 3];
            for a in 0..q {
                for b in 0..q {
                    for c in 0..q {
                        d.copy_from_slice(&[a, b, c]);
                        assert_eq!(t.local_energy(&d, &lv).unwrap(), tt.local_energy(&d, &lv).unwrap());
                    }
                }
            }
        }
        let p = Term::parity(vec![0, 1], -0.3);
        let c = Term::clock(vec![0, 1], -0.3);
        for v in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            assert_eq!(p.local_energy(&v, &[2, 2]).unwrap(), c.local_energy(&v, &[2, 2]).unwrap());
        }
    }

    #[test]
    fn json_round_trip() {
        let mut m = SpinModel::new(vec![2, 2, 3]);
        m.push(Term::parity(vec![0, 1], 0.5));
        m.push(Term::constraint(vec![1]));
        m.push(Term::clock_oriented(vec![2], vec![-1], 1.5));
        m.push(Term::table(vec![0, 2], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]));
        m.energy_offset = 0.25;
        m.log2_prefactor = -3;
        let s = m.to_json_string();
        assert!(s.contains("\"inf\""));
        let back = SpinModel::from_json_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn validation_catches_schema_errors() {
        let bad = r#"{"num_spins":1,"levels":[1],"terms":[]}"#;
        assert!(SpinModel::from_json_str(bad).is_err());
        let bad = r#"{"num_spins":2,"levels":[2,3],"terms":[{"support":[0,1],"kind":"parity_ising","coupling":1.0}]}"#;
        assert!(SpinModel::from_json_str(bad).is_err());
        let bad = r#"{"num_spins":2,"levels":[2,2],"terms":[{"support":[0,0],"kind":"parity_ising","coupling":1.0}]}"#;
        assert!(SpinModel::from_json_str(bad).is_err());
        let bad = r#"{"num_spins":2,"levels":[2,2],"terms":[{"support":[0,1],"kind":"general_table","table":[1,2,3]}]}"#;
        assert!(SpinModel::from_json_str(bad).is_err());
    }
}
