//! Binary encodings of q-level spins and the Z_q discretisation of U(1).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{partition_function_with, EngineOptions};
use crate::error::{Error, Result};
use crate::geometry::LatticeGeometry;
use crate::lgt::build_zq_lgt;
use crate::model::{Interaction, SpinModel, Term};
use crate::walsh::{energies_to_couplings, EnergyVector};

/// Energy per spin placed on unused codewords, in units of `1 / beta_min`.
pub const PENALTY_SCALE: f64 = 60.0;

/// Couplings this small relative to the term scale are rounding noise.
const SNAP: f64 = 1e-12;

pub fn bits_for(q: u32) -> usize {
    (32 - (q - 1).leading_zeros()) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QlevelEncoding {
    pub levels: Vec<u32>,
    /// First binary spin of each original spin.
    pub first_bit: Vec<usize>,
    pub bits: Vec<usize>,
    /// Energy added per spin holding an unused codeword.
    pub penalty: f64,
    pub beta_min: f64,
}

impl QlevelEncoding {
    pub fn num_binary(&self) -> usize {
        self.bits.iter().sum()
    }

    /// Original value of each spin; unused codewords read modulo q.
    pub fn decode(&self, binary: &[u32]) -> Vec<u32> {
        (0..self.levels.len())
            .map(|i| {
                let code = (0..self.bits[i]).fold(0u32, |c, b| c | (binary[self.first_bit[i] + b] & 1) << b);
                code % self.levels[i]
            })
            .collect()
    }

    pub fn encode(&self, values: &[u32]) -> Vec<u32> {
        let mut out = vec![0u32; self.num_binary()];
        for (i, &v) in values.iter().enumerate() {
            for b in 0..self.bits[i] {
                out[self.first_bit[i] + b] = v >> b & 1;
            }
        }
        out
    }

    /// Upper bound on `Z_penalty / Z_valid` at `beta`, hence on the shift of `ln Z`.
    pub fn penalty_bound(&self, beta: f64) -> f64 {
        let log_all: f64 = self.bits.iter().map(|&m| m as f64).sum::<f64>() * std::f64::consts::LN_2;
        let log_valid: f64 = self.levels.iter().map(|&q| (q as f64).ln()).sum();
        if log_all - log_valid < 1e-15 {
            return 0.0;
        }
        // (2^{mN} - q^N) e^{-beta P}
        (log_all + (-(log_valid - log_all).exp()).ln_1p() - beta * self.penalty).exp()
    }
}

/// Each q-level spin becomes `ceil(log2 q)` bits; every term becomes parity
/// terms on those bits. Unused codewords cost `60 / beta_min` per spin.
pub fn encode_qlevel(model: &SpinModel, beta_min: f64) -> Result<(SpinModel, QlevelEncoding)> {
    model.validate()?;
    if !(beta_min > 0.0 && beta_min.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta_min = {beta_min}")));
    }
    let mut first_bit = Vec::with_capacity(model.num_spins);
    let mut bits = Vec::with_capacity(model.num_spins);
    let mut next = 0;
    for &q in &model.levels {
        first_bit.push(next);
        bits.push(bits_for(q));
        next += bits_for(q);
    }
    let enc = QlevelEncoding { levels: model.levels.clone(), first_bit, bits, penalty: PENALTY_SCALE / beta_min, beta_min };
    let mut out = SpinModel::binary(next);
    out.energy_offset = model.energy_offset;
    out.log2_prefactor = model.log2_prefactor;
    let mut acc: BTreeMap<Vec<usize>, f64> = BTreeMap::new();

    let mut add_table = |support_bits: Vec<usize>, table: Vec<f64>, offset: &mut f64| {
        let scale = table.iter().fold(0f64, |m, x| m.max(x.abs()));
        let j = energies_to_couplings(&EnergyVector { n: support_bits.len(), values: table });
        *offset += j.values[0];
        for (mask, v) in j.values.into_iter().enumerate().skip(1) {
            if v.abs() <= SNAP * scale {
                continue;
            }
            let s: Vec<usize> = (0..support_bits.len()).filter(|b| mask >> b & 1 == 1).map(|b| support_bits[b]).collect();
            *acc.entry(s).or_insert(0.0) -= v;
        }
    };

    for t in &model.terms {
        if t.is_infinite() {
            return Err(Error::Unsupported("infinite couplings cannot be encoded".into()));
        }
        if matches!(t.interaction, Interaction::Parity { .. }) && t.support.iter().any(|&i| model.levels[i] != 2) {
            return Err(Error::Unsupported("parity term on a q-level spin".into()));
        }
        let lv = model.support_levels(t);
        let support_bits: Vec<usize> =
            t.support.iter().flat_map(|&i| (0..enc.bits[i]).map(move |b| (i, b))).map(|(i, b)| enc.first_bit[i] + b).collect();
        let widths: Vec<usize> = t.support.iter().map(|&i| enc.bits[i]).collect();
        let mut table = Vec::with_capacity(1 << support_bits.len());
        let mut vals = vec![0u32; t.support.len()];
        for code in 0..1usize << support_bits.len() {
            let mut shift = 0;
            for (k, w) in widths.iter().enumerate() {
                vals[k] = ((code >> shift) & ((1 << w) - 1)) as u32 % lv[k];
                shift += w;
            }
            table.push(t.local_energy(&vals, &lv)?);
        }
        add_table(support_bits, table, &mut out.energy_offset);
    }
    for i in 0..model.num_spins {
        let q = enc.levels[i];
        let m = enc.bits[i];
        if q == 1 << m {
            continue;
        }
        let table = (0..1u32 << m).map(|c| if c >= q { enc.penalty } else { 0.0 }).collect();
        add_table((0..m).map(|b| enc.first_bit[i] + b).collect(), table, &mut out.energy_offset);
    }
    for (s, j) in acc {
        if j != 0.0 {
            out.push(Term::parity(s, j));
        }
    }
    Ok((out, enc))
}

/// Checks the penalty sector against `tol` at `beta`.
pub fn check_penalty(enc: &QlevelEncoding, beta: f64, tol: f64) -> Result<f64> {
    let w = enc.penalty_bound(beta);
    if w > tol {
        return Err(Error::PenaltyTooLarge { weight: w, tol });
    }
    Ok(w)
}

/// Angles `theta_e = 2 pi s_e / q` on every edge: a Z_q clock gauge theory.
pub fn discretize_u1(geom: &LatticeGeometry, couplings: &[f64], q: u32) -> Result<SpinModel> {
    build_zq_lgt(geom, q, couplings)
}

/// `ln Z_q - |E| ln q`, the discretised angular integral, for each `q`, and the
/// gaps between consecutive entries.
pub fn u1_convergence(geom: &LatticeGeometry, couplings: &[f64], beta: f64, qs: &[u32]) -> Result<(Vec<f64>, Vec<f64>)> {
    let opts = EngineOptions { cap: 40 };
    let mut vals = Vec::with_capacity(qs.len());
    for &q in qs {
        let m = discretize_u1(geom, couplings, q)?;
        let lz = partition_function_with(&m, beta, &opts)?.log_z;
        vals.push(lz - geom.num_edges() as f64 * (q as f64).ln());
    }
    let gaps = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    Ok((vals, gaps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{brute_force_log_z, partition_function};
    use crate::geometry::Boundary;
    use crate::model::evaluate_energy;

    #[test]
    fn bit_widths() {
        assert_eq!((bits_for(2), bits_for(3), bits_for(4), bits_for(5), bits_for(8), bits_for(9)), (1, 2, 2, 3, 3, 4));
    }

    #[test]
    fn binary_is_identity() {
        let mut m = SpinModel::binary(2);
        m.push(Term::table(vec![0, 1], vec![0.3, -0.2, 0.9, 0.1]));
        let (e, enc) = encode_qlevel(&m, 0.5).unwrap();
        assert_eq!(enc.num_binary(), 2);
        for c in 0..4u32 {
            let cfg = [c & 1, c >> 1];
            let d = (evaluate_energy(&e, &cfg).unwrap() - evaluate_energy(&m, &cfg).unwrap()).abs();
            assert!(d < 1e-14);
        }
    }

    #[test]
    fn clock_chain_encodes() {
        let mut m = SpinModel::new(vec![3; 3]);
        m.push(Term::clock(vec![0, 1], 1.0));
        m.push(Term::clock(vec![1, 2], 0.6));
        m.push(Term::table(vec![2], vec![0.0, 0.4, -0.3]));
        let (e, enc) = encode_qlevel(&m, 0.2).unwrap();
        assert_eq!(e.num_spins, 6);
        // valid codewords reproduce the original energies
        for v in 0..27u32 {
            let vals = [v % 3, v / 3 % 3, v / 9];
            let d = evaluate_energy(&e, &enc.encode(&vals)).unwrap() - evaluate_energy(&m, &vals).unwrap();
            assert!(d.abs() < 1e-12);
        }
        for beta in [0.2, 0.7] {
            let lz = partition_function(&m, beta).unwrap().log_z;
            let le = partition_function(&e, beta).unwrap().log_z;
            assert!(le >= lz - 1e-12 && le - lz <= enc.penalty_bound(beta) + 1e-12);
        }
        assert!(check_penalty(&enc, 0.2, 1e-20).is_ok());
        assert!(check_penalty(&enc, 0.01, 1e-20).is_err());
    }

    #[test]
    fn u1_sequence_converges_monotonically() {
        let g = LatticeGeometry::new([1, 1, 0, 0], Boundary::Open).unwrap();
        let (v, gaps) = u1_convergence(&g, &[1.0], 0.5, &[2, 4, 8]).unwrap();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        assert!(gaps[1] < gaps[0]);
        // modified Bessel I0(0.5)
        assert!((v[2] - 1.063_483_370_741_323_5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn z4_plaquette_brute_force() {
        let g = LatticeGeometry::new([1, 1, 0, 0], Boundary::Open).unwrap();
        let m = discretize_u1(&g, &[0.8], 4).unwrap();
        let bf = brute_force_log_z(&m, 0.9).unwrap();
        assert!((partition_function(&m, 0.9).unwrap().log_z - bf).abs() < 1e-12);
        let m2 = discretize_u1(&g, &[0.8], 2).unwrap();
        assert!((partition_function(&m2, 0.9).unwrap().log_z - (8.0 * (2.0 * 0.72f64.cosh())).ln()).abs() < 1e-12);
    }
}
