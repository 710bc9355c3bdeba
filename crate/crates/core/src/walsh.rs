//! Walsh–Hadamard transforms between energy tables and subset couplings.
//!
//! Index convention everywhere: bit `j` of an index is spin `j`, both for
//! configurations and for subsets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SpinModel, Term};

pub const INDEX_CONVENTION: &str = "subset-mask-bit-j";

/// In-place unnormalised transform; the length must be a power of two.
pub fn fwht(a: &mut [f64]) {
    let n = a.len();
    assert!(n.is_power_of_two(), "length {n} is not a power of two");
    let mut h = 1;
    while h < n {
        for block in a.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*x, *y);
                *x = u + v;
                *y = u - v;
            }
        }
        h *= 2;
    }
}

#[inline]
pub fn character(s: usize, subset: usize) -> i32 {
    if (s & subset).count_ones() & 1 == 0 {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyVector {
    pub n: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingVector {
    pub n: usize,
    /// `values[0]` is the constant term.
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct VectorJson {
    n: usize,
    index_convention: String,
    values: Vec<f64>,
}

fn check_len(n: usize, len: usize) -> Result<()> {
    if n >= usize::BITS as usize - 1 || len != 1usize << n {
        return Err(Error::InvalidArgument(format!("vector of length {len} for n = {n}")));
    }
    Ok(())
}

macro_rules! vector_impl {
    ($t:ident) => {
        impl $t {
            pub fn new(n: usize, values: Vec<f64>) -> Result<$t> {
                check_len(n, values.len())?;
                Ok($t { n, values })
            }

            pub fn to_json(&self) -> serde_json::Value {
                serde_json::to_value(VectorJson {
                    n: self.n,
                    index_convention: INDEX_CONVENTION.into(),
                    values: self.values.clone(),
                })
                .expect("vector serialises")
            }

            pub fn from_json_str(s: &str) -> Result<$t> {
                let v: VectorJson = serde_json::from_str(s)?;
                if v.index_convention != INDEX_CONVENTION {
                    return Err(Error::InvalidArgument(format!("unknown index convention {:?}", v.index_convention)));
                }
                $t::new(v.n, v.values)
            }
        }
    };
}

vector_impl!(EnergyVector);
vector_impl!(CouplingVector);

/// `lambda_s = sum_S J_S (-1)^|s & S|`
pub fn couplings_to_energies(j: &CouplingVector) -> EnergyVector {
    let mut v = j.values.clone();
    fwht(&mut v);
    EnergyVector { n: j.n, values: v }
}

/// `J = C^T lambda / 2^n`
pub fn energies_to_couplings(lambda: &EnergyVector) -> CouplingVector {
    let mut v = lambda.values.clone();
    fwht(&mut v);
    let scale = 1.0 / v.len() as f64;
    for x in &mut v {
        *x *= scale;
    }
    CouplingVector { n: lambda.n, values: v }
}

pub fn couplings_to_energies_naive(j: &CouplingVector) -> EnergyVector {
    let len = j.values.len();
    let values = (0..len).map(|s| (0..len).map(|m| character(s, m) as f64 * j.values[m]).sum()).collect();
    EnergyVector { n: j.n, values }
}

pub fn energies_to_couplings_naive(lambda: &EnergyVector) -> CouplingVector {
    let len = lambda.values.len();
    let values =
        (0..len).map(|m| (0..len).map(|s| character(s, m) as f64 * lambda.values[s]).sum::<f64>() / len as f64).collect();
    CouplingVector { n: lambda.n, values }
}

/// Columns where rows `s` and `t` agree and where they differ.
pub fn pairing_sets(n: usize, s: usize, t: usize) -> (usize, usize) {
    let agree = (0..1usize << n).filter(|&c| character(s, c) == character(t, c)).count();
    (agree, (1 << n) - agree)
}

/// Checks `C C^T = 2^n I` entry by entry and the equal split of agreeing and
/// disagreeing columns on a sample of row pairs.
pub fn verify_orthogonality(n: usize) -> Result<bool> {
    if n > 12 {
        return Err(Error::InvalidArgument(format!("n = {n} above 12")));
    }
    let len = 1usize << n;
    let words = len.div_ceil(64);
    // row s as a bitset of its negative entries
    let rows: Vec<Vec<u64>> = (0..len)
        .map(|s| {
            let mut r = vec![0u64; words];
            for c in 0..len {
                if character(s, c) < 0 {
                    r[c / 64] |= 1 << (c % 64);
                }
            }
            r
        })
        .collect();
    for a in 0..len {
        for b in a..len {
            let differ: u32 = rows[a].iter().zip(&rows[b]).map(|(x, y)| (x ^ y).count_ones()).sum();
            let dot = len as i64 - 2 * differ as i64;
            let want = if a == b { len as i64 } else { 0 };
            if dot != want {
                return Ok(false);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    for _ in 0..64.min(len * len) {
        let s = rng.gen_range(0..len);
        let t = rng.gen_range(0..len);
        if s == t {
            continue;
        }
        let (agree, differ) = pairing_sets(n, s, t);
        if agree != differ {
            return Ok(false);
        }
    }
    Ok(true)
}

/// One parity term per nonempty subset; the constant goes into the offset.
///
/// A parity term has energy `-J (-1)^parity`, so subset `S` gets coupling
/// `-J_S` and the model's energies are exactly `couplings_to_energies(j)`.
pub fn superclique_model(n: usize, j: &CouplingVector) -> Result<SpinModel> {
    check_len(n, j.values.len())?;
    let mut m = SpinModel::binary(n);
    m.energy_offset = j.values[0];
    for mask in 1..1usize << n {
        let support = (0..n).filter(|b| mask >> b & 1 == 1).collect();
        m.push(Term::parity(support, -j.values[mask]));
    }
    Ok(m)
}

/// Energy table of a binary model over all of its spins (no hard terms).
pub fn energy_table(model: &SpinModel) -> Result<EnergyVector> {
    if !model.is_binary() {
        return Err(Error::Unsupported("energy table needs binary spins".into()));
    }
    let n = model.num_spins;
    if n > 24 {
        return Err(Error::TooLarge { free: n, cap: 24 });
    }
    let mut cfg = vec![0u32; n];
    let values = (0..1usize << n)
        .map(|s| {
            for (b, c) in cfg.iter_mut().enumerate() {
                *c = (s >> b & 1) as u32;
            }
            crate::model::evaluate_energy(model, &cfg)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(EnergyVector { n, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest};

    #[test]
    fn small_examples() {
        let e = couplings_to_energies(&CouplingVector::new(1, vec![0.0, 1.0]).unwrap());
        assert_eq!(e.values, vec![1.0, -1.0]);
        let e = couplings_to_energies(&CouplingVector::new(2, vec![0.0, 0.0, 0.0, -1.0]).unwrap());
        assert_eq!(e.values, vec![-1.0, 1.0, 1.0, -1.0]);
        let j = energies_to_couplings(&EnergyVector::new(2, vec![2.5; 4]).unwrap());
        assert_eq!(j.values, vec![2.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn orthogonality() {
        for n in 0..=8 {
            assert!(verify_orthogonality(n).unwrap());
        }
        assert_eq!(pairing_sets(3, 0b000, 0b101), (4, 4));
        assert!(verify_orthogonality(13).is_err());
    }

    #[test]
    fn superclique_counts() {
        let m = superclique_model(5, &CouplingVector::new(5, vec![1.0; 32]).unwrap()).unwrap();
        assert_eq!(m.terms.len(), 31);
        assert!(m.fanout().iter().all(|&f| f == 16));
    }

    #[test]
    fn json_carries_convention() {
        let v = CouplingVector::new(1, vec![0.5, -1.0]).unwrap();
        let s = v.to_json().to_string();
        assert!(s.contains("subset-mask-bit-j"));
        assert_eq!(CouplingVector::from_json_str(&s).unwrap(), v);
        assert!(CouplingVector::from_json_str(r#"{"n":1,"index_convention":"lex","values":[0,1]}"#).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(n in 0usize..7, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lam: Vec<f64> = (0..1 << n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let lam = EnergyVector::new(n, lam).unwrap();
            let j = energies_to_couplings(&lam);
            let jn = energies_to_couplings_naive(&lam);
            for (a, b) in j.values.iter().zip(&jn.values) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let back = couplings_to_energies(&j);
            let naive = couplings_to_energies_naive(&j);
            for ((a, b), c) in back.values.iter().zip(&lam.values).zip(&naive.values) {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!((a - c).abs() < 1e-12);
            }
            let table = energy_table(&superclique_model(n, &j).unwrap()).unwrap();
            for (a, b) in table.values.iter().zip(&lam.values) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn shift_moves_only_constant(n in 1usize..6, c in -5.0f64..5.0, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lam: Vec<f64> = (0..1 << n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let shifted: Vec<f64> = lam.iter().map(|x| x + c).collect();
            let a = energies_to_couplings(&EnergyVector::new(n, lam).unwrap());
            let b = energies_to_couplings(&EnergyVector::new(n, shifted).unwrap());
            prop_assert!((b.values[0] - a.values[0] - c).abs() < 1e-12);
            for k in 1..a.values.len() {
                prop_assert!((a.values[k] - b.values[k]).abs() < 1e-12);
            }
        }

        #[test]
        fn double_transform_scales(n in 0usize..12, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..1 << n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut y = x.clone();
            fwht(&mut y);
            fwht(&mut y);
            for (a, b) in x.iter().zip(&y) {
                prop_assert!((a * (1 << n) as f64 - b).abs() < 1e-9);
            }
        }
    }
}
