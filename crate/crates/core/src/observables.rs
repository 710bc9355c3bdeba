//! Thermodynamic observables, each computed two independent ways.
//!
//! One path is a direct ensemble average from the enumeration, the other a
//! Richardson-extrapolated central difference of `ln Z`. A disagreement above
//! the tolerance is an error, never a silent pick.

use crate::engine::{EngineOptions, Prepared, Probe};
use crate::error::{Error, Result};
use crate::geometry::LatticeGeometry;
use crate::model::{SpinModel, Term};

#[derive(Debug, Clone, Copy)]
pub struct ObservableOptions {
    /// Relative agreement required between the two paths.
    pub tol: f64,
    /// Field step for derivatives in a source strength.
    pub h: f64,
    /// Temperature step, relative to the value being differentiated at.
    pub rel_step: f64,
    pub engine: EngineOptions,
}

impl Default for ObservableOptions {
    fn default() -> Self {
        ObservableOptions { tol: 1e-7, h: 1e-4, rel_step: 1e-4, engine: EngineOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPath {
    pub ensemble: f64,
    pub derivative: f64,
}

impl TwoPath {
    pub fn value(&self) -> f64 {
        self.ensemble
    }

    fn check(self, what: &str, tol: f64) -> Result<TwoPath> {
        let scale = 1f64.max(self.ensemble.abs());
        if (self.ensemble - self.derivative).abs() > tol * scale || !self.ensemble.is_finite() {
            return Err(Error::Disagreement(format!(
                "{what}: ensemble {:.15e} vs derivative {:.15e}",
                self.ensemble, self.derivative
            )));
        }
        Ok(self)
    }
}

/// `f'(x)` from central differences at steps `d` and `d/2`, extrapolated.
pub fn richardson<F: FnMut(f64) -> Result<f64>>(mut f: F, x: f64, d: f64) -> Result<f64> {
    let c1 = (f(x + d)? - f(x - d)?) / (2.0 * d);
    let c2 = (f(x + d / 2.0)? - f(x - d / 2.0)?) / d;
    Ok((4.0 * c2 - c1) / 3.0)
}

fn log_z(model: &SpinModel, beta: f64, opts: &ObservableOptions) -> Result<f64> {
    Prepared::new(model, &[], &opts.engine)?.log_z(beta)
}

pub fn mean_energy(model: &SpinModel, beta: f64) -> Result<f64> {
    Ok(mean_energy_with(model, beta, &ObservableOptions::default())?.value())
}

pub fn mean_energy_with(model: &SpinModel, beta: f64, opts: &ObservableOptions) -> Result<TwoPath> {
    let p = Prepared::new(model, &[Probe::Energy], &opts.engine)?;
    let ensemble = p.evaluate(beta)?.averages[0];
    let derivative = -richardson(|b| p.log_z(b), beta, opts.rel_step * beta)?;
    TwoPath { ensemble, derivative }.check("mean energy", opts.tol)
}

/// `A = -ln Z / beta`
pub fn free_energy(model: &SpinModel, beta: f64) -> Result<f64> {
    Ok(-log_z(model, beta, &ObservableOptions::default())? / beta)
}

pub fn entropy(model: &SpinModel, beta: f64) -> Result<f64> {
    entropy_with(model, beta, &ObservableOptions::default())
}

/// `S = -dA/dT` by finite difference in `T`, checked against `U = A + T S`.
pub fn entropy_with(model: &SpinModel, beta: f64, opts: &ObservableOptions) -> Result<f64> {
    let p = Prepared::new(model, &[Probe::Energy], &opts.engine)?;
    let ev = p.evaluate(beta)?;
    let t = 1.0 / beta;
    let a = -ev.result.log_z * t;
    let s = richardson(|tt| Ok(tt * p.log_z(1.0 / tt)?), t, opts.rel_step * t)?;
    let u = ev.averages[0];
    if (u - (a + t * s)).abs() > opts.tol * 1f64.max(u.abs()) {
        return Err(Error::Disagreement(format!("U = {u:.15e} but A + TS = {:.15e}", a + t * s)));
    }
    Ok(s)
}

pub fn magnetization(model: &SpinModel, beta: f64, sites: &[usize]) -> Result<f64> {
    Ok(magnetization_with(model, beta, sites, &ObservableOptions::default())?.value())
}

/// `d ln Z / dh` at `h = 0` for a field coupling to `sum (-1)^s_i`.
pub fn magnetization_with(model: &SpinModel, beta: f64, sites: &[usize], opts: &ObservableOptions) -> Result<TwoPath> {
    for &i in sites {
        if i >= model.num_spins {
            return Err(Error::InvalidArgument(format!("site {i} out of range")));
        }
    }
    let probe = Probe::ParitySum(sites.iter().map(|&i| vec![i]).collect());
    let ensemble = Prepared::new(model, &[probe], &opts.engine)?.evaluate(beta)?.averages[0];
    let supports: Vec<Vec<usize>> = sites.iter().map(|&i| vec![i]).collect();
    let derivative = source_derivative(model, beta, &supports, opts)?;
    TwoPath { ensemble, derivative }.check("magnetization", opts.tol)
}

/// Derivative of `ln Z` in a source `h` that adds weight `e^(h * parity)` for
/// each listed support.
fn source_derivative(model: &SpinModel, beta: f64, supports: &[Vec<usize>], opts: &ObservableOptions) -> Result<f64> {
    let with_source = |h: f64| -> Result<f64> {
        let mut m = model.clone();
        for s in supports {
            m.push(Term::parity(s.clone(), h / beta));
        }
        log_z(&m, beta, opts)
    };
    richardson(with_source, 0.0, opts.h)
}

/// `<(-1)^(sum of spins)>` directly and through a source on the product.
pub fn parity_expectation_with(model: &SpinModel, beta: f64, spins: &[usize], opts: &ObservableOptions) -> Result<TwoPath> {
    if let Some(&i) = spins.iter().find(|&&i| i >= model.num_spins || model.levels[i] != 2) {
        return Err(Error::InvalidArgument(format!("spin {i} is out of range or not binary")));
    }
    let ensemble = Prepared::new(model, &[Probe::Parity(spins.to_vec())], &opts.engine)?.evaluate(beta)?.averages[0];
    let derivative = source_derivative(model, beta, &[spins.to_vec()], opts)?;
    TwoPath { ensemble, derivative }.check("parity expectation", opts.tol)
}

/// Errors unless every vertex touches an even number of the edges.
pub fn check_closed(geom: &LatticeGeometry, loop_edges: &[usize]) -> Result<()> {
    if loop_edges.is_empty() {
        return Err(Error::InvalidArgument("empty loop".into()));
    }
    let mut deg = vec![0u8; geom.num_vertices()];
    let mut seen = std::collections::HashSet::new();
    for &e in loop_edges {
        if e >= geom.num_edges() {
            return Err(Error::InvalidArgument(format!("edge {e} out of range")));
        }
        if !seen.insert(e) {
            return Err(Error::InvalidArgument(format!("edge {e} repeated in loop")));
        }
        let (a, b) = geom.edge_endpoints(e);
        deg[a] ^= 1;
        deg[b] ^= 1;
    }
    match deg.iter().position(|d| *d == 1) {
        Some(v) => Err(Error::OpenLoop(v)),
        None => Ok(()),
    }
}

fn require_edge_model(model: &SpinModel, geom: &LatticeGeometry) -> Result<()> {
    if model.num_spins < geom.num_edges() || !model.levels[..geom.num_edges()].iter().all(|&q| q == 2) {
        return Err(Error::Unsupported("needs a Z2 model with one spin per edge".into()));
    }
    Ok(())
}

pub fn wilson_loop(model: &SpinModel, geom: &LatticeGeometry, beta: f64, loop_edges: &[usize]) -> Result<f64> {
    Ok(wilson_loop_with(model, geom, beta, loop_edges, &ObservableOptions::default())?.value())
}

/// `<(-1)^(sum over the loop)>` directly and through a source on the loop.
pub fn wilson_loop_with(
    model: &SpinModel,
    geom: &LatticeGeometry,
    beta: f64,
    loop_edges: &[usize],
    opts: &ObservableOptions,
) -> Result<TwoPath> {
    require_edge_model(model, geom)?;
    check_closed(geom, loop_edges)?;
    parity_expectation_with(model, beta, loop_edges, opts)
}

/// Connected correlator of two face parities.
pub fn face_correlation(model: &SpinModel, geom: &LatticeGeometry, beta: f64, f1: usize, f2: usize) -> Result<f64> {
    face_correlation_with(model, geom, beta, f1, f2, &EngineOptions::default())
}

pub fn face_correlation_with(
    model: &SpinModel,
    geom: &LatticeGeometry,
    beta: f64,
    f1: usize,
    f2: usize,
    opts: &EngineOptions,
) -> Result<f64> {
    require_edge_model(model, geom)?;
    if f1 == f2 {
        return Err(Error::InvalidArgument("correlation of a face with itself".into()));
    }
    if f1.max(f2) >= geom.num_faces() {
        return Err(Error::InvalidArgument("face out of range".into()));
    }
    let a = geom.face_boundary(f1).to_vec();
    let b = geom.face_boundary(f2).to_vec();
    let both: Vec<usize> = a.iter().chain(&b).copied().collect();
    let ev = Prepared::new(model, &[Probe::Parity(a), Probe::Parity(b), Probe::Parity(both)], opts)?.evaluate(beta)?;
    Ok(ev.averages[2] - ev.averages[0] * ev.averages[1])
}

/// Largest `|<(-1)^s_e>|` over every edge.
pub fn elitzur_max(model: &SpinModel, geom: &LatticeGeometry, beta: f64, opts: &EngineOptions) -> Result<f64> {
    require_edge_model(model, geom)?;
    let probes: Vec<Probe> = (0..geom.num_edges()).map(|e| Probe::Parity(vec![e])).collect();
    let ev = Prepared::new(model, &probes, opts)?.evaluate(beta)?;
    Ok(ev.averages.iter().fold(0.0, |m, a| m.max(a.abs())))
}
