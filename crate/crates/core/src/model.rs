//! Shared domain types and conventions.
//!
//! Units: length `ħ²/(2me²)`, energy `2me⁴/ħ²`. In these units the one-body
//! kinetic operator is `-Δ` (at semiclassical parameter `h = 1`), the nuclear
//! attraction of a unit charge is `1/|x|`, and the hydrogen ground state of
//! `-Δ - 1/|x|` sits at exactly `-1/4`.
//!
//! Sign convention: the negative part of a trace is stored as a negative
//! number, `Σ min(eᵢ, 0)`. Scalar (Schrödinger) traces carry an explicit spin
//! factor 2; spinor (Pauli) traces do not, since both spin components are
//! part of the operator.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Spin degeneracy applied to scalar traces.
pub const SPIN_FACTOR: f64 = 2.0;

/// Non-magnetic Scott constant `S(0)`.
pub const SCOTT_S0: f64 = 0.125;

/// `Σ min(eᵢ, 0)`.
pub fn neg_part_sum(eigenvalues: &[f64]) -> f64 {
    eigenvalues.iter().map(|&e| e.min(0.0)).sum()
}

/// A real function of the radial coordinate.
pub trait RadialFn: Sync {
    fn eval(&self, r: f64) -> f64;
}

impl<F> RadialFn for F
where
    F: Fn(f64) -> f64 + Sync,
{
    fn eval(&self, r: f64) -> f64 {
        self(r)
    }
}

/// `z/r - shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coulomb {
    pub z: f64,
    pub shift: f64,
}

impl Coulomb {
    pub fn new(z: f64) -> Self {
        Self { z, shift: 0.0 }
    }

    pub fn shifted(z: f64, shift: f64) -> Self {
        Self { z, shift }
    }
}

impl RadialFn for Coulomb {
    fn eval(&self, r: f64) -> f64 {
        self.z / r - self.shift
    }
}

/// Nuclear charges and positions in the rescaled picture (`Σ z_k = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct NuclearConfig {
    z: Vec<f64>,
    r: Vec<[f64; 3]>,
    total_charge: f64,
    alpha: f64,
}

impl NuclearConfig {
    pub fn new(z: Vec<f64>, r: Vec<[f64; 3]>, total_charge: f64, alpha: f64) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::InvalidConfig("at least one nucleus is required".into()));
        }
        if z.len() != r.len() {
            return Err(Error::InvalidConfig(format!(
                "{} charges but {} positions",
                z.len(),
                r.len()
            )));
        }
        if z.iter().any(|&zk| !(zk > 0.0) || !zk.is_finite()) {
            return Err(Error::InvalidConfig("relative charges must be positive".into()));
        }
        let sum: f64 = z.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "relative charges must sum to 1, got {sum}"
            )));
        }
        if !(total_charge > 0.0) || !total_charge.is_finite() {
            return Err(Error::InvalidConfig("total charge must be positive".into()));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidConfig("alpha must be nonnegative".into()));
        }
        let cfg = Self {
            z,
            r,
            total_charge,
            alpha,
        };
        if cfg.r.len() >= 2 && !(cfg.r_min() > 0.0) {
            return Err(Error::InvalidConfig("nuclei must be at distinct positions".into()));
        }
        Ok(cfg)
    }

    /// Single nucleus at the origin.
    pub fn atom(total_charge: f64, alpha: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![[0.0; 3]], total_charge, alpha)
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn relative_charges(&self) -> &[f64] {
        &self.z
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.r
    }

    pub fn total_charge(&self) -> f64 {
        self.total_charge
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `Z_k = Z z_k`.
    pub fn charge(&self, k: usize) -> f64 {
        self.total_charge * self.z[k]
    }

    /// `κ = 8π Z α²`.
    pub fn kappa(&self) -> f64 {
        8.0 * PI * self.total_charge * self.alpha * self.alpha
    }

    /// `κ_k = 8π Z_k α²`.
    pub fn kappa_k(&self, k: usize) -> f64 {
        8.0 * PI * self.charge(k) * self.alpha * self.alpha
    }

    /// Smallest inter-nuclear distance; `+∞` for a single nucleus.
    pub fn r_min(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.r.len() {
            for j in (i + 1)..self.r.len() {
                best = best.min(dist(&self.r[i], &self.r[j]));
            }
        }
        best
    }

    /// Distance to the nearest nucleus, and its index.
    pub fn nearest(&self, x: &[f64; 3]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (k, rk) in self.r.iter().enumerate() {
            let d = dist(x, rk);
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    }

    pub fn distance(&self, x: &[f64; 3]) -> f64 {
        self.nearest(x).1
    }
}

pub(crate) fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// How a Scott-function estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    MuLimit,
    CutoffR,
    SpectralFit,
    AnsatzMin,
}

impl Route {
    pub fn as_str(&self) -> &'static str {
        match self {
            Route::MuLimit => "mu-limit",
            Route::CutoffR => "cutoff-R",
            Route::SpectralFit => "spectral-fit",
            Route::AnsatzMin => "ansatz-min",
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mu-limit" => Ok(Route::MuLimit),
            "cutoff-R" | "cutoff-r" => Ok(Route::CutoffR),
            "spectral-fit" => Ok(Route::SpectralFit),
            "ansatz-min" => Ok(Route::AnsatzMin),
            other => Err(Error::InvalidInput(format!("unknown route '{other}'"))),
        }
    }
}

/// One evaluation of `2S(κ)` (or of its finite-`R` approximant).
#[derive(Debug, Clone, PartialEq)]
pub struct ScottEstimate {
    pub r: f64,
    pub kappa: f64,
    pub beta: f64,
    /// Estimate of `2S(κ)`.
    pub value: f64,
    pub route: Route,
}

impl ScottEstimate {
    pub fn new(r: f64, kappa: f64, beta: f64, value: f64, route: Route) -> Result<Self> {
        if kappa < 0.0 {
            return Err(Error::InvalidInput("kappa must be nonnegative".into()));
        }
        if kappa > 0.0 && beta > 1.0 / (2.0 * kappa) * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "beta = {beta} exceeds 1/(2 kappa) = {}",
                1.0 / (2.0 * kappa)
            )));
        }
        Ok(Self {
            r,
            kappa,
            beta,
            value,
            route,
        })
    }

    /// `S(κ)` itself.
    pub fn s(&self) -> f64 {
        0.5 * self.value
    }
}
