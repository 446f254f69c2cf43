//! Atomic Thomas–Fermi theory.
//!
//! The neutral atom of charge `z` has potential `V(r) = z φ(r/b)/r` with
//! `b = (3π/4)^{2/3} z^{-1/3}` and density `ϱ = V^{3/2}/(3π²)`, where `φ` is
//! the universal screening profile
//!
//! ```text
//! φ'' = φ^{3/2}/√t,   φ(0) = 1,   φ(t) → 0 as t → ∞.
//! ```
//!
//! The profile is computed on its stable manifold. With `σ = ln t`,
//! `y = t³φ` and `q = t⁴φ'` the equation becomes autonomous,
//! `y' = 3y + q`, `q' = 4q + y^{3/2}`, with a saddle at `(144, -432)` (the
//! Sommerfeld solution `144/t³`). Integrating backward in `σ` from a point on
//! the stable eigendirection converges onto the decaying branch; the
//! condition `φ(0) = 1` is restored afterwards by the scaling symmetry
//! `φ ↦ a³φ(a·)`, which is a pure shift in `σ`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::NuclearConfig;
use crate::quad::{cumulative_uniform, integrate_uniform};

/// Stable eigenvalue of the linearisation at the Sommerfeld saddle.
pub const TAIL_EXPONENT: f64 = -0.772001872658765;

const SADDLE_Y: f64 = 144.0;
const START_OFFSET: f64 = -1e-7;
const SWITCH_Y: f64 = 1e-6;
const MAX_REFINEMENTS: usize = 10;

/// Length scale `b(z) = (3π/4)^{2/3} z^{-1/3}`.
pub fn length_scale(z: f64) -> f64 {
    (0.75 * PI).powf(2.0 / 3.0) * z.powf(-1.0 / 3.0)
}

/// Log-spaced grid in the TF variable `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t_min: 1e-6,
            t_max: 1e4,
            points: 4000,
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_max > self.t_min) || !self.t_max.is_finite() {
            return Err(Error::InvalidInput(format!(
                "grid needs 0 < t_min < t_max, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if self.points < 8 {
            return Err(Error::InvalidInput("grid needs at least 8 points".into()));
        }
        Ok(())
    }

    fn step(&self) -> f64 {
        (self.t_max / self.t_min).ln() / (self.points - 1) as f64
    }
}

fn rk4_with(f: impl Fn(f64, f64) -> (f64, f64), y: f64, q: f64, h: f64) -> (f64, f64) {
    let (k1y, k1q) = f(y, q);
    let (k2y, k2q) = f(y + 0.5 * h * k1y, q + 0.5 * h * k1q);
    let (k3y, k3q) = f(y + 0.5 * h * k2y, q + 0.5 * h * k2q);
    let (k4y, k4q) = f(y + h * k3y, q + h * k3q);
    (
        y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
        q + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q),
    )
}

// Near the saddle the state is carried as the offset from (144, -432);
// otherwise roundoff in the tiny offset acts as a random shift in σ.
#[derive(Clone, Copy)]
struct State {
    near: bool,
    a: f64,
    b: f64,
}

impl State {
    fn start() -> Self {
        let e = SADDLE_Y * START_OFFSET;
        Self {
            near: true,
            a: e,
            b: e * (TAIL_EXPONENT - 3.0),
        }
    }

    fn y(&self) -> f64 {
        if self.near { SADDLE_Y + self.a } else { self.a }
    }

    fn q(&self) -> f64 {
        if self.near { -3.0 * SADDLE_Y + self.b } else { self.b }
    }

    fn step(&mut self, h: f64) {
        if self.near {
            let f = |dy: f64, dq: f64| {
                let u = (dy / SADDLE_Y).max(-1.0);
                let g = 1728.0 * (1.5 * u.ln_1p()).exp_m1();
                (3.0 * dy + dq, 4.0 * dq + g)
            };
            (self.a, self.b) = rk4_with(f, self.a, self.b, h);
            if self.a.abs() > 1.0 {
                let (y, q) = (self.y(), self.q());
                *self = Self { near: false, a: y, b: q };
            }
        } else {
            let f = |y: f64, q: f64| (3.0 * y + q, 4.0 * q + y.max(0.0).powf(1.5));
            (self.a, self.b) = rk4_with(f, self.a, self.b, h);
        }
    }
}

// φ_w = 2wψ, ψ_w = 2φ^{3/2} with t = w², ψ = dφ/dt
fn rk4_w(w: f64, phi: f64, psi: f64, h: f64) -> (f64, f64) {
    let f = |w: f64, phi: f64, psi: f64| (2.0 * w * psi, 2.0 * phi.max(0.0).powf(1.5));
    let (a1, b1) = f(w, phi, psi);
    let (a2, b2) = f(w + 0.5 * h, phi + 0.5 * h * a1, psi + 0.5 * h * b1);
    let (a3, b3) = f(w + 0.5 * h, phi + 0.5 * h * a2, psi + 0.5 * h * b2);
    let (a4, b4) = f(w + h, phi + h * a3, psi + h * b3);
    (
        phi + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        psi + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
    )
}

/// Backward sweep from the saddle; returns `(φ_u(0), φ_u'(0))` of the
/// unnormalised trajectory whose start sits at `σ = 0`.
fn unnormalised_origin(h: f64, substeps: usize) -> Result<(f64, f64)> {
    let mut st = State::start();
    let mut sigma = 0.0;
    let mut steps = 0usize;
    while st.y() >= SWITCH_Y {
        st.step(-h);
        steps += 1;
        sigma = -(steps as f64) * h;
        if steps > 50_000_000 || !st.y().is_finite() {
            return Err(Error::TfNonConvergence {
                iterations: 0,
                last_change: f64::NAN,
                substeps,
            });
        }
    }
    let t = sigma.exp();
    let mut phi = st.y() / t.powi(3);
    let mut psi = st.q() / t.powi(4);
    let w0 = t.sqrt();
    let n = 256 * substeps;
    let hw = -w0 / n as f64;
    for i in 0..n {
        let w = w0 + i as f64 * hw;
        let (p, s) = rk4_w(w, phi, psi, hw);
        phi = p;
        psi = s;
    }
    Ok((phi, psi))
}

struct Profile {
    slope0: f64,
    phi: Vec<f64>,
    dphi: Vec<f64>,
}

fn integrate_profile(grid: &GridSpec, substeps: usize) -> Result<Profile> {
    let delta = grid.step();
    let h = delta / substeps as f64;
    let (c, s_u) = unnormalised_origin(h, substeps)?;
    if !(c > 0.0) {
        return Err(Error::TfNonConvergence {
            iterations: 0,
            last_change: f64::NAN,
            substeps,
        });
    }
    let a = c.powf(-1.0 / 3.0);
    let slope0 = s_u * a.powi(4);
    let sigma0 = grid.t_min.ln();
    let sigma_top = sigma0 + (grid.points - 1) as f64 * delta;
    let sigma_start = -a.ln();
    if sigma_start <= sigma_top {
        return Err(Error::InvalidInput(format!(
            "t_max = {} lies beyond the matched asymptotic region",
            grid.t_max
        )));
    }
    let mut st = State::start();
    let m = ((sigma_start - sigma_top) / h).ceil().max(1.0) as usize;
    let hh = (sigma_start - sigma_top) / m as f64;
    for _ in 0..m {
        st.step(-hh);
    }
    let n = grid.points;
    let mut phi = vec![0.0; n];
    let mut dphi = vec![0.0; n];
    for k in (0..n).rev() {
        if k + 1 < n {
            for _ in 0..substeps {
                st.step(-h);
            }
        }
        let sigma = sigma0 + k as f64 * delta;
        phi[k] = st.y() * (-3.0 * sigma).exp();
        dphi[k] = st.q() * (-4.0 * sigma).exp();
    }
    Ok(Profile { slope0, phi, dphi })
}

/// Solve for the universal profile. Substeps per grid cell are doubled until
/// the slope and every grid value change by less than `tolerance`.
pub fn solve_tf_atom(tolerance: f64, grid: GridSpec) -> Result<TfSolution> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    grid.validate()?;
    let mut substeps = 1usize;
    let mut prev = integrate_profile(&grid, substeps)?;
    let mut last_change = f64::INFINITY;
    for it in 0..MAX_REFINEMENTS {
        substeps *= 2;
        let next = integrate_profile(&grid, substeps)?;
        let mut change = (next.slope0 - prev.slope0).abs();
        for (a, b) in next.phi.iter().zip(&prev.phi) {
            change = change.max((a - b).abs());
        }
        log::debug!("tf refinement {it}: substeps {substeps}, change {change:e}");
        last_change = change;
        prev = next;
        if change < tolerance {
            let t: Vec<f64> = (0..grid.points)
                .map(|k| grid.t_min * (k as f64 * grid.step()).exp())
                .collect();
            return TfSolution::from_parts(t, prev.phi, prev.dphi, prev.slope0);
        }
    }
    Err(Error::TfNonConvergence {
        iterations: MAX_REFINEMENTS,
        last_change,
        substeps,
    })
}

/// Forward shooting on the initial slope, bisected until the bracket is
/// narrower than `tol`. Slow and less accurate than [`solve_tf_atom`] but
/// independent of it.
pub fn shooting_slope(tol: f64) -> f64 {
    // +1: overshoots (φ' turns positive), -1: crosses zero
    let classify = |s: f64| -> i32 {
        let hw = 2e-4;
        let (mut phi, mut psi) = (1.0, s);
        let mut w = 0.0;
        for _ in 0..5_000_000 {
            let (p, q) = rk4_w(w, phi, psi, hw);
            phi = p;
            psi = q;
            w += hw;
            if phi <= 0.0 {
                return -1;
            }
            if psi >= 0.0 {
                return 1;
            }
        }
        0
    };
    let (mut lo, mut hi) = (-1.7, -1.5);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match classify(mid) {
            -1 => lo = mid,
            1 => hi = mid,
            _ => break,
        }
    }
    0.5 * (lo + hi)
}

/// Universal Thomas–Fermi profile on a log grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TfSolution {
    t: Vec<f64>,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    slope0: f64,
    dsigma: f64,
    tail_delta: f64,
    e_atom: f64,
}

/// One component of the scaling laws `V ↦ h⁻⁴`, `ϱ ↦ h⁻⁶`, `E ↦ h⁻⁷`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Potential,
    Density,
    Energy,
}

/// `V(z, r, x) = h⁻⁴ V(h³z, h⁻¹r, h⁻¹x)` and its density and energy analogues:
/// returns `h^{-k}·value` for the value computed at the rescaled arguments.
pub fn tf_scale(quantity: Quantity, h: f64, value: f64) -> f64 {
    let k = match quantity {
        Quantity::Potential => 4,
        Quantity::Density => 6,
        Quantity::Energy => 7,
    };
    value * h.powi(-k)
}

impl TfSolution {
    fn from_parts(t: Vec<f64>, phi: Vec<f64>, dphi: Vec<f64>, slope0: f64) -> Result<Self> {
        let n = t.len();
        if n < 8 || phi.len() != n || dphi.len() != n {
            return Err(Error::InvalidInput("profile needs at least 8 consistent rows".into()));
        }
        let dsigma = (t[n - 1] / t[0]).ln() / (n - 1) as f64;
        for k in 1..n {
            let d = (t[k] / t[k - 1]).ln();
            if !(t[k - 1] > 0.0) || (d - dsigma).abs() > 1e-6 * dsigma {
                return Err(Error::InvalidInput("profile grid must be log-uniform".into()));
            }
        }
        if phi.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidInput("profile must be positive".into()));
        }
        let tm = t[n - 1];
        let tail_delta = phi[n - 1] * tm.powi(3) / SADDLE_Y - 1.0;
        let mut sol = Self {
            t,
            phi,
            dphi,
            slope0,
            dsigma,
            tail_delta,
            e_atom: 0.0,
        };
        sol.e_atom = sol.energy_parts(1.0).functional();
        Ok(sol)
    }

    /// Rebuild from `(t, φ, φ')` rows; the first row must be `(0, 1, φ'(0))`.
    pub fn from_profile(rows: &[(f64, f64, f64)]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidInput("empty profile".into()))?;
        if first.0 != 0.0 || first.1 != 1.0 {
            return Err(Error::InvalidInput("first profile row must be (0, 1, slope)".into()));
        }
        let rest = &rows[1..];
        Self::from_parts(
            rest.iter().map(|r| r.0).collect(),
            rest.iter().map(|r| r.1).collect(),
            rest.iter().map(|r| r.2).collect(),
            first.2,
        )
    }

    /// Profile rows including the `t = 0` boundary row.
    pub fn profile(&self) -> Vec<(f64, f64, f64)> {
        std::iter::once((0.0, 1.0, self.slope0))
            .chain((0..self.t.len()).map(|k| (self.t[k], self.phi[k], self.dphi[k])))
            .collect()
    }

    /// CSV with header `t,phi,dphi`. Values are printed in shortest
    /// round-trip form, so [`TfSolution::from_csv`] reproduces them exactly.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,phi,dphi\n");
        for (t, p, d) in self.profile() {
            let _ = writeln!(s, "{t:e},{p:e},{d:e}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in reader.deserialize::<(f64, f64, f64)>().enumerate() {
            let row = rec.map_err(|e| Error::InvalidInput(format!("profile record {}: {e}", i + 1)))?;
            rows.push(row);
        }
        Self::from_profile(&rows)
    }

    pub fn grid(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.phi
    }

    pub fn slope0(&self) -> f64 {
        self.slope0
    }

    /// `E_atom` with `E^TF(z) = E_atom z^{7/3}`.
    pub fn e_atom(&self) -> f64 {
        self.e_atom
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let x = (t / self.t[0]).ln() / self.dsigma;
        let i = (x.floor() as usize).min(self.t.len() - 2);
        (i, x - i as f64)
    }

    fn tail(&self, t: f64) -> (f64, f64) {
        let u = (t / self.t[self.t.len() - 1]).powf(TAIL_EXPONENT);
        let d = self.tail_delta * u;
        (
            SADDLE_Y / t.powi(3) * (1.0 + d),
            SADDLE_Y / t.powi(4) * (-3.0 - (3.0 - TAIL_EXPONENT) * d),
        )
    }

    /// `φ(t)`; cubic Hermite in `ln t` on the grid, series below it and the
    /// matched Sommerfeld tail above it.
    pub fn phi(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t <= 0.0 {
            return 1.0;
        }
        if t < self.t[0] {
            return 1.0 + self.slope0 * t + 4.0 / 3.0 * t.powf(1.5);
        }
        if t > self.t[n - 1] {
            return self.tail(t).0;
        }
        let (i, u) = self.locate(t);
        let m0 = self.t[i] * self.dphi[i];
        let m1 = self.t[i + 1] * self.dphi[i + 1];
        hermite(self.phi[i], self.phi[i + 1], m0, m1, u, self.dsigma)
    }

    /// `φ'(t)`.
    pub fn dphi(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t <= 0.0 {
            return self.slope0;
        }
        if t < self.t[0] {
            return self.slope0 + 2.0 * t.sqrt();
        }
        if t > self.t[n - 1] {
            return self.tail(t).1;
        }
        let (i, u) = self.locate(t);
        // d φ'/dσ = t φ'' = √t φ^{3/2}
        let m = |k: usize| self.t[k].sqrt() * self.phi[k].powf(1.5);
        hermite(self.dphi[i], self.dphi[i + 1], m(i), m(i + 1), u, self.dsigma)
    }

    /// `V^TF(z, r) = z φ(r/b)/r`.
    pub fn potential(&self, z: f64, r: f64) -> f64 {
        let b = length_scale(z);
        z * self.phi(r / b) / r
    }

    /// `ϱ^TF(z, r) = V^{3/2}/(3π²)`.
    pub fn density(&self, z: f64, r: f64) -> f64 {
        self.potential(z, r).max(0.0).powf(1.5) / (3.0 * PI * PI)
    }

    /// `∫₀^∞ t^p φ^q dt` with analytic tails below and above the grid.
    fn moment(&self, p: f64, q: f64) -> f64 {
        let n = self.t.len();
        let vals: Vec<f64> = (0..n)
            .map(|k| self.t[k].powf(p + 1.0) * self.phi[k].powf(q))
            .collect();
        let body = integrate_uniform(&vals, self.dsigma);
        let t0 = self.t[0];
        let inner = t0.powf(p + 1.0) / (p + 1.0) + q * self.slope0 * t0.powf(p + 2.0) / (p + 2.0);
        let tm = self.t[n - 1];
        let c = self.phi[n - 1] * tm.powi(3);
        let outer = c.powf(q) * tm.powf(p + 1.0 - 3.0 * q) / (3.0 * q - p - 1.0);
        inner + body + outer
    }

    /// Radial density of the atom with charge `z` on the solution grid.
    pub fn radial_density(&self, z: f64) -> RadialDensity {
        let b = length_scale(z);
        let r: Vec<f64> = self.t.iter().map(|&t| b * t).collect();
        let rho: Vec<f64> = (0..self.t.len())
            .map(|k| (z * self.phi[k] / r[k]).powf(1.5) / (3.0 * PI * PI))
            .collect();
        RadialDensity::log_grid(r, rho).expect("TF density is valid by construction")
    }

    /// `∫ϱ^TF(z)`.
    pub fn mass(&self, z: f64) -> f64 {
        z * self.moment(0.5, 1.5)
    }

    /// Kinetic, attraction and repulsion terms of the TF functional at charge `z`.
    pub fn energy_parts(&self, z: f64) -> EnergyParts {
        let b = length_scale(z);
        let pre = b.sqrt() * z.powf(2.5);
        EnergyParts {
            kinetic: 4.0 / (5.0 * PI) * pre * self.moment(-0.5, 2.5),
            attraction: 4.0 / (3.0 * PI) * pre * self.moment(-0.5, 1.5),
            repulsion: coulomb_self_energy(&self.radial_density(z)),
        }
    }

    /// Newton-reconstructed profile `1 − I₁(t) − t·I₂(t)` on the grid, with
    /// `I₁ = ∫₀ᵗ τ^{1/2}φ^{3/2}` and `I₂ = ∫ₜ^∞ τ^{-1/2}φ^{3/2}`. Equals `φ`
    /// exactly when `φ` solves the TF equation.
    pub fn newton_profile(&self) -> Vec<f64> {
        let n = self.t.len();
        let d = self.dsigma;
        // integrands in σ and their σ-derivatives
        let g1: Vec<f64> = (0..n).map(|k| (self.t[k] * self.phi[k]).powf(1.5)).collect();
        let g1p: Vec<f64> = (0..n)
            .map(|k| {
                1.5 * self.t[k].powf(1.5) * self.phi[k].sqrt() * (self.phi[k] + self.t[k] * self.dphi[k])
            })
            .collect();
        let g2: Vec<f64> = (0..n).map(|k| self.t[k].sqrt() * self.phi[k].powf(1.5)).collect();
        let g2p: Vec<f64> = (0..n)
            .map(|k| {
                self.t[k].sqrt() * self.phi[k].sqrt() * (0.5 * self.phi[k] + 1.5 * self.t[k] * self.dphi[k])
            })
            .collect();
        let cell = |g: &[f64], gp: &[f64], i: usize| {
            0.5 * d * (g[i] + g[i + 1]) + d * d / 12.0 * (gp[i] - gp[i + 1])
        };
        let t0 = self.t[0];
        let mut i1 = vec![0.0; n];
        i1[0] = 2.0 / 3.0 * t0.powf(1.5) + 0.6 * self.slope0 * t0.powf(2.5);
        for i in 0..n - 1 {
            i1[i + 1] = i1[i] + cell(&g1, &g1p, i);
        }
        let tm = self.t[n - 1];
        let c = (self.phi[n - 1] * tm.powi(3)).powf(1.5);
        let mut i2 = vec![0.0; n];
        i2[n - 1] = c * tm.powi(-4) / 4.0;
        for i in (0..n - 1).rev() {
            i2[i] = i2[i + 1] + cell(&g2, &g2p, i);
        }
        (0..n).map(|k| 1.0 - i1[k] - self.t[k] * i2[k]).collect()
    }

    /// Sup-norm of `φ − φ_Newton` over the grid.
    pub fn tf_residual(&self) -> f64 {
        self.newton_profile()
            .iter()
            .zip(&self.phi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn hermite(p0: f64, p1: f64, m0: f64, m1: f64, u: f64, d: f64) -> f64 {
    let u2 = u * u;
    let u3 = u2 * u;
    (2.0 * u3 - 3.0 * u2 + 1.0) * p0
        + (u3 - 2.0 * u2 + u) * d * m0
        + (-2.0 * u3 + 3.0 * u2) * p1
        + (u3 - u2) * d * m1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    /// `(3/5)(3π²)^{2/3}∫ϱ^{5/3}`
    pub kinetic: f64,
    /// `∫ z ϱ/|x|`
    pub attraction: f64,
    /// `D(ϱ, ϱ)`
    pub repulsion: f64,
}

impl EnergyParts {
    pub fn functional(&self) -> f64 {
        self.kinetic - self.attraction + self.repulsion
    }

    /// Total Coulomb energy `U`.
    pub fn coulomb(&self) -> f64 {
        self.repulsion - self.attraction
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfEnergyReport {
    pub functional: f64,
    pub phase_space: f64,
    pub relative_gap: f64,
    /// `|2K + U|/|E|`
    pub virial: f64,
    pub parts: EnergyParts,
}

/// Evaluate `E^TF(z = 1)` as the TF functional and as the phase-space
/// integral of `[p² − V^TF]_-` minus `D(ϱ^TF)`.
pub fn tf_energy_consistency(sol: &TfSolution) -> Result<TfEnergyReport> {
    let parts = sol.energy_parts(1.0);
    let functional = parts.functional();
    let v = |r: f64| sol.potential(1.0, r);
    let weyl = crate::weyl::weyl_integral(&crate::weyl::WeylIntegrand::new(&v, 0.0, 1.0))?;
    let phase_space = weyl - parts.repulsion;
    Ok(TfEnergyReport {
        functional,
        phase_space,
        relative_gap: ((functional - phase_space) / functional).abs(),
        virial: ((2.0 * parts.kinetic + parts.coulomb()) / functional).abs(),
        parts,
    })
}

/// A radially symmetric density sampled on a uniform or log-uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialDensity {
    r: Vec<f64>,
    rho: Vec<f64>,
    log: bool,
}

impl RadialDensity {
    fn check(r: &[f64], rho: &[f64]) -> Result<()> {
        if r.len() != rho.len() || r.len() < 4 {
            return Err(Error::InvalidInput("density needs at least 4 matching samples".into()));
        }
        if rho.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("density must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// Grid `r_i = r_0 + i·dr` with `r_0 ≥ 0`.
    pub fn uniform_grid(r: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        Self::check(&r, &rho)?;
        let dr = (r[r.len() - 1] - r[0]) / (r.len() - 1) as f64;
        if !(r[0] >= 0.0 && dr > 0.0) || r.windows(2).any(|w| ((w[1] - w[0]) - dr).abs() > 1e-9 * dr) {
            return Err(Error::InvalidInput("uniform grid expected".into()));
        }
        Ok(Self { r, rho, log: false })
    }

    /// Grid `r_i = r_0 e^{i·dx}` with `r_0 > 0`.
    pub fn log_grid(r: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        Self::check(&r, &rho)?;
        if !(r[0] > 0.0) {
            return Err(Error::InvalidInput("log grid must start above 0".into()));
        }
        let dx = (r[r.len() - 1] / r[0]).ln() / (r.len() - 1) as f64;
        if !(dx > 0.0) || r.windows(2).any(|w| ((w[1] / w[0]).ln() - dx).abs() > 1e-6 * dx) {
            return Err(Error::InvalidInput("log-uniform grid expected".into()));
        }
        Ok(Self { r, rho, log: true })
    }

    pub fn from_fn_uniform(r_max: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let r: Vec<f64> = (0..n).map(|i| r_max * i as f64 / (n - 1) as f64).collect();
        let rho = r.iter().map(|&x| f(x)).collect();
        Self::uniform_grid(r, rho)
    }

    pub fn from_fn_log(r_min: f64, r_max: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let dx = (r_max / r_min).ln() / (n - 1) as f64;
        let r: Vec<f64> = (0..n).map(|i| r_min * (i as f64 * dx).exp()).collect();
        let rho = r.iter().map(|&x| f(x)).collect();
        Self::log_grid(r, rho)
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    // power-law exponent k with ρ ~ r^{-k} between two samples
    fn decay(&self, i: usize, j: usize) -> Option<f64> {
        let (a, b) = (self.rho[i], self.rho[j]);
        if a > 0.0 && b > 0.0 && self.r[i] > 0.0 {
            Some(-(b / a).ln() / (self.r[j] / self.r[i]).ln())
        } else {
            None
        }
    }

    /// Mass below the first grid point and the matching self-energy piece.
    fn inner(&self) -> (f64, f64) {
        if !self.log || self.r[0] == 0.0 {
            return (0.0, 0.0);
        }
        match self.decay(0, 1) {
            Some(k) if k < 2.5 => {
                let q0 = 4.0 * PI * self.rho[0] * self.r[0].powi(3) / (3.0 - k);
                (q0, (3.0 - k) * q0 * q0 / (self.r[0] * (5.0 - 2.0 * k)))
            }
            _ => (0.0, 0.0),
        }
    }

    /// Cumulative mass `Q(r_i)`, and the integrand `4πr²ρ` on the grid.
    fn cumulative(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.r.len();
        let shell: Vec<f64> = (0..n).map(|i| 4.0 * PI * self.r[i] * self.r[i] * self.rho[i]).collect();
        let (q0, _) = self.inner();
        let q = if self.log {
            let dx = (self.r[n - 1] / self.r[0]).ln() / (n - 1) as f64;
            let vals: Vec<f64> = (0..n).map(|i| shell[i] * self.r[i]).collect();
            cumulative_uniform(&vals, dx)
        } else {
            let dr = (self.r[n - 1] - self.r[0]) / (n - 1) as f64;
            cumulative_uniform(&shell, dr)
        };
        (q.into_iter().map(|v| v + q0).collect(), shell)
    }

    pub fn mass(&self) -> f64 {
        let (q, _) = self.cumulative();
        q[q.len() - 1]
    }
}

/// `D(ϱ, ϱ) = ½∬ϱ(x)ϱ(y)/|x − y|` for a radial density, via Newton's theorem:
/// `D = ∫₀^∞ Q(r)·4πr²ϱ(r)/r dr` with `Q` the enclosed mass.
pub fn coulomb_self_energy(rho: &RadialDensity) -> f64 {
    let (q, shell) = rho.cumulative();
    let n = q.len();
    let (_, d_inner) = rho.inner();
    let body = if rho.log {
        let dx = (rho.r[n - 1] / rho.r[0]).ln() / (n - 1) as f64;
        let vals: Vec<f64> = (0..n).map(|i| q[i] * shell[i]).collect();
        integrate_uniform(&vals, dx)
    } else {
        let dr = (rho.r[n - 1] - rho.r[0]) / (n - 1) as f64;
        let vals: Vec<f64> = (0..n)
            .map(|i| if rho.r[i] > 0.0 { q[i] * shell[i] / rho.r[i] } else { 0.0 })
            .collect();
        integrate_uniform(&vals, dr)
    };
    let outer = match rho.decay(n - 2, n - 1) {
        Some(k) if rho.log && k > 3.0 => q[n - 1] * shell[n - 1] / (k - 2.0),
        _ => 0.0,
    };
    d_inner + body + outer
}

/// Empirical constants of the TF-type bounds for a potential.
#[derive(Debug, Clone, PartialEq)]
pub struct TfTypeReport {
    /// Largest sampled `d(x)` per cloud (clouds are nested and grow outward
    /// and inward by a decade each).
    pub extents: Vec<f64>,
    /// `[C₀, C₁, C₂]` per cloud.
    pub constants: Vec<[f64; 3]>,
    /// `sup |V − z_k/|x − r_k||` in a window around each nucleus.
    pub west: Vec<f64>,
    /// Set when a constant grows by more than [`BLOWUP_FACTOR`] between the
    /// last two clouds or is not finite.
    pub flagged: bool,
}

pub const BLOWUP_FACTOR: f64 = 4.0;

/// Sample `C_α = sup |∂^α(V + μ)|·d^{|α|}/f²` for `|α| ≤ 2` with
/// `f = min(d^{-1/2}, d^{-2})`, using central differences.
pub fn check_tf_type(
    v: &dyn Fn(&[f64; 3]) -> f64,
    config: &NuclearConfig,
    mu: f64,
    seed: u64,
) -> TfTypeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels: i32 = 4;
    let per_level = 200;
    let mut running = [0.0f64; 3];
    let mut extents = Vec::new();
    let mut constants = Vec::new();
    let g = |x: &[f64; 3]| v(x) + mu;
    for level in 1..=levels {
        let span = 10f64.powi(level);
        for _ in 0..per_level {
            let k = rng.random_range(0..config.len());
            let dist = span.powf(rng.random_range(-1.0..1.0));
            let x = offset(&config.positions()[k], &random_direction(&mut rng), dist);
            let d = config.distance(&x);
            let f2 = (1.0 / d).min(d.powi(-4));
            let c0 = g(&x).abs() / f2;
            let h1 = 1e-4 * d;
            let mut c1 = 0.0f64;
            let h2 = 1e-3 * d;
            let mut c2 = 0.0f64;
            let g0 = g(&x);
            for i in 0..3 {
                let xp = shift(&x, i, h1);
                let xm = shift(&x, i, -h1);
                c1 = c1.max(((g(&xp) - g(&xm)) / (2.0 * h1)).abs());
                for j in 0..3 {
                    let second = if i == j {
                        (g(&shift(&x, i, h2)) - 2.0 * g0 + g(&shift(&x, i, -h2))) / (h2 * h2)
                    } else {
                        let pp = shift(&shift(&x, i, h2), j, h2);
                        let pm = shift(&shift(&x, i, h2), j, -h2);
                        let mp = shift(&shift(&x, i, -h2), j, h2);
                        let mm = shift(&shift(&x, i, -h2), j, -h2);
                        (g(&pp) - g(&pm) - g(&mp) + g(&mm)) / (4.0 * h2 * h2)
                    };
                    c2 = c2.max(second.abs());
                }
            }
            let vals = [c0, c1 * d / f2, c2 * d * d / f2];
            for a in 0..3 {
                running[a] = if vals[a].is_finite() { running[a].max(vals[a]) } else { f64::INFINITY };
            }
        }
        extents.push(span);
        constants.push(running);
    }
    let last = constants[constants.len() - 1];
    let prev = constants[constants.len() - 2];
    let flagged = (0..3).any(|a| !last[a].is_finite() || last[a] > BLOWUP_FACTOR * prev[a].max(1e-300));
    let window = if config.len() == 1 { 1.0 } else { (0.5 * config.r_min()).min(1.0) };
    let west = (0..config.len())
        .map(|k| {
            let zk = config.relative_charges()[k];
            let rk = config.positions()[k];
            let mut sup = 0.0f64;
            for _ in 0..per_level {
                let dist = window * 10f64.powf(rng.random_range(-6.0..0.0));
                let x = offset(&rk, &random_direction(&mut rng), dist);
                sup = sup.max((v(&x) - zk / dist).abs());
            }
            sup
        })
        .collect();
    TfTypeReport {
        extents,
        constants,
        west,
        flagged,
    }
}

pub(crate) fn random_direction(rng: &mut impl Rng) -> [f64; 3] {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).sqrt();
    [s * phi.cos(), s * phi.sin(), z]
}

fn offset(c: &[f64; 3], dir: &[f64; 3], dist: f64) -> [f64; 3] {
    [c[0] + dist * dir[0], c[1] + dist * dir[1], c[2] + dist * dir[2]]
}

fn shift(x: &[f64; 3], i: usize, h: f64) -> [f64; 3] {
    let mut y = *x;
    y[i] += h;
    y
}
