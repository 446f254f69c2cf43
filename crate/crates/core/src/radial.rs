//! Negative-eigenvalue traces of radial Schrödinger operators `−h²Δ − V`.
//!
//! Each partial wave is discretised on a log grid `r = eˣ`. With
//! `u(r) = r^{1/2} w(x)` the channel equation
//! `−h²u'' + (h²ℓ(ℓ+1)/r² − V)u = E u` becomes the symmetric pencil
//!
//! ```text
//! h²(−w'' + (ℓ+½)² w) − r²V w = E r² w
//! ```
//!
//! discretised by three-point differences with Dirichlet ends. Eigenvalues
//! come from Sturm counts (pivot signs of the `LDLᵀ` factorisation of
//! `A − E M`) and bisection. A multiplicative radial cutoff `φ` turns the
//! pencil into `(ΦAΦ, M)`, which discretises `φHφ`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{RadialFn, SPIN_FACTOR};

/// Log-uniform radial grid `r_i = r_min e^{i·dx}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub dx: f64,
    pub r: Vec<f64>,
}

impl RadialGrid {
    /// Grid between `r_min` and `r_max` with spacing at most `dx`.
    pub fn log(r_min: f64, r_max: f64, dx: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && dx > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bad radial grid r_min={r_min}, r_max={r_max}, dx={dx}"
            )));
        }
        let span = (r_max / r_min).ln();
        let cells = (span / dx).ceil().max(4.0) as usize;
        Ok(Self::with_cells(r_min, span, cells))
    }

    fn with_cells(r_min: f64, span: f64, cells: usize) -> Self {
        let dx = span / cells as f64;
        let r = (0..=cells).map(|i| r_min * (i as f64 * dx).exp()).collect();
        Self { dx, r }
    }

    /// The grid with every cell halved (same end points).
    pub fn refined(&self) -> Self {
        let cells = self.r.len() - 1;
        Self::with_cells(self.r[0], (self.r[cells] / self.r[0]).ln(), 2 * cells)
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        self.r[self.r.len() - 1]
    }
}

/// Tridiagonal pencil `(A, M)` for one partial wave on the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelOperator {
    pub l: usize,
    pub h: f64,
    diag: Vec<f64>,
    off: Vec<f64>,
    mass: Vec<f64>,
    dx: f64,
    r: Vec<f64>,
}

impl ChannelOperator {
    /// `−h² d²/dr² + h²ℓ(ℓ+1)/r² − V(r)`, optionally sandwiched by `φ`.
    pub fn new(l: usize, h: f64, grid: &RadialGrid, v: &dyn RadialFn, cutoff: Option<&dyn RadialFn>) -> Self {
        let n = grid.len() - 2;
        let r: Vec<f64> = grid.r[1..=n].to_vec();
        let k = h * h / (grid.dx * grid.dx);
        let centrifugal = h * h * (l as f64 + 0.5).powi(2);
        let phi: Vec<f64> = match cutoff {
            Some(c) => r.iter().map(|&x| c.eval(x)).collect(),
            None => vec![1.0; n],
        };
        let diag = (0..n)
            .map(|i| phi[i] * phi[i] * (2.0 * k + centrifugal - r[i] * r[i] * v.eval(r[i])))
            .collect();
        let off = (0..n.saturating_sub(1)).map(|i| -k * phi[i] * phi[i + 1]).collect();
        let mass = r.iter().map(|&x| x * x).collect();
        Self {
            l,
            h,
            diag,
            off,
            mass,
            dx: grid.dx,
            r,
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Interior radii.
    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    /// Number of eigenvalues strictly below `e`.
    pub fn count_below(&self, e: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.diag.len() {
            let b2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            d = self.diag[i] - e * self.mass[i] - if i == 0 { 0.0 } else { b2 / d };
            if d == 0.0 {
                // an eigenvalue exactly at e is not strictly below it
                d = f64::EPSILON * (self.diag[i].abs() + e.abs() * self.mass[i]).max(f64::MIN_POSITIVE);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin-type lower bound for the pencil spectrum.
    pub fn lower_bound(&self) -> f64 {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min((self.diag[i] - left - right) / self.mass[i]);
        }
        lo.min(0.0)
    }

    fn bracket_low(&self, e_max: f64) -> f64 {
        let mut lo = -1.0f64.max(e_max.abs());
        let floor = self.lower_bound() - 1.0;
        while lo > floor && self.count_below(lo) > 0 {
            lo *= 2.0;
        }
        lo.max(floor)
    }

    /// All eigenvalues strictly below `e_max`, ascending, each bisected to
    /// relative accuracy `1e-10` (absolute floor `1e-15`).
    pub fn eigenvalues_below(&self, e_max: f64) -> Vec<f64> {
        let total = self.count_below(e_max);
        let mut out = Vec::with_capacity(total);
        if total == 0 {
            return out;
        }
        let lo = self.bracket_low(e_max);
        self.isolate(lo, e_max, 0, total, &mut out);
        out
    }

    fn isolate(&self, lo: f64, hi: f64, c_lo: usize, c_hi: usize, out: &mut Vec<f64>) {
        if c_hi == c_lo {
            return;
        }
        let converged = hi - lo <= 1e-10 * lo.abs().max(hi.abs()) + 1e-15;
        if c_hi - c_lo == 1 || converged {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..400 {
                if b - a <= 1e-10 * a.abs().max(b.abs()) + 1e-15 {
                    break;
                }
                let mid = 0.5 * (a + b);
                if self.count_below(mid) > c_lo {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            for _ in c_lo..c_hi {
                out.push(0.5 * (a + b));
            }
            return;
        }
        let mid = 0.5 * (lo + hi);
        let c_mid = self.count_below(mid);
        self.isolate(lo, mid, c_lo, c_mid, out);
        self.isolate(mid, hi, c_mid, c_hi, out);
    }

    /// Eigenvectors for the given eigenvalues by inverse iteration, returned
    /// as reduced radial functions `u(r_i)` normalised to `∫|u|² dr = 1`.
    pub fn eigenvectors(&self, eigenvalues: &[f64]) -> Vec<Vec<f64>> {
        self.pencil_vectors(eigenvalues)
            .into_iter()
            .map(|w| (0..w.len()).map(|i| self.r[i].sqrt() * w[i]).collect())
            .collect()
    }

    /// Pencil eigenvectors `w`, `M`-orthonormal under [`Self::m_dot`].
    pub(crate) fn pencil_vectors(&self, eigenvalues: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(eigenvalues.len());
        for (k, &e) in eigenvalues.iter().enumerate() {
            let shift = e - 1e-9 * (1.0 + e.abs());
            let mut w: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i * (k + 3)) % 7) as f64).collect();
            for _ in 0..4 {
                let rhs: Vec<f64> = (0..n).map(|i| self.mass[i] * w[i]).collect();
                w = self.solve_shifted(shift, &rhs);
                for prev in &vecs {
                    let c = self.m_dot(&w, prev);
                    for i in 0..n {
                        w[i] -= c * prev[i];
                    }
                }
                let norm = self.m_dot(&w, &w).sqrt();
                for x in w.iter_mut() {
                    *x /= norm;
                }
            }
            vecs.push(w);
        }
        vecs
    }

    pub(crate) fn m_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        (0..a.len()).map(|i| self.mass[i] * a[i] * b[i]).sum::<f64>() * self.dx
    }

    /// `aᵀ(ΦAΦ)b·dx`, the quadratic form paired with [`Self::m_dot`].
    pub(crate) fn form(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = a.len();
        let mut acc = 0.0;
        for i in 0..n {
            let mut y = self.diag[i] * b[i];
            if i > 0 {
                y += self.off[i - 1] * b[i - 1];
            }
            if i + 1 < n {
                y += self.off[i] * b[i + 1];
            }
            acc += a[i] * y;
        }
        acc * self.dx
    }

    fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut piv = self.diag[0] - shift * self.mass[0];
        c[0] = if n > 1 { self.off[0] / piv } else { 0.0 };
        d[0] = rhs[0] / piv;
        for i in 1..n {
            piv = self.diag[i] - shift * self.mass[i] - self.off[i - 1] * c[i - 1];
            if piv == 0.0 {
                piv = 1e-300;
            }
            c[i] = if i + 1 < n { self.off[i] / piv } else { 0.0 };
            d[i] = (rhs[i] - self.off[i - 1] * d[i - 1]) / piv;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    }
}

/// Eigenvalues of `op` below `−μ`.
pub fn negative_eigenvalues(op: &ChannelOperator, mu: f64) -> Vec<f64> {
    op.eigenvalues_below(-mu)
}

/// `φ_R(r) = cos(π/2·S((2r − R)/R))` with `S` the `C^∞` step from 0 to 1;
/// equal to 1 on `B(R/2)`, 0 outside `B(R)`, and `(1 − φ²)^{1/2}` is smooth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothCutoff {
    pub radius: f64,
}

pub(crate) fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let f = |t: f64| (-1.0 / t).exp();
    f(x) / (f(x) + f(1.0 - x))
}

/// `S'(x)`.
pub(crate) fn smooth_step_deriv(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let f = |t: f64| (-1.0 / t).exp();
    let df = |t: f64| f(t) / (t * t);
    let (a, b) = (f(x), f(1.0 - x));
    (df(x) * b + a * df(1.0 - x)) / ((a + b) * (a + b))
}

impl SmoothCutoff {
    pub fn new(radius: f64) -> Self {
        Self { radius }
    }

    /// `(1 − φ²)^{1/2}`.
    pub fn complement(&self, r: f64) -> f64 {
        (0.5 * PI * smooth_step((2.0 * r - self.radius) / self.radius)).sin()
    }
}

impl RadialFn for SmoothCutoff {
    fn eval(&self, r: f64) -> f64 {
        let s = smooth_step((2.0 * r - self.radius) / self.radius);
        if s >= 1.0 { 0.0 } else { (0.5 * PI * s).cos() }
    }
}

/// Discretisation controls for [`trace_neg`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialSpec {
    pub dx: f64,
    /// `r_min = r_min_factor · h²`
    pub r_min_factor: f64,
    pub r_max_cap: f64,
    pub l_cap: usize,
    /// Combine the traces at `dx` and `dx/2` to cancel the `O(dx²)` error.
    pub richardson: bool,
    /// Compare Sturm counts against a once-refined grid and warn on change.
    pub check_refinement: bool,
}

impl Default for RadialSpec {
    fn default() -> Self {
        Self {
            dx: 0.005,
            r_min_factor: 1e-7,
            r_max_cap: 1e4,
            l_cap: 2000,
            richardson: false,
            check_refinement: true,
        }
    }
}

/// Per-channel negative eigenvalues and their weighted sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSum {
    /// `channels[ℓ]` holds the negative eigenvalues of channel `ℓ` of the
    /// shifted operator (`H + μ`, or `φ(H + μ)φ` when localised).
    pub channels: Vec<Vec<f64>>,
    /// `Σ_ℓ 2(2ℓ+1) Σ e`; the spin factor is included.
    pub trace: f64,
    /// First empty channel.
    pub l_max: usize,
    pub points: usize,
    pub dx: f64,
    pub r_max: f64,
    pub warnings: Vec<String>,
}

impl SpectralSum {
    fn empty(grid: &RadialGrid) -> Self {
        Self {
            channels: Vec::new(),
            trace: 0.0,
            l_max: 0,
            points: grid.len(),
            dx: grid.dx,
            r_max: grid.r_max(),
            warnings: Vec::new(),
        }
    }
}

fn channel_weight(l: usize) -> f64 {
    SPIN_FACTOR * (2 * l + 1) as f64
}

struct Problem<'a> {
    v: &'a dyn RadialFn,
    cutoff: Option<&'a dyn RadialFn>,
    h: f64,
    mu: f64,
}

impl Problem<'_> {
    fn channel(&self, l: usize, grid: &RadialGrid) -> ChannelOperator {
        let shifted = |r: f64| self.v.eval(r) - self.mu;
        ChannelOperator::new(l, self.h, grid, &shifted, self.cutoff)
    }
}

fn sum_channels(p: &Problem<'_>, grid: &RadialGrid, l_cap: usize, exec: Execution) -> Result<SpectralSum> {
    let mut out = SpectralSum::empty(grid);
    let chunk = if exec.is_parallel() { 8 } else { 1 };
    let mut l0 = 0;
    loop {
        if l0 > l_cap {
            return Err(Error::ChannelCap { cap: l_cap });
        }
        let ls: Vec<usize> = (l0..(l0 + chunk).min(l_cap + 1)).collect();
        let batch = exec.map(&ls, |&l| p.channel(l, grid).eigenvalues_below(0.0));
        for (l, eig) in ls.iter().zip(batch) {
            if eig.is_empty() {
                out.l_max = *l;
                out.trace = out
                    .channels
                    .iter()
                    .enumerate()
                    .map(|(l, e)| channel_weight(l) * e.iter().sum::<f64>())
                    .sum();
                return Ok(out);
            }
            out.channels.push(eig);
        }
        l0 += chunk;
    }
}

fn assemble(p: &Problem<'_>, grid: RadialGrid, spec: &RadialSpec, exec: Execution) -> Result<SpectralSum> {
    let mut sum = sum_channels(p, &grid, spec.l_cap, exec)?;
    let fine = if spec.richardson || spec.check_refinement {
        Some(grid.refined())
    } else {
        None
    };
    if spec.check_refinement {
        let fine = fine.as_ref().unwrap();
        let probe: Vec<usize> = if sum.l_max > 0 { vec![0, sum.l_max - 1] } else { vec![0] };
        for l in probe {
            let coarse = p.channel(l, &grid).count_below(0.0);
            let refined = p.channel(l, fine).count_below(0.0);
            if coarse != refined {
                let msg = format!("grid too coarse: channel {l} has {coarse} levels, {refined} after refinement");
                log::warn!("{msg}");
                sum.warnings.push(msg);
            }
        }
    }
    if spec.richardson {
        let fine_sum = sum_channels(p, fine.as_ref().unwrap(), spec.l_cap, exec)?;
        let trace = (4.0 * fine_sum.trace - sum.trace) / 3.0;
        let warnings = std::mem::take(&mut sum.warnings);
        sum = fine_sum;
        sum.trace = trace;
        sum.warnings = warnings;
    }
    Ok(sum)
}

/// Largest dyadic sample radius where `V − μ > h²/(4r²)`.
fn turning_radius(v: &dyn RadialFn, h: f64, mu: f64, cap: f64) -> Option<f64> {
    let mut best = None;
    let mut r = 1e-8 * h * h;
    while r <= cap {
        if v.eval(r) - mu > h * h / (4.0 * r * r) {
            best = Some(r);
        }
        r *= 1.25;
    }
    best
}

/// Outer radius of the box used by [`trace_neg`]: four times the last
/// classically allowed radius, capped at `spec.r_max_cap`.
pub fn trace_extent(v: &dyn RadialFn, h: f64, mu: f64, spec: &RadialSpec) -> f64 {
    let r_min = spec.r_min_factor * h * h;
    let r_max = match turning_radius(v, h, mu, spec.r_max_cap) {
        Some(rt) => (4.0 * rt).min(spec.r_max_cap),
        None => (1e3 * r_min).min(spec.r_max_cap),
    };
    r_max.max(2.0 * r_min)
}

/// `Tr[−h²Δ − V + μ]_-` for radial `V`, summed over channels until the first
/// empty one.
pub fn trace_neg(v: &dyn RadialFn, h: f64, mu: f64, spec: &RadialSpec, exec: Execution) -> Result<SpectralSum> {
    if !(h > 0.0) || !(mu >= 0.0) {
        return Err(Error::InvalidInput("need h > 0 and mu ≥ 0".into()));
    }
    let r_min = spec.r_min_factor * h * h;
    let grid = RadialGrid::log(r_min, trace_extent(v, h, mu, spec), spec.dx)?;
    let p = Problem {
        v,
        cutoff: None,
        h,
        mu,
    };
    assemble(&p, grid, spec, exec)
}

/// `Tr[φ(−h²Δ − V + μ)φ]_-` for a radial cutoff vanishing beyond `support`.
pub fn localized_trace_neg(
    v: &dyn RadialFn,
    phi: &dyn RadialFn,
    support: f64,
    h: f64,
    mu: f64,
    spec: &RadialSpec,
    exec: Execution,
) -> Result<SpectralSum> {
    if !(h > 0.0) || !(mu >= 0.0) || !(support > 0.0) {
        return Err(Error::InvalidInput("need h > 0, mu ≥ 0 and a positive support radius".into()));
    }
    let r_min = spec.r_min_factor * h * h;
    let grid = RadialGrid::log(r_min, support.max(2.0 * r_min), spec.dx)?;
    let p = Problem {
        v,
        cutoff: Some(phi),
        h,
        mu,
    };
    assemble(&p, grid, spec, exec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionFit {
    pub c3: f64,
    pub c2: f64,
    /// `max |fit − trace| / |trace|`
    pub residual: f64,
}

/// Least-squares fit `trace(h) ≈ c3 h⁻³ + c2 h⁻²`, with `c3` pinned when
/// `weyl_coeff` is given. Samples must be ordered by decreasing `h`.
pub fn fit_expansion(samples: &[(f64, f64)], weyl_coeff: Option<f64>) -> Result<ExpansionFit> {
    if samples.iter().any(|&(h, t)| !(h > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidInput("samples need h > 0 and finite traces".into()));
    }
    if samples.windows(2).any(|w| w[1].0 > w[0].0) {
        return Err(Error::InvalidInput("samples must be ordered by decreasing h".into()));
    }
    let mut distinct = 0;
    for (i, s) in samples.iter().enumerate() {
        if i == 0 || s.0 != samples[i - 1].0 {
            distinct += 1;
        }
    }
    let needed = if weyl_coeff.is_some() { 1 } else { 2 };
    if distinct < needed {
        return Err(Error::RankDeficient(format!(
            "{distinct} distinct h values cannot determine {needed} coefficients"
        )));
    }
    if distinct < 3 {
        return Err(Error::InvalidInput("at least 3 distinct h values are required".into()));
    }
    let (c3, c2) = match weyl_coeff {
        Some(c3) => {
            let num: f64 = samples.iter().map(|&(h, t)| (t - c3 * h.powi(-3)) * h.powi(-2)).sum();
            let den: f64 = samples.iter().map(|&(h, _)| h.powi(-4)).sum();
            (c3, num / den)
        }
        None => {
            // scale columns by h³ so the normal equations stay well conditioned
            let rows: Vec<(f64, f64, f64)> = samples.iter().map(|&(h, t)| (1.0, h, t * h.powi(3))).collect();
            let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for &(a, b, y) in &rows {
                s11 += a * a;
                s12 += a * b;
                s22 += b * b;
                b1 += a * y;
                b2 += b * y;
            }
            let det = s11 * s22 - s12 * s12;
            if det.abs() <= 1e-14 * s11 * s22 {
                return Err(Error::RankDeficient("design matrix is singular".into()));
            }
            ((s22 * b1 - s12 * b2) / det, (s11 * b2 - s12 * b1) / det)
        }
    };
    let residual = samples
        .iter()
        .map(|&(h, t)| ((c3 * h.powi(-3) + c2 * h.powi(-2) - t) / t).abs())
        .fold(0.0, f64::max);
    Ok(ExpansionFit { c3, c2, residual })
}
