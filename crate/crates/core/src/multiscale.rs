//! Multiscale partition of unity.
//!
//! With a length scale `ℓ(u)` satisfying `‖∇ℓ‖ < 1` and a profile `ψ`
//! supported in the unit ball with `∫ψ² = 1`, the bumps
//!
//! ```text
//! ψ_u(x) = ψ((x − u)/ℓ(u)) · √J(x, u) · ℓ(u)^{3/2}
//! ```
//!
//! satisfy `∫ψ_u(x)² ℓ(u)⁻³ du = 1` for every `x`, where `J` is the Jacobian
//! of `u ↦ (x − u)/ℓ(u)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::jet::Jet3;
use crate::quad::{adaptive, GaussLegendre};

/// Slope of the default scale law, `ℓ = √(r₀² + d²)/100`.
pub const SCALE_SLOPE: f64 = 0.01;

/// `ℓ(u)` and `f(u)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleFunctions {
    /// `ℓ(u) = √(r₀² + d(u)²)/100`, `d` the distance to the nearest centre.
    Default { r0: f64, centers: Vec<[f64; 3]> },
    Constant(f64),
}

impl ScaleFunctions {
    pub fn atomic(r0: f64) -> Self {
        Self::Default {
            r0,
            centers: vec![[0.0; 3]],
        }
    }

    fn nearest(&self, u: &[f64; 3]) -> Option<([f64; 3], f64)> {
        match self {
            Self::Default { centers, .. } => centers
                .iter()
                .map(|c| (*c, norm(&sub(u, c))))
                .min_by(|a, b| a.1.total_cmp(&b.1)),
            Self::Constant(_) => None,
        }
    }

    pub fn distance(&self, u: &[f64; 3]) -> f64 {
        self.nearest(u).map_or(f64::INFINITY, |(_, d)| d)
    }

    pub fn ell(&self, u: &[f64; 3]) -> f64 {
        match self {
            Self::Default { r0, .. } => SCALE_SLOPE * (r0 * r0 + self.distance(u).powi(2)).sqrt(),
            Self::Constant(l) => *l,
        }
    }

    /// `∇ℓ(u)`.
    pub fn grad_ell(&self, u: &[f64; 3]) -> [f64; 3] {
        match self {
            Self::Default { .. } => {
                let (c, _) = self.nearest(u).expect("default law has centres");
                let l = self.ell(u);
                let k = SCALE_SLOPE * SCALE_SLOPE / l;
                let v = sub(u, &c);
                [k * v[0], k * v[1], k * v[2]]
            }
            Self::Constant(_) => [0.0; 3],
        }
    }

    /// `f(u) = min{d^{-1/2}, d^{-2}}`.
    pub fn f(&self, u: &[f64; 3]) -> f64 {
        let d = self.distance(u);
        d.powf(-0.5).min(d.powi(-2))
    }
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// `J(x, u) = |det D_u[(x − u)/ℓ(u)]| = ℓ⁻³·|1 + (x − u)·∇ℓ/ℓ|`.
pub fn jacobian(x: &[f64; 3], u: &[f64; 3], scale: &ScaleFunctions) -> f64 {
    let l = scale.ell(u);
    let g = scale.grad_ell(u);
    (1.0 + dot(&sub(x, u), &g) / l).abs() / l.powi(3)
}

/// Central-difference determinant of `D_u[(x − u)/ℓ(u)]`.
pub fn jacobian_fd(x: &[f64; 3], u: &[f64; 3], scale: &ScaleFunctions, step: f64) -> f64 {
    let map = |u: &[f64; 3]| {
        let l = scale.ell(u);
        let d = sub(x, u);
        [d[0] / l, d[1] / l, d[2] / l]
    };
    let mut m = Matrix3::zeros();
    for j in 0..3 {
        let mut up = *u;
        let mut dn = *u;
        up[j] += step;
        dn[j] -= step;
        let (a, b) = (map(&up), map(&dn));
        for i in 0..3 {
            m[(i, j)] = (a[i] - b[i]) / (2.0 * step);
        }
    }
    m.determinant().abs()
}

fn bump(s2: f64) -> f64 {
    if s2 >= 1.0 { 0.0 } else { (-1.0 / (1.0 - s2)).exp() }
}

/// `N² = 1/∫_{B(1)} e^{-2/(1−|y|²)} dy`.
fn profile_norm() -> f64 {
    static N: OnceLock<f64> = OnceLock::new();
    *N.get_or_init(|| {
        let (v, _) = adaptive(|s: f64| 4.0 * PI * s * s * bump(s * s).powi(2), 0.0, 1.0, 1e-18, 1e-14);
        1.0 / v.sqrt()
    })
}

/// Normalised exponential bump `ψ(y) = N·exp(−1/(1 − |y|²))`.
pub fn profile(y: &[f64; 3]) -> f64 {
    profile_norm() * bump(dot(y, y))
}

/// `ψ_u` for a fixed centre.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedBump {
    pub center: [f64; 3],
    ell: f64,
    grad: [f64; 3],
}

impl LocalizedBump {
    pub fn new(center: [f64; 3], scale: &ScaleFunctions) -> Self {
        Self {
            center,
            ell: scale.ell(&center),
            grad: scale.grad_ell(&center),
        }
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// `ψ_u(x)`; equals `ψ(y)·√(1 + ∇ℓ·y)` with `y = (x − u)/ℓ(u)`.
    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        let d = sub(x, &self.center);
        if dot(&d, &d) >= self.ell * self.ell {
            return 0.0;
        }
        let y = d.map(|c| c / self.ell);
        profile(&y) * (1.0 + dot(&self.grad, &y)).sqrt()
    }

    /// Taylor jet of `t ↦ ψ_u(x + t e)` at `t = 0`.
    pub fn jet(&self, x: &[f64; 3], e: &[f64; 3]) -> Jet3 {
        let d = sub(x, &self.center);
        if dot(&d, &d) >= self.ell * self.ell {
            return Jet3::constant(0.0);
        }
        let t = Jet3::variable(0.0);
        let y: Vec<Jet3> = (0..3)
            .map(|i| (Jet3::constant(d[i]) + t.scale(e[i])).scale(1.0 / self.ell))
            .collect();
        let s2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        let core = (-(Jet3::constant(1.0) - s2).recip()).exp().scale(profile_norm());
        let lin = Jet3::constant(1.0) + y[0].scale(self.grad[0]) + y[1].scale(self.grad[1]) + y[2].scale(self.grad[2]);
        core * lin.sqrt()
    }

    /// `∇ψ_u(x)`.
    pub fn gradient(&self, x: &[f64; 3]) -> [f64; 3] {
        let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        axes.map(|e| self.jet(x, &e).derivative(1))
    }
}

/// `V(x) + C h² |∇ψ_u(x)|²`.
pub fn correction_potential(v: &dyn Fn(&[f64; 3]) -> f64, bump: &LocalizedBump, h: f64, c: f64, x: &[f64; 3]) -> f64 {
    let g = bump.gradient(x);
    v(x) + c * h * h * dot(&g, &g)
}

/// Product quadrature for [`partition_check`]: Gauss–Legendre in the radial
/// distance and in `cos θ`, trapezoid in `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionQuadrature {
    pub radial: usize,
    pub polar: usize,
    pub azimuthal: usize,
}

impl Default for PartitionQuadrature {
    fn default() -> Self {
        Self {
            radial: 64,
            polar: 24,
            azimuthal: 24,
        }
    }
}

/// Support radius along `x + ρω`: the root of `ρ = ℓ(x + ρω)`.
fn support_extent(x: &[f64; 3], w: &[f64; 3], scale: &ScaleFunctions) -> Result<f64> {
    let g = |rho: f64| rho - scale.ell(&[x[0] + rho * w[0], x[1] + rho * w[1], x[2] + rho * w[2]]);
    let mut hi = scale.ell(x).max(f64::MIN_POSITIVE);
    let mut tries = 0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 200 || !hi.is_finite() {
            return Err(Error::Coverage(format!("no support boundary along direction {w:?} from {x:?}")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `∫ψ_u(x)² ℓ(u)⁻³ du` by spherical quadrature about `x`, each ray cut at
/// its own support boundary.
pub fn partition_check(x: &[f64; 3], scale: &ScaleFunctions, quad: &PartitionQuadrature) -> Result<f64> {
    if quad.radial < 2 || quad.polar < 2 || quad.azimuthal < 1 {
        return Err(Error::InvalidInput("partition quadrature is too coarse".into()));
    }
    let radial = GaussLegendre::new(quad.radial);
    let polar = GaussLegendre::new(quad.polar);
    let dphi = 2.0 * PI / quad.azimuthal as f64;
    let mut total = 0.0;
    for (&c, &wc) in polar.nodes.iter().zip(&polar.weights) {
        let s = (1.0 - c * c).sqrt();
        for k in 0..quad.azimuthal {
            let ph = (k as f64 + 0.5) * dphi;
            let w = [s * ph.cos(), s * ph.sin(), c];
            let rho_max = support_extent(x, &w, scale)?;
            let ray = radial.integrate(0.0, rho_max, |rho| {
                let u = [x[0] + rho * w[0], x[1] + rho * w[1], x[2] + rho * w[2]];
                let b = LocalizedBump::new(u, scale);
                let l = b.ell();
                rho * rho * b.eval(x).powi(2) / (l * l * l)
            });
            total += wc * dphi * ray;
        }
    }
    Ok(total)
}

/// Points with log-uniform distance to the origin in `[d_min, d_max]` and
/// uniformly random directions.
pub fn sample_cloud(n: usize, d_min: f64, d_max: f64, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let d = d_min * (d_max / d_min).powf(rng.random::<f64>());
            let c: f64 = rng.random_range(-1.0..1.0);
            let ph: f64 = rng.random_range(0.0..2.0 * PI);
            let s = (1.0 - c * c).sqrt();
            [d * s * ph.cos(), d * s * ph.sin(), d * c]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    pub order: usize,
    /// `max |∂ⁿψ_u|·ℓ(u)ⁿ` over the samples.
    pub ratio: f64,
    pub samples: usize,
}

/// Samples directional derivatives of order `n ≤ 3` of `ψ_u` on its support
/// and returns the scaled maximum `max|∂ⁿψ_u|·ℓ(u)ⁿ`.
pub fn derivative_bound_check(u: &[f64; 3], order: usize, scale: &ScaleFunctions, samples: usize, seed: u64) -> Result<DerivativeReport> {
    if order > 3 {
        return Err(Error::InvalidInput("derivative order must be at most 3".into()));
    }
    let b = LocalizedBump::new(*u, scale);
    let l = b.ell();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut best = 0.0f64;
    for _ in 0..samples {
        // uniform in the unit ball, scaled to the support
        let y = loop {
            let y = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            if dot(&y, &y) < 1.0 {
                break y;
            }
        };
        let x = [u[0] + l * y[0], u[1] + l * y[1], u[2] + l * y[2]];
        for e in &axes {
            best = best.max(b.jet(&x, e).derivative(order).abs());
        }
    }
    Ok(DerivativeReport {
        order,
        ratio: best * l.powi(order as i32),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_is_normalised() {
        let gl = GaussLegendre::new(200);
        let v = gl.integrate(0.0, 1.0, |s| 4.0 * PI * s * s * profile(&[s, 0.0, 0.0]).powi(2));
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn jacobian_examples() {
        let c = ScaleFunctions::Constant(0.3);
        assert_eq!(jacobian(&[1.0, 2.0, 3.0], &[0.5, 0.0, 0.1], &c), 0.3f64.powi(-3));
        let d = ScaleFunctions::atomic(1.0);
        let u = [0.4, -2.0, 7.0];
        assert_eq!(jacobian(&u, &u, &d), d.ell(&u).powi(-3));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let d = ScaleFunctions::atomic(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for u in sample_cloud(50, 1e-3, 1e3, 11) {
            let l = d.ell(&u);
            let y: [f64; 3] = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
            let x = [u[0] + l * y[0], u[1] + l * y[1], u[2] + l * y[2]];
            let exact = jacobian(&x, &u, &d);
            let fd = jacobian_fd(&x, &u, &d, 1e-4 * l.max(1e-3));
            assert!((fd / exact - 1.0).abs() < 1e-6, "{u:?}: {fd} vs {exact}");
        }
    }

    #[test]
    fn gradient_of_scale_is_small() {
        let d = ScaleFunctions::atomic(0.5);
        for u in sample_cloud(200, 1e-4, 1e4, 5) {
            let g = d.grad_ell(&u);
            assert!(norm(&g) <= SCALE_SLOPE);
        }
    }

    #[test]
    fn support_is_contained() {
        let d = ScaleFunctions::atomic(1.0);
        let b = LocalizedBump::new([3.0, 0.0, 0.0], &d);
        let l = b.ell();
        assert_eq!(b.eval(&[3.0 + l * 1.0000001, 0.0, 0.0]), 0.0);
        assert!(b.eval(&[3.0 + 0.5 * l, 0.0, 0.0]) > 0.0);
    }

    #[test]
    fn partition_constant_scale() {
        let c = ScaleFunctions::Constant(0.7);
        let v = partition_check(&[1.0, -2.0, 0.5], &c, &PartitionQuadrature::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn partition_default_scale() {
        let d = ScaleFunctions::atomic(1.0);
        let q = PartitionQuadrature::default();
        for x in [[0.0; 3], [1e3, 0.0, 0.0], [0.0, 0.3, -0.2]] {
            let v = partition_check(&x, &d, &q).unwrap();
            assert!((v - 1.0).abs() < 1e-6, "{x:?}: {v}");
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let d = ScaleFunctions::atomic(1.0);
        let b = LocalizedBump::new([0.3, 0.2, -0.1], &d);
        let l = b.ell();
        let x = [0.3 + 0.3 * l, 0.2 - 0.2 * l, -0.1 + 0.1 * l];
        let e = [0.6, 0.0, 0.8];
        let j = b.jet(&x, &e);
        let f = |t: f64| b.eval(&[x[0] + t * e[0], x[1] + t * e[1], x[2] + t * e[2]]);
        let h = 1e-3 * l;
        let d1 = (f(h) - f(-h)) / (2.0 * h);
        let d2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        assert!((j.derivative(0) - f(0.0)).abs() < 1e-14);
        assert!((j.derivative(1) / d1 - 1.0).abs() < 1e-5);
        assert!((j.derivative(2) / d2 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn derivative_bounds_are_uniform() {
        let c = ScaleFunctions::Constant(0.2);
        for n in 0..=3 {
            let a = derivative_bound_check(&[0.0; 3], n, &c, 300, 1).unwrap();
            let b = derivative_bound_check(&[5.0, 1.0, 0.0], n, &c, 300, 1).unwrap();
            assert!((a.ratio / b.ratio - 1.0).abs() < 1e-12, "{} {}", a.ratio, b.ratio);
        }
        let d = ScaleFunctions::atomic(1.0);
        for n in 0..=3 {
            let near = derivative_bound_check(&[1e-3, 0.0, 0.0], n, &d, 400, 2).unwrap();
            let far = derivative_bound_check(&[0.0, 1e3, 0.0], n, &d, 400, 2).unwrap();
            assert!(near.ratio.is_finite() && near.ratio > 0.0);
            let q = near.ratio / far.ratio;
            assert!((0.5..2.0).contains(&q), "n={n}: {} {}", near.ratio, far.ratio);
        }
        assert!(derivative_bound_check(&[0.0; 3], 4, &d, 1, 0).is_err());
    }

    #[test]
    fn correction_potential_adds_gradient_energy() {
        let d = ScaleFunctions::atomic(1.0);
        let b = LocalizedBump::new([0.0; 3], &d);
        let v = |_: &[f64; 3]| -1.0;
        let x = [0.3 * b.ell(), 0.0, 0.0];
        let g = b.gradient(&x);
        let w = correction_potential(&v, &b, 0.5, 2.0, &x);
        assert!((w - (-1.0 + 0.5 * dot(&g, &g))).abs() < 1e-14);
        assert_eq!(correction_potential(&v, &b, 0.5, 2.0, &[1e3, 0.0, 0.0]), -1.0);
    }
}
