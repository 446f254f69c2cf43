//! Azimuthal vector potentials `A = ρ g(ρ, z) e_φ = g·(−y, x, 0)`.
//!
//! For these fields `∇·A = 0`, `B_z = 2g + ρ∂_ρ g`, `B_ρ = −ρ∂_z g`, and
//! `|∇⊗A|² = g² + (g + ρ∂_ρ g)² + ρ²(∂_z g)²`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quad::GaussLegendre;
use crate::radial::{smooth_step, smooth_step_deriv};

/// `β(s) = exp(1 − 1/(1 − s²))` on `[0, 1)`, so `β(0) = 1`.
fn bump(s: f64) -> (f64, f64) {
    if s >= 1.0 {
        return (0.0, 0.0);
    }
    let q = 1.0 - s * s;
    let b = (1.0 - 1.0 / q).exp();
    (b, -2.0 * s / (q * q) * b)
}

/// One profile `g(ρ, z)` of the family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// `β(r/s)`
    Even { scale: f64 },
    /// `(z/s)·β(r/s)`
    Odd { scale: f64 },
    /// `1 − S((r − r₀ + w)/w)`: constant `1` on `B(r₀ − w)`, zero outside `B(r₀)`.
    Plateau { radius: f64, width: f64 },
}

impl Mode {
    pub fn support(&self) -> f64 {
        match *self {
            Mode::Even { scale } | Mode::Odd { scale } => scale,
            Mode::Plateau { radius, .. } => radius,
        }
    }

    /// Radii where the profile changes character; used as quadrature breaks.
    fn breaks(&self) -> Vec<f64> {
        match *self {
            Mode::Even { scale } | Mode::Odd { scale } => [0.25, 0.5, 0.7, 0.85, 0.95, 1.0].map(|f| f * scale).to_vec(),
            Mode::Plateau { radius, width } => [1.0, 0.75, 0.5, 0.25, 0.0].map(|f| radius - f * width).to_vec(),
        }
    }

    /// `(g, ∂_ρ g, ∂_z g)`.
    pub fn eval(&self, rho: f64, z: f64) -> [f64; 3] {
        let r = (rho * rho + z * z).sqrt();
        match *self {
            Mode::Even { scale } => {
                let (b, db) = bump(r / scale);
                if r == 0.0 {
                    return [b, 0.0, 0.0];
                }
                let d = db / (scale * r);
                [b, d * rho, d * z]
            }
            Mode::Odd { scale } => {
                let (b, db) = bump(r / scale);
                let zs = z / scale;
                if r == 0.0 {
                    return [0.0, 0.0, b / scale];
                }
                let d = zs * db / (scale * r);
                [zs * b, d * rho, b / scale + d * z]
            }
            Mode::Plateau { radius, width } => {
                let x = (r - radius + width) / width;
                let g = 1.0 - smooth_step(x);
                if r == 0.0 {
                    return [g, 0.0, 0.0];
                }
                let d = -smooth_step_deriv(x) / (width * r);
                [g, d * rho, d * z]
            }
        }
    }
}

/// A linear family `g = Σ θᵢ gᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFamily {
    pub modes: Vec<Mode>,
}

impl FieldFamily {
    /// Even and odd bumps at scales `R/4` and `R/8`; supported in `B(R/4)`.
    pub fn scott(r: f64) -> Self {
        let s = 0.25 * r;
        Self {
            modes: vec![
                Mode::Even { scale: s },
                Mode::Odd { scale: s },
                Mode::Even { scale: 0.5 * s },
                Mode::Odd { scale: 0.5 * s },
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn support(&self) -> f64 {
        self.modes.iter().map(Mode::support).fold(0.0, f64::max)
    }

    fn breaks(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.modes.iter().flat_map(Mode::breaks).collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Spherical product nodes `(ρ, z, weight)` for `r ∈ [r_lo, r_hi]`; the
    /// weight includes `2πr² sin θ`.
    pub(crate) fn nodes(&self, r_lo: f64, r_hi: f64, polar: usize) -> Vec<(f64, f64, f64)> {
        let mut edges = vec![r_lo];
        // dyadic refinement towards the origin plus the mode breaks
        let mut e = r_hi;
        while e > r_lo.max(1e-6 * r_hi) {
            edges.push(e);
            e *= 0.5;
        }
        edges.extend(self.breaks().into_iter().filter(|&b| b > r_lo && b < r_hi));
        edges.push(r_hi);
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * r_hi);
        let radial = GaussLegendre::new(16);
        let angular = GaussLegendre::new(polar);
        let mut out = Vec::new();
        for w in edges.windows(2) {
            for (r, wr) in radial.mapped(w[0], w[1]) {
                for (&c, &wc) in angular.nodes.iter().zip(&angular.weights) {
                    let s = (1.0 - c * c).sqrt();
                    out.push((r * s, r * c, 2.0 * PI * r * r * wr * wc));
                }
            }
        }
        out
    }

    /// Gram matrices of `∫|∇⊗A|²` and `∫|∇×A|²` over the shell `[r_lo, r_hi]`.
    pub fn energy_matrices(&self, r_lo: f64, r_hi: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.dim();
        let mut grad = DMatrix::zeros(n, n);
        let mut curl = DMatrix::zeros(n, n);
        if r_hi <= r_lo {
            return (grad, curl);
        }
        for (rho, z, w) in self.nodes(r_lo, r_hi, 48) {
            let vals: Vec<[f64; 3]> = self.modes.iter().map(|m| m.eval(rho, z)).collect();
            for i in 0..n {
                let [gi, ri, zi] = vals[i];
                for j in i..n {
                    let [gj, rj, zj] = vals[j];
                    let a = gi * gj + (gi + rho * ri) * (gj + rho * rj) + rho * rho * zi * zj;
                    let b = (2.0 * gi + rho * ri) * (2.0 * gj + rho * rj) + rho * rho * zi * zj;
                    grad[(i, j)] += w * a;
                    curl[(i, j)] += w * b;
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                grad[(i, j)] = grad[(j, i)];
                curl[(i, j)] = curl[(j, i)];
            }
        }
        (grad, curl)
    }
}

/// A member `θ` of a [`FieldFamily`].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldAnsatz {
    pub family: FieldFamily,
    pub theta: Vec<f64>,
}

impl FieldAnsatz {
    pub fn new(family: FieldFamily, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != family.dim() {
            return Err(Error::InvalidInput(format!(
                "family has {} modes but θ has {} entries",
                family.dim(),
                theta.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("θ must be finite".into()));
        }
        Ok(Self { family, theta })
    }

    pub fn zero(family: FieldFamily) -> Self {
        let n = family.dim();
        Self {
            family,
            theta: vec![0.0; n],
        }
    }

    pub fn support(&self) -> f64 {
        self.family.support()
    }

    pub fn is_zero(&self) -> bool {
        self.theta.iter().all(|&t| t == 0.0)
    }

    /// `(g, ∂_ρ g, ∂_z g)` of the combination.
    pub fn profile(&self, rho: f64, z: f64) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for (m, &t) in self.family.modes.iter().zip(&self.theta) {
            if t != 0.0 {
                let v = m.eval(rho, z);
                for k in 0..3 {
                    acc[k] += t * v[k];
                }
            }
        }
        acc
    }

    pub fn vector_potential(&self, x: &[f64; 3]) -> [f64; 3] {
        let rho = x[0].hypot(x[1]);
        let g = self.profile(rho, x[2])[0];
        [-g * x[1], g * x[0], 0.0]
    }

    pub fn magnetic_field(&self, x: &[f64; 3]) -> [f64; 3] {
        let rho = x[0].hypot(x[1]);
        let [g, gr, gz] = self.profile(rho, x[2]);
        [-gz * x[0], -gz * x[1], 2.0 * g + rho * gr]
    }

    fn quadratic(&self, m: &DMatrix<f64>) -> f64 {
        let t = DVector::from_column_slice(&self.theta);
        (t.transpose() * m * &t)[(0, 0)]
    }

    /// `∫_{r_lo ≤ |x| ≤ r_hi} |∇⊗A|²`.
    pub fn field_energy_in(&self, r_lo: f64, r_hi: f64) -> f64 {
        self.quadratic(&self.family.energy_matrices(r_lo, r_hi).0)
    }

    /// `∫|∇⊗A|²` over the support.
    pub fn field_energy(&self) -> f64 {
        self.field_energy_in(0.0, self.support())
    }

    /// `∫|B|²` over the support.
    pub fn curl_energy(&self) -> f64 {
        self.quadratic(&self.family.energy_matrices(0.0, self.support()).1)
    }
}

/// A vector field sampled on quadrature nodes of a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub points: Vec<[f64; 3]>,
    pub values: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SampledField {
    /// Samples `A` on a spherical product grid of the ball `B(radius)`.
    pub fn on_ball(f: &dyn Fn(&[f64; 3]) -> [f64; 3], radius: f64, n: usize) -> Self {
        let gl = GaussLegendre::new(n);
        let nphi = 2 * n;
        let dphi = 2.0 * PI / nphi as f64;
        let mut out = Self {
            points: Vec::new(),
            values: Vec::new(),
            weights: Vec::new(),
        };
        for (r, wr) in gl.mapped(0.0, radius) {
            for (&c, &wc) in gl.nodes.iter().zip(&gl.weights) {
                let s = (1.0 - c * c).sqrt();
                for k in 0..nphi {
                    let ph = (k as f64 + 0.5) * dphi;
                    let x = [r * s * ph.cos(), r * s * ph.sin(), r * c];
                    out.values.push(f(&x));
                    out.points.push(x);
                    out.weights.push(r * r * wr * wc * dphi);
                }
            }
        }
        out
    }

    /// Weighted ball average `⟨A⟩`.
    pub fn average(&self) -> [f64; 3] {
        let total: f64 = self.weights.iter().sum();
        let mut acc = [0.0; 3];
        for (v, &w) in self.values.iter().zip(&self.weights) {
            for k in 0..3 {
                acc[k] += w * v[k];
            }
        }
        acc.map(|a| a / total)
    }

    /// `∫|A − c|²` on the ball.
    pub fn l2_distance(&self, c: &[f64; 3]) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(v, &w)| w * ((v[0] - c[0]).powi(2) + (v[1] - c[1]).powi(2) + (v[2] - c[2]).powi(2)))
            .sum()
    }
}

/// `A − ⟨A⟩`, the constant shift minimising the `L²` norm on the ball.
pub fn gauge_center(field: &SampledField) -> SampledField {
    let avg = field.average();
    SampledField {
        points: field.points.clone(),
        values: field.values.iter().map(|v| [v[0] - avg[0], v[1] - avg[1], v[2] - avg[2]]).collect(),
        weights: field.weights.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ansatz(theta: Vec<f64>) -> FieldAnsatz {
        FieldAnsatz::new(FieldFamily::scott(20.0), theta).unwrap()
    }

    #[test]
    fn mode_derivatives_match_differences() {
        let modes = [
            Mode::Even { scale: 2.0 },
            Mode::Odd { scale: 1.5 },
            Mode::Plateau { radius: 1.0, width: 0.3 },
        ];
        let h = 1e-6;
        for m in modes {
            for (rho, z) in [(0.3, 0.4), (0.9, -0.2), (0.1, 0.75)] {
                let [_, gr, gz] = m.eval(rho, z);
                let fr = (m.eval(rho + h, z)[0] - m.eval(rho - h, z)[0]) / (2.0 * h);
                let fz = (m.eval(rho, z + h)[0] - m.eval(rho, z - h)[0]) / (2.0 * h);
                assert!((gr - fr).abs() < 1e-7 && (gz - fz).abs() < 1e-7, "{m:?}");
            }
        }
    }

    #[test]
    fn divergence_free_and_curl() {
        let a = ansatz(vec![0.3, -0.2, 0.5, 0.1]);
        let h = 1e-5;
        for x in [[1.0, 0.5, -0.7], [-2.0, 1.0, 1.5], [0.2, -0.1, 0.05]] {
            let d = |i: usize, j: usize| {
                let (mut p, mut m) = (x, x);
                p[j] += h;
                m[j] -= h;
                (a.vector_potential(&p)[i] - a.vector_potential(&m)[i]) / (2.0 * h)
            };
            let div = d(0, 0) + d(1, 1) + d(2, 2);
            assert!(div.abs() < 1e-8, "{div}");
            let curl = [d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)];
            let b = a.magnetic_field(&x);
            for k in 0..3 {
                assert!((curl[k] - b[k]).abs() < 1e-7, "{curl:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn support_is_inside_quarter_radius() {
        let a = ansatz(vec![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(a.support(), 5.0);
        assert_eq!(a.vector_potential(&[3.0, 4.0, 0.0001]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn field_energy_examples() {
        let zero = FieldAnsatz::zero(FieldFamily::scott(20.0));
        assert_eq!(zero.field_energy(), 0.0);
        let a = ansatz(vec![0.3, -0.2, 0.5, 0.1]);
        let b = ansatz(vec![0.6, -0.4, 1.0, 0.2]);
        assert!((b.field_energy() / a.field_energy() - 4.0).abs() < 1e-12);
        // gradient and curl energies agree for divergence-free, compactly supported A
        assert!((a.field_energy() / a.curl_energy() - 1.0).abs() < 1e-8, "{} {}", a.field_energy(), a.curl_energy());
    }

    #[test]
    fn constant_field_in_unit_ball() {
        // g = B₀/2 on B(1 − ε): A = ½B₀(−y, x, 0) there, |∇⊗A|² = B₀²/2
        let b0 = 1.7;
        let exact = 2.0 * PI * b0 * b0 / 3.0;
        let mut prev = f64::INFINITY;
        for eps in [0.2, 0.1, 0.05, 0.025] {
            let fam = FieldFamily {
                modes: vec![Mode::Plateau { radius: 1.0, width: eps }],
            };
            let a = FieldAnsatz::new(fam, vec![0.5 * b0]).unwrap();
            let inner = a.field_energy_in(0.0, 1.0 - eps);
            let target = exact * (1.0 - eps).powi(3);
            assert!((inner - target).abs() < 1e-10, "{inner} {target}");
            // the interior contribution converges to 2πB₀²/3 as the mollifier shrinks
            let gap = (inner - exact).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 0.08 * exact);
    }

    #[test]
    fn gauge_centering() {
        let c = [0.3, -1.2, 2.0];
        let constant = SampledField::on_ball(&|_| c, 2.0, 8);
        assert!(gauge_center(&constant).values.iter().all(|v| v.iter().all(|x| x.abs() < 1e-14)));

        let a = ansatz(vec![0.3, -0.2, 0.5, 0.1]);
        let f = |x: &[f64; 3]| a.vector_potential(x);
        let shifted = |x: &[f64; 3]| {
            let v = a.vector_potential(x);
            [v[0] + c[0], v[1] + c[1], v[2] + c[2]]
        };
        let base = gauge_center(&SampledField::on_ball(&f, 5.0, 12));
        let moved = gauge_center(&SampledField::on_ball(&shifted, 5.0, 12));
        for (p, q) in base.values.iter().zip(&moved.values) {
            for k in 0..3 {
                assert!((p[k] - q[k]).abs() < 1e-12);
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = SampledField::on_ball(&|_| [rng_value(), rng_value(), rng_value()], 1.0, 6);
        let centred = gauge_center(&noise);
        assert!(centred.average().iter().all(|x| x.abs() < 1e-12));
        // the average is the L²-optimal constant
        let best = noise.l2_distance(&noise.average());
        for _ in 0..20 {
            let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            assert!(best <= noise.l2_distance(&c));
        }
    }

    fn rng_value() -> f64 {
        use std::cell::Cell;
        thread_local!(static S: Cell<u64> = const { Cell::new(88172645463325252) });
        S.with(|s| {
            let mut x = s.get();
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            s.set(x);
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
    }
}
