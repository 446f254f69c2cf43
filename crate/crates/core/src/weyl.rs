//! Phase-space (Weyl) integrals `2(2πh)⁻³∬ w(q)[p² − V(q) + μ]_- dp dq`.
//!
//! The momentum integral is done in closed form, `∫[p² − v]_- dp =
//! −(8π/15)[v]_+^{5/2}`, leaving a configuration-space quadrature.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::RadialFn;
use crate::quad::{adaptive, GaussLegendre};

/// `∫_{ℝ³}[p² − v]_- dp = −(8π/15)·max(v, 0)^{5/2}`.
pub fn momentum_reduce(v: f64) -> f64 {
    -8.0 * PI / 15.0 * v.max(0.0).powf(2.5)
}

fn prefactor(h: f64) -> f64 {
    2.0 * (2.0 * PI * h).powi(-3) * (-8.0 * PI / 15.0)
}

/// Radial integrand data for [`weyl_integral`].
pub struct WeylIntegrand<'a> {
    pub potential: &'a dyn RadialFn,
    pub weight: Option<&'a dyn RadialFn>,
    pub mu: f64,
    pub h: f64,
}

impl<'a> WeylIntegrand<'a> {
    pub fn new(potential: &'a dyn RadialFn, mu: f64, h: f64) -> Self {
        Self {
            potential,
            weight: None,
            mu,
            h,
        }
    }

    pub fn with_weight(mut self, weight: &'a dyn RadialFn) -> Self {
        self.weight = Some(weight);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return Err(Error::InvalidInput("h must be positive".into()));
        }
        if !(self.mu >= 0.0) {
            return Err(Error::InvalidInput("mu must be nonnegative".into()));
        }
        Ok(())
    }
}

const REL_TOL: f64 = 1e-12;

/// Outermost radius where `g` changes sign from positive to nonpositive,
/// `None` when `g ≤ 0` on every sample and `Some(∞)` when `g` is still
/// positive at the last dyadic sample.
fn turning_radius(g: &dyn Fn(f64) -> f64) -> Option<f64> {
    let ks: Vec<i32> = (-40..=60).collect();
    let last_pos = ks.iter().rev().find(|&&k| g(2f64.powi(k)) > 0.0)?;
    if *last_pos == 60 {
        return Some(f64::INFINITY);
    }
    let (mut lo, mut hi) = (2f64.powi(*last_pos), 2f64.powi(last_pos + 1));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Sum of dyadic panels walking away from the start; `Divergent` when the
/// panels stop decaying.
fn dyadic_sum(f: &dyn Fn(f64) -> f64, start: f64, end: f64, inward: bool) -> Result<f64> {
    let mut total = 0.0;
    let mut small = 0;
    let mut flat = 0;
    let mut prev = f64::INFINITY;
    let mut edge = start;
    loop {
        let (lo, hi) = if inward { (0.5 * edge, edge) } else { (edge, (2.0 * edge).min(end)) };
        let (panel, _) = adaptive(f, lo, hi, 0.0, REL_TOL);
        total += panel;
        if !inward && hi >= end {
            return Ok(total);
        }
        if panel.abs() <= 1e-17 * total.abs() || (panel == 0.0 && total == 0.0) {
            small += 1;
            if small >= 3 {
                return Ok(total);
            }
        } else {
            small = 0;
        }
        if panel != 0.0 && panel.abs() >= 0.99 * prev.abs() {
            flat += 1;
        } else {
            flat = 0;
        }
        let open = inward || end.is_infinite();
        if open && (flat >= 8 || edge > 1e150 || edge < 1e-280) {
            let place = if inward { "origin" } else { "infinity" };
            return Err(Error::Divergent(format!(
                "positive part is not integrable at {place}: dyadic panel at r = {edge:e} contributes {panel:e}"
            )));
        }
        prev = panel;
        edge = if inward { lo } else { hi };
    }
}

/// `∫₀^∞ r² w(r) [g(r)]_+^p dr` along a ray. The positive region is cut at
/// the turning radius; the inner part and an unbounded positive region are
/// summed in dyadic panels and flagged as divergent unless the panels decay.
pub(crate) fn ray_integral(g: &dyn Fn(f64) -> f64, w: &dyn Fn(f64) -> f64, p: f64) -> Result<f64> {
    let Some(rt) = turning_radius(g) else {
        return Ok(0.0);
    };
    let f = |r: f64| {
        let v = g(r);
        if v > 0.0 { r * r * w(r) * v.powf(p) } else { 0.0 }
    };
    let r1 = rt.min(1.0);
    let inner = dyadic_sum(&f, r1, 0.0, true)?;
    if rt <= 1.0 {
        return Ok(inner);
    }
    Ok(inner + dyadic_sum(&f, 1.0, rt, false)?)
}

/// `∫_{ℝ³} w(q)[V(q) − μ]_+^p dq` for radial `V` and `w`.
pub fn radial_positive_moment(v: &dyn RadialFn, w: Option<&dyn RadialFn>, mu: f64, p: f64) -> Result<f64> {
    let g = |r: f64| v.eval(r) - mu;
    let one = |_: f64| 1.0;
    let wf = |r: f64| w.map_or(1.0, |w| w.eval(r));
    let val = if w.is_some() { ray_integral(&g, &wf, p)? } else { ray_integral(&g, &one, p)? };
    Ok(4.0 * PI * val)
}

/// `2(2πh)⁻³ ∫ w(q)·(−8π/15)[V(q) − μ]_+^{5/2} dq` for radial inputs.
pub fn weyl_integral(integrand: &WeylIntegrand<'_>) -> Result<f64> {
    integrand.validate()?;
    let m = radial_positive_moment(integrand.potential, integrand.weight, integrand.mu, 2.5)?;
    Ok(prefactor(integrand.h) * m)
}

/// Generic version for non-radial `V`, `w`: spherical product quadrature
/// about `center` (Gauss–Legendre in cos θ, trapezoid in φ), each ray split
/// at its own turning point.
pub fn weyl_integral_3d(
    v: &(dyn Fn(&[f64; 3]) -> f64 + Sync),
    w: Option<&(dyn Fn(&[f64; 3]) -> f64 + Sync)>,
    mu: f64,
    h: f64,
    center: [f64; 3],
    angular: usize,
) -> Result<f64> {
    if !(h > 0.0) || !(mu >= 0.0) || angular < 2 {
        return Err(Error::InvalidInput("need h > 0, mu ≥ 0 and at least 2 angular nodes".into()));
    }
    let gl = GaussLegendre::new(angular);
    let nphi = 2 * angular;
    let mut total = 0.0;
    for (&ct, &wt) in gl.nodes.iter().zip(&gl.weights) {
        let st = (1.0 - ct * ct).sqrt();
        for j in 0..nphi {
            let ph = 2.0 * PI * (j as f64 + 0.5) / nphi as f64;
            let dir = [st * ph.cos(), st * ph.sin(), ct];
            let at = |r: f64| {
                [
                    center[0] + r * dir[0],
                    center[1] + r * dir[1],
                    center[2] + r * dir[2],
                ]
            };
            let g = |r: f64| v(&at(r)) - mu;
            let wf = |r: f64| w.map_or(1.0, |w| w(&at(r)));
            total += wt * (2.0 * PI / nphi as f64) * ray_integral(&g, &wf, 2.5)?;
        }
    }
    Ok(prefactor(h) * total)
}

/// Closed form of [`weyl_integral`] for `V = z/|q|`, `w = 1`, `h = 1`:
/// `−(z³/6) μ^{-1/2}` (from `B(1/2, 7/2) = 5π/16`).
pub fn weyl_coulomb_mu(mu: f64, z: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::InvalidInput("mu must be positive for the Coulomb Weyl term".into()));
    }
    if !(z > 0.0) {
        return Err(Error::InvalidInput("z must be positive".into()));
    }
    Ok(-z.powi(3) / (6.0 * mu.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Coulomb;

    #[test]
    fn momentum_reduction_examples() {
        assert_eq!(momentum_reduce(-3.0), 0.0);
        assert!((momentum_reduce(1.0) + 1.67552).abs() < 1e-5);
        // ∫_{|p|≤2} (p² − 4) dp in spherical shells
        let gl = GaussLegendre::new(8);
        let oracle = gl.integrate(0.0, 2.0, |p| 4.0 * PI * p * p * (p * p - 4.0));
        assert!((momentum_reduce(4.0) - oracle).abs() < 1e-12);
        assert!((momentum_reduce(4.0) + 53.6165).abs() < 1e-4);
    }

    #[test]
    fn coulomb_closed_form() {
        let v = Coulomb::new(1.0);
        for mu in [0.0025, 1e-2, 1e-3, 1e-4] {
            let num = weyl_integral(&WeylIntegrand::new(&v, mu, 1.0)).unwrap();
            let exact = weyl_coulomb_mu(mu, 1.0).unwrap();
            assert!((num / exact - 1.0).abs() < 1e-9, "{mu}: {num} {exact}");
        }
        assert!((weyl_coulomb_mu(0.0025, 1.0).unwrap() + 10.0 / 3.0).abs() < 1e-12);
        assert!((weyl_coulomb_mu(0.01, 1.0).unwrap() + 5.0 / 3.0).abs() < 1e-12);
        assert!(weyl_coulomb_mu(1e12, 1.0).unwrap().abs() < 1e-6);
        assert!(weyl_coulomb_mu(0.0, 1.0).is_err());
        let v3 = Coulomb::new(3.0);
        let num = weyl_integral(&WeylIntegrand::new(&v3, 0.01, 1.0)).unwrap();
        assert!((num / weyl_coulomb_mu(0.01, 3.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn nonpositive_potential_gives_zero() {
        let v = |r: f64| -1.0 / (1.0 + r);
        assert_eq!(weyl_integral(&WeylIntegrand::new(&v, 0.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn bare_coulomb_without_mu_is_divergent() {
        let v = Coulomb::new(1.0);
        assert!(matches!(
            weyl_integral(&WeylIntegrand::new(&v, 0.0, 1.0)),
            Err(Error::Divergent(_))
        ));
        // a compact weight makes it finite
        let w = |r: f64| if r < 10.0 { 1.0 } else { 0.0 };
        assert!(weyl_integral(&WeylIntegrand::new(&v, 0.0, 1.0).with_weight(&w)).is_ok());
    }

    #[test]
    fn origin_singularity_is_detected() {
        let v = Coulomb::new(1.0);
        // ∫[1/r − μ]_+^3 has a logarithmic divergence at 0, the power 2.9 does not
        assert!(matches!(radial_positive_moment(&v, None, 0.1, 3.0), Err(Error::Divergent(_))));
        let ok = radial_positive_moment(&v, None, 1.0, 2.5).unwrap();
        // 4π∫₀¹ r^{-1/2}(1 − r)^{5/2} dr = 4π·B(1/2, 7/2) = 5π²/4
        let exact = 1.25 * PI * PI;
        assert!((ok - exact).abs() < 1e-10 * exact, "{ok} {exact}");
    }

    #[test]
    fn h_scaling_is_exact() {
        let v = |r: f64| 2.0 * (-r).exp() / r;
        let base = weyl_integral(&WeylIntegrand::new(&v, 0.01, 1.0)).unwrap();
        for h in [0.5, 0.1, 1.0 / 7.0] {
            let val = weyl_integral(&WeylIntegrand::new(&v, 0.01, h)).unwrap();
            assert!((val - base * h.powi(-3)).abs() <= 1e-13 * val.abs());
        }
    }

    #[test]
    fn radial_and_generic_paths_agree() {
        let gauss = |x: &[f64; 3]| 2.0 * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp();
        let gauss_r = |r: f64| 2.0 * (-r * r).exp();
        let yuk = |x: &[f64; 3]| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            (-0.5 * r).exp() / r
        };
        let yuk_r = |r: f64| (-0.5 * r).exp() / r;
        for mu in [0.0, 0.5] {
            let radial = weyl_integral(&WeylIntegrand::new(&gauss_r, mu, 1.0)).unwrap();
            let off = weyl_integral_3d(&gauss, None, mu, 1.0, [0.3, -0.1, 0.2], 24).unwrap();
            assert!((radial - off).abs() < 1e-8 * radial.abs(), "{radial} {off}");
        }
        let radial = weyl_integral(&WeylIntegrand::new(&yuk_r, 0.01, 1.0)).unwrap();
        let gen = weyl_integral_3d(&yuk, None, 0.01, 1.0, [0.0; 3], 4).unwrap();
        assert!((radial - gen).abs() < 1e-10 * radial.abs());
    }

    proptest::proptest! {
        #[test]
        fn monotone_in_mu(mu1 in 1e-4f64..0.5, dmu in 0.0f64..0.5) {
            let v = Coulomb::new(1.0);
            let a = weyl_integral(&WeylIntegrand::new(&v, mu1, 1.0)).unwrap();
            let b = weyl_integral(&WeylIntegrand::new(&v, mu1 + dmu, 1.0)).unwrap();
            proptest::prop_assert!(a <= 0.0 && a <= b + 1e-12 * a.abs());
        }
    }
}
