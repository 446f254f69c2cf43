//! Magnetic Lieb–Thirring envelope
//! `−C·h⁻³∫[V]_+^{5/2} − C·(h⁻²∫B²)^{3/4}(∫[V]_+⁴)^{1/4} ≤ Tr[T_h(A) − V]_-`.

use crate::error::{Error, Result};
use crate::model::RadialFn;
use crate::weyl::radial_positive_moment;

/// The two terms of the right-hand side with `C = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LtTerms {
    /// `h⁻³∫[V − μ]_+^{5/2}`
    pub semiclassical: f64,
    /// `(h⁻²∫B²)^{3/4}(∫[V − μ]_+⁴)^{1/4}`
    pub magnetic: f64,
}

impl LtTerms {
    pub fn rhs(&self, c: f64) -> f64 {
        c * (self.semiclassical + self.magnetic)
    }
}

/// `field_energy` is `∫|B|²`.
pub fn lt_terms(v: &dyn RadialFn, mu: f64, field_energy: f64, h: f64) -> Result<LtTerms> {
    if !(h > 0.0) || !(field_energy >= 0.0) || !field_energy.is_finite() {
        return Err(Error::InvalidInput("need h > 0 and a finite field energy ∫B² ≥ 0".into()));
    }
    let m52 = radial_positive_moment(v, None, mu, 2.5)?;
    let magnetic = if field_energy == 0.0 {
        0.0
    } else {
        let m4 = radial_positive_moment(v, None, mu, 4.0)?;
        (field_energy / (h * h)).powf(0.75) * m4.powf(0.25)
    };
    Ok(LtTerms {
        semiclassical: m52 / h.powi(3),
        magnetic,
    })
}

/// `C·h⁻³∫[V − μ]_+^{5/2} + C·(h⁻²∫B²)^{3/4}(∫[V − μ]_+⁴)^{1/4}`.
pub fn magnetic_lt_rhs(v: &dyn RadialFn, mu: f64, field_energy: f64, h: f64, c: f64) -> Result<f64> {
    Ok(lt_terms(v, mu, field_energy, h)?.rhs(c))
}

/// Smallest `C` for which every `(trace, terms)` pair satisfies the bound.
pub fn fitted_constant(samples: &[(f64, LtTerms)]) -> f64 {
    samples
        .iter()
        .map(|(t, terms)| {
            let unit = terms.rhs(1.0);
            if unit > 0.0 { (-t).max(0.0) / unit } else { 0.0 }
        })
        .fold(0.0, f64::max)
}
