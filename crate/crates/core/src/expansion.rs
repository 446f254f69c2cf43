//! The two-term energy expansion `Z^{7/3}E^TF + 2Z²Σz_k²S(8πZ_kα²)` and the
//! mean-field energy it is compared against, evaluated in the semiclassical
//! frame `h = Z^{-1/3}`:
//!
//! ```text
//! E_mf = Z^{7/3}[h³(Tr[T_h(A) − V^TF]_- + κ⁻¹h⁻²∫|∇⊗A|²) − D(ϱ^TF)]
//! ```
//!
//! with `V^TF`, `ϱ^TF` the neutral atom at `z = 1` and `κ = 8πZα²`.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::NuclearConfig;
use crate::pauli::{minimize_over_family, FieldFamily, OptimizerBudget, PauliGrid, PauliSpec};
use crate::radial::{trace_extent, trace_neg, RadialSpec};
use crate::tf::{coulomb_self_energy, TfSolution};

/// How the infimum over `A` is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanFieldRoute {
    /// `A = 0`: the scalar spectral trace.
    ZeroField,
    /// Upper bound from a Nelder–Mead search over a finite field family.
    AnsatzMin,
}

impl MeanFieldRoute {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "spectral" | "zero-field" => Ok(Self::ZeroField),
            "ansatz-min" => Ok(Self::AnsatzMin),
            other => Err(Error::Unsupported(format!("mean-field route '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ZeroField => "spectral",
            Self::AnsatzMin => "ansatz-min",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldSettings {
    pub radial: RadialSpec,
    pub pauli: PauliSpec,
    pub budget: OptimizerBudget,
    /// The field family lives on `B(field_scale · h²)`, the Scott region.
    pub field_scale: f64,
}

impl Default for MeanFieldSettings {
    fn default() -> Self {
        Self {
            radial: RadialSpec {
                richardson: true,
                ..RadialSpec::default()
            },
            // the field only enters through a difference against the
            // ansatz's own A = 0 value, so a coarse basis is enough
            pauli: PauliSpec {
                radial: RadialSpec {
                    dx: 0.02,
                    ..RadialSpec::default()
                },
                max_positive: 16,
                ..PauliSpec::default()
            },
            budget: OptimizerBudget {
                iterations: 60,
                restarts: 1,
                ..OptimizerBudget::default()
            },
            field_scale: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanField {
    pub value: f64,
    pub h: f64,
    /// `Tr[T_h(A) − V^TF]_-` at the returned `A`.
    pub trace: f64,
    /// `∫|∇⊗A|²` at the returned `A`.
    pub field_energy: f64,
    pub theta: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport {
    pub z: f64,
    pub alpha: f64,
    pub kappa: f64,
    /// `Z^{7/3}E_atom`
    pub leading: f64,
    /// `2Z²Σz_k²S(8πZ_kα²)`
    pub scott: f64,
    pub mean_field: f64,
    /// `mean_field − (leading + scott)`
    pub residual: f64,
    pub residual_over_z2: f64,
}

fn require_atom(config: &NuclearConfig) -> Result<()> {
    if config.len() != 1 {
        return Err(Error::Unsupported(format!(
            "quantitative Thomas–Fermi energies are only available for a single nucleus, got {}",
            config.len()
        )));
    }
    Ok(())
}

/// `Z^{7/3}E_atom + 2Z²Σz_k²S(8πZ_kα²)`; `s` maps `κ_k` to `S(κ_k)`.
pub fn two_term_energy(config: &NuclearConfig, sol: &TfSolution, s: &dyn Fn(f64) -> Result<f64>) -> Result<f64> {
    let (leading, scott) = two_term_parts(config, sol, s)?;
    Ok(leading + scott)
}

fn two_term_parts(config: &NuclearConfig, sol: &TfSolution, s: &dyn Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    require_atom(config)?;
    let z = config.total_charge();
    let mut scott = 0.0;
    for (k, &zk) in config.relative_charges().iter().enumerate() {
        scott += zk * zk * s(config.kappa_k(k))?;
    }
    Ok((z.powf(7.0 / 3.0) * sol.e_atom(), 2.0 * z * z * scott))
}

/// Mean-field energy at `h = Z^{-1/3}`. On the ansatz route the `A = 0`
/// spectral trace is lowered by the gain the Pauli search finds over its own
/// `A = 0` value, so the result never exceeds the zero-field route.
pub fn mean_field_energy(
    config: &NuclearConfig,
    sol: &TfSolution,
    route: MeanFieldRoute,
    settings: &MeanFieldSettings,
    exec: Execution,
) -> Result<MeanField> {
    require_atom(config)?;
    let z = config.total_charge();
    let h = z.powf(-1.0 / 3.0);
    let v = |r: f64| sol.potential(1.0, r);
    let spectral = trace_neg(&v, h, 0.0, &settings.radial, exec)?;
    let d = coulomb_self_energy(&sol.radial_density(1.0));
    let mut out = MeanField {
        value: 0.0,
        h,
        trace: spectral.trace,
        field_energy: 0.0,
        theta: Vec::new(),
        warnings: spectral.warnings,
    };
    let kappa = config.kappa();
    let mut field_term = 0.0;
    if route == MeanFieldRoute::AnsatzMin && kappa > 0.0 {
        let family = FieldFamily::scott(settings.field_scale * h * h);
        let one = |_: f64| 1.0;
        let extent = trace_extent(&v, h, 0.0, &settings.radial);
        let grid = PauliGrid::new(&family, &v, h, &one, extent, &settings.pauli, exec)?;
        let gram = family.energy_matrices(0.0, family.support()).0;
        let energy = |t: &[f64]| {
            let mut e = 0.0;
            for i in 0..t.len() {
                for j in 0..t.len() {
                    e += t[i] * gram[(i, j)] * t[j];
                }
            }
            e
        };
        let coupling = 1.0 / (kappa * h * h);
        let f = |t: &[f64]| Ok(grid.trace(t, exec)?.value + coupling * energy(t));
        let min = minimize_over_family(family.dim(), &f, &settings.budget)?;
        if min.exhausted {
            out.warnings.push("optimizer budget exhausted".into());
        }
        out.field_energy = energy(&min.theta);
        field_term = coupling * out.field_energy;
        out.trace += min.value - min.zero_value - field_term;
        out.theta = min.theta;
    } else if route == MeanFieldRoute::AnsatzMin {
        log::info!("κ = 0 leaves only A = 0 admissible");
    }
    out.value = z.powf(7.0 / 3.0) * (h.powi(3) * (out.trace + field_term) - d);
    Ok(out)
}

/// Compare the mean-field energy with the two-term expansion at each `Z`.
pub fn expansion_sweep(
    charges: &[f64],
    alpha: f64,
    sol: &TfSolution,
    route: MeanFieldRoute,
    settings: &MeanFieldSettings,
    s: &(dyn Fn(f64) -> Result<f64> + Sync),
    exec: Execution,
) -> Result<Vec<ExpansionReport>> {
    exec.map(charges, |&z| {
        let config = NuclearConfig::atom(z, alpha)?;
        let (leading, scott) = two_term_parts(&config, sol, s)?;
        let mean_field = mean_field_energy(&config, sol, route, settings, exec)?.value;
        let residual = mean_field - leading - scott;
        Ok(ExpansionReport {
            z,
            alpha,
            kappa: config.kappa(),
            leading,
            scott,
            mean_field,
            residual,
            residual_over_z2: residual / (z * z),
        })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SCOTT_S0;
    use crate::tf::{solve_tf_atom, GridSpec};
    use crate::weyl::{weyl_integral, WeylIntegrand};
    use std::sync::OnceLock;

    fn sol() -> &'static TfSolution {
        static SOL: OnceLock<TfSolution> = OnceLock::new();
        SOL.get_or_init(|| solve_tf_atom(1e-10, GridSpec::default()).unwrap())
    }

    fn s0(_: f64) -> Result<f64> {
        Ok(SCOTT_S0)
    }

    #[test]
    fn two_term_arithmetic() {
        let e = sol().e_atom();
        let one = two_term_energy(&NuclearConfig::atom(1.0, 0.0).unwrap(), sol(), &s0).unwrap();
        assert!((one - (e + 0.25)).abs() < 1e-14);
        let ten = two_term_energy(&NuclearConfig::atom(10.0, 0.0).unwrap(), sol(), &s0).unwrap();
        assert!((ten - (10f64.powf(7.0 / 3.0) * e + 25.0)).abs() < 1e-10);
    }

    #[test]
    fn molecules_are_unsupported() {
        let cfg = NuclearConfig::new(vec![0.5, 0.5], vec![[0.0; 3], [1.0, 0.0, 0.0]], 2.0, 0.0).unwrap();
        assert!(matches!(two_term_energy(&cfg, sol(), &s0), Err(Error::Unsupported(_))));
        let settings = MeanFieldSettings::default();
        assert!(matches!(
            mean_field_energy(&cfg, sol(), MeanFieldRoute::ZeroField, &settings, Execution::Parallel),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(MeanFieldRoute::parse("mu-limit"), Err(Error::Unsupported(_))));
    }

    #[test]
    fn smaller_s_lowers_two_term() {
        let s = |k: f64| Ok(SCOTT_S0 - 0.1 * k);
        let a = two_term_energy(&NuclearConfig::atom(8.0, 0.0).unwrap(), sol(), &s).unwrap();
        let b = two_term_energy(&NuclearConfig::atom(8.0, 0.01).unwrap(), sol(), &s).unwrap();
        assert!(b <= a);
    }

    #[test]
    fn unit_charge_reduces_to_plain_trace() {
        let cfg = NuclearConfig::atom(1.0, 0.0).unwrap();
        let settings = MeanFieldSettings::default();
        let mf = mean_field_energy(&cfg, sol(), MeanFieldRoute::ZeroField, &settings, Execution::Parallel).unwrap();
        let v = |r: f64| sol().potential(1.0, r);
        let t = trace_neg(&v, 1.0, 0.0, &settings.radial, Execution::Parallel).unwrap().trace;
        let d = coulomb_self_energy(&sol().radial_density(1.0));
        assert_eq!(mf.h, 1.0);
        assert!((mf.value - (t - d)).abs() < 1e-14);
    }

    #[test]
    fn scaled_frame_matches_direct_computation() {
        // Tr[−Δ − V^TF(Z)] at h = 1 equals Z^{4/3}Tr[−h²Δ − V^TF(1)] at h = Z^{-1/3}
        let z = 8.0;
        let settings = MeanFieldSettings::default();
        let cfg = NuclearConfig::atom(z, 0.0).unwrap();
        let mf = mean_field_energy(&cfg, sol(), MeanFieldRoute::ZeroField, &settings, Execution::Parallel).unwrap();
        let vz = |r: f64| sol().potential(z, r);
        let direct = trace_neg(&vz, 1.0, 0.0, &settings.radial, Execution::Parallel).unwrap().trace;
        let d = coulomb_self_energy(&sol().radial_density(z));
        let rel = ((direct - d) - mf.value).abs() / mf.value.abs();
        assert!(rel < 1e-5, "direct {} scaled {} rel {rel}", direct - d, mf.value);
    }

    #[test]
    fn leading_term_dominates() {
        let v = |r: f64| sol().potential(1.0, r);
        let weyl = weyl_integral(&WeylIntegrand::new(&v, 0.0, 1.0)).unwrap();
        let spec = RadialSpec::default();
        for hinv in [8.0, 10.0] {
            let h: f64 = 1.0 / hinv;
            let t = trace_neg(&v, h, 0.0, &spec, Execution::Parallel).unwrap().trace;
            let w = weyl / h.powi(3);
            assert!((t - w).abs() / w.abs() < 0.15, "h = 1/{hinv}");
        }
    }

    #[test]
    fn magnetic_route_is_no_higher() {
        let settings = MeanFieldSettings {
            budget: OptimizerBudget {
                iterations: 20,
                restarts: 0,
                ..OptimizerBudget::default()
            },
            ..MeanFieldSettings::default()
        };
        let plain = NuclearConfig::atom(8.0, 0.0).unwrap();
        // κ = 8πZα² = 0.05
        let alpha = (0.05 / (8.0 * std::f64::consts::PI * 8.0)).sqrt();
        let mag = NuclearConfig::atom(8.0, alpha).unwrap();
        assert!((mag.kappa() - 0.05).abs() < 1e-12);
        let a = mean_field_energy(&plain, sol(), MeanFieldRoute::AnsatzMin, &settings, Execution::Parallel).unwrap();
        let b = mean_field_energy(&mag, sol(), MeanFieldRoute::AnsatzMin, &settings, Execution::Parallel).unwrap();
        assert!(b.value <= a.value);
        assert!(b.field_energy >= 0.0);
    }
}
