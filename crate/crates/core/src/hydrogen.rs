//! Exact Coulomb spectral sums and the chemical-potential route to `2S(0)`.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{Route, ScottEstimate};
use crate::weyl::weyl_coulomb_mu;

/// Levels `e_n = −1/(4n²)` of `−Δ − 1/|x|` with spin-included degeneracy `2n²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoulombSpectrum {
    pub n_max: u64,
}

impl CoulombSpectrum {
    pub fn level(n: u64) -> f64 {
        -0.25 / (n as f64 * n as f64)
    }

    pub fn degeneracy(n: u64) -> u64 {
        2 * n * n
    }

    pub fn levels(&self) -> impl Iterator<Item = (f64, u64)> {
        (1..=self.n_max).map(|n| (Self::level(n), Self::degeneracy(n)))
    }
}

/// Number of shells strictly below `−μ`.
pub fn shells_below(mu: f64) -> u64 {
    let mut n = (0.5 / mu.sqrt()).floor() as u64;
    while n > 0 && CoulombSpectrum::level(n) + mu >= 0.0 {
        n -= 1;
    }
    while CoulombSpectrum::level(n + 1) + mu < 0.0 {
        n += 1;
    }
    n
}

/// `Tr[−Δ − 1/|x| + μ]_- = Σ_{e_n < −μ} 2n²(e_n + μ)`.
pub fn trace_neg_coulomb(mu: f64) -> Result<f64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidInput("mu must be positive and finite".into()));
    }
    let n = shells_below(mu) as f64;
    // Σ_{k≤n} (2μk² − 1/2)
    Ok(2.0 * mu * n * (n + 1.0) * (2.0 * n + 1.0) / 6.0 - 0.5 * n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuRow {
    pub mu: f64,
    pub trace: f64,
    pub weyl: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuLimit {
    pub rows: Vec<MuRow>,
    pub estimate: ScottEstimate,
}

/// `μ = 1/(4N²)` for each `N`.
pub fn lattice_schedule(ns: &[u64]) -> Vec<f64> {
    ns.iter().map(|&n| 0.25 / (n as f64 * n as f64)).collect()
}

/// `d(μ) = Tr[−Δ − 1/|x| + μ]_- − Weyl(μ)` along `schedule`, extrapolated to
/// `μ → 0` by a least-squares line in `√μ`.
pub fn scott_mu_limit(schedule: &[f64], exec: Execution) -> Result<MuLimit> {
    if schedule.len() < 3 {
        return Err(Error::InvalidInput("mu schedule needs at least 3 points".into()));
    }
    if schedule.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::InvalidInput("mu schedule must be positive".into()));
    }
    if schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("mu schedule must be strictly decreasing".into()));
    }
    let rows: Vec<MuRow> = exec
        .map(schedule, |&mu| -> Result<MuRow> {
            let trace = trace_neg_coulomb(mu)?;
            let weyl = weyl_coulomb_mu(mu, 1.0)?;
            Ok(MuRow {
                mu,
                trace,
                weyl,
                diff: trace - weyl,
            })
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.mu.sqrt()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.diff).collect();
    let (intercept, _) = line_fit(&xs, &ys);
    Ok(MuLimit {
        rows,
        estimate: ScottEstimate::new(f64::INFINITY, 0.0, f64::INFINITY, intercept, Route::MuLimit)?,
    })
}

fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// `z²·S(zκ)` for a Scott-value provider `s`.
pub fn scott_z_scaling(z: f64, kappa: f64, s: &dyn Fn(f64) -> f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::InvalidInput("z must be positive".into()));
    }
    Ok(z * z * s(z * kappa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SCOTT_S0;

    fn direct(mu: f64) -> f64 {
        CoulombSpectrum { n_max: 100_000 }
            .levels()
            .map(|(e, g)| g as f64 * (e + mu).min(0.0))
            .sum()
    }

    #[test]
    fn trace_examples() {
        assert!((trace_neg_coulomb(1.0 / 400.0).unwrap() + 3.075).abs() < 1e-12);
        assert_eq!(trace_neg_coulomb(0.25).unwrap(), 0.0);
        assert_eq!(trace_neg_coulomb(3.0).unwrap(), 0.0);
        assert!(trace_neg_coulomb(0.0).is_err());
        for n in [1u64, 2, 7, 50, 333] {
            let nf = n as f64;
            let mu = 0.25 / (nf * nf);
            let closed = -(nf / 3.0 - 0.25 - 1.0 / (12.0 * nf));
            assert!((trace_neg_coulomb(mu).unwrap() - closed).abs() < 1e-10 * nf);
            assert!((direct(mu) - closed).abs() < 1e-9 * nf);
        }
    }

    #[test]
    fn single_point_difference() {
        let mu = 0.25 / 100f64.powi(2);
        let d = trace_neg_coulomb(mu).unwrap() - weyl_coulomb_mu(mu, 1.0).unwrap();
        assert!((d - (0.25 + 1.0 / 1200.0)).abs() < 1e-12);
    }

    #[test]
    fn extrapolates_to_quarter() {
        let sched = lattice_schedule(&[50, 100, 200, 400]);
        let out = scott_mu_limit(&sched, Execution::Parallel).unwrap();
        assert!((out.estimate.value - 0.25).abs() < 1e-4, "{}", out.estimate.value);
        assert_eq!(out.estimate.route, Route::MuLimit);
        assert!(scott_mu_limit(&[0.01, 0.02, 0.001], Execution::Sequential).is_err());
        assert!(scott_mu_limit(&[0.01, 0.001], Execution::Sequential).is_err());
    }

    #[test]
    fn z_scaling() {
        let s = |_k: f64| SCOTT_S0;
        assert_eq!(scott_z_scaling(1.0, 0.0, &s).unwrap(), 0.125);
        assert_eq!(scott_z_scaling(0.5, 0.0, &s).unwrap(), 0.03125);
        assert_eq!(scott_z_scaling(2.0, 0.0, &s).unwrap(), 0.5);
    }

    proptest::proptest! {
        #[test]
        fn trace_matches_direct_and_is_monotone(mu in 1e-5f64..0.3, dmu in 0.0f64..0.05) {
            let a = trace_neg_coulomb(mu).unwrap();
            proptest::prop_assert!((a - direct(mu)).abs() < 1e-9 * (1.0 + a.abs()));
            proptest::prop_assert!(a <= trace_neg_coulomb(mu + dmu).unwrap() + 1e-12);
        }

        #[test]
        fn difference_stays_near_quarter(mu in 1e-7f64..0.0025) {
            let d = trace_neg_coulomb(mu).unwrap() - weyl_coulomb_mu(mu, 1.0).unwrap();
            proptest::prop_assert!((0.24..=0.26).contains(&d), "{}", d);
        }
    }
}
