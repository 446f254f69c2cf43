//! Randomised invariants across modules.

use proptest::prelude::*;

use semiclassics::cli::output::num;
use semiclassics::cli::Params;
use semiclassics::hydrogen::trace_neg_coulomb;
use semiclassics::model::Coulomb;
use semiclassics::multiscale::{partition_check, PartitionQuadrature, ScaleFunctions};
use semiclassics::pauli::{FieldAnsatz, FieldFamily};
use semiclassics::radial::fit_expansion;
use semiclassics::weyl::{weyl_integral, WeylIntegrand};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weyl_scales_as_inverse_h_cubed(mu in 1e-3f64..1.0, h in 0.05f64..2.0, shift in 0.0f64..0.5) {
        let v = Coulomb::shifted(1.0, shift);
        let one = weyl_integral(&WeylIntegrand::new(&v, mu, 1.0)).unwrap();
        let wh = weyl_integral(&WeylIntegrand::new(&v, mu, h)).unwrap();
        prop_assert!((wh * h.powi(3) - one).abs() <= 1e-12 * one.abs());
        prop_assert!(one < 0.0);
    }

    #[test]
    fn coulomb_trace_is_monotone_in_mu(a in 1e-4f64..0.2, b in 1e-4f64..0.2) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let tl = trace_neg_coulomb(lo).unwrap();
        let th = trace_neg_coulomb(hi).unwrap();
        prop_assert!(tl <= th + 1e-12);
        prop_assert!(th <= 0.0);
    }

    #[test]
    fn field_energy_is_quadratic(t in proptest::collection::vec(-1.0f64..1.0, 4), c in -3.0f64..3.0) {
        let fam = FieldFamily::scott(8.0);
        let a = FieldAnsatz::new(fam.clone(), t.clone()).unwrap();
        let b = FieldAnsatz::new(fam, t.iter().map(|x| c * x).collect()).unwrap();
        let e = a.field_energy();
        prop_assert!(e >= 0.0);
        prop_assert!((b.field_energy() - c * c * e).abs() <= 1e-10 * (1.0 + c * c * e));
        prop_assert!((a.curl_energy() - e).abs() <= 1e-6 * (1.0 + e));
    }

    #[test]
    fn fit_recovers_exact_coefficients(c3 in -1.0f64..-0.1, c2 in 0.0f64..1.0) {
        let samples: Vec<(f64, f64)> = [4.0f64, 6.0, 8.0, 10.0]
            .iter()
            .map(|&k| { let h = 1.0 / k; (h, c3 / h.powi(3) + c2 / (h * h)) })
            .collect();
        let free = fit_expansion(&samples, None).unwrap();
        prop_assert!((free.c2 - c2).abs() < 1e-8 && (free.c3 - c3).abs() < 1e-10);
        let pinned = fit_expansion(&samples, Some(c3)).unwrap();
        prop_assert!((pinned.c2 - c2).abs() < 1e-9);
    }

    #[test]
    fn csv_numbers_round_trip(x in proptest::num::f64::NORMAL) {
        prop_assert_eq!(num(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn flags_override_file(file_val in -1e3f64..1e3, flag_val in -1e3f64..1e3) {
        let mut p = Params::parse(&format!("kappa = {file_val}\n")).unwrap();
        let mut f = Params::default();
        f.set("kappa", flag_val.to_string());
        p.merge(&f);
        prop_assert_eq!(p.get("kappa", 0.0).unwrap(), flag_val);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn partition_sums_to_one(d in -3.0f64..3.0, c in -1.0f64..1.0, ph in 0.0f64..6.28) {
        let r = 10f64.powf(d);
        let s = (1.0 - c * c).sqrt();
        let x = [r * s * ph.cos(), r * s * ph.sin(), r * c];
        let v = partition_check(&x, &ScaleFunctions::atomic(1.0), &PartitionQuadrature::default()).unwrap();
        prop_assert!((v - 1.0).abs() < 1e-6, "{v}");
    }
}
