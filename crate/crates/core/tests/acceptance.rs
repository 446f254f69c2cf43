//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line and then
//! asserts the same condition.

use std::time::{Duration, Instant};

use semiclassics::exec::Execution;
use semiclassics::expansion::{expansion_sweep, MeanFieldRoute, MeanFieldSettings};
use semiclassics::hydrogen::{lattice_schedule, scott_mu_limit};
use semiclassics::model::{Coulomb, RadialFn, SCOTT_S0};
use semiclassics::multiscale::{jacobian, jacobian_fd, partition_check, sample_cloud, PartitionQuadrature, ScaleFunctions};
use semiclassics::pauli::{
    minimize_scott, pauli_trace_neg, scott_functional, FieldAnsatz, FieldFamily, OptimizerBudget, PauliSpec,
    ScottProblem,
};
use semiclassics::radial::{
    fit_expansion, localized_trace_neg, trace_neg, ChannelOperator, RadialGrid, RadialSpec, SmoothCutoff,
};
use semiclassics::tf::{solve_tf_atom, tf_energy_consistency, GridSpec};
use semiclassics::weyl::{weyl_coulomb_mu, weyl_integral, WeylIntegrand};

fn verdict(n: u32, name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n} {tag}: {name} ({:.2} s) {detail}", elapsed.as_secs_f64());
    assert!(pass, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_1_mu_route_scott_constant() {
    let t = Instant::now();
    let out = scott_mu_limit(&lattice_schedule(&[50, 100, 200, 400]), Execution::Parallel).unwrap();
    let el = t.elapsed();
    let v = out.estimate.value;
    let ok = (v - 0.25).abs() < 1e-3 && el < Duration::from_secs(1);
    verdict(1, "mu-route 2S(0)", ok, el, &format!("2S(0) = {v:.6}"));
}

#[test]
fn criterion_2_weyl_coulomb_closed_form() {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for mu in [1e-2, 1e-3, 1e-4] {
        let w = weyl_integral(&WeylIntegrand::new(&Coulomb::new(1.0), mu, 1.0)).unwrap();
        let exact = -1.0 / (6.0 * mu.sqrt());
        assert!((weyl_coulomb_mu(mu, 1.0).unwrap() - exact).abs() < 1e-12 * exact.abs());
        worst = worst.max(((w - exact) / exact).abs());
    }
    let el = t.elapsed();
    let ok = worst < 1e-6 && el < Duration::from_secs(1);
    verdict(2, "Weyl-Coulomb closed form", ok, el, &format!("max relative error {worst:.3e}"));
}

#[test]
fn criterion_3_thomas_fermi_self_consistency() {
    let t = Instant::now();
    let sol = solve_tf_atom(1e-10, GridSpec::default()).unwrap();
    let residual = sol.tf_residual();
    let e = tf_energy_consistency(&sol).unwrap();
    let mass = sol.mass(1.0);
    let el = t.elapsed();
    let ok = residual < 1e-8
        && e.virial < 1e-4
        && e.relative_gap < 1e-4
        && (mass - 1.0).abs() < 1e-6
        && el < Duration::from_secs(10);
    verdict(
        3,
        "Thomas-Fermi self-consistency",
        ok,
        el,
        &format!(
            "residual {residual:.2e}, virial {:.2e}, energy gap {:.2e}, mass {mass:.9}",
            e.virial, e.relative_gap
        ),
    );
}

#[test]
fn criterion_4_radial_eigensolver() {
    let t = Instant::now();
    let grid = RadialGrid::log(1e-7, 600.0, 0.005).unwrap();
    let mut worst: f64 = 0.0;
    for l in 0..=4usize {
        let op = ChannelOperator::new(l, 1.0, &grid, &Coulomb::new(1.0), None);
        let eig = op.eigenvalues_below(0.0);
        for n in (l + 1)..=5 {
            let exact = -0.25 / (n * n) as f64;
            let got = eig[n - l - 1];
            worst = worst.max((got - exact).abs());
        }
    }
    let tr = trace_neg(&Coulomb::new(1.0), 1.0, 1.0 / 400.0, &RadialSpec::default(), Execution::Parallel)
        .unwrap()
        .trace;
    let el = t.elapsed();
    let ok = worst < 1e-5 && (tr + 3.075).abs() < 2e-3 && el < Duration::from_secs(30);
    verdict(
        4,
        "radial eigensolver",
        ok,
        el,
        &format!("max level error {worst:.2e}, trace(1/r, 1/400) = {tr:.5}"),
    );
}

#[test]
fn criterion_5_finite_radius_scott() {
    let t = Instant::now();
    let v = Coulomb::new(1.0);
    let mut diffs = Vec::new();
    for r in [20.0, 40.0] {
        let phi = SmoothCutoff::new(r);
        let s = localized_trace_neg(&v, &phi, r, 1.0, 0.0, &RadialSpec::default(), Execution::Parallel).unwrap();
        let w2 = |x: f64| phi.eval(x).powi(2);
        let w = weyl_integral(&WeylIntegrand::new(&v, 0.0, 1.0).with_weight(&w2)).unwrap();
        diffs.push(s.trace - w);
    }
    let el = t.elapsed();
    let bracket = diffs.iter().all(|d| (0.22..=0.27).contains(d));
    let toward = (diffs[1] - 0.25).abs() < (diffs[0] - 0.25).abs();
    let ok = bracket && toward && el < Duration::from_secs(300);
    verdict(
        5,
        "finite-R Scott via cutoff",
        ok,
        el,
        &format!("R = 20: {:.4}, R = 40: {:.4}, moving toward 0.25: {toward}", diffs[0], diffs[1]),
    );
}

#[test]
fn criterion_6_spectral_fit() {
    let t = Instant::now();
    let sol = solve_tf_atom(1e-10, GridSpec::default()).unwrap();
    let v = |r: f64| sol.potential(1.0, r);
    let c3 = weyl_integral(&WeylIntegrand::new(&v, 0.0, 1.0)).unwrap();
    let spec = RadialSpec {
        richardson: true,
        ..RadialSpec::default()
    };
    let hs: Vec<f64> = [8.0, 10.0, 12.0, 16.0, 20.0].iter().map(|k| 1.0 / k).collect();
    let samples: Vec<(f64, f64)> = hs
        .iter()
        .map(|&h| (h, trace_neg(&v, h, 0.0, &spec, Execution::Parallel).unwrap().trace))
        .collect();
    let fit = fit_expansion(&samples, Some(c3)).unwrap();
    let el = t.elapsed();
    let ok = (fit.c2 - 0.25).abs() < 0.15 * 0.25 && el < Duration::from_secs(900);
    verdict(6, "spectral-fit Scott coefficient", ok, el, &format!("c2 = {:.5}", fit.c2));
}

#[test]
fn criterion_7_magnetic_properties() {
    let t = Instant::now();
    let r = 20.0;
    let family = FieldFamily::scott(r);
    let phi = SmoothCutoff::new(r);
    let v = Coulomb::new(1.0);

    // (a) σ·B reduction at A = 0
    let pauli = pauli_trace_neg(&FieldAnsatz::zero(family.clone()), &v, 1.0, &phi, r, &PauliSpec::default(), Execution::Parallel)
        .unwrap()
        .value;
    let scalar = localized_trace_neg(&v, &phi, r, 1.0, 0.0, &RadialSpec::default(), Execution::Parallel)
        .unwrap()
        .trace;
    let rel_a = ((pauli - scalar) / scalar).abs();
    let ok_a = rel_a < 0.01;

    // (b) exact monotonicity in κ at fixed θ
    let ansatz = FieldAnsatz::new(family.clone(), vec![0.05, -0.02, 0.03, 0.01]).unwrap();
    let kappas: Vec<f64> = (1..=10).map(|k| 0.01 * k as f64).collect();
    let values: Vec<f64> = kappas
        .iter()
        .map(|&k| scott_functional(&ansatz, r, k, 1.0, 1.0).unwrap())
        .collect();
    let ok_b = values.windows(2).all(|w| w[1] <= w[0]);

    // (c) minimiser never above A = 0, and nonincreasing within seed noise
    let problem = ScottProblem::new(r, family, 1.0, &PauliSpec::default(), Execution::Parallel).unwrap();
    let grid = [0.02, 0.05, 0.1];
    let mut below_zero = true;
    let mut bands = Vec::new();
    for &k in &grid {
        let mut vals = Vec::new();
        for seed in 1..=3 {
            let budget = OptimizerBudget {
                seed,
                ..OptimizerBudget::default()
            };
            let out = minimize_scott(k, 1.0, &problem, &budget).unwrap();
            below_zero &= out.estimate.value <= out.zero_value;
            vals.push(out.estimate.value);
        }
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        bands.push((lo, hi));
    }
    let ok_c = below_zero && bands.windows(2).all(|w| w[1].0 <= w[0].1 + 1e-12);
    let el = t.elapsed();
    let ok = ok_a && ok_b && ok_c && el < Duration::from_secs(1800);
    verdict(
        7,
        "magnetic sector properties",
        ok,
        el,
        &format!(
            "(a) rel {rel_a:.2e} {ok_a}, (b) {ok_b}, (c) {ok_c} bands {:?}",
            bands.iter().map(|b| (format!("{:.6}", b.0), format!("{:.6}", b.1))).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_8_partition_of_unity() {
    let t = Instant::now();
    let scale = ScaleFunctions::atomic(1.0);
    let quad = PartitionQuadrature::default();
    let cloud = sample_cloud(100, 1e-3, 1e3, 2024);
    let values = Execution::Parallel.map(&cloud, |x| partition_check(x, &scale, &quad).unwrap());
    let worst = values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let mut jac: f64 = 0.0;
    for (i, u) in sample_cloud(100, 1e-3, 1e3, 99).iter().enumerate() {
        let l = scale.ell(u);
        let y = [0.3 * (i as f64).sin(), 0.3 * (i as f64).cos(), 0.2];
        let x = [u[0] + l * y[0], u[1] + l * y[1], u[2] + l * y[2]];
        let exact = jacobian(&x, u, &scale);
        let fd = jacobian_fd(&x, u, &scale, 1e-4 * l.max(1e-3));
        jac = jac.max((fd / exact - 1.0).abs());
    }
    let el = t.elapsed();
    let ok = worst < 1e-6 && jac < 1e-6 && el < Duration::from_secs(60);
    verdict(
        8,
        "partition of unity",
        ok,
        el,
        &format!("max |Σ − 1| {worst:.2e}, Jacobian relative error {jac:.2e}"),
    );
}

#[test]
fn criterion_9_two_term_expansion_trend() {
    let t = Instant::now();
    let sol = solve_tf_atom(1e-10, GridSpec::default()).unwrap();
    let s = |_: f64| Ok(SCOTT_S0);
    let reports = expansion_sweep(
        &[8.0, 27.0, 64.0, 125.0],
        0.0,
        &sol,
        MeanFieldRoute::ZeroField,
        &MeanFieldSettings::default(),
        &s,
        Execution::Parallel,
    )
    .unwrap();
    let ratios: Vec<f64> = reports.iter().map(|r| r.residual_over_z2.abs()).collect();
    let el = t.elapsed();
    let ok = ratios.windows(2).all(|w| w[1] < w[0]) && el < Duration::from_secs(1800);
    verdict(
        9,
        "two-term expansion trend",
        ok,
        el,
        &format!("|residual|/Z² = {:?}", ratios.iter().map(|r| format!("{r:.5}")).collect::<Vec<_>>()),
    );
}
