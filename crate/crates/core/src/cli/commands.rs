//! Subcommand bodies. Each reads its parameters, validates them through the
//! library preconditions and returns a [`Report`].

use std::path::Path;

use super::config::Params;
use super::output::{num, tf_cached, Report, Table};
use super::{CliError, RunConfig};
use crate::error::Error;
use crate::exec::Execution;
use crate::expansion::{expansion_sweep, MeanFieldRoute, MeanFieldSettings};
use crate::hydrogen::{lattice_schedule, scott_mu_limit};
use crate::model::{Coulomb, RadialFn, Route, SCOTT_S0};
use crate::multiscale::{partition_check, sample_cloud, PartitionQuadrature, ScaleFunctions};
use crate::pauli::{minimize_scott, FieldFamily, OptimizerBudget, PauliSpec, ScottProblem};
use crate::radial::{fit_expansion, localized_trace_neg, trace_neg, RadialSpec, SmoothCutoff, SpectralSum};
use crate::tf::{tf_energy_consistency, GridSpec, TfSolution};
use crate::weyl::{weyl_coulomb_mu, weyl_integral, WeylIntegrand};

type Res<T> = Result<T, CliError>;

pub fn execute(cfg: &RunConfig) -> Res<Report> {
    let ctx = Ctx {
        p: &cfg.params,
        cache: cfg.cache.as_deref(),
        exec: Execution::Parallel,
    };
    match cfg.command.as_str() {
        "tf" => tf(&ctx),
        "weyl" => weyl(&ctx),
        "trace" => trace(&ctx),
        "scott" => scott(&ctx),
        "partition-check" => partition(&ctx),
        "expansion" => expansion(&ctx),
        other => Err(CliError::Usage(format!("unknown subcommand '{other}'"))),
    }
}

struct Ctx<'a> {
    p: &'a Params,
    cache: Option<&'a Path>,
    exec: Execution,
}

impl Ctx<'_> {
    fn get<T: std::str::FromStr + ToString>(&self, r: &mut Report, key: &str, default: T) -> Res<T> {
        let v = self.p.get(key, default)?;
        r.param(key, v.to_string());
        Ok(v)
    }

    fn list<T: std::str::FromStr + ToString + Clone>(&self, r: &mut Report, key: &str, default: &[T]) -> Res<Vec<T>> {
        let v = self.p.get_list(key, default)?;
        r.param(key, v.iter().map(T::to_string).collect::<Vec<_>>().join(","));
        Ok(v)
    }

    fn flag(&self, r: &mut Report, key: &str, default: bool) -> Res<bool> {
        let v = self.p.get_bool(key, default)?;
        r.param(key, v);
        Ok(v)
    }

    fn text(&self, r: &mut Report, key: &str, default: &str) -> String {
        let v = self.p.raw(key).unwrap_or(default).to_string();
        r.param(key, &v);
        v
    }

    fn tf(&self, r: &mut Report) -> Res<TfSolution> {
        let d = GridSpec::default();
        let tol = self.get(r, "tf_tol", 1e-10)?;
        let grid = GridSpec {
            t_min: self.get(r, "tf_t_min", d.t_min)?,
            t_max: self.get(r, "tf_t_max", d.t_max)?,
            points: self.get(r, "tf_points", d.points)?,
        };
        let sol = tf_cached(tol, grid, self.cache)?;
        r.constant("tf_slope0", sol.slope0(), "computed");
        r.constant("tf_e_atom", sol.e_atom(), "computed");
        Ok(sol)
    }

    fn radial_spec(&self, r: &mut Report, richardson: bool) -> Res<RadialSpec> {
        let d = RadialSpec::default();
        Ok(RadialSpec {
            dx: self.get(r, "dx", d.dx)?,
            r_min_factor: self.get(r, "r_min_factor", d.r_min_factor)?,
            r_max_cap: self.get(r, "r_max_cap", d.r_max_cap)?,
            l_cap: self.get(r, "l_cap", d.l_cap)?,
            richardson: self.flag(r, "richardson", richardson)?,
            check_refinement: self.flag(r, "check_refinement", d.check_refinement)?,
        })
    }

    fn budget(&self, r: &mut Report, d: OptimizerBudget) -> Res<OptimizerBudget> {
        Ok(OptimizerBudget {
            iterations: self.get(r, "iterations", d.iterations)?,
            restarts: self.get(r, "restarts", d.restarts)?,
            seed: self.get(r, "seed", d.seed)?,
            step: self.get(r, "step", d.step)?,
            spread: self.get(r, "spread", d.spread)?,
            tolerance: self.get(r, "tolerance", d.tolerance)?,
            kappa0: self.get(r, "kappa0", d.kappa0)?,
        })
    }

    fn family(&self, r: &mut Report, radius: f64) -> Res<FieldFamily> {
        match self.text(r, "family", "scott").as_str() {
            "scott" => Ok(FieldFamily::scott(radius)),
            other => Err(Error::Unsupported(format!("field family '{other}'")).into()),
        }
    }
}

fn tf(ctx: &Ctx<'_>) -> Res<Report> {
    let mut r = Report::new("tf", Table::new(&["t", "phi", "dphi"]));
    let z: f64 = ctx.get(&mut r, "z", 1.0)?;
    let sol = ctx.tf(&mut r)?;
    for (t, p, d) in sol.profile() {
        r.table.push_nums(&[t, p, d]);
    }
    let e = tf_energy_consistency(&sol)?;
    r.summary.push(format!("phi'(0) = {}", num(sol.slope0())));
    r.summary.push(format!("E_atom = {}", num(sol.e_atom())));
    r.summary.push(format!("E_TF(z = {z}) = {}", num(sol.e_atom() * z.powf(7.0 / 3.0))));
    r.summary.push(format!("tf_residual = {}", num(sol.tf_residual())));
    r.summary.push(format!("virial = {}", num(e.virial)));
    r.summary.push(format!("phase_space_gap = {}", num(e.relative_gap)));
    Ok(r)
}

/// Tabulated `r,V` pairs, linear in between, Coulomb-like below the first
/// node and zero beyond the last.
struct Tabulated {
    r: Vec<f64>,
    v: Vec<f64>,
}

impl Tabulated {
    fn load(path: &str) -> Res<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Io(format!("{path}: {e}")))?;
        let mut r = Vec::new();
        let mut v = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::InvalidInput(format!("{path}: {e}")))?;
            let parse = |k: usize| rec.get(k).and_then(|s| s.parse::<f64>().ok());
            match (rec.len(), parse(0), parse(1)) {
                (2, Some(a), Some(b)) => {
                    r.push(a);
                    v.push(b);
                }
                // header row
                _ if i == 0 => {}
                _ => return Err(Error::InvalidInput(format!("{path}: record {}: expected r,V", i + 1)).into()),
            }
        }
        if r.len() < 2 || r[0] <= 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!("{path}: need at least 2 rows with increasing r > 0")).into());
        }
        Ok(Self { r, v })
    }
}

impl RadialFn for Tabulated {
    fn eval(&self, x: f64) -> f64 {
        let n = self.r.len();
        if x <= self.r[0] {
            return self.v[0] * self.r[0] / x;
        }
        if x >= self.r[n - 1] {
            return 0.0;
        }
        let k = self.r.partition_point(|&ri| ri <= x) - 1;
        let s = (x - self.r[k]) / (self.r[k + 1] - self.r[k]);
        self.v[k] + s * (self.v[k + 1] - self.v[k])
    }
}

enum Potential {
    Coulomb(Coulomb),
    Tf(TfSolution, f64),
    File(Tabulated),
}

impl RadialFn for Potential {
    fn eval(&self, r: f64) -> f64 {
        match self {
            Potential::Coulomb(c) => c.eval(r),
            Potential::Tf(sol, z) => sol.potential(*z, r),
            Potential::File(t) => t.eval(r),
        }
    }
}

fn potential(ctx: &Ctx<'_>, r: &mut Report, allow_file: bool) -> Res<(Potential, f64)> {
    let kind = ctx.text(r, "potential", "coulomb");
    let z = ctx.get(r, "z", 1.0)?;
    if !(z > 0.0) {
        return Err(Error::InvalidInput("z must be positive".into()).into());
    }
    let v = match kind.as_str() {
        "coulomb" => Potential::Coulomb(Coulomb::new(z)),
        "tf" => Potential::Tf(ctx.tf(r)?, z),
        "file" if allow_file => {
            let path = ctx
                .p
                .raw("file")
                .ok_or_else(|| Error::InvalidInput("potential = file needs file = PATH".into()))?;
            r.param("file", path);
            Potential::File(Tabulated::load(path)?)
        }
        other => return Err(Error::InvalidInput(format!("unknown potential '{other}'")).into()),
    };
    Ok((v, z))
}

fn weyl(ctx: &Ctx<'_>) -> Res<Report> {
    let mut r = Report::new("weyl", Table::new(&["mu", "weyl", "closed_form", "relative_error"]));
    let (v, z) = potential(ctx, &mut r, false)?;
    let h = ctx.get(&mut r, "h", 1.0)?;
    let mus = ctx.list(&mut r, "mu", &[1e-2, 1e-3, 1e-4])?;
    let cutoff = match ctx.p.raw("R") {
        Some(_) => Some(SmoothCutoff::new(ctx.get(&mut r, "R", 0.0)?)),
        None => None,
    };
    let w2 = |x: f64| cutoff.as_ref().map_or(1.0, |c| c.eval(x).powi(2));
    let coulomb = matches!(v, Potential::Coulomb(_)) && cutoff.is_none() && h == 1.0;
    for &mu in &mus {
        let mut integrand = WeylIntegrand::new(&v, mu, h);
        if cutoff.is_some() {
            integrand = integrand.with_weight(&w2);
        }
        let w = weyl_integral(&integrand)?;
        if coulomb {
            let c = weyl_coulomb_mu(mu, z)?;
            r.table.push(vec![num(mu), num(w), num(c), num(((w - c) / c).abs())]);
        } else {
            r.table.push(vec![num(mu), num(w), String::new(), String::new()]);
        }
    }
    Ok(r)
}

fn push_channels(t: &mut Table, s: &SpectralSum) {
    for (l, eig) in s.channels.iter().enumerate() {
        for (k, e) in eig.iter().enumerate() {
            t.push(vec![l.to_string(), k.to_string(), num(*e)]);
        }
    }
}

fn trace(ctx: &Ctx<'_>) -> Res<Report> {
    let mut r = Report::new("trace", Table::new(&["l", "k", "eigenvalue"]));
    let (v, _) = potential(ctx, &mut r, true)?;
    let h = ctx.get(&mut r, "h", 1.0)?;
    let default_mu = if matches!(v, Potential::Coulomb(_)) { 1.0 / 400.0 } else { 0.0 };
    let mu = ctx.get(&mut r, "mu", default_mu)?;
    let spec = ctx.radial_spec(&mut r, false)?;
    let s = match ctx.p.raw("R") {
        Some(_) => {
            let radius = ctx.get(&mut r, "R", 0.0)?;
            if !(radius > 0.0) {
                return Err(Error::InvalidInput("R must be positive".into()).into());
            }
            let phi = SmoothCutoff::new(radius);
            localized_trace_neg(&v, &phi, radius, h, mu, &spec, ctx.exec)?
        }
        None => trace_neg(&v, h, mu, &spec, ctx.exec)?,
    };
    push_channels(&mut r.table, &s);
    r.summary.push(format!("trace = {}", num(s.trace)));
    r.summary.push(format!("channels = {}", s.l_max));
    r.summary.push(format!("points = {}", s.points));
    r.summary.push(format!("r_max = {}", num(s.r_max)));
    r.warnings.extend(s.warnings);
    Ok(r)
}

fn scott(ctx: &Ctx<'_>) -> Res<Report> {
    let mut probe = Report::default();
    let route: Route = ctx.text(&mut probe, "route", "mu-limit").parse()?;
    let mut r = match route {
        Route::MuLimit => scott_mu(ctx)?,
        Route::CutoffR => scott_cutoff(ctx)?,
        Route::SpectralFit => scott_fit(ctx)?,
        Route::AnsatzMin => scott_ansatz(ctx)?,
    };
    r.params.insert(0, ("route".into(), route.as_str().into()));
    r.constant("S0", SCOTT_S0, "published value S(0) = 1/8");
    Ok(r)
}

fn scott_mu(ctx: &Ctx<'_>) -> Res<Report> {
    let mut r = Report::new("scott", Table::new(&["mu", "trace", "weyl", "diff"]));
    let ns = ctx.list(&mut r, "N", &[50u64, 100, 200, 400])?;
    if ns.contains(&0) {
        return Err(Error::InvalidInput("N must be positive".into()).into());
    }
    let out = scott_mu_limit(&lattice_schedule(&ns), ctx.exec)?;
    for row in &out.rows {
        r.table.push_nums(&[row.mu, row.trace, row.weyl, row.diff]);
    }
    r.summary.push(format!("2S(0) ≈ {:.4}", out.estimate.value));
    Ok(r)
}

fn scott_cutoff(ctx: &Ctx<'_>) -> Res<Report> {
    let mut r = Report::new("scott", Table::new(&["R", "trace", "weyl", "diff"]));
    let radii = ctx.list(&mut r, "R", &[20.0, 40.0])?;
    let h = ctx.get(&mut r, "h", 1.0)?;
    let spec = ctx.radial_spec(&mut r, false)?;
    let v = Coulomb::new(1.0);
    let mut last = None;
    for &radius in &radii {
        if !(radius > 0.0) {
            return Err(Error::InvalidInput("R must be positive".into()).into());
        }
        let phi = SmoothCutoff::new(radius);
        let s = localized_trace_neg(&v, &phi, radius, h, 0.0, &spec, ctx.exec)?;
        let w2 = |x: f64| phi.eval(x).powi(2);
        let w = weyl_integral(&WeylIntegrand::new(&v, 0.0, h).with_weight(&w2))?;
        r.table.push_nums(&[radius, s.trace, w, s.trace - w]);
        r.warnings.extend(s.warnings);
        last = Some((radius, s.trace - w));
    }
    if let Some((radius, d)) = last {
        r.summary.push(format!("2S(0) ≈ {d:.4} at R = {radius}"));
    }
    Ok(r)
}

fn scott_fit(ctx: &Ctx<'_>) -> Res<Report> {
    let mut r = Report::new("scott", Table::new(&["h", "trace", "weyl"]));
    let inv = ctx.list(&mut r, "h_inv", &[8.0, 10.0, 12.0, 16.0, 20.0])?;
    let spec = ctx.radial_spec(&mut r, true)?;
    let sol = ctx.tf(&mut r)?;
    let v = |x: f64| sol.potential(1.0, x);
    let c3 = weyl_integral(&WeylIntegrand::new(&v, 0.0, 1.0))?;
    let mut hs: Vec<f64> = inv.iter().map(|&k| 1.0 / k).collect();
    hs.sort_by(|a, b| b.total_cmp(a));
    let traces = ctx
        .exec
        .map(&hs, |&h| trace_neg(&v, h, 0.0, &spec, Execution::Sequential))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut samples = Vec::new();
    for (&h, s) in hs.iter().zip(&traces) {
        r.table.push_nums(&[h, s.trace, c3 / h.powi(3)]);
        r.warnings.extend(s.warnings.iter().cloned());
        samples.push((h, s.trace));
    }
    let fit = fit_expansion(&samples, Some(c3))?;
    r.summary.push(format!("c3 = {}", num(fit.c3)));
    r.summary.push(format!("c2 = {}", num(fit.c2)));
    r.summary.push(format!("fit_residual = {}", num(fit.residual)));
    r.summary.push(format!("2S(0) ≈ {:.4}", fit.c2));
    Ok(r)
}

fn scott_ansatz(ctx: &Ctx<'_>) -> Res<Report> {
    let mut r = Report::new("scott", Table::new(&["iteration", "theta_norm", "value"]));
    let kappa = ctx.get(&mut r, "kappa", 0.05)?;
    let beta = ctx.get(&mut r, "beta", 1.0)?;
    let radius = ctx.get(&mut r, "R", 20.0)?;
    let h = ctx.get(&mut r, "h", 1.0)?;
    let budget = ctx.budget(&mut r, OptimizerBudget::default())?;
    let spec = PauliSpec {
        radial: ctx.radial_spec(&mut r, false)?,
        e_cut: ctx.get(&mut r, "e_cut", PauliSpec::default().e_cut)?,
        ..PauliSpec::default()
    };
    let family = ctx.family(&mut r, radius)?;
    let problem = ScottProblem::new(radius, family, h, &spec, ctx.exec)?;
    let out = minimize_scott(kappa, beta, &problem, &budget)?;
    for &(i, n, v) in &out.history {
        r.table.push(vec![i.to_string(), num(n), num(v)]);
    }
    let e = &out.estimate;
    r.summary.push(format!(
        "estimate route={} R={} kappa={} beta={} value={} zero_value={} exhausted={}",
        e.route,
        num(e.r),
        num(e.kappa),
        num(e.beta),
        num(e.value),
        num(out.zero_value),
        out.exhausted
    ));
    r.summary.push(format!(
        "theta = {}",
        out.theta.iter().map(|t| num(*t)).collect::<Vec<_>>().join(",")
    ));
    if out.exhausted {
        r.warnings.push("optimizer budget exhausted; value is the best found so far".into());
    }
    Ok(r)
}

fn partition(ctx: &Ctx<'_>) -> Res<Report> {
    let mut r = Report::new("partition-check", Table::new(&["x", "y", "z", "d", "value"]));
    let n = ctx.get(&mut r, "n", 100usize)?;
    let seed = ctx.get(&mut r, "seed", 7u64)?;
    let d_min = ctx.get(&mut r, "d_min", 1e-3)?;
    let d_max = ctx.get(&mut r, "d_max", 1e3)?;
    let r0 = ctx.get(&mut r, "r0", 1.0)?;
    if !(d_min > 0.0 && d_max >= d_min) {
        return Err(Error::InvalidInput("need 0 < d_min ≤ d_max".into()).into());
    }
    let dq = PartitionQuadrature::default();
    let quad = PartitionQuadrature {
        radial: ctx.get(&mut r, "quad_radial", dq.radial)?,
        polar: ctx.get(&mut r, "quad_polar", dq.polar)?,
        azimuthal: ctx.get(&mut r, "quad_azimuthal", dq.azimuthal)?,
    };
    let scale = ScaleFunctions::atomic(r0);
    let cloud = sample_cloud(n, d_min, d_max, seed);
    let values = ctx
        .exec
        .map(&cloud, |x| partition_check(x, &scale, &quad))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut worst: f64 = 0.0;
    for (x, v) in cloud.iter().zip(&values) {
        r.table.push_nums(&[x[0], x[1], x[2], scale.distance(x), *v]);
        worst = worst.max((v - 1.0).abs());
    }
    r.summary.push(format!("max |value − 1| = {}", num(worst)));
    Ok(r)
}

fn expansion(ctx: &Ctx<'_>) -> Res<Report> {
    let mut r = Report::new(
        "expansion",
        Table::new(&["Z", "leading", "scott", "mean_field", "residual", "residual_over_Z2"]),
    );
    let zs = ctx.list(&mut r, "Z_list", &[8.0, 27.0, 64.0, 125.0])?;
    let alpha = ctx.get(&mut r, "alpha", 0.0)?;
    let route = MeanFieldRoute::parse(&ctx.text(&mut r, "route", "spectral"))?;
    let d = MeanFieldSettings::default();
    let settings = MeanFieldSettings {
        radial: ctx.radial_spec(&mut r, true)?,
        pauli: d.pauli,
        budget: ctx.budget(&mut r, d.budget)?,
        field_scale: ctx.get(&mut r, "field_scale", d.field_scale)?,
    };
    let sol = ctx.tf(&mut r)?;
    let provider = ctx.text(&mut r, "s_provider", "mu-limit");
    let s_value = match provider.as_str() {
        "s0" => SCOTT_S0,
        "mu-limit" => {
            let est = scott_mu_limit(&lattice_schedule(&[50, 100, 200, 400]), ctx.exec)?.estimate.value / 2.0;
            r.constant("S_mu_limit", est, "computed");
            est
        }
        other => return Err(Error::Unsupported(format!("S provider '{other}'")).into()),
    };
    if alpha > 0.0 {
        r.warnings.push("S(κ) is bounded above by S(0) for κ > 0; the Scott column uses S(0)".into());
    }
    let s = move |_: f64| Ok(s_value);
    let reports = expansion_sweep(&zs, alpha, &sol, route, &settings, &s, ctx.exec)?;
    for e in &reports {
        r.table.push_nums(&[e.z, e.leading, e.scott, e.mean_field, e.residual, e.residual_over_z2]);
    }
    Ok(r)
}
