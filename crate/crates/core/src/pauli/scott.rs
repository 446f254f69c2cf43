//! The localized Scott functional
//!
//! ```text
//! E_{R,κ,β}(A) = Tr[φ_R(T₁(A) − 1/|x|)φ_R]_- + κ⁻¹∫_{B(R/4)}|∇⊗A|²
//!              + β∫_{B(2R)∖B(R/4)}|∇⊗A|² − 2(2π)⁻³∬φ_R²[p² − 1/|q|]_-
//! ```
//!
//! and its minimisation over a finite field family.

use std::cell::RefCell;

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::field::{FieldAnsatz, FieldFamily};
use super::operator::{PauliGrid, PauliSpec};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{Coulomb, Route, ScottEstimate};
use crate::radial::SmoothCutoff;
use crate::weyl::{weyl_integral, WeylIntegrand};

/// Default upper end of the admissible coupling range `(0, κ₀]`.
pub const KAPPA0: f64 = 0.1;

/// Everything in `E_{R,κ,β}` that does not depend on `θ`, `κ` or `β`.
pub struct ScottProblem {
    pub r: f64,
    pub h: f64,
    grid: PauliGrid,
    weyl: f64,
    inner: DMatrix<f64>,
    outer: DMatrix<f64>,
    exec: Execution,
}

fn check_couplings(kappa: f64, beta: f64) -> Result<()> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidInput(format!("kappa must be positive, got {kappa}")));
    }
    if !(beta > 0.0) || beta > 1.0 / (2.0 * kappa) {
        return Err(Error::InvalidInput(format!(
            "need 0 < beta ≤ 1/(2 kappa) = {}, got {beta}",
            1.0 / (2.0 * kappa)
        )));
    }
    Ok(())
}

impl ScottProblem {
    pub fn new(r: f64, family: FieldFamily, h: f64, spec: &PauliSpec, exec: Execution) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidInput("R must be positive".into()));
        }
        let phi = SmoothCutoff::new(r);
        let v = Coulomb::new(1.0);
        let grid = PauliGrid::new(&family, &v, h, &phi, r, spec, exec)?;
        let w2 = |x: f64| {
            use crate::model::RadialFn;
            phi.eval(x).powi(2)
        };
        let weyl = weyl_integral(&WeylIntegrand::new(&v, 0.0, h).with_weight(&w2))?;
        let inner = family.energy_matrices(0.0, 0.25 * r).0;
        let outer = family.energy_matrices(0.25 * r, 2.0 * r).0;
        Ok(Self {
            r,
            h,
            grid,
            weyl,
            inner,
            outer,
            exec,
        })
    }

    pub fn family(&self) -> &FieldFamily {
        self.grid.family()
    }

    pub fn grid(&self) -> &PauliGrid {
        &self.grid
    }

    /// The subtracted Weyl term (a negative number).
    pub fn weyl(&self) -> f64 {
        self.weyl
    }

    pub fn trace(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.grid.trace(theta, self.exec)?.value)
    }

    /// `(∫_{B(R/4)}|∇⊗A|², ∫_{B(2R)∖B(R/4)}|∇⊗A|²)`.
    pub fn field_energies(&self, theta: &[f64]) -> (f64, f64) {
        let t = DVector::from_column_slice(theta);
        (
            (t.transpose() * &self.inner * &t)[(0, 0)],
            (t.transpose() * &self.outer * &t)[(0, 0)],
        )
    }

    /// Combines a known trace with the field and Weyl terms.
    pub fn combine(&self, trace: f64, theta: &[f64], kappa: f64, beta: f64) -> Result<f64> {
        check_couplings(kappa, beta)?;
        let (inner, outer) = self.field_energies(theta);
        Ok(trace + inner / kappa + beta * outer - self.weyl)
    }

    pub fn functional(&self, theta: &[f64], kappa: f64, beta: f64) -> Result<f64> {
        check_couplings(kappa, beta)?;
        let trace = self.trace(theta)?;
        self.combine(trace, theta, kappa, beta)
    }
}

/// `E_{R,κ,β}(A)` for a single ansatz; builds the operator from scratch.
pub fn scott_functional(a: &FieldAnsatz, r: f64, kappa: f64, beta: f64, h: f64) -> Result<f64> {
    check_couplings(kappa, beta)?;
    let p = ScottProblem::new(r, a.family.clone(), h, &PauliSpec::default(), Execution::Parallel)?;
    p.functional(&a.theta, kappa, beta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerBudget {
    /// Simplex iterations per start.
    pub iterations: u64,
    /// Random restarts after the start at `θ = 0`.
    pub restarts: usize,
    pub seed: u64,
    /// Initial simplex edge.
    pub step: f64,
    /// Spread of the restart points.
    pub spread: f64,
    /// Simplex standard-deviation tolerance.
    pub tolerance: f64,
    /// Upper end of the admissible κ range.
    pub kappa0: f64,
}

impl Default for OptimizerBudget {
    fn default() -> Self {
        Self {
            iterations: 120,
            restarts: 2,
            seed: 1,
            step: 1e-2,
            spread: 0.05,
            tolerance: 1e-9,
            kappa0: KAPPA0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOutcome {
    pub estimate: ScottEstimate,
    pub theta: Vec<f64>,
    /// Functional value at `A = 0`.
    pub zero_value: f64,
    /// Some start stopped on the iteration cap rather than on tolerance.
    pub exhausted: bool,
    /// `(evaluation, |θ|, value)` for every functional evaluation.
    pub history: Vec<(usize, f64, f64)>,
}

struct Objective<'a> {
    f: &'a dyn Fn(&[f64]) -> Result<f64>,
    history: RefCell<Vec<(usize, f64, f64)>>,
    best: RefCell<(f64, Vec<f64>)>,
}

impl Objective<'_> {
    fn eval(&self, theta: &[f64]) -> Result<f64> {
        let v = (self.f)(theta)?;
        let mut h = self.history.borrow_mut();
        let n = h.len();
        h.push((n, theta.iter().map(|t| t * t).sum::<f64>().sqrt(), v));
        let mut b = self.best.borrow_mut();
        if v < b.0 {
            *b = (v, theta.to_vec());
        }
        Ok(v)
    }
}

impl CostFunction for &Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(p)?)
    }
}

/// Result of [`minimize_over_family`].
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMinimum {
    pub value: f64,
    pub theta: Vec<f64>,
    pub zero_value: f64,
    pub exhausted: bool,
    pub history: Vec<(usize, f64, f64)>,
}

/// Nelder–Mead over `θ ∈ ℝ^dim` from `θ = 0` and from seeded random starts.
/// `θ = 0` is always evaluated first, so `value ≤ zero_value`.
pub fn minimize_over_family(
    dim: usize,
    f: &dyn Fn(&[f64]) -> Result<f64>,
    budget: &OptimizerBudget,
) -> Result<FamilyMinimum> {
    let obj = Objective {
        f,
        history: RefCell::new(Vec::new()),
        best: RefCell::new((f64::INFINITY, vec![0.0; dim])),
    };
    let zero_value = obj.eval(&vec![0.0; dim])?;
    if dim == 0 {
        return Ok(FamilyMinimum {
            value: zero_value,
            theta: Vec::new(),
            zero_value,
            exhausted: false,
            history: obj.history.into_inner(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut starts = vec![vec![0.0; dim]];
    for _ in 0..budget.restarts {
        starts.push((0..dim).map(|_| rng.random_range(-budget.spread..budget.spread)).collect());
    }
    let mut exhausted = false;
    for x0 in starts {
        let mut simplex = vec![x0.clone()];
        for i in 0..dim {
            let mut v = x0.clone();
            v[i] += budget.step;
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(budget.tolerance)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        let res = Executor::new(&obj, solver)
            .configure(|s| s.max_iters(budget.iterations))
            .run()
            .map_err(|e| match e.downcast::<Error>() {
                Ok(inner) => inner,
                Err(other) => Error::InvalidInput(other.to_string()),
            })?;
        if let TerminationStatus::Terminated(TerminationReason::MaxItersReached) = res.state().get_termination_status() {
            exhausted = true;
        }
    }
    let (value, theta) = obj.best.into_inner();
    Ok(FamilyMinimum {
        value: value.min(zero_value),
        theta,
        zero_value,
        exhausted,
        history: obj.history.into_inner(),
    })
}

/// Minimises `E_{R,κ,β}` over the problem's field family. The returned value
/// never exceeds the `A = 0` functional.
pub fn minimize_scott(kappa: f64, beta: f64, problem: &ScottProblem, budget: &OptimizerBudget) -> Result<MinimizeOutcome> {
    check_couplings(kappa, beta)?;
    if kappa > budget.kappa0 {
        return Err(Error::InvalidInput(format!(
            "kappa = {kappa} lies outside (0, κ₀] with κ₀ = {}",
            budget.kappa0
        )));
    }
    let f = |theta: &[f64]| problem.functional(theta, kappa, beta);
    let min = minimize_over_family(problem.family().dim(), &f, budget)?;
    if min.exhausted {
        log::info!("optimizer budget exhausted at κ = {kappa}; returning best value so far");
    }
    Ok(MinimizeOutcome {
        estimate: ScottEstimate::new(problem.r, kappa, beta, min.value, Route::AnsatzMin)?,
        theta: min.theta,
        zero_value: min.zero_value,
        exhausted: min.exhausted,
        history: min.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem() -> ScottProblem {
        ScottProblem::new(10.0, FieldFamily::scott(10.0), 1.0, &PauliSpec::default(), Execution::Parallel).unwrap()
    }

    #[test]
    fn preconditions() {
        let p = problem();
        let t = [0.0; 4];
        assert!(p.functional(&t, 0.0, 1.0).is_err());
        assert!(p.functional(&t, 0.1, 6.0).is_err());
        assert!(p.functional(&t, 0.1, 5.0).is_ok());
        assert!(minimize_scott(0.2, 1.0, &p, &OptimizerBudget::default()).is_err());
    }

    #[test]
    fn zero_field_value_is_trace_minus_weyl() {
        let p = problem();
        let v = p.functional(&[0.0; 4], 0.05, 1.0).unwrap();
        assert!((v - (p.trace(&[0.0; 4]).unwrap() - p.weyl())).abs() < 1e-14);
    }

    #[test]
    fn field_energy_pushes_up() {
        let p = problem();
        let t = [0.1, 0.0, -0.1, 0.05];
        let trace = p.trace(&t).unwrap();
        let zero = p.combine(trace, &[0.0; 4], 0.05, 1.0).unwrap();
        assert!(p.combine(trace, &t, 0.05, 1.0).unwrap() > zero);
    }

    #[test]
    fn monotone_in_couplings() {
        let p = problem();
        let t = [0.1, 0.0, -0.1, 0.05];
        let trace = p.trace(&t).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..=10 {
            let v = p.combine(trace, &t, 0.01 * k as f64, 1.0).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        // the family lives in B(R/4), so the outer zone is empty here
        let a = p.combine(trace, &t, 0.05, 0.5).unwrap();
        let b = p.combine(trace, &t, 0.05, 2.0).unwrap();
        assert!(b >= a);
    }

    #[test]
    fn tiny_coupling_keeps_zero_field() {
        let p = problem();
        let budget = OptimizerBudget {
            iterations: 40,
            restarts: 1,
            ..OptimizerBudget::default()
        };
        let out = minimize_scott(1e-4, 1.0, &p, &budget).unwrap();
        assert!(out.estimate.value <= out.zero_value);
        assert!((out.estimate.value - out.zero_value).abs() < 1e-6);
        assert!(out.theta.iter().all(|t| t.abs() < 1e-2), "{:?}", out.theta);
        assert_eq!(out.history[0].1, 0.0);
    }
}
