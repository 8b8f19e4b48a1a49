//! Alternating iteration `v_j → u_j → Ku_j → v_{j+1}`.
//!
//! Each step freezes the metric at the previous pair `(v_j, Ku_j)`, so the
//! geodesic solve never reads the field it is producing.

use serde::{Deserialize, Serialize};

use crate::convolution::{convolve, sample_composed_clamped, ActivationTrace, KernelPair};
use crate::diagnostics::hausdorff;
use crate::elliptic::{solve_on_growth, time_samples, PoissonOptions, TimeField};
use crate::error::{Error, Result};
use crate::grid::DomainSpec;
use crate::hamiltonian::SupportEvaluator;
use crate::hj::{solve_attachment, sup_difference, AttachmentField, MetricField};
use crate::scalar::{norm, Real};

#[derive(Clone, Debug)]
pub struct CouplingConfig<T> {
    pub horizon: T,
    pub samples: usize,
    /// Radius `R` of the ball on which iterates are compared.
    pub window_radius: T,
    pub tol: T,
    pub max_iter: usize,
    /// Weight `θ` of the new composed activation; one is the plain scheme.
    pub relaxation: T,
    pub stencil_radius: usize,
    pub poisson: PoissonOptions<T>,
    pub kernels: KernelPair<T>,
}

impl<T: Real> CouplingConfig<T> {
    pub fn check(&self) -> Result<()> {
        if !(self.horizon > T::zero()) || self.samples == 0 {
            return Err(Error::InvalidArgument("horizon and sample count must be positive".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if self.max_iter < 2 {
            return Err(Error::InvalidArgument("max_iter must be at least 2".into()));
        }
        if !(self.relaxation > T::zero() && self.relaxation <= T::one()) {
            return Err(Error::InvalidArgument("relaxation must lie in (0, 1]".into()));
        }
        if !(self.window_radius > T::zero()) {
            return Err(Error::InvalidArgument("window radius must be positive".into()));
        }
        self.kernels.check()
    }

    pub fn times(&self) -> Vec<T> {
        time_samples(self.horizon, self.samples)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HausdorffDelta {
    pub time: f64,
    pub distance: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Index `j` of the iterate the step started from.
    pub iteration: usize,
    /// `sup |v_{j+1} - v_j|` on the domain inside the window ball.
    pub delta: f64,
    pub hausdorff: Vec<HausdorffDelta>,
    /// `max_m (sup_{V(t_m)} |x| - c₃(t_m))`; nonpositive up to `2h` when contained.
    pub containment_excess: f64,
    pub contained: bool,
    pub max_attachment: f64,
    pub max_poisson_residual: f64,
    pub max_activation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    MaxIterReached,
}

/// One iterate with the history that led to it.
#[derive(Clone, Debug)]
pub struct CoupledState<T> {
    pub iteration: usize,
    pub attachment: AttachmentField<T>,
    pub time_field: TimeField<T>,
    pub trace: ActivationTrace<T>,
    /// Activation the metric of `attachment` was frozen at.
    pub activation: Vec<T>,
    pub history: Vec<IterationRecord>,
}

/// Metric activation `θ Ku(x, v(x)) + (1 - θ) a_prev(x)` on every reached node.
pub fn composed_activation<T: Real>(
    trace: &ActivationTrace<T>,
    field: &AttachmentField<T>,
    previous: &[T],
    relaxation: T,
) -> Result<Vec<T>> {
    let mut out = previous.to_vec();
    for (x, _) in field.v.iter() {
        let fresh = sample_composed_clamped(trace, &field.v, x)?;
        out[x] = relaxation * fresh + (T::one() - relaxation) * previous[x];
    }
    Ok(out)
}

fn containment<T: Real>(domain: &DomainSpec<T>, field: &AttachmentField<T>, times: &[T], sigma_lower: T) -> T {
    let grid = domain.grid();
    let dim = grid.dim();
    times
        .iter()
        .skip(1)
        .map(|&t| {
            let reach = field.v.sublevel(t).iter().map(|i| norm(&grid.position(i)[..dim])).fold(T::zero(), T::max);
            reach - domain.containment_radius(t, sigma_lower)
        })
        .fold(T::neg_infinity(), T::max)
}

fn solve_pair<T: Real>(
    domain: &DomainSpec<T>,
    evaluator: &SupportEvaluator<T>,
    config: &CouplingConfig<T>,
    activation: Vec<T>,
) -> Result<(AttachmentField<T>, TimeField<T>, ActivationTrace<T>)> {
    let metric = MetricField::new(*domain.grid(), evaluator.clone(), activation)?;
    let field = solve_attachment(domain, &metric, config.stencil_radius)?;
    let u = solve_on_growth(&field, domain, config.horizon, config.samples, &config.poisson)?;
    let ku = convolve(&u, &config.kernels)?;
    Ok((field, u, ku))
}

/// First iterate: metric frozen at zero activation.
pub fn initialize<T: Real>(domain: &DomainSpec<T>, evaluator: &SupportEvaluator<T>, config: &CouplingConfig<T>) -> Result<CoupledState<T>> {
    config.check()?;
    domain.validate()?;
    let activation = vec![T::zero(); domain.grid().len()];
    let (attachment, time_field, trace) = solve_pair(domain, evaluator, config, activation.clone())?;
    Ok(CoupledState { iteration: 0, attachment, time_field, trace, activation, history: Vec::new() })
}

/// Advances one iterate and appends its history record.
pub fn step<T: Real>(
    state: &CoupledState<T>,
    domain: &DomainSpec<T>,
    evaluator: &SupportEvaluator<T>,
    config: &CouplingConfig<T>,
) -> Result<CoupledState<T>> {
    let grid = *domain.grid();
    let h = grid.spacing();
    let sigma_lower = evaluator.model().sigma_lower();
    let activation = composed_activation(&state.trace, &state.attachment, &state.activation, config.relaxation)?;
    let (attachment, time_field, trace) = solve_pair(domain, evaluator, config, activation.clone())?;

    let delta = sup_difference(&attachment.v, &state.attachment.v, &domain.omega, Some(config.window_radius));
    let times = config.times();
    let mut deltas = Vec::new();
    for &t in times.iter().skip(1) {
        let distance = hausdorff(&attachment.v.sublevel(t), &state.attachment.v.sublevel(t))?;
        let bound = delta / sigma_lower + h + h;
        deltas.push(HausdorffDelta {
            time: t.to_f64_lossy(),
            distance: distance.to_f64_lossy(),
            bound: bound.to_f64_lossy(),
            pass: distance <= bound,
        });
    }
    let excess = containment(domain, &attachment, &times, sigma_lower);
    let record = IterationRecord {
        iteration: state.iteration,
        delta: delta.to_f64_lossy(),
        hausdorff: deltas,
        containment_excess: excess.to_f64_lossy(),
        contained: excess <= h + h,
        max_attachment: attachment.v.max().unwrap_or(T::zero()).to_f64_lossy(),
        max_poisson_residual: time_field.reports.iter().map(|r| r.relative_residual).fold(T::zero(), T::max).to_f64_lossy(),
        max_activation: activation.iter().fold(T::zero(), |a, &b| a.max(b.abs())).to_f64_lossy(),
    };
    let mut history = state.history.clone();
    history.push(record);
    Ok(CoupledState { iteration: state.iteration + 1, attachment, time_field, trace, activation, history })
}

/// Result of [`run`].
#[derive(Clone, Debug)]
pub struct RunOutcome<T> {
    pub state: CoupledState<T>,
    pub verdict: Verdict,
    /// Re-freezing gap of the final iterate; only computed on convergence.
    pub representation_residual: Option<T>,
}

/// Iterates until `δ_j < tol` or `max_iter` steps.
pub fn run<T: Real>(domain: &DomainSpec<T>, evaluator: &SupportEvaluator<T>, config: &CouplingConfig<T>) -> Result<RunOutcome<T>> {
    run_observed(domain, evaluator, config, |_| Ok(()))
}

/// As [`run`], calling `observe` on every iterate including the first.
pub fn run_observed<T: Real>(
    domain: &DomainSpec<T>,
    evaluator: &SupportEvaluator<T>,
    config: &CouplingConfig<T>,
    mut observe: impl FnMut(&CoupledState<T>) -> Result<()>,
) -> Result<RunOutcome<T>> {
    let mut state = initialize(domain, evaluator, config)?;
    observe(&state)?;
    let mut verdict = Verdict::MaxIterReached;
    for _ in 0..config.max_iter {
        state = step(&state, domain, evaluator, config)?;
        observe(&state)?;
        let delta = state.history.last().unwrap().delta;
        log::info!("iteration {}: delta {:.3e}", state.iteration, delta);
        if delta < config.tol.to_f64_lossy() {
            verdict = Verdict::Converged;
            break;
        }
    }
    let representation_residual = match verdict {
        Verdict::Converged => Some(refreeze_residual(&state, domain, evaluator, config)?),
        Verdict::MaxIterReached => None,
    };
    Ok(RunOutcome { state, verdict, representation_residual })
}

/// Gap between `v` and a fresh solve with the metric frozen at the state's
/// own `(v, Ku)` pair, on the domain inside the window ball.
pub fn refreeze_residual<T: Real>(
    state: &CoupledState<T>,
    domain: &DomainSpec<T>,
    evaluator: &SupportEvaluator<T>,
    config: &CouplingConfig<T>,
) -> Result<T> {
    let activation = composed_activation(&state.trace, &state.attachment, &state.activation, T::one())?;
    let metric = MetricField::new(*domain.grid(), evaluator.clone(), activation)?;
    crate::hj::representation_residual(domain, &metric, &state.attachment, Some(config.window_radius))
}

/// True when some `V(t)` with `t` up to `horizon` reaches the window frame.
pub fn touches_frame<T: Real>(field: &AttachmentField<T>, horizon: T) -> bool {
    let grid = field.v.grid();
    field.v.iter().any(|(i, v)| v < horizon && grid.on_frame(i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolution::{SpaceKernel, TimeKernel};
    use crate::grid::{Grid, Mask};
    use crate::hamiltonian::{HamiltonianModel, Profile};
    use std::sync::Arc;

    fn wall_domain(n: usize) -> DomainSpec<f64> {
        let g = Grid::new(&[0.0, -1.0], 2.0 / (n - 1) as f64, &[n, n]).unwrap();
        let omega = Mask::full(g);
        let v0 = Mask::from_predicate(g, |p| p[0] * p[0] + p[1] * p[1] < 0.25).unwrap();
        let gamma = v0.iter().filter(|&i| g.coords(i)[0] == 0).collect();
        DomainSpec { omega, v0, gamma, x0: g.index(&[0, n / 2]), lipschitz: 1.0, kappa0: 1.0 }
    }

    fn config() -> CouplingConfig<f64> {
        CouplingConfig {
            horizon: 0.5,
            samples: 5,
            window_radius: 3.0,
            tol: 1e-3,
            max_iter: 5,
            relaxation: 1.0,
            stencil_radius: 2,
            poisson: PoissonOptions::default(),
            kernels: KernelPair { time: TimeKernel::Exponential { rate: 1.0 }, space: SpaceKernel::Gaussian { width: 0.1, radius: None } },
        }
    }

    #[test]
    fn decoupled_converges_after_one_step() {
        let domain = wall_domain(21);
        let model = Arc::new(HamiltonianModel::eikonal(Profile::Constant(1.0)).unwrap());
        let eval = SupportEvaluator::new(model, 2);
        let out = run(&domain, &eval, &config()).unwrap();
        assert_eq!(out.verdict, Verdict::Converged);
        assert_eq!(out.state.history.len(), 1);
        assert_eq!(out.state.history[0].delta, 0.0);
        assert_eq!(out.representation_residual, Some(0.0));
    }

    #[test]
    fn rejects_single_iteration_budget() {
        let mut c = config();
        c.max_iter = 1;
        assert!(c.check().is_err());
    }
}
