//! Space-time average `Ku(x, t) = ∫₀ᵗ ∫ k(t - s) φ(x - y) ū(y, s) dy ds`.
//!
//! `ū(·, s)` is the activation slice extended by zero outside its support.
//! The spatial part is a direct sum over a truncated stencil of `φ`; the
//! time part is the trapezoid rule over the slice times.

use rayon::prelude::*;

use crate::elliptic::TimeField;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, MAX_DIM};
use crate::scalar::Real;

/// Memory kernel `k` on `[0, ∞)`.
#[derive(Clone, Debug, PartialEq)]
pub enum TimeKernel<T> {
    /// `λ e^{-λ s}`.
    Exponential { rate: T },
    /// Uniform samples on `[0, horizon]`, linearly interpolated.
    Tabulated { horizon: T, values: Vec<T> },
}

impl<T: Real> TimeKernel<T> {
    pub fn check(&self) -> Result<()> {
        match self {
            TimeKernel::Exponential { rate } if *rate > T::zero() && rate.is_finite() => Ok(()),
            TimeKernel::Exponential { .. } => Err(Error::InvalidArgument("exponential kernel rate must be positive".into())),
            TimeKernel::Tabulated { horizon, values } => {
                if values.len() < 2 || !(*horizon > T::zero()) {
                    return Err(Error::InvalidArgument("kernel table needs two samples and a positive horizon".into()));
                }
                if values.iter().any(|k| !k.is_finite() || *k < T::zero()) {
                    return Err(Error::InvalidArgument("kernel table values must be finite and nonnegative".into()));
                }
                Ok(())
            }
        }
    }

    /// Largest time the kernel is defined at; `None` for unbounded support.
    pub fn horizon(&self) -> Option<T> {
        match self {
            TimeKernel::Exponential { .. } => None,
            TimeKernel::Tabulated { horizon, .. } => Some(*horizon),
        }
    }

    pub fn eval(&self, s: T) -> T {
        match self {
            TimeKernel::Exponential { rate } => *rate * (-*rate * s).exp(),
            TimeKernel::Tabulated { horizon, values } => {
                let n = values.len() - 1;
                let pos = (s / *horizon * T::from_usize_lossy(n)).max(T::zero());
                let i = pos.floor().to_usize().unwrap_or(n).min(n);
                if i == n {
                    return values[n];
                }
                let f = pos - T::from_usize_lossy(i);
                values[i] * (T::one() - f) + values[i + 1] * f
            }
        }
    }

    /// `‖k‖_{L¹}` over the kernel's support.
    pub fn l1_norm(&self) -> T {
        match self {
            TimeKernel::Exponential { .. } => T::one(),
            TimeKernel::Tabulated { horizon, values } => {
                let ds = *horizon / T::from_usize_lossy(values.len() - 1);
                values.windows(2).fold(T::zero(), |acc, w| acc + (w[0].abs() + w[1].abs()) * ds * T::lit(0.5))
            }
        }
    }

    /// `‖k'‖_{L¹}`, the total variation.
    pub fn total_variation(&self) -> T {
        match self {
            TimeKernel::Exponential { rate } => *rate,
            TimeKernel::Tabulated { values, .. } => values.windows(2).fold(T::zero(), |acc, w| acc + (w[1] - w[0]).abs()),
        }
    }
}

/// Spatial averaging kernel `φ`.
#[derive(Clone, Debug, PartialEq)]
pub enum SpaceKernel<T> {
    /// Normalized Gaussian of standard deviation `width`, cut at `radius`
    /// (default `4 * width`).
    Gaussian { width: T, radius: Option<T> },
    /// Radial profile sampled at `r = j * spacing`, zero past the last sample.
    Radial { spacing: T, values: Vec<T> },
}

impl<T: Real> SpaceKernel<T> {
    pub fn check(&self) -> Result<()> {
        match self {
            SpaceKernel::Gaussian { width, radius } => {
                if !(*width > T::zero()) || radius.is_some_and(|r| !(r > T::zero())) {
                    return Err(Error::InvalidArgument("gaussian width and radius must be positive".into()));
                }
                Ok(())
            }
            SpaceKernel::Radial { spacing, values } => {
                if values.len() < 2 || !(*spacing > T::zero()) {
                    return Err(Error::InvalidArgument("radial profile needs two samples and a positive spacing".into()));
                }
                if values.iter().any(|p| !p.is_finite() || *p < T::zero()) {
                    return Err(Error::InvalidArgument("radial profile values must be finite and nonnegative".into()));
                }
                Ok(())
            }
        }
    }

    pub fn radius(&self) -> T {
        match self {
            SpaceKernel::Gaussian { width, radius } => radius.unwrap_or(T::lit(4.0) * *width),
            SpaceKernel::Radial { spacing, values } => *spacing * T::from_usize_lossy(values.len() - 1),
        }
    }

    pub fn eval(&self, dim: usize, r: T) -> T {
        match self {
            SpaceKernel::Gaussian { width, .. } => {
                let norm = (T::lit(2.0) * T::PI() * *width * *width).powi(dim as i32).sqrt();
                (-(r * r) / (T::lit(2.0) * *width * *width)).exp() / norm
            }
            SpaceKernel::Radial { spacing, values } => {
                let pos = r / *spacing;
                let n = values.len() - 1;
                let i = pos.floor().to_usize().unwrap_or(n);
                if i >= n {
                    return if pos == T::from_usize_lossy(n) { values[n] } else { T::zero() };
                }
                let f = pos - T::from_usize_lossy(i);
                values[i] * (T::one() - f) + values[i + 1] * f
            }
        }
    }

    /// `∫φ` over `ℝ^dim`: one for the Gaussian, radial quadrature for tables.
    pub fn mass(&self, dim: usize) -> T {
        match self {
            SpaceKernel::Gaussian { .. } => T::one(),
            SpaceKernel::Radial { spacing, values } => {
                // surface measure of the unit sphere times r^{dim-1}
                let sphere = if dim == 2 { T::lit(2.0) * T::PI() } else { T::lit(4.0) * T::PI() };
                let f = |j: usize| values[j] * (*spacing * T::from_usize_lossy(j)).powi(dim as i32 - 1);
                let integral = (1..values.len()).fold(T::zero(), |acc, j| acc + (f(j - 1) + f(j)) * *spacing * T::lit(0.5));
                sphere * integral
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelPair<T> {
    pub time: TimeKernel<T>,
    pub space: SpaceKernel<T>,
}

impl<T: Real> KernelPair<T> {
    pub fn check(&self) -> Result<()> {
        self.time.check()?;
        self.space.check()
    }
}

/// Lattice stencil of `φ`: offsets with weights `φ(h o) h^dim`, rescaled so
/// the weights sum to `∫φ`.
#[derive(Clone, Debug)]
pub struct SpatialStencil<T> {
    pub offsets: Vec<[isize; MAX_DIM]>,
    pub weights: Vec<T>,
    cell: T,
}

impl<T: Real> SpatialStencil<T> {
    pub fn new(grid: &Grid<T>, kernel: &SpaceKernel<T>) -> Result<Self> {
        kernel.check()?;
        let h = grid.spacing();
        let dim = grid.dim();
        let radius = kernel.radius();
        let reach = (radius / h).floor().to_isize().unwrap_or(0);
        let zr = if dim == 3 { reach } else { 0 };
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        for k in -zr..=zr {
            for j in -reach..=reach {
                for i in -reach..=reach {
                    let r = h * T::from_isize_lossy(i * i + j * j + k * k).sqrt();
                    if r > radius {
                        continue;
                    }
                    let w = kernel.eval(dim, r);
                    if w > T::zero() {
                        offsets.push([i, j, k]);
                        weights.push(w);
                    }
                }
            }
        }
        let cell = grid.cell_volume();
        let raw = weights.iter().fold(T::zero(), |a, &w| a + w) * cell;
        if !(raw > T::zero()) {
            return Err(Error::InvalidArgument("spatial kernel has no mass on the lattice".into()));
        }
        let scale = kernel.mass(dim) / raw * cell;
        for w in &mut weights {
            *w = *w * scale;
        }
        Ok(SpatialStencil { offsets, weights, cell })
    }

    /// Discrete `‖φ‖_{L²}` of the rescaled stencil.
    pub fn l2_norm(&self) -> T {
        (self.weights.iter().fold(T::zero(), |a, &w| a + w * w) / self.cell).sqrt()
    }

    pub fn mass(&self) -> T {
        self.weights.iter().fold(T::zero(), |a, &w| a + w)
    }

    /// `(φ * ū)` on every node, with `ū` given zero-extended over the grid.
    pub fn apply(&self, grid: &Grid<T>, extended: &[T]) -> Vec<T> {
        if extended.iter().all(|&u| u == T::zero()) {
            return vec![T::zero(); grid.len()];
        }
        (0..grid.len())
            .into_par_iter()
            .map(|x| {
                let mut acc = T::zero();
                for (o, &w) in self.offsets.iter().zip(&self.weights) {
                    let neg = [-o[0], -o[1], -o[2]];
                    if let Some(y) = grid.offset(x, &neg) {
                        acc = acc + w * extended[y];
                    }
                }
                acc
            })
            .collect()
    }
}

/// `Ku` on every grid node at every slice time.
#[derive(Clone, Debug)]
pub struct ActivationTrace<T> {
    pub grid: Grid<T>,
    pub times: Vec<T>,
    pub values: Vec<Vec<T>>,
}

impl<T: Real> ActivationTrace<T> {
    pub fn horizon(&self) -> T {
        *self.times.last().unwrap()
    }

    pub fn step(&self) -> T {
        self.times[1] - self.times[0]
    }

    /// `Ku(x, t)` by linear interpolation between slice times.
    pub fn interpolate(&self, x: usize, t: T) -> Result<T> {
        let horizon = self.horizon();
        if t > horizon {
            return Err(Error::HorizonExceeded { value: t.to_f64_lossy(), horizon: horizon.to_f64_lossy() });
        }
        let t = t.max(T::zero());
        let m = self.times.len() - 1;
        let pos = t / self.step();
        let i = pos.floor().to_usize().unwrap_or(m).min(m);
        if i == m {
            return Ok(self.values[m][x]);
        }
        let f = pos - T::from_usize_lossy(i);
        if f == T::zero() {
            return Ok(self.values[i][x]);
        }
        Ok(self.values[i][x] * (T::one() - f) + self.values[i + 1][x] * f)
    }

    /// `max_{m,x} |Ku(x, t_{m+1}) - Ku(x, t_m)| / Δt`.
    pub fn time_lipschitz(&self) -> T {
        let dt = self.step();
        self.values
            .windows(2)
            .flat_map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (*b - *a).abs()))
            .fold(T::zero(), T::max)
            / dt
    }

    pub fn sup_abs(&self) -> T {
        self.values.iter().flatten().fold(T::zero(), |a, &b| a.max(b.abs()))
    }
}

/// `‖ū‖_{L²}` with plain nodal weights `h^dim`.
pub fn extension_l2<T: Real>(u: &ScalarField<T>) -> T {
    let cell = u.grid().cell_volume();
    (u.iter().fold(T::zero(), |a, (_, v)| a + v * v) * cell).sqrt()
}

pub fn sup_extension_l2<T: Real>(u: &TimeField<T>) -> T {
    u.slices.iter().map(extension_l2).fold(T::zero(), T::max)
}

/// Applies `K` to a time field.
pub fn convolve<T: Real>(u: &TimeField<T>, kernels: &KernelPair<T>) -> Result<ActivationTrace<T>> {
    kernels.check()?;
    if u.times.len() < 2 || !(u.step() > T::zero()) {
        return Err(Error::InvalidArgument("time field needs a positive time step".into()));
    }
    let horizon = u.horizon();
    if let Some(reach) = kernels.time.horizon() {
        if reach < horizon {
            return Err(Error::KernelHorizon { horizon: reach.to_f64_lossy(), required: horizon.to_f64_lossy() });
        }
    }
    let stencil = SpatialStencil::new(&u.grid, &kernels.space)?;
    let spatial: Vec<Vec<T>> = u.slices.iter().map(|s| stencil.apply(&u.grid, &s.zero_extended())).collect();
    let dt = u.step();
    let half = T::lit(0.5);
    let n = u.grid.len();
    let values = (0..u.times.len())
        .into_par_iter()
        .map(|m| {
            let mut out = vec![T::zero(); n];
            if m == 0 {
                return out;
            }
            for (l, g) in spatial.iter().enumerate().take(m + 1) {
                let w = if l == 0 || l == m { half * dt } else { dt };
                let c = w * kernels.time.eval(u.times[m] - u.times[l]);
                if c == T::zero() {
                    continue;
                }
                for (o, &gv) in out.iter_mut().zip(g) {
                    *o = *o + c * gv;
                }
            }
            out
        })
        .collect();
    Ok(ActivationTrace { grid: u.grid, times: u.times.clone(), values })
}

/// `Ku(x, v(x))`.
pub fn sample_composed<T: Real>(trace: &ActivationTrace<T>, v: &ScalarField<T>, x: usize) -> Result<T> {
    let t = v.get(x).ok_or(Error::Absent(x))?;
    trace.interpolate(x, t)
}

/// As [`sample_composed`], but times past the horizon read the last slice.
/// Used when freezing a metric over the whole domain, where nodes reached
/// after `T` never enter a sampled sublevel.
pub fn sample_composed_clamped<T: Real>(trace: &ActivationTrace<T>, v: &ScalarField<T>, x: usize) -> Result<T> {
    let t = v.get(x).ok_or(Error::Absent(x))?;
    trace.interpolate(x, t.min(trace.horizon()))
}

/// `C_K = (|k(0)| + ‖k'‖_{L¹}) ‖φ‖_{L²} sup‖ū‖_{L²}`, bounding the discrete
/// time-difference quotient of `Ku`.
pub fn lipschitz_constant<T: Real>(kernels: &KernelPair<T>, stencil: &SpatialStencil<T>, sup_l2: T) -> T {
    (kernels.time.eval(T::zero()).abs() + kernels.time.total_variation()) * stencil.l2_norm() * sup_l2
}

/// `c` with `sup|Ku| ≤ c sup‖ū‖_{L²}` for the trapezoid rule at step `dt`.
/// The quadrature overshoots `‖k‖_{L¹}` by at most `dt/2 · TV(k)`.
pub fn young_constant<T: Real>(kernels: &KernelPair<T>, stencil: &SpatialStencil<T>, dt: T) -> T {
    let excess = (dt * T::lit(0.5)).max(T::one());
    (kernels.time.l1_norm() + excess * kernels.time.total_variation()) * stencil.l2_norm()
}
