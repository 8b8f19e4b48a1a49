//! Hamiltonians with convex, bounded and nondegenerate zero-sublevels.
//!
//! The geodesic solver never evaluates `H` itself. It consumes the support
//! function `σ(x, u, q) = sup { q·p : H(x, u, p) <= 0 }` of the zero-sublevel
//! `C_xu`. `H` is kept for bound verification and the Minkowski gauge.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{dot, norm, Real};

pub type PointFn<T> = Arc<dyn Fn(&[T], T) -> T + Send + Sync>;
pub type CustomFn<T> = Arc<dyn Fn(&[T], T, &[T]) -> T + Send + Sync>;

/// Scalar coefficient depending on the activation value only.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile<T> {
    Constant(T),
    /// `base + slope * clamp(u, u_min, u_max)`.
    Affine { base: T, slope: T, u_min: T, u_max: T },
    /// Piecewise linear in `u` through `(knots[i], values[i])`, constant beyond the ends.
    Tabulated { knots: Vec<T>, values: Vec<T> },
}

impl<T: Real> Profile<T> {
    pub fn eval(&self, u: T) -> T {
        match self {
            Profile::Constant(c) => *c,
            Profile::Affine { base, slope, u_min, u_max } => *base + *slope * u.max(*u_min).min(*u_max),
            Profile::Tabulated { knots, values } => interpolate(knots, values, u),
        }
    }

    /// Range of values the profile can take over all `u`.
    pub fn range(&self) -> (T, T) {
        match self {
            Profile::Constant(c) => (*c, *c),
            Profile::Affine { base, slope, u_min, u_max } => {
                let a = *base + *slope * *u_min;
                let b = *base + *slope * *u_max;
                (a.min(b), a.max(b))
            }
            Profile::Tabulated { values, .. } => values
                .iter()
                .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        }
    }

    pub fn check(&self) -> Result<()> {
        match self {
            Profile::Tabulated { knots, values } => {
                if knots.is_empty() || knots.len() != values.len() {
                    return Err(Error::InvalidArgument("tabulated profile needs matching, nonempty knots and values".into()));
                }
                if knots.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidArgument("tabulated knots must increase strictly".into()));
                }
                Ok(())
            }
            Profile::Affine { u_min, u_max, .. } if !(u_min <= u_max) => {
                Err(Error::InvalidArgument("affine profile needs u_min <= u_max".into()))
            }
            _ => Ok(()),
        }
    }
}

fn interpolate<T: Real>(knots: &[T], values: &[T], u: T) -> T {
    if u <= knots[0] {
        return values[0];
    }
    let last = knots.len() - 1;
    if u >= knots[last] {
        return values[last];
    }
    let k = knots.partition_point(|&x| x <= u) - 1;
    let w = (u - knots[k]) / (knots[k + 1] - knots[k]);
    values[k] + w * (values[k + 1] - values[k])
}

/// A coefficient `c(x, u)`: either a profile in `u` or an arbitrary closure.
#[derive(Clone)]
pub enum Coefficient<T> {
    Profile(Profile<T>),
    Field(PointFn<T>),
}

impl<T: Real> Coefficient<T> {
    #[inline]
    pub fn eval(&self, x: &[T], u: T) -> T {
        match self {
            Coefficient::Profile(p) => p.eval(u),
            Coefficient::Field(f) => f(x, u),
        }
    }
}

impl<T: Real> From<Profile<T>> for Coefficient<T> {
    fn from(p: Profile<T>) -> Self {
        Coefficient::Profile(p)
    }
}

impl<T: fmt::Debug> fmt::Debug for Coefficient<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Profile(p) => p.fmt(f),
            Coefficient::Field(_) => f.write_str("Field(<fn>)"),
        }
    }
}

#[derive(Clone)]
pub enum ModelKind<T> {
    /// `H = γ(x, u) |p| - 1`.
    GeneralizedEikonal(Coefficient<T>),
    /// `H = sqrt(Σ (p_i / a_i)^2) - 1`: the sublevel is the ellipsoid with semi-axes `a_i`.
    Ellipsoidal(Vec<Coefficient<T>>),
    Custom(CustomFn<T>),
}

impl<T: fmt::Debug> fmt::Debug for ModelKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::GeneralizedEikonal(c) => f.debug_tuple("GeneralizedEikonal").field(c).finish(),
            ModelKind::Ellipsoidal(a) => f.debug_tuple("Ellipsoidal").field(a).finish(),
            ModelKind::Custom(_) => f.write_str("Custom(<fn>)"),
        }
    }
}

/// A Hamiltonian together with its declared ball sandwich `B_lower ⊆ C_xu ⊆ B_upper`.
#[derive(Clone, Debug)]
pub struct HamiltonianModel<T> {
    kind: ModelKind<T>,
    sigma_lower: T,
    sigma_upper: T,
}

impl<T: Real> HamiltonianModel<T> {
    pub fn new(kind: ModelKind<T>, sigma_lower: T, sigma_upper: T) -> Result<Self> {
        if !(sigma_lower > T::zero()) || !(sigma_upper >= sigma_lower) || !sigma_upper.is_finite() {
            return Err(Error::InvalidArgument("need 0 < sigma_lower <= sigma_upper < inf".into()));
        }
        Ok(Self { kind, sigma_lower, sigma_upper })
    }

    /// `γ(x, u)|p| - 1` with a profile in `u`; the sandwich radii come from the profile range.
    pub fn eikonal(profile: Profile<T>) -> Result<Self> {
        profile.check()?;
        let (lo, hi) = profile.range();
        if !(lo > T::zero()) {
            return Err(Error::IllPosedHamiltonian("eikonal coefficient must be positive".into()));
        }
        Self::new(ModelKind::GeneralizedEikonal(profile.into()), T::one() / hi, T::one() / lo)
    }

    /// Constant ellipsoid with the given semi-axes.
    pub fn ellipsoidal(axes: &[T]) -> Result<Self> {
        if axes.iter().any(|&a| !(a > T::zero())) {
            return Err(Error::InvalidArgument("ellipsoid semi-axes must be positive".into()));
        }
        let lo = axes.iter().copied().fold(T::infinity(), T::min);
        let hi = axes.iter().copied().fold(T::zero(), T::max);
        let kind = ModelKind::Ellipsoidal(axes.iter().map(|&a| Profile::Constant(a).into()).collect());
        Self::new(kind, lo, hi)
    }

    pub fn custom(f: impl Fn(&[T], T, &[T]) -> T + Send + Sync + 'static, sigma_lower: T, sigma_upper: T) -> Result<Self> {
        Self::new(ModelKind::Custom(Arc::new(f)), sigma_lower, sigma_upper)
    }

    pub fn kind(&self) -> &ModelKind<T> {
        &self.kind
    }

    #[inline]
    pub fn sigma_lower(&self) -> T {
        self.sigma_lower
    }

    #[inline]
    pub fn sigma_upper(&self) -> T {
        self.sigma_upper
    }

    /// Same model with different declared sandwich radii.
    pub fn with_bounds(&self, sigma_lower: T, sigma_upper: T) -> Result<Self> {
        Self::new(self.kind.clone(), sigma_lower, sigma_upper)
    }

    /// Evaluates `H(x, u, p)`.
    pub fn hamiltonian(&self, x: &[T], u: T, p: &[T]) -> T {
        match &self.kind {
            ModelKind::GeneralizedEikonal(g) => g.eval(x, u) * norm(p) - T::one(),
            ModelKind::Ellipsoidal(axes) => {
                let s = p
                    .iter()
                    .zip(axes)
                    .map(|(&pi, a)| {
                        let r = pi / a.eval(x, u);
                        r * r
                    })
                    .sum::<T>();
                s.sqrt() - T::one()
            }
            ModelKind::Custom(f) => f(x, u, p),
        }
    }

    fn checked_h(&self, x: &[T], u: T, p: &[T]) -> Result<T> {
        let h = self.hamiltonian(x, u, p);
        if h.is_finite() {
            Ok(h)
        } else {
            Err(Error::IllPosedHamiltonian(format!("H not finite at u = {u}")))
        }
    }

    /// `sup { s >= 0 : H(x, u, s d) <= 0 }` for a unit direction `d`, by bisection.
    pub fn ray_radius(&self, x: &[T], u: T, dir: &[T], tol: T) -> Result<T> {
        let mut buf = [T::zero(); 3];
        let dim = dir.len();
        let mut at = |s: T| -> Result<T> {
            for k in 0..dim {
                buf[k] = dir[k] * s;
            }
            self.checked_h(x, u, &buf[..dim])
        };
        if at(T::zero())? > T::zero() {
            return Err(Error::IllPosedHamiltonian("origin outside the zero-sublevel".into()));
        }
        let mut hi = self.sigma_upper;
        let mut expansions = 0;
        while at(hi)? <= T::zero() {
            hi = hi + hi;
            expansions += 1;
            if expansions > 64 {
                return Err(Error::IllPosedHamiltonian("zero-sublevel unbounded along a ray".into()));
            }
        }
        let lo = if at(self.sigma_lower)? <= T::zero() { self.sigma_lower } else { T::zero() };
        bisect(lo, hi, tol, at)
    }
}

/// Bisection for the last `s` in `[lo, hi]` with `f(s) <= 0`, assuming `f(lo) <= 0 < f(hi)`.
fn bisect<T: Real>(mut lo: T, mut hi: T, tol: T, mut f: impl FnMut(T) -> Result<T>) -> Result<T> {
    for _ in 0..200 {
        if hi - lo <= tol * hi.max(T::one()) {
            break;
        }
        let mid = lo + (hi - lo) / (T::one() + T::one());
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? <= T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Evenly spread unit directions: `m` angles in 2D, a Fibonacci lattice in 3D.
pub fn unit_directions<T: Real>(dim: usize, m: usize) -> Vec<[T; 3]> {
    let two_pi = T::PI() + T::PI();
    match dim {
        2 => (0..m)
            .map(|k| {
                let a = two_pi * T::from_usize_lossy(k) / T::from_usize_lossy(m);
                [a.cos(), a.sin(), T::zero()]
            })
            .collect(),
        _ => {
            let golden = T::PI() * (T::lit(3.0) - T::lit(5.0).sqrt());
            (0..m)
                .map(|k| {
                    let z = T::one() - T::lit(2.0) * (T::from_usize_lossy(k) + T::lit(0.5)) / T::from_usize_lossy(m);
                    let r = (T::one() - z * z).max(T::zero()).sqrt();
                    let a = golden * T::from_usize_lossy(k);
                    [r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
    }
}

/// Support-function evaluator over a shared model.
#[derive(Clone, Debug)]
pub struct SupportEvaluator<T> {
    model: Arc<HamiltonianModel<T>>,
    dim: usize,
    bisection_tol: T,
    directions: Vec<[T; 3]>,
}

impl<T: Real> SupportEvaluator<T> {
    /// Default sampling: 64 directions in 2D, 512 in 3D, bisection tolerance 1e-10.
    pub fn new(model: Arc<HamiltonianModel<T>>, dim: usize) -> Self {
        let m = if dim == 2 { 64 } else { 512 };
        Self::with_sampling(model, dim, m, T::lit(1e-10)).expect("default sampling is valid")
    }

    pub fn with_sampling(model: Arc<HamiltonianModel<T>>, dim: usize, samples: usize, bisection_tol: T) -> Result<Self> {
        if samples < 16 {
            return Err(Error::InvalidArgument("at least 16 direction samples required".into()));
        }
        if !(bisection_tol > T::zero()) {
            return Err(Error::InvalidArgument("bisection tolerance must be positive".into()));
        }
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("dimension {dim} unsupported")));
        }
        Ok(Self { model, dim, bisection_tol, directions: unit_directions(dim, samples) })
    }

    pub fn model(&self) -> &HamiltonianModel<T> {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn direction_samples(&self) -> usize {
        self.directions.len()
    }

    /// `σ(x, u, q)`.
    pub fn support(&self, x: &[T], u: T, q: &[T]) -> Result<T> {
        match &self.model.kind {
            ModelKind::GeneralizedEikonal(g) => {
                let gamma = g.eval(x, u);
                if !gamma.is_finite() || !(gamma > T::zero()) {
                    return Err(Error::IllPosedHamiltonian(format!("eikonal coefficient {gamma} at u = {u}")));
                }
                Ok(norm(q) / gamma)
            }
            ModelKind::Ellipsoidal(axes) => {
                let mut s = T::zero();
                for (&qi, a) in q.iter().zip(axes) {
                    let ai = a.eval(x, u);
                    if !ai.is_finite() || !(ai > T::zero()) {
                        return Err(Error::IllPosedHamiltonian(format!("ellipsoid axis {ai} at u = {u}")));
                    }
                    s = s + (qi * ai) * (qi * ai);
                }
                Ok(s.sqrt())
            }
            ModelKind::Custom(_) => self.sampled_support(x, u, q),
        }
    }

    fn sampled_support(&self, x: &[T], u: T, q: &[T]) -> Result<T> {
        let lower = self.model.sigma_lower;
        let upper = self.model.sigma_upper;
        let dim = self.dim;
        let mut best = T::zero();
        let mut buf = [T::zero(); 3];
        for d in &self.directions {
            let mut at = |s: T| -> Result<T> {
                for k in 0..dim {
                    buf[k] = d[k] * s;
                }
                self.model.checked_h(x, u, &buf[..dim])
            };
            if at(lower)? > T::zero() {
                return Err(Error::LowerBoundViolated {
                    radius: lower.to_f64_lossy(),
                    direction: d[..dim].iter().map(|v| v.to_f64_lossy()).collect(),
                });
            }
            let radius = if at(upper)? <= T::zero() { upper } else { bisect(lower, upper, self.bisection_tol, at)? };
            best = best.max(radius * dot(q, &d[..dim]));
        }
        // sampling only under-estimates; the inner ball gives a valid floor
        Ok(best.max(lower * norm(q)))
    }
}

/// `H̄(x, u, p) = gauge of C_xu at p, minus one`.
pub fn minkowski_normalize<T: Real>(model: &HamiltonianModel<T>, x: &[T], u: T, p: &[T]) -> Result<T> {
    let len = norm(p);
    if len == T::zero() {
        return Ok(-T::one());
    }
    let dir: Vec<T> = p.iter().map(|&c| c / len).collect();
    let radius = model.ray_radius(x, u, &dir, T::lit(1e-12))?;
    Ok(len / radius - T::one())
}

#[derive(Clone, Debug)]
pub struct ProbeOutcome<T> {
    pub position: Vec<T>,
    pub activation: T,
    pub pass: bool,
    pub min_gauge: T,
    pub max_gauge: T,
    /// Direction with the largest relative violation (or the tightest one on a pass).
    pub worst_direction: Vec<T>,
    pub worst_gauge: T,
}

#[derive(Clone, Debug)]
pub struct BoundsReport<T> {
    pub probes: Vec<ProbeOutcome<T>>,
}

impl<T: Real> BoundsReport<T> {
    pub fn passed(&self) -> bool {
        self.probes.iter().all(|p| p.pass)
    }
}

/// Probes the ball sandwich: every ray radius must lie in `[σ_*, σ^*]` up to `tol`.
pub fn verify_bounds<T: Real>(
    model: &HamiltonianModel<T>,
    probes: &[(Vec<T>, T)],
    samples: usize,
    tol: T,
) -> Result<BoundsReport<T>> {
    let Some(first) = probes.first() else {
        return Err(Error::EmptySet("no probe points".into()));
    };
    let dim = first.0.len();
    let dirs = unit_directions::<T>(dim, samples.max(16));
    let lo = model.sigma_lower * (T::one() - tol);
    let hi = model.sigma_upper * (T::one() + tol);
    let mut out = Vec::with_capacity(probes.len());
    for (x, u) in probes {
        let mut min_g = T::infinity();
        let mut max_g = T::zero();
        let mut worst = (T::neg_infinity(), dirs[0], T::zero());
        for d in &dirs {
            let g = model.ray_radius(x, *u, &d[..dim], T::lit(1e-12))?;
            min_g = min_g.min(g);
            max_g = max_g.max(g);
            let excess = (model.sigma_lower - g).max(g - model.sigma_upper) / model.sigma_upper;
            if excess > worst.0 {
                worst = (excess, *d, g);
            }
        }
        out.push(ProbeOutcome {
            position: x.clone(),
            activation: *u,
            pass: min_g >= lo && max_g <= hi,
            min_gauge: min_g,
            max_gauge: max_g,
            worst_direction: worst.1[..dim].to_vec(),
            worst_gauge: worst.2,
        });
    }
    Ok(BoundsReport { probes: out })
}
