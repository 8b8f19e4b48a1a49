//! `-Δu = 1` on masked lattice regions, `u = 0` on Dirichlet nodes, natural
//! (homogeneous Neumann) conditions on the rest of the mask boundary.
//!
//! The discrete problem is the nodal Galerkin form: one unit conductance
//! `h^(dim-2)` per axis link between two region nodes, links leaving the
//! region dropped, and a lumped source `h^dim * Π_a f_a` per node, where
//! `f_a = 1/2` if exactly one of the two axis-`a` neighbours is in the region
//! and `1` otherwise. The matrix is symmetric positive definite once the
//! region is connected to a Dirichlet node.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DomainSpec, Grid, Mask, ScalarField};
use crate::hj::AttachmentField;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct PoissonProblem<T> {
    pub mask: Mask<T>,
    pub dirichlet: Vec<usize>,
    /// Constant right-hand side.
    pub source: T,
}

impl<T: Real> PoissonProblem<T> {
    pub fn unit(mask: Mask<T>, dirichlet: Vec<usize>) -> Self {
        Self { mask, dirichlet, source: T::one() }
    }
}

/// What to do with mask components that carry no Dirichlet node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Fragments {
    Reject,
    #[default]
    Drop,
}

#[derive(Clone, Debug)]
pub struct PoissonOptions<T> {
    pub cg_tol: T,
    /// Defaults to ten times the number of unknowns.
    pub max_iter: Option<usize>,
    pub fragments: Fragments,
    /// Solve growth slices concurrently from zero initial guesses.
    pub parallel: bool,
}

impl<T: Real> Default for PoissonOptions<T> {
    fn default() -> Self {
        Self { cg_tol: T::lit(1e-8), max_iter: None, fragments: Fragments::Drop, parallel: false }
    }
}

/// Compressed sparse rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut s = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s = s + self.vals[k] * x[self.cols[k]];
            }
            *out = s;
        }
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let row = &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]];
        match row.binary_search(&c) {
            Ok(k) => self.vals[self.row_ptr[r] + k],
            Err(_) => T::zero(),
        }
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).all(|k| self.get(self.cols[k], r) == self.vals[k]))
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.n]; self.n];
        for (r, row) in d.iter_mut().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row[self.cols[k]] = self.vals[k];
            }
        }
        d
    }
}

/// Lumped dual-cell volumes of the region's nodes (zero off the region).
pub fn nodal_weights<T: Real>(region: &Mask<T>) -> Vec<T> {
    let grid = region.grid();
    let vol = grid.cell_volume();
    let half = T::lit(0.5);
    (0..grid.len())
        .map(|i| {
            if !region.contains(i) {
                return T::zero();
            }
            let nb: Vec<bool> = grid.axis_neighbors(i).map(|n| n.is_some_and(|n| region.contains(n))).collect();
            nb.chunks(2).fold(vol, |w, pair| if pair[0] != pair[1] { w * half } else { w })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Assembly<T> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    /// Grid node of each unknown.
    pub unknowns: Vec<usize>,
    /// Region actually solved: the Dirichlet-connected part of the mask.
    pub region: Mask<T>,
    /// Mask nodes left out because they are not connected to Dirichlet data.
    pub dropped: usize,
}

pub fn assemble<T: Real>(problem: &PoissonProblem<T>, fragments: Fragments) -> Result<Assembly<T>> {
    let mask = &problem.mask;
    let grid = *mask.grid();
    let seeds: Vec<usize> = problem.dirichlet.iter().copied().filter(|&d| d < grid.len() && mask.contains(d)).collect();
    if seeds.is_empty() {
        return Err(Error::NonCoercive);
    }
    let region = mask.reachable_from(&seeds);
    let dropped = mask.count() - region.count();
    if dropped > 0 {
        match fragments {
            Fragments::Reject => return Err(Error::Disconnected(dropped)),
            Fragments::Drop => log::warn!("{dropped} mask nodes are not connected to the Dirichlet set and are left out"),
        }
    }
    let mut is_dirichlet = vec![false; grid.len()];
    for &d in &seeds {
        is_dirichlet[d] = true;
    }
    let mut index = vec![usize::MAX; grid.len()];
    let mut unknowns = Vec::new();
    for i in region.iter() {
        if !is_dirichlet[i] {
            index[i] = unknowns.len();
            unknowns.push(i);
        }
    }
    let conductance = grid.spacing().powi(grid.dim() as i32 - 2);
    let weights = nodal_weights(&region);
    let mut row_ptr = Vec::with_capacity(unknowns.len() + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut rhs = Vec::with_capacity(unknowns.len());
    row_ptr.push(0);
    for (r, &node) in unknowns.iter().enumerate() {
        let mut entries: Vec<(usize, T)> = Vec::with_capacity(7);
        let mut diag = T::zero();
        for nb in grid.axis_neighbors(node).flatten() {
            if !region.contains(nb) {
                continue;
            }
            diag = diag + conductance;
            if index[nb] != usize::MAX {
                entries.push((index[nb], -conductance));
            }
        }
        entries.push((r, diag));
        entries.sort_by_key(|e| e.0);
        for (c, v) in entries {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
        rhs.push(problem.source * weights[node]);
    }
    let matrix = CsrMatrix { n: unknowns.len(), row_ptr, cols, vals };
    Ok(Assembly { matrix, rhs, unknowns, region, dropped })
}

#[derive(Clone, Copy, Debug)]
pub struct CgOutcome<T> {
    pub iterations: usize,
    pub relative_residual: T,
}

/// Jacobi-preconditioned conjugate gradients on an SPD matrix; `x` holds the
/// initial guess on entry and the solution on exit.
pub fn conjugate_gradient<T: Real>(a: &CsrMatrix<T>, b: &[T], x: &mut [T], tol: T, max_iter: usize) -> Result<CgOutcome<T>> {
    let n = a.n;
    let dot = |u: &[T], v: &[T]| u.iter().zip(v).fold(T::zero(), |s, (&p, &q)| s + p * q);
    let bnorm = dot(b, b).sqrt();
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(CgOutcome { iterations: 0, relative_residual: T::zero() });
    }
    let inv_diag: Vec<T> = a.diagonal().into_iter().map(|d| T::one() / d).collect();
    let mut r = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut ap = vec![T::zero(); n];
    let mut iterations = 0;
    let mut restarts = 0;
    let true_rel = loop {
        // (re)start from the true residual; recursive residuals drift
        a.apply(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
            z[i] = r[i] * inv_diag[i];
            p[i] = z[i];
        }
        let mut rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol || iterations >= max_iter || restarts > 8 {
            break rel;
        }
        let mut rz = dot(&r, &z);
        while rel > tol && iterations < max_iter {
            a.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > T::zero()) {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] = x[i] + alpha * p[i];
                r[i] = r[i] - alpha * ap[i];
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            iterations += 1;
            rel = dot(&r, &r).sqrt() / bnorm;
        }
        restarts += 1;
    };
    if true_rel > tol {
        return Err(Error::NoConvergence { iterations, residual: true_rel.to_f64_lossy() });
    }
    Ok(CgOutcome { iterations, relative_residual: true_rel })
}

#[derive(Clone, Debug)]
pub struct PoissonSolution<T> {
    pub field: ScalarField<T>,
    pub iterations: usize,
    pub relative_residual: T,
    pub unknowns: usize,
    pub dropped: usize,
}

/// Solves with default fragment handling (drop) and returns the nodal field.
pub fn solve_poisson<T: Real>(problem: &PoissonProblem<T>, cg_tol: T, max_iter: usize) -> Result<ScalarField<T>> {
    let opts = PoissonOptions { cg_tol, max_iter: Some(max_iter), ..Default::default() };
    Ok(solve_poisson_with(problem, &opts, None)?.field)
}

/// Full solve; `initial` is a nodal guess (NaN or off-region entries read as zero).
pub fn solve_poisson_with<T: Real>(problem: &PoissonProblem<T>, opts: &PoissonOptions<T>, initial: Option<&[T]>) -> Result<PoissonSolution<T>> {
    if !(opts.cg_tol > T::zero()) {
        return Err(Error::InvalidArgument("cg tolerance must be positive".into()));
    }
    let asm = assemble(problem, opts.fragments)?;
    let mut x: Vec<T> = asm
        .unknowns
        .iter()
        .map(|&n| initial.map_or(T::zero(), |g| if g[n].is_finite() { g[n] } else { T::zero() }))
        .collect();
    let max_iter = opts.max_iter.unwrap_or(10 * asm.unknowns.len().max(1));
    let out = conjugate_gradient(&asm.matrix, &asm.rhs, &mut x, opts.cg_tol, max_iter)?;
    let grid = *problem.mask.grid();
    let mut values = vec![T::zero(); grid.len()];
    for (k, &n) in asm.unknowns.iter().enumerate() {
        values[n] = x[k];
    }
    let field = ScalarField::new(asm.region, values)?;
    Ok(PoissonSolution {
        field,
        iterations: out.iterations,
        relative_residual: out.relative_residual,
        unknowns: asm.unknowns.len(),
        dropped: asm.dropped,
    })
}

/// `Σ_links (Δu)^2 h^(dim-2)`, the discrete `∫|∇u|^2` over links inside the support.
pub fn dirichlet_energy<T: Real>(u: &ScalarField<T>) -> T {
    let grid = u.grid();
    let c = grid.spacing().powi(grid.dim() as i32 - 2);
    let mut e = T::zero();
    for (i, ui) in u.iter() {
        let coords = grid.coords(i);
        for (a, &k) in coords[..grid.dim()].iter().enumerate() {
            if k + 1 >= grid.shape()[a] {
                continue;
            }
            let stride: usize = grid.shape()[..a].iter().product();
            if let Some(uj) = u.get(i + stride) {
                e = e + (uj - ui) * (uj - ui) * c;
            }
        }
    }
    e
}

/// Lumped quadrature `Σ w_i f(u_i)` over the support.
fn quadrature<T: Real>(u: &ScalarField<T>, f: impl Fn(T) -> T) -> T {
    let w = nodal_weights(u.support());
    u.iter().map(|(i, v)| w[i] * f(v)).sum()
}

/// `∫ u` with lumped weights.
pub fn integral<T: Real>(u: &ScalarField<T>) -> T {
    quadrature(u, |v| v)
}

/// `‖u‖_{L²}` with lumped weights.
pub fn l2_norm<T: Real>(u: &ScalarField<T>) -> T {
    quadrature(u, |v| v * v).sqrt()
}

/// `‖u‖_{H¹} / ‖∇u‖_{L²}`; `1` for a field with zero gradient.
pub fn poincare_ratio<T: Real>(u: &ScalarField<T>) -> T {
    let grad2 = dirichlet_energy(u);
    if grad2 == T::zero() {
        return T::one();
    }
    let l2 = quadrature(u, |v| v * v);
    (T::one() + l2 / grad2).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SliceReport<T> {
    pub time: T,
    pub nodes: usize,
    pub unknowns: usize,
    pub dropped: usize,
    pub iterations: usize,
    pub relative_residual: T,
    pub energy: T,
    pub integral: T,
    pub poincare_ratio: T,
}

/// Activation field on the time samples `t_m = m T / M`, `m = 0..=M`.
#[derive(Clone, Debug)]
pub struct TimeField<T> {
    pub grid: Grid<T>,
    pub times: Vec<T>,
    pub slices: Vec<ScalarField<T>>,
    pub reports: Vec<SliceReport<T>>,
}

impl<T: Real> TimeField<T> {
    pub fn horizon(&self) -> T {
        *self.times.last().unwrap()
    }

    pub fn step(&self) -> T {
        self.times[1] - self.times[0]
    }

    /// `sup_m ‖ū(·, t_m)‖_{L²}`.
    pub fn sup_l2(&self) -> T {
        self.slices.iter().map(l2_norm).fold(T::zero(), T::max)
    }
}

/// Uniform time samples on `[0, horizon]`.
pub fn time_samples<T: Real>(horizon: T, samples: usize) -> Vec<T> {
    (0..=samples).map(|m| horizon * T::from_usize_lossy(m) / T::from_usize_lossy(samples)).collect()
}

/// Region solved at time `t`: `({v < t} ∪ V₀ ∪ Γ) ∩ Ω̄`. At `t = 0` this is
/// the right limit `V₀ ∪ Γ`.
pub fn growth_mask<T: Real>(v: &AttachmentField<T>, domain: &DomainSpec<T>, t: T) -> Mask<T> {
    let mut m = v.v.sublevel(t).union(&domain.v0);
    for &g in &domain.gamma {
        m.insert(g);
    }
    m.intersection(&domain.omega)
}

/// Solves the activation problem on every sampled sublevel of `v`.
pub fn solve_on_growth<T: Real>(
    v: &AttachmentField<T>,
    domain: &DomainSpec<T>,
    horizon: T,
    samples: usize,
    opts: &PoissonOptions<T>,
) -> Result<TimeField<T>> {
    if samples == 0 || !(horizon > T::zero()) {
        return Err(Error::InvalidArgument("need a positive horizon and at least one time sample".into()));
    }
    if domain.gamma.iter().all(|&g| !domain.omega.contains(g)) {
        return Err(Error::NonCoercive);
    }
    let times = time_samples(horizon, samples);
    let problem_at = |t: T| PoissonProblem::unit(growth_mask(v, domain, t), domain.gamma.clone());
    let report = |t: T, s: &PoissonSolution<T>| SliceReport {
        time: t,
        nodes: s.field.support().count(),
        unknowns: s.unknowns,
        dropped: s.dropped,
        iterations: s.iterations,
        relative_residual: s.relative_residual,
        energy: dirichlet_energy(&s.field),
        integral: integral(&s.field),
        poincare_ratio: poincare_ratio(&s.field),
    };
    let solved: Vec<PoissonSolution<T>> = if opts.parallel {
        times.par_iter().map(|&t| solve_poisson_with(&problem_at(t), opts, None)).collect::<Result<_>>()?
    } else {
        let mut out: Vec<PoissonSolution<T>> = Vec::with_capacity(times.len());
        for &t in &times {
            let guess = out.last().map(|s| s.field.values());
            let s = solve_poisson_with(&problem_at(t), opts, guess)?;
            out.push(s);
        }
        out
    };
    let reports = times.iter().zip(&solved).map(|(&t, s)| report(t, s)).collect();
    let slices = solved.into_iter().map(|s| s.field).collect();
    Ok(TimeField { grid: *domain.grid(), times, slices, reports })
}
