//! Rectilinear lattices, node masks and nodal scalar fields.
//!
//! Every set the solvers manipulate (the closed domain, the seed set, the
//! Dirichlet portion, the grown sublevels) is a [`Mask`] over one [`Grid`].
//! Nodes are addressed by their linear index, axis 0 varying fastest.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Maximum supported dimension.
pub const MAX_DIM: usize = 3;

/// Uniform lattice `origin + h * i`, `i` in `[0, shape)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    dim: usize,
    origin: [T; MAX_DIM],
    spacing: T,
    shape: [usize; MAX_DIM],
    strides: [usize; MAX_DIM],
}

impl<T: Real> Grid<T> {
    pub fn new(origin: &[T], spacing: T, shape: &[usize]) -> Result<Self> {
        let dim = shape.len();
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{2, 3}}")));
        }
        if origin.len() != dim {
            return Err(Error::InvalidGrid("origin length differs from shape length".into()));
        }
        if !(spacing > T::zero()) || !spacing.is_finite() {
            return Err(Error::InvalidGrid("spacing must be positive and finite".into()));
        }
        if shape.iter().any(|&n| n < 3) {
            return Err(Error::InvalidGrid("every axis needs at least 3 nodes".into()));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        let mut o = [T::zero(); MAX_DIM];
        let mut s = [1usize; MAX_DIM];
        o[..dim].copy_from_slice(origin);
        s[..dim].copy_from_slice(shape);
        let strides = [1, s[0], s[0] * s[1]];
        Ok(Self { dim, origin: o, spacing, shape: s, strides })
    }

    /// Square/cubic window `[lo, hi]^dim` with `n` nodes per axis.
    pub fn cube(dim: usize, lo: T, hi: T, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid("need at least 2 nodes per axis".into()));
        }
        let h = (hi - lo) / T::from_usize_lossy(n - 1);
        Self::new(&vec![lo; dim], h, &vec![n; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn spacing(&self) -> T {
        self.spacing
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim]
    }

    #[inline]
    pub fn origin(&self) -> &[T] {
        &self.origin[..self.dim]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of one grid cell, `h^dim`.
    #[inline]
    pub fn cell_volume(&self) -> T {
        self.spacing.powi(self.dim as i32)
    }

    #[inline]
    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; MAX_DIM] {
        let i = idx % self.shape[0];
        let j = (idx / self.shape[0]) % self.shape[1];
        let k = idx / (self.shape[0] * self.shape[1]);
        [i, j, k]
    }

    /// Physical position; trailing unused components are zero.
    #[inline]
    pub fn position(&self, idx: usize) -> [T; MAX_DIM] {
        let c = self.coords(idx);
        let mut p = [T::zero(); MAX_DIM];
        for a in 0..self.dim {
            p[a] = self.origin[a] + self.spacing * T::from_usize_lossy(c[a]);
        }
        p
    }

    /// Node reached by an integer offset, if it stays on the grid.
    #[inline]
    pub fn offset(&self, idx: usize, off: &[isize; MAX_DIM]) -> Option<usize> {
        let c = self.coords(idx);
        let mut out = 0usize;
        for a in 0..MAX_DIM {
            let v = c[a] as isize + off[a];
            if v < 0 || v >= self.shape[a] as isize {
                return None;
            }
            out += v as usize * self.strides[a];
        }
        Some(out)
    }

    /// The `2 * dim` axis neighbours; `None` where the neighbour is off-grid.
    pub fn axis_neighbors(&self, idx: usize) -> impl Iterator<Item = Option<usize>> + '_ {
        let c = self.coords(idx);
        (0..self.dim).flat_map(move |a| {
            let lo = (c[a] > 0).then(|| idx - self.strides[a]);
            let hi = (c[a] + 1 < self.shape[a]).then(|| idx + self.strides[a]);
            [lo, hi]
        })
    }

    /// Nearest node to a physical point, if the point rounds onto the grid.
    pub fn nearest_node(&self, p: &[T]) -> Option<usize> {
        let mut c = [0usize; MAX_DIM];
        for a in 0..self.dim {
            let r = ((p[a] - self.origin[a]) / self.spacing).round();
            if r < T::zero() || r > T::from_usize_lossy(self.shape[a] - 1) {
                return None;
            }
            c[a] = r.to_usize()?;
        }
        Some(self.index(&c[..self.dim]))
    }

    /// Squared Euclidean distance between two nodes in index units.
    #[inline]
    pub fn index_dist2(&self, a: usize, b: usize) -> u64 {
        let ca = self.coords(a);
        let cb = self.coords(b);
        (0..self.dim)
            .map(|k| {
                let d = ca[k] as i64 - cb[k] as i64;
                (d * d) as u64
            })
            .sum()
    }

    /// True when the node lies on the outer frame of the window.
    pub fn on_frame(&self, idx: usize) -> bool {
        let c = self.coords(idx);
        (0..self.dim).any(|a| c[a] == 0 || c[a] + 1 == self.shape[a])
    }
}

/// Boolean membership over all nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask<T> {
    grid: Grid<T>,
    members: Vec<bool>,
}

impl<T: Real> Mask<T> {
    pub fn empty(grid: Grid<T>) -> Self {
        Self { grid, members: vec![false; grid.len()] }
    }

    pub fn full(grid: Grid<T>) -> Self {
        Self { grid, members: vec![true; grid.len()] }
    }

    pub fn from_members(grid: Grid<T>, members: Vec<bool>) -> Result<Self> {
        if members.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, members })
    }

    pub fn from_indices(grid: Grid<T>, nodes: impl IntoIterator<Item = usize>) -> Self {
        let mut m = Self::empty(grid);
        for n in nodes {
            m.members[n] = true;
        }
        m
    }

    /// Membership by strict evaluation of `pred` at every node position.
    /// An empty result is an error.
    pub fn from_predicate(grid: Grid<T>, pred: impl Fn(&[T]) -> bool) -> Result<Self> {
        let m = Self::from_predicate_unchecked(grid, pred);
        if m.is_empty() {
            return Err(Error::EmptySet("predicate selects no grid node".into()));
        }
        Ok(m)
    }

    pub fn from_predicate_unchecked(grid: Grid<T>, pred: impl Fn(&[T]) -> bool) -> Self {
        let dim = grid.dim();
        let members = (0..grid.len()).map(|i| pred(&grid.position(i)[..dim])).collect();
        Self { grid, members }
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        self.members[idx]
    }

    #[inline]
    pub fn insert(&mut self, idx: usize) {
        self.members[idx] = true;
    }

    #[inline]
    pub fn remove(&mut self, idx: usize) {
        self.members[idx] = false;
    }

    pub fn members(&self) -> &[bool] {
        &self.members
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&b| b)
    }

    /// Lebesgue measure surrogate: member count times `h^dim`.
    pub fn measure(&self) -> T {
        T::from_usize_lossy(self.count()) * self.grid.cell_volume()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Self {
        assert_eq!(self.grid, other.grid, "masks live on different grids");
        let members = self.members.iter().zip(&other.members).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, members }
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> Self {
        Self { grid: self.grid, members: self.members.iter().map(|b| !b).collect() }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.grid == other.grid && self.members.iter().zip(&other.members).all(|(&a, &b)| !a || b)
    }

    /// Axis-adjacency component labels; non-members get `usize::MAX`.
    /// Returns the labels and the number of components.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.members.len()];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.members.len() {
            if !self.members[start] || label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            queue.push_back(start);
            while let Some(n) = queue.pop_front() {
                for nb in self.grid.axis_neighbors(n).flatten() {
                    if self.members[nb] && label[nb] == usize::MAX {
                        label[nb] = next;
                        queue.push_back(nb);
                    }
                }
            }
            next += 1;
        }
        (label, next)
    }

    /// Flood-fill connectivity check. The empty mask counts as disconnected.
    pub fn is_connected(&self) -> bool {
        self.components().1 == 1
    }

    /// Members reachable from any of `seeds` through member nodes.
    pub fn reachable_from(&self, seeds: &[usize]) -> Self {
        let mut out = Self::empty(self.grid);
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &s in seeds {
            if self.members[s] && !out.members[s] {
                out.members[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(n) = queue.pop_front() {
            for nb in self.grid.axis_neighbors(n).flatten() {
                if self.members[nb] && !out.members[nb] {
                    out.members[nb] = true;
                    queue.push_back(nb);
                }
            }
        }
        out
    }
}

/// Members with at least one axis neighbour outside the mask or off the grid.
pub fn boundary_nodes<T: Real>(m: &Mask<T>) -> Vec<usize> {
    let g = m.grid();
    m.iter()
        .filter(|&i| g.axis_neighbors(i).any(|nb| nb.is_none_or(|n| !m.contains(n))))
        .collect()
}

/// Nodal values over a supporting mask; unsupported nodes hold NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    support: Mask<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn absent(grid: Grid<T>) -> Self {
        Self { support: Mask::empty(grid), values: vec![T::nan(); grid.len()] }
    }

    /// Builds from a mask and values; values off the mask are overwritten with NaN.
    pub fn new(support: Mask<T>, mut values: Vec<T>) -> Result<Self> {
        if values.len() != support.grid().len() {
            return Err(Error::GridMismatch);
        }
        for (i, v) in values.iter_mut().enumerate() {
            if support.contains(i) {
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("non-finite value at supported node {i}")));
                }
            } else {
                *v = T::nan();
            }
        }
        Ok(Self { support, values })
    }

    /// Constant value on a mask.
    pub fn constant(support: Mask<T>, value: T) -> Self {
        let n = support.grid().len();
        let values = (0..n).map(|i| if support.contains(i) { value } else { T::nan() }).collect();
        Self { support, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        self.support.grid()
    }

    #[inline]
    pub fn support(&self) -> &Mask<T> {
        &self.support
    }

    #[inline]
    pub fn get(&self, idx: usize) -> Option<T> {
        self.support.contains(idx).then(|| self.values[idx])
    }

    /// Raw values, NaN where absent.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn set(&mut self, idx: usize, value: T) {
        debug_assert!(value.is_finite());
        self.support.insert(idx);
        self.values[idx] = value;
    }

    pub fn clear(&mut self, idx: usize) {
        self.support.remove(idx);
        self.values[idx] = T::nan();
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.support.iter().map(move |i| (i, self.values[i]))
    }

    pub fn max(&self) -> Option<T> {
        self.iter().map(|(_, v)| v).fold(None, |m, v| Some(m.map_or(v, |m: T| m.max(v))))
    }

    /// Values extended by zero off the support.
    pub fn zero_extended(&self) -> Vec<T> {
        self.values.iter().map(|&v| if v.is_nan() { T::zero() } else { v }).collect()
    }

    /// `{ x in support : value(x) < t }`.
    pub fn sublevel(&self, t: T) -> Mask<T> {
        sublevel(self, t)
    }
}

/// Strict sublevel set of a field, intersected with its support.
pub fn sublevel<T: Real>(v: &ScalarField<T>, t: T) -> Mask<T> {
    let grid = *v.grid();
    let members = (0..grid.len()).map(|i| v.get(i).is_some_and(|x| x < t)).collect();
    Mask { grid, members }
}

/// Geometric data of the growth problem on one grid.
#[derive(Clone, Debug)]
pub struct DomainSpec<T> {
    /// Closed domain.
    pub omega: Mask<T>,
    /// Seed set at time zero.
    pub v0: Mask<T>,
    /// Dirichlet node set on the domain boundary next to the seed.
    pub gamma: Vec<usize>,
    /// John centre inside the seed.
    pub x0: usize,
    /// Geodesic-to-Euclidean comparability constant of the domain.
    pub lipschitz: T,
    /// John constant of the seed with respect to `x0`.
    pub kappa0: T,
}

/// A violated structural requirement of a [`DomainSpec`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DomainIssue {
    OmegaEmpty,
    OmegaDisconnected,
    SeedEmpty,
    SeedOutsideDomain,
    SeedDisconnected,
    CentreOutsideSeed,
    DirichletEmpty,
    DirichletOffBoundary(usize),
    DirichletNotAdjacentToSeed(usize),
    BadConstant(&'static str),
    /// Some seed node lies farther from `x0` than `depth / kappa0`, so
    /// `kappa0` cannot be a John constant of the seed about `x0`.
    SeedBeyondJohnBall,
}

impl<T: Real> DomainSpec<T> {
    /// Lists every violated invariant; empty means the domain is usable.
    pub fn issues(&self) -> Vec<DomainIssue> {
        let mut out = Vec::new();
        let grid = self.omega.grid();
        if self.omega.is_empty() {
            out.push(DomainIssue::OmegaEmpty);
        } else if !self.omega.is_connected() {
            out.push(DomainIssue::OmegaDisconnected);
        }
        if self.v0.is_empty() {
            out.push(DomainIssue::SeedEmpty);
        } else {
            if !self.v0.is_subset(&self.omega) {
                out.push(DomainIssue::SeedOutsideDomain);
            }
            if !self.v0.is_connected() {
                out.push(DomainIssue::SeedDisconnected);
            }
        }
        if self.x0 >= grid.len() || !self.v0.contains(self.x0) {
            out.push(DomainIssue::CentreOutsideSeed);
        }
        if self.gamma.is_empty() {
            out.push(DomainIssue::DirichletEmpty);
        }
        let frame: Vec<bool> = {
            let mut f = vec![false; grid.len()];
            for b in boundary_nodes(&self.omega) {
                f[b] = true;
            }
            f
        };
        for &g in &self.gamma {
            if g >= grid.len() || !frame[g] {
                out.push(DomainIssue::DirichletOffBoundary(g));
                continue;
            }
            let touches = self.v0.contains(g)
                || grid.axis_neighbors(g).flatten().any(|n| self.v0.contains(n));
            if !touches {
                out.push(DomainIssue::DirichletNotAdjacentToSeed(g));
            }
        }
        if !(self.lipschitz >= T::one()) || !self.lipschitz.is_finite() {
            out.push(DomainIssue::BadConstant("lipschitz constant must be finite and >= 1"));
        }
        if !(self.kappa0 > T::zero() && self.kappa0 <= T::one()) {
            out.push(DomainIssue::BadConstant("seed John constant must lie in (0, 1]"));
        } else if !self.v0.is_empty() && self.x0 < grid.len() && self.v0.contains(self.x0) {
            let reach = self.v0.iter().map(|i| grid.index_dist2(i, self.x0)).max().unwrap_or(0);
            let reach = T::from_u64(reach).unwrap().sqrt() * grid.spacing();
            if reach > self.centre_depth() / self.kappa0 + grid.spacing() {
                out.push(DomainIssue::SeedBeyondJohnBall);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("domain violates {issues:?}")))
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        self.omega.grid()
    }

    /// Euclidean distance from the John centre to the nearest node outside the seed.
    pub fn centre_depth(&self) -> T {
        let g = self.grid();
        let best = (0..g.len())
            .filter(|&i| !self.v0.contains(i))
            .map(|i| g.index_dist2(i, self.x0))
            .min();
        match best {
            Some(d2) => T::from_u64(d2).unwrap().sqrt() * g.spacing(),
            None => T::infinity(),
        }
    }

    /// Distance from the origin to the John centre.
    pub fn centre_norm(&self) -> T {
        let p = self.grid().position(self.x0);
        crate::scalar::norm(&p[..self.grid().dim()])
    }

    /// Radius of the ball that contains every grown set up to time `t`.
    pub fn containment_radius(&self, t: T, sigma_lower: T) -> T {
        t / sigma_lower + self.centre_depth() / self.kappa0 + self.centre_norm()
    }
}
