//! Time-of-attachment field as a constrained geodesic distance.
//!
//! `v(x)` is the minimum over lattice paths from the seed to `x`, staying in
//! the closed domain, of the summed edge costs
//! `|b - a| * σ(midpoint, a(midpoint), (b - a) / |b - a|)`, where `a(·)` is a
//! frozen activation field. Because the metric is frozen, a label-setting
//! (Dijkstra) pass computes the discrete minimiser exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::grid::{DomainSpec, Grid, Mask, ScalarField, MAX_DIM};
use crate::hamiltonian::SupportEvaluator;
use crate::scalar::{norm, Real};

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Primitive integer offsets of Chebyshev radius at most `radius`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stencil {
    dim: usize,
    radius: usize,
    offsets: Vec<[isize; MAX_DIM]>,
}

impl Stencil {
    pub fn new(dim: usize, radius: usize) -> Result<Self> {
        if !(1..=3).contains(&radius) {
            return Err(Error::StencilRadius(radius));
        }
        let r = radius as isize;
        let zr = if dim == 3 { r } else { 0 };
        let mut offsets = Vec::new();
        for k in -zr..=zr {
            for j in -r..=r {
                for i in -r..=r {
                    let g = gcd(gcd(i.unsigned_abs(), j.unsigned_abs()), k.unsigned_abs());
                    if g == 1 {
                        offsets.push([i, j, k]);
                    }
                }
            }
        }
        Ok(Self { dim, radius, offsets })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offsets(&self) -> &[[isize; MAX_DIM]] {
        &self.offsets
    }

    /// Worst relative excess of the stencil's path metric over the Euclidean
    /// one: `max_d 1 / max_o cos∠(d, o) - 1`. Exact in 2D (largest angular gap), sampled in 3D.
    pub fn angular_excess<T: Real>(&self) -> T {
        if self.dim == 2 {
            let mut angles: Vec<f64> = self.offsets.iter().map(|o| (o[1] as f64).atan2(o[0] as f64)).collect();
            angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let wrap = angles[0] + std::f64::consts::TAU - angles[angles.len() - 1];
            let gap = angles.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max);
            return T::lit(1.0 / (gap / 2.0).cos() - 1.0);
        }
        let units: Vec<[f64; 3]> = self
            .offsets
            .iter()
            .map(|o| {
                let v = [o[0] as f64, o[1] as f64, o[2] as f64];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                [v[0] / n, v[1] / n, v[2] / n]
            })
            .collect();
        let dirs = crate::hamiltonian::unit_directions::<f64>(3, 20000);
        let worst = dirs
            .iter()
            .map(|d| {
                let best = units.iter().map(|u| u[0] * d[0] + u[1] * d[1] + u[2] * d[2]).fold(f64::MIN, f64::max);
                1.0 / best - 1.0
            })
            .fold(0.0, f64::max);
        T::lit(worst)
    }
}

/// Frozen metric: the support evaluator plus a nodal activation field.
#[derive(Clone, Debug)]
pub struct MetricField<T> {
    grid: Grid<T>,
    evaluator: SupportEvaluator<T>,
    activation: Vec<T>,
}

impl<T: Real> MetricField<T> {
    pub fn new(grid: Grid<T>, evaluator: SupportEvaluator<T>, activation: Vec<T>) -> Result<Self> {
        if activation.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if evaluator.dim() != grid.dim() {
            return Err(Error::InvalidArgument("evaluator dimension differs from grid".into()));
        }
        if let Some(i) = activation.iter().position(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite activation at node {i}")));
        }
        Ok(Self { grid, evaluator, activation })
    }

    pub fn uniform(grid: Grid<T>, evaluator: SupportEvaluator<T>, value: T) -> Result<Self> {
        Self::new(grid, evaluator, vec![value; grid.len()])
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn evaluator(&self) -> &SupportEvaluator<T> {
        &self.evaluator
    }

    pub fn activation(&self) -> &[T] {
        &self.activation
    }

    pub fn sigma_lower(&self) -> T {
        self.evaluator.model().sigma_lower()
    }

    pub fn sigma_upper(&self) -> T {
        self.evaluator.model().sigma_upper()
    }

    /// Cost of the straight edge between two nodes, evaluated at its midpoint.
    pub fn edge_cost(&self, from: usize, to: usize) -> Result<T> {
        let ca = self.grid.coords(from);
        let cb = self.grid.coords(to);
        let mut off = [0isize; MAX_DIM];
        for k in 0..MAX_DIM {
            off[k] = cb[k] as isize - ca[k] as isize;
        }
        self.cost_along(from, &off)
    }

    fn cost_along(&self, from: usize, off: &[isize; MAX_DIM]) -> Result<T> {
        let dim = self.grid.dim();
        let h = self.grid.spacing();
        let two = T::lit(2.0);
        let start = self.grid.position(from);
        let mut step = [T::zero(); MAX_DIM];
        let mut mid = [T::zero(); MAX_DIM];
        for k in 0..dim {
            step[k] = T::from_isize_lossy(off[k]);
            mid[k] = start[k] + step[k] * h / two;
        }
        let len = norm(&step[..dim]);
        let mut dir = [T::zero(); MAX_DIM];
        for k in 0..dim {
            dir[k] = step[k] / len;
        }
        let (corners, n) = midpoint_corners(&self.grid, from, off);
        let act = corners[..n].iter().map(|&c| self.activation[c]).sum::<T>() / T::from_usize_lossy(n);
        let cost = len * h * self.evaluator.support(&mid[..dim], act, &dir[..dim])?;
        if !cost.is_finite() || cost < T::zero() {
            return Err(Error::NonFiniteCost { from, to: self.grid.offset(from, off).unwrap_or(usize::MAX) });
        }
        Ok(cost)
    }
}

/// Lattice nodes of the cell containing the midpoint of `from -> from + off`.
/// The edge is admissible only if all of them lie in the domain.
fn midpoint_corners<T: Real>(grid: &Grid<T>, from: usize, off: &[isize; MAX_DIM]) -> ([usize; 8], usize) {
    let c = grid.coords(from);
    let mut lo = [0isize; MAX_DIM];
    let mut odd = [false; MAX_DIM];
    for k in 0..MAX_DIM {
        lo[k] = c[k] as isize + off[k].div_euclid(2);
        odd[k] = off[k].rem_euclid(2) == 1;
    }
    let mut out = [usize::MAX; 8];
    let mut n = 0;
    for mask in 0..8usize {
        if (0..MAX_DIM).any(|k| mask & (1 << k) != 0 && !odd[k]) {
            continue;
        }
        let mut p = [0usize; MAX_DIM];
        for k in 0..MAX_DIM {
            p[k] = (lo[k] + ((mask >> k) & 1) as isize) as usize;
        }
        out[n] = grid.index(&p);
        n += 1;
    }
    (out, n)
}

/// `Some(target)` if the edge stays on the grid and its endpoints and midpoint cell lie in `omega`.
pub fn admissible_edge<T: Real>(omega: &Mask<T>, from: usize, off: &[isize; MAX_DIM]) -> Option<usize> {
    let grid = omega.grid();
    let to = grid.offset(from, off)?;
    if !omega.contains(from) || !omega.contains(to) {
        return None;
    }
    let (corners, n) = midpoint_corners(grid, from, off);
    corners[..n].iter().all(|&c| omega.contains(c)).then_some(to)
}

/// Solved field with its shortest-path tree.
#[derive(Clone, Debug)]
pub struct AttachmentField<T> {
    pub v: ScalarField<T>,
    pub predecessor: Vec<Option<usize>>,
    pub stencil: Stencil,
    pub sources: Mask<T>,
}

#[derive(Clone, Copy)]
struct Entry<T> {
    label: T,
    node: usize,
}

impl<T: PartialOrd> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: PartialOrd> Eq for Entry<T> {}
impl<T: PartialOrd> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: PartialOrd> Ord for Entry<T> {
    // reversed: BinaryHeap pops the smallest label, ties by lowest node index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .label
            .partial_cmp(&self.label)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Label-setting shortest paths from every seed node inside the domain.
pub fn solve_attachment<T: Real>(domain: &DomainSpec<T>, metric: &MetricField<T>, stencil_radius: usize) -> Result<AttachmentField<T>> {
    let grid = *domain.grid();
    if metric.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    let stencil = Stencil::new(grid.dim(), stencil_radius)?;
    let omega = &domain.omega;
    let sources = domain.v0.intersection(omega);
    if sources.is_empty() {
        return Err(Error::EmptySource);
    }
    let n = grid.len();
    let mut label = vec![T::infinity(); n];
    let mut settled = vec![false; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    for s in sources.iter() {
        label[s] = T::zero();
        heap.push(Entry { label: T::zero(), node: s });
    }
    while let Some(Entry { label: l, node }) = heap.pop() {
        if settled[node] || l > label[node] {
            continue;
        }
        settled[node] = true;
        for off in stencil.offsets() {
            let Some(to) = admissible_edge(omega, node, off) else { continue };
            if settled[to] {
                continue;
            }
            let cand = l + metric.cost_along(node, off)?;
            if cand < label[to] {
                label[to] = cand;
                pred[to] = Some(node);
                heap.push(Entry { label: cand, node: to });
            }
        }
    }
    let support = Mask::from_members(grid, settled)?;
    for (i, p) in pred.iter_mut().enumerate() {
        if !support.contains(i) {
            *p = None;
        }
    }
    let v = ScalarField::new(support, label)?;
    Ok(AttachmentField { v, predecessor: pred, stencil, sources })
}

/// Polygonal optimal curve from a node back to the seed.
#[derive(Clone, Debug)]
pub struct Curve<T> {
    /// Nodes from the query point to the seed.
    pub nodes: Vec<usize>,
    pub length: T,
}

impl<T: Real> Curve<T> {
    pub fn points(&self, grid: &Grid<T>) -> Vec<[T; MAX_DIM]> {
        self.nodes.iter().map(|&n| grid.position(n)).collect()
    }
}

/// Follows predecessors from `x` to a seed node.
pub fn backtrack_curve<T: Real>(field: &AttachmentField<T>, x: usize) -> Result<Curve<T>> {
    let grid = field.v.grid();
    if field.v.get(x).is_none() {
        return Err(Error::Absent(x));
    }
    let mut nodes = vec![x];
    let mut length = T::zero();
    let mut cur = x;
    while let Some(p) = field.predecessor[cur] {
        if nodes.len() > grid.len() || field.v.get(p).is_none() {
            return Err(Error::BrokenChain(cur));
        }
        length = length + T::from_u64(grid.index_dist2(cur, p)).unwrap().sqrt() * grid.spacing();
        nodes.push(p);
        cur = p;
    }
    if !field.sources.contains(cur) {
        return Err(Error::BrokenChain(cur));
    }
    Ok(Curve { nodes, length })
}

#[derive(Clone, Debug)]
pub struct GradientReport<T> {
    pub max_gradient: T,
    pub bound: T,
    pub slack: T,
    pub interior_nodes: usize,
    pub exceeding: usize,
}

impl<T: Real> GradientReport<T> {
    pub fn exceed_fraction(&self) -> T {
        if self.interior_nodes == 0 {
            T::zero()
        } else {
            T::from_usize_lossy(self.exceeding) / T::from_usize_lossy(self.interior_nodes)
        }
    }

    pub fn passed(&self) -> bool {
        self.exceeding == 0
    }
}

/// Centered-difference `|∇v|` against `σ^* L`, with slack
/// `σ^* (L ε + 2h)` for the stencil's angular excess `ε`.
pub fn discrete_gradient_bound<T: Real>(field: &AttachmentField<T>, lipschitz: T, sigma_upper: T) -> GradientReport<T> {
    let grid = field.v.grid();
    let dim = grid.dim();
    let h = grid.spacing();
    let bound = sigma_upper * lipschitz;
    let slack = sigma_upper * (lipschitz * field.stencil.angular_excess::<T>() + T::lit(2.0) * h);
    let mut max_g = T::zero();
    let mut interior = 0;
    let mut exceeding = 0;
    'nodes: for (i, _) in field.v.iter() {
        let c = grid.coords(i);
        let mut g2 = T::zero();
        for a in 0..dim {
            if c[a] == 0 || c[a] + 1 == grid.shape()[a] {
                continue 'nodes;
            }
            let mut off = [0isize; MAX_DIM];
            off[a] = 1;
            let hi = grid.offset(i, &off).and_then(|n| field.v.get(n));
            off[a] = -1;
            let lo = grid.offset(i, &off).and_then(|n| field.v.get(n));
            let (Some(hi), Some(lo)) = (hi, lo) else { continue 'nodes };
            let d = (hi - lo) / (h + h);
            g2 = g2 + d * d;
        }
        let g = g2.sqrt();
        interior += 1;
        max_g = max_g.max(g);
        if g > bound + slack {
            exceeding += 1;
        }
    }
    GradientReport { max_gradient: max_g, bound, slack, interior_nodes: interior, exceeding }
}

/// Sup-norm gap between `field` and a fresh solve with `metric`, over domain
/// nodes inside `B_radius` (all domain nodes when `radius` is `None`).
pub fn representation_residual<T: Real>(
    domain: &DomainSpec<T>,
    metric: &MetricField<T>,
    field: &AttachmentField<T>,
    radius: Option<T>,
) -> Result<T> {
    let again = solve_attachment(domain, metric, field.stencil.radius())?;
    Ok(sup_difference(&field.v, &again.v, &domain.omega, radius))
}

/// `sup |a - b|` over `region ∩ B_radius`; infinite when supports disagree there.
pub fn sup_difference<T: Real>(a: &ScalarField<T>, b: &ScalarField<T>, region: &Mask<T>, radius: Option<T>) -> T {
    let grid = a.grid();
    let dim = grid.dim();
    let mut worst = T::zero();
    for i in region.iter() {
        if let Some(r) = radius {
            if norm(&grid.position(i)[..dim]) > r {
                continue;
            }
        }
        match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) => worst = worst.max((x - y).abs()),
            (None, None) => {}
            _ => return T::infinity(),
        }
    }
    worst
}
