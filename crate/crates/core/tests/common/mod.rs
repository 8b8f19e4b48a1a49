#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use accreta_core::grid::{DomainSpec, Grid, Mask};
use accreta_core::hamiltonian::{HamiltonianModel, Profile, SupportEvaluator};
use accreta_core::hj::{admissible_edge, MetricField, Stencil};
use nalgebra::{DMatrix, DVector};
use petgraph::algo::dijkstra;
use petgraph::graph::{DiGraph, NodeIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn disk(grid: Grid<f64>, centre: [f64; 2], r: f64) -> Mask<f64> {
    Mask::from_predicate_unchecked(grid, |p| (p[0] - centre[0]).powi(2) + (p[1] - centre[1]).powi(2) < r * r)
}

pub fn eikonal(profile: Profile<f64>, dim: usize) -> SupportEvaluator<f64> {
    SupportEvaluator::new(Arc::new(HamiltonianModel::eikonal(profile).unwrap()), dim)
}

/// Free-space domain on the whole window, seeded by a ball at the origin.
/// Dirichlet data are irrelevant for geodesic-only use; the frame node
/// nearest the seed is recorded to keep the struct complete.
pub fn free_space(grid: Grid<f64>, radius: f64) -> DomainSpec<f64> {
    let omega = Mask::full(grid);
    let v0 = disk(grid, [0.0, 0.0], radius);
    let x0 = grid.nearest_node(&[0.0, 0.0]).unwrap();
    DomainSpec { omega, v0, gamma: vec![0], x0, lipschitz: 1.0, kappa0: 1.0 }
}

/// Box window `[0, 2] x [-1, 1]` with the seed `B(0, r)` against the wall
/// `x = 0`, whose wall nodes carry the Dirichlet data.
pub fn wall_domain(n: usize, r: f64) -> DomainSpec<f64> {
    let h = 2.0 / (n - 1) as f64;
    let g = Grid::new(&[0.0, -1.0], h, &[n, n]).unwrap();
    let omega = Mask::full(g);
    let v0 = disk(g, [0.0, 0.0], r);
    let gamma = v0.iter().filter(|&i| g.coords(i)[0] == 0).collect();
    DomainSpec { omega, v0, gamma, x0: g.index(&[0, n / 2]), lipschitz: 1.0, kappa0: 1.0 }
}

/// Vertices of the Koch curve on `[0, 1]` after `levels` refinements.
pub fn koch(levels: usize) -> Vec<[f64; 2]> {
    let mut pts = vec![[0.0, 0.0], [1.0, 0.0]];
    let (s, c) = (std::f64::consts::FRAC_PI_3.sin(), std::f64::consts::FRAC_PI_3.cos());
    for _ in 0..levels {
        let mut next = Vec::with_capacity(pts.len() * 4);
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let d = [(b[0] - a[0]) / 3.0, (b[1] - a[1]) / 3.0];
            let p1 = [a[0] + d[0], a[1] + d[1]];
            let p3 = [a[0] + 2.0 * d[0], a[1] + 2.0 * d[1]];
            let p2 = [p1[0] + c * d[0] - s * d[1], p1[1] + s * d[0] + c * d[1]];
            next.extend([a, p1, p2, p3]);
        }
        next.push(*pts.last().unwrap());
        pts = next;
    }
    pts
}

/// Nodes nearest to a dense sampling of a polyline.
pub fn rasterize_polyline(grid: &Grid<f64>, pts: &[[f64; 2]]) -> Vec<usize> {
    let h = grid.spacing();
    let mut nodes = Vec::new();
    for w in pts.windows(2) {
        let len = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
        let steps = (len / (0.25 * h)).ceil().max(1.0) as usize;
        for k in 0..=steps {
            let f = k as f64 / steps as f64;
            let p = [w[0][0] + f * (w[1][0] - w[0][0]), w[0][1] + f * (w[1][1] - w[0][1])];
            if let Some(n) = grid.nearest_node(&p) {
                nodes.push(n);
            }
        }
    }
    nodes.sort_unstable();
    nodes.dedup();
    nodes
}

/// Shortest paths by petgraph on the graph the solver is specified to use:
/// domain nodes, admissible stencil edges, costs from `MetricField::edge_cost`,
/// and a virtual source joined to every seed node at zero cost.
pub fn dijkstra_oracle(domain: &DomainSpec<f64>, metric: &MetricField<f64>, radius: usize) -> Vec<Option<f64>> {
    let grid = *domain.grid();
    let stencil = Stencil::new(grid.dim(), radius).unwrap();
    let mut g = DiGraph::<usize, f64>::new();
    let mut ids: HashMap<usize, NodeIndex> = HashMap::new();
    for i in domain.omega.iter() {
        ids.insert(i, g.add_node(i));
    }
    for i in domain.omega.iter() {
        for off in stencil.offsets() {
            if let Some(j) = admissible_edge(&domain.omega, i, off) {
                g.add_edge(ids[&i], ids[&j], metric.edge_cost(i, j).unwrap());
            }
        }
    }
    let source = g.add_node(usize::MAX);
    for i in domain.v0.intersection(&domain.omega).iter() {
        g.add_edge(source, ids[&i], 0.0);
    }
    let dist = dijkstra(&g, source, None, |e| *e.weight());
    (0..grid.len()).map(|i| ids.get(&i).and_then(|id| dist.get(id).copied())).collect()
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> (DomainSpec<f64>, MetricField<f64>, usize) {
    loop {
        let nx = rng.random_range(8..=50);
        let ny = rng.random_range(8..=50);
        let g = Grid::new(&[0.0, 0.0], 1.0 / 16.0, &[nx, ny]).unwrap();
        let holes: Vec<[f64; 4]> = (0..rng.random_range(0..4))
            .map(|_| {
                let x = rng.random_range(0.0..g.spacing() * nx as f64);
                let y = rng.random_range(0.0..g.spacing() * ny as f64);
                [x, y, x + rng.random_range(0.1..0.8), y + rng.random_range(0.1..0.8)]
            })
            .collect();
        let omega = Mask::from_predicate_unchecked(g, |p| !holes.iter().any(|b| b[0] < p[0] && p[0] < b[2] && b[1] < p[1] && p[1] < b[3]));
        let c = [rng.random_range(0.0..g.spacing() * nx as f64), rng.random_range(0.0..g.spacing() * ny as f64)];
        let seed = disk(g, c, rng.random_range(0.1..0.5)).intersection(&omega);
        if seed.is_empty() {
            continue;
        }
        let x0 = seed.iter().next().unwrap();
        let domain = DomainSpec { omega, v0: seed, gamma: vec![], x0, lipschitz: 1.0, kappa0: 1.0 };
        let eval = eikonal(Profile::Affine { base: 1.0, slope: 0.8, u_min: 0.0, u_max: 1.0 }, 2);
        let activation = (0..g.len()).map(|_| rng.random_range(0.0..1.0)).collect();
        let metric = MetricField::new(g, eval, activation).unwrap();
        return (domain, metric, rng.random_range(1..=3));
    }
}


/// Axis neighbours by coordinates, written out independently of the grid type.
pub fn neighbours(shape: &[usize], idx: usize) -> Vec<Option<usize>> {
    let dim = shape.len();
    let mut c = vec![0; dim];
    let mut rest = idx;
    for a in 0..dim {
        c[a] = rest % shape[a];
        rest /= shape[a];
    }
    let stride = |a: usize| shape[..a].iter().product::<usize>();
    let mut out = Vec::new();
    for a in 0..dim {
        out.push((c[a] > 0).then(|| idx - stride(a)));
        out.push((c[a] + 1 < shape[a]).then(|| idx + stride(a)));
    }
    out
}

/// Dense reference: graph Laplacian with conductance `h^(d-2)` on the
/// Dirichlet-connected part of the mask, lumped right-hand side, LU solve.
pub fn dense_reference(grid: &Grid<f64>, mask: &[bool], dirichlet: &[usize]) -> Vec<Option<f64>> {
    let shape = grid.shape();
    let dim = shape.len();
    let h = grid.spacing();
    let mut region = vec![false; mask.len()];
    let mut queue: VecDeque<usize> = dirichlet.iter().copied().filter(|&d| mask[d]).collect();
    for &d in &queue {
        region[d] = true;
    }
    while let Some(i) = queue.pop_front() {
        for j in neighbours(shape, i).into_iter().flatten() {
            if mask[j] && !region[j] {
                region[j] = true;
                queue.push_back(j);
            }
        }
    }
    let unknowns: Vec<usize> = (0..mask.len()).filter(|&i| region[i] && !dirichlet.contains(&i)).collect();
    let pos = |i: usize| unknowns.iter().position(|&u| u == i);
    let n = unknowns.len();
    let k = h.powi(dim as i32 - 2);
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for (r, &i) in unknowns.iter().enumerate() {
        let nb = neighbours(shape, i);
        let mut w = h.powi(dim as i32);
        for pair in nb.chunks(2) {
            let inside = pair.iter().filter(|j| j.is_some_and(|j| region[j])).count();
            if inside == 1 {
                w *= 0.5;
            }
        }
        b[r] = w;
        for j in nb.into_iter().flatten().filter(|&j| region[j]) {
            a[(r, r)] += k;
            if let Some(c) = pos(j) {
                a[(r, c)] -= k;
            }
        }
    }
    let x = a.lu().solve(&b).expect("reference system is singular");
    (0..mask.len())
        .map(|i| if dirichlet.contains(&i) && region[i] { Some(0.0) } else { pos(i).map(|r| x[r]) })
        .collect()
}
