mod common;

use accreta_core::grid::{DomainSpec, Grid, Mask};
use accreta_core::hamiltonian::Profile;
use accreta_core::hj::{backtrack_curve, discrete_gradient_bound, solve_attachment, MetricField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_petgraph_on_random_constrained_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..20 {
        let (domain, metric, radius) = common::random_instance(&mut rng);
        let field = solve_attachment(&domain, &metric, radius).unwrap();
        let expect = common::dijkstra_oracle(&domain, &metric, radius);
        for (i, e) in expect.iter().enumerate() {
            assert_eq!(field.v.get(i), *e, "case {case}, node {i}");
        }
    }
}

/// Shortest path length from `c` to `x` around the slab `|x| < w, y > y0`
/// through its two lower corners.
fn slab_geodesic(c: [f64; 2], x: [f64; 2], w: f64, y0: f64) -> f64 {
    let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let blocked = |a: [f64; 2], b: [f64; 2]| {
        // the slab is a vertical wall; a segment crossing x = 0 above y0 is blocked
        (a[0] + w) * (b[0] + w) < 0.0 || (a[0] - w) * (b[0] - w) < 0.0 || a[0].abs() < w || b[0].abs() < w
    };
    let left = [-w, y0];
    let right = [w, y0];
    let crosses = |a: [f64; 2], b: [f64; 2]| {
        if !blocked(a, b) {
            return false;
        }
        // y where the segment meets x = -w and x = w
        [-w, w].iter().any(|&xw| {
            if (a[0] - xw) * (b[0] - xw) > 0.0 || a[0] == b[0] {
                return false;
            }
            let f = (xw - a[0]) / (b[0] - a[0]);
            a[1] + f * (b[1] - a[1]) > y0 + 1e-12
        })
    };
    if !crosses(c, x) {
        return d(c, x);
    }
    let mut best = f64::INFINITY;
    for (p, q) in [(left, right), (right, left)] {
        if !crosses(c, p) {
            let via = if crosses(p, x) { d(c, p) + d(p, q) + d(q, x) } else { d(c, p) + d(p, x) };
            best = best.min(via);
        }
    }
    best
}

#[test]
fn slab_obstacle_with_wide_stencil() {
    let g = Grid::cube(2, -1.0, 1.0, 101).unwrap();
    let (w, y0): (f64, f64) = (0.1, -0.5);
    let omega = Mask::from_predicate(g, |p: &[f64]| !(p[0].abs() < w && p[1] > y0)).unwrap();
    let (c, r) = ([-0.6, 0.5], 0.15);
    let v0 = common::disk(g, c, r);
    let domain = DomainSpec { omega, v0, gamma: vec![], x0: g.nearest_node(&c).unwrap(), lipschitz: 1.0, kappa0: 1.0 };
    let metric = MetricField::uniform(g, common::eikonal(Profile::Constant(1.0), 2), 0.0).unwrap();
    let field = solve_attachment(&domain, &metric, 3).unwrap();
    let expect = common::dijkstra_oracle(&domain, &metric, 3);
    let mut checked = 0;
    for i in domain.omega.iter() {
        assert_eq!(field.v.get(i), expect[i]);
        let p = g.position(i);
        if p[0] > w {
            let exact = slab_geodesic(c, [p[0], p[1]], w, y0) - r;
            let v = field.v.get(i).unwrap();
            if exact > 0.5 {
                assert!((v - exact).abs() <= 0.05 * exact, "node {i} at {p:?}: {v} vs {exact}");
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn gradient_bound_on_l_shaped_domain() {
    let g = Grid::cube(2, -1.0, 1.0, 61).unwrap();
    let omega = Mask::from_predicate(g, |p| !(p[0] > 0.0 && p[1] > 0.0)).unwrap();
    let metric = MetricField::uniform(g, common::eikonal(Profile::Constant(1.0), 2), 0.0).unwrap();

    // geodesic-to-Euclidean ratio over a coarse sample of node pairs
    let sample: Vec<usize> = omega.iter().step_by(97).collect();
    let mut lipschitz: f64 = 1.0;
    for &a in &sample {
        let seed = Mask::from_indices(g, [a]);
        let d = DomainSpec { omega: omega.clone(), v0: seed, gamma: vec![], x0: a, lipschitz: 1.0, kappa0: 1.0 };
        let f = solve_attachment(&d, &metric, 2).unwrap();
        for &b in &sample {
            if a != b {
                let euclid = (g.index_dist2(a, b) as f64).sqrt() * g.spacing();
                lipschitz = lipschitz.max(f.v.get(b).unwrap() / euclid);
            }
        }
    }
    assert!(lipschitz > 1.2 && lipschitz < 2.0, "{lipschitz}");

    let v0 = common::disk(g, [-0.5, -0.5], 0.2);
    let domain = DomainSpec { omega, v0, gamma: vec![], x0: g.nearest_node(&[-0.5, -0.5]).unwrap(), lipschitz, kappa0: 1.0 };
    let field = solve_attachment(&domain, &metric, 2).unwrap();
    let report = discrete_gradient_bound(&field, lipschitz, 1.0);
    assert!(report.passed(), "{report:?}");
}

#[test]
fn optimal_curves_are_no_longer_than_the_bound() {
    let g = Grid::cube(2, -2.0, 2.0, 81).unwrap();
    let domain = common::free_space(g, 1.0);
    let eval = common::eikonal(Profile::Affine { base: 1.0, slope: 1.0, u_min: 0.0, u_max: 1.0 }, 2);
    let activation: Vec<f64> = (0..g.len()).map(|i| (g.position(i)[0] + 2.0) / 4.0).collect();
    let metric = MetricField::new(g, eval, activation).unwrap();
    let field = solve_attachment(&domain, &metric, 2).unwrap();
    let sigma_lower = metric.sigma_lower();
    for (i, v) in field.v.iter().step_by(13) {
        let curve = backtrack_curve(&field, i).unwrap();
        assert!(curve.length <= v / sigma_lower + 2.0 * g.spacing());
        assert!(field.sources.contains(*curve.nodes.last().unwrap()));
    }
    let inside = g.nearest_node(&[0.0, 0.0]).unwrap();
    let c = backtrack_curve(&field, inside).unwrap();
    assert_eq!(c.nodes, vec![inside]);
    assert_eq!(c.length, 0.0);
}

#[test]
fn seed_nodes_are_zero_and_others_positive() {
    let g = Grid::cube(2, -2.0, 2.0, 41).unwrap();
    let domain = common::free_space(g, 0.7);
    let metric = MetricField::uniform(g, common::eikonal(Profile::Constant(2.0), 2), 0.0).unwrap();
    let field = solve_attachment(&domain, &metric, 1).unwrap();
    for (i, v) in field.v.iter() {
        assert_eq!(v == 0.0, domain.v0.contains(i));
    }
}

fn free_space_error(n: usize, radius: usize) -> f64 {
    let g = Grid::cube(2, -3.0, 3.0, n).unwrap();
    let domain = common::free_space(g, 1.0);
    let metric = MetricField::uniform(g, common::eikonal(Profile::Constant(1.0), 2), 0.0).unwrap();
    let field = solve_attachment(&domain, &metric, radius).unwrap();
    field
        .v
        .iter()
        .map(|(i, v)| {
            let p = g.position(i);
            (v - ((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).max(0.0)).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn refinement_reduces_free_space_error() {
    for radius in [2, 3] {
        let errs: Vec<f64> = [51, 101, 201].iter().map(|&n| free_space_error(n, radius)).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "radius {radius}: {errs:?}");
    }
}
