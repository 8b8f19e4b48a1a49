mod common;

use accreta_core::elliptic::{
    dirichlet_energy, integral, poincare_ratio, solve_on_growth, solve_poisson, solve_poisson_with, Fragments, PoissonOptions,
    PoissonProblem,
};
use accreta_core::grid::{boundary_nodes, Grid, Mask};
use accreta_core::hamiltonian::Profile;
use accreta_core::hj::{solve_attachment, MetricField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn cg_matches_dense_lu_on_random_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cases = 0;
    while cases < 12 {
        let g = if cases % 3 == 2 {
            Grid::new(&[0.0, 0.0, 0.0], 0.2, &[6, 6, 6]).unwrap()
        } else {
            Grid::new(&[0.0, 0.0], 0.1, &[15, 15]).unwrap()
        };
        let members: Vec<bool> = (0..g.len()).map(|_| rng.random_bool(0.8)).collect();
        let inside: Vec<usize> = (0..g.len()).filter(|&i| members[i]).collect();
        let dirichlet: Vec<usize> = (0..rng.random_range(1..4)).map(|_| inside[rng.random_range(0..inside.len())]).collect();
        let expect = common::dense_reference(&g, &members, &dirichlet);
        let unknowns = expect.iter().filter(|e| e.is_some()).count();
        if !(20..=200).contains(&unknowns) {
            continue;
        }
        let mask = Mask::from_members(g, members).unwrap();
        let problem = PoissonProblem::unit(mask, dirichlet);
        let opts = PoissonOptions { cg_tol: 1e-12, fragments: Fragments::Drop, ..Default::default() };
        let got = solve_poisson_with(&problem, &opts, None).unwrap().field;
        for (i, e) in expect.iter().enumerate() {
            match (got.get(i), e) {
                (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-8, "case {cases} node {i}: {a} vs {b}"),
                (None, None) => {}
                other => panic!("case {cases} node {i}: support differs {other:?}"),
            }
        }
        cases += 1;
    }
}

fn unit_disk(n: usize) -> (Grid<f64>, PoissonProblem<f64>) {
    let g = Grid::cube(2, -1.1, 1.1, n).unwrap();
    let mask = common::disk(g, [0.0, 0.0], 1.0);
    let dirichlet = boundary_nodes(&mask);
    (g, PoissonProblem::unit(mask, dirichlet))
}

#[test]
fn disk_matches_radial_solution() {
    let (g, problem) = unit_disk(89);
    let u = solve_poisson(&problem, 1e-10, 100_000).unwrap();
    let h = g.spacing();
    for (i, v) in u.iter() {
        let p = g.position(i);
        let exact = (1.0 - p[0] * p[0] - p[1] * p[1]) / 4.0;
        assert!((v - exact).abs() <= 3.0 * h, "{p:?}: {v} vs {exact}");
    }
}

#[test]
fn energy_equals_integral_and_solution_is_nonnegative() {
    let (_, problem) = unit_disk(61);
    let u = solve_poisson(&problem, 1e-10, 100_000).unwrap();
    let (e, m) = (dirichlet_energy(&u), integral(&u));
    assert!((e - m).abs() <= 1e-8 * m, "{e} vs {m}");
    assert!(u.iter().all(|(_, v)| v >= -1e-12));

    let d = common::wall_domain(41, 0.4);
    let mask = Mask::from_predicate(*d.omega.grid(), |p| p[1] < 0.3 || p[0] < 0.4).unwrap();
    let u = solve_poisson(&PoissonProblem::unit(mask, d.gamma.clone()), 1e-10, 100_000).unwrap();
    let (e, m) = (dirichlet_energy(&u), integral(&u));
    assert!((e - m).abs() <= 1e-8 * m, "{e} vs {m}");
    assert!(u.iter().all(|(_, v)| v >= -1e-12));
}

#[test]
fn energy_grows_with_the_region() {
    let domain = common::wall_domain(61, 0.3);
    let g = *domain.grid();
    let metric = MetricField::uniform(g, common::eikonal(Profile::Constant(1.0), 2), 0.0).unwrap();
    let v = solve_attachment(&domain, &metric, 2).unwrap();
    let opts = PoissonOptions { cg_tol: 1e-10, ..Default::default() };
    let tf = solve_on_growth(&v, &domain, 1.2, 24, &opts).unwrap();
    for w in tf.reports.windows(2) {
        assert!(w[1].nodes >= w[0].nodes);
        assert!(w[1].energy >= w[0].energy * (1.0 - 1e-8), "{} -> {}", w[0].energy, w[1].energy);
    }
    assert!(tf.reports.last().unwrap().energy > 2.0 * tf.reports[0].energy);
}

#[test]
fn poincare_ratio_is_uniform_over_sectors() {
    let g = Grid::cube(2, -1.1, 1.1, 67).unwrap();
    let mut ratios = Vec::new();
    for k in 1..=8 {
        let opening = k as f64 * std::f64::consts::PI / 4.0 - 0.05;
        let mask = Mask::from_predicate(g, |p: &[f64]| {
            let r2 = p[0] * p[0] + p[1] * p[1];
            let a = p[1].atan2(p[0]).rem_euclid(2.0 * std::f64::consts::PI);
            r2 < 1.0 && (r2 < 0.01 || a <= opening)
        })
        .unwrap();
        let arc: Vec<usize> = mask
            .iter()
            .filter(|&i| {
                let p = g.position(i);
                p[0] * p[0] + p[1] * p[1] > 0.8
            })
            .collect();
        let u = solve_poisson(&PoissonProblem::unit(mask, arc), 1e-10, 100_000).unwrap();
        ratios.push(poincare_ratio(&u));
    }
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min >= 1.0 && max <= 1.2, "{ratios:?}");
}
