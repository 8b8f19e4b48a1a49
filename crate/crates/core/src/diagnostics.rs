//! Regularity statistics of the grown sets, each checked against its bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{boundary_nodes, DomainSpec, Grid, Mask, ScalarField, MAX_DIM};
use crate::hj::{backtrack_curve, discrete_gradient_bound, AttachmentField};
use crate::scalar::{linear_fit, norm, Real};

const FAR: i64 = i64::MAX / 4;

fn strides<T: Real>(grid: &Grid<T>) -> [usize; MAX_DIM] {
    let mut s = [0; MAX_DIM];
    for (a, st) in s.iter_mut().enumerate().take(grid.dim()) {
        let mut c = [0usize; MAX_DIM];
        c[a] = 1;
        *st = grid.index(&c[..grid.dim()]);
    }
    s
}

/// Lower envelope of parabolas `f(q) + (p - q)²` along one line.
fn envelope_1d(f: &[i64], out: &mut [i64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    for (q, &fq) in f.iter().enumerate() {
        if fq >= FAR {
            continue;
        }
        let key = |p: usize| (f[p] + (p * p) as i64) as f64;
        loop {
            let Some(&last) = v.last() else {
                v.push(q);
                z.push(f64::NEG_INFINITY);
                break;
            };
            let s = (key(q) - key(last)) / (2.0 * (q as f64 - last as f64));
            if s <= *z.last().unwrap() {
                v.pop();
                z.pop();
            } else {
                v.push(q);
                z.push(s);
                break;
            }
        }
    }
    if v.is_empty() {
        out.fill(FAR);
        return;
    }
    let mut k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < p as f64 {
            k += 1;
        }
        let d = p as i64 - v[k] as i64;
        *o = f[v[k]] + d * d;
    }
}

/// Exact squared distance, in index units, from every node to the nearest
/// member of `targets`; `None` where `targets` is empty.
pub fn squared_distance_transform<T: Real>(targets: &Mask<T>) -> Option<Vec<u64>> {
    if targets.is_empty() {
        return None;
    }
    let grid = targets.grid();
    let st = strides(grid);
    let mut d: Vec<i64> = targets.members().iter().map(|&m| if m { 0 } else { FAR }).collect();
    let (mut v, mut z) = (Vec::new(), Vec::new());
    for a in 0..grid.dim() {
        let n = grid.shape()[a];
        let mut line = vec![0i64; n];
        let mut out = vec![0i64; n];
        for start in 0..grid.len() {
            if grid.coords(start)[a] != 0 {
                continue;
            }
            for (q, l) in line.iter_mut().enumerate() {
                *l = d[start + q * st[a]];
            }
            envelope_1d(&line, &mut out, &mut v, &mut z);
            for (q, &o) in out.iter().enumerate() {
                d[start + q * st[a]] = o;
            }
        }
    }
    Some(d.into_iter().map(|x| x as u64).collect())
}

/// Excess `sup_{a in A} d(a, B)` in index units squared.
fn excess2<T: Real>(a: &Mask<T>, to_b: &[u64]) -> u64 {
    a.iter().map(|i| to_b[i]).max().unwrap_or(0)
}

/// Hausdorff distance between two nonempty masks on one grid.
pub fn hausdorff<T: Real>(a: &Mask<T>, b: &Mask<T>) -> Result<T> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    let (Some(da), Some(db)) = (squared_distance_transform(a), squared_distance_transform(b)) else {
        return Err(Error::EmptySet("hausdorff distance of an empty mask".into()));
    };
    let e = excess2(a, &db).max(excess2(b, &da));
    Ok(T::from_u64(e).unwrap().sqrt() * a.grid().spacing())
}

/// One quantitative check with its verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, bound: f64, slack: f64) -> Self {
        let pass = measured <= bound + slack;
        Check { name: name.into(), measured, bound, slack, pass }
    }
}

/// Sublevel pair `s < t` with its Hausdorff and measure increments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimePair {
    pub s: f64,
    pub t: f64,
    pub hausdorff: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
    /// `|V(t) \ V(s)|`.
    pub measure_gain: f64,
}

/// `d_H(V(t), V(s)) ≤ (t - s) / σ_* + 2h` for all sampled pairs.
pub fn check_time_lipschitz<T: Real>(v: &ScalarField<T>, times: &[T], sigma_lower: T) -> Result<Vec<TimePair>> {
    let grid = v.grid();
    let h = grid.spacing();
    let cell = grid.cell_volume();
    let sets: Vec<Mask<T>> = times.iter().map(|&t| v.sublevel(t)).collect();
    let mut out = Vec::new();
    for j in 0..times.len() {
        for i in 0..j {
            let (s, t) = (times[i], times[j]);
            if !(s < t) {
                return Err(Error::InvalidArgument("times must be increasing".into()));
            }
            let dh = hausdorff(&sets[j], &sets[i])?;
            let bound = (t - s) / sigma_lower;
            let slack = h + h;
            let gain = T::from_usize_lossy(sets[j].difference(&sets[i]).count()) * cell;
            out.push(TimePair {
                s: s.to_f64_lossy(),
                t: t.to_f64_lossy(),
                hausdorff: dh.to_f64_lossy(),
                bound: bound.to_f64_lossy(),
                slack: slack.to_f64_lossy(),
                pass: dh <= bound + slack,
                measure_gain: gain.to_f64_lossy(),
            });
        }
    }
    Ok(out)
}

/// Least-squares fit `|V(t) \ V(s)| ≈ c (t - s)^μ` over pairs with positive gain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub coefficient: f64,
    pub exponent: f64,
    pub pairs: usize,
}

pub fn holder_fit(pairs: &[TimePair]) -> Result<HolderFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        pairs.iter().filter(|p| p.measure_gain > 0.0).map(|p| ((p.t - p.s).ln(), p.measure_gain.ln())).unzip();
    if xs.len() < 2 {
        return Err(Error::DegenerateFit("fewer than two pairs with positive measure gain".into()));
    }
    let (a, b) = linear_fit(&xs, &ys).ok_or_else(|| Error::DegenerateFit("all pairs share one time gap".into()))?;
    Ok(HolderFit { coefficient: a.exp(), exponent: b, pairs: xs.len() })
}

/// Candidate John curve from a boundary node to the centre.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JohnCurve {
    pub start: usize,
    pub points: Vec<Vec<f64>>,
    /// Arc length from the start.
    pub arc: Vec<f64>,
    /// Certified lower bound on the distance to the complement at each point.
    pub clearance: Vec<f64>,
    /// `min_s clearance(s) / s` along the curve, capped at one.
    pub ratio: f64,
}

impl JohnCurve {
    /// Re-checks `clearance ≥ κ s` at every stored point.
    pub fn verify(&self, kappa: f64) -> bool {
        self.arc.iter().zip(&self.clearance).all(|(&s, &d)| d >= kappa * s - 1e-12 * s.max(1.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JohnEstimate {
    pub kappa: f64,
    pub curves: Vec<JohnCurve>,
}

/// Boundary nodes of `mask`, at most `samples` of them, stratified by
/// direction from `x0`.
fn stratified_boundary<T: Real>(mask: &Mask<T>, x0: usize, samples: usize) -> Vec<usize> {
    let grid = mask.grid();
    let dim = grid.dim();
    let c = grid.position(x0);
    let nodes = boundary_nodes(mask);
    if nodes.len() <= samples {
        return nodes;
    }
    let dirs = crate::hamiltonian::unit_directions::<f64>(dim, samples);
    let mut best: Vec<Option<(f64, usize)>> = vec![None; dirs.len()];
    for &n in &nodes {
        let p = grid.position(n);
        let mut d = [0.0; MAX_DIM];
        for a in 0..dim {
            d[a] = (p[a] - c[a]).to_f64_lossy();
        }
        let r = norm(&d[..dim]);
        if r == 0.0 {
            continue;
        }
        let (bin, cos) = dirs
            .iter()
            .enumerate()
            .map(|(k, u)| (k, (0..dim).map(|a| u[a] * d[a]).sum::<f64>() / r))
            .fold((0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best[bin].is_none_or(|(c0, _)| cos > c0) {
            best[bin] = Some((cos, n));
        }
    }
    best.into_iter().flatten().map(|(_, n)| n).collect()
}

/// Lower estimate of the John constant of `mask` about `x0`.
///
/// Each sampled boundary node is joined to the seed by its backtracked optimal
/// curve, then to `x0` by a straight segment. The clearance at a point is
/// the distance to the nearest node of `outside` (nodes not in the set),
/// less half a cell, and between points it is bounded below using the
/// 1-Lipschitz property of the distance function.
pub fn john_constant_estimate<T: Real>(
    mask: &Mask<T>,
    outside: &Mask<T>,
    x0: usize,
    field: &AttachmentField<T>,
    samples: usize,
) -> Result<JohnEstimate> {
    let grid = *mask.grid();
    let dim = grid.dim();
    let h = grid.spacing().to_f64_lossy();
    if !mask.contains(x0) {
        return Err(Error::InvalidArgument("John centre outside the set".into()));
    }
    let reach = mask.reachable_from(&[x0]);
    let to_outside = squared_distance_transform(outside);
    let pos = |n: usize| -> Vec<f64> { grid.position(n)[..dim].iter().map(|x| x.to_f64_lossy()).collect() };
    let clearance_at = |p: &[f64]| -> f64 {
        let Some(d2) = &to_outside else { return f64::INFINITY };
        let pt: Vec<T> = p.iter().map(|&x| T::lit(x)).collect();
        let Some(n) = grid.nearest_node(&pt) else { return 0.0 };
        let q = pos(n);
        let gap = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        ((d2[n] as f64).sqrt() * h - 0.5 * h - gap).max(0.0)
    };
    let centre = pos(x0);
    let mut curves = Vec::new();
    let mut kappa = 1.0f64;
    for start in stratified_boundary(mask, x0, samples) {
        if !reach.contains(start) {
            return Err(Error::Disconnected(start));
        }
        let path = backtrack_curve(field, start)?;
        let mut points: Vec<Vec<f64>> = path.nodes.iter().map(|&n| pos(n)).collect();
        let tail = points.last().unwrap().clone();
        let len = tail.iter().zip(&centre).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let pieces = (len / h).ceil() as usize;
        for k in 1..=pieces {
            let f = k as f64 / pieces as f64;
            points.push(tail.iter().zip(&centre).map(|(a, b)| a + (b - a) * f).collect());
        }
        let mut arc = vec![0.0];
        for w in points.windows(2) {
            let step = w[0].iter().zip(&w[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            arc.push(arc.last().unwrap() + step);
        }
        let clearance: Vec<f64> = points.iter().map(|p| clearance_at(p)).collect();
        let mut ratio = 1.0f64;
        for i in 0..points.len() {
            if arc[i] > 0.0 {
                ratio = ratio.min(clearance[i] / arc[i]);
            }
            if i + 1 < points.len() {
                // kink of max(d_i - (s - s_i), d_{i+1} - (s_{i+1} - s))
                let (s1, s2, d1, d2) = (arc[i], arc[i + 1], clearance[i], clearance[i + 1]);
                let s = 0.5 * (d1 - d2 + s1 + s2);
                if s > s1 && s < s2 && s > 0.0 {
                    ratio = ratio.min((d1 - (s - s1)).max(0.0) / s);
                }
            }
        }
        kappa = kappa.min(ratio);
        curves.push(JohnCurve { start, points, arc, clearance, ratio });
    }
    Ok(JohnEstimate { kappa, curves })
}

/// Box-counting dimension estimate: slope of `log N(r)` against `log(1/r)`.
/// Scales below `2h` are discarded; at least three must remain.
pub fn box_counting_slope<T: Real>(grid: &Grid<T>, nodes: &[usize], scales: &[T]) -> Result<T> {
    let h = grid.spacing();
    let usable: Vec<T> = scales.iter().copied().filter(|&r| r >= h + h).collect();
    if usable.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} usable scales, need 3", usable.len())));
    }
    if nodes.is_empty() {
        return Err(Error::DegenerateFit("empty boundary".into()));
    }
    let dim = grid.dim();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &r in &usable {
        let ratio = r / h;
        let mut boxes: Vec<[i64; MAX_DIM]> = nodes
            .iter()
            .map(|&n| {
                let c = grid.coords(n);
                let mut b = [0i64; MAX_DIM];
                for a in 0..dim {
                    b[a] = (T::from_usize_lossy(c[a]) / ratio).floor().to_i64().unwrap();
                }
                b
            })
            .collect();
        boxes.sort_unstable();
        boxes.dedup();
        xs.push(-r.ln());
        ys.push(T::from_usize_lossy(boxes.len()).ln());
    }
    let (_, slope) = linear_fit(&xs, &ys).ok_or_else(|| Error::DegenerateFit("coincident scales".into()))?;
    Ok(slope)
}

/// Dyadic scales `2h, 4h, ...` up to a quarter of the smallest window side.
pub fn dyadic_scales<T: Real>(grid: &Grid<T>) -> Vec<T> {
    let h = grid.spacing();
    let side = grid.shape()[..grid.dim()].iter().map(|&n| T::from_usize_lossy(n - 1) * h).fold(T::infinity(), T::min);
    let mut out = Vec::new();
    let mut r = h + h;
    while r <= side / T::lit(4.0) {
        out.push(r);
        r = r + r;
    }
    out
}

#[derive(Clone, Debug)]
pub struct SuiteOptions<T> {
    pub horizon: T,
    pub samples: usize,
    /// Radius of the ball on which the pointwise bound on `v` is checked.
    pub window_radius: T,
    pub est0_samples: usize,
    pub john_samples: usize,
    pub box_scales: Option<Vec<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JohnRecord {
    pub time: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub time: f64,
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub inverse_sigma_lower: f64,
    pub kappa_bar: f64,
    pub c1: f64,
    /// `(t, c₃(t))` per sampled time.
    pub c3: Vec<(f64, f64)>,
    /// The Hölder exponent has no explicit value; the fitted one is reported.
    pub mu: Option<f64>,
}

/// Everything `diagnose` writes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub checks: Vec<Check>,
    pub pairs: Vec<TimePair>,
    pub holder: Option<HolderFit>,
    pub john: Vec<JohnRecord>,
    pub box_counting: Vec<BoxRecord>,
    pub constants: Constants,
}

impl RegularityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// Evenly strided sample of `count` supported nodes.
fn strided(nodes: &[usize], count: usize) -> Vec<usize> {
    if nodes.len() <= count {
        return nodes.to_vec();
    }
    (0..count).map(|k| nodes[k * nodes.len() / count]).collect()
}

/// Runs every bound check on a solved attachment field.
pub fn regularity_suite<T: Real>(
    domain: &DomainSpec<T>,
    field: &AttachmentField<T>,
    sigma_lower: T,
    sigma_upper: T,
    opts: &SuiteOptions<T>,
) -> Result<RegularityReport> {
    let grid = *domain.grid();
    let dim = grid.dim();
    let h = grid.spacing();
    let f = |x: T| x.to_f64_lossy();
    let mut checks = Vec::new();

    let supported: Vec<usize> = field.v.iter().map(|(i, _)| i).collect();
    let mut worst_len = (f64::NEG_INFINITY, 0.0);
    for x in strided(&supported, opts.est0_samples) {
        let curve = backtrack_curve(field, x)?;
        let bound = field.v.get(x).unwrap() / sigma_lower;
        let gap = f(curve.length) - f(bound);
        if gap > worst_len.0 - worst_len.1 {
            worst_len = (f(curve.length), f(bound));
        }
    }
    checks.push(Check::new("curve_length", worst_len.0, worst_len.1, f(h + h)));

    let grad = discrete_gradient_bound(field, domain.lipschitz, sigma_upper);
    checks.push(Check::new("gradient", f(grad.max_gradient), f(grad.bound), f(grad.slack)));

    let centre = domain.centre_norm();
    let c1 = sigma_upper * domain.lipschitz * (centre + opts.window_radius);
    let eps = field.stencil.angular_excess::<T>();
    let c1_slack = sigma_upper * (domain.lipschitz * eps * (centre + opts.window_radius) + h + h);
    let vmax = field
        .v
        .iter()
        .filter(|&(i, _)| norm(&grid.position(i)[..dim]) <= opts.window_radius)
        .map(|(_, v)| v)
        .fold(T::zero(), T::max);
    checks.push(Check::new("attachment_bound", f(vmax), f(c1), f(c1_slack)));

    let times: Vec<T> = crate::elliptic::time_samples(opts.horizon, opts.samples).into_iter().skip(1).collect();
    let pairs = check_time_lipschitz(&field.v, &times, sigma_lower)?;
    let worst = pairs
        .iter()
        .map(|p| (p.hausdorff - p.bound, p))
        .fold(None::<(f64, &TimePair)>, |acc, x| match acc {
            Some(a) if a.0 >= x.0 => Some(a),
            _ => Some(x),
        });
    if let Some((_, p)) = worst {
        checks.push(Check { name: "hausdorff_lipschitz".into(), measured: p.hausdorff, bound: p.bound, slack: p.slack, pass: pairs.iter().all(|q| q.pass) });
    }

    let mut c3 = Vec::new();
    for &t in &times {
        let radius = domain.containment_radius(t, sigma_lower);
        let reach = field.v.sublevel(t).iter().map(|i| norm(&grid.position(i)[..dim])).fold(T::zero(), T::max);
        checks.push(Check::new(format!("containment@{}", f(t)), f(reach), f(radius), f(h + h)));
        c3.push((f(t), f(radius)));
    }

    let outside = domain.omega.clone();
    let mut john = Vec::new();
    let mut box_counting = Vec::new();
    let scales = opts.box_scales.clone().unwrap_or_else(|| dyadic_scales(&grid));
    for &t in &times {
        let set = field.v.sublevel(t);
        let complement = outside.difference(&set);
        if set.contains(domain.x0) {
            let est = john_constant_estimate(&set, &complement, domain.x0, field, opts.john_samples)?;
            john.push(JohnRecord { time: f(t), kappa: est.kappa });
        }
        let slope = box_counting_slope(&grid, &boundary_nodes(&set), &scales).ok().map(f);
        box_counting.push(BoxRecord { time: f(t), slope });
    }

    let holder = holder_fit(&pairs).ok();
    let constants = Constants {
        inverse_sigma_lower: f(T::one() / sigma_lower),
        kappa_bar: f(sigma_lower * domain.kappa0 / (sigma_upper + sigma_upper + sigma_lower)),
        c1: f(c1),
        c3,
        mu: holder.map(|h| h.exponent),
    };
    Ok(RegularityReport { checks, pairs, holder, john, box_counting, constants })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(g: Grid<f64>, r: f64) -> Mask<f64> {
        Mask::from_predicate_unchecked(g, |p| p[0] * p[0] + p[1] * p[1] < r * r)
    }

    #[test]
    fn transform_matches_scan() {
        let g = Grid::cube(2, 0.0, 1.0, 12).unwrap();
        let m = Mask::from_indices(g, [3, 40, 77, 130]);
        let d = squared_distance_transform(&m).unwrap();
        for (i, &di) in d.iter().enumerate() {
            let brute = m.iter().map(|j| g.index_dist2(i, j)).min().unwrap();
            assert_eq!(di, brute);
        }
    }

    #[test]
    fn transform_in_three_dimensions() {
        let g = Grid::cube(3, 0.0, 1.0, 7).unwrap();
        let m = Mask::from_indices(g, [0, 100, 342]);
        let d = squared_distance_transform(&m).unwrap();
        for (i, &di) in d.iter().enumerate() {
            assert_eq!(di, m.iter().map(|j| g.index_dist2(i, j)).min().unwrap());
        }
    }

    #[test]
    fn hausdorff_of_equal_sets_is_zero() {
        let g = Grid::cube(2, -2.0, 2.0, 41).unwrap();
        let a = disk(g, 1.0);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn concentric_disks() {
        let g = Grid::cube(2, -3.0, 3.0, 121).unwrap();
        let d = hausdorff(&disk(g, 1.0), &disk(g, 2.0)).unwrap();
        assert!((d - 1.0).abs() <= g.spacing(), "{d}");
    }

    #[test]
    fn empty_mask_is_an_error() {
        let g = Grid::cube(2, 0.0, 1.0, 5).unwrap();
        assert!(hausdorff(&Mask::empty(g), &Mask::full(g)).is_err());
    }

    #[test]
    fn too_few_scales() {
        let g = Grid::cube(2, 0.0, 1.0, 11).unwrap();
        let r = box_counting_slope(&g, &[1, 2, 3], &[0.05, 0.2, 0.4]);
        assert!(matches!(r, Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn segment_has_dimension_one() {
        let g = Grid::<f64>::cube(2, 0.0, 1.0, 257).unwrap();
        let nodes: Vec<usize> = (0..257).map(|i| g.index(&[i, 128])).collect();
        let s = box_counting_slope(&g, &nodes, &dyadic_scales(&g)).unwrap();
        assert!((s - 1.0).abs() < 0.1, "{s}");
    }

    #[test]
    fn holder_fit_recovers_power() {
        let pairs: Vec<TimePair> = [0.1, 0.2, 0.4, 0.8]
            .iter()
            .map(|&dt| TimePair { s: 0.0, t: dt, hausdorff: 0.0, bound: 0.0, slack: 0.0, pass: true, measure_gain: 3.0 * f64::powf(dt, 0.5) })
            .collect();
        let fit = holder_fit(&pairs).unwrap();
        assert!((fit.exponent - 0.5).abs() < 1e-12);
        assert!((fit.coefficient - 3.0).abs() < 1e-12);
    }
}
