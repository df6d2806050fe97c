//! Factor graphs on sampled configurations: distance graphs, star graphs and
//! their sparse unions, leafwise line graphs along cosets, lifted quotient
//! graphs, degree statistics and connectivity.
//!
//! A factor graph is a set of ordered pairs `(g, h)`. Symmetric constructions
//! contain both orientations of every pair; a star graph only contains pairs
//! whose source lies below the mark threshold. The degree of `g` counts the
//! pairs with source `g`, which makes the average degree of a star graph
//! `t·λ(B(0, R))`.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use serde::{Serialize, Serializer};

use crate::error::{param, Error, Result};
use crate::group::{ModelGroup, Subgroup, Window};
use crate::process::{iid_marking, sample_cox_quotient, Configuration, CoxSample, Estimate, MarkedConfiguration};
use crate::rng::{replicate, StreamKey};
use crate::spatial::GridIndex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Distance,
    Line,
    /// Star stage `n` (radius `n`).
    Star(u32),
    Lift,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeKind::Distance => f.write_str("distance"),
            EdgeKind::Line => f.write_str("line"),
            EdgeKind::Star(n) => write!(f, "star_{n}"),
            EdgeKind::Lift => f.write_str("lift"),
        }
    }
}

impl Serialize for EdgeKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub source: u32,
    pub target: u32,
    pub kind: EdgeKind,
}

/// Ordered pairs over the points `0..n` of a configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FactorGraph {
    n: usize,
    edges: Vec<Edge>,
    #[serde(skip)]
    seen: HashMap<(u32, u32), usize>,
}

impl FactorGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
            seen: HashMap::new(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, source: u32, target: u32) -> bool {
        self.seen.contains_key(&(source, target))
    }

    pub fn kind_of(&self, source: u32, target: u32) -> Option<EdgeKind> {
        self.seen.get(&(source, target)).map(|&i| self.edges[i].kind)
    }

    /// Insert `(source, target)` unless present; self-loops are ignored.
    /// Returns whether the pair was new.
    pub fn insert(&mut self, source: u32, target: u32, kind: EdgeKind) -> bool {
        assert!((source as usize) < self.n && (target as usize) < self.n, "vertex out of range");
        if source == target || self.seen.contains_key(&(source, target)) {
            return false;
        }
        self.seen.insert((source, target), self.edges.len());
        self.edges.push(Edge { source, target, kind });
        true
    }

    pub fn insert_both(&mut self, u: u32, v: u32, kind: EdgeKind) {
        self.insert(u, v, kind);
        self.insert(v, u, kind);
    }

    /// Union keeping the provenance of pairs already in `self`.
    pub fn union(&self, other: &FactorGraph) -> FactorGraph {
        assert_eq!(self.n, other.n, "graphs on different vertex sets");
        let mut g = self.clone();
        for e in &other.edges {
            g.insert(e.source, e.target, e.kind);
        }
        g
    }

    /// Out-degree of every vertex.
    pub fn degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.n];
        for e in &self.edges {
            d[e.source as usize] += 1;
        }
        d
    }

    /// Edges sorted by `(source, target)`.
    pub fn sorted_edges(&self) -> Vec<Edge> {
        let mut e = self.edges.clone();
        e.sort_by_key(|e| (e.source, e.target));
        e
    }
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(param("radius", "must be positive and finite"));
    }
    Ok(())
}

/// All pairs at distance `< r`.
pub fn distance_graph(config: &Configuration, r: f64) -> Result<FactorGraph> {
    check_radius(r)?;
    let model = config.model();
    let pts = config.points();
    let mut g = FactorGraph::empty(pts.len());
    let index = GridIndex::for_radius(&model, pts, r);
    for (i, p) in pts.iter().enumerate() {
        index.within(&model, pts, p.coords(), r, |j, _| {
            g.insert(i as u32, j, EdgeKind::Distance);
        });
    }
    Ok(g)
}

fn check_threshold(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(param("t", "must lie in (0, 1]"));
    }
    Ok(())
}

fn add_star(g: &mut FactorGraph, marked: &MarkedConfiguration, index: &GridIndex, t: f64, r: f64, kind: EdgeKind) {
    let config = marked.config();
    let model = config.model();
    let pts = config.points();
    for (i, p) in pts.iter().enumerate() {
        if marked.marks()[i] < t {
            index.within(&model, pts, p.coords(), r, |j, _| {
                g.insert(i as u32, j, kind);
            });
        }
    }
}

/// Pairs `(g, h)` with `mark(g) < t` and `d(g, h) < r`, tagged as stage 1.
pub fn star_graph(marked: &MarkedConfiguration, t: f64, r: f64) -> Result<FactorGraph> {
    check_threshold(t)?;
    check_radius(r)?;
    let config = marked.config();
    let index = GridIndex::for_radius(&config.model(), config.points(), r);
    let mut g = FactorGraph::empty(config.len());
    add_star(&mut g, marked, &index, t, r, EdgeKind::Star(1));
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StarStage {
    pub n: u32,
    pub t: f64,
    pub radius: f64,
    /// `λ(B(0, n))`.
    pub ball_volume: f64,
}

/// Thresholds `t_n` for star graphs of radius `n` whose expected total
/// degree `Σ t_n λ(B(0, n))` stays below `epsilon`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StarSchedule {
    epsilon: f64,
    stages: Vec<StarStage>,
}

impl StarSchedule {
    /// `t_n = c / (n · λ(B(0,n)) · 2ⁿ)` for `n = 1..=n_max`, with `c` chosen so
    /// that the budget sums to `epsilon / 2`.
    pub fn geometric(model: &ModelGroup, epsilon: f64, n_max: u32) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(param("epsilon", "must be positive"));
        }
        if n_max == 0 {
            return Err(param("n_max", "must be at least 1"));
        }
        let s: f64 = (1..=n_max).map(|n| 1.0 / (n as f64 * 2f64.powi(n as i32))).sum();
        let c = epsilon / (2.0 * s);
        let stages = (1..=n_max)
            .map(|n| {
                let v = model.ball_volume(n as f64);
                StarStage {
                    n,
                    t: c / (n as f64 * v * 2f64.powi(n as i32)),
                    radius: n as f64,
                    ball_volume: v,
                }
            })
            .collect();
        Self::new(epsilon, stages)
    }

    /// Validate an explicit schedule.
    pub fn new(epsilon: f64, stages: Vec<StarStage>) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(param("epsilon", "must be positive"));
        }
        if stages.is_empty() {
            return Err(param("schedule", "no stages"));
        }
        for (k, s) in stages.iter().enumerate() {
            check_threshold(s.t)?;
            if s.n as usize != k + 1 || s.radius != s.n as f64 {
                return Err(param("schedule", "stage n must have radius n, n = 1, 2, …"));
            }
        }
        if stages.windows(2).any(|w| w[1].t >= w[0].t) {
            return Err(param("schedule", "thresholds must be strictly decreasing"));
        }
        let sched = Self { epsilon, stages };
        let sum = sched.budget();
        if sum >= epsilon {
            return Err(Error::BudgetViolated { sum, epsilon });
        }
        Ok(sched)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn stages(&self) -> &[StarStage] {
        &self.stages
    }

    /// `Σ t_n λ(B(0, n))`.
    pub fn budget(&self) -> f64 {
        self.stages.iter().map(|s| s.t * s.ball_volume).sum()
    }

    pub fn max_radius(&self) -> f64 {
        self.stages.last().map_or(0.0, |s| s.radius)
    }
}

/// Union over the schedule of the star graphs of radius `n` and threshold
/// `t_n`; each pair is tagged with the first stage that produces it.
pub fn star_union(marked: &MarkedConfiguration, schedule: &StarSchedule) -> FactorGraph {
    let config = marked.config();
    let index = GridIndex::for_radius(&config.model(), config.points(), 1.0);
    let mut g = FactorGraph::empty(config.len());
    for s in schedule.stages() {
        add_star(&mut g, marked, &index, s.t, s.radius, EdgeKind::Star(s.n));
    }
    g
}

fn require_line_subgroup(sub: &Subgroup) -> Result<()> {
    if sub.a_dim() != 1 {
        return Err(Error::Unsupported(format!(
            "leafwise constructions need a one-dimensional subgroup, got dimension {}",
            sub.a_dim()
        )));
    }
    Ok(())
}

/// Point indices of each coset sorted by A-coordinate.
pub(crate) fn sorted_leaves(cox: &CoxSample) -> Result<Vec<Vec<(f64, u32)>>> {
    let sub = cox.subgroup();
    require_line_subgroup(sub)?;
    let pts = cox.config().points();
    let mut leaves: Vec<Vec<(f64, u32)>> = cox
        .points_by_coset()
        .into_iter()
        .map(|ix| ix.into_iter().map(|i| (sub.a_coords(&pts[i])[0], i as u32)).collect())
        .collect();
    for l in &mut leaves {
        l.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
    Ok(leaves)
}

/// Consecutive points along each coset joined in both orientations.
pub fn leafwise_line_graph(cox: &CoxSample) -> Result<FactorGraph> {
    let leaves = sorted_leaves(cox)?;
    let mut g = FactorGraph::empty(cox.config().len());
    for l in &leaves {
        for w in l.windows(2) {
            g.insert_both(w[0].1, w[1].1, EdgeKind::Line);
        }
    }
    Ok(g)
}

/// Closest pair between two A-sorted leaves.
fn nearest_pair(a: &[(f64, u32)], b: &[(f64, u32)]) -> (u32, u32) {
    let (mut i, mut j) = (0, 0);
    let mut best = (f64::INFINITY, a[0].1, b[0].1);
    while i < a.len() && j < b.len() {
        let d = (a[i].0 - b[j].0).abs();
        if d < best.0 {
            best = (d, a[i].1, b[j].1);
        }
        if a[i].0 < b[j].0 {
            i += 1;
        } else {
            j += 1;
        }
    }
    (best.1, best.2)
}

/// Lift of a random sparse graph on the occupied cosets: cosets whose
/// transversal coordinates are within Euclidean distance `r_q` are linked with
/// probability `p`, and each kept link becomes one pair (both orientations)
/// between the A-nearest points of the two cosets.
pub fn lifted_quotient_graph<R: Rng + ?Sized>(cox: &CoxSample, p: f64, r_q: f64, rng: &mut R) -> Result<FactorGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(param("p", "must lie in [0, 1]"));
    }
    check_radius(r_q)?;
    let leaves = sorted_leaves(cox)?;
    let cosets = cox.cosets();
    let occupied: Vec<usize> = (0..cosets.len()).filter(|&c| !leaves[c].is_empty()).collect();
    let mut g = FactorGraph::empty(cox.config().len());
    for (k, &ci) in occupied.iter().enumerate() {
        for &cj in &occupied[k + 1..] {
            let d2: f64 = cosets[ci]
                .coords()
                .iter()
                .zip(cosets[cj].coords())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d2.sqrt() >= r_q {
                continue;
            }
            if rng.random::<f64>() < p {
                let (u, v) = nearest_pair(&leaves[ci], &leaves[cj]);
                g.insert_both(u, v, EdgeKind::Lift);
            }
        }
    }
    Ok(g)
}

/// Points of the window whose `margin`-neighbourhood lies inside the
/// sampled region.
pub fn interior_points(config: &Configuration, margin: f64) -> Vec<usize> {
    let model = config.model();
    let region = config.observed_region();
    config
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let c = p.coords();
            if !config.window().contains(c) {
                return false;
            }
            let h = model.reach(c, margin);
            c.iter()
                .zip(&h)
                .enumerate()
                .all(|(i, (x, r))| x - r >= region.lo()[i] && x + r <= region.hi()[i])
        })
        .map(|(i, _)| i)
        .collect()
}

/// Total degree and number of interior points.
pub fn interior_degree_sum(graph: &FactorGraph, config: &Configuration, margin: f64) -> (f64, usize) {
    let deg = graph.degrees();
    let ix = interior_points(config, margin);
    (ix.iter().map(|&i| deg[i] as f64).sum(), ix.len())
}

/// Mean degree over interior points.
pub fn avg_degree(graph: &FactorGraph, config: &Configuration, margin: f64) -> Result<Estimate> {
    if graph.vertex_count() != config.len() {
        return Err(Error::DimensionMismatch {
            expected: config.len(),
            got: graph.vertex_count(),
        });
    }
    let deg = graph.degrees();
    let values: Vec<f64> = interior_points(config, margin)
        .into_iter()
        .map(|i| deg[i] as f64)
        .collect();
    Estimate::from_values(&values).ok_or(Error::NoInteriorPoints)
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a as usize] < self.size[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b as usize] = a;
        self.size[a as usize] += self.size[b as usize];
    }
}

/// Connected components of the undirected graph underlying a factor graph.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentReport {
    pub components: usize,
    /// Share of all vertices in the largest component.
    pub giant_fraction: f64,
    /// Share of the window's points lying in the largest component.
    pub window_giant_fraction: f64,
    /// Component sizes, largest first.
    pub sizes: Vec<usize>,
    /// Component label of every vertex.
    #[serde(skip)]
    pub labels: Vec<u32>,
}

pub fn connectivity(graph: &FactorGraph, config: &Configuration) -> ComponentReport {
    let n = graph.vertex_count();
    let mut uf = UnionFind::new(n);
    for e in graph.edges() {
        uf.union(e.source, e.target);
    }
    let labels: Vec<u32> = (0..n as u32).map(|i| uf.find(i)).collect();
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &l in &labels {
        *counts.entry(l).or_default() += 1;
    }
    // Ties between equal-size components go to the smaller label.
    let giant = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(l, _)| *l);
    let mut sizes: Vec<usize> = counts.into_values().collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let (mut in_window, mut in_giant) = (0usize, 0usize);
    for (i, p) in config.points().iter().enumerate().take(n) {
        if config.window().contains(p.coords()) {
            in_window += 1;
            in_giant += usize::from(Some(labels[i]) == giant);
        }
    }
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    ComponentReport {
        components: sizes.len(),
        giant_fraction: frac(sizes.first().copied().unwrap_or(0), n),
        window_giant_fraction: frac(in_giant, in_window),
        sizes,
        labels,
    }
}

/// Settings for [`cost_upper_bound_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostOptions {
    pub epsilon: f64,
    /// Window side lengths; windows are centred cubes.
    pub sides: Vec<f64>,
    pub replicates: usize,
    /// Number of star stages.
    pub n_max: u32,
    /// Optional lifted quotient graph `(p, r_q)`.
    pub lift: Option<(f64, f64)>,
    pub sigmas: f64,
}

impl Default for CostOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            sides: vec![5.0, 10.0, 20.0],
            replicates: 50,
            n_max: 4,
            lift: None,
            sigmas: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostRow {
    pub side: f64,
    pub epsilon: f64,
    pub avg_degree: Estimate,
    pub giant_fraction: Estimate,
    pub window_giant_fraction: Estimate,
    /// Mean number of window points per replicate.
    pub points: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schedule: StarSchedule,
    pub margin: f64,
    pub rows: Vec<CostRow>,
    pub violations: Vec<String>,
}

/// Lines plus sparse stars (plus an optional lift) on Cox samples driven by
/// `G/A`, over growing windows: interior average degree against `2 + ε` and
/// the giant-component share of all sampled points.
pub fn cost_upper_bound_experiment(sub: &Subgroup, opts: &CostOptions, key: StreamKey) -> Result<ExperimentReport> {
    require_line_subgroup(sub)?;
    let model = sub.model();
    let schedule = StarSchedule::geometric(&model, opts.epsilon, opts.n_max)?;
    if opts.sides.is_empty() || opts.sides.iter().any(|s| !(*s > 0.0)) {
        return Err(param("sides", "need positive window sides"));
    }
    if opts.replicates == 0 {
        return Err(param("replicates", "must be positive"));
    }
    let margin = schedule.max_radius();
    let mut rows = Vec::with_capacity(opts.sides.len());
    for (k, &side) in opts.sides.iter().enumerate() {
        let window = Window::centered(model.dim(), side)?;
        let per: Vec<Result<(f64, f64, f64, f64)>> = replicate(key.child(k as u64), opts.replicates, |_, r| {
            let cox = sample_cox_quotient(sub, &window, margin, r)?;
            let marked = iid_marking(cox.config(), r);
            let mut g = leafwise_line_graph(&cox)?.union(&star_union(&marked, &schedule));
            if let Some((p, r_q)) = opts.lift {
                g = g.union(&lifted_quotient_graph(&cox, p, r_q, r)?);
            }
            let (sum, n) = interior_degree_sum(&g, cox.config(), margin);
            let comp = connectivity(&g, cox.config());
            Ok((sum, n as f64, comp.giant_fraction, comp.window_giant_fraction))
        });
        let per = per.into_iter().collect::<Result<Vec<_>>>()?;
        let sums: Vec<f64> = per.iter().map(|v| v.0).collect();
        let counts: Vec<f64> = per.iter().map(|v| v.1).collect();
        let giants: Vec<f64> = per.iter().map(|v| v.2).collect();
        let window_giants: Vec<f64> = per.iter().map(|v| v.3).collect();
        rows.push(CostRow {
            side,
            epsilon: opts.epsilon,
            avg_degree: Estimate::ratio(&sums, &counts).ok_or(Error::NoInteriorPoints)?,
            giant_fraction: Estimate::from_values(&giants).ok_or(Error::NoSamples)?,
            window_giant_fraction: Estimate::from_values(&window_giants).ok_or(Error::NoSamples)?,
            points: counts.iter().sum::<f64>() / counts.len() as f64,
        });
    }
    let mut violations = Vec::new();
    let cap = 2.0 + opts.epsilon;
    for r in &rows {
        if r.avg_degree.value > cap + opts.sigmas * r.avg_degree.std_err {
            violations.push(format!(
                "side {}: average degree {} exceeds {} + {}σ",
                r.side, r.avg_degree.value, cap, opts.sigmas
            ));
        }
    }
    for w in rows.windows(2) {
        if w[1].giant_fraction.value < w[0].giant_fraction.value {
            violations.push(format!(
                "giant fraction decreases from side {} to side {}",
                w[0].side, w[1].side
            ));
        }
    }
    Ok(ExperimentReport {
        schedule,
        margin,
        rows,
        violations,
    })
}
