//! Samplers for Poisson, IID-marked and Cox point processes, their Palm
//! versions, and the intensity / Campbell estimators.
//!
//! All samplers draw on a window dilated by an explicit buffer. Points in the
//! buffer exist so that neighbourhood-based statistics of points inside the
//! window are not truncated; estimators only count points in the window.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::group::{CosetId, FolnerSet, GroupPoint, ModelGroup, Subgroup, Window};

/// Tolerance under which two points count as duplicates.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// A finite point set sampled on `window` dilated by `buffer`.
///
/// On `ℤᵈ` a Poisson process charges each site with an independent Poisson
/// count, so lattice configurations are counting measures and may repeat a
/// site. On continuous models configurations are simple.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    model: ModelGroup,
    points: Vec<GroupPoint>,
    window: Window,
    buffer: f64,
}

impl Configuration {
    pub fn new(model: ModelGroup, points: Vec<GroupPoint>, window: Window, buffer: f64) -> Result<Self> {
        if window.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: window.dim(),
            });
        }
        if !(buffer >= 0.0) || !buffer.is_finite() {
            return Err(param("buffer", "must be finite and nonnegative"));
        }
        let region = model.dilate(&window, buffer);
        for p in &points {
            model.validate(p)?;
            if !region.contains(p.coords()) {
                return Err(Error::InvalidPoint(format!(
                    "{:?} lies outside the dilated window",
                    p.coords()
                )));
            }
        }
        let c = Self {
            model,
            points,
            window,
            buffer,
        };
        if !model.is_discrete() && !c.is_simple() {
            return Err(Error::InvalidPoint("duplicate points".into()));
        }
        Ok(c)
    }

    pub(crate) fn from_parts(model: ModelGroup, points: Vec<GroupPoint>, window: Window, buffer: f64) -> Self {
        Self {
            model,
            points,
            window,
            buffer,
        }
    }

    pub fn model(&self) -> ModelGroup {
        self.model
    }

    pub fn points(&self) -> &[GroupPoint] {
        &self.points
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn buffer(&self) -> f64 {
        self.buffer
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The window dilated by the buffer: the region where points were sampled.
    pub fn observed_region(&self) -> Window {
        self.model.dilate(&self.window, self.buffer)
    }

    pub fn count_in(&self, b: &Window) -> usize {
        self.points.iter().filter(|p| b.contains(p.coords())).count()
    }

    pub fn is_simple(&self) -> bool {
        duplicate_indices(&self.points).is_empty()
    }

    /// `g·x` for every point `x`.
    pub fn translated_points(&self, g: &GroupPoint) -> Vec<GroupPoint> {
        self.points
            .iter()
            .map(|p| self.model.mul_coords(g.coords(), p.coords()))
            .collect()
    }

    pub fn contains_identity(&self) -> bool {
        self.points.iter().any(|p| p.coords().iter().all(|c| *c == 0.0))
    }
}

/// Indices `j` such that point `j` repeats an earlier point up to
/// [`DUPLICATE_TOL`] in every coordinate.
pub(crate) fn duplicate_indices(points: &[GroupPoint]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .coords()
            .iter()
            .zip(points[b].coords())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut dups: Vec<usize> = order
        .windows(2)
        .filter(|w| {
            points[w[0]]
                .coords()
                .iter()
                .zip(points[w[1]].coords())
                .all(|(x, y)| (x - y).abs() <= DUPLICATE_TOL)
        })
        .map(|w| w[1])
        .collect();
    dups.sort_unstable();
    dups
}

/// Replace duplicates with fresh draws until the set is simple.
fn resample_duplicates<R: Rng + ?Sized>(
    points: &mut [GroupPoint],
    rng: &mut R,
    mut draw: impl FnMut(usize, &mut R) -> GroupPoint,
) {
    loop {
        let dups = duplicate_indices(points);
        if dups.is_empty() {
            return;
        }
        for j in dups {
            points[j] = draw(j, rng);
        }
    }
}

pub(crate) fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

fn check_intensity(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(param("intensity", format!("must be positive and finite, got {t}")))
    }
}

fn check_buffer(buffer: f64) -> Result<()> {
    if buffer >= 0.0 && buffer.is_finite() {
        Ok(())
    } else {
        Err(param("buffer", "must be finite and nonnegative"))
    }
}

/// Poisson process of intensity `t` on `window` dilated by `buffer`, sampled
/// count-then-place.
pub fn sample_poisson_group<R: Rng + ?Sized>(
    model: ModelGroup,
    window: &Window,
    buffer: f64,
    t: f64,
    rng: &mut R,
) -> Result<Configuration> {
    check_intensity(t)?;
    check_buffer(buffer)?;
    if window.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: window.dim(),
        });
    }
    let region = model.dilate(window, buffer);
    let n = poisson_count(t * model.volume(&region), rng);
    let mut points: Vec<GroupPoint> = (0..n)
        .map(|_| model.haar_sample_unchecked(&region, rng))
        .collect();
    if !model.is_discrete() {
        resample_duplicates(&mut points, rng, |_, r| model.haar_sample_unchecked(&region, r));
    }
    Ok(Configuration::from_parts(model, points, window.clone(), buffer))
}

/// Poisson process of intensity `t` on `G/A` restricted to a transversal box.
///
/// On lattice quotients a coset may be drawn more than once; the returned
/// list keeps the repeats (the process is a counting measure).
pub fn sample_poisson_quotient<R: Rng + ?Sized>(
    sub: &Subgroup,
    q_window: &Window,
    t: f64,
    rng: &mut R,
) -> Result<Vec<CosetId>> {
    check_intensity(t)?;
    if q_window.dim() != sub.q_dim() {
        return Err(Error::DimensionMismatch {
            expected: sub.q_dim(),
            got: q_window.dim(),
        });
    }
    let n = poisson_count(t * sub.q_volume(q_window), rng);
    let mut cosets: Vec<CosetId> = (0..n).map(|_| sub.sample_coset(q_window, rng)).collect();
    if !sub.model().is_discrete() {
        let mut as_points: Vec<GroupPoint> =
            cosets.iter().map(|c| GroupPoint::new(c.coords().iter().copied())).collect();
        resample_duplicates(&mut as_points, rng, |_, r| {
            GroupPoint::new(sub.sample_coset(q_window, r).coords().iter().copied())
        });
        cosets = as_points.into_iter().map(|p| CosetId::new(p.coords().iter().copied())).collect();
    }
    Ok(cosets)
}

/// A configuration with one mark in `[0, 1)` per point.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkedConfiguration {
    config: Configuration,
    marks: Vec<f64>,
}

impl MarkedConfiguration {
    pub fn new(config: Configuration, marks: Vec<f64>) -> Result<Self> {
        if marks.len() != config.len() {
            return Err(Error::DimensionMismatch {
                expected: config.len(),
                got: marks.len(),
            });
        }
        if marks.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(param("marks", "marks must lie in [0, 1]"));
        }
        Ok(Self { config, marks })
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn marks(&self) -> &[f64] {
        &self.marks
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }
}

/// Attach i.i.d. `Unif[0,1]` marks. Mark ties are rejected and redrawn.
pub fn iid_marking<R: Rng + ?Sized>(config: &Configuration, rng: &mut R) -> MarkedConfiguration {
    let mut marks: Vec<f64> = (0..config.len()).map(|_| rng.random::<f64>()).collect();
    loop {
        let mut order: Vec<usize> = (0..marks.len()).collect();
        order.sort_by(|&a, &b| marks[a].total_cmp(&marks[b]));
        let ties: Vec<usize> = order
            .windows(2)
            .filter(|w| marks[w[0]] == marks[w[1]])
            .map(|w| w[1].max(w[0]))
            .collect();
        if ties.is_empty() {
            break;
        }
        for j in ties {
            marks[j] = rng.random::<f64>();
        }
    }
    MarkedConfiguration {
        config: config.clone(),
        marks,
    }
}

/// A piece of the driving measure: `weight · λ_{cA}` restricted to
/// `embed(c)·segment`.
#[derive(Clone, Debug, PartialEq)]
pub struct DrivingSegment {
    pub coset: usize,
    pub segment: Window,
    pub weight: u32,
}

/// A Cox sample: the sampled cosets, the driving measure on the observed
/// region, and the Poisson configuration it drives.
#[derive(Clone, Debug, PartialEq)]
pub struct CoxSample {
    subgroup: Subgroup,
    config: Configuration,
    cosets: Vec<CosetId>,
    sources: Vec<DrivingSegment>,
    coset_of: Vec<usize>,
}

impl CoxSample {
    pub fn subgroup(&self) -> &Subgroup {
        &self.subgroup
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn cosets(&self) -> &[CosetId] {
        &self.cosets
    }

    pub fn sources(&self) -> &[DrivingSegment] {
        &self.sources
    }

    /// Index into [`cosets`](Self::cosets) for each point.
    pub fn coset_of(&self) -> &[usize] {
        &self.coset_of
    }

    /// Point indices grouped by coset.
    pub fn points_by_coset(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cosets.len()];
        for (i, &c) in self.coset_of.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    /// Total driving mass `η(B)` of a chart box.
    pub fn driving_mass(&self, b: &Window) -> f64 {
        let a_box = self.subgroup.a_window(b);
        let q_box = self.subgroup.q_window(b);
        self.sources
            .iter()
            .filter(|s| q_box.contains(self.cosets[s.coset].coords()))
            .map(|s| {
                s.segment
                    .intersect(&a_box)
                    .map_or(0.0, |w| s.weight as f64 * self.subgroup.a_volume(&w))
            })
            .sum()
    }

    /// Number of driving segments that charge the box `b`.
    pub fn sources_meeting(&self, b: &Window) -> usize {
        let a_box = self.subgroup.a_window(b);
        let q_box = self.subgroup.q_window(b);
        self.sources
            .iter()
            .filter(|s| q_box.contains(self.cosets[s.coset].coords()))
            .filter(|s| {
                s.segment
                    .intersect(&a_box)
                    .is_some_and(|w| self.subgroup.a_volume(&w) > 0.0)
            })
            .count()
    }
}

struct CoxBuilder<'a> {
    sub: &'a Subgroup,
    index: HashMap<smallvec::SmallVec<[u64; 4]>, usize>,
    cosets: Vec<CosetId>,
    sources: Vec<DrivingSegment>,
    points: Vec<GroupPoint>,
    coset_of: Vec<usize>,
}

impl<'a> CoxBuilder<'a> {
    fn new(sub: &'a Subgroup) -> Self {
        Self {
            sub,
            index: HashMap::new(),
            cosets: Vec::new(),
            sources: Vec::new(),
            points: Vec::new(),
            coset_of: Vec::new(),
        }
    }

    fn coset(&mut self, c: CosetId) -> usize {
        let next = self.cosets.len();
        let idx = *self.index.entry(c.key()).or_insert(next);
        if idx == next {
            self.cosets.push(c);
        }
        idx
    }

    /// Add a driving segment and draw its Poisson points.
    fn drive<R: Rng + ?Sized>(&mut self, coset: usize, segment: Window, weight: u32, rng: &mut R) {
        let mass = weight as f64 * self.sub.a_volume(&segment);
        let n = poisson_count(mass, rng);
        let c = self.cosets[coset].clone();
        let discrete = self.sub.model().is_discrete();
        for _ in 0..n {
            let a = crate::group::uniform_in_box(discrete, &segment, rng);
            self.points.push(self.sub.point_on_coset(&c, a.coords()));
            self.coset_of.push(coset);
        }
        self.sources.push(DrivingSegment {
            coset,
            segment,
            weight,
        });
    }

    fn finish<R: Rng + ?Sized>(mut self, window: &Window, buffer: f64, rng: &mut R) -> CoxSample {
        let model = self.sub.model();
        if !model.is_discrete() {
            // Two points of one coset coincide with probability zero; redraw
            // along the same driving segment if it ever happens.
            let sources = &self.sources;
            let coset_of = &self.coset_of;
            let cosets = &self.cosets;
            let sub = self.sub;
            resample_duplicates(&mut self.points, rng, |j, r| {
                let seg = sources
                    .iter()
                    .find(|s| s.coset == coset_of[j])
                    .map(|s| s.segment.clone())
                    .expect("every point has a driving segment");
                let a = crate::group::uniform_in_box(false, &seg, r);
                sub.point_on_coset(&cosets[coset_of[j]], a.coords())
            });
        }
        CoxSample {
            subgroup: self.sub.clone(),
            config: Configuration::from_parts(model, self.points, window.clone(), buffer),
            cosets: self.cosets,
            sources: self.sources,
            coset_of: self.coset_of,
        }
    }
}

/// The Cox process driven by `G/A`: a unit-rate Poisson sample of cosets
/// meeting the dilated window, each carrying a unit-rate Poisson process
/// along its segment inside the dilated window.
pub fn sample_cox_quotient<R: Rng + ?Sized>(
    sub: &Subgroup,
    window: &Window,
    buffer: f64,
    rng: &mut R,
) -> Result<CoxSample> {
    check_buffer(buffer)?;
    let model = sub.model();
    if window.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: window.dim(),
        });
    }
    let q_box = sub.q_window(&model.dilate(window, buffer));
    let drawn = sample_poisson_quotient(sub, &q_box, 1.0, rng)?;
    sample_cox_given_cosets(sub, &drawn, window, buffer, rng)
}

/// The Cox process conditioned on its cosets: unit-rate Poisson processes
/// along the given cosets inside the dilated window.
pub fn sample_cox_given_cosets<R: Rng + ?Sized>(
    sub: &Subgroup,
    cosets: &[CosetId],
    window: &Window,
    buffer: f64,
    rng: &mut R,
) -> Result<CoxSample> {
    check_buffer(buffer)?;
    let model = sub.model();
    if window.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: window.dim(),
        });
    }
    if let Some(c) = cosets.iter().find(|c| c.coords().len() != sub.q_dim()) {
        return Err(Error::DimensionMismatch {
            expected: sub.q_dim(),
            got: c.coords().len(),
        });
    }
    let a_box = sub.a_window(&model.dilate(window, buffer));
    let mut b = CoxBuilder::new(sub);
    let mut weights: Vec<u32> = Vec::new();
    for c in cosets {
        let idx = b.coset(c.clone());
        if idx == weights.len() {
            weights.push(0);
        }
        weights[idx] += 1;
    }
    for (idx, w) in weights.into_iter().enumerate() {
        b.drive(idx, a_box.clone(), w, rng);
    }
    Ok(b.finish(window, buffer, rng))
}

/// The Cox process driven by a Følner set `F`: base points of intensity
/// `1/λ_A(F)`, each propagated by a unit-rate Poisson process on `xF`.
///
/// `buffer` must cover the diameter of `F`; what remains is the analysis
/// radius recorded on the returned configuration. Base points are drawn on
/// the exact region whose propagation reaches the analysed region.
pub fn sample_cox_folner<R: Rng + ?Sized>(
    sub: &Subgroup,
    folner: &FolnerSet,
    window: &Window,
    buffer: f64,
    rng: &mut R,
) -> Result<CoxSample> {
    check_buffer(buffer)?;
    if folner.subgroup() != sub {
        return Err(param("folner", "Følner set belongs to a different subgroup"));
    }
    let model = sub.model();
    if window.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: window.dim(),
        });
    }
    let required = folner.metric_diameter();
    if buffer < required {
        return Err(Error::InsufficientBuffer { buffer, required });
    }
    let analysis = buffer - required;
    let target = model.dilate(window, analysis);
    let target_a = sub.a_window(&target);
    let shape = folner.shape();

    // x·F meets the target iff the A-coordinates of x lie in target_A − F.
    let mut base_lo = target.lo().to_vec();
    let mut base_hi = target.hi().to_vec();
    for (k, &axis) in sub.a_axes().iter().enumerate() {
        base_lo[axis] = target.lo()[axis] - shape.hi()[k];
        base_hi[axis] = target.hi()[axis] - shape.lo()[k];
    }
    let base = Window::new(base_lo, base_hi)?;
    let n_base = poisson_count(model.volume(&base) / folner.volume(), rng);

    let mut b = CoxBuilder::new(sub);
    for _ in 0..n_base {
        let x = model.haar_sample_unchecked(&base, rng);
        let ax = sub.a_coords(&x);
        let reach = Window::new(
            ax.iter().zip(shape.lo()).map(|(a, l)| a + l).collect(),
            ax.iter().zip(shape.hi()).map(|(a, h)| a + h).collect(),
        )?;
        let Some(seg) = reach.intersect(&target_a) else {
            continue;
        };
        if sub.a_volume(&seg) <= 0.0 {
            continue;
        }
        let idx = b.coset(sub.project(&x));
        b.drive(idx, seg, 1, rng);
    }
    Ok(b.finish(window, analysis, rng))
}

/// Mean count per unit volume with a normal-approximation standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Some(Self {
            value: mean,
            std_err: (var / n as f64).sqrt(),
            n,
        })
    }

    /// Ratio `Σ num / Σ den` over replicates with a delta-method standard
    /// error, treating each replicate as one unit.
    pub fn ratio(num: &[f64], den: &[f64]) -> Option<Self> {
        let n = num.len().min(den.len());
        let total: f64 = den[..n].iter().sum();
        if n == 0 || total <= 0.0 {
            return None;
        }
        let r = num[..n].iter().sum::<f64>() / total;
        let ss: f64 = num[..n]
            .iter()
            .zip(&den[..n])
            .map(|(a, b)| (a - r * b).powi(2))
            .sum();
        let var = if n > 1 { ss * n as f64 / (n - 1) as f64 } else { 0.0 };
        Some(Self {
            value: r,
            std_err: var.sqrt() / total,
            n,
        })
    }

    /// Two-sided 95% normal confidence interval.
    pub fn ci95(&self) -> (f64, f64) {
        let h = 1.959_963_984_540_054 * self.std_err;
        (self.value - h, self.value + h)
    }

    /// `|value − target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.value - target;
        if self.std_err > 0.0 {
            d / self.std_err
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(d)
        }
    }

    pub fn within_sigmas(&self, target: f64, k: f64) -> bool {
        self.z_score(target).abs() <= k
    }
}

/// Intensity estimate `mean count / λ(window)` over replicate samples.
pub fn estimate_intensity(samples: &[Configuration], window: &Window) -> Result<Estimate> {
    let first = samples.first().ok_or(Error::NoSamples)?;
    let vol = first.model().volume(window);
    if vol <= 0.0 {
        return Err(Error::EmptyWindow);
    }
    let counts: Vec<f64> = samples
        .iter()
        .map(|s| s.count_in(window) as f64 / vol)
        .collect();
    Ok(Estimate::from_values(&counts).expect("nonempty"))
}

/// A nonnegative test function with compact support in a chart box.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    support: Window,
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("support", &self.support)
            .finish()
    }
}

impl TestFunction {
    /// `f` is evaluated only inside `support` and treated as zero outside.
    pub fn new(
        name: impl Into<String>,
        support: Window,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            support,
            f: Arc::new(f),
        }
    }

    pub fn indicator(support: Window) -> Self {
        Self::new("indicator", support, |_| 1.0)
    }

    pub fn zero(support: Window) -> Self {
        Self::new("zero", support, |_| 0.0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> &Window {
        &self.support
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.support.contains(x) {
            (self.f)(x)
        } else {
            0.0
        }
    }

    /// `∫ f dλ` by a tensor midpoint rule with `res` nodes per axis (exact
    /// summation over lattice points on `ℤᵈ`).
    pub fn integrate(&self, model: &ModelGroup, res: usize) -> f64 {
        let d = self.support.dim();
        if model.is_discrete() {
            let ranges: Vec<(i64, i64)> = self
                .support
                .lo()
                .iter()
                .zip(self.support.hi())
                .map(|(l, h)| (l.ceil() as i64, h.floor() as i64))
                .collect();
            let mut total = 0.0;
            let mut k: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            if ranges.iter().any(|(a, b)| a > b) {
                return 0.0;
            }
            loop {
                let x: Vec<f64> = k.iter().map(|&v| v as f64).collect();
                total += (self.f)(&x);
                let mut axis = 0;
                loop {
                    if axis == d {
                        return total;
                    }
                    if k[axis] < ranges[axis].1 {
                        k[axis] += 1;
                        break;
                    }
                    k[axis] = ranges[axis].0;
                    axis += 1;
                }
            }
        }
        let res = res.max(1);
        let h: Vec<f64> = self.support.lengths().map(|l| l / res as f64).collect();
        let cell: f64 = h.iter().product();
        if cell == 0.0 {
            return 0.0;
        }
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        let mut total = 0.0;
        loop {
            for i in 0..d {
                x[i] = self.support.lo()[i] + (idx[i] as f64 + 0.5) * h[i];
            }
            total += (self.f)(&x);
            let mut axis = 0;
            loop {
                if axis == d {
                    return total * cell;
                }
                if idx[axis] + 1 < res {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CampbellReport {
    pub function: String,
    pub lhs: f64,
    pub lhs_std_err: f64,
    pub rhs: f64,
    pub z: f64,
    pub n_samples: usize,
}

/// Compare `E[Σ_{x∈Π} f(x)]` with `intensity · ∫ f dλ`.
pub fn campbell_check(
    samples: &[Configuration],
    f: &TestFunction,
    intensity: f64,
    quadrature_res: usize,
) -> Result<CampbellReport> {
    let first = samples.first().ok_or(Error::NoSamples)?;
    let model = first.model();
    if f.support().dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: f.support().dim(),
        });
    }
    if samples.iter().any(|s| !s.window().contains_window(f.support())) {
        return Err(Error::SupportOutsideWindow);
    }
    let sums: Vec<f64> = samples
        .iter()
        .map(|s| s.points().iter().map(|p| f.eval(p.coords())).sum())
        .collect();
    let est = Estimate::from_values(&sums).expect("nonempty");
    let rhs = intensity * f.integrate(&model, quadrature_res);
    Ok(CampbellReport {
        function: f.name().to_string(),
        lhs: est.value,
        lhs_std_err: est.std_err,
        rhs,
        z: est.z_score(rhs),
        n_samples: est.n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PalmConstruction {
    /// Poisson with the identity adjoined.
    PoissonWithRoot,
    /// Cox sample together with an independent Palm Poisson on the identity
    /// coset.
    CoxWithRootLine,
}

/// A rooted sample: the identity is always one of the points.
#[derive(Clone, Debug, PartialEq)]
pub enum PalmSample {
    Poisson { config: Configuration, root: usize },
    /// Points with index at least `added` come from the root line.
    Cox { sample: CoxSample, root: usize, added: usize },
}

impl PalmSample {
    pub fn config(&self) -> &Configuration {
        match self {
            PalmSample::Poisson { config, .. } => config,
            PalmSample::Cox { sample, .. } => sample.config(),
        }
    }

    pub fn root(&self) -> usize {
        match self {
            PalmSample::Poisson { root, .. } | PalmSample::Cox { root, .. } => *root,
        }
    }

    pub fn construction(&self) -> PalmConstruction {
        match self {
            PalmSample::Poisson { .. } => PalmConstruction::PoissonWithRoot,
            PalmSample::Cox { .. } => PalmConstruction::CoxWithRootLine,
        }
    }

    pub fn cox(&self) -> Option<&CoxSample> {
        match self {
            PalmSample::Cox { sample, .. } => Some(sample),
            PalmSample::Poisson { .. } => None,
        }
    }

    /// The configuration with the root point removed.
    pub fn without_root(&self) -> Configuration {
        let c = self.config();
        let mut pts = c.points().to_vec();
        pts.remove(self.root());
        Configuration::from_parts(c.model(), pts, c.window().clone(), c.buffer())
    }

    /// The stationary sample the construction started from: the Poisson
    /// points without the root, or the Cox points without the root line.
    pub fn stationary_part(&self) -> Configuration {
        match self {
            PalmSample::Poisson { .. } => self.without_root(),
            PalmSample::Cox { sample, added, .. } => {
                let c = sample.config();
                Configuration::from_parts(c.model(), c.points()[..*added].to_vec(), c.window().clone(), c.buffer())
            }
        }
    }
}

fn require_identity(model: &ModelGroup, region: &Window) -> Result<()> {
    if region.contains(model.identity().coords()) {
        Ok(())
    } else {
        Err(Error::InvalidWindow("the sampled region must contain the identity".into()))
    }
}

/// Palm version of the Poisson process: `Π ∪ {0}`.
pub fn palm_poisson<R: Rng + ?Sized>(
    model: ModelGroup,
    window: &Window,
    t: f64,
    rng: &mut R,
) -> Result<PalmSample> {
    require_identity(&model, window)?;
    let base = sample_poisson_group(model, window, 0.0, t, rng)?;
    let mut pts = base.points;
    let root = pts.len();
    pts.push(model.identity());
    Ok(PalmSample::Poisson {
        config: Configuration::from_parts(model, pts, window.clone(), 0.0),
        root,
    })
}

/// Palm version of the Cox process driven by `G/A`: a Cox sample together
/// with an independent unit-rate Poisson process on `A` plus the identity.
pub fn palm_cox<R: Rng + ?Sized>(
    sub: &Subgroup,
    window: &Window,
    buffer: f64,
    rng: &mut R,
) -> Result<PalmSample> {
    let model = sub.model();
    let cox = sample_cox_quotient(sub, window, buffer, rng)?;
    let region = model.dilate(window, buffer);
    require_identity(&model, &region)?;
    let a_box = sub.a_window(&region);
    let CoxSample {
        subgroup: _,
        config,
        cosets,
        sources,
        coset_of,
    } = cox;
    let mut b = CoxBuilder::new(sub);
    for c in cosets {
        b.coset(c);
    }
    b.sources = sources;
    b.points = config.points;
    b.coset_of = coset_of;
    let added = b.points.len();
    let id_coset = b.coset(sub.project(&model.identity()));
    b.drive(id_coset, a_box, 1, rng);
    let root = b.points.len();
    b.points.push(model.identity());
    b.coset_of.push(id_coset);
    let sample = b.finish(window, buffer, rng);
    Ok(PalmSample::Cox { sample, root, added })
}

/// Point counts of `config` in each box.
pub fn fidi(config: &Configuration, boxes: &[Window]) -> Result<Vec<u64>> {
    let region = config.observed_region();
    for b in boxes {
        if b.dim() != region.dim() {
            return Err(Error::DimensionMismatch {
                expected: region.dim(),
                got: b.dim(),
            });
        }
        if !region.contains_window(b) {
            return Err(Error::BoxOutsideWindow(format!("{:?}..{:?}", b.lo(), b.hi())));
        }
    }
    let mut counts = vec![0u64; boxes.len()];
    for p in config.points() {
        for (k, b) in boxes.iter().enumerate() {
            if b.contains(p.coords()) {
                counts[k] += 1;
            }
        }
    }
    Ok(counts)
}
