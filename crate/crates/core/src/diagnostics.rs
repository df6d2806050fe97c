//! Statistical verification of sampled processes: count-law goodness of fit,
//! two-sample fidi comparisons, total-variation estimates, the Palm rerooting
//! cross-check, and the Følner weak-convergence report.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{param, Error, Result};
use crate::group::{FolnerSet, GroupPoint, Subgroup, Window};
use crate::process::{fidi, sample_cox_folner, sample_cox_quotient, Configuration, Estimate};
use crate::rng::{replicate, StreamKey};
use crate::spatial::GridIndex;
use crate::stats::{chi_square_gof, chi_square_sf, chi_square_two_sample, poisson_pmf};

/// Minimum replicate count for [`count_gof_test`].
pub const MIN_GOF_REPLICATES: usize = 500;

/// Joint counts at or above this value share one histogram cell.
pub const TAIL_CAP: u64 = 10;

/// Smallest share of the pooled rows one cell of the rerooting test may hold.
const MIN_CELL_SHARE: f64 = 0.05;

/// Count vectors of many replicates over one list of boxes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidiSample {
    boxes: Vec<Window>,
    rows: Vec<Vec<u64>>,
}

impl FidiSample {
    pub fn new(boxes: Vec<Window>, rows: Vec<Vec<u64>>) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.len() != boxes.len()) {
            return Err(Error::DimensionMismatch {
                expected: boxes.len(),
                got: r.len(),
            });
        }
        Ok(Self { boxes, rows })
    }

    /// Fidi vectors of a list of configurations.
    pub fn from_configs(configs: &[Configuration], boxes: &[Window]) -> Result<Self> {
        let rows = configs
            .iter()
            .map(|c| fidi(c, boxes))
            .collect::<Result<Vec<_>>>()?;
        Self::new(boxes.to_vec(), rows)
    }

    pub fn boxes(&self) -> &[Window] {
        &self.boxes
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The one-box fidi of box `k`.
    pub fn marginal(&self, k: usize) -> FidiSample {
        FidiSample {
            boxes: vec![self.boxes[k].clone()],
            rows: self.rows.iter().map(|r| vec![r[k]]).collect(),
        }
    }

    pub fn column(&self, k: usize) -> impl Iterator<Item = u64> + '_ {
        self.rows.iter().map(move |r| r[k])
    }
}

/// Per-box chi-square p-values of the counts against `Pois(mu[k])`.
///
/// Cells are the individual counts below the largest observed count plus one
/// upper-tail cell; adjacent cells are pooled until each expects at least
/// five observations.
pub fn count_gof_test(sample: &FidiSample, mu: &[f64]) -> Result<Vec<f64>> {
    if sample.len() < MIN_GOF_REPLICATES {
        return Err(Error::TooFewReplicates {
            needed: MIN_GOF_REPLICATES,
            got: sample.len(),
        });
    }
    if mu.len() != sample.boxes().len() {
        return Err(Error::DimensionMismatch {
            expected: sample.boxes().len(),
            got: mu.len(),
        });
    }
    let n = sample.len() as f64;
    let mut out = Vec::with_capacity(mu.len());
    for (k, &m) in mu.iter().enumerate() {
        if !(m >= 0.0) || !m.is_finite() {
            return Err(param("mu", "Poisson means must be finite and nonnegative"));
        }
        let counts: Vec<u64> = sample.column(k).collect();
        let kmax = counts.iter().copied().max().unwrap_or(0);
        if m == 0.0 {
            out.push(if kmax == 0 { 1.0 } else { 0.0 });
            continue;
        }
        let mut observed = vec![0.0; kmax as usize + 1];
        for c in counts {
            observed[c as usize] += 1.0;
        }
        let mut expected: Vec<f64> = (0..kmax).map(|j| n * poisson_pmf(j, m)).collect();
        let below: f64 = expected.iter().sum::<f64>() / n;
        expected.push(n * (1.0 - below).max(0.0));
        out.push(chi_square_gof(&observed, &expected).p_value);
    }
    Ok(out)
}

fn check_same_boxes(a: &FidiSample, b: &FidiSample) -> Result<()> {
    if a.boxes() != b.boxes() {
        return Err(Error::MismatchedBoxes);
    }
    Ok(())
}

/// Chi-square homogeneity test on the joint count histograms of two fidi
/// samples (counts capped at [`TAIL_CAP`]).
pub fn two_sample_fidi_test(a: &FidiSample, b: &FidiSample) -> Result<f64> {
    check_same_boxes(a, b)?;
    let mut cells: BTreeMap<Vec<u64>, (f64, f64)> = BTreeMap::new();
    for r in a.rows() {
        let key: Vec<u64> = r.iter().map(|c| (*c).min(TAIL_CAP)).collect();
        cells.entry(key).or_default().0 += 1.0;
    }
    for r in b.rows() {
        let key: Vec<u64> = r.iter().map(|c| (*c).min(TAIL_CAP)).collect();
        cells.entry(key).or_default().1 += 1.0;
    }
    let (ha, hb): (Vec<f64>, Vec<f64>) = cells.values().copied().unzip();
    Ok(chi_square_two_sample(&ha, &hb).p_value)
}

/// Plug-in total-variation distance with a percentile bootstrap interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TvEstimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

struct Categorized {
    a: Vec<u32>,
    b: Vec<u32>,
    n_cat: usize,
}

fn categorize(a: impl Iterator<Item = Vec<u64>>, b: impl Iterator<Item = Vec<u64>>) -> Categorized {
    let mut dict: HashMap<Vec<u64>, u32> = HashMap::new();
    let mut id = |r: Vec<u64>| {
        let next = dict.len() as u32;
        *dict.entry(r).or_insert(next)
    };
    let a: Vec<u32> = a.map(&mut id).collect();
    let b: Vec<u32> = b.map(&mut id).collect();
    let n_cat = dict.len();
    Categorized { a, b, n_cat }
}

fn tv_of(cat: &Categorized, ia: &[usize], ib: &[usize], buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.resize(cat.n_cat, 0.0);
    // Cross-multiplied counts keep the sums exact integers.
    let wa = ib.len() as f64;
    let wb = ia.len() as f64;
    for &i in ia {
        buf[cat.a[i] as usize] += wa;
    }
    for &i in ib {
        buf[cat.b[i] as usize] -= wb;
    }
    0.5 * buf.iter().map(|v| v.abs()).sum::<f64>() / (wa * wb)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Max over `cats` of the plug-in TV, with a joint bootstrap over rows.
fn bootstrap_tv<R: Rng + ?Sized>(
    cats: &[Categorized],
    na: usize,
    nb: usize,
    n_boot: usize,
    rng: &mut R,
) -> TvEstimate {
    let ia: Vec<usize> = (0..na).collect();
    let ib: Vec<usize> = (0..nb).collect();
    let mut buf = Vec::new();
    let value = cats
        .iter()
        .map(|c| tv_of(c, &ia, &ib, &mut buf))
        .fold(0.0, f64::max);
    let mut boots = Vec::with_capacity(n_boot);
    let mut ra = vec![0usize; na];
    let mut rb = vec![0usize; nb];
    for _ in 0..n_boot {
        ra.iter_mut().for_each(|v| *v = rng.random_range(0..na));
        rb.iter_mut().for_each(|v| *v = rng.random_range(0..nb));
        boots.push(
            cats.iter()
                .map(|c| tv_of(c, &ra, &rb, &mut buf))
                .fold(0.0, f64::max),
        );
    }
    boots.sort_by(f64::total_cmp);
    let (ci_low, ci_high) = if boots.is_empty() {
        (value, value)
    } else {
        (percentile(&boots, 0.025), percentile(&boots, 0.975))
    };
    TvEstimate {
        value,
        ci_low,
        ci_high,
    }
}

/// Plug-in TV between the joint empirical count laws of `a` and `b`.
pub fn tv_estimate<R: Rng + ?Sized>(
    a: &FidiSample,
    b: &FidiSample,
    n_boot: usize,
    rng: &mut R,
) -> Result<TvEstimate> {
    check_same_boxes(a, b)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::NoSamples);
    }
    let cat = categorize(a.rows().iter().cloned(), b.rows().iter().cloned());
    Ok(bootstrap_tv(&[cat], a.len(), b.len(), n_boot, rng))
}

/// Largest one-box TV over the panel, with a joint bootstrap interval.
pub fn tv_max_marginal<R: Rng + ?Sized>(
    a: &FidiSample,
    b: &FidiSample,
    n_boot: usize,
    rng: &mut R,
) -> Result<TvEstimate> {
    check_same_boxes(a, b)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::NoSamples);
    }
    let cats: Vec<Categorized> = (0..a.boxes().len())
        .map(|k| categorize(a.column(k).map(|c| vec![c]), b.column(k).map(|c| vec![c])))
        .collect();
    Ok(bootstrap_tv(&cats, a.len(), b.len(), n_boot, rng))
}

/// Six test boxes: the unit cube, a transversal shift, boxes elongated and
/// flattened along `A`, and a box straddling the identity.
pub fn default_panel(sub: &Subgroup) -> Vec<Window> {
    let d = sub.model().dim();
    let make = |q: (f64, f64), a: (f64, f64), q0_shift: f64| {
        let mut lo = vec![0.0; d];
        let mut hi = vec![0.0; d];
        for (k, &i) in sub.q_axes().iter().enumerate() {
            let s = if k == 0 { q0_shift } else { 0.0 };
            lo[i] = q.0 + s;
            hi[i] = q.1 + s;
        }
        for &i in sub.a_axes() {
            lo[i] = a.0;
            hi[i] = a.1;
        }
        Window::new(lo, hi).expect("valid panel box")
    };
    vec![
        make((0.0, 1.0), (0.0, 1.0), 0.0),
        make((0.0, 1.0), (0.0, 1.0), 1.0),
        make((0.0, 1.0), (0.0, 3.0), 0.0),
        make((-1.0, 0.0), (-1.0, 1.0), 0.0),
        make((0.0, 2.0), (0.0, 0.5), 0.0),
        make((0.0, 0.5), (0.0, 4.0), 0.0),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    /// Følner radius: `F_n = [-n, n]^k` in A-coordinates.
    pub n: f64,
    /// `λ(B F_n) / λ_A(F_n)` for the primary box.
    pub p_n: f64,
    /// Mean number of propagated segments charging the primary box.
    pub p_n_mc: Estimate,
    /// `λ_Q(BA)` for the primary box.
    pub p: f64,
    /// Følner defect of `F_n` against `K = B⁻¹B ∩ A`.
    pub eps_n: f64,
    pub tv: TvEstimate,
    /// Worst-case over the panel of `P[B ∩ xA ≠ B ∩ xF_n]`, `x` uniform on `BF_n`.
    pub coupling_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub boxes: Vec<Window>,
    pub replicates: usize,
    pub rows: Vec<ConvergenceRow>,
    pub violations: Vec<String>,
}

impl ConvergenceReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn a_expanded(sub: &Subgroup, b: &Window, f: &Window) -> Window {
    let mut lo = b.lo().to_vec();
    let mut hi = b.hi().to_vec();
    for (k, &i) in sub.a_axes().iter().enumerate() {
        lo[i] += f.lo()[k];
        hi[i] += f.hi()[k];
    }
    Window::new(lo, hi).expect("expanded box")
}

/// `λ(B F) / λ_A(F)`; `BF` is `B` grown along the A-axes by `F`.
pub fn poisson_parameter(sub: &Subgroup, b: &Window, f: &FolnerSet) -> f64 {
    sub.model().volume(&a_expanded(sub, b, f.shape())) / f.volume()
}

/// `λ_Q(BA)`.
pub fn limit_parameter(sub: &Subgroup, b: &Window) -> f64 {
    sub.q_volume(&sub.q_window(b))
}

/// `B⁻¹B ∩ A` for a chart box: the symmetric box of A-coordinate differences.
pub fn difference_set(sub: &Subgroup, b: &Window) -> Window {
    let a = sub.a_window(b);
    let half: Vec<f64> = a.lengths().collect();
    Window::new(half.iter().map(|h| -h).collect(), half).expect("symmetric box")
}

fn coupling_bound(sub: &Subgroup, b: &Window, f: &FolnerSet) -> f64 {
    let a = sub.a_window(b);
    let covered: f64 = a
        .lengths()
        .zip(f.shape().lengths())
        .map(|(len, flen)| ((flen - len) / (flen + len)).max(0.0))
        .product();
    1.0 - covered
}

/// Options for [`weak_convergence_report`].
#[derive(Clone, Debug)]
pub struct ConvergenceOptions {
    pub replicates: usize,
    pub n_boot: usize,
    /// Sigma multiple used for the Monte Carlo agreement checks.
    pub sigmas: f64,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            replicates: 10_000,
            n_boot: 200,
            sigmas: 3.0,
        }
    }
}

/// Track the Cox process driven by `F_n = [-n, n]^k` against the Cox process
/// driven by `G/A` on a panel of boxes. `boxes[0]` is the primary box for the
/// Poisson-parameter columns.
pub fn weak_convergence_report(
    sub: &Subgroup,
    ns: &[f64],
    boxes: &[Window],
    opts: &ConvergenceOptions,
    key: StreamKey,
) -> Result<ConvergenceReport> {
    if ns.is_empty() {
        return Err(param("folner", "empty Følner sequence"));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) || ns[0] <= 0.0 {
        return Err(param("folner", "Følner sequence must be positive and strictly increasing"));
    }
    let primary = boxes.first().ok_or_else(|| param("boxes", "empty panel"))?;
    let model = sub.model();
    for b in boxes {
        if b.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: b.dim(),
            });
        }
    }
    let hull = boxes.iter().skip(1).fold(primary.clone(), |h, b| h.hull(b));

    let reference: Vec<Vec<u64>> = replicate(key.named("reference"), opts.replicates, |_, r| {
        let s = sample_cox_quotient(sub, &hull, 0.0, r).expect("validated inputs");
        fidi(s.config(), boxes).expect("boxes inside hull")
    });
    let reference = FidiSample::new(boxes.to_vec(), reference)?;
    let p = limit_parameter(sub, primary);
    let k_set = difference_set(sub, primary);

    let mut rows = Vec::with_capacity(ns.len());
    for (idx, &n) in ns.iter().enumerate() {
        let f = FolnerSet::symmetric(sub, n)?;
        let buffer = f.metric_diameter();
        let stream = key.named("folner").child(idx as u64);
        let draws: Vec<(Vec<u64>, f64)> = replicate(stream, opts.replicates, |_, r| {
            let s = sample_cox_folner(sub, &f, &hull, buffer, r).expect("validated inputs");
            (
                fidi(s.config(), boxes).expect("boxes inside hull"),
                s.sources_meeting(primary) as f64,
            )
        });
        let (fidi_rows, charged): (Vec<Vec<u64>>, Vec<f64>) = draws.into_iter().unzip();
        let sample = FidiSample::new(boxes.to_vec(), fidi_rows)?;
        let mut brng = stream.named("bootstrap").rng();
        let tv = tv_max_marginal(&sample, &reference, opts.n_boot, &mut brng)?;
        let bound = boxes
            .iter()
            .map(|b| coupling_bound(sub, b, &f))
            .fold(0.0, f64::max);
        rows.push(ConvergenceRow {
            n,
            p_n: poisson_parameter(sub, primary, &f),
            p_n_mc: Estimate::from_values(&charged).ok_or(Error::NoSamples)?,
            p,
            eps_n: f.defect(&k_set)?,
            tv,
            coupling_bound: bound,
        });
    }

    let mut violations = Vec::new();
    for r in &rows {
        if r.p_n < r.p {
            violations.push(format!("n={}: p_n {} < p {}", r.n, r.p_n, r.p));
        }
        if r.p_n > (1.0 + r.eps_n) * r.p + 1e-12 {
            violations.push(format!("n={}: p_n {} > (1+eps_n)p {}", r.n, r.p_n, (1.0 + r.eps_n) * r.p));
        }
        if !r.p_n_mc.within_sigmas(r.p_n, opts.sigmas) {
            violations.push(format!(
                "n={}: measured p_n {} ± {} disagrees with {}",
                r.n, r.p_n_mc.value, r.p_n_mc.std_err, r.p_n
            ));
        }
    }
    for w in rows.windows(2) {
        if w[1].p_n > w[0].p_n + 1e-12 {
            violations.push(format!("p_n increases from n={} to n={}", w[0].n, w[1].n));
        }
        if w[1].tv.value > w[0].tv.ci_high {
            violations.push(format!("TV increases from n={} to n={}", w[0].n, w[1].n));
        }
    }
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        if rows.len() > 1 && last.tv.value >= first.tv.value {
            violations.push("final TV is not below the first".into());
        }
    }
    Ok(ConvergenceReport {
        boxes: boxes.to_vec(),
        replicates: opts.replicates,
        rows,
        violations,
    })
}

/// Rerooted Palm fidi rows together with the sample each row came from.
///
/// Rows from one sample are dependent, so tests on this estimate have to
/// treat samples, not rows, as the independent units.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RerootedFidi {
    pub fidi: FidiSample,
    pub source: Vec<usize>,
    pub samples: usize,
}

/// Empirical Palm fidi by rerooting: every point `g` of the window whose
/// translated panel `g·B` and `margin`-neighbourhood stay inside the sampled
/// region contributes the counts of `g⁻¹Π` in the root-relative boxes.
pub fn palm_reroot_estimate(samples: &[Configuration], boxes: &[Window], margin: f64) -> Result<RerootedFidi> {
    let first = samples.first().ok_or(Error::NoSamples)?;
    let model = first.model();
    if !(margin >= 0.0) {
        return Err(param("margin", "must be nonnegative"));
    }
    let mut rows = Vec::new();
    let mut source = Vec::new();
    for (si, s) in samples.iter().enumerate() {
        let region = s.observed_region();
        let pts = s.points();
        if pts.is_empty() {
            continue;
        }
        let index = GridIndex::for_radius(&model, pts, margin.max(1.0));
        for g in pts {
            if !s.window().contains(g.coords()) {
                continue;
            }
            let reach = model.reach(g.coords(), margin);
            if !region.contains_window(&Window::new(
                g.coords().iter().zip(&reach).map(|(c, h)| c - h).collect(),
                g.coords().iter().zip(&reach).map(|(c, h)| c + h).collect(),
            )?) {
                continue;
            }
            let images: Vec<Window> = boxes.iter().map(|b| model.translate_bounds(g, b)).collect();
            if images.iter().any(|w| !region.contains_window(w)) {
                continue;
            }
            let mut row = vec![0u64; boxes.len()];
            for (k, (b, img)) in boxes.iter().zip(&images).enumerate() {
                index.for_each_in_box(img.lo(), img.hi(), |j| {
                    let rel: GroupPoint = model.relative(g, &pts[j as usize]);
                    if b.contains(rel.coords()) {
                        row[k] += 1;
                    }
                });
            }
            rows.push(row);
            source.push(si);
        }
    }
    if rows.is_empty() {
        return Err(Error::NoInteriorPoints);
    }
    Ok(RerootedFidi {
        fidi: FidiSample::new(boxes.to_vec(), rows)?,
        source,
        samples: samples.len(),
    })
}

/// Per-box p-values comparing the one-box count law of a rerooted estimate
/// with an i.i.d. sample of the Palm construction.
///
/// Count values are pooled into adjacent cells holding at least 5% of the
/// two samples combined; finer cells leave sparse cells whose cluster
/// variance is badly underestimated. The rerooted cell frequencies are
/// ratio estimates whose covariance is computed with samples as clusters;
/// the construction frequencies get the multinomial covariance. The Wald
/// statistic `W` of the difference over `m = cells − 1` cells is referred
/// to `F(m, S − m)` after scaling by `(S − m)/((S − 1)m)`, with `S` the
/// number of rerooted samples.
pub fn reroot_agreement_test(rerooted: &RerootedFidi, construction: &FidiSample) -> Result<Vec<f64>> {
    check_same_boxes(&rerooted.fidi, construction)?;
    if construction.len() < 2 || rerooted.samples < 2 {
        return Err(Error::TooFewReplicates {
            needed: 2,
            got: construction.len().min(rerooted.samples),
        });
    }
    (0..construction.boxes().len())
        .map(|k| Ok(reroot_box_p_value(rerooted, construction, k)))
        .collect()
}

fn reroot_box_p_value(rerooted: &RerootedFidi, construction: &FidiSample, k: usize) -> f64 {
    let a: Vec<u64> = rerooted.fidi.column(k).collect();
    let b: Vec<u64> = construction.column(k).collect();
    let top = a.iter().chain(&b).copied().max().unwrap_or(0) as usize;
    let mut hist = vec![0usize; top + 1];
    for v in a.iter().chain(&b) {
        hist[*v as usize] += 1;
    }
    let mut cell_of = vec![0usize; top + 1];
    let min_cell = ((MIN_CELL_SHARE * (a.len() + b.len()) as f64).ceil() as usize).max(10);
    let mut cells = 0usize;
    let mut acc = 0usize;
    for (v, h) in hist.iter().enumerate() {
        cell_of[v] = cells;
        acc += h;
        if acc >= min_cell {
            cells += 1;
            acc = 0;
        }
    }
    if acc > 0 {
        if cells == 0 {
            cells = 1;
        } else {
            for c in cell_of.iter_mut().filter(|c| **c == cells) {
                *c = cells - 1;
            }
        }
    }
    if cells < 2 {
        return 1.0;
    }
    let m = cells - 1;

    let total_rows = a.len() as f64;
    let mut p_hat = vec![0.0; cells];
    for v in &a {
        p_hat[cell_of[*v as usize]] += 1.0 / total_rows;
    }
    let n_b = b.len() as f64;
    let mut q_hat = vec![0.0; cells];
    for v in &b {
        q_hat[cell_of[*v as usize]] += 1.0 / n_b;
    }

    // Cluster residuals e_s = y_s - p_hat * m_s, over all samples (empty ones included).
    let s = rerooted.samples;
    let mut resid = vec![vec![0.0; m]; s];
    for (v, &src) in a.iter().zip(&rerooted.source) {
        let c = cell_of[*v as usize];
        let e = &mut resid[src];
        if c < m {
            e[c] += 1.0;
        }
        for (j, x) in e.iter_mut().enumerate() {
            *x -= p_hat[j];
        }
    }
    let scale = s as f64 / (s as f64 - 1.0) / (total_rows * total_rows);
    let mut cov = nalgebra::DMatrix::<f64>::zeros(m, m);
    for e in &resid {
        for i in 0..m {
            for j in 0..m {
                cov[(i, j)] += scale * e[i] * e[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..m {
            let d = if i == j { q_hat[i] } else { 0.0 };
            cov[(i, j)] += (d - q_hat[i] * q_hat[j]) / n_b;
        }
    }
    let diff = nalgebra::DVector::from_iterator(m, (0..m).map(|i| p_hat[i] - q_hat[i]));
    match cov.cholesky() {
        Some(ch) => {
            let w = diff.dot(&ch.solve(&diff));
            if s <= m + 1 {
                return chi_square_sf(w, m);
            }
            // Hotelling-style small-sample reference for a covariance
            // estimated from `s` clusters.
            let (m, s) = (m as f64, s as f64);
            let f = w * (s - m) / ((s - 1.0) * m);
            FisherSnedecor::new(m, s - m).map_or(0.0, |d| d.sf(f))
        }
        None if diff.amax() < 1e-12 => 1.0,
        None => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::ModelGroup;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn pois_sample(mu: f64, n: usize, seed: u64) -> FidiSample {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let d = Poisson::new(mu).unwrap();
        let rows = (0..n).map(|_| vec![d.sample(&mut r) as u64]).collect();
        FidiSample::new(vec![Window::cube(1, 0.0, 1.0).unwrap()], rows).unwrap()
    }

    #[test]
    fn gof_rejects_wrong_mean() {
        let s = pois_sample(5.0, 10_000, 1);
        assert!(count_gof_test(&s, &[6.0]).unwrap()[0] < 0.01);
        assert!(count_gof_test(&s, &[5.0]).unwrap()[0] > 1e-4);
    }

    #[test]
    fn gof_requires_replicates() {
        let s = pois_sample(5.0, 100, 1);
        assert!(matches!(count_gof_test(&s, &[5.0]), Err(Error::TooFewReplicates { .. })));
    }

    #[test]
    fn gof_zero_mean() {
        let s = FidiSample::new(vec![Window::cube(1, 0.0, 1.0).unwrap()], vec![vec![0]; 600]).unwrap();
        assert_eq!(count_gof_test(&s, &[0.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn two_sample_power() {
        let a = pois_sample(1.0, 10_000, 2);
        let b = pois_sample(1.5, 10_000, 3);
        assert!(two_sample_fidi_test(&a, &b).unwrap() < 1e-6);
        let c = pois_sample(1.0, 10_000, 4);
        assert!(two_sample_fidi_test(&a, &c).unwrap() > 1e-4);
    }

    #[test]
    fn mismatched_boxes_rejected() {
        let a = pois_sample(1.0, 10, 2);
        let b = FidiSample::new(vec![Window::cube(1, 0.0, 2.0).unwrap()], vec![vec![1]]).unwrap();
        assert_eq!(two_sample_fidi_test(&a, &b).unwrap_err(), Error::MismatchedBoxes);
        let mut r = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(tv_estimate(&a, &b, 10, &mut r).unwrap_err(), Error::MismatchedBoxes);
    }

    #[test]
    fn tv_extremes() {
        let w = vec![Window::cube(1, 0.0, 1.0).unwrap()];
        let a = FidiSample::new(w.clone(), vec![vec![0]; 100]).unwrap();
        let b = FidiSample::new(w, vec![vec![3]; 100]).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let t = tv_estimate(&a, &b, 50, &mut r).unwrap();
        assert_eq!(t.value, 1.0);
        let t = tv_estimate(&a, &a, 50, &mut r).unwrap();
        assert_eq!(t.value, 0.0);
    }

    #[test]
    fn parameters_closed_form() {
        let sub = Subgroup::center(ModelGroup::heisenberg()).unwrap();
        let b = Window::cube(3, 0.0, 1.0).unwrap();
        for n in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let f = FolnerSet::symmetric(&sub, n).unwrap();
            let pn = poisson_parameter(&sub, &b, &f);
            assert!((pn - (2.0 * n + 1.0) / (2.0 * n)).abs() < 1e-12);
            let eps = f.defect(&difference_set(&sub, &b)).unwrap();
            assert!(pn >= 1.0 && pn <= 1.0 + eps + 1e-12);
        }
        assert_eq!(limit_parameter(&sub, &b), 1.0);
    }

    #[test]
    fn convergence_rejects_non_increasing_sequence() {
        let sub = Subgroup::center(ModelGroup::heisenberg()).unwrap();
        let panel = default_panel(&sub);
        let opts = ConvergenceOptions {
            replicates: 10,
            ..Default::default()
        };
        assert!(weak_convergence_report(&sub, &[2.0, 1.0], &panel, &opts, StreamKey::new(0)).is_err());
        assert!(weak_convergence_report(&sub, &[], &panel, &opts, StreamKey::new(0)).is_err());
    }

    #[test]
    fn reroot_on_lattice_orbit_is_constant() {
        let z = ModelGroup::lattice(2).unwrap();
        let w = Window::cube(2, -5.0, 5.0).unwrap();
        let pts: Vec<GroupPoint> = (-5..=5)
            .flat_map(|i| (-5..=5).map(move |j| GroupPoint::from([i as f64, j as f64])))
            .collect();
        let c = Configuration::new(z, pts, w, 0.0).unwrap();
        let boxes = vec![
            Window::cube(2, -1.0, 1.0).unwrap(),
            Window::new(vec![0.0, 0.0], vec![2.0, 0.0]).unwrap(),
        ];
        let f = palm_reroot_estimate(&[c], &boxes, 2.0).unwrap();
        assert_eq!(f.source.len(), f.fidi.len());
        let f = f.fidi;
        assert!(f.len() > 10);
        assert!(f.rows().iter().all(|r| r == &vec![9, 3]));
    }

    #[test]
    fn reroot_needs_interior_points() {
        let m = ModelGroup::euclidean(2).unwrap();
        let c = Configuration::new(m, vec![[0.5, 0.5].into()], Window::cube(2, 0.0, 1.0).unwrap(), 0.0).unwrap();
        let boxes = vec![Window::cube(2, -0.1, 0.1).unwrap()];
        assert_eq!(palm_reroot_estimate(&[c], &boxes, 1.0).unwrap_err(), Error::NoInteriorPoints);
    }

    #[test]
    fn reroot_agrees_with_palm_poisson_only_at_the_right_rate() {
        use crate::process::{palm_poisson, sample_poisson_group};
        let m = ModelGroup::euclidean(2).unwrap();
        let boxes = vec![Window::cube(2, -1.0, 1.0).unwrap(), Window::cube(2, 0.0, 0.7).unwrap()];
        let mut r = ChaCha8Rng::seed_from_u64(21);
        let stationary: Vec<Configuration> = (0..400)
            .map(|_| sample_poisson_group(m, &Window::cube(2, -3.0, 3.0).unwrap(), 1.5, 1.0, &mut r).unwrap())
            .collect();
        let rerooted = palm_reroot_estimate(&stationary, &boxes, 0.0).unwrap();
        assert_eq!(rerooted.samples, 400);
        let palm = |t: f64, r: &mut ChaCha8Rng| {
            let rows: Vec<Configuration> = (0..4000)
                .map(|_| palm_poisson(m, &Window::cube(2, -1.0, 1.0).unwrap(), t, r).unwrap().config().clone())
                .collect();
            FidiSample::from_configs(&rows, &boxes).unwrap()
        };
        let same = reroot_agreement_test(&rerooted, &palm(1.0, &mut r)).unwrap();
        assert!(same.iter().all(|p| *p > 1e-3), "{same:?}");
        let off = reroot_agreement_test(&rerooted, &palm(1.5, &mut r)).unwrap();
        assert!(off[0] < 1e-6, "{off:?}");
    }
}
