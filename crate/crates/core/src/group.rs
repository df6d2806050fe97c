//! Model groups: Euclidean space, integer lattices and the Heisenberg group.
//!
//! Every model is represented in a global coordinate chart in which Haar
//! measure is Lebesgue (or counting) measure. Closed subgroups are restricted
//! to coordinate flats and, for the Heisenberg group, its center; in all cases
//! a coset is an axis-parallel flat of the chart, which keeps coset geometry
//! exact.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{param, Error, Result};

pub type Coords = SmallVec<[f64; 4]>;

/// A point of a model group in chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint(Coords);

impl GroupPoint {
    pub fn new(coords: impl IntoIterator<Item = f64>) -> Self {
        Self(coords.into_iter().collect())
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl From<Vec<f64>> for GroupPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(Coords::from_vec(v))
    }
}

impl<const N: usize> From<[f64; N]> for GroupPoint {
    fn from(v: [f64; N]) -> Self {
        Self(v.into_iter().collect())
    }
}

/// Axis-aligned closed box `[lo_i, hi_i]` in chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(Error::InvalidWindow("zero-dimensional window".into()));
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::InvalidWindow(format!("axis {i} is not finite")));
            }
            if l > h {
                return Err(Error::InvalidWindow(format!("axis {i}: lo {l} > hi {h}")));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// Box centred at the origin with the given side length.
    pub fn centered(dim: usize, side: f64) -> Result<Self> {
        Self::cube(dim, -side / 2.0, side / 2.0)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn lengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l)
    }

    /// Lebesgue volume of the box in the chart.
    pub fn chart_volume(&self) -> f64 {
        self.lengths().product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lo.len()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        other.dim() == self.dim()
            && self
                .lo
                .iter()
                .zip(&other.lo)
                .all(|(a, b)| *a <= *b)
            && self
                .hi
                .iter()
                .zip(&other.hi)
                .all(|(a, b)| *b <= *a)
    }

    pub fn intersect(&self, other: &Window) -> Option<Window> {
        if other.dim() != self.dim() {
            return None;
        }
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return None;
        }
        Some(Window { lo, hi })
    }

    /// Grow each axis `i` by `half[i]` on both sides.
    pub fn expand(&self, half: &[f64]) -> Window {
        Window {
            lo: self.lo.iter().zip(half).map(|(l, r)| l - r).collect(),
            hi: self.hi.iter().zip(half).map(|(h, r)| h + r).collect(),
        }
    }

    /// Shrink each axis by `half[i]` on both sides, `None` if nothing is left.
    pub fn shrink(&self, half: &[f64]) -> Option<Window> {
        let lo: Vec<f64> = self.lo.iter().zip(half).map(|(l, r)| l + r).collect();
        let hi: Vec<f64> = self.hi.iter().zip(half).map(|(h, r)| h - r).collect();
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return None;
        }
        Some(Window { lo, hi })
    }

    /// Minkowski sum with another box of the same dimension.
    pub fn minkowski(&self, other: &Window) -> Window {
        Window {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a + b).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a + b).collect(),
        }
    }

    /// Projection onto the listed axes.
    pub fn select(&self, axes: &[usize]) -> Window {
        Window {
            lo: axes.iter().map(|&a| self.lo[a]).collect(),
            hi: axes.iter().map(|&a| self.hi[a]).collect(),
        }
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &Window) -> Window {
        Window {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    /// Integer range `[ceil(lo), floor(hi)]` on each axis.
    fn integer_ranges(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (l.ceil() as i64, h.floor() as i64))
    }

    fn lattice_count(&self) -> f64 {
        self.integer_ranges()
            .map(|(a, b)| (b - a + 1).max(0) as f64)
            .product()
    }

    fn integer_hull(&self) -> Option<Window> {
        let (lo, hi): (Vec<f64>, Vec<f64>) = self
            .integer_ranges()
            .map(|(a, b)| (a as f64, b as f64))
            .unzip();
        Window::new(lo, hi).ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Euclidean(usize),
    IntegerLattice(usize),
    Heisenberg,
}

/// One of the three model groups, fixed together with its chart, Haar
/// normalisation and metric.
///
/// Metrics: the Euclidean norm of `g⁻¹h` on `ℝᵈ` and `ℤᵈ`; on the Heisenberg
/// group, with law `(x,y,z)(x',y',z') = (x+x', y+y', z+z'+½(xy'−yx'))`, the
/// Cygan–Korányi gauge `((x²+y²)² + 16z²)^{1/4}` of `g⁻¹h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelGroup {
    kind: ModelKind,
}

impl ModelGroup {
    pub fn new(kind: ModelKind) -> Result<Self> {
        match kind {
            ModelKind::Euclidean(0) | ModelKind::IntegerLattice(0) => {
                Err(param("dim", "model dimension must be positive"))
            }
            _ => Ok(Self { kind }),
        }
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(ModelKind::Euclidean(dim))
    }

    pub fn lattice(dim: usize) -> Result<Self> {
        Self::new(ModelKind::IntegerLattice(dim))
    }

    pub fn heisenberg() -> Self {
        Self {
            kind: ModelKind::Heisenberg,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::Euclidean(d) | ModelKind::IntegerLattice(d) => d,
            ModelKind::Heisenberg => 3,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, ModelKind::IntegerLattice(_))
    }

    pub fn identity(&self) -> GroupPoint {
        GroupPoint(smallvec::smallvec![0.0; self.dim()])
    }

    /// Validated constructor.
    pub fn point(&self, coords: impl IntoIterator<Item = f64>) -> Result<GroupPoint> {
        let g = GroupPoint::new(coords);
        self.validate(&g)?;
        Ok(g)
    }

    pub fn validate(&self, g: &GroupPoint) -> Result<()> {
        if g.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: g.dim(),
            });
        }
        if !g.is_finite() {
            return Err(Error::InvalidPoint("non-finite coordinate".into()));
        }
        if self.is_discrete() && g.coords().iter().any(|c| c.fract() != 0.0) {
            return Err(Error::InvalidPoint("lattice coordinates must be integers".into()));
        }
        Ok(())
    }

    pub fn mul(&self, g: &GroupPoint, h: &GroupPoint) -> Result<GroupPoint> {
        for p in [g, h] {
            if p.dim() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    got: p.dim(),
                });
            }
        }
        Ok(self.mul_coords(g.coords(), h.coords()))
    }

    pub(crate) fn mul_coords(&self, g: &[f64], h: &[f64]) -> GroupPoint {
        match self.kind {
            ModelKind::Heisenberg => GroupPoint(smallvec::smallvec![
                g[0] + h[0],
                g[1] + h[1],
                g[2] + h[2] + 0.5 * (g[0] * h[1] - g[1] * h[0]),
            ]),
            _ => GroupPoint(g.iter().zip(h).map(|(a, b)| a + b).collect()),
        }
    }

    pub fn inv(&self, g: &GroupPoint) -> GroupPoint {
        GroupPoint(g.0.iter().map(|c| -c).collect())
    }

    /// `g⁻¹h`.
    pub fn relative(&self, g: &GroupPoint, h: &GroupPoint) -> GroupPoint {
        let ginv: Coords = g.0.iter().map(|c| -c).collect();
        self.mul_coords(&ginv, h.coords())
    }

    /// Norm of a single element (distance to the identity).
    pub fn norm(&self, g: &[f64]) -> f64 {
        match self.kind {
            ModelKind::Heisenberg => {
                let r2 = g[0] * g[0] + g[1] * g[1];
                (r2 * r2 + 16.0 * g[2] * g[2]).sqrt().sqrt()
            }
            _ => g.iter().map(|c| c * c).sum::<f64>().sqrt(),
        }
    }

    pub fn dist(&self, g: &GroupPoint, h: &GroupPoint) -> f64 {
        self.dist_coords(g.coords(), h.coords())
    }

    #[inline]
    pub(crate) fn dist_coords(&self, g: &[f64], h: &[f64]) -> f64 {
        match self.kind {
            ModelKind::Heisenberg => {
                let dx = h[0] - g[0];
                let dy = h[1] - g[1];
                let dz = h[2] - g[2] - 0.5 * (g[0] * h[1] - g[1] * h[0]);
                let r2 = dx * dx + dy * dy;
                (r2 * r2 + 16.0 * dz * dz).sqrt().sqrt()
            }
            _ => g
                .iter()
                .zip(h)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Haar measure of a chart box (Lebesgue volume, or number of lattice
    /// points for `ℤᵈ`).
    pub fn volume(&self, w: &Window) -> f64 {
        if self.is_discrete() {
            w.lattice_count()
        } else {
            w.chart_volume()
        }
    }

    fn check_window(&self, w: &Window) -> Result<()> {
        if w.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.dim(),
            });
        }
        Ok(())
    }

    /// Draw a point from Haar measure restricted to `w`, normalised.
    pub fn haar_sample<R: Rng + ?Sized>(&self, w: &Window, rng: &mut R) -> Result<GroupPoint> {
        self.check_window(w)?;
        if self.volume(w) <= 0.0 {
            return Err(Error::EmptyWindow);
        }
        Ok(self.haar_sample_unchecked(w, rng))
    }

    pub(crate) fn haar_sample_unchecked<R: Rng + ?Sized>(&self, w: &Window, rng: &mut R) -> GroupPoint {
        uniform_in_box(self.is_discrete(), w, rng)
    }

    /// Half-widths of a chart box around `center` containing the open metric
    /// ball of radius `r`.
    pub fn reach(&self, center: &[f64], r: f64) -> Coords {
        match self.kind {
            ModelKind::Heisenberg => {
                let rho = (center[0] * center[0] + center[1] * center[1]).sqrt();
                smallvec::smallvec![r, r, heisenberg_z_reach(r, rho)]
            }
            _ => smallvec::smallvec![r; self.dim()],
        }
    }

    /// Chart box containing every point within distance `r` of `w`.
    pub fn dilate(&self, w: &Window, r: f64) -> Window {
        if r <= 0.0 {
            return w.clone();
        }
        match self.kind {
            ModelKind::Heisenberg => {
                let rho = max_planar_radius(w);
                w.expand(&[r, r, heisenberg_z_reach(r, rho)])
            }
            _ => w.expand(&vec![r; self.dim()]),
        }
    }

    /// Bounding box of the left translate `g·w`.
    pub fn translate_bounds(&self, g: &GroupPoint, w: &Window) -> Window {
        match self.kind {
            ModelKind::Heisenberg => {
                // Left multiplication is affine in the chart, so the image of
                // the box is the hull of the images of its corners.
                let mut lo = [f64::INFINITY; 3];
                let mut hi = [f64::NEG_INFINITY; 3];
                for mask in 0..8u8 {
                    let c: [f64; 3] = std::array::from_fn(|i| {
                        if mask & (1 << i) == 0 {
                            w.lo[i]
                        } else {
                            w.hi[i]
                        }
                    });
                    let p = self.mul_coords(g.coords(), &c);
                    for i in 0..3 {
                        lo[i] = lo[i].min(p.0[i]);
                        hi[i] = hi[i].max(p.0[i]);
                    }
                }
                Window {
                    lo: lo.to_vec(),
                    hi: hi.to_vec(),
                }
            }
            _ => Window {
                lo: w.lo.iter().zip(g.coords()).map(|(a, b)| a + b).collect(),
                hi: w.hi.iter().zip(g.coords()).map(|(a, b)| a + b).collect(),
            },
        }
    }

    /// Haar volume of the open ball `B(0, r)` in closed form (exact lattice
    /// point count for `ℤᵈ`).
    pub fn ball_volume(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match self.kind {
            ModelKind::Euclidean(d) => {
                let d = d as f64;
                PI.powf(d / 2.0) / statrs::function::gamma::gamma(d / 2.0 + 1.0) * r.powf(d)
            }
            // ∫_{ρ<r} 2πρ · ½√(r⁴−ρ⁴) dρ = π²r⁴/8
            ModelKind::Heisenberg => PI * PI / 8.0 * r.powi(4),
            ModelKind::IntegerLattice(d) => lattice_ball_count(d, r) as f64,
        }
    }

    /// Monte Carlo estimate of `λ(B(0, r))` with its standard error.
    pub fn ball_volume_mc<R: Rng + ?Sized>(&self, r: f64, samples: usize, rng: &mut R) -> (f64, f64) {
        let id = self.identity();
        let half = self.reach(id.coords(), r);
        let lo: Vec<f64> = half.iter().map(|h| -h).collect();
        let bbox = Window::new(lo, half.to_vec()).expect("finite reach");
        let vol = self.volume(&bbox);
        let n = samples.max(1);
        let mut hits = 0usize;
        for _ in 0..n {
            let p = self.haar_sample_unchecked(&bbox, rng);
            if self.norm(p.coords()) < r {
                hits += 1;
            }
        }
        let frac = hits as f64 / n as f64;
        (vol * frac, vol * (frac * (1.0 - frac) / n as f64).sqrt())
    }
}

fn heisenberg_z_reach(r: f64, rho: f64) -> f64 {
    r * r / 4.0 + 0.5 * r * rho
}

fn max_planar_radius(w: &Window) -> f64 {
    let mx = w.lo[0].abs().max(w.hi[0].abs());
    let my = w.lo[1].abs().max(w.hi[1].abs());
    (mx * mx + my * my).sqrt()
}

fn lattice_ball_count(d: usize, r: f64) -> u64 {
    fn rec(axes_left: usize, budget: f64, m: i64) -> u64 {
        if axes_left == 0 {
            return 1;
        }
        let mut total = 0;
        for k in -m..=m {
            let rem = budget - (k * k) as f64;
            if rem > 0.0 {
                total += rec(axes_left - 1, rem, m);
            }
        }
        total
    }
    // Points v with |v|² < r²: the remaining budget must stay strictly positive.
    let m = r.ceil() as i64;
    rec(d, r * r, m)
}

pub(crate) fn uniform_in_box<R: Rng + ?Sized>(discrete: bool, w: &Window, rng: &mut R) -> GroupPoint {
    if discrete {
        GroupPoint(
            w.integer_ranges()
                .map(|(a, b)| rng.random_range(a..=b) as f64)
                .collect(),
        )
    } else {
        GroupPoint(
            w.lo.iter()
                .zip(&w.hi)
                .map(|(l, h)| if h > l { rng.random_range(*l..*h) } else { *l })
                .collect(),
        )
    }
}

/// Transversal coordinates of a coset `gA`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosetId(Coords);

impl CosetId {
    pub fn new(coords: impl IntoIterator<Item = f64>) -> Self {
        Self(coords.into_iter().collect())
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// Exact bit pattern, usable as a hash key.
    pub fn key(&self) -> SmallVec<[u64; 4]> {
        self.0.iter().map(|c| (c + 0.0).to_bits()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    /// The flat spanned by the listed coordinate axes (`ℝᵈ`, `ℤᵈ`).
    Axes(Vec<usize>),
    /// The center `{(0,0,z)}` of the Heisenberg group.
    Center,
}

/// A closed, unimodular, amenable, noncompact subgroup `A` from the whitelist.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subgroup {
    model: ModelGroup,
    selector: Selector,
    a_axes: Vec<usize>,
    q_axes: Vec<usize>,
}

impl Subgroup {
    pub fn new(model: ModelGroup, selector: Selector) -> Result<Self> {
        let d = model.dim();
        let a_axes = match (&selector, model.kind()) {
            (Selector::Center, ModelKind::Heisenberg) => vec![2],
            (Selector::Center, _) => {
                return Err(Error::InvalidSubgroup("only the Heisenberg group has a center selector".into()))
            }
            (Selector::Axes(_), ModelKind::Heisenberg) => {
                return Err(Error::InvalidSubgroup(
                    "Heisenberg subgroups are limited to the center".into(),
                ))
            }
            (Selector::Axes(axes), _) => {
                let mut a = axes.clone();
                a.sort_unstable();
                a.dedup();
                if a.is_empty() {
                    return Err(Error::InvalidSubgroup("no axes selected (compact subgroup)".into()));
                }
                if a.len() == d {
                    return Err(Error::InvalidSubgroup("subgroup must be proper".into()));
                }
                if let Some(bad) = a.iter().find(|&&i| i >= d) {
                    return Err(Error::InvalidSubgroup(format!("axis {bad} out of range")));
                }
                a
            }
        };
        let q_axes = (0..d).filter(|i| !a_axes.contains(i)).collect();
        Ok(Self {
            model,
            selector,
            a_axes,
            q_axes,
        })
    }

    pub fn center(model: ModelGroup) -> Result<Self> {
        Self::new(model, Selector::Center)
    }

    pub fn axes(model: ModelGroup, axes: &[usize]) -> Result<Self> {
        Self::new(model, Selector::Axes(axes.to_vec()))
    }

    pub fn model(&self) -> ModelGroup {
        self.model
    }

    pub fn selector(&self) -> &Selector {
        &self.selector
    }

    pub fn a_axes(&self) -> &[usize] {
        &self.a_axes
    }

    pub fn q_axes(&self) -> &[usize] {
        &self.q_axes
    }

    pub fn a_dim(&self) -> usize {
        self.a_axes.len()
    }

    pub fn q_dim(&self) -> usize {
        self.q_axes.len()
    }

    pub fn contains(&self, g: &GroupPoint) -> bool {
        self.q_axes.iter().all(|&i| g.coords()[i] == 0.0)
    }

    pub fn project(&self, g: &GroupPoint) -> CosetId {
        CosetId(self.q_axes.iter().map(|&i| g.coords()[i]).collect())
    }

    /// Position of `g` along its coset: `embed(project(g))⁻¹ g` in A-coordinates.
    pub fn a_coords(&self, g: &GroupPoint) -> Coords {
        self.a_axes.iter().map(|&i| g.coords()[i]).collect()
    }

    /// `embed(c)`: the transversal representative with zero A-coordinates.
    pub fn embed(&self, c: &CosetId) -> GroupPoint {
        self.point_on_coset(c, &vec![0.0; self.a_dim()])
    }

    /// The element of `A` with the given A-coordinates.
    pub fn element(&self, a: &[f64]) -> GroupPoint {
        self.point_on_coset(&CosetId(smallvec::smallvec![0.0; self.q_dim()]), a)
    }

    /// `embed(c)·a`. For every whitelisted subgroup this is the chart point
    /// with transversal coordinates `c` and A-coordinates `a`.
    pub fn point_on_coset(&self, c: &CosetId, a: &[f64]) -> GroupPoint {
        let mut coords: Coords = smallvec::smallvec![0.0; self.model.dim()];
        for (&i, v) in self.q_axes.iter().zip(c.coords()) {
            coords[i] = *v;
        }
        for (&i, v) in self.a_axes.iter().zip(a) {
            coords[i] = *v;
        }
        GroupPoint(coords)
    }

    /// Box of A-coordinates covered by a chart box.
    pub fn a_window(&self, w: &Window) -> Window {
        w.select(&self.a_axes)
    }

    /// Box of transversal coordinates covered by a chart box (`wA` projected).
    pub fn q_window(&self, w: &Window) -> Window {
        w.select(&self.q_axes)
    }

    /// `λ_A` of a box in A-coordinates.
    pub fn a_volume(&self, a_box: &Window) -> f64 {
        if self.model.is_discrete() {
            a_box.lattice_count()
        } else {
            a_box.chart_volume()
        }
    }

    /// `λ_Q` of a box in transversal coordinates.
    pub fn q_volume(&self, q_box: &Window) -> f64 {
        self.a_volume(q_box)
    }

    /// `λ_{gA}(w)` for the coset `c`: the A-volume of the fiber `{a : embed(c)·a ∈ w}`.
    pub fn fiber_volume(&self, c: &CosetId, w: &Window) -> f64 {
        if !self.q_window(w).contains(c.coords()) {
            return 0.0;
        }
        self.a_volume(&self.a_window(w))
    }

    /// Draw a point of the coset `c` from `λ_{embed(c)A}` restricted to
    /// `embed(c)·segment`.
    pub fn coset_haar_sample<R: Rng + ?Sized>(
        &self,
        c: &CosetId,
        segment: &Window,
        rng: &mut R,
    ) -> Result<GroupPoint> {
        if segment.dim() != self.a_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.a_dim(),
                got: segment.dim(),
            });
        }
        if c.coords().len() != self.q_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.q_dim(),
                got: c.coords().len(),
            });
        }
        if self.a_volume(segment) <= 0.0 {
            return Err(Error::EmptyWindow);
        }
        let a = uniform_in_box(self.model.is_discrete(), segment, rng);
        Ok(self.point_on_coset(c, a.coords()))
    }

    /// Sample a point uniformly (w.r.t. λ_Q) from a transversal box.
    pub(crate) fn sample_coset<R: Rng + ?Sized>(&self, q_box: &Window, rng: &mut R) -> CosetId {
        CosetId(uniform_in_box(self.model.is_discrete(), q_box, rng).0)
    }
}

/// Outcome of a Monte Carlo check of `λ(W) = ∫_Q λ_{gA}(W) dλ_Q(gA)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DisintegrationReport {
    pub estimate: f64,
    pub std_err: f64,
    pub exact: f64,
    pub rel_error: f64,
}

/// Integrate fiber volumes over a transversal box twice as wide as the
/// shadow of `w`, so that the estimator also sees empty fibers.
pub fn check_disintegration<R: Rng + ?Sized>(
    sub: &Subgroup,
    w: &Window,
    n_samples: usize,
    rng: &mut R,
) -> Result<DisintegrationReport> {
    let model = sub.model();
    if w.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: w.dim(),
        });
    }
    let exact = model.volume(w);
    let shadow = sub.q_window(w);
    let half: Vec<f64> = shadow.lengths().map(|l| 0.5 * l.max(1.0)).collect();
    let domain = shadow.expand(&half);
    let domain = if model.is_discrete() {
        domain.integer_hull().unwrap_or(domain)
    } else {
        domain
    };
    let q_vol = sub.q_volume(&domain);
    let n = n_samples.max(1);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let c = sub.sample_coset(&domain, rng);
        let v = sub.fiber_volume(&c, w);
        s += v;
        s2 += v * v;
    }
    let mean = s / n as f64;
    let var = (s2 / n as f64 - mean * mean).max(0.0);
    let estimate = q_vol * mean;
    let std_err = q_vol * (var / n as f64).sqrt();
    let rel_error = if exact > 0.0 {
        (estimate - exact).abs() / exact
    } else {
        estimate.abs()
    };
    Ok(DisintegrationReport {
        estimate,
        std_err,
        exact,
        rel_error,
    })
}

/// A box `F` in A-coordinates with positive finite `λ_A`-volume.
#[derive(Clone, Debug, PartialEq)]
pub struct FolnerSet {
    sub: Subgroup,
    shape: Window,
}

impl FolnerSet {
    pub fn new(sub: &Subgroup, shape: Window) -> Result<Self> {
        if shape.dim() != sub.a_dim() {
            return Err(Error::DimensionMismatch {
                expected: sub.a_dim(),
                got: shape.dim(),
            });
        }
        if sub.a_volume(&shape) <= 0.0 {
            return Err(param("folner", "Følner set must have positive volume"));
        }
        Ok(Self {
            sub: sub.clone(),
            shape,
        })
    }

    /// `[-n, n]^k` in A-coordinates.
    pub fn symmetric(sub: &Subgroup, n: f64) -> Result<Self> {
        if !(n > 0.0) {
            return Err(param("n", "Følner radius must be positive"));
        }
        Self::new(sub, Window::cube(sub.a_dim(), -n, n)?)
    }

    pub fn subgroup(&self) -> &Subgroup {
        &self.sub
    }

    pub fn shape(&self) -> &Window {
        &self.shape
    }

    pub fn volume(&self) -> f64 {
        self.sub.a_volume(&self.shape)
    }

    /// Largest metric distance between two elements of `F`.
    pub fn metric_diameter(&self) -> f64 {
        let span: Vec<f64> = self.shape.lengths().collect();
        let e = self.sub.element(&span);
        self.sub.model().norm(e.coords())
    }

    /// `λ_A(KF Δ F) / λ_A(F)` for a box `K` in A-coordinates.
    pub fn defect(&self, k: &Window) -> Result<f64> {
        if k.dim() != self.sub.a_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.sub.a_dim(),
                got: k.dim(),
            });
        }
        let (f, k) = if self.sub.model().is_discrete() {
            match (self.shape.integer_hull(), k.integer_hull()) {
                (Some(f), Some(k)) => (f, k),
                _ => return Err(param("folner", "empty lattice box")),
            }
        } else {
            (self.shape.clone(), k.clone())
        };
        let vf = self.sub.a_volume(&f);
        if vf <= 0.0 {
            return Err(param("folner", "Følner set has zero volume"));
        }
        let kf = k.minkowski(&f);
        let inter = kf.intersect(&f).map_or(0.0, |w| self.sub.a_volume(&w));
        let sym = self.sub.a_volume(&kf) + vf - 2.0 * inter;
        Ok(sym.max(0.0) / vf)
    }
}

/// `λ_A(K F Δ F)/λ_A(F)`; free-function form of [`FolnerSet::defect`].
pub fn folner_defect(f: &FolnerSet, k: &Window) -> Result<f64> {
    f.defect(k)
}
