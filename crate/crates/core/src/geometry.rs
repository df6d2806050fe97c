//! Voronoi assignment on a query grid, leafwise Voronoi intervals along
//! cosets, and cross-coset adjacency scans.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::graph::sorted_leaves;
use crate::group::Window;
use crate::process::{Configuration, CoxSample};
use crate::rng::mix;
use crate::spatial::GridIndex;

/// Ownership of query locations over a window.
///
/// On continuous models the query locations are the centres of a regular
/// grid; on `ℤᵈ` they are the lattice sites of the window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VoronoiAssignment {
    pub window: Window,
    /// Query locations per axis; axis 0 varies fastest in [`owners`](Self::owners).
    pub shape: Vec<usize>,
    pub owners: Vec<u32>,
    /// Haar volume of each point's cell within the window.
    pub volumes: Vec<f64>,
    /// Query locations with two or more equidistant nearest points.
    pub ties: usize,
    cell_volume: f64,
    discrete: bool,
}

impl VoronoiAssignment {
    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn len(&self) -> usize {
        self.owners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owners.is_empty()
    }

    /// Chart coordinates of query location `k`.
    pub fn location(&self, mut k: usize) -> Vec<f64> {
        let w = &self.window;
        self.shape
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let j = k % s;
                k /= s;
                if self.discrete {
                    w.lo()[i].ceil() + j as f64
                } else {
                    let h = (w.hi()[i] - w.lo()[i]) / s as f64;
                    w.lo()[i] + (j as f64 + 0.5) * h
                }
            })
            .collect()
    }

    pub fn tie_rate(&self) -> f64 {
        if self.owners.is_empty() {
            0.0
        } else {
            self.ties as f64 / self.owners.len() as f64
        }
    }
}

/// Tie-break labels from a hash of each point's coordinates, in `[0, 1)`.
pub fn coordinate_labels(config: &Configuration) -> Vec<f64> {
    config
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            // Lattice configurations may repeat a site, so the index is mixed in.
            let h = p
                .coords()
                .iter()
                .fold(mix(i as u64), |h, c| mix(h ^ c.to_bits()));
            (h >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

fn nearest(
    config: &Configuration,
    index: &GridIndex,
    labels: &[f64],
    q: &[f64],
    r0: f64,
) -> (u32, bool) {
    let model = config.model();
    let pts = config.points();
    let mut r = r0;
    loop {
        let mut best: Option<(f64, f64, u32)> = None;
        let mut tie = false;
        index.within(&model, pts, q, r, |j, d| {
            let l = labels[j as usize];
            match best {
                None => best = Some((d, l, j)),
                Some((bd, bl, _)) => {
                    if d == bd {
                        tie = true;
                    }
                    if d < bd || (d == bd && l < bl) {
                        if d < bd {
                            tie = false;
                        }
                        best = Some((d, l, j));
                    }
                }
            }
        });
        if let Some((_, _, j)) = best {
            return (j, tie);
        }
        r *= 2.0;
    }
}

/// Assign every query location of the window to its nearest point, smaller
/// label winning exact ties. `resolution` gives the grid size per axis and is
/// ignored on `ℤᵈ`.
pub fn voronoi_assign(config: &Configuration, resolution: &[usize], labels: &[f64]) -> Result<VoronoiAssignment> {
    if config.is_empty() {
        return Err(Error::EmptyConfiguration);
    }
    let model = config.model();
    let window = config.window().clone();
    if labels.len() != config.len() {
        return Err(Error::DimensionMismatch {
            expected: config.len(),
            got: labels.len(),
        });
    }
    let mut sorted = labels.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(param("labels", "must be distinct"));
    }
    let discrete = model.is_discrete();
    let (shape, cell_volume) = if discrete {
        let shape: Vec<usize> = window
            .lo()
            .iter()
            .zip(window.hi())
            .map(|(l, h)| (h.floor() - l.ceil() + 1.0).max(0.0) as usize)
            .collect();
        (shape, 1.0)
    } else {
        if resolution.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: resolution.len(),
            });
        }
        if resolution.contains(&0) {
            return Err(param("resolution", "must be positive on every axis"));
        }
        let cell: f64 = window
            .lengths()
            .zip(resolution)
            .map(|(l, &s)| l / s as f64)
            .product();
        (resolution.to_vec(), cell)
    };
    let total: usize = shape.iter().product();
    if total == 0 || cell_volume <= 0.0 {
        return Err(Error::EmptyWindow);
    }
    let region = config.observed_region();
    let spacing = (model.volume(&region).max(1.0) / config.len() as f64).powf(1.0 / model.dim() as f64);
    let r0 = 1.5 * spacing;
    let index = GridIndex::for_radius(&model, config.points(), r0);
    let mut out = VoronoiAssignment {
        window,
        shape,
        owners: Vec::new(),
        volumes: Vec::new(),
        ties: 0,
        cell_volume,
        discrete,
    };
    let results: Vec<(u32, bool)> = (0..total)
        .into_par_iter()
        .map(|k| nearest(config, &index, labels, &out.location(k), r0))
        .collect();
    let mut volumes = vec![0.0; config.len()];
    for &(o, _) in &results {
        volumes[o as usize] += cell_volume;
    }
    out.ties = results.iter().filter(|r| r.1).count();
    out.owners = results.into_iter().map(|r| r.0).collect();
    out.volumes = volumes;
    Ok(out)
}

/// Voronoi intervals of the points of one coset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Leaf {
    pub coset: usize,
    /// Point indices sorted by A-coordinate.
    pub points: Vec<u32>,
    pub positions: Vec<f64>,
    pub cells: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeafwiseCells {
    pub segment: (f64, f64),
    pub leaves: Vec<Leaf>,
    /// Cosets without points in the segment.
    pub empty: Vec<usize>,
}

/// Split the A-segment of every coset into the midpoint intervals of its
/// points. Only points whose A-coordinate lies in the segment take part.
pub fn leafwise_voronoi(cox: &CoxSample, segment: &Window) -> Result<LeafwiseCells> {
    let leaves = sorted_leaves(cox)?;
    if segment.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: segment.dim(),
        });
    }
    let (lo, hi) = (segment.lo()[0], segment.hi()[0]);
    let mut out = LeafwiseCells {
        segment: (lo, hi),
        leaves: Vec::new(),
        empty: Vec::new(),
    };
    for (c, l) in leaves.into_iter().enumerate() {
        let inside: Vec<(f64, u32)> = l.into_iter().filter(|(a, _)| *a >= lo && *a <= hi).collect();
        if inside.is_empty() {
            out.empty.push(c);
            continue;
        }
        let positions: Vec<f64> = inside.iter().map(|p| p.0).collect();
        let mut cells = Vec::with_capacity(positions.len());
        for k in 0..positions.len() {
            let left = if k == 0 { lo } else { 0.5 * (positions[k - 1] + positions[k]) };
            let right = if k + 1 == positions.len() {
                hi
            } else {
                0.5 * (positions[k] + positions[k + 1])
            };
            cells.push((left, right));
        }
        out.leaves.push(Leaf {
            coset: c,
            points: inside.iter().map(|p| p.1).collect(),
            positions,
            cells,
        });
    }
    Ok(out)
}

/// Cross pairs at distance `< R` between two distinct cosets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdjacencyPair {
    pub first: usize,
    pub second: usize,
    pub pairs: usize,
    /// Largest separation along A between the midpoints of two cross pairs
    /// (maximum over A-axes).
    pub spread: f64,
    /// `pairs ≥ min_pairs` and `spread ≥ min_spread`.
    pub flagged: bool,
}

/// For every pair of cosets with at least one cross pair at distance `< r`,
/// the number of such pairs and their spread along `A`.
pub fn high_adjacency_scan(cox: &CoxSample, r: f64, min_pairs: usize, min_spread: f64) -> Result<Vec<AdjacencyPair>> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(param("radius", "must be positive and finite"));
    }
    let config = cox.config();
    let model = config.model();
    let sub = cox.subgroup();
    let pts = config.points();
    let coset_of = cox.coset_of();
    let index = GridIndex::for_radius(&model, pts, r);
    // (first, second) -> (count, per-axis min, per-axis max)
    let mut acc: BTreeMap<(usize, usize), (usize, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let a_dim = sub.a_dim();
    for (i, p) in pts.iter().enumerate() {
        let ai = sub.a_coords(p);
        index.within(&model, pts, p.coords(), r, |j, _| {
            let j = j as usize;
            if j <= i || coset_of[i] == coset_of[j] {
                return;
            }
            let aj = sub.a_coords(&pts[j]);
            let key = (coset_of[i].min(coset_of[j]), coset_of[i].max(coset_of[j]));
            let e = acc
                .entry(key)
                .or_insert_with(|| (0, vec![f64::INFINITY; a_dim], vec![f64::NEG_INFINITY; a_dim]));
            e.0 += 1;
            for k in 0..a_dim {
                let m = 0.5 * (ai[k] + aj[k]);
                e.1[k] = e.1[k].min(m);
                e.2[k] = e.2[k].max(m);
            }
        });
    }
    Ok(acc
        .into_iter()
        .map(|((first, second), (pairs, lo, hi))| {
            let spread = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
            AdjacencyPair {
                first,
                second,
                pairs,
                spread,
                flagged: pairs >= min_pairs && spread >= min_spread,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{CosetId, GroupPoint, ModelGroup, Subgroup};
    use crate::process::{sample_cox_given_cosets, sample_cox_quotient};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e2_config(points: Vec<[f64; 2]>) -> Configuration {
        Configuration::new(
            ModelGroup::euclidean(2).unwrap(),
            points.into_iter().map(GroupPoint::from).collect(),
            Window::cube(2, 0.0, 1.0).unwrap(),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn single_point_owns_window() {
        let c = e2_config(vec![[0.3, 0.7]]);
        let v = voronoi_assign(&c, &[16, 16], &[0.5]).unwrap();
        assert!(v.owners.iter().all(|&o| o == 0));
        assert!((v.volumes[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bisector_split() {
        let c = e2_config(vec![[0.25, 0.5], [0.75, 0.5]]);
        let v = voronoi_assign(&c, &[20, 7], &[0.1, 0.2]).unwrap();
        for k in 0..v.len() {
            let x = v.location(k)[0];
            assert_eq!(v.owners[k], if x < 0.5 { 0 } else { 1 });
        }
        assert!((v.volumes[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn label_breaks_exact_ties() {
        let c = e2_config(vec![[0.25, 0.5], [0.75, 0.5]]);
        // Odd resolution puts a column of query points on the bisector x = 0.5.
        let v = voronoi_assign(&c, &[5, 5], &[0.9, 0.2]).unwrap();
        assert_eq!(v.ties, 5);
        for k in 0..v.len() {
            if v.location(k)[0] == 0.5 {
                assert_eq!(v.owners[k], 1);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let c = e2_config(vec![]);
        assert_eq!(voronoi_assign(&c, &[4, 4], &[]).unwrap_err(), Error::EmptyConfiguration);
        let c = e2_config(vec![[0.1, 0.1], [0.2, 0.2]]);
        assert!(voronoi_assign(&c, &[4, 4], &[0.3, 0.3]).is_err());
    }

    #[test]
    fn lattice_sites_are_query_points() {
        let z = ModelGroup::lattice(2).unwrap();
        let c = Configuration::new(
            z,
            vec![[0.0, 0.0].into(), [4.0, 0.0].into()],
            Window::new(vec![0.0, 0.0], vec![4.0, 1.0]).unwrap(),
            0.0,
        )
        .unwrap();
        let v = voronoi_assign(&c, &[], &[0.1, 0.2]).unwrap();
        assert_eq!(v.len(), 10);
        assert_eq!(v.volumes, vec![6.0, 4.0]);
    }

    #[test]
    fn leafwise_midpoints() {
        let sub = Subgroup::axes(ModelGroup::euclidean(2).unwrap(), &[0]).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let cox = sample_cox_given_cosets(
            &sub,
            &[CosetId::new([0.5]), CosetId::new([0.9])],
            &Window::cube(2, 0.0, 10.0).unwrap(),
            0.0,
            &mut r,
        )
        .unwrap();
        let seg = Window::cube(1, 0.0, 10.0).unwrap();
        let cells = leafwise_voronoi(&cox, &seg).unwrap();
        for leaf in &cells.leaves {
            let total: f64 = leaf.cells.iter().map(|(a, b)| b - a).sum();
            assert!((total - 10.0).abs() < 1e-9);
            for (p, (a, b)) in leaf.positions.iter().zip(&leaf.cells) {
                assert!(a <= p && p <= b);
            }
            for w in leaf.cells.windows(2) {
                assert_eq!(w[0].1, w[1].0);
            }
        }
    }

    #[test]
    fn leafwise_two_points_boundary_at_midpoint() {
        let sub = Subgroup::center(ModelGroup::heisenberg()).unwrap();
        // First seed giving exactly two points on the coset.
        let cox = (0..)
            .map(|seed| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                sample_cox_given_cosets(
                    &sub,
                    &[CosetId::new([0.0, 0.0])],
                    &Window::new(vec![-1.0, -1.0, 0.0], vec![1.0, 1.0, 2.0]).unwrap(),
                    0.0,
                    &mut r,
                )
                .unwrap()
            })
            .find(|c| c.config().len() == 2)
            .unwrap();
        let cells = leafwise_voronoi(&cox, &Window::cube(1, 0.0, 2.0).unwrap()).unwrap();
        let leaf = &cells.leaves[0];
        let mid = 0.5 * (leaf.positions[0] + leaf.positions[1]);
        assert_eq!(leaf.cells, vec![(0.0, mid), (mid, 2.0)]);
    }

    #[test]
    fn empty_cosets_reported() {
        let sub = Subgroup::center(ModelGroup::heisenberg()).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let cox = sample_cox_quotient(&sub, &Window::cube(3, 0.0, 3.0).unwrap(), 0.0, &mut r).unwrap();
        let cells = leafwise_voronoi(&cox, &Window::cube(1, 1.0, 1.0 + 1e-9).unwrap()).unwrap();
        assert_eq!(cells.leaves.len() + cells.empty.len(), cox.cosets().len());
    }

    #[test]
    fn distant_lines_have_no_pairs() {
        let sub = Subgroup::axes(ModelGroup::euclidean(2).unwrap(), &[0]).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let cox = sample_cox_given_cosets(
            &sub,
            &[CosetId::new([0.0]), CosetId::new([3.0])],
            &Window::new(vec![0.0, -1.0], vec![50.0, 4.0]).unwrap(),
            0.0,
            &mut r,
        )
        .unwrap();
        assert!(high_adjacency_scan(&cox, 2.0, 1, 0.0).unwrap().is_empty());
        let rep = high_adjacency_scan(&cox, 4.0, 1, 0.0).unwrap();
        assert_eq!(rep.len(), 1);
        assert_eq!((rep[0].first, rep[0].second), (0, 1));
        assert!(high_adjacency_scan(&cox, 0.0, 1, 0.0).is_err());
    }
}
