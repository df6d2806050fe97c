//! Uniform-grid spatial index over chart coordinates.
//!
//! Metric balls of every model fit inside a chart box given by
//! [`ModelGroup::reach`], so a fixed-radius query is a box query followed by
//! an exact distance filter.

use crate::group::{GroupPoint, ModelGroup};

pub struct GridIndex {
    lo: Vec<f64>,
    cell: Vec<f64>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    starts: Vec<u32>,
    items: Vec<u32>,
}

const MAX_CELLS_PER_POINT: f64 = 4.0;

impl GridIndex {
    /// Index `points` with cells of roughly the given chart side lengths.
    pub fn new(points: &[GroupPoint], cell: &[f64]) -> Self {
        let dim = cell.len();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in points {
            for (i, c) in p.coords().iter().enumerate() {
                lo[i] = lo[i].min(*c);
                hi[i] = hi[i].max(*c);
            }
        }
        if points.is_empty() {
            lo.iter_mut().for_each(|v| *v = 0.0);
            hi.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut cell: Vec<f64> = cell
            .iter()
            .map(|c| if c.is_finite() && *c > 0.0 { *c } else { 1.0 })
            .collect();
        let budget = (points.len().max(1) as f64) * MAX_CELLS_PER_POINT;
        let mut shape: Vec<usize>;
        loop {
            shape = lo
                .iter()
                .zip(&hi)
                .zip(&cell)
                .map(|((l, h), c)| ((h - l) / c).floor() as usize + 1)
                .collect();
            let total: f64 = shape.iter().map(|&s| s as f64).product();
            if total <= budget.max(1.0) {
                break;
            }
            let scale = (total / budget).powf(1.0 / dim as f64).max(1.01);
            cell.iter_mut().for_each(|c| *c *= scale);
        }
        let mut strides = vec![1usize; dim];
        for i in 1..dim {
            strides[i] = strides[i - 1] * shape[i - 1];
        }
        let n_cells: usize = shape.iter().product();
        let mut counts = vec![0u32; n_cells + 1];
        let cell_of: Vec<usize> = points
            .iter()
            .map(|p| {
                p.coords()
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let k = ((c - lo[i]) / cell[i]).floor() as usize;
                        k.min(shape[i] - 1) * strides[i]
                    })
                    .sum()
            })
            .collect();
        for &c in &cell_of {
            counts[c + 1] += 1;
        }
        for i in 0..n_cells {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; points.len()];
        for (idx, &c) in cell_of.iter().enumerate() {
            items[fill[c] as usize] = idx as u32;
            fill[c] += 1;
        }
        Self {
            lo,
            cell,
            shape,
            strides,
            starts: counts,
            items,
        }
    }

    /// Index sized for fixed-radius queries of radius `r`.
    pub fn for_radius(model: &ModelGroup, points: &[GroupPoint], r: f64) -> Self {
        let typical = typical_center(points, model.dim());
        let cell = model.reach(&typical, r);
        Self::new(points, &cell)
    }

    /// Call `f` for every indexed point whose cell meets the box `[lo, hi]`.
    pub fn for_each_in_box(&self, lo: &[f64], hi: &[f64], mut f: impl FnMut(u32)) {
        let dim = self.shape.len();
        let mut kmin = vec![0usize; dim];
        let mut kmax = vec![0usize; dim];
        for i in 0..dim {
            let a = ((lo[i] - self.lo[i]) / self.cell[i]).floor();
            let b = ((hi[i] - self.lo[i]) / self.cell[i]).floor();
            if b < 0.0 || a > (self.shape[i] - 1) as f64 {
                return;
            }
            kmin[i] = a.max(0.0) as usize;
            kmax[i] = (b as usize).min(self.shape[i] - 1);
        }
        let mut k = kmin.clone();
        loop {
            let c: usize = k.iter().zip(&self.strides).map(|(a, s)| a * s).sum();
            for &it in &self.items[self.starts[c] as usize..self.starts[c + 1] as usize] {
                f(it);
            }
            let mut axis = 0;
            loop {
                if axis == dim {
                    return;
                }
                if k[axis] < kmax[axis] {
                    k[axis] += 1;
                    break;
                }
                k[axis] = kmin[axis];
                axis += 1;
            }
        }
    }

    /// Every indexed point within open metric distance `r` of `center`.
    pub fn within(
        &self,
        model: &ModelGroup,
        points: &[GroupPoint],
        center: &[f64],
        r: f64,
        mut f: impl FnMut(u32, f64),
    ) {
        let reach = model.reach(center, r);
        let lo: Vec<f64> = center.iter().zip(&reach).map(|(c, h)| c - h).collect();
        let hi: Vec<f64> = center.iter().zip(&reach).map(|(c, h)| c + h).collect();
        self.for_each_in_box(&lo, &hi, |j| {
            let d = model.dist_coords(center, points[j as usize].coords());
            if d < r {
                f(j, d);
            }
        });
    }
}

/// A point midway between the origin and the far corner of the point cloud,
/// used to size cells for position-dependent reaches.
fn typical_center(points: &[GroupPoint], dim: usize) -> Vec<f64> {
    let mut m = vec![0.0f64; dim];
    for p in points {
        for (i, c) in p.coords().iter().enumerate() {
            m[i] = m[i].max(c.abs());
        }
    }
    m.iter().map(|v| 0.5 * v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Window;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixed_radius_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for model in [ModelGroup::euclidean(2).unwrap(), ModelGroup::heisenberg()] {
            let w = Window::cube(model.dim(), -4.0, 4.0).unwrap();
            let pts: Vec<GroupPoint> = (0..600)
                .map(|_| model.haar_sample(&w, &mut rng).unwrap())
                .collect();
            let r = 1.3;
            let idx = GridIndex::for_radius(&model, &pts, r);
            for q in pts.iter().take(50) {
                let mut got = Vec::new();
                idx.within(&model, &pts, q.coords(), r, |j, _| got.push(j));
                got.sort_unstable();
                let want: Vec<u32> = (0..pts.len() as u32)
                    .filter(|&j| model.dist(q, &pts[j as usize]) < r)
                    .collect();
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn empty_index_is_harmless() {
        let idx = GridIndex::new(&[], &[1.0, 1.0]);
        let mut hit = false;
        idx.for_each_in_box(&[-1.0, -1.0], &[1.0, 1.0], |_| hit = true);
        assert!(!hit);
    }
}
