use palmcox::graph::interior_points;
use palmcox::{
    connectivity, distance_graph, iid_marking, leafwise_line_graph, sample_cox_quotient, sample_poisson_group,
    star_union, Configuration, FolnerSet, GroupPoint, ModelGroup, StarSchedule, Subgroup, Window,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn models() -> Vec<ModelGroup> {
    vec![
        ModelGroup::euclidean(2).unwrap(),
        ModelGroup::euclidean(3).unwrap(),
        ModelGroup::lattice(2).unwrap(),
        ModelGroup::heisenberg(),
    ]
}

fn point(model: &ModelGroup, raw: &[f64]) -> GroupPoint {
    let c: Vec<f64> = raw[..model.dim()]
        .iter()
        .map(|v| if model.is_discrete() { v.round() } else { *v })
        .collect();
    GroupPoint::from(c)
}

fn close(a: &GroupPoint, b: &GroupPoint, tol: f64) -> bool {
    a.coords()
        .iter()
        .zip(b.coords())
        .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

fn triple() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0f64..20.0, 9)
}

proptest! {
    #[test]
    fn group_axioms(raw in triple(), m in 0usize..4) {
        let model = models()[m];
        let g = point(&model, &raw[0..3]);
        let h = point(&model, &raw[3..6]);
        let k = point(&model, &raw[6..9]);
        let e = model.identity();
        let gh_k = model.mul(&model.mul(&g, &h).unwrap(), &k).unwrap();
        let g_hk = model.mul(&g, &model.mul(&h, &k).unwrap()).unwrap();
        prop_assert!(close(&gh_k, &g_hk, 1e-12));
        prop_assert!(close(&model.mul(&g, &e).unwrap(), &g, 0.0));
        prop_assert!(close(&model.mul(&e, &g).unwrap(), &g, 0.0));
        prop_assert!(close(&model.mul(&g, &model.inv(&g)).unwrap(), &e, 1e-12));
        prop_assert!(close(&model.mul(&model.inv(&g), &g).unwrap(), &e, 1e-12));
    }

    #[test]
    fn metric_left_invariant_and_triangle(raw in triple(), m in 0usize..4) {
        let model = models()[m];
        let g = point(&model, &raw[0..3]);
        let h = point(&model, &raw[3..6]);
        let k = point(&model, &raw[6..9]);
        let d = model.dist(&h, &k);
        let d_shift = model.dist(&model.mul(&g, &h).unwrap(), &model.mul(&g, &k).unwrap());
        prop_assert!((d - d_shift).abs() <= 1e-9 * (1.0 + d));
        prop_assert!(model.dist(&h, &k) <= model.dist(&h, &g) + model.dist(&g, &k) + 1e-9);
        prop_assert!((model.dist(&h, &k) - model.dist(&k, &h)).abs() <= 1e-9 * (1.0 + d));
        prop_assert_eq!(model.dist(&h, &h), 0.0);
    }

    #[test]
    fn translate_bounds_contains_images(raw in triple(), frac in prop::collection::vec(0.0f64..1.0, 3)) {
        let model = ModelGroup::heisenberg();
        let g = point(&model, &raw[0..3]);
        let w = Window::new(vec![-1.0, 0.0, 2.0], vec![1.5, 2.0, 3.0]).unwrap();
        let x: Vec<f64> = (0..3).map(|i| w.lo()[i] + frac[i] * (w.hi()[i] - w.lo()[i])).collect();
        let img = model.mul(&g, &GroupPoint::from(x)).unwrap();
        let b = model.translate_bounds(&g, &w).expand(&[1e-9; 3]);
        prop_assert!(b.contains(img.coords()));
    }

    #[test]
    fn folner_defect_shrinks(n in 1.0f64..50.0, k in 0.1f64..3.0) {
        let sub = Subgroup::center(ModelGroup::heisenberg()).unwrap();
        let kw = Window::cube(1, -k, k).unwrap();
        let a = FolnerSet::symmetric(&sub, n).unwrap().defect(&kw).unwrap();
        let b = FolnerSet::symmetric(&sub, 2.0 * n).unwrap().defect(&kw).unwrap();
        prop_assert!(b < a);
        prop_assert!((a - k / n).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn distance_graph_equivariant(seed in any::<u64>(), raw in triple(), m in 0usize..4) {
        let model = models()[m];
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let w = Window::cube(model.dim(), -2.0, 2.0).unwrap();
        let c = sample_poisson_group(model, &w, 0.0, 2.0, &mut r).unwrap();
        let g = point(&model, &raw[0..3]);
        let moved = c.translated_points(&g);
        let region = Window::cube(model.dim(), -1e6, 1e6).unwrap();
        let shifted = Configuration::new(model, moved, region, 0.0).unwrap();
        let a = distance_graph(&c, 1.1).unwrap();
        let b = distance_graph(&shifted, 1.1).unwrap();
        // Pairs at distance within rounding of the threshold may flip.
        let pts = c.points();
        let stable = |e: &palmcox::Edge| (model.dist(&pts[e.source as usize], &pts[e.target as usize]) - 1.1).abs() > 1e-9;
        let ea: Vec<_> = a.sorted_edges().into_iter().filter(|e| stable(e)).map(|e| (e.source, e.target)).collect();
        let eb: Vec<_> = b.sorted_edges().into_iter().filter(|e| stable(e)).map(|e| (e.source, e.target)).collect();
        prop_assert_eq!(ea, eb);
    }

    #[test]
    fn adding_stars_never_splits_components(seed in any::<u64>()) {
        let sub = Subgroup::center(ModelGroup::heisenberg()).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let cox = sample_cox_quotient(&sub, &Window::centered(3, 4.0).unwrap(), 1.0, &mut r).unwrap();
        let marked = iid_marking(cox.config(), &mut r);
        let lines = leafwise_line_graph(&cox).unwrap();
        let sched = StarSchedule::geometric(&sub.model(), 2.0, 3).unwrap();
        let both = lines.union(&star_union(&marked, &sched));
        let l1 = connectivity(&lines, cox.config()).labels;
        let l2 = connectivity(&both, cox.config()).labels;
        for i in 0..l1.len() {
            for j in 0..l1.len() {
                if l1[i] == l1[j] {
                    prop_assert_eq!(l2[i], l2[j]);
                }
            }
        }
        prop_assert!(connectivity(&both, cox.config()).components <= connectivity(&lines, cox.config()).components);
    }

    #[test]
    fn line_degrees_bounded(seed in any::<u64>()) {
        let sub = Subgroup::axes(ModelGroup::euclidean(2).unwrap(), &[1]).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let cox = sample_cox_quotient(&sub, &Window::centered(2, 6.0).unwrap(), 0.0, &mut r).unwrap();
        let g = leafwise_line_graph(&cox).unwrap();
        prop_assert!(g.degrees().iter().all(|d| *d <= 2));
        prop_assert!(interior_points(cox.config(), 0.0).len() <= cox.config().len());
    }
}
