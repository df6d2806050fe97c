//! One runner per subcommand.

use palmcox::diagnostics::MIN_GOF_REPLICATES;
use palmcox::format::{write_configuration, write_raster, write_volumes};
use palmcox::{
    campbell_check, coordinate_labels, cost_upper_bound_experiment, count_gof_test, default_panel,
    estimate_intensity, high_adjacency_scan, leafwise_line_graph, palm_cox, palm_poisson, palm_reroot_estimate,
    replicate, reroot_agreement_test, sample_cox_folner, sample_cox_quotient, sample_poisson_group,
    two_sample_fidi_test, voronoi_assign, weak_convergence_report, Configuration, ConvergenceOptions,
    CostOptions, CoxSample, Estimate, FidiSample, FolnerSet, GroupPoint, ModelGroup, StreamKey, TestFunction,
    Window,
};
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{ProcessKind, Resolved};
use crate::output::{Artifacts, Check, Outcome};
use crate::{svg, CliError, Command};

pub fn run(cmd: Command, r: &Resolved) -> Result<Outcome, CliError> {
    match cmd {
        Command::Sample => sample(r),
        Command::Intensity => intensity(r),
        Command::Campbell => campbell(r),
        Command::PalmCheck => palm_check(r),
        Command::CoxConverge => cox_converge(r),
        Command::Voronoi => voronoi(r),
        Command::Adjacency => adjacency(r),
        Command::Cost => cost(r),
    }
}

fn key(r: &Resolved, cmd: Command) -> StreamKey {
    StreamKey::new(r.config.seed).named(cmd.name())
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

struct Drawn {
    config: Configuration,
    cosets: Option<Vec<usize>>,
    root: Option<usize>,
}

impl Drawn {
    fn from_cox(c: CoxSample, root: Option<usize>) -> Self {
        Self {
            cosets: Some(c.coset_of().to_vec()),
            config: c.config().clone(),
            root,
        }
    }
}

/// Checks the configured process can be drawn on the configured window.
fn check_process(r: &Resolved) -> Result<(), CliError> {
    let c = &r.config;
    match c.process {
        ProcessKind::CoxFolner => {
            let f = FolnerSet::symmetric(&r.sub, c.folner.sample_n)?;
            if c.buffer < f.metric_diameter() {
                return Err(invalid(format!(
                    "process = \"cox_folner\" needs buffer >= {} (the diameter of F_{})",
                    f.metric_diameter(),
                    c.folner.sample_n
                )));
            }
        }
        ProcessKind::PalmPoisson if !r.window.contains(r.model.identity().coords()) => {
            return Err(invalid("process = \"palm_poisson\" needs a window containing the identity"));
        }
        ProcessKind::PalmCox if !r.model.dilate(&r.window, c.buffer).contains(r.model.identity().coords()) => {
            return Err(invalid("process = \"palm_cox\" needs a sampled region containing the identity"));
        }
        _ => {}
    }
    Ok(())
}

fn draw<R: Rng + ?Sized>(r: &Resolved, rng: &mut R) -> palmcox::Result<Drawn> {
    let c = &r.config;
    Ok(match c.process {
        ProcessKind::Poisson => Drawn {
            config: sample_poisson_group(r.model, &r.window, c.buffer, c.intensity, rng)?,
            cosets: None,
            root: None,
        },
        ProcessKind::Cox => Drawn::from_cox(sample_cox_quotient(&r.sub, &r.window, c.buffer, rng)?, None),
        ProcessKind::CoxFolner => {
            let f = FolnerSet::symmetric(&r.sub, c.folner.sample_n)?;
            Drawn::from_cox(sample_cox_folner(&r.sub, &f, &r.window, c.buffer, rng)?, None)
        }
        ProcessKind::PalmPoisson => {
            let p = palm_poisson(r.model, &r.window, c.intensity, rng)?;
            Drawn {
                config: p.config().clone(),
                cosets: None,
                root: Some(p.root()),
            }
        }
        ProcessKind::PalmCox => {
            let p = palm_cox(&r.sub, &r.window, c.buffer, rng)?;
            let root = p.root();
            Drawn::from_cox(p.cox().expect("cox construction").clone(), Some(root))
        }
    })
}

fn draw_many(r: &Resolved, key: StreamKey, n: usize) -> Result<Vec<Configuration>, CliError> {
    replicate(key, n, |_, rng| draw(r, rng).map(|d| d.config))
        .into_iter()
        .collect::<palmcox::Result<Vec<_>>>()
        .map_err(Into::into)
}

/// Intensity of the configured stationary process.
fn stationary_intensity(r: &Resolved, cmd: Command) -> Result<f64, CliError> {
    match r.config.process {
        ProcessKind::Poisson => Ok(r.config.intensity),
        ProcessKind::Cox | ProcessKind::CoxFolner => Ok(1.0),
        ProcessKind::PalmPoisson | ProcessKind::PalmCox => Err(invalid(format!(
            "`{cmd}` needs a stationary process (poisson, cox or cox_folner)"
        ))),
    }
}

fn sample(r: &Resolved) -> Result<Outcome, CliError> {
    check_process(r)?;
    let mut rng = key(r, Command::Sample).rng();
    let d = draw(r, &mut rng)?;
    let mut art = Artifacts::create(Command::Sample, &r.config)?;
    art.text_trailing(
        "sample.txt",
        write_configuration(&d.config, None, d.cosets.as_deref()),
    )?;
    if r.config.svg {
        let pts: Vec<Vec<f64>> = d.config.points().iter().map(|p| p.coords().to_vec()).collect();
        if let Some(doc) = svg::scatter(&d.config.observed_region(), &pts, d.cosets.as_deref(), &[]) {
            art.svg("sample.svg", doc)?;
        }
    }
    let results = json!({
        "points": d.config.len(),
        "points_in_window": d.config.count_in(&r.window),
        "root": d.root,
    });
    art.finish(vec![], vec![], results)
}

/// The two halves of `w` split across axis 0, avoiding lattice sites on the cut.
fn halves(model: &ModelGroup, w: &Window) -> Option<(Window, Window)> {
    let (lo, hi) = (w.lo()[0], w.hi()[0]);
    let mut mid = 0.5 * (lo + hi);
    if model.is_discrete() {
        mid = mid.floor() + 0.5;
    }
    let mut a_hi = w.hi().to_vec();
    a_hi[0] = mid;
    let mut b_lo = w.lo().to_vec();
    b_lo[0] = mid;
    let a = Window::new(w.lo().to_vec(), a_hi).ok()?;
    let b = Window::new(b_lo, w.hi().to_vec()).ok()?;
    (model.volume(&a) > 0.0 && model.volume(&b) > 0.0).then_some((a, b))
}

fn intensity(r: &Resolved) -> Result<Outcome, CliError> {
    check_process(r)?;
    let target = stationary_intensity(r, Command::Intensity)?;
    let th = &r.config.thresholds;
    let n = r.replicates();
    let samples = draw_many(r, key(r, Command::Intensity), n)?;
    let est = estimate_intensity(&samples, &r.window)?;
    let (lo, hi) = est.ci95();
    let z = est.z_score(target);
    let mut checks = vec![Check::z_score("intensity", z, th.sigmas)];
    let header = "metric,estimate,std_err,ci_low,ci_high,target,statistic,passed";
    let mut rows = vec![format!(
        "intensity,{},{},{lo},{hi},{target},{z},{}",
        est.value, est.std_err, checks[0].passed
    )];
    let mut notes = Vec::new();
    if r.config.process == ProcessKind::Poisson {
        let mu = target * r.model.volume(&r.window);
        if n >= MIN_GOF_REPLICATES {
            let fidi = FidiSample::from_configs(&samples, std::slice::from_ref(&r.window))?;
            let p = count_gof_test(&fidi, &[mu])?[0];
            let mean = fidi.column(0).sum::<u64>() as f64 / n as f64;
            let c = Check::p_value("count_law", p, th.p_value);
            rows.push(format!("count_law,{mean},,,,{mu},{p},{}", c.passed));
            checks.push(c);
        } else {
            notes.push(format!("count_law skipped: needs at least {MIN_GOF_REPLICATES} replicates"));
        }
        if let Some((a, b)) = halves(&r.model, &r.window) {
            let ca: Vec<f64> = samples.iter().map(|s| s.count_in(&a) as f64).collect();
            let cb: Vec<f64> = samples.iter().map(|s| s.count_in(&b) as f64).collect();
            let ma = ca.iter().sum::<f64>() / n as f64;
            let mb = cb.iter().sum::<f64>() / n as f64;
            let prod: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| (x - ma) * (y - mb)).collect();
            let cov = Estimate::from_values(&prod).expect("nonempty");
            let z = cov.z_score(0.0);
            let (lo, hi) = cov.ci95();
            let c = Check::z_score("half_covariance", z, th.sigmas);
            rows.push(format!(
                "half_covariance,{},{},{lo},{hi},0,{z},{}",
                cov.value, cov.std_err, c.passed
            ));
            checks.push(c);
        } else {
            notes.push("half_covariance skipped: window cannot be split".into());
        }
    }
    let mut art = Artifacts::create(Command::Intensity, &r.config)?;
    art.csv("intensity.csv", header, &rows)?;
    let results = json!({
        "target": target,
        "estimate": est,
        "window_volume": r.model.volume(&r.window),
        "notes": notes,
    });
    art.finish(checks, vec![], results)
}

/// Middle half of the window, snapped inwards to lattice sites on `ℤᵈ`.
fn campbell_support(r: &Resolved) -> Result<Window, CliError> {
    let w = &r.window;
    let quarter: Vec<f64> = w.lengths().map(|l| l / 4.0).collect();
    let mut lo: Vec<f64> = w.lo().iter().zip(&quarter).map(|(a, q)| a + q).collect();
    let mut hi: Vec<f64> = w.hi().iter().zip(&quarter).map(|(b, q)| b - q).collect();
    if r.model.is_discrete() {
        lo.iter_mut().for_each(|v| *v = v.ceil());
        hi.iter_mut().for_each(|v| *v = v.floor());
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Ok(w.clone());
        }
    }
    Ok(Window::new(lo, hi)?)
}

/// Indicator, product sine bump and metric decay around the support centre.
pub fn campbell_functions(model: ModelGroup, support: &Window) -> Vec<TestFunction> {
    let lo = support.lo().to_vec();
    let len: Vec<f64> = support.lengths().collect();
    let mut c = support.center();
    if model.is_discrete() {
        c.iter_mut().for_each(|v| *v = v.round());
    }
    let centre = GroupPoint::from(c);
    vec![
        TestFunction::indicator(support.clone()),
        TestFunction::new("sine_bump", support.clone(), move |x| {
            x.iter()
                .zip(&lo)
                .zip(&len)
                .map(|((x, l), n)| if *n > 0.0 { (std::f64::consts::PI * (x - l) / n).sin().powi(2) } else { 1.0 })
                .product()
        }),
        TestFunction::new("metric_decay", support.clone(), move |x| {
            (-model.dist(&centre, &GroupPoint::from(x.to_vec()))).exp()
        }),
    ]
}

fn campbell(r: &Resolved) -> Result<Outcome, CliError> {
    check_process(r)?;
    let target = stationary_intensity(r, Command::Campbell)?;
    let support = campbell_support(r)?;
    let samples = draw_many(r, key(r, Command::Campbell), r.replicates())?;
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for f in campbell_functions(r.model, &support) {
        let rep = campbell_check(&samples, &f, target, r.config.quadrature)?;
        let c = Check::z_score(rep.function.clone(), rep.z, r.config.thresholds.sigmas);
        rows.push(format!(
            "{},{},{},{},{},{}",
            rep.function, rep.lhs, rep.lhs_std_err, rep.rhs, rep.z, c.passed
        ));
        checks.push(c);
        reports.push(rep);
    }
    let mut art = Artifacts::create(Command::Campbell, &r.config)?;
    art.csv("campbell.csv", "function,lhs,lhs_std_err,rhs,z,passed", &rows)?;
    let results = json!({ "intensity": target, "support": support, "reports": reports });
    art.finish(checks, vec![], results)
}

/// Boxes around the identity for Palm comparisons: the cube `[-a, a]ᵈ`, the
/// two orthants `[0, a]ᵈ` and `[-a, 0]ᵈ`, and the half-slab with last axis
/// in `[0, a]`.
fn palm_panel(r: &Resolved) -> Result<Vec<Window>, CliError> {
    let w = &r.window;
    let mut a = 0.5
        * w.lo()
            .iter()
            .zip(w.hi())
            .map(|(l, h)| (-l).min(*h))
            .fold(f64::INFINITY, f64::min);
    if r.model.is_discrete() {
        a = a.floor();
    }
    if !(a > 0.0) {
        return Err(invalid(
            "palm-check needs the identity well inside the window (for example `[window] side = 2.0`)",
        ));
    }
    let d = r.model.dim();
    let mut slab_lo = vec![-a; d];
    slab_lo[d - 1] = 0.0;
    Ok(vec![
        Window::cube(d, -a, a)?,
        Window::cube(d, 0.0, a)?,
        Window::cube(d, -a, 0.0)?,
        Window::new(slab_lo, vec![a; d])?,
    ])
}

/// Largest metric norm over the corners of the boxes.
fn panel_reach(model: &ModelGroup, boxes: &[Window]) -> f64 {
    let mut best: f64 = 0.0;
    for b in boxes {
        let d = b.dim();
        for mask in 0..(1usize << d) {
            let corner: Vec<f64> = (0..d)
                .map(|i| if mask >> i & 1 == 1 { b.hi()[i] } else { b.lo()[i] })
                .collect();
            best = best.max(model.norm(&corner));
        }
    }
    best
}

fn palm_check(r: &Resolved) -> Result<Outcome, CliError> {
    let poisson = match r.config.process {
        ProcessKind::Poisson | ProcessKind::PalmPoisson => true,
        ProcessKind::Cox | ProcessKind::PalmCox => false,
        ProcessKind::CoxFolner => {
            return Err(invalid("palm-check compares poisson or cox constructions, not cox_folner"))
        }
    };
    let panel = match &r.panel {
        Some(p) => p.clone(),
        None => palm_panel(r)?,
    };
    if !r.window.contains(r.model.identity().coords()) {
        return Err(invalid("palm-check needs a window containing the identity"));
    }
    if let Some(b) = panel.iter().find(|b| !r.window.contains_window(b)) {
        return Err(invalid(format!("panel box {b:?} leaves the window")));
    }
    let (model, sub, window, t) = (r.model, &r.sub, &r.window, r.config.intensity);
    let th = &r.config.thresholds;
    let n = r.replicates();
    let k = key(r, Command::PalmCheck);

    let stationary = |buffer: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        if poisson {
            sample_poisson_group(model, window, buffer, t, rng)
        } else {
            sample_cox_quotient(sub, window, buffer, rng).map(|c| c.config().clone())
        }
    };
    let palm: Vec<_> = replicate(k.named("construction"), n, |_, rng| {
        if poisson {
            palm_poisson(model, window, t, rng)
        } else {
            palm_cox(sub, window, 0.0, rng)
        }
    })
    .into_iter()
    .collect::<palmcox::Result<_>>()?;
    let plain: Vec<Configuration> = replicate(k.named("stationary"), n, |_, rng| stationary(0.0, rng))
        .into_iter()
        .collect::<palmcox::Result<_>>()?;
    let reach = panel_reach(&model, &panel);
    let wide: Vec<Configuration> = replicate(k.named("reroot"), n, |_, rng| stationary(reach, rng))
        .into_iter()
        .collect::<palmcox::Result<_>>()?;

    let stripped: Vec<Configuration> = palm.iter().map(|p| p.stationary_part()).collect();
    let rooted: Vec<Configuration> = palm.iter().map(|p| p.config().clone()).collect();
    let p_two = two_sample_fidi_test(
        &FidiSample::from_configs(&stripped, &panel)?,
        &FidiSample::from_configs(&plain, &panel)?,
    )?;
    let rerooted = palm_reroot_estimate(&wide, &panel, 0.0)?;
    let per_box = reroot_agreement_test(&rerooted, &FidiSample::from_configs(&rooted, &panel)?)?;
    let p_reroot = (per_box.iter().copied().fold(1.0, f64::min) * per_box.len() as f64).min(1.0);

    let name = if poisson { "slivnyak" } else { "cox_palm" };
    let checks = vec![
        Check::p_value(name, p_two, th.p_value),
        Check::p_value("reroot", p_reroot, th.p_value),
    ];
    let mut rows = vec![format!("{name},joint,{p_two},{},{}", th.p_value, checks[0].passed)];
    for (i, p) in per_box.iter().enumerate() {
        rows.push(format!("reroot,{i},{p},,"));
    }
    rows.push(format!("reroot,bonferroni,{p_reroot},{},{}", th.p_value, checks[1].passed));
    let mut art = Artifacts::create(Command::PalmCheck, &r.config)?;
    art.csv("palm_check.csv", "check,box,p_value,threshold,passed", &rows)?;
    let results = json!({
        "construction": if poisson { "poisson_with_root" } else { "cox_with_root_line" },
        "panel": panel,
        "reroot_buffer": reach,
        "rerooted_rows": rerooted.fidi.len(),
    });
    art.finish(checks, vec![], results)
}

fn cox_converge(r: &Resolved) -> Result<Outcome, CliError> {
    let boxes = r.panel.clone().unwrap_or_else(|| default_panel(&r.sub));
    let opts = ConvergenceOptions {
        replicates: r.replicates(),
        n_boot: r.config.n_boot,
        sigmas: r.config.thresholds.sigmas,
    };
    let rep = weak_convergence_report(&r.sub, &r.config.folner.n, &boxes, &opts, key(r, Command::CoxConverge))?;
    let rows: Vec<String> = rep
        .rows
        .iter()
        .map(|w| {
            format!(
                "{},{},{},{},{},{},{},{},{},{}",
                w.n,
                w.p_n,
                w.p_n_mc.value,
                w.p_n_mc.std_err,
                w.p,
                w.eps_n,
                w.tv.value,
                w.tv.ci_low,
                w.tv.ci_high,
                w.coupling_bound
            )
        })
        .collect();
    let mut art = Artifacts::create(Command::CoxConverge, &r.config)?;
    art.csv(
        "convergence.csv",
        "n,p_n,p_n_mc,p_n_mc_std_err,p,eps_n,tv,tv_ci_low,tv_ci_high,coupling_bound",
        &rows,
    )?;
    let results = json!({ "boxes": rep.boxes, "replicates": rep.replicates });
    art.finish(vec![], rep.violations, results)
}

fn voronoi(r: &Resolved) -> Result<Outcome, CliError> {
    check_process(r)?;
    let mut rng = key(r, Command::Voronoi).rng();
    let d = draw(r, &mut rng)?;
    let labels = coordinate_labels(&d.config);
    let v = voronoi_assign(&d.config, &r.config.voronoi.resolution, &labels)?;
    let total: f64 = v.volumes.iter().sum();
    let vol = r.model.volume(&r.window);
    let rel = (total - vol).abs() / vol;

    let model = r.model;
    let pts = d.config.points();
    let bad = (0..v.len())
        .into_par_iter()
        .filter(|&k| {
            let q = GroupPoint::from(v.location(k));
            let o = v.owners[k] as usize;
            let d_o = model.dist(&q, &pts[o]);
            let tol = 1e-12 * (1.0 + d_o);
            pts.iter().enumerate().any(|(j, p)| {
                let d_j = model.dist(&q, p);
                d_j < d_o - tol || (d_j == d_o && labels[j] < labels[o])
            })
        })
        .count();

    let checks = vec![
        Check::at_most("volume_sum_rel_err", rel, r.config.thresholds.volume_rel_tol),
        Check::at_most("nearest_owner_violations", bad as f64, 0.0),
    ];
    let mut art = Artifacts::create(Command::Voronoi, &r.config)?;
    art.text_leading("voronoi_raster.txt", write_raster(&v))?;
    art.text_leading("voronoi_volumes.csv", write_volumes(&v))?;
    art.text_trailing("voronoi_points.txt", write_configuration(&d.config, Some(&labels), None))?;
    if r.config.svg {
        if let Some(doc) = svg::raster(&v.shape, &v.owners) {
            art.svg("voronoi.svg", doc)?;
        }
    }
    let results = json!({
        "points": d.config.len(),
        "cells": v.len(),
        "cell_volume": v.cell_volume(),
        "volume_sum": total,
        "window_volume": vol,
        "ties": v.ties,
        "tie_rate": v.tie_rate(),
    });
    art.finish(checks, vec![], results)
}

fn adjacency(r: &Resolved) -> Result<Outcome, CliError> {
    let a = &r.config.adjacency;
    let mut rng = key(r, Command::Adjacency).rng();
    let cox = sample_cox_quotient(&r.sub, &r.window, r.config.buffer, &mut rng)?;
    let pairs = high_adjacency_scan(&cox, a.radius, a.min_pairs, a.min_spread)?;
    let coset = |i: usize| {
        cox.cosets()[i]
            .coords()
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let rows: Vec<String> = pairs
        .iter()
        .map(|p| {
            format!(
                "{},{},{},{},{},{},{}",
                p.first,
                p.second,
                coset(p.first),
                coset(p.second),
                p.pairs,
                p.spread,
                p.flagged
            )
        })
        .collect();
    let mut art = Artifacts::create(Command::Adjacency, &r.config)?;
    art.csv(
        "adjacency.csv",
        "first,second,first_coset,second_coset,pairs,spread,flagged",
        &rows,
    )?;
    art.text_trailing(
        "adjacency_sample.txt",
        write_configuration(cox.config(), None, Some(cox.coset_of())),
    )?;
    if r.config.svg {
        let pts: Vec<Vec<f64>> = cox.config().points().iter().map(|p| p.coords().to_vec()).collect();
        let edges: Vec<(u32, u32)> = leafwise_line_graph(&cox)
            .map(|g| {
                g.sorted_edges()
                    .into_iter()
                    .filter(|e| e.source < e.target)
                    .map(|e| (e.source, e.target))
                    .collect()
            })
            .unwrap_or_default();
        if let Some(doc) = svg::scatter(&cox.config().observed_region(), &pts, Some(cox.coset_of()), &edges) {
            art.svg("adjacency.svg", doc)?;
        }
    }
    let results = json!({
        "cosets": cox.cosets().len(),
        "points": cox.config().len(),
        "pairs_reported": pairs.len(),
        "pairs_flagged": pairs.iter().filter(|p| p.flagged).count(),
    });
    art.finish(vec![], vec![], results)
}

fn cost(r: &Resolved) -> Result<Outcome, CliError> {
    let s = &r.config.star;
    let sigmas = r.config.thresholds.sigmas;
    let opts = CostOptions {
        epsilon: s.epsilon,
        sides: s.sides.clone(),
        replicates: r.replicates(),
        n_max: s.n_max,
        lift: s.lift.map(|l| (l.p, l.radius)),
        sigmas,
    };
    let rep = cost_upper_bound_experiment(&r.sub, &opts, key(r, Command::Cost))?;
    let bound = 2.0 + s.epsilon;
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for row in &rep.rows {
        let (lo, hi) = row.avg_degree.ci95();
        let c = Check::at_most(
            format!("avg_degree_side_{}", row.side),
            row.avg_degree.value,
            bound + sigmas * row.avg_degree.std_err,
        );
        rows.push(format!(
            "{},{},{bound},{},{},{lo},{hi},{},{},{},{},{}",
            row.side,
            row.epsilon,
            row.avg_degree.value,
            row.avg_degree.std_err,
            row.giant_fraction.value,
            row.giant_fraction.std_err,
            row.window_giant_fraction.value,
            row.points,
            c.passed
        ));
        checks.push(c);
    }
    let mut art = Artifacts::create(Command::Cost, &r.config)?;
    art.csv(
        "cost.csv",
        "side,epsilon,bound,avg_degree,avg_degree_std_err,ci_low,ci_high,giant_fraction,giant_fraction_std_err,window_giant_fraction,points,passed",
        &rows,
    )?;
    let results = json!({ "schedule": rep.schedule, "margin": rep.margin, "replicates": opts.replicates });
    art.finish(checks, rep.violations, results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ExperimentConfig, Overrides};

    fn resolved(text: &str, dir: &std::path::Path) -> Resolved {
        let mut cfg = ExperimentConfig::from_toml(text).unwrap();
        cfg.output = dir.to_path_buf();
        cfg.resolve(&Overrides::default(), 200).unwrap()
    }

    #[test]
    fn halves_avoid_lattice_sites() {
        let z = ModelGroup::lattice(2).unwrap();
        let (a, b) = halves(&z, &Window::cube(2, 0.0, 3.0).unwrap()).unwrap();
        assert_eq!(z.volume(&a) + z.volume(&b), 16.0);
        assert!(halves(&z, &Window::new(vec![0.0, 0.0], vec![0.0, 3.0]).unwrap()).is_none());
    }

    #[test]
    fn palm_panel_needs_interior_identity() {
        let dir = tempfile::tempdir().unwrap();
        let r = resolved("model = \"euclidean2\"\n[window]\nside = 2.0\n", dir.path());
        let p = palm_panel(&r).unwrap();
        assert_eq!(p[0], Window::cube(2, -0.5, 0.5).unwrap());
        assert_eq!(p[3], Window::new(vec![-0.5, 0.0], vec![0.5, 0.5]).unwrap());
        let r = resolved("model = \"euclidean2\"\n", dir.path());
        assert!(matches!(palm_panel(&r), Err(CliError::Config(_))));
    }

    #[test]
    fn panel_reach_is_max_corner_norm() {
        let e = ModelGroup::euclidean(2).unwrap();
        let boxes = vec![Window::new(vec![-1.0, 0.0], vec![3.0, 4.0]).unwrap()];
        assert_eq!(panel_reach(&e, &boxes), 5.0);
    }

    #[test]
    fn cox_folner_buffer_checked_before_sampling() {
        let dir = tempfile::tempdir().unwrap();
        let r = resolved("process = \"cox_folner\"\nbuffer = 1.0\n", dir.path());
        assert!(matches!(run(Command::Sample, &r), Err(CliError::Config(_))));
        assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
    }

    #[test]
    fn palm_processes_rejected_for_intensity() {
        let dir = tempfile::tempdir().unwrap();
        let r = resolved("process = \"palm_poisson\"\n[window]\nside = 2.0\n", dir.path());
        assert!(matches!(run(Command::Intensity, &r), Err(CliError::Config(_))));
    }

    #[test]
    fn campbell_functions_vanish_on_support_edges() {
        let h = ModelGroup::heisenberg();
        let s = Window::cube(3, 0.0, 1.0).unwrap();
        let f = campbell_functions(h, &s);
        assert_eq!(f.len(), 3);
        assert!(f[1].eval(&[0.0, 0.5, 0.5]).abs() < 1e-15);
        assert!((f[1].eval(&[0.5, 0.5, 0.5]) - 1.0).abs() < 1e-15);
        assert!((f[2].eval(&[0.5, 0.5, 0.5]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn small_runs_write_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = resolved(
            "model = \"euclidean2\"\nsvg = true\n[window]\nside = 2.0\n[voronoi]\nresolution = [32, 32]\n",
            dir.path(),
        );
        for (cmd, file) in [
            (Command::Sample, "sample.txt"),
            (Command::Voronoi, "voronoi_raster.txt"),
            (Command::Adjacency, "adjacency.csv"),
            (Command::Campbell, "campbell.csv"),
        ] {
            let out = run(cmd, &r).unwrap();
            assert!(dir.path().join(file).exists(), "{cmd}");
            assert!(dir.path().join("summary.json").exists());
            assert_eq!(out.dir, dir.path());
        }
        assert!(dir.path().join("voronoi.svg").exists());
        let text = std::fs::read_to_string(dir.path().join("sample.txt")).unwrap();
        let back = palmcox::format::read_configuration(&text).unwrap();
        assert_eq!(back.config.model(), ModelGroup::euclidean(2).unwrap());
    }
}
