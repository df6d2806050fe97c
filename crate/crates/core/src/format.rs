//! Plain-text exports.
//!
//! Configuration files are whitespace-separated columns with `#` header
//! lines:
//!
//! ```text
//! # palmcox configuration v1
//! # model heisenberg
//! # window -1 -1 -1 1 1 1
//! # buffer 0.5
//! # columns x0 x1 x2 mark coset
//! 0.25 -0.5 0.125 0.731 3
//! ```
//!
//! The window line lists all lower corners then all upper corners. `mark`
//! and `coset` hold `-` when absent. Further `#` lines after the header are
//! comments. Floats are written in shortest
//! round-trip form, so a file parses back to the identical configuration.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::VoronoiAssignment;
use crate::graph::FactorGraph;
use crate::group::{GroupPoint, ModelGroup, ModelKind, Window};
use crate::process::Configuration;

const MAGIC: &str = "# palmcox configuration v1";

pub fn model_name(model: &ModelGroup) -> String {
    match model.kind() {
        ModelKind::Euclidean(d) => format!("euclidean{d}"),
        ModelKind::IntegerLattice(d) => format!("lattice{d}"),
        ModelKind::Heisenberg => "heisenberg".into(),
    }
}

pub fn parse_model(s: &str) -> Result<ModelGroup> {
    if s == "heisenberg" {
        return Ok(ModelGroup::heisenberg());
    }
    let bad = || Error::Unsupported(format!("unknown model `{s}`"));
    if let Some(d) = s.strip_prefix("euclidean") {
        return ModelGroup::euclidean(d.parse().map_err(|_| bad())?);
    }
    if let Some(d) = s.strip_prefix("lattice") {
        return ModelGroup::lattice(d.parse().map_err(|_| bad())?);
    }
    Err(bad())
}

/// One configuration with optional marks and per-point coset indices.
pub fn write_configuration(config: &Configuration, marks: Option<&[f64]>, cosets: Option<&[usize]>) -> String {
    let model = config.model();
    let d = model.dim();
    let w = config.window();
    let mut s = String::new();
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "# model {}", model_name(&model)).unwrap();
    let corners: Vec<String> = w.lo().iter().chain(w.hi()).map(|v| v.to_string()).collect();
    writeln!(s, "# window {}", corners.join(" ")).unwrap();
    writeln!(s, "# buffer {}", config.buffer()).unwrap();
    let cols: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    writeln!(s, "# columns {} mark coset", cols.join(" ")).unwrap();
    for (i, p) in config.points().iter().enumerate() {
        for c in p.coords() {
            write!(s, "{c} ").unwrap();
        }
        match marks {
            Some(m) => write!(s, "{} ", m[i]).unwrap(),
            None => s.push_str("- "),
        }
        match cosets {
            Some(c) => writeln!(s, "{}", c[i]).unwrap(),
            None => s.push_str("-\n"),
        }
    }
    s
}

/// Parsed configuration file.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigurationFile {
    pub config: Configuration,
    pub marks: Option<Vec<f64>>,
    pub cosets: Option<Vec<usize>>,
}

pub fn read_configuration(text: &str) -> Result<ConfigurationFile> {
    let bad = |m: &str| Error::InvalidPoint(format!("malformed configuration file: {m}"));
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("missing header"));
    }
    let mut header = |key: &str| -> Result<String> {
        let l = lines.next().ok_or_else(|| bad("truncated header"))?;
        l.strip_prefix(&format!("# {key} "))
            .map(str::to_owned)
            .ok_or_else(|| bad(key))
    };
    let model = parse_model(&header("model")?)?;
    let corners: Vec<f64> = header("window")?
        .split_whitespace()
        .map(|v| v.parse::<f64>().map_err(|_| bad("window")))
        .collect::<Result<_>>()?;
    let d = model.dim();
    if corners.len() != 2 * d {
        return Err(bad("window"));
    }
    let window = Window::new(corners[..d].to_vec(), corners[d..].to_vec())?;
    let buffer: f64 = header("buffer")?.parse().map_err(|_| bad("buffer"))?;
    header("columns")?;
    let mut points = Vec::new();
    let mut marks = Vec::new();
    let mut cosets = Vec::new();
    let mut has_marks = None;
    let mut has_cosets = None;
    for l in lines.filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != d + 2 {
            return Err(bad("wrong column count"));
        }
        let coords = f[..d]
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| bad("coordinate")))
            .collect::<Result<Vec<_>>>()?;
        points.push(GroupPoint::from(coords));
        let m = (f[d] != "-").then(|| f[d].parse::<f64>()).transpose().map_err(|_| bad("mark"))?;
        let c = (f[d + 1] != "-")
            .then(|| f[d + 1].parse::<usize>())
            .transpose()
            .map_err(|_| bad("coset"))?;
        if *has_marks.get_or_insert(m.is_some()) != m.is_some()
            || *has_cosets.get_or_insert(c.is_some()) != c.is_some()
        {
            return Err(bad("inconsistent optional columns"));
        }
        marks.extend(m);
        cosets.extend(c);
    }
    Ok(ConfigurationFile {
        config: Configuration::new(model, points, window, buffer)?,
        marks: has_marks.unwrap_or(false).then_some(marks),
        cosets: has_cosets.unwrap_or(false).then_some(cosets),
    })
}

/// `source,target,kind` rows sorted by endpoints.
pub fn write_edges(graph: &FactorGraph) -> String {
    let mut s = String::from("source,target,kind\n");
    for e in graph.sorted_edges() {
        writeln!(s, "{},{},{}", e.source, e.target, e.kind).unwrap();
    }
    s
}

/// Owner indices, one line per run of axis 0 (row-major for 2-D windows).
pub fn write_raster(v: &VoronoiAssignment) -> String {
    let mut s = String::new();
    let shape: Vec<String> = v.shape.iter().map(|n| n.to_string()).collect();
    writeln!(s, "# shape {}", shape.join(" ")).unwrap();
    for row in v.owners.chunks(v.shape[0].max(1)) {
        let r: Vec<String> = row.iter().map(|o| o.to_string()).collect();
        writeln!(s, "{}", r.join(" ")).unwrap();
    }
    s
}

/// `point,volume` rows.
pub fn write_volumes(v: &VoronoiAssignment) -> String {
    let mut s = String::from("point,volume\n");
    for (i, vol) in v.volumes.iter().enumerate() {
        writeln!(s, "{i},{vol}").unwrap();
    }
    s
}
