//! Experiment configuration files.
//!
//! A config is a TOML document. Every key is optional; omitted keys take
//! the defaults shown below (the acceptance thresholds for assertions).
//!
//! ```toml
//! seed = 7
//! model = "heisenberg"          # euclidean<d> | lattice<d> | heisenberg
//! subgroup = "center"           # or { axes = [1] } on euclidean/lattice models
//! process = "poisson"           # poisson | cox | cox_folner | palm_poisson | palm_cox
//! intensity = 1.0               # Poisson intensity t
//! buffer = 0.0
//! replicates = 10000            # per-command default when omitted
//! output = "palmcox-out"
//! svg = false
//!
//! [window]                      # lo/hi corners, or `side` for a centred cube
//! lo = [0.0, 0.0, 0.0]
//! hi = [1.0, 1.0, 1.0]
//!
//! [folner]
//! n = [1, 2, 4, 8, 16]          # cox-converge sequence
//! sample_n = 4                  # F_n used by process = "cox_folner"
//!
//! [star]
//! epsilon = 0.5
//! n_max = 4
//! sides = [5, 10, 20]
//!
//! [thresholds]
//! sigmas = 3.0
//! p_value = 0.01
//! volume_rel_tol = 0.005
//! ```

use std::path::{Path, PathBuf};

use palmcox::format::{model_name, parse_model};
use palmcox::{FolnerSet, ModelGroup, ModelKind, Selector, Subgroup, Window};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable overriding `output` (the `--out` flag still wins).
pub const OUT_ENV: &str = "PALMCOX_OUT";

/// Largest Voronoi grid accepted, in cells.
const MAX_GRID_CELLS: usize = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Poisson,
    Cox,
    CoxFolner,
    PalmPoisson,
    PalmCox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FolnerSpec {
    pub n: Vec<f64>,
    pub sample_n: f64,
}

impl Default for FolnerSpec {
    fn default() -> Self {
        Self {
            n: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            sample_n: 4.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftSpec {
    /// Retention probability of transversal coset links.
    pub p: f64,
    /// Transversal link radius.
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StarSpec {
    pub epsilon: f64,
    pub n_max: u32,
    pub sides: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lift: Option<LiftSpec>,
}

impl Default for StarSpec {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            n_max: 4,
            sides: vec![5.0, 10.0, 20.0],
            lift: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoronoiSpec {
    /// Grid cells per axis; 512 per axis in 2-D and 64 otherwise when empty.
    pub resolution: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdjacencySpec {
    pub radius: f64,
    pub min_pairs: usize,
    pub min_spread: f64,
}

impl Default for AdjacencySpec {
    fn default() -> Self {
        Self {
            radius: 1.0,
            min_pairs: 3,
            min_spread: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Allowed |z| for mean comparisons.
    pub sigmas: f64,
    /// Smallest acceptable p-value.
    pub p_value: f64,
    /// Relative tolerance for Voronoi volume sums.
    pub volume_rel_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            sigmas: 3.0,
            p_value: 0.01,
            volume_rel_tol: 0.005,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subgroup: Option<Selector>,
    pub process: ProcessKind,
    pub intensity: f64,
    pub buffer: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    /// Where artifacts go; left out of the embedded provenance so that runs
    /// in different directories stay byte-identical.
    #[serde(skip_serializing)]
    pub output: PathBuf,
    pub svg: bool,
    pub n_boot: usize,
    /// Grid points per axis for Campbell quadrature.
    pub quadrature: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub panel: Option<Vec<BoxSpec>>,
    pub folner: FolnerSpec,
    pub star: StarSpec,
    pub voronoi: VoronoiSpec,
    pub adjacency: AdjacencySpec,
    pub thresholds: Thresholds,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: "heisenberg".into(),
            subgroup: None,
            process: ProcessKind::Poisson,
            intensity: 1.0,
            buffer: 0.0,
            replicates: None,
            output: PathBuf::from("palmcox-out"),
            svg: false,
            n_boot: 200,
            quadrature: 48,
            window: None,
            panel: None,
            folner: FolnerSpec::default(),
            star: StarSpec::default(),
            voronoi: VoronoiSpec::default(),
            adjacency: AdjacencySpec::default(),
            thresholds: Thresholds::default(),
        }
    }
}

/// Flag and environment overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub out: Option<PathBuf>,
    pub env_out: Option<PathBuf>,
}

/// A validated config with every default filled in, plus the objects built
/// from it.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub model: ModelGroup,
    pub sub: Subgroup,
    pub window: Window,
    pub panel: Option<Vec<Window>>,
}

impl Resolved {
    pub fn replicates(&self) -> usize {
        self.config.replicates.expect("resolved")
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.output
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn finite_nonneg(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("`{name}` must be finite and nonnegative, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("`{name}` must be positive and finite, got {v}")))
    }
}

fn build_box(name: &str, model: &ModelGroup, lo: Vec<f64>, hi: Vec<f64>) -> Result<Window, CliError> {
    let d = model.dim();
    if lo.len() != d || hi.len() != d {
        return Err(invalid(format!("`{name}` needs {d} coordinates per corner")));
    }
    let w = Window::new(lo, hi).map_err(|e| invalid(format!("`{name}`: {e}")))?;
    if !(model.volume(&w) > 0.0) {
        return Err(invalid(format!("`{name}` has zero volume")));
    }
    Ok(w)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| invalid(format!("cannot parse config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Apply overrides, fill defaults and validate every parameter.
    ///
    /// `default_replicates` is the command's replicate count when neither
    /// the file nor the flags set one.
    pub fn resolve(mut self, ov: &Overrides, default_replicates: usize) -> Result<Resolved, CliError> {
        if let Some(s) = ov.seed {
            self.seed = s;
        }
        if let Some(n) = ov.replicates.or(self.replicates) {
            self.replicates = Some(n);
        } else {
            self.replicates = Some(default_replicates);
        }
        if let Some(p) = ov.out.clone().or_else(|| ov.env_out.clone()) {
            self.output = p;
        }

        let model = parse_model(&self.model).map_err(|e| invalid(e.to_string()))?;
        self.model = model_name(&model);
        let d = model.dim();

        let selector = match self.subgroup.take() {
            Some(s) => s,
            None if model.kind() == ModelKind::Heisenberg => Selector::Center,
            None => Selector::Axes(vec![d - 1]),
        };
        let sub = Subgroup::new(model, selector).map_err(|e| invalid(e.to_string()))?;
        self.subgroup = Some(sub.selector().clone());

        let spec = self.window.take().unwrap_or(WindowSpec {
            lo: None,
            hi: None,
            side: None,
        });
        let window = match spec {
            WindowSpec {
                side: Some(s),
                lo: None,
                hi: None,
            } => {
                positive("window.side", s)?;
                build_box("window", &model, vec![-s / 2.0; d], vec![s / 2.0; d])?
            }
            WindowSpec { side: Some(_), .. } => {
                return Err(invalid("`window` takes either `side` or `lo`/`hi`, not both"))
            }
            WindowSpec { lo, hi, side: None } => build_box(
                "window",
                &model,
                lo.unwrap_or_else(|| vec![0.0; d]),
                hi.unwrap_or_else(|| vec![1.0; d]),
            )?,
        };
        self.window = Some(WindowSpec {
            lo: Some(window.lo().to_vec()),
            hi: Some(window.hi().to_vec()),
            side: None,
        });

        finite_nonneg("buffer", self.buffer)?;
        positive("intensity", self.intensity)?;
        if self.replicates == Some(0) {
            return Err(invalid("`replicates` must be positive"));
        }
        if self.n_boot == 0 {
            return Err(invalid("`n_boot` must be positive"));
        }
        if self.quadrature == 0 {
            return Err(invalid("`quadrature` must be positive"));
        }

        let ns = &self.folner.n;
        if ns.is_empty() {
            return Err(invalid("`folner.n` is empty"));
        }
        for n in ns.iter().chain([&self.folner.sample_n]) {
            positive("folner.n", *n)?;
        }
        if ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("`folner.n` must be strictly increasing"));
        }
        FolnerSet::symmetric(&sub, self.folner.sample_n).map_err(|e| invalid(e.to_string()))?;

        positive("star.epsilon", self.star.epsilon)?;
        if !(1..=30).contains(&self.star.n_max) {
            return Err(invalid("`star.n_max` must lie in 1..=30"));
        }
        if self.star.sides.is_empty() {
            return Err(invalid("`star.sides` is empty"));
        }
        for s in &self.star.sides {
            positive("star.sides", *s)?;
        }
        if let Some(l) = self.star.lift {
            if !(l.p > 0.0 && l.p <= 1.0) {
                return Err(invalid("`star.lift.p` must lie in (0, 1]"));
            }
            positive("star.lift.radius", l.radius)?;
        }

        if self.voronoi.resolution.is_empty() {
            self.voronoi.resolution = vec![if d == 2 { 512 } else { 64 }; d];
        }
        if self.voronoi.resolution.len() != d || self.voronoi.resolution.contains(&0) {
            return Err(invalid(format!("`voronoi.resolution` needs {d} positive entries")));
        }
        let cells = self
            .voronoi
            .resolution
            .iter()
            .try_fold(1usize, |acc, r| acc.checked_mul(*r))
            .filter(|c| *c <= MAX_GRID_CELLS);
        if cells.is_none() {
            return Err(invalid(format!("`voronoi.resolution` exceeds {MAX_GRID_CELLS} cells")));
        }

        positive("adjacency.radius", self.adjacency.radius)?;
        finite_nonneg("adjacency.min_spread", self.adjacency.min_spread)?;

        positive("thresholds.sigmas", self.thresholds.sigmas)?;
        let p = self.thresholds.p_value;
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid("`thresholds.p_value` must lie in (0, 1)"));
        }
        positive("thresholds.volume_rel_tol", self.thresholds.volume_rel_tol)?;

        let panel = match &self.panel {
            Some(boxes) if boxes.is_empty() => return Err(invalid("`panel` is empty")),
            Some(boxes) => Some(
                boxes
                    .iter()
                    .map(|b| build_box("panel", &model, b.lo.clone(), b.hi.clone()))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            None => None,
        };

        Ok(Resolved {
            config: self,
            model,
            sub,
            window,
            panel,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<Resolved, CliError> {
        ExperimentConfig::from_toml(text)?.resolve(&Overrides::default(), 100)
    }

    #[test]
    fn defaults_resolve_to_heisenberg_center_unit_cube() {
        let r = resolve("").unwrap();
        assert_eq!(r.config.model, "heisenberg");
        assert_eq!(r.config.subgroup, Some(Selector::Center));
        assert_eq!(r.window, Window::cube(3, 0.0, 1.0).unwrap());
        assert_eq!(r.replicates(), 100);
        assert_eq!(r.config.voronoi.resolution, vec![64; 3]);
    }

    #[test]
    fn euclidean_defaults_to_last_axis_and_side_window() {
        let r = resolve("model = \"euclidean2\"\n[window]\nside = 4.0\n").unwrap();
        assert_eq!(r.sub.a_axes(), &[1]);
        assert_eq!(r.window, Window::cube(2, -2.0, 2.0).unwrap());
        assert_eq!(r.config.voronoi.resolution, vec![512, 512]);
    }

    #[test]
    fn explicit_axes_selector() {
        let r = resolve("model = \"euclidean3\"\nsubgroup = { axes = [0, 2] }\n").unwrap();
        assert_eq!(r.sub.a_axes(), &[0, 2]);
    }

    #[test]
    fn rejects_bad_parameters() {
        for bad in [
            "[window]\nlo = [0.0, 0.0, 0.0]\nhi = [1.0, 0.0, 1.0]\n",
            "model = \"torus\"\n",
            "model = \"euclidean2\"\nsubgroup = \"center\"\n",
            "intensity = -1.0\n",
            "replicates = 0\n",
            "[folner]\nn = [2.0, 1.0]\n",
            "[star]\nepsilon = 0.0\n",
            "[thresholds]\np_value = 1.5\n",
            "[voronoi]\nresolution = [8, 8]\n",
            "unknown_key = 3\n",
            "[window]\nside = 2.0\nlo = [0.0, 0.0, 0.0]\n",
            "model = \"lattice2\"\n[window]\nlo = [0.2, 0.2]\nhi = [0.8, 0.8]\n",
        ] {
            assert!(matches!(resolve(bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn overrides_take_precedence() {
        let cfg = ExperimentConfig::from_toml("seed = 1\nreplicates = 5\noutput = \"a\"\n").unwrap();
        let ov = Overrides {
            seed: Some(9),
            replicates: None,
            out: None,
            env_out: Some("b".into()),
        };
        let r = cfg.clone().resolve(&ov, 100).unwrap();
        assert_eq!((r.config.seed, r.replicates(), r.out_dir()), (9, 5, Path::new("b")));
        let ov = Overrides {
            out: Some("c".into()),
            ..ov
        };
        assert_eq!(cfg.resolve(&ov, 100).unwrap().out_dir(), Path::new("c"));
    }

    #[test]
    fn resolved_config_round_trips() {
        let r = resolve("model = \"euclidean2\"\nseed = 3\n").unwrap();
        let text = toml::to_string(&r.config).unwrap();
        let again = ExperimentConfig::from_toml(&text)
            .unwrap()
            .resolve(&Overrides::default(), 1)
            .unwrap();
        assert_eq!(again.config, r.config);
    }
}
