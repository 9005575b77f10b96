//! Campaign configuration. One TOML file per campaign; every table rejects
//! unknown keys so a misspelt parameter is an error rather than a default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use ctqo_core::protocols::DENSE_UNITARY_CAP;
use ctqo_core::MAX_QUBITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Msqw,
    Pstqa,
    Ansatz,
    Warmstart,
    Rqa,
    Bqa,
    GibbsSweep,
    Properties,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Msqw,
        Experiment::Pstqa,
        Experiment::Ansatz,
        Experiment::Warmstart,
        Experiment::Rqa,
        Experiment::Bqa,
        Experiment::GibbsSweep,
        Experiment::Properties,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Msqw => "msqw",
            Experiment::Pstqa => "pstqa",
            Experiment::Ansatz => "ansatz",
            Experiment::Warmstart => "warmstart",
            Experiment::Rqa => "rqa",
            Experiment::Bqa => "bqa",
            Experiment::GibbsSweep => "gibbs_sweep",
            Experiment::Properties => "properties",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Experiment::Msqw => "multi-stage quantum walk: trajectory, stage averages, diagonal-ensemble and ETH overlays",
            Experiment::Pstqa => "thermal annealing equations on the exact spectrum against the Schrodinger evolution",
            Experiment::Ansatz => "Gaussian and EMG partition-function models against the Schrodinger evolution",
            Experiment::Warmstart => "single-stage walk from a classical start: time trace, dephased distribution, heating",
            Experiment::Rqa => "reverse annealing shot loop, with the exact post-selected ensemble in dense mode",
            Experiment::Bqa => "biased annealing shot loop",
            Experiment::GibbsSweep => "fixed-temperature <H_p> against gamma",
            Experiment::Properties => "pass/fail table of the exact invariants on each instance",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Maxcut,
    Sk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub family: Family,
    pub n: usize,
    pub count: usize,
    /// Campaign seed; instance `i` uses `derive_seed(seed, i)`.
    pub seed: u64,
    /// Edge probability of the binomial graphs (MAX-CUT only).
    #[serde(default = "two_thirds")]
    pub edge_probability: f64,
}

fn two_thirds() -> f64 {
    2.0 / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Schrodinger integrator tolerances.
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    /// Thermal-equation integrator tolerances.
    pub pstqa_rtol: Option<f64>,
    pub pstqa_atol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsqwSpec {
    /// Non-decreasing stage values of Gamma.
    pub gammas: Vec<f64>,
    pub stage_time: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default = "default_stage_samples")]
    pub samples_per_stage: usize,
}

fn default_burn_in() -> f64 {
    0.2
}

fn default_stage_samples() -> usize {
    201
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Collocation,
    Dp5,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PstqaSpec {
    /// Linear schedule endpoints `[start, end]` for A and B.
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub t_final: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Also integrate the Schrodinger equation from |+...+>.
    #[serde(default = "yes")]
    pub schrodinger: bool,
    pub integrator: Option<Integrator>,
    /// Optional second path `[[t, a, b], ...]` (piecewise linear) sharing the
    /// endpoints; enables the path-independence report.
    pub second_path: Option<Vec<[f64; 3]>>,
}

fn default_samples() -> usize {
    121
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Gaussian,
    Emg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzSpec {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub t_final: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "all_models")]
    pub models: Vec<Model>,
}

fn all_models() -> Vec<Model> {
    vec![Model::Gaussian, Model::Emg]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmInitial {
    /// A uniformly drawn string below the mean of H_p.
    RandomString,
    /// Uniform mixture of every string below the mean.
    Ensemble,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarmstartSpec {
    /// Coupling values of `H_d + g H_p`.
    pub g: Vec<f64>,
    pub initial: WarmInitial,
    /// Length of the sampled time trace; no trace when `samples` is 0.
    #[serde(default)]
    pub t_final: f64,
    #[serde(default)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolInitial {
    RandomString,
    UniformBelowMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sampled,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bias {
    Local,
    Projector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Decrease,
    Increase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    pub amplitude: f64,
    pub t_cycle: f64,
    pub centre: f64,
    pub width: f64,
    pub exponent: f64,
}

impl Default for DriveSpec {
    fn default() -> Self {
        let d = ctqo_core::protocols::CycleDrive::default();
        Self {
            amplitude: d.amplitude,
            t_cycle: d.t_cycle,
            centre: d.centre,
            width: d.width,
            exponent: d.exponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub k_max: usize,
    pub k: usize,
    #[serde(default = "sampled")]
    pub mode: Mode,
    /// Start of reverse annealing; biased annealing always starts from a
    /// random string below the mean.
    #[serde(default = "random_string")]
    pub initial: ProtocolInitial,
    #[serde(default)]
    pub drive: DriveSpec,
    #[serde(default = "local")]
    pub bias: Bias,
    pub alpha0: Option<f64>,
    pub alpha_step: Option<f64>,
    #[serde(default = "decrease")]
    pub alpha_direction: Direction,
    #[serde(default = "yes")]
    pub reset_alpha_on_accept: bool,
    pub psuc_cutoff: Option<f64>,
    /// Points at which the drive G(t) is tabulated.
    #[serde(default = "default_drive_samples")]
    pub drive_samples: usize,
}

fn sampled() -> Mode {
    Mode::Sampled
}

fn random_string() -> ProtocolInitial {
    ProtocolInitial::RandomString
}

fn local() -> Bias {
    Bias::Local
}

fn decrease() -> Direction {
    Direction::Decrease
}

fn default_drive_samples() -> usize {
    101
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsSweepSpec {
    pub betas: Vec<f64>,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertiesSpec {
    /// Random unitaries per spectrum in the passivity check.
    #[serde(default = "default_haar")]
    pub haar_unitaries: usize,
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
}

fn default_haar() -> usize {
    100
}

fn default_betas() -> Vec<f64> {
    vec![0.5, 2.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub experiment: Experiment,
    /// Output directory; `--out` takes precedence. Not part of the hashed
    /// config, so moving a campaign does not change its identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<std::path::PathBuf>,
    pub problem: ProblemSpec,
    #[serde(default, skip_serializing_if = "is_default")]
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub msqw: Option<MsqwSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pstqa: Option<PstqaSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ansatz: Option<AnsatzSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmstart: Option<WarmstartSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gibbs_sweep: Option<GibbsSweepSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub properties: Option<PropertiesSpec>,
}

fn is_default(t: &Tolerances) -> bool {
    *t == Tolerances::default()
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("{name} must be positive and finite (got {x})")))
    }
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Representative configuration for each experiment, used by
    /// `print-schema`.
    pub fn example(experiment: Experiment) -> Self {
        let problem = ProblemSpec {
            family: Family::Maxcut,
            n: 10,
            count: 5,
            seed: 1,
            edge_probability: two_thirds(),
        };
        let mut cfg = Self {
            experiment,
            output: None,
            problem,
            tolerances: Tolerances::default(),
            msqw: None,
            pstqa: None,
            ansatz: None,
            warmstart: None,
            protocol: None,
            gibbs_sweep: None,
            properties: None,
        };
        match experiment {
            Experiment::Msqw => {
                cfg.msqw = Some(MsqwSpec {
                    gammas: vec![0.2, 0.4, 0.6, 0.8, 1.0],
                    stage_time: 10.0,
                    burn_in: default_burn_in(),
                    samples_per_stage: default_stage_samples(),
                })
            }
            Experiment::Pstqa => {
                cfg.pstqa = Some(PstqaSpec {
                    a: [1.3, 0.3],
                    b: [0.3, 1.3],
                    t_final: 12.0,
                    samples: default_samples(),
                    schrodinger: true,
                    integrator: None,
                    second_path: None,
                })
            }
            Experiment::Ansatz => {
                cfg.ansatz = Some(AnsatzSpec {
                    a: [1.1, 0.1],
                    b: [0.1, 1.1],
                    t_final: 10.0,
                    samples: default_samples(),
                    models: all_models(),
                })
            }
            Experiment::Warmstart => {
                cfg.warmstart = Some(WarmstartSpec {
                    g: vec![0.5],
                    initial: WarmInitial::RandomString,
                    t_final: 20.0,
                    samples: 201,
                })
            }
            Experiment::Rqa | Experiment::Bqa => {
                cfg.protocol = Some(ProtocolSpec {
                    k_max: 100,
                    k: 10,
                    mode: Mode::Sampled,
                    initial: ProtocolInitial::RandomString,
                    drive: DriveSpec::default(),
                    bias: Bias::Local,
                    alpha0: None,
                    alpha_step: None,
                    alpha_direction: Direction::Decrease,
                    reset_alpha_on_accept: true,
                    psuc_cutoff: None,
                    drive_samples: default_drive_samples(),
                })
            }
            Experiment::GibbsSweep => {
                cfg.problem.n = 8;
                cfg.gibbs_sweep = Some(GibbsSweepSpec {
                    betas: vec![0.1, 1.0, 5.0],
                    gamma_min: 0.0,
                    gamma_max: 3.0,
                    points: 50,
                })
            }
            Experiment::Properties => {
                cfg.problem.n = 6;
                cfg.properties = Some(PropertiesSpec {
                    haar_unitaries: default_haar(),
                    betas: default_betas(),
                })
            }
        }
        cfg
    }

    /// Checks everything that can be checked before any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.problem;
        if p.n == 0 {
            return Err(bad("problem.n must be at least 1"));
        }
        if p.n > MAX_QUBITS {
            return Err(CliError::SizeCap(format!(
                "problem.n = {} exceeds the cap of {MAX_QUBITS} qubits",
                p.n
            )));
        }
        if p.count == 0 {
            return Err(bad("problem.count must be at least 1"));
        }
        if !(0.0..=1.0).contains(&p.edge_probability) {
            return Err(bad("problem.edge_probability must lie in [0, 1]"));
        }
        if p.family == Family::Sk && p.edge_probability != two_thirds() {
            return Err(bad("problem.edge_probability applies to maxcut only"));
        }
        for (name, x) in [
            ("tolerances.rtol", self.tolerances.rtol),
            ("tolerances.atol", self.tolerances.atol),
            ("tolerances.pstqa_rtol", self.tolerances.pstqa_rtol),
            ("tolerances.pstqa_atol", self.tolerances.pstqa_atol),
        ] {
            if let Some(x) = x {
                positive(name, x)?;
            }
        }

        let present = [
            (Experiment::Msqw, self.msqw.is_some()),
            (Experiment::Pstqa, self.pstqa.is_some()),
            (Experiment::Ansatz, self.ansatz.is_some()),
            (Experiment::Warmstart, self.warmstart.is_some()),
            (Experiment::Rqa, self.protocol.is_some()),
            (Experiment::Bqa, self.protocol.is_some()),
            (Experiment::GibbsSweep, self.gibbs_sweep.is_some()),
            (Experiment::Properties, self.properties.is_some()),
        ];
        let section = |e: Experiment| match e {
            Experiment::Rqa | Experiment::Bqa => "protocol",
            other => other.name(),
        };
        for (e, here) in present {
            let wanted = section(e) == section(self.experiment);
            if wanted && !here {
                return Err(bad(format!(
                    "experiment `{}` needs a [{}] table",
                    self.experiment.name(),
                    section(e)
                )));
            }
            if !wanted && here {
                return Err(bad(format!(
                    "[{}] does not apply to experiment `{}`",
                    section(e),
                    self.experiment.name()
                )));
            }
        }

        if let Some(m) = &self.msqw {
            if m.gammas.is_empty() {
                return Err(bad("msqw.gammas is empty"));
            }
            if m.gammas.windows(2).any(|w| w[1] < w[0]) {
                return Err(bad("msqw.gammas must be non-decreasing"));
            }
            positive("msqw.stage_time", m.stage_time)?;
            if !(0.0..1.0).contains(&m.burn_in) {
                return Err(bad("msqw.burn_in must lie in [0, 1)"));
            }
            if m.samples_per_stage < 2 {
                return Err(bad("msqw.samples_per_stage must be at least 2"));
            }
        }
        if let Some(s) = &self.pstqa {
            positive("pstqa.t_final", s.t_final)?;
            if s.samples < 2 {
                return Err(bad("pstqa.samples must be at least 2"));
            }
            if let Some(path) = &s.second_path {
                let (first, last) = match (path.first(), path.last()) {
                    (Some(f), Some(l)) if path.len() >= 2 => (f, l),
                    _ => return Err(bad("pstqa.second_path needs two points")),
                };
                let same = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(1.0);
                if first[0] != 0.0
                    || !same(first[1], s.a[0])
                    || !same(first[2], s.b[0])
                    || !same(last[1], s.a[1])
                    || !same(last[2], s.b[1])
                {
                    return Err(bad(
                        "pstqa.second_path must start at t = 0 and share both endpoints",
                    ));
                }
            }
        }
        if let Some(s) = &self.ansatz {
            positive("ansatz.t_final", s.t_final)?;
            if s.samples < 2 {
                return Err(bad("ansatz.samples must be at least 2"));
            }
            if s.models.is_empty() {
                return Err(bad("ansatz.models is empty"));
            }
        }
        if let Some(w) = &self.warmstart {
            if w.g.is_empty() {
                return Err(bad("warmstart.g is empty"));
            }
            if w.samples > 0 {
                positive("warmstart.t_final", w.t_final)?;
                if w.samples < 2 {
                    return Err(bad("warmstart.samples must be 0 or at least 2"));
                }
            }
        }
        if let Some(pr) = &self.protocol {
            if pr.k == 0 || pr.k_max == 0 {
                return Err(bad("protocol.k and protocol.k_max must be positive"));
            }
            if pr.mode == Mode::Dense && p.n > DENSE_UNITARY_CAP {
                return Err(CliError::SizeCap(format!(
                    "dense mode materialises a 2^{} unitary; the cap is {DENSE_UNITARY_CAP} qubits",
                    p.n
                )));
            }
            if pr.mode == Mode::Dense && self.experiment == Experiment::Bqa {
                return Err(bad("dense mode applies to reverse annealing only"));
            }
            positive("protocol.drive.t_cycle", pr.drive.t_cycle)?;
            positive("protocol.drive.width", pr.drive.width)?;
            if pr.drive_samples < 2 {
                return Err(bad("protocol.drive_samples must be at least 2"));
            }
        }
        if let Some(g) = &self.gibbs_sweep {
            if g.points < 2 || !(g.gamma_max > g.gamma_min) {
                return Err(bad(
                    "gibbs_sweep needs points >= 2 and gamma_max > gamma_min",
                ));
            }
            if g.betas.iter().any(|b| !(*b >= 0.0)) || g.betas.is_empty() {
                return Err(bad("gibbs_sweep.betas must be non-negative and non-empty"));
            }
        }
        if let Some(pr) = &self.properties {
            if pr.haar_unitaries == 0 {
                return Err(bad("properties.haar_unitaries must be positive"));
            }
            if p.n > DENSE_UNITARY_CAP {
                return Err(CliError::SizeCap(format!(
                    "properties builds dense cycle unitaries; the cap is {DENSE_UNITARY_CAP} qubits"
                )));
            }
        }
        Ok(())
    }
}
