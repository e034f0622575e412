//! Flat `key = value` experiment configuration with `[experiment]`, `[dgp]`
//! and `[train]` sections. Keys before the first header belong to
//! `[experiment]`. `#` or `;` starts a comment at the beginning of a line
//! or after whitespace.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ocdeepiv_bench::EstimatorKind;
use ocdeepiv_core::{DgpKind, DgpSpec, Effect, TrainConfig};

use crate::error::{CliError, Result};

/// Which neural pipeline `train` runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainEstimator {
    /// Code-faithful for Y-less data, two-stage otherwise.
    Auto,
    CodeFaithful,
    TwoStage,
}

impl TrainEstimator {
    fn name(self) -> &'static str {
        match self {
            TrainEstimator::Auto => "auto",
            TrainEstimator::CodeFaithful => "code_faithful",
            TrainEstimator::TwoStage => "two_stage",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Seeds both the data and the training run.
    pub seed: u64,
    pub dgp: DgpSpec,
    pub train: TrainConfig,
    pub train_estimator: TrainEstimator,
    pub estimators: Vec<EstimatorKind>,
    pub replications: usize,
    pub smoothing_window: usize,
    pub output_dir: PathBuf,
    pub plot: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dgp: DgpSpec::default(),
            train: TrainConfig::default(),
            train_estimator: TrainEstimator::Auto,
            estimators: EstimatorKind::ALL.to_vec(),
            replications: 1,
            smoothing_window: ocdeepiv_core::model::DEFAULT_SMOOTHING_WINDOW,
            output_dir: PathBuf::from("out"),
            plot: false,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Experiment,
    Dgp,
    Train,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Experiment => "experiment",
            Section::Dgp => "dgp",
            Section::Train => "train",
        }
    }
}

fn parse_num<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse '{value}' as a number"))
}

fn parse_finite(value: &str) -> std::result::Result<f64, String> {
    let v: f64 = parse_num(value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{value}' is not finite"))
    }
}

fn parse_array<const K: usize>(value: &str) -> std::result::Result<[f64; K], String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != K {
        return Err(format!("expected {K} comma-separated numbers, got {}", parts.len()));
    }
    let mut out = [0.0; K];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = parse_finite(p)?;
    }
    Ok(out)
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got '{value}'")),
    }
}

fn strip_comment(line: &str) -> &str {
    let mut prev_space = true;
    for (i, c) in line.char_indices() {
        if (c == '#' || c == ';') && prev_space {
            return &line[..i];
        }
        prev_space = c.is_whitespace();
    }
    line
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses config text; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = Section::Experiment;
        let mut seen = HashSet::new();

        for (i, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            let fail = |message: String| CliError::ConfigLine {
                path: origin.to_string(),
                line: i + 1,
                message,
            };
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| fail(format!("malformed section header '{line}'")))?;
                section = match name.trim() {
                    "experiment" => Section::Experiment,
                    "dgp" => Section::Dgp,
                    "train" => Section::Train,
                    other => return Err(fail(format!("unknown section '{other}'"))),
                };
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail(format!("expected key = value, got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert((section.name(), key.to_string())) {
                return Err(fail(format!("duplicate key '{key}' in [{}]", section.name())));
            }
            cfg.set(section, key, value).map_err(fail)?;
        }
        // An explicit short run keeps its whole schedule valid: without a
        // switch_epoch key the switch is clamped to the epoch count.
        if !seen.contains(&("train", "switch_epoch".to_string())) {
            cfg.train.switch_epoch = cfg.train.switch_epoch.min(cfg.train.epochs);
        }
        let seed = cfg.seed;
        let cfg = cfg.with_seed(seed);
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, section: Section, key: &str, value: &str) -> std::result::Result<(), String> {
        match (section, key) {
            (Section::Experiment, "seed") => self.seed = parse_num(value)?,
            (Section::Experiment, "estimators") => {
                self.estimators = value
                    .split(',')
                    .map(|s| s.trim().parse::<EstimatorKind>().map_err(|e| e.to_string()))
                    .collect::<std::result::Result<_, _>>()?;
            }
            (Section::Experiment, "replications") => self.replications = parse_num(value)?,
            (Section::Experiment, "smoothing_window") => self.smoothing_window = parse_num(value)?,
            (Section::Experiment, "output_dir") => self.output_dir = PathBuf::from(value),
            (Section::Experiment, "plot") => self.plot = parse_bool(value)?,

            (Section::Dgp, "kind") => {
                self.dgp.kind = match value {
                    "code_faithful" => DgpKind::CodeFaithful,
                    "logistic_confounded" => DgpKind::LogisticConfounded,
                    _ => return Err(format!("unknown dgp kind '{value}'")),
                }
            }
            (Section::Dgp, "n") => self.dgp.n = parse_num(value)?,
            (Section::Dgp, "effect") => {
                self.dgp.effect = match value {
                    "heterogeneous" => Effect::Heterogeneous,
                    _ => Effect::Constant(
                        parse_finite(value).map_err(|_| format!("effect must be 'heterogeneous' or a number, got '{value}'"))?,
                    ),
                }
            }
            (Section::Dgp, "gamma") => self.dgp.gamma = parse_array(value)?,
            (Section::Dgp, "beta") => self.dgp.beta = parse_array(value)?,
            (Section::Dgp, "kappa_t") => self.dgp.kappa_t = parse_finite(value)?,
            (Section::Dgp, "kappa_y") => self.dgp.kappa_y = parse_finite(value)?,
            (Section::Dgp, "delta") => self.dgp.delta = parse_array(value)?,
            (Section::Dgp, "treatment_noise") => self.dgp.treatment_noise = parse_finite(value)?,
            (Section::Dgp, "outcome_noise") => self.dgp.outcome_noise = parse_finite(value)?,

            (Section::Train, "epochs") => self.train.epochs = parse_num(value)?,
            (Section::Train, "switch_epoch") => self.train.switch_epoch = parse_num(value)?,
            (Section::Train, "lr") => self.train.lr = parse_finite(value)?,
            (Section::Train, "weight_decay") => self.train.weight_decay = parse_finite(value)?,
            (Section::Train, "lambda") => self.train.lambda_reg = parse_finite(value)?,
            (Section::Train, "dropout") => self.train.dropout_p = parse_finite(value)?,
            (Section::Train, "lr_decay") => self.train.lr_decay = parse_finite(value)?,
            (Section::Train, "lambda_ramp_epochs") => self.train.lambda_ramp_epochs = parse_num(value)?,
            (Section::Train, "batch_size") => {
                self.train.batch_size = match value {
                    "full" => None,
                    _ => Some(parse_num(value)?),
                }
            }
            (Section::Train, "estimator") => {
                self.train_estimator = match value {
                    "auto" => TrainEstimator::Auto,
                    "code_faithful" => TrainEstimator::CodeFaithful,
                    "two_stage" => TrainEstimator::TwoStage,
                    _ => return Err(format!("unknown train estimator '{value}'")),
                }
            }
            _ => return Err(format!("unknown key '{key}' in [{}]", section.name())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(CliError::Config("estimators must not be empty".into()));
        }
        if self.replications == 0 {
            return Err(CliError::Config("replications must be at least 1".into()));
        }
        if self.smoothing_window == 0 {
            return Err(CliError::Config("smoothing_window must be at least 1".into()));
        }
        self.dgp.validate()?;
        self.train.validate()?;
        Ok(())
    }

    /// Applies `seed` to the data and training seeds.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.dgp.seed = seed;
        self.train.seed = seed;
        self
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let d = &self.dgp;
        let t = &self.train;
        let names: Vec<&str> = self.estimators.iter().map(|k| k.name()).collect();
        let _ = writeln!(s, "[experiment]");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "estimators = {}", names.join(","));
        let _ = writeln!(s, "replications = {}", self.replications);
        let _ = writeln!(s, "smoothing_window = {}", self.smoothing_window);
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(s, "plot = {}", self.plot);
        let _ = writeln!(s, "\n[dgp]");
        let kind = match d.kind {
            DgpKind::CodeFaithful => "code_faithful",
            DgpKind::LogisticConfounded => "logistic_confounded",
        };
        let _ = writeln!(s, "kind = {kind}");
        let _ = writeln!(s, "n = {}", d.n);
        match d.effect {
            Effect::Heterogeneous => {
                let _ = writeln!(s, "effect = heterogeneous");
            }
            Effect::Constant(c) => {
                let _ = writeln!(s, "effect = {c}");
            }
        }
        let _ = writeln!(s, "gamma = {}", join(&d.gamma));
        let _ = writeln!(s, "beta = {}", join(&d.beta));
        let _ = writeln!(s, "kappa_t = {}", d.kappa_t);
        let _ = writeln!(s, "kappa_y = {}", d.kappa_y);
        let _ = writeln!(s, "delta = {}", join(&d.delta));
        let _ = writeln!(s, "treatment_noise = {}", d.treatment_noise);
        let _ = writeln!(s, "outcome_noise = {}", d.outcome_noise);
        let _ = writeln!(s, "\n[train]");
        let _ = writeln!(s, "estimator = {}", self.train_estimator.name());
        let _ = writeln!(s, "epochs = {}", t.epochs);
        let _ = writeln!(s, "switch_epoch = {}", t.switch_epoch);
        let _ = writeln!(s, "lr = {}", t.lr);
        let _ = writeln!(s, "weight_decay = {}", t.weight_decay);
        let _ = writeln!(s, "lambda = {}", t.lambda_reg);
        let _ = writeln!(s, "dropout = {}", t.dropout_p);
        let _ = writeln!(s, "lr_decay = {}", t.lr_decay);
        let _ = writeln!(s, "lambda_ramp_epochs = {}", t.lambda_ramp_epochs);
        match t.batch_size {
            None => {
                let _ = writeln!(s, "batch_size = full");
            }
            Some(b) => {
                let _ = writeln!(s, "batch_size = {b}");
            }
        }
        s
    }

    /// `(section.key, value)` pairs for the run manifest.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut section = "experiment";
        let mut out = Vec::new();
        for line in self.to_text().lines() {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = if name == "dgp" { "dgp" } else if name == "train" { "train" } else { "experiment" };
            } else if let Some((k, v)) = line.split_once(" = ") {
                out.push((format!("{section}.{k}"), v.to_string()));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, "test.cfg")
    }

    #[test]
    fn empty_text_gives_reference_defaults() {
        let cfg = parse("").unwrap();
        assert_eq!(cfg.dgp.n, 10_000);
        assert_eq!(cfg.train.epochs, 100);
        assert_eq!(cfg.train.switch_epoch, 50);
        assert_eq!(cfg.train.lr, 0.001);
        assert_eq!(cfg.train.lambda_reg, 0.02);
        assert_eq!(cfg.train.weight_decay, 5e-4);
        assert_eq!(cfg.train.dropout_p, 0.3);
        assert_eq!(cfg.smoothing_window, 15);
        assert_eq!(cfg.dgp.kind, DgpKind::CodeFaithful);
    }

    #[test]
    fn sections_and_comments() {
        let cfg = parse(
            "# comment\nseed = 7\n[dgp]\nkind = logistic_confounded\nn = 500\neffect = 1.5\n\n; another\n[train]\nepochs = 3\nbatch_size = 64\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.dgp.kind, DgpKind::LogisticConfounded);
        assert_eq!(cfg.dgp.n, 500);
        assert_eq!(cfg.dgp.effect, Effect::Constant(1.5));
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.batch_size, Some(64));
    }

    #[test]
    fn trailing_comments_are_stripped() {
        let cfg = parse("seed = 5   # both seeds\noutput_dir = runs/a#1 ; note\n[train]\nepochs = 7\t# short\n").unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.output_dir, PathBuf::from("runs/a#1"));
        assert_eq!(cfg.train.epochs, 7);
    }

    #[test]
    fn commented_config_parses_to_defaults() {
        let text = ExperimentConfig::default()
            .to_text()
            .lines()
            .map(|l| if l.contains('=') { format!("{l}    # default") } else { l.to_string() })
            .collect::<Vec<_>>()
            .join("\n");
        assert_eq!(parse(&text).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let err = parse("[train]\nepochs = 3\nlearning_rate = 0.1\n").unwrap_err();
        match &err {
            CliError::ConfigLine { line, message, .. } => {
                assert_eq!(*line, 3);
                assert!(message.contains("learning_rate"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn short_run_clamps_implicit_switch_only() {
        let cfg = parse("[train]\nepochs = 1\n").unwrap();
        assert_eq!(cfg.train.switch_epoch, 1);
        assert!(parse("[train]\nepochs = 1\nswitch_epoch = 50\n").is_err());
    }

    #[test]
    fn key_in_wrong_section_is_rejected() {
        assert!(parse("[dgp]\nepochs = 3\n").is_err());
    }

    #[test]
    fn malformed_lines_are_rejected() {
        for text in ["[train\n", "[model]\n", "epochs 3\n", "[train]\nepochs = three\n", "[dgp]\ngamma = 1,2\n"] {
            let err = parse(text).unwrap_err();
            assert!(matches!(err, CliError::ConfigLine { .. }), "{text:?} gave {err:?}");
        }
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let err = parse("[train]\nepochs = 3\nepochs = 4\n").unwrap_err();
        assert!(matches!(err, CliError::ConfigLine { line: 3, .. }));
    }

    #[test]
    fn semantic_errors_are_config_errors() {
        for text in ["[train]\nlr = -1\n", "[train]\ndropout = 1.0\n", "replications = 0\n", "[dgp]\nn = 1\n"] {
            assert_eq!(parse(text).unwrap_err().exit_code(), 1, "{text:?}");
        }
    }

    #[test]
    fn estimator_list_parses_case_insensitively() {
        let cfg = parse("estimators = naiveols, TwoSLS\n").unwrap();
        assert_eq!(cfg.estimators, vec![EstimatorKind::NaiveOls, EstimatorKind::TwoSls]);
        assert!(parse("estimators = NaiveOLS, Bogus\n").is_err());
    }

    #[test]
    fn canonical_text_round_trips() {
        let cfg = parse("seed = 3\nplot = true\n[dgp]\nkind = logistic_confounded\neffect = 0.1\ngamma = 0.1,0.2,0.30000000000000004\n[train]\nlr = 0.0003\nestimator = two_stage\n")
            .unwrap();
        let again = parse(&cfg.to_text()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.dgp.gamma[2], 0.30000000000000004);
    }

    #[test]
    fn echo_is_section_qualified() {
        let echo = ExperimentConfig::default().echo();
        assert!(echo.contains(&("train.lambda".to_string(), "0.02".to_string())));
        assert!(echo.contains(&("dgp.n".to_string(), "10000".to_string())));
    }
}
