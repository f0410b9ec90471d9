//! Plain-text run configuration: `[section]` headers and `key = value` lines.
//! `#` starts a comment; lists are comma separated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{NettError, Result};
use crate::pat::Truncation;
use crate::solver::Init;
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub n: usize,
    pub sensors: usize,
    pub times: usize,
    pub mask_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KbConfig {
    pub order: u32,
    pub taper: f64,
    /// Support radius in pixel spacings.
    pub radius_pixels: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub train_pairs: usize,
    pub train_sigma: f64,
    pub test_phantoms: usize,
    pub ood_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerConfig {
    pub beta: f64,
    pub epsilon: f64,
    pub channels: Vec<usize>,
}

/// Initialization choices that can be written in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    NetAdjoint,
    PseudoInverse,
    Zero,
}

impl InitKind {
    pub fn to_init(self) -> Init {
        match self {
            InitKind::NetAdjoint => Init::NetAdjoint,
            InitKind::PseudoInverse => Init::PseudoInverse,
            InitKind::Zero => Init::Zero,
        }
    }

    fn name(self) -> &'static str {
        match self {
            InitKind::NetAdjoint => "net_adjoint",
            InitKind::PseudoInverse => "pseudo_inverse",
            InitKind::Zero => "zero",
        }
    }
}

impl FromStr for InitKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "net_adjoint" => Ok(InitKind::NetAdjoint),
            "pseudo_inverse" => Ok(InitKind::PseudoInverse),
            "zero" => Ok(InitKind::Zero),
            other => Err(format!("unknown init '{other}' (net_adjoint, pseudo_inverse, zero)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub s: f64,
    pub n_iter: usize,
    pub init: InitKind,
    pub paper_sign: bool,
    /// Relative objective change for early stopping; 0 disables it.
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub noise_levels: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Noise level of the noisy out-of-distribution run.
    pub ood_sigma: f64,
}

impl ExperimentConfig {
    /// The alpha paired with `sigma` in the schedule.
    pub fn alpha_for(&self, sigma: f64) -> Option<f64> {
        self.noise_levels
            .iter()
            .position(|&s| s == sigma)
            .map(|k| self.alphas[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateConfig {
    pub dim: usize,
    pub sigma_min: f64,
    pub deltas: Vec<f64>,
    pub trials: usize,
    pub c: f64,
    pub w_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderConfig {
    /// Grid sides, coarse to fine; empty disables the ladder study.
    pub levels: Vec<usize>,
    /// One noise level and weight per level.
    pub deltas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub samples: usize,
    pub perturbation: f64,
    /// Sampling bound `M` as a multiple of `R(x_plus)`.
    pub bound_factor: f64,
    pub n_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub grid: GridConfig,
    pub kb: KbConfig,
    pub truncation: Truncation,
    pub data: DataConfig,
    pub regularizer: RegularizerConfig,
    pub training: TrainConfig,
    pub solver: SolverConfig,
    pub experiment: ExperimentConfig,
    pub rate: RateConfig,
    pub ladder: LadderConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            grid: GridConfig {
                n: 32,
                sensors: 48,
                times: 64,
                mask_width: 0.34,
            },
            kb: KbConfig {
                order: 2,
                taper: 8.0,
                radius_pixels: 2.0,
            },
            truncation: Truncation::default(),
            data: DataConfig {
                train_pairs: 100,
                train_sigma: 0.01,
                test_phantoms: 10,
                ood_seed: 7,
            },
            regularizer: RegularizerConfig {
                beta: 15.0,
                epsilon: 1e-3,
                channels: vec![16, 32, 64],
            },
            training: TrainConfig::default(),
            solver: SolverConfig {
                s: 0.25,
                n_iter: 15,
                init: InitKind::NetAdjoint,
                paper_sign: false,
                tolerance: 0.0,
            },
            experiment: ExperimentConfig {
                noise_levels: vec![0.0, 0.01, 0.1],
                alphas: vec![0.015, 0.016, 0.02],
                ood_sigma: 0.01,
            },
            rate: RateConfig {
                dim: 100,
                sigma_min: 1e-4,
                deltas: vec![1e-1, 1e-2, 1e-3, 1e-4],
                trials: 20,
                c: 0.1,
                w_scale: 1.0,
            },
            ladder: LadderConfig {
                levels: vec![16, 32],
                deltas: vec![1e-2, 1e-4],
                alphas: vec![0.02, 0.005],
                samples: 50,
                perturbation: 0.05,
                bound_factor: 2.0,
                n_iter: 15,
            },
        }
    }
}

struct Entry {
    value: String,
    line: usize,
}

/// Key-value pairs of a parsed file, consumed field by field.
struct Table {
    entries: BTreeMap<String, Entry>,
}

fn config_err(line: usize, message: impl Into<String>) -> NettError {
    NettError::Config {
        line,
        message: message.into(),
    }
}

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(line, "unterminated section header"))?
                    .trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(config_err(line, format!("bad section name '{name}'")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_err(line, format!("expected 'key = value', got '{content}'")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(config_err(line, "empty key"));
            }
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            let entry = Entry {
                value: value.trim().to_string(),
                line,
            };
            if let Some(prev) = entries.insert(full.clone(), entry) {
                return Err(config_err(line, format!("duplicate key '{full}' (first on line {})", prev.line)));
            }
        }
        Ok(Self { entries })
    }

    fn take<T: FromStr>(&mut self, key: &str, target: &mut T) -> Result<()>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(e) = self.entries.remove(key) {
            *target = e
                .value
                .parse()
                .map_err(|err| config_err(e.line, format!("{key}: cannot parse '{}': {err}", e.value)))?;
        }
        Ok(())
    }

    fn take_list<T: FromStr>(&mut self, key: &str, target: &mut Vec<T>) -> Result<()>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(e) = self.entries.remove(key) {
            *target = if e.value.is_empty() {
                Vec::new()
            } else {
                e.value
                    .split(',')
                    .map(|item| {
                        item.trim()
                            .parse()
                            .map_err(|err| config_err(e.line, format!("{key}: cannot parse '{}': {err}", item.trim())))
                    })
                    .collect::<Result<_>>()?
            };
        }
        Ok(())
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map(|e| e.line).unwrap_or(0)
    }
}

fn list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(0, format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses a config; keys that are absent keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut t = Table::parse(text)?;
        let lines: BTreeMap<String, usize> = t.entries.iter().map(|(k, e)| (k.clone(), e.line)).collect();
        let mut c = RunConfig::default();
        t.take("run.seed", &mut c.seed)?;
        let mut out = c.out.display().to_string();
        t.take("run.out", &mut out)?;
        c.out = PathBuf::from(out);

        t.take("grid.n", &mut c.grid.n)?;
        t.take("grid.sensors", &mut c.grid.sensors)?;
        t.take("grid.times", &mut c.grid.times)?;
        t.take("grid.mask_width", &mut c.grid.mask_width)?;

        t.take("kb.order", &mut c.kb.order)?;
        t.take("kb.taper", &mut c.kb.taper)?;
        t.take("kb.radius_pixels", &mut c.kb.radius_pixels)?;

        let (mut mode, mut sigma_star) = match c.truncation {
            Truncation::Relative(v) => ("relative".to_string(), v),
            Truncation::Absolute(v) => ("absolute".to_string(), v),
        };
        let mode_line = t.line_of("operator.truncation");
        t.take("operator.truncation", &mut mode)?;
        t.take("operator.sigma_star", &mut sigma_star)?;
        c.truncation = match mode.as_str() {
            "relative" => Truncation::Relative(sigma_star),
            "absolute" => Truncation::Absolute(sigma_star),
            other => return Err(config_err(mode_line, format!("unknown truncation '{other}' (relative, absolute)"))),
        };

        t.take("data.train_pairs", &mut c.data.train_pairs)?;
        t.take("data.train_sigma", &mut c.data.train_sigma)?;
        t.take("data.test_phantoms", &mut c.data.test_phantoms)?;
        t.take("data.ood_seed", &mut c.data.ood_seed)?;

        t.take("regularizer.beta", &mut c.regularizer.beta)?;
        t.take("regularizer.epsilon", &mut c.regularizer.epsilon)?;
        t.take_list("regularizer.channels", &mut c.regularizer.channels)?;

        t.take("training.learning_rate", &mut c.training.learning_rate)?;
        t.take("training.gamma", &mut c.training.gamma)?;
        t.take("training.epochs", &mut c.training.epochs)?;
        t.take("training.batch_size", &mut c.training.batch_size)?;
        t.take("training.holdout", &mut c.training.holdout)?;
        t.take("training.beta1", &mut c.training.beta1)?;
        t.take("training.beta2", &mut c.training.beta2)?;
        t.take("training.adam_eps", &mut c.training.adam_eps)?;

        t.take("solver.s", &mut c.solver.s)?;
        t.take("solver.n_iter", &mut c.solver.n_iter)?;
        t.take("solver.init", &mut c.solver.init)?;
        t.take("solver.paper_sign", &mut c.solver.paper_sign)?;
        t.take("solver.tolerance", &mut c.solver.tolerance)?;

        t.take_list("experiment.noise_levels", &mut c.experiment.noise_levels)?;
        t.take_list("experiment.alphas", &mut c.experiment.alphas)?;
        t.take("experiment.ood_sigma", &mut c.experiment.ood_sigma)?;

        t.take("rate.dim", &mut c.rate.dim)?;
        t.take("rate.sigma_min", &mut c.rate.sigma_min)?;
        t.take_list("rate.deltas", &mut c.rate.deltas)?;
        t.take("rate.trials", &mut c.rate.trials)?;
        t.take("rate.c", &mut c.rate.c)?;
        t.take("rate.w_scale", &mut c.rate.w_scale)?;

        t.take_list("ladder.levels", &mut c.ladder.levels)?;
        t.take_list("ladder.deltas", &mut c.ladder.deltas)?;
        t.take_list("ladder.alphas", &mut c.ladder.alphas)?;
        t.take("ladder.samples", &mut c.ladder.samples)?;
        t.take("ladder.perturbation", &mut c.ladder.perturbation)?;
        t.take("ladder.bound_factor", &mut c.ladder.bound_factor)?;
        t.take("ladder.n_iter", &mut c.ladder.n_iter)?;

        if let Some((key, e)) = t.entries.iter().next() {
            return Err(config_err(e.line, format!("unknown key '{key}'")));
        }
        c.training.seed = c.seed;
        c.validate_with(|key| lines.get(key).copied().unwrap_or(0))?;
        Ok(c)
    }

    /// Checks every constraint of the downstream modules.
    pub fn validate(&self) -> Result<()> {
        self.validate_with(|_| 0)
    }

    fn validate_with(&self, line: impl Fn(&str) -> usize) -> Result<()> {
        let fail = |key: &str, msg: String| Err(config_err(line(key), format!("{key}: {msg}")));
        let g = &self.grid;
        let multiple = 1usize << (self.regularizer.channels.len().max(1) - 1);
        if g.n < 16 {
            return fail("grid.n", format!("must be >= 16, got {}", g.n));
        }
        if g.n % multiple != 0 {
            return fail("grid.n", format!("must be a multiple of {multiple} for the network, got {}", g.n));
        }
        if g.sensors == 0 {
            return fail("grid.sensors", "must be >= 1".into());
        }
        if g.times < 2 {
            return fail("grid.times", format!("must be >= 2, got {}", g.times));
        }
        if !(g.mask_width >= 0.0) {
            return fail("grid.mask_width", format!("must be >= 0, got {}", g.mask_width));
        }
        if !(self.kb.taper > 0.0) {
            return fail("kb.taper", format!("must be > 0, got {}", self.kb.taper));
        }
        if !(self.kb.radius_pixels > 0.0) {
            return fail("kb.radius_pixels", format!("must be > 0, got {}", self.kb.radius_pixels));
        }
        let sigma_star = match self.truncation {
            Truncation::Relative(v) | Truncation::Absolute(v) => v,
        };
        if !(sigma_star > 0.0) {
            return fail("operator.sigma_star", format!("must be > 0, got {sigma_star}"));
        }
        if let Truncation::Relative(v) = self.truncation {
            if v >= 1.0 {
                return fail("operator.sigma_star", format!("relative threshold must be < 1, got {v}"));
            }
        }
        if self.data.train_pairs == 0 {
            return fail("data.train_pairs", "must be >= 1".into());
        }
        if !(self.data.train_sigma >= 0.0) {
            return fail("data.train_sigma", format!("must be >= 0, got {}", self.data.train_sigma));
        }
        if !(self.regularizer.beta >= 0.0) {
            return fail("regularizer.beta", format!("must be >= 0, got {}", self.regularizer.beta));
        }
        if !(self.regularizer.epsilon > 0.0) {
            return fail("regularizer.epsilon", format!("must be > 0, got {}", self.regularizer.epsilon));
        }
        if self.regularizer.channels.is_empty() || self.regularizer.channels.contains(&0) {
            return fail("regularizer.channels", "needs at least one positive channel count".into());
        }
        if let Err(NettError::InvalidParameter(msg)) = self.training.validate() {
            return fail("training.learning_rate", msg);
        }
        if !(self.solver.s > 0.0) {
            return fail("solver.s", format!("must be > 0, got {}", self.solver.s));
        }
        if self.solver.n_iter == 0 {
            return fail("solver.n_iter", "must be >= 1".into());
        }
        if !(self.solver.tolerance >= 0.0) {
            return fail("solver.tolerance", format!("must be >= 0, got {}", self.solver.tolerance));
        }
        let e = &self.experiment;
        if e.noise_levels.len() != e.alphas.len() {
            return fail(
                "experiment.alphas",
                format!("needs one alpha per noise level ({} vs {})", e.alphas.len(), e.noise_levels.len()),
            );
        }
        if e.noise_levels.iter().any(|s| !(*s >= 0.0)) {
            return fail("experiment.noise_levels", "noise levels must be >= 0".into());
        }
        if e.alphas.iter().any(|a| !(*a >= 0.0)) {
            return fail("experiment.alphas", "alphas must be >= 0".into());
        }
        if !(e.ood_sigma >= 0.0) {
            return fail("experiment.ood_sigma", format!("must be >= 0, got {}", e.ood_sigma));
        }
        let r = &self.rate;
        if r.dim < 2 {
            return fail("rate.dim", format!("must be >= 2, got {}", r.dim));
        }
        if !(r.sigma_min > 0.0 && r.sigma_min < 1.0) {
            return fail("rate.sigma_min", format!("must lie in (0, 1), got {}", r.sigma_min));
        }
        if r.deltas.iter().any(|d| !(*d >= 0.0)) || r.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return fail("rate.deltas", "must be non-negative and strictly decreasing".into());
        }
        if r.trials == 0 {
            return fail("rate.trials", "must be >= 1".into());
        }
        if !(r.c > 0.0) {
            return fail("rate.c", format!("must be > 0, got {}", r.c));
        }
        let l = &self.ladder;
        if !l.levels.is_empty() {
            if l.levels.windows(2).any(|w| w[1] <= w[0]) {
                return fail("ladder.levels", "sides must increase".into());
            }
            let fine = *l.levels.last().expect("non-empty");
            if l.levels.iter().any(|&s| s < 16 || fine % s != 0 || !(fine / s).is_power_of_two()) {
                return fail("ladder.levels", "sides must be >= 16 and differ by powers of two".into());
            }
            if fine % multiple != 0 {
                return fail("ladder.levels", format!("finest side must be a multiple of {multiple}"));
            }
            if l.deltas.len() != l.levels.len() || l.alphas.len() != l.levels.len() {
                return fail("ladder.deltas", "needs one delta and one alpha per level".into());
            }
            if !(l.bound_factor > 1.0) {
                return fail("ladder.bound_factor", format!("must be > 1, got {}", l.bound_factor));
            }
            if !(l.perturbation > 0.0) {
                return fail("ladder.perturbation", format!("must be > 0, got {}", l.perturbation));
            }
            if l.n_iter == 0 {
                return fail("ladder.n_iter", "must be >= 1".into());
            }
        }
        Ok(())
    }

    /// Writes every field; [`RunConfig::parse`] of the result gives back `self`.
    pub fn to_config_string(&self) -> String {
        let (mode, sigma_star) = match self.truncation {
            Truncation::Relative(v) => ("relative", v),
            Truncation::Absolute(v) => ("absolute", v),
        };
        let mut s = String::new();
        let w = &mut s;
        let _ = writeln!(w, "[run]\nseed = {}\nout = {}\n", self.seed, self.out.display());
        let g = &self.grid;
        let _ = writeln!(
            w,
            "[grid]\nn = {}\nsensors = {}\ntimes = {}\nmask_width = {}\n",
            g.n, g.sensors, g.times, g.mask_width
        );
        let _ = writeln!(
            w,
            "[kb]\norder = {}\ntaper = {}\nradius_pixels = {}\n",
            self.kb.order, self.kb.taper, self.kb.radius_pixels
        );
        let _ = writeln!(w, "[operator]\ntruncation = {mode}\nsigma_star = {sigma_star}\n");
        let d = &self.data;
        let _ = writeln!(
            w,
            "[data]\ntrain_pairs = {}\ntrain_sigma = {}\ntest_phantoms = {}\nood_seed = {}\n",
            d.train_pairs, d.train_sigma, d.test_phantoms, d.ood_seed
        );
        let r = &self.regularizer;
        let _ = writeln!(
            w,
            "[regularizer]\nbeta = {}\nepsilon = {}\nchannels = {}\n",
            r.beta,
            r.epsilon,
            list(&r.channels)
        );
        let t = &self.training;
        let _ = writeln!(
            w,
            "[training]\nlearning_rate = {}\ngamma = {}\nepochs = {}\nbatch_size = {}\nholdout = {}\nbeta1 = {}\nbeta2 = {}\nadam_eps = {}\n",
            t.learning_rate, t.gamma, t.epochs, t.batch_size, t.holdout, t.beta1, t.beta2, t.adam_eps
        );
        let v = &self.solver;
        let _ = writeln!(
            w,
            "[solver]\ns = {}\nn_iter = {}\ninit = {}\npaper_sign = {}\ntolerance = {}\n",
            v.s,
            v.n_iter,
            v.init.name(),
            v.paper_sign,
            v.tolerance
        );
        let e = &self.experiment;
        let _ = writeln!(
            w,
            "[experiment]\nnoise_levels = {}\nalphas = {}\nood_sigma = {}\n",
            list(&e.noise_levels),
            list(&e.alphas),
            e.ood_sigma
        );
        let q = &self.rate;
        let _ = writeln!(
            w,
            "[rate]\ndim = {}\nsigma_min = {}\ndeltas = {}\ntrials = {}\nc = {}\nw_scale = {}\n",
            q.dim,
            q.sigma_min,
            list(&q.deltas),
            q.trials,
            q.c,
            q.w_scale
        );
        let l = &self.ladder;
        let _ = writeln!(
            w,
            "[ladder]\nlevels = {}\ndeltas = {}\nalphas = {}\nsamples = {}\nperturbation = {}\nbound_factor = {}\nn_iter = {}",
            list(&l.levels),
            list(&l.deltas),
            list(&l.alphas),
            l.samples,
            l.perturbation,
            l.bound_factor,
            l.n_iter
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        let text = c.to_config_string();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
        assert_eq!(RunConfig::parse("").unwrap(), c);
    }

    #[test]
    fn values_override_defaults() {
        let c = RunConfig::parse(
            "# desk run\n[run]\nseed = 9\n[grid]\nn = 64 # fine\n[experiment]\nnoise_levels = 0, 0.1\nalphas = 0.1,0.2\n[solver]\ninit = zero\npaper_sign = true\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.training.seed, 9);
        assert_eq!(c.grid.n, 64);
        assert_eq!(c.experiment.alphas, vec![0.1, 0.2]);
        assert_eq!(c.solver.init, InitKind::Zero);
        assert!(c.solver.paper_sign);
        assert_eq!(RunConfig::parse(&c.to_config_string()).unwrap(), c);
    }

    fn line_of(text: &str) -> usize {
        match RunConfig::parse(text) {
            Err(NettError::Config { line, .. }) => line,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(line_of("[grid]\nn = abc\n"), 2);
        assert_eq!(line_of("[grid]\n\nbogus = 1\n"), 3);
        assert_eq!(line_of("[grid\n"), 1);
        assert_eq!(line_of("[grid]\nn = 32\nn = 64\n"), 3);
        assert_eq!(line_of("just text\n"), 1);
        assert_eq!(line_of("[grid]\nsensors = 4\nn = 8\n"), 3);
        assert_eq!(line_of("[experiment]\nalphas = 0.1\n"), 2);
        assert_eq!(line_of("[rate]\ndeltas = 0.1, 0.2, 0.01\n"), 2);
    }
}
