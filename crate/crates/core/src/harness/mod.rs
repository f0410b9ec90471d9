//! Experiment front end: every command reads the run configuration and the
//! artifacts of earlier commands from the output directory and writes its
//! own artifacts there. Outputs are pure functions of the config and inputs,
//! so re-running a command reproduces them byte for byte.

pub mod config;
pub mod plot;

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

pub use config::{InitKind, RunConfig};
pub use plot::{LinePlot, Series};

use crate::error::{NettError, Result};
use crate::linops::{pseudo_inverse_apply, ForwardOperator};
use crate::pat::{ImageGrid, KBParams, PatSetup};
use crate::phantom::{
    gen_circles_phantom, gen_ring_phantom_indexed, make_training_set, mse, simulate_data_indexed, ImageStack, Phantom,
    PhantomKind, TrainingPair,
};
use crate::regularizer::{Architecture, NetParams, NettRegularizer, Regularizer, TVParams};
use crate::solver::{data_residual, nett_reconstruct, postprocess_reconstruct, SolveConfig, SolveReport};
use crate::theory::{
    approx_errors, multiscale_convergence, rate_experiment, write_approx_csv, write_multiscale_csv, write_rate_csv,
    ApproxRecord, DiscretizationLadder, Level, MultiscaleRecord, RateStudy, SamplingConfig, ScheduleStep, ToyProblem,
};
use crate::training::{train, write_loss_csv, EpochLoss};

/// File names inside the output directory.
pub mod artifact {
    pub const OPERATOR: &str = "operator.bin";
    pub const OPERATOR_SUMMARY: &str = "operator_summary.txt";
    pub const TRAIN_TRUTH: &str = "train_truth.bin";
    pub const TRAIN_CORRUPTED: &str = "train_corrupted.bin";
    pub const TEST_PHANTOMS: &str = "test_phantoms.bin";
    pub const OOD_PHANTOM: &str = "ood_phantom.bin";
    pub const NET: &str = "net.bin";
    pub const TRAIN_LOSS: &str = "train_loss.csv";
    pub const RECONSTRUCT: &str = "reconstruct.csv";
    pub const OBJECTIVE: &str = "objective.csv";
    pub const NOISE_SWEEP: &str = "noise_sweep.csv";
    pub const NOISE_SWEEP_PLOT: &str = "noise_sweep.svg";
    pub const OOD_COMPARE: &str = "ood_compare.csv";
    pub const OOD_PANELS: &str = "ood_panels.bin";
    pub const RATE_STUDY: &str = "rate_study.csv";
    pub const RATE_PLOT: &str = "rate_study.svg";
    pub const APPROX_ERRORS: &str = "approx_errors.csv";
    pub const MULTISCALE: &str = "multiscale.csv";
    pub const RATE_SUMMARY: &str = "rate_summary.txt";
}

/// Stream offsets that keep test and out-of-distribution draws disjoint from
/// the training set.
const TEST_INDEX: u64 = 1 << 40;
const OOD_NOISE_INDEX: u64 = 1 << 41;
const LADDER_INDEX: u64 = 1 << 42;

/// Accepted band of the fitted rate slope.
pub const SLOPE_BAND: (f64, f64) = (0.4, 0.6);

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

/// Path of an input artifact, or an error naming it and its producer.
fn require(cfg: &RunConfig, name: &str, producer: &str) -> Result<PathBuf> {
    let path = out_path(cfg, name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(NettError::MissingArtifact(format!(
            "{} (run `nett {producer}` first)",
            path.display()
        )))
    }
}

fn ensure_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)?;
    Ok(())
}

/// Operator setup for an image side, with the config's sensors, times, mask
/// and blob shape.
pub fn pat_setup(cfg: &RunConfig, side: usize) -> Result<PatSetup> {
    let g = &cfg.grid;
    let mut setup = PatSetup::standard(side, g.sensors, g.times, g.mask_width)?;
    let spacing = ImageGrid::new(side)?.spacing();
    setup.kb = KBParams::new(cfg.kb.order, cfg.kb.taper, cfg.kb.radius_pixels * spacing)?;
    setup.truncation = cfg.truncation;
    Ok(setup)
}

pub fn solve_config(cfg: &RunConfig, alpha: f64) -> SolveConfig {
    SolveConfig {
        alpha,
        s: cfg.solver.s,
        n_iter: cfg.solver.n_iter,
        init: cfg.solver.init.to_init(),
        paper_sign: cfg.solver.paper_sign,
        tolerance: (cfg.solver.tolerance > 0.0).then_some(cfg.solver.tolerance),
    }
}

pub fn tv_params(cfg: &RunConfig) -> Result<TVParams> {
    TVParams::new(cfg.regularizer.beta, cfg.regularizer.epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSummary {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
}

impl OperatorSummary {
    fn of(a: &ForwardOperator) -> Self {
        Self {
            rows: a.rows(),
            cols: a.cols(),
            rank: a.rank(),
            sigma_max: a.sigma_max(),
            sigma_min: a.sigma_min(),
        }
    }
}

impl fmt::Display for OperatorSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "operator {}x{}: rank {}, sigma_max {:e}, sigma_min {:e}",
            self.rows, self.cols, self.rank, self.sigma_max, self.sigma_min
        )
    }
}

pub fn cmd_build_operator(cfg: &RunConfig) -> Result<OperatorSummary> {
    cfg.validate()?;
    let a = pat_setup(cfg, cfg.grid.n)?.build()?;
    ensure_out(cfg)?;
    a.save(out_path(cfg, artifact::OPERATOR))?;
    let summary = OperatorSummary::of(&a);
    write_file(&out_path(cfg, artifact::OPERATOR_SUMMARY), format!("{summary}\n").as_bytes())?;
    Ok(summary)
}

pub fn load_operator(cfg: &RunConfig) -> Result<ForwardOperator> {
    let a = ForwardOperator::load(require(cfg, artifact::OPERATOR, "build-operator")?)?;
    let pixels = cfg.grid.n * cfg.grid.n;
    if a.cols() != pixels {
        return Err(NettError::InvalidParameter(format!(
            "operator has {} columns but grid.n = {} needs {pixels}; rebuild it",
            a.cols(),
            cfg.grid.n
        )));
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhantomCounts {
    pub train: usize,
    pub test: usize,
}

/// Ring phantoms of the test set.
pub fn test_phantoms(cfg: &RunConfig) -> Result<Vec<Phantom>> {
    (0..cfg.data.test_phantoms as u64)
        .map(|k| gen_ring_phantom_indexed(cfg.grid.n, cfg.seed, TEST_INDEX + k))
        .collect()
}

pub fn cmd_gen_phantoms(cfg: &RunConfig) -> Result<PhantomCounts> {
    cfg.validate()?;
    let a = load_operator(cfg)?;
    let n = cfg.grid.n;
    let pairs = make_training_set(&a, n, cfg.data.train_pairs, cfg.data.train_sigma, cfg.seed)?;
    let truth = ImageStack::new(n, pairs.iter().map(|p| p.truth.image.clone()).collect())?
        .with_meta("kind", PhantomKind::Ring)
        .with_meta("seed", cfg.seed);
    let corrupted = ImageStack::new(n, pairs.iter().map(|p| p.corrupted.clone()).collect())?
        .with_meta("kind", "pseudo_inverse")
        .with_meta("seed", cfg.seed)
        .with_meta("noise_sigma", cfg.data.train_sigma);
    let test = test_phantoms(cfg)?;
    let test_stack = ImageStack::new(n, test.into_iter().map(|p| p.image).collect())?
        .with_meta("kind", PhantomKind::Ring)
        .with_meta("seed", cfg.seed);
    let ood = ImageStack::new(n, vec![gen_circles_phantom(n, cfg.data.ood_seed)?.image])?
        .with_meta("kind", PhantomKind::Circles)
        .with_meta("seed", cfg.data.ood_seed);
    truth.save(out_path(cfg, artifact::TRAIN_TRUTH))?;
    corrupted.save(out_path(cfg, artifact::TRAIN_CORRUPTED))?;
    test_stack.save(out_path(cfg, artifact::TEST_PHANTOMS))?;
    ood.save(out_path(cfg, artifact::OOD_PHANTOM))?;
    Ok(PhantomCounts {
        train: pairs.len(),
        test: test_stack.images.len(),
    })
}

fn load_stack(cfg: &RunConfig, name: &str, producer: &str) -> Result<ImageStack> {
    let stack = ImageStack::load(require(cfg, name, producer)?)?;
    if stack.side != cfg.grid.n {
        return Err(NettError::InvalidParameter(format!(
            "{name} holds {0}x{0} images but grid.n = {1}; regenerate it",
            stack.side, cfg.grid.n
        )));
    }
    Ok(stack)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<EpochLoss>> {
    cfg.validate()?;
    let truth = load_stack(cfg, artifact::TRAIN_TRUTH, "gen-phantoms")?;
    let corrupted = load_stack(cfg, artifact::TRAIN_CORRUPTED, "gen-phantoms")?;
    if truth.images.len() != corrupted.images.len() {
        return Err(NettError::dims("training pairs", truth.images.len(), corrupted.images.len()));
    }
    let pairs: Vec<TrainingPair> = truth
        .images
        .into_iter()
        .zip(corrupted.images)
        .map(|(t, c)| TrainingPair {
            truth: Phantom {
                image: t,
                side: cfg.grid.n,
                seed: cfg.seed,
                kind: PhantomKind::Ring,
            },
            corrupted: c,
            noise_sigma: cfg.data.train_sigma,
        })
        .collect();
    if pairs.is_empty() {
        return Err(NettError::InvalidParameter("training set is empty".into()));
    }
    let arch = Architecture::new(cfg.regularizer.channels.clone())?;
    let mut tc = cfg.training.clone();
    tc.seed = cfg.seed;
    let outcome = train(&pairs, NetParams::init(arch, cfg.seed), &tc)?;
    let mut csv = Vec::new();
    write_loss_csv(&mut csv, &outcome.log)?;
    outcome.theta.save(out_path(cfg, artifact::NET))?;
    write_file(&out_path(cfg, artifact::TRAIN_LOSS), &csv)?;
    Ok(outcome.log)
}

/// The learned regularizer built from `net.bin`.
pub fn load_regularizer(cfg: &RunConfig) -> Result<NettRegularizer> {
    let theta = NetParams::load(require(cfg, artifact::NET, "train")?)?;
    NettRegularizer::new(theta, tv_params(cfg)?, cfg.grid.n)
}

fn test_noise_index(level: usize, phantom: usize) -> u64 {
    TEST_INDEX | ((level as u64) << 20) | phantom as u64
}

fn load_test_set(cfg: &RunConfig) -> Result<ImageStack> {
    let stack = load_stack(cfg, artifact::TEST_PHANTOMS, "gen-phantoms")?;
    if stack.images.is_empty() {
        return Err(NettError::InvalidParameter(
            "test phantom set is empty (data.test_phantoms = 0)".into(),
        ));
    }
    Ok(stack)
}

/// NETT reconstructions of every test phantom at every noise level.
#[derive(Debug, Clone)]
pub struct Reconstructions {
    /// `reports[level][phantom]`.
    pub reports: Vec<Vec<SolveReport>>,
    pub mse: Vec<Vec<f64>>,
    pub residual: Vec<Vec<f64>>,
}

fn reconstruct_all(
    cfg: &RunConfig,
    a: &ForwardOperator,
    reg: &dyn Regularizer,
    test: &ImageStack,
    mut each: impl FnMut(usize, usize, &[f64], &[f64]) -> Result<()>,
) -> Result<Reconstructions> {
    let levels = cfg.experiment.noise_levels.len();
    let mut out = Reconstructions {
        reports: Vec::with_capacity(levels),
        mse: Vec::with_capacity(levels),
        residual: Vec::with_capacity(levels),
    };
    for (k, (&sigma, &alpha)) in cfg.experiment.noise_levels.iter().zip(&cfg.experiment.alphas).enumerate() {
        let sc = solve_config(cfg, alpha);
        let (mut reports, mut errs, mut res) = (Vec::new(), Vec::new(), Vec::new());
        for (j, x) in test.images.iter().enumerate() {
            let y = simulate_data_indexed(a, x, sigma, cfg.seed, test_noise_index(k, j))?;
            let report = nett_reconstruct(a, &y, reg, &sc)?;
            errs.push(mse(&report.image, x));
            res.push(data_residual(a, &y, &report.image)?);
            each(k, j, x, &y)?;
            reports.push(report);
        }
        out.reports.push(reports);
        out.mse.push(errs);
        out.residual.push(res);
    }
    Ok(out)
}

pub fn cmd_reconstruct(cfg: &RunConfig) -> Result<Reconstructions> {
    cfg.validate()?;
    let a = load_operator(cfg)?;
    let reg = load_regularizer(cfg)?;
    let test = load_test_set(cfg)?;
    let rec = reconstruct_all(cfg, &a, &reg, &test, |_, _, _, _| Ok(()))?;
    let mut csv = String::from("sigma,alpha,phantom,iterations,objective_initial,objective_final,mse,residual\n");
    let mut obj = String::from("sigma,phantom,iter,total,data,reg\n");
    for (k, (&sigma, &alpha)) in cfg.experiment.noise_levels.iter().zip(&cfg.experiment.alphas).enumerate() {
        for (j, report) in rec.reports[k].iter().enumerate() {
            csv.push_str(&format!(
                "{sigma:e},{alpha:e},{j},{},{:e},{:e},{:e},{:e}\n",
                report.iterations(),
                report.objective[0].total,
                report.final_objective().total,
                rec.mse[k][j],
                rec.residual[k][j]
            ));
            for (i, o) in report.objective.iter().enumerate() {
                obj.push_str(&format!("{sigma:e},{j},{i},{:e},{:e},{:e}\n", o.total, o.data, o.reg));
            }
        }
    }
    for (k, &sigma) in cfg.experiment.noise_levels.iter().enumerate() {
        let stack = ImageStack::new(cfg.grid.n, rec.reports[k].iter().map(|r| r.image.clone()).collect())?
            .with_meta("method", "nett")
            .with_meta("sigma", sigma)
            .with_meta("alpha", cfg.experiment.alphas[k]);
        stack.save(out_path(cfg, &format!("recon_level{k}.bin")))?;
    }
    write_file(&out_path(cfg, artifact::RECONSTRUCT), csv.as_bytes())?;
    write_file(&out_path(cfg, artifact::OBJECTIVE), obj.as_bytes())?;
    Ok(rec)
}

/// Mean per-pixel MSE of each method at one noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub sigma: f64,
    pub alpha: f64,
    pub phantoms: usize,
    pub mse_nett: f64,
    pub mse_post: f64,
    pub mse_pinv: f64,
    pub residual_nett: f64,
    pub residual_post: f64,
}

pub fn cmd_noise_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let a = load_operator(cfg)?;
    let reg = load_regularizer(cfg)?;
    let test = load_test_set(cfg)?;
    let levels = cfg.experiment.noise_levels.len();
    let mut post = vec![(0.0, 0.0, 0.0); levels];
    let rec = reconstruct_all(cfg, &a, &reg, &test, |k, _, x, y| {
        let pinv = pseudo_inverse_apply(&a, y)?;
        let p = reg.phi(&pinv)?;
        post[k].0 += mse(&p, x);
        post[k].1 += mse(&pinv, x);
        post[k].2 += data_residual(&a, y, &p)?;
        Ok(())
    })?;
    let count = test.images.len();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let rows: Vec<SweepRow> = (0..levels)
        .map(|k| SweepRow {
            sigma: cfg.experiment.noise_levels[k],
            alpha: cfg.experiment.alphas[k],
            phantoms: count,
            mse_nett: mean(&rec.mse[k]),
            mse_post: post[k].0 / count as f64,
            mse_pinv: post[k].1 / count as f64,
            residual_nett: mean(&rec.residual[k]),
            residual_post: post[k].2 / count as f64,
        })
        .collect();
    let mut csv = String::from(
        "sigma,alpha,phantoms,nett_mse_per_pixel,post_mse_per_pixel,pinv_mse_per_pixel,nett_residual,post_residual\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{:e},{:e},{},{:e},{:e},{:e},{:e},{:e}\n",
            r.sigma, r.alpha, r.phantoms, r.mse_nett, r.mse_post, r.mse_pinv, r.residual_nett, r.residual_post
        ));
    }
    let series = |label: &str, f: fn(&SweepRow) -> f64| Series::new(label, rows.iter().map(|r| (r.sigma, f(r))).collect());
    let plot = LinePlot {
        title: format!("Mean per-pixel MSE over {count} test phantoms"),
        x_label: "noise level sigma".into(),
        y_label: "MSE".into(),
        log_x: false,
        log_y: true,
        series: vec![
            series("NETT", |r| r.mse_nett),
            series("post-processing", |r| r.mse_post),
            series("pseudo-inverse", |r| r.mse_pinv),
        ],
    };
    write_file(&out_path(cfg, artifact::NOISE_SWEEP), csv.as_bytes())?;
    write_file(&out_path(cfg, artifact::NOISE_SWEEP_PLOT), plot.to_svg().as_bytes())?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OodRow {
    pub method: &'static str,
    pub sigma: f64,
    pub alpha: f64,
    pub mse: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OodComparison {
    pub rows: Vec<OodRow>,
    /// Phantom, pseudo-inverse, post-processing, NETT exact, NETT noisy.
    pub panels: ImageStack,
}

impl OodComparison {
    pub fn row(&self, method: &str, sigma: f64) -> Option<&OodRow> {
        self.rows.iter().find(|r| r.method == method && r.sigma == sigma)
    }
}

/// Alpha of the configured noise level closest to `sigma`.
fn alpha_near(cfg: &RunConfig, sigma: f64) -> f64 {
    let e = &cfg.experiment;
    let k = (0..e.noise_levels.len())
        .min_by(|&i, &j| (e.noise_levels[i] - sigma).abs().total_cmp(&(e.noise_levels[j] - sigma).abs()))
        .unwrap_or(0);
    e.alphas.get(k).copied().unwrap_or(SolveConfig::default().alpha)
}

pub const PANEL_LABELS: [&str; 5] = ["phantom", "pinv", "post", "nett_exact", "nett_noisy"];

pub fn cmd_ood_compare(cfg: &RunConfig) -> Result<OodComparison> {
    cfg.validate()?;
    let a = load_operator(cfg)?;
    let reg = load_regularizer(cfg)?;
    let ood = load_stack(cfg, artifact::OOD_PHANTOM, "gen-phantoms")?;
    let x = ood
        .images
        .first()
        .ok_or_else(|| NettError::InvalidParameter("out-of-distribution phantom file is empty".into()))?;
    let mut rows = Vec::new();
    let mut panels = vec![x.clone()];
    for (k, sigma) in [0.0, cfg.experiment.ood_sigma].into_iter().enumerate() {
        let y = simulate_data_indexed(&a, x, sigma, cfg.seed, OOD_NOISE_INDEX + k as u64)?;
        let alpha = alpha_near(cfg, sigma);
        let pinv = pseudo_inverse_apply(&a, &y)?;
        let post = postprocess_reconstruct(&a, &y, &reg)?;
        let nett = nett_reconstruct(&a, &y, &reg, &solve_config(cfg, alpha))?.image;
        for (method, image) in [("pinv", &pinv), ("post", &post), ("nett", &nett)] {
            rows.push(OodRow {
                method,
                sigma,
                alpha: if method == "nett" { alpha } else { 0.0 },
                mse: mse(image, x),
                residual: data_residual(&a, &y, image)?,
            });
        }
        if k == 0 {
            panels.extend([pinv, post, nett]);
        } else {
            panels.push(nett);
        }
    }
    let mut stack = ImageStack::new(cfg.grid.n, panels)?
        .with_meta("panels", PANEL_LABELS.join(","))
        .with_meta("noisy_sigma", cfg.experiment.ood_sigma);
    stack.meta.push(("phantom_seed".into(), cfg.data.ood_seed.to_string()));
    let mut csv = String::from("method,sigma,alpha,mse,residual\n");
    for r in &rows {
        csv.push_str(&format!("{},{:e},{:e},{:e},{:e}\n", r.method, r.sigma, r.alpha, r.mse, r.residual));
    }
    stack.save(out_path(cfg, artifact::OOD_PANELS))?;
    for (label, image) in PANEL_LABELS.iter().zip(&stack.images) {
        write_file(&out_path(cfg, &format!("ood_{label}.pgm")), &to_pgm(image, cfg.grid.n))?;
    }
    write_file(&out_path(cfg, artifact::OOD_COMPARE), csv.as_bytes())?;
    Ok(OodComparison { rows, panels: stack })
}

/// Binary greyscale image with values clipped to `[0, 1]`, row 0 at the top.
pub fn to_pgm(image: &[f64], side: usize) -> Vec<u8> {
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    out.extend(image.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSummary {
    pub study: RateStudy,
    pub slope_in_band: bool,
    pub approx: Vec<ApproxRecord>,
    pub multiscale: Vec<MultiscaleRecord>,
}

impl RateSummary {
    /// First-level error over last-level error of the multiscale run.
    pub fn multiscale_reduction(&self) -> Option<f64> {
        match (self.multiscale.first(), self.multiscale.last()) {
            (Some(f), Some(l)) if self.multiscale.len() > 1 => Some(f.error / l.error),
            _ => None,
        }
    }
}

impl fmt::Display for RateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "rate slope {:.6} band [{}, {}] {}",
            self.study.slope,
            SLOPE_BAND.0,
            SLOPE_BAND.1,
            if self.slope_in_band { "PASS" } else { "FAIL" }
        )?;
        if let Some(r) = self.multiscale_reduction() {
            writeln!(f, "multiscale error reduction {r:.6} over {} levels", self.multiscale.len())?;
        }
        Ok(())
    }
}

/// Ladder over `cfg.ladder.levels` sharing the learned regularizer of the
/// finest level (the identity network when no `net.bin` exists). The level
/// matching `grid.n` reuses `operator.bin` when present.
pub fn build_ladder(cfg: &RunConfig) -> Result<DiscretizationLadder> {
    let fine = *cfg
        .ladder
        .levels
        .last()
        .ok_or_else(|| NettError::InvalidParameter("ladder.levels is empty".into()))?;
    let net_path = out_path(cfg, artifact::NET);
    let theta = if net_path.is_file() {
        NetParams::load(&net_path)?
    } else {
        NetParams::zeros(Architecture::new(cfg.regularizer.channels.clone())?)
    };
    let reg = NettRegularizer::new(theta, tv_params(cfg)?, fine)?;
    let levels = cfg
        .ladder
        .levels
        .iter()
        .map(|&side| {
            // the stored operator already covers the experiment grid
            let operator = if side == cfg.grid.n && out_path(cfg, artifact::OPERATOR).is_file() {
                load_operator(cfg)?
            } else {
                pat_setup(cfg, side)?.build()?
            };
            Ok(Level {
                side,
                operator,
                regularizer: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DiscretizationLadder::new(levels, Box::new(reg))
}

/// Target of the ladder study: a ring phantom projected onto the row space
/// of the finest operator, so that it solves `A x = y` exactly.
pub fn ladder_target(cfg: &RunConfig, ladder: &DiscretizationLadder) -> Result<Vec<f64>> {
    let phantom = gen_ring_phantom_indexed(ladder.fine_side(), cfg.seed, LADDER_INDEX)?;
    ladder.fine_operator().project_domain(&phantom.image)
}

pub fn cmd_rate_study(cfg: &RunConfig) -> Result<RateSummary> {
    cfg.validate()?;
    let r = &cfg.rate;
    let toy = ToyProblem::source_condition(r.dim, r.sigma_min, r.w_scale, cfg.seed)?;
    let study = rate_experiment(&toy, &r.deltas, r.trials, r.c, cfg.seed)?;
    let (mut approx, mut multiscale) = (Vec::new(), Vec::new());
    if !cfg.ladder.levels.is_empty() {
        let ladder = build_ladder(cfg)?;
        let x_plus = ladder_target(cfg, &ladder)?;
        let l = &cfg.ladder;
        let sampling = SamplingConfig {
            bound: l.bound_factor * ladder.regularizer().value(&x_plus)?,
            samples: l.samples,
            perturbation: l.perturbation,
            seed: cfg.seed,
            ..SamplingConfig::default()
        };
        approx = approx_errors(&ladder, &x_plus, &sampling)?;
        let schedule: Vec<ScheduleStep> = (0..l.levels.len())
            .map(|k| ScheduleStep {
                delta: l.deltas[k],
                alpha: l.alphas[k],
                level: k,
            })
            .collect();
        let solve = SolveConfig {
            n_iter: l.n_iter,
            ..solve_config(cfg, l.alphas[0])
        };
        multiscale = multiscale_convergence(&ladder, &x_plus, &schedule, &solve, cfg.seed)?;
    }
    let summary = RateSummary {
        slope_in_band: (SLOPE_BAND.0..=SLOPE_BAND.1).contains(&study.slope),
        study,
        approx,
        multiscale,
    };
    let mut rate_csv = Vec::new();
    write_rate_csv(&mut rate_csv, &summary.study.records)?;
    let plot = LinePlot {
        title: format!("Bregman distance vs noise level, slope {:.3}", summary.study.slope),
        x_label: "delta".into(),
        y_label: "mean Bregman distance".into(),
        log_x: true,
        log_y: true,
        series: vec![Series::new(
            "Tikhonov",
            summary.study.records.iter().map(|r| (r.delta, r.bregman)).collect(),
        )],
    };
    ensure_out(cfg)?;
    write_file(&out_path(cfg, artifact::RATE_STUDY), &rate_csv)?;
    write_file(&out_path(cfg, artifact::RATE_PLOT), plot.to_svg().as_bytes())?;
    if !cfg.ladder.levels.is_empty() {
        let mut approx_csv = Vec::new();
        write_approx_csv(&mut approx_csv, &summary.approx)?;
        let mut ms_csv = Vec::new();
        write_multiscale_csv(&mut ms_csv, &summary.multiscale)?;
        write_file(&out_path(cfg, artifact::APPROX_ERRORS), &approx_csv)?;
        write_file(&out_path(cfg, artifact::MULTISCALE), &ms_csv)?;
    }
    let mut text = Vec::new();
    write!(text, "{summary}")?;
    write_file(&out_path(cfg, artifact::RATE_SUMMARY), &text)?;
    Ok(summary)
}
