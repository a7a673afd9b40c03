//! End-to-end runs: noise ensemble, `C_z`, start calibration, the scheme on
//! every sample, Monte-Carlo estimates, the error ledger and the artifacts
//! written to a run directory.

use crate::controls::{
    check_conditions, deepest_feasible, plan, ConditionReport, ControlParams, Mode, PlannerInput,
};
use crate::diagnostics::{
    check_iteration_inequality, error_ledger, ledger_rows, regularity_probe, write_csv,
    InequalityCheck, RegularityReport, ResidualLedger,
};
use crate::error::{invalid, Error, Result};
use crate::noise::{
    cz_components, estimate_cz_from, generate, CzEstimate, MomentSpec, NoiseConfig, NoisePath,
};
use crate::scheme::{init, run_levels, BlockConfig, Eval, SchemeOpts};
use crate::spectral::{norm_with, NormKind, NormOpts};
use crate::stats::{bootstrap, Estimate};
use crate::timeline::{SpaceTimeField, TimeGrid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Which control parameters drive the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Scale {
    /// Planner `b` and `β` with `a` at its lattice minimum.
    Strict,
    Demo {
        a: u64,
        b: u32,
        beta: f64,
    },
}

impl Default for Scale {
    fn default() -> Self {
        Scale::Demo {
            a: 2,
            b: 2,
            beta: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub planner: PlannerInput,
    pub scale: Scale,
    pub noise: NoiseConfig,
    /// Spatial grid size bounding every level.
    pub grid: usize,
    /// Time step; derived from the deepest mollifier when absent.
    pub dt: Option<f64>,
    pub span: f64,
    pub levels: u32,
    pub samples: usize,
    /// Residual frames per level, spread over the last unit of time.
    pub eval_frames: usize,
    /// Frames (the latest evaluated ones) at which `‖g‖` is measured.
    pub g_norm_frames: usize,
    /// Fixed `C_start`; calibrated from the measured `‖q_0‖` when absent.
    pub c_start: Option<f64>,
    pub resamples: usize,
    /// Thinning of frames for the `C_z` estimate.
    pub cz_stride: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            planner: PlannerInput::new(0.5, 0.6, 1.0),
            scale: Scale::default(),
            noise: NoiseConfig::wiener(-2.2, 1.0, 0).with_cutoff(16),
            grid: 256,
            dt: None,
            span: 2.0,
            levels: 1,
            samples: 16,
            eval_frames: 8,
            g_norm_frames: 2,
            c_start: None,
            resamples: 1000,
            cz_stride: 1,
        }
    }
}

impl RunConfig {
    /// Control parameters before calibration.
    pub fn control_params(&self) -> Result<ControlParams> {
        let mut input = self.planner.clone();
        input.gamma = self.noise.gamma;
        input.nu = self.noise.nu;
        match self.scale {
            Scale::Strict => Ok(plan(&input)?.at_lattice_min()),
            Scale::Demo { a, b, beta } => ControlParams::demo(&input, a, b, beta),
        }
    }

    /// The configured step, or the largest `2^{-k} <= 1/32` resolving the
    /// deepest mollifier `ε = 1/λ_L` with `ε >= 2 dt`.
    pub fn time_step(&self, cp: &ControlParams) -> f64 {
        self.dt.unwrap_or_else(|| {
            let need = 2.0 * cp.lambda_f64(self.levels);
            1.0 / need.log2().ceil().exp2().max(32.0)
        })
    }

    pub fn time_grid(&self, cp: &ControlParams) -> Result<TimeGrid> {
        TimeGrid::covering(0.0, self.span, self.time_step(cp))
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return invalid("at least two samples are needed for confidence intervals");
        }
        if !(self.span >= 1.0) {
            return invalid("the run must span at least one time unit");
        }
        if self.eval_frames == 0 {
            return invalid("at least one evaluation frame is needed");
        }
        if let Some(c) = self.c_start {
            if !(c >= 1.0) {
                return invalid("C_start must be at least 1");
            }
        }
        self.noise.check()?;
        Ok(())
    }
}

/// Per-sample measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub sample: u64,
    /// Sup and Hölder parts entering `C_z`.
    pub cz_parts: (f64, f64),
    /// `sup_t ‖q_n(t)‖_X` per level.
    pub residual: Vec<f64>,
    pub clamp_fraction: Vec<f64>,
    pub domination_excess: Vec<f64>,
    /// `sup_t ‖g_{≤L}(t)‖_{B^{1/2}_{∞,1}}` at the measured frames.
    pub g_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: u32,
    pub r: f64,
    /// `L^m_ω` estimate of `sup_t ‖q_n‖_X`.
    pub residual: Estimate,
    pub max_clamp_fraction: f64,
    pub clamps_valid: bool,
    /// CI upper bound at most `r_n`.
    pub within_r: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Passes {
    pub start_condition: bool,
    pub residual: Vec<bool>,
    pub inequality: Vec<bool>,
    pub monotone: bool,
    pub clamps: bool,
}

impl Passes {
    pub fn all(&self) -> bool {
        self.start_condition
            && self.monotone
            && self.clamps
            && self.residual.iter().all(|&p| p)
            && self.inequality.iter().all(|&p| p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    /// Parameters after calibration.
    pub params: ControlParams,
    pub mode: Mode,
    pub time_grid: TimeGrid,
    pub eval_frames: Vec<usize>,
    pub conditions: ConditionReport,
    pub cz: CzEstimate,
    pub c_start: f64,
    pub calibrated: bool,
    pub levels: Vec<LevelSummary>,
    /// `L^{2m}_ω` estimate of `‖g_{≤L}‖`.
    pub g_norm: Estimate,
    /// Level increments of sample 0 in `C^0_t C^{1/2}_x`.
    pub regularity: Option<RegularityReport>,
    pub ledger: ResidualLedger,
    pub inequality: Vec<InequalityCheck>,
    pub passes: Passes,
    pub samples: Vec<SampleStats>,
}

/// A finished run plus the fields kept for checkpoints.
pub struct RunOutput {
    pub report: RunReport,
    /// `g_{≤n}` of sample 0 at the last two frames, for `n = 1..=L`.
    pub checkpoints: Vec<(u32, SpaceTimeField)>,
    pub timings: Vec<(String, f64)>,
}

fn lm_norm(xs: &[f64], p: f64) -> f64 {
    let v: Vec<f64> = xs.iter().map(|x| x.powf(p)).collect();
    crate::stats::mean(&v).powf(1.0 / p)
}

fn moment(xs: &[f64], p: f64, resamples: usize, seed: u64) -> Estimate {
    bootstrap(xs, |d| lm_norm(d, p), resamples, 0.95, seed)
}

/// The smallest integer `C_start >= 1` with `C_start (C_z^2 + 1) >= ‖q_0‖`,
/// using the CI upper bound of the start residual.
pub fn calibrate_c_start(q0_hi: f64, cz: f64) -> f64 {
    (q0_hi / (cz * cz + 1.0)).ceil().max(1.0)
}

/// Fails with [`Error::LevelInfeasible`] when the requested depth does not fit.
pub fn check_depth(cp: &ControlParams, levels: u32, grid: usize) -> Result<()> {
    if deepest_feasible(cp, grid) < levels {
        return Err(Error::LevelInfeasible);
    }
    Ok(())
}

/// Runs the whole ensemble.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut Vec<(String, f64)>| {
        timings.push((name.to_string(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let cp0 = cfg.control_params()?;
    check_depth(&cp0, cfg.levels, cfg.grid)?;
    let grid = cfg.time_grid(&cp0)?;
    let m = cfg.planner.m;
    let spec = MomentSpec {
        time_stride: cfg.cz_stride.max(1),
        resamples: cfg.resamples,
        ..MomentSpec::new(m, cfg.planner.alpha, cfg.planner.kappa, cfg.samples)
    };
    let opts = SchemeOpts::new(cfg.grid).with_eval(Eval::last_window(&grid, cfg.eval_frames));
    let eval_frames = match &opts.eval {
        Eval::Frames(v) => v.clone(),
        Eval::All => (0..grid.count).collect(),
    };

    // noise, C_z and the start residual
    let first: Vec<(NoisePath, (f64, f64), f64)> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|s| {
            let z = generate(&cfg.noise, grid, cfg.grid, s, false)?;
            let parts = cz_components(&z.space_time_compact(), &spec)?;
            let q0 = init(&z, &cp0, &opts)?.q_sup();
            Ok((z, parts, q0))
        })
        .collect::<Result<_>>()?;
    lap("noise", &mut timings);
    let cz = estimate_cz_from(first.iter().map(|f| f.1).collect(), &spec)?;
    let q0: Vec<f64> = first.iter().map(|f| f.2).collect();
    let q0_est = moment(&q0, m as f64, cfg.resamples, cfg.noise.seed);
    let (c_start, calibrated) = match cfg.c_start {
        Some(c) => (c, false),
        None => (calibrate_c_start(q0_est.hi, cz.cz.value), true),
    };
    let cp = cp0.with_cz(cz.cz.value).with_c_start(c_start);
    lap("calibration", &mut timings);

    let bc = BlockConfig::default().with_c0(cfg.planner.c0)?;
    let g_frames: Vec<usize> = eval_frames
        .iter()
        .rev()
        .take(cfg.g_norm_frames.max(1))
        .copied()
        .collect();
    let besov = NormKind::Besov {
        s: 0.5,
        p: f64::INFINITY,
        q: 1.0,
    };
    let runs: Vec<(
        SampleStats,
        Option<(Vec<(u32, SpaceTimeField)>, Option<RegularityReport>)>,
    )> = first
        .into_par_iter()
        .map(|(z, parts, q0)| {
            let states = run_levels(&z, &cp, &bc, cfg.levels, &opts)?;
            let last = states.last().expect("nonempty");
            let g_norm = g_frames
                .iter()
                .map(|&i| {
                    norm_with(
                        &last.g.frame(i).to_field_compact(),
                        besov,
                        NormOpts::default(),
                    )
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let mut residual = vec![q0];
            residual.extend(states.iter().skip(1).map(|s| s.q_sup()));
            let kept = if z.sample == 0 {
                let tail = TimeGrid::new(grid.time(grid.count - 2), grid.dt, 2)?;
                let checkpoints = states
                    .iter()
                    .skip(1)
                    .map(|s| {
                        let frames = vec![
                            s.g.frame(grid.count - 2).to_field_compact(),
                            s.g.frame(grid.count - 1).to_field_compact(),
                        ];
                        Ok((s.level, SpaceTimeField::new(tail, frames)?))
                    })
                    .collect::<Result<_>>()?;
                let iterates: Vec<_> = states.iter().map(|s| s.g.clone()).collect();
                let regularity = regularity_probe(&iterates, &cp, 0.0, 0.5, &g_frames).ok();
                Some((checkpoints, regularity))
            } else {
                None
            };
            let stats = SampleStats {
                sample: z.sample,
                cz_parts: parts,
                residual,
                clamp_fraction: states.iter().map(|s| s.clamps.fraction()).collect(),
                domination_excess: states.iter().map(|s| s.clamps.domination_excess).collect(),
                g_norm,
            };
            Ok((stats, kept))
        })
        .collect::<Result<_>>()?;
    lap("scheme", &mut timings);

    let mut samples = Vec::with_capacity(runs.len());
    let mut checkpoints = Vec::new();
    let mut regularity = None;
    for (s, k) in runs {
        samples.push(s);
        if let Some((c, r)) = k {
            checkpoints = c;
            regularity = r;
        }
    }
    let levels: Vec<LevelSummary> = (0..=cfg.levels)
        .map(|n| {
            let xs: Vec<f64> = samples.iter().map(|s| s.residual[n as usize]).collect();
            let residual = moment(
                &xs,
                m as f64,
                cfg.resamples,
                cfg.noise.seed.wrapping_add(n as u64 + 1),
            );
            let max_clamp = samples
                .iter()
                .map(|s| s.clamp_fraction[n as usize])
                .fold(0.0, f64::max);
            LevelSummary {
                level: n,
                r: cp.r(n),
                residual,
                max_clamp_fraction: max_clamp,
                clamps_valid: max_clamp <= 1e-3,
                within_r: residual.hi <= cp.r(n),
            }
        })
        .collect();
    let gs: Vec<f64> = samples.iter().map(|s| s.g_norm).collect();
    let g_norm = moment(
        &gs,
        2.0 * m as f64,
        cfg.resamples,
        cfg.noise.seed.wrapping_add(1 << 32),
    );
    let measured: Vec<Option<Estimate>> = levels.iter().map(|l| Some(l.residual)).collect();
    let ledger = error_ledger(&cp, cfg.levels, cz.cz.value, &measured)?;
    let inequality = check_iteration_inequality(&ledger, cfg.planner.c)?;
    let passes = Passes {
        start_condition: levels[0].within_r,
        residual: levels.iter().map(|l| l.within_r).collect(),
        inequality: inequality.iter().map(|c| c.holds).collect(),
        monotone: levels
            .windows(2)
            .all(|w| w[1].residual.value < w[0].residual.value),
        clamps: levels.iter().all(|l| l.clamps_valid),
    };
    lap("ledger", &mut timings);

    let report = RunReport {
        config: cfg.clone(),
        mode: cp.mode,
        conditions: check_conditions(&cp, cfg.levels),
        params: cp,
        time_grid: grid,
        eval_frames,
        cz,
        c_start,
        calibrated,
        levels,
        g_norm,
        regularity,
        ledger,
        inequality,
        passes,
        samples,
    };
    Ok(RunOutput {
        report,
        checkpoints,
        timings,
    })
}

/// One file of the run directory with its content hash.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub mode: Mode,
    pub seed: u64,
    pub config: RunConfig,
    pub params: ControlParams,
    pub inventory: Vec<InventoryEntry>,
    /// Wall-clock seconds per stage; the only content that varies between reruns.
    pub timings: Vec<(String, f64)>,
}

pub const MANIFEST: &str = "manifest.json";
pub const REPORT: &str = "report.json";
pub const LEDGER: &str = "ledger.csv";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn entry(dir: &Path, rel: &str) -> Result<InventoryEntry> {
    let bytes = fs::read(dir.join(rel))?;
    Ok(InventoryEntry {
        path: rel.to_string(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

pub fn checkpoint_name(level: u32) -> String {
    format!("checkpoints/level{level}.tfld")
}

/// Writes report, ledger, checkpoints and the manifest into `dir`.
pub fn write_artifacts(out: &RunOutput, dir: &Path) -> Result<RunManifest> {
    fs::create_dir_all(dir.join("checkpoints"))?;
    let r = &out.report;
    fs::write(dir.join(REPORT), serde_json::to_vec_pretty(r)?)?;
    write_csv(
        &ledger_rows(&r.ledger, &r.inequality),
        BufWriter::new(fs::File::create(dir.join(LEDGER))?),
    )?;
    let mut names = vec![REPORT.to_string(), LEDGER.to_string()];
    for (level, field) in &out.checkpoints {
        let name = checkpoint_name(*level);
        field.write_tfld(&mut BufWriter::new(fs::File::create(dir.join(&name))?))?;
        names.push(name);
    }
    let inventory = names.iter().map(|n| entry(dir, n)).collect::<Result<_>>()?;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        mode: r.mode,
        seed: r.config.noise.seed,
        config: r.config.clone(),
        params: r.params.clone(),
        inventory,
        timings: out.timings.clone(),
    };
    fs::write(dir.join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    Ok(serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)?)
}

pub fn read_report(dir: &Path) -> Result<RunReport> {
    Ok(serde_json::from_slice(&fs::read(dir.join(REPORT))?)?)
}

/// Outcome of re-checking a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    /// Inventory files that are missing.
    pub missing: Vec<PathBuf>,
    /// Inventory files whose hash changed.
    pub modified: Vec<String>,
    /// The ledger re-evaluated from the stored parameters equals the stored one.
    pub ledger_reproduced: bool,
    pub passes: Passes,
}

impl Verification {
    pub fn intact(&self) -> bool {
        self.missing.is_empty() && self.modified.is_empty() && self.ledger_reproduced
    }
}

/// Checks hashes and re-evaluates the error ledger from the manifest.
pub fn verify(dir: &Path) -> Result<Verification> {
    let manifest = read_manifest(dir)?;
    let mut missing = Vec::new();
    let mut modified = Vec::new();
    for e in &manifest.inventory {
        let p = dir.join(&e.path);
        if !p.exists() {
            missing.push(p);
        } else if entry(dir, &e.path)?.sha256 != e.sha256 {
            modified.push(e.path.clone());
        }
    }
    let report = read_report(dir)?;
    let measured: Vec<Option<Estimate>> = report.ledger.rows.iter().map(|r| r.measured).collect();
    let again = error_ledger(
        &manifest.params,
        manifest.config.levels,
        manifest.params.input.cz,
        &measured,
    )?;
    Ok(Verification {
        missing,
        modified,
        ledger_reproduced: again == report.ledger,
        passes: report.passes,
    })
}
