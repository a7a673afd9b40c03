use anyhow::Context;
use cisqg::controls::{
    check_conditions, deepest_feasible, plan, sequences, ControlParams, Mode, PlannerInput,
};
use cisqg::noise::{generate, NoiseConfig, NoiseKind};
use cisqg::pipeline::{self, RunConfig, RunReport, Scale};
use cisqg::timeline::TimeGrid;
use cisqg::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_FAILED: u8 = 1;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_MISSING: u8 = 4;

#[derive(Parser)]
#[command(
    name = "cisqg",
    version,
    about = "Convex-integration laboratory for stochastic SQG on the 2-torus"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Choose the control parameters and check every condition.
    Plan(PlanArgs),
    /// Sample one stochastic convolution and store it.
    Noise(NoiseArgs),
    /// Run the scheme over an ensemble and write the artifacts.
    Run(Box<RunArgs>),
    /// Check artifact hashes and re-evaluate the ledger of a run.
    Verify(DirArgs),
    /// Emit plot data and a summary table for a run.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Demo,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Wiener,
    Fbm,
    FourthMoment,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    kappa: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long = "C", default_value_t = 2.0)]
    c: f64,
    #[arg(long, default_value_t = 1)]
    m: u32,
    #[arg(long, default_value_t = 2.0)]
    c0: f64,
    #[arg(long, default_value_t = 0.0)]
    cz: f64,
    #[arg(long, default_value_t = 1.0)]
    c_start: f64,
    #[arg(long, value_enum, default_value = "strict")]
    mode: ModeArg,
    #[arg(long, required_if_eq("mode", "demo"))]
    a: Option<u64>,
    #[arg(long, required_if_eq("mode", "demo"))]
    b: Option<u32>,
    #[arg(long, required_if_eq("mode", "demo"))]
    beta: Option<f64>,
    /// Deepest level listed in the sequences and conditions.
    #[arg(long, default_value_t = 3)]
    levels: u32,
    /// Grid size against which level feasibility is judged.
    #[arg(long, default_value_t = 1024)]
    grid: usize,
}

/// Noise flags; unset flags keep the configured values.
#[derive(Args, Default)]
struct NoiseFlags {
    #[arg(long = "noise", value_enum)]
    kind: Option<KindArg>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long)]
    upsilon: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Highest driven wavenumber.
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Overall factor `σ` on the noise.
    #[arg(long)]
    amplitude: Option<f64>,
}

impl NoiseFlags {
    fn apply(&self, cfg: &mut NoiseConfig) -> anyhow::Result<()> {
        if let Some(k) = self.kind {
            cfg.kind = match k {
                KindArg::Wiener => NoiseKind::Wiener,
                KindArg::Fbm => NoiseKind::Fbm {
                    hurst: self.hurst.context("--noise fbm needs --hurst")?,
                },
                KindArg::FourthMoment => NoiseKind::FourthMoment {
                    upsilon: self.upsilon.unwrap_or(1.0),
                },
            };
        }
        set(&mut cfg.delta, self.delta);
        set(&mut cfg.nu, self.nu);
        set(&mut cfg.gamma, self.gamma);
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.amplitude, self.amplitude);
        if self.cutoff.is_some() {
            cfg.mode_cutoff = self.cutoff;
        }
        Ok(())
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[derive(Args)]
struct NoiseArgs {
    #[command(flatten)]
    noise: NoiseFlags,
    #[arg(long, default_value_t = 256)]
    grid: usize,
    #[arg(long, default_value_t = 1.0 / 64.0)]
    dt: f64,
    #[arg(long, default_value_t = 2.0)]
    span: f64,
    #[arg(long, default_value_t = 0)]
    sample: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with a run configuration; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    noise: NoiseFlags,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long = "C")]
    c: Option<f64>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    a: Option<u64>,
    #[arg(long)]
    b: Option<u32>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    span: Option<f64>,
    #[arg(long)]
    levels: Option<u32>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    eval_frames: Option<usize>,
    /// Fixed start constant instead of the calibrated one.
    #[arg(long)]
    c_start: Option<f64>,
    #[arg(long)]
    resamples: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text =
                    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        self.noise.apply(&mut cfg.noise)?;
        let pl = &mut cfg.planner;
        set(&mut pl.alpha, self.alpha);
        set(&mut pl.kappa, self.kappa);
        set(&mut pl.c, self.c);
        set(&mut pl.m, self.m);
        set(&mut pl.c0, self.c0);
        match (self.mode, &mut cfg.scale) {
            (Some(ModeArg::Strict), s) => *s = Scale::Strict,
            (Some(ModeArg::Demo), s @ Scale::Strict) => *s = Scale::default(),
            _ => {}
        }
        if let Scale::Demo { a, b, beta } = &mut cfg.scale {
            set(a, self.a);
            set(b, self.b);
            set(beta, self.beta);
        }
        set(&mut cfg.grid, self.grid);
        set(&mut cfg.span, self.span);
        set(&mut cfg.levels, self.levels);
        set(&mut cfg.samples, self.samples);
        set(&mut cfg.eval_frames, self.eval_frames);
        set(&mut cfg.resamples, self.resamples);
        if self.dt.is_some() {
            cfg.dt = self.dt;
        }
        if self.c_start.is_some() {
            cfg.c_start = self.c_start;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct DirArgs {
    dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    dir: PathBuf,
    /// Further runs (typically with scaled noise) for the linearity probe.
    #[arg(long)]
    probe: Vec<PathBuf>,
}

/// An error carrying its exit status.
struct Exit(u8, anyhow::Error);

impl From<anyhow::Error> for Exit {
    fn from(e: anyhow::Error) -> Self {
        let code = match e.downcast_ref::<Error>() {
            Some(Error::LevelInfeasible) => EXIT_INFEASIBLE,
            Some(Error::Io(io)) if io.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING,
            _ => EXIT_FAILED,
        };
        Exit(code, e)
    }
}

impl From<Error> for Exit {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type Outcome = Result<u8, Exit>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("CISQG_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => {
                eprintln!("error: CISQG_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        }
    }
    let res = match cli.cmd {
        Cmd::Plan(a) => cmd_plan(&a),
        Cmd::Noise(a) => cmd_noise(&a),
        Cmd::Run(a) => cmd_run(&a),
        Cmd::Verify(a) => cmd_verify(&a.dir),
        Cmd::Report(a) => cmd_report(&a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(Exit(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn print_json(v: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn cmd_plan(a: &PlanArgs) -> Outcome {
    let input = PlannerInput {
        m: a.m,
        alpha: a.alpha,
        kappa: a.kappa,
        gamma: a.gamma,
        nu: a.nu,
        c: a.c,
        cz: a.cz,
        c0: a.c0,
        c_start: a.c_start,
    };
    let cp = match a.mode {
        ModeArg::Strict => plan(&input)?,
        ModeArg::Demo => ControlParams::demo(
            &input,
            a.a.unwrap_or(2),
            a.b.unwrap_or(2),
            a.beta.unwrap_or(0.1),
        )?,
    };
    let conditions = check_conditions(&cp, a.levels);
    let mut out = json!({
        "params": cp,
        "conditions": conditions,
        "sequences": sequences(&cp, a.levels, a.grid),
        "deepest_feasible": deepest_feasible(&cp, a.grid),
    });
    if cp.mode == Mode::Strict {
        let lm = cp.at_lattice_min();
        out["lattice_min"] = json!({
            "a": lm.lattice_min_a,
            "conditions": check_conditions(&lm, a.levels),
            "sequences": sequences(&lm, a.levels, a.grid),
            "deepest_feasible": deepest_feasible(&lm, a.grid),
        });
    }
    print_json(&out)?;
    for f in conditions.failures() {
        eprintln!(
            "warning: {} fails{}",
            f.name,
            f.level
                .map(|n| format!(" at level {n}"))
                .unwrap_or_default()
        );
    }
    Ok(if cp.mode == Mode::Demo || conditions.all_hold() {
        0
    } else {
        EXIT_INFEASIBLE
    })
}

fn cmd_noise(a: &NoiseArgs) -> Outcome {
    let mut cfg = NoiseConfig::default();
    a.noise.apply(&mut cfg)?;
    for w in cfg.check()? {
        eprintln!("warning: {w}");
    }
    let grid = TimeGrid::covering(0.0, a.span, a.dt)?;
    let z = generate(&cfg, grid, a.grid, a.sample, false)?;
    fs::create_dir_all(&a.out).context("creating the output directory")?;
    let field = z.space_time_compact();
    let mut w = std::io::BufWriter::new(
        fs::File::create(a.out.join("noise.tfld")).context("creating noise.tfld")?,
    );
    field.write_tfld(&mut w)?;
    let sidecar = json!({
        "config": cfg,
        "time_grid": grid,
        "grid": a.grid,
        "stored_grid": field.n(),
        "sample": a.sample,
        "modes": z.modes.len(),
        "band": z.band(),
    });
    fs::write(
        a.out.join("noise.json"),
        serde_json::to_vec_pretty(&sidecar).map_err(anyhow::Error::from)?,
    )
    .context("writing noise.json")?;
    println!(
        "wrote {} frames on a {}-grid to {}",
        grid.count,
        field.n(),
        a.out.display()
    );
    Ok(0)
}

fn feasibility_table(cfg: &RunConfig) -> String {
    let mut s = String::from("level  reach      nyquist  feasible\n");
    if let Ok(cp) = cfg.control_params() {
        for l in sequences(&cp, cfg.levels, cfg.grid) {
            let _ = writeln!(
                s,
                "{:<6} {:<10.1} {:<8} {}",
                l.n,
                l.reach,
                cfg.grid / 2,
                l.feasible
            );
        }
    }
    s
}

fn cmd_run(a: &RunArgs) -> Outcome {
    let cfg = a.config()?;
    for w in cfg.noise.check()? {
        eprintln!("warning: {w}");
    }
    let out = match pipeline::run(&cfg) {
        Err(Error::LevelInfeasible) => {
            eprint!("{}", feasibility_table(&cfg));
            return Err(Exit(
                EXIT_INFEASIBLE,
                anyhow::anyhow!("level {} infeasible on a {}-grid", cfg.levels, cfg.grid),
            ));
        }
        r => r?,
    };
    let manifest = pipeline::write_artifacts(&out, &a.out)?;
    print!("{}", summary(&out.report));
    for e in &manifest.inventory {
        println!("{}  {}", e.sha256, e.path);
    }
    Ok(0)
}

fn cmd_verify(dir: &Path) -> Outcome {
    let v = pipeline::verify(dir)?;
    print_json(&v)?;
    Ok(if !v.missing.is_empty() {
        EXIT_MISSING
    } else if v.intact() {
        0
    } else {
        EXIT_FAILED
    })
}

fn summary(r: &RunReport) -> String {
    let mode = match r.mode {
        Mode::Strict => "strict",
        Mode::Demo => "demo",
    };
    let mut s = format!(
        "mode {mode}, {} samples, C_z = {:.4} [{:.4}, {:.4}], C_start = {}{}\n",
        r.samples.len(),
        r.cz.cz.value,
        r.cz.cz.lo,
        r.cz.cz.hi,
        r.c_start,
        if r.calibrated { " (calibrated)" } else { "" }
    );
    s.push_str("level  r_n          residual     ci_lo        ci_hi        pass\n");
    for l in &r.levels {
        let _ = writeln!(
            s,
            "{:<6} {:<12.6e} {:<12.6e} {:<12.6e} {:<12.6e} {}",
            l.level, l.r, l.residual.value, l.residual.lo, l.residual.hi, l.within_r
        );
    }
    for c in &r.inequality {
        let _ = writeln!(
            s,
            "iteration inequality at level {}: {:.4e} <= {:.4e} {}",
            c.level, c.lhs, c.rhs, c.holds
        );
    }
    let _ = writeln!(
        s,
        "monotone decrease: {}, clamps valid: {}",
        r.passes.monotone, r.passes.clamps
    );
    s
}

fn read_report(dir: &Path) -> Result<RunReport, Exit> {
    for name in [pipeline::REPORT, pipeline::LEDGER] {
        if !dir.join(name).exists() {
            return Err(Exit(
                EXIT_MISSING,
                anyhow::anyhow!("{} not found in {}", name, dir.display()),
            ));
        }
    }
    Ok(pipeline::read_report(dir)?)
}

fn write_dat(path: &Path, header: &str, rows: &[Vec<f64>]) -> anyhow::Result<()> {
    let mut s = format!("# {header}\n");
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:.12e}")).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn cmd_report(a: &ReportArgs) -> Outcome {
    let r = read_report(&a.dir)?;
    let plots = a.dir.join("plots");
    fs::create_dir_all(&plots).context("creating the plot directory")?;

    let residual: Vec<Vec<f64>> = r
        .levels
        .iter()
        .map(|l| {
            vec![
                l.level as f64,
                l.r,
                l.residual.value,
                l.residual.lo,
                l.residual.hi,
            ]
        })
        .collect();
    write_dat(
        &plots.join("residual.dat"),
        "n r_n measured ci_lo ci_hi",
        &residual,
    )?;

    let terms: Vec<Vec<f64>> = r
        .ledger
        .rows
        .iter()
        .filter_map(|row| {
            row.terms.map(|t| {
                std::iter::once(row.level as f64)
                    .chain(t.values())
                    .collect()
            })
        })
        .collect();
    write_dat(
        &plots.join("error_terms.dat"),
        "n miss com time dis trans sto",
        &terms,
    )?;

    let scatter: Vec<Vec<f64>> = r
        .samples
        .iter()
        .map(|s| vec![s.sample as f64, s.cz_parts.0 + s.cz_parts.1, s.g_norm])
        .collect();
    write_dat(
        &plots.join("cz_gnorm.dat"),
        "sample cz_sample g_norm",
        &scatter,
    )?;

    let mut runs = vec![r.clone()];
    for p in &a.probe {
        runs.push(read_report(p)?);
    }
    let linearity: Vec<Vec<f64>> = runs
        .iter()
        .map(|x| {
            vec![
                x.config.noise.amplitude,
                x.cz.cz.value,
                x.cz.cz.lo,
                x.cz.cz.hi,
                x.g_norm.value,
                x.g_norm.lo,
                x.g_norm.hi,
            ]
        })
        .collect();
    write_dat(
        &plots.join("linearity.dat"),
        "sigma cz cz_lo cz_hi g g_lo g_hi",
        &linearity,
    )?;

    let regularity: Vec<Vec<f64>> = r
        .regularity
        .iter()
        .flat_map(|g| {
            g.increments
                .iter()
                .enumerate()
                .map(|(n, v)| vec![(n + 1) as f64, *v, g.predicted_slope])
        })
        .collect();
    write_dat(
        &plots.join("regularity.dat"),
        "n increment predicted_slope",
        &regularity,
    )?;

    print!("{}", summary(&r));
    let failed = r.mode == Mode::Strict && !r.passes.all();
    Ok(if failed { EXIT_FAILED } else { 0 })
}
