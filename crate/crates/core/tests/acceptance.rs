//! Acceptance suite: thirteen criteria, one PASS/FAIL line each.
//!
//! Run a subset by passing criterion numbers, e.g.
//! `cargo test --test acceptance -- 2 8`. Failures are reported but only turn
//! into a non-zero exit status when `ACCEPTANCE_STRICT` is set.

use cisqg::controls::{check_conditions, plan, sequences, ControlParams, PlannerInput};
use cisqg::diagnostics::{
    commutator_form, nonuniqueness_probe, theta_transform, weak_residual, TestFunction,
};
use cisqg::noise::{
    cz_components, davies_harte_eigenvalues, estimate_cz_from, fgn_pair,
    gen_fourth_moment_convolution, gen_wiener_convolution, generate, mode_rng, rademacher,
    MomentSpec, NoiseConfig, NoiseKind, NoisePath,
};
use cisqg::pipeline::{self, calibrate_c_start, check_depth, RunConfig, Scale};
use cisqg::scheme::{
    annulus_leakage, init, run_levels, BlockConfig, Eval, IterationState, SchemeOpts,
};
use cisqg::sewing::{
    sew, sew_interval, sew_with, ConvolutionGerm, FnGerm, SampledPath, DEFAULT_EPS,
};
use cisqg::spectral::{apply_multiplier, lp_decompose, Multiplier, TorusField};
use cisqg::stats::{bootstrap_indices, ks_two_sample, mean, variance};
use cisqg::timeline::TimeGrid;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

type Check = Result<(bool, String), String>;

fn input() -> PlannerInput {
    PlannerInput::new(0.5, 0.6, 1.0)
}

fn random_field(n: usize, band: i64, seed: u64) -> TorusField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = TorusField::zeros(n);
    for k1 in -band..=band {
        for k2 in 0..=band {
            if k2 == 0 && k1 <= 0 {
                continue;
            }
            f.add_real_mode(
                [k1, k2],
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            );
        }
    }
    f
}

fn max_rel(a: &TorusField, b: &TorusField) -> f64 {
    a.sub(b).l2_norm() / b.l2_norm()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn spectral() -> Check {
    let f = random_field(64, 31, 1);
    let mean_free = f.clone().without_mean();
    let mut worst: f64 = 0.0;
    for s in [0.5, 1.0, 1.7] {
        let up = apply_multiplier(&mean_free, &Multiplier::LambdaPow(s)).map_err(err)?;
        let back = apply_multiplier(&up, &Multiplier::LambdaPow(-s)).map_err(err)?;
        worst = worst.max(max_rel(&back, &mean_free));
    }
    let lf = apply_multiplier(&mean_free, &Multiplier::LambdaPow(-1.0)).map_err(err)?;
    let mut riesz: f64 = 0.0;
    for j in [1, 2] {
        let a = apply_multiplier(&f, &Multiplier::RieszPerp(j)).map_err(err)?;
        let b = apply_multiplier(&lf, &Multiplier::PerpGrad(j)).map_err(err)?;
        riesz = riesz.max(max_rel(&a, &b));
    }
    let lp = max_rel(&lp_decompose(&f).reconstruct(), &f);
    let ok = worst < 1e-12 && riesz < 1e-12 && lp < 1e-12;
    Ok((
        ok,
        format!("round trip {worst:.1e}, Riesz identity {riesz:.1e}, LP reconstruction {lp:.1e}"),
    ))
}

fn odd_riesz() -> Check {
    let ratio = |k: [i64; 2], j: usize| -> Result<Complex64, String> {
        let f = TorusField::cos_mode(16, k);
        let g = apply_multiplier(&f, &Multiplier::RieszOdd(j)).map_err(err)?;
        Ok(g.coeff(k) / f.coeff(k))
    };
    let (a, b) = (ratio([1, 0], 1)?, ratio([1, 1], 2)?);
    let ok = a == Complex64::new(-25.0 / 12.0, 0.0) && b == Complex64::new(2.0, 0.0);
    Ok((ok, format!("R1o(1,0) = {}, R2o(1,1) = {}", a.re, b.re)))
}

fn localization() -> Check {
    let cp = plan(&input()).map_err(err)?.at_lattice_min();
    let n = 1024;
    let grid = TimeGrid::covering(0.0, 0.25, 1.0 / 256.0).map_err(err)?;
    let z = generate(
        &NoiseConfig::wiener(-2.2, 1.0, 5).with_cutoff(8),
        grid,
        64,
        0,
        false,
    )
    .map_err(err)?;
    let opts = SchemeOpts::new(n).with_eval(Eval::Frames(vec![]));
    let states = run_levels(&z, &cp, &BlockConfig::default(), 1, &opts).map_err(err)?;
    let block = states[1].block.as_ref().ok_or("no block at level 1")?;
    let centre = 5.0 * block.lambda as f64;
    let mut leak: f64 = 0.0;
    for i in 0..grid.count {
        leak = leak.max(annulus_leakage(
            &block.field(i, n).map_err(err)?,
            centre - block.mu,
            centre + block.mu,
        ));
    }
    let level1 = leak < 1e-12;
    let seq = sequences(&cp, 2, n);
    let level2 = check_depth(&cp, 2, n);
    let detail = format!(
        "level 1 leakage {leak:.1e} over {} frames; level 2: {}",
        grid.count,
        match &level2 {
            Ok(()) => "feasible".to_string(),
            Err(e) => format!("{e}: reach {:.3e} exceeds Nyquist {}", seq[2].reach, n / 2),
        }
    );
    Ok((level1 && level2.is_ok(), detail))
}

fn demo_noise(seed: u64, grid: TimeGrid, cutoff: usize) -> Result<NoisePath, String> {
    generate(
        &NoiseConfig::wiener(-2.2, 1.0, seed).with_cutoff(cutoff),
        grid,
        256,
        0,
        false,
    )
    .map_err(err)
}

fn causality() -> Check {
    let demo = ControlParams::demo(&input(), 2, 2, 0.1).map_err(err)?;
    let grid = TimeGrid::covering(0.0, 1.0, 1.0 / 32.0).map_err(err)?;
    let cut = 12;
    let mut bad = Vec::new();

    // noise: a longer horizon draws the same past
    let longer = TimeGrid::covering(0.0, 2.0, 1.0 / 32.0).map_err(err)?;
    let (short, long) = (demo_noise(3, grid, 6)?, demo_noise(3, longer, 6)?);
    if short
        .series
        .iter()
        .zip(&long.series)
        .any(|(a, b)| a[..grid.count] != b[..grid.count])
    {
        bad.push("noise");
    }

    let z = short;
    let mut w = z.clone();
    for s in &mut w.series {
        for v in s.iter_mut().skip(cut + 1) {
            v[0] += 0.5;
            v[1] -= 0.25;
        }
    }
    let bc = BlockConfig::default();
    let opts = SchemeOpts::new(256);
    let a = run_levels(&z, &demo, &bc, 2, &opts).map_err(err)?;
    let b = run_levels(&w, &demo, &bc, 2, &opts).map_err(err)?;
    for (sa, sb) in a.iter().zip(&b) {
        let past = |s: &IterationState, i: usize| {
            (s.z_trunc.frames[i].clone(), s.q[i].clone(), s.g.frame(i))
        };
        if (0..=cut).any(|i| sa.z_trunc.frames[i] != sb.z_trunc.frames[i]) {
            bad.push("truncated noise");
        }
        if let (Some(ba), Some(bb)) = (&sa.block, &sb.block) {
            let amps = ba
                .series
                .parts
                .iter()
                .zip(&bb.series.parts)
                .any(|(p, q)| (0..=cut).any(|i| p.amp.frames[i] != q.amp.frames[i]));
            if amps {
                bad.push("amplitudes");
            }
        }
        if (0..=cut).any(|i| past(sa, i) != past(sb, i)) {
            bad.push("iterate or residual");
        }
        if sa.q[grid.count - 1] == sb.q[grid.count - 1] {
            bad.push("perturbation had no effect");
        }
    }
    bad.dedup();
    let detail = if bad.is_empty() {
        format!("noise, truncation, amplitudes, iterates and residuals bit-identical through frame {cut} at levels 0..2")
    } else {
        format!("differences in: {}", bad.join(", "))
    };
    Ok((bad.is_empty(), detail))
}

fn ou_law() -> Check {
    let (delta, steps, samples) = (-2.0, 16, 10_000u64);
    let grid = TimeGrid::new(0.0, 0.25, steps + 1).map_err(err)?;
    let cfg = NoiseConfig::wiener(delta, 1.0, 2024).with_cutoff(2);
    let paths: Vec<_> = (0..samples)
        .map(|s| gen_wiener_convolution(&cfg, grid, 8, s, false))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for i in [2, 8, steps] {
        let t = grid.time(i);
        for (m, k) in paths[0].modes.iter().enumerate() {
            let kn = (k[0] as f64).hypot(k[1] as f64);
            let rate = cfg.nu * kn.powf(cfg.gamma);
            let want = -(-2.0 * rate * t).exp_m1() / (2.0 * rate) * kn.powf(2.0 * (delta - 1.0));
            for c in 0..2 {
                let xs: Vec<f64> = paths
                    .iter()
                    .map(|p| p.weights[m] * p.series[m][i][c])
                    .collect();
                let se = want * (2.0 / (samples as f64 - 1.0)).sqrt();
                worst = worst.max((variance(&xs) - want).abs() / se);
                count += 1;
            }
        }
    }
    Ok((
        worst < 3.0,
        format!(
            "{count} mode/time/component variances, worst deviation {worst:.2} standard errors"
        ),
    ))
}

fn fbm_path(hurst: f64, steps: usize, seed: u64) -> Result<SampledPath, String> {
    let grid = TimeGrid::new(0.0, 1.0 / steps as f64, steps + 1).map_err(err)?;
    let eig = davies_harte_eigenvalues(hurst, steps).map_err(err)?;
    let (a, _) = fgn_pair(&eig, steps, hurst, grid.dt, &mut mode_rng(seed, 0, 0));
    let mut v = vec![0.0];
    for d in a {
        v.push(v.last().unwrap() + d);
    }
    SampledPath::new(grid, v).map_err(err)
}

fn sewing() -> Check {
    let cells = TimeGrid::new(0.0, 0.125, 9).map_err(err)?;
    let smooth = |r: f64| (4.0 * r).sin() + 0.3 * r;
    let g = FnGerm {
        f: move |s: f64, r: f64| (-2.5 * (1.0 - s)).exp() * (smooth(r) - smooth(s)),
        exponents: (1.0, 2.0),
        domain: cells,
    };
    let r = sew_with(&g, 30, 1e-13).map_err(err)?;
    let mut additivity: f64 = 0.0;
    for (a, b, c) in [(0, 3, 8), (1, 4, 6), (2, 2, 7), (0, 5, 5)] {
        let (ta, tb, tc) = (a as f64 / 8.0, b as f64 / 8.0, c as f64 / 8.0);
        let i_ab = sew_interval(&g, ta, tb, 30, 1e-13).map_err(err)?.0;
        let i_bc = sew_interval(&g, tb, tc, 30, 1e-13).map_err(err)?.0;
        let i_ac = sew_interval(&g, ta, tc, 30, 1e-13).map_err(err)?.0;
        additivity = additivity
            .max((i_ab + i_bc - i_ac).abs())
            .max((r.path[c] - r.path[a] - i_ac).abs());
    }
    let mut spread: f64 = 0.0;
    for (h, seed) in [(0.3, 11), (0.5, 12), (0.7, 13)] {
        let fine = fbm_path(h, 512, seed)?;
        let unit = TimeGrid::new(0.0, 1.0 / 256.0, 257).map_err(err)?;
        let coarse = SampledPath::new(unit, fine.values.iter().step_by(2).copied().collect())
            .map_err(err)?;
        let constant = |p: &SampledPath| -> Result<f64, String> {
            let beta = |r: f64| p.at(r);
            let germ = ConvolutionGerm {
                beta: &beta,
                cells: p.grid,
                rate: 3.0,
                t: 1.0,
                hurst: h,
                eps: DEFAULT_EPS,
            };
            Ok(sew(&germ, 10).map_err(err)?.apriori_constant)
        };
        let (a, b) = (constant(&coarse)?, constant(&fine)?);
        spread = spread.max((a - b).abs() / a.max(b));
    }
    let grid = TimeGrid::new(0.0, 1.0 / 64.0, 65).map_err(err)?;
    let w = NoiseConfig::wiener(-2.0, 1.0, 31).with_cutoff(1);
    let f = NoiseConfig::wiener(-2.0, 1.0, 32)
        .with_cutoff(1)
        .with_kind(NoiseKind::Fbm { hurst: 0.5 });
    let draw = |cfg: &NoiseConfig| -> Result<Vec<f64>, String> {
        (0..2000)
            .map(|s| Ok(generate(cfg, grid, 8, s, false).map_err(err)?.series[0][64][0]))
            .collect()
    };
    let (d, p) = ks_two_sample(&draw(&w)?, &draw(&f)?);
    let ok = additivity < 1e-10 && spread <= 0.2 && p > 0.01;
    Ok((ok, format!("additivity {additivity:.1e}; a-priori constant spread {:.1}%; KS D = {d:.3}, p = {p:.3}", 100.0 * spread)))
}

fn fourth_moment() -> Check {
    let samples = 10_000u64;
    let grid = TimeGrid::new(0.0, 1e-3, 1001).map_err(err)?;
    let cfg = NoiseConfig::wiener(-2.2, 1.0, 12)
        .with_kind(NoiseKind::FourthMoment { upsilon: 1.0 })
        .with_cutoff(1);
    let paths: Vec<_> = (0..samples)
        .map(|s| gen_fourth_moment_convolution(&cfg, grid, 8, s, false))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let mut iso: f64 = 0.0;
    for (m, k) in paths[0].modes.iter().enumerate() {
        let rate = cfg.rate(*k);
        let want = -(-2.0 * rate).exp_m1() / (2.0 * rate);
        for c in 0..2 {
            let sq: Vec<f64> = paths.iter().map(|p| p.series[m][1000][c].powi(2)).collect();
            iso = iso.max((mean(&sq) - want).abs() / (variance(&sq) / samples as f64).sqrt());
        }
    }
    let mut krng = mode_rng(99, 0, 0);
    let mut margin = f64::INFINITY;
    for kernel in 0..20 {
        let (s, t) = (krng.gen_range(0.0..0.5), krng.gen_range(0.6..2.0));
        let (lam, amp, om) = (
            krng.gen_range(0.0..20.0),
            krng.gen_range(0.1..3.0),
            krng.gen_range(0.0..10.0),
        );
        let steps = 200;
        let dt = (t - s) / steps as f64;
        let f: Vec<f64> = (0..steps)
            .map(|i| {
                let r = s + i as f64 * dt;
                amp * (-lam * (t - r)).exp() * (1.0 + 0.5 * (om * r).sin())
            })
            .collect();
        let l2: f64 = f.iter().map(|v| v * v * dt).sum();
        let sup = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let p = 2.0;
        let rhs = 6.0 * l2 * l2 + sup.powf(4.0 - 2.0 * p) * l2.powf(p);
        let mut rng = mode_rng(100, kernel, 0);
        let h = dt.sqrt();
        let m4: Vec<f64> = (0..20_000)
            .map(|_| {
                f.iter()
                    .map(|v| v * h * rademacher(&mut rng))
                    .sum::<f64>()
                    .powi(4)
            })
            .collect();
        let upper = mean(&m4) + 3.0 * (variance(&m4) / m4.len() as f64).sqrt();
        margin = margin.min(rhs / upper);
    }
    let ok = iso < 3.0 && margin > 1.0;
    Ok((ok, format!("isometry within {iso:.2} standard errors; inequality holds on 20 kernels, smallest rhs/lhs {margin:.2}")))
}

fn planner() -> Check {
    let cp = plan(&input()).map_err(err)?;
    let report = check_conditions(&cp, 3);
    let mut missing = Vec::new();
    for name in [
        "R1",
        "R2",
        "R3.lattice",
        "R3.mu",
        "R3.growth",
        "A.9",
        "A.100",
        "A.48",
        "Eta1",
        "Eta2",
        "Eta3",
        "Eta4",
        "Eta5",
        "Eta6",
    ] {
        if !report.checks.iter().any(|c| c.name == name) {
            missing.push(name);
        }
    }
    let ok = cp.b == 4
        && (cp.beta - 0.0125).abs() < 1e-15
        && cp.lattice_min_a == 3
        && report.all_hold()
        && missing.is_empty();
    Ok((
        ok,
        format!(
            "b = {}, β = {}, lattice-min a = {}, ln a = {:.2}, {} checks all hold: {}",
            cp.b,
            cp.beta,
            cp.lattice_min_a,
            cp.ln_a(),
            report.checks.len(),
            report.all_hold()
        ),
    ))
}

fn residuals() -> Check {
    let strict = RunConfig {
        scale: Scale::Strict,
        grid: 1024,
        levels: 1,
        samples: 64,
        eval_frames: 8,
        g_norm_frames: 1,
        ..RunConfig::default()
    };
    let s = pipeline::run(&strict).map_err(err)?.report;
    let (l0, l1) = (&s.levels[0], &s.levels[1]);
    let demo = RunConfig {
        levels: 2,
        ..RunConfig::default()
    };
    let d = pipeline::run(&demo).map_err(err)?.report;
    let vals: Vec<String> = d
        .levels
        .iter()
        .map(|l| format!("{:.3e}", l.residual.value))
        .collect();
    let ok = l0.within_r && l1.within_r && d.passes.monotone;
    Ok((
        ok,
        format!(
            "strict: C_start {} (C_z {:.3}), ‖q0‖ ≤ {:.4} vs r0 {:.4}, ‖q1‖ ≤ {:.4} vs r1 {:.4}; demo ‖q_n‖ = [{}] monotone: {}",
            s.c_start,
            s.cz.cz.value,
            l0.residual.hi,
            l0.r,
            l1.residual.hi,
            l1.r,
            vals.join(", "),
            d.passes.monotone
        ),
    ))
}

/// Sum of `|D|` over a few low test modes.
fn defect(g: &cisqg::scheme::Iterate, z: &NoisePath, cp: &ControlParams) -> Result<f64, String> {
    let mut total = 0.0;
    for j in [[1i64, 0], [0, 1], [1, 1], [2, 1]] {
        let xi = TestFunction::centered(j, &z.grid).map_err(err)?;
        total += weak_residual(g, z, &xi, cp.input.nu, cp.input.gamma)
            .map_err(err)?
            .abs();
    }
    Ok(total)
}

fn calibrated(cfg: &RunConfig, paths: &[NoisePath]) -> Result<ControlParams, String> {
    let cp = cfg.control_params().map_err(err)?;
    let spec = MomentSpec::new(1, cfg.planner.alpha, cfg.planner.kappa, paths.len());
    let parts = paths
        .iter()
        .map(|z| cz_components(&z.space_time_compact(), &spec))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let cz = estimate_cz_from(parts, &spec).map_err(err)?.cz.value;
    let opts = SchemeOpts::new(cfg.grid);
    let q0 = paths
        .iter()
        .map(|z| Ok(init(z, &cp, &opts).map_err(err)?.q_sup()))
        .collect::<Result<Vec<f64>, String>>()?;
    let hi = q0.iter().fold(0.0f64, |m, x| m.max(*x));
    Ok(cp.with_cz(cz).with_c_start(calibrate_c_start(hi, cz)))
}

fn weak_defect() -> Check {
    let cfg = RunConfig {
        levels: 2,
        ..RunConfig::default()
    };
    let cp0 = cfg.control_params().map_err(err)?;
    let grid = cfg.time_grid(&cp0).map_err(err)?;
    let deepest = cisqg::controls::deepest_feasible(&cp0, cfg.grid).min(cfg.levels);
    let paths: Vec<NoisePath> = (0..20)
        .map(|seed| {
            generate(
                &NoiseConfig {
                    seed,
                    ..cfg.noise.clone()
                },
                grid,
                cfg.grid,
                0,
                false,
            )
            .map_err(err)
        })
        .collect::<Result<_, _>>()?;
    let cp = calibrated(&cfg, &paths)?;
    let opts = SchemeOpts::new(cfg.grid).with_eval(Eval::Frames(vec![]));
    let bc = BlockConfig::default();
    let mut decreased = 0;
    let mut ratios = Vec::new();
    for z in &paths {
        let states = run_levels(z, &cp, &bc, deepest, &opts).map_err(err)?;
        let d0 = defect(&states[0].g, z, &cp)?;
        let dn = defect(&states.last().unwrap().g, z, &cp)?;
        ratios.push(dn / d0);
        if dn < d0 {
            decreased += 1;
        }
    }
    ratios.sort_by(f64::total_cmp);

    let mut annihilation: f64 = 0.0;
    for k in [[3i64, 1], [0, 2], [4, -5], [7, 7]] {
        let theta = apply_multiplier(&TorusField::cos_mode(32, k), &Multiplier::LambdaPow(1.0))
            .map_err(err)?;
        for j in [[1i64, 0], [6, 2], [-8, 10], [2, 3]] {
            annihilation = annihilation.max(commutator_form(&theta, j).abs());
        }
    }
    let z = &paths[0];
    let g = run_levels(z, &cp, &bc, 1, &opts)
        .map_err(err)?
        .pop()
        .unwrap()
        .g;
    let mut transform: f64 = 0.0;
    for j in [[1i64, 0], [1, 1], [0, 2]] {
        let xi = TestFunction::centered(j, &grid).map_err(err)?;
        let d = weak_residual(&g, z, &xi, cp.input.nu, cp.input.gamma).map_err(err)?;
        let t = theta_transform(&g, z, &xi, cp.input.nu, cp.input.gamma).map_err(err)?;
        transform = transform.max((d.value() - t.value()).abs() / d.abs());
    }
    let ok = decreased >= 16 && annihilation < 1e-12 && transform < 1e-8;
    Ok((
        ok,
        format!(
            "defect level 0 → {deepest} decreased for {decreased}/20 seeds (median ratio {:.3}); single-mode form {annihilation:.1e}; transform agreement {transform:.1e}",
            ratios[ratios.len() / 2]
        ),
    ))
}

/// Least-squares `y = c0 + c1 x + c2 x^2`.
fn quadratic_fit(x: &[f64], y: &[f64]) -> [f64; 3] {
    let mut a = [[0.0; 4]; 3];
    for (&xi, &yi) in x.iter().zip(y) {
        let p = [1.0, xi, xi * xi];
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] += p[r] * p[c];
            }
            a[r][3] += p[r] * yi;
        }
    }
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..4 {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    [a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]]
}

fn linearity() -> Check {
    let sigmas = [0.5, 1.0, 2.0, 4.0];
    let mut reports = Vec::new();
    for &s in &sigmas {
        let mut cfg = RunConfig {
            samples: 32,
            ..RunConfig::default()
        };
        cfg.noise.amplitude = s;
        reports.push(pipeline::run(&cfg).map_err(err)?.report);
    }
    let l2 = |v: &mut dyn Iterator<Item = f64>| -> f64 {
        let xs: Vec<f64> = v.map(|x| x * x).collect();
        mean(&xs).sqrt()
    };
    let fit = |idx: &[usize]| -> [f64; 3] {
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for r in &reports {
            let s = &r.samples;
            x.push(
                l2(&mut idx.iter().map(|&i| s[i].cz_parts.0))
                    + l2(&mut idx.iter().map(|&i| s[i].cz_parts.1)),
            );
            y.push(l2(&mut idx.iter().map(|&i| s[i].g_norm)));
        }
        quadratic_fit(&x, &y)
    };
    let n = reports[0].samples.len();
    let c2 = bootstrap_indices(n, |idx| fit(idx)[2], 2000, 0.95, 11);
    let slope = fit(&(0..n).collect::<Vec<_>>())[1];
    let points: Vec<String> = reports
        .iter()
        .map(|r| format!("({:.3}, {:.3})", r.cz.cz.value, r.g_norm.value))
        .collect();
    let ok = c2.lo <= 0.0 && 0.0 <= c2.hi;
    Ok((
        ok,
        format!(
            "(C_z, ‖g‖) = {}; quadratic coefficient {:.3e} [{:.3e}, {:.3e}], slope {slope:.3}",
            points.join(" "),
            c2.value,
            c2.lo,
            c2.hi
        ),
    ))
}

fn nonuniqueness() -> Check {
    let cfg = RunConfig::default();
    let cp0 = cfg.control_params().map_err(err)?;
    let grid = cfg.time_grid(&cp0).map_err(err)?;
    let z = generate(&cfg.noise, grid, cfg.grid, 0, false).map_err(err)?;
    let cp = calibrated(&cfg, std::slice::from_ref(&z))?;
    let opts = SchemeOpts::new(cfg.grid);
    let bc = BlockConfig::default();
    let xi = TestFunction::centered([1, 0], &grid).map_err(err)?;
    let frames = match Eval::last_window(&grid, 8) {
        Eval::Frames(v) => v,
        Eval::All => unreachable!(),
    };
    let rep = nonuniqueness_probe(&z, &cp, &bc, [2.0, 8.0], 1, &opts, &xi, &frames).map_err(err)?;
    let quiet = opts.clone().with_eval(Eval::Frames(frames.clone()));
    let a = run_levels(&z, &cp, &bc, 1, &quiet)
        .map_err(err)?
        .pop()
        .unwrap();
    let b = run_levels(&z, &cp, &bc, 1, &quiet)
        .map_err(err)?
        .pop()
        .unwrap();
    let identical = a.g == b.g && a.q == b.q && a.q_xnorm == b.q_xnorm;
    let ok = rep.difference > 1e-6 && rep.defect_ratio <= 10.0 && identical;
    Ok((
        ok,
        format!(
            "‖g(C0=2) - g(C0=8)‖ = {:.3e}; defects {:.3e} and {:.3e} (ratio {:.2}); identical reruns bit-identical: {identical}",
            rep.difference, rep.defects[0], rep.defects[1], rep.defect_ratio
        ),
    ))
}

fn determinism() -> Check {
    let cfg = RunConfig {
        noise: NoiseConfig {
            seed: 7,
            ..RunConfig::default().noise
        },
        ..RunConfig::default()
    };
    let tmp = tempfile::tempdir().map_err(err)?;
    let start = Instant::now();
    let first = pipeline::run(&cfg).map_err(err)?;
    let elapsed = start.elapsed().as_secs_f64();
    let a = pipeline::write_artifacts(&first, &tmp.path().join("a")).map_err(err)?;
    let b = pipeline::write_artifacts(&pipeline::run(&cfg).map_err(err)?, &tmp.path().join("b"))
        .map_err(err)?;
    let same = a.inventory == b.inventory;
    Ok((
        elapsed < 60.0 && same,
        format!(
            "demo pipeline in {elapsed:.1} s; {} artifacts byte-identical on rerun: {same}",
            a.inventory.len()
        ),
    ))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: f64,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "spectral correctness",
            budget: 1.0,
            run: spectral,
        },
        Criterion {
            id: 2,
            name: "odd Riesz symbols",
            budget: 1.0,
            run: odd_riesz,
        },
        Criterion {
            id: 3,
            name: "frequency localization",
            budget: 300.0,
            run: localization,
        },
        Criterion {
            id: 4,
            name: "causality",
            budget: 60.0,
            run: causality,
        },
        Criterion {
            id: 5,
            name: "OU convolution law",
            budget: 120.0,
            run: ou_law,
        },
        Criterion {
            id: 6,
            name: "sewing",
            budget: 300.0,
            run: sewing,
        },
        Criterion {
            id: 7,
            name: "fourth-moment class",
            budget: 120.0,
            run: fourth_moment,
        },
        Criterion {
            id: 8,
            name: "planner",
            budget: 1.0,
            run: planner,
        },
        Criterion {
            id: 9,
            name: "residual behaviour",
            budget: 900.0,
            run: residuals,
        },
        Criterion {
            id: 10,
            name: "weak-solution defect",
            budget: 600.0,
            run: weak_defect,
        },
        Criterion {
            id: 11,
            name: "linearity surrogate",
            budget: 1200.0,
            run: linearity,
        },
        Criterion {
            id: 12,
            name: "non-uniqueness probe",
            budget: 600.0,
            run: nonuniqueness,
        },
        Criterion {
            id: 13,
            name: "determinism and performance",
            budget: 60.0,
            run: determinism,
        },
    ];
    let wanted: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    let mut ran = 0;
    for c in criteria
        .iter()
        .filter(|c| wanted.is_empty() || wanted.contains(&c.id))
    {
        let start = Instant::now();
        let outcome = (c.run)();
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match outcome {
            Ok((ok, d)) if secs <= c.budget => (ok, d),
            Ok((_, d)) => (false, format!("{d}; over the {:.0} s budget", c.budget)),
            Err(e) => (false, format!("error: {e}")),
        };
        ran += 1;
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:>2} {} ({secs:.1} s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name
        );
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
