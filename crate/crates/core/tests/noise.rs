use cisqg::noise::*;
use cisqg::spectral::norm;
use cisqg::stats::{ks_two_sample, mean, variance};
use cisqg::timeline::{series_holder_seminorm, TimeGrid};
use cisqg::{Error, NormKind, TorusField};
use rand::Rng;

fn unit_grid(steps: usize) -> TimeGrid {
    TimeGrid::new(0.0, 1.0 / steps as f64, steps + 1).unwrap()
}

fn ou_variance(rate: f64, t: f64) -> f64 {
    if rate == 0.0 {
        t
    } else {
        -(-2.0 * rate * t).exp_m1() / (2.0 * rate)
    }
}

#[test]
fn ou_mode_variance_matches_the_closed_form() {
    let (delta, steps, samples) = (-2.0, 16, 10_000u64);
    let grid = TimeGrid::new(0.0, 0.25, steps + 1).unwrap();
    let cfg = NoiseConfig::wiener(delta, 1.0, 2024).with_cutoff(1);
    let paths: Vec<_> = (0..samples)
        .map(|s| gen_wiener_convolution(&cfg, grid, 8, s, false).unwrap())
        .collect();
    for i in [2, 8, steps] {
        let t = grid.time(i);
        for (m, k) in paths[0].modes.iter().enumerate() {
            let kn = (k[0] as f64).hypot(k[1] as f64);
            let want = ou_variance(cfg.rate(*k), t) * kn.powf(2.0 * (delta - 1.0));
            for c in 0..2 {
                let xs: Vec<f64> = paths
                    .iter()
                    .map(|p| p.weights[m] * p.series[m][i][c])
                    .collect();
                let v = variance(&xs);
                let se = want * (2.0 / (samples as f64 - 1.0)).sqrt();
                assert!(
                    (v - want).abs() < 3.0 * se,
                    "t={t} k={k:?} c={c}: {v} vs {want}"
                );
            }
        }
    }
    // |k| = 1, ν = γ = 1, δ = -2: stationary variance 1/2
    let xs: Vec<f64> = paths
        .iter()
        .map(|p| p.weights[0] * p.series[0][steps][0])
        .collect();
    assert!((ou_variance(1.0, 1e3) - 0.5).abs() < 1e-15);
    assert!(
        (variance(&xs) - 0.5).abs()
            < 3.0 * 0.5 * (2.0 / samples as f64).sqrt() + 0.5 * (-8.0f64).exp()
    );
}

#[test]
fn exact_update_is_a_semigroup() {
    for (r, dt) in [(0.3, 0.1), (5.0, 0.02), (40.0, 0.5), (0.0, 0.2)] {
        let full = ou_step(r, dt);
        let half = ou_step(r, dt / 2.0);
        assert!((full.decay - half.decay * half.decay).abs() < 1e-12);
        let v = half.decay * half.decay * half.variance + half.variance;
        assert!((full.variance - v).abs() < 1e-12 * full.variance.max(1e-300));
        let c = half.decay * half.covariance + half.covariance;
        assert!((full.covariance - c).abs() < 1e-12 * full.covariance);
    }
    let free = ou_step(0.0, 0.3);
    assert_eq!((free.decay, free.variance), (1.0, 0.3));
}

#[test]
fn driverless_rate_falls_back_to_brownian_variance() {
    let mut cfg = NoiseConfig::wiener(-2.0, 1.0, 5).with_cutoff(1);
    cfg.nu = 0.0;
    let grid = TimeGrid::new(0.0, 0.5, 3).unwrap();
    let xs: Vec<f64> = (0..4000)
        .map(|s| {
            gen_wiener_convolution(&cfg, grid, 8, s, false)
                .unwrap()
                .series[0][2][0]
        })
        .collect();
    let se = (2.0 / 4000.0f64).sqrt();
    assert!((variance(&xs) - 1.0).abs() < 3.0 * se);
}

fn high_part(f: &TorusField, k0: f64) -> TorusField {
    let mut h = f.clone();
    for (k, _) in f.modes() {
        if (k[0] as f64).hypot(k[1] as f64) <= k0 {
            h.set_coeff(k, 0.0.into());
        }
    }
    h
}

#[test]
fn very_smooth_noise_is_dominated_by_low_modes() {
    let delta = -6.0;
    let cfg = NoiseConfig::wiener(delta, 1.0, 9).with_cutoff(10);
    let grid = unit_grid(8);
    let k0 = 3.0;
    let modes = driven_modes(10);
    // Σ_{|k|>K0} |k|^{2(δ-1)+1} over the full lattice
    let tail: f64 = modes
        .iter()
        .map(|k| (k[0] as f64).hypot(k[1] as f64))
        .filter(|&r| r > k0)
        .map(|r| 2.0 * r.powf(2.0 * (delta - 1.0) + 1.0))
        .sum();
    let mut energy = Vec::new();
    for s in 0..200 {
        let z = gen_wiener_convolution(&cfg, grid, 32, s, false)
            .unwrap()
            .frame(8);
        let hi = high_part(&z, k0);
        let (x_all, x_hi) = (
            norm(&z, NormKind::Xnorm).unwrap(),
            norm(&hi, NormKind::Xnorm).unwrap(),
        );
        assert!(x_hi < 0.02 * x_all, "sample {s}: {x_hi} vs {x_all}");
        energy.push(hi.l2_norm().powi(2));
    }
    assert!(mean(&energy) <= tail, "{} vs {tail}", mean(&energy));
}

#[test]
fn assembled_noise_is_real_and_mean_free() {
    let grid = unit_grid(16);
    for kind in [
        NoiseKind::Wiener,
        NoiseKind::Fbm { hurst: 0.7 },
        NoiseKind::FourthMoment { upsilon: 1.0 },
    ] {
        let cfg = NoiseConfig::wiener(-2.2, 1.0, 3).with_kind(kind);
        let p = generate(&cfg, grid, 32, 0, false).unwrap();
        let z = p.space_time();
        assert_eq!(z.frames[0].l2_norm(), 0.0);
        for f in &z.frames {
            assert_eq!(f.mean(), 0.0);
            assert!(f.hermitian_defect() < 1e-12);
        }
        assert!(z.frames[16].l2_norm() > 0.0);
        assert_eq!(p.modes.len(), driven_modes(32 / 6).len());
    }
}

#[test]
fn generation_is_independent_of_thread_count() {
    let grid = unit_grid(64);
    let run = |threads: usize, kind: NoiseKind| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let cfg = NoiseConfig::wiener(-2.2, 1.0, 77).with_kind(kind);
        pool.install(|| generate(&cfg, grid, 64, 3, true).unwrap())
    };
    for kind in [
        NoiseKind::Wiener,
        NoiseKind::Fbm { hurst: 0.3 },
        NoiseKind::FourthMoment { upsilon: 1.0 },
    ] {
        let (a, b) = (run(1, kind), run(4, kind));
        assert!(a == b, "{kind:?}");
    }
}

#[test]
fn low_modes_do_not_depend_on_the_cutoff() {
    let grid = unit_grid(32);
    let a = gen_wiener_convolution(
        &NoiseConfig::wiener(-2.2, 1.0, 1).with_cutoff(4),
        grid,
        32,
        0,
        false,
    )
    .unwrap();
    let b = gen_wiener_convolution(
        &NoiseConfig::wiener(-2.2, 1.0, 1).with_cutoff(8),
        grid,
        32,
        0,
        false,
    )
    .unwrap();
    for (m, k) in a.modes.iter().enumerate() {
        assert_eq!(*k, b.modes[m]);
        assert!(a.series[m] == b.series[m]);
    }
}

#[test]
fn half_hurst_fbm_matches_wiener_in_law() {
    let grid = unit_grid(64);
    let w = NoiseConfig::wiener(-2.0, 1.0, 31).with_cutoff(1);
    let f = NoiseConfig::wiener(-2.0, 1.0, 32)
        .with_cutoff(1)
        .with_kind(NoiseKind::Fbm { hurst: 0.5 });
    let draw = |cfg: &NoiseConfig| -> Vec<f64> {
        (0..2000)
            .map(|s| generate(cfg, grid, 8, s, false).unwrap().series[0][64][0])
            .collect()
    };
    let (d, p) = ks_two_sample(&draw(&w), &draw(&f));
    assert!(p > 0.01, "D={d} p={p}");
}

#[test]
fn undamped_fbm_mode_is_the_raw_path() {
    let mut cfg = NoiseConfig::wiener(-3.0, 1.0, 8)
        .with_kind(NoiseKind::Fbm { hurst: 0.75 })
        .with_cutoff(2);
    cfg.nu = 0.0;
    let p = gen_fbm_convolution(&cfg, unit_grid(128), 16, 0, true).unwrap();
    let drivers = p.drivers.as_ref().unwrap();
    for (s, d) in p.series.iter().zip(drivers) {
        for (a, b) in s.iter().zip(d) {
            assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
        }
    }
}

#[test]
fn fbm_holder_seminorm_is_grid_stable() {
    let hurst = 0.6;
    let steps = 2048;
    let eig = davies_harte_eigenvalues(hurst, steps).unwrap();
    let fine_grid = unit_grid(steps);
    let coarse_grid = unit_grid(steps / 2);
    let (mut fine, mut coarse) = (Vec::new(), Vec::new());
    for s in 0..20 {
        let (a, _) = fgn_pair(&eig, steps, hurst, fine_grid.dt, &mut mode_rng(4, s, 0));
        let mut path = vec![0.0];
        for d in a {
            path.push(path.last().unwrap() + d);
        }
        let sub: Vec<f64> = path.iter().step_by(2).copied().collect();
        fine.push(series_holder_seminorm(&path, &fine_grid, hurst - 0.05, (0.0, 1.0)).unwrap());
        coarse.push(series_holder_seminorm(&sub, &coarse_grid, hurst - 0.05, (0.0, 1.0)).unwrap());
    }
    let (f, c) = (mean(&fine), mean(&coarse));
    assert!(f.is_finite() && c > 0.0);
    assert!((f - c).abs() <= 0.15 * c, "{f} vs {c}");
}

#[test]
fn embedding_rejects_invalid_hurst() {
    let cfg = NoiseConfig::wiener(-4.0, 1.0, 0).with_kind(NoiseKind::Fbm { hurst: 1.2 });
    assert!(generate(&cfg, unit_grid(8), 16, 0, false).is_err());
    assert!(davies_harte_eigenvalues(0.999, 4096).is_ok());
}

#[test]
fn rademacher_increments_have_fourth_moment_dt_squared() {
    let cfg = NoiseConfig::wiener(-2.2, 1.0, 6).with_kind(NoiseKind::FourthMoment { upsilon: 1.0 });
    let grid = unit_grid(500);
    let p = gen_fourth_moment_convolution(&cfg, grid, 32, 0, true).unwrap();
    let dt2 = grid.dt * grid.dt;
    for d in p.drivers.as_ref().unwrap() {
        for w in d.windows(2) {
            for c in 0..2 {
                assert!(((w[1][c] - w[0][c]).powi(4) - dt2).abs() < 1e-12 * dt2);
            }
        }
    }
}

#[test]
fn fourth_moment_isometry() {
    let samples = 10_000u64;
    let grid = unit_grid(1000);
    let cfg = NoiseConfig::wiener(-2.2, 1.0, 12)
        .with_kind(NoiseKind::FourthMoment { upsilon: 1.0 })
        .with_cutoff(1);
    let paths: Vec<_> = (0..samples)
        .map(|s| gen_fourth_moment_convolution(&cfg, grid, 8, s, false).unwrap())
        .collect();
    for (m, k) in paths[0].modes.iter().enumerate() {
        let want = ou_variance(cfg.rate(*k), 1.0);
        for c in 0..2 {
            let sq: Vec<f64> = paths.iter().map(|p| p.series[m][1000][c].powi(2)).collect();
            let se = (variance(&sq) / samples as f64).sqrt();
            assert!(
                (mean(&sq) - want).abs() < 3.0 * se,
                "k={k:?}: {} vs {want}",
                mean(&sq)
            );
        }
    }
}

#[test]
fn fourth_moment_inequality_holds_on_random_kernels() {
    let upsilon = 1.0;
    let steps = 200;
    let mut krng = mode_rng(99, 0, 0);
    for kernel in 0..20 {
        let (s, t) = (krng.gen_range(0.0..0.5), krng.gen_range(0.6..2.0));
        let (lam, amp, om) = (
            krng.gen_range(0.0..20.0),
            krng.gen_range(0.1..3.0),
            krng.gen_range(0.0..10.0),
        );
        let dt = (t - s) / steps as f64;
        let f: Vec<f64> = (0..steps)
            .map(|i| {
                let r = s + i as f64 * dt;
                amp * (-lam * (t - r)).exp() * (1.0 + 0.5 * (om * r).sin())
            })
            .collect();
        let l2: f64 = f.iter().map(|v| v * v * dt).sum();
        let sup = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rhs = 6.0 * l2 * l2 + sup.powf(4.0 - 2.0 * (1.0 + upsilon)) * l2.powf(1.0 + upsilon);
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
        assert!(upper < 0.75 * rhs, "kernel {kernel}: {upper} vs {rhs}");
    }
}

#[test]
fn only_unit_upsilon_is_implemented() {
    let cfg = NoiseConfig::wiener(-2.2, 1.0, 0).with_kind(NoiseKind::FourthMoment { upsilon: 0.5 });
    let err = generate(&cfg, unit_grid(8), 16, 0, false).unwrap_err();
    assert_eq!(err.to_string(), "only υ=1 driver implemented");
}

#[test]
fn admissibility_is_enforced_in_strict_mode() {
    let ok = NoiseConfig::wiener(-2.2, 1.0, 0);
    assert!(ok.check().unwrap().is_empty());
    let bad = NoiseConfig::wiener(-1.0, 1.0, 0);
    assert_eq!(bad.check().unwrap().len(), 1);
    let strict = NoiseConfig {
        admissibility: Admissibility::Strict,
        ..bad
    };
    assert!(matches!(strict.check(), Err(Error::Inadmissible(_))));
    assert!(matches!(
        generate(&strict, unit_grid(4), 16, 0, false),
        Err(Error::Inadmissible(_))
    ));

    // fractional: δ < -2 - (γ ∨ κ + γ(1 - H)) = -3.1 at γ = 1, κ = 0.6, H = 0.9
    let f = NoiseConfig::wiener(-3.0, 1.0, 0).with_kind(NoiseKind::Fbm { hurst: 0.9 });
    assert!(f.range_violation().is_some());
    assert!(NoiseConfig { delta: -3.2, ..f }.range_violation().is_none());
    // fourth moment: 4(δ-1) + 4σ + 2γ < -2 with σ = 2.6
    let q = NoiseConfig::wiener(-2.0, 1.0, 0).with_kind(NoiseKind::FourthMoment { upsilon: 1.0 });
    assert!(q.range_violation().is_some());
    assert!(NoiseConfig { delta: -3.2, ..q }.range_violation().is_none());
    assert!(NoiseConfig { gamma: 1.5, ..ok }.check().is_err());
}

#[test]
fn zero_noise_has_zero_constant() {
    let grid = unit_grid(32);
    let cfg = NoiseConfig::wiener(-2.2, 1.0, 2);
    let ens: Vec<_> = (0..4)
        .map(|s| {
            gen_wiener_convolution(&cfg, grid, 32, s, false)
                .unwrap()
                .scaled(0.0)
        })
        .collect();
    let est = estimate_cz(&ens, &MomentSpec::new(1, 0.3, 0.6, 4)).unwrap();
    assert_eq!(est.cz.value, 0.0);
    let short = TimeGrid::new(0.0, 0.1, 6).unwrap();
    let p = gen_wiener_convolution(&cfg, short, 32, 0, false).unwrap();
    assert!(matches!(
        estimate_cz(&[p], &MomentSpec::new(1, 0.3, 0.6, 1)),
        Err(Error::WindowTooShort)
    ));
    assert!(estimate_cz(&ens, &MomentSpec::new(1, 0.3, 0.5, 4)).is_err());
}

#[test]
fn noise_constant_is_monotone_in_m_and_stable_in_the_cutoff() {
    let grid = TimeGrid::new(0.0, 1.0 / 32.0, 49).unwrap();
    let samples = 32;
    let spec = MomentSpec::new(1, 0.3, 0.6, samples);
    let at = |k: usize| {
        let cfg = NoiseConfig::wiener(-2.2, 1.0, 41).with_cutoff(k);
        let ens: Vec<_> = (0..samples as u64)
            .map(|s| gen_wiener_convolution(&cfg, grid, 64, s, false).unwrap())
            .collect();
        estimate_cz(&ens, &spec).unwrap()
    };
    let (a, b) = (at(6), at(12));
    assert!(a.cz.value.is_finite() && a.cz.lo <= a.cz.value && a.cz.value <= a.cz.hi);
    assert!(
        (a.cz.value - b.cz.value).abs() <= 0.2 * b.cz.value,
        "{} vs {}",
        a.cz.value,
        b.cz.value
    );
    let mut prev = 0.0;
    for m in [1, 2, 4] {
        let e = estimate_cz_from(b.per_sample.clone(), &MomentSpec { m, ..spec.clone() }).unwrap();
        assert!(e.cz.value >= prev);
        prev = e.cz.value;
    }
}
