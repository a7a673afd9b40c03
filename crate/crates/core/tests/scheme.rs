use cisqg::controls::{plan, ControlParams, PlannerInput};
use cisqg::error::Error;
use cisqg::noise::{generate, NoiseConfig, NoisePath};
use cisqg::scheme::*;
use cisqg::spectral::{xnorm_parts, NormOpts, TorusField};
use cisqg::timeline::{SpaceTimeField, TimeGrid};
use std::f64::consts::{PI, SQRT_2};

fn input() -> PlannerInput {
    PlannerInput::new(0.5, 0.6, 1.0)
}

/// Time-constant noise path holding `Σ cos(k·x)` over `modes`.
fn fixed_path(modes: &[[i64; 2]], grid: TimeGrid, n: usize) -> NoisePath {
    let mut z = generate(
        &NoiseConfig::wiener(-2.2, 1.0, 1).with_cutoff(1),
        grid,
        n,
        0,
        false,
    )
    .unwrap();
    z.modes = modes.to_vec();
    z.weights = vec![1.0; modes.len()];
    z.series = vec![vec![[SQRT_2 * PI, 0.0]; grid.count]; modes.len()];
    z
}

fn small_demo() -> (ControlParams, NoisePath, TimeGrid) {
    let grid = TimeGrid::covering(0.0, 1.0, 1.0 / 32.0).unwrap();
    let z = generate(
        &NoiseConfig::wiener(-2.2, 1.0, 3).with_cutoff(4),
        grid,
        64,
        0,
        false,
    )
    .unwrap();
    (ControlParams::demo(&input(), 2, 2, 0.1).unwrap(), z, grid)
}

fn rel(a: &TorusField, b: &TorusField) -> f64 {
    let n = a.n().max(b.n());
    a.resize(n).sub(&b.resize(n)).l2_norm() / b.l2_norm().max(1e-300)
}

#[test]
fn default_carriers_satisfy_the_cancellation_identity() {
    assert!(BlockConfig::default().identity_defect() < 1e-14);
    let swapped = BlockConfig::new([[4, 3, 5], [5, 0, 5]], 2.0).unwrap();
    assert!(swapped.identity_defect() > 0.1);
    assert!(BlockConfig::new([[1, 1, 1], [5, 0, 5]], 2.0).is_err());
    assert!(BlockConfig::default().with_c0(1.5).is_err());
    assert_eq!(BlockConfig::default().carrier(0, 81).unwrap(), [243, 324]);
    assert!(BlockConfig::new([[3, 4, 5], [12, 5, 13]], 2.0)
        .unwrap()
        .carrier(1, 81)
        .is_err());
}

#[test]
fn initial_residual_matches_two_mode_expansion() {
    let grid = TimeGrid::new(0.0, 0.125, 6).unwrap();
    let (k, m) = ([1i64, 2], [3i64, 1]);
    let z = fixed_path(&[k, m], grid, 32);
    let cp = ControlParams::demo(&input(), 8, 2, 0.1).unwrap();
    let st = init(&z, &cp, &SchemeOpts::new(32)).unwrap();
    let norm = |v: [i64; 2]| ((v[0] * v[0] + v[1] * v[1]) as f64).sqrt();
    let sq = |v: [i64; 2]| (v[0] * v[0] + v[1] * v[1]) as f64;
    let pref = 0.5 * ((-k[1] * m[0] + k[0] * m[1]) as f64) * (norm(m) - norm(k));
    let d = [k[0] - m[0], k[1] - m[1]];
    let s = [k[0] + m[0], k[1] + m[1]];
    let mut want = TorusField::cos_mode(32, d).scaled(-pref / sq(d));
    want = want.add(&TorusField::cos_mode(32, s).scaled(pref / sq(s)));
    for q in st.q.iter().flatten() {
        assert!(rel(q, &want) < 1e-12, "{}", rel(q, &want));
    }
}

#[test]
fn single_and_equal_length_modes_have_no_residual() {
    let grid = TimeGrid::new(0.0, 0.125, 6).unwrap();
    let cp = ControlParams::demo(&input(), 16, 2, 0.1).unwrap();
    for modes in [
        vec![[2i64, 1]],
        vec![[3, 4], [5, 0]],
        vec![[3, 4], [0, 5], [4, -3]],
    ] {
        let st = init(&fixed_path(&modes, grid, 32), &cp, &SchemeOpts::new(32)).unwrap();
        assert!(st.q_sup() < 1e-8, "{modes:?}: {}", st.q_sup());
    }
}

#[test]
fn zero_residual_gives_constant_amplitudes() {
    let grid = TimeGrid::covering(0.0, 1.0, 1.0 / 32.0).unwrap();
    let z = fixed_path(&[], grid, 64);
    let cp = ControlParams::demo(&input(), 2, 2, 0.1).unwrap();
    let bc = BlockConfig::default();
    let opts = SchemeOpts::new(64);
    let st = init(&z, &cp, &opts).unwrap();
    assert_eq!(st.q_sup(), 0.0);
    let amps = build_amplitudes(&st, &cp, &bc, &opts).unwrap();
    let want = 2.0 * (cp.r(0) * bc.c0 / (5.0 * 4.0)).sqrt();
    for a in amps.a.iter().flat_map(|s| &s.frames) {
        assert_eq!(a.band(), 0);
        assert!((a.mean() - want).abs() < 1e-14 * want);
    }
    assert_eq!(amps.clamps.clamped, 0);
    assert!(amps.clamps.points > 0);
    assert_eq!(amps.clamps.domination_excess, -1.0);

    let block = build_block(&amps, &cp, &bc, 64).unwrap();
    let f = block.field(grid.count - 1, 64).unwrap();
    let support: Vec<[i64; 2]> = f
        .modes()
        .filter(|(_, c)| c.norm() > 1e-12)
        .map(|(k, _)| k)
        .collect();
    assert_eq!(support.len(), 4);
    for k in [[12, 16], [-12, -16], [20, 0], [-20, 0]] {
        assert!(support.contains(&k), "{k:?}");
    }

    let doubled =
        build_amplitudes(&st, &cp.with_c_start(2.0 * cp.input.c_start), &bc, &opts).unwrap();
    let ratio = doubled.a[0].frames[5].mean() / amps.a[0].frames[5].mean();
    assert!((ratio - SQRT_2).abs() < 1e-14);
}

#[test]
fn blocks_stay_in_their_annulus() {
    let cp = plan(&input()).unwrap().at_lattice_min();
    let grid = TimeGrid::covering(0.0, 0.25, 1.0 / 256.0).unwrap();
    let z = generate(
        &NoiseConfig::wiener(-2.2, 1.0, 5).with_cutoff(8),
        grid,
        64,
        0,
        false,
    )
    .unwrap();
    let opts = SchemeOpts::new(1024).with_eval(Eval::Frames(vec![grid.count - 1]));
    let states = run_levels(&z, &cp, &BlockConfig::default(), 1, &opts).unwrap();
    let block = states[1].block.as_ref().unwrap();
    assert_eq!(block.lambda, 81);
    let (lo, hi) = (405.0 - block.mu, 405.0 + block.mu);
    for i in [0, grid.count / 2, grid.count - 1] {
        let f = block.field(i, 1024).unwrap();
        assert!(f.l2_norm() > 0.0);
        assert!(annulus_leakage(&f, lo, hi) < 1e-12);
    }
}

#[test]
fn carrier_residual_matches_plain_field_residual() {
    let (cp, z, grid) = small_demo();
    let states = run_levels(&z, &cp, &BlockConfig::default(), 1, &SchemeOpts::new(64)).unwrap();
    let s1 = &states[1];
    let g = SpaceTimeField::new(
        grid,
        (0..grid.count)
            .map(|i| s1.g.field(i, 64).unwrap())
            .collect(),
    )
    .unwrap();
    let z_n = SpaceTimeField::new(
        grid,
        s1.z_trunc.frames.iter().map(|f| f.resize(64)).collect(),
    )
    .unwrap();
    let plain = compute_residual(&g, &z_n, &cp).unwrap();
    for (i, q) in s1.q.iter().enumerate() {
        let q = q.as_ref().unwrap();
        assert!(
            rel(q, &plain.frames[i]) < 1e-10,
            "frame {i}: {}",
            rel(q, &plain.frames[i])
        );
        assert!(q.is_mean_free());
        let x: f64 = xnorm_parts(q, NormOpts::default()).iter().sum();
        // refinement can only move the sampled sup-norms up, towards the true ones
        let refined = s1.q_xnorm[i].unwrap();
        assert!(
            refined >= x * (1.0 - 1e-12) && refined < 1.01 * x,
            "{refined} vs {x}"
        );
    }
}

#[test]
fn residual_is_affine_in_viscosity() {
    let (cp, z, grid) = small_demo();
    let opts = SchemeOpts::new(64).with_eval(Eval::last_window(&grid, 3));
    let q = |nu: f64| {
        let mut c = cp.clone();
        c.input.nu = nu;
        run_levels(&z, &c, &BlockConfig::default(), 1, &opts)
            .unwrap()
            .pop()
            .unwrap()
    };
    let (q0, q1, q2) = (q(0.0), q(1.0), q(2.0));
    for i in q1.evaluated() {
        let (a, b, c) = (
            q0.q[i].as_ref().unwrap(),
            q1.q[i].as_ref().unwrap(),
            q2.q[i].as_ref().unwrap(),
        );
        let second = c.sub(&b.scaled(2.0)).add(a);
        assert!(second.l2_norm() < 1e-10 * b.l2_norm());
        assert!(b.sub(a).l2_norm() > 1e-6 * b.l2_norm());
    }
}

#[test]
fn future_noise_does_not_change_the_past() {
    let (cp, z, grid) = small_demo();
    let cut = 12;
    let mut w = z.clone();
    for s in &mut w.series {
        for v in s.iter_mut().skip(cut + 1) {
            v[0] += 0.5;
            v[1] -= 0.25;
        }
    }
    let bc = BlockConfig::default();
    let a = run_levels(&z, &cp, &bc, 2, &SchemeOpts::new(256)).unwrap();
    let b = run_levels(&w, &cp, &bc, 2, &SchemeOpts::new(256)).unwrap();
    for (sa, sb) in a.iter().zip(&b) {
        for i in 0..=cut {
            assert_eq!(sa.q[i], sb.q[i], "level {} frame {i}", sa.level);
            for (pa, pb) in sa.g.parts.iter().zip(&sb.g.parts) {
                assert_eq!(pa.amp.frames[i], pb.amp.frames[i]);
            }
        }
        assert_ne!(sa.q[grid.count - 1], sb.q[grid.count - 1]);
    }
}

#[test]
fn undersized_grids_are_rejected() {
    let (cp, z, _) = small_demo();
    let st = init(&z, &cp, &SchemeOpts::new(32)).unwrap();
    let err = step(&st, &cp, &BlockConfig::default(), &z, &SchemeOpts::new(32)).unwrap_err();
    assert!(matches!(err, Error::LevelInfeasible));
    let amps = build_amplitudes(&st, &cp, &BlockConfig::default(), &SchemeOpts::new(32)).unwrap();
    assert!(matches!(
        build_block(&amps, &cp, &BlockConfig::default(), 32),
        Err(Error::LevelInfeasible)
    ));
}

#[test]
fn unevaluated_frames_are_reported() {
    let (cp, z, grid) = small_demo();
    let opts = SchemeOpts::new(64).with_eval(Eval::last_window(&grid, 2));
    let s = run_levels(&z, &cp, &BlockConfig::default(), 1, &opts)
        .unwrap()
        .pop()
        .unwrap();
    assert_eq!(s.evaluated(), vec![grid.count / 2, grid.count - 1]);
    assert!(s.q_field().is_err());
}
