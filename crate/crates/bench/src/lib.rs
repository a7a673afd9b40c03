//! Fixtures shared by the kernel benchmarks in `benches/`.

use cisqg::controls::{ControlParams, PlannerInput};
use cisqg::noise::{generate, NoiseConfig, NoisePath};
use cisqg::timeline::TimeGrid;
use cisqg::TorusField;
use num_complex::Complex64;

/// Deterministic real field with every mode `0 < |k|_∞ <= band` populated.
pub fn field(n: usize, band: i64) -> TorusField {
    let mut f = TorusField::zeros(n);
    for k1 in -band..=band {
        for k2 in 0..=band {
            if k2 == 0 && k1 <= 0 {
                continue;
            }
            let s = (k1 * 31 + k2 * 17) as f64;
            f.add_real_mode(
                [k1, k2],
                Complex64::new(s.sin(), (0.5 * s).cos()) / (1.0 + (k1 * k1 + k2 * k2) as f64),
            );
        }
    }
    f
}

/// Demo parameters and a noise path on a unit-length grid.
pub fn demo_setup(n: usize) -> (ControlParams, NoisePath) {
    let grid = TimeGrid::covering(0.0, 1.0, 1.0 / 32.0).expect("valid grid");
    let z = generate(
        &NoiseConfig::wiener(-2.2, 1.0, 1).with_cutoff(8),
        grid,
        n,
        0,
        false,
    )
    .expect("noise");
    let cp =
        ControlParams::demo(&PlannerInput::new(0.5, 0.6, 1.0), 2, 2, 0.1).expect("demo parameters");
    (cp, z)
}
