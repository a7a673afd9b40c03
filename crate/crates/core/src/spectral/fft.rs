//! Cached 2-D complex FFTs on square power-of-two grids.

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::{Arc, Mutex, OnceLock};

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

pub(crate) fn plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    let mut p = planner().lock().expect("fft planner poisoned");
    p.plan_fft(n, dir)
}

const BLOCK: usize = 32;

fn transpose(buf: &mut [Complex64], n: usize) {
    for ib in (0..n).step_by(BLOCK) {
        for jb in (ib..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                let j0 = if ib == jb { i + 1 } else { jb };
                for j in j0..(jb + BLOCK).min(n) {
                    buf.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Unnormalized 2-D transform in place: `sum_x buf[x] exp(sign 2πi k·x/n)`
/// with sign `-` for `Forward` and `+` for `Inverse`.
pub(crate) fn fft2(buf: &mut [Complex64], n: usize, dir: FftDirection) {
    debug_assert_eq!(buf.len(), n * n);
    if n == 1 {
        return;
    }
    let fft = plan(n, dir);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(buf, &mut scratch);
    transpose(buf, n);
    fft.process_with_scratch(buf, &mut scratch);
    transpose(buf, n);
}
