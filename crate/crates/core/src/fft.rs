//! Cached 1-D plans and the separable 3-D transform used by `spectral`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry((len, inverse))
        .or_insert_with(|| {
            let dir = if inverse {
                FftDirection::Inverse
            } else {
                FftDirection::Forward
            };
            FftPlanner::new().plan_fft(len, dir)
        })
        .clone()
}

/// Unnormalized in-place transform of one `nx*ny*nz` block stored with z fastest.
pub(crate) fn fft3(block: &mut [Complex64], dims: [usize; 3], inverse: bool) {
    let [nx, ny, nz] = dims;
    debug_assert_eq!(block.len(), nx * ny * nz);

    if nz > 1 {
        // z lines are contiguous
        let p = plan(nz, inverse);
        let mut scratch = vec![Complex64::default(); p.get_inplace_scratch_len()];
        p.process_with_scratch(block, &mut scratch);
    }
    if ny > 1 {
        let p = plan(ny, inverse);
        let mut scratch = vec![Complex64::default(); p.get_inplace_scratch_len()];
        let mut line = vec![Complex64::default(); ny];
        for ix in 0..nx {
            for iz in 0..nz {
                for (iy, l) in line.iter_mut().enumerate() {
                    *l = block[(ix * ny + iy) * nz + iz];
                }
                p.process_with_scratch(&mut line, &mut scratch);
                for (iy, l) in line.iter().enumerate() {
                    block[(ix * ny + iy) * nz + iz] = *l;
                }
            }
        }
    }
    if nx > 1 {
        let p = plan(nx, inverse);
        let mut scratch = vec![Complex64::default(); p.get_inplace_scratch_len()];
        let stride = ny * nz;
        let mut line = vec![Complex64::default(); nx];
        for j in 0..stride {
            for (ix, l) in line.iter_mut().enumerate() {
                *l = block[ix * stride + j];
            }
            p.process_with_scratch(&mut line, &mut scratch);
            for (ix, l) in line.iter().enumerate() {
                block[ix * stride + j] = *l;
            }
        }
    }
}
