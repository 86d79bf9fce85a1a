use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Grid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn plan_pair(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// Unnormalized d-dimensional DFT over a lexicographically stored `n^d` array
/// (last axis contiguous).
///
/// Plans come from a per-thread planner cache, so constructing an engine per
/// call is cheap; hold on to one when transforming repeatedly to reuse the
/// scratch buffers.
pub struct FftEngine {
    n: usize,
    dim: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    transposed: Vec<Complex64>,
}

impl FftEngine {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.n();
        let (fwd, inv) = plan_pair(n);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let transposed = if grid.dim() == 2 {
            vec![Complex64::default(); n * n]
        } else {
            Vec::new()
        };
        Self {
            n,
            dim: grid.dim(),
            fwd,
            inv,
            scratch: vec![Complex64::default(); scratch_len],
            transposed,
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `X_k = Σ_j x_j e^{-2πi j·k/n}`.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        let plan = Arc::clone(&self.fwd);
        self.run(plan.as_ref(), data);
    }

    /// `x_j = Σ_k X_k e^{2πi j·k/n}` (no `1/n^d` factor).
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        let plan = Arc::clone(&self.inv);
        self.run(plan.as_ref(), data);
    }

    /// Inverse including the `1/n^d` factor, so `inverse_normalized ∘ forward = id`.
    pub fn inverse_normalized(&mut self, data: &mut [Complex64]) {
        self.inverse(data);
        let scale = 1.0 / self.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn run(&mut self, plan: &dyn Fft<f64>, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len(), "FFT buffer length mismatch");
        plan.process_with_scratch(data, &mut self.scratch);
        if self.dim == 2 {
            let n = self.n;
            transpose(data, &mut self.transposed, n);
            plan.process_with_scratch(&mut self.transposed, &mut self.scratch);
            transpose(&self.transposed, data, n);
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for ib in (0..n).step_by(BLOCK) {
        for jb in (0..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                for j in jb..(jb + BLOCK).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}
