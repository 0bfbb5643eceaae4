use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Square 2-D complex FFT built from row and column passes.
#[derive(Clone)]
pub(crate) struct Fft2 {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub(crate) fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        }
    }

    fn run(&self, data: &mut [Complex<f64>], plan: &Arc<dyn Fft<f64>>) {
        let m = self.m;
        plan.process(data);
        let mut col = vec![Complex::new(0.0, 0.0); m];
        for j in 0..m {
            for i in 0..m {
                col[i] = data[i * m + j];
            }
            plan.process(&mut col);
            for i in 0..m {
                data[i * m + j] = col[i];
            }
        }
    }

    pub(crate) fn forward(&self, data: &mut [Complex<f64>]) {
        self.run(data, &self.fwd);
    }

    pub(crate) fn inverse_unnormalized(&self, data: &mut [Complex<f64>]) {
        self.run(data, &self.inv);
    }

    pub(crate) fn inverse(&self, data: &mut [Complex<f64>]) {
        self.run(data, &self.inv);
        let s = 1.0 / (self.m * self.m) as f64;
        data.iter_mut().for_each(|c| *c *= s);
    }
}
