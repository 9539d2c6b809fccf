//! In-place 3D FFT on cubic arrays (x fastest), built from 1D rustfft plans.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

pub struct Fft3 {
    m: usize,
    plan: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(m: usize, direction: FftDirection) -> Self {
        let mut planner = FftPlanner::new();
        let plan = planner.plan_fft(m, direction);
        Self { m, plan }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    /// Unnormalized transform of an `m³` array.
    pub fn process(&self, data: &mut [Complex64]) {
        let m = self.m;
        assert_eq!(data.len(), m * m * m, "array is not m^3");
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.plan.get_inplace_scratch_len()];
        // x lines are contiguous.
        self.plan.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        // y lines
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    line[j] = data[i + m * (j + m * k)];
                }
                self.plan.process_with_scratch(&mut line, &mut scratch);
                for j in 0..m {
                    data[i + m * (j + m * k)] = line[j];
                }
            }
        }
        // z lines
        let plane = m * m;
        for j in 0..m {
            for i in 0..m {
                for k in 0..m {
                    line[k] = data[i + m * j + plane * k];
                }
                self.plan.process_with_scratch(&mut line, &mut scratch);
                for k in 0..m {
                    data[i + m * j + plane * k] = line[k];
                }
            }
        }
    }
}
