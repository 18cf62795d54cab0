use contactlab_core::walkers::{ConvolutionEngine, LatticeDensity, WalkerError};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Convolution powers through the discrete Fourier transform.
///
/// Power `n` is computed on a periodic box of side `2nR + 1`, which holds the
/// whole support of `p^{*n}`, so the circular convolution has no wrap-around.
#[derive(Debug, Clone, Copy, Default)]
pub struct FftConvolution;

fn transform(data: &mut [Complex64], side: usize, dim: usize, inverse: bool, planner: &mut FftPlanner<f64>) {
    let fft = if inverse {
        planner.plan_fft_inverse(side)
    } else {
        planner.plan_fft_forward(side)
    };
    let mut line = vec![Complex64::default(); side];
    let total = data.len();
    for axis in 0..dim {
        let stride = side.pow((dim - 1 - axis) as u32);
        let block = stride * side;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[base + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

/// Index of lattice point `z` on a periodic box of side `side`.
fn wrapped(z: &[i64], side: i64) -> usize {
    z.iter().fold(0i64, |acc, &c| acc * side + c.rem_euclid(side)) as usize
}

impl ConvolutionEngine for FftConvolution {
    fn powers(
        &self,
        p: &LatticeDensity,
        n_max: usize,
        visit: &mut dyn FnMut(usize, &LatticeDensity),
    ) -> Result<(), WalkerError> {
        let mut planner = FftPlanner::new();
        let dim = p.dim;
        let mut z = vec![0i64; dim];
        for n in 1..=n_max {
            let radius = n as i64 * p.radius;
            let side = (2 * radius + 1) as usize;
            let mut buf = vec![Complex64::default(); side.pow(dim as u32)];
            for (i, &v) in p.values.iter().enumerate() {
                if v != 0.0 {
                    p.coords(i, &mut z);
                    buf[wrapped(&z, side as i64)] = Complex64::new(v, 0.0);
                }
            }
            transform(&mut buf, side, dim, false, &mut planner);
            for v in &mut buf {
                *v = v.powu(n as u32);
            }
            transform(&mut buf, side, dim, true, &mut planner);
            let scale = 1.0 / buf.len() as f64;
            let mut out = LatticeDensity::zeros(dim, radius);
            for i in 0..out.values.len() {
                out.coords(i, &mut z);
                out.values[i] = buf[wrapped(&z, side as i64)].re * scale;
            }
            let deficit = (1.0 - out.mass()).abs();
            if deficit > 1e-9 {
                return Err(WalkerError::MassLeakage { n, deficit });
            }
            visit(n, &out);
        }
        Ok(())
    }
}
