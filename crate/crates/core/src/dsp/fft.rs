use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{arg_err, Result};
use crate::tensor::Scalar;

fn check_len(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return arg_err(format!("fft length {n} is not a power of two"));
    }
    Ok(())
}

/// Forward DFT, `X[k] = sum_n x[n] exp(-2 pi i k n / N)`, in place.
pub fn fft<S: Scalar>(buf: &mut [Complex<S>]) -> Result<()> {
    check_len(buf.len())?;
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
    Ok(())
}

/// Inverse DFT normalized by `1/N`, so `ifft(fft(x)) == x`.
pub fn ifft<S: Scalar>(buf: &mut [Complex<S>]) -> Result<()> {
    check_len(buf.len())?;
    FftPlanner::new().plan_fft_inverse(buf.len()).process(buf);
    let scale = S::one() / S::of(buf.len() as f64);
    for v in buf.iter_mut() {
        *v = *v * scale;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_is_flat() {
        let mut x = vec![Complex::new(1.0f64, 0.0), Complex::default(), Complex::default(), Complex::default()];
        fft(&mut x).unwrap();
        for v in x {
            assert!((v - Complex::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        let mut x = vec![Complex::<f64>::default(); 6];
        assert!(fft(&mut x).is_err());
        assert!(ifft(&mut x).is_err());
    }

    #[test]
    fn linear() {
        let a: Vec<Complex<f64>> = (0..16).map(|i| Complex::new((i as f64).sin(), 0.3 * i as f64)).collect();
        let b: Vec<Complex<f64>> = (0..16).map(|i| Complex::new((i as f64 * 0.7).cos(), -0.1)).collect();
        let mut mix: Vec<Complex<f64>> = a.iter().zip(&b).map(|(x, y)| x * 2.5 - y * 0.5).collect();
        let (mut fa, mut fb) = (a.clone(), b.clone());
        fft(&mut fa).unwrap();
        fft(&mut fb).unwrap();
        fft(&mut mix).unwrap();
        for i in 0..16 {
            assert!((mix[i] - (fa[i] * 2.5 - fb[i] * 0.5)).norm() < 1e-9);
        }
    }
}
