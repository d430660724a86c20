use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Type-I discrete sine transform: `X_k = sum_{j=1}^{m} x_j sin(pi j k / (m + 1))`
/// for `k = 1..=m`, computed from an FFT of the odd extension of length `2(m + 1)`.
pub(super) fn dst1(x: &[f64]) -> Vec<f64> {
    let n = x.len() + 1;
    let mut buf = vec![Complex::new(0.0, 0.0); 2 * n];
    for (j, &v) in x.iter().enumerate() {
        buf[j + 1].re = v;
        buf[2 * n - j - 1].re = -v;
    }
    let fft = FftPlanner::new().plan_fft_forward(2 * n);
    fft.process(&mut buf);
    buf[1..n].iter().map(|c| -0.5 * c.im).collect()
}
