//! Band-limited resampling with a Kaiser-windowed sinc kernel.

use std::sync::OnceLock;

use crate::audio::AudioBuffer;

/// Kernel half-width in zero crossings of the low-pass sinc.
pub const HALF_WIDTH_ZEROS: usize = 16;
const KAISER_BETA: f64 = 8.0;
const TABLE_STEPS_PER_ZERO: usize = 1024;

/// Zeroth-order modified Bessel function of the first kind, by power series.
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn kernel_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = HALF_WIDTH_ZEROS * TABLE_STEPS_PER_ZERO;
        let norm = bessel_i0(KAISER_BETA);
        (0..=n + 1)
            .map(|i| {
                let z = i as f64 / TABLE_STEPS_PER_ZERO as f64;
                let u = z / HALF_WIDTH_ZEROS as f64;
                if u >= 1.0 {
                    return 0.0;
                }
                let sinc = if z == 0.0 { 1.0 } else { (std::f64::consts::PI * z).sin() / (std::f64::consts::PI * z) };
                sinc * bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / norm
            })
            .collect()
    })
}

/// Windowed sinc evaluated at `z` zero crossings from the centre.
fn kernel(z: f64) -> f64 {
    let table = kernel_table();
    let pos = z.abs() * TABLE_STEPS_PER_ZERO as f64;
    let i = pos as usize;
    if i + 1 >= table.len() {
        return 0.0;
    }
    let frac = pos - i as f64;
    table[i] + (table[i + 1] - table[i]) * frac
}

/// Resamples `input` so that output sample `i` sits at input position `i * step`.
///
/// `step > 1` shortens (and low-passes) the signal, `step < 1` lengthens it.
pub fn resample_by_step(input: &[f64], step: f64, out_len: usize) -> Vec<f64> {
    assert!(step > 0.0 && step.is_finite());
    let cutoff = (1.0 / step).min(1.0);
    let half_width = HALF_WIDTH_ZEROS as f64 / cutoff;
    let n = input.len() as isize;
    (0..out_len)
        .map(|i| {
            let centre = i as f64 * step;
            let lo = ((centre - half_width).ceil() as isize).max(0);
            let hi = ((centre + half_width).floor() as isize).min(n - 1);
            let mut acc = 0.0;
            for j in lo..=hi {
                acc += input[j as usize] * kernel((j as f64 - centre) * cutoff);
            }
            acc * cutoff
        })
        .collect()
}

/// Converts `buf` to `target_rate_hz`. Output length is `round(len * target / source)`.
///
/// # Panics
/// If `target_rate_hz` is zero.
pub fn resample(buf: &AudioBuffer, target_rate_hz: u32) -> AudioBuffer {
    assert!(target_rate_hz > 0, "target rate must be positive");
    let source = buf.sample_rate();
    if source == target_rate_hz {
        return buf.clone();
    }
    let out_len = (buf.len() as f64 * target_rate_hz as f64 / source as f64).round() as usize;
    let step = source as f64 / target_rate_hz as f64;
    let out = resample_by_step(&buf.to_f64(), step, out_len);
    AudioBuffer::new(out.into_iter().map(|s| s as f32).collect(), target_rate_hz)
        .expect("resampled samples are finite")
}
