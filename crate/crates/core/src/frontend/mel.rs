use crate::error::{Error, Result};

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// `n_mels + 2` edge frequencies in Hz, equally spaced in mel from 0 Hz to
/// Nyquist. Filter `i` has its apex at `edges[i + 1]`.
pub fn mel_edges(n_mels: usize, sample_rate: u32) -> Vec<f64> {
    let top = hz_to_mel(f64::from(sample_rate) / 2.0);
    (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect()
}

pub fn mel_center_frequencies(n_mels: usize, sample_rate: u32) -> Vec<f64> {
    let edges = mel_edges(n_mels, sample_rate);
    edges[1..=n_mels].to_vec()
}

/// Triangular mel filterbank, `n_mels` rows over `n_fft_bins` one-sided FFT
/// bins spanning 0 Hz to Nyquist. Unnormalized: each triangle peaks at 1.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub n_fft_bins: usize,
    weights: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_fft_bins: usize, n_mels: usize, sample_rate: u32) -> Result<Self> {
        if n_mels == 0 {
            return Err(Error::InvalidArgument("n_mels must be at least 1".into()));
        }
        if n_fft_bins < 2 || n_fft_bins < n_mels {
            return Err(Error::InvalidArgument(format!(
                "{n_mels} mel filters need at least as many FFT bins, got {n_fft_bins}"
            )));
        }
        let nyquist = f64::from(sample_rate) / 2.0;
        let bin_hz: Vec<f64> = (0..n_fft_bins)
            .map(|b| nyquist * b as f64 / (n_fft_bins - 1) as f64)
            .collect();
        let edges = mel_edges(n_mels, sample_rate);
        let mut weights = vec![0.0; n_mels * n_fft_bins];
        for m in 0..n_mels {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let row = &mut weights[m * n_fft_bins..(m + 1) * n_fft_bins];
            for (w, &f) in row.iter_mut().zip(&bin_hz) {
                let up = (f - lo) / (mid - lo);
                let down = (hi - f) / (hi - mid);
                *w = up.min(down).max(0.0);
            }
            if row.iter().all(|&w| w <= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "mel filter {m} ({lo:.1}-{hi:.1} Hz) covers no FFT bin; \
                     {n_mels} filters exceed the usable resolution of {n_fft_bins} bins"
                )));
            }
        }
        Ok(Self {
            n_mels,
            n_fft_bins,
            weights,
        })
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_fft_bins..(m + 1) * self.n_fft_bins]
    }

    /// Project a one-sided power spectrum onto the filters.
    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        debug_assert_eq!(power.len(), self.n_fft_bins);
        for (m, o) in out.iter_mut().enumerate().take(self.n_mels) {
            *o = self.row(m).iter().zip(power).map(|(w, p)| w * p).sum();
        }
    }
}

/// `n_mels × n_fft_bins` filter matrix as nested rows.
pub fn mel_filterbank(n_fft_bins: usize, n_mels: usize, sample_rate: u32) -> Result<Vec<Vec<f64>>> {
    let fb = MelFilterbank::new(n_fft_bins, n_mels, sample_rate)?;
    Ok((0..n_mels).map(|m| fb.row(m).to_vec()).collect())
}
