use std::path::Path;

use crate::error::{Error, Result};

const PCM16_SCALE: f64 = 32768.0;

/// Read a 16-bit PCM mono WAV as samples in `[-1, 1)`.
pub fn read_pcm16_mono(path: &Path) -> Result<(Vec<f64>, u32)> {
    let wav = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let reader = hound::WavReader::open(path).map_err(wav)?;
    let spec = reader.spec();
    if spec.channels != 1
        || spec.bits_per_sample != 16
        || spec.sample_format != hound::SampleFormat::Int
    {
        return Err(Error::Data(format!(
            "{}: expected 16-bit PCM mono, got {} channel(s), {} bits, {:?}",
            path.display(),
            spec.channels,
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / PCM16_SCALE))
        .collect::<Result<Vec<_>, _>>()
        .map_err(wav)?;
    Ok((samples, spec.sample_rate))
}

/// Quantize to 16-bit PCM with clipping and write a mono WAV.
pub fn write_pcm16_mono(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let wav = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav)?;
    for &s in samples {
        let q = (s * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(wav)?;
    }
    writer.finalize().map_err(wav)
}
