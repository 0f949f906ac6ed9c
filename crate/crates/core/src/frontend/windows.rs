use super::stft::LogMel;
use crate::error::{Error, Result};

/// A `frames × mel` slice of consecutive log-mel frames, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelWindow {
    pub clip_id: String,
    pub window_index: usize,
    pub frames: usize,
    pub n_mels: usize,
    pub values: Vec<f64>,
}

pub fn window_count(n_frames: usize, context: usize, shift: usize) -> Result<usize> {
    if shift == 0 || context == 0 {
        return Err(Error::InvalidArgument("context and shift must be at least 1".into()));
    }
    if context > n_frames {
        return Err(Error::InvalidArgument(format!(
            "context of {context} frames exceeds the {n_frames} available"
        )));
    }
    Ok((n_frames - context) / shift + 1)
}

/// Cut a log-mel matrix into overlapping context windows, in temporal order.
pub fn window_samples(logmel: &LogMel, clip_id: &str, context: usize, shift: usize) -> Result<Vec<LogMelWindow>> {
    let n = window_count(logmel.n_frames, context, shift)?;
    Ok((0..n)
        .map(|w| {
            let start = w * shift * logmel.n_mels;
            LogMelWindow {
                clip_id: clip_id.to_owned(),
                window_index: w,
                frames: context,
                n_mels: logmel.n_mels,
                values: logmel.values[start..start + context * logmel.n_mels].to_vec(),
            }
        })
        .collect())
}
