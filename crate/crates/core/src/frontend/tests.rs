use super::*;

fn sine(freq: f64, seconds: f64, amp: f64) -> AudioClip {
    let sr = DEFAULT_SAMPLE_RATE;
    let n = (seconds * f64::from(sr)) as usize;
    let samples = (0..n)
        .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / f64::from(sr)).sin())
        .collect();
    AudioClip::new("sine", samples, sr)
}

#[test]
fn ten_second_clip_has_313_frames() {
    let clip = AudioClip::new("z", vec![0.0; 160_000], 16_000);
    let lm = stft_logmel(&clip, 64.0, 0.5, 128).unwrap();
    // floor(160000 / 512) + 1
    assert_eq!(lm.n_frames, 313);
    assert_eq!(lm.n_mels, 128);
}

#[test]
fn silence_hits_the_floor() {
    let clip = AudioClip::new("z", vec![0.0; 16_000], 16_000);
    let lm = stft_logmel(&clip, 64.0, 0.5, 128).unwrap();
    let floor = 1e-10f64.ln();
    assert!(lm.values.iter().all(|&v| v == floor));
}

#[test]
fn sine_peaks_at_nearest_mel_center() {
    let clip = sine(1000.0, 1.0, 0.5);
    let lm = stft_logmel(&clip, 64.0, 0.5, 128).unwrap();
    let centers = mel_center_frequencies(128, 16_000);
    let nearest = centers
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1000.0).abs().total_cmp(&(b.1 - 1000.0).abs()))
        .unwrap()
        .0;
    let mid = lm.frame(lm.n_frames / 2);
    let argmax = mid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert_eq!(argmax, nearest);
}

#[test]
fn htk_mel_values() {
    assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-12);
    assert!((hz_to_mel(700.0) - 781.17).abs() < 0.01);
    assert_eq!(hz_to_mel(0.0), 0.0);
    assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
}

#[test]
fn every_filter_has_a_positive_entry_and_is_unimodal() {
    let fb = mel_filterbank(513, 128, 16_000).unwrap();
    assert_eq!(fb.len(), 128);
    for row in &fb {
        assert!(row.iter().any(|&w| w > 0.0));
        assert!(row.iter().all(|&w| w >= 0.0));
        let peak = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(row[..=peak].windows(2).all(|w| w[0] <= w[1]));
        assert!(row[peak..].windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn filterbank_covers_bins_between_outer_centers() {
    let fb = mel_filterbank(513, 128, 16_000).unwrap();
    let centers = mel_center_frequencies(128, 16_000);
    let bin_hz = |b: usize| 8000.0 * b as f64 / 512.0;
    for b in 0..513 {
        let f = bin_hz(b);
        if f >= centers[0] && f <= centers[127] {
            let col: f64 = fb.iter().map(|r| r[b]).sum();
            assert!(col > 0.0, "bin {b} ({f} Hz) uncovered");
        }
    }
}

#[test]
fn too_many_mels_rejected() {
    assert!(mel_filterbank(10, 11, 16_000).is_err());
    assert!(mel_filterbank(10, 0, 16_000).is_err());
    // 64 bins cannot resolve 60 filters crowded into the low end.
    assert!(mel_filterbank(64, 60, 16_000).is_err());
}

#[test]
fn window_counts() {
    assert_eq!(window_count(313, 64, 8).unwrap(), 32);
    assert_eq!(window_count(64, 64, 8).unwrap(), 1);
    assert_eq!(window_count(72, 64, 8).unwrap(), 2);
    assert!(window_count(63, 64, 8).is_err());
    assert!(window_count(100, 64, 0).is_err());
}

#[test]
fn windows_are_in_temporal_order() {
    let lm = LogMel {
        n_frames: 5,
        n_mels: 2,
        values: (0..10).map(f64::from).collect(),
    };
    let w = window_samples(&lm, "c", 2, 2).unwrap();
    assert_eq!(w.len(), 2);
    assert_eq!(w[0].values, vec![0.0, 1.0, 2.0, 3.0]);
    assert_eq!(w[1].values, vec![4.0, 5.0, 6.0, 7.0]);
    assert_eq!(w[1].window_index, 1);
}

#[test]
fn default_clip_yields_32_windows() {
    let fz = Featurizer::new(FrontendConfig::default()).unwrap();
    let w = fz.windows(&sine(440.0, 10.0, 0.3)).unwrap();
    assert_eq!(w.len(), 32);
    assert!(w.iter().all(|x| x.values.len() == 64 * 128));
}

#[test]
fn doubling_amplitude_adds_log_four() {
    let a = stft_logmel(&sine(700.0, 1.0, 0.1), 64.0, 0.5, 128).unwrap();
    let b = stft_logmel(&sine(700.0, 1.0, 0.2), 64.0, 0.5, 128).unwrap();
    let floor = POWER_FLOOR.ln();
    let mut checked = 0;
    for (x, y) in a.values.iter().zip(&b.values) {
        if *x > floor + 1.0 {
            assert!((y - x - 4f64.ln()).abs() < 1e-9);
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

#[test]
fn too_short_clip_rejected() {
    let clip = AudioClip::new("tiny", vec![0.1; 100], 16_000);
    assert!(stft_logmel(&clip, 64.0, 0.5, 128).is_err());
}

#[test]
fn bad_hop_rejected() {
    let clip = sine(440.0, 0.5, 0.1);
    assert!(stft_logmel(&clip, 64.0, 0.0, 128).is_err());
    assert!(stft_logmel(&clip, 64.0, 1.5, 128).is_err());
    assert!(stft_logmel(&clip, 0.05, 0.5, 1).is_err());
}

#[test]
fn featurizer_rejects_wrong_rate() {
    let fz = Featurizer::new(FrontendConfig::default()).unwrap();
    let clip = AudioClip::new("x", vec![0.0; 44_100], 44_100);
    assert!(fz.logmel(&clip).is_err());
}

#[test]
fn wav_round_trip_and_format_checks() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.wav");
    let samples: Vec<f64> = (0..1000).map(|i| ((i as f64) * 0.01).sin() * 0.5).collect();
    write_pcm16_mono(&path, &samples, 16_000).unwrap();
    let (back, sr) = read_pcm16_mono(&path).unwrap();
    assert_eq!(sr, 16_000);
    assert_eq!(back.len(), samples.len());
    assert!(back.iter().zip(&samples).all(|(a, b)| (a - b).abs() <= 0.5 / 32768.0 + 1e-12));

    let stereo = dir.path().join("s.wav");
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate: 16_000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(&stereo, spec).unwrap();
    w.write_sample(0i16).unwrap();
    w.write_sample(0i16).unwrap();
    w.finalize().unwrap();
    assert!(read_pcm16_mono(&stereo).is_err());

    let float = dir.path().join("f.wav");
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: 16_000,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(&float, spec).unwrap();
    w.write_sample(0.0f32).unwrap();
    w.finalize().unwrap();
    assert!(read_pcm16_mono(&float).is_err());
}
