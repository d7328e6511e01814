//! Frame-level spectral and temporal descriptors and their aggregation into
//! fixed-length feature vectors.
//!
//! Each frame yields the base descriptors (zero-crossing rate, spectral
//! centroid, roll-off, flux, `n_mfcc` cepstral coefficients and a 12-bin
//! chroma profile). A texture window of frames is summarized by the mean and
//! population standard deviation of every base descriptor.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioClip;

pub const CHROMA_BINS: usize = 12;
const PITCH_NAMES: [&str; CHROMA_BINS] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];
const LOG_FLOOR: f64 = 1e-10;
const CHROMA_MIN_HZ: f64 = 20.0;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("clip has {len} samples, shorter than one {frame_len}-sample frame")]
    ClipTooShort { len: usize, frame_len: usize },
    #[error("frame has {found} samples, expected {expected}")]
    FrameLength { expected: usize, found: usize },
    #[error("zero-crossing rate needs at least 2 samples, got {0}")]
    FrameTooShort(usize),
    #[error("spectra have {0} and {1} bins")]
    BinMismatch(usize, usize),
    #[error("invalid analysis config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub rolloff_fraction: f64,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub fmin_hz: f64,
    /// Upper mel filterbank bound; `None` means the Nyquist frequency.
    pub fmax_hz: Option<f64>,
    pub chroma_ref_hz: f64,
    /// Frames per texture window. 1 aggregates the whole clip into a single
    /// vector; k >= 2 emits one vector per run of k consecutive frames.
    pub texture_frames: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            frame_len: 512,
            hop: 256,
            rolloff_fraction: 0.85,
            n_mels: 40,
            n_mfcc: 13,
            fmin_hz: 0.0,
            fmax_hz: None,
            chroma_ref_hz: 440.0,
            texture_frames: 1,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self, rate_hz: u32) -> Result<(), FeatureError> {
        let bad = |m: String| Err(FeatureError::InvalidConfig(m));
        if self.frame_len < 2 || !self.frame_len.is_power_of_two() {
            return bad(format!("frame length {} is not a power of two >= 2", self.frame_len));
        }
        if self.hop == 0 || self.hop > self.frame_len {
            return bad(format!("hop {} must be in 1..={}", self.hop, self.frame_len));
        }
        if !(self.rolloff_fraction > 0.0 && self.rolloff_fraction < 1.0) {
            return bad(format!("roll-off fraction {} must be in (0, 1)", self.rolloff_fraction));
        }
        if self.n_mels == 0 || self.n_mfcc == 0 {
            return bad("n_mels and n_mfcc must be positive".into());
        }
        if self.n_mfcc > self.n_mels {
            return bad(format!("n_mfcc {} exceeds n_mels {}", self.n_mfcc, self.n_mels));
        }
        let fmax = self.fmax(rate_hz);
        if !(self.fmin_hz >= 0.0 && fmax > self.fmin_hz && fmax <= rate_hz as f64 / 2.0) {
            return bad(format!("mel bounds {}..{} Hz are invalid", self.fmin_hz, fmax));
        }
        if !(self.chroma_ref_hz > 0.0) {
            return bad(format!("chroma reference {} Hz must be positive", self.chroma_ref_hz));
        }
        if self.texture_frames == 0 {
            return bad("texture_frames must be positive".into());
        }
        Ok(())
    }

    pub fn fmax(&self, rate_hz: u32) -> f64 {
        self.fmax_hz.unwrap_or(rate_hz as f64 / 2.0)
    }

    pub fn n_bins(&self) -> usize {
        self.frame_len / 2 + 1
    }

    pub fn base_feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = ["zcr", "centroid", "rolloff", "flux"].iter().map(|s| s.to_string()).collect();
        names.extend((0..self.n_mfcc).map(|i| format!("mfcc{i}")));
        names.extend(PITCH_NAMES.iter().map(|p| format!("chroma_{p}")));
        names
    }

    /// Names of the aggregated vector: every base feature's `_mean`, then
    /// every base feature's `_std`.
    pub fn feature_names(&self) -> Vec<String> {
        let base = self.base_feature_names();
        let means = base.iter().map(|n| format!("{n}_mean"));
        let stds = base.iter().map(|n| format!("{n}_std"));
        means.chain(stds).collect()
    }
}

/// Magnitude spectrum of one frame over bins `0..=frame_len/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    pub magnitudes: Vec<f64>,
    /// Width of one bin: `rate / frame_len`.
    pub bin_hz: f64,
}

impl SpectralFrame {
    pub fn zeros(n_bins: usize, bin_hz: f64) -> Self {
        SpectralFrame {
            magnitudes: vec![0.0; n_bins],
            bin_hz,
        }
    }

    pub fn freq(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    pub fn nyquist(&self) -> f64 {
        self.freq(self.magnitudes.len() - 1)
    }
}

/// Splits a clip into frames starting at multiples of `hop`. A trailing
/// remainder becomes one extra zero-padded frame.
pub fn frame_signal(clip: &AudioClip, cfg: &AnalysisConfig) -> Result<Vec<Vec<f64>>, FeatureError> {
    let (len, frame_len, hop) = (clip.len(), cfg.frame_len, cfg.hop);
    if len < frame_len {
        return Err(FeatureError::ClipTooShort { len, frame_len });
    }
    let n_full = (len - frame_len) / hop + 1;
    let mut frames: Vec<Vec<f64>> = (0..n_full)
        .map(|i| clip.samples[i * hop..i * hop + frame_len].to_vec())
        .collect();
    if (len - frame_len) % hop != 0 {
        let start = n_full * hop;
        let mut tail = clip.samples[start..].to_vec();
        tail.resize(frame_len, 0.0);
        frames.push(tail);
    }
    Ok(frames)
}

/// Periodic Hann window.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Hann-windowed FFT magnitude analysis with a reusable plan.
#[derive(Clone)]
pub struct SpectrumAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    bin_hz: f64,
}

impl SpectrumAnalyzer {
    pub fn new(frame_len: usize, rate_hz: u32) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(frame_len);
        SpectrumAnalyzer {
            fft,
            window: hann_window(frame_len),
            bin_hz: rate_hz as f64 / frame_len as f64,
        }
    }

    pub fn frame_len(&self) -> usize {
        self.window.len()
    }

    pub fn analyze(&self, frame: &[f64]) -> Result<SpectralFrame, FeatureError> {
        let n = self.window.len();
        if frame.len() != n {
            return Err(FeatureError::FrameLength {
                expected: n,
                found: frame.len(),
            });
        }
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .zip(&self.window)
            .map(|(x, w)| Complex::new(x * w, 0.0))
            .collect();
        self.fft.process(&mut buf);
        Ok(SpectralFrame {
            magnitudes: buf[..=n / 2].iter().map(|c| c.norm()).collect(),
            bin_hz: self.bin_hz,
        })
    }
}

/// One-shot convenience over [`SpectrumAnalyzer`]; `frame` must have the
/// configured frame length.
pub fn power_spectrum(frame: &[f64], cfg: &AnalysisConfig, rate_hz: u32) -> Result<SpectralFrame, FeatureError> {
    SpectrumAnalyzer::new(cfg.frame_len, rate_hz).analyze(frame)
}

/// Fraction of adjacent sample pairs whose sign differs (zero counts as
/// non-negative).
pub fn zero_crossing_rate(frame: &[f64]) -> Result<f64, FeatureError> {
    if frame.len() < 2 {
        return Err(FeatureError::FrameTooShort(frame.len()));
    }
    let crossings = frame.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count();
    Ok(crossings as f64 / (frame.len() - 1) as f64)
}

/// Magnitude-weighted mean frequency; 0 for an all-zero spectrum.
pub fn spectral_centroid(spec: &SpectralFrame) -> f64 {
    let total: f64 = spec.magnitudes.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let weighted: f64 = spec.magnitudes.iter().enumerate().map(|(k, m)| spec.freq(k) * m).sum();
    weighted / total
}

/// Frequency of the lowest bin at which the cumulative energy reaches
/// `fraction` of the total; 0 for an all-zero spectrum.
pub fn spectral_rolloff(spec: &SpectralFrame, fraction: f64) -> f64 {
    let total: f64 = spec.magnitudes.iter().map(|m| m * m).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let target = fraction * total;
    let mut cumulative = 0.0;
    for (k, m) in spec.magnitudes.iter().enumerate() {
        cumulative += m * m;
        if cumulative >= target {
            return spec.freq(k);
        }
    }
    spec.nyquist()
}

fn l1_normalized(mags: &[f64]) -> Vec<f64> {
    let total: f64 = mags.iter().sum();
    if total > 0.0 {
        mags.iter().map(|m| m / total).collect()
    } else {
        vec![0.0; mags.len()]
    }
}

/// Euclidean distance between the L1-normalized magnitude spectra.
pub fn spectral_flux(cur: &SpectralFrame, prev: &SpectralFrame) -> Result<f64, FeatureError> {
    if cur.magnitudes.len() != prev.magnitudes.len() {
        return Err(FeatureError::BinMismatch(cur.magnitudes.len(), prev.magnitudes.len()));
    }
    let a = l1_normalized(&cur.magnitudes);
    let b = l1_normalized(&prev.magnitudes);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Orthonormal DCT-II.
pub fn dct_ii(input: &[f64]) -> Vec<f64> {
    let n = input.len();
    let nf = n as f64;
    (0..n)
        .map(|k| {
            let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            let sum: f64 = input
                .iter()
                .enumerate()
                .map(|(i, x)| x * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos())
                .sum();
            scale * sum
        })
        .collect()
}

/// Orthonormal DCT-III, the inverse of [`dct_ii`].
pub fn dct_iii(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    let nf = n as f64;
    (0..n)
        .map(|i| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    scale * c * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos()
                })
                .sum()
        })
        .collect()
}

/// Triangular filters equally spaced on the mel scale, stored densely over
/// the spectrum bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    weights: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_bins: usize, bin_hz: f64, fmin_hz: f64, fmax_hz: f64) -> Self {
        let (mel_lo, mel_hi) = (hz_to_mel(fmin_hz), hz_to_mel(fmax_hz));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let weights = (0..n_mels)
            .map(|m| {
                let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        if f <= lo || f >= hi {
                            0.0
                        } else if f <= center {
                            (f - lo) / (center - lo)
                        } else {
                            (hi - f) / (hi - center)
                        }
                    })
                    .collect()
            })
            .collect();
        MelFilterbank { weights }
    }

    pub fn n_filters(&self) -> usize {
        self.weights.len()
    }

    /// Filter energies of the power spectrum `|X|^2`.
    pub fn energies(&self, spec: &SpectralFrame) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(&spec.magnitudes).map(|(w, m)| w * m * m).sum())
            .collect()
    }
}

/// Cepstral coefficients `0..n_mfcc` of one spectrum: mel filterbank energies,
/// natural log floored at 1e-10, orthonormal DCT-II.
pub fn mfcc(spec: &SpectralFrame, cfg: &AnalysisConfig) -> Result<Vec<f64>, FeatureError> {
    if cfg.n_mfcc > cfg.n_mels {
        return Err(FeatureError::InvalidConfig(format!(
            "n_mfcc {} exceeds n_mels {}",
            cfg.n_mfcc, cfg.n_mels
        )));
    }
    let fmax = cfg.fmax_hz.unwrap_or_else(|| spec.nyquist());
    let bank = MelFilterbank::new(cfg.n_mels, spec.magnitudes.len(), spec.bin_hz, cfg.fmin_hz, fmax);
    Ok(mfcc_with(&bank, spec, cfg.n_mfcc))
}

fn mfcc_with(bank: &MelFilterbank, spec: &SpectralFrame, n_mfcc: usize) -> Vec<f64> {
    let logs: Vec<f64> = bank.energies(spec).iter().map(|e| e.max(LOG_FLOOR).ln()).collect();
    let mut coeffs = dct_ii(&logs);
    coeffs.truncate(n_mfcc);
    coeffs
}

/// Pitch class of a frequency, with class 9 at the reference (A).
pub fn pitch_class(freq_hz: f64, ref_hz: f64) -> usize {
    let semitones = (12.0 * (freq_hz / ref_hz).log2()).round() as i64;
    (9 + semitones).rem_euclid(12) as usize
}

fn chroma_map(n_bins: usize, bin_hz: f64, ref_hz: f64) -> Vec<Option<usize>> {
    (0..n_bins)
        .map(|k| {
            let f = k as f64 * bin_hz;
            (f > CHROMA_MIN_HZ).then(|| pitch_class(f, ref_hz))
        })
        .collect()
}

fn chroma_with(map: &[Option<usize>], spec: &SpectralFrame) -> Vec<f64> {
    let mut profile = vec![0.0; CHROMA_BINS];
    for (class, m) in map.iter().zip(&spec.magnitudes) {
        if let Some(c) = class {
            profile[*c] += m;
        }
    }
    let norm = profile.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        profile.iter_mut().for_each(|v| *v /= norm);
    }
    profile
}

/// 12-bin L2-normalized pitch-class profile of the magnitudes above 20 Hz.
pub fn chroma(spec: &SpectralFrame, cfg: &AnalysisConfig) -> Vec<f64> {
    let map = chroma_map(spec.magnitudes.len(), spec.bin_hz, cfg.chroma_ref_hz);
    chroma_with(&map, spec)
}

/// A labeled, named feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub names: Arc<[String]>,
    pub label: String,
}

/// Precomputed state for extracting features from many clips at one rate.
pub struct FeatureExtractor {
    cfg: AnalysisConfig,
    rate_hz: u32,
    analyzer: SpectrumAnalyzer,
    bank: MelFilterbank,
    chroma_map: Vec<Option<usize>>,
    names: Arc<[String]>,
}

impl FeatureExtractor {
    pub fn new(cfg: &AnalysisConfig, rate_hz: u32) -> Result<Self, FeatureError> {
        cfg.validate(rate_hz)?;
        let analyzer = SpectrumAnalyzer::new(cfg.frame_len, rate_hz);
        let bin_hz = rate_hz as f64 / cfg.frame_len as f64;
        let n_bins = cfg.n_bins();
        Ok(FeatureExtractor {
            bank: MelFilterbank::new(cfg.n_mels, n_bins, bin_hz, cfg.fmin_hz, cfg.fmax(rate_hz)),
            chroma_map: chroma_map(n_bins, bin_hz, cfg.chroma_ref_hz),
            names: cfg.feature_names().into(),
            cfg: cfg.clone(),
            rate_hz,
            analyzer,
        })
    }

    pub fn feature_names(&self) -> &Arc<[String]> {
        &self.names
    }

    /// Base descriptors of every frame, in frame order.
    pub fn frame_features(&self, clip: &AudioClip) -> Result<Vec<Vec<f64>>, FeatureError> {
        if clip.sample_rate_hz != self.rate_hz {
            return Err(FeatureError::InvalidConfig(format!(
                "extractor built for {} Hz, clip is {} Hz",
                self.rate_hz, clip.sample_rate_hz
            )));
        }
        let frames = frame_signal(clip, &self.cfg)?;
        let mut prev = SpectralFrame::zeros(self.cfg.n_bins(), self.analyzer.bin_hz);
        let mut rows = Vec::with_capacity(frames.len());
        for frame in &frames {
            let spec = self.analyzer.analyze(frame)?;
            let mut row = Vec::with_capacity(4 + self.cfg.n_mfcc + CHROMA_BINS);
            row.push(zero_crossing_rate(frame)?);
            row.push(spectral_centroid(&spec));
            row.push(spectral_rolloff(&spec, self.cfg.rolloff_fraction));
            row.push(spectral_flux(&spec, &prev)?);
            row.extend(mfcc_with(&self.bank, &spec, self.cfg.n_mfcc));
            row.extend(chroma_with(&self.chroma_map, &spec));
            rows.push(row);
            prev = spec;
        }
        Ok(rows)
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<Vec<FeatureVector>, FeatureError> {
        let rows = self.frame_features(clip)?;
        let windows: Vec<&[Vec<f64>]> = match self.cfg.texture_frames {
            1 => vec![&rows[..]],
            k if rows.len() < k => vec![&rows[..]],
            k => rows.chunks_exact(k).collect(),
        };
        let label = clip.label.clone().unwrap_or_default();
        Ok(windows
            .into_iter()
            .map(|w| FeatureVector {
                values: aggregate(w),
                names: Arc::clone(&self.names),
                label: label.clone(),
            })
            .collect())
    }
}

/// Mean of every column followed by the population standard deviation of
/// every column (Welford updates, exact zero for constant columns).
fn aggregate(window: &[Vec<f64>]) -> Vec<f64> {
    let width = window[0].len();
    let mut mean = vec![0.0; width];
    let mut m2 = vec![0.0; width];
    for (i, row) in window.iter().enumerate() {
        let k = (i + 1) as f64;
        for j in 0..width {
            let delta = row[j] - mean[j];
            mean[j] += delta / k;
            m2[j] += delta * (row[j] - mean[j]);
        }
    }
    let n = window.len() as f64;
    let stds = m2.iter().map(|v| (v / n).max(0.0).sqrt());
    mean.iter().copied().chain(stds).collect()
}

pub fn extract_features(clip: &AudioClip, cfg: &AnalysisConfig) -> Result<Vec<FeatureVector>, FeatureError> {
    FeatureExtractor::new(cfg, clip.sample_rate_hz)?.extract(clip)
}
