//! Mono clip ingestion: 16-bit PCM WAV reading and writing, fixed-length
//! clipping, peak normalization, and a seeded stroke synthesizer used to
//! build labeled corpora.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scale between 16-bit integer samples and unit amplitudes.
const PCM16_SCALE: f64 = 32768.0;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("audio file not found: {0}")]
    NotFound(PathBuf),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed RIFF/WAVE file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("unsupported encoding in {path}: {reason}")]
    UnsupportedEncoding { path: PathBuf, reason: String },
    #[error("sample rate mismatch in {path}: expected {expected} Hz, found {found} Hz")]
    RateMismatch {
        path: PathBuf,
        expected: u32,
        found: u32,
    },
    #[error("duration must be positive, got {0}")]
    InvalidDuration(f64),
    #[error("invalid stroke spec: {0}")]
    InvalidSpec(String),
    #[error("partial at {freq_hz} Hz is at or above the Nyquist frequency {nyquist_hz} Hz")]
    AboveNyquist { freq_hz: f64, nyquist_hz: f64 },
}

/// A mono clip. Amplitudes are expected to lie in [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
    pub label: Option<String>,
    pub source_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        AudioClip {
            samples,
            sample_rate_hz,
            label: None,
            source_id: String::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_source(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> AudioError {
    AudioError::Malformed {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Reads a 16-bit PCM WAV file with one or two channels.
///
/// Stereo input is downmixed by averaging the two channels; samples are
/// scaled to [-1, 1] by dividing by 32768. The file's rate must equal
/// `expected_rate_hz` since no resampling is performed.
pub fn load_wav(path: impl AsRef<Path>, expected_rate_hz: u32) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => AudioError::NotFound(path.to_path_buf()),
        _ => AudioError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    let clip = decode_wav(&bytes, path)?;
    if clip.sample_rate_hz != expected_rate_hz {
        return Err(AudioError::RateMismatch {
            path: path.to_path_buf(),
            expected: expected_rate_hz,
            found: clip.sample_rate_hz,
        });
    }
    Ok(clip)
}

/// Decodes an in-memory WAV image. `origin` is only used in error messages
/// and as the clip's source id.
pub fn decode_wav(bytes: &[u8], origin: &Path) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed(origin, "missing RIFF/WAVE signature"));
    }

    let mut format: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| malformed(origin, format!("chunk {:?} overruns file", String::from_utf8_lossy(id))))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(malformed(origin, "fmt chunk shorter than 16 bytes"));
                }
                let mut tag = le_u16(body, 0);
                let channels = le_u16(body, 2);
                let rate = le_u32(body, 4);
                let bits = le_u16(body, 14);
                // WAVE_FORMAT_EXTENSIBLE carries the real tag in the sub-format GUID.
                if tag == 0xFFFE && body.len() >= 26 {
                    tag = le_u16(body, 24);
                }
                format = Some((tag, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }

    let (tag, channels, rate, bits) = format.ok_or_else(|| malformed(origin, "no fmt chunk"))?;
    let data = data.ok_or_else(|| malformed(origin, "no data chunk"))?;
    let unsupported = |reason: String| AudioError::UnsupportedEncoding {
        path: origin.to_path_buf(),
        reason,
    };
    if tag != 1 {
        return Err(unsupported(format!("format tag {tag} is not PCM")));
    }
    if bits != 16 {
        return Err(unsupported(format!("{bits}-bit samples, only 16-bit is supported")));
    }
    if channels != 1 && channels != 2 {
        return Err(unsupported(format!("{channels} channels, only mono or stereo is supported")));
    }
    if rate == 0 {
        return Err(malformed(origin, "sample rate is zero"));
    }

    let frame_bytes = 2 * channels as usize;
    if data.len() < frame_bytes {
        return Err(malformed(origin, "data chunk holds no samples"));
    }
    let samples: Vec<f64> = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let left = i16::from_le_bytes([frame[0], frame[1]]) as f64 / PCM16_SCALE;
            if channels == 2 {
                let right = i16::from_le_bytes([frame[2], frame[3]]) as f64 / PCM16_SCALE;
                (left + right) / 2.0
            } else {
                left
            }
        })
        .collect();

    Ok(AudioClip {
        samples,
        sample_rate_hz: rate,
        label: None,
        source_id: origin.display().to_string(),
    })
}

/// Encodes a mono clip as a canonical 44-byte-header 16-bit PCM WAV image.
/// Amplitudes are clamped to [-1, 1] and rounded to the nearest step.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        let q = (s.clamp(-1.0, 1.0) * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> io::Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode_wav(clip))?;
    file.flush()
}

/// Truncates or zero-pads the clip to exactly `round(duration_s * rate)` samples.
pub fn clip_to_duration(clip: &AudioClip, duration_s: f64) -> Result<AudioClip, AudioError> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(AudioError::InvalidDuration(duration_s));
    }
    let target = (duration_s * clip.sample_rate_hz as f64).round() as usize;
    let mut out = clip.clone();
    out.samples.resize(target, 0.0);
    Ok(out)
}

/// Scales the clip so its largest absolute amplitude is 1. All-zero clips
/// are returned unchanged.
pub fn peak_normalize(clip: &AudioClip) -> AudioClip {
    let peak = clip.peak();
    let mut out = clip.clone();
    if peak > 0.0 && peak != 1.0 {
        let gain = 1.0 / peak;
        for s in &mut out.samples {
            *s *= gain;
        }
    }
    out
}

/// Parameters of one synthetic stroke: a handful of exponentially decaying
/// partials plus broadband noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrokeSpec {
    pub label: String,
    pub partial_freqs_hz: Vec<f64>,
    pub partial_amps: Vec<f64>,
    /// Amplitude time constant in seconds; `f64::INFINITY` gives a steady tone.
    pub decay_s: f64,
    pub noise_level: f64,
    pub duration_s: f64,
}

impl StrokeSpec {
    pub fn validate(&self) -> Result<(), AudioError> {
        let bad = |m: String| Err(AudioError::InvalidSpec(format!("{}: {m}", self.label)));
        if self.label.is_empty() {
            return Err(AudioError::InvalidSpec("empty label".into()));
        }
        if self.partial_freqs_hz.is_empty() {
            return bad("at least one partial is required".into());
        }
        if self.partial_freqs_hz.len() != self.partial_amps.len() {
            return bad(format!(
                "{} partial frequencies but {} amplitudes",
                self.partial_freqs_hz.len(),
                self.partial_amps.len()
            ));
        }
        if self.partial_freqs_hz.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return bad("partial frequencies must be positive".into());
        }
        if self.partial_amps.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return bad("partial amplitudes must be positive".into());
        }
        if !(self.decay_s > 0.0) {
            return bad(format!("decay must be positive, got {}", self.decay_s));
        }
        if !(0.0..=1.0).contains(&self.noise_level) {
            return bad(format!("noise level must be in [0, 1], got {}", self.noise_level));
        }
        if !(self.duration_s > 0.0 && self.duration_s <= 1.0) {
            return bad(format!("duration must be in (0, 1], got {}", self.duration_s));
        }
        Ok(())
    }

    pub fn check_nyquist(&self, rate_hz: u32) -> Result<(), AudioError> {
        let nyquist_hz = rate_hz as f64 / 2.0;
        match self.partial_freqs_hz.iter().find(|&&f| f >= nyquist_hz) {
            Some(&freq_hz) => Err(AudioError::AboveNyquist { freq_hz, nyquist_hz }),
            None => Ok(()),
        }
    }
}

/// Renders a stroke. The output is a pure function of `(spec, rate_hz, seed)`
/// and is peak-normalized.
pub fn synthesize_stroke(spec: &StrokeSpec, rate_hz: u32, seed: u64) -> Result<AudioClip, AudioError> {
    spec.validate()?;
    if rate_hz == 0 {
        return Err(AudioError::InvalidSpec("sample rate must be positive".into()));
    }
    spec.check_nyquist(rate_hz)?;

    let n = ((spec.duration_s * rate_hz as f64).round() as usize).max(1);
    let rate = rate_hz as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two_pi = 2.0 * std::f64::consts::PI;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let envelope = (-t / spec.decay_s).exp();
            let tone: f64 = spec
                .partial_freqs_hz
                .iter()
                .zip(&spec.partial_amps)
                .map(|(f, a)| a * (two_pi * f * t).sin())
                .sum();
            let noise = if spec.noise_level > 0.0 {
                spec.noise_level * rng.gen_range(-1.0..=1.0)
            } else {
                0.0
            };
            envelope * tone + noise
        })
        .collect();

    let clip = AudioClip::new(samples, rate_hz)
        .with_label(spec.label.clone())
        .with_source(format!("synth:{}:{seed}", spec.label));
    Ok(peak_normalize(&clip))
}

/// Per-clip random perturbation applied to a stroke spec when generating a
/// corpus, so clips of one class are not near-copies of each other.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Variation {
    /// Relative spread of a common pitch factor applied to every partial.
    pub pitch: f64,
    /// Relative spread applied independently to each partial amplitude.
    pub amp: f64,
    /// Relative spread of the decay constant.
    pub decay: f64,
    /// Relative spread of the noise level.
    pub noise: f64,
}

impl Variation {
    pub fn is_none(&self) -> bool {
        *self == Variation::default()
    }

    /// Draws a perturbed copy of `spec`. Partials that would reach Nyquist
    /// are kept just below it.
    pub fn apply(&self, spec: &StrokeSpec, rate_hz: u32, rng: &mut impl Rng) -> StrokeSpec {
        let mut spread = |rel: f64| if rel > 0.0 { 1.0 + rng.gen_range(-rel..=rel) } else { 1.0 };
        let pitch = spread(self.pitch);
        let ceiling = rate_hz as f64 / 2.0 * 0.999;
        let partial_freqs_hz = spec.partial_freqs_hz.iter().map(|f| (f * pitch).min(ceiling)).collect();
        let partial_amps = spec.partial_amps.iter().map(|a| a * spread(self.amp)).collect();
        let decay_s = spec.decay_s * spread(self.decay);
        let noise_level = (spec.noise_level * spread(self.noise)).clamp(0.0, 1.0);
        StrokeSpec {
            label: spec.label.clone(),
            partial_freqs_hz,
            partial_amps,
            decay_s,
            noise_level,
            duration_s: spec.duration_s,
        }
    }
}

/// One line of a synthetic-corpus spec file.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthEntry {
    pub spec: StrokeSpec,
    pub variation: Variation,
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("{key}: cannot parse {v:?} as a number")))
        .collect()
}

fn parse_num(key: &str, value: &str) -> Result<f64, String> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| format!("{key}: cannot parse {value:?} as a number"))
}

impl FromStr for SynthEntry {
    type Err = String;

    /// Parses `key=value` pairs separated by whitespace:
    /// `label`, `freqs`, `amps`, `decay`, `noise`, `duration`, and the optional
    /// variation keys `vary_pitch`, `vary_amp`, `vary_decay`, `vary_noise`.
    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let mut label = None;
        let mut freqs = None;
        let mut amps = None;
        let mut decay = None;
        let mut noise = None;
        let mut duration = None;
        let mut variation = Variation::default();
        for token in line.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, found {token:?}"))?;
            match key {
                "label" => label = Some(value.to_string()),
                "freqs" => freqs = Some(parse_list(key, value)?),
                "amps" => amps = Some(parse_list(key, value)?),
                "decay" => decay = Some(parse_num(key, value)?),
                "noise" => noise = Some(parse_num(key, value)?),
                "duration" => duration = Some(parse_num(key, value)?),
                "vary_pitch" => variation.pitch = parse_num(key, value)?,
                "vary_amp" => variation.amp = parse_num(key, value)?,
                "vary_decay" => variation.decay = parse_num(key, value)?,
                "vary_noise" => variation.noise = parse_num(key, value)?,
                other => return Err(format!("unknown key {other:?}")),
            }
        }
        let missing = |k: &str| format!("missing required key {k:?}");
        let spec = StrokeSpec {
            label: label.ok_or_else(|| missing("label"))?,
            partial_freqs_hz: freqs.ok_or_else(|| missing("freqs"))?,
            partial_amps: amps.ok_or_else(|| missing("amps"))?,
            decay_s: decay.ok_or_else(|| missing("decay"))?,
            noise_level: noise.unwrap_or(0.0),
            duration_s: duration.ok_or_else(|| missing("duration"))?,
        };
        spec.validate().map_err(|e| e.to_string())?;
        for (name, v) in [
            ("vary_pitch", variation.pitch),
            ("vary_amp", variation.amp),
            ("vary_decay", variation.decay),
            ("vary_noise", variation.noise),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(format!("{name} must be in [0, 1), got {v}"));
            }
        }
        Ok(SynthEntry { spec, variation })
    }
}

fn fmt_list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for SynthEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.spec;
        write!(
            f,
            "label={} freqs={} amps={} decay={} noise={} duration={}",
            s.label,
            fmt_list(&s.partial_freqs_hz),
            fmt_list(&s.partial_amps),
            s.decay_s,
            s.noise_level,
            s.duration_s
        )?;
        let v = &self.variation;
        for (name, value) in [
            ("vary_pitch", v.pitch),
            ("vary_amp", v.amp),
            ("vary_decay", v.decay),
            ("vary_noise", v.noise),
        ] {
            if value != 0.0 {
                write!(f, " {name}={value}")?;
            }
        }
        Ok(())
    }
}

/// Parses a spec file: one stroke per line, `#` starts a comment.
pub fn parse_spec_file(text: &str) -> Result<Vec<SynthEntry>, AudioError> {
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let entry: SynthEntry = line
            .parse()
            .map_err(|e| AudioError::InvalidSpec(format!("line {}: {e}", lineno + 1)))?;
        if entries.iter().any(|e: &SynthEntry| e.spec.label == entry.spec.label) {
            return Err(AudioError::InvalidSpec(format!(
                "line {}: duplicate label {:?}",
                lineno + 1,
                entry.spec.label
            )));
        }
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(AudioError::InvalidSpec("spec file defines no strokes".into()));
    }
    Ok(entries)
}
