//! Built-in synthetic corpus: thirteen tabla-like strokes.
//!
//! Treble strokes sit on a right-hand drum tuned to C# (277.18 Hz) with the
//! near-harmonic overtones of a loaded membrane; bass strokes sit on a
//! left-hand drum around 90-110 Hz. Compound strokes sound both. `ti` and
//! `ta` share their partials and differ only in decay and noise, so they
//! overlap in feature space.

use crate::audio_io::{parse_spec_file, SynthEntry};

/// The two default classes built to overlap.
pub const OVERLAPPING_PAIR: [&str; 2] = ["ti", "ta"];

pub const DEFAULT_PRESET: &str = "\
# label  partials (Hz)  amplitudes  decay (s)  noise  duration (s)  per-clip variation
label=na   freqs=277.18,554.37,831.55,1108.7,1385.9 amps=1,0.6,0.45,0.3,0.2   decay=0.30  noise=0.02 duration=0.5 vary_pitch=0.015 vary_amp=0.15 vary_decay=0.15 vary_noise=0.2
label=tin  freqs=277.18,554.37,831.55        amps=0.4,1,0.7                    decay=0.45  noise=0.01 duration=0.5 vary_pitch=0.015 vary_amp=0.15 vary_decay=0.15 vary_noise=0.2
label=tun  freqs=277.18,554.37               amps=1,0.25                       decay=0.40  noise=0.01 duration=0.5 vary_pitch=0.015 vary_amp=0.15 vary_decay=0.15 vary_noise=0.2
label=te   freqs=1650,2480,3310              amps=1,0.7,0.5                    decay=0.025 noise=0.10 duration=0.2 vary_pitch=0.03 vary_amp=0.2 vary_decay=0.2 vary_noise=0.2
label=re   freqs=1100,2200,4400              amps=1,0.8,0.6                    decay=0.020 noise=0.18 duration=0.2 vary_pitch=0.03 vary_amp=0.2 vary_decay=0.2 vary_noise=0.2
label=ti   freqs=831.55,1663.1,2494.7        amps=1,0.5,0.3                    decay=0.042 noise=0.055 duration=0.3 vary_pitch=0.02 vary_amp=0.2 vary_decay=0.2 vary_noise=0.2
label=ta   freqs=831.55,1663.1,2494.7        amps=1,0.5,0.3                    decay=0.065 noise=0.065 duration=0.3 vary_pitch=0.02 vary_amp=0.2 vary_decay=0.2 vary_noise=0.2
label=ge   freqs=98,196,294                  amps=1,0.4,0.15                   decay=0.35  noise=0.02 duration=0.5 vary_pitch=0.03 vary_amp=0.15 vary_decay=0.15 vary_noise=0.2
label=ke   freqs=110,330,760                 amps=1,0.6,0.4                    decay=0.030 noise=0.25 duration=0.2 vary_pitch=0.03 vary_amp=0.2 vary_decay=0.2 vary_noise=0.2
label=dha  freqs=98,196,277.18,554.37,831.55 amps=0.9,0.35,1,0.6,0.4          decay=0.35  noise=0.02 duration=0.5 vary_pitch=0.015 vary_amp=0.15 vary_decay=0.15 vary_noise=0.2
label=dhin freqs=98,196,554.37,831.55        amps=0.9,0.35,1,0.7              decay=0.40  noise=0.02 duration=0.5 vary_pitch=0.015 vary_amp=0.15 vary_decay=0.15 vary_noise=0.2
label=kat  freqs=140,420,1250                amps=1,0.5,0.4                    decay=0.015 noise=0.30 duration=0.2 vary_pitch=0.03 vary_amp=0.2 vary_decay=0.2 vary_noise=0.2
label=tit  freqs=1245,2490,3735,4980         amps=1,0.6,0.4,0.3                decay=0.035 noise=0.06 duration=0.25 vary_pitch=0.03 vary_amp=0.2 vary_decay=0.2 vary_noise=0.2
";

pub fn default_preset() -> Vec<SynthEntry> {
    parse_spec_file(DEFAULT_PRESET).expect("built-in preset parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_has_thirteen_distinct_strokes() {
        let entries = default_preset();
        assert_eq!(entries.len(), 13);
        for e in &entries {
            e.spec.check_nyquist(44100).unwrap();
        }
        let find = |l: &str| entries.iter().find(|e| e.spec.label == l).unwrap();
        let (a, b) = (find(OVERLAPPING_PAIR[0]), find(OVERLAPPING_PAIR[1]));
        assert_eq!(a.spec.partial_freqs_hz, b.spec.partial_freqs_hz);
        assert_ne!(a.spec.decay_s, b.spec.decay_s);
    }
}
