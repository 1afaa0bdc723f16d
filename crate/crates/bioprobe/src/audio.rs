//! WAV decoding, resampling, and fixed-hop window planning.
//!
//! Recordings are decoded to mono f32 in [-1, 1], brought to the embedding
//! model's sample rate, and split into consecutive non-overlapping windows
//! (hop equal to the window length). A trailing partial window is kept and
//! zero-padded rather than dropped: annotations are routinely much shorter
//! than a model window, so dropping tails would discard most of the data.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a RIFF/WAVE file")]
    NotWave { path: String },
    #[error("{path}: unsupported codec: {detail}")]
    UnsupportedCodec { path: String, detail: String },
    #[error("{path}: truncated file: {detail}")]
    Truncated { path: String, detail: String },
    #[error("{path}: data chunk is empty")]
    EmptyData { path: String },
    #[error("{path}: non-finite sample at frame {frame}")]
    NonFiniteSample { path: String, frame: usize },
    #[error("audio clip must contain at least one sample")]
    EmptyClip,
    #[error("sample {index} is not finite")]
    NonFiniteClip { index: usize },
    #[error("sample rate must be > 0")]
    ZeroSampleRate,
    #[error("model spec `{name}` is invalid: {detail}")]
    BadModelSpec { name: String, detail: String },
    #[error("failed to parse model spec {path}: {message}")]
    ModelSpecFile { path: String, message: String },
    #[error("clip sample rate {clip_hz} Hz does not match model rate {model_hz} Hz")]
    SampleRateMismatch { clip_hz: u32, model_hz: u32 },
}

/// Mono audio at a known sample rate, amplitudes in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub sample_rate_hz: u32,
    pub samples: Vec<f32>,
}

impl AudioClip {
    pub fn new(sample_rate_hz: u32, samples: Vec<f32>) -> Result<Self, AudioError> {
        if sample_rate_hz == 0 {
            return Err(AudioError::ZeroSampleRate);
        }
        if samples.is_empty() {
            return Err(AudioError::EmptyClip);
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFiniteClip { index });
        }
        Ok(Self {
            sample_rate_hz,
            samples,
        })
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
}

/// How a model lays out its per-window output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputLayout {
    /// One embedding vector per window.
    Vector,
    /// A (frames, dim) matrix per window; frame count depends linearly on
    /// the window length: `round(window_s * frames_per_second) + frame_offset`.
    TimeMajor {
        frames_per_second: u32,
        frame_offset: i64,
    },
}

/// Properties of an embedding model as the harness needs to know them:
/// expected sample rate, window size, output dimension and layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub sample_rate_hz: u32,
    pub window_s: f64,
    pub embedding_dim: usize,
    pub output_layout: OutputLayout,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), AudioError> {
        let fail = |detail: &str| {
            Err(AudioError::BadModelSpec {
                name: self.name.clone(),
                detail: detail.to_string(),
            })
        };
        if self.sample_rate_hz == 0 {
            return fail("sample_rate_hz must be > 0");
        }
        if !(self.window_s > 0.0) || !self.window_s.is_finite() {
            return fail("window_s must be > 0");
        }
        if self.embedding_dim == 0 {
            return fail("embedding_dim must be > 0");
        }
        if self.frames_per_window() < 1 {
            return fail("output layout yields fewer than one frame per window");
        }
        Ok(())
    }

    /// Window length in samples at the model's rate.
    pub fn window_len_samples(&self) -> usize {
        (self.window_s * self.sample_rate_hz as f64).round() as usize
    }

    /// Rows of one window's output: 1 for `Vector`, the layout formula for
    /// `TimeMajor`.
    pub fn frames_per_window(&self) -> usize {
        match self.output_layout {
            OutputLayout::Vector => 1,
            OutputLayout::TimeMajor {
                frames_per_second,
                frame_offset,
            } => {
                let frames =
                    (self.window_s * frames_per_second as f64).round() as i64 + frame_offset;
                frames.max(0) as usize
            }
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AudioError> {
        let path_str = path.as_ref().display().to_string();
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| AudioError::Io {
            path: path_str.clone(),
            source: e,
        })?;
        let spec: ModelSpec =
            serde_json::from_str(&text).map_err(|e| AudioError::ModelSpecFile {
                path: path_str,
                message: e.to_string(),
            })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AudioError> {
        let text = serde_json::to_string_pretty(self).expect("model spec serializes");
        std::fs::write(path.as_ref(), text).map_err(|e| AudioError::Io {
            path: path.as_ref().display().to_string(),
            source: e,
        })
    }
}

/// One planned window: a half-open `[start, end)` sample interval of the
/// full window length. `padded` marks a tail window that extends past the
/// clip and is zero-filled on extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub end: usize,
    pub padded: bool,
}

/// Consecutive non-overlapping windows covering a clip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowPlan {
    pub window_len: usize,
    pub windows: Vec<Window>,
}

impl WindowPlan {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// Plans fixed-size windows with hop equal to the window length. Windows
/// start at 0, L, 2L, ...; a final partial window is kept and marked padded;
/// a clip shorter than one window yields exactly one padded window.
pub fn plan_windows(n_samples: usize, sample_rate_hz: u32, window_s: f64) -> WindowPlan {
    assert!(n_samples >= 1, "cannot window an empty clip");
    let window_len = ((window_s * sample_rate_hz as f64).round() as usize).max(1);
    let n_windows = n_samples.div_ceil(window_len);
    let windows = (0..n_windows)
        .map(|i| {
            let start = i * window_len;
            Window {
                start,
                end: start + window_len,
                padded: start + window_len > n_samples,
            }
        })
        .collect();
    WindowPlan {
        window_len,
        windows,
    }
}

/// Extracts one planned window from a clip, zero-padding past the end.
pub fn extract_window(samples: &[f32], window: &Window) -> Vec<f32> {
    let mut out = vec![0.0f32; window.end - window.start];
    let avail = samples.len().saturating_sub(window.start);
    let n = avail.min(out.len());
    out[..n].copy_from_slice(&samples[window.start..window.start + n]);
    out
}

/// Resamples by linear interpolation. Output length is
/// `round(len * target_hz / source_hz)`; equal rates return the input
/// unchanged.
pub fn resample(clip: &AudioClip, target_hz: u32) -> Result<AudioClip, AudioError> {
    if target_hz == 0 {
        return Err(AudioError::ZeroSampleRate);
    }
    if target_hz == clip.sample_rate_hz {
        return Ok(clip.clone());
    }
    let src = &clip.samples;
    let ratio = clip.sample_rate_hz as f64 / target_hz as f64;
    let out_len =
        ((src.len() as f64 * target_hz as f64 / clip.sample_rate_hz as f64).round() as usize)
            .max(1);
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let pos = i as f64 * ratio;
        let idx = pos.floor() as usize;
        if idx + 1 >= src.len() {
            out.push(*src.last().expect("clip is non-empty"));
        } else {
            let frac = (pos - idx as f64) as f32;
            out.push(src[idx] + frac * (src[idx + 1] - src[idx]));
        }
    }
    AudioClip::new(target_hz, out)
}

const FMT_PCM: u16 = 1;
const FMT_IEEE_FLOAT: u16 = 3;

/// Reads a RIFF/WAVE file: PCM 16/24/32-bit integer or 32-bit float, one or
/// two channels. Multi-channel audio is averaged to mono; integer samples
/// are scaled to [-1, 1) by the type's magnitude (2^(bits-1)).
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path_str = path.as_ref().display().to_string();
    let bytes = std::fs::read(path.as_ref()).map_err(|e| AudioError::Io {
        path: path_str.clone(),
        source: e,
    })?;
    decode_wav(&bytes, &path_str)
}

fn decode_wav(bytes: &[u8], path: &str) -> Result<AudioClip, AudioError> {
    let not_wave = || AudioError::NotWave {
        path: path.to_string(),
    };
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(not_wave());
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    let mut offset = 12usize;
    while offset + 8 <= bytes.len() {
        let id = &bytes[offset..offset + 4];
        let size = u32::from_le_bytes(bytes[offset + 4..offset + 8].try_into().unwrap()) as usize;
        let body_start = offset + 8;
        if body_start + size > bytes.len() {
            return Err(AudioError::Truncated {
                path: path.to_string(),
                detail: format!(
                    "chunk `{}` declares {} bytes but only {} remain",
                    String::from_utf8_lossy(id),
                    size,
                    bytes.len() - body_start
                ),
            });
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(AudioError::Truncated {
                        path: path.to_string(),
                        detail: "fmt chunk shorter than 16 bytes".into(),
                    });
                }
                let u16_at = |i: usize| u16::from_le_bytes(body[i..i + 2].try_into().unwrap());
                let u32_at = |i: usize| u32::from_le_bytes(body[i..i + 4].try_into().unwrap());
                fmt = Some((u16_at(0), u16_at(2), u32_at(4), u16_at(14)));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned; odd sizes carry one pad byte.
        offset = body_start + size + (size & 1);
    }

    let (format, channels, sample_rate, bits) = fmt.ok_or_else(not_wave)?;
    let data = data.ok_or_else(|| AudioError::Truncated {
        path: path.to_string(),
        detail: "missing data chunk".into(),
    })?;
    if data.is_empty() {
        return Err(AudioError::EmptyData {
            path: path.to_string(),
        });
    }

    let unsupported = |detail: String| AudioError::UnsupportedCodec {
        path: path.to_string(),
        detail,
    };
    if !(1..=2).contains(&channels) {
        return Err(unsupported(format!("{channels} channels (expected 1-2)")));
    }
    match (format, bits) {
        (FMT_PCM, 16) | (FMT_PCM, 24) | (FMT_PCM, 32) | (FMT_IEEE_FLOAT, 32) => {}
        _ => {
            return Err(unsupported(format!(
                "format tag {format} with {bits} bits per sample"
            )))
        }
    }

    let bytes_per_sample = bits as usize / 8;
    let frame_size = bytes_per_sample * channels as usize;
    if data.len() % frame_size != 0 {
        return Err(AudioError::Truncated {
            path: path.to_string(),
            detail: format!(
                "data length {} is not a multiple of the {frame_size}-byte frame",
                data.len()
            ),
        });
    }

    let n_frames = data.len() / frame_size;
    let mut samples = Vec::with_capacity(n_frames);
    for frame in 0..n_frames {
        let mut acc = 0.0f64;
        for ch in 0..channels as usize {
            let at = frame * frame_size + ch * bytes_per_sample;
            let value = match (format, bits) {
                (FMT_PCM, 16) => {
                    i16::from_le_bytes(data[at..at + 2].try_into().unwrap()) as f64 / 32768.0
                }
                (FMT_PCM, 24) => {
                    let raw = (data[at] as i32)
                        | ((data[at + 1] as i32) << 8)
                        | ((data[at + 2] as i8 as i32) << 16);
                    raw as f64 / 8_388_608.0
                }
                (FMT_PCM, 32) => {
                    i32::from_le_bytes(data[at..at + 4].try_into().unwrap()) as f64
                        / 2_147_483_648.0
                }
                (FMT_IEEE_FLOAT, 32) => {
                    let v = f32::from_le_bytes(data[at..at + 4].try_into().unwrap());
                    if !v.is_finite() {
                        return Err(AudioError::NonFiniteSample {
                            path: path.to_string(),
                            frame,
                        });
                    }
                    (v as f64).clamp(-1.0, 1.0)
                }
                _ => unreachable!("codec validated above"),
            };
            acc += value;
        }
        samples.push((acc / channels as f64) as f32);
    }

    AudioClip::new(sample_rate, samples)
}

/// Writes 16-bit PCM WAV with 1 or 2 channels (used by fixtures and tests;
/// samples are clamped to [-1, 1] and quantized by rounding).
pub fn write_wav_pcm16(
    path: impl AsRef<Path>,
    sample_rate_hz: u32,
    channels: &[&[f32]],
) -> Result<(), AudioError> {
    assert!(
        (1..=2).contains(&channels.len()),
        "only 1-2 channels supported"
    );
    let n_frames = channels[0].len();
    assert!(
        channels.iter().all(|c| c.len() == n_frames),
        "channels must have equal length"
    );

    let n_channels = channels.len() as u16;
    let block_align = n_channels * 2;
    let byte_rate = sample_rate_hz * block_align as u32;
    let data_len = (n_frames * block_align as usize) as u32;

    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FMT_PCM.to_le_bytes());
    out.extend_from_slice(&n_channels.to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for frame in 0..n_frames {
        for channel in channels {
            let v = (channel[frame].clamp(-1.0, 1.0) as f64 * 32768.0).round();
            let q = v.clamp(i16::MIN as f64, i16::MAX as f64) as i16;
            out.extend_from_slice(&q.to_le_bytes());
        }
    }
    std::fs::write(path.as_ref(), out).map_err(|e| AudioError::Io {
        path: path.as_ref().display().to_string(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn temp_wav(build: impl FnOnce(&std::path::Path)) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.wav");
        build(&path);
        (dir, path)
    }

    fn raw_wav(format: u16, channels: u16, rate: u32, bits: u16, payload: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + payload.len() as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&format.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        let block = channels as u32 * bits as u32 / 8;
        out.extend_from_slice(&(rate * block).to_le_bytes());
        out.extend_from_slice(&(block as u16).to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        out.extend_from_slice(payload);
        out
    }

    #[test]
    fn one_second_of_pcm16_decodes_to_rate_samples() {
        let samples: Vec<f32> = (0..32000)
            .map(|i| 0.4 * (2.0 * std::f32::consts::PI * 440.0 * i as f32 / 32000.0).sin())
            .collect();
        let (_dir, path) = temp_wav(|p| write_wav_pcm16(p, 32000, &[&samples]).unwrap());
        let clip = read_wav(&path).unwrap();
        assert_eq!(clip.sample_rate_hz, 32000);
        assert_eq!(clip.len(), 32000);
        // 16-bit quantization error bound
        for (a, b) in clip.samples.iter().zip(&samples) {
            assert!((a - b).abs() < 1.0 / 32000.0);
        }
    }

    #[test]
    fn opposite_stereo_channels_average_to_silence() {
        let left = vec![0.5f32; 256];
        let right = vec![-0.5f32; 256];
        let (_dir, path) = temp_wav(|p| write_wav_pcm16(p, 16000, &[&left, &right]).unwrap());
        let clip = read_wav(&path).unwrap();
        assert_eq!(clip.len(), 256);
        assert!(clip.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn header_claiming_more_data_than_present_is_truncated() {
        let mut bytes = raw_wav(FMT_PCM, 1, 16000, 16, &[0u8; 32]);
        let len = bytes.len();
        // Inflate the data chunk's declared size past the file end.
        bytes[len - 36..len - 32].copy_from_slice(&1000u32.to_le_bytes());
        let (_dir, path) = temp_wav(|p| std::fs::write(p, &bytes).unwrap());
        assert!(matches!(
            read_wav(&path),
            Err(AudioError::Truncated { .. })
        ));
    }

    #[test]
    fn empty_data_chunk_is_rejected() {
        let bytes = raw_wav(FMT_PCM, 1, 16000, 16, &[]);
        let (_dir, path) = temp_wav(|p| std::fs::write(p, &bytes).unwrap());
        assert!(matches!(read_wav(&path), Err(AudioError::EmptyData { .. })));
    }

    #[test]
    fn unsupported_codec_is_rejected() {
        let bytes = raw_wav(FMT_PCM, 1, 16000, 8, &[0u8; 16]);
        let (_dir, path) = temp_wav(|p| std::fs::write(p, &bytes).unwrap());
        assert!(matches!(
            read_wav(&path),
            Err(AudioError::UnsupportedCodec { .. })
        ));

        let bytes = raw_wav(FMT_PCM, 4, 16000, 16, &[0u8; 16]);
        let (_dir, path) = temp_wav(|p| std::fs::write(p, &bytes).unwrap());
        assert!(matches!(
            read_wav(&path),
            Err(AudioError::UnsupportedCodec { .. })
        ));
    }

    #[test]
    fn pcm24_and_pcm32_and_float_scale_correctly() {
        // 24-bit: half scale = 0x400000
        let payload: Vec<u8> = [0x00u8, 0x00, 0x40].to_vec();
        let bytes = raw_wav(FMT_PCM, 1, 8000, 24, &payload);
        let (_dir, path) = temp_wav(|p| std::fs::write(p, &bytes).unwrap());
        let clip = read_wav(&path).unwrap();
        assert!((clip.samples[0] - 0.5).abs() < 1e-6);

        // 32-bit int: quarter scale
        let payload = (i32::MIN / 2).wrapping_neg().to_le_bytes().to_vec();
        let bytes = raw_wav(FMT_PCM, 1, 8000, 32, &payload);
        let (_dir, path) = temp_wav(|p| std::fs::write(p, &bytes).unwrap());
        let clip = read_wav(&path).unwrap();
        assert!((clip.samples[0] - 0.5).abs() < 1e-6);

        // 32-bit float passthrough
        let payload = 0.25f32.to_le_bytes().to_vec();
        let bytes = raw_wav(FMT_IEEE_FLOAT, 1, 8000, 32, &payload);
        let (_dir, path) = temp_wav(|p| std::fs::write(p, &bytes).unwrap());
        let clip = read_wav(&path).unwrap();
        assert_eq!(clip.samples[0], 0.25);
    }

    #[test]
    fn resample_same_rate_is_identity() {
        let clip = AudioClip::new(16000, (0..100).map(|i| (i as f32).sin()).collect()).unwrap();
        let out = resample(&clip, 16000).unwrap();
        assert_eq!(out, clip);
    }

    #[test]
    fn resample_preserves_constants() {
        let clip = AudioClip::new(32000, vec![0.25f32; 3200]).unwrap();
        for target in [8000, 16000, 44100, 48000] {
            let out = resample(&clip, target).unwrap();
            assert_eq!(
                out.len(),
                ((3200.0 * target as f64 / 32000.0).round()) as usize
            );
            assert!(out.samples.iter().all(|&s| (s - 0.25).abs() < 1e-7));
        }
    }

    #[test]
    fn downsampled_sine_matches_analytic_evaluation() {
        let f = 100.0f64;
        let src_rate = 32000u32;
        let dst_rate = 16000u32;
        let n = 32000usize;
        let samples: Vec<f32> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / src_rate as f64).sin() as f32)
            .collect();
        let clip = AudioClip::new(src_rate, samples).unwrap();
        let out = resample(&clip, dst_rate).unwrap();
        let mut max_err = 0.0f64;
        for (i, &s) in out.samples.iter().enumerate() {
            let expected = (2.0 * std::f64::consts::PI * f * i as f64 / dst_rate as f64).sin();
            max_err = max_err.max((s as f64 - expected).abs());
        }
        assert!(max_err < 1e-3, "max abs error {max_err}");
    }

    #[test]
    fn roundtrip_resample_stays_close_for_low_frequencies() {
        // Sum of low-frequency sines, well below a quarter of the lower rate.
        let src_rate = 32000u32;
        let mid_rate = 24000u32;
        let n = 16000usize;
        let signal = |i: f64, rate: f64| {
            0.4 * (2.0 * std::f64::consts::PI * 220.0 * i / rate).sin()
                + 0.3 * (2.0 * std::f64::consts::PI * 555.0 * i / rate).sin()
        };
        let samples: Vec<f32> = (0..n)
            .map(|i| signal(i as f64, src_rate as f64) as f32)
            .collect();
        let clip = AudioClip::new(src_rate, samples.clone()).unwrap();
        let down = resample(&clip, mid_rate).unwrap();
        let back = resample(&down, src_rate).unwrap();
        let max_err = back
            .samples
            .iter()
            .zip(&samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(max_err < 1e-2, "max abs error {max_err}");
    }

    #[test]
    fn thirty_second_clip_with_five_second_window_has_six_windows() {
        let plan = plan_windows(30 * 32000, 32000, 5.0);
        assert_eq!(plan.len(), 6);
        assert!(plan.windows.iter().all(|w| !w.padded));
        assert_eq!(plan.windows[5].end, 30 * 32000);
    }

    #[test]
    fn short_clip_yields_one_padded_window() {
        // ReefSet-length example: 1.88 s against a 5 s window.
        let n = (1.88 * 32000.0) as usize;
        let plan = plan_windows(n, 32000, 5.0);
        assert_eq!(plan.len(), 1);
        assert!(plan.windows[0].padded);
        assert_eq!(plan.windows[0].end - plan.windows[0].start, 160000);
    }

    #[test]
    fn seven_second_clip_with_three_second_window() {
        let rate = 8000u32;
        let plan = plan_windows(7 * rate as usize, rate, 3.0);
        assert_eq!(plan.len(), 3);
        assert_eq!(plan.windows[0].padded, false);
        assert_eq!(plan.windows[1].padded, false);
        assert!(plan.windows[2].padded);

        // The padded tail carries 2 s of zeros.
        let samples = vec![0.5f32; 7 * rate as usize];
        let tail = extract_window(&samples, &plan.windows[2]);
        assert_eq!(tail.len(), 3 * rate as usize);
        assert!(tail[..rate as usize].iter().all(|&s| s == 0.5));
        assert!(tail[rate as usize..].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn model_spec_frames_formula() {
        let aves = ModelSpec {
            name: "aves-bio".into(),
            sample_rate_hz: 16000,
            window_s: 3.0,
            embedding_dim: 768,
            output_layout: OutputLayout::TimeMajor {
                frames_per_second: 49,
                frame_offset: -1,
            },
        };
        assert_eq!(aves.frames_per_window(), 146);
        let vector = ModelSpec {
            name: "perch2".into(),
            sample_rate_hz: 32000,
            window_s: 5.0,
            embedding_dim: 1536,
            output_layout: OutputLayout::Vector,
        };
        assert_eq!(vector.frames_per_window(), 1);
        assert_eq!(vector.window_len_samples(), 160000);
    }

    #[test]
    fn model_spec_roundtrips_through_json() {
        let spec = ModelSpec {
            name: "aves-bio".into(),
            sample_rate_hz: 16000,
            window_s: 5.0,
            embedding_dim: 768,
            output_layout: OutputLayout::TimeMajor {
                frames_per_second: 49,
                frame_offset: -1,
            },
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.json");
        spec.save(&path).unwrap();
        assert_eq!(ModelSpec::load(&path).unwrap(), spec);
    }

    proptest! {
        // Concatenating the unpadded portions of all windows reproduces the
        // input exactly, and the window count is ceil(n / L).
        #[test]
        fn window_plan_covers_input(n in 1usize..5000, rate in 1u32..4, seconds in 1usize..4) {
            let window_s = seconds as f64;
            let rate = rate * 1000;
            let plan = plan_windows(n, rate, window_s);
            let window_len = plan.window_len;
            prop_assert_eq!(plan.len(), n.div_ceil(window_len));

            let samples: Vec<f32> = (0..n).map(|i| (i % 97) as f32 / 97.0).collect();
            let mut reassembled = Vec::new();
            for w in &plan.windows {
                let chunk = extract_window(&samples, w);
                prop_assert_eq!(chunk.len(), window_len);
                let unpadded = n.saturating_sub(w.start).min(window_len);
                reassembled.extend_from_slice(&chunk[..unpadded]);
            }
            prop_assert_eq!(reassembled, samples);
        }
    }
}
