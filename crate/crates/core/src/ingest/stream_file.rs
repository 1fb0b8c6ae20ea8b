//! Binary synthetic-stream files and optional WAV input.
//!
//! Stream file layout (all little-endian):
//! `u32 frame_duration_ms, u32 state_count, u32 frame_count`, then per frame
//! `f32 energy` followed by `state_count` × `f32` acoustic log-scores.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{frame_energy, Frame};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StreamData {
    pub frame_ms: u32,
    pub state_count: u32,
    pub frames: Vec<Frame>,
}

/// Sidecar record stored next to a stream file as `<stem>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub name: String,
    /// Reference transcript, relative to the stream file's directory.
    pub reference: String,
    pub seed: u64,
    pub frame_count: u64,
}

impl StreamMeta {
    pub fn path_for(stream: &Path) -> PathBuf {
        stream.with_extension("meta.json")
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(out.flush()?)
    }
}

pub fn write_stream<W: Write>(mut out: W, data: &StreamData) -> Result<()> {
    out.write_all(&data.frame_ms.to_le_bytes())?;
    out.write_all(&data.state_count.to_le_bytes())?;
    let n = u32::try_from(data.frames.len()).map_err(|_| Error::InvalidInput("too many frames".into()))?;
    out.write_all(&n.to_le_bytes())?;
    for f in &data.frames {
        if f.acoustic_scores.len() != data.state_count as usize {
            return Err(Error::InvalidInput(format!(
                "frame {} has {} scores, expected {}",
                f.index,
                f.acoustic_scores.len(),
                data.state_count
            )));
        }
        out.write_all(&f.energy.to_le_bytes())?;
        for s in &f.acoustic_scores {
            out.write_all(&s.to_le_bytes())?;
        }
    }
    Ok(out.flush()?)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32<R: Read>(r: &mut R) -> Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

pub fn read_stream<R: Read>(input: R) -> Result<StreamData> {
    let mut r = BufReader::new(input);
    let frame_ms = read_u32(&mut r)?;
    let state_count = read_u32(&mut r)?;
    let frame_count = read_u32(&mut r)?;
    if frame_ms == 0 {
        return Err(Error::InvalidInput("frame duration of 0 ms".into()));
    }
    let mut frames = Vec::with_capacity(frame_count as usize);
    for index in 0..u64::from(frame_count) {
        let energy = read_f32(&mut r)?;
        let mut scores = Vec::with_capacity(state_count as usize);
        for _ in 0..state_count {
            let s = read_f32(&mut r)?;
            if !s.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite score in frame {index}")));
            }
            scores.push(s);
        }
        frames.push(Frame::new(index, frame_ms, energy, scores));
    }
    Ok(StreamData {
        frame_ms,
        state_count,
        frames,
    })
}

/// Per-frame energies of a 16 kHz, 16-bit mono WAV file.
pub fn read_wav_energies(path: &Path, frame_ms: u32, floor: f32) -> Result<Vec<f32>> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.sample_rate != 16_000 || spec.bits_per_sample != 16 {
        return Err(Error::InvalidInput(format!(
            "expected 16 kHz 16-bit mono PCM, got {} Hz {}-bit {} channel(s)",
            spec.sample_rate, spec.bits_per_sample, spec.channels
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| f32::from(v) / 32768.0))
        .collect::<std::result::Result<Vec<f32>, _>>()?;
    let window = (16 * frame_ms) as usize;
    samples.chunks_exact(window).map(|w| frame_energy(w, floor)).collect()
}

/// Replaces the energies of a score stream with those measured from audio.
/// The two may differ by at most one frame of padding.
pub fn frames_from_wav(energies: &[f32], scores: StreamData) -> Result<StreamData> {
    let n = energies.len().min(scores.frames.len());
    if energies.len().abs_diff(scores.frames.len()) > 1 {
        return Err(Error::InvalidInput(format!(
            "wav has {} frames but the score file has {}",
            energies.len(),
            scores.frames.len()
        )));
    }
    let frames = scores
        .frames
        .into_iter()
        .take(n)
        .zip(energies)
        .map(|(mut f, &e)| {
            f.energy = e;
            f
        })
        .collect();
    Ok(StreamData { frames, ..scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> StreamData {
        StreamData {
            frame_ms: 10,
            state_count: 3,
            frames: (0..5)
                .map(|i| Frame::new(i, 10, -(i as f32), vec![0.0, -1.5, i as f32 * 0.25]))
                .collect(),
        }
    }

    #[test]
    fn header_layout_is_little_endian() {
        let mut buf = Vec::new();
        write_stream(&mut buf, &sample()).unwrap();
        assert_eq!(&buf[..12], &[10, 0, 0, 0, 3, 0, 0, 0, 5, 0, 0, 0]);
        assert_eq!(buf.len(), 12 + 5 * 4 * 4);
        assert_eq!(read_stream(&buf[..]).unwrap(), sample());
    }

    #[test]
    fn truncated_file_is_an_error() {
        let mut buf = Vec::new();
        write_stream(&mut buf, &sample()).unwrap();
        buf.truncate(buf.len() - 2);
        assert!(read_stream(&buf[..]).is_err());
    }

    #[test]
    fn wav_energies_pair_with_scores() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for i in 0..800 {
            // 5 frames: silent, silent, loud, loud, loud
            let v = if i < 320 { 0 } else { i16::MAX };
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
        let e = read_wav_energies(&path, 10, -20.0).unwrap();
        assert_eq!(e.len(), 5);
        assert_eq!(e[0], -20.0);
        assert!(e[4].abs() < 1e-3);
        let paired = frames_from_wav(&e, sample()).unwrap();
        assert_eq!(paired.frames[4].energy, e[4]);
        assert!(frames_from_wav(&e[..2], sample()).is_err());
    }
}
