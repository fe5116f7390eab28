use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const DATASET_MAGIC: &[u8; 4] = b"FMXD";
pub const DATASET_VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 5 * 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn tag(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Split::Train),
            1 => Ok(Split::Test),
            t => Err(Error::Format(format!("unknown split tag {t}"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(Error::invalid(format!("unknown split {s:?}"))),
        }
    }
}

/// One labelled sequence `[J×C_in×F]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub data: Tensor,
    pub label: usize,
    pub split: Split,
    pub source: String,
}

/// Fixed-shape labelled samples with train/test tags.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub joints: usize,
    pub in_channels: usize,
    pub frames: usize,
    pub num_classes: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(joints: usize, in_channels: usize, frames: usize, num_classes: usize) -> Self {
        Self {
            joints,
            in_channels,
            frames,
            num_classes,
            samples: Vec::new(),
        }
    }

    pub fn sample_shape(&self) -> [usize; 3] {
        [self.joints, self.in_channels, self.frames]
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        if sample.data.shape() != self.sample_shape() {
            return Err(Error::shape("dataset sample", sample.data.shape(), &self.sample_shape()));
        }
        if sample.label >= self.num_classes {
            return Err(Error::invalid(format!(
                "label {} out of range for {} classes",
                sample.label, self.num_classes
            )));
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = (usize, &Sample)> {
        self.samples.iter().enumerate().filter(move |(_, s)| s.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    /// Sidecar text: one `index,label,split,source` line per sample.
    pub fn manifest_text(&self) -> String {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{i},{},{},{}\n", s.label, s.split, s.source))
            .collect()
    }

    /// Binary payload size predicted from the header fields.
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.samples.len() * (4 + 1 + 4 * self.joints * self.in_channels * self.frames)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(DATASET_MAGIC);
        out.push(DATASET_VERSION);
        for v in [self.joints, self.in_channels, self.frames, self.num_classes, self.samples.len()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for s in &self.samples {
            out.extend_from_slice(&(s.label as u32).to_le_bytes());
            out.push(s.split.tag());
            for &v in s.data.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    /// Decodes the binary format; sources are left empty.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format("truncated dataset header".into()));
        }
        if &bytes[..4] != DATASET_MAGIC {
            return Err(Error::Format("bad dataset magic".into()));
        }
        if bytes[4] != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {}", bytes[4])));
        }
        let u32_at = |pos: usize| u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        let mut ds = Dataset::new(u32_at(5), u32_at(9), u32_at(13), u32_at(17));
        let count = u32_at(21);
        let per = ds.joints * ds.in_channels * ds.frames;
        if bytes.len() != ds.encoded_len() + count * (5 + 4 * per) {
            return Err(Error::Format(format!(
                "dataset payload is {} bytes, header predicts {}",
                bytes.len(),
                ds.encoded_len() + count * (5 + 4 * per)
            )));
        }
        let mut pos = HEADER_LEN;
        for _ in 0..count {
            let label = u32_at(pos);
            let split = Split::from_tag(bytes[pos + 4])?;
            pos += 5;
            let data = bytes[pos..pos + 4 * per]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                .collect();
            pos += 4 * per;
            ds.push(Sample {
                data: Tensor::new(ds.sample_shape().to_vec(), data)?,
                label,
                split,
                source: String::new(),
            })
            .map_err(|e| Error::Format(e.to_string()))?;
        }
        Ok(ds)
    }
}

/// Path of the manifest sidecar belonging to a dataset file.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

/// Writes the binary dataset and its manifest sidecar.
pub fn write_canonical(path: &Path, ds: &Dataset) -> Result<()> {
    std::fs::write(path, ds.encode()).map_err(|e| Error::io(path, e))?;
    let side = manifest_path(path);
    std::fs::write(&side, ds.manifest_text()).map_err(|e| Error::io(&side, e))
}

/// Reads a dataset; sources are restored from the sidecar when present.
pub fn read_canonical(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut ds = Dataset::decode(&bytes)?;
    let side = manifest_path(path);
    if let Ok(text) = std::fs::read_to_string(&side) {
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.splitn(4, ',');
            let idx: Option<usize> = parts.next().and_then(|v| v.parse().ok());
            let source = parts.nth(2);
            match (idx, source) {
                (Some(idx), Some(src)) if idx < ds.samples.len() => ds.samples[idx].source = src.to_string(),
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("bad manifest line {line:?}"),
                    })
                }
            }
        }
    }
    Ok(ds)
}
