use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::spectral::FrequencyOperatorConfig;

/// Where the value path sits relative to the cosine transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Variant {
    /// Spatial plus frequency-aware mixed attention.
    #[default]
    Standard,
    /// Queries/keys in the frequency domain, values in time.
    PartialDct,
    /// Queries, keys and values in the frequency domain.
    FullDct,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Standard => "standard",
            Variant::PartialDct => "partial_dct",
            Variant::FullDct => "full_dct",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Variant::Standard),
            "partial_dct" => Ok(Variant::PartialDct),
            "full_dct" => Ok(Variant::FullDct),
            other => Err(Error::invalid(format!(
                "unknown variant {other:?} (expected standard, partial_dct or full_dct)"
            ))),
        }
    }
}

/// Architecture hyper-parameters. Serialised as a flat `key=value` file.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub joints: usize,
    pub in_channels: usize,
    pub channels: usize,
    pub frames: usize,
    /// Number of unit groups the channels are split into.
    pub groups: usize,
    pub phi: f64,
    /// Number of enhanced high-frequency bins.
    pub num_enhanced: usize,
    pub num_classes: usize,
    pub depth: usize,
    /// Head count of the reference multi-head attention.
    pub heads: usize,
    pub variant: Variant,
    /// Frequency-aware branch on/off.
    pub fab: bool,
    /// Frequency operator on/off (only meaningful with `fab`).
    pub fo: bool,
    /// Temporal block on/off.
    pub tab: bool,
    /// One positional table per frame instead of a frame-shared one.
    pub pos_per_frame: bool,
    /// Squeeze ratio of the channel gate.
    pub reduction: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            joints: 25,
            in_channels: 3,
            channels: 24,
            frames: 64,
            groups: 4,
            phi: 0.5,
            num_enhanced: 12,
            num_classes: 60,
            depth: 3,
            heads: 1,
            variant: Variant::Standard,
            fab: true,
            fo: true,
            tab: true,
            pos_per_frame: false,
            reduction: 4,
        }
    }
}

const KEYS: &[&str] = &[
    "joints",
    "in_channels",
    "channels",
    "frames",
    "groups",
    "phi",
    "num_enhanced",
    "num_classes",
    "depth",
    "heads",
    "variant",
    "fab",
    "fo",
    "tab",
    "pos_per_frame",
    "reduction",
];

pub(crate) fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("bad value {value:?} for {key}")))
}

impl ModelConfig {
    /// The smallest configuration used by the gradient and staged-oracle checks.
    pub fn tiny() -> Self {
        Self {
            joints: 5,
            channels: 8,
            frames: 8,
            groups: 2,
            num_enhanced: 2,
            num_classes: 3,
            depth: 1,
            ..Self::default()
        }
    }

    /// A wide configuration whose channel count divides evenly for `n ∈ 2..=6`.
    pub fn full_scale() -> Self {
        Self {
            channels: 120,
            ..Self::default()
        }
    }

    pub fn group_width(&self) -> usize {
        self.channels / self.groups
    }

    /// Query/key width of the attention projections.
    pub fn qk_width(&self) -> usize {
        self.channels
    }

    pub fn frequency_operator(&self) -> Result<Option<FrequencyOperatorConfig>> {
        if self.fo {
            Ok(Some(FrequencyOperatorConfig::new(self.num_enhanced, self.phi)?))
        } else {
            Ok(None)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("joints", self.joints),
            ("in_channels", self.in_channels),
            ("channels", self.channels),
            ("frames", self.frames),
            ("num_classes", self.num_classes),
            ("depth", self.depth),
            ("heads", self.heads),
            ("reduction", self.reduction),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if self.groups < 2 {
            return Err(Error::invalid(format!(
                "mixed attention needs at least 2 groups, got {}",
                self.groups
            )));
        }
        if !self.channels.is_multiple_of(self.groups) {
            return Err(Error::invalid(format!(
                "channels {} not divisible by groups {}",
                self.channels, self.groups
            )));
        }
        if self.num_enhanced > self.frames {
            return Err(Error::invalid(format!(
                "num_enhanced {} exceeds frames {}",
                self.num_enhanced, self.frames
            )));
        }
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return Err(Error::invalid(format!("phi must lie in (0, 1), got {}", self.phi)));
        }
        if !self.channels.is_multiple_of(self.heads) {
            return Err(Error::invalid(format!(
                "heads {} do not divide channels {}",
                self.heads, self.channels
            )));
        }
        Ok(())
    }

    /// Sets one key; returns `Ok(false)` for keys this config does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "joints" => self.joints = parse_value(key, value)?,
            "in_channels" => self.in_channels = parse_value(key, value)?,
            "channels" => self.channels = parse_value(key, value)?,
            "frames" => self.frames = parse_value(key, value)?,
            "groups" => self.groups = parse_value(key, value)?,
            "phi" => self.phi = parse_value(key, value)?,
            "num_enhanced" => self.num_enhanced = parse_value(key, value)?,
            "num_classes" => self.num_classes = parse_value(key, value)?,
            "depth" => self.depth = parse_value(key, value)?,
            "heads" => self.heads = parse_value(key, value)?,
            "variant" => self.variant = value.trim().parse()?,
            "fab" => self.fab = parse_value(key, value)?,
            "fo" => self.fo = parse_value(key, value)?,
            "tab" => self.tab = parse_value(key, value)?,
            "pos_per_frame" => self.pos_per_frame = parse_value(key, value)?,
            "reduction" => self.reduction = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let values = [
            self.joints.to_string(),
            self.in_channels.to_string(),
            self.channels.to_string(),
            self.frames.to_string(),
            self.groups.to_string(),
            self.phi.to_string(),
            self.num_enhanced.to_string(),
            self.num_classes.to_string(),
            self.depth.to_string(),
            self.heads.to_string(),
            self.variant.to_string(),
            self.fab.to_string(),
            self.fo.to_string(),
            self.tab.to_string(),
            self.pos_per_frame.to_string(),
            self.reduction.to_string(),
        ];
        KEYS.iter().copied().zip(values).collect()
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Parses `key=value` lines; blank lines and `#` comments are skipped,
    /// unknown keys are errors. Missing keys keep their defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, value, line) in kv_lines(text)? {
            if !cfg.set(key, value).map_err(|e| Error::Parse { line, msg: e.to_string() })? {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown key {key:?}"),
                });
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Splits `key=value` text into trimmed triples with 1-based line numbers.
pub fn kv_lines(text: &str) -> Result<Vec<(&str, &str, usize)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected key=value, got {line:?}"),
        })?;
        out.push((k.trim(), v.trim(), i + 1));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = ModelConfig::tiny();
        cfg.phi = 0.3;
        cfg.variant = Variant::FullDct;
        cfg.fo = false;
        assert_eq!(ModelConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = ModelConfig::from_text("# c\njoints=5\nbogus=1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = ModelConfig::from_text("joints=five").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(ModelConfig::from_text("no equals sign").is_err());
    }

    #[test]
    fn validation() {
        let ok = ModelConfig::tiny();
        ok.validate().unwrap();
        for bad in [
            ModelConfig { groups: 1, ..ok.clone() },
            ModelConfig { groups: 3, ..ok.clone() },
            ModelConfig { num_enhanced: 9, ..ok.clone() },
            ModelConfig { phi: 1.0, ..ok.clone() },
            ModelConfig { phi: 0.0, ..ok.clone() },
            ModelConfig { heads: 3, ..ok.clone() },
            ModelConfig { depth: 0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        ModelConfig { num_enhanced: 0, ..ok.clone() }.validate().unwrap();
        ModelConfig { num_enhanced: 8, ..ok }.validate().unwrap();
        ModelConfig::full_scale().validate().unwrap();
        ModelConfig::default().validate().unwrap();
    }
}
