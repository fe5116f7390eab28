//! The NTU RGB+D `.skeleton` text layout.
//!
//! ```text
//! <frame count>
//! per frame:  <body count>
//!   per body: <body metadata line>
//!             <joint count>
//!             <x y z ...>   one line per joint
//! ```

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// One skeleton recording: `joints` is `[J×3×F_raw]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonSequence {
    pub joints: Tensor,
    pub label: usize,
    pub subject_id: u32,
    pub camera_id: u32,
    pub source: String,
}

impl SkeletonSequence {
    pub fn num_joints(&self) -> usize {
        self.joints.shape()[0]
    }

    pub fn num_frames(&self) -> usize {
        self.joints.shape()[2]
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            if !line.trim().is_empty() {
                return Ok((i + 1, line.trim()));
            }
        }
        Err(Error::Parse {
            line: self.last + 1,
            msg: format!("truncated file: expected {what}"),
        })
    }

    fn count(&mut self, what: &str) -> Result<(usize, usize)> {
        let (n, line) = self.next(what)?;
        let first = line.split_whitespace().next().unwrap_or("");
        let v = first.parse().map_err(|_| Error::Parse {
            line: n,
            msg: format!("expected {what}, got {line:?}"),
        })?;
        Ok((n, v))
    }
}

/// Parses the first body of every frame. Frames without a body are zero-filled.
pub fn parse_ntu_skeleton(text: &str) -> Result<SkeletonSequence> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (_, frames) = lines.count("frame count")?;
    if frames == 0 {
        return Err(Error::Parse {
            line: 1,
            msg: "empty sequence".into(),
        });
    }
    let mut joints_per_frame: Vec<Option<Vec<[f64; 3]>>> = Vec::with_capacity(frames);
    let mut num_joints: Option<usize> = None;
    for _ in 0..frames {
        let (_, bodies) = lines.count("body count")?;
        let mut first = None;
        for b in 0..bodies {
            lines.next("body metadata")?;
            let (n, count) = lines.count("joint count")?;
            match num_joints {
                Some(j) if j != count => {
                    return Err(Error::Parse {
                        line: n,
                        msg: format!("joint-count mismatch: expected {j}, got {count}"),
                    })
                }
                _ => num_joints = Some(count),
            }
            let mut coords = Vec::with_capacity(count);
            for _ in 0..count {
                let (n, line) = lines.next("joint line")?;
                let mut it = line.split_whitespace();
                let mut xyz = [0.0f64; 3];
                for v in &mut xyz {
                    let tok = it.next().ok_or_else(|| Error::Parse {
                        line: n,
                        msg: "joint line has fewer than 3 values".into(),
                    })?;
                    *v = tok.parse().map_err(|_| Error::Parse {
                        line: n,
                        msg: format!("non-numeric coordinate {tok:?}"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse {
                            line: n,
                            msg: format!("non-finite coordinate {tok:?}"),
                        });
                    }
                }
                coords.push(xyz);
            }
            if b == 0 {
                first = Some(coords);
            }
        }
        joints_per_frame.push(first);
    }
    let j = num_joints.ok_or_else(|| Error::Parse {
        line: 1,
        msg: "no frame contains a body".into(),
    })?;
    let mut t = Tensor::zeros(&[j, 3, frames]);
    for (f, frame) in joints_per_frame.iter().enumerate() {
        if let Some(coords) = frame {
            for (jj, xyz) in coords.iter().enumerate() {
                for (c, &v) in xyz.iter().enumerate() {
                    t.set(&[jj, c, f], v);
                }
            }
        }
    }
    Ok(SkeletonSequence {
        joints: t,
        label: 0,
        subject_id: 0,
        camera_id: 0,
        source: String::new(),
    })
}

/// Writes a single-body sequence in the same layout; `parse_ntu_skeleton` reads it back exactly.
pub fn write_ntu_skeleton(seq: &SkeletonSequence) -> String {
    let (j, f) = (seq.num_joints(), seq.num_frames());
    let mut out = format!("{f}\n");
    for ff in 0..f {
        out.push_str("1\n0 0 0 0 0 0 0 0 0 0\n");
        out.push_str(&format!("{j}\n"));
        for jj in 0..j {
            let [x, y, z] = [0, 1, 2].map(|c| seq.joints.get(&[jj, c, ff]));
            out.push_str(&format!("{x} {y} {z}\n"));
        }
    }
    out
}

/// Fields encoded in an NTU file name such as `S001C002P003R002A013`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NtuName {
    pub setup: u32,
    pub camera: u32,
    pub performer: u32,
    pub replication: u32,
    /// 1-based action id.
    pub action: u32,
}

pub fn parse_ntu_name(name: &str) -> Option<NtuName> {
    let stem = name.rsplit('/').next()?.split('.').next()?;
    let mut fields = [0u32; 5];
    let mut rest = stem;
    for (slot, tag) in fields.iter_mut().zip(['S', 'C', 'P', 'R', 'A']) {
        rest = rest.strip_prefix(tag)?;
        let end = rest.find(|ch: char| !ch.is_ascii_digit()).unwrap_or(rest.len());
        *slot = rest[..end].parse().ok()?;
        rest = &rest[end..];
    }
    let [setup, camera, performer, replication, action] = fields;
    Some(NtuName {
        setup,
        camera,
        performer,
        replication,
        action,
    })
}

/// Training subjects of the cross-subject protocol.
pub const XSUB_TRAIN_SUBJECTS: [u32; 20] = [1, 2, 4, 5, 8, 9, 13, 14, 15, 16, 17, 18, 19, 25, 27, 28, 31, 34, 35, 38];

pub fn xsub_is_train(subject: u32) -> bool {
    XSUB_TRAIN_SUBJECTS.contains(&subject)
}

/// 0-based parent of each of the 25 NTU joints; the upper spine (index 20) is the root.
pub fn ntu_parents() -> Vec<usize> {
    const PAIRS: [(usize, usize); 25] = [
        (1, 2),
        (2, 21),
        (3, 21),
        (4, 3),
        (5, 21),
        (6, 5),
        (7, 6),
        (8, 7),
        (9, 21),
        (10, 9),
        (11, 10),
        (12, 11),
        (13, 1),
        (14, 13),
        (15, 14),
        (16, 15),
        (17, 1),
        (18, 17),
        (19, 18),
        (20, 19),
        (21, 21),
        (22, 23),
        (23, 8),
        (24, 25),
        (25, 12),
    ];
    let mut parents = vec![0; 25];
    for (child, parent) in PAIRS {
        parents[child - 1] = parent - 1;
    }
    parents
}

/// Parent table for skeletons without a known topology: joint `j` hangs off `j − 1`.
pub fn chain_parents(joints: usize) -> Vec<usize> {
    (0..joints).map(|j| j.saturating_sub(1)).collect()
}

/// The NTU table for 25 joints, a chain otherwise.
pub fn default_parents(joints: usize) -> Vec<usize> {
    if joints == 25 {
        ntu_parents()
    } else {
        chain_parents(joints)
    }
}
