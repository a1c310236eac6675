//! Degradation text and dataset manifest records.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::degrade::{OpKind, OpLog};
use crate::error::{invalid, Error, Result};

/// Degradation type words, declared in canonical rendering order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DegradationTag {
    #[serde(rename = "blur")]
    Blur,
    #[serde(rename = "resize")]
    Resize,
    #[serde(rename = "noise")]
    Noise,
    #[serde(rename = "jpeg artifacts")]
    JpegArtifacts,
    #[serde(rename = "ringing artifacts")]
    RingingArtifacts,
}

impl DegradationTag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Blur => "blur",
            Self::Resize => "resize",
            Self::Noise => "noise",
            Self::JpegArtifacts => "jpeg artifacts",
            Self::RingingArtifacts => "ringing artifacts",
        }
    }
}

impl From<OpKind> for DegradationTag {
    fn from(k: OpKind) -> Self {
        match k {
            OpKind::Blur => Self::Blur,
            OpKind::Resize => Self::Resize,
            OpKind::Noise => Self::Noise,
            OpKind::Jpeg => Self::JpegArtifacts,
            OpKind::Wiener => Self::RingingArtifacts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegradationText {
    pub tags: Vec<DegradationTag>,
    pub rendered: String,
}

impl DegradationText {
    /// Sorts and dedupes `tags`, then renders them.
    pub fn from_tags(tags: impl IntoIterator<Item = DegradationTag>) -> Self {
        let tags: Vec<_> = tags.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let rendered = if tags.is_empty() {
            "a clean image".to_string()
        } else {
            let words: Vec<_> = tags.iter().map(|t| t.as_str()).collect();
            format!("an image with {}", words.join(", "))
        };
        Self { tags, rendered }
    }
}

/// Text for the ops in a log. The final resize-back is not a degradation and
/// is not tagged.
pub fn degradation_text(log: &OpLog) -> DegradationText {
    DegradationText::from_tags(log.ops().map(|op| op.kind().into()))
}

/// Mean absolute difference between two embeddings.
pub fn embedding_l1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid(
            "embedding",
            format!("length mismatch {} vs {}", a.len(), b.len()),
        ));
    }
    if a.is_empty() {
        return Err(invalid("embedding", "empty vectors"));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub hq_path: String,
    pub lq_path: String,
    pub op_log: OpLog,
    pub degradation_text: DegradationText,
    #[serde(default)]
    pub caption: Option<String>,
}

pub fn build_record(hq_path: &str, lq_path: &str, log: OpLog) -> Result<DatasetRecord> {
    let rec = DatasetRecord {
        hq_path: hq_path.to_string(),
        lq_path: lq_path.to_string(),
        degradation_text: degradation_text(&log),
        op_log: log,
        caption: None,
    };
    rec.validate()?;
    Ok(rec)
}

impl DatasetRecord {
    pub fn validate(&self) -> Result<()> {
        if self.hq_path.is_empty() || self.lq_path.is_empty() {
            return Err(invalid("path", "record paths must be non-empty"));
        }
        if degradation_text(&self.op_log) != self.degradation_text {
            return Err(invalid(
                "degradation_text",
                format!(
                    "`{}` does not match the op log",
                    self.degradation_text.rendered
                ),
            ));
        }
        Ok(())
    }

    /// Resolves paths against `root` and checks that both files exist.
    pub fn check_files(&self, root: &Path) -> Result<()> {
        for p in [&self.hq_path, &self.lq_path] {
            if !root.join(p).is_file() {
                return Err(invalid("path", format!("{p} does not exist")));
            }
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let rec: Self =
            serde_json::from_str(line).map_err(|e| Error::MalformedLog(e.to_string()))?;
        rec.validate()?;
        Ok(rec)
    }
}

pub fn write_manifest<'a>(
    mut out: impl Write,
    records: impl IntoIterator<Item = &'a DatasetRecord>,
) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(())
}

pub fn read_manifest(input: impl BufRead) -> Result<Vec<DatasetRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| Error::MalformedLog(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(DatasetRecord::from_json_line(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::{
        DegradationOp, Dims, Interp, KernelSpec, LogEntry, OPLOG_SCHEMA_VERSION,
    };

    fn log_of(ops: Vec<DegradationOp>) -> OpLog {
        OpLog {
            schema_version: OPLOG_SCHEMA_VERSION,
            original: Dims { height: 4, width: 4 },
            final_dims: Dims { height: 4, width: 4 },
            entries: ops.into_iter().map(|op| LogEntry { phase: 0, op }).collect(),
            resize_back: None,
        }
    }

    fn gaussian(sigma: f64) -> DegradationOp {
        DegradationOp::Blur {
            kernel: KernelSpec::Gaussian { sigma, size: None },
        }
    }

    #[test]
    fn empty_log_is_clean() {
        assert_eq!(degradation_text(&log_of(vec![])).rendered, "a clean image");
    }

    #[test]
    fn multi_degradation_example() {
        let log = log_of(vec![
            gaussian(1.3),
            DegradationOp::GaussianNoise { sigma: 0.02, seed: 1 },
            DegradationOp::WienerDeconv {
                kernel: KernelSpec::Gaussian { sigma: 1.3, size: None },
                nsr: 1e-3,
            },
        ]);
        assert_eq!(
            degradation_text(&log).rendered,
            "an image with blur, noise, ringing artifacts"
        );
    }

    #[test]
    fn repeated_ops_are_deduplicated() {
        let log = log_of(vec![
            gaussian(1.0),
            DegradationOp::Jpeg { quality: 50, chroma_420: true },
            gaussian(2.0),
        ]);
        assert_eq!(degradation_text(&log).rendered, "an image with blur, jpeg artifacts");
    }

    #[test]
    fn order_does_not_matter() {
        let ops = vec![
            DegradationOp::Resize { scale: 0.7, interp: Interp::Bicubic },
            DegradationOp::Jpeg { quality: 50, chroma_420: true },
            gaussian(1.0),
            DegradationOp::GaussianNoise { sigma: 0.01, seed: 4 },
        ];
        let mut rev = ops.clone();
        rev.reverse();
        let a = degradation_text(&log_of(ops));
        assert_eq!(a, degradation_text(&log_of(rev)));
        assert_eq!(a.rendered, "an image with blur, resize, noise, jpeg artifacts");
    }

    #[test]
    fn l1_values() {
        let a = vec![0.0; 768];
        let b = vec![1.0; 768];
        assert_eq!(embedding_l1(&a, &b).unwrap(), 1.0);
        assert_eq!(embedding_l1(&b, &b).unwrap(), 0.0);
        assert!(embedding_l1(&a, &b[..10]).is_err());
    }

    #[test]
    fn record_round_trip() {
        let rec = build_record("hq/a.png", "lq/a.png", log_of(vec![gaussian(1.0)])).unwrap();
        assert_eq!(rec.degradation_text.rendered, "an image with blur");
        assert_eq!(rec.caption, None);
        let back = DatasetRecord::from_json_line(&rec.to_json_line()).unwrap();
        assert_eq!(back, rec);
        assert_eq!(degradation_text(&back.op_log), back.degradation_text);

        let clean = build_record("a", "b", log_of(vec![])).unwrap();
        assert_eq!(clean.degradation_text.rendered, "a clean image");
        assert!(build_record("", "b", log_of(vec![])).is_err());
    }

    #[test]
    fn inconsistent_record_is_rejected() {
        let mut rec = build_record("a", "b", log_of(vec![gaussian(1.0)])).unwrap();
        rec.degradation_text = DegradationText::from_tags([DegradationTag::Noise]);
        assert!(DatasetRecord::from_json_line(&rec.to_json_line()).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let recs = vec![
            build_record("a", "b", log_of(vec![])).unwrap(),
            build_record("c", "d", log_of(vec![gaussian(2.0)])).unwrap(),
        ];
        let mut buf = Vec::new();
        write_manifest(&mut buf, &recs).unwrap();
        assert_eq!(read_manifest(&buf[..]).unwrap(), recs);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vecs(n: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(-10.0f64..10.0, n)
        }

        proptest! {
            #[test]
            fn l1_metric_axioms((a, b, c) in (1usize..64).prop_flat_map(|n| (vecs(n), vecs(n), vecs(n)))) {
                let ab = embedding_l1(&a, &b).unwrap();
                prop_assert!(ab >= 0.0);
                prop_assert_eq!(ab, embedding_l1(&b, &a).unwrap());
                prop_assert_eq!(embedding_l1(&a, &a).unwrap(), 0.0);
                if a != b { prop_assert!(ab > 0.0); }
                let bound = embedding_l1(&a, &c).unwrap() + embedding_l1(&c, &b).unwrap();
                prop_assert!(ab <= bound + 1e-12);
            }

            #[test]
            fn l1_matches_naive_loop(a in vecs(33), b in vecs(33)) {
                let mut sum = 0.0;
                for i in 0..a.len() {
                    sum += (a[i] - b[i]).abs();
                }
                prop_assert!((embedding_l1(&a, &b).unwrap() - sum / 33.0).abs() < 1e-12);
            }
        }
    }
}
