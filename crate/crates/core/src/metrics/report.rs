//! Aggregated metric reports. Infinite PSNRs serialize as the string `"inf"`;
//! metrics that could not be computed (no mask pixels, single-frame
//! sequences) are `null`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::par::{self, Exec};

use super::{charbonnier, psnr, psnr_masked, ssim, tpsnr};

mod inf_serde {
    use serde::de::{self, Deserializer};
    use serde::ser::Serializer;
    use serde::Deserialize;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(x) if *x == f64::INFINITY => s.serialize_str("inf"),
            Some(x) => s.serialize_f64(*x),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Raw>::deserialize(d)? {
            None => Ok(None),
            Some(Raw::Num(x)) => Ok(Some(x)),
            Some(Raw::Str(s)) if s == "inf" => Ok(Some(f64::INFINITY)),
            Some(Raw::Str(s)) => Err(de::Error::custom(format!("unexpected metric value `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub sequence: String,
    pub frame: usize,
    #[serde(with = "inf_serde")]
    pub psnr: Option<f64>,
    #[serde(with = "inf_serde")]
    pub psnr_m: Option<f64>,
    #[serde(with = "inf_serde")]
    pub ssim: Option<f64>,
    #[serde(with = "inf_serde")]
    pub charbonnier: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(with = "inf_serde")]
    pub psnr: Option<f64>,
    #[serde(with = "inf_serde")]
    pub psnr_m: Option<f64>,
    #[serde(with = "inf_serde")]
    pub ssim: Option<f64>,
    #[serde(with = "inf_serde")]
    pub tpsnr: Option<f64>,
    #[serde(with = "inf_serde")]
    pub charbonnier: Option<f64>,
    pub per_frame: Vec<FrameMetrics>,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Prediction and ground truth for one sequence, optionally with flare masks.
#[derive(Debug, Clone)]
pub struct SequenceFrames {
    pub name: String,
    pub pred: Vec<Image>,
    pub gt: Vec<Image>,
    pub masks: Option<Vec<Mask>>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

/// Per-frame metrics, then plain means over frames (tPSNR: mean over
/// sequences with at least two frames).
pub fn score_sequences(seqs: &[SequenceFrames], epsilon: f64, exec: Exec) -> Result<MetricsReport> {
    let mut jobs = Vec::new();
    for (s, seq) in seqs.iter().enumerate() {
        if seq.pred.len() != seq.gt.len() {
            return Err(Error::invalid(format!(
                "sequence {}: {} predicted frames vs {} ground-truth frames",
                seq.name,
                seq.pred.len(),
                seq.gt.len()
            )));
        }
        if let Some(m) = &seq.masks {
            if m.len() != seq.gt.len() {
                return Err(Error::invalid(format!(
                    "sequence {}: {} masks for {} frames",
                    seq.name,
                    m.len(),
                    seq.gt.len()
                )));
            }
        }
        jobs.extend((0..seq.gt.len()).map(|t| (s, t)));
    }
    if jobs.is_empty() {
        return Err(Error::invalid("nothing to score"));
    }
    let per_frame = par::try_map_indexed(exec, jobs.len(), |j| -> Result<FrameMetrics> {
        let (s, t) = jobs[j];
        let seq = &seqs[s];
        let (p, g) = (&seq.pred[t], &seq.gt[t]);
        let psnr_m = match seq.masks.as_ref().map(|m| &m[t]) {
            Some(m) if m.count() > 0 => Some(psnr_masked(p, g, m)?),
            Some(m) => {
                crate::image::ensure_same_dims(m.dims(), g.dims())?;
                None
            }
            None => None,
        };
        Ok(FrameMetrics {
            sequence: seq.name.clone(),
            frame: t,
            psnr: Some(psnr(p, g)?),
            psnr_m,
            ssim: Some(ssim(p, g, Exec::Sequential)?),
            charbonnier: Some(charbonnier(p, g, epsilon)?),
        })
    })?;
    let tpsnrs = seqs
        .iter()
        .filter(|s| s.gt.len() >= 2)
        .map(|s| tpsnr(&s.pred, &s.gt))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport {
        psnr: mean(per_frame.iter().filter_map(|f| f.psnr)),
        psnr_m: mean(per_frame.iter().filter_map(|f| f.psnr_m)),
        ssim: mean(per_frame.iter().filter_map(|f| f.ssim)),
        tpsnr: mean(tpsnrs.into_iter()),
        charbonnier: mean(per_frame.iter().filter_map(|f| f.charbonnier)),
        per_frame,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(name: &str, pred: Vec<Image>, gt: Vec<Image>, masks: Option<Vec<Mask>>) -> SequenceFrames {
        SequenceFrames {
            name: name.into(),
            pred,
            gt,
            masks,
        }
    }

    #[test]
    fn identical_sequences_report_inf() {
        let frames: Vec<Image> = (0..3).map(|k| Image::filled(12, 12, [0.1 * k as f64; 3])).collect();
        let r = score_sequences(
            &[seq("a", frames.clone(), frames, Some(vec![Mask::full(12, 12); 3]))],
            1e-3,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(r.psnr, Some(f64::INFINITY));
        assert_eq!(r.tpsnr, Some(f64::INFINITY));
        let json = r.to_json().unwrap();
        assert!(json.contains("\"psnr\": \"inf\""));
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["psnr", "psnr_m", "ssim", "tpsnr", "charbonnier", "per_frame"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn finite_values_and_empty_masks() {
        let gt = vec![Image::new(12, 12), Image::new(12, 12)];
        let pred = vec![Image::filled(12, 12, [0.5; 3]), Image::new(12, 12)];
        let r = score_sequences(
            &[seq("b", pred, gt, Some(vec![Mask::full(12, 12), Mask::new(12, 12)]))],
            1e-3,
            Exec::Parallel,
        )
        .unwrap();
        assert_eq!(r.per_frame[1].psnr_m, None);
        assert!((r.psnr_m.unwrap() - 6.020_599_913_279_624).abs() < 1e-9);
        assert_eq!(r.psnr, Some(f64::INFINITY));
        assert!(r.charbonnier.unwrap() > 0.25);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let r = score_sequences(&[seq("c", vec![Image::new(12, 12)], vec![], None)], 1e-3, Exec::Sequential);
        assert!(r.is_err());
        assert!(score_sequences(&[], 1e-3, Exec::Sequential).is_err());
    }
}
