use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::data::complement_spans;
use crate::error::{Error, Result};
use crate::evaluation::{
    compute_threshold, delta_s, false_positive_rate, mean_squared_reconstruction_error, pca_project, roc_auc,
    threshold_metrics, Confusion, RocCurve, ScoreSeries, ScoredVideo,
};
use crate::training::TrainMode;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Also report an AUC per test video and their mean.
    pub per_video_auc: bool,
    /// Min-max normalize each video's scores before any metric.
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoAuc {
    pub video_id: String,
    pub auc: Option<f64>,
    pub auc_reason: Option<String>,
    pub delta_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mode: TrainMode,
    /// `null` when the pooled test frames contain a single class.
    pub auc: Option<f64>,
    pub auc_reason: Option<String>,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub oa: f64,
    pub delta_s: Option<f64>,
    pub threshold: f64,
    pub counts: Confusion,
    /// No frame exceeded the threshold.
    pub degenerate: bool,
    pub msre: f64,
    pub fpr: Option<f64>,
    pub frames_scored: usize,
    /// Frames without enough history; excluded from every metric.
    pub frames_backfilled: usize,
    pub normalized: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_video: Option<Vec<VideoAuc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_per_video_auc: Option<f64>,
    pub config_fingerprint: String,
}

fn undefined_reason(e: Error) -> Result<String> {
    match e {
        Error::UndefinedMetric(m) => Ok(m),
        other => Err(other),
    }
}

fn pooled(series: &[ScoreSeries]) -> (Vec<f64>, Vec<u8>) {
    let mut s = Vec::new();
    let mut l = Vec::new();
    for v in series {
        let (a, b) = v.scored();
        s.extend(a);
        l.extend(b);
    }
    (s, l)
}

/// Pools the scored frames of every test video and computes all metrics.
/// The threshold is `mean + std` of the training-video errors.
pub fn build_report(
    test: &[ScoreSeries],
    train: &[ScoreSeries],
    mode: TrainMode,
    opts: EvalOptions,
    config_fingerprint: &str,
) -> Result<(EvalReport, Option<RocCurve>)> {
    let prep = |v: &[ScoreSeries]| -> Vec<ScoreSeries> {
        v.iter()
            .map(|s| if opts.normalize { s.min_max_normalized() } else { s.clone() })
            .collect()
    };
    let (test, train) = (prep(test), prep(train));
    if test.iter().any(|s| s.labels.is_none()) {
        return Err(Error::Data("every test video needs labels".into()));
    }
    let (train_errors, _) = pooled(&train);
    let threshold = compute_threshold(&train_errors)?;
    let (scores, labels) = pooled(&test);
    let tm = threshold_metrics(&scores, &labels, threshold)?;

    let (curve, auc_reason) = match roc_auc(&scores, &labels) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(undefined_reason(e)?)),
    };
    let delta = match delta_s(&scores, &labels) {
        Ok(d) => Some(d),
        Err(e) => {
            undefined_reason(e)?;
            None
        }
    };
    let fpr = match false_positive_rate(&scores, &labels, threshold) {
        Ok(f) => Some(f),
        Err(e) => {
            undefined_reason(e)?;
            None
        }
    };

    let per_video = if opts.per_video_auc {
        let mut out = Vec::new();
        for v in &test {
            let (s, l) = v.scored();
            let (auc, auc_reason) = match roc_auc(&s, &l) {
                Ok(c) => (Some(c.auc), None),
                Err(e) => (None, Some(undefined_reason(e)?)),
            };
            out.push(VideoAuc {
                video_id: v.video_id.clone(),
                auc,
                auc_reason,
                delta_s: delta_s(&s, &l).ok(),
            });
        }
        Some(out)
    } else {
        None
    };
    let mean_per_video_auc = per_video.as_ref().and_then(|pv| {
        let aucs: Vec<f64> = pv.iter().filter_map(|v| v.auc).collect();
        (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
    });

    let report = EvalReport {
        mode,
        auc: curve.as_ref().map(|c| c.auc),
        auc_reason,
        recall: tm.recall,
        precision: tm.precision,
        f1: tm.f1,
        oa: tm.oa,
        delta_s: delta,
        threshold,
        counts: tm.counts,
        degenerate: tm.degenerate,
        msre: mean_squared_reconstruction_error(&scores)?,
        fpr,
        frames_scored: scores.len(),
        frames_backfilled: test.iter().map(|s| s.backfilled.iter().filter(|&&b| b).count()).sum(),
        normalized: opts.normalize,
        per_video,
        mean_per_video_auc,
        config_fingerprint: config_fingerprint.to_string(),
    };
    Ok((report, curve))
}

/// `frame_index,score,label,backfilled`; unlabeled videos get an empty label column.
pub fn scores_csv(series: &ScoreSeries) -> String {
    let mut out = String::from("frame_index,score,label,backfilled\n");
    for (i, (&s, &b)) in series.scores.iter().zip(&series.backfilled).enumerate() {
        let label = series.labels.as_ref().map(|l| l[i].to_string()).unwrap_or_default();
        writeln!(out, "{i},{s},{label},{}", u8::from(b)).expect("write to String");
    }
    out
}

/// `threshold,fpr,tpr`
pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in &curve.points {
        writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr).expect("write to String");
    }
    out
}

/// `frame_index,label,p_0…p_{K−1},pc1,pc2,pc3` for every predicted frame of
/// every video, in input order, with a 3-component PCA over all rows.
pub fn features_csv(videos: &[ScoredVideo]) -> Result<String> {
    let rows: Vec<(usize, String, &Vec<f64>)> = videos
        .iter()
        .flat_map(|v| {
            v.features.iter().map(move |(i, p)| {
                let label = v.series.labels.as_ref().map(|l| l[*i].to_string()).unwrap_or_default();
                (*i, label, p)
            })
        })
        .collect();
    let Some(first) = rows.first() else {
        return Err(Error::Data("no features to export".into()));
    };
    let k = first.2.len();
    let matrix = DMatrix::from_fn(rows.len(), k, |r, c| rows[r].2[c]);
    let pca = pca_project(&matrix, 3)?;

    let mut out = String::from("frame_index,label");
    for j in 0..k {
        write!(out, ",p_{j}").expect("write to String");
    }
    out.push_str(",pc1,pc2,pc3\n");
    for (r, (i, label, p)) in rows.iter().enumerate() {
        write!(out, "{i},{label}").expect("write to String");
        for v in p.iter() {
            write!(out, ",{v}").expect("write to String");
        }
        for c in 0..3 {
            write!(out, ",{}", pca.projected[(r, c)]).expect("write to String");
        }
        out.push('\n');
    }
    Ok(out)
}

fn runs(flags: impl Iterator<Item = bool>) -> Vec<std::ops::Range<usize>> {
    let flags: Vec<bool> = flags.collect();
    let off: Vec<_> = flags.iter().enumerate().filter(|(_, &f)| !f).map(|(i, _)| i..i + 1).collect();
    complement_spans(&off, flags.len())
}

/// Per-frame score curve with anomalous frames shaded red, backfilled frames
/// shaded grey and the decision threshold dashed.
pub fn score_curve_svg(series: &ScoreSeries, threshold: Option<f64>) -> String {
    const W: f64 = 800.0;
    const H: f64 = 240.0;
    const PAD: f64 = 30.0;
    let n = series.scores.len().max(1);
    let top = series
        .scores
        .iter()
        .copied()
        .chain(threshold)
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let x = |i: f64| PAD + (W - 2.0 * PAD) * i / n as f64;
    let y = |s: f64| H - PAD - (H - 2.0 * PAD) * (s / top);

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )
    .expect("write to String");
    writeln!(out, r#"<title>anomaly score: {}</title>"#, series.video_id).expect("write to String");
    writeln!(out, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#).expect("write to String");
    let shade = |out: &mut String, r: &std::ops::Range<usize>, fill: &str| {
        writeln!(
            out,
            r#"<rect x="{:.2}" y="{PAD}" width="{:.2}" height="{}" fill="{fill}" fill-opacity="0.3"/>"#,
            x(r.start as f64),
            x(r.end as f64) - x(r.start as f64),
            H - 2.0 * PAD
        )
        .expect("write to String");
    };
    if let Some(labels) = &series.labels {
        for r in runs(labels.iter().map(|&l| l == 1)) {
            shade(&mut out, &r, "red");
        }
    }
    for r in runs(series.backfilled.iter().copied()) {
        shade(&mut out, &r, "grey");
    }
    writeln!(
        out,
        r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    )
    .expect("write to String");
    writeln!(out, r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#, H - PAD).expect("write to String");
    if let Some(t) = threshold {
        writeln!(
            out,
            r#"<line x1="{PAD}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="orange" stroke-dasharray="6 4"/>"#,
            W - PAD,
            y = y(t)
        )
        .expect("write to String");
    }
    let points: Vec<String> = series
        .scores
        .iter()
        .enumerate()
        .map(|(i, &s)| format!("{:.2},{:.2}", x(i as f64 + 0.5), y(s)))
        .collect();
    writeln!(out, r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#, points.join(" "))
        .expect("write to String");
    writeln!(out, r#"<text x="{PAD}" y="20" font-size="12" font-family="sans-serif">{} (max {top:.4})</text>"#, series.video_id)
        .expect("write to String");
    out.push_str("</svg>\n");
    out
}
