//! Evaluation against ground truth: Dice overlap, volume error in
//! milliliters, and the method-comparison table over the phantom battery.

use crate::error::{Error, Result};
use crate::partition::{quantify, QuantReport};
use crate::phantom::{generate, PhantomParams};
use crate::pipeline::{run_methods, PipelineConfig, SelectionMethod};
use crate::volume::{MaskGrid, MaskLabel};
use rayon::prelude::*;

/// Dice overlap of one label between two aligned label arrays. Two empty
/// selections agree perfectly and score 1.
pub fn dice_labels(a: &[MaskLabel], b: &[MaskLabel], label: MaskLabel) -> f64 {
    let mut ca = 0usize;
    let mut cb = 0usize;
    let mut both = 0usize;
    for (&la, &lb) in a.iter().zip(b.iter()) {
        let ia = la == label;
        let ib = lb == label;
        ca += ia as usize;
        cb += ib as usize;
        both += (ia && ib) as usize;
    }
    if ca + cb == 0 {
        1.0
    } else {
        2.0 * both as f64 / (ca + cb) as f64
    }
}

/// Dice similarity of one label across two masks of equal dims.
pub fn dice(a: &MaskGrid, b: &MaskGrid, label: MaskLabel) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::Misaligned(format!(
            "mask dims {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(dice_labels(a.data(), b.data(), label))
}

/// Mean absolute volume error in milliliters over paired reports.
pub fn mae_ml(pred: &[QuantReport], truth: &[QuantReport], label: MaskLabel) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Misaligned(format!(
            "{} predictions vs {} truths",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Param("no cases to average".into()));
    }
    let sum: f64 = pred
        .iter()
        .zip(truth.iter())
        .map(|(p, t)| (p.label_ml(label) - t.label_ml(label)).abs())
        .sum();
    Ok(sum / pred.len() as f64)
}

/// One row of the method-comparison table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EvalRow {
    pub method: String,
    pub sat_dsc: f64,
    pub vat_dsc: f64,
    pub sat_mae_ml: f64,
    pub vat_mae_ml: f64,
}

pub const ABLATION_METHODS: [SelectionMethod; 4] = [
    SelectionMethod::RansacEllipse,
    SelectionMethod::MadOnly,
    SelectionMethod::LoopOnly,
    SelectionMethod::Fusion,
];

/// Run every selection method over the battery and aggregate mean Dice and
/// volume MAE per method. Cases run concurrently; shared per-slice stages are
/// computed once per case.
pub fn ablation_run(
    suite: &[PhantomParams],
    cfg: &PipelineConfig,
) -> Result<Vec<EvalRow>> {
    if suite.is_empty() {
        return Err(Error::Param("empty phantom battery".into()));
    }
    struct CaseResult {
        dsc: Vec<(f64, f64)>,
        pred: Vec<QuantReport>,
        truth: QuantReport,
    }
    let cases: Vec<CaseResult> = suite
        .par_iter()
        .map(|params| -> Result<CaseResult> {
            let (vol, truth) = generate(params)?;
            let masks = run_methods(&vol, cfg, &ABLATION_METHODS)?;
            let dsc = masks
                .iter()
                .map(|m| {
                    Ok((
                        dice(m, &truth, MaskLabel::Sat)?,
                        dice(m, &truth, MaskLabel::Vat)?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CaseResult {
                dsc,
                pred: masks.iter().map(quantify).collect(),
                truth: quantify(&truth),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = cases.len() as f64;
    let truths: Vec<QuantReport> = cases.iter().map(|c| c.truth.clone()).collect();
    ABLATION_METHODS
        .iter()
        .enumerate()
        .map(|(m, method)| {
            let sat_dsc = cases.iter().map(|c| c.dsc[m].0).sum::<f64>() / n;
            let vat_dsc = cases.iter().map(|c| c.dsc[m].1).sum::<f64>() / n;
            let preds: Vec<QuantReport> = cases.iter().map(|c| c.pred[m].clone()).collect();
            Ok(EvalRow {
                method: method.name().to_string(),
                sat_dsc,
                vat_dsc,
                sat_mae_ml: mae_ml(&preds, &truths, MaskLabel::Sat)?,
                vat_mae_ml: mae_ml(&preds, &truths, MaskLabel::Vat)?,
            })
        })
        .collect()
}

/// Plain-text rendering of the comparison table.
pub fn render_table(rows: &[EvalRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<18} {:>9} {:>9} {:>12} {:>12}\n",
        "Method", "SAT DSC", "VAT DSC", "SAT MAE(ml)", "VAT MAE(ml)"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<18} {:>9.4} {:>9.4} {:>12.4} {:>12.4}\n",
            r.method, r.sat_dsc, r.vat_dsc, r.sat_mae_ml, r.vat_mae_ml
        ));
    }
    out
}
