use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::train::Example;
use super::HarnessError;
use crate::embedstore::DocEmbedding;
use crate::heads::{argmax_rows, pad_batch, HeadModel};
use crate::neural::softmax;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub support: usize,
}

/// Classification metrics. `confusion[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub loss: f64,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub doc_id: String,
    pub true_label: usize,
    pub pred_label: usize,
    /// Softmax probability of the predicted class.
    pub confidence: f64,
    /// Cross-entropy of this document.
    pub loss: f64,
}

/// Eval-mode predictions in input order, computed in consecutive batches.
pub fn predict(model: &HeadModel, examples: &[Example], batch_size: usize) -> Result<Vec<Prediction>, HarnessError> {
    let mut out = Vec::with_capacity(examples.len());
    for batch in examples.chunks(batch_size.max(1)) {
        let docs: Vec<&DocEmbedding> = batch.iter().map(|e| &e.embedding).collect();
        let logits = model.logits(&pad_batch(&docs)?)?;
        let probs = softmax(&logits);
        let c = logits.shape()[1];
        for ((e, pred), (row, prow)) in batch
            .iter()
            .zip(argmax_rows(&logits))
            .zip(logits.data().chunks(c).zip(probs.data().chunks(c)))
        {
            let max = row.iter().map(|&v| f64::from(v)).fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|&v| (f64::from(v) - max).exp()).sum::<f64>().ln();
            out.push(Prediction {
                doc_id: e.doc_id.clone(),
                true_label: e.label,
                pred_label: pred,
                confidence: f64::from(prow[pred]),
                loss: lse - f64::from(row[e.label]),
            });
        }
    }
    Ok(out)
}

pub fn metrics_from_predictions(preds: &[Prediction], class_names: &[String]) -> Metrics {
    let c = class_names.len();
    let mut confusion = vec![vec![0usize; c]; c];
    for p in preds {
        confusion[p.true_label][p.pred_label] += 1;
    }
    let total = preds.len();
    let correct: usize = (0..c).map(|k| confusion[k][k]).sum();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let per_class = class_names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let support: usize = confusion[k].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[k]).sum();
            let m = ClassMetrics { precision: ratio(confusion[k][k], predicted), recall: ratio(confusion[k][k], support), support };
            (name.clone(), m)
        })
        .collect();
    let loss = if total == 0 { 0.0 } else { preds.iter().map(|p| p.loss).sum::<f64>() / total as f64 };
    Metrics { accuracy: ratio(correct, total), loss, per_class, confusion }
}

/// Eval-mode metrics and per-document predictions. Never changes `model`.
pub fn evaluate(
    model: &HeadModel,
    examples: &[Example],
    class_names: &[String],
    batch_size: usize,
) -> Result<(Metrics, Vec<Prediction>), HarnessError> {
    let preds = predict(model, examples, batch_size)?;
    Ok((metrics_from_predictions(&preds, class_names), preds))
}

#[derive(Serialize, Deserialize)]
struct PredictionRow {
    doc_id: String,
    true_label: String,
    pred_label: String,
    confidence: String,
}

/// Writes `doc_id,true_label,pred_label,confidence` with class names as
/// labels and six-decimal confidences.
pub fn write_predictions_csv<W: Write>(writer: W, preds: &[Prediction], class_names: &[String]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(writer);
    for p in preds {
        w.serialize(PredictionRow {
            doc_id: p.doc_id.clone(),
            true_label: class_names[p.true_label].clone(),
            pred_label: class_names[p.pred_label].clone(),
            confidence: format!("{:.6}", p.confidence),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a predictions file back as `(doc_id, true_label, pred_label, confidence)`.
pub fn read_predictions_csv<R: Read>(reader: R) -> Result<Vec<(String, String, String, f64)>, HarnessError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: PredictionRow = row?;
        let conf = row
            .confidence
            .parse()
            .map_err(|_| HarnessError::Config(format!("bad confidence {:?}", row.confidence)))?;
        out.push((row.doc_id, row.true_label, row.pred_label, conf));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(t: usize, p: usize) -> Prediction {
        Prediction { doc_id: format!("d{t}{p}"), true_label: t, pred_label: p, confidence: 0.5, loss: 1.0 }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn three_of_four() {
        let m = metrics_from_predictions(&[pred(0, 0), pred(1, 1), pred(1, 0), pred(0, 0)], &names(2));
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.confusion, vec![vec![2, 0], vec![1, 1]]);
        assert_eq!(m.per_class["c0"].precision, 2.0 / 3.0);
        assert_eq!(m.per_class["c1"].recall, 0.5);
    }

    #[test]
    fn constant_predictor_on_balanced_five_classes() {
        let preds: Vec<Prediction> = (0..5).flat_map(|c| (0..4).map(move |_| pred(c, 2))).collect();
        let m = metrics_from_predictions(&preds, &names(5));
        assert_eq!(m.accuracy, 0.2);
        for (k, row) in m.confusion.iter().enumerate() {
            assert_eq!(row.iter().sum::<usize>(), m.per_class[&format!("c{k}")].support);
        }
        assert_eq!(m.per_class["c0"].precision, 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let preds = vec![pred(0, 1), pred(1, 1)];
        let mut buf = Vec::new();
        write_predictions_csv(&mut buf, &preds, &names(2)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "doc_id,true_label,pred_label,confidence\nd01,c0,c1,0.500000\nd11,c1,c1,0.500000\n");
        let back = read_predictions_csv(buf.as_slice()).unwrap();
        assert_eq!(back[1], ("d11".into(), "c1".into(), "c1".into(), 0.5));
    }
}
