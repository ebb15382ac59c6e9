//! Confusion matrices and segmentation scores.

use std::fmt::Write as _;

use crate::error::{Result, RsnetError};

/// `counts[t][p]`: points of true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self { k: num_classes, counts: vec![0; num_classes * num_classes] }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        let k = counts.len();
        assert!(counts.iter().all(|r| r.len() == k), "confusion matrix must be square");
        Self { k, counts: counts.into_iter().flatten().collect() }
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn update(&mut self, truth: &[usize], pred: &[usize]) -> Result<()> {
        if truth.len() != pred.len() {
            return Err(RsnetError::Validation(format!("{} truth labels vs {} predictions", truth.len(), pred.len())));
        }
        if let Some(bad) = truth.iter().chain(pred).find(|&&l| l >= self.k) {
            return Err(RsnetError::Validation(format!("label {bad} out of range for {} classes", self.k)));
        }
        for (&t, &p) in truth.iter().zip(pred) {
            self.counts[t * self.k + p] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.k, other.k);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    fn row_sum(&self, c: usize) -> u64 {
        (0..self.k).map(|p| self.get(c, p)).sum()
    }

    fn col_sum(&self, c: usize) -> u64 {
        (0..self.k).map(|t| self.get(t, c)).sum()
    }

    fn ensure_nonempty(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(RsnetError::Validation("confusion matrix is empty".into()));
        }
        Ok(())
    }

    /// IOU per class; `None` for classes absent from both truth and prediction.
    pub fn per_class_iou(&self) -> Result<Vec<Option<f64>>> {
        self.ensure_nonempty()?;
        Ok((0..self.k)
            .map(|c| {
                let tp = self.get(c, c);
                let union = self.row_sum(c) + self.col_sum(c) - tp;
                (union > 0).then(|| tp as f64 / union as f64)
            })
            .collect())
    }

    /// Recall per class; `None` for classes absent from the truth.
    pub fn per_class_acc(&self) -> Result<Vec<Option<f64>>> {
        self.ensure_nonempty()?;
        Ok((0..self.k)
            .map(|c| {
                let row = self.row_sum(c);
                (row > 0).then(|| self.get(c, c) as f64 / row as f64)
            })
            .collect())
    }

    pub fn miou(&self) -> Result<f64> {
        Ok(mean_present(&self.per_class_iou()?))
    }

    pub fn macc(&self) -> Result<f64> {
        Ok(mean_present(&self.per_class_acc()?))
    }

    pub fn overall_acc(&self) -> Result<f64> {
        self.ensure_nonempty()?;
        let trace: u64 = (0..self.k).map(|c| self.get(c, c)).sum();
        Ok(trace as f64 / self.total() as f64)
    }

    /// Accuracy over the points whose true class is in `classes`.
    pub fn accuracy_over(&self, classes: &[usize]) -> Result<f64> {
        let rows: u64 = classes.iter().map(|&c| self.row_sum(c)).sum();
        if rows == 0 {
            return Err(RsnetError::Validation("no points of the requested classes".into()));
        }
        let hits: u64 = classes.iter().map(|&c| self.get(c, c)).sum();
        Ok(hits as f64 / rows as f64)
    }
}

fn mean_present(v: &[Option<f64>]) -> f64 {
    let present: Vec<f64> = v.iter().flatten().copied().collect();
    present.iter().sum::<f64>() / present.len() as f64
}

/// Scores of one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub miou: f64,
    pub macc: f64,
    pub overall_acc: f64,
    pub per_class_iou: Vec<Option<f64>>,
    pub class_names: Vec<String>,
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix, class_names: &[String]) -> Result<Self> {
        let names = if class_names.len() == cm.num_classes() {
            class_names.to_vec()
        } else {
            (0..cm.num_classes()).map(|c| format!("class{c}")).collect()
        };
        Ok(Self {
            miou: cm.miou()?,
            macc: cm.macc()?,
            overall_acc: cm.overall_acc()?,
            per_class_iou: cm.per_class_iou()?,
            class_names: names,
        })
    }

    /// Flat `key value` lines, 4 decimals. Classes absent from truth and
    /// prediction print `nan`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "miou {:.4}", self.miou).unwrap();
        writeln!(out, "macc {:.4}", self.macc).unwrap();
        writeln!(out, "overall_acc {:.4}", self.overall_acc).unwrap();
        for (name, iou) in self.class_names.iter().zip(&self.per_class_iou) {
            match iou {
                Some(v) => writeln!(out, "iou.{name} {v:.4}").unwrap(),
                None => writeln!(out, "iou.{name} nan").unwrap(),
            }
        }
        out
    }

    /// One header row and one value row of per-class IOU, in percent.
    pub fn class_table(&self) -> String {
        let mut header = format!("{:>8} {:>8}", "mIOU", "mAcc");
        let mut row = format!("{:>8.2} {:>8.2}", 100.0 * self.miou, 100.0 * self.macc);
        for (name, iou) in self.class_names.iter().zip(&self.per_class_iou) {
            let w = name.len().max(6);
            write!(header, " {name:>w$}").unwrap();
            match iou {
                Some(v) => write!(row, " {:>w$.2}", 100.0 * v).unwrap(),
                None => write!(row, " {:>w$}", "-").unwrap(),
            }
        }
        format!("{header}\n{row}\n")
    }
}
