use std::io::Write;

use super::cv::{CvReport, MetricsReport, SensitivityPoint};
use super::importance::ImportanceReport;
use crate::dataset::LabeledPair;

fn metric_cells(m: &MetricsReport) -> String {
    format!(
        "{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}\t{}",
        m.precision,
        m.recall,
        m.f1,
        m.confusion.tp,
        m.confusion.fp,
        m.confusion.fn_,
        m.confusion.tn
    )
}

const METRIC_HEADER: &str = "precision\trecall\tf1\ttp\tfp\tfn\ttn";

/// One row per labelled run.
pub fn write_metrics_tsv<W: Write>(
    rows: &[(String, &MetricsReport)],
    w: &mut W,
) -> std::io::Result<()> {
    writeln!(w, "run\t{METRIC_HEADER}")?;
    for (label, m) in rows {
        writeln!(w, "{label}\t{}", metric_cells(m))?;
    }
    Ok(())
}

pub fn write_per_fold_tsv<W: Write>(m: &MetricsReport, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "fold\t{METRIC_HEADER}")?;
    for f in &m.per_fold {
        let c = &f.confusion;
        writeln!(
            w,
            "{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}\t{}",
            f.fold, f.precision, f.recall, f.f1, c.tp, c.fp, c.fn_, c.tn
        )?;
    }
    Ok(())
}

/// `key = value` lines, one block per run.
pub fn write_keyed<W: Write>(prefix: &str, m: &MetricsReport, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{prefix}.precision = {:.6}", m.precision)?;
    writeln!(w, "{prefix}.recall = {:.6}", m.recall)?;
    writeln!(w, "{prefix}.f1 = {:.6}", m.f1)?;
    writeln!(w, "{prefix}.tp = {}", m.confusion.tp)?;
    writeln!(w, "{prefix}.fp = {}", m.confusion.fp)?;
    writeln!(w, "{prefix}.fn = {}", m.confusion.fn_)?;
    writeln!(w, "{prefix}.tn = {}", m.confusion.tn)
}

pub fn write_ablation_tsv<W: Write>(reports: &[CvReport], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "mode\t{METRIC_HEADER}")?;
    for r in reports {
        writeln!(w, "{}\t{}", r.mode, metric_cells(&r.metrics))?;
    }
    Ok(())
}

pub fn write_sensitivity_tsv<W: Write>(
    points: &[SensitivityPoint],
    w: &mut W,
) -> std::io::Result<()> {
    writeln!(w, "proportion\tpairs\tpositives\t{METRIC_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{:.2}\t{}\t{}\t{}",
            p.proportion,
            p.n_pairs,
            p.n_positives,
            metric_cells(&p.report.metrics)
        )?;
    }
    Ok(())
}

/// Sorted by decreasing importance, ties by input order.
pub fn write_importance_tsv<W: Write>(report: &ImportanceReport, w: &mut W) -> std::io::Result<()> {
    let mut order: Vec<usize> = (0..report.names.len()).collect();
    order.sort_by(|&a, &b| {
        report.importance[b]
            .total_cmp(&report.importance[a])
            .then(a.cmp(&b))
    });
    writeln!(w, "rank\tinput\timportance")?;
    for (rank, i) in order.into_iter().enumerate() {
        writeln!(
            w,
            "{}\t{}\t{:.6}",
            rank + 1,
            report.names[i],
            report.importance[i]
        )?;
    }
    Ok(())
}

/// Test-set score of every pair from a cross-validation run.
pub fn write_predictions_tsv<W: Write>(
    pairs: &[LabeledPair],
    report: &CvReport,
    w: &mut W,
) -> std::io::Result<()> {
    writeln!(w, "main_id\tsub_id\tlabel\tfold\tscore\tpredicted")?;
    for p in &report.predictions {
        let pair = &pairs[p.index];
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{:.9}\t{}",
            pair.main_id,
            pair.sub_id,
            u8::from(p.label),
            p.fold,
            p.score,
            u8::from(p.predicted)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::cv::FoldMetrics;
    use crate::eval::Confusion;

    fn report() -> MetricsReport {
        let a = Confusion {
            tp: 8,
            fp: 1,
            fn_: 2,
            tn: 89,
        };
        let b = Confusion {
            tp: 9,
            fp: 0,
            fn_: 1,
            tn: 90,
        };
        MetricsReport::from_folds(vec![
            FoldMetrics::from_confusion(0, a),
            FoldMetrics::from_confusion(1, b),
        ])
    }

    #[test]
    fn micro_average_pools_counts() {
        let m = report();
        assert_eq!(
            m.confusion,
            Confusion {
                tp: 17,
                fp: 1,
                fn_: 3,
                tn: 179
            }
        );
        assert!((m.precision - 17.0 / 18.0).abs() < 1e-12);
        assert!((m.recall - 17.0 / 20.0).abs() < 1e-12);
    }

    #[test]
    fn tsv_and_keyed_layout() {
        let m = report();
        let mut out = Vec::new();
        write_metrics_tsv(&[("cnn".into(), &m)], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "run\tprecision\trecall\tf1\ttp\tfp\tfn\ttn");
        assert_eq!(lines[1].split('\t').count(), 8);
        assert!(lines[1].ends_with("\t17\t1\t3\t179"));

        let mut out = Vec::new();
        write_keyed("cv.cnn", &m, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("cv.cnn.precision = 0.944444\n"));
        assert!(text.contains("cv.cnn.fn = 3\n"));

        let mut out = Vec::new();
        write_per_fold_tsv(&m, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 3);
    }

    #[test]
    fn importance_is_ranked() {
        let r = ImportanceReport {
            names: vec!["a".into(), "b".into(), "c".into()],
            importance: vec![0.2, 0.5, 0.3],
        };
        let mut out = Vec::new();
        write_importance_tsv(&r, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let names: Vec<&str> = text
            .lines()
            .skip(1)
            .map(|l| l.split('\t').nth(1).unwrap())
            .collect();
        assert_eq!(names, vec!["b", "c", "a"]);
    }
}
