//! Result files: CSV tables, JSON-lines traces, plot data and assignments.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde_json::Value;

use crate::experiment::Outcome;

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

pub fn write_json(path: &Path, value: &Value) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn writer(path: &Path) -> anyhow::Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

/// One row per cell, in the order given.
pub fn write_results(path: &Path, rows: &[Outcome], variant_column: &str) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "dataset",
        "k",
        "seed",
        variant_column,
        "status",
        "cost",
        "init_cost",
        "lambda",
        "beta",
        "satisfied",
        "iterations",
        "nodes",
        "prefix",
        "prefix_dropped",
        "diagnostic",
        "seconds",
    ])?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.k.to_string(),
            r.seed.to_string(),
            r.variant.clone(),
            r.status.clone(),
            r.cost.to_string(),
            r.init_cost.to_string(),
            join(&r.lambda),
            r.beta.as_deref().map(join).unwrap_or_default(),
            r.satisfied.map(|s| s.to_string()).unwrap_or_default(),
            r.iterations.to_string(),
            r.nodes.to_string(),
            r.prefix.clone(),
            r.prefix_dropped.to_string(),
            r.diagnostic.clone(),
            format!("{:.6}", r.seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per MiniReL iteration, tagged with its cell.
pub fn write_traces(path: &Path, rows: &[Outcome], variant_column: &str) -> anyhow::Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        for it in &r.trace {
            let mut v = serde_json::to_value(it)?;
            let obj = v.as_object_mut().expect("records serialize as objects");
            obj.insert("dataset".into(), r.dataset.clone().into());
            obj.insert("k".into(), r.k.into());
            obj.insert("seed".into(), r.seed.into());
            obj.insert(variant_column.into(), r.variant.clone().into());
            writeln!(f, "{}", serde_json::to_string(&v)?)?;
        }
    }
    Ok(())
}

pub fn assignment_file_name(r: &Outcome) -> String {
    format!("{}_{}_k{}_s{}.csv", r.dataset, r.variant, r.k, r.seed)
}

/// Final cluster labels of each cell, one per line under a `cluster` header.
pub fn write_assignments(dir: &Path, rows: &[Outcome]) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for r in rows {
        let mut text = String::from("cluster\n");
        for c in &r.assignment {
            text.push_str(&c.to_string());
            text.push('\n');
        }
        let path = dir.join(assignment_file_name(r));
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Rows grouped by `key`, in key order.
fn grouped<K: Ord>(rows: &[Outcome], key: impl Fn(&Outcome) -> K) -> BTreeMap<K, Vec<&Outcome>> {
    let mut m: BTreeMap<K, Vec<&Outcome>> = BTreeMap::new();
    for r in rows {
        m.entry(key(r)).or_default().push(r);
    }
    m
}

/// Mean cost and time per dataset, variant and K.
pub fn write_cost_plot(path: &Path, rows: &[Outcome], order: &[String]) -> anyhow::Result<()> {
    let rank = |v: &str| order.iter().position(|o| o == v).unwrap_or(usize::MAX);
    let mut w = writer(path)?;
    w.write_record(["dataset", "method", "k", "runs", "cost_mean", "cost_stderr", "seconds_mean", "seconds_stderr"])?;
    for ((d, _, v, k), rs) in grouped(rows, |r| (r.dataset.clone(), rank(&r.variant), r.variant.clone(), r.k)) {
        let (cm, cs) = mean_stderr(&rs.iter().map(|r| r.cost).collect::<Vec<_>>());
        let (sm, ss) = mean_stderr(&rs.iter().map(|r| r.seconds).collect::<Vec<_>>());
        w.write_record([
            d,
            v,
            k.to_string(),
            rs.len().to_string(),
            cm.to_string(),
            cs.to_string(),
            format!("{sm:.6}"),
            format!("{ss:.6}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Represented-cluster counts per group next to the β each method targets.
pub fn write_lambda_plot(
    path: &Path,
    rows: &[Outcome],
    order: &[String],
    group_names: &BTreeMap<String, Vec<String>>,
) -> anyhow::Result<()> {
    let rank = |v: &str| order.iter().position(|o| o == v).unwrap_or(usize::MAX);
    let mut w = writer(path)?;
    w.write_record([
        "dataset",
        "method",
        "k",
        "group",
        "group_name",
        "lambda_mean",
        "lambda_min",
        "lambda_max",
        "beta",
    ])?;
    for ((d, _, v, k), rs) in grouped(rows, |r| (r.dataset.clone(), rank(&r.variant), r.variant.clone(), r.k)) {
        let names = group_names.get(&d);
        for g in 0..rs[0].lambda.len() {
            let ls: Vec<usize> = rs.iter().map(|r| r.lambda[g]).collect();
            let mean = ls.iter().sum::<usize>() as f64 / ls.len() as f64;
            w.write_record([
                d.clone(),
                v.clone(),
                k.to_string(),
                g.to_string(),
                names.and_then(|n| n.get(g)).cloned().unwrap_or_default(),
                mean.to_string(),
                ls.iter().min().unwrap().to_string(),
                ls.iter().max().unwrap().to_string(),
                rs[0].beta.as_ref().map(|b| b[g].to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Mean ± standard error per dataset and variant, pooled over K and seeds.
/// With a `baseline` variant present, adds the ratio of its mean time to
/// each variant's mean time.
pub fn write_bench_summary(
    path: &Path,
    rows: &[Outcome],
    variant_column: &str,
    order: &[String],
    baseline: Option<&str>,
) -> anyhow::Result<()> {
    let rank = |v: &str| order.iter().position(|o| o == v).unwrap_or(usize::MAX);
    let mut w = writer(path)?;
    let mut header = vec![
        "dataset",
        variant_column,
        "runs",
        "infeasible",
        "cost_mean",
        "cost_stderr",
        "iterations_mean",
        "iterations_stderr",
        "seconds_mean",
        "seconds_stderr",
    ];
    if baseline.is_some() {
        header.push("speedup_vs_full");
    }
    w.write_record(&header)?;
    let groups = grouped(rows, |r| (r.dataset.clone(), rank(&r.variant), r.variant.clone()));
    for ((d, _, v), rs) in &groups {
        let ok: Vec<&&Outcome> = rs.iter().filter(|r| !r.infeasible).collect();
        let (cm, cs) = mean_stderr(&ok.iter().map(|r| r.cost).collect::<Vec<_>>());
        let (im, is) = mean_stderr(&rs.iter().map(|r| r.iterations as f64).collect::<Vec<_>>());
        let (sm, ss) = mean_stderr(&rs.iter().map(|r| r.seconds).collect::<Vec<_>>());
        let mut rec = vec![
            d.clone(),
            v.clone(),
            rs.len().to_string(),
            (rs.len() - ok.len()).to_string(),
            cm.to_string(),
            cs.to_string(),
            im.to_string(),
            is.to_string(),
            format!("{sm:.6}"),
            format!("{ss:.6}"),
        ];
        if let Some(b) = baseline {
            let base = groups
                .iter()
                .find(|((bd, _, bv), _)| bd == d && bv == b)
                .map(|(_, brs)| mean_stderr(&brs.iter().map(|r| r.seconds).collect::<Vec<_>>()).0);
            rec.push(base.map(|t| format!("{:.4}", t / sm)).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stderr_of_known_sample() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sample sd = sqrt(5/3), stderr = sd / 2
        assert!((s - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(mean_stderr(&[7.0]), (7.0, 0.0));
    }
}
