use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use levelset_core::geometry::extract_interface;
use serde_json::{json, Value};

use crate::config::Config;
use crate::experiments::Outcome;

const ROUNDOFF: f64 = 1e-12;
const PLOT_SCRIPT: &str = include_str!("plot.py");

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes every artifact of one run into `dir`.
pub fn write(dir: &Path, cfg: &Config, out: &Outcome, total_secs: f64) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut manifest = String::from("run,param,index,time,file\n");
    let mut runs_json = Vec::new();
    for run in &out.runs {
        let rel = Path::new("runs").join(&run.label);
        fs::create_dir_all(dir.join(&rel)).with_context(|| format!("creating {}", rel.display()))?;
        for (k, f) in run.fields.iter().enumerate() {
            let file = rel.join(format!("snap_{k:04}.csv"));
            let mut w = create(&dir.join(&file))?;
            f.write_csv(&mut w)?;
            w.flush()?;
            let param = run.param.map(|p| p.to_string()).unwrap_or_default();
            writeln!(manifest, "{},{param},{k},{:?},{}", run.label, f.time(), file.display())?;
        }
        if let Some(last) = run.fields.last() {
            if let Ok(iface) = extract_interface(last) {
                let mut w = create(&dir.join(rel.join("interface.csv")))?;
                iface.write_csv(&mut w)?;
                w.flush()?;
            }
        }
        runs_json.push(json!({
            "label": run.label,
            "param": run.param,
            "snapshots": run.fields.len(),
            "solver": run.meta,
        }));
    }
    write_text(&dir.join("manifest.csv"), &manifest)?;

    if let Some(conv) = &out.convergence {
        let mut s = format!("{},error\n", conv.param);
        for (p, e) in &conv.rows {
            writeln!(s, "{p:?},{e:?}")?;
        }
        write_text(&dir.join("convergence.csv"), &s)?;
    }
    for table in &out.tables {
        let mut s = table.header.clone();
        s.push('\n');
        for r in &table.rows {
            s.push_str(r);
            s.push('\n');
        }
        write_text(&dir.join(&table.file), &s)?;
    }

    let report = json!({
        "name": cfg.name,
        "experiment": cfg.experiment.kind(),
        "inputs": cfg,
        "constants": out.constants,
        "results": out.results,
        "warnings": out.warnings,
        "runs": runs_json,
    });
    write_text(&dir.join("report.json"), &serde_json::to_string_pretty(&report)?)?;

    let timings: serde_json::Map<String, Value> = out.timings.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let timings = json!({ "total_seconds": total_secs, "runs": timings });
    write_text(&dir.join("timings.json"), &serde_json::to_string_pretty(&timings)?)?;
    write_text(&dir.join("plot.py"), PLOT_SCRIPT)?;
    Ok(())
}

/// Rows `(param, error, order)` from a convergence table; the order of a row
/// compares it with the previous one.
pub fn convergence_rows(text: &str) -> Result<(String, Vec<(f64, f64, Option<f64>)>)> {
    let mut lines = text.lines();
    let header = lines.next().context("empty convergence table")?;
    let param = header.split(',').next().unwrap_or("param").to_string();
    let mut rows: Vec<(f64, f64, Option<f64>)> = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut it = line.split(',').map(str::trim);
        let (Some(p), Some(e)) = (it.next(), it.next()) else {
            bail!("convergence.csv line {}: expected two columns", i + 2);
        };
        let p: f64 = p.parse().with_context(|| format!("convergence.csv line {}", i + 2))?;
        let e: f64 = e.parse().with_context(|| format!("convergence.csv line {}", i + 2))?;
        let order = rows.last().and_then(|&(p0, e0, _)| {
            let r = (p0 / p).ln().abs();
            (r > 0.0 && e > 0.0 && e0 > 0.0).then(|| (e0 / e).ln() / r)
        });
        rows.push((p, e, order));
    }
    Ok((param, rows))
}

/// The convergence table for `report`.
pub fn render_report(dir: &Path) -> Result<String> {
    let manifest = dir.join("manifest.csv");
    fs::metadata(&manifest).with_context(|| format!("no manifest at {}", manifest.display()))?;
    let report: Value = match fs::read_to_string(dir.join("report.json")) {
        Ok(s) => serde_json::from_str(&s).context("parsing report.json")?,
        Err(_) => Value::Null,
    };
    let kind = report["experiment"].as_str().unwrap_or("unknown");
    let mut out = String::new();
    writeln!(out, "experiment: {kind}")?;
    let conv = dir.join("convergence.csv");
    if !conv.exists() {
        writeln!(out, "no convergence table")?;
        return Ok(out);
    }
    let text = fs::read_to_string(&conv).with_context(|| format!("reading {}", conv.display()))?;
    let (param, rows) = convergence_rows(&text)?;
    writeln!(out, "{param:>12} {:>14} {:>8}", "error", "order")?;
    for (p, e, o) in &rows {
        let o = o.map(|o| format!("{o:.3}")).unwrap_or_else(|| "-".into());
        writeln!(out, "{p:>12} {e:>14.6e} {o:>8}")?;
    }
    if kind == "theta-sweep" {
        let dec = rows.windows(2).all(|w| w[1].1 < w[0].1);
        let floor = rows.iter().all(|r| r.1 <= ROUNDOFF);
        let note = if floor { " (all errors at roundoff level)" } else { "" };
        writeln!(out, "errors strictly decreasing: {}{note}", if dec { "yes" } else { "no" })?;
    }
    Ok(out)
}
