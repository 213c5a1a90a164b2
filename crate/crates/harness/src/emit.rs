//! Plot-ready output files.
//!
//! Per record, under `<root>/<label>/`:
//! - `data.csv` with columns `t, delta_t, I_quantum, I_echo, I_semiclassical, I_closed_form`
//! - `<channel>.dat`, two whitespace-separated columns `delta_t I`, for gnuplot
//! - `metadata.json`
//!
//! Numbers are written with 17 significant digits so they parse back to the
//! identical `f64`. Absent channels are empty fields.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::analysis::{summarize, Curves, Summary};
use crate::config::ResolvedConfig;
use crate::error::{HarnessError, HarnessResult};
use crate::experiment::RunRecord;

pub const CSV_HEADER: [&str; 6] = ["t", "delta_t", "I_quantum", "I_echo", "I_semiclassical", "I_closed_form"];
pub const SUMMARY_HEADER: [&str; 7] = [
    "label",
    "slope_quantum",
    "slope_semiclassical",
    "plateau_mean",
    "plateau_std",
    "max_rel_dev",
    "echo_max_rel_dev",
];
pub const DATA_FILE: &str = "data.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const SUMMARY_FILE: &str = "summary.csv";

pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

fn optional(x: Option<f64>) -> String {
    x.map(format_value).unwrap_or_default()
}

fn write_file(path: &Path, contents: &str) -> HarnessResult<()> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

fn channels(c: &Curves) -> [(&'static str, Option<&Vec<f64>>); 4] {
    [
        ("quantum", c.quantum.as_ref()),
        ("echo", c.echo.as_ref()),
        ("semiclassical", c.semiclassical.as_ref()),
        ("closed_form", c.closed_form.as_ref()),
    ]
}

/// CSV text for a set of curves. Fails on non-finite values.
pub fn curves_to_csv(c: &Curves, path_hint: &Path) -> HarnessResult<String> {
    let chans = channels(c);
    let mut out = CSV_HEADER.join(",");
    out.push('\n');
    for k in 0..c.t.len() {
        let mut fields = vec![format_value(c.t[k]), format_value(c.delta_t[k])];
        for (name, ch) in &chans {
            match ch {
                Some(v) if !v[k].is_finite() => {
                    return Err(HarnessError::Parse {
                        path: path_hint.to_path_buf(),
                        message: format!("non-finite {name} value at sample {k}"),
                    })
                }
                Some(v) => fields.push(format_value(v[k])),
                None => fields.push(String::new()),
            }
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_csv(text: &str, path: &Path) -> HarnessResult<Curves> {
    let bad = |message: String| HarnessError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    if header.split(',').map(str::trim).ne(CSV_HEADER.iter().copied()) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut cols: [Vec<Option<f64>>; 6] = Default::default();
    for (row, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(bad(format!("row {} has {} fields", row + 1, fields.len())));
        }
        for (col, f) in cols.iter_mut().zip(fields) {
            let f = f.trim();
            col.push(if f.is_empty() {
                None
            } else {
                let v: f64 = f.parse().map_err(|_| bad(format!("row {}: bad number {f:?}", row + 1)))?;
                if !v.is_finite() {
                    return Err(bad(format!("row {}: non-finite value", row + 1)));
                }
                Some(v)
            });
        }
    }
    let full = |col: &[Option<f64>], name: &str| -> HarnessResult<Option<Vec<f64>>> {
        if col.iter().all(Option::is_none) {
            Ok(None)
        } else {
            col.iter()
                .copied()
                .collect::<Option<Vec<_>>>()
                .map(Some)
                .ok_or_else(|| bad(format!("column {name} is partially empty")))
        }
    };
    let t = full(&cols[0], "t")?.ok_or_else(|| bad("no samples".into()))?;
    let delta_t = full(&cols[1], "delta_t")?.ok_or_else(|| bad("no delta_t column".into()))?;
    Ok(Curves {
        t,
        delta_t,
        quantum: full(&cols[2], "I_quantum")?,
        echo: full(&cols[3], "I_echo")?,
        semiclassical: full(&cols[4], "I_semiclassical")?,
        closed_form: full(&cols[5], "I_closed_form")?,
    })
}

pub fn read_csv(path: &Path) -> HarnessResult<Curves> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_csv(&text, path)
}

pub fn metadata(record: &RunRecord, cfg: &ResolvedConfig) -> serde_json::Value {
    json!({
        "label": record.label,
        "model": record.model.as_str(),
        "code_version": env!("CARGO_PKG_VERSION"),
        "hbar": record.hbar,
        "delta": record.delta,
        "j_star": cfg.j_star,
        "mode_dims": record.mode_dims,
        "total_dim": record.mode_dims.iter().product::<usize>(),
        "n_eff": record.n_eff,
        "time_unit": if record.delta > 0.0 { "t = delta_t / delta" } else { "t = delta_t grid value (delta = 0)" },
        "semiclassics": record.semiclassics,
        "summary": record.summary,
        "truncation_margin": record.truncation_margin,
        "propagation": record.propagation,
        "warnings": record.warnings,
        "non_reference_defaults": cfg.non_reference_defaults,
        "timing": record.timing,
        "config": cfg,
    })
}

/// Writes all files of one record and returns its directory.
pub fn emit_record(record: &RunRecord, cfg: &ResolvedConfig, root: &Path) -> HarnessResult<PathBuf> {
    let dir = root.join(&record.label);
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let data = dir.join(DATA_FILE);
    write_file(&data, &curves_to_csv(&record.curves, &data)?)?;
    if cfg.gnuplot {
        for (name, ch) in channels(&record.curves) {
            let Some(values) = ch else { continue };
            let mut text = format!("# delta_t I_{name}\n");
            for (x, v) in record.curves.delta_t.iter().zip(values) {
                let _ = writeln!(text, "{} {}", format_value(*x), format_value(*v));
            }
            write_file(&dir.join(format!("{name}.dat")), &text)?;
        }
    }
    let meta = serde_json::to_string_pretty(&metadata(record, cfg)).expect("metadata serializes");
    write_file(&dir.join(METADATA_FILE), &(meta + "\n"))?;
    Ok(dir)
}

pub fn summary_csv(rows: &[Summary]) -> String {
    let mut out = SUMMARY_HEADER.join(",");
    out.push('\n');
    for s in rows {
        let fields = [
            s.label.clone(),
            optional(s.slope_quantum),
            optional(s.slope_semiclassical),
            optional(s.plateau_mean),
            optional(s.plateau_std),
            optional(s.max_rel_dev),
            optional(s.echo_max_rel_dev),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write_summary(rows: &[Summary], root: &Path) -> HarnessResult<PathBuf> {
    fs::create_dir_all(root).map_err(|e| HarnessError::io(root, e))?;
    let path = root.join(SUMMARY_FILE);
    write_file(&path, &summary_csv(rows))?;
    Ok(path)
}

/// Summaries for every `<label>/data.csv` below `root`, in label order.
///
/// The validity window is read from a sibling `metadata.json` when present;
/// without it no time cut is applied.
pub fn analyze_directory(root: &Path, plateau_fraction: f64) -> HarnessResult<Vec<Summary>> {
    let entries = fs::read_dir(root).map_err(|e| HarnessError::io(root, e))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(DATA_FILE).is_file())
        .collect();
    dirs.sort();
    dirs.iter()
        .map(|dir| {
            let curves = read_csv(&dir.join(DATA_FILE))?;
            let meta_path = dir.join(METADATA_FILE);
            let t_max = match fs::read_to_string(&meta_path) {
                Ok(text) => {
                    let meta: serde_json::Value =
                        serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
                            path: meta_path.clone(),
                            message: e.to_string(),
                        })?;
                    meta["semiclassics"]["validity_t_max"].as_f64().unwrap_or(f64::INFINITY)
                }
                Err(_) => f64::INFINITY,
            };
            let label = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(summarize(&label, &curves, t_max, plateau_fraction))
        })
        .collect()
}
