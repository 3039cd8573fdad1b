use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_toml<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let text = toml::to_string(value).context("serializing report")?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

const TRACE_LEGEND: &[(&str, &str)] = &[
    ("t", "simulation time of the record"),
    ("link", "link index"),
    ("Q", "queue length after the event"),
    ("r", "allocated rate"),
    ("v", "controller parameter in force"),
    ("event_kind", "start, boundary, sample or end"),
    ("sigma", "band bitmask of the link (white-space networks only)"),
];

const INTERVAL_LEGEND: &[(&str, &str)] = &[
    ("start", "interval start time"),
    ("end", "interval end time"),
    ("link", "link index"),
    ("lambda_hat", "empirical arrival rate over the interval"),
    ("s_hat", "time-averaged allocated rate over the interval"),
    ("v", "controller parameter used during the interval"),
];

const STATIONARY_LEGEND: &[(&str, &str)] = &[
    ("state", "state index"),
    ("vector", "rate vector, ';'-separated by link"),
    ("probability", "stationary probability"),
    ("sigma", "per-link band bitmasks, ';'-separated (white-space networks only)"),
];

/// `file,column,description` rows for every table we write.
pub fn write_legend(dir: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(dir, "legend.csv")?);
    w.write_record(["file", "column", "description"])?;
    for (file, cols) in [
        ("trace.csv", TRACE_LEGEND),
        ("intervals.csv", INTERVAL_LEGEND),
        ("stationary.csv", STATIONARY_LEGEND),
    ] {
        for (c, d) in cols {
            w.write_record([file, c, d])?;
        }
    }
    w.flush()?;
    Ok(())
}
