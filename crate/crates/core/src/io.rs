//! Path CSV files, atomic writes and append-only report files.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fbm::{HurstIndex, PathEnvelope, SamplePath, TimeGrid};

/// Path CSV: one `#` line holding the envelope JSON, then `t,x1,…,xd`.
/// Floats use the shortest round-trip representation, so rereading is exact.
pub fn path_to_csv(path: &SamplePath) -> Result<String> {
    let mut out = format!("# {}\n", serde_json::to_string(&path.envelope())?);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend((1..=path.dim()).map(|j| format!("x{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, t) in path.grid.times().iter().enumerate() {
        let mut rec = vec![t.to_string()];
        rec.extend(path.values.iter().map(|c| c[i].to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// Rows of a path or graph CSV, skipping `#` lines. Returns the envelope when
/// present.
pub fn read_path_csv(file: &Path) -> Result<(Option<PathEnvelope>, Vec<f64>, Vec<Vec<f64>>)> {
    let reader = BufReader::new(File::open(file)?);
    let mut envelope = None;
    let mut body = String::new();
    for line in reader.lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix('#') {
            if envelope.is_none() {
                envelope = serde_json::from_str(rest.trim()).ok();
            }
            continue;
        }
        body.push_str(&line);
        body.push('\n');
    }
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let d = r.headers().map_err(csv_err)?.len().saturating_sub(1);
    if d == 0 {
        return Err(Error::Config(format!("{} needs a time column and at least one value column", file.display())));
    }
    let mut times = Vec::new();
    let mut values = vec![Vec::new(); d];
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{}: bad number {s:?}", file.display())))
        };
        times.push(parse(&rec[0])?);
        for (j, col) in values.iter_mut().enumerate() {
            col.push(parse(&rec[j + 1])?);
        }
    }
    Ok((envelope, times, values))
}

/// Reads a path CSV back into a `SamplePath`. Without an envelope line the
/// Hurst index is taken from `fallback`.
pub fn read_sample_path(file: &Path, fallback: Option<HurstIndex>) -> Result<SamplePath> {
    let (env, times, values) = read_path_csv(file)?;
    let grid = TimeGrid::from_times(times)?;
    let (hurst, seed) = match (&env, fallback) {
        (Some(e), _) => (e.hurst, e.seed),
        (None, Some(h)) => (h, 0),
        (None, None) => return Err(Error::Config(format!("{} has no envelope; a Hurst index is required", file.display()))),
    };
    Ok(SamplePath { grid, values, hurst_components: vec![hurst], seeds: vec![seed] })
}

/// Write to a sibling temporary file, then rename over `target`.
pub fn write_atomic(target: &Path, contents: &[u8]) -> Result<()> {
    let dir = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = target.file_name().ok_or_else(|| Error::Config(format!("{} is not a file path", target.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, target)?;
    Ok(())
}

/// Append-only line file. Each `append` is a single write followed by a sync.
pub struct AppendFile {
    file: File,
}

impl AppendFile {
    /// Truncates `path` and writes `header`.
    pub fn create(path: &Path, header: &str) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        write_atomic(path, header.as_bytes())?;
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Self { file })
    }

    pub fn append(&mut self, line: &str) -> Result<()> {
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        Ok(())
    }
}
