//! Event, model and table file formats.
//!
//! Event files are CSV with header `process,timestamp`, optionally preceded by
//! `# T=<seconds>` and `# D=<processes>` comment lines. Model files are TOML
//! (default) or JSON. All numbers are written with `.` decimals and the
//! shortest representation that parses back to the same `f64`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{FitSummary, FittedModel};
use crate::eval::GridCell;
use crate::optimizer::Method;
use crate::poset::{PosetState, SampleSpace, Subset, MAX_DIMS};

pub const SCHEMA_VERSION: u32 = 1;

/// Per-process event streams read from or written to an event file.
#[derive(Clone, Debug, PartialEq)]
pub struct EventFile {
    pub duration: f64,
    /// `streams[j]` holds process `j + 1`, sorted.
    pub streams: Vec<Vec<f64>>,
}

impl EventFile {
    /// Parses an event file. `duration` and `dims` override the header values;
    /// without either source the duration is an error and the process count
    /// is the largest id seen.
    pub fn parse(text: &str, duration: Option<f64>, dims: Option<usize>) -> Result<Self> {
        let mut header_t = None;
        let mut header_d = None;
        for line in text.lines().map(str::trim).filter(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim();
            if let Some(v) = body.strip_prefix("T=") {
                header_t = Some(parse_f64(v.trim(), "T")?);
            } else if let Some(v) = body.strip_prefix("D=") {
                header_d = Some(v.trim().parse::<usize>().map_err(|_| Error::Format(format!("bad D={v}")))?);
            }
        }
        let t = duration
            .or(header_t)
            .ok_or_else(|| Error::Format("duration missing: pass it explicitly or add '# T=<seconds>'".into()))?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Format(format!("duration must be positive, got {t}")));
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "process" || &headers[1] != "timestamp" {
            return Err(Error::Format(format!("expected header 'process,timestamp', got {:?}", headers.as_slice())));
        }
        let limit = dims.or(header_d);
        let mut streams: Vec<Vec<f64>> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = line + 2;
            let pid: usize = rec[0]
                .parse()
                .map_err(|_| Error::Format(format!("row {row}: bad process id {:?}", &rec[0])))?;
            if pid == 0 || pid > limit.unwrap_or(MAX_DIMS) {
                return Err(Error::Format(format!("row {row}: process id {pid} out of range")));
            }
            let ts = parse_f64(&rec[1], "timestamp").map_err(|e| Error::Format(format!("row {row}: {e}")))?;
            if !(0.0..=t).contains(&ts) {
                return Err(Error::Format(format!("row {row}: timestamp {ts} outside [0, {t}]")));
            }
            if streams.len() < pid {
                streams.resize(pid, Vec::new());
            }
            streams[pid - 1].push(ts);
        }
        let d = limit.unwrap_or(streams.len()).max(1);
        streams.resize(d, Vec::new());
        for s in &mut streams {
            s.sort_by(f64::total_cmp);
        }
        Ok(EventFile { duration: t, streams })
    }

    pub fn read(path: &Path, duration: Option<f64>, dims: Option<usize>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, duration, dims)
    }

    pub fn dims(&self) -> usize {
        self.streams.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# T={}\n# D={}\nprocess,timestamp\n", self.duration, self.streams.len());
        for (j, s) in self.streams.iter().enumerate() {
            for t in s {
                out.push_str(&format!("{},{}\n", j + 1, t));
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Format(format!("bad {what} {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::Format(format!("{what} {s:?} is not finite")));
    }
    Ok(v)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelFormat {
    Toml,
    Json,
}

impl ModelFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "toml" => Ok(ModelFormat::Toml),
            "json" => Ok(ModelFormat::Json),
            _ => Err(Error::InvalidArgument(format!("unknown format {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub method: String,
    pub iterations: usize,
    pub final_residual: f64,
    pub final_kl: f64,
    pub converged: bool,
}

/// Serialized form of a [`FittedModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub dims: usize,
    pub bins: usize,
    pub duration: f64,
    pub order: usize,
    pub window: f64,
    pub psi: f64,
    /// Domain members without a parameter, as state keys.
    pub pruned: Vec<String>,
    pub fit: FitMetadata,
    /// Keyed by subset, e.g. `"1,3"`.
    pub bandwidths: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, usize>,
    /// Keyed by state, e.g. `"1,3:7"`.
    pub theta: BTreeMap<String, f64>,
}

impl ModelFile {
    pub fn from_model(m: &FittedModel) -> Self {
        let sp = m.space();
        let s = m.summary();
        ModelFile {
            schema_version: SCHEMA_VERSION,
            dims: sp.dims(),
            bins: sp.bins(),
            duration: sp.duration(),
            order: m.order(),
            window: m.window(),
            psi: m.params().psi(),
            pruned: m.domain().pruned().iter().map(PosetState::key).collect(),
            fit: FitMetadata {
                method: s.method.name().to_string(),
                iterations: s.iterations,
                final_residual: s.final_residual,
                final_kl: s.final_kl,
                converged: s.converged,
            },
            bandwidths: m.bandwidths().iter().map(|(k, v)| (k.key(), *v)).collect(),
            counts: m.counts().iter().map(|(k, v)| (k.key(), *v)).collect(),
            theta: m.theta_map().into_iter().map(|(k, v)| (k.key(), v)).collect(),
        }
    }

    pub fn to_model(&self) -> Result<FittedModel> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported schema version {}", self.schema_version)));
        }
        let space = SampleSpace::new(self.dims, self.bins, self.duration)?;
        let pruned = self
            .pruned
            .iter()
            .map(|k| PosetState::parse_key(k))
            .collect::<Result<Vec<_>>>()?;
        let theta = self
            .theta
            .iter()
            .map(|(k, v)| Ok((PosetState::parse_key(k)?, *v)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let bandwidths = self
            .bandwidths
            .iter()
            .map(|(k, v)| Ok((Subset::parse_key(k)?, *v)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let counts = self
            .counts
            .iter()
            .map(|(k, v)| Ok((Subset::parse_key(k)?, *v)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let summary = FitSummary {
            method: Method::parse(&self.fit.method)?,
            iterations: self.fit.iterations,
            final_residual: self.fit.final_residual,
            final_kl: self.fit.final_kl,
            converged: self.fit.converged,
        };
        let m = FittedModel::from_parts(space, self.order, self.window, bandwidths, &pruned, &theta, counts, summary)?;
        let psi = m.params().psi();
        if (psi - self.psi).abs() > 1e-9 * (1.0 + psi.abs()) {
            return Err(Error::Format(format!(
                "stored psi {} disagrees with the parameters ({psi})",
                self.psi
            )));
        }
        Ok(m)
    }

    pub fn to_string(&self, format: ModelFormat) -> Result<String> {
        Ok(match format {
            ModelFormat::Toml => toml::to_string(self)?,
            ModelFormat::Json => {
                let mut s = serde_json::to_string_pretty(self)?;
                s.push('\n');
                s
            }
        })
    }

    /// Accepts either format; JSON is recognized by a leading `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Ok(serde_json::from_str(text)?)
        } else {
            Ok(toml::from_str(text)?)
        }
    }

    pub fn save(&self, path: &Path, format: ModelFormat) -> Result<()> {
        write_text(path, &self.to_string(format)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

pub fn save_model(m: &FittedModel, path: &Path, format: ModelFormat) -> Result<()> {
    ModelFile::from_model(m).save(path, format)
}

pub fn load_model(path: &Path) -> Result<FittedModel> {
    ModelFile::load(path)?.to_model()
}

/// `bin,intensity` rows, bins numbered from 1.
pub fn write_truth(path: &Path, values: &[f64]) -> Result<()> {
    let mut out = String::from("bin,intensity\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, v));
    }
    write_text(path, &out)
}

/// `bin,t_start,t_end,intensity` rows for an intensity over `[0, T]`.
pub fn write_intensity(path: &Path, values: &[f64], duration: f64) -> Result<()> {
    let width = duration / values.len() as f64;
    let mut out = String::from("bin,t_start,t_end,intensity\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{},{},{},{}\n", i + 1, i as f64 * width, (i + 1) as f64 * width, v));
    }
    write_text(path, &out)
}

/// Reads the `intensity` column of a per-bin CSV, checking bins run `1..=M`.
pub fn read_intensity_column(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let bin_col = headers.iter().position(|h| h == "bin");
    let col = headers
        .iter()
        .position(|h| h == "intensity")
        .ok_or_else(|| Error::Format(format!("{}: no 'intensity' column", path.display())))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if let Some(b) = bin_col {
            let bin: usize = rec[b].parse().map_err(|_| Error::Format(format!("bad bin {:?}", &rec[b])))?;
            if bin != out.len() + 1 {
                return Err(Error::Format(format!("{}: bins must run 1..=M in order", path.display())));
            }
        }
        out.push(parse_f64(&rec[col], "intensity")?);
    }
    Ok(out)
}

/// `h,M,score` rows in grid order.
pub fn write_grid_table(path: &Path, table: &[GridCell]) -> Result<()> {
    let mut out = String::from("h,M,score\n");
    for c in table {
        out.push_str(&format!("{},{},{}\n", c.h, c.bins, c.score));
    }
    write_text(path, &out)
}

pub fn read_grid_table(path: &Path) -> Result<Vec<GridCell>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let h: f64 = rec[0].parse().map_err(|_| Error::Format(format!("bad h {:?}", &rec[0])))?;
        let bins: usize = rec[1].parse().map_err(|_| Error::Format(format!("bad M {:?}", &rec[1])))?;
        let score: f64 = rec[2].parse().map_err(|_| Error::Format(format!("bad score {:?}", &rec[2])))?;
        out.push(GridCell { h, bins, score });
    }
    Ok(out)
}
