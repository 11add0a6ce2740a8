//! Result tables and their CSV form.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use crate::martingales::MartingaleReadout;

/// One output line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub quantity: String,
    pub replicate: Option<u64>,
    pub n: Option<u64>,
    pub z: Option<Vec<i64>>,
    pub observed: f64,
    pub predicted: Option<f64>,
    pub residual: Option<f64>,
    pub note: String,
}

impl ResultRow {
    pub fn new(quantity: impl Into<String>, observed: f64) -> Self {
        ResultRow {
            quantity: quantity.into(),
            replicate: None,
            n: None,
            z: None,
            observed,
            predicted: None,
            residual: None,
            note: String::new(),
        }
    }

    pub fn n(mut self, n: u64) -> Self {
        self.n = Some(n);
        self
    }

    pub fn z(mut self, z: &[i64]) -> Self {
        self.z = Some(z.to_vec());
        self
    }

    pub fn replicate(mut self, r: u64) -> Self {
        self.replicate = Some(r);
        self
    }

    pub fn predicted(mut self, p: f64) -> Self {
        self.predicted = Some(p);
        self
    }

    pub fn residual(mut self, r: f64) -> Self {
        self.residual = Some(r);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub observed: f64,
    /// Threshold or reference value the observation was compared with.
    pub reference: f64,
    pub passed: bool,
}

impl Assertion {
    pub fn at_most(name: impl Into<String>, observed: f64, limit: f64) -> Self {
        Assertion {
            name: name.into(),
            observed,
            reference: limit,
            passed: observed <= limit,
        }
    }

    pub fn holds(name: impl Into<String>, observed: f64, reference: f64, passed: bool) -> Self {
        Assertion {
            name: name.into(),
            observed,
            reference,
            passed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub experiment: ExperimentKind,
    pub rows: Vec<ResultRow>,
    pub assertions: Vec<Assertion>,
    /// Martingale readouts by generation (martingale-check only).
    pub trajectory: Option<Vec<MartingaleReadout>>,
}

impl Report {
    pub fn new(experiment: ExperimentKind) -> Self {
        Report {
            experiment,
            rows: Vec::new(),
            assertions: Vec::new(),
            trajectory: None,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn fmt_z(z: &[i64]) -> String {
    z.iter().map(i64::to_string).collect::<Vec<_>>().join(";")
}

pub fn write_header<W: Write>(out: &mut W, cfg: &ExperimentConfig) -> io::Result<()> {
    writeln!(out, "# tool: brwllt {}", crate::VERSION)?;
    writeln!(out, "# experiment: {}", cfg.experiment.tag())?;
    writeln!(out, "# config_hash: {}", cfg.hash())?;
    writeln!(out, "# seed: {}", cfg.base_seed)?;
    writeln!(out, "# config: {}", cfg.canonical_json())
}

pub fn write_report_csv<W: Write>(mut out: W, cfg: &ExperimentConfig, report: &Report) -> io::Result<()> {
    write_header(&mut out, cfg)?;
    let hash = cfg.hash();
    let tag = report.experiment.tag();
    writeln!(
        out,
        "experiment,quantity,replicate,n,z,observed,predicted,residual,note,config_hash,seed"
    )?;
    for r in &report.rows {
        writeln!(
            out,
            "{tag},{},{},{},{},{},{},{},{},{hash},{}",
            r.quantity,
            r.replicate.map(|v| v.to_string()).unwrap_or_default(),
            r.n.map(|v| v.to_string()).unwrap_or_default(),
            r.z.as_deref().map(fmt_z).unwrap_or_default(),
            fmt_f64(r.observed),
            fmt_opt(r.predicted),
            fmt_opt(r.residual),
            r.note,
            cfg.base_seed,
        )?;
    }
    for a in &report.assertions {
        writeln!(
            out,
            "{tag},assert:{},,,,{},{},,{},{hash},{}",
            a.name,
            fmt_f64(a.observed),
            fmt_f64(a.reference),
            if a.passed { "PASS" } else { "FAIL" },
            cfg.base_seed,
        )?;
    }
    Ok(())
}

/// Trajectory rows `generation,W,N1_*,N2_*,N3_*,N4,N2z`.
pub fn write_trajectory_csv<W: Write>(
    mut out: W,
    cfg: &ExperimentConfig,
    readouts: &[MartingaleReadout],
) -> io::Result<()> {
    write_header(&mut out, cfg)?;
    let d = cfg.step_law.d;
    let mut cols = vec!["generation".to_string(), "W".to_string()];
    for name in ["N1", "N2", "N3"] {
        cols.extend((1..=d).map(|s| format!("{name}_{s}")));
    }
    cols.push("N4".into());
    cols.push("N2z".into());
    writeln!(out, "{}", cols.join(","))?;
    for r in readouts {
        let mut vals = vec![r.generation.to_string(), fmt_f64(r.w)];
        for part in [&r.n1, &r.n2, &r.n3] {
            vals.extend(part.iter().map(|&v| fmt_f64(v)));
        }
        vals.push(fmt_f64(r.n4));
        vals.push(fmt_f64(r.n2z));
        writeln!(out, "{}", vals.join(","))?;
    }
    Ok(())
}

/// `<stem>-trajectory.csv` next to the main output.
pub fn trajectory_path(main: &Path) -> PathBuf {
    let stem = main.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    main.with_file_name(format!("{stem}-trajectory.csv"))
}

/// Writes the report (and trajectory, if any); returns the paths written.
pub fn write_outputs(cfg: &ExperimentConfig, report: &Report) -> io::Result<Vec<PathBuf>> {
    let main = cfg.output_path();
    if let Some(dir) = main.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut written = Vec::new();
    let mut buf = Vec::new();
    write_report_csv(&mut buf, cfg, report)?;
    fs::write(&main, buf)?;
    written.push(main.clone());
    if let Some(traj) = &report.trajectory {
        let path = trajectory_path(&main);
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, cfg, traj)?;
        fs::write(&path, buf)?;
        written.push(path);
    }
    Ok(written)
}
