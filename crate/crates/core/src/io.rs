//! Plot-ready data files: CSV tables, JSON reports, and atomic writes.
//!
//! Every CSV starts with `#` comment lines (description, units) followed by
//! a header row, so files are self-describing and safe to concatenate into
//! any plotting tool. Readers skip comments and validate the header, and
//! floats are printed with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces values bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Serialize};

use crate::error::{Error, Result};
use crate::observables::SampleSet;
use crate::scaling::{RatioPoint, RawPoint, ScanResult};

/// Writes via a temporary file in the same directory plus a rename, so a
/// crash never leaves a half-written artifact behind.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let stem = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{stem}.tmp.{}", std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    atomic_write(path, &(text + "\n"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
}

/// Identifies one ensemble for exact replay.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrajectoryManifest {
    pub master_seed: u64,
    pub p: f64,
    pub trajectories: u64,
    pub circuit_hash: String,
}

// ---- generic CSV plumbing -----------------------------------------------------

fn csv_header(text: &str, want: &str) -> Result<usize> {
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line != want {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected header `{want}`, found `{line}`"),
            });
        }
        return Ok(i + 1);
    }
    Err(Error::Parse { line: 0, msg: format!("missing header `{want}`") })
}

fn data_rows(text: &str, header_line: usize) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(header_line)
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn fields<const N: usize>(line_no: usize, line: &str) -> Result<[&str; N]> {
    let parts: Vec<&str> = line.split(',').map(str::trim).collect();
    parts.try_into().map_err(|v: Vec<&str>| Error::Parse {
        line: line_no,
        msg: format!("expected {N} comma-separated fields, found {}", v.len()),
    })
}

fn parse_f64(line: usize, s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse { line, msg: format!("bad number `{s}`") })
}

fn parse_u64(line: usize, s: &str) -> Result<u64> {
    s.parse().map_err(|_| Error::Parse { line, msg: format!("bad integer `{s}`") })
}

fn comment_block(comment: &str, out: &mut String) {
    for line in comment.lines() {
        let _ = writeln!(out, "# {line}");
    }
}

// ---- observable tables ----------------------------------------------------------

pub const OBSERVABLE_HEADER: &str = "T,t,x,value,stderr";

pub fn raw_points_to_csv(points: &[RawPoint], comment: &str) -> String {
    let mut out = String::new();
    comment_block(comment, &mut out);
    out.push_str("# units: T and t in units of 1/J; x in lattice sites; value, stderr dimensionless\n");
    out.push_str(OBSERVABLE_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(out, "{},{},{},{},{}", p.drive_time, p.time, p.x, p.value, p.std_error);
    }
    out
}

pub fn raw_points_from_csv(text: &str) -> Result<Vec<RawPoint>> {
    let start = csv_header(text, OBSERVABLE_HEADER)?;
    let mut out = Vec::new();
    for (no, line) in data_rows(text, start) {
        let [t_drive, t, x, value, stderr] = fields::<5>(no, line)?;
        out.push(RawPoint {
            drive_time: parse_f64(no, t_drive)?,
            time: parse_f64(no, t)?,
            x: parse_f64(no, x)?,
            value: parse_f64(no, value)?,
            std_error: parse_f64(no, stderr)?,
        });
    }
    Ok(out)
}

pub fn write_raw_points(path: &Path, points: &[RawPoint], comment: &str) -> Result<()> {
    atomic_write(path, &raw_points_to_csv(points, comment))
}

pub fn read_raw_points(path: &Path) -> Result<Vec<RawPoint>> {
    raw_points_from_csv(&fs::read_to_string(path)?)
}

// ---- measurement samples ---------------------------------------------------------

pub const SAMPLES_HEADER: &str = "bitstring,count";

/// Bit order in the string: leftmost character is qubit 0.
fn bitstring(z: u64, num_qubits: usize) -> String {
    (0..num_qubits).map(|q| if (z >> q) & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn samples_to_csv(samples: &SampleSet, comment: &str) -> String {
    let mut out = String::new();
    comment_block(comment, &mut out);
    let _ = writeln!(out, "# qubit 0 is the leftmost bit; shots={}", samples.shots());
    out.push_str(SAMPLES_HEADER);
    out.push('\n');
    for (&z, &c) in samples.counts() {
        let _ = writeln!(out, "{},{c}", bitstring(z, samples.num_qubits()));
    }
    out
}

pub fn samples_from_csv(text: &str) -> Result<SampleSet> {
    let start = csv_header(text, SAMPLES_HEADER)?;
    let mut counts = std::collections::BTreeMap::new();
    let mut width: Option<usize> = None;
    for (no, line) in data_rows(text, start) {
        let [bits, count] = fields::<2>(no, line)?;
        match width {
            None => width = Some(bits.len()),
            Some(w) if w == bits.len() => {}
            Some(w) => {
                return Err(Error::Parse {
                    line: no,
                    msg: format!("bitstring width {} != {w}", bits.len()),
                })
            }
        }
        let mut z = 0u64;
        for (q, ch) in bits.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => z |= 1 << q,
                _ => {
                    return Err(Error::Parse { line: no, msg: format!("bad bit `{ch}`") });
                }
            }
        }
        *counts.entry(z).or_insert(0) += parse_u64(no, count)?;
    }
    let width = width.ok_or(Error::Parse { line: 0, msg: "no sample rows".into() })?;
    Ok(SampleSet::from_counts(width, counts))
}

pub fn write_samples(path: &Path, samples: &SampleSet, comment: &str) -> Result<()> {
    atomic_write(path, &samples_to_csv(samples, comment))
}

pub fn read_samples(path: &Path) -> Result<SampleSet> {
    samples_from_csv(&fs::read_to_string(path)?)
}

// ---- exponent-scan surfaces --------------------------------------------------------

pub const SURFACE_HEADER: &str = "nu,eta,chi2_per_dof";

/// Failed cells are written as `nan` so the grid stays rectangular.
pub fn surface_to_csv(scan: &ScanResult, comment: &str) -> String {
    let mut out = String::new();
    comment_block(comment, &mut out);
    let _ = writeln!(
        out,
        "# best: nu={} eta={} chi2_per_dof={}; region threshold {}x",
        scan.best_nu, scan.best_eta, scan.best_chi2_per_dof, scan.region_factor
    );
    out.push_str("# units: all columns dimensionless\n");
    out.push_str(SURFACE_HEADER);
    out.push('\n');
    for (i, &nu) in scan.nu_values.iter().enumerate() {
        for (j, &eta) in scan.eta_values.iter().enumerate() {
            let c = scan.cell(i, j).map_or("nan".to_string(), |v| v.to_string());
            let _ = writeln!(out, "{nu},{eta},{c}");
        }
    }
    out
}

pub fn write_surface(path: &Path, scan: &ScanResult, comment: &str) -> Result<()> {
    atomic_write(path, &surface_to_csv(scan, comment))
}

// ---- decay-ratio tables -------------------------------------------------------------

pub const RATIO_HEADER: &str = "x,ratio,stderr";

pub fn ratio_points_to_csv(points: &[RatioPoint], comment: &str) -> String {
    let mut out = String::new();
    comment_block(comment, &mut out);
    out.push_str("# units: x in lattice sites; ratio, stderr dimensionless\n");
    out.push_str(RATIO_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.x, p.ratio, p.std_error);
    }
    out
}

pub fn ratio_points_from_csv(text: &str) -> Result<Vec<RatioPoint>> {
    let start = csv_header(text, RATIO_HEADER)?;
    let mut out = Vec::new();
    for (no, line) in data_rows(text, start) {
        let [x, ratio, stderr] = fields::<3>(no, line)?;
        out.push(RatioPoint {
            x: parse_f64(no, x)?,
            ratio: parse_f64(no, ratio)?,
            std_error: parse_f64(no, stderr)?,
        });
    }
    Ok(out)
}

pub fn write_ratio_points(path: &Path, points: &[RatioPoint], comment: &str) -> Result<()> {
    atomic_write(path, &ratio_points_to_csv(points, comment))
}

pub fn read_ratio_points(path: &Path) -> Result<Vec<RatioPoint>> {
    ratio_points_from_csv(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::Gate;
    use crate::scaling::{exponent_scan, linspace, DecayMode, ScanConfig};
    use crate::state::StateVector;

    #[test]
    fn raw_points_round_trip_bit_exactly() {
        let points = vec![
            RawPoint {
                drive_time: 1.5, time: 0.0, x: 3.0, value: 0.123456789012345678,
                std_error: 1.0 / 3.0,
            },
            RawPoint {
                drive_time: 0.5, time: -0.25, x: 1.0, value: -7.25e-11, std_error: 0.0,
            },
        ];
        let text = raw_points_to_csv(&points, "demo table\nsecond comment line");
        let back = raw_points_from_csv(&text).unwrap();
        assert_eq!(points, back);
        assert!(text.starts_with("# demo table\n# second comment line\n"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "# c\nT,t,x,value,stderr\n1.0,0.0,oops,0.5,0.1\n";
        match raw_points_from_csv(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let wrong_header = "a,b\n1,2\n";
        assert!(matches!(raw_points_from_csv(wrong_header), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn samples_round_trip_with_qubit0_leftmost() {
        let mut s = StateVector::zero_state(3).unwrap();
        s.apply(&Gate::Hadamard(0)).unwrap();
        s.apply(&Gate::Cnot(0, 2)).unwrap();
        let samples = s.sample(1000, 5);
        let text = samples_to_csv(&samples, "bell-ish");
        // Outcome with qubits 0 and 2 set reads 101, not 011.
        assert!(text.contains("101,"), "{text}");
        let back = samples_from_csv(&text).unwrap();
        assert_eq!(samples, back);
    }

    #[test]
    fn surface_csv_is_rectangular_and_labeled() {
        let raw: Vec<RawPoint> = [1.0, 2.0, 4.0]
            .iter()
            .flat_map(|&t| {
                (1..=6).map(move |x| RawPoint {
                    drive_time: t,
                    time: 0.0,
                    x: x as f64,
                    value: (x as f64 * t.sqrt().recip()).exp().recip(),
                    std_error: 0.0,
                })
            })
            .collect();
        let config = ScanConfig {
            nu_values: linspace(0.8, 1.2, 3),
            eta_values: linspace(0.1, 0.4, 4),
            z: 1.0,
            order: 2,
            mode: DecayMode::Free,
            region_factor: 1.2,
        };
        let scan = exponent_scan(&raw, &config).unwrap();
        let text = surface_to_csv(&scan, "scan");
        let rows: Vec<&str> =
            text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).collect();
        assert_eq!(rows[0], SURFACE_HEADER);
        assert_eq!(rows.len() - 1, 12);
    }

    #[test]
    fn ratio_points_round_trip() {
        let pts = vec![
            RatioPoint { x: 1.0, ratio: 0.9, std_error: 0.01 },
            RatioPoint { x: 2.0, ratio: 0.8123456789, std_error: 0.02 },
        ];
        let text = ratio_points_to_csv(&pts, "p=0.001");
        assert_eq!(ratio_points_from_csv(&text).unwrap(), pts);
    }

    #[test]
    fn atomic_write_and_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("manifest.json");
        let m = TrajectoryManifest {
            master_seed: 42,
            p: 1e-3,
            trajectories: 100,
            circuit_hash: "abc123".into(),
        };
        write_json(&path, &m).unwrap();
        let back: TrajectoryManifest = read_json(&path).unwrap();
        assert_eq!(m, back);
        // No stray temp files left behind.
        let leftovers: Vec<_> = fs::read_dir(path.parent().unwrap())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().contains("tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
