//! CSV input and output. Files start with `# key=value` metadata lines,
//! followed by a header row and data. Numbers are written in shortest
//! round-trip scientific form, so output bytes depend only on the values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianModel;
use crate::hj::{FrontReport, XGrid};

/// Metadata as ordered `(key, value)` pairs.
pub type Meta = Vec<(String, String)>;

pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// Writes metadata, a header and rows of optional numbers (`None` is an empty field).
pub fn write_table(path: &Path, meta: &[(String, String)], columns: &[&str], rows: &[Vec<Option<f64>>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns)?;
    for row in rows {
        if row.len() != columns.len() {
            return Err(Error::LengthMismatch { expected: columns.len(), got: row.len() });
        }
        w.write_record(row.iter().map(|x| fmt_opt(*x)))?;
    }
    w.flush()?;
    Ok(())
}

fn dense(rows: impl IntoIterator<Item = Vec<f64>>) -> Vec<Vec<Option<f64>>> {
    rows.into_iter().map(|r| r.into_iter().map(Some).collect()).collect()
}

/// Reads `# key=value` lines and the numeric body. Empty fields become `None`.
pub fn read_table(path: &Path) -> Result<(Meta, Vec<String>, Vec<Vec<Option<f64>>>)> {
    let mut meta = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        match line.strip_prefix('#') {
            Some(rest) => {
                if let Some((k, v)) = rest.trim().split_once('=') {
                    meta.push((k.trim().to_string(), v.trim().to_string()));
                }
            }
            None => break,
        }
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                let s = s.trim();
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>().map(Some).map_err(|_| Error::Config(format!("{}: not a number: {s}", path.display())))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((meta, header, rows))
}

/// Kernel matrix file: `N` rows of `N` comma-separated nonnegative numbers
/// (row `i` is `v_i`, column `j` is `v_j`), no header, `#` comments allowed.
/// Returned row-major.
pub fn read_kernel_csv(path: &Path) -> Result<(usize, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?;
    let mut values = Vec::new();
    let mut n_rows = 0;
    let mut width = None;
    for rec in rdr.records() {
        let rec = rec?;
        let row: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| Error::Config(format!("{}: not a number: {s}", path.display()))))
            .collect::<Result<_>>()?;
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(Error::Config(format!("{}: ragged kernel rows", path.display())));
        }
        values.extend(row);
        n_rows += 1;
    }
    if width != Some(n_rows) {
        return Err(Error::Config(format!("{}: kernel must be square, got {n_rows} rows of {:?}", path.display(), width)));
    }
    if values.iter().any(|k| !(*k >= 0.0)) {
        return Err(Error::Config(format!("{}: kernel entries must be nonnegative", path.display())));
    }
    Ok((n_rows, values))
}

/// Table with columns `p, H, dH`; `model` is evaluated at each `p`.
pub fn write_hamiltonian(path: &Path, meta: &[(String, String)], model: &HamiltonianModel, p: &[f64]) -> Result<()> {
    let mut m = meta.to_vec();
    m.push(("model".into(), model.name().into()));
    if let Some(b) = model.lipschitz_bound() {
        m.push(("lipschitz_bound".into(), fmt_num(b)));
    }
    let rows = p.iter().map(|&pi| Ok(vec![pi, model.eval(pi)?, model.deriv(pi)?])).collect::<Result<Vec<_>>>()?;
    write_table(path, &m, &["p", "H", "dH"], &dense(rows))
}

/// Reads a `p, H, dH` table back as a tabulated model; the `dH` column is not used.
pub fn read_hamiltonian(path: &Path) -> Result<HamiltonianModel> {
    let (meta, header, rows) = read_table(path)?;
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Config(format!("{}: missing column {name}", path.display())))
    };
    let (ip, ih) = (col("p")?, col("H")?);
    let mut p = Vec::with_capacity(rows.len());
    let mut h = Vec::with_capacity(rows.len());
    for r in &rows {
        match (r.get(ip).copied().flatten(), r.get(ih).copied().flatten()) {
            (Some(a), Some(b)) => {
                p.push(a);
                h.push(b);
            }
            _ => return Err(Error::Config(format!("{}: empty p or H field", path.display()))),
        }
    }
    let bound = meta.iter().find(|(k, _)| k == "lipschitz_bound").and_then(|(_, v)| v.parse().ok());
    HamiltonianModel::tabulated(p, h, bound)
}

/// Columns `t, front_x`, with the fitted and predicted speeds as metadata.
pub fn write_front_report(path: &Path, meta: &[(String, String)], report: &FrontReport) -> Result<()> {
    let mut m = meta.to_vec();
    m.push(("fitted_speed".into(), fmt_opt(report.fitted_speed)));
    m.push(("predicted_c_star".into(), fmt_opt(report.predicted_c_star)));
    let rows = report.times.iter().zip(&report.front_positions).map(|(t, x)| vec![*t, *x]);
    write_table(path, &m, &["t", "front_x"], &dense(rows))
}

/// Columns `t, x, phi`.
pub fn write_hj_snapshots(path: &Path, meta: &[(String, String)], grid: &XGrid, snapshots: &[(f64, Vec<f64>)]) -> Result<()> {
    let rows = snapshots
        .iter()
        .flat_map(|(t, phi)| phi.iter().enumerate().map(move |(i, p)| vec![*t, grid.x(i), *p]));
    write_table(path, meta, &["t", "x", "phi"], &dense(rows))
}

/// Columns `t, x, v, f, phi_eps`; `phi_eps` is empty where `f` is below the floor.
pub fn write_kinetic_snapshots(
    path: &Path,
    meta: &[(String, String)],
    grid: &XGrid,
    v: &[f64],
    m: &[f64],
    epsilon: f64,
    snapshots: &[(f64, Vec<f64>)],
) -> Result<()> {
    let nv = v.len();
    let mut rows = Vec::new();
    for (t, f) in snapshots {
        for (idx, &fij) in f.iter().enumerate() {
            let (i, j) = (idx / nv, idx % nv);
            let phi = (fij > crate::kinetic::PHASE_FLOOR).then(|| -epsilon * (fij / m[j]).ln());
            rows.push(vec![Some(*t), Some(grid.x(i)), Some(v[j]), Some(fij), phi]);
        }
    }
    write_table(path, meta, &["t", "x", "v", "f", "phi_eps"], &rows)
}

/// One row per `eps`: `eps, gap, min_rho_nullset, max_f_positive`.
pub fn write_kinetic_summary(path: &Path, meta: &[(String, String)], rows: &[(f64, f64, Option<f64>, Option<f64>)]) -> Result<()> {
    let body: Vec<Vec<Option<f64>>> = rows.iter().map(|(e, g, a, b)| vec![Some(*e), Some(*g), *a, *b]).collect();
    write_table(path, meta, &["eps", "gap", "min_rho_nullset", "max_f_positive"], &body)
}

/// Rows of `key, value` strings.
pub fn write_key_values(path: &Path, meta: &[(String, String)], rows: &[(String, String)]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["key", "value"])?;
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column profile, e.g. `v, Q`.
pub fn write_profile(path: &Path, meta: &[(String, String)], names: [&str; 2], x: &[f64], y: &[f64]) -> Result<()> {
    let rows = x.iter().zip(y).map(|(a, b)| vec![*a, *b]);
    write_table(path, meta, &names, &dense(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("kinfront-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, -1.5, 1e-300, std::f64::consts::PI, 12345.678e10] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn table_round_trip() {
        let path = tmp("table.csv");
        let meta = vec![("model".to_string(), "bgk".to_string())];
        write_table(&path, &meta, &["a", "b"], &[vec![Some(1.0), None], vec![Some(-2.5), Some(3.0)]]).unwrap();
        let (m, h, rows) = read_table(&path).unwrap();
        assert_eq!(m, meta);
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(rows, vec![vec![Some(1.0), None], vec![Some(-2.5), Some(3.0)]]);
    }

    #[test]
    fn hamiltonian_round_trip() {
        let path = tmp("h.csv");
        let m = HamiltonianModel::bgk_closed(1.0, 1.0).unwrap();
        let p: Vec<f64> = (0..=40).map(|k| -2.0 + 0.1 * k as f64).collect();
        write_hamiltonian(&path, &[], &m, &p).unwrap();
        let back = read_hamiltonian(&path).unwrap();
        assert_eq!(back.lipschitz_bound(), Some(1.0));
        assert_eq!(back.eval(0.7).unwrap(), back.eval(0.7).unwrap());
        assert!((back.eval(0.7).unwrap() - m.eval(0.7).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn kernel_files() {
        let path = tmp("k.csv");
        std::fs::write(&path, "# comment\n1, 2\n3,4\n").unwrap();
        assert_eq!(read_kernel_csv(&path).unwrap(), (2, vec![1.0, 2.0, 3.0, 4.0]));
        std::fs::write(&path, "1,2\n3,4\n5,6\n").unwrap();
        assert!(read_kernel_csv(&path).is_err());
        std::fs::write(&path, "1,-2\n3,4\n").unwrap();
        assert!(read_kernel_csv(&path).is_err());
    }
}
