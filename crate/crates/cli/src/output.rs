use std::fs;
use std::path::Path;

use crate::CliError;

/// One row of `residuals.csv`. Unknown quantities are written as empty
/// fields.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    pub n: usize,
    pub residual: f64,
    pub ratio: Option<f64>,
    pub inner_iters: Option<usize>,
    pub eta_bound: Option<f64>,
    pub dist_set_bound: Option<f64>,
}

pub fn rows(
    residuals: &[f64],
    inner: Option<&[usize]>,
    eta: &[f64],
    dist_set: &[f64],
) -> Vec<StepRow> {
    residuals
        .iter()
        .enumerate()
        .map(|(n, &r)| StepRow {
            n,
            residual: r,
            ratio: (n > 0).then(|| r / residuals[n - 1]),
            inner_iters: inner.and_then(|v| v.get(n).copied()),
            eta_bound: eta.get(n).copied(),
            dist_set_bound: dist_set.get(n).copied(),
        })
        .collect()
}

/// `x` with 5 significant digits: `17.506`, `8.8020`, `0.081500`.
pub fn significant(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.4}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..5).contains(&exp) {
        return format!("{x:.4e}");
    }
    let decimals = (4 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new digit, e.g. 9.99996 -> 10.0000
    let digits = s.chars().filter(char::is_ascii_digit).skip_while(|c| *c == '0').count();
    if digits > 5 && decimals > 0 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

pub fn residual_table(residuals: &[f64]) -> String {
    let mut out = String::from("steps  residual\n");
    for (n, r) in residuals.iter().enumerate() {
        out.push_str(&format!("{n:>5}  {}\n", significant(*r)));
    }
    out
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_outputs(dir: &Path, rows: &[StepRow]) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let residuals: Vec<f64> = rows.iter().map(|r| r.residual).collect();
    fs::write(dir.join("residuals.txt"), residual_table(&residuals))?;
    let mut w = csv::Writer::from_path(dir.join("residuals.csv"))?;
    w.write_record(["n", "residual", "ratio", "inner_iters", "eta_bound", "dist_set_bound"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.residual.to_string(),
            opt(r.ratio),
            opt(r.inner_iters),
            opt(r.eta_bound),
            opt(r.dist_set_bound),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `iterates/step_<n>.csv` with columns `x,u1,u2`, boundary nodes included.
pub fn write_profile(dir: &Path, n: usize, nodes: &[f64], u: &[f64]) -> Result<(), CliError> {
    let dir = dir.join("iterates");
    fs::create_dir_all(&dir)?;
    let m = nodes.len();
    let mut w = csv::Writer::from_path(dir.join(format!("step_{n}.csv")))?;
    w.write_record(["x", "u1", "u2"])?;
    w.write_record(["0", "0", "0"])?;
    for i in 0..m {
        w.write_record([nodes[i].to_string(), u[i].to_string(), u[m + i].to_string()])?;
    }
    w.write_record(["1", "0", "0"])?;
    w.flush()?;
    Ok(())
}

/// `iterates/step_<n>.csv` with columns `i,x` for a plain vector iterate.
pub fn write_vector(dir: &Path, n: usize, x: &[f64]) -> Result<(), CliError> {
    let dir = dir.join("iterates");
    fs::create_dir_all(&dir)?;
    let mut w = csv::Writer::from_path(dir.join(format!("step_{n}.csv")))?;
    w.write_record(["i", "x"])?;
    for (i, v) in x.iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `x,u1,u2` profile written by [`write_profile`] (or the interior
/// rows only) and checks it against the grid nodes.
pub fn read_profile(path: &Path, nodes: &[f64]) -> Result<Vec<f64>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(CliError::Config(format!("{}: expected columns x,u1,u2", path.display())));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("{}: bad number {s:?}", path.display())))
        };
        rows.push([parse(&rec[0])?, parse(&rec[1])?, parse(&rec[2])?]);
    }
    let m = nodes.len();
    let interior = if rows.len() == m + 2 {
        &rows[1..=m]
    } else if rows.len() == m {
        &rows[..]
    } else {
        return Err(CliError::Config(format!(
            "{}: {} rows do not match a grid with {} interior nodes",
            path.display(),
            rows.len(),
            m
        )));
    };
    let mut u = vec![0.0; 2 * m];
    for (i, row) in interior.iter().enumerate() {
        if (row[0] - nodes[i]).abs() > 1e-9 {
            return Err(CliError::Config(format!(
                "{}: node {} is at x = {}, expected {}",
                path.display(),
                i + 1,
                row[0],
                nodes[i]
            )));
        }
        u[i] = row[1];
        u[m + i] = row[2];
    }
    Ok(u)
}
