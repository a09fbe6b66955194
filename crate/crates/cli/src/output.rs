use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("cannot write {}: {e}", path.display()))
}

/// Writes equal-length columns under a header row.
pub fn write_columns(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<(), CliError> {
    let rows = columns.first().map_or(0, |c| c.len());
    debug_assert!(columns.iter().all(|c| c.len() == rows));
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for i in 0..rows {
        w.write_record(columns.iter().map(|c| fmt17(c[i])))
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Reads `t, value` rows; a leading non-numeric row is taken as a header.
pub fn read_samples(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let (mut t, mut v) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() < 2 {
            return Err(bad(format!("row {} needs two columns", i + 1)));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(a), Ok(b)) => {
                t.push(a);
                v.push(b);
            }
            _ if i == 0 => {}
            _ => return Err(bad(format!("row {} is not numeric", i + 1))),
        }
    }
    Ok((t, v))
}

/// Gnuplot script for the six-panel trajectory figure.
pub fn plot_script(t_f: f64) -> String {
    // (xlabel, ylabel, file, plot clause); the path panel alone is not against time
    let panels = [
        ("x [m]", "z [m]", "trajectory.csv", "using 2:3 with lines title 'path'"),
        (
            "t [s]",
            "z [m]",
            "trajectory.csv",
            "using 1:3 with lines title 'altitude'",
        ),
        (
            "t [s]",
            "gamma [rad]",
            "trajectory.csv",
            "using 1:4 with lines title 'flight path angle'",
        ),
        (
            "t [s]",
            "V [m/s]",
            "trajectory.csv",
            "using 1:5 with lines title 'speed'",
        ),
        (
            "t [s]",
            "alpha [rad]",
            "trajectory.csv",
            "using 1:6 with lines title 'angle of attack'",
        ),
        (
            "t [s]",
            "T [N]",
            "thrust_corrected.csv",
            "using 1:2 with lines title 'predicted', '' every ::1 using 1:3 with steps lw 2 title 'corrected'",
        ),
    ];
    let mut s = String::from(
        "# run with: gnuplot trajectory.gp\nset datafile separator ','\nset terminal pngcairo size 1400,1200\n\
         set output 'trajectory.png'\nset key top right\nset grid\nset multiplot layout 3,2\n",
    );
    for (i, (xl, yl, file, clause)) in panels.into_iter().enumerate() {
        s.push_str(&format!("set xlabel '{xl}'\nset ylabel '{yl}'\n"));
        if i == 0 {
            s.push_str("set autoscale x\n");
        } else {
            s.push_str(&format!("set xrange [0:{t_f}]\n"));
        }
        s.push_str(&format!("plot '{file}' every ::1 {clause}\n"));
    }
    s.push_str("unset multiplot\n");
    s
}
