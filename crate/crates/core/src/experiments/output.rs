use super::study::{ErrorTable, ErrorTableRow, StudyKind};
use crate::error::{EsfemError, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const CSV_HEADER: &str = "level,dof,h,tau,err_linf_l2,eoc_linf_l2,err_l2_h1,eoc_l2_h1";

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn optional(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

pub fn to_csv(table: &ErrorTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.level,
            r.dof,
            real(r.h),
            real(r.tau),
            real(r.err_linf_l2),
            optional(r.eoc_linf_l2),
            real(r.err_l2_h1),
            optional(r.eoc_l2_h1),
        );
    }
    out
}

pub fn write_csv(table: &ErrorTable, path: &Path) -> Result<()> {
    fs::write(path, to_csv(table))?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<ErrorTableRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(EsfemError::InvalidArgument("missing CSV header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| {
                EsfemError::InvalidArgument(format!("CSV row {}: {what}", i + 1))
            };
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 8 {
                return Err(bad("expected 8 cells"));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad(s));
            let real = |s: &str| s.parse::<f64>().map_err(|_| bad(s));
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    real(s).map(Some)
                }
            };
            Ok(ErrorTableRow {
                level: int(cells[0])?,
                dof: int(cells[1])?,
                h: real(cells[2])?,
                tau: real(cells[3])?,
                err_linf_l2: real(cells[4])?,
                eoc_linf_l2: opt(cells[5])?,
                err_l2_h1: real(cells[6])?,
                eoc_l2_h1: opt(cells[7])?,
            })
        })
        .collect()
}

/// Gnuplot script with the data inlined: log-log errors against τ (against h
/// for stationary and spatial studies) and a reference line of the expected
/// order through the last point.
pub fn plot_script(table: &ErrorTable) -> String {
    let (xlabel, column, legend) = match table.kind {
        StudyKind::Temporal => ("tau", 4, ["L^inf(L^2)", "L^2(H^1)"]),
        StudyKind::Spatial => ("h", 3, ["L^inf(L^2)", "L^2(H^1)"]),
        StudyKind::Elliptic => ("h", 3, ["L^2", "H^1"]),
    };
    let mut s = String::new();
    s.push_str("set terminal pngcairo size 800,600\n");
    s.push_str("set output 'errors.png'\n");
    s.push_str("set logscale xy\n");
    s.push_str("set key left top\n");
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    s.push_str("set ylabel 'error'\n");
    s.push_str("set datafile separator ','\n");
    s.push_str("$data << EOD\n");
    for line in to_csv(table).lines().skip(1) {
        s.push_str(line);
        s.push('\n');
    }
    s.push_str("EOD\n");
    let p = table.expected_order;
    match table.rows.last() {
        Some(last) => {
            let x0 = if column == 4 { last.tau } else { last.h };
            let _ = writeln!(s, "p = {p}");
            let _ = writeln!(s, "x0 = {}", real(x0));
            let _ = writeln!(s, "y0 = {}", real(last.err_linf_l2));
            s.push_str("ref(x) = y0 * (x / x0)**p\n");
            let _ = writeln!(
                s,
                "plot $data using {column}:5 with linespoints title '{}', \\\n     \
                 $data using {column}:7 with linespoints title '{}', \\\n     \
                 ref(x) with lines dashtype 2 title sprintf('order %g', p)",
                legend[0], legend[1]
            );
        }
        None => s.push_str("# no rows to plot\n"),
    }
    s
}

pub fn emit_plot_script(table: &ErrorTable, path: &Path) -> Result<()> {
    fs::write(path, plot_script(table))?;
    Ok(())
}

/// JSON report of a study: the configuration as given, the table and the
/// wall-clock time spent per row.
#[derive(Debug, Serialize)]
pub struct StudyReport<'a, C: Serialize> {
    pub config: &'a C,
    pub table: &'a ErrorTable,
}

pub fn write_report<C: Serialize>(config: &C, table: &ErrorTable, path: &Path) -> Result<()> {
    let report = StudyReport { config, table };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| EsfemError::Io(format!("cannot serialise report: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paper_shaped() -> ErrorTable {
        let errors = [
            (0.07121892, 0.24),
            (0.02077452, 0.07),
            (0.00540906, 0.02),
            (0.00136755, 0.006),
            (0.00034200, 0.002),
        ];
        let mut table = ErrorTable::new(StudyKind::Spatial, 2.0, 2.0);
        for (k, (a, b)) in errors.into_iter().enumerate() {
            table.rows.push(ErrorTableRow {
                level: k + 1,
                dof: 10 * 4usize.pow(k as u32 + 1) + 2,
                h: 0.5f64.powi(k as i32),
                tau: 0.1 * 0.25f64.powi(k as i32),
                err_linf_l2: a,
                eoc_linf_l2: None,
                err_l2_h1: b,
                eoc_l2_h1: None,
            });
        }
        table.compute_eocs();
        table
    }

    #[test]
    fn empty_table_is_header_only() {
        let table = ErrorTable::new(StudyKind::Spatial, 2.0, 2.0);
        assert_eq!(to_csv(&table), format!("{CSV_HEADER}\n"));
        assert!(parse_csv(&to_csv(&table)).unwrap().is_empty());
        assert!(plot_script(&table).contains("no rows"));
    }

    #[test]
    fn layout() {
        let table = paper_shaped();
        let csv = to_csv(&table);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1].split(',').nth(5), Some(""));
        assert_eq!(lines[1].split(',').nth(7), Some(""));
        assert!(lines[2].split(',').all(|c| !c.is_empty()));
        let eoc: f64 = lines[2].split(',').nth(5).unwrap().parse().unwrap();
        assert_eq!(format!("{eoc:.2}"), "1.78");
    }

    #[test]
    fn round_trip() {
        let table = paper_shaped();
        assert_eq!(parse_csv(&to_csv(&table)).unwrap(), table.rows);
    }

    #[test]
    fn parse_errors() {
        assert!(parse_csv("nonsense\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\n1,2,3\n")).is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\n1,x,0,0,0,,0,\n")).is_err());
    }

    #[test]
    fn plot_script_inlines_data() {
        let table = paper_shaped();
        let script = plot_script(&table);
        assert!(script.contains("set logscale xy"));
        assert_eq!(script.matches("\n1,").count() + script.matches("\n2,").count(), 2);
        assert!(script.contains("ref(x) = y0 * (x / x0)**p"));
        assert!(script.contains("p = 2"));
    }

    #[test]
    fn report_is_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        write_report(&serde_json::json!({"tau0": 0.1}), &paper_shaped(), &path).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(v["config"]["tau0"], 0.1);
        assert_eq!(v["table"]["rows"].as_array().unwrap().len(), 5);
    }

    proptest! {
        #[test]
        fn reals_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::POSITIVE) {
            let parsed: f64 = real(x).parse().unwrap();
            prop_assert_eq!(parsed, x);
        }
    }
}
