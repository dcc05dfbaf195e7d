//! CSV serialization of the pipeline's tables.
//!
//! All files are UTF-8, comma-separated, LF-terminated. The count table
//! is written with states as rows and visit times as columns (the
//! orientation of the published table); the parser also accepts the
//! transposed orientation with one visit per row, auto-detected from the
//! header.

use std::path::Path;

use crate::bootstrap::BootstrapRun;
use crate::error::{Error, Result};
use crate::estimate::ObjectiveKind;
use crate::sampling::AcsTable;

const STATE_LABELS: [&str; 3] = ["Non-diseased", "Diseased", "Dead"];

/// Formats a visit time: integral times print without a fraction so the
/// header reads `0,10,...` like the published table.
pub fn fmt_time(t: f64) -> String {
    if t.fract() == 0.0 && t.abs() < 1e15 {
        format!("{}", t as i64)
    } else {
        format!("{t}")
    }
}

/// Writes the count table with states as rows plus a `Sum` row.
pub fn write_acs_table(path: &Path, table: &AcsTable) -> Result<()> {
    let mut out = String::from("state");
    for &t in table.visit_times() {
        out.push(',');
        out.push_str(&fmt_time(t));
    }
    out.push('\n');
    for (j, label) in STATE_LABELS.iter().enumerate() {
        out.push_str(label);
        for k in 0..table.n_visits() {
            out.push_str(&format!(",{}", table.counts(k)[j]));
        }
        out.push('\n');
    }
    out.push_str("Sum");
    for k in 0..table.n_visits() {
        out.push_str(&format!(",{}", table.total(k)));
    }
    out.push('\n');
    std::fs::write(path, out)?;
    Ok(())
}

fn parse_count(cell: &str, line: usize) -> Result<u64> {
    cell.trim().parse::<u64>().map_err(|_| Error::CsvFormat {
        line,
        message: format!("`{}` is not a nonnegative integer count", cell.trim()),
    })
}

fn parse_time(cell: &str, line: usize) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|_| Error::CsvFormat {
        line,
        message: format!("`{}` is not a time", cell.trim()),
    })
}

fn split_csv_line(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

/// Reads a count table in either orientation. The `Sum` row/column, when
/// present, is validated against the state counts; a mismatch is
/// reported with the offending visit time and line.
pub fn read_acs_table(path: &Path) -> Result<AcsTable> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (header_line, header) =
        lines.next().ok_or(Error::CsvFormat { line: 1, message: "empty file".into() })?;
    let header_cells = split_csv_line(header);
    let first = header_cells
        .first()
        .map(|c| c.to_ascii_lowercase())
        .unwrap_or_default();

    if first == "state" {
        read_states_as_rows(header_line, &header_cells, lines)
    } else if first == "time" || first == "t" {
        read_visits_as_rows(header_line, &header_cells, lines)
    } else {
        Err(Error::CsvFormat {
            line: header_line,
            message: format!(
                "unrecognized header `{first}`: expected `state,...` or `time,...`"
            ),
        })
    }
}

fn normalize_label(label: &str) -> String {
    label.to_ascii_lowercase().replace(['-', '_', ' '], "")
}

fn read_states_as_rows<'a>(
    header_line: usize,
    header_cells: &[&str],
    lines: impl Iterator<Item = (usize, &'a str)>,
) -> Result<AcsTable> {
    let visit_times: Vec<f64> = header_cells[1..]
        .iter()
        .map(|c| parse_time(c, header_line))
        .collect::<Result<_>>()?;
    let k = visit_times.len();
    if k == 0 {
        return Err(Error::CsvFormat { line: header_line, message: "no visit columns".into() });
    }

    let mut state_rows: [Option<Vec<u64>>; 3] = [None, None, None];
    let mut sum_row: Option<(usize, Vec<u64>)> = None;
    for (line_no, line) in lines {
        let cells = split_csv_line(line);
        if cells.len() != k + 1 {
            return Err(Error::CsvFormat {
                line: line_no,
                message: format!("expected {} cells, found {}", k + 1, cells.len()),
            });
        }
        let counts: Vec<u64> =
            cells[1..].iter().map(|c| parse_count(c, line_no)).collect::<Result<_>>()?;
        let label = normalize_label(cells[0]);
        match label.as_str() {
            "nondiseased" => state_rows[0] = Some(counts),
            "diseased" => state_rows[1] = Some(counts),
            "dead" => state_rows[2] = Some(counts),
            "sum" | "total" | "σ" => sum_row = Some((line_no, counts)),
            other => {
                return Err(Error::CsvFormat {
                    line: line_no,
                    message: format!("unknown state row `{other}`"),
                })
            }
        }
    }

    let [Some(nd), Some(dis), Some(dead)] = state_rows else {
        return Err(Error::CsvFormat {
            line: header_line,
            message: "missing one of the Non-diseased / Diseased / Dead rows".into(),
        });
    };
    let counts: Vec<[u64; 3]> = (0..k).map(|i| [nd[i], dis[i], dead[i]]).collect();
    if let Some((line_no, sums)) = sum_row {
        for (i, row) in counts.iter().enumerate() {
            let actual: u64 = row.iter().sum();
            if sums[i] != actual {
                return Err(Error::CsvFormat {
                    line: line_no,
                    message: format!(
                        "Sum at t = {} is {} but the state rows add to {}",
                        fmt_time(visit_times[i]),
                        sums[i],
                        actual
                    ),
                });
            }
        }
    }
    AcsTable::new(visit_times, counts)
        .map_err(|e| Error::CsvFormat { line: header_line, message: e.to_string() })
}

fn read_visits_as_rows<'a>(
    header_line: usize,
    header_cells: &[&str],
    lines: impl Iterator<Item = (usize, &'a str)>,
) -> Result<AcsTable> {
    // locate the state columns by name
    let mut col_of = [usize::MAX; 3];
    let mut sum_col = None;
    for (idx, cell) in header_cells.iter().enumerate().skip(1) {
        match normalize_label(cell).as_str() {
            "nondiseased" => col_of[0] = idx,
            "diseased" => col_of[1] = idx,
            "dead" => col_of[2] = idx,
            "sum" | "total" => sum_col = Some(idx),
            other => {
                return Err(Error::CsvFormat {
                    line: header_line,
                    message: format!("unknown column `{other}`"),
                })
            }
        }
    }
    if col_of.contains(&usize::MAX) {
        return Err(Error::CsvFormat {
            line: header_line,
            message: "need non_diseased, diseased and dead columns".into(),
        });
    }

    let mut visit_times = Vec::new();
    let mut counts = Vec::new();
    for (line_no, line) in lines {
        let cells = split_csv_line(line);
        if cells.len() != header_cells.len() {
            return Err(Error::CsvFormat {
                line: line_no,
                message: format!(
                    "expected {} cells, found {}",
                    header_cells.len(),
                    cells.len()
                ),
            });
        }
        let t = parse_time(cells[0], line_no)?;
        let row = [
            parse_count(cells[col_of[0]], line_no)?,
            parse_count(cells[col_of[1]], line_no)?,
            parse_count(cells[col_of[2]], line_no)?,
        ];
        if let Some(sc) = sum_col {
            let declared = parse_count(cells[sc], line_no)?;
            let actual: u64 = row.iter().sum();
            if declared != actual {
                return Err(Error::CsvFormat {
                    line: line_no,
                    message: format!(
                        "Sum at t = {} is {declared} but the state counts add to {actual}",
                        fmt_time(t)
                    ),
                });
            }
        }
        visit_times.push(t);
        counts.push(row);
    }
    AcsTable::new(visit_times, counts)
        .map_err(|e| Error::CsvFormat { line: header_line, message: e.to_string() })
}

/// Writes the visits-attended histogram (visit counts as columns).
pub fn write_visit_histogram(path: &Path, histogram: &[u64]) -> Result<()> {
    let mut header = String::from("visits");
    let mut row = String::from("subjects");
    for (v, count) in histogram.iter().enumerate() {
        header.push_str(&format!(",{v}"));
        row.push_str(&format!(",{count}"));
    }
    std::fs::write(path, format!("{header}\n{row}\n"))?;
    Ok(())
}

/// One row per requested estimator with the fitted parameter in natural
/// units.
pub fn write_estimates(
    path: &Path,
    results: &[crate::estimate::EstimationResult],
) -> Result<()> {
    let mut out = String::from("kind,theta1,theta2,theta3,objective,converged,n_evaluations\n");
    for r in results {
        let t = r.theta_hat;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.objective_kind.label(),
            t.onset_age,
            t.incidence_slope,
            t.mortality_rate_ratio,
            r.objective_value,
            r.converged,
            r.n_evaluations
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Model curves at the fitted parameters: `kind,t,p1,p2,p3` rows.
pub fn write_model_curves(
    path: &Path,
    curves: &[(ObjectiveKind, Vec<(f64, [f64; 3])>)],
) -> Result<()> {
    let mut out = String::from("kind,t,p1,p2,p3\n");
    for (kind, rows) in curves {
        for (t, p) in rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                kind.label(),
                fmt_time(*t),
                p[0],
                p[1],
                p[2]
            ));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Observed per-visit fractions with their totals: the dots behind the
/// fitted curves.
pub fn write_observed_points(path: &Path, table: &AcsTable) -> Result<()> {
    let fractions = crate::sampling::observed_fractions(table)?;
    let mut out = String::from("t,p1,p2,p3,total\n");
    for (k, f) in fractions.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_time(table.visit_times()[k]),
            f.non_diseased,
            f.diseased,
            f.dead,
            table.total(k)
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Replicate-level bootstrap estimates, one row per (replicate, kind),
/// thetas in natural units.
pub fn write_replicates(path: &Path, runs: &[BootstrapRun]) -> Result<()> {
    let mut out = String::from("b,kind,theta1,theta2,theta3,converged\n");
    for run in runs {
        for kind in [ObjectiveKind::LeastSquares, ObjectiveKind::MaxLikelihood] {
            let t = run.theta(kind);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                run.b_index,
                kind.label(),
                t.onset_age,
                t.incidence_slope,
                t.mortality_rate_ratio,
                run.converged(kind)
            ));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// A parsed replicate file: estimates per kind, converged rows only.
#[derive(Debug, Default)]
pub struct ReplicateColumns {
    pub ls: Vec<[f64; 3]>,
    pub ml: Vec<[f64; 3]>,
}

pub fn read_replicates(path: &Path) -> Result<ReplicateColumns> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) =
        lines.next().ok_or(Error::CsvFormat { line: 1, message: "empty file".into() })?;
    if split_csv_line(header) != vec!["b", "kind", "theta1", "theta2", "theta3", "converged"] {
        return Err(Error::CsvFormat {
            line: 1,
            message: "expected header b,kind,theta1,theta2,theta3,converged".into(),
        });
    }
    let mut cols = ReplicateColumns::default();
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells = split_csv_line(line);
        if cells.len() != 6 {
            return Err(Error::CsvFormat {
                line: line_no,
                message: format!("expected 6 cells, found {}", cells.len()),
            });
        }
        let converged = match cells[5] {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::CsvFormat {
                    line: line_no,
                    message: format!("`{other}` is not a boolean"),
                })
            }
        };
        if !converged {
            continue;
        }
        let mut theta = [0.0; 3];
        for (slot, cell) in theta.iter_mut().zip(&cells[2..5]) {
            *slot = cell.parse::<f64>().map_err(|_| Error::CsvFormat {
                line: line_no,
                message: format!("`{cell}` is not a number"),
            })?;
        }
        match cells[1] {
            "ls" => cols.ls.push(theta),
            "ml" => cols.ml.push(theta),
            other => {
                return Err(Error::CsvFormat {
                    line: line_no,
                    message: format!("kind must be ls or ml, got `{other}`"),
                })
            }
        }
    }
    Ok(cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_table() -> AcsTable {
        AcsTable::new(vec![0.0, 50.0, 80.0], vec![[325, 0, 0], [262, 15, 8], [68, 41, 184]])
            .unwrap()
    }

    #[test]
    fn table_roundtrip_states_as_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("acs.csv");
        let table = sample_table();
        write_acs_table(&path, &table).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("state,0,50,80\nNon-diseased,325,262,68\n"));
        assert!(text.ends_with("Sum,325,285,293\n"));
        let back = read_acs_table(&path).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn parses_transposed_orientation() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("acs_t.csv");
        std::fs::write(
            &path,
            "time,non_diseased,diseased,dead\n0,325,0,0\n50,262,15,8\n80,68,41,184\n",
        )
        .unwrap();
        assert_eq!(read_acs_table(&path).unwrap(), sample_table());
    }

    #[test]
    fn sum_mismatch_names_the_column() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "state,0,50\nNon-diseased,325,262\nDiseased,0,15\nDead,0,8\nSum,325,391\n",
        )
        .unwrap();
        match read_acs_table(&path) {
            Err(Error::CsvFormat { line, message }) => {
                assert_eq!(line, 5);
                assert!(message.contains("t = 50"), "{message}");
                assert!(message.contains("391") && message.contains("285"), "{message}");
            }
            other => panic!("expected CsvFormat, got {other:?}"),
        }
    }

    #[test]
    fn negative_and_missing_cells_are_reported_with_lines() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad2.csv");
        std::fs::write(&path, "state,0,50\nNon-diseased,325,-2\nDiseased,0,15\nDead,0,8\n")
            .unwrap();
        match read_acs_table(&path) {
            Err(Error::CsvFormat { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected CsvFormat, got {other:?}"),
        }
        std::fs::write(&path, "state,0,50\nNon-diseased,325\nDiseased,0,15\nDead,0,8\n").unwrap();
        match read_acs_table(&path) {
            Err(Error::CsvFormat { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected CsvFormat, got {other:?}"),
        }
    }

    #[test]
    fn replicates_roundtrip_keeps_converged_rows() {
        use crate::bootstrap::BootstrapRun;
        use crate::rates::ThetaParams;
        let dir = tempdir().unwrap();
        let path = dir.path().join("reps.csv");
        let runs = vec![
            BootstrapRun {
                b_index: 0,
                theta_ls: ThetaParams::new(33.0, 6e-4, 2.2).unwrap(),
                theta_ml: ThetaParams::new(32.0, 6.5e-4, 2.1).unwrap(),
                ls_converged: true,
                ml_converged: false,
                seed: 1,
            },
            BootstrapRun {
                b_index: 1,
                theta_ls: ThetaParams::new(35.0, 5e-4, 2.4).unwrap(),
                theta_ml: ThetaParams::new(34.0, 5.5e-4, 2.3).unwrap(),
                ls_converged: true,
                ml_converged: true,
                seed: 2,
            },
        ];
        write_replicates(&path, &runs).unwrap();
        let cols = read_replicates(&path).unwrap();
        assert_eq!(cols.ls.len(), 2);
        assert_eq!(cols.ml.len(), 1);
        assert_eq!(cols.ml[0][0], 34.0);
    }
}
