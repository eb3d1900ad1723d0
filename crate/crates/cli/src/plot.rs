//! Gnuplot script for the time-average cost and backlog curves of every cell
//! listed in a summary CSV.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::output::SUMMARY_COLUMNS;

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("summary has no `{SUMMARY_COLUMNS}` header")]
    MissingHeader,
    #[error("summary line {0} is malformed")]
    BadRow(usize),
    #[error("summary lists no cells")]
    Empty,
}

/// Builds the script from the summary text. Trace files are referenced by
/// name, so the script must run from the summary's directory.
pub fn gnuplot_script(summary: &str) -> Result<String, PlotError> {
    let mut lines = summary
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim() == SUMMARY_COLUMNS => {}
        _ => return Err(PlotError::MissingHeader),
    }
    let mut curves = BTreeSet::new();
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 || fields[2].parse::<u64>().is_err() {
            return Err(PlotError::BadRow(idx + 1));
        }
        let (policy, k, seed) = (fields[0], fields[1], fields[2]);
        let (file, title) = if k.is_empty() {
            (
                format!("trace_{policy}_seed{seed}.csv"),
                format!("{policy} seed {seed}"),
            )
        } else {
            (
                format!("trace_{policy}_k{k}_seed{seed}.csv"),
                format!("{policy} K={k} seed {seed}"),
            )
        };
        curves.insert((file, title));
    }
    if curves.is_empty() {
        return Err(PlotError::Empty);
    }

    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set datafile commentschars '#'\n");
    s.push_str("set key outside right\n");
    s.push_str("set terminal pngcairo size 1000,600\n");
    s.push_str("set xlabel 'time slot'\n");
    for (out, ylabel, column) in [
        ("time_avg_cost.png", "time-average mining cost", 9),
        ("time_avg_queue.png", "time-average queue length", 10),
    ] {
        let _ = writeln!(s, "set output '{out}'");
        let _ = writeln!(s, "set ylabel '{ylabel}'");
        let plots: Vec<String> = curves
            .iter()
            .map(|(file, title)| {
                format!("'{file}' every ::1 using 1:{column} with lines title '{title}'")
            })
            .collect();
        let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_references_trace_files() {
        let summary = format!(
            "# config_digest=x\n{SUMMARY_COLUMNS}\ndmra,20,1,200,1,2,0\nmaxmining,,1,200,3,4,0.5\n"
        );
        let script = gnuplot_script(&summary).unwrap();
        assert!(script.contains("'trace_dmra_k20_seed1.csv' every ::1 using 1:9"));
        assert!(script.contains("'trace_maxmining_seed1.csv' every ::1 using 1:10"));
        assert!(script.contains("set output 'time_avg_queue.png'"));
    }

    #[test]
    fn rejects_foreign_csv() {
        assert!(matches!(
            gnuplot_script("a,b\n1,2\n"),
            Err(PlotError::MissingHeader)
        ));
        let bad = format!("{SUMMARY_COLUMNS}\ndmra,20\n");
        assert!(matches!(gnuplot_script(&bad), Err(PlotError::BadRow(2))));
        assert!(matches!(
            gnuplot_script(&format!("{SUMMARY_COLUMNS}\n")),
            Err(PlotError::Empty)
        ));
    }
}
