//! Aligned text rendering. Numbers are printed with `Display`, so they are the
//! same values that appear in the JSON document.

use citest_core::simulate::{SimCell, SimReport};
use citest_core::stats::Functional;
use citest_core::TestResult;

use crate::config::{RunConfig, ThetaMode};
use crate::report::describe_degeneracy;

fn align(rows: &[Vec<String>], left_cols: usize) -> String {
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0; width];
    for row in rows {
        for (j, cell) in row.iter().enumerate() {
            widths[j] = widths[j].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (j, cell) in row.iter().enumerate() {
            if j > 0 {
                line.push_str("  ");
            }
            if j < left_cols {
                line.push_str(&format!("{cell:<w$}", w = widths[j]));
            } else {
                line.push_str(&format!("{cell:>w$}", w = widths[j]));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

pub fn render_test(config: &RunConfig, result: &TestResult) -> String {
    let theta = result
        .theta
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let theta_src = match config.theta {
        ThetaMode::Known { .. } => "given",
        ThetaMode::Probit => "probit MLE",
    };
    let mut rows = vec![
        vec!["data".to_string(), config.data.clone()],
        vec!["n".into(), result.n.to_string()],
        vec![
            "weights / functional".into(),
            format!(
                "{} / {}",
                config.test.beta.short_name(),
                config.test.functional.short_name()
            ),
        ],
        vec![format!("theta ({theta_src})"), format!("({theta})")],
        vec![
            "bandwidth h_z / h_y".into(),
            format!("{} / {}", result.h_z, result.h_y),
        ],
        vec!["grid points".into(), result.grid_points.to_string()],
        vec!["bootstrap draws".into(), result.bootstrap.to_string()],
        vec!["seed".into(), config.test.seed.to_string()],
        vec!["statistic".into(), result.statistic.to_string()],
        vec![
            format!("critical value ({})", result.alpha),
            result.critical_value.to_string(),
        ],
        vec!["p-value".into(), result.p_value.to_string()],
        vec![
            "reject".into(),
            if result.reject { "yes" } else { "no" }.to_string(),
        ],
    ];
    for w in &result.warnings {
        rows.push(vec!["warning".into(), describe_degeneracy(w)]);
    }
    align(&rows, 2)
}

fn level_label(a: f64) -> String {
    format!("{}%", a * 100.0)
}

fn design_column_label(cell: &SimCell) -> String {
    match cell.design.kappa {
        Some(k) => format!("{} kappa={k}", cell.design.name),
        None => cell.design.name.to_string(),
    }
}

/// Groups `items` by `key` in order of first appearance.
fn distinct<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for item in items {
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

fn blank_repeats(rows: &mut [Vec<String>], prefix: usize) {
    for i in (1..rows.len()).rev() {
        for j in 0..prefix {
            if rows[i][..=j] == rows[i - 1][..=j] {
                rows[i][j] = String::new();
            } else {
                break;
            }
        }
    }
}

fn render_block(report: &SimReport, functional: Functional) -> String {
    let cells: Vec<&SimCell> = report
        .cells
        .iter()
        .filter(|c| c.functional == functional)
        .collect();
    let levels = &report.settings.levels;
    let equal_h = report.settings.bandwidths.iter().all(|b| b.h_z == b.h_y);
    let h_cells = |c: &SimCell| -> Vec<String> {
        if equal_h {
            vec![c.bandwidths.h_z.to_string()]
        } else {
            vec![c.bandwidths.h_z.to_string(), c.bandwidths.h_y.to_string()]
        }
    };
    let h_header: Vec<String> = if equal_h {
        vec!["h".into()]
    } else {
        vec!["h1".into(), "h2".into()]
    };
    let designs = distinct(cells.iter().map(|c| design_column_label(c)));
    let betas = distinct(cells.iter().map(|c| c.beta));
    let designs_as_columns = levels.len() == 1 && designs.len() > 1;

    let mut header1 = Vec::new();
    let mut header2 = Vec::new();
    let mut body: Vec<Vec<String>> = Vec::new();
    let prefix;
    if designs_as_columns {
        let has_a = cells.iter().any(|c| c.design.a.is_some());
        let mut lead = Vec::new();
        if has_a {
            lead.push("a".to_string());
        }
        lead.extend(h_header);
        prefix = lead.len();
        header1.extend(std::iter::repeat_n(String::new(), prefix));
        header2.extend(lead);
        let mut columns = Vec::new();
        for d in &designs {
            for (k, b) in betas.iter().enumerate() {
                header1.push(if k == 0 { d.clone() } else { String::new() });
                header2.push(b.short_name().to_string());
                columns.push((d.clone(), *b));
            }
        }
        let row_keys = distinct(
            cells
                .iter()
                .map(|c| (c.design.a.map(|a| a.to_string()), h_cells(c))),
        );
        for (a, h) in row_keys {
            let mut row: Vec<String> = a.iter().cloned().collect();
            row.extend(h.iter().cloned());
            for (d, b) in &columns {
                let hit = cells.iter().find(|c| {
                    design_column_label(c) == *d
                        && c.beta == *b
                        && c.design.a.map(|v| v.to_string()) == a
                        && h_cells(c) == h
                });
                row.push(hit.map_or("-".to_string(), |c| c.rates[0].to_string()));
            }
            body.push(row);
        }
    } else {
        let mut lead = vec!["design".to_string()];
        lead.extend(h_header);
        prefix = lead.len();
        header1.extend(std::iter::repeat_n(String::new(), prefix));
        header2.extend(lead);
        for b in &betas {
            for (k, a) in levels.iter().enumerate() {
                header1.push(if k == 0 {
                    b.short_name().to_string()
                } else {
                    String::new()
                });
                header2.push(level_label(*a));
            }
        }
        let row_keys = distinct(cells.iter().map(|c| (c.design.label(), h_cells(c))));
        for (label, h) in row_keys {
            let mut row = vec![label.clone()];
            row.extend(h.iter().cloned());
            for b in &betas {
                let hit = cells
                    .iter()
                    .find(|c| c.design.label() == label && h_cells(c) == h && c.beta == *b);
                for k in 0..levels.len() {
                    row.push(hit.map_or("-".to_string(), |c| c.rates[k].to_string()));
                }
            }
            body.push(row);
        }
    }
    blank_repeats(&mut body, prefix);
    let mut rows = vec![header1, header2];
    rows.extend(body);
    align(&rows, prefix)
}

pub fn render_sim(report: &SimReport) -> String {
    let n = report.cells.first().map_or(0, |c| c.design.n);
    let mut out = String::new();
    for (k, f) in report.settings.functionals.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        out.push_str(&format!(
            "Rejection rates, {} (n = {n}, reps = {}, B = {}, bandwidth = h x n^-{})\n",
            f.short_name(),
            report.reps,
            report.bootstrap,
            report.settings.exponent
        ));
        out.push_str(&render_block(report, *f));
    }
    out
}
