//! Figure emission: every analysis is exported as CSV, with a best-effort
//! SVG chart next to it. Confidence intervals are bootstrapped percentile
//! intervals under a fixed seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};

use hierref_core::metrics::MetricsReport;
use hierref_core::RunRng;

const BOOTSTRAP_RESAMPLES: usize = 1000;
const BOOTSTRAP_SEED: u64 = 0xB007;

/// One seed's artifacts as read back from disk.
pub struct LoadedRun {
    pub dataset: String,
    pub seed: u64,
    pub accuracies: BTreeMap<String, f64>,
    pub report: MetricsReport,
}

/// Scans `<experiment>/seed_*/` directories. Incomplete runs are skipped
/// with a warning.
pub fn load_experiment_runs(experiment_dir: &Path) -> Result<Vec<LoadedRun>> {
    let dataset = experiment_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into());
    let mut runs = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(experiment_dir)
        .with_context(|| format!("reading {}", experiment_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .map(|n| n.to_string_lossy().starts_with("seed_"))
                    .unwrap_or(false)
        })
        .collect();
    entries.sort();

    for dir in entries {
        let name = dir.file_name().unwrap().to_string_lossy().into_owned();
        let seed: u64 = match name.trim_start_matches("seed_").parse() {
            Ok(s) => s,
            Err(_) => continue,
        };
        if dir.join("INCOMPLETE").exists() {
            eprintln!("warning: skipping incomplete run {}", dir.display());
            continue;
        }
        let metrics_path = dir.join("metrics.json");
        let acc_path = dir.join("accuracies.txt");
        if !metrics_path.exists() || !acc_path.exists() {
            eprintln!("warning: {} lacks artifacts, skipping", dir.display());
            continue;
        }
        let report: MetricsReport = serde_json::from_str(&fs::read_to_string(&metrics_path)?)
            .with_context(|| format!("parsing {}", metrics_path.display()))?;
        let mut accuracies = BTreeMap::new();
        for line in fs::read_to_string(&acc_path)?.lines() {
            if let Some((split, value)) = line.split_once('=') {
                accuracies.insert(split.to_string(), value.parse::<f64>()?);
            }
        }
        runs.push(LoadedRun {
            dataset: dataset.clone(),
            seed,
            accuracies,
            report,
        });
    }
    Ok(runs)
}

/// Percentile bootstrap interval for the mean at 95% coverage.
pub fn bootstrap_ci(values: &[f64], seed: u64) -> (f64, f64) {
    if values.len() < 2 {
        let v = values.first().copied().unwrap_or(f64::NAN);
        return (v, v);
    }
    let mut rng = RunRng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let sum: f64 = (0..values.len())
            .map(|_| values[rng.random_range(0..values.len())])
            .sum();
        means.push(sum / values.len() as f64);
    }
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = means[(BOOTSTRAP_RESAMPLES as f64 * 0.025) as usize];
    let hi = means[(BOOTSTRAP_RESAMPLES as f64 * 0.975) as usize];
    (lo, hi)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn stddev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

// ---------------------------------------------------------------- svg ----

fn svg_header(width: usize, height: usize, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"16\" text-anchor=\"middle\" font-size=\"13\">{title}</text>\n",
        width / 2
    )
}

const PALETTE: [&str; 6] = ["#4878cf", "#ee854a", "#6acc65", "#d65f5f", "#956cb4", "#8c613c"];

/// One bar series: name, value per group, optional error interval per bar.
type BarSeries = (String, Vec<f64>, Option<Vec<(f64, f64)>>);

/// Grouped bar chart with optional error whiskers per bar.
fn svg_grouped_bars(
    title: &str,
    groups: &[String],
    series: &[BarSeries],
    y_max_hint: f64,
) -> String {
    let width = 720;
    let height = 360;
    let (left, right, top, bottom) = (50.0, 120.0, 30.0, 50.0);
    let plot_w = width as f64 - left - right;
    let plot_h = height as f64 - top - bottom;

    let mut y_max = y_max_hint;
    for (_, values, cis) in series {
        for &v in values {
            y_max = y_max.max(v);
        }
        if let Some(cis) = cis {
            for &(_, hi) in cis {
                y_max = y_max.max(hi);
            }
        }
    }
    let y_max = if y_max <= 0.0 { 1.0 } else { y_max * 1.08 };

    let mut svg = svg_header(width, height, title);
    // Axis and ticks.
    for tick in 0..=4 {
        let frac = tick as f64 / 4.0;
        let y = top + plot_h * (1.0 - frac);
        let value = y_max * frac;
        writeln!(
            svg,
            "<line x1=\"{left}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{value:.2}</text>",
            left + plot_w,
            left - 6.0,
            y + 4.0
        )
        .unwrap();
    }

    let group_w = plot_w / groups.len().max(1) as f64;
    let bar_w = (group_w * 0.8) / series.len().max(1) as f64;
    for (g_idx, group) in groups.iter().enumerate() {
        let g_x = left + g_idx as f64 * group_w;
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{group}</text>",
            g_x + group_w / 2.0,
            top + plot_h + 16.0
        )
        .unwrap();
        for (s_idx, (_, values, cis)) in series.iter().enumerate() {
            let v = values.get(g_idx).copied().unwrap_or(f64::NAN);
            if !v.is_finite() {
                continue;
            }
            let h = plot_h * (v / y_max);
            let x = g_x + group_w * 0.1 + s_idx as f64 * bar_w;
            let y = top + plot_h - h;
            writeln!(
                svg,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{h:.1}\" \
                 fill=\"{}\"/>",
                bar_w * 0.92,
                PALETTE[s_idx % PALETTE.len()]
            )
            .unwrap();
            if let Some(cis) = cis {
                if let Some(&(lo, hi)) = cis.get(g_idx) {
                    let cx = x + bar_w * 0.46;
                    let y_lo = top + plot_h * (1.0 - lo / y_max);
                    let y_hi = top + plot_h * (1.0 - hi / y_max);
                    writeln!(
                        svg,
                        "<line x1=\"{cx:.1}\" y1=\"{y_lo:.1}\" x2=\"{cx:.1}\" y2=\"{y_hi:.1}\" \
                         stroke=\"#333\"/>"
                    )
                    .unwrap();
                }
            }
        }
    }
    // Legend.
    for (s_idx, (name, _, _)) in series.iter().enumerate() {
        let y = top + 14.0 * s_idx as f64;
        writeln!(
            svg,
            "<rect x=\"{:.1}\" y=\"{y:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\">{name}</text>",
            left + plot_w + 8.0,
            PALETTE[s_idx % PALETTE.len()],
            left + plot_w + 22.0,
            y + 9.0
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn svg_heatmap(
    title: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &[Vec<f64>],
) -> String {
    let cell = 46usize;
    let left = 70usize;
    let top = 50usize;
    let width = left + col_labels.len() * cell + 30;
    let height = top + row_labels.len() * cell + 30;
    let max = values
        .iter()
        .flatten()
        .cloned()
        .fold(f64::MIN, f64::max)
        .max(1e-12);

    let mut svg = svg_header(width, height, title);
    for (c, label) in col_labels.iter().enumerate() {
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{label}</text>",
            left + c * cell + cell / 2,
            top - 8
        )
        .unwrap();
    }
    for (r, row_label) in row_labels.iter().enumerate() {
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{row_label}</text>",
            left - 6,
            top + r * cell + cell / 2 + 4
        )
        .unwrap();
        for (c, &v) in values[r].iter().enumerate() {
            let intensity = (v / max).clamp(0.0, 1.0);
            let shade = (255.0 - intensity * 175.0) as u8;
            writeln!(
                svg,
                "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" \
                 fill=\"rgb({shade},{shade},255)\" stroke=\"#999\"/>\
                 <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{v:.2}</text>",
                left + c * cell,
                top + r * cell,
                left + c * cell + cell / 2,
                top + r * cell + cell / 2 + 4
            )
            .unwrap();
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn quartiles(sorted: &[f64]) -> (f64, f64, f64) {
    let q = |frac: f64| {
        let pos = frac * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - pos.floor())
    };
    (q(0.25), q(0.5), q(0.75))
}

fn svg_boxplot(title: &str, labels: &[String], data: &[Vec<f64>]) -> String {
    let width = 640;
    let height = 340;
    let (left, top, bottom) = (50.0, 30.0, 50.0);
    let plot_w = width as f64 - left - 20.0;
    let plot_h = height as f64 - top - bottom;
    let y_max = data
        .iter()
        .flatten()
        .cloned()
        .fold(0.0f64, f64::max)
        .max(1e-9)
        * 1.1;

    let mut svg = svg_header(width, height, title);
    for tick in 0..=4 {
        let frac = tick as f64 / 4.0;
        let y = top + plot_h * (1.0 - frac);
        writeln!(
            svg,
            "<line x1=\"{left}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{:.2}</text>",
            left + plot_w,
            left - 6.0,
            y + 4.0,
            y_max * frac
        )
        .unwrap();
    }
    let slot = plot_w / labels.len().max(1) as f64;
    for (i, (label, values)) in labels.iter().zip(data).enumerate() {
        let cx = left + slot * (i as f64 + 0.5);
        writeln!(
            svg,
            "<text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{label}</text>",
            top + plot_h + 16.0
        )
        .unwrap();
        if values.is_empty() {
            continue;
        }
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (q1, q2, q3) = quartiles(&sorted);
        let y_of = |v: f64| top + plot_h * (1.0 - v / y_max);
        let (y_min, y_q1, y_med, y_q3, y_maxv) = (
            y_of(sorted[0]),
            y_of(q1),
            y_of(q2),
            y_of(q3),
            y_of(*sorted.last().unwrap()),
        );
        let bw = slot * 0.4;
        writeln!(
            svg,
            "<line x1=\"{cx:.1}\" y1=\"{y_min:.1}\" x2=\"{cx:.1}\" y2=\"{y_maxv:.1}\" stroke=\"#333\"/>\
             <rect x=\"{:.1}\" y=\"{y_q3:.1}\" width=\"{bw:.1}\" height=\"{:.1}\" \
             fill=\"#9ecae1\" stroke=\"#333\"/>\
             <line x1=\"{:.1}\" y1=\"{y_med:.1}\" x2=\"{:.1}\" y2=\"{y_med:.1}\" stroke=\"#000\"/>",
            cx - bw / 2.0,
            (y_q1 - y_q3).max(1.0),
            cx - bw / 2.0,
            cx + bw / 2.0
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

// ------------------------------------------------------------- figures ----

fn write_file(out_dir: &Path, name: &str, content: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = out_dir.join(name);
    fs::write(&path, content)?;
    written.push(path);
    Ok(())
}

/// Emits every figure with available inputs; missing inputs skip the figure
/// with a warning. Returns the written paths.
pub fn emit_figures(experiment_dirs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut all_runs: Vec<LoadedRun> = Vec::new();
    for dir in experiment_dirs {
        match load_experiment_runs(dir) {
            Ok(mut runs) if !runs.is_empty() => all_runs.append(&mut runs),
            Ok(_) => eprintln!("warning: no completed runs under {}", dir.display()),
            Err(e) => eprintln!("warning: {e:#}"),
        }
    }
    if all_runs.is_empty() {
        anyhow::bail!("no completed runs found; nothing to plot");
    }
    let mut written = Vec::new();

    let mut datasets: Vec<String> = all_runs.iter().map(|r| r.dataset.clone()).collect();
    datasets.sort();
    datasets.dedup();

    // Accuracy grid: datasets x splits.
    {
        let mut splits: Vec<String> = all_runs
            .iter()
            .flat_map(|r| r.accuracies.keys().cloned())
            .collect();
        splits.sort();
        splits.dedup();
        let mut csv = String::from("dataset,split,mean_accuracy,stddev,runs\n");
        let mut series = Vec::new();
        for split in &splits {
            let mut means = Vec::new();
            for dataset in &datasets {
                let values: Vec<f64> = all_runs
                    .iter()
                    .filter(|r| &r.dataset == dataset)
                    .filter_map(|r| r.accuracies.get(split).copied())
                    .collect();
                if values.is_empty() {
                    means.push(f64::NAN);
                    continue;
                }
                writeln!(
                    csv,
                    "{dataset},{split},{:.6},{:.6},{}",
                    mean(&values),
                    stddev(&values),
                    values.len()
                )?;
                means.push(mean(&values));
            }
            series.push((split.clone(), means, None));
        }
        write_file(out_dir, "accuracy.csv", &csv, &mut written)?;
        let svg = svg_grouped_bars("Accuracy by dataset and split", &datasets, &series, 1.0);
        write_file(out_dir, "accuracy.svg", &svg, &mut written)?;
    }

    // Entropy scores per dataset.
    {
        let mut csv = String::from("dataset,metric,mean,stddev\n");
        let mut series = Vec::new();
        for (name, get) in [
            ("effectiveness", (|r: &MetricsReport| r.effectiveness) as fn(&MetricsReport) -> f64),
            ("consistency", |r| r.consistency),
            ("nmi", |r| r.nmi),
        ] {
            let mut means = Vec::new();
            for dataset in &datasets {
                let values: Vec<f64> = all_runs
                    .iter()
                    .filter(|r| &r.dataset == dataset)
                    .map(|r| get(&r.report))
                    .collect();
                writeln!(csv, "{dataset},{name},{:.6},{:.6}", mean(&values), stddev(&values))?;
                means.push(mean(&values));
            }
            series.push((name.to_string(), means, None));
        }
        write_file(out_dir, "entropy_scores.csv", &csv, &mut written)?;
        let svg = svg_grouped_bars("Entropy scores by dataset", &datasets, &series, 1.0);
        write_file(out_dir, "entropy_scores.svg", &svg, &mut written)?;
    }

    // Per-level entropy scores with bootstrapped CIs, pooled across runs.
    {
        let mut levels: Vec<usize> = all_runs
            .iter()
            .flat_map(|r| r.report.per_level.keys().copied())
            .collect();
        levels.sort_unstable();
        levels.dedup();
        let level_labels: Vec<String> = levels.iter().map(|l| l.to_string()).collect();

        let mut csv = String::from("level,metric,mean,ci_low,ci_high,runs\n");
        let mut series = Vec::new();
        for (name, get) in [
            (
                "effectiveness",
                (|m: &hierref_core::metrics::PerLevelMetrics| Some(m.effectiveness))
                    as fn(&hierref_core::metrics::PerLevelMetrics) -> Option<f64>,
            ),
            ("consistency", |m| Some(m.consistency)),
            ("nmi", |m| Some(m.nmi)),
        ] {
            let mut means = Vec::new();
            let mut cis = Vec::new();
            for &level in &levels {
                let values: Vec<f64> = all_runs
                    .iter()
                    .filter_map(|r| r.report.per_level.get(&level).and_then(get))
                    .collect();
                if values.is_empty() {
                    means.push(f64::NAN);
                    cis.push((f64::NAN, f64::NAN));
                    continue;
                }
                let (lo, hi) = bootstrap_ci(&values, BOOTSTRAP_SEED);
                writeln!(
                    csv,
                    "{level},{name},{:.6},{lo:.6},{hi:.6},{}",
                    mean(&values),
                    values.len()
                )?;
                means.push(mean(&values));
                cis.push((lo, hi));
            }
            series.push((name.to_string(), means, Some(cis)));
        }
        write_file(out_dir, "entropy_by_level.csv", &csv, &mut written)?;
        let svg = svg_grouped_bars(
            "Entropy scores by abstraction level",
            &level_labels,
            &series,
            1.0,
        );
        write_file(out_dir, "entropy_by_level.svg", &svg, &mut written)?;
    }

    // Message length and symbol redundancy per level.
    {
        let mut levels: Vec<usize> = all_runs
            .iter()
            .flat_map(|r| r.report.per_level.keys().copied())
            .collect();
        levels.sort_unstable();
        levels.dedup();
        let level_labels: Vec<String> = levels.iter().map(|l| l.to_string()).collect();

        let mut csv = String::from("level,metric,mean,ci_low,ci_high,runs\n");
        let mut series = Vec::new();
        for (name, get) in [
            (
                "mean_message_length",
                (|m: &hierref_core::metrics::PerLevelMetrics| Some(m.mean_message_length))
                    as fn(&hierref_core::metrics::PerLevelMetrics) -> Option<f64>,
            ),
            ("symbol_redundancy", |m| m.symbol_redundancy),
        ] {
            let mut means = Vec::new();
            let mut cis = Vec::new();
            for &level in &levels {
                let values: Vec<f64> = all_runs
                    .iter()
                    .filter_map(|r| r.report.per_level.get(&level).and_then(get))
                    .collect();
                if values.is_empty() {
                    means.push(f64::NAN);
                    cis.push((f64::NAN, f64::NAN));
                    continue;
                }
                let (lo, hi) = bootstrap_ci(&values, BOOTSTRAP_SEED + 1);
                writeln!(
                    csv,
                    "{level},{name},{:.6},{lo:.6},{hi:.6},{}",
                    mean(&values),
                    values.len()
                )?;
                means.push(mean(&values));
                cis.push((lo, hi));
            }
            series.push((name.to_string(), means, Some(cis)));
        }
        write_file(out_dir, "length_redundancy.csv", &csv, &mut written)?;
        let svg = svg_grouped_bars(
            "Message length and symbol redundancy by level",
            &level_labels,
            &series,
            0.0,
        );
        write_file(out_dir, "length_redundancy.svg", &svg, &mut written)?;
    }

    // Symbol occurrences: top ten ranks averaged across runs.
    {
        let top = 10usize;
        let mut levels: Vec<usize> = all_runs
            .iter()
            .flat_map(|r| {
                r.report
                    .symbol_occurrence
                    .rows
                    .iter()
                    .flat_map(|row| row.mean_by_level.keys().copied())
            })
            .collect();
        levels.sort_unstable();
        levels.dedup();

        let mut csv = String::from("rank,level,mean_occurrence,runs\n");
        let mut grid: Vec<Vec<f64>> = Vec::new();
        for rank in 0..top {
            let mut row = Vec::new();
            for &level in &levels {
                let values: Vec<f64> = all_runs
                    .iter()
                    .filter_map(|r| r.report.symbol_occurrence.rows.get(rank))
                    .filter_map(|r| r.mean_by_level.get(&level).copied())
                    .collect();
                let m = if values.is_empty() { 0.0 } else { mean(&values) };
                writeln!(csv, "{},{level},{m:.6},{}", rank + 1, values.len())?;
                row.push(m);
            }
            grid.push(row);
        }
        write_file(out_dir, "symbol_occurrence.csv", &csv, &mut written)?;
        let row_labels: Vec<String> = (1..=top).map(|r| format!("rank {r}")).collect();
        let col_labels: Vec<String> = levels.iter().map(|l| format!("level {l}")).collect();
        let svg = svg_heatmap(
            "Symbol occurrences per message by rank and level",
            &row_labels,
            &col_labels,
            &grid,
        );
        write_file(out_dir, "symbol_occurrence.svg", &svg, &mut written)?;
    }

    // Compositionality scores per run, boxplots per dataset.
    {
        let mut csv = String::from("dataset,seed,topsim,posdis,bosdis\n");
        for run in &all_runs {
            writeln!(
                csv,
                "{},{},{:.6},{:.6},{:.6}",
                run.dataset, run.seed, run.report.topsim, run.report.posdis, run.report.bosdis
            )?;
        }
        write_file(out_dir, "compositionality.csv", &csv, &mut written)?;

        let mut labels = Vec::new();
        let mut data = Vec::new();
        for dataset in &datasets {
            for (name, get) in [
                ("topsim", (|r: &MetricsReport| r.topsim) as fn(&MetricsReport) -> f64),
                ("posdis", |r| r.posdis),
                ("bosdis", |r| r.bosdis),
            ] {
                labels.push(format!("{dataset} {name}"));
                data.push(
                    all_runs
                        .iter()
                        .filter(|r| &r.dataset == dataset)
                        .map(|r| get(&r.report))
                        .collect(),
                );
            }
        }
        let svg = svg_boxplot("Compositionality scores", &labels, &data);
        write_file(out_dir, "compositionality.svg", &svg, &mut written)?;
    }

    Ok(written)
}
