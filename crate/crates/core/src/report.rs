//! Scenario runs: the full analysis pipeline plus trajectory, report and
//! chart files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::{
    detect_convergence, detect_transitions, simulate, Convergence, Trajectory, TransitionEvent,
    DEFAULT_HOLD,
};
use crate::error::{Error, Result};
use crate::longrun::{predict_regime, solve_support_system, RegimePrediction, Survivors};
use crate::scenario::Scenario;
use crate::structure::{classify, StructureReport};

/// Terminal shares below this count as extinct when reading off the
/// realized surviving set.
pub const SURVIVOR_SHARE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    /// Integration steps per trajectory sample.
    pub sample_every: usize,
    pub theta: f64,
    pub hold: f64,
    pub convergence_eps: f64,
    /// Trailing window for convergence, as a fraction of the horizon.
    pub convergence_window: f64,
    pub svg: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            horizon: None,
            step: None,
            sample_every: 10,
            theta: 0.6,
            hold: DEFAULT_HOLD,
            convergence_eps: 1e-6,
            convergence_window: 0.1,
            svg: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureSummary {
    pub classes: Vec<String>,
    pub cores: Vec<Vec<usize>>,
    pub irreducible: bool,
    pub eventually_nonnegative: bool,
    pub eventual_witness: Option<usize>,
    pub dominant_eigenvalue: f64,
}

impl From<&StructureReport> for StructureSummary {
    fn from(r: &StructureReport) -> Self {
        Self {
            classes: r.classes.iter().map(ToString::to_string).collect(),
            cores: r.cores.clone(),
            irreducible: r.irreducible,
            eventually_nonnegative: r.eventually_nonnegative.flag,
            eventual_witness: r.eventually_nonnegative.witness,
            dominant_eigenvalue: r.dominant_eigenvalue,
        }
    }
}

/// Outcome read off the end of the simulation.
#[derive(Debug, Clone, Serialize)]
pub struct RealizedOutcome {
    pub support: Vec<usize>,
    pub terminal_shares: Vec<f64>,
    pub terminal_growth: f64,
    /// Index into the prediction's candidates, if the support matches one.
    pub matched_candidate: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossCheck {
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub n: usize,
    /// Parameters that are defaults rather than documented values.
    pub assumed: Vec<String>,
    pub horizon: f64,
    pub step: f64,
    pub structure: StructureSummary,
    pub prediction: RegimePrediction,
    pub realized: RealizedOutcome,
    pub transitions: Vec<TransitionEvent>,
    /// Mean sector growth rate over each leader epoch.
    pub epoch_growth: Vec<f64>,
    pub convergence: Convergence,
    pub cross_check: CrossCheck,
    pub diagnostics: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Mean sector growth over each stretch between transition events.
pub fn epoch_growth(traj: &Trajectory, events: &[TransitionEvent]) -> Vec<f64> {
    let mut bounds: Vec<f64> = events.iter().map(|e| e.time).collect();
    bounds.push(f64::INFINITY);
    let mut out = Vec::with_capacity(bounds.len());
    let mut start = f64::NEG_INFINITY;
    for end in bounds {
        let (sum, count) = traj
            .times
            .iter()
            .zip(&traj.sector_growth)
            .filter(|(t, _)| **t >= start && **t < end)
            .fold((0.0, 0usize), |(s, c), (_, g)| (s + g, c + 1));
        out.push(if count == 0 {
            f64::NAN
        } else {
            sum / count as f64
        });
        start = end;
    }
    out
}

fn realized(traj: &Trajectory, prediction: &RegimePrediction) -> RealizedOutcome {
    let last = traj.len() - 1;
    let shares = traj.shares[last].clone();
    let support: Vec<usize> = (0..shares.len())
        .filter(|&i| shares[i] >= SURVIVOR_SHARE)
        .collect();
    let matched_candidate = prediction
        .candidates
        .iter()
        .position(|c| c.support == support);
    RealizedOutcome {
        support,
        terminal_shares: shares,
        terminal_growth: traj.sector_growth[last],
        matched_candidate,
    }
}

fn cross_check(prediction: &RegimePrediction, outcome: &RealizedOutcome) -> CrossCheck {
    let set = |s: &[usize]| crate::longrun::format_set(s);
    match &prediction.predicted_survivors {
        Survivors::Determined(support) if !prediction.candidates.is_empty() => {
            if *support == outcome.support {
                CrossCheck {
                    status: CheckStatus::Pass,
                    detail: format!("realized survivors {} as predicted", set(support)),
                }
            } else {
                CrossCheck {
                    status: CheckStatus::Fail,
                    detail: format!(
                        "predicted {}, realized {}",
                        set(support),
                        set(&outcome.support)
                    ),
                }
            }
        }
        Survivors::DependsOnInitialConditions(cands) => match outcome.matched_candidate {
            Some(_) => CrossCheck {
                status: CheckStatus::Pass,
                detail: format!(
                    "realized survivors {} are a candidate",
                    set(&outcome.support)
                ),
            },
            None => CrossCheck {
                status: CheckStatus::Fail,
                detail: format!(
                    "realized {} is none of {}",
                    set(&outcome.support),
                    cands.iter().map(|c| set(c)).collect::<Vec<_>>().join(", ")
                ),
            },
        },
        _ => CrossCheck {
            status: CheckStatus::NotApplicable,
            detail: "no balanced-growth candidates to compare against".into(),
        },
    }
}

/// Runs the analysis pipeline without writing files.
pub fn analyze(scenario: &Scenario, options: &RunOptions) -> Result<(RunReport, Trajectory)> {
    let model = scenario.model()?;
    let horizon = options.horizon.unwrap_or(scenario.horizon);
    let step = options.step.unwrap_or(scenario.step);
    let structure = classify(&scenario.matrix);
    let prediction = predict_regime(&structure, &scenario.matrix, &scenario.params);
    let mut diagnostics = Vec::new();
    for w in model.warnings() {
        diagnostics.push(w.to_string());
    }
    if prediction.regime == crate::longrun::Regime::Exponential {
        match solve_support_system(&scenario.matrix, &scenario.params) {
            Ok(sol) => {
                for r in sol.rejected {
                    diagnostics.push(format!(
                        "support {} rejected: {:?}",
                        crate::longrun::format_set(&r.support),
                        r.reason
                    ));
                }
            }
            Err(e) => diagnostics.push(format!("long-run solver: {e}")),
        }
    }
    let traj = simulate(&model, horizon, step, options.sample_every)?;
    let transitions = detect_transitions(&traj, options.theta, options.hold);
    let convergence = detect_convergence(
        &traj,
        options.convergence_eps,
        options.convergence_window * horizon,
    );
    let outcome = realized(&traj, &prediction);
    let check = cross_check(&prediction, &outcome);
    let report = RunReport {
        scenario: scenario.name.clone(),
        n: scenario.n(),
        assumed: scenario.assumed.clone(),
        horizon,
        step,
        structure: StructureSummary::from(&structure),
        epoch_growth: epoch_growth(&traj, &transitions),
        prediction,
        realized: outcome,
        transitions,
        convergence,
        cross_check: check,
        diagnostics,
        files: Vec::new(),
    };
    Ok((report, traj))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs a scenario and writes `<name>.csv`, `<name>.report.txt`,
/// `<name>.report.json` and optionally `<name>.svg` into `out_dir`.
pub fn run(
    scenario: &Scenario,
    out_dir: impl AsRef<Path>,
    options: &RunOptions,
) -> Result<RunReport> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (mut report, traj) = analyze(scenario, options)?;
    let stem = &scenario.name;
    let csv = out_dir.join(format!("{stem}.csv"));
    write_file(&csv, &trajectory_csv(&traj))?;
    report.files.push(csv);
    if options.svg {
        let svg = out_dir.join(format!("{stem}.svg"));
        write_file(&svg, &trajectory_svg(&traj, stem))?;
        report.files.push(svg);
    }
    let txt = out_dir.join(format!("{stem}.report.txt"));
    let json = out_dir.join(format!("{stem}.report.json"));
    report.files.push(txt.clone());
    report.files.push(json.clone());
    write_file(&txt, &render_text(&report))?;
    write_file(
        &json,
        &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
    )?;
    Ok(report)
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x}")
    }
}

/// Trajectory as CSV: `t, q_1..q_n, s_1..s_n, g_1..g_n, g_YL, logsum`.
///
/// When `exp(logsum)` overflows anywhere in the run, the q columns hold the
/// normalized directions instead and the file starts with
/// `# normalized=true`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.n();
    let normalized = traj.log_scale.iter().any(|l| !l.exp().is_finite());
    let mut out = String::new();
    if normalized {
        out.push_str("# normalized=true\n");
    }
    let mut header = vec!["t".to_string()];
    for prefix in ["q", "s", "g"] {
        header.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    header.push("g_YL".into());
    header.push("logsum".into());
    out.push_str(&header.join(","));
    out.push('\n');
    for k in 0..traj.len() {
        let q = if normalized {
            traj.directions[k].clone()
        } else {
            traj.qualities(k)
        };
        let mut row = vec![fmt_f64(traj.times[k])];
        row.extend(q.into_iter().map(fmt_f64));
        row.extend(traj.shares[k].iter().map(|&s| fmt_f64(s)));
        row.extend(
            traj.tech_growth[k]
                .iter()
                .map(|g| fmt_f64(g.unwrap_or(f64::NAN))),
        );
        row.push(fmt_f64(traj.sector_growth[k]));
        row.push(fmt_f64(traj.log_scale[k]));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Panel<'a> {
    title: &'a str,
    series: Vec<(String, Vec<f64>)>,
}

fn panel_svg(out: &mut String, panel: &Panel<'_>, times: &[f64], top: f64) {
    let (left, width, height) = (60.0, 620.0, 180.0);
    let finite = panel
        .series
        .iter()
        .flat_map(|(_, ys)| ys.iter().copied())
        .filter(|y| y.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| {
        (a.min(y), b.max(y))
    });
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let (t0, t1) = (times[0], *times.last().expect("non-empty"));
    let span = if t1 > t0 { t1 - t0 } else { 1.0 };
    let x = |t: f64| left + (t - t0) / span * width;
    let y = |v: f64| top + height - (v - lo) / (hi - lo) * height;
    let _ = writeln!(
        out,
        r##"<text x="{left}" y="{}" font-size="13">{}</text>"##,
        top - 6.0,
        panel.title
    );
    let _ = writeln!(
        out,
        r##"<rect x="{left}" y="{top}" width="{width}" height="{height}" fill="none" stroke="#888"/>"##
    );
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{}" font-size="10" text-anchor="end">{hi:.3}</text>"##,
        left - 4.0,
        top + 10.0
    );
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{}" font-size="10" text-anchor="end">{lo:.3}</text>"##,
        left - 4.0,
        top + height
    );
    for (idx, (label, ys)) in panel.series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let pts: Vec<String> = times
            .iter()
            .zip(ys)
            .filter(|(_, v)| v.is_finite())
            .map(|(&t, &v)| format!("{:.2},{:.2}", x(t), y(v)))
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"##,
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            r##"<text x="{}" y="{}" font-size="11" fill="{color}">{label}</text>"##,
            left + width + 8.0,
            top + 14.0 + 14.0 * idx as f64
        );
    }
    let _ = writeln!(
        out,
        r##"<text x="{left}" y="{}" font-size="10">t = {t0}</text>"##,
        top + height + 14.0
    );
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{}" font-size="10" text-anchor="end">t = {t1}</text>"##,
        left + width,
        top + height + 14.0
    );
}

/// Three stacked line charts: scientist shares, technology growth rates and
/// the sector growth rate.
pub fn trajectory_svg(traj: &Trajectory, title: &str) -> String {
    let n = traj.n();
    let column = |f: &dyn Fn(usize) -> f64| (0..traj.len()).map(f).collect::<Vec<f64>>();
    let shares = Panel {
        title: "scientist shares",
        series: (0..n)
            .map(|i| (format!("s_{}", i + 1), column(&|k| traj.shares[k][i])))
            .collect(),
    };
    let growth = Panel {
        title: "technology growth rates",
        series: (0..n)
            .map(|i| {
                (
                    format!("g_{}", i + 1),
                    column(&|k| traj.tech_growth[k][i].unwrap_or(f64::NAN)),
                )
            })
            .collect(),
    };
    let sector = Panel {
        title: "labour-intensive sector growth rate",
        series: vec![("g_YL".into(), traj.sector_growth.clone())],
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="760" height="720" font-family="sans-serif">"##
    );
    let _ = writeln!(out, r##"<rect width="760" height="720" fill="white"/>"##);
    let _ = writeln!(
        out,
        r##"<text x="60" y="22" font-size="15">{}</text>"##,
        xml_escape(title)
    );
    for (idx, panel) in [shares, growth, sector].iter().enumerate() {
        panel_svg(&mut out, panel, &traj.times, 50.0 + 225.0 * idx as f64);
    }
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Human-readable report. Technologies are numbered from 1.
pub fn render_text(report: &RunReport) -> String {
    let set = |s: &[usize]| crate::longrun::format_set(s);
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", report.scenario);
    let _ = writeln!(out, "technologies: {}", report.n);
    let _ = writeln!(out, "horizon: {}  step: {}", report.horizon, report.step);
    if !report.assumed.is_empty() {
        let _ = writeln!(
            out,
            "defaults (not documented values): {}",
            report.assumed.join(", ")
        );
    }
    let s = &report.structure;
    let _ = writeln!(out, "\nstructure: {}", s.classes.join(", "));
    let cores: Vec<String> = s.cores.iter().map(|c| set(c)).collect();
    let _ = writeln!(
        out,
        "cores: {}",
        if cores.is_empty() {
            "none".into()
        } else {
            cores.join(" ")
        }
    );
    let _ = writeln!(out, "irreducible: {}", s.irreducible);
    match s.eventual_witness {
        Some(k) => {
            let _ = writeln!(
                out,
                "eventually nonnegative: {} (F^{k} >= 0)",
                s.eventually_nonnegative
            );
        }
        None => {
            let _ = writeln!(out, "eventually nonnegative: {}", s.eventually_nonnegative);
        }
    }
    let _ = writeln!(out, "dominant eigenvalue: {}", s.dominant_eigenvalue);

    let p = &report.prediction;
    let _ = writeln!(out, "\nregime: {} ({})", p.regime, p.reason);
    let survivors = match &p.predicted_survivors {
        Survivors::Determined(set_) => set(set_),
        Survivors::DependsOnInitialConditions(c) => format!(
            "depends on initial conditions: {}",
            c.iter().map(|x| set(x)).collect::<Vec<_>>().join(" ")
        ),
        Survivors::Unresolved => "unresolved".into(),
    };
    let _ = writeln!(out, "predicted survivors: {survivors}");
    for c in &p.candidates {
        let _ = writeln!(
            out,
            "  candidate {}: g = {}, shares = {:?}, residual = {:e}",
            set(&c.support),
            c.growth_rate,
            c.shares_inf,
            c.residual
        );
    }

    let r = &report.realized;
    let _ = writeln!(out, "\nrealized survivors: {}", set(&r.support));
    let _ = writeln!(out, "terminal shares: {:?}", r.terminal_shares);
    let _ = writeln!(out, "terminal sector growth: {}", r.terminal_growth);
    let c = &report.convergence;
    let _ = writeln!(
        out,
        "converged: {} (share deviation {:e}, growth spread {:e})",
        c.converged, c.share_deviation, c.growth_spread
    );
    if report.transitions.is_empty() {
        let _ = writeln!(out, "transitions: none");
    } else {
        let _ = writeln!(out, "transitions:");
        for e in &report.transitions {
            let _ = writeln!(
                out,
                "  t = {:.2}: {} -> {}",
                e.time,
                set(&e.old_leaders),
                set(&e.new_leaders)
            );
        }
    }
    let levels: Vec<String> = report
        .epoch_growth
        .iter()
        .map(|g| format!("{g:.6}"))
        .collect();
    let _ = writeln!(out, "epoch growth levels: {}", levels.join(" "));
    let status = match report.cross_check.status {
        CheckStatus::Pass => "pass",
        CheckStatus::Fail => "FAIL",
        CheckStatus::NotApplicable => "n/a",
    };
    let _ = writeln!(
        out,
        "\ncross-check: {status} ({})",
        report.cross_check.detail
    );
    if !report.diagnostics.is_empty() {
        let _ = writeln!(out, "diagnostics:");
        for d in &report.diagnostics {
            let _ = writeln!(out, "  {d}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin_scenario;

    #[test]
    fn csv_header_and_columns() {
        let s = builtin_scenario("fig12-circular").unwrap();
        let traj = simulate(&s.model().unwrap(), 1.0, 0.1, 5).unwrap();
        let csv = trajectory_csv(&traj);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,q_1,q_2,q_3,q_4,s_1,s_2,s_3,s_4,g_1,g_2,g_3,g_4,g_YL,logsum"
        );
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 15);
        assert_eq!(first[0], "0");
        assert_eq!(first[1], "1");
        assert_eq!(csv.lines().count(), 1 + traj.len());
    }

    #[test]
    fn overflowing_runs_are_normalized() {
        let s = builtin_scenario("homogeneous-baseline").unwrap();
        let traj = simulate(&s.model().unwrap(), 400.0, 0.1, 100).unwrap();
        let csv = trajectory_csv(&traj);
        assert!(csv.starts_with("# normalized=true\nt,"));
        let last: Vec<f64> = csv
            .lines()
            .last()
            .unwrap()
            .split(',')
            .map(|x| x.parse().unwrap())
            .collect();
        assert!((last[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn undefined_growth_is_nan() {
        let s = Scenario::new(
            "zero",
            crate::model::SpilloverMatrix::zeros(2),
            crate::model::EconomyParams::new(0.5, 1.0, 1.0, 1.0).unwrap(),
            crate::model::QualityState::at_zero(vec![1.0, 0.0]).unwrap(),
            1.0,
            0.5,
        )
        .unwrap();
        let traj = simulate(&s.model().unwrap(), 1.0, 0.5, 1).unwrap();
        let csv = trajectory_csv(&traj);
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[6], "NaN");
    }

    #[test]
    fn epoch_levels_split_at_events() {
        let s = builtin_scenario("homogeneous-baseline").unwrap();
        let traj = simulate(&s.model().unwrap(), 2.0, 0.5, 1).unwrap();
        let events = vec![TransitionEvent {
            time: 1.0,
            old_leaders: vec![0],
            new_leaders: vec![1],
        }];
        let levels = epoch_growth(&traj, &events);
        assert_eq!(levels.len(), 2);
        let first = (traj.sector_growth[0] + traj.sector_growth[1]) / 2.0;
        assert!((levels[0] - first).abs() < 1e-15);
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let s = builtin_scenario("fig12-oneway").unwrap();
        let traj = simulate(&s.model().unwrap(), 5.0, 0.1, 5).unwrap();
        let svg = trajectory_svg(&traj, "a<b");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 9);
        assert!(svg.contains("a&lt;b"));
    }
}
