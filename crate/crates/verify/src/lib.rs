//! Acceptance checks for the techgrowth library. Each check returns an
//! [`Outcome`]; the `acceptance` test target prints one line per check and
//! fails if any check fails.
//!
//! Reference values are derived independently in this crate (closed forms,
//! brute-force reachability, dense eigensolvers) rather than read back from
//! the library.

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use techgrowth::allocation::{compute_shares, market_statics};
use techgrowth::dynamics::{detect_convergence, detect_transitions, simulate, Trajectory};
use techgrowth::longrun::{block_winner, predict_regime, solve_support_system, Regime};
use techgrowth::report::epoch_growth;
use techgrowth::scenario::{builtin_scenario, builtin_scenarios, Scenario};
use techgrowth::spectral::{perron_root, spectrum};
use techgrowth::structure::{adjacency, classify, closure, is_eventually_nonnegative};
use techgrowth::{validate_model, EconomyParams, QualityState, SpilloverMatrix};

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn outcome(id: u32, title: &'static str, checks: Vec<(bool, String)>) -> Outcome {
    let pass = checks.iter().all(|(ok, _)| *ok);
    let detail = checks
        .into_iter()
        .map(|(ok, msg)| format!("{}{msg}", if ok { "" } else { "[x] " }))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome {
        id,
        title,
        pass,
        detail,
    }
}

fn scenario(name: &str) -> Scenario {
    builtin_scenario(name).unwrap_or_else(|| panic!("built-in {name}"))
}

fn run(s: &Scenario, horizon: f64, step: f64, sample_every: usize) -> Trajectory {
    simulate(&s.model().expect("valid"), horizon, step, sample_every).expect("simulation")
}

fn matrix(rows: &[&[f64]]) -> SpilloverMatrix {
    SpilloverMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
        .expect("matrix")
}

fn set(s: &[usize]) -> String {
    techgrowth::longrun::format_set(s)
}

pub fn spectral_facts() -> Outcome {
    let oneway = scenario("fig12-oneway");
    let circular = scenario("fig12-circular");
    let max_mod = spectrum(oneway.matrix.entries())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let dominant = classify(&circular.matrix).dominant_eigenvalue;
    // 2-cycle [[0, a], [b, 0]]: lambda^2 = a b
    let two = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 8.0, 0.0]);
    let expected = (2.0f64 * 8.0).sqrt();
    let root = perron_root(&two);
    outcome(
        1,
        "spectral facts",
        vec![
            (
                max_mod < 1e-9,
                format!("one-way max |lambda| = {max_mod:e}"),
            ),
            (dominant > 0.0, format!("circular dominant = {dominant:.6}")),
            (
                (root - expected).abs() <= 1e-10,
                format!("[[0,2],[8,0]] dominant = {root}"),
            ),
        ],
    )
}

pub fn regime_reproduction() -> Outcome {
    let oneway = scenario("fig12-oneway");
    let traj = run(&oneway, 200.0, 0.01, 10);
    let n = traj.len();
    let window = &traj.sector_growth[n - n / 10..];
    let decreasing = window.windows(2).all(|w| w[1] < w[0]);
    let g_end = *traj.sector_growth.last().expect("samples");

    let circular = scenario("fig12-circular");
    let g_inf = solve_support_system(&circular.matrix, &circular.params)
        .expect("solver")
        .solutions
        .first()
        .map_or(f64::NAN, |s| s.growth_rate);
    let traj = run(&circular, 200.0, 0.01, 10);
    let g_sim = *traj.sector_growth.last().expect("samples");
    let rel = (g_sim - g_inf).abs() / g_inf;
    outcome(
        2,
        "regime reproduction",
        vec![
            (
                decreasing,
                "one-way g_YL decreasing over final window".into(),
            ),
            (g_end < 0.05, format!("one-way g_YL(200) = {g_end:.5}")),
            (
                rel < 1e-3,
                format!("circular |g_YL - g_inf| / g_inf = {rel:e}"),
            ),
        ],
    )
}

pub fn figure_four_transitions() -> Outcome {
    let s = scenario("fig4-transitions");
    let traj = run(&s, 80.0, 0.01, 10);
    let events = detect_transitions(&traj, 0.6, 1.0);
    let mut sequence: Vec<Vec<usize>> = Vec::new();
    match events.first() {
        Some(e) => sequence.push(e.old_leaders.clone()),
        None => sequence.push(techgrowth::dynamics::leader_set(&traj.shares[0], 0.6)),
    }
    sequence.extend(events.iter().map(|e| e.new_leaders.clone()));
    let expected = vec![vec![0], vec![1], vec![2, 3]];
    let levels = epoch_growth(&traj, &events);
    let increasing = levels.windows(2).all(|w| w[1] > w[0]);
    let shown: Vec<String> = sequence.iter().map(|x| set(x)).collect();
    let plateaus: Vec<String> = levels.iter().map(|g| format!("{g:.4}")).collect();
    outcome(
        3,
        "technology transitions",
        vec![
            (
                sequence == expected,
                format!(
                    "leader sequence {} (expected {{1}} -> {{2}} -> {{3,4}})",
                    shown.join(" -> ")
                ),
            ),
            (increasing, format!("plateaus {}", plateaus.join(" < "))),
        ],
    )
}

pub fn surviving_set_closure() -> Outcome {
    let mut checks = Vec::new();
    for s in builtin_scenarios() {
        let report = classify(&s.matrix);
        let prediction = predict_regime(&report, &s.matrix, &s.params);
        if prediction.regime != Regime::Exponential {
            continue;
        }
        let Some(candidate) = prediction.candidates.first() else {
            checks.push((false, format!("{}: no candidate", s.name)));
            continue;
        };
        let traj = run(&s, 200.0, 0.01, 100);
        let terminal = traj.shares.last().expect("samples");
        let dev = terminal
            .iter()
            .zip(&candidate.shares_inf)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let outside = candidate
            .stagnant
            .iter()
            .map(|&i| terminal[i])
            .fold(0.0, f64::max);
        checks.push((
            prediction.candidates.len() == 1 && dev < 1e-3 && outside < 1e-3,
            format!("{}: dev {dev:.1e}, outside {outside:.1e}", s.name),
        ));
    }
    outcome(4, "surviving set closure", checks)
}

pub fn homogeneity_law() -> Outcome {
    let n = 4;
    let params = EconomyParams::new(0.5, 1.0, 1.0, 1.0).expect("params");
    let rate = |f: f64| {
        let m = SpilloverMatrix::homogeneous(n, f).expect("matrix");
        let q0 = QualityState::at_zero(vec![1.0; n]).expect("state");
        let model = validate_model(&m, &params, &q0).expect("model");
        let traj = simulate(&model, 60.0, 0.01, 100).expect("simulation");
        *traj.sector_growth.last().expect("samples")
    };
    let f = 0.8;
    let (g1, g2) = (rate(f), rate(2.0 * f));
    let ratio = g2 / g1;
    // uniform shares S/n, so every quality grows at (S/n)^nu * n f
    let closed = n as f64 * f * (params.s_total() / n as f64).powf(params.nu());
    outcome(
        5,
        "homogeneity law",
        vec![
            (
                (ratio - 2.0).abs() / 2.0 < 1e-3,
                format!("g(2f)/g(f) = {ratio:.9}"),
            ),
            (
                (g1 - closed).abs() < 1e-6,
                format!("g(f) = {g1:.9}, closed form {closed:.9}"),
            ),
        ],
    )
}

pub fn block_winner_corollary() -> Outcome {
    let params = EconomyParams::new(0.5, 1.0, 1.0, 1.0).expect("params");
    let blocks = |a: f64, b: f64| {
        matrix(&[
            &[0.0, a, 0.0, 0.0],
            &[a, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, b],
            &[0.0, 0.0, b, 0.0],
        ])
    };
    let terminal = |f: &SpilloverMatrix, q: &[f64]| {
        let q0 = QualityState::at_zero(q.to_vec()).expect("state");
        let model = validate_model(f, &params, &q0).expect("model");
        let traj = simulate(&model, 60.0, 0.01, 100).expect("simulation");
        traj.shares.last().expect("samples").clone()
    };
    let weighted = blocks(1.0, 2.0);
    let s = terminal(&weighted, &[1.0; 4]);
    let block_b = s[2] + s[3];
    let predicted_b = block_winner(
        &weighted,
        &params,
        &QualityState::at_zero(vec![1.0; 4]).expect("state"),
    );
    let equal = blocks(1.0, 1.0);
    let head = [1.1, 1.0, 1.0, 1.0];
    let s = terminal(&equal, &head);
    let block_a = s[0] + s[1];
    let predicted_a = block_winner(
        &equal,
        &params,
        &QualityState::at_zero(head.to_vec()).expect("state"),
    );
    outcome(
        6,
        "block winner",
        vec![
            (
                block_b > 0.999,
                format!("weights 1 vs 2: block {{3,4}} share {block_b:.6}"),
            ),
            (
                matches!(&predicted_b, Ok(b) if *b == vec![2, 3]),
                format!("predicted {:?}", predicted_b.map(|b| set(&b))),
            ),
            (
                block_a > 0.999,
                format!("head start: block {{1,2}} share {block_a:.6}"),
            ),
            (
                matches!(&predicted_a, Ok(b) if *b == vec![0, 1]),
                format!("predicted {:?}", predicted_a.map(|b| set(&b))),
            ),
        ],
    )
}

pub fn eventually_nonnegative_extension() -> Outcome {
    let s = scenario("sec4-eventually-nn");
    let ev = is_eventually_nonnegative(&s.matrix, 50, 1e-12);
    let horizon = 60.0;
    let traj = run(&s, horizon, 0.01, 10);
    // ln q_i = ln z_i + L; find the last sample where any quality fell
    let log_q: Vec<Vec<f64>> = (0..traj.len())
        .map(|k| {
            traj.directions[k]
                .iter()
                .map(|z| z.ln() + traj.log_scale[k])
                .collect()
        })
        .collect();
    let last_drop = (1..traj.len())
        .rev()
        .find(|&k| (0..traj.n()).any(|i| log_q[k][i] < log_q[k - 1][i]));
    let burn_in = last_drop.map_or(0.0, |k| traj.times[k]);
    let conv = detect_convergence(&traj, 1e-6, 10.0);
    outcome(
        7,
        "eventually nonnegative extension",
        vec![
            (
                ev.flag && ev.witness == Some(2),
                format!("witness k = {:?}", ev.witness),
            ),
            (
                burn_in < horizon / 2.0,
                format!("qualities nondecreasing after t = {burn_in}"),
            ),
            (
                conv.converged && conv.terminal_growth > 0.0,
                format!("converged growth {:.6}", conv.terminal_growth),
            ),
        ],
    )
}

pub fn analytic_oracle() -> Outcome {
    let f = matrix(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let params = EconomyParams::new(0.5, 0.0, 1.0, 1.0).expect("params");
    let q0 = QualityState::at_zero(vec![1.0, 1.0]).expect("state");
    let model = validate_model(&f, &params, &q0).expect("model");
    let traj = simulate(&model, 20.0, 0.01, 100).expect("simulation");
    // symmetry keeps s = (1/2, 1/2) and q1 = q2, so q' = (1/2)^(1/2) q
    let expected = 0.5f64.sqrt();
    let g = *traj.sector_growth.last().expect("samples");
    outcome(
        8,
        "analytic oracle",
        vec![(
            (g - expected).abs() < 1e-4,
            format!("g(20) = {g:.10}, expected {expected:.10}"),
        )],
    )
}

fn random_matrix(rng: &mut StdRng, n: usize, density: f64, scale: f64) -> SpilloverMatrix {
    let data: Vec<f64> = (0..n * n)
        .map(|_| {
            if rng.random::<f64>() < density {
                scale * rng.random::<f64>()
            } else {
                0.0
            }
        })
        .collect();
    SpilloverMatrix::from_row_major(n, &data).expect("matrix")
}

/// Reachability over paths of length >= 1 by breadth-first search; entry
/// `(i, j)` is true when `i` can be reached from `j`.
fn reachability(adj: &DMatrix<bool>) -> DMatrix<bool> {
    let n = adj.nrows();
    let mut out = DMatrix::from_element(n, n, false);
    for j in 0..n {
        let mut frontier: Vec<usize> = (0..n).filter(|&i| adj[(i, j)]).collect();
        while let Some(k) = frontier.pop() {
            if out[(k, j)] {
                continue;
            }
            out[(k, j)] = true;
            frontier.extend((0..n).filter(|&i| adj[(i, k)] && !out[(i, j)]));
        }
    }
    out
}

pub fn identity_suite() -> Outcome {
    let mut rng = StdRng::seed_from_u64(20240917);
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=10);
        let q: Vec<f64> = (0..n).map(|_| 10.0 * rng.random::<f64>()).collect();
        if q.iter().sum::<f64>() == 0.0 {
            continue;
        }
        let params =
            EconomyParams::new(0.5, 0.0, 1.0, 0.1 + 5.0 * rng.random::<f64>()).expect("params");
        let total: f64 = q.iter().sum();
        let m =
            market_statics(&QualityState::at_zero(q).expect("state"), &params).expect("statics");
        worst = worst.max((m.y_l - total).abs() / total);
    }
    checks.push((worst < 1e-10, format!("Y_L = sum q, worst rel {worst:.1e}")));

    let (mut simplex, mut ratio) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(2..=8);
        let f = random_matrix(&mut rng, n, 0.6, 3.0);
        let q: Vec<f64> = (0..n).map(|_| 5.0 * rng.random::<f64>()).collect();
        let nu = 0.05 + 0.9 * rng.random::<f64>();
        let alpha = if rng.random::<bool>() {
            0.0
        } else {
            2.0 * rng.random::<f64>()
        };
        let params = EconomyParams::new(nu, alpha, 0.5 + rng.random::<f64>(), 1.0).expect("params");
        let state = QualityState::at_zero(q.clone()).expect("state");
        let a = compute_shares(&f, &state, &params).expect("shares");
        let sum: f64 = a.shares.iter().sum();
        simplex = simplex.max((sum - 1.0).abs());
        if a.shares.iter().any(|&s| s < 0.0) {
            simplex = f64::INFINITY;
        }
        let prod: Vec<f64> = f.inflow(&q).iter().map(|x| x + alpha).collect();
        let p = 1.0 / (1.0 - nu);
        for i in 0..n {
            for j in 0..n {
                let (si, sj) = (a.shares[i], a.shares[j]);
                if prod[i] > 0.0 && prod[j] > 0.0 && si > 1e-200 && sj > 1e-200 {
                    let expected = (prod[i] / prod[j]).powf(p);
                    ratio = ratio.max((si / sj - expected).abs() / expected);
                }
            }
        }
    }
    checks.push((
        simplex < 1e-10,
        format!("share simplex, worst {simplex:.1e}"),
    ));
    checks.push((
        ratio < 1e-10,
        format!("share ratio law, worst rel {ratio:.1e}"),
    ));

    let (mut closure_ok, mut perron_worst) = (true, 0.0f64);
    for _ in 0..500 {
        let n = rng.random_range(2..=8);
        let f = random_matrix(&mut rng, n, 0.35, 2.0);
        let adj = adjacency(&f);
        let c = closure(&adj);
        closure_ok &= closure(&c) == c && c == reachability(&adj);
        let root = perron_root(f.entries());
        // a nonnegative F^n cannot cancel, so zero means nilpotent; a dense
        // Schur solve scatters nilpotent spectra to O(eps^(1/n))
        let power = (1..n).fold(f.entries().clone(), |acc, _| &acc * f.entries());
        let err = if power.iter().all(|&x| x == 0.0) {
            root.abs()
        } else {
            let eigs = f.entries().clone().complex_eigenvalues();
            let radius = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let real_match = eigs
                .iter()
                .map(|z| (z - nalgebra::Complex::new(root, 0.0)).norm())
                .fold(f64::INFINITY, f64::min);
            (root - radius).abs().max(real_match) / radius.max(1.0)
        };
        perron_worst = perron_worst.max(if root < 0.0 { f64::INFINITY } else { err });
    }
    checks.push((
        closure_ok,
        "closure idempotent and equal to BFS reachability".into(),
    ));
    checks.push((
        perron_worst < 1e-8,
        format!("Perron root nonnegative and dominant, worst rel {perron_worst:.1e}"),
    ));

    // observed order log2(e_h / e_{h/2}), e_h = |x_h - x_{h/2}|
    let end_state = |s: &Scenario, h: f64| {
        let traj = run(s, 10.0, h, usize::MAX);
        let k = traj.len() - 1;
        let mut x = traj.directions[k].clone();
        x.push(traj.log_scale[k]);
        x
    };
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let mut orders = Vec::new();
    for s in builtin_scenarios() {
        let h = 0.1;
        let (a, b, c) = (
            end_state(&s, h),
            end_state(&s, h / 2.0),
            end_state(&s, h / 4.0),
        );
        orders.push((dist(&a, &b) / dist(&b, &c)).log2());
    }
    let ok = orders.iter().all(|p| (p - 4.0).abs() <= 0.8);
    let shown: Vec<String> = orders.iter().map(|p| format!("{p:.3}")).collect();
    checks.push((ok, format!("RK4 observed order {}", shown.join(" "))));
    outcome(9, "identity suite", checks)
}

pub fn all() -> Vec<Outcome> {
    vec![
        spectral_facts(),
        regime_reproduction(),
        figure_four_transitions(),
        surviving_set_closure(),
        homogeneity_law(),
        block_winner_corollary(),
        eventually_nonnegative_extension(),
        analytic_oracle(),
        identity_suite(),
    ]
}
