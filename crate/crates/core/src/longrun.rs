//! Long-run analysis: candidate surviving sets and their balanced-growth
//! fixed points, growth-regime prediction, separated-block winners and
//! construction of technology transitions.
//!
//! On a surviving set `T` all qualities grow at one rate `g`, so the
//! relative qualities `z` satisfy
//!
//! ```text
//! z_j (F_i z)^p = z_i (F_j z)^p   for i, j in T,   p = 1 / (1 - nu)
//! ```
//!
//! i.e. `z` is proportional to `(F z)^p` on `T`, which is also the limiting
//! scientist allocation. The autonomous term `alpha` drops out because
//! `alpha / q -> 0` along growing paths.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::allocation::{compute_shares, shares_from_productivity};
use crate::dynamics::{
    detect_transitions, simulate, Trajectory, TransitionEvent, DEFAULT_HOLD, DEFAULT_STEP,
};
use crate::error::{Error, Result};
use crate::model::{validate_model, EconomyParams, QualityState, SpilloverMatrix};
use crate::spectral;
use crate::structure::{
    adjacency, classify, closure, strongly_connected_components, StructureClass, StructureReport,
};

/// Largest technology count accepted by [`solve_support_system`].
pub const MAX_SUPPORT_N: usize = 20;
/// Above this size only core-generated supports are enumerated.
pub const EXHAUSTIVE_SUPPORT_N: usize = 12;
pub const RESIDUAL_TOL: f64 = 1e-9;

const DAMPING: f64 = 0.5;
const MAX_ITER: usize = 100_000;
const STEP_TOL: f64 = 1e-12;
/// Components below this are treated as a collapse onto a smaller support.
const COLLAPSE_TOL: f64 = 1e-9;

/// A balanced-growth candidate on one surviving set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongRunSolution {
    pub support: Vec<usize>,
    pub stagnant: Vec<usize>,
    /// Relative qualities, summing to one on the support and zero elsewhere.
    pub z_star: Vec<f64>,
    pub shares_inf: Vec<f64>,
    pub growth_rate: f64,
    /// Largest violation of the pairwise balanced-growth equations,
    /// relative to the largest `(F_i z)^p`.
    pub residual: f64,
    /// Growth rate read off the fixed point, `sum_i (D F z)_i` with
    /// `sum z = 1`; agrees with the eigenvalue route in `growth_rate`.
    pub fixed_point_growth: f64,
}

/// Why a candidate support was not accepted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Rejection {
    /// Some member receives no spillover from inside the support, or some
    /// outsider receives one.
    NotClosed,
    NoConvergence {
        iterations: usize,
    },
    Collapsed {
        min_component: f64,
    },
    Residual(f64),
    /// An outsider would attract scientists at the fixed point.
    AttractsOutsider(usize),
    /// The fixed point repels nearby allocations on the support.
    Unstable {
        max_real_part: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportDiagnostic {
    pub support: Vec<usize>,
    pub reason: Rejection,
}

/// Accepted solutions (sorted by descending growth rate) and the
/// non-structural rejections.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportSolutions {
    pub solutions: Vec<LongRunSolution>,
    pub rejected: Vec<SupportDiagnostic>,
}

impl SupportSolutions {
    pub fn is_unique(&self) -> bool {
        self.solutions.len() == 1
    }
}

/// Scientist shares restricted to a support, with negative inflows treated
/// as attracting nobody.
fn support_shares(sub: &DMatrix<f64>, z: &[f64], p: f64) -> Vec<f64> {
    let m = z.len();
    let w: Vec<f64> = (0..m)
        .map(|i| (0..m).map(|j| sub[(i, j)] * z[j]).sum::<f64>().max(0.0))
        .collect();
    shares_from_productivity(&w, p).expect("clamped productivities are nonnegative")
}

/// Reduced simplex flow `z' = v - (sum v) z` on a support with `alpha = 0`.
fn reduced_flow(sub: &DMatrix<f64>, z: &[f64], params: &EconomyParams) -> Vec<f64> {
    let m = z.len();
    let s = support_shares(sub, z, params.share_exponent());
    let v: Vec<f64> = (0..m)
        .map(|i| {
            let inflow: f64 = (0..m).map(|j| sub[(i, j)] * z[j]).sum();
            (s[i] * params.s_total()).powf(params.nu()) * inflow
        })
        .collect();
    let g: f64 = v.iter().sum();
    v.iter().zip(z).map(|(vi, zi)| vi - g * zi).collect()
}

/// Largest real part of the flow's Jacobian on the tangent space of the
/// support simplex, by central differences.
fn tangent_stability(sub: &DMatrix<f64>, z: &[f64], params: &EconomyParams) -> f64 {
    let m = z.len();
    if m < 2 {
        return f64::NEG_INFINITY;
    }
    let h = 1e-6 * z.iter().cloned().fold(f64::INFINITY, f64::min).min(1.0);
    let mut jac = DMatrix::zeros(m - 1, m - 1);
    for b in 0..m - 1 {
        let mut plus = z.to_vec();
        let mut minus = z.to_vec();
        plus[b] += h;
        plus[m - 1] -= h;
        minus[b] -= h;
        minus[m - 1] += h;
        let fp = reduced_flow(sub, &plus, params);
        let fm = reduced_flow(sub, &minus, params);
        for a in 0..m - 1 {
            jac[(a, b)] = (fp[a] - fm[a]) / (2.0 * h);
        }
    }
    spectral::max_real_part(
        &jac.complex_eigenvalues()
            .iter()
            .copied()
            .collect::<Vec<_>>(),
    )
}

/// Damped nonlinear power iteration `z <- (1 - l) z + l s(z)`. Retries with
/// smaller damping when the default does not settle.
fn fixed_point(sub: &DMatrix<f64>, p: f64) -> std::result::Result<Vec<f64>, usize> {
    let m = sub.nrows();
    let mut damping = DAMPING;
    let mut total_iter = 0;
    for _ in 0..4 {
        let mut z = vec![1.0 / m as f64; m];
        for _ in 0..MAX_ITER {
            total_iter += 1;
            let s = support_shares(sub, &z, p);
            let mut step = 0.0f64;
            for i in 0..m {
                let next = (1.0 - damping) * z[i] + damping * s[i];
                step = step.max((next - z[i]).abs());
                z[i] = next;
            }
            if step < STEP_TOL {
                return Ok(z);
            }
        }
        damping *= 0.5;
    }
    Err(total_iter)
}

fn solve_on_support(
    matrix: &SpilloverMatrix,
    params: &EconomyParams,
    support: &[usize],
) -> std::result::Result<LongRunSolution, Rejection> {
    let n = matrix.n();
    let p = params.share_exponent();
    let sub = matrix.submatrix(support);
    let local =
        fixed_point(&sub, p).map_err(|iterations| Rejection::NoConvergence { iterations })?;

    let min_component = local.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_component < COLLAPSE_TOL {
        return Err(Rejection::Collapsed { min_component });
    }
    let mut z = vec![0.0; n];
    for (a, &i) in support.iter().enumerate() {
        z[i] = local[a];
    }
    let inflow = matrix.inflow(&z);
    if let Some(&k) = (0..n)
        .filter(|k| !support.contains(k))
        .collect::<Vec<_>>()
        .iter()
        .find(|&&k| inflow[k] > 0.0)
    {
        return Err(Rejection::AttractsOutsider(k));
    }

    // pairwise residual z_j w_i - z_i w_j with w = (F z)^p, scaled by max w
    let w: Vec<f64> = support
        .iter()
        .map(|&i| inflow[i].max(0.0).powf(p))
        .collect();
    let w_max = w.iter().cloned().fold(0.0, f64::max);
    let mut residual = 0.0f64;
    for a in 0..support.len() {
        for b in a + 1..support.len() {
            let r = (local[b] * w[a] - local[a] * w[b]).abs() / w_max;
            residual = residual.max(r);
        }
    }
    if residual.is_nan() || residual >= RESIDUAL_TOL {
        return Err(Rejection::Residual(residual));
    }

    let max_real_part = tangent_stability(&sub, &local, params);
    let weighted = DMatrix::from_fn(support.len(), support.len(), |a, b| {
        (local[a] * params.s_total()).powf(params.nu()) * sub[(a, b)]
    });
    let growth_rate = if weighted.iter().all(|&x| x >= 0.0) {
        spectral::perron_root(&weighted)
    } else {
        spectral::max_real_part(&spectral::spectrum(&weighted))
    };
    if max_real_part > 1e-6 * growth_rate.abs().max(1.0) {
        return Err(Rejection::Unstable { max_real_part });
    }
    let fixed_point_growth = {
        let dfz: Vec<f64> = (0..support.len())
            .map(|a| {
                (0..support.len())
                    .map(|b| weighted[(a, b)] * local[b])
                    .sum()
            })
            .collect();
        // z sums to one; weighting by z keeps tiny components from
        // amplifying the fixed-point error
        dfz.iter().sum::<f64>()
    };

    let mut shares_inf = vec![0.0; n];
    for (a, &i) in support.iter().enumerate() {
        shares_inf[i] = local[a];
    }
    Ok(LongRunSolution {
        support: support.to_vec(),
        stagnant: (0..n).filter(|k| !support.contains(k)).collect(),
        z_star: z,
        shares_inf,
        growth_rate,
        residual,
        fixed_point_growth,
    })
}

/// Supports that can host a positive fixed point: every member receives a
/// spillover from inside, and no outsider receives one.
fn structurally_closed(adj: &crate::structure::BoolMatrix, support: &[usize]) -> bool {
    let n = adj.nrows();
    let inside = |k: usize| support.contains(&k);
    support
        .iter()
        .all(|&i| support.iter().any(|&j| adj[(i, j)]))
        && (0..n)
            .filter(|&k| !inside(k))
            .all(|k| support.iter().all(|&j| !adj[(k, j)]))
}

fn candidate_supports(matrix: &SpilloverMatrix) -> Vec<Vec<usize>> {
    let n = matrix.n();
    if n <= EXHAUSTIVE_SUPPORT_N {
        return (1u32..(1 << n))
            .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
            .collect();
    }
    // unions of cores together with everything they reach
    let adj = adjacency(matrix);
    let clo = closure(&adj);
    let cores = crate::structure::cores(&adj);
    let reach: Vec<Vec<usize>> = cores
        .iter()
        .map(|core| {
            (0..n)
                .filter(|&i| core.contains(&i) || core.iter().any(|&j| clo[(i, j)]))
                .collect()
        })
        .collect();
    let mut out: Vec<Vec<usize>> = Vec::new();
    let k = cores.len().min(20);
    for mask in 1u32..(1 << k) {
        let mut set: Vec<usize> = (0..k)
            .filter(|c| mask & (1 << c) != 0)
            .flat_map(|c| reach[c].iter().copied())
            .collect();
        set.sort_unstable();
        set.dedup();
        if !out.contains(&set) {
            out.push(set);
        }
    }
    out
}

/// Enumerates candidate surviving sets and solves the balanced-growth
/// system on each. Accepted solutions are sorted by descending growth rate.
pub fn solve_support_system(
    matrix: &SpilloverMatrix,
    params: &EconomyParams,
) -> Result<SupportSolutions> {
    let n = matrix.n();
    if n > MAX_SUPPORT_N {
        return Err(Error::Precondition(format!(
            "support enumeration is limited to n <= {MAX_SUPPORT_N}, got {n}"
        )));
    }
    if !matrix.is_nonnegative() {
        let ev = crate::structure::is_eventually_nonnegative(
            matrix,
            crate::structure::EVENTUAL_K_MAX,
            crate::structure::EVENTUAL_TOL,
        );
        if !ev.flag {
            return Err(Error::Precondition(
                "spillover matrix is neither nonnegative nor eventually nonnegative".into(),
            ));
        }
    }
    let adj = adjacency(matrix);
    let mut solutions = Vec::new();
    let mut rejected = Vec::new();
    for support in candidate_supports(matrix) {
        if matrix.is_nonnegative() && !structurally_closed(&adj, &support) {
            continue;
        }
        match solve_on_support(matrix, params, &support) {
            Ok(sol) => solutions.push(sol),
            Err(reason) => rejected.push(SupportDiagnostic { support, reason }),
        }
    }
    solutions.sort_by(|a: &LongRunSolution, b| {
        b.growth_rate
            .total_cmp(&a.growth_rate)
            .then_with(|| a.support.cmp(&b.support))
    });
    Ok(SupportSolutions {
        solutions,
        rejected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Stagnating,
    Linear,
    Polynomial,
    Exponential,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Stagnating => "stagnating",
            Regime::Linear => "linear",
            Regime::Polynomial => "polynomial",
            Regime::Exponential => "exponential",
        })
    }
}

/// Predicted long-run surviving technologies.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum Survivors {
    Determined(Vec<usize>),
    /// Several candidate sets; the realized one depends on initial
    /// conditions and `alpha`.
    DependsOnInitialConditions(Vec<Vec<usize>>),
    /// No balanced-growth set applies or none could be computed.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimePrediction {
    pub regime: Regime,
    pub reason: String,
    pub predicted_survivors: Survivors,
    /// Balanced-growth candidates backing an exponential prediction.
    pub candidates: Vec<LongRunSolution>,
}

/// Index set numbered from 1, e.g. `{1,3}`.
pub fn format_set(set: &[usize]) -> String {
    let items: Vec<String> = set.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", items.join(","))
}

/// Long-run growth regime from the spillover structure.
///
/// Exponential growth needs a core whose induced submatrix has a positive
/// dominant eigenvalue; acyclic structures with spillovers grow
/// polynomially at most and settle to linear growth; no spillovers at all
/// give linear quality growth with rates tending to zero.
pub fn predict_regime(
    report: &StructureReport,
    matrix: &SpilloverMatrix,
    params: &EconomyParams,
) -> RegimePrediction {
    let n = matrix.n();
    if matrix.entries().iter().all(|&x| x == 0.0) {
        return RegimePrediction {
            regime: Regime::Stagnating,
            reason: "no spillovers: every technology grows linearly, growth rates tend to zero"
                .into(),
            predicted_survivors: Survivors::Determined((0..n).collect()),
            candidates: Vec::new(),
        };
    }
    let growing_core = report.cores.iter().find(|core| {
        let sub = matrix.submatrix(core);
        let root = if sub.iter().all(|&x| x >= 0.0) {
            spectral::perron_root(&sub)
        } else {
            spectral::max_real_part(&spectral::spectrum(&sub))
        };
        root > 0.0
    });
    if let Some(core) = growing_core {
        let reason = if report.has(StructureClass::StronglyConnected) {
            format!("strongly connected; core {}", format_set(core))
        } else if core.len() == 1 {
            format!("intra-technology spillover at {}", format_set(core))
        } else {
            format!("circular chain {}", format_set(core))
        };
        let (predicted_survivors, candidates) = match solve_support_system(matrix, params) {
            Ok(sol) => {
                let survivors = match sol.solutions.len() {
                    0 => Survivors::Unresolved,
                    1 => Survivors::Determined(sol.solutions[0].support.clone()),
                    _ => Survivors::DependsOnInitialConditions(
                        sol.solutions.iter().map(|s| s.support.clone()).collect(),
                    ),
                };
                (survivors, sol.solutions)
            }
            Err(_) => (Survivors::Unresolved, Vec::new()),
        };
        return RegimePrediction {
            regime: Regime::Exponential,
            reason,
            predicted_survivors,
            candidates,
        };
    }
    let has_edges = report.adjacency.iter().any(|&b| b);
    if has_edges {
        RegimePrediction {
            regime: Regime::Polynomial,
            reason: "no circular chain: one-way spillovers, at most linear growth in the long run"
                .into(),
            predicted_survivors: Survivors::Unresolved,
            candidates: Vec::new(),
        }
    } else {
        RegimePrediction {
            regime: Regime::Linear,
            reason: "no positive spillovers".into(),
            predicted_survivors: Survivors::Unresolved,
            candidates: Vec::new(),
        }
    }
}

/// Block of a separated structure that keeps growing.
///
/// With a uniform start the block with the largest standalone long-run
/// growth rate wins; with equal nonzero spillovers and a single head-start
/// technology, that technology's block wins.
pub fn block_winner(
    matrix: &SpilloverMatrix,
    params: &EconomyParams,
    q0: &QualityState,
) -> Result<Vec<usize>> {
    let n = matrix.n();
    if q0.n() != n {
        return Err(Error::Dimension(format!(
            "initial state has {} qualities, matrix is {n}x{n}",
            q0.n()
        )));
    }
    if (0..n).any(|i| matrix.get(i, i) != 0.0) {
        return Err(Error::Precondition(
            "block winner needs zero intra-technology spillovers".into(),
        ));
    }
    let report = classify(matrix);
    let blocks = report.weak_components.clone();
    if blocks.len() == 1 {
        return Ok(blocks.into_iter().next().expect("one block"));
    }
    if report.separated_blocks().is_none() {
        return Err(Error::Precondition("structure is not separated".into()));
    }
    let q = q0.q();
    if q.iter().all(|&x| x == q[0]) {
        let mut best: Option<(f64, usize)> = None;
        let mut tie = false;
        for (b, block) in blocks.iter().enumerate() {
            let sub = SpilloverMatrix::new(matrix.submatrix(block))?;
            let rate = solve_support_system(&sub, params)?
                .solutions
                .first()
                .map_or(0.0, |s| s.growth_rate);
            match best {
                Some((r, _)) if (rate - r).abs() <= 1e-12 * r.max(1.0) => tie = true,
                Some((r, _)) if rate < r => {}
                _ => {
                    best = Some((rate, b));
                    tie = false;
                }
            }
        }
        return match best {
            Some((_, b)) if !tie => Ok(blocks[b].clone()),
            _ => Err(Error::Precondition(
                "blocks tie in long-run growth; the winner depends on transients".into(),
            )),
        };
    }
    let nonzero: Vec<f64> = matrix
        .entries()
        .iter()
        .copied()
        .filter(|&x| x != 0.0)
        .collect();
    let equal_weights = nonzero.windows(2).all(|w| w[0] == w[1]);
    let q_max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let leaders: Vec<usize> = (0..n).filter(|&i| q[i] == q_max).collect();
    if equal_weights && leaders.len() == 1 {
        let i0 = leaders[0];
        return Ok(blocks
            .into_iter()
            .find(|b| b.contains(&i0))
            .expect("every index lies in a block"));
    }
    Err(Error::Precondition(
        "need a uniform start, or equal spillovers with a single head-start technology".into(),
    ))
}

/// Scaling found for a technology transition and the run confirming it.
#[derive(Debug, Clone)]
pub struct TransitionConstruction {
    /// Added to the initial quality of every first-cluster technology.
    pub phi1: f64,
    /// Multiplies every spillover inside the last cluster.
    pub phi2: f64,
    pub clusters: Vec<Vec<usize>>,
    pub matrix: SpilloverMatrix,
    pub q0: QualityState,
    pub trajectory: Trajectory,
    /// Changes of the majority cluster; leader sets hold cluster indices.
    pub events: Vec<TransitionEvent>,
}

/// Transition events on cluster-aggregated shares, with leader sets of
/// cluster indices.
pub fn cluster_transitions(traj: &Trajectory, clusters: &[Vec<usize>]) -> Vec<TransitionEvent> {
    let mut aggregated = traj.clone();
    aggregated.shares = traj
        .shares
        .iter()
        .map(|s| clusters.iter().map(|c| cluster_share(s, c)).collect())
        .collect();
    detect_transitions(&aggregated, 0.5, DEFAULT_HOLD)
}

/// Strongly connected clusters chained by one-way links, upstream first.
pub fn transition_clusters(matrix: &SpilloverMatrix) -> Result<Vec<Vec<usize>>> {
    let adj = adjacency(matrix);
    let comps = strongly_connected_components(&adj);
    if comps.len() < 2 {
        return Err(Error::Precondition(
            "transition needs at least two strongly connected clusters".into(),
        ));
    }
    if let Some(c) = comps.iter().find(|c| c.len() == 1 && !adj[(c[0], c[0])]) {
        return Err(Error::Precondition(format!(
            "technology {} is not part of a strongly connected cluster",
            c[0] + 1
        )));
    }
    for pair in comps.windows(2) {
        let linked = pair[1]
            .iter()
            .any(|&i| pair[0].iter().any(|&j| adj[(i, j)]));
        if !linked {
            return Err(Error::Precondition(format!(
                "no one-way link from cluster {} to cluster {}",
                format_set(&pair[0]),
                format_set(&pair[1])
            )));
        }
    }
    Ok(comps)
}

fn cluster_share(shares: &[f64], cluster: &[usize]) -> f64 {
    cluster.iter().map(|&i| shares[i]).sum()
}

/// Searches `phi1, phi2` over powers of two until a simulation shows the
/// first cluster holding most scientists at `t = 0` and the last cluster
/// holding all but `1e-3` of them at the horizon.
pub fn construct_transition(
    matrix: &SpilloverMatrix,
    params: &EconomyParams,
    base_q0: &QualityState,
    horizon: f64,
    max_exponent: u32,
) -> Result<TransitionConstruction> {
    let clusters = transition_clusters(matrix)?;
    let first = clusters.first().expect("two clusters").clone();
    let last = clusters.last().expect("two clusters").clone();
    let n = matrix.n();
    let mut pairs: Vec<(u32, u32)> = (0..=max_exponent)
        .flat_map(|a| (0..=max_exponent).map(move |b| (a, b)))
        .collect();
    pairs.sort_by_key(|&(a, b)| (a + b, b));

    let mut tried = 0;
    let mut best: Option<(f64, f64, f64)> = None;
    for (k1, k2) in pairs {
        let phi1 = f64::powi(2.0, k1 as i32);
        let phi2 = f64::powi(2.0, k2 as i32);
        let scaled = SpilloverMatrix::new(DMatrix::from_fn(n, n, |i, j| {
            let f = matrix.get(i, j);
            if last.contains(&i) && last.contains(&j) {
                f * phi2
            } else {
                f
            }
        }))?;
        let q: Vec<f64> = base_q0
            .q()
            .iter()
            .enumerate()
            .map(|(i, &x)| if first.contains(&i) { x + phi1 } else { x })
            .collect();
        let q0 = QualityState::new(base_q0.t, q)?;
        let initial = compute_shares(&scaled, &q0, params)?;
        if cluster_share(&initial.shares, &first) <= 0.5 {
            continue;
        }
        tried += 1;
        let model = validate_model(&scaled, params, &q0)?;
        let trajectory = simulate(&model, horizon, DEFAULT_STEP, 10)?;
        let terminal = cluster_share(trajectory.shares.last().expect("samples"), &last);
        if terminal > 1.0 - 1e-3 {
            let events = cluster_transitions(&trajectory, &clusters);
            return Ok(TransitionConstruction {
                phi1,
                phi2,
                clusters,
                matrix: scaled,
                q0,
                trajectory,
                events,
            });
        }
        if best.is_none_or(|(_, _, s)| terminal > s) {
            best = Some((phi1, phi2, terminal));
        }
    }
    Err(Error::SearchExhausted {
        tried,
        detail: match best {
            Some((a, b, s)) => format!(
                "best candidate phi1 = {a}, phi2 = {b} left the last cluster with share {s:.6}"
            ),
            None => "no candidate gave the first cluster a majority at t = 0".into(),
        },
    })
}
