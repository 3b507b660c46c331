//! Closed-loop R&D dynamics `dq_i/dt = (s_i(q) S)^nu (F_i q + alpha)` with
//! scientist shares re-cleared at every evaluation.
//!
//! The state is integrated as a direction `z = q / sum(q)` on the simplex
//! plus the log-scale `L = ln sum(q)`. With `v_i = q'_i / sum(q)`:
//!
//! ```text
//! v_i = (s_i S)^nu (F_i z + alpha e^{-L})
//! z'  = v - (sum v) z
//! L'  = sum v
//! ```
//!
//! Shares depend on `F q + alpha` only up to scale, so they are evaluated on
//! `F z + alpha e^{-L}`. Every quantity stays O(1) on exponential paths.

use crate::allocation::shares_from_productivity;
use crate::error::{Error, Result};
use crate::model::{EconomyParams, Model, SpilloverMatrix};

/// Default integration step in model time units.
pub const DEFAULT_STEP: f64 = 1e-2;
/// Default debounce for transition detection.
pub const DEFAULT_HOLD: f64 = 0.5;

/// Sampled simulation output.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Quality directions `z = q / sum(q)`.
    pub directions: Vec<Vec<f64>>,
    /// `ln sum(q)` per sample.
    pub log_scale: Vec<f64>,
    pub shares: Vec<Vec<f64>>,
    /// `q'_i / q_i`; `None` where `q_i = 0`.
    pub tech_growth: Vec<Vec<Option<f64>>>,
    /// Growth rate of the labour-intensive aggregate, `sum(q)' / sum(q)`.
    pub sector_growth: Vec<f64>,
    pub s_total: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n(&self) -> usize {
        self.directions.first().map_or(0, Vec::len)
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("non-empty trajectory")
    }

    /// Raw qualities of sample `k`; entries overflow to `inf` on long
    /// exponential runs.
    pub fn qualities(&self, k: usize) -> Vec<f64> {
        let scale = self.log_scale[k].exp();
        self.directions[k].iter().map(|z| z * scale).collect()
    }

    /// Index of the last sample with `t <= time`.
    pub fn index_at(&self, time: f64) -> usize {
        self.times.partition_point(|&t| t <= time).saturating_sub(1)
    }
}

/// Per-sample right-hand side evaluation.
#[derive(Debug, Clone)]
struct FieldEval {
    shares: Vec<f64>,
    /// `q'_i / sum(q)`
    v: Vec<f64>,
}

struct Field<'a> {
    matrix: &'a SpilloverMatrix,
    params: &'a EconomyParams,
}

impl Field<'_> {
    fn eval(&self, z: &[f64], log_scale: f64) -> Result<FieldEval> {
        let alpha = self.params.alpha();
        let damp = if alpha == 0.0 {
            0.0
        } else {
            alpha * (-log_scale).exp()
        };
        let productivity: Vec<f64> = self
            .matrix
            .inflow(z)
            .into_iter()
            .map(|x| x + damp)
            .collect();
        let shares = shares_from_productivity(&productivity, self.params.share_exponent())?;
        let nu = self.params.nu();
        let s_total = self.params.s_total();
        let v = shares
            .iter()
            .zip(&productivity)
            .map(|(s, p)| (s * s_total).powf(nu) * p)
            .collect();
        Ok(FieldEval { shares, v })
    }

    /// Derivative of the packed state `[z..., L]`.
    fn derivative(&self, state: &[f64]) -> Result<Vec<f64>> {
        let n = state.len() - 1;
        let e = self.eval(&state[..n], state[n])?;
        let g: f64 = e.v.iter().sum();
        let mut d: Vec<f64> =
            e.v.iter()
                .zip(&state[..n])
                .map(|(v, z)| v - g * z)
                .collect();
        d.push(g);
        Ok(d)
    }
}

fn axpy(base: &[f64], k: &[f64], h: f64) -> Vec<f64> {
    base.iter().zip(k).map(|(b, d)| b + h * d).collect()
}

fn rk4_step(field: &Field<'_>, state: &[f64], h: f64) -> Result<Vec<f64>> {
    let k1 = field.derivative(state)?;
    let k2 = field.derivative(&axpy(state, &k1, 0.5 * h))?;
    let k3 = field.derivative(&axpy(state, &k2, 0.5 * h))?;
    let k4 = field.derivative(&axpy(state, &k3, h))?;
    Ok((0..state.len())
        .map(|i| state[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn push_sample(traj: &mut Trajectory, field: &Field<'_>, t: f64, state: &[f64]) -> Result<()> {
    let n = state.len() - 1;
    let z = state[..n].to_vec();
    let e = field.eval(&z, state[n])?;
    let tech: Vec<Option<f64>> = z
        .iter()
        .zip(&e.v)
        .map(|(&zi, &vi)| (zi > 0.0).then(|| vi / zi))
        .collect();
    traj.times.push(t);
    traj.sector_growth.push(e.v.iter().sum());
    traj.tech_growth.push(tech);
    traj.shares.push(e.shares);
    traj.directions.push(z);
    traj.log_scale.push(state[n]);
    Ok(())
}

/// Integrates the closed-loop system with classic fixed-step RK4 from the
/// model's initial state to `t_end`, sampling every `sample_every` steps and
/// at the final time.
pub fn simulate(model: &Model, t_end: f64, step: f64, sample_every: usize) -> Result<Trajectory> {
    if t_end.is_nan() || t_end <= 0.0 || !t_end.is_finite() {
        return Err(Error::Precondition(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    if step.is_nan() || step <= 0.0 || !step.is_finite() {
        return Err(Error::Precondition(format!(
            "step must be positive, got {step}"
        )));
    }
    if sample_every == 0 {
        return Err(Error::Precondition(
            "sample_every must be at least 1".into(),
        ));
    }
    let q0 = model.initial().q();
    let total: f64 = q0.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateEconomy);
    }
    let field = Field {
        matrix: model.matrix(),
        params: model.params(),
    };
    let n = model.n();
    let t0 = model.initial().t;
    let mut state: Vec<f64> = q0.iter().map(|q| q / total).collect();
    state.push(total.ln());

    let span = t_end;
    let ratio = span / step;
    let n_steps = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    }
    .max(1);

    let mut traj = Trajectory {
        times: Vec::with_capacity(n_steps / sample_every + 2),
        directions: Vec::new(),
        log_scale: Vec::new(),
        shares: Vec::new(),
        tech_growth: Vec::new(),
        sector_growth: Vec::new(),
        s_total: model.params().s_total(),
    };
    push_sample(&mut traj, &field, t0, &state)?;

    let mut t = t0;
    for k in 1..=n_steps {
        let t_next = if k == n_steps {
            t0 + span
        } else {
            t0 + k as f64 * step
        };
        let next = rk4_step(&field, &state, t_next - t)?;
        if let Some(bad) = next.iter().position(|x| !x.is_finite()) {
            return Err(Error::IntegrationBlowup {
                last_good_time: t,
                detail: format!("state component {bad} became {}", next[bad]),
            });
        }
        state = next;
        // RK4 preserves sum(z) = 1; this only removes rounding drift
        let z = &mut state[..n];
        if z.iter().any(|&x| x < 0.0) {
            z.iter_mut().for_each(|x| *x = x.max(0.0));
        }
        let sum: f64 = z.iter().sum();
        z.iter_mut().for_each(|x| *x /= sum);
        t = t_next;
        if k % sample_every == 0 || k == n_steps {
            push_sample(&mut traj, &field, t, &state)?;
        }
    }
    Ok(traj)
}

/// Growth diagnostics of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthSeries {
    pub tech_growth: Vec<Vec<Option<f64>>>,
    pub sector_growth: Vec<f64>,
    /// Finite-difference check `(L_{k+1} - L_k) / (t_{k+1} - t_k)`, one per
    /// sample interval.
    pub interval_log_growth: Vec<f64>,
}

/// Quality-weighted average of technology growth rates; technologies with
/// undefined rates carry zero weight.
pub fn sector_growth_rate(q: &[f64], growth: &[Option<f64>]) -> f64 {
    let total: f64 = q.iter().sum();
    q.iter()
        .zip(growth)
        .filter_map(|(qi, g)| g.map(|g| g * qi / total))
        .sum()
}

/// Technology and sector growth rates from the analytic vector field plus
/// the interval log-growth check values.
pub fn growth_series(traj: &Trajectory) -> GrowthSeries {
    let sector_growth = traj
        .directions
        .iter()
        .zip(&traj.tech_growth)
        .map(|(z, g)| sector_growth_rate(z, g))
        .collect();
    let interval_log_growth = traj
        .times
        .windows(2)
        .zip(traj.log_scale.windows(2))
        .map(|(t, l)| (l[1] - l[0]) / (t[1] - t[0]))
        .collect();
    GrowthSeries {
        tech_growth: traj.tech_growth.clone(),
        sector_growth,
        interval_log_growth,
    }
}

/// A change of the set of technologies holding most scientists.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TransitionEvent {
    pub time: f64,
    pub old_leaders: Vec<usize>,
    pub new_leaders: Vec<usize>,
}

/// Smallest set of technologies, taken in descending share order (ties by
/// index), whose shares sum to at least `theta`. Returned sorted.
pub fn leader_set(shares: &[f64], theta: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| shares[b].total_cmp(&shares[a]).then(a.cmp(&b)));
    let mut acc = 0.0;
    let mut set = Vec::new();
    for i in order {
        set.push(i);
        acc += shares[i];
        if acc >= theta {
            break;
        }
    }
    set.sort_unstable();
    set
}

/// Leader-set changes that persist for at least `hold` time units.
pub fn detect_transitions(traj: &Trajectory, theta: f64, hold: f64) -> Vec<TransitionEvent> {
    assert!(theta > 0.0 && theta < 1.0, "theta must lie in (0, 1)");
    if traj.is_empty() {
        return Vec::new();
    }
    let leaders: Vec<Vec<usize>> = traj.shares.iter().map(|s| leader_set(s, theta)).collect();
    let t_end = traj.t_end();
    let mut current = leaders[0].clone();
    let mut events = Vec::new();
    let mut k = 1;
    while k < leaders.len() {
        if leaders[k] == current {
            k += 1;
            continue;
        }
        let start = traj.times[k];
        let mut j = k;
        while j < leaders.len() && leaders[j] == leaders[k] {
            j += 1;
        }
        // persistence measured to the next change, or to the end of the run
        let until = if j < leaders.len() {
            traj.times[j]
        } else {
            t_end
        };
        if until - start >= hold {
            events.push(TransitionEvent {
                time: start,
                old_leaders: current.clone(),
                new_leaders: leaders[k].clone(),
            });
            current = leaders[k].clone();
        }
        k = j;
    }
    events
}

/// Trailing-window convergence diagnostics.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Convergence {
    pub converged: bool,
    pub shares_converged: bool,
    pub growth_converged: bool,
    /// Window means.
    pub terminal_shares: Vec<f64>,
    pub terminal_growth: f64,
    /// `max_t ||s(t) - s(t_end)||_inf` over the window.
    pub share_deviation: f64,
    /// `max - min` of the sector growth rate over the window.
    pub growth_spread: f64,
}

/// Checks whether shares and the sector growth rate have settled over the
/// trailing `window`. A window longer than the run uses the whole run.
pub fn detect_convergence(traj: &Trajectory, eps: f64, window: f64) -> Convergence {
    assert!(!traj.is_empty(), "empty trajectory");
    let t_end = traj.t_end();
    let first = traj.times.partition_point(|&t| t < t_end - window);
    let last = traj.len() - 1;
    let s_end = &traj.shares[last];
    let n = s_end.len();
    let mut share_deviation = 0.0f64;
    let mut mean = vec![0.0; n];
    let (mut g_min, mut g_max, mut g_sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for k in first..=last {
        let s = &traj.shares[k];
        for i in 0..n {
            share_deviation = share_deviation.max((s[i] - s_end[i]).abs());
            mean[i] += s[i];
        }
        let g = traj.sector_growth[k];
        g_min = g_min.min(g);
        g_max = g_max.max(g);
        g_sum += g;
    }
    let count = (last - first + 1) as f64;
    mean.iter_mut().for_each(|x| *x /= count);
    let growth_spread = g_max - g_min;
    let shares_converged = share_deviation < eps;
    let growth_converged = growth_spread < eps;
    Convergence {
        converged: shares_converged && growth_converged,
        shares_converged,
        growth_converged,
        terminal_shares: mean,
        terminal_growth: g_sum / count,
        share_deviation,
        growth_spread,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_model, QualityState};

    fn model(rows: &[&[f64]], nu: f64, alpha: f64, q0: &[f64]) -> Model {
        let f = SpilloverMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
            .unwrap();
        let p = EconomyParams::new(nu, alpha, 1.0, 1.0).unwrap();
        let q = QualityState::at_zero(q0.to_vec()).unwrap();
        validate_model(&f, &p, &q).unwrap()
    }

    /// RK4 on raw qualities, independent of the direction/log-scale rewrite.
    fn raw_rk4(m: &Model, t_end: f64, h: f64) -> Vec<f64> {
        let f = m.matrix();
        let p = m.params();
        let rhs = |q: &[f64]| -> Vec<f64> {
            let prod: Vec<f64> = f.inflow(q).iter().map(|x| x + p.alpha()).collect();
            let w: Vec<f64> = prod.iter().map(|x| x.powf(p.share_exponent())).collect();
            let tot: f64 = w.iter().sum();
            prod.iter()
                .zip(&w)
                .map(|(x, wi)| (wi / tot * p.s_total()).powf(p.nu()) * x)
                .collect()
        };
        let mut q = m.initial().q().to_vec();
        let steps = (t_end / h).round() as usize;
        for _ in 0..steps {
            let k1 = rhs(&q);
            let k2 = rhs(&axpy(&q, &k1, h / 2.0));
            let k3 = rhs(&axpy(&q, &k2, h / 2.0));
            let k4 = rhs(&axpy(&q, &k3, h));
            for i in 0..q.len() {
                q[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        q
    }

    #[test]
    fn log_form_matches_raw_integration_on_short_horizon() {
        let m = model(
            &[
                &[0.2, 0.0, 0.0, 1.0],
                &[1.0, 0.0, 1.0, 0.0],
                &[1.0, 0.0, 0.0, 0.0],
                &[1.0, 1.0, 0.0, 0.3],
            ],
            0.4,
            0.7,
            &[1.0, 0.5, 2.0, 0.1],
        );
        let traj = simulate(&m, 3.0, 1e-3, 100).unwrap();
        let raw = raw_rk4(&m, 3.0, 1e-3);
        let q = traj.qualities(traj.len() - 1);
        for (a, b) in q.iter().zip(&raw) {
            assert!((a - b).abs() < 1e-9 * b.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn symmetric_two_cycle_converges_to_closed_form() {
        let m = model(&[&[0.0, 1.0], &[1.0, 0.0]], 0.5, 0.0, &[1.0, 1.0]);
        let traj = simulate(&m, 20.0, DEFAULT_STEP, 10).unwrap();
        let expected = 0.5f64.sqrt();
        for k in 0..traj.len() {
            assert_eq!(traj.shares[k], vec![0.5, 0.5]);
        }
        let last = traj.len() - 1;
        for g in &traj.tech_growth[last] {
            assert!((g.unwrap() - expected).abs() < 1e-4);
        }
        let c = detect_convergence(&traj, 1e-4, 5.0);
        assert!(c.converged);
        assert_eq!(c.terminal_shares, vec![0.5, 0.5]);
    }

    #[test]
    fn no_spillovers_grow_linearly() {
        let m = model(&[&[0.0, 0.0], &[0.0, 0.0]], 0.5, 1.0, &[1.0, 1.0]);
        let traj = simulate(&m, 50.0, DEFAULT_STEP, 100).unwrap();
        let rate = 0.5f64.sqrt();
        for k in 0..traj.len() {
            let t = traj.times[k];
            for q in traj.qualities(k) {
                assert!((q - (1.0 + rate * t)).abs() < 1e-9 * (1.0 + t), "t={t}");
            }
        }
        let last = traj.len() - 1;
        let g = traj.sector_growth[last];
        assert!((g - rate / (1.0 + rate * 50.0)).abs() < 1e-9);
        let c = detect_convergence(&traj, 1e-3, 5.0);
        assert!(c.shares_converged);
        assert_eq!(c.terminal_shares, vec![0.5, 0.5]);
    }

    #[test]
    fn sector_growth_is_weighted_average() {
        let g = sector_growth_rate(&[1.0, 3.0], &[Some(0.2), Some(0.1)]);
        assert!((g - 0.125).abs() < 1e-15);
        let g = sector_growth_rate(&[2.0, 2.0], &[Some(0.3), Some(0.3)]);
        assert!((g - 0.3).abs() < 1e-15);
        // a frozen technology pulls the average below the grower's rate,
        // less so as the grower's weight rises
        let low = sector_growth_rate(&[1.0, 1.0], &[Some(0.4), Some(0.0)]);
        let high = sector_growth_rate(&[99.0, 1.0], &[Some(0.4), Some(0.0)]);
        assert!(low < high && high < 0.4);
        assert!((0.4 - high) < 0.005);
        // undefined rates carry no weight
        let g = sector_growth_rate(&[1.0, 0.0], &[Some(0.5), None]);
        assert_eq!(g, 0.5);
    }

    #[test]
    fn leader_sets() {
        assert_eq!(leader_set(&[0.7, 0.2, 0.1], 0.6), vec![0]);
        assert_eq!(leader_set(&[0.1, 0.35, 0.55], 0.6), vec![1, 2]);
        assert_eq!(leader_set(&[0.25; 4], 0.6), vec![0, 1, 2]);
    }

    #[test]
    fn constant_shares_have_no_transitions() {
        let m = model(&[&[0.0, 1.0], &[1.0, 0.0]], 0.5, 0.0, &[1.0, 1.0]);
        let traj = simulate(&m, 10.0, DEFAULT_STEP, 10).unwrap();
        assert!(detect_transitions(&traj, 0.6, DEFAULT_HOLD).is_empty());
    }

    #[test]
    fn debounce_ignores_short_excursions() {
        let s = |a: f64| vec![a, 1.0 - a];
        let traj = Trajectory {
            times: vec![0.0, 1.0, 1.1, 1.2, 3.0, 4.0],
            directions: vec![vec![0.5, 0.5]; 6],
            log_scale: vec![0.0; 6],
            shares: vec![s(0.9), s(0.9), s(0.1), s(0.9), s(0.1), s(0.1)],
            tech_growth: vec![vec![Some(0.0); 2]; 6],
            sector_growth: vec![0.0; 6],
            s_total: 1.0,
        };
        let ev = detect_transitions(&traj, 0.6, 0.5);
        assert_eq!(
            ev,
            vec![TransitionEvent {
                time: 3.0,
                old_leaders: vec![0],
                new_leaders: vec![1]
            }]
        );
    }

    #[test]
    fn bad_arguments_are_rejected() {
        let m = model(&[&[0.0, 1.0], &[1.0, 0.0]], 0.5, 0.0, &[1.0, 1.0]);
        assert!(matches!(
            simulate(&m, 0.0, 0.1, 1),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            simulate(&m, 1.0, -0.1, 1),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            simulate(&m, 1.0, 0.1, 0),
            Err(Error::Precondition(_))
        ));
        let z = model(&[&[0.0, 1.0], &[1.0, 0.0]], 0.5, 1.0, &[0.0, 0.0]);
        assert!(matches!(
            simulate(&z, 1.0, 0.1, 1),
            Err(Error::DegenerateEconomy)
        ));
    }

    #[test]
    fn final_time_is_hit_exactly() {
        let m = model(&[&[0.0, 1.0], &[1.0, 0.0]], 0.5, 0.0, &[1.0, 1.0]);
        let traj = simulate(&m, 1.05, 0.1, 3).unwrap();
        assert_eq!(traj.t_end(), 1.05);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(traj.times.len(), 5);
    }

    #[test]
    fn zero_quality_growth_is_undefined() {
        let m = model(&[&[0.0, 0.0], &[0.0, 0.0]], 0.5, 0.0, &[1.0, 0.0]);
        let traj = simulate(&m, 1.0, 0.1, 1).unwrap();
        assert_eq!(traj.tech_growth[0][1], None);
        assert_eq!(traj.sector_growth[0], 0.0);
    }
}
