//! Market-clearing allocation of scientists and the static side of the
//! labour-intensive sector at a given quality vector.

use crate::error::{Error, Result};
use crate::model::{EconomyParams, QualityState, SpilloverMatrix};

/// Scientist shares `s_i` and head counts `S_i = s_i * S`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationShares {
    pub shares: Vec<f64>,
    pub scientists: Vec<f64>,
}

impl AllocationShares {
    fn from_shares(shares: Vec<f64>, s_total: f64) -> Self {
        let scientists = shares.iter().map(|s| s * s_total).collect();
        Self { shares, scientists }
    }
}

/// Shares proportional to `productivity^exponent`, computed after dividing
/// by the largest productivity so large exponents cannot overflow.
///
/// An all-zero productivity vector yields uniform shares.
pub(crate) fn shares_from_productivity(productivity: &[f64], exponent: f64) -> Result<Vec<f64>> {
    let n = productivity.len();
    let mut max = 0.0f64;
    for (row, &p) in productivity.iter().enumerate() {
        if p < 0.0 {
            return Err(Error::NegativeProductivity { row, value: p });
        }
        if !p.is_finite() {
            return Err(Error::NonFinite(format!(
                "R&D productivity of row {}",
                row + 1
            )));
        }
        max = max.max(p);
    }
    if max == 0.0 {
        return Ok(vec![1.0 / n as f64; n]);
    }
    let weights: Vec<f64> = productivity
        .iter()
        .map(|&p| (p / max).powf(exponent))
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Equilibrium scientist shares at quality vector `q`:
/// `s_i ∝ (F_i q + alpha)^(1/(1-nu))`.
pub fn compute_shares(
    matrix: &SpilloverMatrix,
    q: &QualityState,
    params: &EconomyParams,
) -> Result<AllocationShares> {
    if q.n() != matrix.n() {
        return Err(Error::Dimension(format!(
            "state has {} qualities, matrix is {}x{}",
            q.n(),
            matrix.n(),
            matrix.n()
        )));
    }
    let productivity: Vec<f64> = matrix
        .inflow(q.q())
        .into_iter()
        .map(|x| x + params.alpha())
        .collect();
    let shares = shares_from_productivity(&productivity, params.share_exponent())?;
    Ok(AllocationShares::from_shares(shares, params.s_total()))
}

/// Static equilibrium of the intermediate-goods sector.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketStatics {
    pub wage: f64,
    pub labor: Vec<f64>,
    /// `+inf` where the quality is zero; those indices are listed in
    /// `zero_quality`.
    pub prices: Vec<f64>,
    pub profits: Vec<f64>,
    pub outputs: Vec<f64>,
    pub y_l: f64,
    pub zero_quality: Vec<usize>,
}

/// Wage, labour allocation, prices, profits and output at quality `q`.
pub fn market_statics(q: &QualityState, params: &EconomyParams) -> Result<MarketStatics> {
    let total = q.total();
    if total <= 0.0 {
        return Err(Error::DegenerateEconomy);
    }
    let c = params.c();
    let wage = 0.5 * c * total.sqrt();
    let labor: Vec<f64> = q.q().iter().map(|&x| x / total).collect();
    let mut zero_quality = Vec::new();
    let prices = q
        .q()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if x == 0.0 {
                zero_quality.push(i);
                f64::INFINITY
            } else {
                2.0 * wage / x
            }
        })
        .collect();
    let profits = q.q().iter().map(|&x| c * c / (4.0 * wage) * x).collect();
    let outputs: Vec<f64> = q.q().iter().zip(&labor).map(|(x, l)| x * l).collect();
    let root_sum: f64 = outputs.iter().map(|y| y.sqrt()).sum();
    Ok(MarketStatics {
        wage,
        labor,
        prices,
        profits,
        outputs,
        y_l: root_sum * root_sum,
        zero_quality,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(nu: f64, alpha: f64) -> EconomyParams {
        EconomyParams::new(nu, alpha, 1.0, 2.0).unwrap()
    }

    #[test]
    fn no_spillovers_give_uniform_shares() {
        let f = SpilloverMatrix::zeros(3);
        let q = QualityState::at_zero(vec![5.0, 0.1, 2.0]).unwrap();
        let a = compute_shares(&f, &q, &params(0.5, 1.0)).unwrap();
        assert_eq!(a.shares, vec![1.0 / 3.0; 3]);
        assert!((a.scientists.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn productivity_ratio_two_gives_share_ratio_four() {
        // F_1 q + 1 = 3, F_2 q + 1 = 1.5
        let f = SpilloverMatrix::from_rows(&[vec![0.0, 2.0], vec![0.5, 0.0]]).unwrap();
        let q = QualityState::at_zero(vec![1.0, 1.0]).unwrap();
        let a = compute_shares(&f, &q, &params(0.5, 1.0)).unwrap();
        assert!((a.shares[0] / a.shares[1] - 4.0).abs() < 1e-12);
        assert!((a.shares[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_equal_qualities_share_equally() {
        let f = SpilloverMatrix::homogeneous(4, 0.3).unwrap();
        let q = QualityState::at_zero(vec![2.0; 4]).unwrap();
        let a = compute_shares(&f, &q, &params(0.7, 0.0)).unwrap();
        assert!(a.shares.iter().all(|&s| s == 0.25));
    }

    #[test]
    fn all_zero_productivity_is_uniform() {
        let f = SpilloverMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let q = QualityState::at_zero(vec![1.0, 0.0]).unwrap();
        let a = compute_shares(&f, &q, &params(0.5, 0.0)).unwrap();
        assert_eq!(a.shares, vec![0.5, 0.5]);
    }

    #[test]
    fn negative_productivity_names_the_row() {
        let f = SpilloverMatrix::from_rows(&[vec![0.0, 1.0], vec![-3.0, 0.0]]).unwrap();
        let q = QualityState::at_zero(vec![1.0, 1.0]).unwrap();
        let err = compute_shares(&f, &q, &params(0.5, 1.0)).unwrap_err();
        assert!(matches!(err, Error::NegativeProductivity { row: 1, .. }));
    }

    #[test]
    fn large_exponent_does_not_overflow() {
        let f = SpilloverMatrix::from_rows(&[vec![0.0, 1e200], vec![1e100, 0.0]]).unwrap();
        let q = QualityState::at_zero(vec![1.0, 1.0]).unwrap();
        let a = compute_shares(&f, &q, &params(0.99, 0.0)).unwrap();
        assert!(a.shares.iter().all(|s| s.is_finite()));
        assert_eq!(a.shares[0], 1.0);
    }

    #[test]
    fn statics_for_two_equal_technologies() {
        let q = QualityState::at_zero(vec![1.0, 1.0]).unwrap();
        let m = market_statics(&q, &params(0.5, 1.0)).unwrap();
        assert!((m.wage - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.labor, vec![0.5, 0.5]);
        assert!((m.y_l - 2.0).abs() < 1e-14);
        // l_i = c^2 q_i / (4 w^2) reproduces the same labour demand
        let implied = 4.0 / (4.0 * m.wage * m.wage);
        assert!((implied - 0.5).abs() < 1e-15);
        assert!((m.prices[0] - 2.0 * m.wage).abs() < 1e-15);
        assert!((m.profits[0] - 4.0 / (4.0 * m.wage)).abs() < 1e-15);
    }

    #[test]
    fn statics_single_active_technology() {
        let q = QualityState::at_zero(vec![4.0, 0.0, 0.0]).unwrap();
        let m = market_statics(&q, &params(0.5, 1.0)).unwrap();
        assert_eq!(m.labor, vec![1.0, 0.0, 0.0]);
        assert!((m.y_l - 4.0).abs() < 1e-14);
        assert_eq!(m.zero_quality, vec![1, 2]);
        assert!(m.prices[1].is_infinite());
    }

    #[test]
    fn statics_reject_zero_economy() {
        let q = QualityState::at_zero(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            market_statics(&q, &params(0.5, 1.0)),
            Err(Error::DegenerateEconomy)
        ));
    }
}
