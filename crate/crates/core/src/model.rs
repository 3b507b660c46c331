//! Domain types shared by every analysis: the spillover matrix, the scalar
//! economy parameters, quality states and the validated model handle.
//!
//! Row convention: entry `(i, j)` of the spillover matrix is the strength of
//! the spillover technology `i` receives from technology `j`, so row `i`
//! multiplied by the quality vector is the spillover inflow of `i`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Square matrix of cross-technology spillovers.
#[derive(Debug, Clone, PartialEq)]
pub struct SpilloverMatrix {
    entries: DMatrix<f64>,
    nonnegative: bool,
}

impl SpilloverMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Dimension(format!(
                "spillover matrix is {}x{}, expected square",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.nrows() == 0 {
            return Err(Error::Dimension("spillover matrix is empty".into()));
        }
        if let Some(pos) = entries.iter().position(|x| !x.is_finite()) {
            let n = entries.nrows();
            // nalgebra storage is column-major
            return Err(Error::NonFinite(format!(
                "spillover matrix entry ({}, {})",
                pos % n + 1,
                pos / n + 1
            )));
        }
        let nonnegative = entries.iter().all(|&x| x >= 0.0);
        Ok(Self {
            entries,
            nonnegative,
        })
    }

    /// Builds a matrix from rows; every row must have the same length as the
    /// number of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Dimension(format!(
                "row {} has {} entries, expected {}",
                i + 1,
                r.len(),
                n
            )));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_row_major(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} matrix entries for n = {}, got {}",
                n * n,
                n,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(DMatrix::zeros(n, n)).expect("zero matrix is valid")
    }

    /// All entries equal to `f`.
    pub fn homogeneous(n: usize, f: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(n, n, f))
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.n();
        (0..n * n).map(|k| self.entries[(k / n, k % n)]).collect()
    }

    /// Spillover inflow of every technology, `F q`.
    pub fn inflow(&self, q: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| self.entries[(i, j)] * q[j]).sum())
            .collect()
    }

    /// Principal submatrix on the given indices (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.entries[(idx[a], idx[b])])
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.entries * factor)
    }
}

/// Scalar parameters of the R&D sector and demand side.
///
/// `nu` is the curvature of R&D in scientists, `alpha` the autonomous
/// progress term, `s_total` the scientist supply and `c` the demand scale of
/// the inverse demand function. The CES exponent of the labour-intensive
/// aggregate is fixed at 1/2 and is not a parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EconomyParams {
    nu: f64,
    alpha: f64,
    s_total: f64,
    c: f64,
}

impl EconomyParams {
    pub fn new(nu: f64, alpha: f64, s_total: f64, c: f64) -> Result<Self> {
        for (name, value) in [("nu", nu), ("alpha", alpha), ("s_total", s_total), ("c", c)] {
            if !value.is_finite() {
                return Err(Error::NonFinite(format!("parameter `{name}`")));
            }
        }
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::Parameter {
                name: "nu",
                value: nu,
                expected: "0 < nu < 1",
            });
        }
        if alpha < 0.0 {
            return Err(Error::Parameter {
                name: "alpha",
                value: alpha,
                expected: "alpha >= 0",
            });
        }
        if s_total <= 0.0 {
            return Err(Error::Parameter {
                name: "s_total",
                value: s_total,
                expected: "s_total > 0",
            });
        }
        if c <= 0.0 {
            return Err(Error::Parameter {
                name: "c",
                value: c,
                expected: "c > 0",
            });
        }
        Ok(Self {
            nu,
            alpha,
            s_total,
            c,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn s_total(&self) -> f64 {
        self.s_total
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Exponent `1 / (1 - nu)` of the share formula.
    pub fn share_exponent(&self) -> f64 {
        1.0 / (1.0 - self.nu)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.nu, alpha, self.s_total, self.c)
    }
}

/// Technology qualities at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityState {
    pub t: f64,
    q: Vec<f64>,
}

impl QualityState {
    pub fn new(t: f64, q: Vec<f64>) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::NonFinite("state time".into()));
        }
        for (i, &x) in q.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite(format!("quality q_{}", i + 1)));
            }
            if x < 0.0 {
                return Err(Error::NegativeQuality { index: i, value: x });
            }
        }
        Ok(Self { t, q })
    }

    pub fn at_zero(q: Vec<f64>) -> Result<Self> {
        Self::new(0.0, q)
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn total(&self) -> f64 {
        self.q.iter().sum()
    }
}

/// Non-fatal findings recorded while validating a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationWarning {
    /// With `alpha = 0`, these technologies receive no positive spillover and
    /// can never change quality.
    PermanentlyInert(Vec<usize>),
}

impl std::fmt::Display for ValidationWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ValidationWarning::PermanentlyInert(idx) => {
                let items: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
                write!(
                    f,
                    "technologies {{{}}} receive no spillovers and alpha = 0; they never improve",
                    items.join(",")
                )
            }
        }
    }
}

/// A validated bundle of spillover matrix, parameters and initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    matrix: SpilloverMatrix,
    params: EconomyParams,
    initial: QualityState,
    warnings: Vec<ValidationWarning>,
}

impl Model {
    pub fn matrix(&self) -> &SpilloverMatrix {
        &self.matrix
    }

    pub fn params(&self) -> &EconomyParams {
        &self.params
    }

    pub fn initial(&self) -> &QualityState {
        &self.initial
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.matrix.is_nonnegative()
    }

    pub fn warnings(&self) -> &[ValidationWarning] {
        &self.warnings
    }
}

/// Checks dimensional consistency and bundles the inputs into a [`Model`].
pub fn validate_model(
    matrix: &SpilloverMatrix,
    params: &EconomyParams,
    initial: &QualityState,
) -> Result<Model> {
    if initial.n() != matrix.n() {
        return Err(Error::Dimension(format!(
            "initial state has {} qualities, spillover matrix is {}x{}",
            initial.n(),
            matrix.n(),
            matrix.n()
        )));
    }
    let mut warnings = Vec::new();
    if params.alpha() == 0.0 {
        let inert: Vec<usize> = (0..matrix.n())
            .filter(|&i| (0..matrix.n()).all(|j| matrix.get(i, j) <= 0.0))
            .collect();
        if !inert.is_empty() {
            warnings.push(ValidationWarning::PermanentlyInert(inert));
        }
    }
    Ok(Model {
        matrix: matrix.clone(),
        params: *params,
        initial: initial.clone(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_way() -> SpilloverMatrix {
        SpilloverMatrix::from_rows(&[
            vec![0.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn one_way_example_validates() {
        let params = EconomyParams::new(0.5, 1.0, 1.0, 1.0).unwrap();
        let q0 = QualityState::at_zero(vec![1.0; 4]).unwrap();
        let model = validate_model(&one_way(), &params, &q0).unwrap();
        assert!(model.is_nonnegative());
        assert!(model.warnings().is_empty());
        let again = validate_model(&one_way(), &params, &q0).unwrap();
        assert_eq!(model, again);
    }

    #[test]
    fn non_square_matrix_is_a_dimension_error() {
        let rows = vec![vec![0.0; 4]; 3];
        assert!(matches!(
            SpilloverMatrix::from_rows(&rows),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            SpilloverMatrix::new(DMatrix::zeros(3, 4)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn state_dimension_must_match() {
        let params = EconomyParams::new(0.5, 1.0, 1.0, 1.0).unwrap();
        let q0 = QualityState::at_zero(vec![1.0; 3]).unwrap();
        assert!(matches!(
            validate_model(&one_way(), &params, &q0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn nu_bounds_are_open() {
        for nu in [0.0, 1.0, 1.5, -0.1] {
            assert!(matches!(
                EconomyParams::new(nu, 1.0, 1.0, 1.0),
                Err(Error::Parameter { name: "nu", .. })
            ));
        }
        assert!(EconomyParams::new(0.999, 0.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn other_parameter_ranges() {
        assert!(matches!(
            EconomyParams::new(0.5, -1.0, 1.0, 1.0),
            Err(Error::Parameter { name: "alpha", .. })
        ));
        assert!(matches!(
            EconomyParams::new(0.5, 0.0, 0.0, 1.0),
            Err(Error::Parameter {
                name: "s_total",
                ..
            })
        ));
        assert!(matches!(
            EconomyParams::new(0.5, 0.0, 1.0, 0.0),
            Err(Error::Parameter { name: "c", .. })
        ));
        assert!(matches!(
            EconomyParams::new(f64::NAN, 0.0, 1.0, 1.0),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        let err =
            SpilloverMatrix::from_rows(&[vec![0.0, f64::INFINITY], vec![0.0, 0.0]]).unwrap_err();
        match err {
            Error::NonFinite(msg) => assert!(msg.contains("(1, 2)"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            QualityState::at_zero(vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            QualityState::at_zero(vec![1.0, -1.0]),
            Err(Error::NegativeQuality { index: 1, .. })
        ));
    }

    #[test]
    fn nonnegativity_flag_is_exact() {
        let m = SpilloverMatrix::from_rows(&[vec![0.0, -1e-300], vec![0.0, 0.0]]).unwrap();
        assert!(!m.is_nonnegative());
        let m = SpilloverMatrix::from_rows(&[vec![0.0, -0.0], vec![0.0, 0.0]]).unwrap();
        assert!(m.is_nonnegative());
    }

    #[test]
    fn inert_technologies_warn_when_alpha_is_zero() {
        let f = SpilloverMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let params = EconomyParams::new(0.5, 0.0, 1.0, 1.0).unwrap();
        let q0 = QualityState::at_zero(vec![1.0, 0.0]).unwrap();
        let model = validate_model(&f, &params, &q0).unwrap();
        assert_eq!(
            model.warnings(),
            &[ValidationWarning::PermanentlyInert(vec![1])]
        );
    }

    #[test]
    fn row_major_round_trip() {
        let m = one_way();
        let back = SpilloverMatrix::from_row_major(4, &m.to_row_major()).unwrap();
        assert_eq!(m, back);
        assert_eq!(m.get(1, 2), 1.0);
        assert_eq!(m.inflow(&[1.0, 2.0, 3.0, 4.0]), vec![0.0, 4.0, 1.0, 3.0]);
    }
}
