use num_traits::Num;
use serde::{Deserialize, Serialize};

use super::MiningError;
use crate::scalar::Scalar;
use crate::table::Table;

/// Least-squares line through the origin, `out(x) = w * x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel<T> {
    pub w: T,
    /// Input and target column names when fitted from a table.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

/// `w = Σxy / Σx²`, computed in `T` without intermediate rounding beyond
/// what `T` itself does.
pub fn regression_fit<T: Num + Copy>(pairs: &[(T, T)]) -> Result<RegressionModel<T>, MiningError> {
    let (sxy, sxx) = pairs
        .iter()
        .fold((T::zero(), T::zero()), |(sxy, sxx), &(x, y)| (sxy + x * y, sxx + x * x));
    if sxx == T::zero() {
        return Err(MiningError::Fit("all inputs are zero".into()));
    }
    Ok(RegressionModel { w: sxy / sxx, input: None, target: None })
}

/// Fits `target ≈ w * input` over a table. Text cells holding numbers (such
/// as account codes) are read as numbers.
pub fn regression_fit_table<F: Scalar>(
    table: &Table<F>,
    input: &str,
    target: &str,
) -> Result<RegressionModel<F>, MiningError> {
    let xi = table.column_index(input).ok_or_else(|| MiningError::MissingAttribute(input.to_string()))?;
    let yi = table.column_index(target).ok_or_else(|| MiningError::MissingAttribute(target.to_string()))?;
    let pairs = table
        .rows()
        .iter()
        .map(|r| {
            let x = r[xi].coerce_num().ok_or(MiningError::AttributeKind { name: input.to_string(), expected: "numeric" })?;
            let y = r[yi].coerce_num().ok_or(MiningError::AttributeKind { name: target.to_string(), expected: "numeric" })?;
            Ok((x, y))
        })
        .collect::<Result<Vec<_>, MiningError>>()?;
    let mut m = regression_fit(&pairs)?;
    if !m.w.is_finite() {
        return Err(MiningError::Fit("coefficient is not finite".into()));
    }
    m.input = Some(input.to_string());
    m.target = Some(target.to_string());
    Ok(m)
}

pub fn regression_score<T: Num + Copy>(model: &RegressionModel<T>, x: T) -> T {
    model.w * x
}

/// Sum of squared residuals of `w` on `pairs`.
pub fn sse<T: Num + Copy>(w: T, pairs: &[(T, T)]) -> T {
    pairs.iter().fold(T::zero(), |acc, &(x, y)| {
        let r = y - w * x;
        acc + r * r
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Cell, Column};
    use num_rational::Rational64;
    use proptest::prelude::*;

    #[test]
    fn single_point_and_exact_line() {
        assert_eq!(regression_fit(&[(1.0, 2.0)]).unwrap().w, 2.0);
        assert_eq!(regression_fit(&[(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)]).unwrap().w, 2.0);
    }

    #[test]
    fn two_point_example_minimises_sse() {
        let pairs = [(1.0f64, 1.0), (2.0, 1.0)];
        let w = regression_fit(&pairs).unwrap().w;
        assert!((w - 0.6).abs() < 1e-15);
        // grid search over [0, 2]
        let best = (0..=2000)
            .map(|i| i as f64 / 1000.0)
            .min_by(|a, b| sse(*a, &pairs).partial_cmp(&sse(*b, &pairs)).unwrap())
            .unwrap();
        assert!((best - 0.6).abs() < 1e-9);
    }

    #[test]
    fn exact_rational_fit() {
        let r = |n| Rational64::from_integer(n);
        let m = regression_fit(&[(r(1), r(1)), (r(2), r(1))]).unwrap();
        assert_eq!(m.w, Rational64::new(3, 5));
        assert_eq!(regression_score(&m, r(5)), r(3));
    }

    #[test]
    fn zero_inputs_fail() {
        assert!(regression_fit(&[(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(regression_fit::<f64>(&[]).is_err());
    }

    #[test]
    fn scoring() {
        let m = RegressionModel { w: 2.0, input: None, target: None };
        assert_eq!(regression_score(&m, 3.0), 6.0);
        assert_eq!(regression_score(&RegressionModel { w: -7.5, input: None, target: None }, 0.0), 0.0);
    }

    #[test]
    fn table_fit_reads_numeric_codes() {
        let mut t = Table::new(vec![Column::categorical("GL"), Column::numeric("AMT")]).unwrap();
        t.push_row(vec![Cell::text("10"), Cell::Num(20.0)]).unwrap();
        t.push_row(vec![Cell::text("20"), Cell::Num(40.0)]).unwrap();
        let m = regression_fit_table(&t, "GL", "AMT").unwrap();
        assert_eq!(m.w, 2.0);
        assert_eq!(m.input.as_deref(), Some("GL"));
        t.push_row(vec![Cell::text("x"), Cell::Num(1.0)]).unwrap();
        assert!(regression_fit_table(&t, "GL", "AMT").is_err());
    }

    proptest! {
        #[test]
        fn first_order_condition_and_local_minimum(
            pairs in prop::collection::vec((-100f64..100.0, -100f64..100.0), 1..60)
                .prop_filter("some x nonzero", |p| p.iter().any(|(x, _)| x.abs() > 1e-3)),
        ) {
            let w = regression_fit(&pairs).unwrap().w;
            let foc: f64 = pairs.iter().map(|(x, y)| x * (y - w * x)).sum();
            let scale: f64 = pairs.iter().map(|(x, y)| (x * y).abs() + x * x * w.abs()).sum::<f64>().max(1.0);
            prop_assert!(foc.abs() <= 1e-9 * scale);
            prop_assert!(sse(w, &pairs) <= sse(w + 1e-3, &pairs));
            prop_assert!(sse(w, &pairs) <= sse(w - 1e-3, &pairs));
        }
    }
}
