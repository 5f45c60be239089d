//! Estimation and prediction error measures.
//!
//! `nmse` follows the normalized form `n ||yhat - y||^2 / (||yhat||_1 ||y||_1)`
//! literally. Its denominator depends on the predictions, so it is not
//! monotone in prediction quality; report it next to `amse`.

use ndarray::{Array1, ArrayView1};

use crate::error::{MtflError, Result};
use crate::model::{TaskDataset, WeightMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvaluationResult {
    pub l21_error: Option<f64>,
    pub nmse: Option<f64>,
    pub amse: Option<f64>,
}

/// `sum_j ||(estimated - truth)^j||_2`.
pub fn l21_error(estimated: &WeightMatrix, truth: &WeightMatrix) -> Result<f64> {
    if estimated.d() != truth.d() || estimated.m() != truth.m() {
        return Err(MtflError::Dimension(format!(
            "cannot compare {}x{} with {}x{}",
            estimated.d(),
            estimated.m(),
            truth.d(),
            truth.m()
        )));
    }
    let diff = estimated.as_array() - truth.as_array();
    Ok(diff
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .sum())
}

fn check_lengths(predicted: ArrayView1<f64>, reference: ArrayView1<f64>) -> Result<()> {
    if predicted.len() != reference.len() {
        return Err(MtflError::Dimension(format!(
            "predicted has {} entries, reference has {}",
            predicted.len(),
            reference.len()
        )));
    }
    Ok(())
}

/// `n ||predicted - reference||^2 / (||predicted||_1 ||reference||_1)`.
pub fn nmse(predicted: ArrayView1<f64>, reference: ArrayView1<f64>, n: usize) -> Result<f64> {
    check_lengths(predicted, reference)?;
    let p1: f64 = predicted.iter().map(|v| v.abs()).sum();
    let r1: f64 = reference.iter().map(|v| v.abs()).sum();
    if p1 == 0.0 || r1 == 0.0 {
        return Err(MtflError::Numerical(format!(
            "nMSE undefined: l1 norm of predictions is {p1}, of reference is {r1}"
        )));
    }
    let diff = &predicted - &reference;
    Ok(n as f64 * diff.dot(&diff) / (p1 * r1))
}

/// `||predicted - reference||_2 / ||reference||_2`.
pub fn amse(predicted: ArrayView1<f64>, reference: ArrayView1<f64>) -> Result<f64> {
    check_lengths(predicted, reference)?;
    let ref_norm = reference.dot(&reference).sqrt();
    if ref_norm == 0.0 {
        return Err(MtflError::Numerical("aMSE undefined: reference has zero norm".into()));
    }
    let diff = &predicted - &reference;
    Ok(diff.dot(&diff).sqrt() / ref_norm)
}

/// nMSE and aMSE of `w` on `data`, with responses stacked in task order.
pub fn evaluate_predictions(data: &TaskDataset, w: &WeightMatrix) -> Result<EvaluationResult> {
    let predicted = data.predict(w)?;
    let reference = data.stacked_responses();
    Ok(EvaluationResult {
        l21_error: None,
        nmse: Some(nmse(predicted.view(), reference.view(), reference.len())?),
        amse: Some(amse(predicted.view(), reference.view())?),
    })
}

/// Per-task `(nmse, amse)` for diagnostics.
pub fn per_task_errors(data: &TaskDataset, w: &WeightMatrix) -> Result<Vec<(f64, f64)>> {
    data.check_weights(w)?;
    data.tasks()
        .iter()
        .enumerate()
        .map(|(i, task)| {
            let p: Array1<f64> = task.x.dot(&w.column(i));
            Ok((
                nmse(p.view(), task.y.view(), task.n())?,
                amse(p.view(), task.y.view())?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn l21_by_hand() {
        let truth = WeightMatrix::from_array(array![[1.0, 1.0], [0.0, 0.0]]).unwrap();
        assert_eq!(l21_error(&truth, &truth).unwrap(), 0.0);
        let est = WeightMatrix::from_array(array![[1.0, 1.0], [3.0, 4.0]]).unwrap();
        assert_eq!(l21_error(&est, &truth).unwrap(), 5.0);
        assert!(l21_error(&est, &WeightMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn nmse_scalar() {
        assert_eq!(nmse(array![2.0].view(), array![1.0].view(), 1).unwrap(), 0.5);
        let y = array![1.0, -2.0, 3.0];
        assert_eq!(nmse(y.view(), y.view(), 3).unwrap(), 0.0);
    }

    #[test]
    fn nmse_zero_denominator() {
        let err = nmse(array![0.0, 0.0].view(), array![1.0, 2.0].view(), 2).unwrap_err();
        assert!(err.to_string().contains("l1 norm of predictions is 0"));
    }

    #[test]
    fn amse_cases() {
        let y = array![1.0, -2.0, 2.0];
        assert_eq!(amse(y.view(), y.view()).unwrap(), 0.0);
        assert_eq!(amse((&y * 2.0).view(), y.view()).unwrap(), 1.0);
        assert!(amse(y.view(), array![0.0, 0.0, 0.0].view()).is_err());
        assert!(amse(y.view(), array![1.0].view()).is_err());
    }

    proptest! {
        #[test]
        fn l21_is_a_metric(a in prop::collection::vec(-5.0f64..5.0, 6),
                           b in prop::collection::vec(-5.0f64..5.0, 6),
                           c in prop::collection::vec(-5.0f64..5.0, 6)) {
            let mk = |v: &Vec<f64>| WeightMatrix::from_array(
                ndarray::Array2::from_shape_vec((3, 2), v.clone()).unwrap()).unwrap();
            let (a, b, c) = (mk(&a), mk(&b), mk(&c));
            let ab = l21_error(&a, &b).unwrap();
            prop_assert!((ab - l21_error(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!(ab <= l21_error(&a, &c).unwrap() + l21_error(&c, &b).unwrap() + 1e-12);
        }

        #[test]
        fn amse_rotation_invariant(p in prop::collection::vec(-5.0f64..5.0, 2),
                                   r in prop::collection::vec(0.5f64..5.0, 2),
                                   angle in 0.0..std::f64::consts::TAU) {
            let rot = |v: &Vec<f64>| array![
                angle.cos() * v[0] - angle.sin() * v[1],
                angle.sin() * v[0] + angle.cos() * v[1]
            ];
            let base = amse(Array1::from(p.clone()).view(), Array1::from(r.clone()).view()).unwrap();
            let turned = amse(rot(&p).view(), rot(&r).view()).unwrap();
            prop_assert!((base - turned).abs() < 1e-10 * (1.0 + base));
        }
    }
}
