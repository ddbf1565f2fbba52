use super::{GbdtError, GbdtModel, Result};

/// Largest feature count for which exact subset enumeration is attempted.
const MAX_SHAP_FEATURES: usize = 20;

/// Total split gain per feature, in the model's feature order. Features never
/// split on report exactly 0.
pub fn feature_importance(model: &GbdtModel) -> Vec<f64> {
    let mut importance = vec![0.0; model.n_features()];
    for tree in &model.trees {
        tree.for_each_split(&mut |feature, _, gain| importance[feature] += gain);
    }
    importance
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapValues {
    /// One attribution per feature, in log-odds.
    pub values: Vec<f64>,
    /// Mean raw score over the background set.
    pub base_value: f64,
}

impl ShapValues {
    pub fn total(&self) -> f64 {
        self.base_value + self.values.iter().sum::<f64>()
    }
}

/// Exact interventional Shapley values in raw-score space.
///
/// The coalition value of a feature subset `S` is the background-averaged raw
/// score of the hybrid row that takes features in `S` from `record` and the
/// rest from the background row. All `2^M` subsets are enumerated.
pub fn shap_values(
    model: &GbdtModel,
    record: &[f64],
    background: &[Vec<f64>],
) -> Result<ShapValues> {
    let m = model.n_features();
    if record.len() != m {
        return Err(GbdtError::Arity {
            expected: m,
            got: record.len(),
        });
    }
    if background.is_empty() {
        return Err(GbdtError::Domain("background set is empty".into()));
    }
    if m > MAX_SHAP_FEATURES {
        return Err(GbdtError::Domain(format!(
            "exact enumeration supports at most {MAX_SHAP_FEATURES} features, model has {m}"
        )));
    }
    if let Some(row) = background.iter().find(|b| b.len() != m) {
        return Err(GbdtError::Arity {
            expected: m,
            got: row.len(),
        });
    }

    let subsets = 1usize << m;
    let mut coalition = vec![0.0; subsets];
    let mut hybrid = vec![0.0; m];
    for bg in background {
        for (mask, slot) in coalition.iter_mut().enumerate() {
            for j in 0..m {
                hybrid[j] = if mask >> j & 1 == 1 { record[j] } else { bg[j] };
            }
            *slot += model.raw_score_unchecked(&hybrid);
        }
    }
    let n_bg = background.len() as f64;
    for v in &mut coalition {
        *v /= n_bg;
    }

    // weight(s) = s!(M-s-1)!/M! = 1 / (M * C(M-1, s))
    let weights: Vec<f64> = (0..m)
        .map(|s| 1.0 / (m as f64 * binomial(m - 1, s)))
        .collect();
    let mut values = vec![0.0; m];
    for (i, phi) in values.iter_mut().enumerate() {
        let bit = 1usize << i;
        for mask in 0..subsets {
            if mask & bit != 0 {
                continue;
            }
            let size = mask.count_ones() as usize;
            *phi += weights[size] * (coalition[mask | bit] - coalition[mask]);
        }
    }
    Ok(ShapValues {
        values,
        base_value: coalition[0],
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::{GbdtParams, TreeNode};

    fn model_with(trees: Vec<TreeNode>, m: usize) -> GbdtModel {
        GbdtModel {
            trees,
            learning_rate: 0.5,
            base_score: -1.0,
            feature_names: (0..m).map(|i| format!("f{i}")).collect(),
            params: GbdtParams::default(),
            loss_history: vec![],
        }
    }

    fn stump(feature: usize, threshold: f64, gain: f64, lo: f64, hi: f64) -> TreeNode {
        TreeNode::Split {
            feature,
            threshold,
            gain,
            left: Box::new(TreeNode::Leaf { value: lo }),
            right: Box::new(TreeNode::Leaf { value: hi }),
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(9, 0), 1.0);
        assert_eq!(binomial(9, 4), 126.0);
        assert_eq!(binomial(9, 9), 1.0);
    }

    #[test]
    fn single_stump_importance() {
        let model = model_with(vec![stump(3, 1.0, 2.5, 0.0, 1.0)], 10);
        let imp = feature_importance(&model);
        assert_eq!(imp[3], 2.5);
        assert_eq!(imp.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn zero_tree_model_has_zero_attribution() {
        let model = model_with(vec![], 4);
        let s = shap_values(&model, &[1.0, 2.0, 3.0, 4.0], &[vec![0.0; 4]]).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
        assert_eq!(s.base_value, -1.0);
    }

    #[test]
    fn stump_attribution_is_score_difference() {
        // record right of threshold, all background left of it
        let model = model_with(vec![stump(2, 0.0, 1.0, -2.0, 3.0)], 5);
        let record = [9.0, 9.0, 1.0, 9.0, 9.0];
        let background: Vec<Vec<f64>> = (0..6)
            .map(|i| vec![i as f64, 0.0, -1.0 - i as f64, 0.0, 0.0])
            .collect();
        let s = shap_values(&model, &record, &background).unwrap();
        let diff = 0.5 * (3.0 - (-2.0));
        assert!((s.values[2] - diff).abs() < 1e-12);
        for (j, v) in s.values.iter().enumerate() {
            if j != 2 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn empty_background_is_domain_error() {
        let model = model_with(vec![], 2);
        assert!(matches!(
            shap_values(&model, &[0.0, 0.0], &[]),
            Err(GbdtError::Domain(_))
        ));
    }
}
