use serde::{Deserialize, Serialize};

use crate::features::ExplicitFeatures;
use crate::model::FeatureMode;
use crate::nn::Mlp;

/// Relative importance of each classifier input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub names: Vec<String>,
    pub importance: Vec<f64>,
}

/// Names of the final classifier's inputs under `mode`, in input order.
pub fn input_names(mode: FeatureMode) -> Vec<String> {
    let mut names = Vec::new();
    if mode.uses_titles() {
        names.push("s_t".to_owned());
    }
    if mode.uses_contents() {
        names.push("s_c".to_owned());
    }
    if mode.uses_explicit() {
        names.extend(ExplicitFeatures::NAMES.iter().map(|s| s.to_string()));
    }
    names
}

/// Garson's algorithm on a one-hidden-layer network. `input_weights` is
/// `hidden × inputs` and `output_weights` holds one weight per hidden unit.
/// `c_jh = |W_hj| · |v_h|`, normalized over inputs per hidden unit and
/// averaged over hidden units. A hidden unit whose contributions are all
/// zero spreads evenly.
pub fn garson(input_weights: &ndarray::Array2<f64>, output_weights: &[f64]) -> Vec<f64> {
    let (hidden, inputs) = input_weights.dim();
    assert_eq!(
        hidden,
        output_weights.len(),
        "one output weight per hidden unit"
    );
    let mut ri = vec![0.0; inputs];
    if inputs == 0 || hidden == 0 {
        return ri;
    }
    for (h, row) in input_weights.rows().into_iter().enumerate() {
        let v = output_weights[h].abs();
        let c: Vec<f64> = row.iter().map(|w| w.abs() * v).collect();
        let total: f64 = c.iter().sum();
        for (j, cj) in c.iter().enumerate() {
            ri[j] += if total > 0.0 {
                cj / total
            } else {
                1.0 / inputs as f64
            };
        }
    }
    for r in &mut ri {
        *r /= hidden as f64;
    }
    ri
}

/// Importance of the classifier inputs toward the positive-class output.
pub fn garson_importance(classifier: &Mlp, mode: FeatureMode) -> ImportanceReport {
    let positive = classifier.output.weight.row(0).to_vec();
    ImportanceReport {
        names: input_names(mode),
        importance: garson(&classifier.hidden.weight, &positive),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Head};
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_input() {
        assert_eq!(garson(&array![[0.3], [-2.0]], &[1.0, 0.5]), vec![1.0]);
    }

    #[test]
    fn symmetric_inputs() {
        assert_eq!(
            garson(&array![[1.0, -1.0], [2.0, 2.0]], &[0.5, -3.0]),
            vec![0.5, 0.5]
        );
    }

    #[test]
    fn hand_computed_single_hidden_unit() {
        assert_eq!(
            garson(&array![[2.0, 1.0, -1.0]], &[1.0]),
            vec![0.5, 0.25, 0.25]
        );
    }

    #[test]
    fn dead_hidden_unit_spreads_evenly() {
        let ri = garson(&array![[0.0, 0.0], [3.0, 1.0]], &[1.0, 1.0]);
        assert_eq!(ri, vec![0.5 * (0.5 + 0.75), 0.5 * (0.5 + 0.25)]);
    }

    #[test]
    fn names_follow_the_mode() {
        assert_eq!(input_names(FeatureMode::All).len(), 11);
        assert_eq!(input_names(FeatureMode::NoExplicit), vec!["s_t", "s_c"]);
        assert_eq!(input_names(FeatureMode::NoTitles)[0], "s_c");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mlp = Mlp::new(&mut rng, 11, 2, Activation::Identity, Head::Raw);
        let report = garson_importance(&mlp, FeatureMode::All);
        assert_eq!(report.importance.len(), 11);
        assert!((report.importance.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    fn weights() -> impl Strategy<Value = (Array2<f64>, Vec<f64>)> {
        (1usize..12, 1usize..8).prop_flat_map(|(inputs, hidden)| {
            (
                prop::collection::vec(-5.0f64..5.0, inputs * hidden)
                    .prop_map(move |w| Array2::from_shape_vec((hidden, inputs), w).unwrap()),
                prop::collection::vec(-5.0f64..5.0, hidden),
            )
        })
    }

    proptest! {
        #[test]
        fn sums_to_one_and_ignores_scale((w, v) in weights(), factor in 0.01f64..100.0) {
            let ri = garson(&w, &v);
            prop_assert!(ri.iter().all(|&r| r >= 0.0));
            prop_assert!((ri.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let scaled_v: Vec<f64> = v.iter().map(|x| x * factor).collect();
            let scaled = garson(&(&w * factor), &scaled_v);
            for (a, b) in ri.iter().zip(&scaled) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
