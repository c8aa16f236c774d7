//! Layer-wise relevance propagation: modified backpropagation that
//! redistributes an output logit onto the input features,
//! `R_i = sum_j z_ij R_j / sum_i' z_i'j` with `z_ij = w_ij a_i`.

pub mod io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::graph::{ForwardTrace, ModelGraph};
use crate::model::layer::{Layer, LayerKind};
use crate::model::tensor::Tensor;
use crate::scalar::{cast, sign_or_one, Scalar};

/// Stabilizer for proportional redistribution through average pooling and
/// for the z+ denominator; small enough to be invisible next to any real
/// activation, large enough to keep 0/0 finite.
const TINY: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleVariant<T> {
    /// `s_j = R_j / (out_j + eps * sign(out_j))`, denominator includes bias.
    Epsilon(T),
    /// Only positive contributions `z+ = (a_i w_ij)+` redistribute.
    ZPlus,
    /// Structural layers: relevance follows the forward selection pattern.
    Passthrough,
}

/// Per-layer-kind rule assignment.
#[derive(Debug, Clone)]
pub struct LrpRule<T> {
    assignments: BTreeMap<&'static str, RuleVariant<T>>,
}

pub const DEFAULT_EPSILON: f64 = 1e-6;

impl<T: Scalar> LrpRule<T> {
    fn uniform(linear: RuleVariant<T>) -> Self {
        let mut assignments = BTreeMap::new();
        for kind in [
            LayerKind::Dense,
            LayerKind::Conv1d,
            LayerKind::Conv2d,
            LayerKind::DepthwiseConv2d,
        ] {
            assignments.insert(kind.as_str(), linear);
        }
        for kind in [
            LayerKind::Relu,
            LayerKind::MaxPool,
            LayerKind::AvgPool,
            LayerKind::Flatten,
            LayerKind::GlobalAvgPool,
        ] {
            assignments.insert(kind.as_str(), RuleVariant::Passthrough);
        }
        Self { assignments }
    }

    /// LRP-epsilon on every weighted layer.
    pub fn epsilon(eps: T) -> Result<Self> {
        if eps <= T::zero() {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        Ok(Self::uniform(RuleVariant::Epsilon(eps)))
    }

    /// LRP-z+ on every weighted layer.
    pub fn zplus() -> Self {
        Self::uniform(RuleVariant::ZPlus)
    }

    /// Composite assignment: z+ for convolutional layers, epsilon for
    /// dense layers, structural passthrough elsewhere.
    pub fn composite_epsilon_plus(model: &ModelGraph<T>) -> Self {
        let mut rule = Self::uniform(RuleVariant::Epsilon(cast::<T>(DEFAULT_EPSILON)));
        for layer in &model.layers {
            let kind = layer.kind();
            if kind.is_linear() && kind != LayerKind::Dense {
                rule.assignments.insert(kind.as_str(), RuleVariant::ZPlus);
            }
        }
        rule
    }

    pub fn variant_for(&self, kind: LayerKind) -> Result<RuleVariant<T>> {
        self.assignments
            .get(kind.as_str())
            .copied()
            .ok_or_else(|| Error::RuleMissing(kind.as_str().into()))
    }

    /// Overrides the variant for one layer kind.
    pub fn assign(mut self, kind: LayerKind, variant: RuleVariant<T>) -> Self {
        self.assignments.insert(kind.as_str(), variant);
        self
    }
}

/// Which representation a relevance grid lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `1 x L` over waveform samples (R_n).
    Time,
    /// `(K+1) x M` over STDFT bins x frames (R_{k,m}).
    TimeFrequency,
    /// `P x M` over mel filters x frames (R_{p,m}).
    MelTimeFrequency,
}

impl Domain {
    pub fn tag(self) -> u8 {
        match self {
            Domain::Time => 0,
            Domain::TimeFrequency => 1,
            Domain::MelTimeFrequency => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0 => Domain::Time,
            1 => Domain::TimeFrequency,
            2 => Domain::MelTimeFrequency,
            other => return Err(Error::MapFile(format!("unknown domain tag {other}"))),
        })
    }
}

/// Relevance grid in a tagged domain, with the logit it explains.
#[derive(Debug, Clone)]
pub struct RelevanceMap<T> {
    pub domain: Domain,
    pub values: Grid<T>,
    pub class_index: usize,
    pub logit: T,
}

/// Raw result of the backward pass: input-shaped relevance plus the share
/// absorbed by biases and stabilizers instead of reaching the input.
#[derive(Debug, Clone)]
pub struct Explanation<T> {
    pub relevance: Tensor<T>,
    pub class_index: usize,
    pub logit: T,
    pub absorbed: T,
}

impl<T: Scalar> Explanation<T> {
    pub fn absorbed_fraction(&self) -> T {
        if self.logit == T::zero() {
            T::zero()
        } else {
            self.absorbed / self.logit
        }
    }
}

fn stabilized_ratio<T: Scalar>(r: &Tensor<T>, denom: &Tensor<T>, eps: T) -> Tensor<T> {
    let mut s = r.clone();
    for (v, &d) in s.data_mut().iter_mut().zip(denom.data()) {
        *v = *v / (d + eps * sign_or_one(d));
    }
    s
}

/// Redistributes relevance backward through one weighted layer.
fn linear_backward<T: Scalar>(
    layer: &Layer<T>,
    input: &Tensor<T>,
    output: &Tensor<T>,
    relevance: &Tensor<T>,
    variant: RuleVariant<T>,
) -> Result<Tensor<T>> {
    match variant {
        RuleVariant::Epsilon(eps) => {
            // The trace output is the pre-activation including bias; the
            // bias share of each denominator is therefore absorbed.
            let s = stabilized_ratio(relevance, output, eps);
            let back = match layer {
                Layer::Dense(l) => l.vjp_with(&l.weights, &s)?,
                Layer::Conv1d(l) => l.vjp_with(input.shape(), &l.weights, &s)?,
                Layer::Conv2d(l) => l.vjp_with(input.shape(), &l.weights, &s)?,
                Layer::DepthwiseConv2d(l) => l.vjp_with(input.shape(), &l.weights, &s)?,
                _ => unreachable!("linear_backward called on structural layer"),
            };
            input.hadamard(&back)
        }
        RuleVariant::ZPlus => {
            // z+_ij = (a_i w_ij)+ = a+ w+ + a- w-, computed without
            // materializing z: two forward passes over the sign-split
            // parts, then two weighted adjoints.
            let (a_pos, a_neg) = input.split_signs();
            let tiny = cast::<T>(TINY);
            macro_rules! zplus {
                ($l:expr, $vjp:expr) => {{
                    let (w_pos, w_neg) = $l.weights.split_signs();
                    let mut denom = $l.forward_with(&a_pos, &w_pos, None)?;
                    let dn = $l.forward_with(&a_neg, &w_neg, None)?;
                    for (d, &v) in denom.data_mut().iter_mut().zip(dn.data()) {
                        *d += v + tiny;
                    }
                    let mut s = relevance.clone();
                    for (v, &d) in s.data_mut().iter_mut().zip(denom.data()) {
                        *v = *v / d;
                    }
                    let r_pos = a_pos.hadamard(&$vjp(&w_pos, &s)?)?;
                    let r_neg = a_neg.hadamard(&$vjp(&w_neg, &s)?)?;
                    let mut r = r_pos;
                    for (v, &n) in r.data_mut().iter_mut().zip(r_neg.data()) {
                        *v += n;
                    }
                    Ok(r)
                }};
            }
            match layer {
                Layer::Dense(l) => zplus!(l, |w, s| l.vjp_with(w, s)),
                Layer::Conv1d(l) => zplus!(l, |w, s| l.vjp_with(input.shape(), w, s)),
                Layer::Conv2d(l) => zplus!(l, |w, s| l.vjp_with(input.shape(), w, s)),
                Layer::DepthwiseConv2d(l) => {
                    zplus!(l, |w, s| l.vjp_with(input.shape(), w, s))
                }
                _ => unreachable!("linear_backward called on structural layer"),
            }
        }
        RuleVariant::Passthrough => Err(Error::RuleMissing(layer.kind().as_str().into())),
    }
}

/// Relevance through structural layers: identity for relu, reshape for
/// flatten, winner-takes-all for maxpool, proportional for average pools.
fn structural_backward<T: Scalar>(
    layer: &Layer<T>,
    input: &Tensor<T>,
    output: &Tensor<T>,
    relevance: &Tensor<T>,
) -> Result<Tensor<T>> {
    match layer {
        Layer::Relu => Ok(relevance.clone()),
        Layer::Flatten => relevance.reshaped(input.shape().to_vec()),
        Layer::MaxPool(_) => layer.vjp(input, relevance),
        Layer::AvgPool(_) | Layer::GlobalAvgPool => {
            let s = stabilized_ratio(relevance, output, cast::<T>(TINY));
            input.hadamard(&layer.vjp(input, &s)?)
        }
        _ => unreachable!("structural_backward called on weighted layer"),
    }
}

/// Propagates an arbitrary output-relevance vector down to the input.
pub fn lrp_backward_from<T: Scalar>(
    model: &ModelGraph<T>,
    trace: &ForwardTrace<T>,
    output_relevance: Tensor<T>,
    rule: &LrpRule<T>,
) -> Result<Tensor<T>> {
    if trace.activations.len() != model.layers.len() + 1 {
        return Err(Error::shape(
            "trace length",
            format!("{} activations", model.layers.len() + 1),
            trace.activations.len().to_string(),
        ));
    }
    if trace.activations[0].shape() != model.input.shape() {
        return Err(Error::shape(
            "trace input",
            format!("{:?}", model.input.shape()),
            format!("{:?}", trace.activations[0].shape()),
        ));
    }
    if output_relevance.shape() != trace.logits().shape() {
        return Err(Error::shape(
            "output relevance",
            format!("{:?}", trace.logits().shape()),
            format!("{:?}", output_relevance.shape()),
        ));
    }
    let mut relevance = output_relevance;
    for (index, layer) in model.layers.iter().enumerate().rev() {
        let input = trace.layer_input(index);
        let output = trace.layer_output(index);
        relevance = if layer.kind().is_linear() {
            let variant = rule.variant_for(layer.kind())?;
            linear_backward(layer, input, output, &relevance, variant)
        } else {
            structural_backward(layer, input, output, &relevance)
        }
        .map_err(|e| match e {
            err @ Error::RuleMissing(_) => err,
            other => Error::Layer {
                index,
                kind: layer.kind().as_str().into(),
                message: other.to_string(),
            },
        })?;
    }
    Ok(relevance)
}

/// Explains one class logit: initializes output relevance as the raw logit
/// and runs the backward pass.
pub fn lrp_backward<T: Scalar>(
    model: &ModelGraph<T>,
    trace: &ForwardTrace<T>,
    class_index: usize,
    rule: &LrpRule<T>,
) -> Result<Explanation<T>> {
    if class_index >= model.class_count {
        return Err(Error::InvalidArgument(format!(
            "class index {class_index} out of range for {} classes",
            model.class_count
        )));
    }
    let logit = trace.logits().data()[class_index];
    let mut out_rel = Tensor::zeros(trace.logits().shape().to_vec());
    out_rel.data_mut()[class_index] = logit;
    let relevance = lrp_backward_from(model, trace, out_rel, rule)?;
    let absorbed = logit - relevance.sum();
    Ok(Explanation { relevance, class_index, logit, absorbed })
}

/// Shapes an input-domain explanation into a tagged relevance map:
/// waveform inputs become a 1 x L time grid, logmel inputs a P x M grid.
pub fn explanation_to_map<T: Scalar>(
    model: &ModelGraph<T>,
    expl: &Explanation<T>,
) -> Result<RelevanceMap<T>> {
    let shape = expl.relevance.shape();
    let (domain, rows, cols) = match model.input {
        crate::model::graph::InputKind::Waveform { len } => (Domain::Time, 1, len),
        crate::model::graph::InputKind::Logmel { filters, frames } => {
            (Domain::MelTimeFrequency, filters, frames)
        }
    };
    if shape.iter().product::<usize>() != rows * cols {
        return Err(Error::shape(
            "explanation shape",
            format!("{rows}x{cols}"),
            format!("{shape:?}"),
        ));
    }
    Ok(RelevanceMap {
        domain,
        values: Grid::from_vec(rows, cols, expl.relevance.data().to_vec())?,
        class_index: expl.class_index,
        logit: expl.logit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::graph::InputKind;
    use crate::model::layer::{Conv1d, Dense, Padding};
    use crate::model::reference::build_tiny_1d;
    use crate::oracles::dense_epsilon_lrp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_model(weights: Vec<f64>, n_in: usize, n_out: usize) -> ModelGraph<f64> {
        ModelGraph {
            name: "dense-toy".into(),
            input: InputKind::Waveform { len: n_in },
            class_count: n_out,
            layers: vec![
                Layer::Flatten,
                Layer::Dense(Dense {
                    weights: Tensor::new(vec![n_in, n_out], weights).unwrap(),
                    bias: vec![0.0; n_out],
                }),
            ],
        }
    }

    #[test]
    fn single_neuron_proportionality() {
        // y = 2 a1 + 3 a2, a = [1,1] -> R = [2, 3].
        let model = dense_model(vec![2.0, 3.0], 2, 1);
        let input = Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap();
        let trace = model.forward(&input).unwrap();
        let expl =
            lrp_backward(&model, &trace, 0, &LrpRule::epsilon(1e-9).unwrap()).unwrap();
        assert!((expl.relevance.data()[0] - 2.0).abs() < 1e-6);
        assert!((expl.relevance.data()[1] - 3.0).abs() < 1e-6);
        // Exact ratio even with the stabilizer.
        let ratio = expl.relevance.data()[0] / expl.relevance.data()[1];
        assert_eq!(ratio, 2.0 / 3.0);
    }

    #[test]
    fn zplus_routes_everything_to_positive_contribution() {
        // w = [2, -3], a = [1, 1]: all relevance to the first input.
        let model = dense_model(vec![2.0, -3.0], 2, 1);
        let input = Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap();
        let trace = model.forward(&input).unwrap();
        let expl = lrp_backward(&model, &trace, 0, &LrpRule::zplus()).unwrap();
        // The incoming relevance (the logit, -1) lands wholly on input 0.
        assert_eq!(expl.logit, -1.0);
        assert!((expl.relevance.data()[0] - expl.logit).abs() < 1e-9);
        assert_eq!(expl.relevance.data()[1], 0.0);
    }

    #[test]
    fn zplus_yields_nonnegative_maps_for_positive_logits() {
        let model = build_tiny_1d::<f64>(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let input = Tensor::new(
            vec![1, 16000],
            (0..16000).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let trace = model.forward(&input).unwrap();
        let class = trace.predicted_class();
        let logit = trace.logits().data()[class];
        assert!(logit > 0.0, "fixture should produce a positive top logit, got {logit}");
        let expl = lrp_backward(&model, &trace, class, &LrpRule::zplus()).unwrap();
        assert!(expl.relevance.data().iter().all(|&r| r >= 0.0));
    }

    #[test]
    fn conservation_on_random_three_layer_net() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut rand_vec = |n: usize| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let model = ModelGraph {
            name: "threelayer".into(),
            input: InputKind::Waveform { len: 12 },
            class_count: 3,
            layers: vec![
                Layer::Conv1d(Conv1d {
                    weights: Tensor::new(vec![2, 1, 3], rand_vec(6)).unwrap(),
                    bias: vec![0.0; 2],
                    stride: 3,
                    padding: Padding::Valid,
                }),
                Layer::Relu,
                Layer::Flatten,
                Layer::Dense(Dense {
                    weights: Tensor::new(vec![8, 5], rand_vec(40)).unwrap(),
                    bias: vec![0.0; 5],
                }),
                Layer::Relu,
                Layer::Dense(Dense {
                    weights: Tensor::new(vec![5, 3], rand_vec(15)).unwrap(),
                    bias: vec![0.0; 3],
                }),
            ],
        };
        model.validate().unwrap();
        let input = Tensor::new(vec![1, 12], rand_vec(12)).unwrap();
        let trace = model.forward(&input).unwrap();
        let rule = LrpRule::epsilon(1e-9).unwrap();
        for class in 0..3 {
            let expl = lrp_backward(&model, &trace, class, &rule).unwrap();
            let logit = trace.logits().data()[class];
            let total = expl.relevance.sum();
            assert!(
                (total - logit).abs() <= 1e-4 * logit.abs().max(1e-12),
                "class {class}: {total} vs {logit}"
            );
            assert!(expl.absorbed.abs() <= 1e-4 * logit.abs().max(1e-12));
        }
    }

    #[test]
    fn matches_nested_loop_oracle_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let mut rand_vec = |n: usize| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let w1 = rand_vec(6 * 4);
        let w2 = rand_vec(4 * 2);
        let model = ModelGraph {
            name: "twolayer".into(),
            input: InputKind::Waveform { len: 6 },
            class_count: 2,
            layers: vec![
                Layer::Flatten,
                Layer::Dense(Dense {
                    weights: Tensor::new(vec![6, 4], w1.clone()).unwrap(),
                    bias: vec![0.0; 4],
                }),
                Layer::Relu,
                Layer::Dense(Dense {
                    weights: Tensor::new(vec![4, 2], w2.clone()).unwrap(),
                    bias: vec![0.0; 2],
                }),
            ],
        };
        let x = rand_vec(6);
        let input = Tensor::new(vec![1, 6], x.clone()).unwrap();
        let trace = model.forward(&input).unwrap();
        let eps = 1e-7;
        let expl = lrp_backward(&model, &trace, 1, &LrpRule::epsilon(eps).unwrap()).unwrap();

        // Oracle: explicit per-layer redistribution with nested loops.
        let g1 = Grid::from_vec(6, 4, w1).unwrap();
        let g2 = Grid::from_vec(4, 2, w2).unwrap();
        let hidden = trace.layer_input(3).data().to_vec();
        let logits = trace.logits().data();
        let out_rel = vec![0.0, logits[1]];
        let r_hidden = dense_epsilon_lrp(&g2, &hidden, &out_rel, eps);
        // relu passthrough, then the first dense layer.
        let r_input = dense_epsilon_lrp(&g1, &x, &r_hidden, eps);
        assert_eq!(expl.relevance.data(), &r_input[..]);
    }

    #[test]
    fn scale_covariance_of_explained_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let mut rand_vec = |n: usize| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let w = rand_vec(5 * 3);
        let x = rand_vec(5);
        let class = 2usize;
        let c = 3.0;

        let run = |weights: Vec<f64>| {
            let model = dense_model(weights, 5, 3);
            let input = Tensor::new(vec![1, 5], x.clone()).unwrap();
            let trace = model.forward(&input).unwrap();
            lrp_backward(&model, &trace, class, &LrpRule::epsilon(1e-9).unwrap())
                .unwrap()
                .relevance
        };
        let base = run(w.clone());
        let mut scaled_w = w;
        for i in 0..5 {
            scaled_w[i * 3 + class] *= c;
        }
        let scaled = run(scaled_w);
        for (b, s) in base.data().iter().zip(scaled.data()) {
            assert!((c * b - s).abs() <= 1e-4 * s.abs().max(1e-9), "{b} {s}");
        }
    }

    #[test]
    fn composite_assigns_zplus_to_convs_epsilon_to_dense() {
        let model = build_tiny_1d::<f64>(1);
        let rule = LrpRule::composite_epsilon_plus(&model);
        assert!(matches!(rule.variant_for(LayerKind::Conv1d).unwrap(), RuleVariant::ZPlus));
        assert!(matches!(
            rule.variant_for(LayerKind::Dense).unwrap(),
            RuleVariant::Epsilon(_)
        ));
        assert!(matches!(
            rule.variant_for(LayerKind::Relu).unwrap(),
            RuleVariant::Passthrough
        ));

        let dense_only = dense_model(vec![1.0, 2.0], 2, 1);
        let rule = LrpRule::composite_epsilon_plus(&dense_only);
        assert!(matches!(
            rule.variant_for(LayerKind::Dense).unwrap(),
            RuleVariant::Epsilon(_)
        ));
        assert!(matches!(
            rule.variant_for(LayerKind::Conv1d).unwrap(),
            RuleVariant::Epsilon(_)
        ));
    }

    #[test]
    fn composite_maps_are_sparser_than_epsilon_maps() {
        let model = build_tiny_1d::<f64>(11);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let input = Tensor::new(
            vec![1, 16000],
            (0..16000).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let trace = model.forward(&input).unwrap();
        let class = trace.predicted_class();

        let count_above = |r: &Tensor<f64>| {
            let max = r.data().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            r.data().iter().filter(|&&v| v.abs() > 0.01 * max).count()
        };
        let eps_map = lrp_backward(
            &model,
            &trace,
            class,
            &LrpRule::epsilon(DEFAULT_EPSILON).unwrap(),
        )
        .unwrap();
        let composite_map =
            lrp_backward(&model, &trace, class, &LrpRule::composite_epsilon_plus(&model))
                .unwrap();
        assert!(
            count_above(&composite_map.relevance) < count_above(&eps_map.relevance),
            "composite {} vs epsilon {}",
            count_above(&composite_map.relevance),
            count_above(&eps_map.relevance)
        );
    }

    #[test]
    fn missing_rule_and_bad_class_error() {
        let model = dense_model(vec![1.0, 2.0], 2, 1);
        let input = Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap();
        let trace = model.forward(&input).unwrap();
        assert!(lrp_backward(&model, &trace, 5, &LrpRule::zplus()).is_err());

        let broken = LrpRule::zplus().assign(LayerKind::Dense, RuleVariant::Passthrough);
        assert!(matches!(
            lrp_backward(&model, &trace, 0, &broken).unwrap_err(),
            Error::RuleMissing(_)
        ));
    }

    #[test]
    fn map_shaping_follows_input_kind() {
        let model = build_tiny_1d::<f64>(1);
        let input = Tensor::new(vec![1, 16000], vec![0.5; 16000]).unwrap();
        let trace = model.forward(&input).unwrap();
        let expl =
            lrp_backward(&model, &trace, 0, &LrpRule::epsilon(1e-6).unwrap()).unwrap();
        let map = explanation_to_map(&model, &expl).unwrap();
        assert_eq!(map.domain, Domain::Time);
        assert_eq!((map.values.rows(), map.values.cols()), (1, 16000));
        assert_eq!(map.class_index, 0);
    }
}
