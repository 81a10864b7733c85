//! Reference systems for the judgment task.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetItem, Label};
use crate::error::{Error, Result};

/// All length-`n` substrings over chars, without padding.
pub fn char_ngrams(s: &str, n: usize) -> HashSet<String> {
    assert!(n >= 1, "n-gram size must be positive");
    let chars: Vec<char> = s.chars().collect();
    if chars.len() < n {
        return HashSet::new();
    }
    chars.windows(n).map(|w| w.iter().collect()).collect()
}

/// |a ∩ b| / |a ∪ b|, with two empty sets counting as identical.
pub fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

pub const NUM_FEATURES: usize = 4;
pub const NUM_CLASSES: usize = 3;

/// `[ld, jaccard(bigrams), jaccard(trigrams), 1]`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn from_pair(lemma: &str, term: &str, distance: usize) -> Self {
        let jac2 = jaccard(&char_ngrams(lemma, 2), &char_ngrams(term, 2));
        let jac3 = jaccard(&char_ngrams(lemma, 3), &char_ngrams(term, 3));
        FeatureVector([distance as f64, jac2, jac3, 1.0])
    }

    pub fn from_item(item: &DatasetItem) -> Self {
        Self::from_pair(&item.lemma, &item.term, item.distance)
    }
}

pub fn predict_random<R: Rng + ?Sized>(rng: &mut R) -> Label {
    Label::ALL[rng.random_range(0..3)]
}

/// `yes` for distance two or less, `no` otherwise.
pub fn predict_ld_threshold(item: &DatasetItem) -> Label {
    if item.distance <= 2 {
        Label::Yes
    } else {
        Label::No
    }
}

pub fn predict_majority(_item: &DatasetItem) -> Label {
    Label::No
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub l2: f64,
    /// Stop once the largest gradient component falls below this.
    pub tolerance: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.1,
            max_iterations: 5000,
            l2: 1e-4,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations: usize,
    pub converged: bool,
    pub final_loss: f64,
    pub train_size: usize,
}

/// Multinomial logistic regression over standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    /// classes × features, class order yes, inflected, no.
    pub weights: [[f64; NUM_FEATURES]; NUM_CLASSES],
    /// Per-feature mean and scale; the bias column keeps (0, 1).
    pub mean: [f64; NUM_FEATURES],
    pub scale: [f64; NUM_FEATURES],
    pub hyperparams: Hyperparams,
    pub meta: TrainingMeta,
}

pub type Weights = [[f64; NUM_FEATURES]; NUM_CLASSES];

pub fn softmax(logits: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.map(|z| (z - max).exp());
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

fn logits(w: &Weights, x: &[f64; NUM_FEATURES]) -> [f64; NUM_CLASSES] {
    let mut z = [0.0; NUM_CLASSES];
    for (zc, row) in z.iter_mut().zip(w) {
        *zc = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
    z
}

/// Mean cross-entropy plus `l2/2 · ‖W‖²` over the non-bias weights.
pub fn loss(w: &Weights, xs: &[[f64; NUM_FEATURES]], ys: &[usize], l2: f64) -> f64 {
    let ce: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| -softmax(&logits(w, x))[y].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / xs.len() as f64;
    let reg: f64 = w
        .iter()
        .map(|row| row[..NUM_FEATURES - 1].iter().map(|v| v * v).sum::<f64>())
        .sum();
    ce + 0.5 * l2 * reg
}

/// Analytic gradient of [`loss`].
pub fn gradient(w: &Weights, xs: &[[f64; NUM_FEATURES]], ys: &[usize], l2: f64) -> Weights {
    let mut g = [[0.0; NUM_FEATURES]; NUM_CLASSES];
    let n = xs.len() as f64;
    for (x, &y) in xs.iter().zip(ys) {
        let p = softmax(&logits(w, x));
        for c in 0..NUM_CLASSES {
            let err = p[c] - if c == y { 1.0 } else { 0.0 };
            for f in 0..NUM_FEATURES {
                g[c][f] += err * x[f] / n;
            }
        }
    }
    for c in 0..NUM_CLASSES {
        for f in 0..NUM_FEATURES - 1 {
            g[c][f] += l2 * w[c][f];
        }
    }
    g
}

fn standardization(xs: &[FeatureVector]) -> ([f64; NUM_FEATURES], [f64; NUM_FEATURES]) {
    let n = xs.len() as f64;
    let mut mean = [0.0; NUM_FEATURES];
    let mut scale = [1.0; NUM_FEATURES];
    for f in 0..NUM_FEATURES - 1 {
        let m = xs.iter().map(|x| x.0[f]).sum::<f64>() / n;
        let var = xs.iter().map(|x| (x.0[f] - m).powi(2)).sum::<f64>() / n;
        mean[f] = m;
        scale[f] = if var > 1e-12 { var.sqrt() } else { 1.0 };
    }
    (mean, scale)
}

impl LogRegModel {
    fn standardize(&self, x: &FeatureVector) -> [f64; NUM_FEATURES] {
        let mut out = x.0;
        for f in 0..NUM_FEATURES {
            out[f] = (out[f] - self.mean[f]) / self.scale[f];
        }
        out
    }

    pub fn probabilities(&self, x: &FeatureVector) -> [f64; NUM_CLASSES] {
        softmax(&logits(&self.weights, &self.standardize(x)))
    }

    /// Argmax class; ties go to the earlier class in yes, inflected, no.
    pub fn predict_features(&self, x: &FeatureVector) -> Label {
        let p = self.probabilities(x);
        let mut best = 0;
        for c in 1..NUM_CLASSES {
            if p[c] > p[best] {
                best = c;
            }
        }
        Label::ALL[best]
    }

    pub fn predict(&self, item: &DatasetItem) -> Label {
        self.predict_features(&FeatureVector::from_item(item))
    }

    /// An equivalent model that takes raw features: the standardization is
    /// folded into the weights.
    pub fn folded(&self) -> LogRegModel {
        let mut w = self.weights;
        for row in &mut w {
            let mut bias = row[NUM_FEATURES - 1];
            for f in 0..NUM_FEATURES - 1 {
                row[f] /= self.scale[f];
                bias -= row[f] * self.mean[f];
            }
            row[NUM_FEATURES - 1] = bias;
        }
        LogRegModel {
            weights: w,
            mean: [0.0; NUM_FEATURES],
            scale: [1.0; NUM_FEATURES],
            ..self.clone()
        }
    }
}

pub fn train_logreg(items: &[DatasetItem], hp: Hyperparams) -> Result<LogRegModel> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for item in items {
        if let Some(l) = item.gold.label() {
            xs.push(FeatureVector::from_item(item));
            ys.push(l.index());
        }
    }
    train_on_features(&xs, &ys, hp)
}

/// Full-batch gradient descent from zero weights.
pub fn train_on_features(
    xs: &[FeatureVector],
    ys: &[usize],
    hp: Hyperparams,
) -> Result<LogRegModel> {
    let classes: HashSet<usize> = ys.iter().copied().collect();
    if classes.len() < 2 {
        return Err(Error::Training(format!(
            "need at least two gold classes, found {}",
            classes.len()
        )));
    }
    let (mean, scale) = standardization(xs);
    let mut model = LogRegModel {
        weights: [[0.0; NUM_FEATURES]; NUM_CLASSES],
        mean,
        scale,
        hyperparams: hp,
        meta: TrainingMeta {
            iterations: 0,
            converged: false,
            final_loss: 0.0,
            train_size: xs.len(),
        },
    };
    let zs: Vec<[f64; NUM_FEATURES]> = xs.iter().map(|x| model.standardize(x)).collect();
    let mut w = model.weights;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < hp.max_iterations {
        let g = gradient(&w, &zs, ys, hp.l2);
        let max_g = g.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_g < hp.tolerance {
            converged = true;
            break;
        }
        for c in 0..NUM_CLASSES {
            for f in 0..NUM_FEATURES {
                w[c][f] -= hp.learning_rate * g[c][f];
            }
        }
        iterations += 1;
    }
    if w.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Training("weights diverged".into()));
    }
    model.weights = w;
    model.meta = TrainingMeta {
        iterations,
        converged,
        final_loss: loss(&w, &zs, ys, hp.l2),
        train_size: xs.len(),
    };
    Ok(model)
}
