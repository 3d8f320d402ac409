//! Test-time adaptation of the semantic spaces.
//!
//! Every class space is translated by a learnable vector `v_k`. Because the
//! translation is uniform, the best match and its neighborhood do not move,
//! so the shifted local-center score of view `g` is the unshifted score plus
//! `<g, v_k>`. One gradient step on the entropy of the mean prediction over
//! the most confident views updates all `v_k`; the original view is then
//! classified against the shifted spaces. Shifts start at zero for every
//! episode.

use serde::{Deserialize, Serialize};

use crate::classifier::{argmax, ClassCatalog, Prediction};
use crate::embedding::{dot_f64, EmbeddingSet};
use crate::error::{Error, Result};
use crate::metrics::{MetricConfig, MetricKind};

pub const DEFAULT_TEMPERATURE: f64 = 100.0;
pub const DEFAULT_SELECTION_RATIO: f64 = 0.1;
pub const DEFAULT_LEARNING_RATE: f64 = 5e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TtaConfig {
    /// Logit scale applied to similarities before the softmax.
    pub temperature: f64,
    /// Fraction of views kept for the marginal, in `(0, 1]`.
    pub selection_ratio: f64,
    pub learning_rate: f64,
}

impl Default for TtaConfig {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            selection_ratio: DEFAULT_SELECTION_RATIO,
            learning_rate: DEFAULT_LEARNING_RATE,
        }
    }
}

impl TtaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid("temperature", "must be positive and finite"));
        }
        if !(self.selection_ratio > 0.0 && self.selection_ratio <= 1.0) {
            return Err(Error::invalid("selection_ratio", "must lie in (0, 1]"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(
                "learning_rate",
                "must be non-negative and finite",
            ));
        }
        Ok(())
    }
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Number of views kept for a given view count and ratio: `max(1, floor(ratio * m))`.
pub fn selection_count(views: usize, ratio: f64) -> usize {
    ((ratio * views as f64).floor() as usize).clamp(1, views.max(1))
}

/// Indices of the lowest-entropy rows (ties to the lower index), in that order.
pub fn select_confident(rows: &[Vec<f64>], ratio: f64) -> Vec<usize> {
    let mut order: Vec<(usize, f64)> = rows.iter().map(|p| entropy(p)).enumerate().collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    order
        .into_iter()
        .take(selection_count(rows.len(), ratio))
        .map(|(i, _)| i)
        .collect()
}

fn local_center_metric(catalog: &ClassCatalog) -> MetricConfig {
    MetricConfig {
        kind: MetricKind::LocalCenter,
        neighborhood_n: catalog.metric().neighborhood_n,
        subspace_dims: None,
        renormalize: false,
    }
}

/// Unshifted local-center similarities, `M x K`.
pub fn base_scores(views: &EmbeddingSet, catalog: &ClassCatalog) -> Result<Vec<Vec<f64>>> {
    if views.dim() != catalog.dim() {
        return Err(Error::DimensionMismatch {
            expected: catalog.dim(),
            actual: views.dim(),
        });
    }
    let metric = local_center_metric(catalog);
    views
        .iter()
        .map(|g| {
            catalog
                .spaces()
                .iter()
                .map(|s| s.score(g, &metric))
                .collect()
        })
        .collect()
}

fn check_shifts(shifts: &[Vec<f64>], classes: usize, dim: usize) -> Result<()> {
    if shifts.len() != classes {
        return Err(Error::DimensionMismatch {
            expected: classes,
            actual: shifts.len(),
        });
    }
    if let Some(bad) = shifts.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    Ok(())
}

fn shifted_logits(
    base: &[Vec<f64>],
    views: &EmbeddingSet,
    shifts: &[Vec<f64>],
    temperature: f64,
) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> = base
        .iter()
        .zip(views.iter())
        .map(|(row, g)| {
            row.iter()
                .zip(shifts)
                .map(|(&s, v)| temperature * (s + dot_f64(g.as_slice(), v)))
                .collect()
        })
        .collect();
    if rows.iter().flatten().any(|z| !z.is_finite()) {
        return Err(Error::NumericalOverflow("logits"));
    }
    Ok(rows)
}

/// Per-view class probabilities `softmax(tau * <g_i, c_k(g_i) + v_k>)`.
pub fn view_scores(
    views: &EmbeddingSet,
    catalog: &ClassCatalog,
    shifts: &[Vec<f64>],
    temperature: f64,
) -> Result<Vec<Vec<f64>>> {
    check_shifts(shifts, catalog.len(), catalog.dim())?;
    let base = base_scores(views, catalog)?;
    let logits = shifted_logits(&base, views, shifts, temperature)?;
    Ok(logits.iter().map(|z| softmax(z)).collect())
}

/// State of one adaptation episode.
#[derive(Clone, Debug)]
pub struct TtaEpisode {
    /// `views[0]` is the original image, the rest augmentations.
    pub views: EmbeddingSet,
    pub selected: Vec<usize>,
    /// One shift vector per class.
    pub shifts: Vec<Vec<f64>>,
    pub temperature: f64,
    pub learning_rate: f64,
    base: Vec<Vec<f64>>,
}

impl TtaEpisode {
    /// Scores the views against the unshifted spaces and picks the confident ones.
    pub fn new(views: EmbeddingSet, catalog: &ClassCatalog, config: &TtaConfig) -> Result<Self> {
        config.validate()?;
        if views.is_empty() {
            return Err(Error::EmptySet);
        }
        let base = base_scores(&views, catalog)?;
        let shifts = vec![vec![0.0; catalog.dim()]; catalog.len()];
        let logits = shifted_logits(&base, &views, &shifts, config.temperature)?;
        let rows: Vec<Vec<f64>> = logits.iter().map(|z| softmax(z)).collect();
        let selected = select_confident(&rows, config.selection_ratio);
        Ok(Self {
            views,
            selected,
            shifts,
            temperature: config.temperature,
            learning_rate: config.learning_rate,
            base,
        })
    }

    pub fn base(&self) -> &[Vec<f64>] {
        &self.base
    }

    pub fn logits(&self, shifts: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        shifted_logits(&self.base, &self.views, shifts, self.temperature)
    }

    pub fn probabilities(&self, shifts: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(self.logits(shifts)?.iter().map(|z| softmax(z)).collect())
    }

    /// Mean probability vector over the selected views.
    pub fn marginal(&self, shifts: &[Vec<f64>]) -> Result<Vec<f64>> {
        let rows = self.probabilities(shifts)?;
        let classes = self.shifts.len();
        let mut mean = vec![0.0; classes];
        for &i in &self.selected {
            for (m, p) in mean.iter_mut().zip(&rows[i]) {
                *m += p;
            }
        }
        let inv = 1.0 / self.selected.len() as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        Ok(mean)
    }

    /// Entropy of the marginal at the given shifts (the adaptation loss).
    pub fn loss(&self, shifts: &[Vec<f64>]) -> Result<f64> {
        Ok(entropy(&self.marginal(shifts)?))
    }

    /// Analytic gradient of [`loss`](Self::loss) with respect to every shift.
    ///
    /// With `a_k = -(ln pbar_k + 1)`, the chain rule through the softmax gives
    /// `dL/dv_j = (tau / m) * sum_i p_ij (a_j - sum_k a_k p_ik) g_i`.
    pub fn gradient(&self, shifts: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if self.selected.is_empty() {
            return Err(Error::invalid("selected", "no views selected"));
        }
        let rows = self.probabilities(shifts)?;
        let classes = shifts.len();
        let m = self.selected.len() as f64;
        let mut marginal = vec![0.0; classes];
        for &i in &self.selected {
            for (acc, p) in marginal.iter_mut().zip(&rows[i]) {
                *acc += p / m;
            }
        }
        let a: Vec<f64> = marginal
            .iter()
            .map(|&p| if p > 0.0 { -(p.ln() + 1.0) } else { 0.0 })
            .collect();
        let dim = self.views.dim();
        let mut grad = vec![vec![0.0; dim]; classes];
        for &i in &self.selected {
            let p = &rows[i];
            let mix: f64 = a.iter().zip(p).map(|(ak, pk)| ak * pk).sum();
            let g = self.views.items()[i].as_slice();
            for (j, grad_j) in grad.iter_mut().enumerate() {
                let coeff = self.temperature / m * p[j] * (a[j] - mix);
                if coeff != 0.0 {
                    for (acc, &x) in grad_j.iter_mut().zip(g) {
                        *acc += coeff * f64::from(x);
                    }
                }
            }
        }
        if grad.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NumericalOverflow("entropy gradient"));
        }
        Ok(grad)
    }
}

/// One gradient-descent step on the marginal entropy.
pub fn adapt_step(episode: &mut TtaEpisode) -> Result<()> {
    let grad = episode.gradient(&episode.shifts)?;
    let lr = episode.learning_rate;
    for (v, g) in episode.shifts.iter_mut().zip(grad) {
        for (x, d) in v.iter_mut().zip(g) {
            *x -= lr * d;
        }
    }
    Ok(())
}

/// Classifies the original view against the shifted spaces.
pub fn predict_adapted(episode: &TtaEpisode) -> Prediction {
    let g = episode.views.items()[0].as_slice();
    let scores: Vec<f64> = episode.base[0]
        .iter()
        .zip(&episode.shifts)
        .map(|(&s, v)| s + dot_f64(g, v))
        .collect();
    Prediction {
        class_id: argmax(&scores),
        scores,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub baseline: usize,
    pub adapted: usize,
    pub selected: Vec<usize>,
    pub entropy_before: f64,
    pub entropy_after: f64,
    pub scores: Vec<f64>,
}

/// Builds an episode, takes one step and predicts.
pub fn run_episode(
    views: EmbeddingSet,
    catalog: &ClassCatalog,
    config: &TtaConfig,
) -> Result<EpisodeOutcome> {
    let mut episode = TtaEpisode::new(views, catalog, config)?;
    let baseline = argmax(&episode.base[0]);
    let entropy_before = episode.loss(&episode.shifts)?;
    adapt_step(&mut episode)?;
    let entropy_after = episode.loss(&episode.shifts)?;
    let prediction = predict_adapted(&episode);
    Ok(EpisodeOutcome {
        baseline,
        adapted: prediction.class_id,
        selected: episode.selected.clone(),
        entropy_before,
        entropy_after,
        scores: prediction.scores,
    })
}

/// Ground-truth class carried by an episode's first label (`original:<k>`), if any.
pub fn episode_label(views: &EmbeddingSet) -> Option<usize> {
    views
        .label(0)?
        .strip_prefix("original:")
        .and_then(|k| k.trim().parse().ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, 1000.0, -1000.0]);
        assert_eq!(p[0], 0.5);
        assert_eq!(p[2], 0.0);
        assert!((softmax(&[0.3, -2.0, 1.1]).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(softmax(&[42.0]), vec![1.0]);
    }

    #[test]
    fn entropy_bounds() {
        assert_eq!(entropy(&[1.0, 0.0, 0.0]), 0.0);
        assert!((entropy(&[0.5, 0.5]) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn selection() {
        let rows = vec![
            vec![0.5, 0.5],
            vec![0.9, 0.1],
            vec![1.0, 0.0],
            vec![0.6, 0.4],
        ];
        assert_eq!(select_confident(&rows, 0.5), vec![2, 1]);
        assert_eq!(select_confident(&rows, 0.1), vec![2]);
        let same = vec![vec![0.3, 0.7]; 8];
        assert_eq!(select_confident(&same, 0.25), vec![0, 1]);
        assert_eq!(selection_count(64, 0.1), 6);
        assert_eq!(selection_count(3, 0.1), 1);
        assert_eq!(selection_count(5, 1.0), 5);
    }

    #[test]
    fn config_validation() {
        assert!(TtaConfig::default().validate().is_ok());
        let bad = TtaConfig {
            selection_ratio: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TtaConfig {
            temperature: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn episode_labels() {
        let views = EmbeddingSet::from_rows(
            1,
            vec![vec![1.0], vec![1.0]],
            Some(vec!["original:3".into(), "augmented".into()]),
        )
        .unwrap();
        assert_eq!(episode_label(&views), Some(3));
    }
}
