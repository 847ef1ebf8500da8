use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::binning::{FeatureBins, MISSING_BIN};
use super::model::{sigmoid, BoostedEnsemble, TreeNode};
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub num_trees: usize,
    /// Depth 0 grows single-leaf trees.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub l2_lambda: f64,
    pub learning_rate: f64,
    /// Share of columns offered to each tree.
    pub feature_fraction: f64,
    pub max_bins: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            num_trees: 100,
            max_depth: 3,
            min_samples_leaf: 5,
            l2_lambda: 1.0,
            learning_rate: 0.1,
            feature_fraction: 1.0,
            max_bins: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("train config: {m}")));
        if self.num_trees == 0 {
            return bad("num_trees must be positive");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be positive");
        }
        if !(self.l2_lambda > 0.0 && self.l2_lambda.is_finite()) {
            return bad("l2_lambda must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return bad("feature_fraction must be in (0, 1]");
        }
        if !(2..MISSING_BIN as usize).contains(&self.max_bins) {
            return bad("max_bins must be at least 2");
        }
        Ok(())
    }
}

/// Mean logistic loss per boosting round, starting with the base score alone.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace<T> {
    pub losses: Vec<T>,
}

/// `log(1 + e^m) - y m`, computed without overflow.
fn logistic_loss<T: Scalar>(margin: T, y: T) -> T {
    let softplus = margin.max(T::zero()) + (-margin.abs()).exp().ln_1p();
    softplus - y * margin
}

fn mean_loss<T: Scalar>(margins: &[T], ys: &[T]) -> T {
    margins.iter().zip(ys).map(|(&m, &y)| logistic_loss(m, y)).sum::<T>() / T::of_usize(ys.len())
}

fn cmp_cell<T: Scalar>(a: &Option<T>, b: &Option<T>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => x.partial_cmp(y).unwrap_or(Ordering::Equal),
    }
}

struct Split<T> {
    gain: T,
    feature: usize,
    bin: u16,
    missing_left: bool,
}

struct Node {
    rows: Vec<usize>,
}

struct Grower<'a, T> {
    bins: &'a [Vec<u16>],
    binners: &'a [FeatureBins<T>],
    grad: &'a [T],
    hess: &'a [T],
    lambda: T,
    min_leaf: usize,
}

impl<T: Scalar> Grower<'_, T> {
    fn leaf_value(&self, rows: &[usize]) -> T {
        let g: T = rows.iter().map(|&i| self.grad[i]).sum();
        let h: T = rows.iter().map(|&i| self.hess[i]).sum();
        -g / (h + self.lambda)
    }

    fn score(&self, g: T, h: T) -> T {
        g * g / (h + self.lambda)
    }

    /// Best split of `rows` over `features`; ties keep the lowest feature,
    /// then the lowest bin.
    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<Split<T>> {
        let zero = T::zero();
        let g_tot: T = rows.iter().map(|&i| self.grad[i]).sum();
        let h_tot: T = rows.iter().map(|&i| self.hess[i]).sum();
        let parent = self.score(g_tot, h_tot);
        let min_gain = T::of(1e-12);
        let mut best: Option<Split<T>> = None;
        for &f in features {
            let nb = self.binners[f].n_bins();
            if nb < 2 {
                continue;
            }
            let mut hg = vec![zero; nb];
            let mut hh = vec![zero; nb];
            let mut hc = vec![0usize; nb];
            let (mut mg, mut mh, mut mc) = (zero, zero, 0usize);
            for &i in rows {
                let b = self.bins[f][i];
                if b == MISSING_BIN {
                    mg = mg + self.grad[i];
                    mh = mh + self.hess[i];
                    mc += 1;
                } else {
                    let b = b as usize;
                    hg[b] = hg[b] + self.grad[i];
                    hh[b] = hh[b] + self.hess[i];
                    hc[b] += 1;
                }
            }
            let present = rows.len() - mc;
            let (mut lg, mut lh, mut lc) = (zero, zero, 0usize);
            for j in 0..nb - 1 {
                lg = lg + hg[j];
                lh = lh + hh[j];
                lc += hc[j];
                let rc_present = present - lc;
                if lc == 0 || rc_present == 0 {
                    continue;
                }
                let (rg, rh) = (g_tot - mg - lg, h_tot - mh - lh);
                let options: &[bool] = if mc == 0 { &[lc >= rc_present] } else { &[false, true] };
                for &missing_left in options {
                    let (l_g, l_h, l_c, r_g, r_h, r_c) = if missing_left {
                        (lg + mg, lh + mh, lc + mc, rg, rh, rc_present)
                    } else {
                        (lg, lh, lc, rg + mg, rh + mh, rc_present + mc)
                    };
                    if l_c < self.min_leaf || r_c < self.min_leaf {
                        continue;
                    }
                    let gain = self.score(l_g, l_h) + self.score(r_g, r_h) - parent;
                    if gain > min_gain && best.as_ref().is_none_or(|b| gain > b.gain) {
                        best = Some(Split {
                            gain,
                            feature: f,
                            bin: j as u16,
                            missing_left,
                        });
                    }
                }
            }
        }
        best
    }

    /// Level-wise growth; every node at depth `< max_depth` with a positive
    /// gain split is expanded.
    fn grow(&self, rows: Vec<usize>, features: &[usize], max_depth: usize) -> TreeNode<T> {
        // arena of (split info, children) built top-down, assembled bottom-up
        struct Built<T> {
            split: Option<(usize, T, bool, usize, usize)>,
            leaf: T,
        }
        let mut arena: Vec<Built<T>> = Vec::new();
        let mut frontier: Vec<(usize, Node)> = vec![(0, Node { rows })];
        arena.push(Built {
            split: None,
            leaf: T::zero(),
        });
        for depth in 0..=max_depth {
            let mut next = Vec::new();
            for (id, node) in frontier {
                let split = if depth < max_depth {
                    self.best_split(&node.rows, features)
                } else {
                    None
                };
                match split {
                    None => arena[id].leaf = self.leaf_value(&node.rows),
                    Some(s) => {
                        let (l, r): (Vec<usize>, Vec<usize>) = node.rows.iter().partition(|&&i| {
                            let b = self.bins[s.feature][i];
                            if b == MISSING_BIN {
                                s.missing_left
                            } else {
                                b <= s.bin
                            }
                        });
                        let (li, ri) = (arena.len(), arena.len() + 1);
                        arena.push(Built { split: None, leaf: T::zero() });
                        arena.push(Built { split: None, leaf: T::zero() });
                        let threshold = self.binners[s.feature].thresholds[s.bin as usize];
                        arena[id].split = Some((s.feature, threshold, s.missing_left, li, ri));
                        next.push((li, Node { rows: l }));
                        next.push((ri, Node { rows: r }));
                    }
                }
            }
            frontier = next;
            if frontier.is_empty() {
                break;
            }
        }
        fn assemble<T: Scalar>(arena: &[Built<T>], id: usize) -> TreeNode<T> {
            match arena[id].split {
                None => TreeNode::Leaf { value: arena[id].leaf },
                Some((feature_index, threshold, missing_goes_left, l, r)) => TreeNode::Split {
                    feature_index,
                    threshold,
                    missing_goes_left,
                    left: Box::new(assemble(arena, l)),
                    right: Box::new(assemble(arena, r)),
                },
            }
        }
        assemble(&arena, 0)
    }
}

/// Trains a logistic-loss boosted ensemble. See [`fit_with_trace`].
pub fn fit<T: Scalar>(
    rows: &[Vec<Option<T>>],
    labels: &[T],
    feature_names: &[String],
    config: &TrainConfig,
) -> Result<BoostedEnsemble<T>> {
    fit_with_trace(rows, labels, feature_names, config).map(|(m, _)| m)
}

/// Trains and also returns the per-round training loss.
///
/// Rows are put into a canonical order first, so the result does not depend
/// on input row order. Each round fits one tree to the Newton step
/// (`g = p - y`, `h = p (1 - p)`, leaf `-G / (H + lambda)`); if a round would
/// raise the training loss its leaves are halved until it does not.
pub fn fit_with_trace<T: Scalar>(
    rows: &[Vec<Option<T>>],
    labels: &[T],
    feature_names: &[String],
    config: &TrainConfig,
) -> Result<(BoostedEnsemble<T>, FitTrace<T>)> {
    config.validate()?;
    let n_features = feature_names.len();
    if rows.len() < 2 {
        return Err(Error::domain("fit: need at least two rows"));
    }
    if n_features == 0 {
        return Err(Error::domain("fit: no features"));
    }
    if rows.len() != labels.len() {
        return Err(Error::domain(format!("fit: {} rows but {} labels", rows.len(), labels.len())));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n_features) {
        return Err(Error::domain(format!("fit: row width {} != {n_features}", r.len())));
    }
    if rows.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(Error::domain("fit: non-finite feature value (use missing instead)"));
    }
    if labels.iter().any(|y| y.is_nan()) {
        return Err(Error::domain("fit: NaN label"));
    }
    if labels.iter().any(|&y| y != T::zero() && y != T::one()) {
        return Err(Error::domain("fit: labels must be 0 or 1"));
    }
    let n_pos = labels.iter().filter(|&&y| y == T::one()).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::domain("fit: labels contain a single class"));
    }

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        rows[a]
            .iter()
            .zip(&rows[b])
            .map(|(x, y)| cmp_cell(x, y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
            .then_with(|| labels[a].partial_cmp(&labels[b]).unwrap_or(Ordering::Equal))
    });
    let x: Vec<&Vec<Option<T>>> = order.iter().map(|&i| &rows[i]).collect();
    let y: Vec<T> = order.iter().map(|&i| labels[i]).collect();
    let n = y.len();

    let binners: Vec<FeatureBins<T>> = (0..n_features)
        .map(|f| {
            let col: Vec<Option<T>> = x.iter().map(|r| r[f]).collect();
            FeatureBins::from_column(&col, config.max_bins)
        })
        .collect();
    let bins: Vec<Vec<u16>> = (0..n_features)
        .map(|f| x.iter().map(|r| binners[f].bin(r[f])).collect())
        .collect();

    let rate = T::of_usize(n_pos) / T::of_usize(n);
    let base_score = (rate / (T::one() - rate)).ln();
    let lr = T::of(config.learning_rate);
    let mut margins = vec![base_score; n];
    let mut losses = vec![mean_loss(&margins, &y)];
    let mut trees = Vec::with_capacity(config.num_trees);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let k = ((config.feature_fraction * n_features as f64).round() as usize).clamp(1, n_features);
    let mut grad = vec![T::zero(); n];
    let mut hess = vec![T::zero(); n];

    for _ in 0..config.num_trees {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = p - y[i];
            hess[i] = p * (T::one() - p);
        }
        let features: Vec<usize> = if k == n_features {
            (0..n_features).collect()
        } else {
            let mut f = rand::seq::index::sample(&mut rng, n_features, k).into_vec();
            f.sort_unstable();
            f
        };
        let grower = Grower {
            bins: &bins,
            binners: &binners,
            grad: &grad,
            hess: &hess,
            lambda: T::of(config.l2_lambda),
            min_leaf: config.min_samples_leaf,
        };
        let mut tree = grower.grow((0..n).collect(), &features, config.max_depth);

        let prev = *losses.last().expect("initial loss");
        let step: Vec<T> = x.iter().map(|r| tree.leaf_value(r)).collect();
        let mut factor = T::one();
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<T> = margins.iter().zip(&step).map(|(&m, &s)| m + lr * factor * s).collect();
            let loss = mean_loss(&trial, &y);
            if loss <= prev {
                accepted = Some((trial, loss));
                break;
            }
            factor = factor / T::of(2.0);
        }
        match accepted {
            Some((trial, loss)) => {
                if factor != T::one() {
                    tree.scale_leaves(factor);
                }
                margins = trial;
                losses.push(loss);
            }
            None => {
                tree.scale_leaves(T::zero());
                losses.push(prev);
            }
        }
        trees.push(tree);
    }

    let model = BoostedEnsemble {
        base_score,
        learning_rate: lr,
        trees,
        feature_names: feature_names.to_vec(),
    };
    Ok((model, FitTrace { losses }))
}
