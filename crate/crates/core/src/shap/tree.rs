use rayon::prelude::*;

use crate::gbdt::{BoostedEnsemble, TreeNode};
use crate::scalar::Scalar;
use crate::{Error, Result};

use super::ShapMatrix;

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Free,
    /// only the explained row satisfies this feature's conditions so far
    X,
    /// only the background row does
    B,
}

/// Coalition weights for a leaf reached with `a` x-only and `b` b-only features.
struct Weights {
    fact: Vec<f64>,
}

impl Weights {
    fn new(max: usize) -> Self {
        let mut fact = vec![1.0; max + 1];
        for i in 1..=max {
            fact[i] = fact[i - 1] * i as f64;
        }
        Weights { fact }
    }

    fn x_side(&self, a: usize, b: usize) -> f64 {
        self.fact[a - 1] * self.fact[b] / self.fact[a + b]
    }

    fn b_side(&self, a: usize, b: usize) -> f64 {
        self.fact[a] * self.fact[b - 1] / self.fact[a + b]
    }
}

struct Walk<'a, T> {
    x: &'a [Option<T>],
    bg: &'a [Option<T>],
    side: Vec<Side>,
    path: Vec<usize>,
    n_x: usize,
    n_b: usize,
    w: &'a Weights,
}

impl<T: Scalar> Walk<'_, T> {
    // A leaf pays v exactly when every x-only feature is in the coalition and
    // no b-only feature is, so its Shapley split has a closed form.
    fn visit(&mut self, node: &TreeNode<T>, phi: &mut [T]) {
        match node {
            TreeNode::Leaf { value } => {
                if self.path.is_empty() {
                    return;
                }
                let (a, b) = (self.n_x, self.n_b);
                for &f in &self.path {
                    match self.side[f] {
                        Side::X => phi[f] = phi[f] + *value * T::of(self.w.x_side(a, b)),
                        Side::B => phi[f] = phi[f] - *value * T::of(self.w.b_side(a, b)),
                        Side::Free => unreachable!(),
                    }
                }
            }
            TreeNode::Split {
                feature_index: f,
                threshold,
                missing_goes_left,
                left,
                right,
            } => {
                let f = *f;
                let x_left = TreeNode::goes_left(self.x[f], *threshold, *missing_goes_left);
                let b_left = TreeNode::goes_left(self.bg[f], *threshold, *missing_goes_left);
                let child = |go_left: bool| if go_left { &**left } else { &**right };
                if x_left == b_left {
                    self.visit(child(x_left), phi);
                    return;
                }
                for (go_left, side) in [(x_left, Side::X), (b_left, Side::B)] {
                    match self.side[f] {
                        Side::Free => {
                            self.side[f] = side;
                            self.path.push(f);
                            self.bump(side, 1);
                            self.visit(child(go_left), phi);
                            self.bump(side, -1);
                            self.path.pop();
                            self.side[f] = Side::Free;
                        }
                        s if s == side => self.visit(child(go_left), phi),
                        _ => {}
                    }
                }
            }
        }
    }

    fn bump(&mut self, side: Side, d: isize) {
        let n = if side == Side::X { &mut self.n_x } else { &mut self.n_b };
        *n = n.checked_add_signed(d).expect("balanced counter");
    }
}

fn check_rows<T>(rows: &[Vec<Option<T>>], width: usize, what: &str) -> Result<()> {
    if let Some(r) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::domain(format!(
            "{what} row has {} features, model expects {width}",
            r.len()
        )));
    }
    Ok(())
}

/// Exact interventional Shapley values in margin units.
pub fn tree_shap<T: Scalar>(
    ensemble: &BoostedEnsemble<T>,
    rows: &[Vec<Option<T>>],
    background: &[Vec<Option<T>>],
) -> Result<ShapMatrix<T>> {
    if background.is_empty() {
        return Err(Error::domain("tree_shap needs at least one background row"));
    }
    let width = ensemble.n_features();
    check_rows(rows, width, "explained")?;
    check_rows(background, width, "background")?;

    let max_depth = ensemble.trees.iter().map(TreeNode::depth).max().unwrap_or(0);
    let weights = Weights::new(max_depth.max(1));
    let n_bg = T::of_usize(background.len());
    let base_value = background
        .iter()
        .map(|b| ensemble.predict_margin(b))
        .collect::<Result<Vec<T>>>()?
        .into_iter()
        .sum::<T>()
        / n_bg;

    let values = rows
        .par_iter()
        .map(|x| {
            let mut phi = vec![T::zero(); width];
            for bg in background {
                let mut walk = Walk {
                    x,
                    bg,
                    side: vec![Side::Free; width],
                    path: Vec::with_capacity(max_depth),
                    n_x: 0,
                    n_b: 0,
                    w: &weights,
                };
                for tree in &ensemble.trees {
                    walk.visit(tree, &mut phi);
                }
            }
            let scale = ensemble.learning_rate / n_bg;
            phi.iter().map(|&p| p * scale).collect()
        })
        .collect();

    Ok(ShapMatrix {
        base_value,
        values,
        feature_names: ensemble.feature_names.clone(),
    })
}
