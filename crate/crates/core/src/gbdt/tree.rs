use super::model::TrainingSet;
use super::GbdtParams;

/// Relative margin a candidate gain must clear to replace the incumbent, so
/// that floating-point near-ties resolve to the lowest (feature, threshold).
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    /// Raw log-odds contribution before shrinkage.
    Leaf { value: f64 },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Visits every split as `(feature, threshold, gain)` in pre-order.
    pub fn for_each_split(&self, f: &mut impl FnMut(usize, f64, f64)) {
        if let TreeNode::Split {
            feature,
            threshold,
            gain,
            left,
            right,
        } = self
        {
            f(*feature, *threshold, *gain);
            left.for_each_split(f);
            right.for_each_split(f);
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Second-order split gain, `½·[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)]`,
/// clamped at zero.
pub(crate) fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    let gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr));
    gain.max(0.0)
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

const INACTIVE: u32 = u32::MAX;

enum Slot {
    Pending {
        grad: f64,
        hess: f64,
        count: usize,
    },
    Split {
        split: SplitCandidate,
        left: usize,
        right: usize,
    },
    Leaf(usize),
}

/// Per-tree growth state. Rows are routed through an arena of slots; each
/// level scans every feature's presorted order once.
pub(crate) struct TreeBuilder<'a> {
    data: &'a TrainingSet,
    sorted: &'a [Vec<u32>],
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbdtParams,
}

/// Grown tree structure; leaf values are filled in by the caller.
pub(crate) struct GrownTree {
    slots: Vec<Slot>,
    /// Rows belonging to each leaf, indexed by leaf id.
    pub leaf_rows: Vec<Vec<u32>>,
    /// `(sum_grad, sum_hess)` per leaf.
    pub leaf_stats: Vec<(f64, f64)>,
}

impl GrownTree {
    pub fn into_node(self, leaf_values: &[f64]) -> TreeNode {
        fn build(slots: &[Slot], idx: usize, values: &[f64]) -> TreeNode {
            match &slots[idx] {
                Slot::Leaf(id) => TreeNode::Leaf { value: values[*id] },
                Slot::Split { split, left, right } => TreeNode::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    gain: split.gain,
                    left: Box::new(build(slots, *left, values)),
                    right: Box::new(build(slots, *right, values)),
                },
                Slot::Pending { .. } => unreachable!("tree finalized with pending node"),
            }
        }
        build(&self.slots, 0, leaf_values)
    }
}

impl<'a> TreeBuilder<'a> {
    pub fn new(
        data: &'a TrainingSet,
        sorted: &'a [Vec<u32>],
        grad: &'a [f64],
        hess: &'a [f64],
        params: &'a GbdtParams,
    ) -> Self {
        Self {
            data,
            sorted,
            grad,
            hess,
            params,
        }
    }

    /// Grows one tree over the rows flagged in `in_sample`.
    pub fn grow(&self, in_sample: &[bool]) -> GrownTree {
        let n = self.data.len();
        let mut node_of_row = vec![INACTIVE; n];
        let (mut g0, mut h0, mut c0) = (0.0, 0.0, 0usize);
        for r in 0..n {
            if in_sample[r] {
                node_of_row[r] = 0;
                g0 += self.grad[r];
                h0 += self.hess[r];
                c0 += 1;
            }
        }
        let mut slots = vec![Slot::Pending {
            grad: g0,
            hess: h0,
            count: c0,
        }];
        let mut frontier = vec![0usize];

        for _depth in 0..self.params.max_depth {
            if frontier.is_empty() {
                break;
            }
            let best = self.best_splits(&frontier, &slots, &node_of_row);
            let mut next = Vec::new();
            let mut child_of: Vec<Option<(usize, usize, SplitCandidate)>> = vec![None; slots.len()];
            for (pos, &slot_idx) in frontier.iter().enumerate() {
                let Some(cand) = best[pos] else { continue };
                if cand.gain <= self.params.min_gain_to_split {
                    continue;
                }
                let left = slots.len();
                let right = left + 1;
                slots.push(Slot::Pending {
                    grad: 0.0,
                    hess: 0.0,
                    count: 0,
                });
                slots.push(Slot::Pending {
                    grad: 0.0,
                    hess: 0.0,
                    count: 0,
                });
                child_of.resize(slots.len(), None);
                child_of[slot_idx] = Some((left, right, cand));
                next.push(left);
                next.push(right);
            }
            // Route rows of split nodes to children, accumulating child stats
            // in row order.
            for r in 0..n {
                let s = node_of_row[r];
                if s == INACTIVE {
                    continue;
                }
                if let Some(Some((left, right, cand))) = child_of.get(s as usize) {
                    let child = if self.data.value(r, cand.feature) <= cand.threshold {
                        *left
                    } else {
                        *right
                    };
                    node_of_row[r] = child as u32;
                    if let Slot::Pending { grad, hess, count } = &mut slots[child] {
                        *grad += self.grad[r];
                        *hess += self.hess[r];
                        *count += 1;
                    }
                }
            }
            for (slot_idx, entry) in child_of.iter().enumerate() {
                if let Some((left, right, split)) = entry {
                    slots[slot_idx] = Slot::Split {
                        split: *split,
                        left: *left,
                        right: *right,
                    };
                }
            }
            frontier = next;
        }

        // Every remaining pending slot becomes a leaf.
        let mut leaf_id_of_slot = vec![usize::MAX; slots.len()];
        let mut leaf_stats = Vec::new();
        for (i, slot) in slots.iter_mut().enumerate() {
            if let Slot::Pending { grad, hess, .. } = *slot {
                leaf_id_of_slot[i] = leaf_stats.len();
                leaf_stats.push((grad, hess));
                *slot = Slot::Leaf(leaf_id_of_slot[i]);
            }
        }
        let mut leaf_rows = vec![Vec::new(); leaf_stats.len()];
        for (r, &s) in node_of_row.iter().enumerate() {
            if s != INACTIVE {
                leaf_rows[leaf_id_of_slot[s as usize]].push(r as u32);
            }
        }
        GrownTree {
            slots,
            leaf_rows,
            leaf_stats,
        }
    }

    fn best_splits(
        &self,
        frontier: &[usize],
        slots: &[Slot],
        node_of_row: &[u32],
    ) -> Vec<Option<SplitCandidate>> {
        let mut pos_of_slot = vec![usize::MAX; slots.len()];
        for (pos, &s) in frontier.iter().enumerate() {
            pos_of_slot[s] = pos;
        }
        let totals: Vec<(f64, f64, usize)> = frontier
            .iter()
            .map(|&s| match slots[s] {
                Slot::Pending { grad, hess, count } => (grad, hess, count),
                _ => unreachable!("frontier holds pending slots only"),
            })
            .collect();
        let mut best: Vec<Option<SplitCandidate>> = vec![None; frontier.len()];
        let min_leaf = self.params.min_samples_leaf;
        let lambda = self.params.lambda_l2;

        struct Scan {
            grad: f64,
            hess: f64,
            count: usize,
            last: Option<f64>,
        }

        for feature in 0..self.data.n_features() {
            let mut scans: Vec<Scan> = (0..frontier.len())
                .map(|_| Scan {
                    grad: 0.0,
                    hess: 0.0,
                    count: 0,
                    last: None,
                })
                .collect();
            for &r in &self.sorted[feature] {
                let r = r as usize;
                let s = node_of_row[r];
                if s == INACTIVE {
                    continue;
                }
                let pos = match pos_of_slot.get(s as usize) {
                    Some(&p) if p != usize::MAX => p,
                    _ => continue,
                };
                let v = self.data.value(r, feature);
                let scan = &mut scans[pos];
                if let Some(last) = scan.last {
                    if v > last {
                        let (tg, th, tc) = totals[pos];
                        let right_count = tc - scan.count;
                        if scan.count >= min_leaf && right_count >= min_leaf {
                            let gain = split_gain(
                                scan.grad,
                                scan.hess,
                                tg - scan.grad,
                                th - scan.hess,
                                lambda,
                            );
                            let better = match best[pos] {
                                None => gain > 0.0,
                                Some(b) => gain > b.gain + TIE_EPS * b.gain,
                            };
                            if better {
                                best[pos] = Some(SplitCandidate {
                                    feature,
                                    threshold: midpoint(last, v),
                                    gain,
                                });
                            }
                        }
                    }
                }
                scan.grad += self.grad[r];
                scan.hess += self.hess[r];
                scan.count += 1;
                scan.last = Some(v);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump(feature: usize, threshold: f64, lo: f64, hi: f64) -> TreeNode {
        TreeNode::Split {
            feature,
            threshold,
            gain: 1.0,
            left: Box::new(TreeNode::Leaf { value: lo }),
            right: Box::new(TreeNode::Leaf { value: hi }),
        }
    }

    #[test]
    fn predict_routes_on_threshold() {
        let t = stump(1, 0.5, -1.0, 2.0);
        assert_eq!(t.predict(&[9.0, 0.5]), -1.0);
        assert_eq!(t.predict(&[9.0, 0.6]), 2.0);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.leaf_count(), 2);
    }

    #[test]
    fn gain_is_non_negative() {
        assert_eq!(split_gain(1.0, 1.0, 1.0, 1.0, 0.0), 0.0);
        assert!(split_gain(-2.0, 1.0, 2.0, 1.0, 1.0) > 0.0);
    }

    #[test]
    fn midpoint_stays_below_upper_value() {
        assert_eq!(midpoint(1.0, 3.0), 2.0);
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let m = midpoint(lo, hi);
        assert!(m >= lo && m < hi);
    }
}
