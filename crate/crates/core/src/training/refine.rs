use crate::qmc::Point4;

/// Greedily retained high-residual collocation points.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementSet {
    points: Vec<Point4>,
    scores: Vec<f64>,
    pub capacity: usize,
    pub k: usize,
}

impl RefinementSet {
    pub fn new(capacity: usize, k: usize) -> Self {
        RefinementSet {
            points: Vec::new(),
            scores: Vec::new(),
            capacity,
            k,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point4] {
        &self.points
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn mean_score(&self) -> f64 {
        if self.scores.is_empty() {
            0.0
        } else {
            self.scores.iter().sum::<f64>() / self.scores.len() as f64
        }
    }

    /// Replaces the stored score of point `i` after it was re-evaluated.
    pub fn rescore(&mut self, i: usize, score: f64) {
        self.scores[i] = score;
    }

    /// Inserts the `k` highest-scoring candidates and evicts the lowest
    /// scores beyond capacity. Returns how many candidates were inserted.
    pub fn refine(&mut self, candidates: &[Point4], scores: &[f64]) -> usize {
        debug_assert_eq!(candidates.len(), scores.len());
        let mut order: Vec<usize> = (0..candidates.len()).filter(|&i| scores[i].is_finite()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let take = self.k.min(order.len());
        for &i in &order[..take] {
            self.points.push(candidates[i]);
            self.scores.push(scores[i]);
        }
        if self.points.len() > self.capacity {
            let mut idx: Vec<usize> = (0..self.points.len()).collect();
            idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
            idx.truncate(self.capacity);
            idx.sort_unstable();
            self.points = idx.iter().map(|&i| self.points[i]).collect();
            self.scores = idx.iter().map(|&i| self.scores[i]).collect();
        }
        take
    }

    /// Indices of a batch of up to `n` retained points, cycling through the
    /// set from `cursor`.
    pub fn batch(&self, n: usize, cursor: usize) -> Vec<usize> {
        if self.points.is_empty() {
            return Vec::new();
        }
        let m = self.points.len();
        (0..n.min(m)).map(|j| (cursor + j) % m).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmc::HaltonSampler;
    use proptest::prelude::*;

    fn pts(n: usize) -> Vec<Point4> {
        (0..n).map(|i| [i as f64, 0.0, 0.0, 0.0]).collect()
    }

    #[test]
    fn argmax_insertion() {
        let mut s = RefinementSet::new(10, 1);
        s.refine(&pts(3), &[1.0, 5.0, 3.0]);
        assert_eq!(s.points(), &[[1.0, 0.0, 0.0, 0.0]]);
    }

    #[test]
    fn k_at_least_candidates_inserts_all() {
        let mut s = RefinementSet::new(10, 3);
        assert_eq!(s.refine(&pts(3), &[1.0, 5.0, 3.0]), 3);
        let mut s = RefinementSet::new(10, 7);
        assert_eq!(s.refine(&pts(3), &[1.0, 5.0, 3.0]), 3);
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn capacity_evicts_lowest() {
        let mut s = RefinementSet::new(2, 2);
        s.refine(&pts(2), &[4.0, 2.0]);
        s.refine(&pts(2), &[3.0, 1.0]);
        let mut kept = s.scores().to_vec();
        kept.sort_by(f64::total_cmp);
        assert_eq!(kept, vec![3.0, 4.0]);
    }

    #[test]
    fn greedy_set_dominates_uniform_samples() {
        // fixed landscape: score = |sin(3x) * cos(2y)| + t on the unit cube
        let score = |p: &Point4| (3.0 * p[0]).sin().abs() * (2.0 * p[1]).cos().abs() + p[3];
        let mut set = RefinementSet::new(1280, 128);
        let mut uniform_sum = 0.0;
        let mut uniform_n = 0;
        for round in 0..10u64 {
            let sampler = HaltonSampler::owen(4, round).unwrap();
            let cands: Vec<Point4> = (0..1024).map(|i| sampler.point4(i)).collect();
            let s: Vec<f64> = cands.iter().map(score).collect();
            uniform_sum += s.iter().sum::<f64>();
            uniform_n += s.len();
            set.refine(&cands, &s);
        }
        assert!(set.mean_score() >= uniform_sum / uniform_n as f64);
        assert_eq!(set.len(), 1280);
    }

    proptest! {
        #[test]
        fn size_bounded_and_above_median(
            rounds in prop::collection::vec(prop::collection::vec(0.0..100.0f64, 8..40), 1..6),
            k in 1usize..4,
            cap in 1usize..20,
        ) {
            let mut s = RefinementSet::new(cap, k);
            for scores in &rounds {
                let before: Vec<f64> = s.scores().to_vec();
                s.refine(&pts(scores.len()), scores);
                prop_assert!(s.len() <= cap);
                let mut sorted = scores.clone();
                sorted.sort_by(f64::total_cmp);
                let median = sorted[sorted.len() / 2];
                // k <= n / 2 here, so every newly retained score sits at or
                // above the batch median
                let fresh: Vec<f64> = s.scores().iter().copied().filter(|v| !before.contains(v)).collect();
                for v in fresh {
                    prop_assert!(v >= median);
                }
            }
        }
    }
}
