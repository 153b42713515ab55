//! 0/1 knapsack for weighted sparsity: maximize Σ_{k∈S} v_k subject to
//! Σ_{k∈S} c_k ≤ C.

/// Largest integer capacity accepted by the exact solver.
pub const MAX_CELLS: usize = 1_000_000;
/// Largest scale q tried when mapping costs onto the integers.
pub const MAX_SCALE: u32 = 1000;
/// Largest DP table (items × cells).
pub const MAX_TABLE: usize = 50_000_000;

const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    /// Chosen items in increasing order.
    pub chosen: Vec<usize>,
    pub value: f64,
    /// False when the greedy fallback was used.
    pub exact: bool,
    /// More than one support attains the optimum.
    pub tied: bool,
}

/// A fixed cost vector and capacity, preprocessed once and solved for many
/// value vectors.
#[derive(Clone, Debug)]
pub struct Knapsack {
    costs: Vec<f64>,
    capacity: f64,
    grid: Option<(Vec<usize>, usize)>,
}

impl Knapsack {
    pub fn new(costs: Vec<f64>, capacity: f64) -> Self {
        let grid = integer_grid(&costs, capacity);
        let grid = grid.filter(|(_, cap)| costs.len().saturating_mul(cap + 1) <= MAX_TABLE);
        Self { costs, capacity, grid }
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    /// Whether [`Knapsack::solve`] is exact for this instance.
    pub fn is_exact(&self) -> bool {
        self.grid.is_some()
    }

    /// Items with zero value are never chosen, so ties only count distinct
    /// projected points.
    pub fn solve(&self, values: &[f64]) -> Solution {
        match &self.grid {
            Some((w, cap)) => solve_dp(values, w, *cap),
            None => solve_greedy(values, &self.costs, self.capacity),
        }
    }

    /// Greedily grows a support in the given item order until nothing more
    /// fits; the result is a maximal admissible support.
    pub fn maximal_support(&self, order: &[usize]) -> Vec<usize> {
        let mut used = 0.0;
        let mut out: Vec<usize> = Vec::new();
        for &k in order {
            if used + self.costs[k] <= self.capacity * (1.0 + 1e-12) {
                used += self.costs[k];
                out.push(k);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Finds q ≤ [`MAX_SCALE`] with every q·c_k an integer (to 1e-9) and
/// ⌊q·C⌋ ≤ [`MAX_CELLS`].
fn integer_grid(costs: &[f64], capacity: f64) -> Option<(Vec<usize>, usize)> {
    for q in 1..=MAX_SCALE {
        let q = q as f64;
        let cap = (q * capacity * (1.0 + 1e-12)).floor();
        if cap > MAX_CELLS as f64 {
            return None;
        }
        let scaled: Option<Vec<usize>> = costs
            .iter()
            .map(|&c| {
                let x = q * c;
                let r = x.round();
                ((x - r).abs() <= 1e-9 * x.max(1.0)).then_some(r as usize)
            })
            .collect();
        if let Some(w) = scaled {
            return Some((w, cap as usize));
        }
    }
    None
}

fn solve_dp(values: &[f64], weights: &[usize], cap: usize) -> Solution {
    let n = values.len();
    let width = cap + 1;
    let mut best = vec![0.0f64; width];
    // number of optimal subsets, saturating at 2
    let mut count = vec![1u8; width];
    let mut take = vec![false; n * width];
    for (i, (&v, &w)) in values.iter().zip(weights).enumerate() {
        if v <= 0.0 || w > cap {
            continue;
        }
        for c in (w..width).rev() {
            let with = best[c - w] + v;
            let without = best[c];
            let scale = with.abs().max(without.abs()).max(1.0);
            if (with - without).abs() <= TIE_TOL * scale {
                count[c] = count[c].saturating_add(count[c - w]).min(2);
            } else if with > without {
                best[c] = with;
                count[c] = count[c - w];
                take[i * width + c] = true;
            }
        }
    }
    let mut chosen = Vec::new();
    let mut c = cap;
    for i in (0..n).rev() {
        if take[i * width + c] {
            chosen.push(i);
            c -= weights[i];
        }
    }
    chosen.reverse();
    let value = chosen.iter().map(|&k| values[k]).sum();
    Solution {
        chosen,
        value,
        exact: true,
        tied: count[cap] > 1,
    }
}

fn solve_greedy(values: &[f64], costs: &[f64], capacity: f64) -> Solution {
    let mut order: Vec<usize> = (0..values.len()).filter(|&k| values[k] > 0.0).collect();
    order.sort_by(|&a, &b| {
        (values[b] / costs[b])
            .total_cmp(&(values[a] / costs[a]))
            .then(a.cmp(&b))
    });
    let mut used = 0.0;
    let mut chosen = Vec::new();
    for k in order {
        if used + costs[k] <= capacity * (1.0 + 1e-12) {
            used += costs[k];
            chosen.push(k);
        }
    }
    chosen.sort_unstable();
    let value = chosen.iter().map(|&k| values[k]).sum();
    Solution {
        chosen,
        value,
        exact: false,
        tied: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(values: &[f64], costs: &[f64], cap: f64) -> f64 {
        let n = values.len();
        let mut best = 0.0f64;
        for mask in 0u32..(1 << n) {
            let (mut v, mut c) = (0.0, 0.0);
            for k in 0..n {
                if mask & (1 << k) != 0 {
                    v += values[k];
                    c += costs[k];
                }
            }
            if c <= cap * (1.0 + 1e-12) {
                best = best.max(v);
            }
        }
        best
    }

    #[test]
    fn picks_best_pair_over_greedy_ratio() {
        // greedy by ratio takes item 0 and is stuck; the optimum is {1, 2}
        let k = Knapsack::new(vec![1.0, 2.0, 2.0], 4.0);
        assert!(k.is_exact());
        let s = k.solve(&[3.0, 5.0, 5.0]);
        assert_eq!(s.chosen, vec![1, 2]);
        assert_eq!(s.value, 10.0);
        assert!(!s.tied);
    }

    #[test]
    fn detects_ties() {
        let k = Knapsack::new(vec![1.0, 1.0], 1.0);
        let s = k.solve(&[2.0, 2.0]);
        assert!(s.tied);
        assert_eq!(s.value, 2.0);
        assert!(!k.solve(&[2.0, 0.0]).tied);
    }

    #[test]
    fn fractional_costs_use_scaled_grid() {
        let k = Knapsack::new(vec![0.5, 1.25, 2.0], 2.5);
        assert!(k.is_exact());
        assert_eq!(k.solve(&[1.0, 1.0, 1.5]).chosen, vec![0, 2]);
    }

    #[test]
    fn irrational_costs_fall_back_to_greedy() {
        let k = Knapsack::new(vec![2f64.sqrt(), 3f64.sqrt()], 2.0);
        assert!(!k.is_exact());
        let s = k.solve(&[1.0, 1.0]);
        assert!(!s.exact);
        assert_eq!(s.chosen, vec![0]);
    }

    #[test]
    fn maximal_support_is_maximal() {
        let k = Knapsack::new(vec![1.0, 1.0, 2.0, 1.0], 3.0);
        let s = k.maximal_support(&[2, 0, 1, 3]);
        assert_eq!(s, vec![0, 2]);
    }

    proptest! {
        #[test]
        fn dp_matches_brute_force(
            items in proptest::collection::vec((0.0f64..10.0, 1u32..6), 1..10),
            cap in 1u32..15,
        ) {
            let values: Vec<f64> = items.iter().map(|p| p.0).collect();
            let costs: Vec<f64> = items.iter().map(|p| p.1 as f64).collect();
            let s = Knapsack::new(costs.clone(), cap as f64).solve(&values);
            let used: f64 = s.chosen.iter().map(|&k| costs[k]).sum();
            prop_assert!(used <= cap as f64);
            prop_assert!((s.value - brute(&values, &costs, cap as f64)).abs() < 1e-9);
        }
    }
}
