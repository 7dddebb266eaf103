//! Distance-based weak/strong pairing: weight matrix construction, the
//! max-weight assignment solver, and uniqueness verification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::UserTerminal;

/// Distance weights between every strong user (row) and weak user (column).
/// Entries are planar Euclidean distances in meters; virtual padding entries
/// (id `None`) carry zero weight.
#[derive(Debug, Clone)]
pub struct WeightMatrix {
    pub weak_ids: Vec<Option<usize>>,
    pub strong_ids: Vec<Option<usize>>,
    /// `weights[j][i]`: strong j -> weak i.
    pub weights: Vec<Vec<f64>>,
}

/// One formed group; `None` marks a virtual zero-rate partner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupPair {
    pub weak: Option<usize>,
    pub strong: Option<usize>,
    pub weight: f64,
}

/// A weak-strong pairing covering both classes exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAssignment {
    /// Pairs sorted by weak id (virtual pairs last).
    pub pairs: Vec<GroupPair>,
    pub total_weight: f64,
}

impl GroupAssignment {
    /// Pairs where both members are real users.
    pub fn real_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs
            .iter()
            .filter_map(|p| Some((p.weak?, p.strong?)))
    }

    /// CSV rows `group,weak_id,strong_id,weight` (virtual members empty).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,weak_id,strong_id,weight\n");
        for (g, p) in self.pairs.iter().enumerate() {
            let fmt_id = |id: Option<usize>| id.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{g},{},{},{}\n",
                fmt_id(p.weak),
                fmt_id(p.strong),
                p.weight
            ));
        }
        out
    }
}

/// Planar distance between two users, the pairing weight of Eq-style
/// grouping: channel gain difference grows with distance.
fn planar_distance(a: &UserTerminal, b: &UserTerminal) -> f64 {
    let dx = a.position.x - b.position.x;
    let dy = a.position.y - b.position.y;
    (dx * dx + dy * dy).sqrt()
}

/// Build the strong-by-weak distance weight matrix.
pub fn build_weight_matrix(weak: &[&UserTerminal], strong: &[&UserTerminal]) -> Result<WeightMatrix> {
    if weak.is_empty() || strong.is_empty() {
        return Err(Error::EmptyClass("weight matrix needs both classes nonempty".into()));
    }
    let weights = strong
        .iter()
        .map(|s| weak.iter().map(|w| planar_distance(s, w)).collect())
        .collect();
    Ok(WeightMatrix {
        weak_ids: weak.iter().map(|u| Some(u.id)).collect(),
        strong_ids: strong.iter().map(|u| Some(u.id)).collect(),
        weights,
    })
}

impl WeightMatrix {
    /// Append zero-weight virtual users to the smaller class until the
    /// matrix is square, so a perfect matching exists.
    pub fn pad_square(&mut self) {
        while self.strong_ids.len() < self.weak_ids.len() {
            self.strong_ids.push(None);
            self.weights.push(vec![0.0; self.weak_ids.len()]);
        }
        while self.weak_ids.len() < self.strong_ids.len() {
            self.weak_ids.push(None);
            for row in &mut self.weights {
                row.push(0.0);
            }
        }
    }
}

/// Square-matrix assignment minimizing total cost via row/column potentials
/// and augmenting paths (O(n^3)). Returns, per row, the assigned column.
fn assignment_min(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let none = usize::MAX;
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![none; n + 1];

    for i in 0..n {
        row_of[n] = i;
        let mut j0 = n;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut prev = vec![n; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 0..n {
                if used[j] {
                    continue;
                }
                let reduced = cost[i0][j] - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    prev[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    if row_of[j] != none {
                        u[row_of[j]] += delta;
                    }
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == none {
                break;
            }
        }
        while j0 != n {
            let j_prev = prev[j0];
            row_of[j0] = row_of[j_prev];
            j0 = j_prev;
        }
    }

    let mut col_of = vec![none; n];
    for j in 0..n {
        if row_of[j] != none {
            col_of[row_of[j]] = j;
        }
    }
    col_of
}

/// The perfect matching maximizing total distance weight.
///
/// Requires a square matrix (`pad_square` upstream otherwise). Deterministic:
/// the augmenting search scans columns in ascending index order, so exact
/// weight ties resolve to the lexicographically earliest assignment found.
pub fn optimal_matching(w: &WeightMatrix) -> Result<GroupAssignment> {
    let n = w.strong_ids.len();
    if n == 0 || w.weak_ids.len() != n {
        return Err(Error::Config(format!(
            "matching needs a square weight matrix (got {} strong x {} weak)",
            n,
            w.weak_ids.len()
        )));
    }
    let max_w = w
        .weights
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &x| acc.max(x));
    let cost: Vec<Vec<f64>> = w
        .weights
        .iter()
        .map(|row| row.iter().map(|&x| max_w - x).collect())
        .collect();
    let col_of = assignment_min(&cost);

    let mut pairs: Vec<GroupPair> = (0..n)
        .map(|j| GroupPair {
            weak: w.weak_ids[col_of[j]],
            strong: w.strong_ids[j],
            weight: w.weights[j][col_of[j]],
        })
        .collect();
    pairs.sort_by_key(|p| (p.weak.is_none(), p.weak, p.strong));
    let total_weight = pairs.iter().map(|p| p.weight).sum();
    Ok(GroupAssignment { pairs, total_weight })
}

/// Outcome of the uniqueness check over a formed assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniquenessReport {
    pub violations: Vec<String>,
    /// Number of distinct real users covered by the assignment.
    pub coverage: usize,
}

impl UniquenessReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check that the assignment is a bijection between the weak and strong sets.
pub fn verify_unique(a: &GroupAssignment, weak_ids: &[usize], strong_ids: &[usize]) -> UniquenessReport {
    let mut violations = Vec::new();
    let mut seen_weak = std::collections::BTreeMap::new();
    let mut seen_strong = std::collections::BTreeMap::new();
    for p in &a.pairs {
        if let Some(w) = p.weak {
            *seen_weak.entry(w).or_insert(0usize) += 1;
            if !weak_ids.contains(&w) {
                violations.push(format!("weak id {w} not in the weak class"));
            }
        }
        if let Some(s) = p.strong {
            *seen_strong.entry(s).or_insert(0usize) += 1;
            if !strong_ids.contains(&s) {
                violations.push(format!("strong id {s} not in the strong class"));
            }
        }
    }
    for (&id, &count) in &seen_weak {
        if count > 1 {
            violations.push(format!("weak id {id} appears {count} times"));
        }
    }
    for (&id, &count) in &seen_strong {
        if count > 1 {
            violations.push(format!("strong id {id} appears {count} times"));
        }
    }
    for &id in weak_ids {
        if !seen_weak.contains_key(&id) {
            violations.push(format!("weak id {id} unmatched"));
        }
    }
    for &id in strong_ids {
        if !seen_strong.contains_key(&id) {
            violations.push(format!("strong id {id} unmatched"));
        }
    }
    UniquenessReport {
        violations,
        coverage: seen_weak.len() + seen_strong.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DetectorGeometry, Vec3};
    use crate::oracle::matching_brute_force;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn user(id: usize, x: f64, y: f64) -> UserTerminal {
        let det = DetectorGeometry::uniform_ring(2, 0.5, 1e-6, 2e-6, 1.0, 1.0).unwrap();
        UserTerminal::new(id, Vec3::new(x, y, 0.0), det)
    }

    fn matrix_from(weights: Vec<Vec<f64>>) -> WeightMatrix {
        let rows = weights.len();
        let cols = weights[0].len();
        WeightMatrix {
            weak_ids: (0..cols).map(Some).collect(),
            strong_ids: (cols..cols + rows).map(Some).collect(),
            weights,
        }
    }

    #[test]
    fn weight_is_planar_distance() {
        let w = user(0, 0.0, 0.0);
        let s = user(1, 3.0, 4.0);
        let m = build_weight_matrix(&[&w], &[&s]).unwrap();
        assert_relative_eq!(m.weights[0][0], 5.0, max_relative = 1e-15);

        let coincident = build_weight_matrix(&[&w], &[&user(2, 0.0, 0.0)]).unwrap();
        assert_eq!(coincident.weights[0][0], 0.0);
    }

    #[test]
    fn weights_ignore_height_and_translation() {
        let mut w = user(0, 1.0, 2.0);
        let mut s = user(1, 4.0, 6.0);
        let base = build_weight_matrix(&[&w], &[&s]).unwrap().weights[0][0];
        w.position.z = 1.5;
        s.position.z = 0.2;
        let z_shift = build_weight_matrix(&[&w], &[&s]).unwrap().weights[0][0];
        assert_eq!(base, z_shift);
        w.position.x += 10.0;
        w.position.y -= 3.0;
        s.position.x += 10.0;
        s.position.y -= 3.0;
        let translated = build_weight_matrix(&[&w], &[&s]).unwrap().weights[0][0];
        assert_relative_eq!(base, translated, max_relative = 1e-12);
    }

    #[test]
    fn matching_two_by_two_beats_greedy() {
        // Rows strong {2,3}, cols weak {0,1}: the off-diagonal matching
        // totals 3 + 2 = 5, the diagonal only 1 + 1 = 2.
        let m = matrix_from(vec![vec![1.0, 3.0], vec![2.0, 1.0]]);
        let a = optimal_matching(&m).unwrap();
        assert_relative_eq!(a.total_weight, 5.0, max_relative = 1e-12);
        assert_eq!(
            a.pairs,
            vec![
                GroupPair { weak: Some(0), strong: Some(3), weight: 2.0 },
                GroupPair { weak: Some(1), strong: Some(2), weight: 3.0 },
            ]
        );
    }

    #[test]
    fn matching_single_pair() {
        let m = matrix_from(vec![vec![7.0]]);
        let a = optimal_matching(&m).unwrap();
        assert_eq!(a.pairs.len(), 1);
        assert_relative_eq!(a.total_weight, 7.0);
    }

    #[test]
    fn matching_equals_brute_force_up_to_seven() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for n in 1..=7usize {
            for _ in 0..20 {
                let weights: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..n).map(|_| rng.random::<f64>() * 10.0).collect())
                    .collect();
                let m = matrix_from(weights.clone());
                let a = optimal_matching(&m).unwrap();
                let (_, best) = matching_brute_force(&weights);
                assert_relative_eq!(a.total_weight, best, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn padding_makes_unbalanced_classes_square() {
        let w0 = user(0, 0.0, 0.0);
        let w1 = user(1, 1.0, 0.0);
        let s0 = user(2, 5.0, 5.0);
        let mut m = build_weight_matrix(&[&w0, &w1], &[&s0]).unwrap();
        m.pad_square();
        let a = optimal_matching(&m).unwrap();
        assert_eq!(a.pairs.len(), 2);
        let virtual_pairs = a.pairs.iter().filter(|p| p.strong.is_none()).count();
        assert_eq!(virtual_pairs, 1);
        // The real strong user pairs with the farther weak user.
        assert!(a
            .real_pairs()
            .any(|(w, s)| w == 0 && s == 2));
    }

    #[test]
    fn verify_unique_passes_and_locates_duplicates() {
        let m = matrix_from(vec![vec![1.0, 3.0], vec![2.0, 1.0]]);
        let a = optimal_matching(&m).unwrap();
        let report = verify_unique(&a, &[0, 1], &[2, 3]);
        assert!(report.passed());
        assert_eq!(report.coverage, 4);

        let broken = GroupAssignment {
            pairs: vec![
                GroupPair { weak: Some(0), strong: Some(2), weight: 1.0 },
                GroupPair { weak: Some(1), strong: Some(2), weight: 1.0 },
            ],
            total_weight: 2.0,
        };
        let report = verify_unique(&broken, &[0, 1], &[2, 3]);
        assert!(!report.passed());
        assert!(report.violations.iter().any(|v| v.contains("strong id 2")));
        assert!(report.violations.iter().any(|v| v.contains("strong id 3 unmatched")));
    }

    #[test]
    fn csv_export_shape() {
        let m = matrix_from(vec![vec![1.0, 3.0], vec![2.0, 1.0]]);
        let a = optimal_matching(&m).unwrap();
        let csv = a.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "group,weak_id,strong_id,weight");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "0,0,3,2");
    }

    proptest! {
        #[test]
        fn matching_is_a_permutation(n in 1usize..8, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let weights: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
                .collect();
            let m = matrix_from(weights);
            let a = optimal_matching(&m).unwrap();
            let weak_ids: Vec<usize> = (0..n).collect();
            let strong_ids: Vec<usize> = (n..2 * n).collect();
            prop_assert!(verify_unique(&a, &weak_ids, &strong_ids).passed());
        }

        #[test]
        fn matching_invariant_under_uniform_shift(n in 2usize..6, seed in 0u64..500, shift in 0.0..50.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let weights: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random::<f64>() * 5.0).collect())
                .collect();
            let base = optimal_matching(&matrix_from(weights.clone())).unwrap();
            let shifted: Vec<Vec<f64>> = weights
                .iter()
                .map(|row| row.iter().map(|&x| x + shift).collect())
                .collect();
            let moved = optimal_matching(&matrix_from(shifted)).unwrap();
            let base_pairs: Vec<(Option<usize>, Option<usize>)> =
                base.pairs.iter().map(|p| (p.weak, p.strong)).collect();
            let moved_pairs: Vec<(Option<usize>, Option<usize>)> =
                moved.pairs.iter().map(|p| (p.weak, p.strong)).collect();
            prop_assert_eq!(base_pairs, moved_pairs);
        }
    }
}
