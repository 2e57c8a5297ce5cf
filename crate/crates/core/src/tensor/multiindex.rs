use serde::{Deserialize, Serialize};
use std::fmt;

/// A multi-index `(a_1, ..., a_d)` of nonnegative integers.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(components: Vec<u32>) -> Self {
        Self(components)
    }

    pub fn zero(d: usize) -> Self {
        Self(vec![0; d])
    }

    /// The unit index `e_k` in dimension `d`.
    pub fn unit(d: usize, k: usize) -> Self {
        let mut c = vec![0; d];
        c[k] = 1;
        Self(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn components(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, k: usize) -> u32 {
        self.0[k]
    }

    /// `alpha!` = product of component factorials.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| (1..=a).map(f64::from).product::<f64>()).product()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Componentwise `self - other`, or `None` if some component would go negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    /// `x^alpha`.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&a, &xi)| xi.powi(a as i32)).product()
    }

    /// Componentwise partial order `self <= other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Product of binomial coefficients `C(self, sub)`.
    pub fn binomial(&self, sub: &MultiIndex) -> f64 {
        self.0
            .iter()
            .zip(&sub.0)
            .map(|(&n, &k)| binomial(n, k))
            .product()
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, a) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// All multi-indices of dimension `d` with `|alpha| = m`, in lexicographic order.
pub fn enumerate_multiindices(d: usize, m: u32) -> Vec<MultiIndex> {
    assert!(d >= 1, "dimension must be positive");
    let mut out = Vec::new();
    let mut current = vec![0u32; d];
    fill(&mut current, 0, m, &mut out);
    out
}

fn fill(current: &mut Vec<u32>, slot: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    let d = current.len();
    if slot == d - 1 {
        current[slot] = remaining;
        out.push(MultiIndex(current.clone()));
        return;
    }
    for a in 0..=remaining {
        current[slot] = a;
        fill(current, slot + 1, remaining - a, out);
    }
}

/// All multi-indices with `|alpha| <= m`, grouped by order and lexicographic within each order.
pub fn multiindices_up_to(d: usize, m: u32) -> Vec<MultiIndex> {
    (0..=m).flat_map(|k| enumerate_multiindices(d, k)).collect()
}

/// Position of `alpha` in [`multiindices_up_to`]`(d, _)`, independent of the upper bound.
pub fn graded_position(alpha: &MultiIndex) -> usize {
    let d = alpha.dim();
    let order = alpha.order();
    let below: usize = (0..order).map(|k| count_of_order(d, k)).sum();
    let within = enumerate_multiindices(d, order)
        .iter()
        .position(|b| b == alpha)
        .expect("index enumerated");
    below + within
}

/// `C(m + d - 1, d - 1)`.
pub fn count_of_order(d: usize, m: u32) -> usize {
    binomial(m + d as u32 - 1, d as u32 - 1).round() as usize
}

pub fn count_up_to(d: usize, m: u32) -> usize {
    (0..=m).map(|k| count_of_order(d, k)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(c: &[u32]) -> MultiIndex {
        MultiIndex::new(c.to_vec())
    }

    #[test]
    fn one_dimensional_order_two() {
        assert_eq!(enumerate_multiindices(1, 2), vec![mi(&[2])]);
    }

    #[test]
    fn coordinate_directions() {
        assert_eq!(enumerate_multiindices(2, 1), vec![mi(&[0, 1]), mi(&[1, 0])]);
    }

    #[test]
    fn second_order_in_plane() {
        let all = enumerate_multiindices(2, 2);
        assert_eq!(all, vec![mi(&[0, 2]), mi(&[1, 1]), mi(&[2, 0])]);
        assert_eq!(all.len(), count_of_order(2, 2));
    }

    #[test]
    fn counts_match_binomial() {
        for d in 1..=4 {
            for m in 0..=5 {
                let all = enumerate_multiindices(d, m);
                assert_eq!(all.len(), count_of_order(d, m));
                assert!(all.iter().all(|a| a.order() == m));
                assert!(all.windows(2).all(|w| w[0] < w[1]), "sorted and unique");
            }
        }
    }

    #[test]
    fn graded_positions_are_consistent() {
        let all = multiindices_up_to(2, 3);
        for (k, a) in all.iter().enumerate() {
            assert_eq!(graded_position(a), k);
        }
        assert_eq!(all.len(), count_up_to(2, 3));
    }

    #[test]
    fn factorial_and_binomial() {
        assert_eq!(mi(&[2, 3]).factorial(), 12.0);
        assert_eq!(mi(&[4, 2]).binomial(&mi(&[2, 1])), 12.0);
        assert_eq!(mi(&[1, 2]).checked_sub(&mi(&[2, 0])), None);
    }
}
