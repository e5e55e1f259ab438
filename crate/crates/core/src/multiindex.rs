//! Multi-index arithmetic: `r^n = Π r_i^{n_i}`, `C(n, k) = Π C(n_i, k_i)`
//! and iteration over the box `[n]_0 = {k : 0 ≤ k_i ≤ n_i}`.

/// Binomial coefficient as a float. Exact for all values below 2^53.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0_f64;
    for j in 0..k {
        acc = acc * f64::from(n - j) / f64::from(j + 1);
    }
    acc.round()
}

pub fn multi_binomial(n: &[u32], k: &[u32]) -> f64 {
    debug_assert_eq!(n.len(), k.len());
    n.iter().zip(k).map(|(&n, &k)| binomial(n, k)).product()
}

/// `r^n` with the convention `0^0 = 1`.
pub fn monomial(r: &[f64], n: &[u32]) -> f64 {
    debug_assert_eq!(r.len(), n.len());
    r.iter().zip(n).map(|(&x, &e)| powu(x, e)).product()
}

/// `u^k (1 - u)^(b - k)`, the probability that a merger event with
/// participation vector `u` picks exactly `k` out of `b` blocks.
pub fn merger_kernel(u: &[f64], b: &[u32], k: &[u32]) -> f64 {
    debug_assert!(u.len() == b.len() && b.len() == k.len());
    let mut acc = 1.0;
    for ((&u, &b), &k) in u.iter().zip(b).zip(k) {
        acc *= powu(u, k) * powu(1.0 - u, b - k);
    }
    acc
}

#[inline]
pub fn powu(x: f64, e: u32) -> f64 {
    match e {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(e as i32),
    }
}

/// Iterator over every `k` with `0 ≤ k ≤ n` coordinatewise, in
/// lexicographic order with the last coordinate varying fastest.
#[derive(Debug, Clone)]
pub struct SubIndices {
    upper: Vec<u32>,
    max_total: u32,
    next: Option<Vec<u32>>,
}

impl SubIndices {
    pub fn new(upper: &[u32]) -> Self {
        Self::bounded(upper, u32::MAX)
    }

    /// Only the `k` with `|k| ≤ max_total`.
    pub fn bounded(upper: &[u32], max_total: u32) -> Self {
        Self {
            upper: upper.to_vec(),
            max_total,
            next: Some(vec![0; upper.len()]),
        }
    }
}

impl Iterator for SubIndices {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for pos in (0..succ.len()).rev() {
            let prefix: u64 = succ[..=pos].iter().map(|&x| u64::from(x)).sum();
            if succ[pos] < self.upper[pos] && prefix < u64::from(self.max_total) {
                succ[pos] += 1;
                self.next = Some(succ);
                return Some(current);
            }
            succ[pos] = 0;
        }
        Some(current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_box_iteration() {
        let all: Vec<_> = SubIndices::new(&[3, 2, 4]).filter(|k| k.iter().sum::<u32>() <= 2).collect();
        let bounded: Vec<_> = SubIndices::bounded(&[3, 2, 4], 2).collect();
        assert_eq!(all, bounded);
        assert_eq!(SubIndices::bounded(&[1000, 1000], 1).count(), 3);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(3, 3), 1.0);
        assert_eq!(binomial(1, 2), 0.0);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424.0);
        assert_eq!(multi_binomial(&[3, 4], &[1, 2]), 18.0);
    }

    #[test]
    fn monomial_zero_power() {
        assert_eq!(monomial(&[0.0, 0.5], &[0, 2]), 0.25);
        assert_eq!(monomial(&[0.0], &[1]), 0.0);
    }

    #[test]
    fn box_iteration_covers_all() {
        let all: Vec<_> = SubIndices::new(&[1, 2]).collect();
        assert_eq!(
            all,
            vec![vec![0, 0], vec![0, 1], vec![0, 2], vec![1, 0], vec![1, 1], vec![1, 2]]
        );
        assert_eq!(SubIndices::new(&[]).count(), 1);
        assert_eq!(SubIndices::new(&[0, 0]).count(), 1);
    }
}
