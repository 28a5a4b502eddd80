//! Lower bounds on conversion access cost for every regime, and the
//! partition layout that attains them.
//!
//! `x % y` is the plain remainder, so `x % y == x` whenever `x < y`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::framework::{AccessCost, ConversionParams, PartitionPair, Regime};

/// `|I_i ∩ F_j|` for every initial stripe `i` and final stripe `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntersectionMatrix {
    pub entries: Vec<Vec<usize>>,
}

impl IntersectionMatrix {
    pub fn from_partitions(p: &PartitionPair) -> IntersectionMatrix {
        IntersectionMatrix { entries: p.intersection_counts() }
    }

    pub fn row_maxima(&self) -> Vec<usize> {
        self.entries.iter().map(|row| row.iter().copied().max().unwrap_or(0)).collect()
    }

    /// Lowest final-stripe index among the maxima of row `i`.
    pub fn argmax(&self, i: usize) -> usize {
        let row = &self.entries[i];
        let best = row.iter().copied().max().unwrap_or(0);
        row.iter().position(|&v| v == best).unwrap_or(0)
    }

    /// `Σ_i max{M*_i − r_f, 0}`: the read savings a partition admits.
    pub fn objective(&self, r_f: usize) -> usize {
        self.row_maxima().iter().map(|&m| m.saturating_sub(r_f)).sum()
    }
}

fn nontrivial(p: &ConversionParams) -> bool {
    p.r_i() >= p.r_f() && p.r_f() < p.k_i.min(p.k_f)
}

/// Merge regime, `k_f = ς·k_i`.
pub fn merge_bound(p: &ConversionParams) -> Result<AccessCost> {
    let Regime::Merge { factor } = p.regime() else {
        return Err(Error::Regime(format!("k_f = {} is not a multiple >= 2 of k_i = {}", p.k_f, p.k_i)));
    };
    let reads = if p.r_i() < p.r_f() { factor * p.k_i } else { factor * p.k_i.min(p.r_f()) };
    Ok(AccessCost::new(reads, p.r_f()))
}

/// Split regime, `k_i = ς·k_f`.
pub fn split_bound(p: &ConversionParams) -> Result<AccessCost> {
    let Regime::Split { factor } = p.regime() else {
        return Err(Error::Regime(format!("k_i = {} is not a multiple >= 2 of k_f = {}", p.k_i, p.k_f)));
    };
    let reads = if p.r_i() >= p.r_f() { (factor - 1) * p.k_f + p.r_f().min(p.k_f) } else { p.k_i };
    Ok(AccessCost::new(reads, factor * p.r_f()))
}

/// One stripe of `k_i` symbols split into final stripes of the given sizes.
pub fn gen_split_bound(k_i: usize, final_sizes: &[usize], r_f: usize) -> Result<usize> {
    if final_sizes.contains(&0) || final_sizes.iter().sum::<usize>() != k_i {
        return Err(Error::Parameter(format!("final sizes {final_sizes:?} must be positive and sum to {k_i}")));
    }
    let largest = final_sizes.iter().copied().max().unwrap_or(0);
    Ok(k_i - largest.saturating_sub(r_f))
}

/// Per-stripe read minima when stripes of the given sizes merge into one.
pub fn gen_merge_bound(initial_sizes: &[usize], r_i: usize, r_f: usize) -> Vec<usize> {
    initial_sizes.iter().map(|&k| if r_i < r_f { k } else { k.min(r_f) }).collect()
}

/// Any `k_i != k_f`. Writes are `ς_F·r_f` in every case.
pub fn general_bound(p: &ConversionParams) -> Result<AccessCost> {
    if p.k_i == p.k_f {
        return Err(Error::Regime("k_i = k_f has no general-regime bound".into()));
    }
    let (si, sf) = (p.initial_stripes(), p.final_stripes());
    let r_f = p.r_f();
    let reads = if nontrivial(p) { si * r_f + (si % sf) * (p.k_i - (p.k_f % p.k_i).max(r_f)) } else { p.message_len() };
    Ok(AccessCost::new(reads, sf * r_f))
}

/// Cost of reading everything and re-encoding every final parity.
pub fn default_cost(p: &ConversionParams) -> AccessCost {
    AccessCost::new(p.message_len(), p.final_stripes() * p.r_f())
}

/// The bound matching the regime of `p`. `None` when `k_i = k_f` and
/// `r_i < r_f`, where no bound is established.
pub fn regime_bound(p: &ConversionParams) -> Option<AccessCost> {
    match p.regime() {
        Regime::Degenerate if p.r_i() >= p.r_f() => Some(AccessCost::new(0, 0)),
        Regime::Degenerate => None,
        Regime::Merge { .. } => merge_bound(p).ok(),
        Regime::Split { .. } => split_bound(p).ok(),
        Regime::General => general_bound(p).ok(),
    }
}

/// Partitions attaining the general bound.
///
/// Initial stripes are contiguous blocks. For `k_i < k_f`, with
/// `q = ⌊k_f/k_i⌋` and `e = k_f % k_i`, final stripe `g` takes whole initial
/// stripes `g·q .. g·q+q` and ends in an `e`-slot. The last `ς_I % ς_F`
/// initial stripes are cut: remainder stripe `r` puts its first `e` symbols in
/// group `r`, then its further full `e`-pieces and finally the leftover tails
/// fill the remaining slots in order.
///
/// For `k_i > k_f`, with `a = ⌊k_i/k_f⌋`, initial stripe `i` holds final
/// stripes `i·a .. i·a+a` outright and its `k_i % k_f` tail symbols are
/// concatenated into the final stripes numbered from `ς_I·a`.
pub fn optimal_partitions(p: &ConversionParams) -> Result<(PartitionPair, IntersectionMatrix)> {
    if p.k_i == p.k_f {
        return Err(Error::Regime("k_i = k_f needs no partition search".into()));
    }
    let pair = if p.k_i < p.k_f { merge_side_layout(p) } else { split_side_layout(p) };
    let m = IntersectionMatrix::from_partitions(&pair);
    Ok((pair, m))
}

fn contiguous_initial(p: &ConversionParams) -> Vec<Vec<usize>> {
    (0..p.initial_stripes()).map(|i| (i * p.k_i..(i + 1) * p.k_i).collect()).collect()
}

fn merge_side_layout(p: &ConversionParams) -> PartitionPair {
    let (ki, kf) = (p.k_i, p.k_f);
    let (q, e) = (kf / ki, kf % ki);
    let sf = p.final_stripes();
    let initial_sets = contiguous_initial(p);
    let mut final_sets: Vec<Vec<usize>> =
        (0..sf).map(|g| (g * q..(g + 1) * q).flat_map(|i| initial_sets[i].iter().copied()).collect()).collect();
    if e > 0 {
        let remainder = &initial_sets[sf * q..];
        let mut slots: Vec<Vec<usize>> = vec![Vec::new(); sf];
        for (r, set) in remainder.iter().enumerate() {
            slots[r] = set[..e].to_vec();
        }
        let full: Vec<&[usize]> = remainder.iter().flat_map(|set| set[e..].chunks_exact(e)).collect();
        let tails: Vec<usize> =
            remainder.iter().flat_map(|set| set[e..].chunks_exact(e).remainder().iter().copied()).collect();
        let mut next = remainder.len();
        for piece in full {
            slots[next] = piece.to_vec();
            next += 1;
        }
        for (slot, chunk) in slots[next..].iter_mut().zip(tails.chunks(e)) {
            *slot = chunk.to_vec();
        }
        for (set, slot) in final_sets.iter_mut().zip(slots) {
            set.extend(slot);
        }
    }
    PartitionPair { initial_sets, final_sets }
}

fn split_side_layout(p: &ConversionParams) -> PartitionPair {
    let (ki, kf) = (p.k_i, p.k_f);
    let a = ki / kf;
    let initial_sets = contiguous_initial(p);
    let mut final_sets = Vec::with_capacity(p.final_stripes());
    for set in &initial_sets {
        final_sets.extend(set[..a * kf].chunks(kf).map(<[usize]>::to_vec));
    }
    let tails: Vec<usize> = initial_sets.iter().flat_map(|set| set[a * kf..].iter().copied()).collect();
    final_sets.extend(tails.chunks(kf).map(<[usize]>::to_vec));
    PartitionPair { initial_sets, final_sets }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n_i: usize, k_i: usize, n_f: usize, k_f: usize) -> ConversionParams {
        ConversionParams::new(n_i, k_i, n_f, k_f).unwrap()
    }

    #[test]
    fn merge_bound_examples() {
        assert_eq!(merge_bound(&params(7, 5, 12, 10)).unwrap(), AccessCost::new(4, 2));
        assert_eq!(merge_bound(&params(6, 5, 12, 10)).unwrap().reads, 10);
        assert!(matches!(merge_bound(&params(7, 5, 7, 5)), Err(Error::Regime(_))));
        assert!(merge_bound(&params(6, 5, 13, 12)).is_err());
    }

    #[test]
    fn split_bound_examples() {
        assert_eq!(split_bound(&params(13, 10, 6, 5)).unwrap(), AccessCost::new(6, 2));
        assert!(split_bound(&params(7, 6, 7, 5)).is_err());
        // r_i = 1 < r_f = 2, ς = 2, n_f = 7
        let b = split_bound(&params(11, 10, 7, 5)).unwrap();
        assert_eq!(b.total, 14);
        // r_f >= k_f clamps reads at M
        let p = params(9, 4, 5, 2);
        assert_eq!(split_bound(&p).unwrap().reads, p.message_len());
    }

    #[test]
    fn gen_split_bound_examples() {
        assert_eq!(gen_split_bound(5, &[2, 2, 1], 1).unwrap(), 4);
        assert_eq!(gen_split_bound(5, &[5], 6).unwrap(), 5);
        assert_eq!(gen_split_bound(5, &[5], 5).unwrap(), 5);
        assert_eq!(gen_split_bound(5, &[5], 2).unwrap(), 2);
        assert!(gen_split_bound(5, &[2, 2], 1).is_err());
        assert!(gen_split_bound(5, &[5, 0], 1).is_err());
    }

    #[test]
    fn gen_merge_bound_examples() {
        assert_eq!(gen_merge_bound(&[5, 2], 1, 1), vec![1, 1]);
        assert_eq!(gen_merge_bound(&[5, 2], 1, 2), vec![5, 2]);
        assert!(gen_merge_bound(&[], 2, 1).is_empty());
    }

    #[test]
    fn general_bound_reference_values() {
        let b = general_bound(&params(6, 5, 13, 12)).unwrap();
        assert_eq!((b.reads, b.writes, b.total), (18, 5, 23));
        let b = general_bound(&params(13, 12, 6, 5)).unwrap();
        assert_eq!((b.reads, b.writes, b.total), (40, 12, 52));
        assert_eq!(general_bound(&params(6, 5, 14, 12)).unwrap().reads, 60);
        assert!(general_bound(&params(8, 5, 8, 5)).is_err());
    }

    #[test]
    fn general_bound_specializes_to_merge_and_split() {
        for k in 1..=8 {
            for s in 2..=4 {
                for r_i in 1..=4 {
                    for r_f in 1..=4 {
                        let p = params(k + r_i, k, s * k + r_f, s * k);
                        assert_eq!(general_bound(&p).unwrap(), merge_bound(&p).unwrap(), "{p:?}");
                        let p = params(s * k + r_i, s * k, k + r_f, k);
                        assert_eq!(general_bound(&p).unwrap(), split_bound(&p).unwrap(), "{p:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn general_bound_grows_with_r_f_up_to_m() {
        for k_i in 1..=8 {
            for k_f in (1..=8).filter(|&k| k != k_i) {
                let m = crate::framework::lcm(k_i, k_f);
                let mut prev = 0;
                for r_f in 1..=6 {
                    let reads = general_bound(&params(k_i + 6, k_i, k_f + r_f, k_f)).unwrap().reads;
                    assert!(reads >= prev && reads <= m);
                    if r_f >= k_i.min(k_f) {
                        assert_eq!(reads, m);
                    }
                    prev = reads;
                }
            }
        }
    }

    #[test]
    fn minimizer_row_maxima() {
        let (pp, m) = optimal_partitions(&params(6, 5, 13, 12)).unwrap();
        pp.validate(60, 5, 12).unwrap();
        let maxima = m.row_maxima();
        assert_eq!(maxima.iter().filter(|&&v| v == 5).count(), 10);
        assert_eq!(maxima.iter().filter(|&&v| v == 2).count(), 2);

        let (pp, m) = optimal_partitions(&params(13, 12, 6, 5)).unwrap();
        pp.validate(60, 12, 5).unwrap();
        assert_eq!(m.row_maxima(), vec![5; 5]);
        assert!(optimal_partitions(&params(8, 5, 8, 5)).is_err());
    }

    #[test]
    fn layouts_are_valid_partitions_with_expected_maxima() {
        for k_i in 1..=9 {
            for k_f in (1..=9).filter(|&k| k != k_i) {
                let p = params(k_i + 1, k_i, k_f + 1, k_f);
                let (pp, m) = optimal_partitions(&p).unwrap();
                pp.validate(p.message_len(), k_i, k_f).unwrap();
                for row in &m.entries {
                    assert_eq!(row.iter().sum::<usize>(), k_i);
                }
                let maxima = m.row_maxima();
                if k_i < k_f {
                    let rem = p.initial_stripes() % p.final_stripes();
                    let e = k_f % k_i;
                    let whole = p.initial_stripes() - rem;
                    assert!(maxima[..whole].iter().all(|&v| v == k_i));
                    assert!(maxima[whole..].iter().all(|&v| v == e));
                } else {
                    assert!(maxima.iter().all(|&v| v == k_f), "{p:?}");
                }
            }
        }
    }

    #[test]
    fn per_stripe_minima_sum_to_general_bound() {
        for k_i in 1..=8 {
            for k_f in (1..=8).filter(|&k| k != k_i) {
                for r_f in 1..=4 {
                    let p = params(k_i + 4, k_i, k_f + r_f, k_f);
                    let (_, m) = optimal_partitions(&p).unwrap();
                    let per_stripe: usize = m
                        .row_maxima()
                        .iter()
                        .map(|&mx| if r_f < k_i.min(k_f) { k_i - mx.saturating_sub(r_f) } else { k_i })
                        .sum();
                    assert_eq!(per_stripe, general_bound(&p).unwrap().reads, "{p:?}");
                }
            }
        }
    }

    #[test]
    fn regime_bound_dispatch() {
        assert_eq!(regime_bound(&params(8, 5, 8, 5)), Some(AccessCost::new(0, 0)));
        assert_eq!(regime_bound(&params(8, 5, 7, 5)), Some(AccessCost::new(0, 0)));
        assert_eq!(regime_bound(&params(6, 5, 8, 5)), None);
        assert_eq!(regime_bound(&params(7, 5, 12, 10)), Some(AccessCost::new(4, 2)));
        assert_eq!(default_cost(&params(6, 5, 13, 12)), AccessCost::new(60, 5));
    }
}
