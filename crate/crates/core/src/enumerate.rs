//! Mixed-radix walks over participation vectors.

use crate::{Error, Result, ENUMERATION_GUARD};

/// Number of points in `∏ᵢ {0..=bounds[i]}`.
pub fn box_size(bounds: &[u32]) -> u128 {
    bounds.iter().map(|&b| u128::from(b) + 1).product()
}

/// Fails with [`Error::TooLarge`] when the box exceeds `limit`.
pub fn guard(bounds: &[u32], limit: u128) -> Result<u128> {
    let size = box_size(bounds);
    if size > limit {
        return Err(Error::TooLarge { size, limit });
    }
    Ok(size)
}

/// Decodes the `index`-th point of the box, first coordinate varying slowest.
///
/// Points are produced in lexicographic order, so `decode(bounds, 0)` is the
/// all-zero vector and consecutive indices are lexicographic successors.
pub fn decode(bounds: &[u32], mut index: u128, out: &mut [u32]) {
    for (slot, &b) in out.iter_mut().zip(bounds).rev() {
        let radix = u128::from(b) + 1;
        *slot = (index % radix) as u32;
        index /= radix;
    }
}

/// Lexicographic iterator over every integer vector in `∏ᵢ {0..=bounds[i]}`.
#[derive(Debug, Clone)]
pub struct BoxIter {
    bounds: Vec<u32>,
    next: Option<Vec<u32>>,
}

impl BoxIter {
    pub fn new(bounds: &[u32]) -> Self {
        Self {
            bounds: bounds.to_vec(),
            next: Some(vec![0; bounds.len()]),
        }
    }

    /// Same as [`BoxIter::new`] but refuses boxes above [`ENUMERATION_GUARD`].
    pub fn guarded(bounds: &[u32]) -> Result<Self> {
        guard(bounds, ENUMERATION_GUARD)?;
        Ok(Self::new(bounds))
    }
}

impl Iterator for BoxIter {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for pos in (0..succ.len()).rev() {
            if succ[pos] < self.bounds[pos] {
                succ[pos] += 1;
                self.next = Some(succ);
                return Some(current);
            }
            succ[pos] = 0;
        }
        Some(current)
    }
}

/// Iterates the `2^I` corners `∏ᵢ {0, bounds[i]}`; bit `i` of the mask selects
/// `bounds[i]` for type `i`.
pub fn corners(bounds: &[u32]) -> impl Iterator<Item = (usize, Vec<u32>)> + '_ {
    (0..1usize << bounds.len()).map(move |mask| (mask, corner(bounds, mask)))
}

pub fn corner(bounds: &[u32], mask: usize) -> Vec<u32> {
    bounds
        .iter()
        .enumerate()
        .map(|(i, &b)| if mask >> i & 1 == 1 { b } else { 0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_iter_is_lexicographic_and_complete() {
        let all: Vec<_> = BoxIter::new(&[1, 2]).collect();
        assert_eq!(
            all,
            vec![
                vec![0, 0],
                vec![0, 1],
                vec![0, 2],
                vec![1, 0],
                vec![1, 1],
                vec![1, 2]
            ]
        );
        assert_eq!(box_size(&[1, 2]), 6);
    }

    #[test]
    fn decode_matches_iteration_order() {
        let bounds = [2, 0, 3];
        let mut buf = vec![0; 3];
        for (idx, v) in BoxIter::new(&bounds).enumerate() {
            decode(&bounds, idx as u128, &mut buf);
            assert_eq!(buf, v);
        }
    }

    #[test]
    fn empty_bounds_yield_single_point() {
        assert_eq!(BoxIter::new(&[]).count(), 1);
    }

    #[test]
    fn guard_rejects_large_boxes() {
        assert!(matches!(
            guard(&[9, 9, 9, 9], 1000),
            Err(Error::TooLarge { size: 10_000, .. })
        ));
    }

    #[test]
    fn corners_follow_mask_bits() {
        let c: Vec<_> = corners(&[3, 5]).map(|(_, v)| v).collect();
        assert_eq!(c, vec![vec![0, 0], vec![3, 0], vec![0, 5], vec![3, 5]]);
    }
}
