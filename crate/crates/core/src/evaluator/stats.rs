//! Small descriptive statistics, generic over the float type.

use num_traits::Float;
use serde::Serialize;

fn cast<F: Float>(n: usize) -> F {
    F::from(n).expect("count fits in a float")
}

pub fn mean<F: Float>(xs: &[F]) -> Option<F> {
    if xs.is_empty() {
        return None;
    }
    Some(xs.iter().fold(F::zero(), |acc, &x| acc + x) / cast(xs.len()))
}

/// Sample standard deviation (n - 1 denominator); zero for a single value.
pub fn std_dev<F: Float>(xs: &[F]) -> Option<F> {
    let m = mean(xs)?;
    if xs.len() == 1 {
        return Some(F::zero());
    }
    let ss = xs.iter().fold(F::zero(), |acc, &x| acc + (x - m) * (x - m));
    Some((ss / cast(xs.len() - 1)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary<F> {
    pub mean: F,
    pub std: F,
    pub n: usize,
}

pub fn summarize<F: Float>(xs: &[F]) -> Option<Summary<F>> {
    Some(Summary {
        mean: mean(xs)?,
        std: std_dev(xs)?,
        n: xs.len(),
    })
}

/// Number of items in the leading `frac` share of `n`, rounded up, at least
/// one when `n > 0`.
pub fn share_count(n: usize, frac: f64) -> usize {
    if n == 0 {
        return 0;
    }
    ((n as f64 * frac).ceil() as usize).clamp(1, n)
}

/// Mean of the first and last shares of an already ordered sequence.
pub fn head_tail_means<F: Float>(ordered: &[F], head_frac: f64, tail_frac: f64) -> Option<(F, F)> {
    let n = ordered.len();
    let head = mean(&ordered[..share_count(n, head_frac)])?;
    let tail = mean(&ordered[n - share_count(n, tail_frac)..])?;
    Some((head, tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mean_and_std() {
        let xs = [50.0, 60.0, 70.0, 40.0, 80.0];
        assert_relative_eq!(mean(&xs).unwrap(), 60.0);
        // deviations 10,0,10,20,20 -> ss = 1000, /4 = 250
        assert_relative_eq!(std_dev(&xs).unwrap(), 250f64.sqrt());
        assert_eq!(std_dev(&[3.0f32]), Some(0.0));
        assert_eq!(mean::<f64>(&[]), None);
    }

    #[test]
    fn shares() {
        assert_eq!(share_count(5, 0.2), 1);
        assert_eq!(share_count(5, 0.1), 1);
        assert_eq!(share_count(11, 0.2), 3);
        assert_eq!(share_count(0, 0.2), 0);
        let (h, t) = head_tail_means(
            &[9.0, 7.0, 5.0, 3.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0],
            0.2,
            0.1,
        )
        .unwrap();
        assert_relative_eq!(h, 8.0);
        assert_relative_eq!(t, 2.0);
    }
}
