//! Distance functions.
//!
//! Coordinates are `f32`; accumulation happens in `f64` and the result is
//! rounded once to `f32`. Every module compares and stores these rounded
//! values, so two code paths that evaluate the same pair always agree bit
//! for bit. Ties between equal distances are broken by the lower point id
//! everywhere in the crate.

use std::fmt;
use std::str::FromStr;

use crate::error::{RbcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    /// ℓ2, reported as the true root.
    Euclidean,
    /// ℓ1.
    Manhattan,
}

impl MetricKind {
    pub fn code(self) -> u32 {
        match self {
            MetricKind::Euclidean => 0,
            MetricKind::Manhattan => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(MetricKind::Euclidean),
            1 => Some(MetricKind::Manhattan),
            _ => None,
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::Euclidean => "l2",
            MetricKind::Manhattan => "l1",
        })
    }
}

impl FromStr for MetricKind {
    type Err = RbcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" | "euclidean" => Ok(MetricKind::Euclidean),
            "l1" | "manhattan" => Ok(MetricKind::Manhattan),
            other => Err(RbcError::invalid(format!("unknown metric '{other}'"))),
        }
    }
}

/// The metric in force together with the dimension it applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub dim: usize,
}

impl MetricSpec {
    pub fn new(kind: MetricKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(RbcError::invalid("metric dimension must be positive"));
        }
        Ok(Self { kind, dim })
    }

    /// Checked distance: validates dimensions and finiteness.
    pub fn distance(&self, a: &[f32], b: &[f32]) -> Result<f32> {
        if a.len() != self.dim || b.len() != self.dim {
            return Err(RbcError::invalid(format!(
                "dimension mismatch: metric has d={}, got {} and {}",
                self.dim,
                a.len(),
                b.len()
            )));
        }
        if a.iter().chain(b).any(|v| !v.is_finite()) {
            return Err(RbcError::invalid("non-finite coordinate"));
        }
        Ok(self.dist(a, b))
    }

    /// Unchecked distance for hot loops. Callers guarantee matching lengths.
    #[inline]
    pub fn dist(&self, a: &[f32], b: &[f32]) -> f32 {
        debug_assert_eq!(a.len(), b.len());
        match self.kind {
            MetricKind::Euclidean => l2(a, b),
            MetricKind::Manhattan => l1(a, b),
        }
    }
}

// Four independent partial sums in a fixed order: vectorizes, and the
// result depends only on the inputs.
#[inline]
fn l2(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            let t = f64::from(x[l]) - f64::from(y[l]);
            acc[l] += t * t;
        }
    }
    for (l, (x, y)) in ra.iter().zip(rb).enumerate() {
        let t = f64::from(*x) - f64::from(*y);
        acc[l] += t * t;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])).sqrt() as f32
}

#[inline]
fn l1(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += (f64::from(x[l]) - f64::from(y[l])).abs();
        }
    }
    for (l, (x, y)) in ra.iter().zip(rb).enumerate() {
        acc[l] += (f64::from(*x) - f64::from(*y)).abs();
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) as f32
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        let l2 = MetricSpec::new(MetricKind::Euclidean, 2).unwrap();
        assert_eq!(l2.distance(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(l2.distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        let l1 = MetricSpec::new(MetricKind::Manhattan, 3).unwrap();
        assert_eq!(l1.distance(&[1.0, 2.0, 3.0], &[4.0, 0.0, 3.0]).unwrap(), 5.0);
    }

    #[test]
    fn rejects_bad_input() {
        let m = MetricSpec::new(MetricKind::Euclidean, 2).unwrap();
        assert!(matches!(m.distance(&[0.0], &[0.0, 1.0]), Err(RbcError::InvalidArgument(_))));
        assert!(matches!(
            m.distance(&[f32::NAN, 0.0], &[0.0, 1.0]),
            Err(RbcError::InvalidArgument(_))
        ));
        assert!(MetricSpec::new(MetricKind::Manhattan, 0).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!("l1".parse::<MetricKind>().unwrap(), MetricKind::Manhattan);
        assert_eq!("L2".parse::<MetricKind>().unwrap(), MetricKind::Euclidean);
        assert!("cosine".parse::<MetricKind>().is_err());
    }

    fn triple(d: usize) -> impl Strategy<Value = (Vec<f32>, Vec<f32>, Vec<f32>)> {
        let p = || proptest::collection::vec(-100.0f32..100.0, d);
        (p(), p(), p())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn metric_axioms((x, y, z) in triple(7), manhattan in any::<bool>()) {
            let kind = if manhattan { MetricKind::Manhattan } else { MetricKind::Euclidean };
            let m = MetricSpec::new(kind, 7).unwrap();
            let tol = 1e3 * f32::EPSILON * 7.0;
            let (xy, yz, xz) = (m.dist(&x, &y), m.dist(&y, &z), m.dist(&x, &z));
            prop_assert!(xy >= 0.0);
            prop_assert_eq!(xy, m.dist(&y, &x));
            prop_assert_eq!(m.dist(&x, &x), 0.0);
            prop_assert!(xz <= xy + yz + tol);
        }
    }
}
