use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::group::Scalar;
use super::CryptoError;

/// A point `(x, f(x))` on a sharing polynomial over Z_q.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharePoint {
    pub x: Scalar,
    pub y: Scalar,
}

impl SharePoint {
    pub fn new(x: Scalar, y: Scalar) -> Self {
        SharePoint { x, y }
    }

    pub fn at(x: u64, y: Scalar) -> Self {
        SharePoint { x: Scalar::from_u64(x), y }
    }
}

/// Evaluates at `x_eval` the unique polynomial of degree `< points.len()`
/// passing through `points`.
pub fn interpolate(points: &[SharePoint], x_eval: &Scalar) -> Result<Scalar, CryptoError> {
    if points.is_empty() {
        return Err(CryptoError::NoPoints);
    }
    let mut seen = HashSet::with_capacity(points.len());
    for p in points {
        if !seen.insert(p.x.to_bytes()) {
            return Err(CryptoError::DuplicateCoordinate);
        }
    }

    // Denominators prod_{m != j}(x_j - x_m), inverted in one batch.
    let mut denominators: Vec<curve25519_dalek::Scalar> = points
        .iter()
        .enumerate()
        .map(|(j, pj)| {
            points
                .iter()
                .enumerate()
                .filter(|(m, _)| *m != j)
                .fold(Scalar::ONE, |acc, (_, pm)| acc * (pj.x - pm.x))
                .0
        })
        .collect();
    curve25519_dalek::Scalar::batch_invert(&mut denominators);

    let mut acc = Scalar::ZERO;
    for (j, pj) in points.iter().enumerate() {
        let numerator = points
            .iter()
            .enumerate()
            .filter(|(m, _)| *m != j)
            .fold(Scalar::ONE, |acc, (_, pm)| acc * (*x_eval - pm.x));
        acc = acc + pj.y * numerator * Scalar(denominators[j]);
    }
    Ok(acc)
}
