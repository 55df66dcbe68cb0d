//! Permutation-resolved scoring and per-trial seeds.

use crate::error::{Error, Result};
use crate::sh::Direction;

pub const MAX_MATCHED_SOURCES: usize = 8;

/// Absolute per-source errors in degrees, in truth order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleError {
    pub theta_deg: f64,
    pub phi_deg: f64,
}

/// Assignment `est[perm[l]] ↔ truth[l]` minimizing the summed great-circle
/// distance. Ties go to the lexicographically first permutation.
pub fn best_assignment(truth: &[Direction], est: &[Direction]) -> Result<Vec<usize>> {
    if truth.len() != est.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} true DOAs but {} estimates",
            truth.len(),
            est.len()
        )));
    }
    if truth.len() > MAX_MATCHED_SOURCES {
        return Err(Error::Config(format!(
            "matching supports at most {MAX_MATCHED_SOURCES} sources, got {}",
            truth.len()
        )));
    }
    let l = truth.len();
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| est.iter().map(|e| t.angle_to(e)).collect())
        .collect();
    let mut best = (f64::INFINITY, (0..l).collect::<Vec<_>>());
    let mut perm = Vec::with_capacity(l);
    let mut used = vec![false; l];
    search(&cost, &mut perm, &mut used, 0.0, &mut best);
    Ok(best.1)
}

fn search(cost: &[Vec<f64>], perm: &mut Vec<usize>, used: &mut [bool], acc: f64, best: &mut (f64, Vec<usize>)) {
    let row = perm.len();
    if row == cost.len() {
        if acc < best.0 {
            *best = (acc, perm.clone());
        }
        return;
    }
    for j in 0..cost.len() {
        if !used[j] {
            used[j] = true;
            perm.push(j);
            search(cost, perm, used, acc + cost[row][j], best);
            perm.pop();
            used[j] = false;
        }
    }
}

/// Smallest distance between two azimuths, degrees, in `[0, 180]`.
pub fn wrapped_phi_error_deg(a_deg: f64, b_deg: f64) -> f64 {
    let d = (a_deg - b_deg).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Per-source angle errors after optimal matching.
pub fn match_and_score(truth: &[Direction], est: &[Direction]) -> Result<Vec<AngleError>> {
    let perm = best_assignment(truth, est)?;
    Ok(score_assigned(truth, est, &perm))
}

pub(crate) fn score_assigned(truth: &[Direction], est: &[Direction], perm: &[usize]) -> Vec<AngleError> {
    truth
        .iter()
        .zip(perm)
        .map(|(t, &j)| AngleError {
            theta_deg: (t.theta_deg() - est[j].theta_deg()).abs(),
            phi_deg: wrapped_phi_error_deg(t.phi_deg(), est[j].phi_deg()),
        })
        .collect()
}

/// SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xCBF2_9CE4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// `splitmix64(splitmix64(base_seed ^ fnv1a64(scenario)) ^ trial)`.
pub fn trial_seed(base_seed: u64, scenario: &str, trial: usize) -> u64 {
    splitmix64(splitmix64(base_seed ^ fnv1a64(scenario.as_bytes())) ^ trial as u64)
}
