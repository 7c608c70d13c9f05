use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::table::{MatchTable, Wdl};

/// Elo points per natural-log unit of odds: 400 / ln(10).
pub const ELO_SCALE: f64 = 400.0 / std::f64::consts::LN_10;

/// The anchor everything is measured against: the mean rating of the
/// fitted players is pinned to 1000.
pub const ANCHOR_MEAN: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum RatingError {
    #[error("pair has no games")]
    EmptyMatch,
    #[error("match graph is disconnected; components: {0:?}")]
    Disconnected(Vec<Vec<String>>),
    #[error("normal equations are singular")]
    Singular,
}

/// Expected score of a player rated `r_a` against `r_b`: the probability
/// of winning implied by the rating difference.
pub fn expected_score(r_a: f64, r_b: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((r_b - r_a) / 400.0))
}

/// Rating difference `r_j - r_i` and its variance estimated from one
/// pair's win/draw/loss counts, with the one-extra-draw (Jeffreys-style)
/// adjustment keeping one-sided results finite. Draws count half.
pub fn pair_estimate(wdl: Wdl) -> Result<(f64, f64), RatingError> {
    let n = wdl.games() as f64;
    if wdl.games() == 0 {
        return Err(RatingError::EmptyMatch);
    }
    let p_hat = (wdl.wins as f64 + (wdl.draws as f64 + 1.0) / 2.0) / (n + 1.0);
    let difference = ELO_SCALE * (1.0 / p_hat - 1.0).ln();
    let variance = ELO_SCALE * ELO_SCALE / (n * p_hat * (1.0 - p_hat));
    Ok((difference, variance))
}

/// Fitted ratings with their standard deviations, aligned with the match
/// table's player list.
#[derive(Debug, Clone)]
pub struct RatingVector {
    pub players: Vec<String>,
    pub ratings: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl RatingVector {
    pub fn of(&self, player: &str) -> Option<(f64, f64)> {
        self.players
            .iter()
            .position(|p| p == player)
            .map(|i| (self.ratings[i], self.sigmas[i]))
    }
}

/// Ordinary least squares on the pairwise difference equations plus the
/// mean anchor. The rough in-loop estimate used by matchmaking.
pub fn fit_ratings_ols(table: &MatchTable) -> Result<RatingVector, RatingError> {
    fit(table, false)
}

/// Weighted least squares with inverse-variance weights from
/// [`pair_estimate`]; the per-player standard deviations come from the
/// solution covariance. This is what the reported figures use.
pub fn fit_ratings_wls(table: &MatchTable) -> Result<RatingVector, RatingError> {
    fit(table, true)
}

fn fit(table: &MatchTable, weighted: bool) -> Result<RatingVector, RatingError> {
    let players = table.players().to_vec();
    let n = players.len();
    if n == 0 {
        return Ok(RatingVector {
            players,
            ratings: vec![],
            sigmas: vec![],
        });
    }
    let components = table.components();
    if components.len() > 1 {
        return Err(RatingError::Disconnected(components));
    }

    let pairs = table.pairs();
    let mut rows = Vec::with_capacity(pairs.len() + 1);
    let mut max_weight = f64::MIN_POSITIVE;
    for (i, j, wdl) in pairs {
        let (difference, variance) = pair_estimate(wdl)?;
        let weight = if weighted { 1.0 / variance } else { 1.0 };
        max_weight = max_weight.max(weight);
        rows.push((i, j, difference, weight));
    }
    if rows.is_empty() {
        max_weight = 1.0;
    }

    // Heavily weighted anchor row: sum of ratings = n * 1000. Solving for
    // deviations from the anchor mean keeps every magnitude near the pair
    // scale, and QR on the weighted design matrix keeps the solve accurate
    // despite the anchor's weight.
    let anchor_weight = 1e6 * max_weight;
    let m = rows.len() + 1;
    let mut design = DMatrix::<f64>::zeros(m, n);
    let mut rhs = DVector::<f64>::zeros(m);
    for (row, &(i, j, difference, weight)) in rows.iter().enumerate() {
        let s = weight.sqrt();
        design[(row, i)] = -s;
        design[(row, j)] = s;
        rhs[row] = s * difference;
    }
    let s = anchor_weight.sqrt();
    for col in 0..n {
        design[(m - 1, col)] = s;
    }
    rhs[m - 1] = 0.0;

    let qr = design.qr();
    // Least squares via QR: x = R^-1 (Q^T rhs) restricted to the first n
    // rows.
    let mut qtb = rhs.clone();
    qr.q_tr_mul(&mut qtb);
    let reduced = DVector::<f64>::from_iterator(n, qtb.iter().take(n).copied());
    let r = qr.r();
    let x = r
        .solve_upper_triangular(&reduced)
        .ok_or(RatingError::Singular)?;
    // Covariance of the solution: (A^T W A)^-1 = R^-1 R^-T.
    let identity = DMatrix::<f64>::identity(n, n);
    let r_inv = r
        .solve_upper_triangular(&identity)
        .ok_or(RatingError::Singular)?;
    let cov = &r_inv * r_inv.transpose();

    let ratings: Vec<f64> = x.iter().map(|v| v + ANCHOR_MEAN).collect();
    let sigmas: Vec<f64> = (0..n).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    Ok(RatingVector {
        players,
        ratings,
        sigmas,
    })
}
