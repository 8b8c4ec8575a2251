//! Fractal measures and dimensions of one-dimensional sets.
//!
//! Sets are finite unions of disjoint closed sub-intervals of a bounded time
//! window (degenerate intervals encode points). Genuine fractals enter as
//! finite-level prefixes, e.g. [`FractalSet::cantor_prefix`].
//!
//! Conventions, fixed once and not configurable:
//! * balls of radius `eta` are closed intervals of length `2*eta`;
//! * `0^0 = 1` for the `s = 0` pre-measure, so that it agrees with the
//!   counting measure on finite sets;
//! * the strict `diam < eta` constraint on covers is relaxed internally to
//!   `diam <= eta * (1 - 2^-40)` to keep the covering DP well-posed under
//!   floating point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative shrink applied to the cover-diameter budget (`diam < eta` in the
/// definition becomes `diam <= eta * DIAM_SLACK`).
pub const DIAM_SLACK: f64 = 1.0 - 1.0 / (1u64 << 40) as f64;

#[derive(Debug, Error, PartialEq)]
pub enum FractalError {
    #[error("scale eta must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("exponent s must lie in [0, 1], got {0}")]
    ExponentOutOfRange(f64),
    #[error("at least 3 scales are required for a dimension fit, got {0}")]
    TooFewScales(usize),
    #[error("scales must be strictly decreasing")]
    ScalesNotDecreasing,
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("invalid interval [{0}, {1}]: endpoints must be finite with lo <= hi")]
    InvalidInterval(f64, f64),
    #[error("interval [{0}, {1}] lies outside the window [{2}, {3}]")]
    OutsideWindow(f64, f64, f64, f64),
    #[error("malformed point-set line {0}: {1:?}")]
    MalformedLine(usize, String),
}

/// Finite union of disjoint closed sub-intervals of a bounded window.
///
/// Intervals are sorted by left endpoint; `lo == hi` encodes a point. The
/// empty list is a valid (empty) set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractalSet {
    intervals: Vec<(f64, f64)>,
    window: (f64, f64),
}

impl FractalSet {
    /// Builds a set from raw intervals. Overlapping or touching intervals are
    /// merged so the stored representation is always disjoint and sorted.
    pub fn new(mut intervals: Vec<(f64, f64)>, window: (f64, f64)) -> Result<Self, FractalError> {
        if !(window.0.is_finite() && window.1.is_finite() && window.0 <= window.1) {
            return Err(FractalError::InvalidInterval(window.0, window.1));
        }
        for &(lo, hi) in &intervals {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(FractalError::InvalidInterval(lo, hi));
            }
            if lo < window.0 || hi > window.1 {
                return Err(FractalError::OutsideWindow(lo, hi, window.0, window.1));
            }
        }
        intervals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (lo, hi) in intervals {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Ok(Self { intervals: merged, window })
    }

    pub fn empty(window: (f64, f64)) -> Self {
        Self { intervals: Vec::new(), window }
    }

    pub fn from_points(points: &[f64], window: (f64, f64)) -> Result<Self, FractalError> {
        Self::new(points.iter().map(|&p| (p, p)).collect(), window)
    }

    /// Level-`k` prefix of the middle-thirds Cantor set, affinely mapped onto
    /// `[a, b]`: `2^k` closed intervals of length `(b - a) * 3^-k`.
    pub fn cantor_prefix(level: u32, a: f64, b: f64) -> Self {
        let mut ivs = vec![(0.0_f64, 1.0_f64)];
        for _ in 0..level {
            ivs = ivs
                .into_iter()
                .flat_map(|(lo, hi)| {
                    let third = (hi - lo) / 3.0;
                    [(lo, lo + third), (hi - third, hi)]
                })
                .collect();
        }
        let scale = b - a;
        let intervals = ivs.into_iter().map(|(lo, hi)| (a + scale * lo, a + scale * hi)).collect();
        Self { intervals, window: (a, b) }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Parses the plain-text point-set format: one real per line (a point) or
    /// `lo hi` per line (an interval); lines starting with `#` are ignored.
    /// The window is the hull of the parsed data.
    pub fn parse(text: &str) -> Result<Self, FractalError> {
        let mut intervals = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse =
                |s: &str| s.parse::<f64>().map_err(|_| FractalError::MalformedLine(idx + 1, line.to_string()));
            match fields.as_slice() {
                [p] => {
                    let p = parse(p)?;
                    intervals.push((p, p));
                }
                [lo, hi] => intervals.push((parse(lo)?, parse(hi)?)),
                _ => return Err(FractalError::MalformedLine(idx + 1, line.to_string())),
            }
        }
        let window = intervals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(a, b)| (lo.min(a), hi.max(b)));
        let window = if intervals.is_empty() { (0.0, 0.0) } else { window };
        Self::new(intervals, window)
    }

    /// Renders the set in the same plain-text format accepted by [`parse`].
    ///
    /// [`parse`]: FractalSet::parse
    pub fn render(&self) -> String {
        let mut out = String::new();
        for &(lo, hi) in &self.intervals {
            if lo == hi {
                out.push_str(&format!("{lo:.17e}\n"));
            } else {
                out.push_str(&format!("{lo:.17e} {hi:.17e}\n"));
            }
        }
        out
    }
}

/// A realized covering together with the value it certifies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverEstimate {
    pub s: f64,
    pub eta: f64,
    pub value: f64,
    /// Covering intervals realizing `value`; every component of the input set
    /// is contained in their union.
    pub cover: Vec<(f64, f64)>,
}

/// Log-log regression output of the box-counting estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionFit {
    pub scales: Vec<f64>,
    pub log_counts: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `slope` clamped to `[0, 1]`.
    pub dimension: f64,
}

/// Exact minimal number of closed balls of radius `eta` (intervals of length
/// `2*eta`) covering `A`, by a greedy left-to-right sweep (optimal in 1-D).
/// Also returns the realized cover.
pub fn ball_count(set: &FractalSet, eta: f64) -> Result<(u64, Vec<(f64, f64)>), FractalError> {
    if !(eta > 0.0) {
        return Err(FractalError::NonPositiveScale(eta));
    }
    let mut count = 0u64;
    let mut cover = Vec::new();
    let mut covered_up_to = f64::NEG_INFINITY;
    // Ties at round-off resolve toward coverage, so exactly self-similar
    // inputs (e.g. Cantor prefixes at eta = 3^-k / 2) count exactly.
    let limit = |x: f64| {
        if x.is_finite() {
            x + 64.0 * f64::EPSILON * (1.0 + x.abs())
        } else {
            x
        }
    };
    for &(lo, hi) in set.intervals() {
        // Points <= covered_up_to are already covered (closed balls).
        let mut start = if lo > limit(covered_up_to) { lo } else { covered_up_to };
        while hi > limit(covered_up_to) {
            cover.push((start, start + 2.0 * eta));
            covered_up_to = start + 2.0 * eta;
            count += 1;
            start = covered_up_to;
        }
    }
    Ok((count, cover))
}

/// Finite-scale Minkowski-content sequence `(eta, eta^s * N(A, eta))` whose
/// limsup defines the upper s-dimensional content. No extrapolation is done.
pub fn minkowski_content(
    set: &FractalSet,
    s: f64,
    etas: &[f64],
) -> Result<Vec<(f64, f64)>, FractalError> {
    if !(0.0..=1.0).contains(&s) {
        return Err(FractalError::ExponentOutOfRange(s));
    }
    check_decreasing(etas)?;
    etas.iter()
        .map(|&eta| {
            let (n, _) = ball_count(set, eta)?;
            Ok((eta, eta.powf(s) * n as f64))
        })
        .collect()
}

/// Cost of covering a solid stretch of length `len` by intervals of diameter
/// at most `budget`, measured by the sum of `diam^s`.
///
/// For `s in (0, 1]` the concavity of `x -> x^s` makes the minimum a chain of
/// full-budget pieces plus one remainder; for `s = 0` the cost is the piece
/// count, with `0^0 = 1` for a degenerate stretch.
fn solid_cost(len: f64, s: f64, budget: f64) -> f64 {
    if len == 0.0 {
        return if s == 0.0 { 1.0 } else { 0.0 };
    }
    if s == 0.0 {
        return (len / budget).ceil();
    }
    if len <= budget {
        return len.powf(s);
    }
    let k = (len / budget).floor();
    let r = len - k * budget;
    let mut cost = k * budget.powf(s);
    if r > 0.0 {
        cost += r.powf(s);
    }
    cost
}

/// Pieces realizing [`solid_cost`], laid left to right from `start`.
fn solid_pieces(start: f64, len: f64, budget: f64, out: &mut Vec<(f64, f64)>) {
    if len == 0.0 {
        out.push((start, start));
        return;
    }
    let mut pos = start;
    while len - (pos - start) > budget {
        out.push((pos, pos + budget));
        pos += budget;
    }
    out.push((pos, start + len));
}

/// Exact infimum of `sum diam(I_j)^s` over covers of `A` by intervals of
/// diameter below `eta`, by dynamic programming over the sorted component
/// endpoints. A cover element may bridge gaps between components.
pub fn hausdorff_premeasure(set: &FractalSet, s: f64, eta: f64) -> Result<CoverEstimate, FractalError> {
    if !(eta > 0.0) {
        return Err(FractalError::NonPositiveScale(eta));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(FractalError::ExponentOutOfRange(s));
    }
    let budget = eta * DIAM_SLACK;
    let comps = set.intervals();
    let n = comps.len();
    // dp[i] = minimal cost of covering components i..n; group[i] = index one
    // past the last component bridged with component i in an optimal cover.
    let mut dp = vec![(0.0_f64, 0u64); n + 1];
    let mut group = vec![0usize; n];
    for i in (0..n).rev() {
        let mut best = (f64::INFINITY, u64::MAX);
        let mut best_j = i;
        for j in i..n {
            let hull = comps[j].1 - comps[i].0;
            let cost = solid_cost(hull, s, budget);
            let pieces = if hull == 0.0 { 1 } else { (hull / budget).ceil() as u64 };
            let cand = (cost + dp[j + 1].0, pieces + dp[j + 1].1);
            // Ties broken by fewer intervals, then leftmost split (scan order).
            if cand.0 < best.0 - 1e-15 * (1.0 + best.0.abs())
                || ((cand.0 - best.0).abs() <= 1e-15 * (1.0 + best.0.abs()) && cand.1 < best.1)
            {
                best = cand;
                best_j = j;
            }
        }
        dp[i] = best;
        group[i] = best_j + 1;
    }
    let mut cover = Vec::new();
    let mut i = 0;
    while i < n {
        let j = group[i];
        solid_pieces(comps[i].0, comps[j - 1].1 - comps[i].0, budget, &mut cover);
        i = j;
    }
    let value = if n == 0 { 0.0 } else { dp[0].0 };
    Ok(CoverEstimate { s, eta, value, cover })
}

/// Least-squares fit of `log N(A, eta)` against `log(1/eta)`; the slope,
/// clamped to `[0, 1]`, is the declared box-counting dimension estimator.
pub fn dimension_fit(set: &FractalSet, etas: &[f64]) -> Result<DimensionFit, FractalError> {
    if etas.len() < 3 {
        return Err(FractalError::TooFewScales(etas.len()));
    }
    check_decreasing(etas)?;
    let mut xs = Vec::with_capacity(etas.len());
    let mut ys = Vec::with_capacity(etas.len());
    for &eta in etas {
        let (n, _) = ball_count(set, eta)?;
        xs.push((1.0 / eta).ln());
        ys.push((n.max(1)) as f64);
    }
    let log_counts: Vec<f64> = ys.iter().map(|&c| c.ln()).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &log_counts);
    Ok(DimensionFit {
        scales: etas.to_vec(),
        log_counts,
        slope,
        intercept,
        r_squared,
        dimension: slope.clamp(0.0, 1.0),
    })
}

/// Ordinary least squares with coefficient of determination.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r_squared = if syy > 1e-300 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r_squared)
}

/// 1-D Vitali 5r-covering selection: returns indices of centers with pairwise
/// distance at least `2 * radius` such that balls of radius `5 * radius`
/// around them cover all input centers.
pub fn vitali_subcover(centers: &[f64], radius: f64) -> Result<Vec<usize>, FractalError> {
    if !(radius > 0.0) {
        return Err(FractalError::NonPositiveRadius(radius));
    }
    let mut order: Vec<usize> = (0..centers.len()).collect();
    order.sort_by(|&a, &b| centers[a].partial_cmp(&centers[b]).unwrap());
    let mut selected = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for idx in order {
        if centers[idx] - last >= 2.0 * radius {
            selected.push(idx);
            last = centers[idx];
        }
    }
    Ok(selected)
}

fn check_decreasing(etas: &[f64]) -> Result<(), FractalError> {
    for w in etas.windows(2) {
        if !(w[1] < w[0]) {
            return Err(FractalError::ScalesNotDecreasing);
        }
    }
    for &eta in etas {
        if !(eta > 0.0) {
            return Err(FractalError::NonPositiveScale(eta));
        }
    }
    Ok(())
}
