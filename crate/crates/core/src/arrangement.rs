//! ReLU activation patterns of a data matrix.
//!
//! Every weight vector `w` induces the 0/1 mask `1{x_i . w >= 0}` over the rows of `X`.
//! The distinct masks are the regions of the central hyperplane arrangement cut out by
//! the rows. Exact enumeration inserts one hyperplane at a time and only calls the
//! margin LP for regions the new hyperplane might split; sampled enumeration draws
//! Gaussian weight vectors and deduplicates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Relative margin below which a sign is treated as a tie.
const MARGIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnumerationMode {
    Exact,
    Sampled,
}

impl fmt::Display for EnumerationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnumerationMode::Exact => "exact",
            EnumerationMode::Sampled => "sampled",
        })
    }
}

impl FromStr for EnumerationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(EnumerationMode::Exact),
            "sampled" => Ok(EnumerationMode::Sampled),
            other => Err(Error::Config(format!("unknown enumeration mode `{other}`"))),
        }
    }
}

/// One diagonal matrix `D_i`, stored as its diagonal, plus a weight vector realizing it.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationPattern {
    pub mask: Vec<bool>,
    pub witness: DVector<f64>,
    /// Set when some nonzero row sits on the witness hyperplane (within tolerance).
    pub degenerate: bool,
}

impl ActivationPattern {
    /// The mask as a string of `0`/`1` characters, row order.
    pub fn mask_string(&self) -> String {
        mask_to_string(&self.mask)
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

pub fn mask_to_string(mask: &[bool]) -> String {
    mask.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn mask_from_str(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '1' => Ok(true),
            '0' => Ok(false),
            other => Err(Error::Config(format!("invalid mask character `{other}`"))),
        })
        .collect()
}

/// Patterns in canonical (lexicographic mask) order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSet {
    pub patterns: Vec<ActivationPattern>,
    pub rank: usize,
    pub mode: EnumerationMode,
    pub sample_budget: usize,
    pub seed: u64,
    /// All-zero rows of the data matrix. Their mask bit is always 1.
    pub degenerate_rows: Vec<usize>,
}

impl PatternSet {
    /// Build a set from externally supplied masks (e.g. a pattern file).
    /// Masks are deduplicated and sorted.
    pub fn from_masks(data: &Dataset, masks: Vec<Vec<bool>>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for mask in masks {
            if mask.len() != data.n() {
                return Err(Error::mismatch(data.n(), mask.len()));
            }
            let found = witness(&mask, data)?;
            let degenerate = found.is_none();
            let witness = found.unwrap_or_else(|| DVector::zeros(data.d()));
            map.entry(mask.clone()).or_insert(ActivationPattern {
                mask,
                witness,
                degenerate,
            });
        }
        Ok(Self {
            patterns: map.into_values().collect(),
            rank: matrix_rank(data.x()),
            mode: EnumerationMode::Exact,
            sample_budget: 0,
            seed: 0,
            degenerate_rows: data.zero_rows(),
        })
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn masks(&self) -> impl Iterator<Item = &[bool]> {
        self.patterns.iter().map(|p| p.mask.as_slice())
    }
}

/// Numerical rank via singular values.
pub fn matrix_rank(x: &DMatrix<f64>) -> usize {
    let svd = x.clone().svd(false, false);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return 0;
    }
    let eps = (x.nrows().max(x.ncols()) as f64) * f64::EPSILON * smax;
    svd.singular_values.iter().filter(|&&s| s > eps).count()
}

/// Region count of a central arrangement of `n` hyperplanes in general position
/// spanning rank `r`: `2 * sum_{k<r} C(n-1, k)`.
pub fn exact_region_count(n: usize, r: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    let mut binom = 1.0;
    for k in 0..r.min(n) {
        if k > 0 {
            binom *= (n - k) as f64 / k as f64;
        }
        total += binom;
    }
    2.0 * total
}

/// Upper bound `2r (e (n-1) / r)^r` on the number of patterns.
pub fn pattern_bound(n: usize, r: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!("pattern_bound needs n >= 2, got {n}")));
    }
    if r < 1 {
        return Err(Error::domain("pattern_bound needs r >= 1"));
    }
    let r_f = r as f64;
    Ok(2.0 * r_f * (std::f64::consts::E * (n - 1) as f64 / r_f).powf(r_f))
}

fn margin_scale(x: &DMatrix<f64>) -> f64 {
    (0..x.nrows())
        .map(|i| x.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE)
}

/// Maximize `t` subject to `s_i x_i . w >= t` over the given `(row, sign)` pairs and
/// `|w_j| <= 1`. Returns the maximizer and its margin.
fn max_margin(x: &DMatrix<f64>, rows: &[(usize, f64)]) -> Option<(DVector<f64>, f64)> {
    let d = x.ncols();
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let w: Vec<_> = (0..d).map(|_| problem.add_var(0.0, (-1.0, 1.0))).collect();
    let cap = 1.0 + margin_scale(x);
    let t = problem.add_var(1.0, (-cap, cap));
    for &(i, sign) in rows {
        let mut terms: Vec<_> = w
            .iter()
            .enumerate()
            .filter(|(j, _)| x[(i, *j)] != 0.0)
            .map(|(j, &var)| (var, sign * x[(i, j)]))
            .collect();
        if terms.is_empty() {
            // Zero row: the margin is pinned at zero.
            return None;
        }
        terms.push((t, -1.0));
        problem.add_constraint(terms.as_slice(), ComparisonOp::Ge, 0.0);
    }
    let solution = problem.solve().ok()?.into_solution().ok()?;
    let witness = DVector::from_iterator(d, w.iter().map(|&v| solution.var_value(v)));
    Some((witness, solution.var_value(t)))
}

/// Find `w` with `|w|_inf <= 1` maximizing `min_i s_i x_i . w`, where `s_i = +1` for
/// active rows. `None` when the best margin is not strictly positive, i.e. the mask
/// is not a full-dimensional region.
///
/// All-zero rows may be marked active (they always evaluate to `0 >= 0`); marking
/// one inactive makes the mask infeasible.
pub fn witness(mask: &[bool], data: &Dataset) -> Result<Option<DVector<f64>>> {
    if mask.len() != data.n() {
        return Err(Error::mismatch(data.n(), mask.len()));
    }
    let x = data.x();
    let zero_rows = data.zero_rows();
    if zero_rows.iter().any(|&i| !mask[i]) {
        return Ok(None);
    }
    let rows: Vec<(usize, f64)> = (0..data.n())
        .filter(|i| zero_rows.binary_search(i).is_err())
        .map(|i| (i, if mask[i] { 1.0 } else { -1.0 }))
        .collect();
    if rows.is_empty() {
        return Ok(Some(DVector::from_element(data.d(), 1.0)));
    }
    let tol = MARGIN_TOL * margin_scale(x);
    Ok(max_margin(x, &rows).and_then(|(w, t)| (t > tol).then_some(w)))
}

/// Enumerate activation patterns.
///
/// `Exact` requires the generic region count for `(n, rank)` to fit in `budget` and
/// rejects all-zero rows. `Sampled` draws `budget` standard Gaussian weight vectors
/// from a ChaCha stream seeded by `seed`. Output is sorted lexicographically by mask.
pub fn enumerate_patterns(
    data: &Dataset,
    mode: EnumerationMode,
    budget: usize,
    seed: u64,
) -> Result<PatternSet> {
    if budget == 0 {
        return Err(Error::domain("pattern budget must be positive"));
    }
    let rank = matrix_rank(data.x());
    let degenerate_rows = data.zero_rows();
    let patterns = match mode {
        EnumerationMode::Exact => {
            if let Some(&row) = degenerate_rows.first() {
                return Err(Error::DegenerateRow { row });
            }
            let required = exact_region_count(data.n(), rank);
            if required > budget as f64 {
                return Err(Error::BudgetExceeded { required, budget });
            }
            enumerate_exact(data.x())
        }
        EnumerationMode::Sampled => enumerate_sampled(data.x(), budget, seed),
    };
    Ok(PatternSet {
        patterns,
        rank,
        mode,
        sample_budget: budget,
        seed,
        degenerate_rows,
    })
}

fn enumerate_exact(x: &DMatrix<f64>) -> Vec<ActivationPattern> {
    let (n, d) = x.shape();
    let tol = MARGIN_TOL * margin_scale(x);
    let mut regions: Vec<(Vec<bool>, DVector<f64>)> = vec![(Vec::new(), DVector::zeros(d))];
    let mut rows: Vec<(usize, f64)> = Vec::with_capacity(n);

    for j in 0..n {
        let xj = x.row(j);
        let mut next = Vec::with_capacity(regions.len() * 2);
        for (prefix, w) in regions {
            let value = xj.dot(&w.transpose());
            for side in [false, true] {
                let inherits = if side { value > tol } else { value < -tol };
                if inherits {
                    let mut mask = prefix.clone();
                    mask.push(side);
                    next.push((mask, w.clone()));
                    continue;
                }
                rows.clear();
                rows.extend(
                    prefix
                        .iter()
                        .enumerate()
                        .map(|(i, &b)| (i, if b { 1.0 } else { -1.0 })),
                );
                rows.push((j, if side { 1.0 } else { -1.0 }));
                if let Some((w_new, t)) = max_margin(x, &rows) {
                    if t > tol {
                        let mut mask = prefix.clone();
                        mask.push(side);
                        next.push((mask, w_new));
                    }
                }
            }
        }
        regions = next;
    }

    let mut patterns: Vec<_> = regions
        .into_iter()
        .map(|(mask, witness)| ActivationPattern {
            mask,
            witness,
            degenerate: false,
        })
        .collect();
    patterns.sort_by(|a, b| a.mask.cmp(&b.mask));
    patterns
}

fn enumerate_sampled(x: &DMatrix<f64>, budget: usize, seed: u64) -> Vec<ActivationPattern> {
    let (n, d) = x.shape();
    let row_zero: Vec<bool> = (0..n)
        .map(|i| x.row(i).iter().all(|&v| v == 0.0))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: BTreeMap<Vec<bool>, ActivationPattern> = BTreeMap::new();
    let scale = margin_scale(x);

    for _ in 0..budget {
        let w = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(&mut rng)));
        let xw = x * &w;
        let tol = MARGIN_TOL * scale * w.amax();
        let mask: Vec<bool> = xw.iter().map(|&v| v >= 0.0).collect();
        let degenerate = xw
            .iter()
            .zip(&row_zero)
            .any(|(&v, &zero)| !zero && v.abs() <= tol);
        match found.get_mut(&mask) {
            Some(existing) => {
                if existing.degenerate && !degenerate {
                    existing.witness = w;
                    existing.degenerate = false;
                }
            }
            None => {
                found.insert(
                    mask.clone(),
                    ActivationPattern {
                        mask,
                        witness: w,
                        degenerate,
                    },
                );
            }
        }
    }
    found.into_values().collect()
}
