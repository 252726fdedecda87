//! Fitting the approximation-factor bound `γ ≤ C (ω h / ϑ + (ω / δ) (ω h / ϑ)^{p+1})`
//! and log-log rates.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::FitError;
use crate::sweep::Row;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundTerms {
    /// `ω h / ϑ + (ω / δ) (ω h / ϑ)^{p+1}`.
    Full,
    /// `ω h / ϑ` alone.
    FirstOnly,
}

impl BoundTerms {
    pub fn shape(&self, row: &Row) -> f64 {
        match self {
            BoundTerms::Full => row.bound_term1 + row.bound_term2,
            BoundTerms::FirstOnly => row.bound_term1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    /// Rows with `ω h / ϑ` above this are excluded and flagged.
    pub cutoff: f64,
    /// Smallest-h rows per series used for the tail slope.
    pub tail: usize,
    pub terms: BoundTerms,
    /// Rows required per series.
    pub min_rows: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            cutoff: 0.5,
            tail: 2,
            terms: BoundTerms::Full,
            min_rows: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitRow {
    pub omega: f64,
    pub h: f64,
    pub p: usize,
    pub gamma: f64,
    pub shape: f64,
    pub ratio: f64,
    /// `γ̂ - C · shape`.
    pub slack: f64,
    /// False when the row violates the smallness cutoff.
    pub included: bool,
}

/// Least-squares line through `(log h, log y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slope {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence half-width; infinite with two points.
    pub half_width: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesFit {
    pub omega: f64,
    pub p: usize,
    pub all: Slope,
    pub tail: Slope,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundFit {
    pub c: f64,
    pub terms: BoundTerms,
    pub cutoff: f64,
    pub rows: Vec<FitRow>,
    pub series: Vec<SeriesFit>,
}

impl BoundFit {
    pub fn bound(&self, row: &Row) -> f64 {
        self.c * self.terms.shape(row)
    }

    pub fn slack(&self, row: &Row) -> f64 {
        row.gamma - self.bound(row)
    }

    pub fn max_included_slack(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.included)
            .map(|r| r.slack)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn excluded(&self) -> impl Iterator<Item = &FitRow> {
        self.rows.iter().filter(|r| !r.included)
    }

    pub fn series(&self, omega: f64, p: usize) -> Option<&SeriesFit> {
        self.series.iter().find(|s| s.omega == omega && s.p == p)
    }
}

/// Groups rows by `(ω, p)` in order of first appearance.
pub fn group_series(rows: &[Row]) -> Vec<((f64, usize), Vec<&Row>)> {
    let mut groups: Vec<((f64, usize), Vec<&Row>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|(k, _)| *k == (r.omega, r.p)) {
            Some((_, g)) => g.push(r),
            None => groups.push(((r.omega, r.p), vec![r])),
        }
    }
    groups
}

/// `C` is the largest ratio `γ̂ / shape` over rows within the cutoff, so no
/// included row has positive slack.
pub fn fit_bound(rows: &[Row], opts: &FitOptions) -> Result<BoundFit, FitError> {
    if rows.is_empty() {
        return Err(FitError::Empty);
    }
    let mut series = Vec::new();
    for ((omega, p), group) in group_series(rows) {
        if group.len() < opts.min_rows {
            return Err(FitError::TooFewRows {
                omega,
                p,
                count: group.len(),
                needed: opts.min_rows,
            });
        }
        let mut sorted: Vec<&Row> = group.clone();
        sorted.sort_by(|a, b| a.h.total_cmp(&b.h));
        let pts =
            |rs: &[&Row]| -> (Vec<f64>, Vec<f64>) { rs.iter().map(|r| (r.h, r.gamma)).unzip() };
        let (h, y) = pts(&sorted);
        let all = fit_slope(&h, &y).map_err(|_| FitError::DegenerateSeries { omega, p })?;
        let (th, ty) = pts(&sorted[..opts.tail.min(sorted.len())]);
        let tail = fit_slope(&th, &ty).map_err(|_| FitError::DegenerateSeries { omega, p })?;
        series.push(SeriesFit {
            omega,
            p,
            all,
            tail,
        });
    }
    let included = |r: &Row| r.smallness() <= opts.cutoff;
    let c = rows
        .iter()
        .filter(|r| included(r))
        .map(|r| r.gamma / opts.terms.shape(r))
        .fold(f64::NEG_INFINITY, f64::max);
    if c == f64::NEG_INFINITY {
        return Err(FitError::AllExcluded {
            cutoff: opts.cutoff,
        });
    }
    let fit_rows = rows
        .iter()
        .map(|r| {
            let shape = opts.terms.shape(r);
            FitRow {
                omega: r.omega,
                h: r.h,
                p: r.p,
                gamma: r.gamma,
                shape,
                ratio: r.gamma / shape,
                slack: r.gamma - c * shape,
                included: included(r),
            }
        })
        .collect();
    Ok(BoundFit {
        c,
        terms: opts.terms,
        cutoff: opts.cutoff,
        rows: fit_rows,
        series,
    })
}

/// Least squares of `log y` against `log h`. Needs two distinct `h` values.
pub fn fit_slope(h: &[f64], y: &[f64]) -> Result<Slope, FitError> {
    let n = h.len();
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let z: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let xm = x.iter().sum::<f64>() / n as f64;
    let zm = z.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - xm).powi(2)).sum();
    let scale = x.iter().map(|a| a.abs()).fold(1.0, f64::max);
    if n < 2 || sxx <= 1e-24 * scale * scale {
        return Err(FitError::DegenerateSeries {
            omega: f64::NAN,
            p: 0,
        });
    }
    let sxz: f64 = x.iter().zip(&z).map(|(a, b)| (a - xm) * (b - zm)).sum();
    let slope = sxz / sxx;
    let intercept = zm - slope * xm;
    let half_width = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(&z)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        let se = (rss / (n - 2) as f64 / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 2) as f64).expect("positive degrees of freedom");
        t.inverse_cdf(0.975) * se
    } else {
        f64::INFINITY
    };
    Ok(Slope {
        slope,
        intercept,
        half_width,
        points: n,
    })
}
