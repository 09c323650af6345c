//! Dexterity metrics from singular values, and comparison reports across
//! priority cases run on the same trajectory.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::Svd;

/// Relative cutoff under which a singular value counts as lost rank.
pub const RANK_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdMetrics {
    /// Descending.
    pub singular_values: Vec<f64>,
    /// `√det(J Jᵀ)`; zero once the rank drops.
    pub manipulability: f64,
    /// `σ_min / σ_max` using the true smallest value.
    pub inverse_condition: f64,
}

/// Metrics of a wide (or square) matrix.
pub fn svd_metrics(j: &DMatrix<f64>) -> SvdMetrics {
    let svd = Svd::new(j);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let max = sv.first().copied().unwrap_or(0.0);
    let min = sv.last().copied().unwrap_or(0.0);
    let full_rank = max > 0.0 && min >= RANK_TOLERANCE * max && sv.len() == j.nrows();
    SvdMetrics {
        manipulability: if full_rank { sv.iter().product() } else { 0.0 },
        inverse_condition: if max > 0.0 { min / max } else { 0.0 },
        singular_values: sv,
    }
}

/// Inverse condition number from stored singular values (any order).
pub fn inverse_condition(sv: &[f64]) -> f64 {
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        min / max
    } else {
        0.0
    }
}

/// Per-sample series extracted from one run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackingSeries {
    pub label: String,
    pub e_p: Vec<f64>,
    pub e_o: Vec<f64>,
    pub sv_linear: Vec<[f64; 3]>,
    pub sv_angular: Vec<[f64; 3]>,
}

impl TrackingSeries {
    pub fn len(&self) -> usize {
        self.e_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e_p.is_empty()
    }

    fn consistent(&self) -> bool {
        let n = self.e_p.len();
        self.e_o.len() == n && self.sv_linear.len() == n && self.sv_angular.len() == n
    }

    /// Picks `n` samples spread uniformly over the series.
    fn resampled(&self, n: usize) -> TrackingSeries {
        let m = self.len();
        if n == m {
            return self.clone();
        }
        let idx: Vec<usize> = (0..n)
            .map(|i| {
                if n <= 1 {
                    0
                } else {
                    (i as f64 * (m - 1) as f64 / (n - 1) as f64).round() as usize
                }
            })
            .collect();
        TrackingSeries {
            label: self.label.clone(),
            e_p: idx.iter().map(|&i| self.e_p[i]).collect(),
            e_o: idx.iter().map(|&i| self.e_o[i]).collect(),
            sv_linear: idx.iter().map(|&i| self.sv_linear[i]).collect(),
            sv_angular: idx.iter().map(|&i| self.sv_angular[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Stat {
        let mut n = 0usize;
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for x in xs {
            n += 1;
            sum += x;
            min = min.min(x);
            max = max.max(x);
        }
        if n == 0 {
            return Stat::default();
        }
        Stat {
            mean: sum / n as f64,
            min,
            max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub mean: f64,
    pub max: f64,
    pub rmse: f64,
}

impl ErrorSummary {
    pub fn of(xs: &[f64]) -> ErrorSummary {
        if xs.is_empty() {
            return ErrorSummary::default();
        }
        let n = xs.len() as f64;
        ErrorSummary {
            mean: xs.iter().sum::<f64>() / n,
            max: xs.iter().copied().fold(0.0, f64::max),
            rmse: (xs.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DexterityReport {
    pub mean_sv_linear: [f64; 3],
    pub mean_sv_angular: [f64; 3],
    pub manipulability_linear: Stat,
    pub manipulability_angular: Stat,
    pub inverse_condition_linear: Stat,
    pub inverse_condition_angular: Stat,
}

impl DexterityReport {
    pub fn of(series: &TrackingSeries) -> DexterityReport {
        let mean3 = |v: &[[f64; 3]]| {
            let mut acc = [0.0; 3];
            for s in v {
                for k in 0..3 {
                    acc[k] += s[k];
                }
            }
            let n = v.len().max(1) as f64;
            acc.map(|a| a / n)
        };
        let m = |s: &[f64; 3]| s.iter().product::<f64>();
        DexterityReport {
            mean_sv_linear: mean3(&series.sv_linear),
            mean_sv_angular: mean3(&series.sv_angular),
            manipulability_linear: Stat::of(series.sv_linear.iter().map(m)),
            manipulability_angular: Stat::of(series.sv_angular.iter().map(m)),
            inverse_condition_linear: Stat::of(series.sv_linear.iter().map(|s| inverse_condition(s))),
            inverse_condition_angular: Stat::of(series.sv_angular.iter().map(|s| inverse_condition(s))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub label: String,
    pub samples: usize,
    pub linear_error: ErrorSummary,
    pub angular_error: ErrorSummary,
    pub dexterity: DexterityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub holds: bool,
    /// Every compared value is equal.
    pub tie: bool,
    pub values: Vec<f64>,
}

impl Verdict {
    /// `values[0] ≤ values[1] ≤ …`.
    fn ascending(name: &str, values: Vec<f64>) -> Verdict {
        let holds = values.windows(2).all(|w| w[0] <= w[1]);
        let tie = values.windows(2).all(|w| w[0] == w[1]);
        Verdict {
            name: name.into(),
            holds,
            tie,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub entries: Vec<CaseEntry>,
    /// Present only for exactly three series ordered case 0, 1, 2.
    pub verdicts: Vec<Verdict>,
}

impl CaseReport {
    pub fn all_hold(&self) -> bool {
        self.verdicts.iter().all(|v| v.holds)
    }

    /// Fixed-width text table.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>8} {:>12} {:>12} {:>12} {:>12} {:>10} {:>10}\n",
            "run", "samples", "mean|e_p|mm", "max|e_p|mm", "mean|e_o|", "max|e_o|", "k^-1 L", "k^-1 A"
        );
        for e in &self.entries {
            out += &format!(
                "{:<12} {:>8} {:>12.4} {:>12.4} {:>12.5} {:>12.5} {:>10.4} {:>10.4}\n",
                e.label,
                e.samples,
                e.linear_error.mean * 1e3,
                e.linear_error.max * 1e3,
                e.angular_error.mean,
                e.angular_error.max,
                e.dexterity.inverse_condition_linear.mean,
                e.dexterity.inverse_condition_angular.mean,
            );
        }
        for v in &self.verdicts {
            out += &format!(
                "{:<44} {}\n",
                v.name,
                if v.tie {
                    "tie"
                } else if v.holds {
                    "holds"
                } else {
                    "violated"
                }
            );
        }
        out
    }
}

/// Summarizes each run. With three runs, taken as cases 0, 1 and 2, the
/// expected priority orderings are checked as well.
pub fn case_report(series: &[TrackingSeries]) -> CaseReport {
    let usable: Vec<&TrackingSeries> = series
        .iter()
        .filter(|s| {
            let ok = s.consistent();
            if !ok {
                log::warn!("run '{}' has columns of unequal length; skipped", s.label);
            }
            ok
        })
        .collect();
    let shortest = usable.iter().map(|s| s.len()).min().unwrap_or(0);
    if usable.iter().any(|s| s.len() != shortest) {
        log::warn!("runs differ in length; resampling all to {shortest} samples");
    }
    let aligned: Vec<TrackingSeries> = usable.iter().map(|s| s.resampled(shortest)).collect();

    let entries: Vec<CaseEntry> = aligned
        .iter()
        .map(|s| CaseEntry {
            label: s.label.clone(),
            samples: s.len(),
            linear_error: ErrorSummary::of(&s.e_p),
            angular_error: ErrorSummary::of(&s.e_o),
            dexterity: DexterityReport::of(s),
        })
        .collect();

    let mut verdicts = Vec::new();
    if let [c0, c1, c2] = entries.as_slice() {
        verdicts.push(Verdict::ascending(
            "linear error: case1 <= case0 <= case2",
            vec![c1.linear_error.mean, c0.linear_error.mean, c2.linear_error.mean],
        ));
        verdicts.push(Verdict::ascending(
            "angular error: case2 <= case0 <= case1",
            vec![c2.angular_error.mean, c0.angular_error.mean, c1.angular_error.mean],
        ));
        verdicts.push(Verdict::ascending(
            "inverse condition L: case0 <= case1",
            vec![
                c0.dexterity.inverse_condition_linear.mean,
                c1.dexterity.inverse_condition_linear.mean,
            ],
        ));
        verdicts.push(Verdict::ascending(
            "inverse condition A: case0 <= case2",
            vec![
                c0.dexterity.inverse_condition_angular.mean,
                c2.dexterity.inverse_condition_angular.mean,
            ],
        ));
    }
    CaseReport { entries, verdicts }
}
