//! Ensembles of independent trajectories and paired-path continuity runs.
//!
//! Path `i` uses seed `config.seed + i`. Paths run on the rayon pool and are
//! collected in seed order, and every reduction is a fixed pairwise tree, so
//! results do not depend on the number of threads.

use rayon::prelude::*;

use crate::diagnostics::DiagnosticsRecord;
use crate::dynamics::{SimState, Solver, SolverConfig};
use crate::error::{Error, Result};
use crate::rng::{CounterRng, IncrementSource};
use crate::spaces::besov_norm;
use crate::spectral::RealField;

/// Pairwise (cascade) summation with a fixed split at `len / 2`.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    match x.len() {
        0 => 0.0,
        1 => x[0],
        2 => x[0] + x[1],
        n => pairwise_sum(&x[..n / 2]) + pairwise_sum(&x[n / 2..]),
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Minimum, quartiles and maximum.
pub fn five_number_summary(x: &[f64]) -> [f64; 5] {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| quantile(&s, q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduce {
    MeanL2,
    MeanX,
    Quantiles,
}

impl Reduce {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mean_l2" => Ok(Reduce::MeanL2),
            "mean_X" | "mean_x" => Ok(Reduce::MeanX),
            "quantiles" => Ok(Reduce::Quantiles),
            _ => Err(Error::Parameter(format!("unknown reduction '{s}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Reduce::MeanL2 => "mean_l2",
            Reduce::MeanX => "mean_X",
            Reduce::Quantiles => "quantiles",
        }
    }

    fn observe(self, r: &DiagnosticsRecord) -> f64 {
        match self {
            Reduce::MeanX => r.x_t,
            Reduce::MeanL2 | Reduce::Quantiles => r.l2_v,
        }
    }
}

/// Statistics of the observed quantity across paths at one record time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeStat {
    pub t: f64,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub std_error: f64,
    /// Minimum, quartiles, maximum.
    pub quantiles: [f64; 5],
}

impl TimeStat {
    pub const COLUMNS: [&'static str; 9] = [
        "t",
        "mean",
        "variance",
        "std_error",
        "min",
        "q25",
        "median",
        "q75",
        "max",
    ];

    pub fn from_samples(t: f64, x: &[f64]) -> Self {
        let m = x.len() as f64;
        let mean = pairwise_sum(x) / m;
        let dev: Vec<f64> = x.iter().map(|v| (v - mean) * (v - mean)).collect();
        let variance = if x.len() > 1 {
            pairwise_sum(&dev) / (m - 1.0)
        } else {
            0.0
        };
        Self {
            t,
            mean,
            variance,
            std_error: (variance / m).sqrt(),
            quantiles: five_number_summary(x),
        }
    }

    pub fn values(&self) -> [f64; 9] {
        let q = self.quantiles;
        [
            self.t,
            self.mean,
            self.variance,
            self.std_error,
            q[0],
            q[1],
            q[2],
            q[3],
            q[4],
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub reduce: Reduce,
    pub paths: usize,
    /// Paths that hit a non-finite state or a strict monitor trip.
    pub failed: usize,
    pub stats: Vec<TimeStat>,
}

impl MonteCarloReport {
    pub fn blow_up_fraction(&self) -> f64 {
        self.failed as f64 / self.paths as f64
    }
}

/// Runs `paths` trajectories from `initial` and reduces their diagnostics.
/// Failed paths are counted and excluded from the statistics.
pub fn monte_carlo(
    config: &SolverConfig,
    initial: &SimState,
    paths: usize,
    reduce: Reduce,
) -> Result<MonteCarloReport> {
    if paths < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 paths, got {paths}"
        )));
    }
    let base = Solver::new(config.clone())?;
    let results: Vec<_> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut src = CounterRng::new(config.seed.wrapping_add(i));
            base.simulate_with(initial, &mut src)
        })
        .collect();
    let mut ok = Vec::new();
    let mut failed = 0;
    for r in results {
        match r {
            Ok(t) => ok.push(t.records),
            Err(f) => match f.error {
                Error::BlowUp { .. } | Error::MonitorTripped { .. } => failed += 1,
                e => return Err(e),
            },
        }
    }
    let stats = match ok.first() {
        None => Vec::new(),
        Some(first) => (0..first.len())
            .map(|j| {
                let x: Vec<f64> = ok.iter().map(|rec| reduce.observe(&rec[j])).collect();
                TimeStat::from_samples(first[j].t, &x)
            })
            .collect(),
    };
    Ok(MonteCarloReport {
        reduce,
        paths,
        failed,
        stats,
    })
}

/// Target space `B^{2/q}_{(q,2),p}` of the continuity experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalSpace {
    pub q: f64,
    pub p: f64,
}

impl CriticalSpace {
    pub fn distance(&self, a: &RealField, b: &RealField) -> Result<f64> {
        Ok(besov_norm(&a.sub(b), 2.0 / self.q, self.q, 2.0, self.p)?.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    pub eps: f64,
    /// `sup_t` distance per completed pair, in seed order.
    pub sup_distances: Vec<f64>,
    pub failed: usize,
    pub quantiles: Option<[f64; 5]>,
}

impl ContinuityReport {
    pub fn median(&self) -> Option<f64> {
        self.quantiles.map(|q| q[2])
    }
}

fn paired_sup(
    solver: &Solver,
    a0: &SimState,
    b0: &SimState,
    seed: u64,
    space: CriticalSpace,
) -> Result<f64> {
    let cfg = solver.config();
    let steps = cfg.steps()?;
    let stride = cfg.diagnostics_stride as u64;
    let mut src = CounterRng::new(seed);
    let (mut a, mut b) = (a0.clone(), b0.clone());
    let mut sup = space.distance(&a.v, &b.v)?;
    for _ in 0..steps {
        let inc = src.increments(a.step_index, cfg.dt, solver.noise_count())?;
        a = solver.step_with(&a, &inc)?.0;
        b = solver.step_with(&b, &inc)?.0;
        if a.step_index % stride == 0 || a.step_index == steps {
            sup = sup.max(space.distance(&a.v, &b.v)?);
        }
    }
    Ok(sup)
}

/// Runs `pairs` trajectory pairs from `v0` and `v0 + eps * perturbation`,
/// each pair sharing one noise path, and records the supremum over the
/// diagnostics times of their distance in `space`.
pub fn continuity_experiment(
    config: &SolverConfig,
    v0: &RealField,
    perturbation: &RealField,
    eps: f64,
    pairs: usize,
    space: CriticalSpace,
) -> Result<ContinuityReport> {
    if !(eps >= 0.0) {
        return Err(Error::Parameter(format!(
            "eps = {eps} must be non-negative"
        )));
    }
    if pairs == 0 {
        return Err(Error::Parameter("need at least one pair".into()));
    }
    let solver = Solver::new(config.clone())?;
    let mut shifted = v0.clone();
    shifted.axpy(eps, perturbation);
    let a0 = SimState::new(v0.clone(), None);
    let b0 = SimState::new(shifted, None);
    crate::hydrostatics::require_admissible(&a0.v)?;
    crate::hydrostatics::require_admissible(&b0.v)?;
    let results: Vec<Result<f64>> = (0..pairs as u64)
        .into_par_iter()
        .map(|i| paired_sup(&solver, &a0, &b0, config.seed.wrapping_add(i), space))
        .collect();
    let mut sup_distances = Vec::new();
    let mut failed = 0;
    for r in results {
        match r {
            Ok(d) => sup_distances.push(d),
            Err(Error::BlowUp { .. }) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    let quantiles = (!sup_distances.is_empty()).then(|| five_number_summary(&sup_distances));
    Ok(ContinuityReport {
        eps,
        sup_distances,
        failed,
        quantiles,
    })
}
