//! Quick invariant checks, run by `spe verify`.

use std::f64::consts::PI;

use crate::dynamics::{
    advective_nonlinearity, parabolicity_margin_fields, random_initial, step,
    stratonovich_drift_coeffs, SimState, SolverConfig, TransportNoise,
};
use crate::error::Result;
use crate::exponents::{critical_exponents, ParamSet, Rational};
use crate::hydrostatics::{
    barotropic_divergence, hydrostatic_project, hydrostatic_q, vertical_velocity,
};
use crate::io::{decode_snapshot, encode_snapshot};
use crate::noise::build_kraichnan;
use crate::spaces::random_band_limited;
use crate::spectral::{GridSpec, RealField};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn at_most(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            tolerance,
            passed: value.is_finite() && value <= tolerance,
        }
    }
}

fn projection(grid: GridSpec, trials: u64, seed: u64) -> CheckResult {
    let mut worst: f64 = 0.0;
    for i in 0..trials {
        let v = random_band_limited(grid, 2, grid.nx() / 2, seed + i);
        let p = hydrostatic_project(&v);
        let pp = hydrostatic_project(&p);
        worst = worst
            .max(pp.sub(&p).norm_sq().sqrt())
            .max(hydrostatic_q(&p).norm_sq().sqrt())
            .max(barotropic_divergence(&p));
    }
    CheckResult::at_most("projection idempotent, PQ = 0, Pv admissible", worst, 1e-12)
}

fn cancellation(grid: GridSpec, trials: u64, seed: u64) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for i in 0..trials {
        let v = random_initial(grid, grid.nx() / 3, 1.0, seed + i);
        worst = worst.max(advective_nonlinearity(&v, true)?.inner(&v).abs());
    }
    Ok(CheckResult::at_most(
        "advection conserves energy",
        worst,
        1e-10,
    ))
}

fn vertical(grid: GridSpec) -> Result<CheckResult> {
    let v = RealField::from_fn(grid, 2, |c, x| {
        if c == 0 {
            (2.0 * PI * x[0]).sin() * (2.0 * PI * x[2]).cos()
        } else {
            0.0
        }
    });
    let w = vertical_velocity(&v)?;
    let mut worst: f64 = 0.0;
    for i in 0..grid.len() {
        let [x, _, z] = grid.coords(i);
        worst = worst.max((w.values()[i] + (2.0 * PI * x).cos() * (2.0 * PI * z).sin()).abs());
    }
    Ok(CheckResult::at_most(
        "vertical velocity closed form",
        worst,
        1e-12,
    ))
}

fn stratonovich(grid: GridSpec) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for (d, alpha, kmax) in [(2, 4.0 / 3.0, 3), (3, 1.0, 2), (3, 0.5, 3)] {
        let e = build_kraichnan(d, alpha, kmax)?;
        let a = stratonovich_drift_coeffs(&e, grid)?.a;
        let sigma = TransportNoise::from_ensemble(&e, grid)?.sigma;
        worst = worst.max((parabolicity_margin_fields(&sigma, &a) - 0.5).abs());
    }
    Ok(CheckResult::at_most(
        "Stratonovich parabolicity margin 1/2",
        worst,
        1e-12,
    ))
}

fn exponents() -> Result<CheckResult> {
    let r = |n, d| Rational::new(n, d);
    let params = ParamSet::new(r(4, 1), r(8, 3), r(3, 8), r(7, 10));
    let rep = critical_exponents(&params, None)?;
    let identity = rep.trace_smoothness - r(2, 1) / params.q;
    let ok = rep.beta == r(25, 32) && identity == r(0, 1);
    Ok(CheckResult::at_most(
        "exact exponent identities",
        if ok { 0.0 } else { 1.0 },
        0.0,
    ))
}

fn decay() -> Result<CheckResult> {
    let slope = build_kraichnan(2, 4.0 / 3.0, 64)?.decay_slope()?;
    Ok(CheckResult::at_most(
        "Kraichnan decay slope -5/3",
        ((slope + 5.0 / 3.0) / (5.0 / 3.0)).abs(),
        0.02,
    ))
}

fn heat(grid: GridSpec) -> Result<CheckResult> {
    let dt = 1e-2;
    let v = RealField::from_fn(
        grid,
        2,
        |c, x| if c == 1 { (2.0 * PI * x[0]).cos() } else { 0.0 },
    );
    let mut cfg = SolverConfig::new(grid, dt, dt);
    cfg.nonlinear = false;
    let next = step(&SimState::new(v.clone(), None), &cfg)?;
    let err = next
        .v
        .sub(&v.scale(1.0 / (1.0 + 4.0 * PI * PI * dt)))
        .max_abs();
    Ok(CheckResult::at_most("implicit heat step", err, 1e-13))
}

fn snapshot(grid: GridSpec) -> Result<CheckResult> {
    let v = random_initial(grid, 3, 1.0, 5);
    let back = decode_snapshot(&encode_snapshot(&v))?;
    Ok(CheckResult::at_most(
        "snapshot round trip",
        back.sub(&v).max_abs(),
        0.0,
    ))
}

/// Runs every check on `n^3` grids (`n >= 8`).
pub fn run_suite(n: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let grid = GridSpec::cube(n)?;
    Ok(vec![
        projection(grid, 5, seed),
        cancellation(grid, 5, seed)?,
        vertical(grid)?,
        stratonovich(grid)?,
        exponents()?,
        decay()?,
        heat(grid)?,
        snapshot(grid)?,
    ])
}
