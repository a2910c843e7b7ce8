//! Drift, diffusion and time stepping for the hydrostatic system
//!
//! ```text
//! dv = P[div(a grad v) + (b.grad) v - (v.grad_h) v - w(v) d_z v
//!        + f_h(v) + F0 + F1 v + int_0^z grad_h theta dz'] dt
//!      + sum_n P[(sigma_n.grad) v + g_n] dW_n
//! dtheta = [div(d grad theta) + (k.grad) theta - (v.grad_h) theta - w(v) d_z theta] dt
//!      + sum_n (chi_n.grad) theta dW_n
//! ```
//!
//! with `f_h(v) = -(h/2) sum_n [div(Q S_n (x) sigma_n) + b0_n Q S_n]`,
//! `S_n = (sigma_n.grad) v + g_n`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::diagnostics::{measure, serrin_monitor, DiagnosticsRecord, MonitorConfig};
use crate::error::{Error, Result};
use crate::hydrostatics::{
    horizontal_divergence, hydrostatic_project_spectral, hydrostatic_q, require_admissible,
    vertical_velocity_unchecked, ADMISSIBILITY_TOL,
};
use crate::noise::NoiseEnsemble;
use crate::rng::{CounterRng, IncrementSource};
use crate::spectral::{transport_with, Axis, GridSpec, RealField, SpectralField};
use crate::tensor::{min_eigenvalue, Mat3, MatrixField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    Ito,
    Stratonovich,
}

/// Time discretization. `Midpoint` is a stochastic Heun scheme that
/// integrates the Stratonovich equation directly; it is only valid with the
/// Stratonovich formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    EulerMaruyama,
    Midpoint,
}

/// Transport fields `sigma_n` (3 components) and additive fields `g_n`
/// (2 components). Missing entries of the shorter list count as zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransportNoise {
    pub sigma: Vec<RealField>,
    pub additive: Vec<RealField>,
}

impl TransportNoise {
    pub fn none() -> Self {
        Self::default()
    }

    /// Evaluates a Kraichnan ensemble; planar ensembles are lifted first.
    pub fn from_ensemble(e: &NoiseEnsemble, grid: GridSpec) -> Result<Self> {
        let e = if e.d == 2 {
            e.lift_horizontal()?
        } else {
            e.clone()
        };
        Ok(Self {
            sigma: e.evaluate(grid)?,
            additive: Vec::new(),
        })
    }

    /// A single spatially constant transport direction.
    pub fn constant(grid: GridSpec, c: [f64; 3]) -> Self {
        Self {
            sigma: vec![RealField::from_fn(grid, 3, |i, _| c[i])],
            additive: Vec::new(),
        }
    }

    pub fn additive(fields: Vec<RealField>) -> Self {
        Self {
            sigma: Vec::new(),
            additive: fields,
        }
    }

    pub fn count(&self) -> usize {
        self.sigma.len().max(self.additive.len())
    }
}

/// Coefficients of the velocity drift.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftCoeffs {
    pub a: MatrixField,
    pub b: RealField,
    pub b0: Vec<RealField>,
    pub h: f64,
}

impl DriftCoeffs {
    /// `a = viscosity * Id`, `b = 0`, `b0 = 0`.
    pub fn ito(grid: GridSpec, viscosity: f64, h: f64) -> Self {
        Self {
            a: MatrixField::identity(grid, viscosity),
            b: RealField::zeros(grid, 3),
            b0: Vec::new(),
            h,
        }
    }
}

fn divergence3(s: &RealField) -> RealField {
    let sp = s.to_spectral();
    let mut d = sp.component_field(0).differentiate(Axis::X);
    d.axpy(1.0, &sp.component_field(1).differentiate(Axis::Y));
    d.axpy(1.0, &sp.component_field(2).differentiate(Axis::Z));
    d.to_physical_unchecked()
}

/// Itô form of Stratonovich transport noise:
/// `a = 1/2 [viscosity Id + sum sigma sigma^T]`, `b = -1/2 sum (div sigma) sigma`,
/// `b0_n = 1/2 div sigma_n`, `h = 1`.
pub fn stratonovich_coeffs_for_fields(
    sigma: &[RealField],
    grid: GridSpec,
    viscosity: f64,
) -> DriftCoeffs {
    let mut a = MatrixField::identity(grid, viscosity);
    let mut b = RealField::zeros(grid, 3);
    let mut b0 = Vec::with_capacity(sigma.len());
    for s in sigma {
        a.add_outer(s, 1.0);
        let div = divergence3(s);
        b.axpy(-0.5, &s.mul_scalar_field(&div));
        b0.push(div.scale(0.5));
    }
    a.scale(0.5);
    DriftCoeffs { a, b, b0, h: 1.0 }
}

/// Stratonovich correction for an ensemble evaluated on `grid`, unit viscosity.
pub fn stratonovich_drift_coeffs(e: &NoiseEnsemble, grid: GridSpec) -> Result<DriftCoeffs> {
    let noise = TransportNoise::from_ensemble(e, grid)?;
    Ok(stratonovich_coeffs_for_fields(&noise.sigma, grid, 1.0))
}

/// `min` over the grid of the smallest eigenvalue of `a - 1/2 sum sigma sigma^T`.
pub fn parabolicity_margin_fields(sigma: &[RealField], a: &MatrixField) -> f64 {
    let mut m = a.clone();
    for s in sigma {
        m.add_outer(s, -0.5);
    }
    m.min_eigenvalue(3)
}

/// `F0 + F1 v` with a constant 2x2 matrix `F1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineForcing {
    pub f0: RealField,
    pub f1: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaCoeffs {
    pub d: MatrixField,
    pub k: RealField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaConfig {
    pub diffusivity: f64,
    /// Transport fields `chi_n`, driven by the same Brownian motions as `sigma_n`.
    pub chi: Vec<RealField>,
    /// Use `div(u theta)` instead of `u.grad theta`.
    pub divergence_form: bool,
    /// Replaces the coefficients derived from `diffusivity` and `chi`.
    pub coeffs: Option<ThetaCoeffs>,
    /// Drop the buoyancy term from the velocity equation.
    pub decoupled: bool,
}

impl ThetaConfig {
    pub fn new(diffusivity: f64) -> Self {
        Self {
            diffusivity,
            chi: Vec::new(),
            divergence_form: false,
            coeffs: None,
            decoupled: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub grid: GridSpec,
    pub dt: f64,
    pub t_end: f64,
    pub formulation: Formulation,
    pub scheme: Scheme,
    pub noise: TransportNoise,
    /// Itô coefficients; ignored for the Stratonovich formulation, which
    /// derives its own from `viscosity` and the noise.
    pub coeffs: DriftCoeffs,
    pub viscosity: f64,
    pub nonlinear: bool,
    pub forcing: Option<AffineForcing>,
    pub theta: Option<ThetaConfig>,
    pub seed: u64,
    pub dealias: bool,
    pub diagnostics_stride: usize,
    pub monitor: MonitorConfig,
}

impl SolverConfig {
    pub fn new(grid: GridSpec, dt: f64, t_end: f64) -> Self {
        Self {
            grid,
            dt,
            t_end,
            formulation: Formulation::Ito,
            scheme: Scheme::EulerMaruyama,
            noise: TransportNoise::none(),
            coeffs: DriftCoeffs::ito(grid, 1.0, 0.0),
            viscosity: 1.0,
            nonlinear: true,
            forcing: None,
            theta: None,
            seed: 0,
            dealias: true,
            diagnostics_stride: 1,
            monitor: MonitorConfig::default(),
        }
    }

    pub fn steps(&self) -> Result<u64> {
        if self.t_end == 0.0 {
            return Ok(0);
        }
        let n = (self.t_end / self.dt).round();
        if n < 1.0 || (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::Parameter(format!(
                "t_end = {} is not a whole number of steps dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(n as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub v: RealField,
    pub theta: Option<RealField>,
    pub step_index: u64,
}

impl SimState {
    pub fn new(v: RealField, theta: Option<RealField>) -> Self {
        Self {
            t: 0.0,
            v,
            theta,
            step_index: 0,
        }
    }
}

/// Pathwise energy-balance pieces of one step, evaluated at its left end.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepLedger {
    /// `2 dt (a grad v, grad v)`
    pub dissipation: f64,
    /// `dt sum_n ||P S_n||^2`
    pub ito_correction: f64,
    /// `2 (v, sum_n P S_n dW_n)`
    pub martingale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub final_state: SimState,
    pub records: Vec<DiagnosticsRecord>,
    pub serrin_integral: f64,
    pub serrin_tripped: bool,
}

/// A failed run with everything computed before the failure.
#[derive(Clone, PartialEq)]
pub struct SimulationFailure {
    pub error: Error,
    pub records: Vec<DiagnosticsRecord>,
    pub last_state: SimState,
}

impl std::fmt::Debug for SimulationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimulationFailure")
            .field("error", &self.error)
            .field("records", &self.records.len())
            .field("last_t", &self.last_state.t)
            .finish()
    }
}

impl std::fmt::Display for SimulationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} records kept)", self.error, self.records.len())
    }
}

impl std::error::Error for SimulationFailure {}

struct ThetaModel {
    d: MatrixField,
    d_const: Option<Mat3>,
    k: Option<RealField>,
    nu0: f64,
    chi: Vec<RealField>,
    divergence_form: bool,
    decoupled: bool,
}

struct Model {
    a: MatrixField,
    a_const: Option<Mat3>,
    b: Option<RealField>,
    b0: Vec<RealField>,
    h: f64,
    nu0: f64,
    theta: Option<ThetaModel>,
}

fn nonzero(f: &RealField) -> Option<RealField> {
    f.values().iter().any(|v| *v != 0.0).then(|| f.clone())
}

fn laplacian_symbol(k: [i64; 3]) -> f64 {
    -4.0 * PI * PI * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64
}

fn quadratic_symbol(a: &Mat3, k: [i64; 3]) -> f64 {
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    let mut s = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            s += a[r][c] * kf[r] * kf[c];
        }
    }
    -4.0 * PI * PI * s
}

/// `div(a grad f)` for every component of `f`.
fn elliptic(
    a: &MatrixField,
    a_const: Option<&Mat3>,
    fs: &SpectralField,
    grads: &[RealField; 3],
) -> SpectralField {
    if let Some(m) = a_const {
        return fs.apply(|k| Complex64::new(quadratic_symbol(m, k), 0.0));
    }
    let g = fs.grid();
    let n = g.len();
    let comps = fs.components();
    let mut out = SpectralField::zeros(g, comps);
    for (j, axis) in Axis::ALL.into_iter().enumerate() {
        let mut flux = RealField::zeros(g, comps);
        let fv = flux.values_mut();
        for c in 0..comps {
            for i in 0..n {
                let m = a.at(i);
                let mut s = 0.0;
                for (kk, gr) in grads.iter().enumerate() {
                    s += m[j][kk] * gr.values()[c * n + i];
                }
                fv[c * n + i] = s;
            }
        }
        out.axpy(1.0, &flux.to_spectral().differentiate(axis));
    }
    out
}

/// Mean over the grid of `sum_c sum_jk a_jk d_j f_c d_k f_c`.
fn energy_form(a: &MatrixField, grads: &[RealField; 3]) -> f64 {
    let n = a.grid().len();
    let comps = grads[0].components();
    let mut s = 0.0;
    for i in 0..n {
        let m = a.at(i);
        for c in 0..comps {
            let d = [
                grads[0].values()[c * n + i],
                grads[1].values()[c * n + i],
                grads[2].values()[c * n + i],
            ];
            for r in 0..3 {
                for q in 0..3 {
                    s += m[r][q] * d[r] * d[q];
                }
            }
        }
    }
    s / n as f64
}

fn grads_of(s: &SpectralField) -> [RealField; 3] {
    Axis::ALL.map(|a| s.differentiate(a).to_physical_unchecked())
}

/// `(v.grad_h) f + w d_z f` given the gradient of `f`.
fn advect(v: &RealField, w: &RealField, grads: &[RealField; 3]) -> RealField {
    let u = RealField::from_components(&[v.component_field(0), v.component_field(1), w.clone()])
        .expect("same grid");
    transport_with(&u, grads)
}

/// `int_0^z grad_h theta dz'` at the grid points; the vertical mean of the
/// gradient contributes the linear term `z grad_h theta_bar`.
fn buoyancy(theta_s: &SpectralField) -> RealField {
    let g = theta_s.grid();
    let grad = SpectralField::from_components(&[
        theta_s.differentiate(Axis::X),
        theta_s.differentiate(Axis::Y),
    ])
    .expect("same grid");
    let n = g.len();
    let nz = g.nz();
    let nyq = (nz / 2) as i64;
    let mut anti = SpectralField::zeros(g, 2);
    let mut slab = SpectralField::zeros(g, 2);
    for c in 0..2 {
        let src = grad.component(c).to_vec();
        let dst = anti.component_mut(c);
        for i in 0..n {
            let kz = g.wavevector(i)[2];
            if kz == 0 {
                continue;
            }
            if nz > 1 && kz == nyq {
                continue;
            }
            let a = src[i] / Complex64::new(0.0, 2.0 * PI * kz as f64);
            dst[i] += a;
            let [ix, iy, _] = g.unflat(i);
            dst[g.flat(ix, iy, 0)] -= a;
        }
        let sl = slab.component_mut(c);
        for i in 0..n {
            if g.wavevector(i)[2] == 0 {
                sl[i] = src[i];
            }
        }
    }
    let mut out = anti.to_physical_unchecked();
    let linear = slab.to_physical_unchecked();
    let vals = out.values_mut();
    for c in 0..2 {
        for i in 0..n {
            let z = g.coords(i)[2];
            vals[c * n + i] += z * linear.values()[c * n + i];
        }
    }
    out
}

/// `(v.grad_h) v + w(v) d_z v`, dealiased when asked. Errors on inadmissible `v`.
pub fn advective_nonlinearity(v: &RealField, dealias: bool) -> Result<RealField> {
    require_admissible(v)?;
    let vs = v.to_spectral();
    let w = vertical_velocity_unchecked(&vs);
    let out = advect(v, &w, &grads_of(&vs));
    Ok(if dealias {
        out.to_spectral().dealias().to_physical_unchecked()
    } else {
        out
    })
}

/// `-(h/2) sum_n [div(Q S_n (x) sigma_n) + b0_n Q S_n]` with `S_n = (sigma_n.grad) v`.
pub fn ito_pressure_correction(
    v: &RealField,
    sigma: &[RealField],
    h: f64,
    b0: &[RealField],
) -> Result<RealField> {
    require_admissible(v)?;
    let grads = grads_of(&v.to_spectral());
    Ok(pressure_correction(&grads, sigma, &[], h, b0).to_physical_unchecked())
}

fn source_term(
    n: usize,
    grads: &[RealField; 3],
    sigma: &[RealField],
    additive: &[RealField],
) -> RealField {
    let mut s = match sigma.get(n) {
        Some(sig) => transport_with(sig, grads),
        None => RealField::zeros(grads[0].grid(), 2),
    };
    if let Some(g) = additive.get(n) {
        s.axpy(1.0, g);
    }
    s
}

fn pressure_correction(
    grads: &[RealField; 3],
    sigma: &[RealField],
    additive: &[RealField],
    h: f64,
    b0: &[RealField],
) -> SpectralField {
    let g = grads[0].grid();
    let mut out = SpectralField::zeros(g, 2);
    if h == 0.0 {
        return out;
    }
    let count = sigma.len().max(additive.len());
    for n in 0..count {
        let q = hydrostatic_q(&source_term(n, grads, sigma, additive));
        if let Some(sig) = sigma.get(n) {
            for (j, axis) in Axis::ALL.into_iter().enumerate() {
                let prod = q.mul_scalar_field(&sig.component_field(j));
                out.axpy(1.0, &prod.to_spectral().differentiate(axis));
            }
        }
        if let Some(b) = b0.get(n) {
            out.axpy(1.0, &q.mul_scalar_field(b).to_spectral());
        }
    }
    let mut scaled = SpectralField::zeros(g, 2);
    scaled.axpy(-h / 2.0, &out);
    scaled
}

pub struct Solver {
    config: SolverConfig,
    model: Model,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Result<Self> {
        let g = config.grid;
        if !(config.dt > 0.0 && config.dt.is_finite()) {
            return Err(Error::Parameter(format!(
                "dt = {} must be positive",
                config.dt
            )));
        }
        if !(config.t_end >= 0.0) {
            return Err(Error::Parameter(format!(
                "t_end = {} must be non-negative",
                config.t_end
            )));
        }
        config.steps()?;
        if config.diagnostics_stride == 0 {
            return Err(Error::Parameter(
                "diagnostics stride must be at least 1".into(),
            ));
        }
        if config.viscosity < 0.0 {
            return Err(Error::Parameter("viscosity must be non-negative".into()));
        }
        config.monitor.mu0()?;
        let on_grid = |f: &RealField, comps: usize, what: &str| -> Result<()> {
            if f.grid() != g || f.components() != comps {
                return Err(Error::Shape(format!(
                    "{what} must have {comps} components on the solver grid"
                )));
            }
            Ok(())
        };
        for s in &config.noise.sigma {
            on_grid(s, 3, "noise field")?;
        }
        for s in &config.noise.additive {
            on_grid(s, 2, "additive noise field")?;
        }
        if config.scheme == Scheme::Midpoint && config.formulation != Formulation::Stratonovich {
            return Err(Error::Parameter(
                "the midpoint scheme integrates the Stratonovich formulation only".into(),
            ));
        }

        let coeffs = match (config.formulation, config.scheme) {
            (Formulation::Ito, _) => config.coeffs.clone(),
            (Formulation::Stratonovich, Scheme::EulerMaruyama) => {
                stratonovich_coeffs_for_fields(&config.noise.sigma, g, config.viscosity)
            }
            (Formulation::Stratonovich, Scheme::Midpoint) => {
                DriftCoeffs::ito(g, 0.5 * config.viscosity, 0.0)
            }
        };
        if coeffs.a.grid() != g {
            return Err(Error::Shape(
                "coefficient a lives on a different grid".into(),
            ));
        }
        on_grid(&coeffs.b, 3, "coefficient b")?;
        if !(coeffs.h >= -1.0) {
            return Err(Error::Parameter(format!(
                "h = {} must be at least -1",
                coeffs.h
            )));
        }
        if !coeffs.a.is_symmetric(1e-12) {
            return Err(Error::Parameter("coefficient a must be symmetric".into()));
        }
        if config.formulation == Formulation::Ito {
            let margin = parabolicity_margin_fields(&config.noise.sigma, &coeffs.a);
            if margin < -1e-12 {
                return Err(Error::Parameter(format!(
                    "parabolicity margin {margin} is negative"
                )));
            }
        }
        let nu0 = coeffs.a.min_eigenvalue(3).max(0.0);

        let theta = match &config.theta {
            None => None,
            Some(tc) => {
                for c in &tc.chi {
                    on_grid(c, 3, "temperature noise field")?;
                }
                let (d, k) = match (&tc.coeffs, config.formulation, config.scheme) {
                    (Some(c), _, _) => (c.d.clone(), c.k.clone()),
                    (None, Formulation::Ito, _) => (
                        MatrixField::identity(g, tc.diffusivity),
                        RealField::zeros(g, 3),
                    ),
                    (None, Formulation::Stratonovich, Scheme::EulerMaruyama) => {
                        let c = stratonovich_coeffs_for_fields(&tc.chi, g, tc.diffusivity);
                        (c.a, c.b)
                    }
                    (None, Formulation::Stratonovich, Scheme::Midpoint) => (
                        MatrixField::identity(g, 0.5 * tc.diffusivity),
                        RealField::zeros(g, 3),
                    ),
                };
                let nu0 = d.min_eigenvalue(3).max(0.0);
                Some(ThetaModel {
                    d_const: d.as_constant(),
                    d,
                    k: nonzero(&k),
                    nu0,
                    chi: tc.chi.clone(),
                    divergence_form: tc.divergence_form,
                    decoupled: tc.decoupled,
                })
            }
        };

        let model = Model {
            a_const: coeffs.a.as_constant(),
            a: coeffs.a,
            b: nonzero(&coeffs.b),
            b0: coeffs.b0,
            h: coeffs.h,
            nu0,
            theta,
        };
        Ok(Self { config, model })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Number of Brownian motions driving the system.
    pub fn noise_count(&self) -> usize {
        let chi = self.model.theta.as_ref().map_or(0, |t| t.chi.len());
        self.config.noise.count().max(chi)
    }

    /// Implicitly treated viscosity.
    pub fn nu0(&self) -> f64 {
        self.model.nu0
    }

    fn maybe_dealias(&self, s: SpectralField) -> SpectralField {
        if self.config.dealias {
            s.dealias()
        } else {
            s
        }
    }

    fn check_state(&self, state: &SimState) -> Result<()> {
        let g = self.config.grid;
        if state.v.grid() != g || state.v.components() != 2 {
            return Err(Error::Shape(
                "velocity must have 2 components on the solver grid".into(),
            ));
        }
        match (&state.theta, &self.model.theta) {
            (Some(t), Some(_)) if t.grid() != g || t.components() != 1 => Err(Error::Shape(
                "temperature must be scalar on the solver grid".into(),
            )),
            (Some(_), None) => Err(Error::Parameter(
                "temperature given but not configured".into(),
            )),
            (None, Some(_)) => Err(Error::Parameter(
                "temperature configured but absent from the state".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Drift in spectral form (projected, dealiased when configured).
    fn drift_spectral(
        &self,
        v: &RealField,
        theta: Option<&RealField>,
    ) -> (SpectralField, Option<SpectralField>) {
        let m = &self.model;
        let cfg = &self.config;
        let vs = v.to_spectral();
        let grads = grads_of(&vs);

        let mut phys = RealField::zeros(cfg.grid, 2);
        let w = (cfg.nonlinear || theta.is_some()).then(|| vertical_velocity_unchecked(&vs));
        if cfg.nonlinear {
            phys.axpy(-1.0, &advect(v, w.as_ref().unwrap(), &grads));
        }
        if let Some(b) = &m.b {
            phys.axpy(1.0, &transport_with(b, &grads));
        }
        if let Some(f) = &cfg.forcing {
            phys.axpy(1.0, &f.f0);
            let n = cfg.grid.len();
            let vals = phys.values_mut();
            for i in 0..n {
                let (x, y) = (v.values()[i], v.values()[n + i]);
                vals[i] += f.f1[0][0] * x + f.f1[0][1] * y;
                vals[n + i] += f.f1[1][0] * x + f.f1[1][1] * y;
            }
        }
        let theta_s = theta.map(|t| t.to_spectral());
        if let (Some(ts), Some(tm)) = (&theta_s, &m.theta) {
            if !tm.decoupled {
                phys.axpy(1.0, &buoyancy(ts));
            }
        }

        let mut total = phys.to_spectral();
        total.axpy(1.0, &elliptic(&m.a, m.a_const.as_ref(), &vs, &grads));
        if m.h != 0.0 {
            total.axpy(
                1.0,
                &pressure_correction(&grads, &cfg.noise.sigma, &cfg.noise.additive, m.h, &m.b0),
            );
        }
        let dv = hydrostatic_project_spectral(&self.maybe_dealias(total));

        let dtheta = match (&theta_s, &m.theta, theta) {
            (Some(ts), Some(tm), Some(th)) => {
                let tg = grads_of(ts);
                let w = w.as_ref().unwrap();
                let mut phys = RealField::zeros(cfg.grid, 1);
                if tm.divergence_form {
                    let flux = [
                        th.mul_scalar_field(&v.component_field(0)),
                        th.mul_scalar_field(&v.component_field(1)),
                        th.mul_scalar_field(w),
                    ];
                    let mut div = SpectralField::zeros(cfg.grid, 1);
                    for (f, axis) in flux.iter().zip(Axis::ALL) {
                        div.axpy(1.0, &f.to_spectral().differentiate(axis));
                    }
                    phys.axpy(-1.0, &div.to_physical_unchecked());
                } else {
                    phys.axpy(-1.0, &advect(v, w, &tg));
                }
                if let Some(k) = &tm.k {
                    phys.axpy(1.0, &transport_with(k, &tg));
                }
                let mut total = phys.to_spectral();
                total.axpy(1.0, &elliptic(&tm.d, tm.d_const.as_ref(), ts, &tg));
                Some(self.maybe_dealias(total))
            }
            _ => None,
        };
        (dv, dtheta)
    }

    /// Noise term for the given increments, spectral.
    fn diffusion_spectral(
        &self,
        v: &RealField,
        theta: Option<&RealField>,
        inc: &[f64],
    ) -> (SpectralField, Option<SpectralField>) {
        let cfg = &self.config;
        let g = cfg.grid;
        let mut combined = RealField::zeros(g, 3);
        let mut additive = RealField::zeros(g, 2);
        for (n, dw) in inc.iter().enumerate() {
            if let Some(s) = cfg.noise.sigma.get(n) {
                combined.axpy(*dw, s);
            }
            if let Some(a) = cfg.noise.additive.get(n) {
                additive.axpy(*dw, a);
            }
        }
        let vs = v.to_spectral();
        let mut s = transport_with(&combined, &grads_of(&vs));
        s.axpy(1.0, &additive);
        let dv = hydrostatic_project_spectral(&self.maybe_dealias(s.to_spectral()));
        let dtheta = match (theta, &self.model.theta) {
            (Some(th), Some(tm)) => {
                let mut chi = RealField::zeros(g, 3);
                for (n, dw) in inc.iter().enumerate() {
                    if let Some(c) = tm.chi.get(n) {
                        chi.axpy(*dw, c);
                    }
                }
                let tg = grads_of(&th.to_spectral());
                Some(self.maybe_dealias(transport_with(&chi, &tg).to_spectral()))
            }
            _ => None,
        };
        (dv, dtheta)
    }

    /// Deterministic right-hand side `(dv, dtheta)`.
    pub fn drift(&self, state: &SimState) -> Result<(RealField, Option<RealField>)> {
        self.check_state(state)?;
        require_admissible(&state.v)?;
        let (dv, dt) = self.drift_spectral(&state.v, state.theta.as_ref());
        Ok((
            dv.to_physical_unchecked(),
            dt.map(|t| t.to_physical_unchecked()),
        ))
    }

    /// Noise term `sum_n P[S_n] dW_n` (and the temperature analogue).
    pub fn diffusion(
        &self,
        state: &SimState,
        inc: &[f64],
    ) -> Result<(RealField, Option<RealField>)> {
        self.check_state(state)?;
        if inc.len() != self.noise_count() {
            return Err(Error::IncrementLength {
                expected: self.noise_count(),
                got: inc.len(),
            });
        }
        let (dv, dt) = self.diffusion_spectral(&state.v, state.theta.as_ref(), inc);
        Ok((
            dv.to_physical_unchecked(),
            dt.map(|t| t.to_physical_unchecked()),
        ))
    }

    fn energy_pieces(&self, v: &RealField, noise_v: &SpectralField) -> StepLedger {
        let cfg = &self.config;
        let vs = v.to_spectral();
        let grads = grads_of(&vs);
        let dissipation = 2.0 * cfg.dt * energy_form(&self.model.a, &grads);
        let mut ito = 0.0;
        for n in 0..cfg.noise.count() {
            let s = source_term(n, &grads, &cfg.noise.sigma, &cfg.noise.additive);
            let ps = hydrostatic_project_spectral(&self.maybe_dealias(s.to_spectral()));
            ito += ps.energy();
        }
        let martingale = 2.0 * v.inner(&noise_v.to_physical_unchecked());
        StepLedger {
            dissipation,
            ito_correction: cfg.dt * ito,
            martingale,
        }
    }

    /// `(rhs) / (1 + dt nu0 4 pi^2 |k|^2)`
    fn implicit_solve(s: &SpectralField, dt: f64, nu0: f64) -> SpectralField {
        if nu0 == 0.0 {
            return s.clone();
        }
        s.apply(|k| Complex64::new(1.0 / (1.0 - dt * nu0 * laplacian_symbol(k)), 0.0))
    }

    /// `v + dt (drift - nu0 Lap v) + noise`, before the implicit solve.
    fn explicit_part(
        base: &SpectralField,
        drift: &SpectralField,
        noise: &SpectralField,
        dt: f64,
        nu0: f64,
    ) -> SpectralField {
        let mut rhs = base.clone();
        rhs.axpy(dt, drift);
        if nu0 != 0.0 {
            rhs.axpy(
                -dt * nu0,
                &base.apply(|k| Complex64::new(laplacian_symbol(k), 0.0)),
            );
        }
        rhs.axpy(1.0, noise);
        rhs
    }

    fn finish_v(&self, rhs: &SpectralField) -> RealField {
        let s = Self::implicit_solve(rhs, self.config.dt, self.model.nu0);
        hydrostatic_project_spectral(&self.maybe_dealias(s)).to_physical_unchecked()
    }

    fn finish_theta(&self, rhs: &SpectralField) -> RealField {
        let nu0 = self.model.theta.as_ref().map_or(0.0, |t| t.nu0);
        self.maybe_dealias(Self::implicit_solve(rhs, self.config.dt, nu0))
            .to_physical_unchecked()
    }

    /// One step with explicit increments; also returns the energy pieces.
    pub fn step_with(&self, state: &SimState, inc: &[f64]) -> Result<(SimState, StepLedger)> {
        self.check_state(state)?;
        if inc.len() != self.noise_count() {
            return Err(Error::IncrementLength {
                expected: self.noise_count(),
                got: inc.len(),
            });
        }
        if state.v.grid() != self.config.grid {
            return Err(Error::Shape("state grid differs from solver grid".into()));
        }
        let dt = self.config.dt;
        let nu0 = self.model.nu0;
        let nu0t = self.model.theta.as_ref().map_or(0.0, |t| t.nu0);
        let v = &state.v;
        let th = state.theta.as_ref();
        let vs = v.to_spectral();
        let ts = th.map(|t| t.to_spectral());

        let (d0, dt0) = self.drift_spectral(v, th);
        let (g0, gt0) = self.diffusion_spectral(v, th, inc);
        let ledger = self.energy_pieces(v, &g0);

        let (v_new, theta_new) = match self.config.scheme {
            Scheme::EulerMaruyama => {
                let vn = self.finish_v(&Self::explicit_part(&vs, &d0, &g0, dt, nu0));
                let tn = match (&ts, &dt0, &gt0) {
                    (Some(ts), Some(d), Some(gn)) => {
                        Some(self.finish_theta(&Self::explicit_part(ts, d, gn, dt, nu0t)))
                    }
                    _ => None,
                };
                (vn, tn)
            }
            Scheme::Midpoint => {
                let vp = self.finish_v(&Self::explicit_part(&vs, &d0, &g0, dt, nu0));
                let tp = match (&ts, &dt0, &gt0) {
                    (Some(ts), Some(d), Some(gn)) => {
                        Some(self.finish_theta(&Self::explicit_part(ts, d, gn, dt, nu0t)))
                    }
                    _ => None,
                };
                let (d1, dt1) = self.drift_spectral(&vp, tp.as_ref());
                let (g1, gt1) = self.diffusion_spectral(&vp, tp.as_ref(), inc);
                let avg = |a: &SpectralField, b: &SpectralField| {
                    let mut s = a.clone();
                    s.axpy(1.0, b);
                    let mut h = SpectralField::zeros(s.grid(), s.components());
                    h.axpy(0.5, &s);
                    h
                };
                let vn = self.finish_v(&Self::explicit_part(
                    &vs,
                    &avg(&d0, &d1),
                    &avg(&g0, &g1),
                    dt,
                    nu0,
                ));
                let tn =
                    match (&ts, &dt0, &gt0, &dt1, &gt1) {
                        (Some(ts), Some(a), Some(b), Some(c), Some(d)) => Some(self.finish_theta(
                            &Self::explicit_part(ts, &avg(a, c), &avg(b, d), dt, nu0t),
                        )),
                        _ => None,
                    };
                (vn, tn)
            }
        };
        let next = SimState {
            t: (state.step_index + 1) as f64 * dt,
            v: v_new,
            theta: theta_new,
            step_index: state.step_index + 1,
        };
        let finite = next.v.is_finite() && next.theta.as_ref().is_none_or(|t| t.is_finite());
        if !finite {
            return Err(Error::BlowUp {
                t: next.t,
                step: next.step_index,
            });
        }
        Ok((next, ledger))
    }

    /// One step with the counter-keyed increments of `config.seed`.
    pub fn step(&self, state: &SimState) -> Result<SimState> {
        let inc = CounterRng::new(self.config.seed).increments(
            state.step_index,
            self.config.dt,
            self.noise_count(),
        )?;
        Ok(self.step_with(state, &inc)?.0)
    }

    pub fn simulate(
        &self,
        initial: &SimState,
    ) -> std::result::Result<Trajectory, SimulationFailure> {
        let mut src = CounterRng::new(self.config.seed);
        self.simulate_with(initial, &mut src)
    }

    /// Runs to `t_end`, recording diagnostics at `t = 0`, every
    /// `diagnostics_stride` steps, and at the final step.
    pub fn simulate_with(
        &self,
        initial: &SimState,
        source: &mut dyn IncrementSource,
    ) -> std::result::Result<Trajectory, SimulationFailure> {
        let fail =
            |error: Error, records: Vec<DiagnosticsRecord>, last: &SimState| SimulationFailure {
                error,
                records,
                last_state: last.clone(),
            };
        let mut records = Vec::new();
        if let Err(e) = self.check_state(initial) {
            return Err(fail(e, records, initial));
        }
        let residual = crate::hydrostatics::barotropic_divergence(&initial.v);
        if residual > ADMISSIBILITY_TOL {
            return Err(fail(Error::Inadmissible { residual }, records, initial));
        }
        if initial.t != 0.0 || initial.step_index != 0 {
            return Err(fail(
                Error::Parameter("runs start at t = 0".into()),
                records,
                initial,
            ));
        }
        let steps = match self.config.steps() {
            Ok(s) => s,
            Err(e) => return Err(fail(e, records, initial)),
        };
        if steps == 0 {
            return Ok(Trajectory {
                final_state: initial.clone(),
                records,
                serrin_integral: 0.0,
                serrin_tripped: false,
            });
        }
        let monitor = self.config.monitor;
        let stride = self.config.diagnostics_stride as u64;
        let e0 = initial.v.norm_sq();
        let mut budget = 0.0;
        let record = |s: &SimState, budget: f64| -> Result<DiagnosticsRecord> {
            let resid = (s.v.norm_sq() - e0 + budget).abs();
            measure(&s.v, s.theta.as_ref(), s.t, &monitor, resid)
        };
        match record(initial, 0.0) {
            Ok(r) => records.push(r),
            Err(e) => return Err(fail(e, records, initial)),
        }
        let mut state = initial.clone();
        let mut serrin = 0.0;
        let mut last_rec_t = 0.0;
        let mut last_integrand = records[0].serrin_integrand;
        for _ in 0..steps {
            let inc = match source.increments(state.step_index, self.config.dt, self.noise_count())
            {
                Ok(i) => i,
                Err(e) => return Err(fail(e, records, &state)),
            };
            let (next, ledger) = match self.step_with(&state, &inc) {
                Ok(x) => x,
                Err(e) => return Err(fail(e, records, &state)),
            };
            budget += ledger.dissipation - ledger.ito_correction - ledger.martingale;
            state = next;
            if state.step_index.is_multiple_of(stride) || state.step_index == steps {
                let r = match record(&state, budget) {
                    Ok(r) => r,
                    Err(e) => return Err(fail(e, records, &state)),
                };
                if !r.is_finite() {
                    let e = Error::BlowUp {
                        t: state.t,
                        step: state.step_index,
                    };
                    return Err(fail(e, records, &state));
                }
                serrin += (r.t - last_rec_t) * last_integrand;
                last_rec_t = r.t;
                last_integrand = r.serrin_integrand;
                records.push(r);
                if monitor.strict && serrin > monitor.threshold {
                    let e = Error::MonitorTripped {
                        integral: serrin,
                        t: state.t,
                    };
                    return Err(fail(e, records, &state));
                }
            }
        }
        let summary = serrin_monitor(&records, monitor.threshold)
            .map_err(|e| fail(e, records.clone(), &state))?;
        Ok(Trajectory {
            final_state: state,
            records,
            serrin_integral: summary.integral,
            serrin_tripped: summary.tripped,
        })
    }
}

pub fn drift(state: &SimState, config: &SolverConfig) -> Result<(RealField, Option<RealField>)> {
    Solver::new(config.clone())?.drift(state)
}

pub fn diffusion(
    state: &SimState,
    config: &SolverConfig,
    inc: &[f64],
) -> Result<(RealField, Option<RealField>)> {
    Solver::new(config.clone())?.diffusion(state, inc)
}

pub fn step(state: &SimState, config: &SolverConfig) -> Result<SimState> {
    Solver::new(config.clone())?.step(state)
}

pub fn simulate(
    config: &SolverConfig,
    initial: &SimState,
) -> std::result::Result<Trajectory, SimulationFailure> {
    match Solver::new(config.clone()) {
        Ok(s) => s.simulate(initial),
        Err(error) => Err(SimulationFailure {
            error,
            records: Vec::new(),
            last_state: initial.clone(),
        }),
    }
}

/// Random admissible, dealiased velocity with modes `|k_i| <= band` and
/// maximum absolute value `amplitude`.
pub fn random_initial(grid: GridSpec, band: usize, amplitude: f64, seed: u64) -> RealField {
    let raw = crate::spaces::random_band_limited(grid, 2, band, seed);
    let v = hydrostatic_project_spectral(&raw.to_spectral().dealias()).to_physical_unchecked();
    let m = v.max_abs();
    if m == 0.0 {
        v
    } else {
        v.scale(amplitude / m)
    }
}

/// `L^2` distance `||f - g||`.
pub fn l2_distance(f: &RealField, g: &RealField) -> f64 {
    f.sub(g).norm_sq().sqrt()
}

/// Horizontal divergence of `v` in physical space.
pub fn divergence_h(v: &RealField) -> RealField {
    horizontal_divergence(&v.to_spectral()).to_physical_unchecked()
}

/// Smallest eigenvalue of a constant matrix, exposed for configuration checks.
pub fn constant_min_eigenvalue(a: &Mat3) -> f64 {
    min_eigenvalue(a, 3)
}
