//! Per-record energy functionals, the Serrin monitor and weighted time norms.

use crate::error::{Error, Result};
use crate::exponents::check_monitor;
use crate::hydrostatics::{barotropic_divergence, barotropic_split};
use crate::spaces::bessel_norm;
use crate::spectral::{gradient, RealField};

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `||v||^2`
    pub l2_v: f64,
    /// `||grad v||^2`
    pub h1_grad: f64,
    /// `||d_z v||^2 + ||vtilde||_{L^4}^4`
    pub x_t: f64,
    /// `||d_z v||_{H^1}^2 + || |vtilde| |grad vtilde| ||^2`
    pub y_t_integrand: f64,
    /// `||v||_{H^{mu0,(q0,2)}}^{p0}`
    pub serrin_integrand: f64,
    /// L^2 norm of the barotropic divergence.
    pub incompressibility_residual: f64,
    /// Cumulative pathwise defect of the discrete energy balance.
    pub energy_balance_residual: f64,
    pub l2_theta: Option<f64>,
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 9] = [
        "t",
        "l2_v",
        "h1_grad",
        "X_t",
        "Y_t_integrand",
        "serrin_integrand",
        "incompressibility_residual",
        "energy_balance_residual",
        "l2_theta",
    ];

    pub fn values(&self) -> [Option<f64>; 9] {
        [
            Some(self.t),
            Some(self.l2_v),
            Some(self.h1_grad),
            Some(self.x_t),
            Some(self.y_t_integrand),
            Some(self.serrin_integrand),
            Some(self.incompressibility_residual),
            Some(self.energy_balance_residual),
            self.l2_theta,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().flatten().all(|v| v.is_finite())
    }
}

/// Serrin monitor parameters. `(p0, q0, delta0)` must lie in the same region
/// as admissible data; the trip is a warning unless `strict`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorConfig {
    pub p0: f64,
    pub q0: f64,
    pub delta0: f64,
    pub threshold: f64,
    pub strict: bool,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            p0: 2.0,
            q0: 2.0,
            delta0: 0.0,
            threshold: 1e6,
            strict: false,
        }
    }
}

impl MonitorConfig {
    /// Validates the triple and returns `mu0 = 2/q0 + 2/p0`.
    pub fn mu0(&self) -> Result<f64> {
        check_monitor(self.p0, self.q0, self.delta0)
    }
}

fn sum_sq_components(fields: &[RealField]) -> Vec<f64> {
    let n = fields[0].grid().len();
    let mut out = vec![0.0; n];
    for f in fields {
        for c in 0..f.components() {
            for (o, v) in out.iter_mut().zip(f.component(c)) {
                *o += v * v;
            }
        }
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Evaluates every functional of a record at one time.
pub fn measure(
    v: &RealField,
    theta: Option<&RealField>,
    t: f64,
    monitor: &MonitorConfig,
    energy_balance_residual: f64,
) -> Result<DiagnosticsRecord> {
    let mu0 = monitor.mu0()?;
    let grads = gradient(v);
    let h1_grad: f64 = grads.iter().map(|g| g.norm_sq()).sum();
    let dz = &grads[2];
    let dz_l2 = dz.norm_sq();
    let dz_grad: f64 = gradient(dz).iter().map(|g| g.norm_sq()).sum();

    let (_, vt) = barotropic_split(v);
    let vt2 = sum_sq_components(std::slice::from_ref(&vt));
    let l4 = mean(&vt2.iter().map(|s| s * s).collect::<Vec<_>>());
    let gvt = sum_sq_components(&gradient(&vt));
    let weighted = mean(&vt2.iter().zip(&gvt).map(|(a, b)| a * b).collect::<Vec<_>>());

    let serrin = bessel_norm(v, mu0, monitor.q0, 2.0)?.value.powf(monitor.p0);
    Ok(DiagnosticsRecord {
        t,
        l2_v: v.norm_sq(),
        h1_grad,
        x_t: dz_l2 + l4,
        y_t_integrand: dz_l2 + dz_grad + weighted,
        serrin_integrand: serrin,
        incompressibility_residual: barotropic_divergence(v),
        energy_balance_residual,
        l2_theta: theta.map(|th| th.norm_sq()),
    })
}

fn check_ordered(records: &[DiagnosticsRecord]) -> Result<()> {
    for (i, w) in records.windows(2).enumerate() {
        if !(w[1].t > w[0].t) {
            return Err(Error::Disordered(i + 1));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerrinSummary {
    pub integral: f64,
    pub tripped: bool,
}

/// Left-rectangle integral of `serrin_integrand` over the record times.
pub fn serrin_monitor(records: &[DiagnosticsRecord], threshold: f64) -> Result<SerrinSummary> {
    check_ordered(records)?;
    let integral = records
        .windows(2)
        .map(|w| (w[1].t - w[0].t) * w[0].serrin_integrand)
        .sum::<f64>();
    Ok(SerrinSummary {
        integral,
        tripped: integral > threshold,
    })
}

/// `sum dt t^a N(t)^p` with the left rectangle rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedTimeNorm {
    pub a: f64,
    pub p: f64,
    pub accumulated: f64,
}

impl WeightedTimeNorm {
    /// `a` must lie in `[0, p/2 - 1)` for `p > 2`, and be 0 for `p = 2`.
    pub fn new(a: f64, p: f64) -> Result<Self> {
        let ok = if p > 2.0 {
            a >= 0.0 && a < p / 2.0 - 1.0
        } else {
            p == 2.0 && a == 0.0
        };
        if !ok {
            return Err(Error::Parameter(format!(
                "weight a = {a} is not admissible for p = {p}"
            )));
        }
        Ok(Self {
            a,
            p,
            accumulated: 0.0,
        })
    }

    /// Adds the interval `[t, t + dt)` with the norm value at its left end.
    pub fn push(&mut self, t: f64, dt: f64, value: f64) {
        let w = if self.a == 0.0 { 1.0 } else { t.powf(self.a) };
        self.accumulated += dt * w * value.powf(self.p);
    }

    pub fn over_records(
        records: &[DiagnosticsRecord],
        a: f64,
        p: f64,
        norm: impl Fn(&DiagnosticsRecord) -> f64,
    ) -> Result<Self> {
        check_ordered(records)?;
        let mut w = Self::new(a, p)?;
        for pair in records.windows(2) {
            w.push(pair[0].t, pair[1].t - pair[0].t, norm(&pair[0]));
        }
        Ok(w)
    }
}
