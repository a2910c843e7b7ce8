use std::f64::consts::PI;
use std::time::{Duration, Instant};

use spe_core::dynamics::{
    advective_nonlinearity, random_initial, stratonovich_drift_coeffs, Formulation, Scheme,
    SimState, Solver, SolverConfig, TransportNoise,
};
use spe_core::ensemble::{continuity_experiment, monte_carlo, CriticalSpace, Reduce};
use spe_core::exponents::{check_admissibility, critical_exponents, ParamSet, Rational};
use spe_core::hydrostatics::{
    barotropic_divergence, hydrostatic_project, hydrostatic_q, vertical_velocity,
};
use spe_core::noise::{build_kraichnan, linear_fit};
use spe_core::rng::BrownianPath;
use spe_core::spaces::{besov_norm, bessel_norm, random_band_limited};
use spe_core::{Axis, GridSpec, RealField};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn l2(f: &RealField) -> f64 {
    f.norm_sq().sqrt()
}

fn decay_law() -> Outcome {
    let e = build_kraichnan(2, 4.0 / 3.0, 64).unwrap();
    let target = -(2.0 + 4.0 / 3.0) / 2.0;
    // independent fit over the raw modes
    let x: Vec<f64> = e.modes.iter().map(|m| m.norm_k().ln()).collect();
    let y: Vec<f64> = e.modes.iter().map(|m| m.amplitude.ln()).collect();
    let (raw, _, _) = linear_fit(&x, &y);
    let slope = e.decay_slope().unwrap();
    let rel = ((slope - target) / target).abs();
    let rel_raw = ((raw - target) / target).abs();
    outcome(
        rel <= 0.02 && rel_raw <= 0.02,
        format!("slope {slope:.6}, raw-mode fit {raw:.6}, target {target:.6}, rel err {rel:.2e}"),
    )
}

fn regularity_dichotomy() -> Outcome {
    let alpha = 2.0;
    let gamma = 0.9 * alpha / 2.0;
    let ks = [8i64, 16, 32, 64];
    let e = build_kraichnan(2, alpha, 64).unwrap();
    let r = e.regularity_report(gamma, &ks).unwrap();
    // lattice oracle: every nonzero k in the disc contributes (1+|k|^2)^(a/2) |k|^-(2+a)
    let mut worst: f64 = 0.0;
    for (i, &kk) in ks.iter().enumerate() {
        let mut h = 0.0;
        for a in -kk..=kk {
            for b in -kk..=kk {
                let r2 = (a * a + b * b) as f64;
                if r2 > 0.0 && r2 <= (kk * kk) as f64 {
                    h += (1.0 + r2).powf(alpha / 2.0) * r2.powf(-(2.0 + alpha) / 2.0);
                }
            }
        }
        worst = worst.max((r.h_partial[i] - h).abs() / h);
    }
    let passed = r.h_slope_vs_logk > 0.0
        && r.h_r_squared > 0.99
        && r.c_gamma_tail_ratio < 0.9
        && worst < 1e-10;
    outcome(
        passed,
        format!(
            "h slope {:.4}, R^2 {:.5}, C^gamma tail ratio {:.4}, lattice mismatch {worst:.1e}",
            r.h_slope_vs_logk, r.h_r_squared, r.c_gamma_tail_ratio
        ),
    )
}

fn projection_algebra() -> Outcome {
    let g = GridSpec::cube(16).unwrap();
    let (mut idem, mut pq, mut baro) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..50 {
        let v = random_band_limited(g, 2, 8, 1000 + seed);
        let p = hydrostatic_project(&v);
        idem = idem.max(l2(&hydrostatic_project(&p).sub(&p)));
        pq = pq.max(l2(&hydrostatic_project(&hydrostatic_q(&v))));
        baro = baro.max(barotropic_divergence(&p));
    }
    outcome(
        idem <= 1e-12 && pq <= 1e-12 && baro <= 1e-12,
        format!("|PPv-Pv| {idem:.1e}, |PQv| {pq:.1e}, barotropic div {baro:.1e}"),
    )
}

fn energy_cancellation() -> Outcome {
    let g = GridSpec::cube(16).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let v = random_initial(g, 5, 1.0, 2000 + seed);
        worst = worst.max(advective_nonlinearity(&v, true).unwrap().inner(&v).abs());
    }
    outcome(worst <= 1e-10, format!("max |(B(v), v)| {worst:.1e}"))
}

fn vertical_velocity_check() -> Outcome {
    let g = GridSpec::cube(16).unwrap();
    let v = RealField::from_fn(g, 2, |c, x| {
        if c == 0 {
            (2.0 * PI * x[0]).sin() * (2.0 * PI * x[2]).cos()
        } else {
            0.0
        }
    });
    let w = vertical_velocity(&v).unwrap();
    let exact = RealField::from_fn(g, 1, |_, x| {
        -(2.0 * PI * x[0]).cos() * (2.0 * PI * x[2]).sin()
    });
    let closed = w.sub(&exact).max_abs();

    let mut resid: f64 = 0.0;
    for seed in 0..10 {
        let v = random_initial(g, 5, 1.0, 3000 + seed);
        let vs = v.to_spectral();
        let mut s = vertical_velocity(&v)
            .unwrap()
            .to_spectral()
            .differentiate(Axis::Z);
        s.axpy(1.0, &vs.component_field(0).differentiate(Axis::X));
        s.axpy(1.0, &vs.component_field(1).differentiate(Axis::Y));
        resid = resid.max(l2(&s.to_physical().unwrap()));
    }
    outcome(
        closed <= 1e-12 && resid <= 1e-10,
        format!("closed form max err {closed:.1e}, |dz w + div_h v| {resid:.1e}"),
    )
}

/// `|| |v(T)|^2 + 2 sum dt |grad v_n|^2 - |v0|^2 |`, with the dissipation
/// evaluated from Fourier coefficients.
fn deterministic_residual(dt: f64) -> f64 {
    let g = GridSpec::cube(16).unwrap();
    let mut cfg = SolverConfig::new(g, dt, 0.1);
    cfg.seed = 0;
    let solver = Solver::new(cfg).unwrap();
    let v0 = random_initial(g, 3, 1.0, 42);
    let grad_sq = |v: &RealField| -> f64 {
        let s = v.to_spectral();
        let mut total = 0.0;
        for c in 0..2 {
            for (i, z) in s.component(c).iter().enumerate() {
                let k = g.wavevector(i);
                let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
                total += 4.0 * PI * PI * k2 * z.norm_sqr();
            }
        }
        total
    };
    let steps = (0.1 / dt).round() as usize;
    let mut state = SimState::new(v0.clone(), None);
    let mut diss = 0.0;
    for _ in 0..steps {
        diss += 2.0 * dt * grad_sq(&state.v);
        state = solver.step(&state).unwrap();
    }
    (state.v.norm_sq() + diss - v0.norm_sq()).abs()
}

fn energy_balance() -> Outcome {
    let r: Vec<f64> = [1e-3, 5e-4, 2.5e-4]
        .iter()
        .map(|&dt| deterministic_residual(dt))
        .collect();
    let q1 = r[0] / r[1];
    let q2 = r[1] / r[2];
    let ok = |q: f64| (1.6..=2.4).contains(&q);
    outcome(
        ok(q1) && ok(q2),
        format!(
            "residuals {:.3e}, {:.3e}, {:.3e}; ratios {q1:.3}, {q2:.3}",
            r[0], r[1], r[2]
        ),
    )
}

fn stream_velocity(c: usize, x: [f64; 3]) -> f64 {
    // v = (-dpsi/dy, dpsi/dx) with
    // psi = sin(2 pi x) cos(2 pi y) cos(2 pi z) + 0.5 cos(4 pi x + 1) sin(2 pi z)
    let (sx, cx) = (2.0 * PI * x[0]).sin_cos();
    let (sy, cy) = (2.0 * PI * x[1]).sin_cos();
    let cz = (2.0 * PI * x[2]).cos();
    let sz = (2.0 * PI * x[2]).sin();
    if c == 0 {
        2.0 * PI * sx * sy * cz
    } else {
        2.0 * PI * cx * cy * cz - 2.0 * PI * (4.0 * PI * x[0] + 1.0).sin() * sz
    }
}

fn random_shift() -> Outcome {
    let g = GridSpec::cube(16).unwrap();
    let c = 0.5;
    let t_end = 0.1;
    let dts = [1e-3, 5e-4, 2.5e-4];
    let fine = dts[2];
    let v0 = RealField::from_fn(g, 2, stream_velocity);
    let mut err = vec![0.0; dts.len()];
    let paths = 3;
    for p in 0..paths {
        let path = BrownianPath::sample(500 + p, fine, (t_end / fine).round() as usize, 1);
        let shift = c * path.endpoint()[0];
        let exact = RealField::from_fn(g, 2, |i, x| stream_velocity(i, [x[0] + shift, x[1], x[2]]));
        for (j, &dt) in dts.iter().enumerate() {
            let mut cfg = SolverConfig::new(g, dt, t_end);
            cfg.formulation = Formulation::Stratonovich;
            cfg.scheme = Scheme::Midpoint;
            cfg.viscosity = 0.0;
            cfg.nonlinear = false;
            cfg.noise = TransportNoise::constant(g, [c, 0.0, 0.0]);
            cfg.diagnostics_stride = 1_000_000;
            let solver = Solver::new(cfg).unwrap();
            let mut src = path.clone();
            let traj = solver
                .simulate_with(&SimState::new(v0.clone(), None), &mut src)
                .unwrap();
            err[j] += l2(&traj.final_state.v.sub(&exact)) / paths as f64;
        }
    }
    let factors: Vec<f64> = err.windows(2).map(|w| w[0] / w[1]).collect();
    outcome(
        factors.iter().all(|&f| f >= 1.4),
        format!(
            "mean endpoint errors {}; factors {}",
            err.iter()
                .map(|e| format!("{e:.3e}"))
                .collect::<Vec<_>>()
                .join(", "),
            factors
                .iter()
                .map(|f| format!("{f:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn mean_energy() -> Outcome {
    let g = GridSpec::cube(8).unwrap();
    // divergence-free single-mode forcings: (field, |g|^2, |k|^2)
    let forcings: [(RealField, f64, f64); 3] = [
        (
            RealField::from_fn(
                g,
                2,
                |c, x| if c == 0 { (2.0 * PI * x[1]).cos() } else { 0.0 },
            ),
            0.5,
            1.0,
        ),
        (
            RealField::from_fn(g, 2, |c, x| {
                if c == 1 {
                    0.7 * (2.0 * PI * x[2]).sin()
                } else {
                    0.0
                }
            }),
            0.5 * 0.49,
            1.0,
        ),
        (
            RealField::from_fn(g, 2, |c, x| {
                let s = 0.4 * (2.0 * PI * (x[0] + x[1])).sin();
                if c == 0 {
                    s
                } else {
                    -s
                }
            }),
            2.0 * 0.5 * 0.16,
            2.0,
        ),
    ];
    let mut cfg = SolverConfig::new(g, 1e-3, 0.1);
    cfg.nonlinear = false;
    cfg.noise = TransportNoise::additive(forcings.iter().map(|f| f.0.clone()).collect());
    cfg.diagnostics_stride = 50;
    cfg.seed = 7;
    let report = monte_carlo(
        &cfg,
        &SimState::new(RealField::zeros(g, 2), None),
        200,
        Reduce::MeanL2,
    )
    .unwrap();
    let oracle = |t: f64| -> f64 {
        forcings
            .iter()
            .map(|(_, e, k2)| {
                let lam = 4.0 * PI * PI * k2;
                e * (1.0 - (-2.0 * lam * t).exp()) / (2.0 * lam)
            })
            .sum()
    };
    let mut passed = report.failed == 0;
    let mut parts = Vec::new();
    for t in [0.05, 0.1] {
        match report.stats.iter().find(|s| (s.t - t).abs() < 1e-9) {
            Some(s) => {
                let z = (s.mean - oracle(t)) / s.std_error;
                passed &= z.abs() <= 3.0;
                parts.push(format!(
                    "t={t}: mean {:.5e}, oracle {:.5e}, z {z:+.2}",
                    s.mean,
                    oracle(t)
                ));
            }
            None => {
                passed = false;
                parts.push(format!("t={t}: no record"));
            }
        }
    }
    outcome(passed, parts.join("; "))
}

fn exponent_arithmetic() -> Outcome {
    let r = |n, d| Rational::new(n, d);
    let a = ParamSet::new(r(4, 1), r(8, 3), r(3, 8), r(7, 10));
    let (adm, _) = check_admissibility(&a);
    let rep = critical_exponents(&a, None).unwrap();
    // q < 2/delta, so beta = 1/2 + delta/4 + 1/(2q)
    let beta = r(1, 2) + a.delta / r(4, 1) + r(1, 1) / (r(2, 1) * a.q);
    let trace = r(2, 1) - a.delta - r(2, 1) * (r(1, 1) + rep.alpha_c) / a.p;
    let b = ParamSet::new(r(2, 1), r(2, 1), r(0, 1), r(11, 10));
    let h1 = critical_exponents(&b, None).unwrap();
    let passed = adm
        && rep.beta == r(25, 32)
        && rep.beta == beta
        && trace == r(2, 1) / a.q
        && rep.trace_smoothness == trace
        && h1.alpha_c == r(0, 1)
        && h1.trace_smoothness == r(1, 1);
    outcome(
        passed,
        format!(
            "beta {}, alpha_c {}, trace {} vs 2/q {}; H1 case alpha_c {}, trace {}",
            rep.beta,
            rep.alpha_c,
            rep.trace_smoothness,
            r(2, 1) / a.q,
            h1.alpha_c,
            h1.trace_smoothness
        ),
    )
}

fn embedding_ratio() -> Outcome {
    let g = GridSpec::cube(32).unwrap();
    let q = 8.0 / 3.0;
    let top = g.nx() / 4;
    let mut by_band = vec![0.0f64; top + 1];
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for t in 0..100 {
        let band = 1 + t % top;
        let f = random_band_limited(g, 1, band, 4000 + t as u64);
        let num = besov_norm(&f, 2.0 / q, q, 2.0, 4.0).unwrap().value;
        let den = bessel_norm(&f, 1.0, 2.0, 2.0).unwrap().value;
        let ratio = num / den;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        by_band[band] = by_band[band].max(ratio);
    }
    let half = top / 2;
    let lower = by_band[1..=half].iter().cloned().fold(0.0, f64::max);
    let upper = by_band[half + 1..].iter().cloned().fold(0.0, f64::max);
    let x: Vec<f64> = (1..=top).map(|b| (b as f64).ln()).collect();
    let y: Vec<f64> = by_band[1..].iter().map(|r| r.ln()).collect();
    let (slope, _, _) = linear_fit(&x, &y);
    outcome(
        lo > 0.0 && hi.is_finite() && upper <= lower,
        format!(
            "ratio range [{lo:.4}, {hi:.4}], max/min {:.3}; sup over bands {}..{} is {upper:.4} vs {lower:.4} below; log-log slope {slope:+.3}",
            hi / lo,
            half + 1,
            top
        ),
    )
}

fn stratonovich_margin() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let g = GridSpec::cube(16).unwrap();
    for d in [2, 3] {
        for alpha in [0.5, 1.0, 4.0 / 3.0, 1.9] {
            for kmax in [1, 2, 3] {
                for scale in [1.0, 0.3, 2.0] {
                    let e = build_kraichnan(d, alpha, kmax).unwrap().scaled(scale);
                    let a = stratonovich_drift_coeffs(&e, g).unwrap().a;
                    let m = e.parabolicity_margin(g, Some(&a)).unwrap();
                    worst = worst.max((m - 0.5).abs());
                    count += 1;
                }
            }
        }
    }
    outcome(
        worst <= 1e-12,
        format!("{count} ensembles, max |margin - 1/2| {worst:.1e}"),
    )
}

fn continuity() -> Outcome {
    let g = GridSpec::cube(16).unwrap();
    let e = build_kraichnan(2, 4.0 / 3.0, 2).unwrap().scaled(0.3);
    let mut cfg = SolverConfig::new(g, 1e-3, 0.02);
    cfg.formulation = Formulation::Stratonovich;
    cfg.noise = TransportNoise::from_ensemble(&e, g).unwrap();
    cfg.diagnostics_stride = 5;
    cfg.seed = 11;
    let v0 = random_initial(g, 3, 1.0, 5000);
    let dir = random_initial(g, 3, 1.0, 5001);
    let space = CriticalSpace {
        q: 8.0 / 3.0,
        p: 4.0,
    };
    let mut medians = Vec::new();
    for eps in [1e-2, 5e-3, 2.5e-3] {
        let r = continuity_experiment(&cfg, &v0, &dir, eps, 20, space).unwrap();
        medians.push(r.median().unwrap_or(f64::NAN));
    }
    outcome(
        medians.windows(2).all(|w| w[1] < w[0]),
        format!(
            "medians {}",
            medians
                .iter()
                .map(|m| format!("{m:.4e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 12] = [
        (
            1,
            "Kraichnan decay law",
            decay_law,
            Some(Duration::from_secs(1)),
        ),
        (
            2,
            "regularity dichotomy",
            regularity_dichotomy,
            Some(Duration::from_secs(5)),
        ),
        (3, "projection algebra", projection_algebra, None),
        (4, "energy cancellation", energy_cancellation, None),
        (5, "vertical velocity", vertical_velocity_check, None),
        (
            6,
            "deterministic energy balance",
            energy_balance,
            Some(Duration::from_secs(30)),
        ),
        (
            7,
            "random-shift oracle",
            random_shift,
            Some(Duration::from_secs(30)),
        ),
        (
            8,
            "mean-energy identity",
            mean_energy,
            Some(Duration::from_secs(120)),
        ),
        (9, "exponent arithmetic", exponent_arithmetic, None),
        (10, "embedding ratio", embedding_ratio, None),
        (11, "Stratonovich coefficients", stratonovich_margin, None),
        (
            12,
            "continuity in data",
            continuity,
            Some(Duration::from_secs(120)),
        ),
    ];
    let mut failures = 0;
    for (id, name, run, budget) in criteria {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed <= b);
        let passed = o.passed && in_time;
        if !passed {
            failures += 1;
        }
        let limit = budget.map_or(String::new(), |b| format!(" (limit {} s)", b.as_secs()));
        println!(
            "{} {id:>2} {name}: {} [{:.2} s{limit}]",
            if passed { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 12 criteria passed", 12 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
