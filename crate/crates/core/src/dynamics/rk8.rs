//! Dormand–Prince 8(5,3) explicit Runge–Kutta with adaptive step size,
//! specialised to complex state vectors of an autonomous linear ODE.
//!
//! Output times are hit by shortening the step that would overshoot them
//! ("step landing"), so every returned state is an accepted integrator
//! state rather than an interpolant.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::ZERO;

#[rustfmt::skip]
const A: [&[(usize, f64)]; 12] = [
    &[],
    &[(0, 5.260_015_195_876_773E-2)],
    &[(0, 1.972_505_698_453_79E-2), (1, 5.917_517_095_361_37E-2)],
    &[(0, 2.958_758_547_680_685E-2), (2, 8.876_275_643_042_054E-2)],
    &[(0, 2.413_651_341_592_667E-1), (2, -8.845_494_793_282_861E-1), (3, 9.248_340_032_617_92E-1)],
    &[(0, 3.703_703_703_703_703_5E-2), (3, 1.708_286_087_294_738_6E-1), (4, 1.254_676_875_668_224_2E-1)],
    &[(0, 3.710_937_5E-2), (3, 1.702_522_110_195_440_5E-1), (4, 6.021_653_898_045_596E-2), (5, -1.757_812_5E-2)],
    &[(0, 3.709_200_011_850_479E-2), (3, 1.703_839_257_122_399_8E-1), (4, 1.072_620_304_463_732_8E-1),
      (5, -1.531_943_774_862_440_2E-2), (6, 8.273_789_163_814_023E-3)],
    &[(0, 6.241_109_587_160_757E-1), (3, -3.360_892_629_446_941_4), (4, -8.682_193_468_417_26E-1),
      (5, 2.759_209_969_944_671E1), (6, 2.015_406_755_047_789_4E1), (7, -4.348_988_418_106_996E1)],
    &[(0, 4.776_625_364_382_643_4E-1), (3, -2.488_114_619_971_667_7), (4, -5.902_908_268_368_43E-1),
      (5, 2.123_005_144_818_119_3E1), (6, 1.527_923_363_288_242_3E1), (7, -3.328_821_096_898_486E1),
      (8, -2.033_120_170_850_862_7E-2)],
    &[(0, -9.371_424_300_859_873E-1), (3, 5.186_372_428_844_064), (4, 1.091_437_348_996_729_5),
      (5, -8.149_787_010_746_927), (6, -1.852_006_565_999_696E1), (7, 2.273_948_709_935_050_5E1),
      (8, 2.493_605_552_679_652_3), (9, -3.046_764_471_898_219_6)],
    &[(0, 2.273_310_147_516_538), (3, -1.053_449_546_673_725E1), (4, -2.000_872_058_224_862_5),
      (5, -1.795_893_186_311_88E1), (6, 2.794_888_452_941_996E1), (7, -2.858_998_277_135_023_5),
      (8, -8.872_856_933_530_63), (9, 1.236_056_717_579_430_3E1), (10, 6.433_927_460_157_636E-1)],
];

/// Eighth-order weights (stages 1, 6..12).
#[rustfmt::skip]
const B: [(usize, f64); 8] = [
    (0, 5.429_373_411_656_876_5E-2), (5, 4.450_312_892_752_409), (6, 1.891_517_899_314_500_3),
    (7, -5.801_203_960_010_585), (8, 3.111_643_669_578_199E-1), (9, -1.521_609_496_625_161E-1),
    (10, 2.013_654_008_040_303_4E-1), (11, 4.471_061_572_777_259E-2),
];

/// Fifth-order error weights.
#[rustfmt::skip]
const ER: [(usize, f64); 8] = [
    (0, 1.312_004_499_419_488E-2), (5, -1.225_156_446_376_204_4), (6, -4.957_589_496_572_502E-1),
    (7, 1.664_377_182_454_986_4), (8, -3.503_288_487_499_736_6E-1), (9, 3.341_791_187_130_175E-1),
    (10, 8.192_320_648_511_571E-2), (11, -2.235_530_786_388_629_4E-2),
];

/// Third-order error weights on stages 1, 9, 12.
const BHH: [(usize, f64); 3] = [
    (0, 2.440_944_881_889_764E-1),
    (8, 7.338_466_882_816_118E-1),
    (11, 2.205_882_352_941_176_6E-2),
];

#[derive(Clone, Debug)]
pub struct Dop853Options {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_max: Option<f64>,
    pub safety: f64,
    /// Lower bound on `h_new / h`.
    pub min_factor: f64,
    /// Upper bound on `h_new / h`.
    pub max_factor: f64,
    /// Lund stabilization exponent.
    pub beta: f64,
}

impl Dop853Options {
    /// Mixed absolute/relative tolerance `tol`.
    pub fn with_tol(tol: f64) -> Self {
        Dop853Options {
            rtol: tol,
            atol: tol,
            ..Default::default()
        }
    }
}

impl Default for Dop853Options {
    fn default() -> Self {
        Dop853Options {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 10_000_000,
            h_max: None,
            safety: 0.9,
            min_factor: 0.333,
            max_factor: 6.0,
            beta: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

struct Workspace {
    k: Vec<Vec<Complex64>>,
    stage: Vec<Complex64>,
    y_new: Vec<Complex64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            k: (0..12).map(|_| vec![ZERO; n]).collect(),
            stage: vec![ZERO; n],
            y_new: vec![ZERO; n],
        }
    }
}

fn weighted_error(y: &[Complex64], f0: &[Complex64], opts: &Dop853Options) -> f64 {
    y.iter()
        .zip(f0)
        .map(|(a, b)| {
            let sk = opts.atol + opts.rtol * a.norm();
            (b.norm() / sk).powi(2)
        })
        .sum()
}

/// Initial step guess following Hairer's `hinit` for an order-8 method.
fn initial_step<F>(rhs: &mut F, y: &[Complex64], f0: &[Complex64], h_max: f64, opts: &Dop853Options) -> f64
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    let dnf = weighted_error(y, f0, opts);
    let dny = weighted_error(y, y, opts);
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(h_max);
    let y1: Vec<Complex64> = y.iter().zip(f0).map(|(a, b)| a + b * h).collect();
    let mut f1 = vec![ZERO; y.len()];
    rhs(&y1, &mut f1);
    let der2 = y
        .iter()
        .zip(f0.iter().zip(&f1))
        .map(|(a, (b0, b1))| {
            let sk = opts.atol + opts.rtol * a.norm();
            ((b1 - b0).norm() / sk).powi(2)
        })
        .sum::<f64>()
        .sqrt()
        / h;
    let der12 = der2.abs().max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(1.0 / 8.0)
    };
    (100.0 * h).min(h1).min(h_max)
}

/// Integrates `y' = rhs(y)` from `t = 0`, calling `observe(i, t_i, y(t_i))`
/// for every requested output time in order.
///
/// `times` must be non-negative and strictly increasing.
pub fn integrate<F, O>(
    mut rhs: F,
    y0: &[Complex64],
    times: &[f64],
    opts: &Dop853Options,
    mut observe: O,
) -> Result<IntegrationStats>
where
    F: FnMut(&[Complex64], &mut [Complex64]),
    O: FnMut(usize, f64, &[Complex64]) -> Result<()>,
{
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::Domain("integrator tolerances must be positive".into()));
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "output times must be finite, non-negative and strictly increasing".into(),
        ));
    }
    let n = y0.len();
    let mut stats = IntegrationStats::default();
    let mut y = y0.to_vec();
    let mut t = 0.0_f64;
    let mut next = 0usize;
    while next < times.len() && times[next] == 0.0 {
        observe(next, 0.0, &y)?;
        next += 1;
    }
    if next == times.len() {
        return Ok(stats);
    }
    let t_end = *times.last().expect("non-empty");
    let h_max = opts.h_max.unwrap_or(t_end).min(t_end);

    let mut ws = Workspace::new(n);
    rhs(&y, &mut ws.k[0]);
    stats.evaluations += 1;
    let mut h = initial_step(&mut rhs, &y, &ws.k[0], h_max, opts);
    stats.evaluations += 1;

    let expo1 = 1.0 / 8.0 - opts.beta * 0.2;
    let facc1 = 1.0 / opts.min_factor;
    let facc2 = 1.0 / opts.max_factor;
    let mut last_rejected = false;

    while next < times.len() {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Numeric(format!(
                "integrator exceeded {} steps at t = {t:.6}",
                opts.max_steps
            )));
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow {
                t,
                h,
                steps: stats.accepted + stats.rejected,
            });
        }
        let target = times[next];
        let landing = t + h * (1.0 + 1e-12) >= target;
        let step = if landing { target - t } else { h };

        // Stages 2..12.
        for s in 1..12 {
            let (done, rest) = ws.k.split_at_mut(s);
            combine(&y, step, A[s], done, &mut ws.stage);
            rhs(&ws.stage, &mut rest[0]);
        }
        stats.evaluations += 11;

        let mut err = 0.0;
        let mut err2 = 0.0;
        for i in 0..n {
            let mut incr = ZERO;
            for &(j, b) in &B {
                incr += ws.k[j][i] * b;
            }
            let mut e5 = ZERO;
            for &(j, e) in &ER {
                e5 += ws.k[j][i] * e;
            }
            let mut e3 = incr;
            for &(j, c) in &BHH {
                e3 -= ws.k[j][i] * c;
            }
            ws.y_new[i] = y[i] + incr * step;
            let sk = opts.atol + opts.rtol * y[i].norm_sqr().max(ws.y_new[i].norm_sqr()).sqrt();
            let inv = 1.0 / (sk * sk);
            err += e5.norm_sqr() * inv;
            err2 += e3.norm_sqr() * inv;
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = step.abs() * err * (1.0 / (deno * n as f64)).sqrt();
        if !err.is_finite() {
            return Err(Error::Numeric(format!("non-finite error estimate at t = {t:.6}")));
        }

        let fac11 = err.powf(expo1);
        if err <= 1.0 {
            stats.accepted += 1;
            let facold = err.max(1e-4);
            let fac = facc2.max(facc1.min(fac11 / facold.powf(opts.beta) / opts.safety));
            let mut h_new = (step / fac).min(h_max);
            if last_rejected {
                h_new = h_new.min(step);
            }
            last_rejected = false;
            std::mem::swap(&mut y, &mut ws.y_new);
            rhs(&y, &mut ws.k[0]);
            stats.evaluations += 1;
            if landing {
                t = target;
                observe(next, t, &y)?;
                next += 1;
                // A step shortened only to land keeps the previous proposal.
                h = if step < h { h.max(h_new) } else { h_new };
            } else {
                t += step;
                h = h_new;
            }
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h = step / facc1.min(fac11 / opts.safety);
        }
    }
    Ok(stats)
}

fn combine(y: &[Complex64], h: f64, coeffs: &[(usize, f64)], k: &[Vec<Complex64>], out: &mut [Complex64]) {
    out.copy_from_slice(y);
    for &(j, a) in coeffs {
        let scale = a * h;
        for (o, kj) in out.iter_mut().zip(&k[j]) {
            o.re += scale * kj.re;
            o.im += scale * kj.im;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(omega: f64) -> impl FnMut(&[Complex64], &mut [Complex64]) {
        move |y, out| {
            out[0] = Complex64::new(0.0, -omega) * y[0];
        }
    }

    #[test]
    fn tableau_rows_sum_to_nodes() {
        let c = [
            0.0,
            5.260_015_195_876_773E-2,
            7.890_022_793_815_16E-2,
            1.183_503_419_072_274E-1,
            2.816_496_580_927_726E-1,
            1.0 / 3.0,
            0.25,
            3.076_923_076_923_077E-1,
            6.512_820_512_820_513E-1,
            0.6,
            8.571_428_571_428_571E-1,
            1.0,
        ];
        for (row, ci) in A.iter().zip(c) {
            let s: f64 = row.iter().map(|&(_, a)| a).sum();
            assert!((s - ci).abs() < 1e-13, "{s} vs {ci}");
        }
        let b: f64 = B.iter().map(|&(_, b)| b).sum();
        assert!((b - 1.0).abs() < 1e-13);
        let e: f64 = ER.iter().map(|&(_, e)| e).sum();
        assert!(e.abs() < 1e-13);
    }

    #[test]
    fn fixed_step_convergence_is_eighth_order() {
        // One long step of size h, error against exp(-i t); with tolerances
        // huge the controller accepts the step as given via h_max.
        let errors: Vec<f64> = [0.8, 0.4]
            .iter()
            .map(|&h| {
                let opts = Dop853Options {
                    rtol: 1e3,
                    atol: 1e3,
                    h_max: Some(h),
                    ..Default::default()
                };
                let mut last = ZERO;
                integrate(oscillator(1.0), &[Complex64::new(1.0, 0.0)], &[3.2], &opts, |_, _, y| {
                    last = y[0];
                    Ok(())
                })
                .unwrap();
                (last - Complex64::from_polar(1.0, -3.2)).norm()
            })
            .collect();
        let order = (errors[0] / errors[1]).log2();
        assert!(order > 7.5, "observed order {order}, errors {errors:?}");
    }

    #[test]
    fn lands_exactly_on_requested_times() {
        let times: Vec<f64> = (0..11).map(|i| i as f64 * 0.7).collect();
        let mut seen = Vec::new();
        integrate(
            oscillator(2.0),
            &[Complex64::new(1.0, 0.0)],
            &times,
            &Dop853Options::with_tol(1e-12),
            |i, t, y| {
                assert_eq!(t, times[i]);
                assert!((y[0] - Complex64::from_polar(1.0, -2.0 * t)).norm() < 1e-10);
                seen.push(i);
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(seen, (0..11).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_grids() {
        let r = integrate(oscillator(1.0), &[Complex64::new(1.0, 0.0)], &[1.0, 0.5], &Dop853Options::default(), |_, _, _| Ok(()));
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn exploding_rhs_underflows() {
        // y' = y² blows up at t = 1.
        let rhs = |y: &[Complex64], out: &mut [Complex64]| out[0] = y[0] * y[0];
        let r = integrate(rhs, &[Complex64::new(1.0, 0.0)], &[2.0], &Dop853Options::default(), |_, _, _| Ok(()));
        assert!(matches!(r, Err(Error::StepUnderflow { .. }) | Err(Error::Numeric(_))), "{r:?}");
    }
}
