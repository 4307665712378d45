//! Closed-loop integration of the controlled dynamics under a feedback law,
//! with batch convergence statistics and exponential-decay fitting.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::point_in_box;
use crate::system::SystemModel;

/// Integrator step control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepControl {
    /// Classical 4th-order Runge-Kutta with a fixed internal step.
    Fixed { h: f64 },
    /// Embedded 4(5) pair with per-step relative error control.
    Adaptive { rel_tol: f64 },
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl::Fixed { h: 1e-3 }
    }
}

/// How the batch of initial conditions is described.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IcSet {
    /// Explicit list of initial states.
    List { points: Vec<Vec<f64>> },
    /// Scalar multiples of a fixed direction: x0_k = c_k * direction.
    Span {
        direction: Vec<f64>,
        coefficients: Vec<f64>,
    },
    /// Uniformly spaced on a circle (planar systems only):
    /// x0_k = r (cos theta_k, sin theta_k), theta_k = 2 pi (k-1) / K.
    Circle { radius: f64, count: usize },
}

impl IcSet {
    pub fn points(&self, n: usize) -> Result<Vec<DVector<f64>>> {
        match self {
            IcSet::List { points } => {
                if points.is_empty() {
                    return Err(Error::input("initial-condition list must be nonempty"));
                }
                points
                    .iter()
                    .map(|p| {
                        if p.len() != n {
                            Err(Error::input("initial condition has wrong dimension"))
                        } else {
                            Ok(DVector::from_row_slice(p))
                        }
                    })
                    .collect()
            }
            IcSet::Span {
                direction,
                coefficients,
            } => {
                if direction.len() != n {
                    return Err(Error::input("span direction has wrong dimension"));
                }
                if coefficients.is_empty() {
                    return Err(Error::input("span coefficient list must be nonempty"));
                }
                let dir = DVector::from_row_slice(direction);
                Ok(coefficients.iter().map(|&c| &dir * c).collect())
            }
            IcSet::Circle { radius, count } => {
                if n != 2 {
                    return Err(Error::input("circle initial conditions require a planar system"));
                }
                if *count == 0 || *radius <= 0.0 {
                    return Err(Error::input("circle descriptor needs count > 0 and radius > 0"));
                }
                Ok((0..*count)
                    .map(|k| {
                        let theta = 2.0 * std::f64::consts::PI * k as f64 / *count as f64;
                        DVector::from_row_slice(&[radius * theta.cos(), radius * theta.sin()])
                    })
                    .collect())
            }
        }
    }
}

fn default_output_samples() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub horizon: f64,
    #[serde(default)]
    pub step: StepControl,
    pub initial_conditions: IcSet,
    /// Number of uniform output intervals; states are recorded at the
    /// interval endpoints.
    #[serde(default = "default_output_samples")]
    pub output_samples: usize,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::input("horizon must be positive"));
        }
        match self.step {
            StepControl::Fixed { h } => {
                if !(h > 0.0 && h <= self.horizon) {
                    return Err(Error::input("fixed step must satisfy 0 < h <= horizon"));
                }
            }
            StepControl::Adaptive { rel_tol } => {
                if !(rel_tol > 0.0 && rel_tol <= 1e-2) {
                    return Err(Error::input("adaptive tolerance must lie in (0, 1e-2]"));
                }
            }
        }
        if self.output_samples == 0 {
            return Err(Error::input("output sample count must be positive"));
        }
        Ok(())
    }
}

/// One integrated closed-loop trajectory sampled on a uniform output grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    /// Cumulative trapezoidal integral of q(x) + u'Du/2 up to each sample.
    pub running_cost: Vec<f64>,
    pub final_norm: f64,
    pub initial_condition: DVector<f64>,
    /// Set when some recorded state left the model's domain box.
    pub exited_domain: bool,
}

/// Batch statistics plus per-trajectory data.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub trajectories: Vec<Trajectory>,
    pub max_final_norm: f64,
    pub mean_final_norm: f64,
    /// Fit of |x(t)| <= alpha |x0| exp(-beta t): worst-case constants over
    /// the batch (largest alpha, smallest beta).
    pub decay_alpha: f64,
    pub decay_beta: f64,
}

type Feedback<'a> = dyn Fn(&DVector<f64>) -> DVector<f64> + 'a;

fn closed_loop_rhs(model: &SystemModel, feedback: &Feedback, x: &DVector<f64>) -> DVector<f64> {
    (model.f)(x) + (model.g)(x) * feedback(x)
}

fn check_finite(model: &SystemModel, x0: &DVector<f64>, t: f64, x: &DVector<f64>) -> Result<()> {
    let norm = x.norm();
    if !norm.is_finite() || norm > 1e6 {
        let _ = model;
        return Err(Error::BlowUp {
            ic: format!("{:?}", x0.as_slice()),
            time: t,
            norm,
        });
    }
    Ok(())
}

fn rk4_step(model: &SystemModel, feedback: &Feedback, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = closed_loop_rhs(model, feedback, x);
    let k2 = closed_loop_rhs(model, feedback, &(x + &k1 * (h / 2.0)));
    let k3 = closed_loop_rhs(model, feedback, &(x + &k2 * (h / 2.0)));
    let k4 = closed_loop_rhs(model, feedback, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// One Cash-Karp embedded 4(5) step: returns the 5th-order update and an
/// estimate of the local error.
fn rk45_step(
    model: &SystemModel,
    feedback: &Feedback,
    x: &DVector<f64>,
    h: f64,
) -> (DVector<f64>, f64) {
    const A: [[f64; 5]; 5] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
        [3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0, 0.0, 0.0],
        [-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0, 0.0],
        [
            1631.0 / 55296.0,
            175.0 / 512.0,
            575.0 / 13824.0,
            44275.0 / 110592.0,
            253.0 / 4096.0,
        ],
    ];
    const B5: [f64; 6] = [
        37.0 / 378.0,
        0.0,
        250.0 / 621.0,
        125.0 / 594.0,
        0.0,
        512.0 / 1771.0,
    ];
    const B4: [f64; 6] = [
        2825.0 / 27648.0,
        0.0,
        18575.0 / 48384.0,
        13525.0 / 55296.0,
        277.0 / 14336.0,
        1.0 / 4.0,
    ];
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(6);
    k.push(closed_loop_rhs(model, feedback, x));
    for s in 0..5 {
        let mut xs = x.clone();
        for (j, kj) in k.iter().enumerate() {
            xs += kj * (h * A[s][j]);
        }
        k.push(closed_loop_rhs(model, feedback, &xs));
    }
    let mut x5 = x.clone();
    let mut err = DVector::zeros(x.len());
    for (j, kj) in k.iter().enumerate() {
        x5 += kj * (h * B5[j]);
        err += kj * (h * (B5[j] - B4[j]));
    }
    (x5, err.norm())
}

/// Advance from t over an interval dt with adaptive step control.
fn advance_adaptive(
    model: &SystemModel,
    feedback: &Feedback,
    x0_label: &DVector<f64>,
    mut x: DVector<f64>,
    t_start: f64,
    dt: f64,
    rel_tol: f64,
) -> Result<DVector<f64>> {
    let mut t = 0.0;
    let mut h = dt;
    let mut rejected = 0usize;
    while t < dt - 1e-15 {
        h = h.min(dt - t);
        let (cand, err) = rk45_step(model, feedback, &x, h);
        let scale = rel_tol * x.norm().max(1e-8);
        if err <= scale || h < 1e-12 {
            t += h;
            x = cand;
            check_finite(model, x0_label, t_start + t, &x)?;
            let factor = if err > 0.0 {
                (0.9 * (scale / err).powf(0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            h *= factor;
        } else {
            rejected += 1;
            if rejected > 10_000 {
                return Err(Error::numerical(
                    "adaptive integrator failed to reach requested tolerance",
                ));
            }
            h *= (0.9 * (scale / err).powf(0.25)).clamp(0.1, 1.0);
        }
    }
    Ok(x)
}

/// Integrate the closed loop from a single initial condition.
pub fn integrate(
    model: &SystemModel,
    feedback: &Feedback,
    x0: &DVector<f64>,
    config: &SimulationConfig,
) -> Result<Trajectory> {
    config.validate()?;
    if x0.len() != model.n {
        return Err(Error::input("initial condition has wrong dimension"));
    }
    let samples = config.output_samples;
    let dt = config.horizon / samples as f64;

    let mut times = Vec::with_capacity(samples + 1);
    let mut states = Vec::with_capacity(samples + 1);
    let mut controls = Vec::with_capacity(samples + 1);
    let mut running_cost = Vec::with_capacity(samples + 1);

    let mut x = x0.clone();
    let mut exited_domain = !point_in_box(&x, &model.domain);
    let mut cost = 0.0;
    let stage_cost = |x: &DVector<f64>, u: &DVector<f64>| {
        (model.q)(x) + 0.5 * u.dot(&(&model.d * u))
    };

    let mut u = feedback(&x);
    let mut integrand_prev = stage_cost(&x, &u);
    times.push(0.0);
    states.push(x.clone());
    controls.push(u.clone());
    running_cost.push(0.0);
    check_finite(model, x0, 0.0, &x)?;

    for k in 1..=samples {
        let t_prev = (k - 1) as f64 * dt;
        match config.step {
            StepControl::Fixed { h } => {
                let nsub = (dt / h).ceil().max(1.0) as usize;
                let hs = dt / nsub as f64;
                for s in 0..nsub {
                    x = rk4_step(model, feedback, &x, hs);
                    check_finite(model, x0, t_prev + (s + 1) as f64 * hs, &x)?;
                }
            }
            StepControl::Adaptive { rel_tol } => {
                x = advance_adaptive(model, feedback, x0, x, t_prev, dt, rel_tol)?;
            }
        }
        u = feedback(&x);
        let integrand = stage_cost(&x, &u);
        cost += 0.5 * dt * (integrand_prev + integrand);
        integrand_prev = integrand;
        if !point_in_box(&x, &model.domain) {
            exited_domain = true;
        }
        times.push(k as f64 * dt);
        states.push(x.clone());
        controls.push(u.clone());
        running_cost.push(cost);
    }

    let final_norm = states.last().unwrap().norm();
    Ok(Trajectory {
        times,
        states,
        controls,
        running_cost,
        final_norm,
        initial_condition: x0.clone(),
        exited_domain,
    })
}

/// Least-squares fit of log |x(t)| = log c - beta t over the tail
/// t in [T/2, T], restricted to samples with |x(t)| > 1e-12.
/// Returns (alpha, beta) with alpha = c / |x0|.
pub fn decay_fit(traj: &Trajectory) -> Option<(f64, f64)> {
    let horizon = *traj.times.last()?;
    let pairs: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(traj.states.iter())
        .filter(|(t, x)| **t >= horizon / 2.0 && x.norm() > 1e-12)
        .map(|(t, x)| (*t, x.norm().ln()))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let st: f64 = pairs.iter().map(|(t, _)| t).sum();
    let sy: f64 = pairs.iter().map(|(_, y)| y).sum();
    let stt: f64 = pairs.iter().map(|(t, _)| t * t).sum();
    let sty: f64 = pairs.iter().map(|(t, y)| t * y).sum();
    let denom = n * stt - st * st;
    if denom.abs() < 1e-300 {
        return None;
    }
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n;
    let x0_norm = traj.initial_condition.norm().max(1e-300);
    Some((intercept.exp() / x0_norm, -slope))
}

/// Integrate the whole batch and compute summary statistics.
pub fn run_batch(
    model: &SystemModel,
    feedback: &Feedback,
    config: &SimulationConfig,
) -> Result<SimulationResult> {
    config.validate()?;
    let ics = config.initial_conditions.points(model.n)?;
    let mut trajectories = Vec::with_capacity(ics.len());
    let mut failures = Vec::new();
    for x0 in &ics {
        match integrate(model, feedback, x0, config) {
            Ok(traj) => trajectories.push(traj),
            Err(e) => failures.push(format!("{:?}: {e}", x0.as_slice())),
        }
    }
    if !failures.is_empty() {
        return Err(Error::synthesis(format!(
            "batch simulation failed for initial conditions: {}",
            failures.join("; ")
        )));
    }
    let max_final_norm = trajectories
        .iter()
        .map(|t| t.final_norm)
        .fold(0.0_f64, f64::max);
    let mean_final_norm =
        trajectories.iter().map(|t| t.final_norm).sum::<f64>() / trajectories.len() as f64;
    let fits: Vec<(f64, f64)> = trajectories.iter().filter_map(decay_fit).collect();
    let (decay_alpha, decay_beta) = if fits.is_empty() {
        // Every tail already below the 1e-12 floor: decay is as fast as we
        // can measure.
        (1.0, f64::INFINITY)
    } else {
        (
            fits.iter().map(|(a, _)| *a).fold(0.0_f64, f64::max),
            fits.iter().map(|(_, b)| *b).fold(f64::INFINITY, f64::min),
        )
    };
    Ok(SimulationResult {
        trajectories,
        max_final_norm,
        mean_final_norm,
        decay_alpha,
        decay_beta,
    })
}

/// Trapezoidal quadrature of q(x) + u'Du/2 over the recorded samples.
pub fn cost_of_trajectory(model: &SystemModel, traj: &Trajectory) -> f64 {
    let mut cost = 0.0;
    for k in 1..traj.times.len() {
        let dt = traj.times[k] - traj.times[k - 1];
        let val = |i: usize| {
            (model.q)(&traj.states[i])
                + 0.5 * traj.controls[i].dot(&(&model.d * &traj.controls[i]))
        };
        cost += 0.5 * dt * (val(k - 1) + val(k));
    }
    cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{builtin_1d, builtin_2d};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use std::sync::Arc;

    /// Autonomous scalar model x' = -x with quadratic cost, for integrator
    /// oracles.
    fn linear_decay_model() -> SystemModel {
        SystemModel {
            name: "linear-decay".into(),
            n: 1,
            m: 1,
            f: Arc::new(|x: &DVector<f64>| -x.clone()),
            g: Arc::new(|_: &DVector<f64>| DMatrix::zeros(1, 1)),
            q: Arc::new(|x: &DVector<f64>| x[0] * x[0]),
            d: DMatrix::identity(1, 1),
            domain: vec![(-10.0, 10.0)],
            jac_f: None,
            hess_q: None,
            exact: None,
        }
    }

    fn zero_feedback(m: usize) -> impl Fn(&DVector<f64>) -> DVector<f64> {
        move |_x: &DVector<f64>| DVector::zeros(m)
    }

    fn fixed_cfg(horizon: f64, h: f64, ics: IcSet) -> SimulationConfig {
        SimulationConfig {
            horizon,
            step: StepControl::Fixed { h },
            initial_conditions: ics,
            output_samples: 1000,
        }
    }

    #[test]
    fn linear_decay_matches_closed_form() {
        let model = linear_decay_model();
        let cfg = fixed_cfg(1.0, 1e-3, IcSet::List { points: vec![vec![1.0]] });
        let traj = integrate(&model, &zero_feedback(1), &DVector::from_row_slice(&[1.0]), &cfg)
            .unwrap();
        assert_relative_eq!(traj.states.last().unwrap()[0], (-1.0_f64).exp(), epsilon = 1e-8);
        // Whole trajectory matches e^{-t}.
        for (t, x) in traj.times.iter().zip(&traj.states) {
            assert_relative_eq!(x[0], (-t).exp(), epsilon = 1e-8);
        }
    }

    #[test]
    fn integrator_is_fourth_order() {
        // Error against e^{-1} shrinks ~16x per halving over a decade of
        // steps. Use one output interval so h is the only discretization.
        let model = linear_decay_model();
        let x0 = DVector::from_row_slice(&[1.0]);
        let exact = (-1.0_f64).exp();
        let err_at = |h: f64| {
            let cfg = SimulationConfig {
                horizon: 1.0,
                step: StepControl::Fixed { h },
                initial_conditions: IcSet::List { points: vec![vec![1.0]] },
                output_samples: 1,
            };
            let traj = integrate(&model, &zero_feedback(1), &x0, &cfg).unwrap();
            (traj.states.last().unwrap()[0] - exact).abs()
        };
        let hs = [0.2, 0.1, 0.05, 0.025];
        let errs: Vec<f64> = hs.iter().map(|&h| err_at(h)).collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(
                (10.0..=22.0).contains(&ratio),
                "halving ratio {ratio:.2}, errors {errs:?}"
            );
        }
    }

    #[test]
    fn exact_feedback_cancels_1d_nonlinearity() {
        // Under u* the closed loop is x' = -x, so x(t) = x0 e^{-t}.
        let model = builtin_1d();
        let exact = model.exact.clone().unwrap();
        let fb = move |x: &DVector<f64>| (exact.control)(x);
        let cfg = fixed_cfg(5.0, 1e-3, IcSet::List { points: vec![vec![0.8]] });
        let traj = integrate(&model, &fb, &DVector::from_row_slice(&[0.8]), &cfg).unwrap();
        for (t, x) in traj.times.iter().zip(&traj.states) {
            assert_relative_eq!(x[0], 0.8 * (-t).exp(), epsilon = 1e-7);
        }
    }

    #[test]
    fn open_loop_1d_diverges() {
        let model = builtin_1d();
        let cfg = fixed_cfg(10.0, 1e-3, IcSet::List { points: vec![vec![0.5]] });
        let out = integrate(&model, &zero_feedback(1), &DVector::from_row_slice(&[0.5]), &cfg);
        match out {
            Err(Error::BlowUp { .. }) => {}
            Ok(traj) => {
                // If it did not hit the blow-up bound, growth must be
                // monotone and it must have left the domain.
                assert!(traj.exited_domain);
                for w in traj.states.windows(2) {
                    assert!(w[1][0] >= w[0][0]);
                }
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn cost_under_exact_feedback_matches_value() {
        let model = builtin_1d();
        let exact = model.exact.clone().unwrap();
        let fb = {
            let exact = exact.clone();
            move |x: &DVector<f64>| (exact.control)(x)
        };
        let cfg = fixed_cfg(10.0, 1e-3, IcSet::List { points: vec![vec![0.8]] });
        let x0 = DVector::from_row_slice(&[0.8]);
        let traj = integrate(&model, &fb, &x0, &cfg).unwrap();
        let j = cost_of_trajectory(&model, &traj);
        let v_star = (exact.value)(&x0);
        assert_relative_eq!(v_star, 0.7424, epsilon = 1e-3);
        assert!((j - v_star).abs() / v_star < 0.02, "J = {j}, V* = {v_star}");
        // Matches the cumulative running cost at the horizon.
        assert_relative_eq!(j, *traj.running_cost.last().unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn running_cost_is_nondecreasing_and_truncation_monotone() {
        let model = builtin_1d();
        let exact = model.exact.clone().unwrap();
        let fb = move |x: &DVector<f64>| (exact.control)(x);
        let cfg = fixed_cfg(10.0, 1e-3, IcSet::List { points: vec![vec![0.8]] });
        let traj = integrate(&model, &fb, &DVector::from_row_slice(&[0.8]), &cfg).unwrap();
        for w in traj.running_cost.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        // J over [0, T1] <= J over [0, T2] for T1 < T2.
        let half = traj.running_cost[traj.running_cost.len() / 2];
        assert!(half <= *traj.running_cost.last().unwrap());
    }

    #[test]
    fn zero_trajectory_has_zero_cost() {
        let model = builtin_1d();
        let cfg = fixed_cfg(1.0, 1e-3, IcSet::List { points: vec![vec![0.0]] });
        let traj = integrate(&model, &zero_feedback(1), &DVector::zeros(1), &cfg).unwrap();
        assert_eq!(cost_of_trajectory(&model, &traj), 0.0);
        assert_eq!(traj.final_norm, 0.0);
    }

    #[test]
    fn adaptive_matches_fixed_step() {
        let model = linear_decay_model();
        let x0 = DVector::from_row_slice(&[1.0]);
        let cfg = SimulationConfig {
            horizon: 1.0,
            step: StepControl::Adaptive { rel_tol: 1e-8 },
            initial_conditions: IcSet::List { points: vec![vec![1.0]] },
            output_samples: 100,
        };
        let traj = integrate(&model, &zero_feedback(1), &x0, &cfg).unwrap();
        assert_relative_eq!(traj.states.last().unwrap()[0], (-1.0_f64).exp(), epsilon = 1e-7);
    }

    #[test]
    fn circle_descriptor_places_points_correctly() {
        let ics = IcSet::Circle { radius: 1.5, count: 8 };
        let pts = ics.points(2).unwrap();
        assert_eq!(pts.len(), 8);
        for p in &pts {
            assert_relative_eq!(p.norm(), 1.5, epsilon = 1e-12);
        }
        assert_relative_eq!(pts[0][0], 1.5, epsilon = 1e-12);
        assert_relative_eq!(pts[2][1], 1.5, epsilon = 1e-12);
        // Circle requires a planar system.
        assert!(ics.points(3).is_err());
    }

    #[test]
    fn span_descriptor_scales_direction() {
        let ics = IcSet::Span {
            direction: vec![1.0],
            coefficients: vec![-1.2, -0.8, -0.4, 0.4, 0.8, 1.2],
        };
        let pts = ics.points(1).unwrap();
        assert_eq!(pts.len(), 6);
        assert_relative_eq!(pts[0][0], -1.2, epsilon = 1e-15);
        assert_relative_eq!(pts[5][0], 1.2, epsilon = 1e-15);
    }

    #[test]
    fn batch_statistics_and_decay_fit() {
        let model = linear_decay_model();
        let cfg = fixed_cfg(
            10.0,
            1e-3,
            IcSet::Span {
                direction: vec![1.0],
                coefficients: vec![0.5, 1.0, 2.0],
            },
        );
        let result = run_batch(&model, &zero_feedback(1), &cfg).unwrap();
        assert_eq!(result.trajectories.len(), 3);
        assert_relative_eq!(result.max_final_norm, 2.0 * (-10.0_f64).exp(), epsilon = 1e-8);
        // True decay rate is exactly 1 and alpha is exactly 1.
        assert_relative_eq!(result.decay_beta, 1.0, epsilon = 1e-6);
        assert_relative_eq!(result.decay_alpha, 1.0, epsilon = 1e-6);
        assert!(result.decay_beta > 0.0);
    }

    #[test]
    fn batch_reports_all_failing_initial_conditions() {
        let model = builtin_1d();
        let cfg = fixed_cfg(
            10.0,
            1e-3,
            IcSet::List { points: vec![vec![0.5], vec![1.0]] },
        );
        let err = run_batch(&model, &zero_feedback(1), &cfg).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("0.5") && msg.contains("1.0"), "{msg}");
    }

    #[test]
    fn domain_exit_is_flagged_not_fatal() {
        let model = linear_decay_model();
        // Start just outside the declared domain; integration proceeds.
        let cfg = fixed_cfg(1.0, 1e-3, IcSet::List { points: vec![vec![10.5]] });
        let traj = integrate(
            &model,
            &zero_feedback(1),
            &DVector::from_row_slice(&[10.5]),
            &cfg,
        )
        .unwrap();
        assert!(traj.exited_domain);
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad_h = SimulationConfig {
            horizon: 1.0,
            step: StepControl::Fixed { h: 2.0 },
            initial_conditions: IcSet::List { points: vec![vec![0.0]] },
            output_samples: 10,
        };
        assert!(bad_h.validate().is_err());
        let bad_tol = SimulationConfig {
            horizon: 1.0,
            step: StepControl::Adaptive { rel_tol: 0.5 },
            initial_conditions: IcSet::List { points: vec![vec![0.0]] },
            output_samples: 10,
        };
        assert!(bad_tol.validate().is_err());
    }

    #[test]
    fn config_serde_round_trip() {
        let cfg = SimulationConfig {
            horizon: 10.0,
            step: StepControl::Adaptive { rel_tol: 1e-6 },
            initial_conditions: IcSet::Circle { radius: 1.0, count: 8 },
            output_samples: 500,
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: SimulationConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn two_dimensional_closed_loop_converges_under_exact_control() {
        let model = builtin_2d();
        let exact = model.exact.clone().unwrap();
        let fb = move |x: &DVector<f64>| (exact.control)(x);
        let cfg = fixed_cfg(10.0, 1e-3, IcSet::Circle { radius: 1.0, count: 4 });
        let result = run_batch(&model, &fb, &cfg).unwrap();
        assert!(result.max_final_norm < 1e-2);
        assert!(result.decay_beta > 0.0);
    }
}
