use std::fmt::Write as _;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::dataset::Dataset;
use crate::error::{Error, Result};

/// A model `y = f(x; p)` with an analytic gradient in `p`.
pub trait Model {
    fn parameter_names(&self) -> &[&'static str];
    fn parameter_units(&self) -> &[&'static str];
    fn value(&self, x: f64, p: &[f64]) -> f64;
    /// Writes ∂f/∂p_j at `x` into `grad`.
    fn gradient(&self, x: f64, p: &[f64], grad: &mut [f64]);

    fn n_params(&self) -> usize {
        self.parameter_names().len()
    }
}

/// Straight line `a + b·x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearModel;

impl Model for LinearModel {
    fn parameter_names(&self) -> &[&'static str] {
        &["intercept", "slope"]
    }

    fn parameter_units(&self) -> &[&'static str] {
        &["", ""]
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        p[0] + p[1] * x
    }

    fn gradient(&self, x: f64, _p: &[f64], grad: &mut [f64]) {
        grad[0] = 1.0;
        grad[1] = x;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub initial_damping: f64,
    /// Converged when every relative parameter change is below this.
    pub parameter_tolerance: f64,
    /// Converged when the gradient norm of the cost is below this.
    pub gradient_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            initial_damping: 1e-3,
            parameter_tolerance: 1e-10,
            gradient_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<&'static str>,
    pub units: Vec<&'static str>,
    pub parameters: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// √(Σ wᵢ² rᵢ²) at the solution.
    pub residual_norm: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Residual norm after every accepted step, starting with the initial
    /// guess.
    pub residual_history: Vec<f64>,
}

impl FitResult {
    pub const CSV_HEADER: &'static str = "parameter,value,std_error,unit";

    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| *n == name)
            .map(|i| self.parameters[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| *n == name)
            .map(|i| self.std_errors[i])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for i in 0..self.parameters.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.names[i], self.parameters[i], self.std_errors[i], self.units[i]
            )?;
        }
        Ok(())
    }

    pub fn report(&self) -> String {
        let mut s = String::new();
        for i in 0..self.parameters.len() {
            let _ = writeln!(
                s,
                "{:<12} = {:.6e} ± {:.2e} {}",
                self.names[i], self.parameters[i], self.std_errors[i], self.units[i]
            );
        }
        let _ = writeln!(
            s,
            "residual norm {:.4e}, {} after {} iterations",
            self.residual_norm,
            if self.converged {
                "converged"
            } else {
                "not converged"
            },
            self.iterations
        );
        s
    }
}

struct Linearization {
    residuals: DVector<f64>,
    jacobian: DMatrix<f64>,
}

fn linearize<M: Model + ?Sized>(
    model: &M,
    data: &Dataset,
    weights: &[f64],
    p: &[f64],
) -> Linearization {
    let n = data.len();
    let m = model.n_params();
    let mut residuals = DVector::zeros(n);
    let mut jacobian = DMatrix::zeros(n, m);
    let mut grad = vec![0.0; m];
    for (i, (pt, w)) in data.points().iter().zip(weights).enumerate() {
        residuals[i] = w * (pt.y - model.value(pt.x, p));
        model.gradient(pt.x, p, &mut grad);
        for j in 0..m {
            jacobian[(i, j)] = w * grad[j];
        }
    }
    Linearization {
        residuals,
        jacobian,
    }
}

fn cost<M: Model + ?Sized>(model: &M, data: &Dataset, weights: &[f64], p: &[f64]) -> f64 {
    data.points()
        .iter()
        .zip(weights)
        .map(|(pt, w)| (w * (pt.y - model.value(pt.x, p))).powi(2))
        .sum()
}

/// Damped Gauss–Newton (Levenberg–Marquardt) least squares. The damping is
/// multiplied by 10 after a rejected step and divided by 10 after an
/// accepted one; the damping term is scaled by the diagonal of JᵀJ.
pub fn levenberg_marquardt<M: Model + ?Sized>(
    model: &M,
    data: &Dataset,
    init: &[f64],
    options: &LmOptions,
) -> Result<FitResult> {
    let m = model.n_params();
    if init.len() != m {
        return Err(Error::Argument(format!(
            "{} initial values for {m} parameters",
            init.len()
        )));
    }
    if data.len() < m {
        return Err(Error::Identifiability(format!(
            "{} points cannot determine {m} parameters",
            data.len()
        )));
    }
    let weights = data.weights();
    let mut p = init.to_vec();
    let mut current = cost(model, data, &weights, &p);
    if !current.is_finite() {
        return Err(Error::Argument(
            "model is not finite at the initial guess".into(),
        ));
    }
    let mut history = vec![current.sqrt()];
    let mut lambda = options.initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    let mut lin = linearize(model, data, &weights, &p);
    let mut gradient_norm = (lin.jacobian.transpose() * &lin.residuals).norm();

    while iterations < options.max_iterations {
        if gradient_norm < options.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let jtj = lin.jacobian.transpose() * &lin.jacobian;
        let jtr = lin.jacobian.transpose() * &lin.residuals;
        let mut a = jtj.clone();
        for j in 0..m {
            a[(j, j)] += lambda * jtj[(j, j)].max(f64::MIN_POSITIVE);
        }
        let Some(step) = a.lu().solve(&jtr) else {
            lambda *= 10.0;
            continue;
        };
        let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let small_step = p.iter().zip(step.iter()).all(|(pj, dj)| {
            dj.abs() <= options.parameter_tolerance * pj.abs().max(f64::MIN_POSITIVE)
        });
        let trial_cost = cost(model, data, &weights, &trial);
        if trial_cost.is_finite() && trial_cost < current {
            p = trial;
            current = trial_cost;
            history.push(current.sqrt());
            lambda = (lambda / 10.0).max(1e-15);
            lin = linearize(model, data, &weights, &p);
            gradient_norm = (lin.jacobian.transpose() * &lin.residuals).norm();
            if small_step {
                converged = true;
                break;
            }
        } else {
            // A negligible step that no longer lowers the cost means the
            // minimum is resolved to rounding.
            if small_step {
                converged = true;
                break;
            }
            lambda *= 10.0;
            if lambda > 1e20 {
                break;
            }
        }
    }

    if !converged {
        return Err(Error::NotConverged {
            iterations,
            residual_norm: current.sqrt(),
            best: p,
        });
    }

    let jtj = lin.jacobian.transpose() * &lin.jacobian;
    let inverse = jtj
        .try_inverse()
        .ok_or_else(|| Error::Identifiability("singular normal matrix at the solution".into()))?;
    let dof = data.len().saturating_sub(m).max(1) as f64;
    // Absolute sigmas fix the scale; otherwise it comes from the residuals.
    let scale = if data.has_sigmas() {
        1.0
    } else {
        current / dof
    };
    let std_errors = (0..m)
        .map(|j| (inverse[(j, j)] * scale).max(0.0).sqrt())
        .collect();

    Ok(FitResult {
        names: model.parameter_names().to_vec(),
        units: model.parameter_units().to_vec(),
        parameters: p,
        std_errors,
        residual_norm: current.sqrt(),
        gradient_norm,
        converged,
        iterations,
        residual_history: history,
    })
}

/// Step of about 1e-6 relative, rounded to a power of two so that `p ± h`
/// is exact.
fn difference_step(p: f64) -> f64 {
    let scale = if p != 0.0 { p.abs() } else { 1.0 };
    (1e-6 * scale).log2().round().exp2()
}

/// Worst deviation between the analytic gradient and central finite
/// differences (relative step 1e-6) over `xs`. Each entry is measured
/// relative to the largest magnitude of its parameter's derivative over
/// `xs`, so points where a derivative vanishes stay well defined.
pub fn jacobian_check<M: Model + ?Sized>(model: &M, params: &[f64], xs: &[f64]) -> f64 {
    let m = model.n_params();
    let mut analytic = vec![vec![0.0; m]; xs.len()];
    let mut numeric = vec![vec![0.0; m]; xs.len()];
    for (i, &x) in xs.iter().enumerate() {
        model.gradient(x, params, &mut analytic[i]);
        for j in 0..m {
            let h = difference_step(params[j]);
            let mut up = params.to_vec();
            let mut down = params.to_vec();
            up[j] += h;
            down[j] -= h;
            numeric[i][j] = (model.value(x, &up) - model.value(x, &down)) / (2.0 * h);
        }
    }
    let mut worst: f64 = 0.0;
    for j in 0..m {
        let scale = xs
            .iter()
            .enumerate()
            .map(|(i, _)| analytic[i][j].abs().max(numeric[i][j].abs()))
            .fold(0.0, f64::max);
        if scale == 0.0 {
            continue;
        }
        for i in 0..xs.len() {
            worst = worst.max((analytic[i][j] - numeric[i][j]).abs() / scale);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_fit::dataset::DataPoint;

    #[test]
    fn linear_fit_is_exact() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let data = Dataset::from_xy(&xs, &ys).unwrap();
        let fit =
            levenberg_marquardt(&LinearModel, &data, &[0.0, 0.0], &LmOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.parameters[0] - 2.0).abs() < 1e-10);
        assert!((fit.parameters[1] + 0.5).abs() < 1e-10);
        assert!(fit.residual_norm < 1e-9);
    }

    #[test]
    fn weighted_errors_use_sigmas() {
        // Two points, exact line: errors come from the sigmas alone.
        let data = Dataset::new(vec![
            DataPoint {
                x: 0.0,
                y: 1.0,
                sigma: Some(0.1),
            },
            DataPoint {
                x: 1.0,
                y: 2.0,
                sigma: Some(0.1),
            },
        ])
        .unwrap();
        let fit =
            levenberg_marquardt(&LinearModel, &data, &[0.0, 0.0], &LmOptions::default()).unwrap();
        assert!((fit.std_error("intercept").unwrap() - 0.1).abs() < 1e-9);
        assert!((fit.std_error("slope").unwrap() - 0.1 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn linear_jacobian_is_exact() {
        // Dyadic parameters keep every evaluation exact.
        let xs: Vec<f64> = (-5..=5).map(f64::from).collect();
        assert!(jacobian_check(&LinearModel, &[0.5, -1.75], &xs) < 1e-10);
        assert!(jacobian_check(&LinearModel, &[0.3, -1.7], &xs) < 1e-8);
    }

    #[test]
    fn underdetermined_is_rejected() {
        let data = Dataset::from_xy(&[1.0], &[1.0]).unwrap();
        assert!(matches!(
            levenberg_marquardt(&LinearModel, &data, &[0.0, 0.0], &LmOptions::default()),
            Err(Error::Identifiability(_))
        ));
        assert!(levenberg_marquardt(&LinearModel, &data, &[0.0], &LmOptions::default()).is_err());
    }

    #[test]
    fn report_and_csv() {
        let data = Dataset::from_xy(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.1]).unwrap();
        let fit =
            levenberg_marquardt(&LinearModel, &data, &[0.0, 1.0], &LmOptions::default()).unwrap();
        let mut buf = Vec::new();
        fit.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("parameter,value,std_error,unit\nintercept,"));
        assert!(fit.report().contains("converged"));
    }
}
