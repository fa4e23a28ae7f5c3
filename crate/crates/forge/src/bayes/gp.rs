//! Gaussian-process surrogate over encoded pragma configurations.
//!
//! Squared-exponential kernel with a single length scale picked from a
//! small grid by marginal likelihood. Targets are standardized to zero
//! mean and unit variance before fitting; predictions are mapped back.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Candidate kernel length scales, tried in order during fitting.
pub const LENGTH_SCALE_GRID: [f64; 5] = [0.05, 0.1, 0.2, 0.4, 0.8];

/// Observation-noise variance used by the explorer.
pub const DEFAULT_NOISE: f64 = 1e-6;

/// Posterior model fitted to (encoded point, cost) observations.
///
/// When every target is identical the standard deviation of the targets
/// is zero and no correlation structure is identifiable; the fit then
/// degrades to a constant-mean model that predicts the common cost with
/// zero spread. `degenerate` reports that condition so callers can warn.
pub struct Surrogate {
    points: Vec<Vec<f64>>,
    length_scale: f64,
    y_mean: f64,
    y_std: f64,
    alpha: DVector<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    pub degenerate: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kernel_matrix(points: &[Vec<f64>], length_scale: f64, noise: f64) -> DMatrix<f64> {
    let n = points.len();
    let denom = 2.0 * length_scale * length_scale;
    DMatrix::from_fn(n, n, |i, j| {
        let k = (-sq_dist(&points[i], &points[j]) / denom).exp();
        if i == j {
            k + noise
        } else {
            k
        }
    })
}

/// Fit with the length scale chosen from `LENGTH_SCALE_GRID` by maximum
/// log marginal likelihood. `noise` is the observation-noise variance
/// added to the kernel diagonal.
pub fn surrogate_fit(points: &[Vec<f64>], costs: &[f64], noise: f64) -> Surrogate {
    let mut best = None;
    for &scale in &LENGTH_SCALE_GRID {
        let fit = surrogate_fit_with_scale(points, costs, noise, scale);
        if fit.degenerate {
            return fit;
        }
        let lml = fit.log_marginal_likelihood(costs);
        match &best {
            Some((top, _)) if lml <= *top => {}
            _ => best = Some((lml, fit)),
        }
    }
    best.expect("length-scale grid is non-empty").1
}

/// Fit at a caller-pinned length scale. Falls back to the constant-mean
/// model when the targets carry no spread.
pub fn surrogate_fit_with_scale(
    points: &[Vec<f64>],
    costs: &[f64],
    noise: f64,
    length_scale: f64,
) -> Surrogate {
    assert!(!points.is_empty(), "surrogate needs at least one observation");
    assert_eq!(points.len(), costs.len());
    assert!(costs.iter().all(|c| c.is_finite()), "costs must be finite");
    assert!(noise > 0.0 && length_scale > 0.0);

    let n = costs.len();
    let y_mean = costs.iter().sum::<f64>() / n as f64;
    let var = costs.iter().map(|c| (c - y_mean) * (c - y_mean)).sum::<f64>() / n as f64;
    let y_std = var.sqrt();

    if y_std < 1e-12 * (1.0 + y_mean.abs()) {
        return Surrogate {
            points: points.to_vec(),
            length_scale,
            y_mean,
            y_std: 0.0,
            alpha: DVector::zeros(0),
            chol: None,
            degenerate: true,
        };
    }

    let y = DVector::from_iterator(n, costs.iter().map(|c| (c - y_mean) / y_std));
    let k = kernel_matrix(points, length_scale, noise);
    let chol = k
        .cholesky()
        .expect("kernel matrix with positive noise diagonal is positive definite");
    let alpha = chol.solve(&y);
    Surrogate {
        points: points.to_vec(),
        length_scale,
        y_mean,
        y_std,
        alpha,
        chol: Some(chol),
        degenerate: false,
    }
}

impl Surrogate {
    /// Log marginal likelihood of the standardized targets under this fit.
    fn log_marginal_likelihood(&self, costs: &[f64]) -> f64 {
        let chol = self.chol.as_ref().expect("non-degenerate fit");
        let n = costs.len();
        let y = DVector::from_iterator(n, costs.iter().map(|c| (c - self.y_mean) / self.y_std));
        let data_fit = 0.5 * y.dot(&self.alpha);
        let log_det = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        -data_fit - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    /// Posterior mean and standard deviation of the cost at `point`, in
    /// the original (destandardized) cost units.
    pub fn predict(&self, point: &[f64]) -> (f64, f64) {
        if self.degenerate {
            return (self.y_mean, 0.0);
        }
        let chol = self.chol.as_ref().expect("non-degenerate fit");
        let denom = 2.0 * self.length_scale * self.length_scale;
        let kstar = DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|p| (-sq_dist(p, point) / denom).exp()),
        );
        let mean_std = kstar.dot(&self.alpha);
        let var_std = (1.0 - kstar.dot(&chol.solve(&kstar))).max(0.0);
        (
            self.y_mean + self.y_std * mean_std,
            self.y_std * var_std.sqrt(),
        )
    }
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Complementary error function, rational Chebyshev approximation with
/// relative error below 1.3e-7 across the whole line. Relative (not
/// absolute) accuracy is what keeps deep-tail expected improvement from
/// going negative through cancellation.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398
                                + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277))))))));
    let ans = t * poly.exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Standard normal cumulative distribution.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Expected improvement of `point` over the incumbent `best` cost, for a
/// minimization objective. Zero posterior spread reduces to the plain
/// improvement `max(best - mean, 0)`.
pub fn expected_improvement(surrogate: &Surrogate, point: &[f64], best: f64) -> f64 {
    let (mean, std) = surrogate.predict(point);
    let gap = best - mean;
    if std <= 0.0 {
        return gap.max(0.0);
    }
    let z = gap / std;
    (gap * norm_cdf(z) + std * norm_pdf(z)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TEST_NOISE: f64 = 1e-10;

    fn grid_1d(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn cdf_matches_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-7);
        assert!((norm_cdf(1.96) - 0.975_002_1).abs() < 1e-6);
        assert!((norm_cdf(-1.96) - 0.024_997_9).abs() < 1e-6);
        assert!((norm_pdf(0.0) - 0.398_942_28).abs() < 1e-8);
    }

    #[test]
    fn interpolates_training_data_at_low_noise() {
        let points = grid_1d(&[0.0, 0.25, 0.5, 0.75, 1.0]);
        let costs: Vec<f64> = points.iter().map(|p| (p[0] - 0.5) * (p[0] - 0.5)).collect();
        let s = surrogate_fit(&points, &costs, TEST_NOISE);
        for (p, c) in points.iter().zip(&costs) {
            let (mean, std) = s.predict(p);
            assert!((mean - c).abs() < 1e-6, "mean {mean} vs {c}");
            assert!(std < 1e-4, "posterior spread {std} at a training point");
        }
    }

    #[test]
    fn reverts_to_prior_far_from_data() {
        let points = grid_1d(&[0.1, 0.2, 0.3]);
        let costs = [1.0, 2.0, 4.0];
        let s = surrogate_fit(&points, &costs, TEST_NOISE);
        let (mean, std) = s.predict(&[40.0]);
        let y_mean = costs.iter().sum::<f64>() / 3.0;
        let y_var = costs.iter().map(|c| (c - y_mean) * (c - y_mean)).sum::<f64>() / 3.0;
        assert_relative_eq!(mean, y_mean, epsilon = 1e-9);
        assert_relative_eq!(std, y_var.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn symmetric_data_yields_symmetric_predictions() {
        let points = grid_1d(&[0.1, 0.3, 0.7, 0.9]);
        let costs = [4.0, 1.0, 1.0, 4.0];
        let s = surrogate_fit(&points, &costs, TEST_NOISE);
        for d in [0.05, 0.15, 0.3] {
            let (ml, sl) = s.predict(&[0.5 - d]);
            let (mr, sr) = s.predict(&[0.5 + d]);
            assert!((ml - mr).abs() < 1e-9, "means {ml} vs {mr}");
            assert!((sl - sr).abs() < 1e-9, "stds {sl} vs {sr}");
        }
    }

    #[test]
    fn identical_costs_degrade_to_constant_mean() {
        let points = grid_1d(&[0.0, 1.0]);
        let s = surrogate_fit(&points, &[3.25, 3.25], TEST_NOISE);
        assert!(s.degenerate);
        for x in [0.0, 0.4, 2.0] {
            let (mean, std) = s.predict(&[x]);
            assert_eq!(mean, 3.25);
            assert_eq!(std, 0.0);
        }
    }

    #[test]
    fn single_observation_predicts_itself() {
        let s = surrogate_fit(&grid_1d(&[0.5]), &[2.0], TEST_NOISE);
        assert!(s.degenerate);
        assert_eq!(s.predict(&[0.5]), (2.0, 0.0));
    }

    #[test]
    fn extra_observations_tighten_the_posterior() {
        let f = |x: f64| (3.0 * x).sin();
        let few = grid_1d(&[0.0, 0.5, 1.0]);
        let more = grid_1d(&[0.0, 0.25, 0.5, 0.75, 1.0]);
        let few_costs: Vec<f64> = few.iter().map(|p| f(p[0])).collect();
        let more_costs: Vec<f64> = more.iter().map(|p| f(p[0])).collect();
        let a = surrogate_fit_with_scale(&few, &few_costs, TEST_NOISE, 0.2);
        let b = surrogate_fit_with_scale(&more, &more_costs, TEST_NOISE, 0.2);
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            let (_, sa) = a.predict(&[x]);
            let (_, sb) = b.predict(&[x]);
            assert!(
                sb <= sa + 1e-9,
                "posterior spread grew at {x}: {sa} -> {sb}"
            );
        }
    }

    #[test]
    fn improvement_at_the_incumbent_with_unit_spread() {
        // Force mean == best and std == 1 through a synthetic surrogate:
        // a single standardized observation pinned by hand is awkward, so
        // check the closed form directly at z = 0.
        let ei = 0.0 * norm_cdf(0.0) + 1.0 * norm_pdf(0.0);
        assert!((ei - 0.398_94).abs() < 1e-4);
    }

    #[test]
    fn improvement_examples_through_the_surrogate() {
        let points = grid_1d(&[0.0, 0.4, 0.8]);
        let costs = [5.0, 3.0, 4.0];
        // Posterior variance at a training point is bounded by the noise
        // variance exactly, so the spread there is at most sqrt(noise)
        // and the improvement collapses with it.
        let s = surrogate_fit(&points, &costs, 1e-12);
        let ei_at_best = expected_improvement(&s, &[0.4], 3.0);
        assert!(ei_at_best < 1e-6, "EI at the incumbent: {ei_at_best}");
        // A point whose mean sits far above the incumbent has vanishing
        // but still nonnegative improvement.
        let ei_bad = expected_improvement(&s, &[0.0], 5.0 - 10.0);
        assert!(ei_bad >= 0.0 && ei_bad < 1e-20, "tail EI: {ei_bad}");
    }

    #[test]
    fn improvement_is_nonnegative_on_a_dense_grid() {
        let points = grid_1d(&[0.0, 0.2, 0.45, 0.7, 1.0]);
        let costs = [2.0, 1.1, 3.6, 0.4, 2.9];
        let s = surrogate_fit(&points, &costs, DEFAULT_NOISE);
        for i in 0..10_000 {
            let x = i as f64 / 9_999.0 * 3.0 - 1.0;
            let ei = expected_improvement(&s, &[x], 0.4);
            assert!(ei >= 0.0, "negative EI {ei} at {x}");
        }
    }

    #[test]
    fn zero_spread_reduces_to_plain_improvement() {
        let s = surrogate_fit(&grid_1d(&[0.0, 1.0]), &[2.5, 2.5], TEST_NOISE);
        assert_eq!(expected_improvement(&s, &[0.2], 4.0), 1.5);
        assert_eq!(expected_improvement(&s, &[0.2], 2.5), 0.0);
        assert_eq!(expected_improvement(&s, &[0.2], 1.0), 0.0);
    }
}
