use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{Example, Seq2SeqModel};
use crate::error::{Error, Result};

/// Outcome of comparing analytic and finite-difference gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_parameter: String,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub coordinates: usize,
}

/// Relative error with the denominator floored at `floor`, so that
/// coordinates with vanishing gradients are judged on absolute error.
fn relative_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Gradient floor used by [`gradient_check`].
pub const GRADIENT_FLOOR: f64 = 1e-6;

/// Compares the analytic gradient of the token-averaged loss (dropout off)
/// against central differences on `samples` coordinates drawn with `seed`.
pub fn gradient_check(
    model: &Seq2SeqModel<f64>,
    batch: &[Example],
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    if batch.is_empty() {
        return Err(Error::Empty("gradient check batch"));
    }
    let smoothing = model.config().label_smoothing;
    let (_, analytic) = model.loss_and_gradient(batch, smoothing, None)?;
    if analytic.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("analytic gradient".into()));
    }
    let n = model.num_params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = sample(&mut rng, n, samples.min(n)).into_vec();
    coords.sort_unstable();

    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_parameter: String::new(),
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        coordinates: coords.len(),
    };
    for &i in &coords {
        let orig = probe.params.data[i];
        probe.params.data[i] = orig + epsilon;
        let plus = probe.batch_loss(batch, smoothing)?;
        probe.params.data[i] = orig - epsilon;
        let minus = probe.batch_loss(batch, smoothing)?;
        probe.params.data[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("loss at coordinate {i}")));
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        let err = relative_error(analytic[i], numeric, GRADIENT_FLOOR);
        if err >= report.max_relative_error {
            report.max_relative_error = err;
            report.worst_parameter = model
                .params
                .owner(i)
                .map(|s| s.name.clone())
                .unwrap_or_default();
            report.worst_analytic = analytic[i];
            report.worst_numeric = numeric;
        }
    }
    Ok(report)
}
