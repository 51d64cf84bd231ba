use serde::{Deserialize, Serialize};

use crate::screening::instance::{discrete_virtual_surplus, ScreeningInstance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MyersonBenchmark {
    /// `1[Φ(θ_j) ≥ 0]`
    pub q_step: Vec<f64>,
    /// `Σ π_j Φ(θ_j)⁺`
    pub revenue: f64,
    /// Zero of the interpolated virtual surplus.
    pub theta0: f64,
    /// Φ did not change sign on the grid; `theta0` is an endpoint.
    pub at_boundary: bool,
}

/// Virtual surplus at every grid type: the tagged distribution when present,
/// the discrete tail-mass formula otherwise.
pub fn virtual_surplus_schedule(instance: &ScreeningInstance) -> Vec<f64> {
    (0..instance.len())
        .map(|j| match instance.distribution {
            Some(d) => d.virtual_surplus(instance.thetas[j]),
            None => discrete_virtual_surplus(instance, j),
        })
        .collect()
}

pub fn myerson_benchmark(instance: &ScreeningInstance) -> MyersonBenchmark {
    let phi = virtual_surplus_schedule(instance);
    let t = &instance.thetas;
    let revenue = phi.iter().zip(&instance.masses).map(|(f, m)| m * f.max(0.0)).sum();
    let q_step = phi.iter().map(|&f| if f >= 0.0 { 1.0 } else { 0.0 }).collect();
    let n = t.len();
    let (theta0, at_boundary) = if phi[0] >= 0.0 {
        (t[0], true)
    } else if phi[n - 1] < 0.0 {
        (t[n - 1], true)
    } else {
        let interp = |x: f64| {
            let i = t.partition_point(|&v| v <= x).clamp(1, n - 1);
            let s = (x - t[i - 1]) / (t[i] - t[i - 1]);
            phi[i - 1] + s * (phi[i] - phi[i - 1])
        };
        let (mut lo, mut hi) = (t[0], t[n - 1]);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if interp(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi), false)
    };
    MyersonBenchmark {
        q_step,
        revenue,
        theta0,
        at_boundary,
    }
}
