//! Grid linear programs over log-spaced likelihood ratios.

use crate::concavify::{check_grid, check_mean, ConcavifyResult, Diagnostics, Method};
use crate::error::{invalid, Result};
use crate::lp::MaxLp;
use crate::model::{Atom, Experiment, MFunction};

/// Log-spaced grid on the domain of `m`, with `mean` inserted.
pub fn log_grid(lo: f64, hi: f64, n: usize, mean: f64) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect();
    g[0] = lo;
    g[n - 1] = hi;
    let i = g.partition_point(|&z| z < mean);
    if g.get(i) != Some(&mean) {
        g.insert(i, mean);
    }
    g
}

/// Relative grid spacing of [`log_grid`].
pub fn log_step(lo: f64, hi: f64, n: usize) -> f64 {
    (hi / lo).ln() / (n - 1) as f64
}

/// `max Σ w M(z)` over the grid with `Σ w = 1`, `Σ w z = mean`.
pub fn concavify_lp_oracle(m: &MFunction<f64>, mean: f64, grid_points: usize) -> Result<ConcavifyResult<f64>> {
    grid_lp(m, mean, None, grid_points)
}

/// As [`concavify_lp_oracle`] with the budget `Σ w ψ(z) <= cap`.
pub fn concavify_capped(m: &MFunction<f64>, mean: f64, cap: f64, grid_points: usize) -> Result<ConcavifyResult<f64>> {
    if !(cap >= 0.0) {
        return invalid(format!("cost cap must be nonnegative, got {cap}"));
    }
    grid_lp(m, mean, Some(cap), grid_points)
}

fn grid_lp(m: &MFunction<f64>, mean: f64, cap: Option<f64>, grid_points: usize) -> Result<ConcavifyResult<f64>> {
    check_grid(grid_points)?;
    check_mean(m, mean)?;
    let (lo, hi) = m.envelope.domain();
    let grid = log_grid(lo, hi, grid_points, mean);
    let psi: Vec<f64> = grid.iter().map(|&z| m.cost.psi(z)).collect();

    let mut lp = MaxLp::new();
    let mass = lp.eq_row(1.0);
    let first = lp.eq_row(mean);
    let budget = cap.filter(|c| c.is_finite()).map(|c| lp.le_row(c));
    for (i, &z) in grid.iter().enumerate() {
        let mut entries = vec![(mass, 1.0), (first, z)];
        if let Some(r) = budget {
            entries.push((r, psi[i]));
        }
        lp.column(m.eval_unchecked(z), &entries);
    }
    let sol = lp.solve()?;

    let support: Vec<usize> = (0..grid.len()).filter(|&i| sol.columns[i] > 1e-9).collect();
    let atoms = polish(&grid, &psi, &support, &sol.columns, mean, cap);
    let experiment = Experiment::with_mean(atoms, mean)?;
    let value = experiment.expect(|z| m.eval_unchecked(z));
    let m_mean = m.eval_unchecked(mean);
    let zs: Vec<f64> = experiment.atoms().iter().map(|a| a.z).collect();
    Ok(ConcavifyResult {
        support_size: zs.len(),
        pieces: zs.iter().map(|&z| m.envelope.piece_index(z)).collect(),
        value,
        slope: sol.row_duals[first],
        intercept: sol.row_duals[mass],
        diagnostics: Diagnostics {
            method: Method::GridLp,
            tie: zs.len() > 2,
            dropped_borderline: 0,
            truncated_upper: zs.iter().any(|&z| z >= hi),
            truncated_lower: zs.iter().any(|&z| z <= lo),
            gain: value - m_mean,
            dual_gap: sol.objective - value,
        },
        experiment,
    })
}

/// Re-solves the binding rows exactly on the LP support so the mean holds to rounding.
fn polish(grid: &[f64], psi: &[f64], support: &[usize], w: &[f64], mean: f64, cap: Option<f64>) -> Vec<Atom<f64>> {
    let raw = || -> Vec<Atom<f64>> {
        let total: f64 = support.iter().map(|&i| w[i]).sum();
        support.iter().map(|&i| Atom::new(grid[i], w[i] / total)).collect()
    };
    match support {
        [i] => vec![Atom::new(grid[*i], 1.0)],
        [i, j] => {
            let (a, b) = (grid[*i], grid[*j]);
            let wa = (b - mean) / (b - a);
            vec![Atom::new(a, wa), Atom::new(b, 1.0 - wa)]
        }
        [i, j, k] if cap.is_some() => {
            let m = nalgebra::Matrix3::new(1.0, 1.0, 1.0, grid[*i], grid[*j], grid[*k], psi[*i], psi[*j], psi[*k]);
            let rhs = nalgebra::Vector3::new(1.0, mean, cap.unwrap());
            match m.lu().solve(&rhs) {
                Some(x) if x.iter().all(|&v| v >= 0.0) => {
                    vec![
                        Atom::new(grid[*i], x[0]),
                        Atom::new(grid[*j], x[1]),
                        Atom::new(grid[*k], x[2]),
                    ]
                }
                _ => raw(),
            }
        }
        _ => raw(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concavify::concavify_at_mean;
    use crate::model::{upper_envelope, AffinePiece, CostSpec};

    fn unit_kink() -> MFunction<f64> {
        let env = upper_envelope(&[AffinePiece::new(1.0, -1.0), AffinePiece::new(0.0, 0.0)], 1e-4, 1e3).unwrap();
        MFunction::new(env, CostSpec::entropy(0.5).unwrap()).unwrap()
    }

    #[test]
    fn oracle_matches_closed_form() {
        let m = unit_kink();
        let r = concavify_lp_oracle(&m, 1.0, 10_000).unwrap();
        let exact = concavify_at_mean(&m, 1.0, 100).unwrap();
        assert!((r.value - exact.value).abs() < 1e-5 * exact.value.abs());
        assert_eq!(r.support_size, 2);
    }

    #[test]
    fn concave_m_gives_point_mass() {
        let env = upper_envelope(&[AffinePiece::new(0.0, 0.3)], 1e-4, 1e3).unwrap();
        let m = MFunction::new(env, CostSpec::entropy(0.5).unwrap()).unwrap();
        let r = concavify_lp_oracle(&m, 1.0, 1000).unwrap();
        assert_eq!(r.support_size, 1);
        assert_eq!(r.experiment.atoms()[0].z, 1.0);
    }

    #[test]
    fn cap_limits() {
        let m = unit_kink();
        let free = concavify_at_mean(&m, 1.0, 100).unwrap();
        let zero = concavify_capped(&m, 1.0, 0.0, 4000).unwrap();
        assert_eq!(zero.support_size, 1);
        let open = concavify_capped(&m, 1.0, f64::INFINITY, 20_001).unwrap();
        assert!((open.value - free.value).abs() < 5e-5 * free.value.abs());

        let k = free.experiment.cost(&m.cost).unwrap();
        let half = concavify_capped(&m, 1.0, 0.5 * k, 20_001).unwrap();
        let spread = |e: &Experiment<f64>| e.atoms().iter().map(|a| (a.z - 1.0).abs()).fold(0.0, f64::max);
        assert!(spread(&half.experiment) < spread(&free.experiment));
        assert!(half.experiment.cost(&m.cost).unwrap() <= 0.5 * k + 1e-9);
        assert!(half.support_size <= 3);
        assert!(concavify_capped(&m, 1.0, -1.0, 100).is_err());
    }
}
