//! Primal recovery by column generation over `(report, z, action)` triples.
//!
//! The master LP chooses weights on likelihood ratios and corner actions per
//! report subject to the mean, IC and IR rows. Pricing a report at the master
//! duals is a concavification step: the best new column for action `a` maximises
//! `α_a + β_a z - c ψ(z) - s_j z`. At convergence the master duals are the
//! multipliers and the master primal is the mechanism.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lp::MaxLp;
use crate::model::experiment::ATOM_MERGE_TOL;
use crate::model::{Atom, Experiment};
use crate::screening::dual::{
    corner_actions, dual_value, report_coefficients, MechanismSolution, MultiplierVector, Region, ReportSolution,
    TransferMargin,
};
use crate::screening::instance::ScreeningInstance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    /// Add the IR constraint of the top type.
    pub top_ir: bool,
    pub margin: TransferMargin,
    pub max_rounds: usize,
    /// Stop when every reduced cost is below `tol (1 + |c_j + s_j|)`.
    pub tol: f64,
    /// Penalty on the elastic slack of each inequality row; bounds the duals.
    pub lambda_bar: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            top_ir: false,
            margin: TransferMargin::Free,
            max_rounds: 400,
            tol: 1e-10,
            lambda_bar: 1e3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimalRecovery {
    pub solution: MechanismSolution,
    /// Master LP objective without elastic penalties.
    pub lp_value: f64,
    /// `D(Λ)` at the recovered multipliers.
    pub dual_bound: f64,
    pub rounds: usize,
    pub converged: bool,
    pub max_reduced_cost: f64,
    /// Some elastic slack is active: a constraint is violated at the penalty.
    pub elastic_used: bool,
    pub columns: usize,
    /// LP failure that ended the column generation early.
    pub lp_error: Option<String>,
}

#[derive(Clone, Copy, Debug)]
struct Column {
    report: usize,
    z: f64,
    action: usize,
}

struct Rows {
    mass: Vec<usize>,
    mean: Vec<usize>,
    ic: Vec<usize>,
    ir: usize,
    top: Option<usize>,
}

fn column_entries(instance: &ScreeningInstance, rows: &Rows, col: &Column) -> (f64, Vec<(usize, f64)>) {
    let t = &instance.thetas;
    let n = t.len();
    let j = col.report;
    let (x, p) = corner_actions(instance.pbar)[col.action];
    let cost = instance.masses[j] * p - instance.report_cost(j).psi(col.z);
    let mut e = vec![(rows.mass[j], 1.0), (rows.mean[j], col.z)];
    if j > 0 {
        e.push((rows.ic[j - 1], t[j] * x - p));
    }
    if j + 1 < n {
        e.push((rows.ic[j], -(t[j + 1] * x - p) * col.z));
    }
    if j == 0 {
        e.push((rows.ir, t[0] * x - p));
    }
    if j + 1 == n {
        if let Some(r) = rows.top {
            e.push((r, t[j] * x - p));
        }
    }
    (cost, e)
}

struct Master {
    objective: f64,
    weights: Vec<f64>,
    elastic: f64,
    c: Vec<f64>,
    s: Vec<f64>,
    lam: MultiplierVector,
}

fn solve_master(instance: &ScreeningInstance, cols: &[Column], opts: &RecoveryOptions) -> Result<Master> {
    let n = instance.len();
    let mut lp = MaxLp::new();
    let mass: Vec<usize> = (0..n).map(|_| lp.eq_row(1.0)).collect();
    let mean: Vec<usize> = (0..n).map(|_| lp.eq_row(1.0)).collect();
    let ic: Vec<usize> = (0..n - 1).map(|_| lp.ge_row(0.0)).collect();
    let ir = lp.ge_row(0.0);
    let top = opts.top_ir.then(|| lp.ge_row(0.0));
    let rows = Rows {
        mass,
        mean,
        ic,
        ir,
        top,
    };
    for col in cols {
        let (cost, e) = column_entries(instance, &rows, col);
        lp.column(cost, &e);
    }
    let slack_rows: Vec<usize> = rows.ic.iter().copied().chain([rows.ir]).chain(rows.top).collect();
    for &r in &slack_rows {
        lp.column(-opts.lambda_bar, &[(r, 1.0)]);
    }
    let sol = lp.solve()?;
    let elastic: f64 = sol.columns[cols.len()..].iter().sum();
    let y = &sol.row_duals;
    // Shadow prices of `≥` rows in a maximisation are nonpositive.
    let mult = |r: usize| (-y[r]).max(0.0);
    let lam = MultiplierVector {
        lambdas: rows.ic.iter().map(|&r| mult(r)).collect(),
        mu: mult(rows.ir),
        mu_top: rows.top.map_or(0.0, mult),
    };
    Ok(Master {
        objective: sol.objective + opts.lambda_bar * elastic,
        weights: sol.columns[..cols.len()].to_vec(),
        elastic,
        c: rows.mass.iter().map(|&r| y[r]).collect(),
        s: rows.mean.iter().map(|&r| y[r]).collect(),
        lam,
    })
}

fn allowed_actions(margin: TransferMargin) -> &'static [usize] {
    match margin {
        TransferMargin::Free => &[0, 1, 2, 3],
        TransferMargin::Fixed => &[0, 2],
    }
}

/// Best new column per (report, action) and its reduced cost.
fn price(instance: &ScreeningInstance, m: &Master, margin: TransferMargin) -> Vec<(f64, Column)> {
    let (lo, hi) = instance.domain;
    let corners = corner_actions(instance.pbar);
    let mut out = Vec::new();
    for j in 0..instance.len() {
        let coef = report_coefficients(instance, j, &m.lam);
        let cost = instance.report_cost(j);
        for &a in allowed_actions(margin) {
            let piece = coef.piece(corners[a].0, corners[a].1);
            let slope = piece.slope - m.s[j];
            let z = cost.best_response(slope, lo, hi);
            let rc = piece.intercept + slope * z - cost.psi(z) - m.c[j];
            out.push((
                rc / (1.0 + (m.c[j] + m.s[j]).abs()),
                Column {
                    report: j,
                    z,
                    action: a,
                },
            ));
        }
    }
    out
}

/// Groups the master solution into one experiment per report.
fn extract(instance: &ScreeningInstance, cols: &[Column], weights: &[f64], m: &Master) -> Result<Vec<ReportSolution>> {
    let corners = corner_actions(instance.pbar);
    let mut reports = Vec::with_capacity(instance.len());
    for j in 0..instance.len() {
        // One atom per action: pooling same-action columns at their mean keeps
        // every row and lowers the convex cost, so it is exact up to the CG tolerance.
        let mut by_action: Vec<[f64; 4]> = Vec::new();
        let mut action_of: Vec<usize> = Vec::new();
        for (c, &w) in cols.iter().zip(weights) {
            if c.report != j || w <= 1e-12 {
                continue;
            }
            let (x, p) = corners[c.action];
            match action_of.iter().position(|&a| a == c.action) {
                Some(k) => {
                    let b = &mut by_action[k];
                    b[0] += w * c.z;
                    b[1] += w;
                }
                None => {
                    action_of.push(c.action);
                    by_action.push([w * c.z, w, x, p]);
                }
            }
        }
        let mut pts: Vec<(f64, f64, f64, f64)> = by_action.iter().map(|b| (b[0] / b[1], b[1], b[2], b[3])).collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        // (Σ w z, Σ w, Σ w x, Σ w p) per cluster of nearby z.
        let mut clusters: Vec<[f64; 4]> = Vec::new();
        for (z, w, x, p) in pts {
            match clusters.last_mut() {
                Some(c) if (z - c[0] / c[1]).abs() <= ATOM_MERGE_TOL => {
                    c[0] += w * z;
                    c[1] += w;
                    c[2] += w * x;
                    c[3] += w * p;
                }
                _ => clusters.push([w * z, w, w * x, w * p]),
            }
        }
        let total: f64 = clusters.iter().map(|c| c[1]).sum();
        let atoms = clusters.iter().map(|c| Atom::new(c[0] / c[1], c[1] / total)).collect();
        let experiment = Experiment::new(atoms)?;
        let actions = experiment
            .atoms()
            .iter()
            .map(|a| {
                let c = clusters
                    .iter()
                    .min_by(|u, v| {
                        (u[0] / u[1] - a.z)
                            .abs()
                            .partial_cmp(&(v[0] / v[1] - a.z).abs())
                            .unwrap()
                    })
                    .unwrap();
                (c[2] / c[1], c[3] / c[1])
            })
            .collect();
        let coef = report_coefficients(instance, j, &m.lam);
        let (lo, hi) = instance.domain;
        let inside = |k: Option<f64>| k.filter(|&k| k >= lo && k <= hi);
        reports.push(ReportSolution {
            region: Region::from_support(experiment.support_size()),
            dimension: crate::screening::dual::dual_pieces(instance, j, &m.lam, TransferMargin::Free)?.dimension(),
            experiment,
            actions,
            kappa_x: inside(coef.kappa_x()),
            kappa_p: inside(coef.kappa_p()),
            value: Some(m.c[j] + m.s[j]),
        });
    }
    Ok(reports)
}

/// Solves the screening LP by column generation, seeded with the touch points of
/// the inner solution at `seed` (when given) and with `z = 1` columns.
pub fn recover_primal(
    instance: &ScreeningInstance,
    seed: Option<&MultiplierVector>,
    opts: &RecoveryOptions,
) -> Result<PrimalRecovery> {
    instance.validate()?;
    let mut cols: Vec<Column> = Vec::new();
    for j in 0..instance.len() {
        for &a in allowed_actions(opts.margin) {
            cols.push(Column {
                report: j,
                z: 1.0,
                action: a,
            });
        }
    }
    if let Some(lam) = seed {
        let inner = crate::screening::dual::solve_inner_with(instance, lam, opts.margin)?;
        for (j, r) in inner.reports.iter().enumerate() {
            for atom in r.experiment.atoms() {
                for &a in allowed_actions(opts.margin) {
                    cols.push(Column {
                        report: j,
                        z: atom.z,
                        action: a,
                    });
                }
            }
        }
    }

    let mut rounds = 0;
    let mut converged = false;
    let mut max_rc = f64::INFINITY;
    let mut lp_error = None;
    let mut master = solve_master(instance, &cols, opts)?;
    while rounds < opts.max_rounds {
        rounds += 1;
        let priced = price(instance, &master, opts.margin);
        max_rc = priced.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        if max_rc <= opts.tol {
            converged = true;
            break;
        }
        let before = cols.len();
        for (rc, col) in priced {
            let known = cols
                .iter()
                .any(|c| c.report == col.report && c.action == col.action && (c.z - col.z).abs() <= 1e-13 * col.z);
            if rc > opts.tol && !known {
                cols.push(col);
            }
        }
        if cols.len() == before {
            break;
        }
        // Nearly parallel columns can stall the LP; keep the last good master.
        match solve_master(instance, &cols, opts) {
            Ok(next) => master = next,
            Err(e) => {
                lp_error = Some(e.to_string());
                cols.truncate(before);
                break;
            }
        }
    }

    let reports = extract(instance, &cols, &master.weights, &master)?;
    let dual_bound = dual_value(instance, &master.lam)?;
    let solution = MechanismSolution::assemble(instance, master.lam.clone(), reports, Some(dual_bound))?;
    Ok(PrimalRecovery {
        lp_value: master.objective,
        dual_bound,
        rounds,
        converged,
        max_reduced_cost: max_rc,
        elastic_used: master.elastic > 1e-9,
        columns: cols.len(),
        lp_error,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CostSpec;
    use crate::screening::dual::myerson_multipliers;
    use crate::screening::feasibility::check_primal;
    use crate::screening::myerson::myerson_benchmark;

    #[test]
    fn grid_instance_closes_the_duality_gap() {
        let inst = ScreeningInstance::uniform_grid(0.1, 0.9, 17, 1.0, CostSpec::entropy(5.0).unwrap()).unwrap();
        let lam = myerson_multipliers(&inst);
        let rec = recover_primal(&inst, Some(&lam), &RecoveryOptions::default()).unwrap();
        assert!(rec.converged);
        assert!(!rec.elastic_used);
        let bench = myerson_benchmark(&inst);
        // Kinked pointwise duals make some information worth buying at any cost level.
        assert!(rec.lp_value > bench.revenue);
        assert!(
            (rec.dual_bound - rec.lp_value).abs() < 1e-7,
            "{} {} {} {:?}",
            rec.dual_bound,
            rec.lp_value,
            rec.rounds,
            rec.solution.multipliers
        );
        assert!(check_primal(&inst, &rec.solution).feasible);
    }

    #[test]
    fn strong_duality_two_types() {
        let inst = ScreeningInstance::two_type(0.4, 1.0, 0.5, 1.5, CostSpec::entropy(0.1).unwrap()).unwrap();
        let rec = recover_primal(&inst, None, &RecoveryOptions::default()).unwrap();
        assert!(rec.converged);
        let rep = check_primal(&inst, &rec.solution);
        assert!(rep.feasible, "{rep:?}");
        assert!((rec.dual_bound - rec.lp_value).abs() < 1e-7 * (1.0 + rec.lp_value.abs()));
        assert!((rep.primal_revenue - rec.lp_value).abs() < 1e-7);
        // Cheap information beats the posted price.
        assert!(rec.lp_value > myerson_benchmark(&inst).revenue + 1e-4);
    }
}
