use epd_screen::analysis::{
    convergence_study, eta_grid, logistic_gap, normalized_k, outer_study, region_width, welfare_grid, TwoTypeParams,
};
use epd_screen::concavify::concavify_at_mean;
use epd_screen::epd::{build_family, default_domain, verify_support_bound, SweepOptions};
use epd_screen::saddle::{outer_optimize, saddle_check};
use epd_screen::screening::dual::{myerson_multipliers, solve_inner};
use epd_screen::screening::feasibility::check_primal;
use epd_screen::Error;

use crate::config::{Command, ConfigError, Multipliers, RunConfig};
use crate::output::{Cell, Table};

pub enum RunError {
    Validation(String),
    Numerical(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoConvergence(_) | Error::Lp(_) | Error::Overflow(_) => RunError::Numerical(e.to_string()),
            _ => RunError::Validation(e.to_string()),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Validation(e.0)
    }
}

/// A finished run; `failure` marks a numerical failure that still produced output.
pub struct Outcome {
    pub table: Table,
    pub failure: Option<String>,
}

impl From<Table> for Outcome {
    fn from(table: Table) -> Self {
        Outcome { table, failure: None }
    }
}

type Run = Result<Outcome, RunError>;

pub fn run(cfg: &RunConfig) -> Run {
    match cfg.command {
        Command::Concavify => concavify(cfg),
        Command::SolveN => solve_n(cfg),
        Command::Outer => outer(cfg),
        Command::SweepTwotype => sweep_twotype(cfg),
        Command::RegionWidth => region(cfg),
        Command::VerifyEpd => verify_epd(cfg),
        Command::Converge => converge(cfg),
        Command::Universal => universal(cfg),
        Command::Check => check(cfg),
    }
}

fn grid(cfg: &RunConfig) -> usize {
    cfg.grid.expect("resolved config has a grid")
}

fn concavify(cfg: &RunConfig) -> Run {
    let family = build_family(&cfg.family_params())?;
    let domain = default_domain();
    let m = family.mfunction(&cfg.cost()?, domain)?;
    let r = concavify_at_mean(&m, 1.0, grid(cfg))?;
    let mut t = Table::new(&["z", "weight", "action"]);
    for (a, &p) in r.experiment.atoms().iter().zip(&r.pieces) {
        let label = m.envelope.labels()[p];
        t.push(vec![a.z.into(), a.weight.into(), family.label(label).into()]);
    }
    let kinks: Vec<String> = m
        .envelope
        .kinks()
        .iter()
        .map(|k| crate::output::format_real(*k))
        .collect();
    t.note("family", family.tag.name());
    t.note("d", m.envelope.dimension());
    t.note("kinks", kinks.join(" "));
    t.note("value", r.value);
    t.note("support", r.support_size);
    t.note("tie", r.diagnostics.tie);
    Ok(t.into())
}

fn schedule_table(
    inst: &epd_screen::screening::ScreeningInstance,
    sol: &epd_screen::screening::dual::MechanismSolution,
) -> Table {
    let mut t = Table::new(&["theta", "q", "support", "K", "U", "kappa_x", "kappa_p"]);
    for (j, r) in sol.reports.iter().enumerate() {
        t.push(vec![
            inst.thetas[j].into(),
            sol.q[j].into(),
            r.support().into(),
            sol.costs[j].into(),
            sol.rents[j].into(),
            r.kappa_x.into(),
            r.kappa_p.into(),
        ]);
    }
    t.note("max_support", sol.max_support());
    t
}

fn solve_n(cfg: &RunConfig) -> Run {
    let inst = cfg.instance()?;
    match cfg.multipliers {
        Multipliers::Myerson => {
            let sol = solve_inner(&inst, &myerson_multipliers(&inst))?;
            let mut t = schedule_table(&inst, &sol);
            t.note("dual_value", sol.dual_value);
            Ok(t.into())
        }
        Multipliers::Optimize => {
            let r = outer_optimize(&inst, None, &cfg.saddle)?;
            let mut t = schedule_table(&inst, &r.solution);
            t.note("dual_value", r.dual_value);
            t.note("myerson_dual_value", r.myerson_dual_value);
            t.note("duality_gap", r.duality_gap);
            t.note("converged", r.converged);
            t.note("polished", r.polished);
            t.note("warning", r.warning.clone());
            let failure = (!r.converged && !r.polished).then(|| r.warning.unwrap_or_default());
            Ok(Outcome { table: t, failure })
        }
    }
}

fn outer(cfg: &RunConfig) -> Run {
    let inst = cfg.instance()?;
    let o = outer_study(&inst, &cfg.saddle)?;
    let mut t = Table::new(&["theta", "q", "support", "K", "kappa_p", "q_myerson", "K_myerson"]);
    for j in 0..o.n {
        t.push(vec![
            o.optimized.thetas[j].into(),
            o.optimized.q[j].into(),
            o.optimized.support[j].into(),
            o.optimized.costs[j].into(),
            o.kappa_p[j].into(),
            o.myerson.q[j].into(),
            o.myerson.costs[j].into(),
        ]);
    }
    t.note("dual_value", o.dual_value);
    t.note("myerson_dual_value", o.myerson_dual_value);
    t.note("kappa_p_departure", o.kappa_p_departure);
    t.note("theta0", o.theta0);
    t.note("argmax_cost", o.argmax_cost);
    t.note("myerson_argmax_cost", o.myerson_argmax_cost);
    t.note("shifted_toward_theta0", o.shifted_toward_theta0());
    t.note("max_support", o.max_support);
    t.note("converged", o.converged);
    t.note("warning", o.warning.clone());
    Ok(t.into())
}

fn sweep_twotype(cfg: &RunConfig) -> Run {
    let mut t = Table::new(&[
        "gamma", "pi_h_v_h", "v_l", "support", "q_star", "benefit", "dW_norm", "cost", "feasible",
    ]);
    let (mut min_benefit, mut worst_below, mut worst_above) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut infeasible = 0usize;
    for &g in &cfg.gammas {
        for c in welfare_grid(cfg.v_h, g, grid(cfg), &cfg.saddle)? {
            let x = c.params.pi_h * c.params.v_h;
            min_benefit = min_benefit.min(c.seller_benefit);
            if c.params.v_l < x {
                worst_below = worst_below.min(c.welfare_delta);
            } else if c.params.v_l > x {
                worst_above = worst_above.max(c.welfare_delta);
            }
            infeasible += usize::from(!c.feasible);
            t.push(vec![
                g.into(),
                x.into(),
                c.params.v_l.into(),
                c.support.into(),
                c.q_star.into(),
                c.seller_benefit.into(),
                c.welfare_delta.into(),
                c.cost.into(),
                c.feasible.into(),
            ]);
        }
    }
    t.note("min_benefit", min_benefit);
    t.note("min_dW_below", worst_below);
    t.note("max_dW_above", worst_above);
    t.note("infeasible_cells", infeasible);
    let failure = (infeasible > 0).then(|| format!("{infeasible} cells failed the primal check"));
    Ok(Outcome { table: t, failure })
}

fn region(cfg: &RunConfig) -> Run {
    let s = region_width(cfg.pi_h, cfg.v_h, &cfg.gammas, cfg.alpha, cfg.resolution)?;
    let mut t = Table::new(&[
        "gamma",
        "width",
        "below_width",
        "above_width",
        "lo",
        "hi",
        "runs",
        "max_support",
        "q_interior",
    ]);
    for w in &s.widths {
        t.push(vec![
            w.gamma.into(),
            w.width.into(),
            w.below_width.into(),
            w.above_width.into(),
            w.lo.into(),
            w.hi.into(),
            w.runs.into(),
            w.max_support.into(),
            w.q_interior.into(),
        ]);
    }
    t.note("slope", s.slope);
    t.note("below_slope", s.below_slope);
    t.note("contiguous", s.contiguous());
    Ok(t.into())
}

fn verify_epd(cfg: &RunConfig) -> Run {
    let opts = SweepOptions {
        grid_points: grid(cfg),
        ..SweepOptions::default()
    };
    let s = verify_support_bound(&cfg.family_params(), &cfg.cost()?, cfg.trials, cfg.seed, &opts)?;
    let mut t = Table::new(&["trial", "seed", "calibrated", "d", "support", "kinks"]);
    for r in &s.rows {
        let kinks: Vec<String> = r.kinks.iter().map(|k| crate::output::format_real(*k)).collect();
        t.push(vec![
            r.trial.into(),
            r.seed.into(),
            r.calibrated.into(),
            r.d.into(),
            r.support.into(),
            kinks.join(" ").into(),
        ]);
    }
    let counts: Vec<String> = s.support_counts.iter().map(u64::to_string).collect();
    t.note("family", s.tag.name());
    t.note("nominal_d", s.nominal_d);
    t.note("max_d", s.max_d);
    t.note("max_support", s.max_support);
    t.note("violations", s.violations);
    t.note("kink_atoms", s.kink_atoms);
    t.note("atoms_on_kink", s.atoms_on_kink);
    t.note("min_kink_distance", s.min_kink_distance);
    t.note("mislabeled", s.mislabeled);
    t.note("failures", s.failures);
    t.note("support_counts", counts.join(" "));
    t.note("passed", s.passed());
    let failure = (s.failures > 0).then(|| format!("{} trials failed to solve", s.failures));
    Ok(Outcome { table: t, failure })
}

fn converge(cfg: &RunConfig) -> Run {
    let pbar = cfg.pbar.expect("resolved config has pbar");
    let s = convergence_study(cfg.range, cfg.gamma, &cfg.n_list, pbar)?;
    let mut t = Table::new(&["N", "theta", "q", "support", "K", "U"]);
    for l in &s.levels {
        for j in 0..l.n {
            t.push(vec![
                l.n.into(),
                l.thetas[j].into(),
                l.q[j].into(),
                l.support[j].into(),
                l.costs[j].into(),
                l.rents[j].into(),
            ]);
        }
    }
    let d: Vec<String> = s
        .sup_distances()
        .iter()
        .map(|v| crate::output::format_real(*v))
        .collect();
    t.note("theta0", s.theta0);
    t.note("max_support", s.max_support());
    t.note("sup_distances", d.join(" "));
    t.note("tail_nonincreasing", s.tail_nonincreasing());
    t.note("myerson_gap_n100", s.myerson_gap(100));
    Ok(t.into())
}

fn universal(cfg: &RunConfig) -> Run {
    let g = logistic_gap(&eta_grid(cfg.eta_max, grid(cfg)))?;
    let mut t = Table::new(&["eta", "w", "logistic", "gap", "k"]);
    for i in 0..g.eta.len() {
        let e = g.eta[i];
        t.push(vec![
            e.into(),
            g.w[i].into(),
            (g.w[i] + g.gap[i]).into(),
            g.gap[i].into(),
            Cell::from(normalized_k(e).ok()),
        ]);
    }
    t.note("argmax", g.argmax);
    t.note("max_gap", g.max_gap);
    Ok(t.into())
}

fn check(cfg: &RunConfig) -> Run {
    let inst = if cfg.thetas.is_some() || cfg.dist.is_some() {
        cfg.instance()?
    } else {
        let p = TwoTypeParams {
            alpha: cfg.alpha,
            pbar: cfg.pbar.expect("resolved config has pbar"),
            ..TwoTypeParams::new(cfg.v_l, cfg.v_h, cfg.pi_h, cfg.gamma)
        };
        p.instance()?
    };
    let r = outer_optimize(&inst, None, &cfg.saddle)?;
    let c = saddle_check(&inst, &r, 1000, 1e-3, cfg.seed);
    let p = check_primal(&inst, &r.solution);
    let mut t = Table::new(&["metric", "value"]);
    let rows: [(&str, Cell); 10] = [
        ("dual_value", r.dual_value.into()),
        ("primal_revenue", p.primal_revenue.into()),
        ("duality_gap", r.duality_gap.into()),
        ("experiment_residual", c.experiment_residual.into()),
        ("multiplier_residual", c.multiplier_residual.into()),
        ("mean_error", p.mean_error.into()),
        ("envelope_error", p.envelope_error.into()),
        ("feasible", p.feasible.into()),
        ("weak_duality", p.weak_duality.into()),
        ("max_support", r.solution.max_support().into()),
    ];
    for (k, v) in rows {
        t.push(vec![k.into(), v]);
    }
    let passed = c.passed(cfg.tol) && p.feasible && p.weak_duality;
    t.note("passed", passed);
    let failure = (!passed).then(|| format!("saddle residual {:e} or primal check failed", c.worst()));
    Ok(Outcome { table: t, failure })
}
