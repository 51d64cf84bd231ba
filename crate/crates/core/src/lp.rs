//! Thin wrapper over HiGHS for the small dense LPs used by the oracle and the
//! primal recovery.

use highs::{ColProblem, HighsModelStatus, Row, Sense};

use crate::error::{Error, Result};

pub(crate) struct LpSolution {
    pub columns: Vec<f64>,
    /// Shadow prices `∂ objective / ∂ rhs`.
    pub row_duals: Vec<f64>,
    pub objective: f64,
}

pub(crate) struct MaxLp {
    pb: ColProblem,
    rows: Vec<Row>,
}

impl MaxLp {
    pub fn new() -> Self {
        MaxLp {
            pb: ColProblem::default(),
            rows: Vec::new(),
        }
    }

    pub fn eq_row(&mut self, rhs: f64) -> usize {
        self.rows.push(self.pb.add_row(rhs..=rhs));
        self.rows.len() - 1
    }

    pub fn ge_row(&mut self, rhs: f64) -> usize {
        self.rows.push(self.pb.add_row(rhs..));
        self.rows.len() - 1
    }

    pub fn le_row(&mut self, rhs: f64) -> usize {
        self.rows.push(self.pb.add_row(..=rhs));
        self.rows.len() - 1
    }

    /// Nonnegative column with objective coefficient `cost`.
    pub fn column(&mut self, cost: f64, entries: &[(usize, f64)]) {
        let e: Vec<(Row, f64)> = entries.iter().map(|&(r, v)| (self.rows[r], v)).collect();
        self.pb.add_column(cost, 0.0.., e);
    }

    /// Solves with tight tolerances, falling back to default tolerances
    /// without presolve when the tight run fails. Presolve occasionally
    /// declares the badly scaled column-generation masters infeasible.
    pub fn solve(self) -> Result<LpSolution> {
        match solve_with(self.pb.clone(), 1e-10, true) {
            Err(Error::Lp(_)) => solve_with(self.pb, 1e-7, false),
            r => r,
        }
    }
}

fn solve_with(pb: ColProblem, tol: f64, presolve: bool) -> Result<LpSolution> {
    let mut model = pb.optimise(Sense::Maximise);
    model.make_quiet();
    model.set_option("threads", 1);
    model.set_option("primal_feasibility_tolerance", tol);
    model.set_option("dual_feasibility_tolerance", tol);
    if !presolve {
        model.set_option("presolve", "off");
    }
    let solved = model.try_solve().map_err(|e| Error::Lp(format!("{e:?}")))?;
    match solved.status() {
        HighsModelStatus::Optimal => {}
        HighsModelStatus::Infeasible => return Err(Error::Lp("infeasible".into())),
        s => return Err(Error::Lp(format!("status {s:?}"))),
    }
    let sol = solved.get_solution();
    Ok(LpSolution {
        columns: sol.columns().to_vec(),
        row_duals: sol.dual_rows().to_vec(),
        objective: solved.objective_value(),
    })
}
