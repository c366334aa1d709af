//! The two worked two-user, two-bin examples.

use serde::Serialize;

use crate::channel::NormalizedChannel;
use crate::error::HarnessError;
use crate::game::{iterative_waterfilling, GameConfig};
use crate::stackelberg::{
    algorithm1_dual_from, dual_bound, exhaustive_stackelberg, interference_free_bound, LeaderProblem,
};

/// Tolerance, in bits, for comparisons against published reference rates.
pub const REFERENCE_TOLERANCE: f64 = 5e-3;
/// Grid step of the exhaustive search in the examples.
pub const EXAMPLE_GRID_STEP: f64 = 0.01;
/// Grid step of the relaxed dual maximization in the examples.
pub const EXAMPLE_DUAL_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleRow {
    pub quantity: String,
    /// Bits.
    pub value: f64,
    pub reference: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleReport {
    pub which: u8,
    /// Leader's Nash allocation.
    pub ne_leader: Vec<f64>,
    pub ne_follower: Vec<f64>,
    /// Leader's allocation at the exhaustive Stackelberg optimum.
    pub se_leader: Vec<f64>,
    pub se_follower: Vec<f64>,
    pub rows: Vec<ExampleRow>,
}

impl ExampleReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Fixed-width text table.
    pub fn to_table(&self) -> String {
        let mut out = format!("Example {}\n", self.which);
        out += &format!(
            "  NE allocations: P1 = {:?}, P2 = {:?}\n",
            self.ne_leader, self.ne_follower
        );
        out += &format!(
            "  SE allocations: P1 = {:?}, P2 = {:?}\n",
            self.se_leader, self.se_follower
        );
        out += &format!(
            "  {:<28} {:>10} {:>10}  {}\n",
            "quantity", "bits", "reference", "status"
        );
        for row in &self.rows {
            let reference = row.reference.map_or("-".to_string(), |r| format!("{r:.3}"));
            let status = if row.pass { "pass" } else { "FAIL" };
            out += &format!(
                "  {:<28} {:>10.6} {:>10}  {status}\n",
                row.quantity, row.value, reference
            );
        }
        out
    }
}

/// Channel of example `which`: two users, two bins, cross gain 0.5 and
/// budgets of 10. The users' strong bins have normalized noise 4 or 6.
pub fn example_problem(which: u8) -> Result<LeaderProblem, HarnessError> {
    let strong = match which {
        1 => 4.0,
        2 => 6.0,
        _ => return Err(HarnessError::Spec(format!("no example {which}; choose 1 or 2"))),
    };
    let nc = NormalizedChannel::two_user([vec![strong, 1.0], vec![1.0, strong]], 0.5)?;
    Ok(LeaderProblem::new(nc, 0, vec![10.0, 10.0], EXAMPLE_GRID_STEP))
}

fn references(which: u8) -> [f64; 4] {
    match which {
        1 => [2.645, 2.645, 2.939, 3.474],
        _ => [3.460, 3.460, 3.460, 3.460],
    }
}

fn row(quantity: &str, value: f64, reference: Option<f64>, pass: bool) -> ExampleRow {
    ExampleRow {
        quantity: quantity.into(),
        value,
        reference,
        pass,
    }
}

fn against(quantity: &str, value: f64, reference: f64) -> ExampleRow {
    row(
        quantity,
        value,
        Some(reference),
        (value - reference).abs() <= REFERENCE_TOLERANCE,
    )
}

/// Runs every solver on example `which` and checks the rates against the
/// published references.
pub fn reproduce_example(which: u8) -> Result<ExampleReport, HarnessError> {
    let prob = example_problem(which)?;
    let [ne1, ne2, se1, se2] = references(which);

    let ne = iterative_waterfilling(&prob.channel, &GameConfig::new(prob.budgets.clone()), None)?;
    let se = exhaustive_stackelberg(&prob)?;
    let alg = algorithm1_dual_from(&prob, &ne)?;
    let (_, r_max) = interference_free_bound(&prob)?;
    let dual = dual_bound(&prob, EXAMPLE_DUAL_STEP)?;

    let achieved = [ne.rates[0], se.rates[0], alg.rates[0]];
    let best = se.rates[0].max(alg.rates[0]);
    let gap = dual.dual_value_bits - best;
    let mut rows = vec![
        against("NE R1", ne.rates[0], ne1),
        against("NE R2", ne.rates[1], ne2),
        against("SE R1 (exhaustive)", se.rates[0], se1),
        against("SE R2 (exhaustive)", se.rates[1], se2),
        against("Algorithm 1 R1", alg.rates[0], se1),
        against("Algorithm 1 R2", alg.rates[1], se2),
    ];
    let r_max_row = if which == 1 {
        row(
            "R1max (interference-free)",
            r_max,
            Some(3.814),
            (r_max - 3.814).abs() <= REFERENCE_TOLERANCE && achieved.iter().all(|&r| r < r_max),
        )
    } else {
        row(
            "R1max (interference-free)",
            r_max,
            None,
            achieved.iter().all(|&r| r <= r_max),
        )
    };
    rows.push(r_max_row);
    rows.push(row(
        "dual bound D'(mu*)",
        dual.dual_value_bits,
        None,
        gap >= -1e-6 && (gap <= 1e-4 || dual.dual_value_bits < r_max),
    ));

    Ok(ExampleReport {
        which,
        ne_leader: ne.allocations[0].power.clone(),
        ne_follower: ne.allocations[1].power.clone(),
        se_leader: se.allocations[0].power.clone(),
        se_follower: se.allocations[1].power.clone(),
        rows,
    })
}
