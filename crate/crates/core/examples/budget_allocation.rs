//! Splits a bit budget across machine tasks with different weights and
//! reports the resource terms.

use vcm::rd::{allocate_budget, Overheads, RdCurve, RdPoint, TaskSpec};
use vcm::Error;

fn curve(points: &[(f64, f64)]) -> vcm::Result<RdCurve> {
    RdCurve::new(points.iter().map(|&(r, q)| RdPoint::new(r, q)).collect())
}

fn main() -> vcm::Result<()> {
    let tasks = vec![
        TaskSpec {
            task_id: "detection".into(),
            weight: 0.5,
            level: 0,
            curve: curve(&[(20.0, 0.41), (45.0, 0.55), (90.0, 0.63), (180.0, 0.67)])?,
        },
        TaskSpec {
            task_id: "tracking".into(),
            weight: 0.3,
            level: 0,
            curve: curve(&[(5.0, 0.60), (12.0, 0.72), (30.0, 0.78)])?,
        },
        TaskSpec {
            task_id: "viewing".into(),
            weight: 0.2,
            level: 1,
            curve: curve(&[(100.0, 30.0), (250.0, 34.5), (600.0, 38.0)])?,
        },
    ];
    let overheads = Overheads { model: 10.0, theta: 2.0 };
    for budget in [100.0, 250.0, 500.0, 1000.0] {
        match allocate_budget(&tasks, budget, overheads) {
            Ok(a) => {
                let picks: Vec<String> = tasks
                    .iter()
                    .zip(&a.points)
                    .map(|(t, p)| format!("{}@{}", t.task_id, p.rate_kbps))
                    .collect();
                println!(
                    "budget {budget:6.0}: objective {:.3}, total {:.0} ({})",
                    a.objective,
                    a.report.total,
                    picks.join(", ")
                );
            }
            Err(Error::Infeasible { shortfall, .. }) => println!("budget {budget:6.0}: infeasible, short by {shortfall:.1}"),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
