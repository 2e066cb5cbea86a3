//! Rate-distortion tooling: Pareto curve construction, Bjøntegaard-delta
//! rate and weighted multi-task budget allocation.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::metrics::csv_err;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdPoint {
    pub rate_kbps: f64,
    /// Higher is better; units depend on the metric.
    pub quality: f64,
}

impl RdPoint {
    pub fn new(rate_kbps: f64, quality: f64) -> Self {
        RdPoint { rate_kbps, quality }
    }
}

/// At least two operating points with strictly increasing positive rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RdCurve {
    points: Vec<RdPoint>,
}

impl RdCurve {
    pub fn new(points: Vec<RdPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::DegenerateCurve(format!(
                "{} point(s), need at least 2",
                points.len()
            )));
        }
        for p in &points {
            if !(p.rate_kbps.is_finite() && p.rate_kbps > 0.0 && p.quality.is_finite()) {
                return Err(Error::Validation(format!("invalid RD point {p:?}")));
            }
        }
        if points.windows(2).any(|w| w[1].rate_kbps <= w[0].rate_kbps) {
            return Err(Error::Validation("RD rates must be strictly increasing".into()));
        }
        Ok(RdCurve { points })
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same curve with every rate scaled.
    pub fn scaled_rates(&self, factor: f64) -> Result<Self> {
        RdCurve::new(
            self.points
                .iter()
                .map(|p| RdPoint::new(p.rate_kbps * factor, p.quality))
                .collect(),
        )
    }
}

/// Points not beaten by any cheaper-or-equal point, sorted by rate.
pub fn pareto_frontier(mut points: Vec<RdPoint>) -> Vec<RdPoint> {
    points.sort_by(|a, b| {
        a.rate_kbps
            .total_cmp(&b.rate_kbps)
            .then(b.quality.total_cmp(&a.quality))
    });
    let mut out: Vec<RdPoint> = Vec::with_capacity(points.len());
    for p in points {
        if out.last().is_none_or(|last| p.quality > last.quality) {
            out.push(p);
        }
    }
    out
}

/// Evaluates every grid entry and keeps the Pareto frontier.
pub fn build_rd_curve<P, F>(grid: &[P], mut eval: F) -> Result<RdCurve>
where
    F: FnMut(&P) -> Result<RdPoint>,
{
    if grid.is_empty() {
        return Err(Error::Contract("empty parameter grid".into()));
    }
    let points = grid.iter().map(&mut eval).collect::<Result<Vec<_>>>()?;
    let frontier = pareto_frontier(points);
    if frontier.len() < 2 {
        return Err(Error::DegenerateCurve(format!(
            "{} non-dominated point(s) from a grid of {}",
            frontier.len(),
            grid.len()
        )));
    }
    RdCurve::new(frontier)
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d = vec![delta[0]; 2];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = Self::end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = Self::end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Pchip { x, y, d }
    }

    fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
        let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if d.signum() != m0.signum() {
            0.0
        } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
            3.0 * m0
        } else {
            d
        }
    }

    fn eval_segment(&self, k: usize, x: f64) -> f64 {
        let h = self.x[k + 1] - self.x[k];
        let t = (x - self.x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }

    /// Exact integral over [lo, hi] (Simpson's rule is exact on cubics).
    fn integrate(&self, lo: f64, hi: f64) -> f64 {
        let mut total = 0.0;
        for k in 0..self.x.len() - 1 {
            let a = self.x[k].max(lo);
            let b = self.x[k + 1].min(hi);
            if b <= a {
                continue;
            }
            let m = 0.5 * (a + b);
            total += (b - a) / 6.0
                * (self.eval_segment(k, a) + 4.0 * self.eval_segment(k, m) + self.eval_segment(k, b));
        }
        total
    }
}

fn log_rate_interp(curve: &RdCurve) -> Result<Pchip> {
    if curve.len() < 3 {
        return Err(Error::Contract(format!(
            "BD-rate needs at least 3 points per curve, got {}",
            curve.len()
        )));
    }
    let pts = curve.points();
    if pts.windows(2).any(|w| w[1].quality <= w[0].quality) {
        return Err(Error::Contract(
            "BD-rate needs quality strictly increasing with rate".into(),
        ));
    }
    Ok(Pchip::new(
        pts.iter().map(|p| p.quality).collect(),
        pts.iter().map(|p| p.rate_kbps.ln()).collect(),
    ))
}

/// Average rate difference of `test` against `reference` at equal quality,
/// in percent (negative means `test` is cheaper).
pub fn bd_rate(reference: &RdCurve, test: &RdCurve) -> Result<f64> {
    let a = log_rate_interp(reference)?;
    let b = log_rate_interp(test)?;
    let lo = a.x[0].max(b.x[0]);
    let hi = a.x[a.x.len() - 1].min(b.x[b.x.len() - 1]);
    if hi <= lo {
        return Err(Error::Incomparable(format!(
            "quality ranges do not overlap ({lo} >= {hi})"
        )));
    }
    let mean_diff = (b.integrate(lo, hi) - a.integrate(lo, hi)) / (hi - lo);
    Ok(100.0 * (mean_diff.exp() - 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub task_id: String,
    pub weight: f64,
    /// Feature abstraction level; 0 is the base feature stream.
    pub level: u32,
    pub curve: RdCurve,
}

/// Fixed costs outside the per-task streams, in the same unit as the
/// curve rates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Overheads {
    pub model: f64,
    pub theta: f64,
}

/// Cost of coding `level` by prediction from `reference_level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorOption {
    pub level: u32,
    pub reference_level: u32,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelChoice {
    pub level: u32,
    /// `None` when the level is cheapest coded directly.
    pub reference_level: Option<u32>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceReport {
    pub s_f0: f64,
    pub s_pred: f64,
    pub s_model: f64,
    pub s_theta: f64,
    pub total: f64,
    pub budget: f64,
    pub feasible: bool,
    pub level_choices: Vec<LevelChoice>,
}

/// Breaks a selection down into the resource-constraint terms. Level 0
/// counts toward the base feature stream; every other level costs the
/// cheaper of coding it directly or any listed predictor.
pub fn resource_report(
    selection: &[(u32, RdPoint)],
    predictors: &[PredictorOption],
    overheads: Overheads,
    budget: f64,
) -> ResourceReport {
    let mut s_f0 = 0.0;
    let mut levels: Vec<u32> = Vec::new();
    for &(level, p) in selection {
        if level == 0 {
            s_f0 += p.rate_kbps;
        } else if !levels.contains(&level) {
            levels.push(level);
        }
    }
    for p in predictors {
        if p.level != 0 && !levels.contains(&p.level) {
            levels.push(p.level);
        }
    }
    levels.sort_unstable();
    let mut level_choices = Vec::with_capacity(levels.len());
    let mut s_pred = 0.0;
    for level in levels {
        let direct: Vec<f64> = selection
            .iter()
            .filter(|(l, _)| *l == level)
            .map(|(_, p)| p.rate_kbps)
            .collect();
        let mut best: Option<LevelChoice> = (!direct.is_empty()).then(|| LevelChoice {
            level,
            reference_level: None,
            cost: direct.iter().sum(),
        });
        for p in predictors.iter().filter(|p| p.level == level) {
            if best.is_none_or(|b| p.cost < b.cost) {
                best = Some(LevelChoice {
                    level,
                    reference_level: Some(p.reference_level),
                    cost: p.cost,
                });
            }
        }
        let choice = best.expect("level has at least one cost");
        s_pred += choice.cost;
        level_choices.push(choice);
    }
    let total = s_f0 + s_pred + overheads.model + overheads.theta;
    ResourceReport {
        s_f0,
        s_pred,
        s_model: overheads.model,
        s_theta: overheads.theta,
        total,
        budget,
        feasible: total <= budget,
        level_choices,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Index into each task's curve.
    pub choices: Vec<usize>,
    pub points: Vec<RdPoint>,
    /// Σ ω·q over the chosen points.
    pub objective: f64,
    pub report: ResourceReport,
}

fn check_tasks(tasks: &[TaskSpec]) -> Result<()> {
    if tasks.is_empty() {
        return Err(Error::Contract("no tasks to allocate".into()));
    }
    for t in tasks {
        if !(0.0..=1.0).contains(&t.weight) {
            return Err(Error::Validation(format!(
                "task {} weight {} outside [0, 1]",
                t.task_id, t.weight
            )));
        }
    }
    let sum: f64 = tasks.iter().map(|t| t.weight).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("task weights sum to {sum}, not 1")));
    }
    Ok(())
}

#[derive(Clone)]
struct Partial {
    rate: f64,
    objective: f64,
    choices: Vec<usize>,
}

/// Picks one operating point per task maximising `Σ ω·q` subject to
/// `Σ rate + model + theta ≤ budget`.
///
/// Exact: a dynamic program over the Pareto set of partial (rate,
/// objective) sums. Ties prefer lower total rate, then the
/// lexicographically smallest choice vector.
pub fn allocate_budget(tasks: &[TaskSpec], budget: f64, overheads: Overheads) -> Result<Allocation> {
    check_tasks(tasks)?;
    let fixed = overheads.model + overheads.theta;
    let min_rates: Vec<f64> = tasks.iter().map(|t| t.curve.points()[0].rate_kbps).collect();
    let required = min_rates.iter().fold(0.0, |acc, r| acc + r) + fixed;
    if required > budget {
        return Err(Error::Infeasible {
            required,
            budget,
            shortfall: required - budget,
        });
    }
    // cheapest possible completion after task i
    let mut tail_min = vec![0.0; tasks.len() + 1];
    for i in (0..tasks.len()).rev() {
        tail_min[i] = tail_min[i + 1] + min_rates[i];
    }
    let slack = 1e-9 * budget.abs().max(1.0);

    let mut states = vec![Partial {
        rate: 0.0,
        objective: 0.0,
        choices: Vec::new(),
    }];
    for (i, task) in tasks.iter().enumerate() {
        let mut next = Vec::with_capacity(states.len() * task.curve.len());
        for s in &states {
            for (j, p) in task.curve.points().iter().enumerate() {
                let rate = s.rate + p.rate_kbps;
                if rate + tail_min[i + 1] + fixed > budget + slack {
                    continue;
                }
                let mut choices = s.choices.clone();
                choices.push(j);
                next.push(Partial {
                    rate,
                    objective: s.objective + task.weight * p.quality,
                    choices,
                });
            }
        }
        next.sort_by(|a, b| {
            a.rate
                .total_cmp(&b.rate)
                .then(b.objective.total_cmp(&a.objective))
                .then(a.choices.cmp(&b.choices))
        });
        let mut kept: Vec<Partial> = Vec::with_capacity(next.len());
        for s in next {
            if kept.last().is_none_or(|k| s.objective > k.objective) {
                kept.push(s);
            }
        }
        states = kept;
    }
    let best = states
        .into_iter()
        .filter(|s| s.rate + overheads.model + overheads.theta <= budget)
        .reduce(|a, b| if better(&b, &a) { b } else { a })
        .ok_or_else(|| Error::Infeasible {
            required,
            budget,
            shortfall: (required - budget).max(0.0),
        })?;
    let points: Vec<RdPoint> = best
        .choices
        .iter()
        .zip(tasks)
        .map(|(&j, t)| t.curve.points()[j])
        .collect();
    let selection: Vec<(u32, RdPoint)> = tasks.iter().zip(&points).map(|(t, p)| (t.level, *p)).collect();
    let mut report = resource_report(&selection, &[], overheads, budget);
    report.feasible = true;
    Ok(Allocation {
        choices: best.choices,
        points,
        objective: best.objective,
        report,
    })
}

fn better(a: &Partial, b: &Partial) -> bool {
    a.objective > b.objective
        || (a.objective == b.objective
            && (a.rate < b.rate || (a.rate == b.rate && a.choices < b.choices)))
}

/// Reads `rate_kbps,quality` rows (with header) into a curve.
pub fn read_rd_csv<R: Read>(source: R) -> Result<RdCurve> {
    let mut r = csv::Reader::from_reader(source);
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 2 {
            return Err(Error::Format(format!("expected 2 columns, got {}", rec.len())));
        }
        points.push(RdPoint::new(parse_f64(&rec[0])?, parse_f64(&rec[1])?));
    }
    RdCurve::new(points)
}

pub fn write_rd_csv<W: Write>(curve: &RdCurve, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["rate_kbps", "quality"]).map_err(csv_err)?;
    for p in curve.points() {
        w.write_record([format!("{:.6}", p.rate_kbps), format!("{:.6}", p.quality)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a task table with columns `task_id,weight,level,rate_kbps,quality`;
/// consecutive or scattered rows sharing a task id form that task's curve.
pub fn read_tasks_csv<R: Read>(source: R) -> Result<Vec<TaskSpec>> {
    let mut r = csv::Reader::from_reader(source);
    let mut groups: Vec<(String, f64, u32, Vec<RdPoint>)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 5 {
            return Err(Error::Format(format!("expected 5 columns, got {}", rec.len())));
        }
        let id = rec[0].trim().to_string();
        let weight = parse_f64(&rec[1])?;
        let level: u32 = rec[2]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad level {:?}", &rec[2])))?;
        let point = RdPoint::new(parse_f64(&rec[3])?, parse_f64(&rec[4])?);
        match groups.iter_mut().find(|g| g.0 == id) {
            Some(g) => {
                if g.1 != weight || g.2 != level {
                    return Err(Error::Format(format!("task {id} has inconsistent weight or level")));
                }
                g.3.push(point);
            }
            None => groups.push((id, weight, level, vec![point])),
        }
    }
    groups
        .into_iter()
        .map(|(task_id, weight, level, mut points)| {
            points.sort_by(|a, b| a.rate_kbps.total_cmp(&b.rate_kbps));
            Ok(TaskSpec {
                task_id,
                weight,
                level,
                curve: RdCurve::new(points)?,
            })
        })
        .collect()
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("not a number: {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(pts: &[(f64, f64)]) -> RdCurve {
        RdCurve::new(pts.iter().map(|&(r, q)| RdPoint::new(r, q)).collect()).unwrap()
    }

    #[test]
    fn frontier_drops_dominated() {
        let pts = vec![
            RdPoint::new(10.0, 30.0),
            RdPoint::new(20.0, 35.0),
            RdPoint::new(25.0, 33.0),
            RdPoint::new(40.0, 38.0),
        ];
        let f = pareto_frontier(pts);
        assert_eq!(f.len(), 3);
        assert!(f.iter().all(|p| p.rate_kbps != 25.0));
    }

    #[test]
    fn identical_rates_are_degenerate() {
        let r = build_rd_curve(&[1, 2, 3], |&q| Ok(RdPoint::new(5.0, q as f64)));
        assert!(matches!(r, Err(Error::DegenerateCurve(_))));
    }

    #[test]
    fn bd_rate_identity_and_doubling() {
        let a = curve(&[(100.0, 30.0), (200.0, 33.0), (400.0, 36.5), (800.0, 39.0)]);
        assert!(bd_rate(&a, &a).unwrap().abs() < 1e-9);
        let doubled = a.scaled_rates(2.0).unwrap();
        assert!((bd_rate(&a, &doubled).unwrap() - 100.0).abs() < 0.1);
        assert!(bd_rate(&doubled, &a).unwrap() < 0.0);
    }

    #[test]
    fn bd_rate_needs_overlap() {
        let a = curve(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
        let b = curve(&[(1.0, 10.0), (2.0, 11.0), (3.0, 12.0)]);
        assert!(matches!(bd_rate(&a, &b), Err(Error::Incomparable(_))));
        let short = curve(&[(1.0, 1.0), (2.0, 2.0)]);
        assert!(bd_rate(&short, &a).is_err());
    }

    #[test]
    fn pchip_reproduces_lines() {
        let p = Pchip::new(vec![0.0, 1.0, 3.0], vec![1.0, 3.0, 7.0]);
        assert!((p.integrate(0.0, 3.0) - 12.0).abs() < 1e-12);
        assert!((p.eval_segment(1, 2.0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn unconstrained_allocation_takes_best_points() {
        let tasks = vec![
            TaskSpec { task_id: "a".into(), weight: 0.5, level: 0, curve: curve(&[(1.0, 1.0), (2.0, 2.0)]) },
            TaskSpec { task_id: "b".into(), weight: 0.5, level: 1, curve: curve(&[(1.0, 5.0), (3.0, 6.0)]) },
        ];
        let a = allocate_budget(&tasks, 100.0, Overheads::default()).unwrap();
        assert_eq!(a.choices, vec![1, 1]);
        assert_eq!(a.report.total, 5.0);
        let e = allocate_budget(&tasks, 1.5, Overheads::default()).unwrap_err();
        assert!(matches!(e, Error::Infeasible { .. }));
    }

    #[test]
    fn weights_must_sum_to_one() {
        let tasks = vec![TaskSpec { task_id: "a".into(), weight: 0.7, level: 0, curve: curve(&[(1.0, 1.0), (2.0, 2.0)]) }];
        assert!(matches!(allocate_budget(&tasks, 10.0, Overheads::default()), Err(Error::Validation(_))));
    }

    #[test]
    fn report_terms() {
        let r = resource_report(&[(0, RdPoint::new(4.0, 1.0))], &[], Overheads::default(), 5.0);
        assert_eq!(r.total, 4.0);
        assert!(r.feasible);
        let preds = [
            PredictorOption { level: 2, reference_level: 0, cost: 5.0 },
            PredictorOption { level: 2, reference_level: 1, cost: 3.0 },
        ];
        let r = resource_report(&[(0, RdPoint::new(4.0, 1.0))], &preds, Overheads { model: 1.0, theta: 0.5 }, 8.0);
        assert_eq!(r.s_pred, 3.0);
        assert_eq!(r.level_choices[0].reference_level, Some(1));
        assert_eq!(r.total, 8.5);
        assert!(!r.feasible);
    }

    #[test]
    fn csv_round_trip() {
        let c = curve(&[(1.5, 30.0), (3.0, 33.25)]);
        let mut buf = Vec::new();
        write_rd_csv(&c, &mut buf).unwrap();
        assert!(buf.starts_with(b"rate_kbps,quality\n"));
        assert_eq!(read_rd_csv(&buf[..]).unwrap(), c);
        let tasks = "task_id,weight,level,rate_kbps,quality\nA,0.6,0,2,0.5\nB,0.4,1,1,0.2\nA,0.6,0,1,0.3\nB,0.4,1,4,0.9\n";
        let t = read_tasks_csv(tasks.as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].curve.points()[0].rate_kbps, 1.0);
    }
}
