//! Append-only privacy event log and its per-group replay.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::accountant::{Accountant, GaussianPhaseEvent};
use crate::error::{invalid, Error, Result};

/// Slack allowed above the budget before the audit flags a group.
pub const BUDGET_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerHeader {
    pub epsilon: f64,
    pub delta: f64,
    pub eps_sel: f64,
    pub selection_phases: usize,
    pub group_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LedgerEvent {
    Open(LedgerHeader),
    Train {
        phase: usize,
        group: u32,
        sigma: f64,
        q: f64,
        steps: u64,
    },
    /// Selection phase `phase` charged `eps` to every point still in the
    /// pool; the selected points became group `group`.
    Select { phase: usize, group: u32, eps: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupLedger {
    header: LedgerHeader,
    events: Vec<LedgerEvent>,
}

impl GroupLedger {
    pub fn new(header: LedgerHeader) -> Result<Self> {
        if header.group_sizes.len() != header.selection_phases + 1 {
            return Err(invalid("ledger needs one group per selection phase plus the initial set"));
        }
        if !(header.delta > 0.0 && header.delta < 1.0) {
            return Err(invalid("ledger delta must lie in (0, 1)"));
        }
        Ok(Self {
            header,
            events: Vec::new(),
        })
    }

    pub fn header(&self) -> &LedgerHeader {
        &self.header
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    fn check_group(&self, group: u32, context: &str) -> Result<()> {
        if group as usize >= self.header.group_sizes.len() {
            return Err(Error::UnknownGroup {
                group,
                context: context.to_string(),
            });
        }
        Ok(())
    }

    pub fn record_train(&mut self, phase: usize, group: u32, sigma: f64, q: f64, steps: u64) -> Result<()> {
        self.check_group(group, &format!("train event of phase {phase}"))?;
        if phase == 0 || phase > self.header.selection_phases + 1 {
            return Err(invalid(format!("training phase {phase} out of range")));
        }
        if group as usize >= phase {
            return Err(Error::UnknownGroup {
                group,
                context: format!("phase {phase}, before the group was labeled"),
            });
        }
        GaussianPhaseEvent::new(sigma, q, steps)?;
        self.events.push(LedgerEvent::Train {
            phase,
            group,
            sigma,
            q,
            steps,
        });
        Ok(())
    }

    pub fn record_select(&mut self, phase: usize, eps: f64) -> Result<()> {
        if phase == 0 || phase > self.header.selection_phases {
            return Err(invalid(format!("selection phase {phase} out of range")));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(invalid("selection epsilon must be finite and >= 0"));
        }
        self.events.push(LedgerEvent::Select {
            phase,
            group: phase as u32,
            eps,
        });
        Ok(())
    }

    /// Rebuilds a ledger, re-validating every event.
    pub fn from_events(events: impl IntoIterator<Item = LedgerEvent>) -> Result<Self> {
        let mut iter = events.into_iter();
        let header = match iter.next() {
            Some(LedgerEvent::Open(h)) => h,
            _ => return Err(invalid("event log must start with an open event")),
        };
        let mut ledger = Self::new(header)?;
        for ev in iter {
            match ev {
                LedgerEvent::Open(_) => return Err(invalid("duplicate open event")),
                LedgerEvent::Train {
                    phase,
                    group,
                    sigma,
                    q,
                    steps,
                } => ledger.record_train(phase, group, sigma, q, steps)?,
                LedgerEvent::Select { phase, group, eps } => {
                    ledger.check_group(group, &format!("select event of phase {phase}"))?;
                    if group as usize != phase {
                        return Err(invalid(format!("select event of phase {phase} names group {group}")));
                    }
                    ledger.record_select(phase, eps)?;
                }
            }
        }
        Ok(ledger)
    }

    /// One JSON object per line, header first.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &LedgerEvent::Open(self.header.clone()))?;
        writeln!(w)?;
        for ev in &self.events {
            serde_json::to_writer(&mut w, ev)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut events = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line)?);
        }
        Self::from_events(events)
    }

    /// Replays the log: per group, training loss composed in RDP and
    /// converted at delta, plus selection loss under basic composition.
    pub fn summary(&self, acc: &Accountant) -> Result<LedgerSummary> {
        let training_phases = self.header.selection_phases + 1;
        let delta = self.header.delta;
        let mut groups = Vec::with_capacity(self.header.group_sizes.len());
        for (g, &size) in self.header.group_sizes.iter().enumerate() {
            let mut history = acc.zero();
            let mut trained = false;
            let mut trajectory = Vec::with_capacity(training_phases);
            for phase in 1..=training_phases {
                for ev in &self.events {
                    if let LedgerEvent::Train {
                        phase: p,
                        group,
                        sigma,
                        q,
                        steps,
                    } = *ev
                    {
                        if p == phase && group as usize == g {
                            history.add_assign(&acc.phase_curve(sigma, q, steps)?)?;
                            trained = true;
                        }
                    }
                }
                let training = if trained { acc.epsilon(&history, delta)? } else { 0.0 };
                let selection = self.selection_loss(|p| p <= g && p < phase);
                trajectory.push(TrajectoryPoint {
                    phase,
                    selection_epsilon: selection,
                    training_epsilon: training,
                    total_epsilon: selection + training,
                });
            }
            let last = *trajectory.last().expect("at least one training phase");
            let selection = self.selection_loss(|p| p <= g);
            groups.push(GroupSummary {
                group: g as u32,
                size,
                selection_epsilon: selection,
                training_epsilon: last.training_epsilon,
                total_epsilon: selection + last.training_epsilon,
                trajectory,
            });
        }
        Ok(LedgerSummary {
            epsilon_budget: self.header.epsilon,
            groups,
            unselected_epsilon: self.selection_loss(|_| true),
        })
    }

    fn selection_loss(&self, include: impl Fn(usize) -> bool) -> f64 {
        self.events
            .iter()
            .filter_map(|ev| match *ev {
                LedgerEvent::Select { phase, eps, .. } if include(phase) => Some(eps),
                _ => None,
            })
            .fold(0.0, |acc, e| acc + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub phase: usize,
    pub selection_epsilon: f64,
    pub training_epsilon: f64,
    pub total_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: u32,
    pub size: usize,
    pub selection_epsilon: f64,
    pub training_epsilon: f64,
    pub total_epsilon: f64,
    /// Cumulative loss at the end of each training phase.
    pub trajectory: Vec<TrajectoryPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub epsilon_budget: f64,
    pub groups: Vec<GroupSummary>,
    /// Loss of points that were scored in every selection and never labeled.
    pub unselected_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub summary: LedgerSummary,
    pub violations: Vec<String>,
    pub passed: bool,
}

/// Recomputes every group's loss from the raw events and flags any group
/// above the budget, or a selection spend above the declared selection
/// budget.
pub fn audit(ledger: &GroupLedger, acc: &Accountant) -> Result<AuditReport> {
    let summary = ledger.summary(acc)?;
    let header = ledger.header();
    let ceiling = header.epsilon + BUDGET_SLACK;
    let mut violations = Vec::new();
    for g in &summary.groups {
        if g.total_epsilon > ceiling {
            violations.push(format!(
                "group {}: total epsilon {:.9} exceeds budget {}",
                g.group, g.total_epsilon, header.epsilon
            ));
        }
    }
    if summary.unselected_epsilon > ceiling {
        violations.push(format!(
            "unselected points: epsilon {:.9} exceeds budget {}",
            summary.unselected_epsilon, header.epsilon
        ));
    }
    if summary.unselected_epsilon > header.eps_sel + 1e-12 {
        violations.push(format!(
            "selection spent {:.9}, declared selection budget {}",
            summary.unselected_epsilon, header.eps_sel
        ));
    }
    let passed = violations.is_empty();
    Ok(AuditReport {
        summary,
        violations,
        passed,
    })
}

/// Per-group differences between two summaries beyond `tol`.
pub fn compare_summaries(recomputed: &LedgerSummary, reported: &LedgerSummary, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    if recomputed.groups.len() != reported.groups.len() {
        out.push(format!(
            "group count differs: log has {}, report has {}",
            recomputed.groups.len(),
            reported.groups.len()
        ));
        return out;
    }
    for (a, b) in recomputed.groups.iter().zip(&reported.groups) {
        let d = a.total_epsilon - b.total_epsilon;
        if d.abs() > tol || a.trajectory.len() != b.trajectory.len() {
            out.push(format!("group {}: log {:.12} vs report {:.12} (delta {:+.3e})", a.group, a.total_epsilon, b.total_epsilon, d));
            continue;
        }
        for (pa, pb) in a.trajectory.iter().zip(&b.trajectory) {
            let d = pa.total_epsilon - pb.total_epsilon;
            if d.abs() > tol {
                out.push(format!("group {} phase {}: delta {:+.3e}", a.group, pa.phase, d));
            }
        }
    }
    let d = recomputed.unselected_epsilon - reported.unselected_epsilon;
    if d.abs() > tol {
        out.push(format!("unselected points: delta {d:+.3e}"));
    }
    out
}
