//! Per-arrival event records and the JSON event log behind `--trace`.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::model::Instance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    /// Entered the accepted solution.
    Collected,
    /// Passed the price test but lost to feasibility.
    Admitted,
    Rejected,
}

/// Outcome for one revealed element.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ElementCheck {
    pub element: usize,
    pub reward: f64,
    /// Price or threshold the reward was compared against.
    pub threshold: f64,
    /// Sample-side capacity term, budget-additive policies only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    pub decision: Decision,
    pub reason: &'static str,
}

/// Everything revealed and decided at one arrival.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArrivalEvent {
    pub step: usize,
    pub unit: usize,
    pub checks: Vec<ElementCheck>,
    pub gained: f64,
}

impl ArrivalEvent {
    pub fn new(step: usize, unit: usize) -> Self {
        Self {
            step,
            unit,
            checks: Vec::new(),
            gained: 0.0,
        }
    }
}

#[derive(Serialize)]
struct LabelledEvent<'a> {
    policy: &'a str,
    step: usize,
    unit: usize,
    checks: Vec<LabelledCheck<'a>>,
    gained: f64,
}

#[derive(Serialize)]
struct LabelledCheck<'a> {
    element: String,
    #[serde(flatten)]
    check: &'a ElementCheck,
}

/// Writes one JSON record per line, with element labels resolved.
pub fn write_event_log(
    out: &mut impl Write,
    instance: &Instance,
    policy: &str,
    events: &[ArrivalEvent],
) -> Result<()> {
    for ev in events {
        let record = LabelledEvent {
            policy,
            step: ev.step,
            unit: ev.unit,
            checks: ev
                .checks
                .iter()
                .map(|c| LabelledCheck {
                    element: element_label(instance, c.element),
                    check: c,
                })
                .collect(),
            gained: ev.gained,
        };
        serde_json::to_writer(&mut *out, &record)?;
        writeln!(out)?;
    }
    Ok(())
}

fn element_label(instance: &Instance, element: usize) -> String {
    if element < instance.edges().len() {
        instance.edge_label(element)
    } else {
        format!("#{element}")
    }
}
