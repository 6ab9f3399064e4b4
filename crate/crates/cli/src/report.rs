//! Machine-readable reports. Field order is fixed by the struct
//! definitions, so identical inputs serialize to identical bytes.

use memberscope_core::membership::{
    MembershipDecision, Partition, Side, SolvabilityReport, SweepCell, Verdict,
};
use memberscope_core::optimizer::FitStatus;
use serde::Serialize;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
pub struct ReferenceEntry {
    pub name: String,
    pub epsilon: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SideTag {
    AtLeast,
    Below,
}

impl From<Side> for SideTag {
    fn from(side: Side) -> Self {
        match side {
            Side::AtLeast => SideTag::AtLeast,
            Side::Below => SideTag::Below,
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusTag {
    Converged,
    Infeasible,
    IterationLimit,
}

impl From<FitStatus> for StatusTag {
    fn from(status: FitStatus) -> Self {
        match status {
            FitStatus::Converged => StatusTag::Converged,
            FitStatus::Infeasible => StatusTag::Infeasible,
            FitStatus::IterationLimit => StatusTag::IterationLimit,
        }
    }
}

#[derive(Serialize)]
pub struct SegmentReport {
    pub sides: Vec<SideTag>,
    pub label: String,
    pub residual: f64,
    pub status: StatusTag,
    pub iterations: usize,
    pub witness_bloch: Vec<f64>,
}

#[derive(Serialize)]
pub struct VerdictReport {
    pub conclusive: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment: Option<Vec<SideTag>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Serialize)]
pub struct DecisionReport {
    pub tool_version: String,
    pub references: Vec<ReferenceEntry>,
    pub fit_tol: f64,
    pub reject_tol: f64,
    pub verdict: VerdictReport,
    pub segments: Vec<SegmentReport>,
}

/// Human-readable segment description, e.g.
/// `F(Psi-) >= 0.50 && F(Psi+) < 0.50`.
pub fn segment_label(names: &[String], partition: &Partition, sides: &[Side]) -> String {
    let parts: Vec<String> = names
        .iter()
        .zip(partition.references())
        .zip(sides)
        .map(|((name, r), side)| {
            let op = match side {
                Side::AtLeast => ">=",
                Side::Below => "<",
            };
            format!("F({name}) {op} {}", trim_float(r.epsilon()))
        })
        .collect();
    parts.join(" && ")
}

fn trim_float(x: f64) -> String {
    let s = format!("{x}");
    s
}

pub fn decision_report(
    names: &[String],
    partition: &Partition,
    decision: &MembershipDecision,
    fit_tol: f64,
    reject_tol: f64,
) -> DecisionReport {
    let segments = decision
        .segment_fits
        .iter()
        .map(|f| SegmentReport {
            sides: f.segment.sides().iter().copied().map(SideTag::from).collect(),
            label: segment_label(names, partition, f.segment.sides()),
            residual: f.residual,
            status: f.status.into(),
            iterations: f.iterations,
            witness_bloch: f.witness.coords().to_vec(),
        })
        .collect();
    let verdict = match &decision.verdict {
        Verdict::Conclusive(seg) => VerdictReport {
            conclusive: true,
            segment: Some(seg.sides().iter().copied().map(SideTag::from).collect()),
            label: Some(segment_label(names, partition, seg.sides())),
        },
        Verdict::Inconclusive => VerdictReport {
            conclusive: false,
            segment: None,
            label: None,
        },
    };
    DecisionReport {
        tool_version: TOOL_VERSION.into(),
        references: names
            .iter()
            .zip(partition.references())
            .map(|(name, r)| ReferenceEntry {
                name: name.clone(),
                epsilon: r.epsilon(),
            })
            .collect(),
        fit_tol,
        reject_tol,
        verdict,
        segments,
    }
}

#[derive(Serialize)]
pub struct SweepCellReport {
    pub eps_minus: f64,
    pub eps_plus: f64,
    pub verdict: VerdictReport,
    pub residuals: Vec<f64>,
}

#[derive(Serialize)]
pub struct SweepReport {
    pub tool_version: String,
    pub fit_tol: f64,
    pub reject_tol: f64,
    pub cells: Vec<SweepCellReport>,
}

pub fn sweep_report(cells: &[SweepCell], fit_tol: f64, reject_tol: f64) -> SweepReport {
    let names = vec!["Psi-".to_string(), "Psi+".to_string()];
    let rows = cells
        .iter()
        .map(|cell| {
            let partition =
                Partition::bell_pair(cell.eps_minus, cell.eps_plus).expect("grid validated");
            let verdict = match &cell.decision.verdict {
                Verdict::Conclusive(seg) => VerdictReport {
                    conclusive: true,
                    segment: Some(seg.sides().iter().copied().map(SideTag::from).collect()),
                    label: Some(segment_label(&names, &partition, seg.sides())),
                },
                Verdict::Inconclusive => VerdictReport {
                    conclusive: false,
                    segment: None,
                    label: None,
                },
            };
            SweepCellReport {
                eps_minus: cell.eps_minus,
                eps_plus: cell.eps_plus,
                verdict,
                residuals: cell.decision.segment_fits.iter().map(|f| f.residual).collect(),
            }
        })
        .collect();
    SweepReport {
        tool_version: TOOL_VERSION.into(),
        fit_tol,
        reject_tol,
        cells: rows,
    }
}

#[derive(Serialize)]
pub struct ReferenceCheck {
    pub name: String,
    pub solvable: bool,
    pub worst_violation: f64,
}

#[derive(Serialize)]
pub struct PovmCheckReport {
    pub tool_version: String,
    pub source: String,
    pub elements: usize,
    pub dim: usize,
    pub span_dimension: usize,
    pub informationally_complete: bool,
    pub kernel_dimension: usize,
    pub references: Vec<ReferenceCheck>,
}

pub fn reference_check(name: &str, report: &SolvabilityReport) -> ReferenceCheck {
    ReferenceCheck {
        name: name.into(),
        solvable: report.solvable,
        worst_violation: report.worst_violation,
    }
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("report serialization");
    out.push('\n');
    out
}
