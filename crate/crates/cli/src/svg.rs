//! Static SVG rendering of threshold-sweep results: one panel per grid
//! cell showing the unit square of (F(Psi-), F(Psi+)) with dashed
//! threshold lines and the verdict quadrant shaded and dotted.
//!
//! Plain string assembly with fixed float formatting keeps the output
//! byte-stable across runs.

use std::fmt::Write;

use memberscope_core::membership::{Side, SweepCell, Verdict};

const PANEL: f64 = 170.0;
const MARGIN: f64 = 34.0;
const GAP: f64 = 26.0;

pub fn render_sweep(cells: &[SweepCell], columns: usize) -> String {
    let columns = columns.max(1);
    let rows = cells.len().div_ceil(columns);
    let width = MARGIN * 2.0 + columns as f64 * PANEL + (columns.saturating_sub(1)) as f64 * GAP;
    let height = MARGIN * 2.0 + rows as f64 * (PANEL + GAP);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    out.push_str("<style>text{font-family:monospace;font-size:10px;}</style>\n");
    out.push_str("<defs><pattern id=\"dots\" width=\"7\" height=\"7\" patternUnits=\"userSpaceOnUse\"><circle cx=\"3\" cy=\"3\" r=\"1.2\" fill=\"#333\"/></pattern></defs>\n");

    for (idx, cell) in cells.iter().enumerate() {
        let col = idx % columns;
        let row = idx / columns;
        let x0 = MARGIN + col as f64 * (PANEL + GAP);
        let y0 = MARGIN + row as f64 * (PANEL + GAP);
        render_panel(&mut out, cell, x0, y0);
    }
    out.push_str("</svg>\n");
    out
}

fn render_panel(out: &mut String, cell: &SweepCell, x0: f64, y0: f64) {
    // panel coordinates: F(Psi-) rightward, F(Psi+) upward
    let to_x = |f: f64| x0 + f * PANEL;
    let to_y = |f: f64| y0 + (1.0 - f) * PANEL;
    let em = cell.eps_minus;
    let ep = cell.eps_plus;

    // quadrant fills (light) so thresholds read as a partition
    let quads = [
        (Side::Below, Side::Below, "#f4f4f4"),
        (Side::AtLeast, Side::Below, "#e8eef8"),
        (Side::Below, Side::AtLeast, "#f8f0e8"),
        (Side::AtLeast, Side::AtLeast, "#eef8e8"),
    ];
    for (sm, sp, fill) in quads {
        let (qx, qw) = match sm {
            Side::Below => (to_x(0.0), em * PANEL),
            Side::AtLeast => (to_x(em), (1.0 - em) * PANEL),
        };
        let (qy, qh) = match sp {
            Side::Below => (to_y(ep), ep * PANEL),
            Side::AtLeast => (to_y(1.0), (1.0 - ep) * PANEL),
        };
        let _ = writeln!(
            out,
            r##"<rect x="{qx:.2}" y="{qy:.2}" width="{qw:.2}" height="{qh:.2}" fill="{fill}"/>"##
        );
        if let Verdict::Conclusive(seg) = &cell.decision.verdict {
            if seg.sides() == [sm, sp] {
                let _ = writeln!(
                    out,
                    r##"<rect x="{qx:.2}" y="{qy:.2}" width="{qw:.2}" height="{qh:.2}" fill="url(#dots)"/>"##
                );
            }
        }
    }

    // frame
    let _ = writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{PANEL:.2}" height="{PANEL:.2}" fill="none" stroke="#222"/>"##,
        to_x(0.0),
        to_y(1.0)
    );
    // dashed thresholds
    let _ = writeln!(
        out,
        r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#555" stroke-dasharray="5,4"/>"##,
        to_y(1.0),
        to_y(0.0),
        x = to_x(em)
    );
    let _ = writeln!(
        out,
        r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#555" stroke-dasharray="5,4"/>"##,
        to_x(0.0),
        to_x(1.0),
        y = to_y(ep)
    );
    // labels
    let verdict = match &cell.decision.verdict {
        Verdict::Conclusive(_) => "conclusive",
        Verdict::Inconclusive => "inconclusive",
    };
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}">e-={em:.2} e+={ep:.2} {verdict}</text>"#,
        to_x(0.0),
        to_y(1.0) - 6.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}">F(Psi-)</text>"#,
        to_x(0.32),
        to_y(0.0) + 14.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" transform="rotate(-90 {:.2} {:.2})">F(Psi+)</text>"#,
        to_x(0.0) - 6.0,
        to_y(0.32),
        to_x(0.0) - 6.0,
        to_y(0.32)
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use memberscope_core::membership::{sweep, DecisionPolicy};
    use memberscope_core::povm::{povm_from_settings, settings, simulate_counts};
    use memberscope_core::states::werner_state;

    #[test]
    fn renders_well_formed_svg() {
        let povm = povm_from_settings(&settings::three_mub()).unwrap();
        let rho = werner_state(0.9).unwrap();
        let record = simulate_counts(&rho, &settings::three_mub(), 0, 1);
        let cells = sweep(&record, &povm, &[0.5], &[0.3, 0.7], &DecisionPolicy::default()).unwrap();
        let svg = render_sweep(&cells, 2);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        // 4 quadrants + dotted verdict + frame per conclusive panel
        assert_eq!(svg.matches("<rect").count(), 2 * 6);
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("url(#dots)"));
        // byte stability
        assert_eq!(svg, render_sweep(&cells, 2));
    }
}
