//! Grouped bar chart of single-view accuracies, one panel per dataset.

use std::fmt::Write as _;

use super::CellResult;
use crate::datasets::DatasetKind;
use crate::stitch::ViewConfiguration;

/// Bars drawn in every panel, in order.
pub const CHART_VIEWS: [ViewConfiguration; 4] = [
    ViewConfiguration::LeftView,
    ViewConfiguration::RightView,
    ViewConfiguration::RandomView,
    ViewConfiguration::MultiView,
];

const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

/// A named bar series, e.g. one model back-end.
#[derive(Debug, Clone)]
pub struct Series<'a> {
    pub name: String,
    pub cells: &'a [CellResult],
}

fn lookup(cells: &[CellResult], dataset: DatasetKind, view: ViewConfiguration) -> Option<&CellResult> {
    cells.iter().find(|c| c.dataset == dataset && c.configuration == view && !c.prompt_on)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders prompt-off L-V/R-V/Ra-V/M-V cells. Missing bars are left blank.
pub fn render_svg(series: &[Series<'_>]) -> String {
    let datasets: Vec<DatasetKind> = DatasetKind::ALL
        .into_iter()
        .filter(|&d| series.iter().any(|s| s.cells.iter().any(|c| c.dataset == d)))
        .collect();
    let panel_w = 260.0;
    let panel_h = 220.0;
    let margin = 40.0;
    let width = margin + datasets.len().max(1) as f64 * (panel_w + margin);
    let height = panel_h + 2.0 * margin + 30.0;
    let group_w = (panel_w - 20.0) / CHART_VIEWS.len() as f64;
    let bar_w = (group_w - 8.0) / series.len().max(1) as f64;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (p, &dataset) in datasets.iter().enumerate() {
        let x0 = margin + p as f64 * (panel_w + margin);
        let y0 = margin;
        let base = y0 + panel_h;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
            x0 + panel_w / 2.0,
            y0 - 12.0,
            escape(dataset.display())
        );
        let _ = writeln!(out, r#"<line x1="{x0:.1}" y1="{base:.1}" x2="{:.1}" y2="{base:.1}" stroke="black"/>"#, x0 + panel_w);
        let _ = writeln!(out, r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x0:.1}" y2="{base:.1}" stroke="black"/>"#);
        for tick in [0u32, 25, 50, 75, 100] {
            let y = base - panel_h * f64::from(tick) / 100.0;
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{tick}</text>"#, x0 - 4.0, y + 4.0);
        }
        for (g, &view) in CHART_VIEWS.iter().enumerate() {
            let gx = x0 + 10.0 + g as f64 * group_w;
            for (s, ser) in series.iter().enumerate() {
                let Some(cell) = lookup(ser.cells, dataset, view) else { continue };
                let h = panel_h * cell.hundredths() as f64 / 10_000.0;
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{}"><title>{} {} {}</title></rect>"#,
                    gx + 4.0 + s as f64 * bar_w,
                    base - h,
                    bar_w,
                    PALETTE[s % PALETTE.len()],
                    escape(&ser.name),
                    view.display(),
                    cell.formatted()
                );
            }
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                gx + group_w / 2.0,
                base + 14.0,
                view.display()
            );
        }
    }
    for (s, ser) in series.iter().enumerate() {
        let lx = margin + s as f64 * 160.0;
        let ly = height - 16.0;
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{ly:.1}">{}</text>"#,
            ly - 9.0,
            PALETTE[s % PALETTE.len()],
            lx + 14.0,
            escape(&ser.name)
        );
    }
    out.push_str("</svg>\n");
    out
}
