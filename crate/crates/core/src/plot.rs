//! Minimal self-contained SVG charts: one bar chart per fusion method and
//! one membership-function line chart per feature.

use crate::fuzzy::{LinguisticImportance, TriangularMF};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 70.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(title: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        tx = WIDTH / 2.0,
        title = escape(title),
    )
}

fn axes(y_max: f64) -> String {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    let mut s = format!(
        concat!(
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n",
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
        ),
        x0 = x0,
        x1 = x1,
        y0 = y0,
        y1 = y1,
    );
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let y = y0 - (y0 - y1) * i as f64 / 4.0;
        s.push_str(&format!(
            concat!(
                "<line x1=\"{xa}\" y1=\"{y}\" x2=\"{x0}\" y2=\"{y}\" stroke=\"black\"/>\n",
                "<text x=\"{xt}\" y=\"{yt}\" font-size=\"11\" text-anchor=\"end\">{v:.2}</text>\n"
            ),
            xa = x0 - 5.0,
            x0 = x0,
            y = y,
            xt = x0 - 8.0,
            yt = y + 4.0,
            v = v,
        ));
    }
    s
}

/// Bar chart of one fused coefficient per feature, y-axis anchored at 0.
pub fn bar_chart_svg(title: &str, labels: &[String], values: &[f64]) -> String {
    assert_eq!(labels.len(), values.len());
    let y_max = values.iter().copied().fold(1.0f64, f64::max);
    let mut svg = header(title);
    svg.push_str(&axes(y_max));

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let n = labels.len().max(1);
    let slot = plot_w / n as f64;
    let bar_w = slot * 0.6;
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let h = (v.max(0.0) / y_max) * plot_h;
        let x = MARGIN_LEFT + slot * i as f64 + (slot - bar_w) / 2.0;
        let y = HEIGHT - MARGIN_BOTTOM - h;
        let cx = x + bar_w / 2.0;
        svg.push_str(&format!(
            concat!(
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{bw:.2}\" height=\"{h:.2}\" ",
                "fill=\"#4878a8\"/>\n",
                "<text x=\"{cx:.2}\" y=\"{vy:.2}\" font-size=\"11\" text-anchor=\"middle\">{v:.4}</text>\n",
                "<text x=\"{cx:.2}\" y=\"{ly:.2}\" font-size=\"11\" text-anchor=\"end\" ",
                "transform=\"rotate(-30 {cx:.2} {ly:.2})\">{label}</text>\n"
            ),
            x = x,
            y = y,
            bw = bar_w,
            h = h,
            cx = cx,
            vy = y - 5.0,
            v = v,
            ly = HEIGHT - MARGIN_BOTTOM + 16.0,
            label = escape(label),
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn mf_polyline(mf: &TriangularMF, color: &str) -> String {
    let to_x = |v: f64| MARGIN_LEFT + v * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT);
    let to_y = |m: f64| HEIGHT - MARGIN_BOTTOM - m * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM);
    let points = [(mf.a, 0.0), (mf.b, 1.0), (mf.c, 0.0)]
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", to_x(x), to_y(y)))
        .collect::<Vec<_>>()
        .join(" ");
    format!("<polyline points=\"{points}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n")
}

/// The three labelled membership curves of one feature on [0, 1].
pub fn mf_chart_svg(title: &str, mfs: &LinguisticImportance) -> String {
    let mut svg = header(title);
    svg.push_str(&axes(1.0));
    let terms = [
        ("low", &mfs.low, "#4878a8"),
        ("moderate", &mfs.moderate, "#e08214"),
        ("high", &mfs.high, "#a83232"),
    ];
    for (i, (name, mf, color)) in terms.iter().enumerate() {
        svg.push_str(&mf_polyline(mf, color));
        let lx = MARGIN_LEFT + 10.0;
        let ly = MARGIN_TOP + 14.0 * (i as f64 + 1.0);
        svg.push_str(&format!(
            concat!(
                "<rect x=\"{lx}\" y=\"{ry:.2}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n",
                "<text x=\"{tx}\" y=\"{ty:.2}\" font-size=\"11\">{name}</text>\n"
            ),
            lx = lx,
            ry = ly - 9.0,
            color = color,
            tx = lx + 14.0,
            ty = ly,
            name = name,
        ));
    }
    // x-axis labels at 0 and 1
    svg.push_str(&format!(
        concat!(
            "<text x=\"{x0}\" y=\"{y}\" font-size=\"11\" text-anchor=\"middle\">0.0</text>\n",
            "<text x=\"{x1}\" y=\"{y}\" font-size=\"11\" text-anchor=\"middle\">1.0</text>\n"
        ),
        x0 = MARGIN_LEFT,
        x1 = WIDTH - MARGIN_RIGHT,
        y = HEIGHT - MARGIN_BOTTOM + 16.0,
    ));
    svg.push_str("</svg>\n");
    svg
}
