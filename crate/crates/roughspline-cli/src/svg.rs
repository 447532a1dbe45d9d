//! Hand-rolled log-log SVG scatter for convergence reports: measured points,
//! a solid line at the fitted slope drawn through its own fit points, and a
//! dashed reference line at the predicted rate. No plotting dependency.

use roughspline::StudyReport;
use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 520.0;
const ML: f64 = 80.0;
const MR: f64 = 30.0;
const MT: f64 = 42.0;
const MB: f64 = 64.0;

pub struct RatePlot {
    /// Every measured (h, l2_error) pair with both entries finite positive.
    pub points: Vec<(f64, f64)>,
    /// The subset the rate fit used.
    pub fit_points: Vec<(f64, f64)>,
    pub fitted_slope: Option<f64>,
    pub reference_slope: f64,
}

impl RatePlot {
    pub fn from_report(report: &StudyReport) -> Self {
        let points = report
            .rows
            .iter()
            .filter_map(|r| match (r.h, r.l2_error) {
                (Some(h), Some(e)) if h > 0.0 && e > 0.0 && h.is_finite() && e.is_finite() => {
                    Some((h, e))
                }
                _ => None,
            })
            .collect();
        RatePlot {
            points,
            fit_points: report.fit_points(),
            fitted_slope: report.fitted_slope,
            reference_slope: report.predicted_rate,
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Integer decades inside [lo, hi], for tick placement in log10 coordinates.
fn decades(lo: f64, hi: f64) -> Vec<i32> {
    let a = lo.ceil() as i32;
    let b = hi.floor() as i32;
    (a..=b).collect()
}

pub fn render(plot: &RatePlot) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"13\">"
    )
    .unwrap();
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    if plot.points.is_empty() {
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">no positive data to plot</text>\n</svg>",
            W / 2.0,
            H / 2.0
        )
        .unwrap();
        return s;
    }

    let lx: Vec<f64> = plot.points.iter().map(|p| p.0.log10()).collect();
    let ly: Vec<f64> = plot.points.iter().map(|p| p.1.log10()).collect();
    let pad = |lo: f64, hi: f64| {
        let span = hi - lo;
        if span < 1e-9 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo - 0.06 * span, hi + 0.06 * span)
        }
    };
    let (x0, x1) = pad(
        lx.iter().cloned().fold(f64::INFINITY, f64::min),
        lx.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = pad(
        ly.iter().cloned().fold(f64::INFINITY, f64::min),
        ly.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let px = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let py = |y: f64| MT + (y1 - y) / (y1 - y0) * (H - MT - MB);

    // Grid and ticks at integer decades; plain range labels when the span
    // contains none.
    let x_ticks = decades(x0, x1);
    let y_ticks = decades(y0, y1);
    for &p in &x_ticks {
        let x = px(p as f64);
        writeln!(
            s,
            "<line x1=\"{x:.1}\" y1=\"{MT}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>",
            H - MB
        )
        .unwrap();
        writeln!(
            s,
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">1e{p}</text>",
            H - MB + 18.0
        )
        .unwrap();
    }
    if x_ticks.is_empty() {
        for v in [x0, x1] {
            writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.2e}</text>",
                px(v),
                H - MB + 18.0,
                10f64.powf(v)
            )
            .unwrap();
        }
    }
    for &p in &y_ticks {
        let y = py(p as f64);
        writeln!(
            s,
            "<line x1=\"{ML}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>",
            W - MR
        )
        .unwrap();
        writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{p}</text>",
            ML - 8.0,
            y + 4.0
        )
        .unwrap();
    }
    if y_ticks.is_empty() {
        for v in [y0, y1] {
            writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{:.2e}</text>",
                ML - 8.0,
                py(v) + 4.0,
                10f64.powf(v)
            )
            .unwrap();
        }
    }

    // Frame, axis labels, clip region for the lines.
    writeln!(
        s,
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"black\"/>",
        W - ML - MR,
        H - MT - MB
    )
    .unwrap();
    writeln!(
        s,
        "<clipPath id=\"plot\"><rect x=\"{ML}\" y=\"{MT}\" width=\"{:.1}\" height=\"{:.1}\"/></clipPath>",
        W - ML - MR,
        H - MT - MB
    )
    .unwrap();
    writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">fill distance h</text>",
        ML + (W - ML - MR) / 2.0,
        H - 16.0
    )
    .unwrap();
    writeln!(
        s,
        "<text x=\"20\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {:.1})\">L2 error</text>",
        MT + (H - MT - MB) / 2.0,
        MT + (H - MT - MB) / 2.0
    )
    .unwrap();

    // Fitted line through the centroid of its own points, in log space.
    let mut legend_fit = String::from("no fitted slope");
    if let (Some(slope), true) = (plot.fitted_slope, plot.fit_points.len() >= 2) {
        let fx: Vec<f64> = plot.fit_points.iter().map(|p| p.0.log10()).collect();
        let fy: Vec<f64> = plot.fit_points.iter().map(|p| p.1.log10()).collect();
        let b = mean(&fy) - slope * mean(&fx);
        writeln!(
            s,
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#1f6fb2\" \
             stroke-width=\"2\" clip-path=\"url(#plot)\"/>",
            px(x0),
            py(slope * x0 + b),
            px(x1),
            py(slope * x1 + b)
        )
        .unwrap();
        legend_fit = format!("fitted slope {slope:.3}");
    }

    // Reference line at the predicted rate, shifted a quarter decade up so
    // the two lines separate visually.
    let r = plot.reference_slope;
    let rb = mean(&ly) + 0.25 - r * mean(&lx);
    writeln!(
        s,
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#666\" \
         stroke-width=\"1.5\" stroke-dasharray=\"6 4\" clip-path=\"url(#plot)\"/>",
        px(x0),
        py(r * x0 + rb),
        px(x1),
        py(r * x1 + rb)
    )
    .unwrap();

    // Points: filled when the fit used them, hollow otherwise.
    let in_fit = |p: &(f64, f64)| {
        plot.fit_points
            .iter()
            .any(|q| q.0.to_bits() == p.0.to_bits() && q.1.to_bits() == p.1.to_bits())
    };
    for p in &plot.points {
        let (cx, cy) = (px(p.0.log10()), py(p.1.log10()));
        if in_fit(p) {
            writeln!(
                s,
                "<circle cx=\"{cx:.1}\" cy=\"{cy:.1}\" r=\"4\" fill=\"#1f6fb2\"/>"
            )
            .unwrap();
        } else {
            writeln!(
                s,
                "<circle cx=\"{cx:.1}\" cy=\"{cy:.1}\" r=\"4\" fill=\"white\" stroke=\"#1f6fb2\"/>"
            )
            .unwrap();
        }
    }

    // Title line doubling as the legend.
    writeln!(
        s,
        "<text x=\"{ML}\" y=\"24\">{legend_fit}; dashed reference slope {r:.3}</text>"
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}
