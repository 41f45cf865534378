//! Figure-agnostic plot data and a minimal static SVG renderer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::table::ResultTable;
use crate::error::{GvrError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Horizontal marker such as a target return.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HLine {
    pub label: String,
    pub y: f64,
}

/// Vertical marker such as a computed ε threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VLine {
    pub label: String,
    pub x: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub figure: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub hlines: Vec<HLine>,
    pub vlines: Vec<VLine>,
}

pub const FIGURES: &[&str] = &[
    "verify_closed_form",
    "transition_graph",
    "epsilon_sweep",
    "delta_q_verification",
    "stn_occupancy",
    "gvr_scales",
    "bounds_table",
];

fn text_col<'a>(t: &'a ResultTable, row: &'a [super::table::Cell], name: &str) -> &'a str {
    t.column(name).and_then(|k| row[k].as_str()).unwrap_or("")
}

fn num_col(t: &ResultTable, row: &[super::table::Cell], name: &str) -> f64 {
    t.column(name).and_then(|k| row[k].as_f64()).unwrap_or(f64::NAN)
}

/// Groups rows into labelled (x, y) series, keeping first-seen label order.
fn grouped(t: &ResultTable, label: impl Fn(&[super::table::Cell]) -> Option<String>, x: &str, y: &str) -> Vec<Series> {
    let mut order = Vec::new();
    let mut map: BTreeMap<String, Series> = BTreeMap::new();
    for r in &t.rows {
        let Some(l) = label(r) else { continue };
        let s = map.entry(l.clone()).or_insert_with(|| {
            order.push(l.clone());
            Series { label: l.clone(), x: Vec::new(), y: Vec::new() }
        });
        s.x.push(num_col(t, r, x));
        s.y.push(num_col(t, r, y));
    }
    order.into_iter().filter_map(|l| map.remove(&l)).collect()
}

/// Extracts the series a figure needs from a result table; an empty table gives empty series.
pub fn emit_plot_data(t: &ResultTable, figure_id: &str) -> Result<PlotData> {
    let mut p = PlotData { figure: figure_id.into(), ..PlotData::default() };
    match figure_id {
        "stn_occupancy" => {
            p.x_label = "epsilon".into();
            p.y_label = "median ratio".into();
            let variants: Vec<String> = {
                let mut v: Vec<String> = Vec::new();
                for r in &t.rows {
                    let s = text_col(t, r, "variant").to_string();
                    if !v.contains(&s) {
                        v.push(s);
                    }
                }
                v
            };
            let single = variants.len() <= 1;
            for (col, name) in [("r_stn_opt", "optimal"), ("r_stn_non_opt", "non_optimal")] {
                p.series.extend(grouped(
                    t,
                    |r| {
                        (text_col(t, r, "matrix") == "median").then(|| {
                            if single {
                                name.to_string()
                            } else {
                                format!("{} {name}", text_col(t, r, "variant"))
                            }
                        })
                    },
                    "epsilon",
                    col,
                ));
            }
        }
        "gvr_scales" => {
            p.x_label = "joint actions".into();
            p.y_label = "median final test return".into();
            p.series = grouped(t, |r| (text_col(t, r, "seed") == "median").then(|| "GVR".into()), "size", "final_test_return");
            if let Some(target) = t.numbers("target").first() {
                p.hlines.push(HLine { label: "target".into(), y: *target });
            }
        }
        "epsilon_sweep" => {
            p.x_label = "epsilon".into();
            p.y_label = "STN count".into();
            p.series = grouped(t, |r| (text_col(t, r, "row") == "grid").then(|| "STNs".into()), "epsilon", "stn_count");
            for r in &t.rows {
                if text_col(t, r, "row") == "threshold" {
                    p.vlines.push(VLine { label: "single STN".into(), x: num_col(t, r, "epsilon") });
                }
            }
        }
        "delta_q_verification" => {
            p.x_label = "seed".into();
            p.y_label = "delta Q".into();
            p.series = grouped(
                t,
                |r| (text_col(t, r, "source") == "monte_carlo").then(|| format!("matrix {}", text_col(t, r, "matrix"))),
                "seed",
                "delta_q",
            );
            for r in &t.rows {
                let s = text_col(t, r, "source");
                if s != "monte_carlo" && !p.hlines.iter().any(|h| h.label == s) {
                    p.hlines.push(HLine { label: s.into(), y: num_col(t, r, "delta_q") });
                }
            }
        }
        "bounds_table" => {
            p.x_label = "joint actions".into();
            p.y_label = "w0".into();
            p.series = grouped(t, |_| Some("w0".into()), "size", "w0");
        }
        "verify_closed_form" => {
            p.x_label = "calculated Q".into();
            p.y_label = "learned Q".into();
            p.series = grouped(t, |_| Some("LVD".into()), "calc_q", "lvd_q");
            p.series.extend(grouped(t, |_| Some("MVD".into()), "calc_q", "mvd_q"));
        }
        "transition_graph" => {
            p.x_label = "epsilon".into();
            p.y_label = "STN count".into();
            let mut counts: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
            for r in &t.rows {
                let e = num_col(t, r, "epsilon");
                let c = counts.entry(e.to_bits()).or_insert((e, 0.0));
                c.1 += num_col(t, r, "is_stn");
            }
            if !counts.is_empty() {
                let mut v: Vec<(f64, f64)> = counts.into_values().collect();
                v.sort_by(|a, b| a.0.total_cmp(&b.0));
                p.series.push(Series { label: "STNs".into(), x: v.iter().map(|c| c.0).collect(), y: v.iter().map(|c| c.1).collect() });
            }
        }
        other => return Err(GvrError::Parameter(format!("unknown figure id '{other}'"))),
    }
    Ok(p)
}

const PALETTE: &[&str] = &["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Static line chart; markers at every point, dashed reference lines.
pub fn render_svg(p: &PlotData) -> String {
    let (w, h, l, r, t, b) = (640.0, 400.0, 60.0, 150.0, 30.0, 50.0);
    let pts = p.series.iter().flat_map(|s| s.x.iter().zip(&s.y)).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (&x, &y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    for hl in &p.hlines {
        y0 = y0.min(hl.y);
        y1 = y1.max(hl.y);
    }
    for vl in &p.vlines {
        x0 = x0.min(vl.x);
        x1 = x1.max(vl.x);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        (x0, x1) = (x0 - 0.5, x1 + 0.5);
    }
    if y1 - y0 < 1e-12 {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let px = |x: f64| l + (x - x0) / (x1 - x0) * (w - l - r);
    let py = |y: f64| h - b - (y - y0) / (y1 - y0) * (h - t - b);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    s += &format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n");
    s += &format!(
        "<line x1=\"{l}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/><line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - b,
        w - r,
        h - b,
        h - b
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        s += &format!("<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{:.3}</text>\n", px(fx), h - b + 15.0, fx);
        s += &format!("<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{:.3}</text>\n", l - 5.0, py(fy) + 4.0, fy);
    }
    s += &format!("<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", (l + w - r) / 2.0, h - 10.0, esc(&p.x_label));
    s += &format!(
        "<text x=\"15\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {:.1})\">{}</text>\n",
        (t + h - b) / 2.0,
        (t + h - b) / 2.0,
        esc(&p.y_label)
    );
    for hl in &p.hlines {
        s += &format!(
            "<line x1=\"{l}\" y1=\"{0:.1}\" x2=\"{1}\" y2=\"{0:.1}\" stroke=\"red\" stroke-dasharray=\"4 3\"/><text x=\"{2}\" y=\"{0:.1}\" fill=\"red\">{3}</text>\n",
            py(hl.y),
            w - r,
            w - r + 4.0,
            esc(&hl.label)
        );
    }
    for vl in &p.vlines {
        s += &format!(
            "<line x1=\"{0:.1}\" y1=\"{t}\" x2=\"{0:.1}\" y2=\"{1}\" stroke=\"red\" stroke-dasharray=\"4 3\"/><text x=\"{0:.1}\" y=\"{2}\" fill=\"red\">{3}</text>\n",
            px(vl.x),
            h - b,
            t - 5.0,
            esc(&vl.label)
        );
    }
    for (i, se) in p.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = se
            .x
            .iter()
            .zip(&se.y)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.1},{:.1}", px(x), py(y)))
            .collect();
        s += &format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n", path.join(" "));
        for pt in &path {
            let (cx, cy) = pt.split_once(',').expect("point");
            s += &format!("<circle cx=\"{cx}\" cy=\"{cy}\" r=\"2.5\" fill=\"{color}\"/>\n");
        }
        let ly = t + 15.0 * i as f64;
        s += &format!(
            "<rect x=\"{}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/><text x=\"{}\" y=\"{:.1}\">{}</text>\n",
            w - r + 10.0,
            ly,
            w - r + 24.0,
            ly + 9.0,
            esc(&se.label)
        );
    }
    s += "</svg>\n";
    s
}
