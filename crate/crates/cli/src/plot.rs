//! SVG rendering of a value surface with its free boundaries.

use std::fmt::Write;

use stopctl_core::{FreeBoundaries, Region, ValueSurface};

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const MAX_CELLS: usize = 160;
const HEAT_LEVELS: usize = 12;

fn region_color(r: Region) -> &'static str {
    match r {
        Region::Stop => "#d62728",
        Region::Interior => "#2ca02c",
        Region::Action => "#1f77b4",
    }
}

fn grey(level: usize) -> String {
    let shade = 40 + (level * 200) / (HEAT_LEVELS - 1);
    format!("#{shade:02x}{shade:02x}{shade:02x}")
}

struct Frame {
    t_max: f64,
    x_lo: f64,
    x_hi: f64,
}

impl Frame {
    fn px(&self, t: f64) -> f64 {
        LEFT + t / self.t_max * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, x: f64) -> f64 {
        HEIGHT - BOTTOM - (x - self.x_lo) / (self.x_hi - self.x_lo) * (HEIGHT - TOP - BOTTOM)
    }
}

fn polyline(out: &mut String, f: &Frame, points: &[(f64, f64)], stroke: &str, dash: Option<&str>) {
    let mut start = 0;
    // Break the line wherever the boundary is undefined.
    for k in 0..=points.len() {
        if k == points.len() || points[k].1.is_nan() {
            if k - start >= 2 {
                let coords: Vec<String> =
                    points[start..k].iter().map(|&(t, x)| format!("{:.2},{:.2}", f.px(t), f.py(x))).collect();
                let dash = dash.map(|d| format!(" stroke-dasharray=\"{d}\"")).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"2\"{dash}/>",
                    coords.join(" ")
                );
            }
            start = k + 1;
        }
    }
}

/// Heat levels of `v`, shading of the three regions and the curves `a(t)`, `b(t)`.
pub fn render_svg(s: &ValueSurface, fb: &FreeBoundaries, title: &str) -> String {
    let g = &s.grid;
    let f = Frame { t_max: g.horizon, x_lo: g.x_lo, x_hi: g.x_hi };
    let (vmin, vmax) =
        s.v.as_slice().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if vmax > vmin { vmax - vmin } else { 1.0 };
    let tstep = g.nt.div_ceil(MAX_CELLS).max(1);
    let xstep = g.nx.div_ceil(MAX_CELLS).max(1);

    let mut out = String::new();
    let _ = writeln!(out, "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");

    let mut heat = String::new();
    let mut shade = String::new();
    let mut j = 0;
    while j < g.nt {
        let j1 = (j + tstep).min(g.nt);
        let mut i = 0;
        while i < g.nx {
            let i1 = (i + xstep).min(g.nx);
            let (x0, y0) = (f.px(g.t(j)), f.py(g.x(i1)));
            let (w, h) = (f.px(g.t(j1)) - x0, f.py(g.x(i)) - y0);
            let v = s.v.at(j, i);
            let level = (((v - vmin) / span) * (HEAT_LEVELS as f64 - 1.0)).round() as usize;
            let rect = format!("x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{w:.2}\" height=\"{h:.2}\"");
            let _ = writeln!(heat, "<rect {rect} fill=\"{}\"/>", grey(level.min(HEAT_LEVELS - 1)));
            let _ = writeln!(shade, "<rect {rect} fill=\"{}\"/>", region_color(s.region_at(j, i)));
            i = i1;
        }
        j = j1;
    }
    let _ = writeln!(out, "<g id=\"heat\" shape-rendering=\"crispEdges\">\n{heat}</g>");
    let _ = writeln!(out, "<g id=\"regions\" fill-opacity=\"0.3\" shape-rendering=\"crispEdges\">\n{shade}</g>");

    let a: Vec<(f64, f64)> = fb.t.iter().zip(&fb.a).map(|(&t, a)| (t, a.value().unwrap_or(f64::NAN))).collect();
    let b: Vec<(f64, f64)> = fb.t.iter().zip(&fb.b).map(|(&t, b)| (t, b.value().unwrap_or(f64::NAN))).collect();
    let _ = writeln!(out, "<g id=\"boundaries\">");
    polyline(&mut out, &f, &a, "black", None);
    polyline(&mut out, &f, &b, "black", Some("6 4"));
    let _ = writeln!(out, "</g>");

    let (x_left, x_right) = (f.px(0.0), f.px(g.horizon));
    let (y_top, y_bottom) = (f.py(g.x_hi), f.py(g.x_lo));
    let _ = writeln!(
        out,
        "<rect x=\"{x_left:.2}\" y=\"{y_top:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>",
        x_right - x_left,
        y_bottom - y_top
    );
    let _ = writeln!(out, "<g font-family=\"sans-serif\" font-size=\"12\">");
    for k in 0..=4 {
        let t = g.horizon * k as f64 / 4.0;
        let x = g.x_lo + (g.x_hi - g.x_lo) * k as f64 / 4.0;
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{t:.3}</text>",
            f.px(t),
            y_bottom + 18.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{x:.3}</text>",
            x_left - 6.0,
            f.py(x) + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">t</text>",
        (x_left + x_right) / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(out, "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\">x</text>", (y_top + y_bottom) / 2.0);

    let lx = WIDTH - RIGHT + 20.0;
    let entries = [
        (region_color(Region::Stop), "stop S"),
        (region_color(Region::Interior), "inaction C, I"),
        (region_color(Region::Action), "action M"),
    ];
    for (k, (color, label)) in entries.iter().enumerate() {
        let y = TOP + 20.0 * k as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{lx}\" y=\"{y}\" width=\"14\" height=\"14\" fill=\"{color}\" fill-opacity=\"0.5\"/>"
        );
        let _ = writeln!(out, "<text x=\"{}\" y=\"{}\">{label}</text>", lx + 20.0, y + 12.0);
    }
    let y = TOP + 70.0;
    let _ = writeln!(
        out,
        "<line x1=\"{lx}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"black\" stroke-width=\"2\"/>",
        lx + 14.0
    );
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\">a(t)</text>", lx + 20.0, y + 4.0);
    let y = y + 20.0;
    let _ = writeln!(
        out,
        "<line x1=\"{lx}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"black\" stroke-width=\"2\" stroke-dasharray=\"6 4\"/>",
        lx + 14.0
    );
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\">b(t)</text>", lx + 20.0, y + 4.0);
    let _ = writeln!(out, "<text x=\"{lx}\" y=\"{}\">v from {vmin:.3}</text>", y + 30.0);
    let _ = writeln!(out, "<text x=\"{lx}\" y=\"{}\">to {vmax:.3}</text>", y + 46.0);
    let _ = writeln!(out, "</g>\n</svg>");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
