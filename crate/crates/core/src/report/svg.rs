//! Minimal static SVG charts. Output depends only on the inputs, with every
//! number printed at fixed precision, so reruns are byte-identical.

use std::fmt::Write;

const FONT: &str = "font-family=\"sans-serif\" font-size=\"11\"";
const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(width: f64, height: f64, title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
    )
    .unwrap();
    writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>").unwrap();
    writeln!(
        s,
        "<text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>",
        width / 2.0,
        esc(title)
    )
    .unwrap();
    s
}

/// Blue (-1) through white (0) to red (+1).
fn diverging(v: f64) -> String {
    let t = v.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Square heatmap of values in [-1, 1] with printed cell values.
pub fn heatmap(labels: &[String], values: &[Vec<Option<f64>>], title: &str) -> String {
    let n = labels.len();
    let (cell, left, top) = (70.0, 90.0, 40.0);
    let mut s = open(left + cell * n as f64 + 20.0, top + cell * n as f64 + 40.0, title);
    for (i, row) in values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let (x, y) = (left + cell * j as f64, top + cell * i as f64);
            let (fill, text) = match v {
                Some(v) => (diverging(*v), format!("{v:.2}")),
                None => ("#dddddd".to_string(), "n/a".to_string()),
            };
            writeln!(s, "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell:.1}\" height=\"{cell:.1}\" fill=\"{fill}\" stroke=\"white\"/>").unwrap();
            writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" {FONT}>{text}</text>",
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            )
            .unwrap();
        }
    }
    for (i, l) in labels.iter().enumerate() {
        let c = cell * i as f64 + cell / 2.0;
        writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" {FONT}>{}</text>", left - 6.0, top + c + 4.0, esc(l)).unwrap();
        writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" {FONT}>{}</text>",
            left + c,
            top + cell * n as f64 + 16.0,
            esc(l)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Vertical bars, one cluster per group and one colour per series.
/// Missing values leave a gap.
pub fn grouped_bars(groups: &[String], series: &[(String, Vec<Option<f64>>)], title: &str) -> String {
    let (left, top, plot_h, group_w) = (50.0, 40.0, 220.0, 30.0 + 22.0 * series.len() as f64);
    let width = left + group_w * groups.len() as f64 + 130.0;
    let mut s = open(width, top + plot_h + 50.0, title);
    let max = series
        .iter()
        .flat_map(|(_, v)| v.iter().flatten())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    let scale = |v: f64| v / max * plot_h;
    let base = top + plot_h;
    writeln!(s, "<line x1=\"{left:.1}\" y1=\"{base:.1}\" x2=\"{:.1}\" y2=\"{base:.1}\" stroke=\"black\"/>", width - 130.0).unwrap();
    writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" {FONT}>{max:.3}</text>", left - 4.0, top + 4.0).unwrap();
    writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" {FONT}>0</text>", left - 4.0, base + 4.0).unwrap();
    for (g, name) in groups.iter().enumerate() {
        let gx = left + group_w * g as f64 + 15.0;
        for (k, (_, vals)) in series.iter().enumerate() {
            if let Some(v) = vals.get(g).copied().flatten() {
                let h = scale(v.max(0.0));
                writeln!(
                    s,
                    "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"18.0\" height=\"{h:.1}\" fill=\"{}\"><title>{v:.4}</title></rect>",
                    gx + 22.0 * k as f64,
                    base - h,
                    PALETTE[k % PALETTE.len()]
                )
                .unwrap();
            }
        }
        writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" {FONT}>{}</text>",
            gx + 11.0 * series.len() as f64,
            base + 16.0,
            esc(name)
        )
        .unwrap();
    }
    for (k, (name, _)) in series.iter().enumerate() {
        let y = top + 16.0 * k as f64;
        let x = width - 120.0;
        writeln!(s, "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/>", PALETTE[k % PALETTE.len()]).unwrap();
        writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" {FONT}>{}</text>", x + 14.0, y + 9.0, esc(name)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Horizontal bars in the given order, longest scaled to the full width.
pub fn horizontal_bars(labels: &[String], values: &[f64], title: &str) -> String {
    let (left, top, row_h, plot_w) = (190.0, 40.0, 20.0, 320.0);
    let mut s = open(left + plot_w + 80.0, top + row_h * labels.len() as f64 + 20.0, title);
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    for (i, (l, v)) in labels.iter().zip(values).enumerate() {
        let y = top + row_h * i as f64;
        let w = v.abs() / max * plot_w;
        writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" {FONT}>{}</text>", left - 6.0, y + 13.0, esc(l)).unwrap();
        writeln!(s, "<rect x=\"{left:.1}\" y=\"{:.1}\" width=\"{w:.1}\" height=\"{:.1}\" fill=\"{}\"/>", y + 3.0, row_h - 6.0, PALETTE[0]).unwrap();
        writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" {FONT}>{v:.4}</text>", left + w + 4.0, y + 13.0).unwrap();
    }
    s.push_str("</svg>\n");
    s
}
