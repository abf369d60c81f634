//! Static SVG rendering: polyline charts and space-time heatmaps.
//!
//! Everything is emitted with fixed-precision formatting so that two runs on
//! identical data produce byte-identical files.  No styling is left to the
//! viewer: backgrounds, axes, and colors are all explicit.

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const SERIES_COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

struct AxisMap {
    min: f64,
    max: f64,
    lo_px: f64,
    hi_px: f64,
}

impl AxisMap {
    fn new(min: f64, max: f64, lo_px: f64, hi_px: f64) -> Self {
        let (min, max) = if (max - min).abs() < 1e-300 {
            (min - 1.0, max + 1.0)
        } else {
            (min, max)
        };
        Self {
            min,
            max,
            lo_px,
            hi_px,
        }
    }

    fn px(&self, v: f64) -> f64 {
        self.lo_px + (v - self.min) / (self.max - self.min) * (self.hi_px - self.lo_px)
    }
}

fn open_svg(out: &mut String, title: &str) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         fill=\"#ffffff\"/>\n<text x=\"{:.2}\" y=\"24\" font-family=\"monospace\" \
         font-size=\"15\" fill=\"#222222\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        esc(title)
    ));
}

fn axes(out: &mut String, x: &AxisMap, y: &AxisMap, x_label: &str, y_label: &str) {
    out.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{:.2}\" height=\"{:.2}\" \
         fill=\"none\" stroke=\"#333333\"/>\n",
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    ));
    for i in 0..5 {
        let xv = x.min + (x.max - x.min) * i as f64 / 4.0;
        let xp = x.px(xv);
        out.push_str(&format!(
            "<line x1=\"{xp:.2}\" y1=\"{:.2}\" x2=\"{xp:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>\n\
             <text x=\"{xp:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" \
             fill=\"#444444\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_T,
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 16.0,
            fmt_tick(xv)
        ));
        let yv = y.min + (y.max - y.min) * i as f64 / 4.0;
        let yp = y.px(yv);
        out.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{yp:.2}\" x2=\"{:.2}\" y2=\"{yp:.2}\" \
             stroke=\"#dddddd\"/>\n<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" \
             font-size=\"11\" fill=\"#444444\" text-anchor=\"end\">{}</text>\n",
            WIDTH - MARGIN_R,
            MARGIN_L - 6.0,
            yp + 4.0,
            fmt_tick(yv)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\" \
         fill=\"#222222\" text-anchor=\"middle\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 12.0,
        esc(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\" fill=\"#222222\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">{}</text>\n",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        esc(y_label)
    ));
}

/// Renders labelled `(x, y)` series as polylines on linear axes.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for (_, pts) in series {
        for &(x, y) in pts {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    if !xmin.is_finite() {
        (xmin, xmax, ymin, ymax) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = 0.05 * (ymax - ymin);
    let x = AxisMap::new(xmin, xmax, MARGIN_L, WIDTH - MARGIN_R);
    let y = AxisMap::new(ymin - pad, ymax + pad, HEIGHT - MARGIN_B, MARGIN_T);

    let mut out = String::new();
    open_svg(&mut out, title);
    axes(&mut out, &x, &y, x_label, y_label);
    for (s, (label, pts)) in series.iter().enumerate() {
        let color = SERIES_COLORS[s % SERIES_COLORS.len()];
        let mut coords = String::new();
        for &(px, py) in pts {
            coords.push_str(&format!("{:.2},{:.2} ", x.px(px), y.px(py)));
        }
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            coords.trim_end()
        ));
        let ly = MARGIN_T + 16.0 + 16.0 * s as f64;
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" \
             font-size=\"11\" fill=\"#222222\">{}</text>\n",
            WIDTH - MARGIN_R - 150.0,
            WIDTH - MARGIN_R - 126.0,
            WIDTH - MARGIN_R - 120.0,
            ly + 4.0,
            esc(label)
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Fixed 16-step diverging palette (blue → near-white → red), symmetric
/// about zero.
fn palette() -> [String; 16] {
    let blue = (0x21u32, 0x66u32, 0xacu32);
    let white = (0xf7u32, 0xf7u32, 0xf7u32);
    let red = (0xb2u32, 0x18u32, 0x2bu32);
    let mix = |a: (u32, u32, u32), b: (u32, u32, u32), num: u32, den: u32| {
        // integer blend; channels may move in either direction
        let ch = |x: u32, y: u32| {
            if y >= x {
                x + (y - x) * num / den
            } else {
                x - (x - y) * num / den
            }
        };
        format!("#{:02x}{:02x}{:02x}", ch(a.0, b.0), ch(a.1, b.1), ch(a.2, b.2))
    };
    // Mirror-symmetric: the two middle entries are white tinted toward each
    // endpoint, so all sixteen colors stay distinct.
    core::array::from_fn(|i| {
        if i < 8 {
            mix(blue, white, i as u32, 8)
        } else {
            mix(red, white, (15 - i) as u32, 8)
        }
    })
}

/// Renders a space-time field as a raster of colored cells, one row per
/// recorded time, with adjacent same-color cells merged into single rects.
pub fn heatmap(title: &str, xs: &[f64], times: &[f64], rows: &[Vec<f64>]) -> String {
    assert_eq!(times.len(), rows.len());
    let pal = palette();
    let mut vmax = 0.0f64;
    for row in rows {
        for &v in row {
            vmax = vmax.max(v.abs());
        }
    }
    let bucket = |v: f64| -> usize {
        if vmax == 0.0 {
            8
        } else {
            let u = (v + vmax) / (2.0 * vmax);
            ((u * 16.0) as isize).clamp(0, 15) as usize
        }
    };

    let x = AxisMap::new(0.0, 1.0, MARGIN_L, WIDTH - MARGIN_R - 40.0);
    let t_end = times.last().copied().unwrap_or(1.0);
    let y = AxisMap::new(0.0, t_end.max(1e-12), HEIGHT - MARGIN_B, MARGIN_T);

    let mut out = String::new();
    open_svg(&mut out, title);
    let n = xs.len();
    let dx = 1.0 / n as f64;
    for (k, row) in rows.iter().enumerate() {
        let t0 = times[k];
        let t1 = if k + 1 < times.len() { times[k + 1] } else { t_end };
        let (y0, y1) = (y.px(t1), y.px(t0));
        if (y1 - y0).abs() < 1e-9 && k + 1 < times.len() {
            continue;
        }
        let mut j = 0;
        while j < n {
            let b = bucket(row[j]);
            let mut j_end = j + 1;
            while j_end < n && bucket(row[j_end]) == b {
                j_end += 1;
            }
            let x0 = x.px(j as f64 * dx);
            let x1 = x.px(j_end as f64 * dx);
            out.push_str(&format!(
                "<rect x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
                 fill=\"{}\"/>\n",
                x1 - x0,
                (y1 - y0).max(0.75),
                pal[b]
            ));
            j = j_end;
        }
    }
    // Color bar with the symmetric range.
    let bar_x = WIDTH - MARGIN_R - 28.0;
    let bar_h = (HEIGHT - MARGIN_T - MARGIN_B) / 16.0;
    for (i, color) in pal.iter().enumerate() {
        let yten = HEIGHT - MARGIN_B - bar_h * (i + 1) as f64;
        out.push_str(&format!(
            "<rect x=\"{bar_x:.2}\" y=\"{yten:.2}\" width=\"14\" height=\"{:.2}\" fill=\"{color}\"/>\n",
            bar_h + 0.5
        ));
    }
    for (v, frac) in [(-vmax, 0.0), (0.0, 0.5), (vmax, 1.0)] {
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"10\" \
             fill=\"#222222\">{}</text>\n",
            bar_x + 16.0,
            HEIGHT - MARGIN_B - (HEIGHT - MARGIN_T - MARGIN_B) * frac + 3.0,
            fmt_tick(v)
        ));
    }
    axes_frame_only(&mut out, &x, &y);
    out.push_str("</svg>\n");
    out
}

fn axes_frame_only(out: &mut String, x: &AxisMap, y: &AxisMap) {
    out.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" \
         stroke=\"#333333\"/>\n",
        x.hi_px - x.lo_px,
        HEIGHT - MARGIN_T - MARGIN_B
    ));
    for i in 0..5 {
        let xv = x.min + (x.max - x.min) * i as f64 / 4.0;
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" \
             fill=\"#444444\" text-anchor=\"middle\">{}</text>\n",
            x.px(xv),
            HEIGHT - MARGIN_B + 16.0,
            fmt_tick(xv)
        ));
        let yv = y.min + (y.max - y.min) * i as f64 / 4.0;
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" \
             fill=\"#444444\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 6.0,
            y.px(yv) + 4.0,
            fmt_tick(yv)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\" \
         fill=\"#222222\" text-anchor=\"middle\">x</text>\n<text x=\"16\" y=\"{:.2}\" \
         font-family=\"monospace\" font-size=\"12\" fill=\"#222222\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {:.2})\">t</text>\n",
        (x.lo_px + x.hi_px) / 2.0,
        HEIGHT - 12.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0
    ));
}
