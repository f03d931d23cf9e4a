use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

pub struct Series<'a> {
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    pub color: Option<&'static str>,
    pub width: f64,
    pub markers: bool,
}

impl<'a> Series<'a> {
    pub fn line(xs: &'a [f64], ys: &'a [f64]) -> Self {
        Self {
            xs,
            ys,
            color: None,
            width: 1.5,
            markers: false,
        }
    }

    pub fn color(mut self, c: &'static str) -> Self {
        self.color = Some(c);
        self
    }

    pub fn width(mut self, w: f64) -> Self {
        self.width = w;
        self
    }

    pub fn markers(mut self) -> Self {
        self.markers = true;
        self
    }
}

/// Minimal line chart rendered straight to SVG text.
pub struct Chart<'a> {
    title: String,
    x_label: String,
    y_label: String,
    log_y: bool,
    x_range: Option<(f64, f64)>,
    series: Vec<Series<'a>>,
    bands: Vec<(&'a [f64], &'a [f64], &'a [f64])>,
}

impl<'a> Chart<'a> {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: "t".into(),
            y_label: String::new(),
            log_y: false,
            x_range: None,
            series: Vec::new(),
            bands: Vec::new(),
        }
    }

    pub fn labels(mut self, x: impl Into<String>, y: impl Into<String>) -> Self {
        self.x_label = x.into();
        self.y_label = y.into();
        self
    }

    pub fn log_y(mut self) -> Self {
        self.log_y = true;
        self
    }

    /// Relabels the x axis ticks; data stay in their own coordinates.
    pub fn x_display(mut self, range: Option<(f64, f64)>) -> Self {
        self.x_range = range;
        self
    }

    pub fn series(mut self, s: Series<'a>) -> Self {
        self.series.push(s);
        self
    }

    pub fn band(mut self, xs: &'a [f64], low: &'a [f64], high: &'a [f64]) -> Self {
        self.bands.push((xs, low, high));
        self
    }

    fn ty(&self, y: f64) -> Option<f64> {
        if self.log_y {
            (y > 0.0).then(|| y.log10())
        } else {
            Some(y)
        }
    }

    pub fn render(&self) -> String {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for s in &self.series {
            xs.extend_from_slice(s.xs);
            ys.extend(s.ys.iter().filter_map(|&y| self.ty(y)));
        }
        for (x, lo, hi) in &self.bands {
            xs.extend_from_slice(x);
            ys.extend(lo.iter().chain(hi.iter()).filter_map(|&y| self.ty(y)));
        }
        let (x0, x1) = bounds(&xs);
        let (mut y0, mut y1) = bounds(&ys);
        if !self.log_y {
            let pad = 0.05 * (y1 - y0);
            y0 -= pad;
            y1 += pad;
        }
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );

        for k in 0..=4 {
            let frac = k as f64 / 4.0;
            let x = x0 + frac * (x1 - x0);
            let shown = match self.x_range {
                Some((a, b)) => a + frac * (b - a),
                None => x,
            };
            let _ = writeln!(
                out,
                r##"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="#ddd"/><text x="{0:.2}" y="{3}" text-anchor="middle">{4}</text>"##,
                px(x),
                TOP,
                TOP + ph,
                TOP + ph + 16.0,
                tick(shown)
            );
        }
        for (y, label) in self.y_ticks(y0, y1) {
            let _ = writeln!(
                out,
                r##"<line x1="{0}" y1="{1:.2}" x2="{2}" y2="{1:.2}" stroke="#ddd"/><text x="{3}" y="{4:.2}" text-anchor="end">{5}</text>"##,
                LEFT,
                py(y),
                LEFT + pw,
                LEFT - 6.0,
                py(y) + 4.0,
                label
            );
        }
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (xs, lo, hi) in &self.bands {
            let mut pts = String::new();
            for (x, y) in xs.iter().zip(hi.iter()) {
                if let Some(y) = self.ty(*y) {
                    let _ = write!(pts, "{:.2},{:.2} ", px(*x), py(y));
                }
            }
            for (x, y) in xs.iter().zip(lo.iter()).rev() {
                if let Some(y) = self.ty(*y) {
                    let _ = write!(pts, "{:.2},{:.2} ", px(*x), py(y));
                }
            }
            let _ = writeln!(
                out,
                r##"<polygon points="{}" fill="#1f77b4" fill-opacity="0.2" stroke="none"/>"##,
                pts.trim_end()
            );
        }
        for (i, s) in self.series.iter().enumerate() {
            let color = s.color.unwrap_or(PALETTE[i % PALETTE.len()]);
            let mut pts = String::new();
            for (x, y) in s.xs.iter().zip(s.ys) {
                if let Some(y) = self.ty(*y) {
                    let _ = write!(pts, "{:.2},{:.2} ", px(*x), py(y));
                }
            }
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="{}"/>"#,
                pts.trim_end(),
                color,
                s.width
            );
            if s.markers {
                for (x, y) in s.xs.iter().zip(s.ys) {
                    if let Some(y) = self.ty(*y) {
                        let _ = writeln!(
                            out,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                            px(*x),
                            py(y),
                            color
                        );
                    }
                }
            }
        }
        out.push_str("</svg>\n");
        out
    }

    fn y_ticks(&self, y0: f64, y1: f64) -> Vec<(f64, String)> {
        if self.log_y {
            let lo = y0.floor() as i32;
            let hi = y1.ceil() as i32;
            let ticks: Vec<_> = (lo..=hi)
                .map(f64::from)
                .filter(|e| *e >= y0 - 1e-9 && *e <= y1 + 1e-9)
                .map(|e| (e, format!("1e{}", e as i32)))
                .collect();
            if !ticks.is_empty() {
                return ticks;
            }
        }
        (0..=4)
            .map(|k| {
                let y = y0 + k as f64 / 4.0 * (y1 - y0);
                let shown = if self.log_y { 10f64.powf(y) } else { y };
                (y, tick(shown))
            })
            .collect()
    }
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_svg() {
        let xs = [0.0, 0.5, 1.0];
        let ys = [1.0, 10.0, 100.0];
        let svg = Chart::new("a < b").log_y().series(Series::line(&xs, &ys).markers()).render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains(">1e1<"));
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn flat_series_does_not_divide_by_zero() {
        let xs = [0.0, 1.0];
        let ys = [2.0, 2.0];
        let svg = Chart::new("flat").series(Series::line(&xs, &ys)).render();
        assert!(!svg.contains("NaN"));
    }
}
