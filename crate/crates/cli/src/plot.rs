//! Standalone SVG charts with confidence bars, and CSV mirrors of the
//! plotted series.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Context};

use crate::output::num;
use crate::InvalidConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<PlotPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    /// File stem of the SVG and its mirror.
    pub name: &'static str,
    pub title: String,
    pub x_label: &'static str,
    pub y_label: &'static str,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    }
}

fn span(values: impl Iterator<Item = f64>, floor_zero: bool) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if floor_zero {
        lo = lo.min(0.0);
    }
    if hi - lo < 1e-12 {
        let pad = if hi.abs() > 0.0 { hi.abs() * 0.1 } else { 1.0 };
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (if floor_zero && lo == 0.0 { 0.0 } else { lo - pad }, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(chart: &Chart) -> String {
    let pts = || chart.series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = span(pts().map(|p| p.x), false);
    let (y0, y1) = span(pts().flat_map(|p| [p.y, p.lo, p.hi]), true);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(&chart.title));
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT:.2} {TOP:.2} V{:.2} H{:.2}" fill="none" stroke="black"/>"#,
        TOP + ph,
        LEFT + pw
    );
    for i in 0..=5 {
        let f = f64::from(i) / 5.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 19.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 14.0, escape(chart.x_label));
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        escape(chart.y_label)
    );

    for (i, series) in chart.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut points: Vec<PlotPoint> =
            series.points.iter().copied().filter(|p| p.x.is_finite() && p.y.is_finite()).collect();
        points.sort_by(|a, b| a.x.total_cmp(&b.x));
        let _ = writeln!(s, r#"<g class="series" stroke="{color}" fill="{color}">"#);
        if points.len() > 1 {
            let path: Vec<String> = points.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none"/>"#, path.join(" "));
        }
        for p in &points {
            let (px, lo, hi) = (sx(p.x), sy(if p.lo.is_finite() { p.lo } else { p.y }), sy(if p.hi.is_finite() { p.hi } else { p.y }));
            let _ = writeln!(
                s,
                r#"<path class="ci" d="M{px:.2} {lo:.2} V{hi:.2} M{:.2} {lo:.2} H{:.2} M{:.2} {hi:.2} H{:.2}" fill="none"/>"#,
                px - 4.0,
                px + 4.0,
                px - 4.0,
                px + 4.0
            );
            let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{:.2}" r="3.5"/>"#, sy(p.y));
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = W - RIGHT + 14.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.2}" y="{:.2}" width="10" height="10"/><text x="{:.2}" y="{ly:.2}" stroke="none" fill="black">{}</text>"#,
            ly - 9.0,
            lx + 16.0,
            escape(&series.name)
        );
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

pub fn mirror_csv(chart: &Chart) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["series", "x", "y", "lo", "hi"])?;
    for series in &chart.series {
        for p in &series.points {
            w.write_record([series.name.clone(), num(p.x), num(p.y), num(p.lo), num(p.hi)])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[cfg(test)]
pub fn parse_mirror(text: &str) -> anyhow::Result<Vec<Series>> {
    let mut out: Vec<Series> = Vec::new();
    for rec in csv::Reader::from_reader(text.as_bytes()).records() {
        let rec = rec?;
        let f = |i: usize| -> anyhow::Result<f64> { Ok(rec[i].parse()?) };
        let p = PlotPoint { x: f(1)?, y: f(2)?, lo: f(3)?, hi: f(4)? };
        match out.iter_mut().find(|s| s.name == rec[0]) {
            Some(s) => s.points.push(p),
            None => out.push(Series { name: rec[0].to_owned(), points: vec![p] }),
        }
    }
    Ok(out)
}

/// A results CSV written by one of the estimation commands.
pub struct ResultsTable {
    pub command: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ResultsTable {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let command = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .find_map(|l| l.strip_prefix("# command: "))
            .ok_or_else(|| InvalidConfig("results file has no '# command:' line".into()))?
            .trim()
            .to_owned();
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = reader.headers()?.iter().map(str::to_owned).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_owned).collect()))
            .collect::<Result<_, _>>()
            .context("parsing results rows")?;
        Ok(ResultsTable { command, header, rows })
    }

    fn column(&self, name: &str) -> anyhow::Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| InvalidConfig(format!("results have no column {name:?}")).into())
    }

    /// Groups rows into series keyed by `group`, skipping rows whose `y`
    /// does not parse as a number.
    fn series(&self, group: Option<&str>, prefix: &str, x: &str, y: &str, lo: &str, hi: &str) -> anyhow::Result<Vec<Series>> {
        let g = group.map(|g| self.column(g)).transpose()?;
        let (xi, yi, li, hi_) = (self.column(x)?, self.column(y)?, self.column(lo)?, self.column(hi)?);
        let mut groups: BTreeMap<String, Vec<PlotPoint>> = BTreeMap::new();
        let mut order = Vec::new();
        for row in &self.rows {
            let key = g.map_or_else(|| prefix.to_owned(), |g| format!("{prefix}{}", row[g]));
            let Ok(yv) = row[yi].parse::<f64>() else { continue };
            let xv: f64 = row[xi].parse().with_context(|| format!("column {x}"))?;
            let p = PlotPoint { x: xv, y: yv, lo: row[li].parse().unwrap_or(yv), hi: row[hi_].parse().unwrap_or(yv) };
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().push(p);
        }
        Ok(order.into_iter().map(|name| Series { points: groups.remove(&name).unwrap_or_default(), name }).collect())
    }

    pub fn charts(&self) -> anyhow::Result<Vec<Chart>> {
        let p_chart = |series| Chart {
            name: "p_vs_k",
            title: "Event probability".into(),
            x_label: "k",
            y_label: "p",
            series,
        };
        match self.command.as_str() {
            "estimate-event" => Ok(vec![p_chart(self.series(Some("kind"), "", "k", "p_hat", "ci_low", "ci_high")?)]),
            "estimate-f" => {
                let mut p = self.series(None, "p1", "k", "p1_hat", "p1_ci_low", "p1_ci_high")?;
                p.extend(self.series(None, "p2", "k", "p2_hat", "p2_ci_low", "p2_ci_high")?);
                let mut f = self.series(None, "f1", "k", "f1_hat", "f1_ci_low", "f1_ci_high")?;
                f.extend(self.series(None, "f2", "k", "f2_hat", "f2_ci_low", "f2_ci_high")?);
                Ok(vec![
                    p_chart(p),
                    Chart { name: "f_vs_k", title: "Decay rate -ln(p)/k".into(), x_label: "k", y_label: "f", series: f },
                ])
            }
            "connectivity-curve" => Ok(vec![Chart {
                name: "connectivity",
                title: "Connectivity with k = floor(c ln n)".into(),
                x_label: "c",
                y_label: "P(connected)",
                series: self.series(Some("n"), "n=", "c", "p_hat", "ci_low", "ci_high")?,
            }]),
            other => bail!(InvalidConfig(format!("cannot plot results of {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart(rows: usize) -> Chart {
        let points = (0..rows)
            .map(|i| {
                let x = i as f64 + 1.0;
                PlotPoint { x, y: 0.5 / x, lo: 0.4 / x, hi: 0.6 / x }
            })
            .collect();
        Chart { name: "p_vs_k", title: "t".into(), x_label: "k", y_label: "p", series: vec![Series { name: "A".into(), points }] }
    }

    #[test]
    fn empty_chart_has_axes() {
        let svg = render_svg(&Chart { series: vec![], ..chart(0) });
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("<path d=\"M"));
        assert!(!svg.contains("<circle"));
    }

    #[test]
    fn three_rows_three_points() {
        let svg = render_svg(&chart(3));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("class=\"ci\"").count(), 3);
    }

    #[test]
    fn mirror_round_trips() {
        let c = chart(5);
        let back = parse_mirror(&mirror_csv(&c).unwrap()).unwrap();
        assert_eq!(back, c.series);
    }

    #[test]
    fn results_become_series() {
        let text = "# knnrgg x\n# command: estimate-event\n# seed: 1\nkind,k,m,trials,successes,p_hat,ci_low,ci_high\nA,1,8,10,5,0.5,0.2,0.8\nA',1,8,10,6,0.6,0.3,0.85\nA,2,8,10,1,0.1,0.01,0.4\n";
        let t = ResultsTable::parse(text).unwrap();
        let charts = t.charts().unwrap();
        assert_eq!(charts.len(), 1);
        let s = &charts[0].series;
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].name, "A");
        assert_eq!(s[0].points.len(), 2);
        assert_eq!(s[1].points[0], PlotPoint { x: 1.0, y: 0.6, lo: 0.3, hi: 0.85 });
    }
}
