//! Result tables, number formatting and atomic file writes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// A header row plus data rows in fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_columns(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Numeric values of column `name`, NaN for non-numeric cells.
    pub fn column(&self, name: &str) -> Vec<f64> {
        let Some(k) = self.columns.iter().position(|c| c == name) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .map(|r| match &r[k] {
                Cell::Num(x) => *x,
                Cell::Int(i) => *i as f64,
                Cell::Text(_) => f64::NAN,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(format_cell).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn format_cell(c: &Cell) -> String {
    match c {
        Cell::Num(x) => format_sig(*x),
        Cell::Int(i) => i.to_string(),
        Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Cell::Text(s) => s.clone(),
    }
}

/// 12 significant digits, trailing zeros trimmed. Plain notation for
/// exponents in [−5, 12), scientific otherwise.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let body = if (-5..12).contains(&exp) {
        let point = exp + 1;
        let s = if point <= 0 {
            format!("0.{}{}", "0".repeat((-point) as usize), digits)
        } else {
            let p = point as usize;
            format!("{}.{}", &digits[..p], &digits[p..])
        };
        trim_zeros(&s)
    } else {
        let m = trim_zeros(&format!("{}.{}", &digits[..1], &digits[1..]));
        format!("{m}e{exp}")
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

/// Minimal SVG: line series on shared axes, or a scatter colored by value.
#[derive(Debug, Clone, PartialEq)]
pub enum Plot {
    Lines { title: String, x_label: String, y_label: String, series: Vec<(String, Vec<[f64; 2]>)> },
    Heat { title: String, points: Vec<([f64; 2], f64)> },
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

impl Plot {
    pub fn lines(title: &str, x_label: &str, y_label: &str, series: Vec<(String, Vec<[f64; 2]>)>) -> Self {
        Plot::Lines { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series }
    }

    /// Line plot of `ys` against `x` taken from table columns.
    pub fn from_table(title: &str, table: &Table, x: &str, ys: &[&str]) -> Self {
        let xs = table.column(x);
        let series = ys
            .iter()
            .map(|y| {
                let pts = xs.iter().zip(table.column(y)).map(|(&a, b)| [a, b]).collect();
                (y.to_string(), pts)
            })
            .collect();
        Self::lines(title, x, "", series)
    }

    pub fn to_svg(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        s.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
        match self {
            Plot::Lines { title, x_label, y_label, series } => {
                let finite: Vec<[f64; 2]> =
                    series.iter().flat_map(|(_, p)| p.iter().copied()).filter(|p| p[0].is_finite() && p[1].is_finite()).collect();
                let (x0, x1) = range(finite.iter().map(|p| p[0]));
                let (y0, y1) = range(finite.iter().map(|p| p[1]));
                axes(&mut s, title, x_label, y_label, (x0, x1), (y0, y1));
                for (k, (name, pts)) in series.iter().enumerate() {
                    let color = PALETTE[k % PALETTE.len()];
                    let coords: Vec<String> = pts
                        .iter()
                        .filter(|p| p[0].is_finite() && p[1].is_finite())
                        .map(|p| format!("{:.2},{:.2}", sx(p[0], x0, x1), sy(p[1], y0, y1)))
                        .collect();
                    let _ = write!(
                        s,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                        coords.join(" ")
                    );
                    let _ = write!(
                        s,
                        r#"<text x="{:.0}" y="{:.0}" fill="{color}">{}</text>"#,
                        W - MARGIN + 5.0,
                        MARGIN + 15.0 * k as f64,
                        escape(name)
                    );
                }
            }
            Plot::Heat { title, points } => {
                let (x0, x1) = range(points.iter().map(|p| p.0[0]));
                let (y0, y1) = range(points.iter().map(|p| p.0[1]));
                // Equal aspect so the lattice is not distorted.
                let span = (x1 - x0).max(y1 - y0);
                let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
                let (x0, x1, y0, y1) = (cx - span / 2.0, cx + span / 2.0, cy - span / 2.0, cy + span / 2.0);
                let vmax = points.iter().map(|p| p.1).fold(0.0, f64::max).max(1e-300);
                let _ = write!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
                for (p, v) in points {
                    let t = (v / vmax).clamp(0.0, 1.0).sqrt();
                    let shade = (255.0 * (1.0 - t)).round() as u8;
                    let _ = write!(
                        s,
                        r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="rgb(255,{shade},{shade})" stroke="#999" stroke-width="0.3"/>"##,
                        sx(p[0], x0, x1),
                        sy(p[1], y0, y1)
                    );
                }
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn sx(x: f64, x0: f64, x1: f64) -> f64 {
    MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN)
}

fn sy(y: f64, y0: f64, y1: f64) -> f64 {
    H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN)
}

fn axes(s: &mut String, title: &str, x_label: &str, y_label: &str, xr: (f64, f64), yr: (f64, f64)) {
    let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    let _ = write!(s, r#"<text x="{}" y="25" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = write!(s, r#"<polyline fill="none" stroke="black" points="{l},{t} {l},{b} {r},{b}"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = xr.0 + f * (xr.1 - xr.0);
        let yv = yr.0 + f * (yr.1 - yr.0);
        let x = l + f * (r - l);
        let y = b - f * (b - t);
        let _ = write!(s, r#"<line x1="{x}" y1="{b}" x2="{x}" y2="{}" stroke="black"/>"#, b + 5.0);
        let _ = write!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, b + 18.0, tick(xv));
        let _ = write!(s, r#"<line x1="{}" y1="{y}" x2="{l}" y2="{y}" stroke="black"/>"#, l - 5.0);
        let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, l - 8.0, y + 4.0, tick(yv));
    }
    let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 15.0, escape(x_label));
    let _ = write!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(0.5), "0.5");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(-2.0 / 3.0), "-0.666666666667");
        assert_eq!(format_sig(123456.0), "123456");
        assert_eq!(format_sig(1e-7), "1e-7");
        assert_eq!(format_sig(-1.25e15), "-1.25e15");
        assert_eq!(format_sig(std::f64::consts::PI * 1e-5), "0.0000314159265359");
        assert_eq!(format_sig(f64::NAN), "NaN");
        for x in [0.1234567890123456, 98765.4321, 3.3e-9, 7.0e30] {
            let back: f64 = format_sig(x).parse().unwrap();
            assert!((back - x).abs() <= 1e-11 * x.abs());
        }
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b", "label"]);
        t.push(vec![Cell::from(0.25), Cell::from(3usize), Cell::from("x,y")]);
        assert_eq!(t.to_csv(), "a,b,label\n0.25,3,\"x,y\"\n");
        assert_eq!(t.column("a"), vec![0.25]);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("f.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn svg_is_well_formed() {
        let p = Plot::lines("t", "x", "y", vec![("s".into(), vec![[0.0, 1.0], [1.0, f64::NAN], [2.0, 3.0]])]);
        let svg = p.to_svg();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<polyline"));
        let h = Plot::Heat { title: "m".into(), points: vec![([0.0, 0.0], 1.0), ([1.0, 1.0], 0.0)] };
        assert_eq!(h.to_svg().matches("<circle").count(), 2);
    }
}
