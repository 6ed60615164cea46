//! Static SVG figures from run, scan and comparison artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};
use crate::io::{ensure_dir, read_dump, FieldDump, Table};
use crate::run::COMPARISON_FILE;
use crate::scan::SCAN_SUMMARY_FILE;

pub const SNAPSHOT_TIMES: [f64; 5] = [0.0, 10.0, 20.0, 30.0, 40.0];
const MAX_CELLS: usize = 128;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        let mut s = Self { width, height, body: String::new() };
        s.rect(0.0, 0.0, width, height, "#ffffff");
        s
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#);
    }

    fn outline(&mut self, x: f64, y: f64, w: f64, h: f64) {
        let _ = writeln!(
            self.body,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#333" stroke-width="1"/>"##
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="1"/>"#
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str) {
        if pts.len() < 2 {
            return;
        }
        let mut d = String::with_capacity(pts.len() * 14);
        for (x, y) in pts {
            let _ = write!(d, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"/>"#,
            d.trim_end()
        );
    }

    fn text(&mut self, x: f64, y: f64, s: &str, size: f64, anchor: &str) {
        let s = s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size}" font-family="sans-serif" text-anchor="{anchor}">{s}</text>"#
        );
    }

    fn vertical_text(&mut self, x: f64, y: f64, s: &str, size: f64) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size}" font-family="sans-serif" text-anchor="middle" transform="rotate(-90 {x:.2} {y:.2})">{s}</text>"#
        );
    }

    fn save(&self, path: &Path) -> Result<()> {
        let doc = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        );
        fs::write(path, doc).map_err(|e| CliError::io(path, e))
    }
}

/// Plot area in pixels plus the data ranges it maps.
#[derive(Clone, Copy)]
struct Area {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
    log_y: bool,
}

impl Area {
    fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h, xr: (0.0, 1.0), yr: (0.0, 1.0), log_y: false }
    }

    fn px(&self, v: f64) -> f64 {
        self.x + (v - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn py(&self, v: f64) -> f64 {
        let (v, lo, hi) = if self.log_y { (v.log10(), self.yr.0.log10(), self.yr.1.log10()) } else { (v, self.yr.0, self.yr.1) };
        self.y + self.h - (v - lo) / (hi - lo) * self.h
    }
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0 && span.is_finite()) {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step - 1e-9).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    label_step(v, v.abs())
}

/// Tick label with enough decimals to tell ticks `step` apart.
fn label_step(v: f64, step: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        return format!("{v:.0e}");
    }
    let decimals = (-(step.log10().floor()) as i32 + 1).clamp(0, 6) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn tick_labels(ticks: &[f64]) -> Vec<String> {
    let step = if ticks.len() > 1 { ticks[1] - ticks[0] } else { ticks.first().map_or(1.0, |t| t.abs()) };
    ticks.iter().map(|&t| label_step(t, step)).collect()
}

fn axes(svg: &mut Svg, a: &Area, title: &str, xlabel: &str, ylabel: &str) {
    svg.outline(a.x, a.y, a.w, a.h);
    let xticks = nice_ticks(a.xr.0, a.xr.1);
    for (t, l) in xticks.iter().zip(tick_labels(&xticks)) {
        let x = a.px(*t);
        svg.line(x, a.y + a.h, x, a.y + a.h + 4.0, "#333");
        svg.text(x, a.y + a.h + 16.0, &l, 10.0, "middle");
    }
    let (yticks, ylabels): (Vec<f64>, Vec<String>) = if a.log_y {
        let (lo, hi) = (a.yr.0.log10().ceil() as i32, a.yr.1.log10().floor() as i32);
        let stride = ((hi - lo) / 5).max(1);
        (lo..=hi).step_by(stride as usize).map(|e| (10f64.powi(e), format!("1e{e}"))).unzip()
    } else {
        let t = nice_ticks(a.yr.0, a.yr.1);
        let l = tick_labels(&t);
        (t, l)
    };
    for (t, l) in yticks.iter().zip(ylabels) {
        let y = a.py(*t);
        svg.line(a.x - 4.0, y, a.x, y, "#333");
        svg.text(a.x - 6.0, y + 3.5, &l, 10.0, "end");
    }
    svg.text(a.x + a.w / 2.0, a.y - 8.0, title, 13.0, "middle");
    svg.text(a.x + a.w / 2.0, a.y + a.h + 32.0, xlabel, 11.0, "middle");
    svg.vertical_text(a.x - 42.0, a.y + a.h / 2.0, ylabel, 11.0);
}

struct Series<'a> {
    name: &'a str,
    x: &'a [f64],
    y: &'a [f64],
}

/// Smallest value shown on a logarithmic axis; Schmidt eigenvalues below it are SVD noise.
const LOG_FLOOR: f64 = 1e-16;

fn line_panel(svg: &mut Svg, mut a: Area, series: &[Series], title: &str, xlabel: &str, ylabel: &str) {
    let xs: Vec<f64> = series.iter().flat_map(|s| s.x.iter().filter(|v| v.is_finite()).copied()).collect();
    let ys: Vec<f64> = series
        .iter()
        .flat_map(|s| s.y.iter().filter(|v| v.is_finite()))
        .map(|&v| if a.log_y { v.max(LOG_FLOOR) } else { v })
        .collect();
    let range = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let (x0, x1) = range(&xs);
    let (mut y0, mut y1) = range(&ys);
    if x0.is_nan() || x1.is_nan() || x0 >= x1 || !y0.is_finite() {
        axes(svg, &a, title, xlabel, ylabel);
        svg.text(a.x + a.w / 2.0, a.y + a.h / 2.0, "no data", 12.0, "middle");
        return;
    }
    if a.log_y {
        y0 = 10f64.powf(y0.log10().floor());
        y1 = 10f64.powf(y1.log10().ceil().max(y0.log10() + 1.0));
    } else {
        if y0 == y1 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad = 0.05 * (y1 - y0);
        y0 -= pad;
        y1 += pad;
    }
    a.xr = (x0, x1);
    a.yr = (y0, y1);
    axes(svg, &a, title, xlabel, ylabel);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s
            .x
            .iter()
            .zip(s.y)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| (a.px(x), a.py(if a.log_y { y.max(LOG_FLOOR) } else { y })))
            .collect();
        svg.polyline(&pts, color);
        let ly = a.y + 14.0 + 14.0 * k as f64;
        svg.line(a.x + a.w - 110.0, ly - 4.0, a.x + a.w - 90.0, ly - 4.0, color);
        svg.text(a.x + a.w - 86.0, ly, s.name, 10.0, "start");
    }
}

#[derive(Clone, Copy)]
enum Cmap {
    Sequential,
    Diverging,
}

fn lerp_color(stops: &[[u8; 3]], f: f64) -> String {
    let f = f.clamp(0.0, 1.0) * (stops.len() - 1) as f64;
    let i = (f.floor() as usize).min(stops.len() - 2);
    let w = f - i as f64;
    let c: Vec<u8> =
        (0..3).map(|k| (stops[i][k] as f64 * (1.0 - w) + stops[i + 1][k] as f64 * w).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

impl Cmap {
    /// Colour for `v` scaled into `[lo, hi]`, quantised to 65 levels so the
    /// midpoint is exact.
    fn color(self, v: f64, lo: f64, hi: f64) -> String {
        let f = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        let f = (f * 64.0).round() / 64.0;
        match self {
            Cmap::Sequential => lerp_color(&[[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]], f),
            Cmap::Diverging => lerp_color(&[[33, 102, 172], [247, 247, 247], [178, 24, 43]], f),
        }
    }
}

/// Row-major `ny x nx` image, row 0 at the bottom.
struct Image {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl Image {
    fn from_fn(nx: usize, ny: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                values.push(f(ix, iy));
            }
        }
        Self { nx, ny, values }
    }

    /// Block-average down to at most `MAX_CELLS` per axis.
    fn downsampled(&self) -> Self {
        let fx = self.nx.div_ceil(MAX_CELLS);
        let fy = self.ny.div_ceil(MAX_CELLS);
        if fx == 1 && fy == 1 {
            return Self { nx: self.nx, ny: self.ny, values: self.values.clone() };
        }
        let (nx, ny) = (self.nx / fx, self.ny / fy);
        Self::from_fn(nx, ny, |ix, iy| {
            let mut acc = 0.0;
            for dy in 0..fy {
                for dx in 0..fx {
                    acc += self.values[(iy * fy + dy) * self.nx + ix * fx + dx];
                }
            }
            acc / (fx * fy) as f64
        })
    }
}

fn heatmap_panel(svg: &mut Svg, a: Area, img: &Image, cmap: Cmap, title: &str, xlabel: &str, ylabel: &str) {
    let img = img.downsampled();
    let (lo, hi) = match cmap {
        Cmap::Sequential => {
            let lo = img.values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = img.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, if hi > lo { hi } else { lo + 1.0 })
        }
        Cmap::Diverging => {
            let m = img.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let m = if m > 0.0 { m } else { 1.0 };
            (-m, m)
        }
    };
    let cw = a.w / img.nx as f64;
    let ch = a.h / img.ny as f64;
    for iy in 0..img.ny {
        let y = a.y + a.h - (iy + 1) as f64 * ch;
        let row = &img.values[iy * img.nx..(iy + 1) * img.nx];
        let mut start = 0;
        while start < img.nx {
            let color = cmap.color(row[start], lo, hi);
            let mut end = start + 1;
            while end < img.nx && cmap.color(row[end], lo, hi) == color {
                end += 1;
            }
            // overlap by a hair so anti-aliasing leaves no seams
            svg.rect(a.x + start as f64 * cw, y - 0.5, (end - start) as f64 * cw + 0.5, ch + 0.5, &color);
            start = end;
        }
    }
    axes(svg, &a, title, xlabel, ylabel);
    // colour bar
    let bx = a.x + a.w + 8.0;
    for k in 0..64 {
        let f = k as f64 / 63.0;
        let y = a.y + a.h - (k + 1) as f64 * a.h / 64.0;
        svg.rect(bx, y, 10.0, a.h / 64.0 + 0.3, &cmap.color(lo + f * (hi - lo), lo, hi));
    }
    svg.outline(bx, a.y, 10.0, a.h);
    svg.text(bx + 12.0, a.y + 8.0, &label(hi), 9.0, "start");
    svg.text(bx + 12.0, a.y + a.h, &label(lo), 9.0, "start");
}

fn note_panel(svg: &mut Svg, a: &Area, title: &str, note: &str) {
    svg.outline(a.x, a.y, a.w, a.h);
    svg.text(a.x + a.w / 2.0, a.y - 8.0, title, 13.0, "middle");
    svg.text(a.x + a.w / 2.0, a.y + a.h / 2.0, note, 11.0, "middle");
}

fn x_axis(n: usize, length: f64) -> (f64, f64) {
    (-0.5 * length, -0.5 * length + (n - 1) as f64 * length / n as f64)
}

/// Momentum rows to show: the band holding all values above 1e-3 of the peak.
fn momentum_band(w: &FieldDump) -> (usize, usize) {
    let n = w.n;
    let peak = w.values.iter().fold(0.0f64, |m, z| m.max(z.re.abs()));
    let active = |p: usize| (0..n).any(|q| w.at(q, p).re.abs() > 1e-3 * peak);
    let lo = (0..n).find(|&p| active(p)).unwrap_or(0);
    let hi = (0..n).rev().find(|&p| active(p)).unwrap_or(n - 1);
    // symmetric about p = 0 at index n/2, with a margin
    let half = (n / 2 - lo).max(hi.saturating_sub(n / 2)) + 4;
    (n / 2 - half.min(n / 2), (n / 2 + half).min(n - 1))
}

fn snapshot(path: &Path, psi: &FieldDump, wrel: Option<&FieldDump>) -> Result<()> {
    let n = psi.n;
    let mut svg = Svg::new(1320.0, 420.0);
    let (xlo, xhi) = x_axis(n, psi.length);
    let density = Image::from_fn(n, n, |i, j| psi.at(i, j).norm_sqr());
    let mut a = Area::new(70.0, 50.0, 300.0, 300.0);
    a.xr = (xlo, xhi);
    a.yr = (xlo, xhi);
    heatmap_panel(&mut svg, a, &density, Cmap::Sequential, &format!("|Ψ(x₁,x₂)|², t = {}", label(psi.t)), "x₁", "x₂");

    let dx = psi.length / n as f64;
    let rho1: Vec<f64> = (0..n).map(|i| (0..n).map(|j| psi.at(i, j).norm_sqr()).sum::<f64>() * dx).collect();
    let rho2: Vec<f64> = (0..n).map(|j| (0..n).map(|i| psi.at(i, j).norm_sqr()).sum::<f64>() * dx).collect();
    let x: Vec<f64> = (0..n).map(|j| xlo + j as f64 * dx).collect();
    let series = [Series { name: "ρ₁", x: &x, y: &rho1 }, Series { name: "ρ₂", x: &x, y: &rho2 }];
    line_panel(&mut svg, Area::new(490.0, 50.0, 300.0, 300.0), &series, "marginals", "x", "ρ");

    let mut a = Area::new(910.0, 50.0, 300.0, 300.0);
    match wrel {
        Some(w) => {
            let (p0, p1) = momentum_band(w);
            let dp = std::f64::consts::PI / w.length;
            let pn = |s: usize| (s as f64 - (w.n / 2) as f64) * dp;
            let img = Image::from_fn(w.n, p1 - p0 + 1, |q, p| w.at(q, p0 + p).re);
            a.xr = x_axis(w.n, w.length);
            a.yr = (pn(p0), pn(p1));
            heatmap_panel(&mut svg, a, &img, Cmap::Diverging, "W_rel(r, p)", "r", "p");
        }
        None => note_panel(&mut svg, &a, "W_rel(r, p)", "no W_rel dump at this time"),
    }
    svg.save(path)
}

fn list_dumps(dir: &Path, prefix: &str) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if let Some(rest) = name.strip_prefix(prefix) {
            if rest.starts_with("_t") && rest.ends_with(".sn2b") {
                out.insert(rest.to_string(), path);
            }
        }
    }
    Ok(out)
}

/// Diagnostics tables in `dir`, recognised by their header.
fn diagnostics_tables(dir: &Path) -> Result<Vec<(PathBuf, Table)>> {
    let mut out = Vec::new();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    for p in paths {
        let mut rdr = csv::Reader::from_path(&p).map_err(|e| CliError::format(&p, e.to_string()))?;
        let header = rdr.headers().map_err(|e| CliError::format(&p, e.to_string()))?;
        if header.get(0) == Some("t") && header.iter().any(|h| h == "S_vN") {
            let table = Table::read(&p)?;
            out.push((p, table));
        }
    }
    Ok(out)
}

fn time_series(path: &Path, table: &Table, notes: &mut Vec<String>) -> Result<()> {
    let t = table.column("t").unwrap_or_default();
    let col = |name| table.column(name).unwrap_or_default();
    let mut svg = Svg::new(900.0, 900.0);
    let entropies = [Series { name: "S_vN", x: t, y: col("S_vN") }, Series { name: "S_L", x: t, y: col("S_L") }];
    line_panel(&mut svg, Area::new(80.0, 40.0, 760.0, 220.0), &entropies, "entanglement entropies", "t", "S");
    let lambdas = [
        Series { name: "λ₁", x: t, y: col("lambda1") },
        Series { name: "λ₂", x: t, y: col("lambda2") },
        Series { name: "λ₃", x: t, y: col("lambda3") },
    ];
    let mut a = Area::new(80.0, 330.0, 760.0, 220.0);
    a.log_y = true;
    line_panel(&mut svg, a, &lambdas, "Schmidt eigenvalues", "t", "λ");
    let a = Area::new(80.0, 620.0, 760.0, 220.0);
    match (table.column("neg1"), table.column("neg2"), table.column("neg_rel")) {
        (Some(n1), Some(n2), Some(nr)) => {
            let neg = [
                Series { name: "particle 1", x: t, y: n1 },
                Series { name: "particle 2", x: t, y: n2 },
                Series { name: "relative", x: t, y: nr },
            ];
            line_panel(&mut svg, a, &neg, "Wigner negativity", "t", "negative volume");
        }
        _ => {
            note_panel(&mut svg, &a, "Wigner negativity", "negativity columns absent; panel skipped");
            notes.push(format!("{}: no negativity columns, negativity panel skipped", path.display()));
        }
    }
    svg.save(path)
}

fn plot_run(dir: &Path, out: &Path, notes: &mut Vec<String>) -> Result<usize> {
    let mut written = 0;
    for (csv, table) in diagnostics_tables(dir)? {
        let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("diagnostics");
        time_series(&out.join(format!("{stem}_timeseries.svg")), &table, notes)?;
        written += 1;
    }
    let psi = list_dumps(dir, "psi")?;
    let wrel = list_dumps(dir, "wrel")?;
    let mut snapshots = 0;
    for (suffix, path) in &psi {
        let dump = read_dump(path)?;
        if dump.profile || !SNAPSHOT_TIMES.iter().any(|&t| (t - dump.t).abs() < 1e-6) {
            continue;
        }
        let w = match wrel.get(suffix) {
            Some(p) => Some(read_dump(p)?),
            None => {
                notes.push(format!("no W_rel dump for t = {}; panel left empty", dump.t));
                None
            }
        };
        snapshot(&out.join(format!("snapshot_t{:05.1}.svg", dump.t)), &dump, w.as_ref())?;
        snapshots += 1;
    }
    if !psi.is_empty() && snapshots == 0 {
        notes.push("field dumps exist but none at t = 0, 10, 20, 30, 40".into());
    }
    Ok(written + snapshots)
}

fn plot_comparison(dir: &Path, out: &Path) -> Result<usize> {
    let path = dir.join(COMPARISON_FILE);
    if !path.exists() {
        return Ok(0);
    }
    let table = Table::read(&path)?;
    let t = table.column("t").unwrap_or_default();
    let col = |name| table.column(name).unwrap_or_default();
    let mut svg = Svg::new(900.0, 620.0);
    let s = [
        Series { name: "full", x: t, y: col("S_vN_full") },
        Series { name: "Hartree", x: t, y: col("S_vN_hartree") },
    ];
    line_panel(&mut svg, Area::new(80.0, 40.0, 760.0, 220.0), &s, "S_vN: full model vs Hartree", "t", "S_vN");
    let d = [Series { name: "‖ρ_full − ρ_H‖", x: t, y: col("L2_marginal_dist") }];
    line_panel(&mut svg, Area::new(80.0, 340.0, 760.0, 220.0), &d, "marginal distance", "t", "L²");
    svg.save(&out.join("comparison.svg"))?;
    Ok(1)
}

struct ScanRow {
    profile: String,
    ratio: f64,
    peak: Option<f64>,
}

fn read_scan_summary(path: &Path) -> Result<Vec<ScanRow>> {
    let err = |e: csv::Error| CliError::format(path, e.to_string());
    let mut rdr = csv::Reader::from_path(path).map_err(err)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(err)?;
        let num = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok());
        let ratio = num(1).ok_or_else(|| CliError::format(path, "bad ratio column"))?;
        rows.push(ScanRow { profile: rec.get(0).unwrap_or_default().to_string(), ratio, peak: num(4) });
    }
    Ok(rows)
}

fn plot_scan(dir: &Path, out: &Path, notes: &mut Vec<String>) -> Result<usize> {
    let path = dir.join(SCAN_SUMMARY_FILE);
    if !path.exists() {
        return Ok(0);
    }
    let rows = read_scan_summary(&path)?;
    let mut written = 0;
    let mut curves: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for profile in ["gaussian", "stationary"] {
        let mut points: Vec<&ScanRow> = rows.iter().filter(|r| r.profile == profile).collect();
        if points.is_empty() {
            notes.push(format!("scan has no {profile} branch; its heatmaps are skipped"));
            continue;
        }
        points.sort_by(|a, b| a.ratio.total_cmp(&b.ratio));
        let ok: Vec<&ScanRow> = points.iter().copied().filter(|r| r.peak.is_some()).collect();
        curves.push((profile.into(), ok.iter().map(|r| r.ratio).collect(), ok.iter().map(|r| r.peak.unwrap_or(f64::NAN)).collect()));

        let mut tables = Vec::new();
        for r in &ok {
            let point = dir.join(crate::config::point_dir(r.ratio, if profile == "gaussian" {
                crate::config::Profile::Gaussian
            } else {
                crate::config::Profile::Stationary
            }));
            match diagnostics_tables(&point) {
                Ok(mut t) if !t.is_empty() => tables.push((r.ratio, t.remove(0).1)),
                _ => notes.push(format!("no diagnostics under {}", point.display())),
            }
        }
        if tables.is_empty() {
            continue;
        }
        let len = tables.iter().map(|(_, t)| t.rows()).min().unwrap_or(0);
        let t = tables[0].1.column("t").unwrap_or_default();
        if len < 2 {
            continue;
        }
        for (which, what) in [("PR2", "participation ratio of the lighter particle"), ("S_vN", "entanglement entropy")] {
            let img = Image::from_fn(len, tables.len(), |it, ir| tables[ir].1.column(which).map_or(f64::NAN, |c| c[it]));
            let mut a = Area::new(80.0, 50.0, 640.0, 300.0);
            a.xr = (t[0], t[len - 1]);
            let (r0, r1) = (tables[0].0, tables[tables.len() - 1].0);
            a.yr = if r1 > r0 { (r0, r1) } else { (r0 - 0.5, r0 + 0.5) };
            let mut svg = Svg::new(820.0, 420.0);
            heatmap_panel(&mut svg, a, &img, Cmap::Sequential, &format!("{what}, {profile} profiles"), "t", "μ₁/μ₂");
            svg.save(&out.join(format!("scan_{}_{}.svg", which.to_lowercase(), profile)))?;
            written += 1;
        }
    }
    let series: Vec<Series> = curves.iter().map(|(name, x, y)| Series { name, x, y }).collect();
    let mut svg = Svg::new(820.0, 420.0);
    line_panel(&mut svg, Area::new(80.0, 50.0, 640.0, 300.0), &series, "peak entanglement vs mass ratio", "μ₁/μ₂", "max S_vN");
    svg.save(&out.join("scan_peak_entropy.svg"))?;
    Ok(written + 1)
}

/// Render every figure the artifacts in `dir` support into `out`.
///
/// Returns notes about panels that were skipped.
pub fn emit_plots(dir: &Path, out: &Path) -> Result<Vec<String>> {
    if !dir.is_dir() {
        return Err(CliError::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "no such artifact directory")));
    }
    ensure_dir(out)?;
    let mut notes = Vec::new();
    let mut written = plot_scan(dir, out, &mut notes)?;
    written += plot_comparison(dir, out)?;
    written += plot_run(dir, out, &mut notes)?;
    if written == 0 {
        return Err(CliError::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no diagnostics, dumps, comparison or scan summary found"),
        ));
    }
    Ok(notes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_numbers() {
        assert_eq!(nice_ticks(0.0, 40.0), vec![0.0, 10.0, 20.0, 30.0, 40.0]);
        let t = nice_ticks(-0.3, 0.3);
        assert_eq!(t.len(), 7);
        assert!((t[0] + 0.3).abs() < 1e-12 && (t[6] - 0.3).abs() < 1e-12);
        assert_eq!(label(0.25), "0.25");
        assert_eq!(tick_labels(&[0.0015, 0.002, 0.0025]), ["0.0015", "0.002", "0.0025"]);
        assert_eq!(label(1e-6), "1e-6");
    }

    #[test]
    fn diverging_map_is_white_at_zero() {
        assert_eq!(Cmap::Diverging.color(0.0, -1.0, 1.0), "#f7f7f7");
        assert_eq!(Cmap::Diverging.color(-5.0, -1.0, 1.0), "#2166ac");
    }

    #[test]
    fn downsampling_caps_resolution_and_keeps_the_mean() {
        let img = Image::from_fn(256, 300, |x, y| (x + y) as f64);
        let small = img.downsampled();
        assert!(small.nx <= MAX_CELLS && small.ny <= MAX_CELLS);
        assert_eq!(small.values[0], 1.5);
    }
}
