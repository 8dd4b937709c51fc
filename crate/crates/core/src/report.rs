//! Human-readable views of a results document: a treatment table
//! and an optional SVG plot of density per row.

use std::fmt::Write as _;

use crate::io::results::{Measure, ResultsDoc};

fn pm(m: Option<&Measure>, scale: f64, digits: usize) -> String {
    match m {
        Some(m) if m.sigma.is_finite() => format!("{:.*} ± {:.*}", digits, m.value * scale, digits, m.sigma * scale),
        Some(m) => format!("{:.*} ± inf", digits, m.value * scale),
        None => "n/a".into(),
    }
}

pub fn text_table(doc: &ResultsDoc) -> String {
    let mut out = String::new();
    let title = doc.scenario.as_deref().unwrap_or(&doc.kind);
    let _ = writeln!(out, "{title} (seed {})", doc.seeds.master);
    let header = [
        "treatment",
        "mean p_z [eÅ]",
        "density [TLS/(μm³·GHz)]",
        "tanδ⁰ fit [1e-3]",
        "tanδ⁰ calc [1e-3]",
        "n_c [1e-3]",
        "fits",
        "crossings/trace",
    ];
    let rows: Vec<[String; 8]> = doc
        .rows
        .iter()
        .map(|r| {
            let lf = r.loss_fit.as_ref();
            [
                r.treatment.clone(),
                pm(r.mean_p_z.as_ref(), 1.0, 2),
                pm(Some(&r.density), 1.0, 0),
                pm(lf.map(|l| &l.tan0_tls), 1e3, 2),
                pm(r.tan_delta_calc.as_ref(), 1e3, 2),
                pm(lf.map(|l| &l.n_c), 1e3, 0),
                format!("{} ({} eligible)", r.n_fits, r.n_eligible),
                pm(Some(&r.crossing_rate), 1.0, 3),
            ]
        })
        .collect();
    let width = |i: usize| rows.iter().map(|r| r[i].chars().count()).chain([header[i].chars().count()]).max().unwrap_or(0);
    let widths: Vec<usize> = (0..8).map(width).collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect::<Vec<_>>()
            .join(" | ")
    };
    let _ = writeln!(out, "{}", line(&header.map(String::from)));
    let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    for r in &rows {
        let _ = writeln!(out, "{}", line(r));
    }
    for (i, l) in doc.loss_fits.iter().enumerate() {
        let _ = writeln!(out, "loss fit {}: tanδ⁰ {} (1e-3), n_c {} (1e-3)", i + 1, pm(Some(&l.tan0_tls), 1e3, 2), pm(Some(&l.n_c), 1e3, 0));
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Density of each row with its one-sigma bar.
pub fn density_svg(doc: &ResultsDoc) -> String {
    let (w, h, left, bottom, top) = (640.0, 360.0, 70.0, 80.0, 20.0);
    let n = doc.rows.len().max(1) as f64;
    let ymax = doc
        .rows
        .iter()
        .map(|r| r.density.value + if r.density.sigma.is_finite() { r.density.sigma } else { 0.0 })
        .fold(1.0, f64::max)
        * 1.1;
    let plot_h = h - bottom - top;
    let y = |v: f64| top + plot_h * (1.0 - v / ymax);
    let x = |i: usize| left + (w - left - 20.0) * (i as f64 + 0.5) / n;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#, h - bottom);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, h - bottom, w - 20.0);
    for k in 0..=4 {
        let v = ymax * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.0}</text>"#, left - 6.0, y(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">TLS/(μm³·GHz)</text>"#, top + plot_h / 2.0, top + plot_h / 2.0);
    for (i, r) in doc.rows.iter().enumerate() {
        let (cx, v) = (x(i), r.density.value);
        if r.density.sigma.is_finite() {
            let (lo, hi) = ((v - r.density.sigma).max(0.0), v + r.density.sigma);
            let _ = writeln!(s, r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#, y(lo), y(hi));
        }
        let _ = writeln!(s, r#"<circle cx="{cx:.1}" cy="{:.1}" r="4" fill="steelblue"/>"#, y(v));
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="end" transform="rotate(-30 {cx:.1} {:.1})">{}</text>"#,
            h - bottom + 16.0,
            h - bottom + 16.0,
            escape(&r.treatment)
        );
    }
    s.push_str("</svg>\n");
    s
}
