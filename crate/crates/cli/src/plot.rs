//! Minimal SVG bar chart for `compare`.

use std::fmt::Write;

/// One group of bars per series label, one bar per engine.
pub struct Chart<'a> {
    pub title: &'a str,
    pub engines: &'a [String],
    /// `(series label, value per engine)`.
    pub series: Vec<(&'a str, Vec<f64>)>,
}

const COLORS: [&str; 5] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1"];

impl Chart<'_> {
    pub fn to_svg(&self) -> String {
        let (w, h, left, top, bottom) = (720.0, 360.0, 60.0, 40.0, 60.0);
        let plot_h = h - top - bottom;
        let max = self
            .series
            .iter()
            .flat_map(|(_, v)| v.iter().copied())
            .fold(0.0f64, f64::max)
            .max(1.0);
        let groups = self.series.len().max(1) as f64;
        let group_w = (w - left - 20.0) / groups;
        let bar_w = group_w * 0.8 / self.engines.len().max(1) as f64;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" font-size="14">{}</text>"#,
            left, self.title
        );
        let _ = writeln!(
            s,
            r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
            top + plot_h,
            w - 20.0,
            top + plot_h
        );
        let _ = writeln!(s, r#"<text x="5" y="{}">{max:.0}</text>"#, top + 4.0);
        let _ = writeln!(s, r#"<text x="5" y="{}">0</text>"#, top + plot_h);
        for (g, (label, values)) in self.series.iter().enumerate() {
            let gx = left + g as f64 * group_w + group_w * 0.1;
            for (e, v) in values.iter().enumerate() {
                let bh = plot_h * v / max;
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"><title>{}: {v:.1}</title></rect>"#,
                    gx + e as f64 * bar_w,
                    top + plot_h - bh,
                    bar_w,
                    bh,
                    COLORS[e % COLORS.len()],
                    self.engines[e]
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{}">{label}</text>"#,
                gx,
                top + plot_h + 16.0
            );
        }
        for (e, name) in self.engines.iter().enumerate() {
            let y = h - 18.0;
            let x = left + e as f64 * 110.0;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{y}">{name}</text>"#,
                y - 9.0,
                COLORS[e % COLORS.len()],
                x + 14.0
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_one_bar_per_engine_and_series() {
        let engines = vec!["basic".to_string(), "cykas".to_string()];
        let svg = Chart {
            title: "t",
            engines: &engines,
            series: vec![("a", vec![1.0, 2.0]), ("b", vec![0.0, 4.0])],
        }
        .to_svg();
        assert_eq!(svg.matches("<title>").count(), 4);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }
}
