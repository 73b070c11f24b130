use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::nli_scoring::ScoreMode;
use crate::{Error, Result};

pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramData {
    pub mode: ScoreMode,
    pub bin_edges: Vec<f64>,
    pub counts_faithful: Vec<usize>,
    pub counts_unfaithful: Vec<usize>,
}

/// Fixed-width histogram over the mode's score range, split by gold class.
/// The top edge belongs to the last bin.
pub fn score_histogram(scores: &[f64], labels: &[u8], mode: ScoreMode, bins: usize) -> Result<HistogramData> {
    if scores.is_empty() {
        return Err(Error::usage("histogram of no scores"));
    }
    if scores.len() != labels.len() {
        return Err(Error::usage("scores and labels differ in length"));
    }
    if bins == 0 {
        return Err(Error::usage("need at least one bin"));
    }
    let (lo, hi) = mode.range();
    let width = (hi - lo) / bins as f64;
    let bin_edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + i as f64 * width })
        .collect();
    let mut faithful = vec![0; bins];
    let mut unfaithful = vec![0; bins];
    for (i, (&s, &l)) in scores.iter().zip(labels).enumerate() {
        if !(lo..=hi).contains(&s) {
            return Err(Error::validation(format!("score {i} = {s} outside [{lo}, {hi}]")));
        }
        let b = (((s - lo) / width) as usize).min(bins - 1);
        match l {
            1 => faithful[b] += 1,
            0 => unfaithful[b] += 1,
            other => return Err(Error::validation(format!("label {i} is {other}"))),
        }
    }
    Ok(HistogramData {
        mode,
        bin_edges,
        counts_faithful: faithful,
        counts_unfaithful: unfaithful,
    })
}

impl HistogramData {
    pub fn bins(&self) -> usize {
        self.counts_faithful.len()
    }

    /// Faithful instances in bins lying entirely inside `[lo, hi]`.
    pub fn faithful_between(&self, lo: f64, hi: f64) -> usize {
        (0..self.bins())
            .filter(|&b| self.bin_edges[b] >= lo && self.bin_edges[b + 1] <= hi)
            .map(|b| self.counts_faithful[b])
            .sum()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["bin_low", "bin_high", "faithful_count", "unfaithful_count"])?;
        for b in 0..self.bins() {
            w.write_record([
                self.bin_edges[b].to_string(),
                self.bin_edges[b + 1].to_string(),
                self.counts_faithful[b].to_string(),
                self.counts_unfaithful[b].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Side-by-side bar chart of both classes as a standalone SVG.
    pub fn to_svg(&self, title: &str) -> String {
        let (w, h, pad) = (640.0, 360.0, 40.0);
        let max = self
            .counts_faithful
            .iter()
            .chain(&self.counts_unfaithful)
            .copied()
            .max()
            .unwrap_or(1)
            .max(1) as f64;
        let slot = (w - 2.0 * pad) / self.bins() as f64;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#,
            w / 2.0,
            escape(title)
        );
        for b in 0..self.bins() {
            for (j, (count, color)) in [
                (self.counts_faithful[b], "#2b8cbe"),
                (self.counts_unfaithful[b], "#e34a33"),
            ]
            .into_iter()
            .enumerate()
            {
                let bh = (h - 2.0 * pad) * count as f64 / max;
                let x = pad + b as f64 * slot + j as f64 * slot / 2.0;
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{bh:.2}" fill="{color}"/>"#,
                    h - pad - bh,
                    slot / 2.0 - 1.0
                );
            }
        }
        let _ = writeln!(s, r#"<text x="{pad}" y="{}">{}</text>"#, h - 10.0, self.bin_edges[0]);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            w - pad,
            h - 10.0,
            self.bin_edges[self.bins()]
        );
        let _ = writeln!(
            s,
            r##"<text x="{}" y="40" text-anchor="end" fill="#2b8cbe">faithful</text>"##,
            w - pad
        );
        let _ = writeln!(
            s,
            r##"<text x="{}" y="55" text-anchor="end" fill="#e34a33">unfaithful</text>"##,
            w - pad
        );
        s.push_str("</svg>\n");
        s
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
