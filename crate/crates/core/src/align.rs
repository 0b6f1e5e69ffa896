//! Alignment export: the recorded per-step attention matrix as TSV, and an
//! SVG heat grid with rectangles outlining each phrase pair's source and
//! target spans.

use crate::error::{Error, Result};
use crate::loglinear::Move;
use crate::search::NBestEntry;

const CELL: f64 = 28.0;
const MARGIN_LEFT: f64 = 90.0;
const MARGIN_TOP: f64 = 10.0;
const MARGIN_BOTTOM: f64 = 70.0;

/// Source-span x target-span of one phrase pair in a derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhraseBox {
    pub src_start: usize,
    pub src_len: usize,
    pub tgt_start: usize,
    pub tgt_len: usize,
}

/// Walks the derivation to find each phrase pair's target row span.
pub fn phrase_boxes(entry: &NBestEntry) -> Vec<PhraseBox> {
    let mut boxes = Vec::new();
    let mut row = 0usize;
    for mv in &entry.derivation {
        match mv {
            Move::Word(_) => row += 1,
            Move::Phrase { pair, start } => {
                boxes.push(PhraseBox {
                    src_start: *start,
                    src_len: pair.source.len(),
                    tgt_start: row,
                    tgt_len: pair.target.len(),
                });
                row += pair.target.len();
            }
        }
    }
    boxes
}

fn attention_of(entry: &NBestEntry) -> Result<&Vec<Vec<f64>>> {
    entry
        .attention
        .as_ref()
        .ok_or_else(|| Error::Search("attention was not recorded for this entry".into()))
}

/// Tab-separated attention matrix: header row of source tokens, one row per
/// target token.
pub fn export_tsv(entry: &NBestEntry, source_tokens: &[String]) -> Result<String> {
    let attention = attention_of(entry)?;
    let mut out = String::new();
    out.push_str(&format!("target\\source\t{}\n", source_tokens.join("\t")));
    for (tok, row) in entry.tokens.iter().zip(attention) {
        out.push_str(tok);
        for v in row {
            out.push_str(&format!("\t{v:.6}"));
        }
        out.push('\n');
    }
    Ok(out)
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// SVG heat grid of the attention matrix with blue rectangles on top of the
/// cells belonging to each phrase pair.
pub fn export_svg(entry: &NBestEntry, source_tokens: &[String]) -> Result<String> {
    let attention = attention_of(entry)?;
    let rows = attention.len();
    let cols = source_tokens.len();
    let width = MARGIN_LEFT + cols as f64 * CELL + 10.0;
    let height = MARGIN_TOP + rows as f64 * CELL + MARGIN_BOTTOM;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (r, row) in attention.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let x = MARGIN_LEFT + c as f64 * CELL;
            let y = MARGIN_TOP + r as f64 * CELL;
            svg.push_str(&format!(
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{CELL:.1}\" height=\"{CELL:.1}\" \
                 fill=\"black\" fill-opacity=\"{:.4}\" stroke=\"#ccc\" stroke-width=\"0.5\"/>\n",
                v.clamp(0.0, 1.0)
            ));
        }
    }
    for (r, tok) in entry.tokens.iter().enumerate() {
        let y = MARGIN_TOP + r as f64 * CELL + CELL * 0.65;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{y:.1}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 6.0,
            escape_xml(tok)
        ));
    }
    for (c, tok) in source_tokens.iter().enumerate() {
        let x = MARGIN_LEFT + c as f64 * CELL + CELL * 0.5;
        let y = MARGIN_TOP + rows as f64 * CELL + 6.0;
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"start\" \
             transform=\"rotate(45 {x:.1} {y:.1})\">{}</text>\n",
            escape_xml(tok)
        ));
    }
    for b in phrase_boxes(entry) {
        let x = MARGIN_LEFT + b.src_start as f64 * CELL;
        let y = MARGIN_TOP + b.tgt_start as f64 * CELL;
        svg.push_str(&format!(
            "<rect class=\"phrase\" x=\"{x:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{:.1}\" \
             fill=\"none\" stroke=\"#1f6fd0\" stroke-width=\"2.5\"/>\n",
            b.src_len as f64 * CELL,
            b.tgt_len as f64 * CELL
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
