//! Text and JSON tables for `tabg stats`.

use serde_json::{json, Value};
use tabg::pumping::{index_for, stats as stratum_stats, strata, Multiset};
use tabg::{Automaton, Position, Result, Run};

fn set(ps: &[Position]) -> String {
    let items: Vec<String> = ps.iter().map(|p| p.to_string()).collect();
    format!("{{{}}}", items.join(","))
}

fn multiset(m: &Multiset) -> String {
    let items: Vec<String> = m
        .iter()
        .map(|t| format!("<{}>", t.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")))
        .collect();
    format!("[{}]", items.join(","))
}

fn table(header: [&str; 4], rows: &[[String; 4]]) -> String {
    let mut width = header.map(str::len);
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: [&str; 4]| {
        let mut s = String::new();
        for (k, (c, w)) in cells.iter().zip(width).enumerate() {
            if k + 1 == cells.len() {
                s += c;
            } else {
                s += &format!("{c:<w$}  ");
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    for r in rows {
        out += &line([&r[0], &r[1], &r[2], &r[3]]);
    }
    out
}

/// Strata from the top down, then their statistics over the state order.
pub fn stats(a: &Automaton, run: &Run) -> Result<(String, Value)> {
    let st = strata(run);
    let index = index_for(a, run)?;
    let stats = stratum_stats(a, run, &st, &index)?;
    let mut pos_rows = Vec::new();
    let mut stat_rows = Vec::new();
    let mut levels = Vec::new();
    for i in (1..=st.height()).rev() {
        let (s, m) = (st.at(i), &stats[i - 1]);
        pos_rows.push([i.to_string(), set(&s.h), set(&s.h_check), set(&s.h_ring)]);
        stat_rows.push([i.to_string(), multiset(&m.h), multiset(&m.h_check), multiset(&m.h_ring)]);
        let strs = |ps: &[Position]| ps.iter().map(|p| p.to_string()).collect::<Vec<_>>();
        levels.push(json!({
            "i": i,
            "h": strs(&s.h), "h_check": strs(&s.h_check), "h_ring": strs(&s.h_ring),
            "r_h": m.h, "r_h_check": m.h_check, "r_h_ring": m.h_ring,
        }));
    }
    let mut text = table(["i", "H", "H_check", "H_ring"], &pos_rows);
    text += &format!("\nstates <{}>\n", a.states().join(","));
    text += &table(["i", "r_H", "r_H_check", "r_H_ring"], &stat_rows);
    Ok((text, json!({"command": "stats", "states": a.states(), "levels": levels})))
}
