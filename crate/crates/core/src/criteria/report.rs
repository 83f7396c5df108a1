use std::fmt::Write;

use crate::probe::LimitProbe;

use super::{Overall, SmoothnessVerdict};

fn cell(p: &LimitProbe) -> String {
    p.verdict.to_string()
}

/// A human-readable table of a verdict with its probe trails.
pub fn render_text(v: &SmoothnessVerdict) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "transform: {}", v.transform);
    let _ = writeln!(s, "requested k: {}", v.requested_k);
    let _ = writeln!(s, "{:>3}  {:<16}  verdict", "n", "limit");
    for o in &v.per_order {
        for (which, p) in o.gating() {
            let _ = writeln!(s, "{:>3}  {:<16}  {}", o.n, which.to_string(), cell(p));
        }
        for p in &o.h_route {
            let _ = writeln!(s, "{:>3}  {:<16}  {}", o.n, format!("G{}(h-route)", p.direction), cell(p));
        }
        if let Some(d) = &o.route_disagreement {
            let _ = writeln!(s, "     route disagreement: {d}");
        }
    }
    for n in &v.notes {
        let _ = writeln!(s, "note: {n}");
    }
    let _ = writeln!(s, "trails:");
    for o in &v.per_order {
        for (which, p) in o.gating() {
            let _ = write!(s, "  n={} {}:", o.n, which);
            for (t, val) in &p.samples {
                let _ = write!(s, " ({t:e}, {val:.6e})");
            }
            for (t, e) in &p.failures {
                let _ = write!(s, " [t={t:e}: {e}]");
            }
            let _ = writeln!(s);
        }
    }
    let overall = match &v.overall {
        Overall::CkExtensionHolds => format!("C^{} extension holds", v.requested_k),
        Overall::FailsAt { n, which } => format!("fails at n = {n} ({which})"),
        Overall::InconclusiveAt { n, which } => format!("inconclusive at n = {n} ({which})"),
    };
    let _ = writeln!(s, "overall: {overall}");
    s
}
