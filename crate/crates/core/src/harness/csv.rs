//! Versioned CSV emitters for every result type.

use std::io::{self, Write};

use crate::combinatorics::ExteriorBoundary;
use crate::cutpoints::{CutPointRecord, UpperTail};
use crate::estimators::{JPoint, JointReport, MuEstimate, RateDiagnostics, RateReport, SlabPair};
use crate::harness::lemma_check::LemmaRow;
use crate::harness::parallel::ReplicateFailure;
use crate::lattice::BoxSpec;

/// Version of every CSV schema below; bumped when any column changes.
pub const SCHEMA_VERSION: u32 = 1;

/// First line of every CSV: `# cutlab:<name>:v<version>`.
pub fn schema_line<W: Write>(out: &mut W, name: &str) -> io::Result<()> {
    writeln!(out, "# cutlab:{name}:v{SCHEMA_VERSION}")
}

/// Trailing marker of a run that stopped at a failing replicate.
pub fn partial_marker<W: Write>(out: &mut W, failure: &ReplicateFailure) -> io::Result<()> {
    writeln!(out, "# partial: replicate {} failed: {}", failure.index, failure.message.replace('\n', " "))
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn coords(v: &[f64]) -> String {
    v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

fn axis_header(prefix: &str, d: usize) -> String {
    (1..=d).map(|a| format!("{prefix}{a}")).collect::<Vec<_>>().join(",")
}

pub fn write_lemma_rows<W: Write>(rows: &[LemmaRow], mut out: W) -> io::Result<()> {
    schema_line(&mut out, "lemma-check")?;
    writeln!(out, "instance,lemma,d,size,bound,achieved,pass,note")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.instance,
            r.lemma,
            r.dim,
            r.size,
            r.bound,
            r.achieved,
            r.pass,
            r.note.replace(',', ";")
        )?;
    }
    Ok(())
}

pub fn write_mu<W: Write>(est: &MuEstimate, mut out: W) -> io::Result<()> {
    schema_line(&mut out, "estimate-mu")?;
    writeln!(
        out,
        "{},n,L,connected,disconnected,unknown,mean,std_err,ci_lo,ci_hi,min_ratio,l1_floor",
        axis_header("x", est.x.len())
    )?;
    for p in &est.points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            coords(&est.x),
            p.n,
            p.radius,
            p.tally.connected,
            p.tally.disconnected,
            p.tally.unknown,
            opt(p.mean),
            opt(p.std_err),
            opt(p.ci.map(|c| c.0)),
            opt(p.ci.map(|c| c.1)),
            opt(p.min_ratio),
            p.l1_floor
        )?;
    }
    writeln!(out, "# mu_hat={} at n={} trend_ok={}", opt(est.mu_hat), opt(est.mu_hat_n), est.trend_ok)?;
    if let Some(f) = &est.partial {
        partial_marker(&mut out, f)?;
    }
    Ok(())
}

pub fn write_rates<W: Write>(report: &RateReport, mut out: W) -> io::Result<()> {
    schema_line(&mut out, "estimate-rate")?;
    let d = report.estimates.first().map(|e| e.point.x.len()).unwrap_or(0);
    writeln!(
        out,
        "event,n,L,s,{},replicates,hits,misses,unknown,p_hat,p_lo,p_hi,rate,rate_sigma,rate_lo,rate_hi",
        axis_header("x", d)
    )?;
    for e in &report.estimates {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            e.kind,
            e.n,
            e.radius,
            e.point.s,
            coords(&e.point.x),
            e.tally.total(),
            e.tally.hits,
            e.tally.misses,
            e.tally.unknown,
            opt(e.p_hat),
            e.p_ci.0,
            e.p_ci.1,
            opt(e.rate),
            opt(e.rate_sigma),
            e.rate_ci.0,
            e.rate_ci.1
        )?;
    }
    if let Some(f) = &report.partial {
        partial_marker(&mut out, f)?;
    }
    Ok(())
}

/// Property checks per `n` and subadditivity defects.
pub fn write_diagnostics<W: Write>(
    report: &RateReport,
    per_n: &[(u32, RateDiagnostics)],
    mut out: W,
) -> io::Result<()> {
    schema_line(&mut out, "rate-diagnostics")?;
    if let Some((_, d)) = per_n.first() {
        writeln!(out, "# {}", d.note)?;
    }
    writeln!(out, "kind,n,points,lhs,rhs,sigma,pass")?;
    for (n, diag) in per_n {
        for c in &diag.checks {
            let pts = c.points.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";");
            writeln!(out, "{},{},{},{},{},{},{}", c.property, n, pts, c.lhs, c.rhs, c.sigma, c.pass)?;
        }
        for prop in ["centring", "convexity", "homogeneity"] {
            let (ok, total) = diag.summary(prop);
            writeln!(out, "# n={n} {prop}: {ok}/{total} within tolerance, {} skipped overall", diag.skipped)?;
        }
    }
    for s in &report.subadditivity {
        writeln!(out, "subadditivity,{},{}+{},{},0,{},", s.n + s.m, s.n, s.m, s.defect, s.sigma)?;
    }
    Ok(())
}

pub fn write_j<W: Write>(points: &[JPoint], mut out: W) -> io::Result<()> {
    schema_line(&mut out, "estimate-j")?;
    let d = points.first().map(|p| p.argmin_y.len()).unwrap_or(0);
    writeln!(out, "xi,J,argmin_s,{},slack,radius,feasible", axis_header("y", d))?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.xi,
            p.value,
            p.argmin_s,
            coords(&p.argmin_y),
            p.slack,
            p.radius,
            p.feasible
        )?;
    }
    Ok(())
}

pub fn write_joint<W: Write>(report: &JointReport, z: f64, mut out: W) -> io::Result<()> {
    schema_line(&mut out, "upper-tail")?;
    writeln!(
        out,
        "n,L,both,tail_only,cut_only,neither,unknown,cut_given_tail,cgt_lo,cgt_hi,tail_given_cut,tgc_lo,tgc_hi"
    )?;
    for p in &report.points {
        let t = &p.tally;
        let cgt = t.cut_given_tail(z);
        let tgc = t.tail_given_cut(z);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.n,
            p.radius,
            t.both,
            t.tail_only,
            t.cut_only,
            t.neither,
            t.unknown,
            opt(cgt.map(|c| c.0)),
            opt(cgt.map(|c| c.1 .0)),
            opt(cgt.map(|c| c.1 .1)),
            opt(tgc.map(|c| c.0)),
            opt(tgc.map(|c| c.1 .0)),
            opt(tgc.map(|c| c.1 .1))
        )?;
    }
    if let Some(f) = &report.partial {
        partial_marker(&mut out, f)?;
    }
    Ok(())
}

fn tail_name(t: UpperTail) -> &'static str {
    match t {
        UpperTail::Hit => "hit",
        UpperTail::Miss => "miss",
        UpperTail::Disconnected => "disconnected",
        UpperTail::Unknowable => "unknown",
    }
}

/// One row per slab, one for the unconstrained box-to-box distance and
/// one for the paired point-to-point distance, per replicate.
pub fn write_slab_pairs<W: Write>(n: u32, pairs: &[SlabPair], failure: Option<&ReplicateFailure>, mut out: W) -> io::Result<()> {
    schema_line(&mut out, "slab")?;
    writeln!(out, "replicate,n,slab_index,distance,event,contaminated")?;
    for (r, pair) in pairs.iter().enumerate() {
        for (k, s) in pair.record.slabs.iter().enumerate() {
            writeln!(out, "{r},{n},{k},{},{},{}", opt(s.distance), s.event, s.contaminated)?;
        }
        let rec = &pair.record;
        writeln!(out, "{r},{n},box,{},{},{}", opt(rec.box_distance), rec.box_event, rec.box_contaminated)?;
        writeln!(
            out,
            "{r},{n},point,{},{},{}",
            opt(pair.point_distance),
            tail_name(pair.point),
            pair.point == UpperTail::Unknowable
        )?;
    }
    if let Some(f) = failure {
        partial_marker(&mut out, f)?;
    }
    Ok(())
}

pub fn write_cutpoints<W: Write>(spec: &BoxSpec, records: &[CutPointRecord], mut out: W) -> io::Result<()> {
    schema_line(&mut out, "cutpoint-scan")?;
    writeln!(out, "time,{}", axis_header("x", spec.dim()))?;
    for r in records {
        let c: Vec<String> = spec.coords_of(r.location).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{},{}", r.time, c.join(","))?;
    }
    Ok(())
}

pub fn write_path<W: Write>(spec: &BoxSpec, path: &[usize], mut out: W) -> io::Result<()> {
    schema_line(&mut out, "route")?;
    writeln!(out, "step,{}", axis_header("x", spec.dim()))?;
    for (k, &v) in path.iter().enumerate() {
        let c: Vec<String> = spec.coords_of(v).iter().map(|x| x.to_string()).collect();
        writeln!(out, "{k},{}", c.join(","))?;
    }
    Ok(())
}

pub fn write_boundary<W: Write>(b: &ExteriorBoundary, mut out: W) -> io::Result<()> {
    schema_line(&mut out, "exterior-boundary")?;
    writeln!(out, "kind,{}", axis_header("x", b.dim))?;
    for (kind, pts) in [("boundary", &b.boundary), ("interior", &b.interior)] {
        for p in pts {
            let c: Vec<String> = p.iter().map(|x| x.to_string()).collect();
            writeln!(out, "{kind},{}", c.join(","))?;
        }
    }
    Ok(())
}
