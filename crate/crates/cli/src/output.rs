//! CSV and report emission. Floats use Rust's shortest round-trip decimal
//! form, so every value parses back to the identical `f64`.

use std::io::{self, Write};

use dmra_core::analysis::mean_and_se;
use dmra_core::{BoundsReport, PolicySpec, Trace, TraceSummary};

pub const TRACE_COLUMNS: &str = "slot,backlog_before,arrivals,blocks_mined,u_total,expected_cost,realized_cost,backlog_after,running_avg_cost,running_avg_queue";
pub const SUMMARY_COLUMNS: &str = "policy,k,seed,horizon,time_avg_cost,time_avg_queue,clamp_rate";
pub const ENSEMBLE_COLUMNS: &str = "policy,k,n_seeds,mean_time_avg_cost,se_time_avg_cost,mean_time_avg_queue,se_time_avg_queue,mean_clamp_rate";
pub const BOUNDS_COLUMNS: &str = "k,n_traces,b_const,p_star,u_star_static,p_min,slater_delta,theorem1_bound,theorem2_bound,empirical_cost,empirical_cost_se,empirical_queue,empirical_queue_se,cost_ok,queue_ok";

/// Policy name as it appears in summary rows and file names. Static
/// allocations carry their vector, e.g. `static-30-1.5`.
pub fn policy_name(policy: &PolicySpec) -> String {
    match policy {
        PolicySpec::Static { theta } => {
            let mut name = String::from("static");
            for x in theta.as_slice() {
                name.push('-');
                name.push_str(&x.to_string());
            }
            name
        }
        other => other.label().to_string(),
    }
}

/// `k` column: `K` for fixed, `K0` for growing, empty for baselines.
pub fn policy_k(policy: &PolicySpec) -> String {
    policy.tradeoff().map(|k| k.to_string()).unwrap_or_default()
}

pub fn trace_file_name(policy: &PolicySpec, seed: u64) -> String {
    match policy.tradeoff() {
        Some(k) => format!("trace_{}_k{}_seed{}.csv", policy_name(policy), k, seed),
        None => format!("trace_{}_seed{}.csv", policy_name(policy), seed),
    }
}

fn digest_line<W: Write>(w: &mut W, digest: &str) -> io::Result<()> {
    writeln!(w, "# config_digest={digest}")
}

pub fn write_trace<W: Write>(w: &mut W, trace: &Trace) -> io::Result<()> {
    digest_line(w, &trace.config_digest)?;
    writeln!(w, "{TRACE_COLUMNS}")?;
    for (i, r) in trace.records.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.slot,
            r.backlog_before,
            r.arrivals,
            r.blocks_mined,
            r.u_total,
            r.expected_cost,
            r.realized_cost,
            r.backlog_after,
            trace.running_avg_cost[i],
            trace.running_avg_queue[i],
        )?;
    }
    Ok(())
}

pub fn write_summary<W: Write>(w: &mut W, digest: &str, rows: &[TraceSummary]) -> io::Result<()> {
    digest_line(w, digest)?;
    writeln!(w, "{SUMMARY_COLUMNS}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            policy_name(&r.policy),
            policy_k(&r.policy),
            r.seed,
            r.horizon,
            r.time_avg_cost,
            r.time_avg_queue,
            r.clamp_rate
        )?;
    }
    Ok(())
}

/// One row per policy: mean and standard error across seeds.
pub fn write_ensemble<W: Write>(w: &mut W, digest: &str, rows: &[TraceSummary]) -> io::Result<()> {
    digest_line(w, digest)?;
    writeln!(w, "{ENSEMBLE_COLUMNS}")?;
    let mut groups: Vec<(&PolicySpec, Vec<&TraceSummary>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|(p, _)| **p == r.policy) {
            Some((_, members)) => members.push(r),
            None => groups.push((&r.policy, vec![r])),
        }
    }
    for (policy, members) in groups {
        let costs: Vec<f64> = members.iter().map(|r| r.time_avg_cost).collect();
        let queues: Vec<f64> = members.iter().map(|r| r.time_avg_queue).collect();
        let (mc, sc) = mean_and_se(&costs);
        let (mq, sq) = mean_and_se(&queues);
        let clamp = members.iter().map(|r| r.clamp_rate).sum::<f64>() / members.len() as f64;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            policy_name(policy),
            policy_k(policy),
            members.len(),
            mc,
            sc,
            mq,
            sq,
            clamp
        )?;
    }
    Ok(())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| x.to_string())
}

/// Flat `key = value` report.
pub fn write_report<W: Write>(w: &mut W, digest: &str, r: &BoundsReport) -> io::Result<()> {
    writeln!(w, "config_digest = {digest}")?;
    writeln!(w, "k = {}", r.k)?;
    writeln!(w, "n_traces = {}", r.n_traces)?;
    writeln!(w, "b_const = {}", r.b_const)?;
    writeln!(w, "p_star = {}", r.p_star)?;
    writeln!(w, "u_star_static = {}", r.u_star_static)?;
    writeln!(w, "p_min = {}", r.p_min)?;
    writeln!(w, "slater_delta = {}", r.slater_delta)?;
    writeln!(w, "theorem1_bound = {}", r.theorem1_bound)?;
    writeln!(w, "theorem2_bound = {}", opt(r.theorem2_bound))?;
    writeln!(w, "empirical_cost = {}", r.empirical_cost)?;
    writeln!(w, "empirical_cost_se = {}", r.empirical_cost_se)?;
    writeln!(w, "empirical_queue = {}", r.empirical_queue)?;
    writeln!(w, "empirical_queue_se = {}", r.empirical_queue_se)?;
    writeln!(w, "cost_ok = {}", r.cost_ok)?;
    writeln!(w, "queue_ok = {}", opt(r.queue_ok))
}

pub fn write_report_csv<W: Write>(
    w: &mut W,
    digest: &str,
    reports: &[BoundsReport],
) -> io::Result<()> {
    digest_line(w, digest)?;
    writeln!(w, "{BOUNDS_COLUMNS}")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.n_traces,
            r.b_const,
            r.p_star,
            r.u_star_static,
            r.p_min,
            r.slater_delta,
            r.theorem1_bound,
            opt(r.theorem2_bound),
            r.empirical_cost,
            r.empirical_cost_se,
            r.empirical_queue,
            r.empirical_queue_se,
            r.cost_ok,
            opt(r.queue_ok)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use dmra_core::{run, ArrivalSpec, ResourceVector, SystemParams};

    #[test]
    fn names() {
        let stat = PolicySpec::Static {
            theta: ResourceVector::new(vec![30.0, 1.5]),
        };
        assert_eq!(policy_name(&stat), "static-30-1.5");
        assert_eq!(
            trace_file_name(&PolicySpec::Dmra { k: 20.0 }, 3),
            "trace_dmra_k20_seed3.csv"
        );
        assert_eq!(
            trace_file_name(&PolicySpec::DmraVaryingK { k0: 2.5 }, 1),
            "trace_dmra_varying_k2.5_seed1.csv"
        );
        assert_eq!(
            trace_file_name(&PolicySpec::MaxMining, 7),
            "trace_maxmining_seed7.csv"
        );
    }

    #[test]
    fn trace_csv_layout_and_round_trip() {
        let p = SystemParams::default();
        let trace = run(
            &p,
            &ArrivalSpec::default(),
            &PolicySpec::Dmra { k: 20.0 },
            30,
            4,
        )
        .unwrap()
        .with_digest("abc");
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# config_digest=abc"));
        assert_eq!(lines.next(), Some(TRACE_COLUMNS));
        for (line, r) in lines.zip(&trace.records) {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f.len(), 10);
            assert_eq!(f[0].parse::<u64>().unwrap(), r.slot);
            assert_eq!(f[5].parse::<f64>().unwrap(), r.expected_cost);
            assert_eq!(f[7].parse::<u64>().unwrap(), r.backlog_after);
        }
    }

    #[test]
    fn report_marks_missing_queue_bound() {
        let report = BoundsReport {
            k: 20.0,
            b_const: 1.0,
            p_star: 0.0,
            u_star_static: 0.0,
            p_min: 0.0,
            slater_delta: -1.0,
            theorem1_bound: 1.0,
            theorem2_bound: None,
            n_traces: 1,
            empirical_cost: 0.0,
            empirical_cost_se: 0.0,
            empirical_queue: 0.0,
            empirical_queue_se: 0.0,
            cost_ok: true,
            queue_ok: None,
        };
        let mut buf = Vec::new();
        write_report(&mut buf, "d", &report).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("theorem2_bound = n/a\n"));
        assert!(text.ends_with("queue_ok = n/a\n"));
    }
}
